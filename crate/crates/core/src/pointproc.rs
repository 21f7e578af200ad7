//! Finite point measures on `[0, 1] × (ℝ \ {0})`.
//!
//! Carries the time-space exceedance measure `Σ δ(i/n, X_i/a_n)`, the
//! summation functional that turns a measure into a step path, and the
//! membership checks for the set on which that functional is M1-continuous.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cadlag::CadlagPath;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub time: f64,
    pub mark: f64,
}

/// Finite multiset of atoms. Atom order is preserved; it decides the
/// summation order of atoms that share a time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointMeasure {
    atoms: Vec<Atom>,
}

impl PointMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if !(0.0..=1.0).contains(&a.time) {
                return Err(Error::InvalidMeasure(format!("atom time {} outside [0, 1]", a.time)));
            }
            if !a.mark.is_finite() || a.mark == 0.0 {
                return Err(Error::InvalidMeasure(format!("atom mark {} must be finite and nonzero", a.mark)));
            }
        }
        Ok(Self { atoms })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(time, mark)| Atom { time, mark }).collect())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Restriction to `[0, 1] × E_u`: keeps atoms with `|mark| > u`.
    pub fn restrict(&self, u: f64) -> Self {
        Self { atoms: self.atoms.iter().copied().filter(|a| a.mark.abs() > u).collect() }
    }

    pub fn count_above(&self, u: f64) -> usize {
        self.atoms.iter().filter(|a| a.mark.abs() > u).count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "mark"])?;
        for a in &self.atoms {
            w.serialize((a.time, a.mark))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for rec in csv::Reader::from_reader(reader).deserialize::<(f64, f64)>() {
            pairs.push(rec?);
        }
        Self::from_pairs(pairs)
    }

    /// JSON array of `[time, mark]` pairs.
    pub fn to_json(&self) -> Result<String> {
        let pairs: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.time, a.mark)).collect();
        Ok(serde_json::to_string(&pairs)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = serde_json::from_str(text)?;
        Self::from_pairs(pairs)
    }
}

/// `Σ_i δ(i/n, X_i/a_n)` over the nonzero entries of `series`.
pub fn build_time_space_measure(series: &[f64], a_n: f64) -> Result<PointMeasure> {
    if !(a_n > 0.0) {
        return Err(Error::InvalidParameter(format!("a_n must be positive, got {a_n}")));
    }
    if series.is_empty() {
        return Err(Error::InvalidParameter("series is empty".into()));
    }
    let n = series.len() as f64;
    let atoms = series
        .iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, x)| Atom { time: (i + 1) as f64 / n, mark: x / a_n })
        .collect();
    PointMeasure::new(atoms)
}

/// Summation functional: `t ↦ Σ_{t_i ≤ t} x_i 1{|x_i| > u}`.
///
/// Atoms sharing a time become one jump; an atom at time 0 moves the initial
/// value.
pub fn summation_functional(m: &PointMeasure, u: f64) -> Result<CadlagPath> {
    if !(u > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level u must be positive, got {u}")));
    }
    let mut kept: Vec<Atom> = m.atoms.iter().copied().filter(|a| a.mark.abs() > u).collect();
    // Stable: atoms at equal times keep their measure order.
    kept.sort_by(|a, b| a.time.total_cmp(&b.time));
    let initial: f64 = kept.iter().filter(|a| a.time == 0.0).map(|a| a.mark).sum();
    CadlagPath::from_increments(initial, kept.iter().filter(|a| a.time > 0.0).map(|a| (a.time, a.mark)))
}

/// Membership of a measure in the continuity set of the summation functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    /// No atom above `u` at time 0 or 1 and no mark exactly `±u`.
    pub in_lambda1: bool,
    /// No time carries atoms of both signs.
    pub in_lambda2: bool,
    pub witnesses: Vec<Atom>,
}

impl LambdaReport {
    pub fn in_lambda(&self) -> bool {
        self.in_lambda1 && self.in_lambda2
    }
}

/// Checks both continuity conditions. Comparisons with `±u` are bit-exact.
pub fn lambda_membership(m: &PointMeasure, u: f64) -> LambdaReport {
    let mut witnesses = Vec::new();
    let mut in_lambda1 = true;
    for a in &m.atoms {
        let boundary_time = (a.time == 0.0 || a.time == 1.0) && a.mark.abs() > u;
        if boundary_time || a.mark.abs() == u {
            in_lambda1 = false;
            witnesses.push(*a);
        }
    }
    let mut sorted = m.atoms.clone();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut in_lambda2 = true;
    for group in sorted.chunk_by(|a, b| a.time == b.time) {
        let pos = group.iter().any(|a| a.mark > 0.0);
        let neg = group.iter().any(|a| a.mark < 0.0);
        if pos && neg {
            in_lambda2 = false;
            witnesses.extend_from_slice(group);
        }
    }
    LambdaReport { in_lambda1, in_lambda2, witnesses }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cadlag::m1_distance;

    #[test]
    fn measure_validation() {
        assert!(PointMeasure::from_pairs([(0.5, 0.0)]).is_err());
        assert!(PointMeasure::from_pairs([(1.5, 1.0)]).is_err());
        assert!(PointMeasure::from_pairs([(0.5, f64::INFINITY)]).is_err());
        assert!(PointMeasure::from_pairs([(0.0, -1.0), (1.0, 2.0)]).is_ok());
    }

    #[test]
    fn time_space_measure_definition() {
        let m = build_time_space_measure(&[2.0, -4.0], 2.0).unwrap();
        assert_eq!(m.atoms(), &[Atom { time: 0.5, mark: 1.0 }, Atom { time: 1.0, mark: -2.0 }]);
        assert!(build_time_space_measure(&[0.0, 0.0, 0.0], 1.0).unwrap().is_empty());
        assert!(build_time_space_measure(&[1.0], 0.0).is_err());
        assert!(build_time_space_measure(&[], 1.0).is_err());
    }

    #[test]
    fn restriction_keeps_strict_exceedances() {
        let m = PointMeasure::from_pairs([(0.1, 1.0), (0.2, -1.5), (0.3, 0.5)]).unwrap();
        assert_eq!(m.restrict(1.0).len(), 1);
        assert_eq!(m.count_above(0.4), 3);
    }

    #[test]
    fn summation_functional_example() {
        let m = PointMeasure::from_pairs([(0.3, 2.0), (0.6, -0.5), (0.7, 3.0)]).unwrap();
        let p = summation_functional(&m, 1.0).unwrap();
        assert_eq!(p, CadlagPath::new(0.0, [(0.3, 2.0), (0.7, 5.0)]).unwrap());
        assert_eq!(summation_functional(&PointMeasure::empty(), 1.0).unwrap(), CadlagPath::constant(0.0));
        assert!(summation_functional(&m, 0.0).is_err());
    }

    #[test]
    fn summation_merges_same_time_atoms() {
        let m = PointMeasure::from_pairs([(0.5, 2.0), (0.2, 1.5), (0.5, 3.0)]).unwrap();
        let p = summation_functional(&m, 1.0).unwrap();
        assert_eq!(p.jump_count(), 2);
        assert_eq!(p.eval(0.5), 6.5);
    }

    #[test]
    fn summation_atom_at_time_zero_sets_initial_value() {
        let m = PointMeasure::from_pairs([(0.0, 2.0), (0.5, 3.0)]).unwrap();
        let p = summation_functional(&m, 1.0).unwrap();
        assert_eq!(p.initial_value(), 2.0);
        assert_eq!(p.terminal_value(), 5.0);
    }

    #[test]
    fn summation_matches_truncated_partial_sums() {
        let series = [0.5, -3.0, 4.0, 0.1, 2.5, -0.2, 7.0, 0.0];
        let a_n = 2.0;
        let u = 1.0;
        let path = summation_functional(&build_time_space_measure(&series, a_n).unwrap(), u).unwrap();
        let n = series.len();
        let mut direct = 0.0;
        for (k, x) in series.iter().enumerate() {
            if (x / a_n).abs() > u {
                direct += x / a_n;
            }
            assert_eq!(path.eval((k + 1) as f64 / n as f64), direct);
        }
    }

    #[test]
    fn lambda_examples() {
        let same = PointMeasure::from_pairs([(0.5, 2.0), (0.5, 3.0)]).unwrap();
        assert!(lambda_membership(&same, 1.0).in_lambda2);
        let opposite = PointMeasure::from_pairs([(0.5, 2.0), (0.5, -3.0)]).unwrap();
        let r = lambda_membership(&opposite, 1.0);
        assert!(!r.in_lambda2);
        assert_eq!(r.witnesses.len(), 2);
        let boundary = PointMeasure::from_pairs([(0.0, 2.0)]).unwrap();
        assert!(!lambda_membership(&boundary, 1.0).in_lambda1);
        let below = PointMeasure::from_pairs([(0.0, 0.5), (1.0, -0.5)]).unwrap();
        assert!(lambda_membership(&below, 1.0).in_lambda1);
        let on_level = PointMeasure::from_pairs([(0.4, -1.0)]).unwrap();
        assert!(!lambda_membership(&on_level, 1.0).in_lambda1);
        assert!(lambda_membership(&on_level, 1.0 + f64::EPSILON).in_lambda1);
    }

    #[test]
    fn serialization_formats() {
        let m = PointMeasure::from_pairs([(0.25, 1.5), (0.75, -2.0)]).unwrap();
        assert_eq!(m.to_json().unwrap(), "[[0.25,1.5],[0.75,-2.0]]");
        assert_eq!(PointMeasure::from_json(&m.to_json().unwrap()).unwrap(), m);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"time,mark\n"));
        assert_eq!(PointMeasure::read_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn split_cluster_stays_m1_close() {
        // A same-sign cluster at one time versus the same atoms spread over
        // a short interval: close in M1, far in the uniform metric.
        let joint = PointMeasure::from_pairs([(0.5, 2.0), (0.5, 1.5)]).unwrap();
        let split = PointMeasure::from_pairs([(0.499, 2.0), (0.5005, 1.5)]).unwrap();
        let a = summation_functional(&joint, 1.0).unwrap();
        let b = summation_functional(&split, 1.0).unwrap();
        let d = m1_distance(&a, &b, 1e-9).unwrap();
        assert!(d <= 1e-3 + 1e-9, "{d}");
    }
}

//! Càdlàg step paths on `[0, 1]` and distances between them.
//!
//! A [`CadlagPath`] is piecewise constant and right-continuous: an initial
//! value followed by finitely many jumps, each recorded as the jump time and
//! the value taken from that time on.
//!
//! Three distances are provided:
//!
//! - [`uniform_distance`]: exact supremum distance.
//! - [`l1_distance`]: exact integral of `|a - b|`.
//! - [`m1_distance`]: Skorokhod's M1 distance. The completed graph of a step
//!   path is a staircase polyline (horizontal runs joined by vertical jump
//!   segments). A parametric representation is a monotone traversal of that
//!   polyline, so the M1 distance is the Fréchet distance between the two
//!   completed graphs under the ground cost `max(|Δt|, |Δx|)`. It is computed
//!   by the free-space reachability sweep of Alt and Godau, wrapped in a
//!   binary search on the leash length.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance of [`m1_distance`].
pub const DEFAULT_M1_TOL: f64 = 1e-6;

/// Slack used when comparing free-space interval endpoints with 0 and 1.
const EDGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    /// Value of the path from `time` on (until the next jump).
    pub value: f64,
}

/// Piecewise-constant right-continuous function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CadlagPath {
    initial: f64,
    jumps: Vec<Jump>,
}

impl CadlagPath {
    /// Builds a path from its initial value and `(time, post_jump_value)`
    /// pairs. Times must be strictly increasing and lie in `(0, 1]`. Jumps
    /// that do not change the value are dropped.
    pub fn new(initial: f64, jumps: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        if !initial.is_finite() {
            return Err(Error::InvalidPath(format!("initial value {initial} is not finite")));
        }
        let mut kept: Vec<Jump> = Vec::new();
        let mut prev_time = 0.0;
        let mut prev_value = initial;
        for (time, value) in jumps {
            if !(time > 0.0 && time <= 1.0) {
                return Err(Error::InvalidPath(format!("jump time {time} outside (0, 1]")));
            }
            if !value.is_finite() {
                return Err(Error::InvalidPath(format!("jump value {value} at {time} is not finite")));
            }
            if time <= prev_time {
                return Err(Error::InvalidPath(format!(
                    "jump times must be strictly increasing: {time} after {prev_time}"
                )));
            }
            prev_time = time;
            if value != prev_value {
                kept.push(Jump { time, value });
                prev_value = value;
            }
        }
        Ok(Self { initial, jumps: kept })
    }

    pub fn constant(value: f64) -> Self {
        Self { initial: value, jumps: Vec::new() }
    }

    /// Builds a path from an initial value and `(time, increment)` pairs with
    /// nondecreasing times in `(0, 1]`. Increments sharing a time are summed in
    /// the order given and produce a single jump.
    pub fn from_increments(initial: f64, increments: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut jumps: Vec<(f64, f64)> = Vec::new();
        let mut level = initial;
        let mut last_time = 0.0;
        for (time, dx) in increments {
            if time < last_time {
                return Err(Error::InvalidPath(format!("increment times must be nondecreasing: {time} after {last_time}")));
            }
            level += dx;
            match jumps.last_mut() {
                Some(last) if last.0 == time => last.1 = level,
                _ => jumps.push((time, level)),
            }
            last_time = time;
        }
        Self::new(initial, jumps)
    }

    pub fn initial_value(&self) -> f64 {
        self.initial
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// Value at `t` (right-continuous).
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.jumps.partition_point(|j| j.time <= t);
        if idx == 0 {
            self.initial
        } else {
            self.jumps[idx - 1].value
        }
    }

    /// Left limit at `t`; equals the initial value at `t = 0`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let idx = self.jumps.partition_point(|j| j.time < t);
        if idx == 0 {
            self.initial
        } else {
            self.jumps[idx - 1].value
        }
    }

    pub fn terminal_value(&self) -> f64 {
        self.jumps.last().map_or(self.initial, |j| j.value)
    }

    /// `true` if the path never decreases.
    pub fn is_nondecreasing(&self) -> bool {
        let mut prev = self.initial;
        self.jumps.iter().all(|j| {
            let ok = j.value >= prev;
            prev = j.value;
            ok
        })
    }

    pub fn is_nonincreasing(&self) -> bool {
        let mut prev = self.initial;
        self.jumps.iter().all(|j| {
            let ok = j.value <= prev;
            prev = j.value;
            ok
        })
    }

    /// Pointwise negation.
    pub fn negated(&self) -> Self {
        Self {
            initial: -self.initial,
            jumps: self.jumps.iter().map(|j| Jump { time: j.time, value: -j.value }).collect(),
        }
    }

    pub fn completed_graph(&self) -> CompletedGraph {
        completed_graph(self)
    }

    /// Writes the path as CSV with header `t,value`: the initial value at
    /// `t = 0` followed by one row per jump.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "value"])?;
        w.serialize((0.0, self.initial))?;
        for j in &self.jumps {
            w.serialize((j.time, j.value))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV format of [`CadlagPath::write_csv`]. Rows may be in any
    /// order; a row at `t = 0` is required and duplicate times are rejected.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t: f64,
            value: f64,
        }
        let mut rows: Vec<Row> = Vec::new();
        for rec in csv::Reader::from_reader(reader).deserialize() {
            rows.push(rec?);
        }
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        if let Some(w) = rows.windows(2).find(|w| w[0].t == w[1].t) {
            return Err(Error::InvalidPath(format!("duplicate time {} in path file", w[0].t)));
        }
        let first = rows.first().ok_or_else(|| Error::InvalidPath("empty path file".into()))?;
        if first.t != 0.0 {
            return Err(Error::InvalidPath("path file has no row at t = 0".into()));
        }
        Self::new(first.value, rows[1..].iter().map(|r| (r.t, r.value)))
    }
}

/// Completed graph of a step path as a polyline in graph order.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedGraph {
    points: Vec<(f64, f64)>,
}

impl CompletedGraph {
    /// Vertices `(time, value)` in traversal order.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// Value of the horizontal segment covering time `t`, if `t` is not a
    /// jump time. At `t = 1` the last horizontal segment is used.
    pub fn horizontal_value(&self, t: f64) -> Option<f64> {
        self.segments()
            .filter(|(a, b)| a.1 == b.1 && a.0 < b.0)
            .find(|(a, b)| a.0 <= t && (t < b.0 || (b.0 == 1.0 && t == 1.0)))
            .map(|(a, _)| a.1)
    }

    /// Total length under the max-norm.
    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| linf(a, b)).sum()
    }
}

/// Staircase polyline: horizontal runs joined by vertical segments from the
/// left limit to the post-jump value at each jump time.
pub fn completed_graph(path: &CadlagPath) -> CompletedGraph {
    let mut points = Vec::with_capacity(2 * path.jumps.len() + 2);
    points.push((0.0, path.initial));
    let mut level = path.initial;
    for j in &path.jumps {
        points.push((j.time, level));
        points.push((j.time, j.value));
        level = j.value;
    }
    if points.last().map(|p| p.0) != Some(1.0) {
        points.push((1.0, level));
    }
    CompletedGraph { points }
}

/// Walks the union of both paths' breakpoints, yielding
/// `(interval_start, interval_end, a_value, b_value)` for each interval on
/// which both paths are constant.
fn common_intervals(a: &CadlagPath, b: &CadlagPath) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::with_capacity(a.jumps.len() + b.jumps.len() + 1);
    let (mut i, mut k) = (0, 0);
    let (mut va, mut vb) = (a.initial, b.initial);
    let mut t = 0.0;
    loop {
        let ta = a.jumps.get(i).map_or(f64::INFINITY, |j| j.time);
        let tb = b.jumps.get(k).map_or(f64::INFINITY, |j| j.time);
        let next = ta.min(tb);
        if next.is_infinite() {
            // Zero-length when the last jump sits at t = 1.
            out.push((t, 1.0, va, vb));
            return out;
        }
        out.push((t, next, va, vb));
        if ta == next {
            va = a.jumps[i].value;
            i += 1;
        }
        if tb == next {
            vb = b.jumps[k].value;
            k += 1;
        }
        t = next;
    }
}

/// `sup_t |a(t) - b(t)|`, exact for step paths.
pub fn uniform_distance(a: &CadlagPath, b: &CadlagPath) -> f64 {
    common_intervals(a, b)
        .into_iter()
        .map(|(_, _, va, vb)| (va - vb).abs())
        .fold(0.0, f64::max)
}

/// `∫_0^1 |a(t) - b(t)| dt`, exact for step paths.
pub fn l1_distance(a: &CadlagPath, b: &CadlagPath) -> f64 {
    common_intervals(a, b)
        .into_iter()
        .map(|(s, e, va, vb)| (e - s) * (va - vb).abs())
        .sum()
}

#[inline]
fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

type Interval = Option<(f64, f64)>;

/// Parameters `s ∈ [0, 1]` with `|p - (a + s (b - a))|_∞ ≤ eps`.
#[inline]
fn free_interval(p: (f64, f64), a: (f64, f64), b: (f64, f64), eps: f64) -> Interval {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    for (pk, ak, bk) in [(p.0, a.0, b.0), (p.1, a.1, b.1)] {
        let d = bk - ak;
        let off = pk - ak;
        if d == 0.0 {
            if off.abs() > eps {
                return None;
            }
        } else {
            let s1 = (off - eps) / d;
            let s2 = (off + eps) / d;
            lo = lo.max(s1.min(s2));
            hi = hi.min(s1.max(s2));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

#[inline]
fn starts_at_zero(iv: Interval) -> bool {
    matches!(iv, Some((lo, _)) if lo <= EDGE_SLACK)
}

#[inline]
fn reaches_one(iv: Interval) -> bool {
    matches!(iv, Some((_, hi)) if hi >= 1.0 - EDGE_SLACK)
}

#[inline]
fn clip_from(iv: Interval, from: f64) -> Interval {
    iv.and_then(|(lo, hi)| {
        let lo = lo.max(from);
        (lo <= hi).then_some((lo, hi))
    })
}

/// Decides whether the Fréchet distance between polylines `p` and `q`
/// (max-norm ground cost) is at most `eps`.
fn frechet_decide(p: &[(f64, f64)], q: &[(f64, f64)], eps: f64) -> bool {
    let n = p.len() - 1;
    let m = q.len() - 1;
    if linf(p[0], q[0]) > eps || linf(p[n], q[m]) > eps {
        return false;
    }
    // reach_bottom[i]: reachable part of the bottom edge of cell (i, j) for
    // the current row j, parametrised along segment p_i -> p_{i+1}.
    let mut reach_bottom: Vec<Interval> = Vec::with_capacity(n);
    let mut prev_ok = true;
    for i in 0..n {
        let free = free_interval(q[0], p[i], p[i + 1], eps);
        let r = if prev_ok && starts_at_zero(free) { free } else { None };
        prev_ok = reaches_one(r);
        reach_bottom.push(r);
    }
    let mut left_column_ok = true;
    let mut next_bottom: Vec<Interval> = vec![None; n];
    let mut last_right: Interval = None;
    for j in 0..m {
        // Left edge of cell (0, j), parametrised along q_j -> q_{j+1}.
        let free = free_interval(p[0], q[j], q[j + 1], eps);
        let mut reach_left = if left_column_ok && starts_at_zero(free) { free } else { None };
        left_column_ok = reaches_one(reach_left);
        for i in 0..n {
            let bottom = reach_bottom[i];
            let right_free = free_interval(p[i + 1], q[j], q[j + 1], eps);
            let right = if bottom.is_some() {
                right_free
            } else if let Some((lo, _)) = reach_left {
                clip_from(right_free, lo)
            } else {
                None
            };
            let top_free = free_interval(q[j + 1], p[i], p[i + 1], eps);
            let top = if reach_left.is_some() {
                top_free
            } else if let Some((lo, _)) = bottom {
                clip_from(top_free, lo)
            } else {
                None
            };
            next_bottom[i] = top;
            reach_left = right;
        }
        last_right = reach_left;
        std::mem::swap(&mut reach_bottom, &mut next_bottom);
    }
    reaches_one(last_right) || reaches_one(reach_bottom[n - 1])
}

/// Skorokhod M1 distance between two step paths, to absolute accuracy `tol`.
///
/// The returned value is the smallest leash length found feasible by the
/// bisection, so it never undershoots the true distance by more than the
/// floating-point error of the decision procedure.
pub fn m1_distance(a: &CadlagPath, b: &CadlagPath, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("m1 tolerance must be positive, got {tol}")));
    }
    let ga = a.completed_graph();
    let gb = b.completed_graph();
    let (p, q) = (ga.points(), gb.points());
    let n = p.len() - 1;
    let m = q.len() - 1;
    let mut lo = linf(p[0], q[0]).max(linf(p[n], q[m]));
    if frechet_decide(p, q, lo) {
        return Ok(lo);
    }
    let mut hi = uniform_distance(a, b).max(lo) + tol;
    while !frechet_decide(p, q, hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if frechet_decide(p, q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

//! The circle as `[0, 1)` with its cyclic order, half-open arcs, and the
//! partitions into arcs generated by finite point sets.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{Component, LearningProblem};

/// A point of the circle, identified with its angle fraction `t` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CyclicPoint(f64);

impl CyclicPoint {
    pub fn new(position: f64) -> Result<Self> {
        if position.is_finite() && (0.0..1.0).contains(&position) {
            Ok(CyclicPoint(position))
        } else {
            Err(Error::InvalidPoint(position))
        }
    }

    /// Reduces any finite real modulo 1.
    pub fn wrap(t: f64) -> Self {
        if (0.0..1.0).contains(&t) {
            return CyclicPoint(t);
        }
        let r = if (1.0..2.0).contains(&t) { t - 1.0 } else { t.rem_euclid(1.0) };
        // rem_euclid can round up to exactly 1.0 for tiny negative inputs
        CyclicPoint(if r >= 1.0 { 0.0 } else { r })
    }

    pub fn position(self) -> f64 {
        self.0
    }

    /// Counter-clockwise distance from `self` to `other`, in `[0, 1)`.
    pub fn forward_distance(self, other: CyclicPoint) -> f64 {
        let d = other.0 - self.0;
        if d >= 0.0 {
            d
        } else {
            d + 1.0
        }
    }

    /// Geodesic distance on the circle.
    pub fn circle_distance(self, other: CyclicPoint) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(1.0 - d)
    }

    pub(crate) fn total_cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TryFrom<f64> for CyclicPoint {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        CyclicPoint::new(value)
    }
}

impl From<CyclicPoint> for f64 {
    fn from(p: CyclicPoint) -> f64 {
        p.0
    }
}

impl fmt::Display for CyclicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The ternary cyclic order `[x, y, z]`: travelling counter-clockwise from
/// `x`, one meets `y` strictly before `z`.
pub fn cyclic_between(x: CyclicPoint, y: CyclicPoint, z: CyclicPoint) -> Result<bool> {
    if x == y || y == z || x == z {
        return Err(Error::NotDistinct(x.0, y.0, z.0));
    }
    let dy = x.forward_distance(y);
    let dz = x.forward_distance(z);
    Ok(0.0 < dy && dy < dz)
}

/// The cyclic successor of `x` within the finite set `points`.
pub fn successor(points: &[CyclicPoint], x: CyclicPoint) -> Result<CyclicPoint> {
    let mut distinct: Vec<CyclicPoint> = points.to_vec();
    distinct.sort_by(CyclicPoint::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::TooFewPoints(distinct.len()));
    }
    let pos = distinct
        .binary_search_by(|p| p.total_cmp(&x))
        .map_err(|_| Error::NotAMember(x.0))?;
    Ok(distinct[(pos + 1) % distinct.len()])
}

/// A half-open arc `[start, end)` traversed counter-clockwise. `start == end`
/// is the whole circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfOpenArc {
    pub start: CyclicPoint,
    pub end: CyclicPoint,
}

impl HalfOpenArc {
    pub fn new(start: CyclicPoint, end: CyclicPoint) -> Self {
        HalfOpenArc { start, end }
    }

    /// Convenience constructor from raw positions.
    pub fn from_positions(start: f64, end: f64) -> Result<Self> {
        Ok(HalfOpenArc::new(CyclicPoint::new(start)?, CyclicPoint::new(end)?))
    }

    pub fn full_circle() -> Self {
        let zero = CyclicPoint(0.0);
        HalfOpenArc::new(zero, zero)
    }

    pub fn is_full(&self) -> bool {
        self.start == self.end
    }

    pub fn length(&self) -> f64 {
        if self.is_full() {
            1.0
        } else {
            self.start.forward_distance(self.end)
        }
    }

    pub fn contains(&self, x: CyclicPoint) -> bool {
        if self.is_full() {
            return true;
        }
        if self.start.0 < self.end.0 {
            self.start.0 <= x.0 && x.0 < self.end.0
        } else {
            x.0 >= self.start.0 || x.0 < self.end.0
        }
    }

    /// The arc as at most two disjoint linear intervals `[lo, hi)` of `[0, 1)`.
    pub fn linear_pieces(&self) -> Vec<(f64, f64)> {
        let (s, e) = (self.start.0, self.end.0);
        if self.is_full() {
            vec![(0.0, 1.0)]
        } else if s < e {
            vec![(s, e)]
        } else {
            let mut v = vec![(s, 1.0)];
            if e > 0.0 {
                v.push((0.0, e));
            }
            v
        }
    }

    /// Lebesgue length of the intersection of two arcs.
    pub fn overlap_length(&self, other: &HalfOpenArc) -> f64 {
        let mut total = 0.0;
        for (a0, a1) in self.linear_pieces() {
            for (b0, b1) in other.linear_pieces() {
                let lo = a0.max(b0);
                let hi = a1.min(b1);
                if hi > lo {
                    total += hi - lo;
                }
            }
        }
        total
    }
}

impl fmt::Display for HalfOpenArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// The partition of the circle into half-open arcs generated by a finite
/// point set. Points are kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcPartition {
    points: Vec<CyclicPoint>,
}

impl ArcPartition {
    pub fn trivial() -> Self {
        ArcPartition { points: Vec::new() }
    }

    pub fn from_points<I: IntoIterator<Item = CyclicPoint>>(points: I) -> Self {
        let mut points: Vec<CyclicPoint> = points.into_iter().collect();
        points.sort_by(CyclicPoint::total_cmp);
        points.dedup();
        ArcPartition { points }
    }

    /// The generating set, sorted ascending.
    pub fn points(&self) -> &[CyclicPoint] {
        &self.points
    }

    pub fn is_trivial(&self) -> bool {
        self.points.len() <= 1
    }

    pub fn len(&self) -> usize {
        self.points.len().max(1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn arc(&self, index: usize) -> HalfOpenArc {
        match self.points.len() {
            0 => HalfOpenArc::full_circle(),
            1 => HalfOpenArc::new(self.points[0], self.points[0]),
            m => HalfOpenArc::new(self.points[index], self.points[(index + 1) % m]),
        }
    }

    pub fn arcs(&self) -> Vec<HalfOpenArc> {
        (0..self.len()).map(|i| self.arc(i)).collect()
    }

    /// Index of the unique arc containing `x`.
    pub fn locate(&self, x: CyclicPoint) -> usize {
        if self.points.len() <= 1 {
            return 0;
        }
        let above = self.points.partition_point(|p| p.0 <= x.0);
        if above == 0 {
            self.points.len() - 1
        } else {
            above - 1
        }
    }

    /// Counts how many of `xs` fall in each arc.
    pub fn occupancy<I: IntoIterator<Item = CyclicPoint>>(&self, xs: I) -> Vec<usize> {
        let mut counts = vec![0; self.len()];
        for x in xs {
            counts[self.locate(x)] += 1;
        }
        counts
    }

    /// Whether every arc of `self` lies inside a single arc of `coarser`.
    pub fn refines(&self, coarser: &ArcPartition) -> bool {
        coarser.is_trivial()
            || coarser
            .points
            .iter()
            .all(|p| self.points.binary_search_by(|q| q.total_cmp(p)).is_ok())
    }
}

/// Pushes a uniform draw `u` in `[0, 1)` to the problem's marginal law via the
/// generalized inverse of its distribution function `F(t) = mu[0, t]`,
/// `u -> inf { t : F(t) >= u }`. The map is non-decreasing in `u`.
pub fn transport_from_uniform(problem: &LearningProblem, u: f64) -> CyclicPoint {
    enum Piece {
        Atom(f64),
        Segment(f64, f64),
    }
    // (position, kind, mass); atoms sort ahead of segments at equal position
    let mut pieces: Vec<(f64, u8, f64, Piece)> = Vec::new();
    for c in problem.components() {
        match c {
            Component::Atom { location, mass, .. } => {
                pieces.push((location.0, 0, *mass, Piece::Atom(location.0)));
            }
            Component::Arc { arc, mass, .. } => {
                let len = arc.length();
                for (lo, hi) in arc.linear_pieces() {
                    let m = mass * (hi - lo) / len;
                    if m > 0.0 {
                        pieces.push((lo, 1, m, Piece::Segment(lo, hi)));
                    }
                }
            }
        }
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut cumulative = 0.0;
    let mut last = 0.0;
    for (_, _, mass, piece) in &pieces {
        let next = cumulative + mass;
        match piece {
            Piece::Atom(t) => {
                last = *t;
                if u <= next {
                    return CyclicPoint(*t);
                }
            }
            Piece::Segment(lo, hi) => {
                last = *hi;
                if u <= next {
                    let frac = ((u - cumulative) / mass).clamp(0.0, 1.0);
                    return clamp_below_one(lo + frac * (hi - lo));
                }
            }
        }
        cumulative = next;
    }
    // Masses sum to 1 only up to rounding; the tail belongs to the last piece.
    clamp_below_one(last)
}

fn clamp_below_one(t: f64) -> CyclicPoint {
    if t >= 1.0 {
        CyclicPoint(1.0f64.next_down())
    } else {
        CyclicPoint(t.max(0.0))
    }
}

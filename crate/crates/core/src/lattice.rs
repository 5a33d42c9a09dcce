//! Geometry of the integer lattice graph: points, neighbors, combinatorial
//! distance, radial weights, truncation boxes and the line decomposition
//! along each rearrangement direction.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// A vertex of the lattice graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Self(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// Combinatorial distance to the origin.
    pub fn norm1(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    /// Largest absolute coordinate.
    pub fn norm_inf(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
    }

    pub fn offset(&self, axis: usize, delta: i64) -> Self {
        let mut c = self.0.clone();
        c[axis] += delta;
        Self(c)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.dim() });
        }
        Ok(())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl<const K: usize> From<[i64; K]> for LatticePoint {
    fn from(v: [i64; K]) -> Self {
        Self(v.to_vec())
    }
}

/// The 2N lattice neighbors of `x`.
pub fn neighbors(x: &LatticePoint, dim: usize) -> Result<Vec<LatticePoint>> {
    x.check_dim(dim)?;
    let mut out = Vec::with_capacity(2 * dim);
    for k in 0..dim {
        out.push(x.offset(k, 1));
        out.push(x.offset(k, -1));
    }
    Ok(out)
}

/// Shortest path length between two lattice points (the ℓ¹ distance).
pub fn distance(x: &LatticePoint, y: &LatticePoint) -> Result<u64> {
    y.check_dim(x.dim())?;
    Ok(x.0.iter().zip(&y.0).map(|(a, b)| (a - b).unsigned_abs()).sum())
}

/// Radial weight `(1 + d(x))^s`.
pub fn weight<T: Scalar>(x: &LatticePoint, s: T) -> T {
    weight_at_distance(x.norm1(), s)
}

#[inline]
pub fn weight_at_distance<T: Scalar>(d: u64, s: T) -> T {
    if s == T::zero() {
        return T::one();
    }
    lit::<T>(1.0 + d as f64).powf(s)
}

/// Truncation box: the ℓ∞ cube `{x : max |x_i| <= radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    dim: usize,
    radius: i64,
}

impl LatticeBox {
    pub fn new(dim: usize, radius: i64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        if radius < 0 {
            return Err(Error::InvalidConfig(format!("box radius {radius} is negative")));
        }
        Ok(Self { dim, radius })
    }

    /// Smallest centered cube containing every point.
    pub fn enclosing<'a>(dim: usize, points: impl IntoIterator<Item = &'a LatticePoint>) -> Result<Self> {
        let mut r = 0;
        for p in points {
            p.check_dim(dim)?;
            r = r.max(p.norm_inf() as i64);
        }
        Self::new(dim, r)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: &LatticePoint) -> bool {
        x.dim() == self.dim && x.0.iter().all(|c| c.abs() <= self.radius)
    }

    /// Row-major index; consistent with the lexicographic order of points.
    pub fn index_of(&self, x: &LatticePoint) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        Some(self.index_of_coords(&x.0))
    }

    #[inline]
    pub(crate) fn index_of_coords(&self, c: &[i64]) -> usize {
        let side = self.side();
        c.iter().fold(0usize, |acc, &v| acc * side + (v + self.radius) as usize)
    }

    pub fn point_at(&self, mut index: usize) -> LatticePoint {
        let side = self.side();
        let mut c = vec![0i64; self.dim];
        for k in (0..self.dim).rev() {
            c[k] = (index % side) as i64 - self.radius;
            index /= side;
        }
        LatticePoint(c)
    }

    /// All points in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(move |i| self.point_at(i))
    }

    /// Strides of the row-major layout, one per axis.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let side = self.side();
        let mut s = vec![1usize; self.dim];
        for k in (0..self.dim.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * side;
        }
        s
    }

    /// ℓ¹ distance to the origin for every box point, in index order.
    pub(crate) fn distances(&self) -> Vec<u64> {
        let side = self.side();
        let mut out = Vec::with_capacity(self.len());
        let mut c = vec![-self.radius; self.dim];
        for _ in 0..self.len() {
            out.push(c.iter().map(|v| v.unsigned_abs()).sum());
            for k in (0..self.dim).rev() {
                c[k] += 1;
                if c[k] <= self.radius {
                    break;
                }
                c[k] = -self.radius;
            }
        }
        debug_assert_eq!(out.len(), side.pow(self.dim as u32));
        out
    }
}

/// An element of the rearrangement direction set. Axes are 0-based internally
/// and displayed 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// `e_i`
    Axis(usize),
    /// `(e_i - e_j) / 2`, `i < j`
    DiagMinus(usize, usize),
    /// `(e_i + e_j) / 2`, `i < j`
    DiagPlus(usize, usize),
}

impl Direction {
    /// Twice the inner product `<e, x>`; always an integer.
    #[inline]
    pub fn doubled_position(&self, x: &[i64]) -> i64 {
        match *self {
            Direction::Axis(i) => 2 * x[i],
            Direction::DiagMinus(i, j) => x[i] - x[j],
            Direction::DiagPlus(i, j) => x[i] + x[j],
        }
    }

    pub fn position(&self, x: &LatticePoint) -> f64 {
        self.doubled_position(&x.0) as f64 / 2.0
    }

    /// Lattice vector moving one unit of `<e, x>` along a line.
    pub fn step(&self, dim: usize) -> Vec<i64> {
        let mut v = vec![0; dim];
        match *self {
            Direction::Axis(i) => v[i] = 1,
            Direction::DiagMinus(i, j) => {
                v[i] = 1;
                v[j] = -1;
            }
            Direction::DiagPlus(i, j) => {
                v[i] = 1;
                v[j] = 1;
            }
        }
        v
    }

    /// Coordinates constant along a line: the conjugate diagonal sum for
    /// diagonal directions followed by the untouched axes.
    pub fn transverse(&self, x: &[i64]) -> Vec<i64> {
        match *self {
            Direction::Axis(i) => x.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &v)| v).collect(),
            Direction::DiagMinus(i, j) | Direction::DiagPlus(i, j) => {
                let s = if matches!(self, Direction::DiagMinus(..)) { x[i] + x[j] } else { x[i] - x[j] };
                std::iter::once(s)
                    .chain(x.iter().enumerate().filter(|&(k, _)| k != i && k != j).map(|(_, &v)| v))
                    .collect()
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match *self {
            Direction::Axis(i) => i < dim,
            Direction::DiagMinus(i, j) | Direction::DiagPlus(i, j) => i < j && j < dim,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("direction {self} invalid in dimension {dim}")))
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Direction::Axis(i) => write!(f, "e{}", i + 1),
            Direction::DiagMinus(i, j) => write!(f, "(e{}-e{})/2", i + 1, j + 1),
            Direction::DiagPlus(i, j) => write!(f, "(e{}+e{})/2", i + 1, j + 1),
        }
    }
}

/// The canonical sweep cycle: every axis, then for each pair `i < j` the
/// minus and plus diagonals.
pub fn directions(dim: usize) -> Vec<Direction> {
    let mut out: Vec<Direction> = (0..dim).map(Direction::Axis).collect();
    for i in 0..dim {
        for j in i + 1..dim {
            out.push(Direction::DiagMinus(i, j));
            out.push(Direction::DiagPlus(i, j));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Integer,
    HalfInteger,
}

impl Parity {
    pub fn of_doubled(d: i64) -> Self {
        if d.rem_euclid(2) == 0 {
            Parity::Integer
        } else {
            Parity::HalfInteger
        }
    }
}

/// One class of the partition of a box into lines parallel to a direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub direction: Direction,
    /// Points ordered by increasing `<e, x>`.
    pub points: Vec<LatticePoint>,
    /// `2 <e, x>` for each point.
    pub positions: Vec<i64>,
    pub parity: Parity,
}

/// Partitions the box into lines parallel to `e`, ordered lexicographically by
/// transverse coordinates.
pub fn decompose(bx: &LatticeBox, e: Direction) -> Result<Vec<Line>> {
    e.validate(bx.dim())?;
    let mut groups: BTreeMap<Vec<i64>, Vec<(i64, LatticePoint)>> = BTreeMap::new();
    for x in bx.points() {
        let key = e.transverse(&x.0);
        let pos = e.doubled_position(&x.0);
        groups.entry(key).or_default().push((pos, x));
    }
    Ok(groups
        .into_values()
        .map(|mut members| {
            members.sort_by_key(|(pos, _)| *pos);
            let parity = Parity::of_doubled(members[0].0);
            let (positions, points) = members.into_iter().unzip();
            Line { direction: e, points, positions, parity }
        })
        .collect())
}

//! Finitely supported lattice functions with the weighted `ℓᵖ_a` and
//! `D¹ᵖ_a` norms, pointwise gradients, the graph p-Laplacian and level-set
//! distribution profiles.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::lattice::{neighbors, weight_at_distance, LatticeBox, LatticePoint};
use crate::scalar::{ksum, lit, to_f64, AbsPow, CompensatedSum, Scalar};

/// A real function on `ℤᴺ` with finite support. Zero values are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction<T> {
    dim: usize,
    entries: BTreeMap<LatticePoint, T>,
}

impl<T: Scalar> LatticeFunction<T> {
    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: BTreeMap::new() }
    }

    /// Builds a function from `(point, value)` pairs; later duplicates win and
    /// zeros are dropped.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (LatticePoint, T)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        let mut u = Self::zero(dim);
        for (x, v) in entries {
            u.set(x, v)?;
        }
        Ok(u)
    }

    pub fn delta(x: LatticePoint) -> Self {
        let dim = x.dim();
        let mut entries = BTreeMap::new();
        entries.insert(x, T::one());
        Self { dim, entries }
    }

    pub fn indicator(dim: usize, points: impl IntoIterator<Item = LatticePoint>) -> Result<Self> {
        Self::from_entries(dim, points.into_iter().map(|x| (x, T::one())))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, x: &LatticePoint) -> T {
        self.entries.get(x).copied().unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, x: LatticePoint, v: T) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.dim() });
        }
        if v == T::zero() {
            self.entries.remove(&x);
        } else {
            self.entries.insert(x, v);
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticePoint, T)> + '_ {
        self.entries.iter().map(|(x, &v)| (x, v))
    }

    pub fn support(&self) -> impl Iterator<Item = &LatticePoint> + '_ {
        self.entries.keys()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Support together with every neighbor of a support point.
    pub fn support_with_ring(&self) -> BTreeSet<LatticePoint> {
        let mut out: BTreeSet<LatticePoint> = self.entries.keys().cloned().collect();
        for x in self.entries.keys() {
            for k in 0..self.dim {
                out.insert(x.offset(k, 1));
                out.insert(x.offset(k, -1));
            }
        }
        out
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.values().all(|&v| v >= T::zero())
    }

    pub fn max_abs(&self) -> T {
        self.entries.values().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, t: T) -> Self {
        let mut out = Self::zero(self.dim);
        if t != T::zero() {
            for (x, &v) in &self.entries {
                let w = v * t;
                if w != T::zero() {
                    out.entries.insert(x.clone(), w);
                }
            }
        }
        out
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: T, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut out = self.clone();
        for (x, &v) in &other.entries {
            let w = out.get(x) + alpha * v;
            out.set(x.clone(), w)?;
        }
        Ok(out)
    }

    /// Pointwise map over the support.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = Self::zero(self.dim);
        for (x, &v) in &self.entries {
            let w = f(v);
            if w != T::zero() {
                out.entries.insert(x.clone(), w);
            }
        }
        out
    }

    /// Dense values over the box in index order.
    pub fn to_dense(&self, bx: &LatticeBox) -> Result<Vec<T>> {
        if bx.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: bx.dim() });
        }
        let mut out = vec![T::zero(); bx.len()];
        for (x, &v) in &self.entries {
            let i = bx
                .index_of(x)
                .ok_or_else(|| Error::SupportOutsideBox { point: x.to_string(), radius: bx.radius() })?;
            out[i] = v;
        }
        Ok(out)
    }

    pub fn from_dense(bx: &LatticeBox, values: &[T]) -> Self {
        assert_eq!(values.len(), bx.len(), "dense length must match the box");
        let mut out = Self::zero(bx.dim());
        for (i, &v) in values.iter().enumerate() {
            if v != T::zero() {
                out.entries.insert(bx.point_at(i), v);
            }
        }
        out
    }

    pub fn support_within(&self, bx: &LatticeBox) -> Result<()> {
        for x in self.entries.keys() {
            if !bx.contains(x) {
                return Err(Error::SupportOutsideBox { point: x.to_string(), radius: bx.radius() });
            }
        }
        Ok(())
    }

    pub fn require_nonnegative(&self) -> Result<()> {
        match self.entries.iter().find(|(_, &v)| v < T::zero()) {
            Some((x, &v)) => Err(Error::NegativeValue { point: x.to_string(), value: to_f64(v) }),
            None => Ok(()),
        }
    }
}

fn check_p<T: Scalar>(name: &'static str, p: T) -> Result<()> {
    if p.is_nan() || p < T::one() {
        return Err(Error::InvalidExponent { name, value: to_f64(p), reason: "must be at least 1" });
    }
    Ok(())
}

/// Weighted norm `(Σ μ_{ap}(x) |u(x)|^p)^{1/p}`, or `sup μ_a |u|` for
/// `p = ∞`.
pub fn lp_norm<T: Scalar>(u: &LatticeFunction<T>, p: T, a: T) -> Result<T> {
    check_p("p", p)?;
    if p.is_infinite() {
        return Ok(u.iter().fold(T::zero(), |m, (x, v)| m.max(weight_at_distance(x.norm1(), a) * v.abs())));
    }
    let ap = AbsPow::new(p);
    let s = ksum(u.iter().map(|(x, v)| weight_at_distance(x.norm1(), a * p) * ap.abs_pow(v)));
    Ok(s.powf(p.recip()))
}

/// `|∇u(x)|_p = (Σ_{y∼x} |u(y) - u(x)|^p)^{1/p}`.
pub fn grad_norm_at<T: Scalar>(u: &LatticeFunction<T>, x: &LatticePoint, p: T) -> Result<T> {
    check_p("p", p)?;
    let ap = AbsPow::new(p);
    let ux = u.get(x);
    let s = ksum(neighbors(x, u.dim())?.iter().map(|y| ap.abs_pow(u.get(y) - ux)));
    Ok(s.powf(p.recip()))
}

/// `(Σ_x Σ_{y∼x} μ_{ap}(x) |u(y) - u(x)|^p)^{1/p}`; every edge is counted from
/// both endpoints with the weight of the endpoint.
pub fn d1p_norm<T: Scalar>(u: &LatticeFunction<T>, p: T, a: T) -> Result<T> {
    Ok(d1p_energy(u, p, a)?.powf(p.recip()))
}

/// `‖u‖_{D¹ᵖ_a}^p`.
pub fn d1p_energy<T: Scalar>(u: &LatticeFunction<T>, p: T, a: T) -> Result<T> {
    check_p("p", p)?;
    let ap = AbsPow::new(p);
    let mut acc = CompensatedSum::new();
    for x in u.support_with_ring() {
        let w = weight_at_distance(x.norm1(), a * p);
        let ux = u.get(&x);
        for k in 0..u.dim() {
            for delta in [1, -1] {
                let uy = u.get(&x.offset(k, delta));
                let d = uy - ux;
                if d != T::zero() {
                    acc.add(w * ap.abs_pow(d));
                }
            }
        }
    }
    Ok(acc.value())
}

/// Graph p-Laplacian `Δₚu(x) = Σ_{y∼x} |u(y)-u(x)|^{p-2} (u(y)-u(x))` on the
/// support and its one-ring. Zero differences contribute zero for every `p`.
pub fn p_laplacian<T: Scalar>(u: &LatticeFunction<T>, p: T) -> Result<LatticeFunction<T>> {
    if p.is_nan() || p <= T::one() {
        return Err(Error::InvalidExponent { name: "p", value: to_f64(p), reason: "must exceed 1" });
    }
    let ap = AbsPow::new(p);
    let mut out = LatticeFunction::zero(u.dim());
    for x in u.support_with_ring() {
        let ux = u.get(&x);
        let v = ksum((0..u.dim()).flat_map(|k| [1, -1].map(|d| (k, d))).map(|(k, d)| {
            let uy = u.get(&x.offset(k, d));
            ap.signed_pow_m1(uy - ux)
        }));
        out.set(x, v)?;
    }
    Ok(out)
}

/// Level-set counts `|{x : |u(x)| > t}|` at every distinct threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionProfile<T> {
    /// `0` followed by the distinct nonzero `|u|` values, ascending.
    pub thresholds: Vec<T>,
    pub counts: Vec<usize>,
}

impl<T: Scalar> DistributionProfile<T> {
    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// `|{x : |u(x)| > t}|` for any `t >= 0`.
    pub fn count_above(&self, t: T) -> usize {
        // number of thresholds <= t selects the step
        let k = self.thresholds.partition_point(|&s| s <= t);
        if k == 0 {
            self.counts.first().copied().unwrap_or(0)
        } else {
            self.counts[k - 1]
        }
    }
}

pub fn distribution<T: Scalar>(u: &LatticeFunction<T>) -> DistributionProfile<T> {
    if u.is_zero() {
        return DistributionProfile { thresholds: Vec::new(), counts: Vec::new() };
    }
    let mut vals: Vec<T> = u.iter().map(|(_, v)| v.abs()).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = vals.len();
    let mut thresholds = vec![T::zero()];
    let mut counts = vec![n];
    let mut i = 0;
    while i < n {
        let t = vals[i];
        let mut j = i;
        while j < n && vals[j] == t {
            j += 1;
        }
        thresholds.push(t);
        counts.push(n - j);
        i = j;
    }
    DistributionProfile { thresholds, counts }
}

/// Inner product `Σ_x u(x) v(x)`.
pub fn dot<T: Scalar>(u: &LatticeFunction<T>, v: &LatticeFunction<T>) -> T {
    ksum(u.iter().map(|(x, a)| a * v.get(x)))
}

/// Convenience: `lp_norm` with `f64` literals for exponents.
pub fn lp_norm_f<T: Scalar>(u: &LatticeFunction<T>, p: f64, a: f64) -> Result<T> {
    lp_norm(u, lit(p), lit(a))
}

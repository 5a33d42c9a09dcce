//! Piecewise-multilinear extension of lattice functions to `R^N`, with
//! tensor-product Gauss–Legendre quadrature for its `Lᵖ` and gradient norms.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{d1p_norm, lp_norm, LatticeFunction};
use crate::lattice::LatticePoint;
use crate::scalar::{lit, to_f64, AbsPow, CompensatedSum, Scalar};

pub const DEFAULT_QUAD_ORDER: usize = 4;

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(order: usize) -> Result<Self> {
        if order == 0 || order > 64 {
            return Err(Error::InvalidConfig(format!("quadrature order must be in 1..=64, got {order}")));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Legendre recurrence for P_n(t) and P_n'(t)
                let (mut p0, mut p1) = (1.0, t);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { t } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (t * pn - pm) / (t * t - 1.0);
                let dt = pn / dp;
                t -= dt;
                if dt.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - t * t) * dp * dp);
            nodes[i] = 0.5 * (1.0 - t);
            nodes[n - 1 - i] = 0.5 * (1.0 + t);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        if n == 1 {
            nodes[0] = 0.5;
            weights[0] = 1.0;
        }
        Ok(Self { order, nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_legendre(DEFAULT_QUAD_ORDER).expect("default order is valid")
    }
}

/// Multilinear vertex weights at `x ∈ [0,1]^N`. Entry `i` belongs to the
/// vertex whose offset has bit `k` of `i` as its `k`-th coordinate.
pub fn barycentric_coeffs<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.iter().any(|&t| !(t >= T::zero() && t <= T::one())) {
        return Err(Error::OutsideCell);
    }
    Ok(coeffs_unchecked(x))
}

fn coeffs_unchecked<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut c = vec![T::one()];
    for &t in x {
        // append axis k: existing entries have bit k = 0, new ones bit k = 1
        let lo: Vec<T> = c.iter().map(|&v| v * (T::one() - t)).collect();
        let hi: Vec<T> = c.iter().map(|&v| v * t).collect();
        c = lo;
        c.extend(hi);
    }
    c
}

fn vertex(base: &[i64], i: usize) -> LatticePoint {
    LatticePoint::new(base.iter().enumerate().map(|(k, &b)| b + ((i >> k) & 1) as i64).collect::<Vec<_>>())
}

/// `ū(x) = Σᵢ cᵢ(x) u(vⁱ)` on the cell containing `x`.
pub fn evaluate_extension<T: Scalar>(u: &LatticeFunction<T>, x: &[T]) -> Result<T> {
    if x.len() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: x.len() });
    }
    let base: Vec<i64> = x.iter().map(|t| t.floor().to_i64().unwrap_or(i64::MAX)).collect();
    let frac: Vec<T> = x.iter().zip(&base).map(|(&t, &b)| t - lit(b as f64)).collect();
    let c = coeffs_unchecked(&frac);
    Ok(c.iter().enumerate().map(|(i, &ci)| ci * u.get(&vertex(&base, i))).fold(T::zero(), |a, b| a + b))
}

/// Base corners of every cell that meets the support.
fn cells<T: Scalar>(u: &LatticeFunction<T>) -> BTreeSet<Vec<i64>> {
    let n = u.dim();
    let mut out = BTreeSet::new();
    for x in u.support() {
        for i in 0..1usize << n {
            out.insert(x.coords().iter().enumerate().map(|(k, &c)| c - ((i >> k) & 1) as i64).collect());
        }
    }
    out
}

struct CellIntegrator<'a, T> {
    rule: &'a QuadratureRule,
    nodes: Vec<T>,
    weights: Vec<T>,
    n: usize,
}

impl<'a, T: Scalar> CellIntegrator<'a, T> {
    fn new(rule: &'a QuadratureRule, n: usize) -> Self {
        Self {
            rule,
            nodes: rule.nodes.iter().map(|&x| lit(x)).collect(),
            weights: rule.weights.iter().map(|&x| lit(x)).collect(),
            n,
        }
    }

    /// Calls `f(point, weight)` for every tensor-product node.
    fn for_each_node(&self, mut f: impl FnMut(&[T], T)) {
        let m = self.rule.order;
        let mut idx = vec![0usize; self.n];
        let mut pt = vec![T::zero(); self.n];
        loop {
            let mut w = T::one();
            for k in 0..self.n {
                pt[k] = self.nodes[idx[k]];
                w *= self.weights[idx[k]];
            }
            f(&pt, w);
            let mut k = 0;
            loop {
                if k == self.n {
                    return;
                }
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

fn check_p<T: Scalar>(p: T) -> Result<()> {
    if p.is_nan() || p < T::one() || p.is_infinite() {
        return Err(Error::InvalidExponent { name: "p", value: to_f64(p), reason: "must be finite and at least 1" });
    }
    Ok(())
}

/// `‖ū‖_{Lᵖ(R^N)}` by quadrature over every cell meeting the support.
pub fn extension_lp_norm<T: Scalar>(u: &LatticeFunction<T>, p: T, rule: &QuadratureRule) -> Result<T> {
    check_p(p)?;
    let n = u.dim();
    let ap = AbsPow::new(p);
    let integ = CellIntegrator::<T>::new(rule, n);
    let mut acc = CompensatedSum::new();
    for base in cells(u) {
        let vals: Vec<T> = (0..1usize << n).map(|i| u.get(&vertex(&base, i))).collect();
        integ.for_each_node(|x, w| {
            let c = coeffs_unchecked(x);
            let v = c.iter().zip(&vals).fold(T::zero(), |a, (&c, &v)| a + c * v);
            acc.add(w * ap.abs_pow(v));
        });
    }
    Ok(acc.value().powf(p.recip()))
}

/// `‖∇ū‖_{Lᵖ(R^N)}` with the Euclidean length of the gradient. Inside a cell
/// `∂ₖū` is constant in `xₖ` and multilinear in the other coordinates.
pub fn extension_grad_lp_norm<T: Scalar>(u: &LatticeFunction<T>, p: T, rule: &QuadratureRule) -> Result<T> {
    check_p(p)?;
    let n = u.dim();
    let integ = CellIntegrator::<T>::new(rule, n);
    let half_p = p / lit(2.0);
    let mut acc = CompensatedSum::new();
    let mut grad = vec![T::zero(); n];
    for base in cells(u) {
        let vals: Vec<T> = (0..1usize << n).map(|i| u.get(&vertex(&base, i))).collect();
        integ.for_each_node(|x, w| {
            grad.iter_mut().for_each(|g| *g = T::zero());
            for (i, &v) in vals.iter().enumerate() {
                for (k, g) in grad.iter_mut().enumerate() {
                    // d/dx_k of the vertex coefficient: the other factors, signed by bit k
                    let others = partial_coeff(x, i, k);
                    if (i >> k) & 1 == 1 {
                        *g += others * v;
                    } else {
                        *g -= others * v;
                    }
                }
            }
            let g2 = grad.iter().fold(T::zero(), |a, &g| a + g * g);
            acc.add(w * g2.powf(half_p));
        });
    }
    Ok(acc.value().powf(p.recip()))
}

fn partial_coeff<T: Scalar>(x: &[T], i: usize, skip: usize) -> T {
    x.iter().enumerate().filter(|&(k, _)| k != skip).fold(T::one(), |a, (k, &t)| {
        a * if (i >> k) & 1 == 1 { t } else { T::one() - t }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBand {
    pub min: f64,
    pub max: f64,
}

impl RatioBand {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        values.fold(Self { min: f64::INFINITY, max: f64::NEG_INFINITY }, |b, v| Self { min: b.min.min(v), max: b.max.max(v) })
    }

    pub fn spread(&self) -> f64 {
        self.max / self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSummary {
    /// `‖ū‖_{Lᵖ} / ‖u‖_{ℓᵖ}` per function.
    pub lp_ratios: Vec<f64>,
    /// `‖∇ū‖_{Lᵖ} / ‖u‖_{D¹ᵖ}` per function.
    pub grad_ratios: Vec<f64>,
    pub lp: RatioBand,
    pub grad: RatioBand,
}

pub fn equivalence_ratios<T: Scalar>(sample: &[LatticeFunction<T>], p: T, rule: &QuadratureRule) -> Result<EquivalenceSummary> {
    let mut lp_ratios = Vec::with_capacity(sample.len());
    let mut grad_ratios = Vec::with_capacity(sample.len());
    for u in sample {
        if u.is_zero() {
            return Err(Error::ZeroFunction);
        }
        lp_ratios.push(to_f64(extension_lp_norm(u, p, rule)? / lp_norm(u, p, T::zero())?));
        grad_ratios.push(to_f64(extension_grad_lp_norm(u, p, rule)? / d1p_norm(u, p, T::zero())?));
    }
    Ok(EquivalenceSummary {
        lp: RatioBand::of(lp_ratios.iter().copied()),
        grad: RatioBand::of(grad_ratios.iter().copied()),
        lp_ratios,
        grad_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for order in 1..=8 {
            let rule = QuadratureRule::gauss_legendre(order).unwrap();
            assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            for deg in 0..2 * order {
                let got: f64 = rule.nodes().iter().zip(rule.weights()).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "order {order} deg {deg}");
            }
        }
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(barycentric_coeffs(&[0.25]).unwrap(), vec![0.75, 0.25]);
        assert!(barycentric_coeffs(&[0.5, 0.5, 0.5]).unwrap().iter().all(|&c| c == 0.125));
        let c = barycentric_coeffs(&[1.0, 0.0]).unwrap();
        assert_eq!(c, vec![0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(barycentric_coeffs(&[1.2, 0.0]), Err(Error::OutsideCell)));
    }

    #[test]
    fn extension_examples() {
        let d = LatticeFunction::<f64>::delta(LatticePoint::origin(2));
        assert_eq!(evaluate_extension(&d, &[0.5, 0.5]).unwrap(), 0.25);
        assert_eq!(evaluate_extension(&d, &[0.0, 0.0]).unwrap(), 1.0);
        let bx = LatticeBox::new(2, 3).unwrap();
        let lin = LatticeFunction::from_entries(2, bx.points().map(|x| (x.clone(), x.coords()[0] as f64))).unwrap();
        for x in [[0.3, -1.7], [-2.2, 2.9], [1.5, 0.0]] {
            assert!((evaluate_extension(&lin, &x).unwrap() - x[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn hat_function_norms() {
        let d = LatticeFunction::<f64>::delta(LatticePoint::origin(1));
        let rule = QuadratureRule::default();
        assert!((extension_lp_norm(&d, 2.0, &rule).unwrap() - (2.0f64 / 3.0).sqrt()).abs() <= 1e-10);
        assert!((extension_grad_lp_norm(&d, 2.0, &rule).unwrap() - 2f64.sqrt()).abs() <= 1e-10);
        let z = LatticeFunction::<f64>::zero(2);
        assert_eq!(extension_lp_norm(&z, 2.0, &rule).unwrap(), 0.0);
        assert_eq!(extension_grad_lp_norm(&z, 2.0, &rule).unwrap(), 0.0);
    }

    #[test]
    fn order_doubling_is_exact_for_p_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bx = LatticeBox::new(2, 2).unwrap();
        let vals: Vec<f64> = (0..bx.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = LatticeFunction::from_dense(&bx, &vals);
        let (r4, r8) = (QuadratureRule::gauss_legendre(4).unwrap(), QuadratureRule::gauss_legendre(8).unwrap());
        let a = extension_lp_norm(&u, 2.0, &r4).unwrap();
        let b = extension_lp_norm(&u, 2.0, &r8).unwrap();
        assert!((a - b).abs() < 1e-12);
        let a = extension_grad_lp_norm(&u, 2.0, &r4).unwrap();
        let b = extension_grad_lp_norm(&u, 2.0, &r8).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        // N=2 bilinear cell: compare the analytic gradient norm with one
        // computed from finite differences of the interpolant
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let bx = LatticeBox::new(2, 1).unwrap();
        let vals: Vec<f64> = (0..bx.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let u = LatticeFunction::from_dense(&bx, &vals);
        let rule = QuadratureRule::gauss_legendre(6).unwrap();
        let integ = CellIntegrator::<f64>::new(&rule, 2);
        let mut acc = 0.0;
        for base in cells(&u) {
            integ.for_each_node(|x, w| {
                let at = |dx: f64, dy: f64| {
                    evaluate_extension(&u, &[base[0] as f64 + x[0] + dx, base[1] as f64 + x[1] + dy]).unwrap()
                };
                let h = 1e-6;
                let gx = (at(h, 0.0) - at(-h, 0.0)) / (2.0 * h);
                let gy = (at(0.0, h) - at(0.0, -h)) / (2.0 * h);
                acc += w * (gx * gx + gy * gy);
            });
        }
        let got = extension_grad_lp_norm(&u, 2.0, &rule).unwrap();
        assert!((got - acc.sqrt()).abs() < 1e-6, "{got} vs {}", acc.sqrt());
    }

    #[test]
    fn ratios_are_homogeneous() {
        let bx = LatticeBox::new(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vals: Vec<f64> = (0..bx.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let u = LatticeFunction::from_dense(&bx, &vals);
        let s = equivalence_ratios(&[u.clone(), u.scale(3.0), u.scale(0.01)], 2.0, &QuadratureRule::default()).unwrap();
        assert!(s.lp.spread() - 1.0 < 1e-12 && s.grad.spread() - 1.0 < 1e-12);
        // a constant on a large box: both gradient norms live on the boundary
        let big = LatticeBox::new(2, 20).unwrap();
        let c = LatticeFunction::from_dense(&big, &vec![1.0; big.len()]);
        let sc = equivalence_ratios(&[c], 2.0, &QuadratureRule::default()).unwrap();
        assert!(sc.grad.min > 0.0 && sc.grad.max.is_finite());
        assert!(matches!(
            equivalence_ratios(&[LatticeFunction::<f64>::zero(2)], 2.0, &QuadratureRule::default()),
            Err(Error::ZeroFunction)
        ));
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in prop::collection::vec(0.0..=1.0f64, 1..=4)) {
            let c = barycentric_coeffs(&x).unwrap();
            prop_assert_eq!(c.len(), 1 << x.len());
            prop_assert!(c.iter().all(|&v| v >= 0.0));
            prop_assert!((c.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn interpolates_and_is_linear(
            a in prop::collection::vec(-1.0..1.0f64, 25),
            b in prop::collection::vec(-1.0..1.0f64, 25),
            alpha in -2.0..2.0f64,
            x in prop::collection::vec(-2.5..2.5f64, 2),
        ) {
            let bx = LatticeBox::new(2, 2).unwrap();
            let u = LatticeFunction::from_dense(&bx, &a);
            let v = LatticeFunction::from_dense(&bx, &b);
            for p in bx.points() {
                let c: Vec<f64> = p.coords().iter().map(|&c| c as f64).collect();
                prop_assert_eq!(evaluate_extension(&u, &c).unwrap(), u.get(&p));
            }
            let w = u.axpy(alpha, &v).unwrap();
            let lhs = evaluate_extension(&w, &x).unwrap();
            let rhs = evaluate_extension(&u, &x).unwrap() + alpha * evaluate_extension(&v, &x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}

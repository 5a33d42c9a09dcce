//! Parameter validation for the discrete Caffarelli–Kohn–Nirenberg
//! inequality, the critical exponent from the dimensional balance condition,
//! and the inequality quotient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{d1p_norm, lp_norm, LatticeFunction};
use crate::scalar::{lit, Scalar};

/// Largest accepted magnitude for weight exponents and Lebesgue exponents.
pub const PARAM_MAGNITUDE_LIMIT: f64 = 1.0e3;

/// Relative tolerance for classifying `q = q*`.
pub const CRITICAL_TOL: f64 = 1.0e-12;

/// Unvalidated parameter document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CknSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Critical,
    Supercritical,
}

/// Validated parameters together with the derived critical exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CknParams {
    #[serde(flatten)]
    pub spec: CknSpec,
    pub q_star: f64,
    pub regime: Regime,
}

/// Solves `1/q* + b/N = θ(1/p + (a-1)/N) + (1-θ)(1/r + c/N)` for `q*`.
pub fn critical_q(n: usize, p: f64, r: f64, a: f64, b: f64, c: f64, theta: f64) -> Result<f64> {
    let nf = n as f64;
    let mut rhs = -b / nf;
    if theta != 0.0 {
        rhs += theta * (1.0 / p + (a - 1.0) / nf);
    }
    if theta != 1.0 {
        rhs += (1.0 - theta) * (1.0 / r + c / nf);
    }
    if !(rhs > 0.0) || !rhs.is_finite() {
        return Err(Error::InfeasibleBalance { reciprocal: rhs });
    }
    Ok(1.0 / rhs)
}

/// Checks every hypothesis of the inequality and classifies the regime.
/// Subcritical exponents are rejected with their own error.
pub fn validate(spec: &CknSpec) -> Result<CknParams> {
    let CknSpec { n, p, q, r, a, b, c, theta } = *spec;
    let nf = n as f64;
    let mut bad = Vec::new();
    let finite = [p, q, r, a, b, c, theta].iter().all(|v| v.is_finite());
    if !finite {
        bad.push("all parameters finite".to_string());
    }
    if n < 1 {
        bad.push("N >= 1".into());
    }
    for (name, v) in [("p", p), ("q", q), ("r", r)] {
        if !(v > 1.0) {
            bad.push(format!("{name} > 1"));
        }
        if v > PARAM_MAGNITUDE_LIMIT {
            bad.push(format!("{name} <= {PARAM_MAGNITUDE_LIMIT} (range guard)"));
        }
    }
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if v.abs() > PARAM_MAGNITUDE_LIMIT {
            bad.push(format!("|{name}| <= {PARAM_MAGNITUDE_LIMIT} (range guard)"));
        }
    }
    if !(0.0..=1.0).contains(&theta) {
        bad.push("0 <= theta <= 1".into());
    }
    if n >= 1 {
        if !(1.0 / p + a / nf > 0.0) {
            bad.push("1/p + a/N > 0".into());
        }
        if !(1.0 / r + c / nf > 0.0) {
            bad.push("1/r + c/N > 0".into());
        }
    }
    if !(b <= theta * a + (1.0 - theta) * c) {
        bad.push("b <= theta*a + (1-theta)*c".into());
    }
    if !bad.is_empty() {
        return Err(Error::InvalidParams(bad));
    }
    let q_star = critical_q(n, p, r, a, b, c, theta)?;
    let regime = classify(q, q_star)?;
    Ok(CknParams { spec: *spec, q_star, regime })
}

fn classify(q: f64, q_star: f64) -> Result<Regime> {
    if (q - q_star).abs() <= CRITICAL_TOL * q_star {
        Ok(Regime::Critical)
    } else if q > q_star {
        Ok(Regime::Supercritical)
    } else {
        Err(Error::Subcritical { q, q_star })
    }
}

/// `(‖u‖_{D¹ᵖ_a}^θ ‖u‖_{ℓʳ_c}^{1-θ}) / ‖u‖_{ℓ^q_b}`. The norm carrying a zero
/// power is not evaluated.
pub fn quotient<T: Scalar>(u: &LatticeFunction<T>, params: &CknParams) -> Result<T> {
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let s = &params.spec;
    let theta: T = lit(s.theta);
    let mut num = T::one();
    if s.theta != 0.0 {
        num *= d1p_norm(u, lit(s.p), lit(s.a))?.powf(theta);
    }
    if s.theta != 1.0 {
        num *= lp_norm(u, lit(s.r), lit(s.c))?.powf(T::one() - theta);
    }
    Ok(num / lp_norm(u, lit(s.q), lit(s.b))?)
}

/// Parameters of the weighted Sobolev problem: `θ = 1`, `a = c = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub p: f64,
    pub b: f64,
    pub q: f64,
    pub q_star: f64,
}

impl SParams {
    pub fn new(n: usize, p: f64, b: f64, q: f64) -> Result<Self> {
        let nf = n as f64;
        let mut bad = Vec::new();
        if n < 1 {
            bad.push("N >= 1".to_string());
        }
        if !(p > 1.0 && p < nf) {
            bad.push("1 < p < N".into());
        }
        if !((-1.0..=0.0).contains(&b)) {
            bad.push("-1 <= b <= 0".into());
        }
        if !q.is_finite() || q > PARAM_MAGNITUDE_LIMIT {
            bad.push(format!("q <= {PARAM_MAGNITUDE_LIMIT} (range guard)"));
        }
        if !bad.is_empty() {
            return Err(Error::InvalidParams(bad));
        }
        let denom = nf - p - p * b;
        if !(denom > 0.0) {
            return Err(Error::InfeasibleBalance { reciprocal: denom / (nf * p) });
        }
        let q_star = nf * p / denom;
        if !(q_star > 1.0) {
            return Err(Error::InvalidParams(vec!["q* > 1".into()]));
        }
        require_supercritical(q, q_star)?;
        Ok(Self { n, p, b, q, q_star })
    }

    pub fn as_ckn(&self) -> CknParams {
        CknParams {
            spec: CknSpec { n: self.n, p: self.p, q: self.q, r: self.p, a: 0.0, b: self.b, c: 0.0, theta: 1.0 },
            q_star: self.q_star,
            regime: Regime::Supercritical,
        }
    }
}

/// Parameters of the interpolation problem: `a = b = c = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub p: f64,
    pub r: f64,
    pub theta: f64,
    pub q: f64,
    pub q_star: f64,
}

impl KParams {
    pub fn new(n: usize, p: f64, r: f64, theta: f64, q: f64) -> Result<Self> {
        let nf = n as f64;
        let mut bad = Vec::new();
        if n < 1 {
            bad.push("N >= 1".to_string());
        }
        if !(p > 1.0) {
            bad.push("p > 1".into());
        }
        if !(r > 1.0) {
            bad.push("r > 1".into());
        }
        if !(0.0..=1.0).contains(&theta) {
            bad.push("0 <= theta <= 1".into());
        }
        for (name, v) in [("p", p), ("r", r), ("q", q)] {
            if !v.is_finite() || v > PARAM_MAGNITUDE_LIMIT {
                bad.push(format!("{name} <= {PARAM_MAGNITUDE_LIMIT} (range guard)"));
            }
        }
        if !bad.is_empty() {
            return Err(Error::InvalidParams(bad));
        }
        let mut recip = 0.0;
        if theta != 0.0 {
            recip += theta * (1.0 / p - 1.0 / nf);
        }
        if theta != 1.0 {
            recip += (1.0 - theta) / r;
        }
        if !(recip > 0.0) {
            return Err(Error::InfeasibleBalance { reciprocal: recip });
        }
        let q_star = 1.0 / recip;
        if !(q_star > 1.0) {
            return Err(Error::InvalidParams(vec!["q* > 1".into()]));
        }
        require_supercritical(q, q_star)?;
        Ok(Self { n, p, r, theta, q, q_star })
    }

    pub fn as_ckn(&self) -> CknParams {
        CknParams {
            spec: CknSpec { n: self.n, p: self.p, q: self.q, r: self.r, a: 0.0, b: 0.0, c: 0.0, theta: self.theta },
            q_star: self.q_star,
            regime: Regime::Supercritical,
        }
    }
}

fn require_supercritical(q: f64, q_star: f64) -> Result<()> {
    match classify(q, q_star)? {
        Regime::Supercritical => Ok(()),
        Regime::Critical => Err(Error::InvalidParams(vec![format!("q > q* = {q_star} (critical case excluded)")])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::LatticeFunction;
    use crate::lattice::{LatticeBox, LatticePoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(n: usize, p: f64, q: f64, b: f64) -> CknSpec {
        CknSpec { n, p, q, r: 2.0, a: 0.0, b, c: 0.0, theta: 1.0 }
    }

    #[test]
    fn critical_q_examples() {
        assert!((critical_q(3, 2.0, 2.0, 0.0, 0.0, 0.0, 1.0).unwrap() - 6.0).abs() < 1e-12);
        assert!((critical_q(3, 2.0, 2.0, 0.0, -0.5, 0.0, 1.0).unwrap() - 3.0).abs() < 1e-12);
        for (r, c) in [(2.0, 0.0), (3.5, 0.7), (1.5, -0.2)] {
            assert!((critical_q(2, 2.0, r, 0.3, c, c, 0.0).unwrap() - r).abs() < 1e-12);
        }
        assert!(matches!(critical_q(2, 2.0, 2.0, 0.0, 0.0, 0.0, 1.0), Err(Error::InfeasibleBalance { .. })));
    }

    #[test]
    fn critical_q_increasing_in_b() {
        let mut prev = 0.0;
        for k in 0..=20 {
            let b = -1.0 + k as f64 * 0.05;
            let qs = critical_q(3, 2.0, 2.0, 0.0, b, 0.0, 1.0).unwrap();
            assert!(qs > prev);
            prev = qs;
        }
    }

    #[test]
    fn validate_classifies() {
        assert_eq!(validate(&spec(3, 2.0, 6.0, 0.0)).unwrap().regime, Regime::Critical);
        assert_eq!(validate(&spec(3, 2.0, 7.0, 0.0)).unwrap().regime, Regime::Supercritical);
        match validate(&spec(3, 2.0, 5.0, 0.0)) {
            Err(e @ Error::Subcritical { .. }) => assert!(e.to_string().contains("Subcritical")),
            other => panic!("expected Subcritical, got {other:?}"),
        }
    }

    #[test]
    fn validate_names_violations() {
        let mut s = spec(3, 2.0, 7.0, 0.0);
        s.a = -2.0; // 1/p + a/N < 0, and b > theta a
        let msg = validate(&s).unwrap_err().to_string();
        assert!(msg.contains("1/p + a/N > 0"));
        assert!(msg.contains("b <= theta*a"));
        let mut s = spec(3, 0.5, 7.0, 0.0);
        s.theta = 1.5;
        let msg = validate(&s).unwrap_err().to_string();
        assert!(msg.contains("p > 1") && msg.contains("0 <= theta <= 1"));
        let mut s = spec(3, 2.0, 7.0, 0.0);
        s.c = 5e3;
        s.theta = 0.5;
        assert!(validate(&s).unwrap_err().to_string().contains("range guard"));
    }

    #[test]
    fn restricted_views() {
        let sp = SParams::new(3, 2.0, 0.0, 7.0).unwrap();
        assert!((sp.q_star - 6.0).abs() < 1e-12);
        assert!(matches!(SParams::new(3, 2.0, 0.0, 5.0), Err(Error::Subcritical { .. })));
        assert!(SParams::new(2, 2.0, 0.0, 7.0).is_err());
        assert!(SParams::new(3, 2.0, -1.5, 7.0).is_err());
        assert!(SParams::new(3, 2.0, 0.0, 6.0).is_err());
        let kp = KParams::new(2, 2.0, 2.0, 0.5, 6.0).unwrap();
        assert!((kp.q_star - 4.0).abs() < 1e-12);
        assert!(matches!(KParams::new(2, 2.0, 2.0, 1.0, 6.0), Err(Error::InfeasibleBalance { .. })));
        let k0 = KParams::new(1, 2.0, 2.0, 0.0, 3.0).unwrap();
        assert!((k0.q_star - 2.0).abs() < 1e-12);
        // the K view validates under the general hypotheses with matching q*
        let v = validate(&kp.as_ckn().spec).unwrap();
        assert!((v.q_star - kp.q_star).abs() < 1e-12);
        let v = validate(&sp.as_ckn().spec).unwrap();
        assert!((v.q_star - sp.q_star).abs() < 1e-12);
    }

    #[test]
    fn quotient_examples() {
        for n in 1..=3usize {
            let p = 1.5;
            // the quotient itself does not depend on feasibility of the balance condition
            let params = CknParams {
                spec: CknSpec { n, p, q: 50.0, r: 2.0, a: 0.0, b: 0.0, c: 0.0, theta: 1.0 },
                q_star: 1.0,
                regime: Regime::Supercritical,
            };
            let d = LatticeFunction::<f64>::delta(LatticePoint::origin(n));
            let want = (4.0 * n as f64).powf(1.0 / p);
            assert!((quotient(&d, &params).unwrap() - want).abs() < 1e-12);
        }
        let params = CknParams {
            spec: CknSpec { n: 1, p: 2.0, q: 2.0, r: 2.0, a: 0.0, b: 0.0, c: 0.0, theta: 0.5 },
            q_star: 1.0,
            regime: Regime::Supercritical,
        };
        let u = LatticeFunction::<f64>::indicator(1, [LatticePoint::new(vec![0]), LatticePoint::new(vec![1])])
            .unwrap();
        // oracle by direct summation: ‖∇u‖₂² over ordered pairs, ‖u‖₂², ‖u‖₂²
        let vals = |x: i64| -> f64 { if x == 0 || x == 1 { 1.0 } else { 0.0 } };
        let grad2: f64 = (-3..=4).map(|x: i64| (vals(x + 1) - vals(x)).powi(2) + (vals(x - 1) - vals(x)).powi(2)).sum();
        let l2 = (0..2).map(|_| 1.0).sum::<f64>().sqrt();
        let oracle = grad2.sqrt().powf(0.5) * l2.powf(0.5) / l2;
        assert!((quotient(&u, &params).unwrap() - oracle).abs() < 1e-14);
        assert!(matches!(quotient(&LatticeFunction::<f64>::zero(1), &params), Err(Error::ZeroFunction)));
    }

    #[test]
    fn quotient_scale_invariant_and_bounded_below() {
        let params =
            validate(&CknSpec { n: 2, p: 2.0, q: 5.0, r: 2.0, a: 0.0, b: -0.5, c: 0.0, theta: 0.5 }).unwrap();
        let bx = LatticeBox::new(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut running_min = f64::INFINITY;
        let mut history = Vec::new();
        for i in 0..600 {
            let vals: Vec<f64> =
                (0..bx.len()).map(|_| if rng.gen_bool(0.3) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect();
            let u = LatticeFunction::from_dense(&bx, &vals);
            if u.is_zero() {
                continue;
            }
            let qv = quotient(&u, &params).unwrap();
            let t = rng.gen_range(0.01..100.0);
            let qs = quotient(&u.scale(t), &params).unwrap();
            assert!((qs - qv).abs() <= 1e-12 * qv);
            running_min = running_min.min(qv);
            if i % 100 == 99 {
                history.push(running_min);
            }
        }
        assert!(running_min > 0.0);
        // the running minimum has settled: the last half of the run moves it by < 5%
        let mid = history[history.len() / 2 - 1];
        assert!(running_min >= 0.95 * mid, "{history:?}");
    }
}

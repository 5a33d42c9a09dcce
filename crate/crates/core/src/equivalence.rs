//! Logarithmic cutoff functions and the decay of their weighted gradient norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::LatticeFunction;
use crate::lattice::{LatticeBox, LatticePoint};
use crate::scalar::{lit, CompensatedSum, Scalar};

/// Smallest inner radius accepted.
pub const MIN_INNER_RADIUS: f64 = 10.0;

/// `η = 1` on `|x| ≤ r`, `0` on `|x| ≥ R`, log-interpolated between, with the
/// Euclidean length `|x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub a: f64,
    pub b: f64,
}

impl CutoffSpec {
    pub fn new(n: usize, r: f64, big_r: f64, a: f64, b: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if n < 1 {
            bad.push("N >= 1".to_string());
        }
        if !(r >= MIN_INNER_RADIUS && r.is_finite()) {
            bad.push(format!("r >= {MIN_INNER_RADIUS}"));
        }
        if !(big_r > r && big_r.is_finite()) {
            bad.push("R > r".into());
        }
        if !(0.0..=1.0).contains(&(a - b)) {
            bad.push("0 <= a - b <= 1".into());
        }
        if bad.is_empty() {
            Ok(Self { n, r, big_r, a, b })
        } else {
            Err(Error::InvalidParams(bad))
        }
    }

    pub fn with_outer(&self, big_r: f64) -> Result<Self> {
        Self::new(self.n, self.r, big_r, self.a, self.b)
    }

    /// Exponent of the norm: `N/(b-a+1)`, or `None` for the sup-norm case `a - b = 1`.
    pub fn norm_exponent(&self) -> Option<f64> {
        let gap = self.a - self.b;
        (gap < 1.0).then(|| self.n as f64 / (1.0 - gap))
    }

    /// Predicted slope of `ln ‖∇η‖` against `ln ln(R/r)`.
    pub fn predicted_slope(&self) -> f64 {
        match self.norm_exponent() {
            Some(s) => (1.0 - s) / s,
            None => -1.0,
        }
    }
}

struct Eta {
    r2: f64,
    big_r2: f64,
    ln_big_r: f64,
    inv_span: f64,
}

impl Eta {
    fn new(spec: &CutoffSpec) -> Self {
        Self {
            r2: spec.r * spec.r,
            big_r2: spec.big_r * spec.big_r,
            ln_big_r: spec.big_r.ln(),
            inv_span: 1.0 / (spec.big_r.ln() - spec.r.ln()),
        }
    }

    #[inline]
    fn at_sq(&self, norm2: f64) -> f64 {
        if norm2 <= self.r2 {
            1.0
        } else if norm2 >= self.big_r2 {
            0.0
        } else {
            ((self.ln_big_r - 0.5 * norm2.ln()) * self.inv_span).clamp(0.0, 1.0)
        }
    }
}

fn norm2(x: &[i64]) -> f64 {
    x.iter().map(|&c| (c as f64) * (c as f64)).sum()
}

/// `η(x)` for a single point.
pub fn cutoff_value(spec: &CutoffSpec, x: &LatticePoint) -> f64 {
    Eta::new(spec).at_sq(norm2(x.coords()))
}

/// Visits every lattice point with Euclidean length at most `rho`.
fn for_each_in_ball(n: usize, rho: f64, mut f: impl FnMut(&[i64])) {
    fn rec(k: usize, x: &mut Vec<i64>, left: f64, f: &mut impl FnMut(&[i64])) {
        if k == x.len() {
            f(x);
            return;
        }
        let m = left.max(0.0).sqrt().floor() as i64;
        for c in -m..=m {
            x[k] = c;
            rec(k + 1, x, left - (c * c) as f64, f);
        }
    }
    let mut x = vec![0i64; n];
    rec(0, &mut x, rho * rho, &mut f);
}

/// The cutoff as a lattice function on `bx`, which must reach `R + 2`.
pub fn make_cutoff<T: Scalar>(spec: &CutoffSpec, bx: &LatticeBox) -> Result<LatticeFunction<T>> {
    if bx.dim() != spec.n {
        return Err(Error::DimensionMismatch { expected: spec.n, got: bx.dim() });
    }
    let required = spec.big_r.ceil() as i64 + 2;
    if bx.radius() < required {
        return Err(Error::BoxTooSmall { radius: bx.radius(), required });
    }
    let eta = Eta::new(spec);
    let mut entries = Vec::new();
    for_each_in_ball(spec.n, spec.big_r, |x| {
        let v = eta.at_sq(norm2(x));
        if v > 0.0 {
            entries.push((LatticePoint::new(x.to_vec()), lit(v)));
        }
    });
    LatticeFunction::from_entries(spec.n, entries)
}

/// Weighted gradient norm of the cutoff over all of `Z^N`.
///
/// For `a - b < 1` this is `(Σ_x μ_{(a-b)s}(x) Σ_{y∼x} |η(y)-η(x)|^s)^{1/s}`
/// with `s = N/(b-a+1)`; for `a - b = 1` it is
/// `sup_x μ₁(x) Σ_{y∼x} |η(y)-η(x)|`.
pub fn cutoff_gradient_norm(spec: &CutoffSpec) -> f64 {
    cutoff_gradient_norm_within(spec, spec.big_r + 1.0)
}

/// As [`cutoff_gradient_norm`], restricted to points with `|x| ≤ rho`
/// (the lower endpoint of each edge for the summed norm).
pub fn cutoff_gradient_norm_within(spec: &CutoffSpec, rho: f64) -> f64 {
    let eta = Eta::new(spec);
    let n = spec.n;
    let mut y = vec![0i64; n];
    match spec.norm_exponent() {
        Some(s) => {
            let wexp = (spec.a - spec.b) * s;
            let weight = |x: &[i64]| -> f64 {
                if wexp == 0.0 {
                    1.0
                } else {
                    (1.0 + x.iter().map(|c| c.unsigned_abs()).sum::<u64>() as f64).powf(wexp)
                }
            };
            let pow = crate::scalar::AbsPow::new(s);
            let mut acc = CompensatedSum::<f64>::new();
            for_each_in_ball(n, rho, |x| {
                let ex = eta.at_sq(norm2(x));
                y.copy_from_slice(x);
                for k in 0..n {
                    y[k] += 1;
                    let d = eta.at_sq(norm2(&y)) - ex;
                    if d != 0.0 {
                        acc.add((weight(x) + weight(&y)) * pow.abs_pow(d));
                    }
                    y[k] -= 1;
                }
            });
            acc.value().powf(1.0 / s)
        }
        None => {
            let mut sup: f64 = 0.0;
            for_each_in_ball(n, rho, |x| {
                let ex = eta.at_sq(norm2(x));
                y.copy_from_slice(x);
                let mut total = 0.0;
                for k in 0..n {
                    for delta in [1, -1] {
                        y[k] += delta;
                        total += (eta.at_sq(norm2(&y)) - ex).abs();
                        y[k] -= delta;
                    }
                }
                let mu = 1.0 + x.iter().map(|c| c.unsigned_abs()).sum::<u64>() as f64;
                sup = sup.max(mu * total);
            });
            sup
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSample {
    #[serde(rename = "R")]
    pub big_r: f64,
    pub norm: f64,
}

/// Gradient norms along a family of outer radii sharing `r`, `N`, `a`, `b`.
pub fn cutoff_scan(template: &CutoffSpec, radii: &[f64]) -> Result<Vec<CutoffSample>> {
    radii
        .iter()
        .map(|&big_r| {
            let spec = template.with_outer(big_r)?;
            Ok(CutoffSample { big_r, norm: cutoff_gradient_norm(&spec) })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub predicted: f64,
}

impl DecayFit {
    pub fn relative_error(&self) -> f64 {
        ((self.slope - self.predicted) / self.predicted).abs()
    }
}

/// Least-squares slope of `ln norm` against `ln ln(R/r)`. Needs at least three
/// samples whose outer radii span two decades.
pub fn decay_exponent_fit(template: &CutoffSpec, samples: &[CutoffSample]) -> Result<DecayFit> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples(format!("need at least 3 radii, got {}", samples.len())));
    }
    let lo = samples.iter().map(|s| s.big_r).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.big_r).fold(0.0, f64::max);
    if hi < 100.0 * lo {
        return Err(Error::InsufficientSamples(format!("radii span {lo}..{hi}, need a factor of 100")));
    }
    if samples.iter().any(|s| !(s.norm > 0.0) || !(s.big_r > template.r)) {
        return Err(Error::InsufficientSamples("every sample needs R > r and a positive norm".into()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| ((s.big_r / template.r).ln().ln(), s.norm.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit { slope, intercept: my - slope * mx, predicted: template.predicted_slope() })
}

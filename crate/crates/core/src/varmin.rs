//! Constrained minimization of the Sobolev and CKN quotients on nested boxes.
//!
//! Fields live densely on a [`LatticeBox`] with zero values outside. The
//! descent works on the logarithm of the 0-homogeneous quotient, renormalizes
//! after every step and projects onto the Schwarz symmetric cone with the
//! rearrangement sweep.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ckn::{CknParams, KParams, SParams};
use crate::error::{Error, Result};
use crate::funcspace::LatticeFunction;
use crate::lattice::LatticeBox;
use crate::rearrange::{RearrangePlan, SweepConfig};
use crate::scalar::{lit, to_f64, AbsPow, CompensatedSum, Scalar};

/// Smallest trial step before a line search gives up.
pub const STEP_FLOOR: f64 = 1.0e-14;
/// Relative slack allowed when asserting the rearrangement inequalities.
pub const INVARIANT_TOL: f64 = 1.0e-12;
/// Number of iterations over which the energy-change rule is measured.
pub const STAGNATION_WINDOW: usize = 50;
const RESET_THRESHOLD: f64 = 1.0e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub box_radii: Vec<i64>,
    pub step: f64,
    pub tol_energy: f64,
    pub tol_exhaust: f64,
    pub tol_grad: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub rearrange_every: usize,
    pub init_jitter: f64,
    pub lbfgs_memory: usize,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            box_radii: vec![8, 16, 32],
            step: 1.0,
            tol_energy: 1.0e-10,
            tol_exhaust: 1.0e-3,
            tol_grad: 1.0e-9,
            max_iters: 2000,
            seed: 0,
            rearrange_every: 1,
            init_jitter: 1.0e-3,
            lbfgs_memory: 10,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn with_boxes(box_radii: Vec<i64>) -> Self {
        Self { box_radii, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.box_radii.is_empty() {
            bad.push("box_radii nonempty".to_string());
        }
        if self.box_radii.iter().any(|&l| l < 1) {
            bad.push("box radii >= 1".into());
        }
        if self.box_radii.windows(2).any(|w| w[1] <= w[0]) {
            bad.push("box_radii strictly increasing".into());
        }
        for (name, v) in [
            ("step", self.step),
            ("tol_energy", self.tol_energy),
            ("tol_exhaust", self.tol_exhaust),
            ("tol_grad", self.tol_grad),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} > 0"));
            }
        }
        if self.max_iters == 0 {
            bad.push("max_iters >= 1".into());
        }
        if self.rearrange_every == 0 {
            bad.push("rearrange_every >= 1".into());
        }
        if !(0.0..0.5).contains(&self.init_jitter) {
            bad.push("0 <= init_jitter < 0.5".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad.join("; ")))
        }
    }
}

/// Which quotient is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Problem {
    S(SParams),
    K(KParams),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::S(s) => s.n,
            Problem::K(k) => k.n,
        }
    }

    pub fn as_ckn(&self) -> CknParams {
        match self {
            Problem::S(s) => s.as_ckn(),
            Problem::K(k) => k.as_ckn(),
        }
    }

    /// Re-runs parameter validation (the fields are public).
    pub fn revalidate(&self) -> Result<()> {
        match *self {
            Problem::S(s) => SParams::new(s.n, s.p, s.b, s.q).map(|_| ()),
            Problem::K(k) => KParams::new(k.n, k.p, k.r, k.theta, k.q).map(|_| ()),
        }
    }
}

/// The three sums a quotient is built from: `E = ‖u‖_{D¹ᵖ}^p`,
/// `C = Σ μ u^q` (the constraint) and `R = Σ u^r` (K only, else zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms<T> {
    pub energy: T,
    pub constraint: T,
    pub aux: T,
}

/// Visits every axis-parallel line of the box as `(start, stride)`.
fn for_each_line(bx: &LatticeBox, strides: &[usize], mut f: impl FnMut(usize, usize)) {
    let side = bx.side();
    let len = bx.len();
    for &s in strides {
        let block = side * s;
        for outer in (0..len).step_by(block) {
            for inner in 0..s {
                f(outer + inner, s);
            }
        }
    }
}

fn p_energy_dense<T: Scalar>(bx: &LatticeBox, strides: &[usize], u: &[T], pp: &AbsPow<T>) -> T {
    let side = bx.side();
    let mut acc = CompensatedSum::new();
    for_each_line(bx, strides, |start, s| {
        let mut prev = T::zero();
        for c in 0..side {
            let v = u[start + c * s];
            acc.add(pp.abs_pow(v - prev));
            prev = v;
        }
        acc.add(pp.abs_pow(prev));
    });
    // each edge is seen once here and counted from both endpoints
    acc.value() * lit(2.0)
}

fn p_energy_gradient_dense<T: Scalar>(bx: &LatticeBox, strides: &[usize], u: &[T], pp: &AbsPow<T>, out: &mut [T]) {
    let side = bx.side();
    let two_p = pp.exponent() * lit(2.0);
    out.iter_mut().for_each(|g| *g = T::zero());
    for_each_line(bx, strides, |start, s| {
        let mut prev = T::zero();
        for c in 0..side {
            let i = start + c * s;
            let g = two_p * pp.signed_pow_m1(u[i] - prev);
            out[i] += g;
            if c > 0 {
                out[i - s] -= g;
            }
            prev = u[i];
        }
        out[start + (side - 1) * s] -= two_p * pp.signed_pow_m1(-prev);
    });
}

/// `‖u‖_{D¹ᵖ}^p` and its gradient `-2p Δₚu` for a field on `bx` that
/// vanishes outside it.
pub fn p_energy_with_gradient<T: Scalar>(bx: &LatticeBox, u: &[T], p: T) -> Result<(T, Vec<T>)> {
    if u.len() != bx.len() {
        return Err(Error::DimensionMismatch { expected: bx.len(), got: u.len() });
    }
    if !(p > T::one()) {
        return Err(Error::InvalidExponent { name: "p", value: to_f64(p), reason: "must exceed 1" });
    }
    let strides = bx.strides();
    let pp = AbsPow::new(p);
    let mut g = vec![T::zero(); u.len()];
    p_energy_gradient_dense(bx, &strides, u, &pp, &mut g);
    Ok((p_energy_dense(bx, &strides, u, &pp), g))
}

/// Quotient to minimize on one box, in dense form.
#[derive(Debug, Clone)]
pub struct Objective<T> {
    problem: Problem,
    bx: LatticeBox,
    strides: Vec<usize>,
    p: T,
    q: T,
    r: T,
    theta: T,
    pp: AbsPow<T>,
    qp: AbsPow<T>,
    rp: AbsPow<T>,
    weights: Option<Vec<T>>,
}

impl<T: Scalar> Objective<T> {
    pub fn new(problem: Problem, bx: &LatticeBox) -> Result<Self> {
        if bx.dim() != problem.dim() {
            return Err(Error::DimensionMismatch { expected: problem.dim(), got: bx.dim() });
        }
        let (p, q, r, theta, b) = match problem {
            Problem::S(s) => (s.p, s.q, s.p, 1.0, s.b),
            Problem::K(k) => (k.p, k.q, k.r, k.theta, 0.0),
        };
        let weights = (b != 0.0).then(|| {
            let s: T = lit(q * b);
            bx.distances().into_iter().map(|d| (T::one() + lit(d as f64)).powf(s)).collect()
        });
        let (p, q, r, theta) = (lit(p), lit(q), lit(r), lit(theta));
        Ok(Self {
            problem,
            bx: *bx,
            strides: bx.strides(),
            p,
            q,
            r,
            theta,
            pp: AbsPow::new(p),
            qp: AbsPow::new(q),
            rp: AbsPow::new(r),
            weights,
        })
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    fn uses_energy(&self) -> bool {
        self.theta != T::zero()
    }

    fn uses_aux(&self) -> bool {
        matches!(self.problem, Problem::K(_)) && self.theta != T::one()
    }

    fn constraint_sum(&self, u: &[T]) -> T {
        match &self.weights {
            Some(w) => u.iter().zip(w).map(|(&v, &w)| w * self.qp.abs_pow(v)).collect::<CompensatedSum<T>>().value(),
            None => u.iter().map(|&v| self.qp.abs_pow(v)).collect::<CompensatedSum<T>>().value(),
        }
    }

    pub fn terms(&self, u: &[T]) -> Terms<T> {
        let energy = if self.uses_energy() { p_energy_dense(&self.bx, &self.strides, u, &self.pp) } else { T::zero() };
        let aux = if self.uses_aux() {
            u.iter().map(|&v| self.rp.abs_pow(v)).collect::<CompensatedSum<T>>().value()
        } else {
            T::zero()
        };
        Terms { energy, constraint: self.constraint_sum(u), aux }
    }

    /// The quotient value: `E / C^{p/q}` for S and
    /// `E^{θ/p} R^{(1-θ)/r} / C^{1/q}` for K.
    pub fn value(&self, t: &Terms<T>) -> T {
        if t.constraint <= T::zero() {
            return T::infinity();
        }
        match self.problem {
            Problem::S(_) => t.energy / t.constraint.powf(self.p / self.q),
            Problem::K(_) => {
                let mut num = T::one();
                if self.uses_energy() {
                    num *= t.energy.powf(self.theta / self.p);
                }
                if self.uses_aux() {
                    num *= t.aux.powf((T::one() - self.theta) / self.r);
                }
                num / t.constraint.powf(self.q.recip())
            }
        }
    }

    /// Projected gradient of the log-quotient. Components at `u = 0` that
    /// would push `u` negative are dropped.
    pub fn log_gradient(&self, u: &[T], t: &Terms<T>, out: &mut [T]) {
        let (ce, ca, cc) = match self.problem {
            Problem::S(_) => (t.energy.recip(), T::zero(), -(self.p / self.q) / t.constraint),
            Problem::K(_) => (
                if self.uses_energy() { self.theta / self.p / t.energy } else { T::zero() },
                if self.uses_aux() { (T::one() - self.theta) / self.r / t.aux } else { T::zero() },
                -(self.q.recip()) / t.constraint,
            ),
        };
        if self.uses_energy() {
            p_energy_gradient_dense(&self.bx, &self.strides, u, &self.pp, out);
            out.iter_mut().for_each(|g| *g *= ce);
        } else {
            out.iter_mut().for_each(|g| *g = T::zero());
        }
        for (i, g) in out.iter_mut().enumerate() {
            let v = u[i];
            let w = self.weights.as_ref().map_or(T::one(), |w| w[i]);
            *g += cc * self.q * w * self.qp.signed_pow_m1(v);
            if ca != T::zero() {
                *g += ca * self.r * self.rp.signed_pow_m1(v);
            }
            if v <= T::zero() && *g > T::zero() {
                *g = T::zero();
            }
        }
    }

    /// `‖∇ log Q‖ / ‖(deg/q) ∇C / C‖`, which equals the relative residual of
    /// the Euler–Lagrange equation and is invariant under scaling of `u`.
    pub fn relative_gradient(&self, u: &[T], t: &Terms<T>, grad: &[T]) -> T {
        let deg = match self.problem {
            Problem::S(_) => self.p,
            Problem::K(_) => T::one(),
        };
        let num: T = grad.iter().map(|&g| g * g).collect::<CompensatedSum<T>>().value();
        let den: T = u
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let w = self.weights.as_ref().map_or(T::one(), |w| w[i]);
                let f = deg * w * self.qp.signed_pow_m1(v) / t.constraint;
                f * f
            })
            .collect::<CompensatedSum<T>>()
            .value();
        if den <= T::zero() {
            return T::infinity();
        }
        (num / den).sqrt()
    }

    /// `C^{1/q}`, the constrained norm.
    pub fn constraint_norm(&self, u: &[T]) -> T {
        self.constraint_sum(u).powf(self.q.recip())
    }

    /// Scales `u` onto the constraint sphere.
    pub fn normalize(&self, u: &mut [T]) -> Result<()> {
        let n = self.constraint_norm(u);
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::ZeroFunction);
        }
        u.iter_mut().for_each(|v| *v /= n);
        Ok(())
    }
}

/// An accepted trial point.
#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub u: Vec<T>,
    pub terms: Terms<T>,
    pub value: T,
    pub step: f64,
}

/// Moves along `direction`, clips to `u ≥ 0` and renormalizes. Halves the step
/// until the quotient decreases below `current`; below [`STEP_FLOOR`] the
/// search stalls.
pub fn descent_step<T: Scalar>(
    obj: &Objective<T>,
    u: &[T],
    current: T,
    direction: &[T],
    step: f64,
) -> Result<StepOutcome<T>> {
    let mut alpha = step;
    let mut trial = vec![T::zero(); u.len()];
    while alpha >= STEP_FLOOR {
        let a: T = lit(alpha);
        for ((t, &v), &d) in trial.iter_mut().zip(u).zip(direction) {
            *t = (v + a * d).max(T::zero());
        }
        if obj.normalize(&mut trial).is_ok() {
            let terms = obj.terms(&trial);
            let value = obj.value(&terms);
            if value < current {
                return Ok(StepOutcome { u: trial, terms, value, step: alpha });
            }
        }
        alpha *= 0.5;
    }
    Err(Error::StepStall { step: alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    #[serde(rename = "L")]
    pub radius: i64,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rel_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(rename = "L")]
    pub radius: i64,
    pub iteration: usize,
    pub energy: f64,
    pub rel_grad: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult<T> {
    /// Normalized, nonnegative, Schwarz symmetric minimizer on the last box.
    pub u: LatticeFunction<T>,
    pub radius: i64,
    /// `‖u‖_{D¹ᵖ}^p` for S, `‖u‖_{D¹ᵖ}^θ ‖u‖_{ℓʳ}^{1-θ}` for K.
    pub energy: T,
    pub per_box: Vec<BoxSummary>,
    /// Exhaustion criterion met before the radii ran out.
    pub converged: bool,
    /// The descent on the last box met its own stopping rule.
    pub final_box_converged: bool,
    pub problem: Problem,
    pub trace: Option<Vec<TraceRecord>>,
}

impl<T: Scalar> MinimizeResult<T> {
    pub fn bx(&self) -> LatticeBox {
        LatticeBox::new(self.problem.dim(), self.radius).expect("radius validated")
    }
}

pub fn minimize_s<T: Scalar>(sp: &SParams, cfg: &SolverConfig) -> Result<MinimizeResult<T>> {
    minimize(Problem::S(*sp), cfg)
}

pub fn minimize_k<T: Scalar>(kp: &KParams, cfg: &SolverConfig) -> Result<MinimizeResult<T>> {
    minimize(Problem::K(*kp), cfg)
}

/// Seeded profile `exp(-d²/L)` with multiplicative jitter, not yet
/// symmetrized or normalized.
pub fn initial_guess<T: Scalar>(bx: &LatticeBox, cfg: &SolverConfig) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = bx.radius().max(1) as f64;
    bx.distances()
        .into_iter()
        .map(|d| {
            let d = d as f64;
            let j = if cfg.init_jitter > 0.0 { rng.gen_range(-cfg.init_jitter..cfg.init_jitter) } else { 0.0 };
            lit((-d * d / l).exp() * (1.0 + j))
        })
        .collect()
}

fn zero_extend<T: Scalar>(from: &LatticeBox, u: &[T], to: &LatticeBox) -> Vec<T> {
    let mut out = vec![T::zero(); to.len()];
    for (i, &v) in u.iter().enumerate() {
        let x = from.point_at(i);
        out[to.index_of(&x).expect("nested boxes")] = v;
    }
    out
}

pub fn minimize<T: Scalar>(problem: Problem, cfg: &SolverConfig) -> Result<MinimizeResult<T>> {
    cfg.validate()?;
    problem.revalidate()?;
    let n = problem.dim();
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut per_box: Vec<BoxSummary> = Vec::new();
    let mut prev: Option<(LatticeBox, Vec<T>)> = None;
    let mut converged = false;
    let mut last_value = T::nan();
    let mut last_box_converged = false;
    for &radius in &cfg.box_radii {
        let bx = LatticeBox::new(n, radius)?;
        let obj = Objective::new(problem, &bx)?;
        let plan = RearrangePlan::new(&bx)?;
        let max_sweeps = SweepConfig::for_box(&bx).max_sweeps;
        let mut u = match &prev {
            None => {
                let mut u = initial_guess(&bx, cfg);
                plan.schwarz_dense(&mut u, max_sweeps)?;
                u
            }
            Some((pb, pu)) => zero_extend(pb, pu, &bx),
        };
        obj.normalize(&mut u)?;
        let run = descend(&obj, &plan, max_sweeps, u, cfg, &mut trace)?;
        let energy = to_f64(run.value);
        let exhausted = per_box
            .last()
            .map(|b: &BoxSummary| ((energy - b.energy) / b.energy).abs() < cfg.tol_exhaust)
            .unwrap_or(false);
        per_box.push(BoxSummary {
            radius,
            energy,
            iterations: run.iterations,
            converged: run.converged,
            rel_grad: to_f64(run.rel_grad),
        });
        last_value = run.value;
        last_box_converged = run.converged;
        prev = Some((bx, run.u));
        if exhausted {
            converged = true;
            break;
        }
    }
    let (bx, u) = prev.expect("at least one box");
    Ok(MinimizeResult {
        u: LatticeFunction::from_dense(&bx, &u),
        radius: bx.radius(),
        energy: last_value,
        per_box,
        converged,
        final_box_converged: last_box_converged,
        problem,
        trace,
    })
}

struct BoxRun<T> {
    u: Vec<T>,
    value: T,
    iterations: usize,
    converged: bool,
    rel_grad: T,
}

struct Memory<T> {
    pairs: VecDeque<(Vec<T>, Vec<T>, T)>,
    cap: usize,
}

impl<T: Scalar> Memory<T> {
    fn push(&mut self, s: Vec<T>, y: Vec<T>) {
        if self.cap == 0 {
            return;
        }
        let sy = dot(&s, &y);
        let scale = (dot(&s, &s) * dot(&y, &y)).sqrt();
        if !(sy > lit::<T>(1e-12) * scale) {
            return;
        }
        if self.pairs.len() == self.cap {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, sy.recip()));
    }

    /// Two-loop recursion; `None` with an empty memory.
    fn direction(&self, grad: &[T]) -> Option<Vec<T>> {
        let (s_last, y_last, _) = self.pairs.back()?;
        let mut q: Vec<T> = grad.iter().map(|&g| -g).collect();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = *rho * dot(s, &q);
            axpy(&mut q, -a, y);
            alphas.push(a);
        }
        let gamma = dot(s_last, y_last) / dot(y_last, y_last);
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = *rho * dot(y, &q);
            axpy(&mut q, a - b, s);
        }
        Some(q)
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect::<CompensatedSum<T>>().value()
}

fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    y.iter_mut().zip(x).for_each(|(y, &x)| *y += a * x);
}

fn steepest<T: Scalar>(u: &[T], grad: &[T], step: f64) -> Vec<T> {
    let umax = u.iter().fold(T::zero(), |m, &v| m.max(v));
    let gmax = grad.iter().fold(T::zero(), |m, &g| m.max(g.abs()));
    let scale = if gmax > T::zero() { lit::<T>(0.1 * step) * umax / gmax } else { T::zero() };
    grad.iter().map(|&g| -g * scale).collect()
}

fn descend<T: Scalar>(
    obj: &Objective<T>,
    plan: &RearrangePlan,
    max_sweeps: usize,
    mut u: Vec<T>,
    cfg: &SolverConfig,
    trace: &mut Option<Vec<TraceRecord>>,
) -> Result<BoxRun<T>> {
    let radius = obj.bx().radius();
    let tol: T = lit(INVARIANT_TOL);
    let mut terms = obj.terms(&u);
    let mut value = obj.value(&terms);
    let mut grad = vec![T::zero(); u.len()];
    obj.log_gradient(&u, &terms, &mut grad);
    let mut rel = obj.relative_gradient(&u, &terms, &grad);
    let mut memory = Memory { pairs: VecDeque::new(), cap: cfg.lbfgs_memory };
    let mut history: VecDeque<T> = VecDeque::from([value]);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        if rel <= lit(cfg.tol_grad) {
            converged = true;
            break;
        }
        if history.len() > STAGNATION_WINDOW {
            let old = history[0];
            if ((old - value) / value).abs() < lit(cfg.tol_energy) {
                converged = true;
                break;
            }
        }
        if iterations >= cfg.max_iters {
            break;
        }
        iterations += 1;

        let mut dir = memory.direction(&grad).filter(|d| dot(d, &grad) < T::zero());
        let outcome = loop {
            let used_memory = dir.is_some();
            let d = dir.take().unwrap_or_else(|| steepest(&u, &grad, cfg.step));
            match descent_step(obj, &u, value, &d, if used_memory { 1.0 } else { cfg.step.min(1.0) }) {
                Ok(o) => break Some(o),
                Err(Error::StepStall { .. }) if used_memory => memory.pairs.clear(),
                Err(Error::StepStall { .. }) => break None,
                Err(e) => return Err(e),
            }
        };
        let Some(o) = outcome else {
            // no descent at any step size: stationary to machine precision
            converged = true;
            break;
        };
        if !(o.value <= value) {
            return Err(Error::InvariantViolation(format!("energy increased from {value} to {}", o.value)));
        }
        let mut new_grad = vec![T::zero(); u.len()];
        obj.log_gradient(&o.u, &o.terms, &mut new_grad);
        memory.push(
            o.u.iter().zip(&u).map(|(&a, &b)| a - b).collect(),
            new_grad.iter().zip(&grad).map(|(&a, &b)| a - b).collect(),
        );
        u = o.u;
        terms = o.terms;
        value = o.value;
        grad = new_grad;

        if iterations % cfg.rearrange_every == 0 {
            let mut w = u.clone();
            plan.schwarz_dense(&mut w, max_sweeps)?;
            if w != u {
                let wt = obj.terms(&w);
                check_rearrangement(&terms, &wt, tol)?;
                obj.normalize(&mut w)?;
                let wt = obj.terms(&w);
                let wv = obj.value(&wt);
                if wv <= value {
                    let umax = u.iter().fold(T::zero(), |m, &v| m.max(v));
                    let change = w.iter().zip(&u).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
                    if change > lit::<T>(RESET_THRESHOLD) * umax {
                        memory.pairs.clear();
                    }
                    u = w;
                    terms = wt;
                    value = wv;
                    obj.log_gradient(&u, &terms, &mut grad);
                }
            }
        }
        rel = obj.relative_gradient(&u, &terms, &grad);
        history.push_back(value);
        if history.len() > STAGNATION_WINDOW + 1 {
            history.pop_front();
        }
        if let Some(t) = trace.as_mut() {
            t.push(TraceRecord { radius, iteration: iterations, energy: to_f64(value), rel_grad: to_f64(rel) });
        }
    }
    if !plan.is_fixed_point(&u) {
        plan.schwarz_dense(&mut u, max_sweeps)?;
        obj.normalize(&mut u)?;
        terms = obj.terms(&u);
        value = obj.value(&terms);
        obj.log_gradient(&u, &terms, &mut grad);
        rel = obj.relative_gradient(&u, &terms, &grad);
    }
    Ok(BoxRun { u, value, iterations, converged, rel_grad: rel })
}

/// Pólya–Szegő and Hardy–Littlewood consequences for one rearrangement:
/// energy does not grow, the weighted constraint sum does not shrink and the
/// unweighted `ℓʳ` sum is preserved.
fn check_rearrangement<T: Scalar>(before: &Terms<T>, after: &Terms<T>, tol: T) -> Result<()> {
    if after.energy > before.energy * (T::one() + tol) {
        return Err(Error::InvariantViolation(format!(
            "rearrangement increased the gradient energy: {} -> {}",
            before.energy, after.energy
        )));
    }
    if after.constraint < before.constraint * (T::one() - tol) {
        return Err(Error::InvariantViolation(format!(
            "rearrangement decreased the constraint sum: {} -> {}",
            before.constraint, after.constraint
        )));
    }
    if (after.aux - before.aux).abs() > tol * before.aux.max(T::min_positive_value()) {
        return Err(Error::InvariantViolation(format!(
            "rearrangement changed the lr sum: {} -> {}",
            before.aux, after.aux
        )));
    }
    Ok(())
}

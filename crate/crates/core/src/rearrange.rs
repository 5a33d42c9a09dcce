//! Discrete Schwarz rearrangement.
//!
//! Values along a line are re-placed in decreasing order at the doubled
//! positions `0, 2, -2, 4, -4, …` (integer lines) or `1, -1, 3, -3, …`
//! (half-integer lines). A one-step rearrangement applies this to every line
//! parallel to one direction; the Schwarz rearrangement cycles through all
//! `N²` directions until a full sweep leaves the function unchanged.
//!
//! Lines of a centered ℓ∞ cube are symmetric segments, so a rearranged line
//! always fits inside the box.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::funcspace::LatticeFunction;
use crate::lattice::{decompose, directions, Direction, LatticeBox, Parity};
use crate::scalar::{to_f64, Scalar};

/// Doubled position receiving the `k`-th largest value (0-based).
#[inline]
pub fn placement_position(k: usize, parity: Parity) -> i64 {
    let k = k as i64;
    match parity {
        Parity::Integer => {
            if k % 2 == 1 {
                k + 1
            } else {
                -k
            }
        }
        Parity::HalfInteger => {
            if k % 2 == 0 {
                k + 1
            } else {
                -k
            }
        }
    }
}

/// Inverse of [`placement_position`].
#[inline]
pub fn placement_rank(doubled: i64, _parity: Parity) -> usize {
    // both parities interleave the same way around the center
    (if doubled > 0 { doubled - 1 } else { -doubled }) as usize
}

/// One-dimensional rearrangement of a nonnegative function keyed by doubled
/// positions. Zeros are dropped from the output.
pub fn rearrange_1d<T: Scalar>(values: &BTreeMap<i64, T>, parity: Parity) -> Result<BTreeMap<i64, T>> {
    for (&pos, &v) in values {
        if Parity::of_doubled(pos) != parity {
            return Err(Error::ParityMismatch { position: pos });
        }
        if v < T::zero() || v.is_nan() {
            return Err(Error::NegativeValue { point: format!("{}/2", pos), value: to_f64(v) });
        }
    }
    let mut sorted: Vec<T> = values.values().copied().filter(|&v| v != T::zero()).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
    Ok(sorted.into_iter().enumerate().map(|(k, v)| (placement_position(k, parity), v)).collect())
}

/// Lines of one direction as flat dense-index lists in placement order.
#[derive(Debug, Clone)]
struct DirectionLines {
    direction: Direction,
    slots: Vec<u32>,
    offsets: Vec<usize>,
}

/// Precomputed line decompositions of a box for every sweep direction.
#[derive(Debug, Clone)]
pub struct RearrangePlan {
    bx: LatticeBox,
    dirs: Vec<DirectionLines>,
}

impl RearrangePlan {
    pub fn new(bx: &LatticeBox) -> Result<Self> {
        Self::with_order(bx, &directions(bx.dim()))
    }

    pub fn with_order(bx: &LatticeBox, order: &[Direction]) -> Result<Self> {
        if bx.len() > u32::MAX as usize {
            return Err(Error::InvalidConfig("box too large for dense rearrangement".into()));
        }
        let mut dirs = Vec::with_capacity(order.len());
        for &e in order {
            let lines = decompose(bx, e)?;
            let mut slots = Vec::with_capacity(bx.len());
            let mut offsets = Vec::with_capacity(lines.len() + 1);
            offsets.push(0);
            for line in lines {
                let mut ranked: Vec<(usize, u32)> = line
                    .positions
                    .iter()
                    .zip(&line.points)
                    .map(|(&d, x)| (placement_rank(d, line.parity), bx.index_of(x).expect("point in box") as u32))
                    .collect();
                ranked.sort_unstable();
                debug_assert!(ranked.iter().enumerate().all(|(k, &(r, _))| k == r));
                slots.extend(ranked.into_iter().map(|(_, i)| i));
                offsets.push(slots.len());
            }
            dirs.push(DirectionLines { direction: e, slots, offsets });
        }
        Ok(Self { bx: *bx, dirs })
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn order(&self) -> Vec<Direction> {
        self.dirs.iter().map(|d| d.direction).collect()
    }

    /// Applies the one-step rearrangement for the `which`-th direction in
    /// place. Returns the number of sites whose value changed.
    pub fn one_step_dense<T: Scalar>(&self, values: &mut [T], which: usize, buf: &mut Vec<T>) -> usize {
        let d = &self.dirs[which];
        let mut changed = 0;
        for w in d.offsets.windows(2) {
            let slots = &d.slots[w[0]..w[1]];
            buf.clear();
            buf.extend(slots.iter().map(|&i| values[i as usize]));
            if buf.windows(2).all(|p| p[0] >= p[1]) {
                continue;
            }
            buf.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
            for (&i, &v) in slots.iter().zip(buf.iter()) {
                let slot = &mut values[i as usize];
                if *slot != v {
                    *slot = v;
                    changed += 1;
                }
            }
        }
        changed
    }

    /// One pass over every direction; returns the number of changed sites.
    pub fn sweep<T: Scalar>(&self, values: &mut [T]) -> usize {
        let mut buf = Vec::new();
        (0..self.dirs.len()).map(|k| self.one_step_dense(values, k, &mut buf)).sum()
    }

    /// Iterates sweeps until one changes nothing. Returns the number of sweeps
    /// performed, including the final verification sweep.
    pub fn schwarz_dense<T: Scalar>(&self, values: &mut [T], max_sweeps: usize) -> Result<usize> {
        check_dense_nonnegative(values)?;
        let mut previous: Vec<T> = values.to_vec();
        for sweep in 1..=max_sweeps {
            let changed = self.sweep(values);
            if changed == 0 {
                return Ok(sweep);
            }
            if sweep == max_sweeps {
                return Err(Error::NonConvergence {
                    sweeps: sweep,
                    changed,
                    last_two: Box::new((
                        previous.iter().map(|&v| to_f64(v)).collect(),
                        values.iter().map(|&v| to_f64(v)).collect(),
                    )),
                });
            }
            previous.copy_from_slice(values);
        }
        Err(Error::InvalidConfig("max_sweeps must be positive".into()))
    }

    pub fn is_fixed_point<T: Scalar>(&self, values: &[T]) -> bool {
        let mut work = values.to_vec();
        self.sweep(&mut work) == 0
    }
}

fn check_dense_nonnegative<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|&v| v < T::zero() || v.is_nan()) {
        Some(i) => Err(Error::NegativeValue { point: format!("dense index {i}"), value: to_f64(values[i]) }),
        None => Ok(()),
    }
}

/// Sweep schedule for the Schwarz iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub max_sweeps: usize,
    pub order: Vec<Direction>,
}

impl SweepConfig {
    /// `10 N² (2L+1)` sweeps over the canonical direction cycle.
    pub fn for_box(bx: &LatticeBox) -> Self {
        let n = bx.dim();
        Self { max_sweeps: 10 * n * n * bx.side(), order: directions(n) }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be positive".into()));
        }
        let mut got = self.order.clone();
        let mut want = directions(dim);
        got.sort();
        want.sort();
        if got != want {
            return Err(Error::InvalidConfig("sweep order must be a permutation of the direction set".into()));
        }
        Ok(())
    }
}

fn prepare<T: Scalar>(u: &LatticeFunction<T>, bx: &LatticeBox) -> Result<Vec<T>> {
    u.require_nonnegative()?;
    u.to_dense(bx)
}

/// Rearranges every line of the box parallel to `e`.
pub fn one_step<T: Scalar>(u: &LatticeFunction<T>, e: Direction, bx: &LatticeBox) -> Result<LatticeFunction<T>> {
    let mut values = prepare(u, bx)?;
    let plan = RearrangePlan::with_order(bx, &[e])?;
    plan.one_step_dense(&mut values, 0, &mut Vec::new());
    Ok(LatticeFunction::from_dense(bx, &values))
}

/// The Schwarz rearrangement `u⋆`, with the number of sweeps used.
pub fn schwarz_with_stats<T: Scalar>(
    u: &LatticeFunction<T>,
    bx: &LatticeBox,
    cfg: &SweepConfig,
) -> Result<(LatticeFunction<T>, usize)> {
    cfg.validate(bx.dim())?;
    let mut values = prepare(u, bx)?;
    let plan = RearrangePlan::with_order(bx, &cfg.order)?;
    let sweeps = plan.schwarz_dense(&mut values, cfg.max_sweeps)?;
    Ok((LatticeFunction::from_dense(bx, &values), sweeps))
}

pub fn schwarz<T: Scalar>(u: &LatticeFunction<T>, bx: &LatticeBox, cfg: &SweepConfig) -> Result<LatticeFunction<T>> {
    schwarz_with_stats(u, bx, cfg).map(|(v, _)| v)
}

/// True iff one full sweep over all directions leaves `u` unchanged.
pub fn is_schwarz_symmetric<T: Scalar>(u: &LatticeFunction<T>, bx: &LatticeBox) -> Result<bool> {
    let values = prepare(u, bx)?;
    Ok(RearrangePlan::new(bx)?.is_fixed_point(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{d1p_norm, distribution, dot, lp_norm};
    use crate::lattice::LatticePoint;
    use proptest::prelude::*;

    fn p(c: &[i64]) -> LatticePoint {
        LatticePoint::new(c.to_vec())
    }

    /// Placement straight from `f⋆(x) = f_{1-2x}` (x <= 0), `f_{2x}` (x > 0),
    /// 1-based ranks, positions doubled.
    fn oracle_1d(values: &[f64], parity: Parity) -> BTreeMap<i64, f64> {
        let mut f: Vec<f64> = values.iter().copied().filter(|&v| v != 0.0).collect();
        f.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let n = f.len() as i64;
        let mut out = BTreeMap::new();
        let start = if parity == Parity::Integer { -2 * n } else { -2 * n - 1 };
        let mut d = start;
        while d <= 2 * n + 1 {
            let rank = if d <= 0 { 1 - d } else { d };
            if rank >= 1 && rank <= n {
                out.insert(d, f[(rank - 1) as usize]);
            }
            d += 2;
        }
        out
    }

    #[test]
    fn placement_rank_inverts_position() {
        for parity in [Parity::Integer, Parity::HalfInteger] {
            for k in 0..50 {
                assert_eq!(placement_rank(placement_position(k, parity), parity), k);
            }
        }
        assert_eq!((0..5).map(|k| placement_position(k, Parity::Integer)).collect::<Vec<_>>(), vec![0, 2, -2, 4, -4]);
        assert_eq!((0..4).map(|k| placement_position(k, Parity::HalfInteger)).collect::<Vec<_>>(), vec![1, -1, 3, -3]);
    }

    #[test]
    fn rearrange_1d_examples() {
        let input: BTreeMap<i64, f64> = [(0, 3.0), (2, 1.0), (4, 2.0)].into_iter().collect();
        let got = rearrange_1d(&input, Parity::Integer).unwrap();
        let want: BTreeMap<i64, f64> = [(-2, 1.0), (0, 3.0), (2, 2.0)].into_iter().collect();
        assert_eq!(got, want);
        assert_eq!(got, oracle_1d(&[3.0, 1.0, 2.0], Parity::Integer));

        let single: BTreeMap<i64, f64> = [(14, 5.0)].into_iter().collect();
        assert_eq!(rearrange_1d(&single, Parity::Integer).unwrap(), [(0, 5.0)].into_iter().collect());

        let half: BTreeMap<i64, f64> = [(1, 2.0), (3, 5.0)].into_iter().collect();
        let got = rearrange_1d(&half, Parity::HalfInteger).unwrap();
        assert_eq!(got, [(1, 5.0), (-1, 2.0)].into_iter().collect());
        assert_eq!(got, oracle_1d(&[2.0, 5.0], Parity::HalfInteger));
    }

    #[test]
    fn rearrange_1d_errors() {
        let neg: BTreeMap<i64, f64> = [(0, -1.0)].into_iter().collect();
        assert!(matches!(rearrange_1d(&neg, Parity::Integer), Err(Error::NegativeValue { .. })));
        let odd: BTreeMap<i64, f64> = [(1, 1.0)].into_iter().collect();
        assert!(matches!(rearrange_1d(&odd, Parity::Integer), Err(Error::ParityMismatch { .. })));
    }

    #[test]
    fn one_step_example() {
        let bx = LatticeBox::new(2, 2).unwrap();
        let u = LatticeFunction::<f64>::indicator(2, [p(&[0, 0]), p(&[1, 0]), p(&[1, 1])]).unwrap();
        let got = one_step(&u, Direction::Axis(0), &bx).unwrap();
        let want = LatticeFunction::<f64>::indicator(2, [p(&[0, 0]), p(&[1, 0]), p(&[0, 1])]).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn one_step_fixes_delta_and_matches_1d_in_one_dimension() {
        let bx = LatticeBox::new(3, 2).unwrap();
        let d = LatticeFunction::<f64>::delta(LatticePoint::origin(3));
        for e in directions(3) {
            assert_eq!(one_step(&d, e, &bx).unwrap(), d);
        }
        let bx1 = LatticeBox::new(1, 5).unwrap();
        let vals = [(-4, 0.5), (-1, 2.0), (0, 0.25), (3, 1.0), (5, 2.0)];
        let u = LatticeFunction::<f64>::from_entries(1, vals.iter().map(|&(x, v)| (p(&[x]), v))).unwrap();
        let got = one_step(&u, Direction::Axis(0), &bx1).unwrap();
        let oracle = oracle_1d(&vals.map(|(_, v)| v), Parity::Integer);
        let want = LatticeFunction::from_entries(1, oracle.into_iter().map(|(d, v)| (p(&[d / 2]), v))).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn one_step_rejects_bad_input() {
        let bx = LatticeBox::new(2, 1).unwrap();
        let neg = LatticeFunction::<f64>::delta(p(&[0, 0])).scale(-1.0);
        assert!(matches!(one_step(&neg, Direction::Axis(0), &bx), Err(Error::NegativeValue { .. })));
        let far = LatticeFunction::<f64>::delta(p(&[2, 0]));
        assert!(matches!(one_step(&far, Direction::Axis(0), &bx), Err(Error::SupportOutsideBox { .. })));
    }

    #[test]
    fn schwarz_moves_any_delta_to_origin() {
        let bx = LatticeBox::new(2, 3).unwrap();
        let cfg = SweepConfig::for_box(&bx);
        for x in bx.points() {
            let got = schwarz(&LatticeFunction::<f64>::delta(x), &bx, &cfg).unwrap();
            assert_eq!(got, LatticeFunction::delta(LatticePoint::origin(2)));
        }
    }

    #[test]
    fn symmetric_input_needs_one_sweep() {
        let bx = LatticeBox::new(3, 2).unwrap();
        let cfg = SweepConfig::for_box(&bx);
        let d = LatticeFunction::<f64>::delta(LatticePoint::origin(3));
        let (out, sweeps) = schwarz_with_stats(&d, &bx, &cfg).unwrap();
        assert_eq!(out, d);
        assert_eq!(sweeps, 1);
    }

    #[test]
    fn two_point_configuration_matches_brute_force() {
        let bx = LatticeBox::new(2, 3).unwrap();
        let cfg = SweepConfig::for_box(&bx);
        let u = LatticeFunction::<f64>::indicator(2, [p(&[3, 0]), p(&[0, 3])]).unwrap();
        let got = schwarz(&u, &bx, &cfg).unwrap();
        assert_eq!(got.support_len(), 2);
        assert!(got.get(&LatticePoint::origin(2)) == 1.0);
        // every sweep-invariant 2-point indicator in the box
        let pts: Vec<_> = bx.points().collect();
        let mut invariant = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let w = LatticeFunction::<f64>::indicator(2, [pts[i].clone(), pts[j].clone()]).unwrap();
                if is_schwarz_symmetric(&w, &bx).unwrap() {
                    invariant.push(w);
                }
            }
        }
        assert!(!invariant.is_empty());
        assert!(invariant.contains(&got));
        assert!(invariant.iter().all(|w| w.get(&LatticePoint::origin(2)) == 1.0));
    }

    #[test]
    fn symmetry_predicate_examples() {
        let bx = LatticeBox::new(2, 2).unwrap();
        assert!(is_schwarz_symmetric(&LatticeFunction::<f64>::delta(p(&[0, 0])), &bx).unwrap());
        assert!(!is_schwarz_symmetric(&LatticeFunction::<f64>::delta(p(&[1, 0])), &bx).unwrap());
        let neg = LatticeFunction::<f64>::delta(p(&[0, 0])).scale(-2.0);
        assert!(is_schwarz_symmetric(&neg, &bx).is_err());
    }

    #[test]
    fn nonconvergence_is_reported() {
        let bx = LatticeBox::new(2, 3).unwrap();
        let u = LatticeFunction::<f64>::indicator(2, [p(&[3, 3]), p(&[-2, 1]), p(&[0, -3])]).unwrap();
        let cfg = SweepConfig { max_sweeps: 1, order: directions(2) };
        match schwarz(&u, &bx, &cfg) {
            Err(Error::NonConvergence { sweeps, last_two, .. }) => {
                assert_eq!(sweeps, 1);
                assert_eq!(last_two.0.len(), bx.len());
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
        let bad = SweepConfig { max_sweeps: 5, order: vec![Direction::Axis(0)] };
        assert!(matches!(schwarz(&u, &bx, &bad), Err(Error::InvalidConfig(_))));
    }

    fn arb_nonneg(dim: usize, radius: i64) -> impl Strategy<Value = LatticeFunction<f64>> {
        let bx = LatticeBox::new(dim, radius).unwrap();
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64, Just(0.5)], bx.len())
            .prop_map(move |vals| LatticeFunction::from_dense(&bx, &vals))
    }

    fn arb_case() -> impl Strategy<Value = (LatticeBox, LatticeFunction<f64>, LatticeFunction<f64>)> {
        prop_oneof![Just((1usize, 6i64)), Just((2, 3)), Just((3, 1))].prop_flat_map(|(n, l)| {
            (Just(LatticeBox::new(n, l).unwrap()), arb_nonneg(n, l), arb_nonneg(n, l))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn one_step_is_equimeasurable((bx, u, _v) in arb_case()) {
            for e in directions(bx.dim()) {
                prop_assert_eq!(distribution(&one_step(&u, e, &bx).unwrap()), distribution(&u));
            }
        }

        #[test]
        fn energy_never_increases_per_step((bx, u, _v) in arb_case(), pp in prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0)]) {
            let mut cur = u;
            for _ in 0..2 {
                for e in directions(bx.dim()) {
                    let next = one_step(&cur, e, &bx).unwrap();
                    let (before, after) = (d1p_norm(&cur, pp, 0.0).unwrap(), d1p_norm(&next, pp, 0.0).unwrap());
                    prop_assert!(after <= before * (1.0 + 1e-12));
                    cur = next;
                }
            }
        }

        #[test]
        fn rearrangement_inequalities((bx, u, v) in arb_case()) {
            let cfg = SweepConfig::for_box(&bx);
            let us = schwarz(&u, &bx, &cfg).unwrap();
            let vs = schwarz(&v, &bx, &cfg).unwrap();
            let rhs = dot(&us, &vs);
            prop_assert!(dot(&u, &v) <= rhs + 1e-12 * rhs);
            for pp in [1.0, 1.5, 2.0, 3.0] {
                prop_assert!(d1p_norm(&us, pp, 0.0).unwrap() <= d1p_norm(&u, pp, 0.0).unwrap() * (1.0 + 1e-12));
            }
            for b in [-1.0, -0.5, 0.0] {
                for q in [2.0, 4.0] {
                    prop_assert!(lp_norm(&u, q, b).unwrap() <= lp_norm(&us, q, b).unwrap() * (1.0 + 1e-12));
                }
            }
            prop_assert_eq!(schwarz(&us, &bx, &cfg).unwrap(), us.clone());
            prop_assert!(is_schwarz_symmetric(&us, &bx).unwrap());
        }
    }
}

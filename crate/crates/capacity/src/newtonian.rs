//! Newtonian (random-walk) capacity of finite sets via equilibrium measures,
//! the exact union identity with its cross term, and the derivative-formula
//! sweep.
//!
//! The capacity is computed from the last-exit characterization: the
//! equilibrium weights `e_A` solve `sum_y g(x - y) e_A(y) = 1` for every
//! `x` in `A`, the weight `e_A(x)` is the escape probability of the walk
//! from `x`, and the capacity is the total mass of `e_A`.

use crate::error::{Error, Result};
use crate::exec;
use crate::green::Kernel;
use crate::lattice::{translate, FiniteSet, LatticePoint};
use crate::numerics::{solve_spd, WeightVector};
use crate::rng::StreamFactory;
use crate::sweep::SweepRecord;

/// Equilibrium measure of a finite set together with its total mass.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    measure: WeightVector,
    capacity: f64,
}

impl EquilibriumResult {
    /// Escape probabilities `P_x(no return to A)` indexed like the base set.
    pub fn measure(&self) -> &WeightVector {
        &self.measure
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn base(&self) -> &FiniteSet {
        self.measure.base()
    }
}

const NEGATIVE_WEIGHT_TOL: f64 = 1e-8;

/// Equilibrium measure and capacity of `a`, solving the Green-matrix system
/// with an all-ones right side.
pub fn equilibrium_measure(a: &FiniteSet, tol: f64) -> Result<EquilibriumResult> {
    equilibrium_measure_with(&Kernel::srw_green(a.dim(), tol)?, a)
}

/// Same as [`equilibrium_measure`] but reusing a kernel (and its cache).
pub fn equilibrium_measure_with(kernel: &Kernel, a: &FiniteSet) -> Result<EquilibriumResult> {
    let m = kernel.matrix(a)?;
    let rhs = vec![1.0; a.len()];
    let mut w = solve_spd(&m, &rhs)?;
    for v in w.iter_mut() {
        if *v < -NEGATIVE_WEIGHT_TOL {
            return Err(Error::Numerical(format!(
                "equilibrium weight {v:.3e} below -{NEGATIVE_WEIGHT_TOL:.0e}; kernel accuracy is suspect"
            )));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let capacity = w.iter().sum();
    Ok(EquilibriumResult {
        measure: WeightVector::new(a.clone(), w)?,
        capacity,
    })
}

/// Newtonian capacity of `a`.
pub fn capacity(a: &FiniteSet, tol: f64) -> Result<f64> {
    Ok(equilibrium_measure(a, tol)?.capacity)
}

/// The bilinear interaction term of the union identity:
/// `chi(A, B) = sum_{x in A} sum_{y in B} e_{A u B}(x) g(y - x) e_B(y)`.
pub fn cross_term(a: &FiniteSet, b: &FiniteSet, tol: f64) -> Result<f64> {
    cross_term_with(&Kernel::srw_green(a.dim(), tol)?, a, b)
}

pub fn cross_term_with(kernel: &Kernel, a: &FiniteSet, b: &FiniteSet) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let union = a.union(b)?;
    let e_union = equilibrium_measure_with(kernel, &union)?;
    let e_b = equilibrium_measure_with(kernel, b)?;

    let mut diffs = Vec::with_capacity(a.len() * b.len());
    for x in a.points() {
        for y in b.points() {
            diffs.push(y.sub(x)?);
        }
    }
    let g = kernel.eval_many(&diffs)?;

    let mut chi = 0.0;
    let mut idx = 0;
    for x in a.points() {
        let ex = e_union.measure().weights()[union.index_of(x).expect("x in union")];
        for (j, _y) in b.points().iter().enumerate() {
            chi += ex * g[idx] * e_b.measure().weights()[j];
            idx += 1;
        }
    }
    Ok(chi)
}

const IDENTITY_TOL: f64 = 1e-6;

/// Check the exact union identity for disjoint sets:
/// `Cap(A u B) = Cap(A) + Cap(B) - chi(A,B) - chi(B,A)`.
///
/// Returns `(lhs, rhs, residual)` where both sides are computed by
/// independent routes; a residual above `1e-6 * lhs` is reported as a
/// numerical failure.
pub fn union_capacity_identity_check(
    a: &FiniteSet,
    b: &FiniteSet,
    tol: f64,
) -> Result<(f64, f64, f64)> {
    if a.intersects(b) {
        return Err(Error::Config(
            "union identity check requires disjoint sets".into(),
        ));
    }
    let kernel = Kernel::srw_green(a.dim(), tol)?;
    let union = a.union(b)?;
    let lhs = equilibrium_measure_with(&kernel, &union)?.capacity;
    let cap_a = equilibrium_measure_with(&kernel, a)?.capacity;
    let cap_b = equilibrium_measure_with(&kernel, b)?.capacity;
    let chi_ab = cross_term_with(&kernel, a, b)?;
    let chi_ba = cross_term_with(&kernel, b, a)?;
    let rhs = cap_a + cap_b - chi_ab - chi_ba;
    let residual = (lhs - rhs).abs();
    if residual > IDENTITY_TOL * lhs {
        return Err(Error::Numerical(format!(
            "union identity residual {residual:.3e} exceeds {IDENTITY_TOL:.0e} * {lhs:.6e}"
        )));
    }
    Ok((lhs, rhs, residual))
}

/// Derivative-formula sweep: for each radius `r`, translate `B` by
/// `z = r * direction` and record
/// `ratio = [Cap(A) + Cap(B) - Cap(A u (z+B))] / g(z)` against the limit
/// target `2 Cap(A) Cap(B)`. Exact linear algebra, no Monte Carlo error.
pub fn derivative_sweep_newton(
    a: &FiniteSet,
    b: &FiniteSet,
    direction: &LatticePoint,
    radii: &[i64],
    tol: f64,
) -> Result<Vec<SweepRecord>> {
    if direction.is_zero() {
        return Err(Error::Config("sweep direction must be nonzero".into()));
    }
    if a.dim() != b.dim() || a.dim() != direction.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim().min(direction.dim())));
    }
    let kernel = Kernel::srw_green(a.dim(), tol)?;
    let cap_a = equilibrium_measure_with(&kernel, a)?.capacity;
    let cap_b = equilibrium_measure_with(&kernel, b)?.capacity;
    let target = 2.0 * cap_a * cap_b;

    let mut records = Vec::with_capacity(radii.len());
    for &r in radii {
        let z = direction.scale(r);
        let shifted = translate(b, &z)?;
        if a.intersects(&shifted) {
            records.push(SweepRecord::overlap(r, z.coords().to_vec()));
            continue;
        }
        let union = a.union(&shifted)?;
        let cap_union = equilibrium_measure_with(&kernel, &union)?.capacity;
        let g_z = kernel.eval(&z)?;
        records.push(SweepRecord {
            r,
            z: z.coords().to_vec(),
            cap_a,
            cap_a_err: 0.0,
            cap_b,
            cap_b_err: 0.0,
            cap_union,
            cap_union_err: 0.0,
            kernel_at_z: g_z,
            ratio: (cap_a + cap_b - cap_union) / g_z,
            ratio_err: 0.0,
            target,
            target_err: 0.0,
            n_samples: 0,
            flags: String::new(),
        });
    }
    Ok(records)
}

/// Monte Carlo estimate of an escape probability.
#[derive(Debug, Clone, Copy)]
pub struct EscapeEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Bound on the truncation bias from treating an exit of `B(0, R)` as
    /// escape, of order `(diam / R)^{d-2}`.
    pub bias_bound: f64,
}

/// Simulate the walk from `x in A` until it returns to `A` or exits
/// `B(0, radius)`; an exit counts as escape. Estimates `P_x(no return)`.
pub fn mc_escape_probability(
    x: &LatticePoint,
    a: &FiniteSet,
    radius: f64,
    n: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<EscapeEstimate> {
    if !a.contains(x) {
        return Err(Error::Config("escape start point must lie in the set".into()));
    }
    if radius <= a.max_norm() {
        return Err(Error::Config(
            "truncation radius must exceed the set's extent".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    let d = a.dim();
    let r2 = radius * radius;
    let points: Vec<&[i64]> = a.points().iter().map(|p| p.coords()).collect();
    let factory = StreamFactory::new(seed);
    let x0 = x.coords().to_vec();

    let escapes = exec::parallel_fold(
        n,
        exec::worker_count(workers),
        0u64,
        |i, acc| {
            let mut rng = factory.stream(0, i, 0);
            let mut pos = x0.clone();
            loop {
                let dir = rng.below(2 * d as u64) as usize;
                let axis = dir >> 1;
                pos[axis] += if dir & 1 == 0 { 1 } else { -1 };
                let n2: i64 = pos.iter().map(|&c| c * c).sum();
                if n2 as f64 > r2 {
                    *acc += 1;
                    break;
                }
                if points.binary_search_by(|p| p.cmp(&pos.as_slice())).is_ok() {
                    break;
                }
            }
        },
        |a, b| *a += *b,
    );

    let p = escapes as f64 / n as f64;
    let stderr = (p * (1.0 - p) / n as f64).sqrt();
    let bias_bound = (a.diameter().max(1.0) / radius).powi(d as i32 - 2);
    Ok(EscapeEstimate {
        estimate: p,
        stderr,
        bias_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_shape, Shape};
    use crate::reference::least_squares_line;

    const G3_0: f64 = 1.516386059151978018;
    const CAP3_SINGLETON: f64 = 0.659462670449000857;

    fn origin_set(d: usize) -> FiniteSet {
        FiniteSet::singleton(LatticePoint::origin(d))
    }

    #[test]
    fn singleton_capacity_is_reciprocal_green() {
        let e = equilibrium_measure(&origin_set(3), 1e-10).unwrap();
        assert!((e.capacity() - CAP3_SINGLETON).abs() < 1e-12);
        assert_eq!(e.measure().weights().len(), 1);
    }

    #[test]
    fn two_point_capacity_closed_form() {
        let z = LatticePoint::new(vec![4, 3, 0]).unwrap();
        let a = FiniteSet::new(vec![LatticePoint::origin(3), z.clone()]).unwrap();
        let kernel = Kernel::srw_green(3, 1e-10).unwrap();
        let gz = kernel.eval(&z).unwrap();
        let cap = equilibrium_measure_with(&kernel, &a).unwrap().capacity();
        assert!((cap - 2.0 / (G3_0 + gz)).abs() < 1e-12);
    }

    #[test]
    fn weights_are_escape_probabilities() {
        let a = make_shape(&Shape::Ball { radius: 1.5 }, 3, None).unwrap();
        let e = equilibrium_measure(&a, 1e-10).unwrap();
        for &w in e.measure().weights() {
            assert!((0.0..=1.0).contains(&w), "weight {w}");
        }
        let n = a.len() as f64;
        assert!(e.capacity() <= n);
        assert!(e.capacity() >= 1.0 / G3_0);
    }

    #[test]
    fn capacity_monotone_under_inclusion() {
        let single = origin_set(3);
        let ball = make_shape(&Shape::Ball { radius: 1.0 }, 3, None).unwrap();
        let ball2 = make_shape(&Shape::Ball { radius: 2.0 }, 3, None).unwrap();
        let c0 = capacity(&single, 1e-10).unwrap();
        let c1 = capacity(&ball, 1e-10).unwrap();
        let c2 = capacity(&ball2, 1e-10).unwrap();
        assert!(c0 < c1, "{c0} vs {c1}");
        assert!(c1 < c2, "{c1} vs {c2}");
    }

    #[test]
    fn capacity_translation_invariant() {
        let a = make_shape(&Shape::Ball { radius: 1.5 }, 3, None).unwrap();
        let shifted = translate(&a, &LatticePoint::new(vec![7, -3, 11]).unwrap()).unwrap();
        let c0 = capacity(&a, 1e-10).unwrap();
        let c1 = capacity(&shifted, 1e-10).unwrap();
        // same canonical difference vectors, so bit-identical results
        assert_eq!(c0, c1);
    }

    #[test]
    fn cross_term_singleton_closed_form() {
        let a = origin_set(3);
        let chi = cross_term(&a, &a, 1e-10).unwrap();
        assert!((chi - 1.0 / G3_0).abs() < 1e-12);
    }

    #[test]
    fn cross_term_nonnegative_and_far_limit() {
        let a = origin_set(3);
        let kernel = Kernel::srw_green(3, 1e-10).unwrap();
        for r in [6i64, 12, 24] {
            let z = LatticePoint::new(vec![r, 0, 0]).unwrap();
            let b = FiniteSet::singleton(z.clone());
            let chi = cross_term_with(&kernel, &a, &b).unwrap();
            assert!(chi >= 0.0);
            let gz = kernel.eval(&z).unwrap();
            // chi / g(z) approaches Cap(A) * Cap(B)
            let lim = CAP3_SINGLETON * CAP3_SINGLETON;
            assert!((chi / gz - lim).abs() < lim * 0.6 / r as f64 * 6.0);
        }
    }

    #[test]
    fn union_identity_exact_for_disjoint_sets() {
        let a = origin_set(3);
        let b = FiniteSet::singleton(LatticePoint::new(vec![10, 0, 0]).unwrap());
        let (lhs, rhs, residual) = union_capacity_identity_check(&a, &b, 1e-10).unwrap();
        assert!(residual <= 1e-6 * lhs, "residual {residual}");
        assert!((lhs - rhs).abs() < 1e-9);

        let ball = make_shape(&Shape::Ball { radius: 1.0 }, 3, None).unwrap();
        let far = translate(&ball, &LatticePoint::new(vec![9, 0, 0]).unwrap()).unwrap();
        let (lhs, _, residual) = union_capacity_identity_check(&ball, &far, 1e-10).unwrap();
        assert!(residual <= 1e-6 * lhs);
    }

    #[test]
    fn union_capacity_strictly_subadditive() {
        let a = make_shape(&Shape::Ball { radius: 1.0 }, 3, None).unwrap();
        let b = translate(&a, &LatticePoint::new(vec![14, 0, 0]).unwrap()).unwrap();
        let kernel = Kernel::srw_green(3, 1e-10).unwrap();
        let cap_a = equilibrium_measure_with(&kernel, &a).unwrap().capacity();
        let cap_b = equilibrium_measure_with(&kernel, &b).unwrap().capacity();
        let cap_u = equilibrium_measure_with(&kernel, &a.union(&b).unwrap())
            .unwrap()
            .capacity();
        assert!(cap_u < cap_a + cap_b);
    }

    #[test]
    fn union_identity_rejects_overlap() {
        let a = make_shape(&Shape::Ball { radius: 1.0 }, 3, None).unwrap();
        assert!(union_capacity_identity_check(&a, &a, 1e-10).is_err());
    }

    #[test]
    fn sweep_singleton_matches_closed_form() {
        let a = origin_set(3);
        let dir = LatticePoint::axis(3, 1);
        let radii = [4i64, 8, 16, 32];
        let recs = derivative_sweep_newton(&a, &a, &dir, &radii, 1e-10).unwrap();
        let kernel = Kernel::srw_green(3, 1e-10).unwrap();
        for rec in &recs {
            assert!(!rec.is_flagged());
            let gz = kernel
                .eval(&LatticePoint::new(rec.z.clone()).unwrap())
                .unwrap();
            let closed = 2.0 / (G3_0 * (G3_0 + gz));
            assert!(
                (rec.ratio - closed).abs() < 1e-10,
                "ratio {} vs closed form {closed}",
                rec.ratio
            );
            // finite-z ratio sits strictly below the limit for singletons
            assert!(rec.ratio < rec.target);
        }
        // |ratio/target - 1| strictly decreasing, log-log slope about -1
        let mut gaps = Vec::new();
        for rec in &recs {
            gaps.push((rec.ratio / rec.target - 1.0).abs());
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "gaps {gaps:?}");
        let xs: Vec<f64> = radii.iter().map(|&r| (r as f64).ln()).collect();
        let ys: Vec<f64> = recs
            .iter()
            .map(|rec| (rec.ratio - rec.target).abs().ln())
            .collect();
        let (slope, _, r2) = least_squares_line(&xs, &ys);
        assert!(slope <= -0.5, "slope {slope}");
        assert!(r2 > 0.99);
    }

    #[test]
    fn sweep_extended_sets_decay_invariant_d5() {
        // |ratio/target - 1| strictly decreasing over doubling radii, and
        // the log-log decay at least one half power beyond d - 3
        let a = make_shape(&Shape::Segment { n: 2 }, 5, None).unwrap();
        let b = make_shape(&Shape::Ball { radius: 1.0 }, 5, None).unwrap();
        let dir = LatticePoint::new(vec![0, 1, 0, 0, 0]).unwrap();
        let radii = [8i64, 16, 32, 64];
        let recs = derivative_sweep_newton(&a, &b, &dir, &radii, 1e-10).unwrap();
        let gaps: Vec<f64> = recs
            .iter()
            .map(|r| (r.ratio / r.target - 1.0).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        let xs: Vec<f64> = radii.iter().map(|&r| (r as f64).ln()).collect();
        let ys: Vec<f64> = recs
            .iter()
            .map(|r| (r.ratio - r.target).abs().ln())
            .collect();
        let (slope, _, _) = least_squares_line(&xs, &ys);
        assert!(slope <= -(5.0 - 3.0) + 0.5, "slope {slope}");
    }

    #[test]
    fn sweep_flags_overlapping_radii() {
        let a = make_shape(&Shape::Ball { radius: 2.0 }, 3, None).unwrap();
        let dir = LatticePoint::axis(3, 1);
        let recs = derivative_sweep_newton(&a, &a, &dir, &[1, 2, 16], 1e-10).unwrap();
        assert!(recs[0].is_flagged());
        assert!(recs[1].is_flagged());
        assert!(!recs[2].is_flagged());
        assert!(recs[2].ratio.is_finite());
    }

    #[test]
    fn mc_escape_matches_equilibrium_singleton() {
        let a = origin_set(3);
        let x = LatticePoint::origin(3);
        let est = mc_escape_probability(&x, &a, 60.0, 20_000, 918273, Some(2)).unwrap();
        let err = (est.estimate - CAP3_SINGLETON).abs();
        assert!(
            err <= 3.0 * est.stderr + est.bias_bound,
            "estimate {} vs {CAP3_SINGLETON} (3se {} + bias {})",
            est.estimate,
            3.0 * est.stderr,
            est.bias_bound
        );
    }

    #[test]
    fn mc_escape_two_far_points() {
        let p = LatticePoint::new(vec![12, 0, 0]).unwrap();
        let a = FiniteSet::new(vec![LatticePoint::origin(3), p.clone()]).unwrap();
        let e = equilibrium_measure(&a, 1e-10).unwrap();
        let want = e.measure().weights()[a.index_of(&p).unwrap()];
        let est = mc_escape_probability(&p, &a, 80.0, 20_000, 5, Some(2)).unwrap();
        assert!(
            (est.estimate - want).abs() <= 3.0 * est.stderr + est.bias_bound,
            "estimate {} vs solver {want}",
            est.estimate
        );
    }

    #[test]
    fn mc_escape_stderr_clt_scaling() {
        let a = origin_set(3);
        let x = LatticePoint::origin(3);
        let e1 = mc_escape_probability(&x, &a, 40.0, 4_000, 77, Some(2)).unwrap();
        let e2 = mc_escape_probability(&x, &a, 40.0, 8_000, 77, Some(2)).unwrap();
        let shrink = e2.stderr / e1.stderr;
        let want = 1.0 / 2f64.sqrt();
        assert!((shrink / want - 1.0).abs() < 0.2, "shrink {shrink}");
    }

    #[test]
    fn mc_escape_worker_count_invariance() {
        let a = origin_set(3);
        let x = LatticePoint::origin(3);
        let e1 = mc_escape_probability(&x, &a, 30.0, 6_000, 42, Some(1)).unwrap();
        let e2 = mc_escape_probability(&x, &a, 30.0, 6_000, 42, Some(4)).unwrap();
        assert_eq!(e1.estimate, e2.estimate);
        assert_eq!(e1.stderr, e2.stderr);
    }

    #[test]
    fn mc_escape_preconditions() {
        let a = origin_set(3);
        let outside = LatticePoint::new(vec![1, 0, 0]).unwrap();
        assert!(mc_escape_probability(&outside, &a, 30.0, 10, 1, Some(1)).is_err());
        assert!(mc_escape_probability(&LatticePoint::origin(3), &a, 0.0, 10, 1, Some(1)).is_err());
    }
}

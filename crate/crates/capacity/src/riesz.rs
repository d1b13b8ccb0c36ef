//! Bessel-Riesz capacities via certified energy minimization, the explicit
//! union bound constructions, and the Riesz derivative-formula sweep.
//!
//! The capacity is the reciprocal of the minimal kernel energy over
//! probability measures on the set. The simplex QP certificate brackets the
//! minimal energy in `[energy - gap, energy]`, hence the capacity in
//! `[1/energy, 1/(energy - gap)]`.

use crate::error::{Error, Result};
use crate::green::Kernel;
use crate::lattice::{translate, FiniteSet, LatticePoint};
use crate::numerics::{min_energy_simplex, QpCertificate, WeightVector};
use crate::sweep::SweepRecord;

/// Certified Riesz capacity of a finite set.
#[derive(Debug, Clone)]
pub struct RieszResult {
    alpha: f64,
    mu: WeightVector,
    certificate: QpCertificate,
    capacity_lower: f64,
    capacity_upper: f64,
}

impl RieszResult {
    pub fn base(&self) -> &FiniteSet {
        self.mu.base()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Optimal probability measure on the base set.
    pub fn mu(&self) -> &WeightVector {
        &self.mu
    }

    pub fn certificate(&self) -> &QpCertificate {
        &self.certificate
    }

    pub fn capacity_lower(&self) -> f64 {
        self.capacity_lower
    }

    pub fn capacity_upper(&self) -> f64 {
        self.capacity_upper
    }

    /// Bracket midpoint.
    pub fn capacity(&self) -> f64 {
        0.5 * (self.capacity_lower + self.capacity_upper)
    }

    /// Bracket half-width.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.capacity_upper - self.capacity_lower)
    }

    /// The equilibrium function `phi = Cap * mu` on the base set.
    pub fn equilibrium_function(&self) -> Vec<f64> {
        self.mu
            .weights()
            .iter()
            .map(|&w| self.capacity_lower * w)
            .collect()
    }
}

const MAX_QP_ITER: usize = 400_000;

/// Riesz capacity of `a` with relative bracket width at most `tol`.
pub fn capacity_alpha(a: &FiniteSet, alpha: f64, tol: f64) -> Result<RieszResult> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!(
            "relative tolerance must lie in (0, 1), got {tol}"
        )));
    }
    let kernel = Kernel::riesz(a.dim(), alpha)?;
    let m = kernel.matrix(a)?;
    // E* >= max(1/n, min entry), so a gap of tol * that bound certifies a
    // relative capacity bracket width of at most tol
    let mut min_entry = f64::INFINITY;
    for i in 0..m.size() {
        for j in 0..m.size() {
            min_entry = min_entry.min(m.get(i, j));
        }
    }
    let energy_floor = (1.0 / a.len() as f64).max(min_entry);
    let gap_tol = 0.9 * tol * energy_floor;
    let (mu, certificate) = min_energy_simplex(a, &m, gap_tol, MAX_QP_ITER)?;
    let capacity_lower = 1.0 / certificate.energy;
    let capacity_upper = 1.0 / (certificate.energy - certificate.duality_gap).max(f64::MIN_POSITIVE);
    Ok(RieszResult {
        alpha,
        mu,
        certificate,
        capacity_lower,
        capacity_upper,
    })
}

/// Maximum deviation of `g_alpha * phi` from one over the base set, where
/// `phi` is the equilibrium function of a [`capacity_alpha`] result. Small
/// deviation verifies the optimizer output against the variational
/// characterization of the capacity.
pub fn equilibrium_function_check(result: &RieszResult) -> Result<f64> {
    let a = result.base();
    let kernel = Kernel::riesz(a.dim(), result.alpha())?;
    let m = kernel.matrix(a)?;
    let phi = result.equilibrium_function();
    let conv = m.mul_vec(&phi);
    Ok(conv
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max))
}

/// The two §-style bounds on the capacity of `A u (z + B)`.
#[derive(Debug, Clone)]
pub struct UnionBounds {
    /// Certified lower bound from the combined probability measure.
    pub lower: f64,
    /// Upper bound from the slacked feasible function, when the pointwise
    /// feasibility check passes.
    pub upper: Option<f64>,
    /// Worst feasibility margin and the point attaining it (present when the
    /// check fails; feasibility failure at small separations is data, not an
    /// error).
    pub violated: Option<(LatticePoint, f64)>,
}

const FEASIBILITY_MARGIN: f64 = 1e-12;

/// Construct the explicit lower and upper bounds on `Cap_alpha(A u (z+B))`
/// from the individual equilibrium functions.
///
/// The lower bound evaluates the energy of the normalized combined measure
/// and is always valid. The upper bound scales the equilibrium functions by
/// `a = 1 - (1 - eps) g_alpha(z) Cap(B)` and `b` symmetrically, and is valid
/// whenever `g_alpha * psi >= 1` holds at every point of the union, which is
/// checked numerically point by point.
pub fn union_bounds(
    a: &FiniteSet,
    b: &FiniteSet,
    z: &LatticePoint,
    alpha: f64,
    eps_slack: f64,
    tol: f64,
) -> Result<UnionBounds> {
    if !(eps_slack > 0.0 && eps_slack < 1.0) {
        return Err(Error::Config("eps_slack must lie in (0, 1)".into()));
    }
    let shifted = translate(b, z)?;
    if a.intersects(&shifted) {
        return Err(Error::Config("union bounds require A and z+B disjoint".into()));
    }
    let res_a = capacity_alpha(a, alpha, tol)?;
    let res_b = capacity_alpha(b, alpha, tol)?;
    let cap_a = res_a.capacity_lower();
    let cap_b = res_b.capacity_lower();

    let union = a.union(&shifted)?;
    let kernel = Kernel::riesz(a.dim(), alpha)?;
    let m_union = kernel.matrix(&union)?;

    // phi_A + phi_B(. - z) laid out on the union's canonical ordering
    let mut phi = vec![0.0; union.len()];
    for (i, x) in a.points().iter().enumerate() {
        phi[union.index_of(x).expect("A in union")] += cap_a * res_a.mu().weights()[i];
    }
    let mut phi_b_shifted = vec![0.0; union.len()];
    for (i, y) in b.points().iter().enumerate() {
        let idx = union.index_of(&y.add(z)?).expect("z+B in union");
        phi_b_shifted[idx] += cap_b * res_b.mu().weights()[i];
    }

    // lower bound: energy of the combined measure, normalized exactly
    let mut combined: Vec<f64> = phi
        .iter()
        .zip(&phi_b_shifted)
        .map(|(u, v)| u + v)
        .collect();
    let total: f64 = combined.iter().sum();
    for v in combined.iter_mut() {
        *v /= total;
    }
    let lower = 1.0 / m_union.quad_form(&combined);

    // upper bound: psi = a phi_A + b phi_B(. - z)
    let g_z = kernel.eval(z)?;
    let coef_a = 1.0 - (1.0 - eps_slack) * g_z * cap_b;
    let coef_b = 1.0 - (1.0 - eps_slack) * g_z * cap_a;
    if coef_a < 0.0 || coef_b < 0.0 {
        // psi is not a nonnegative function: infeasible by construction
        return Ok(UnionBounds {
            lower,
            upper: None,
            violated: Some((z.clone(), coef_a.min(coef_b))),
        });
    }
    let psi: Vec<f64> = phi
        .iter()
        .zip(&phi_b_shifted)
        .map(|(u, v)| coef_a * u + coef_b * v)
        .collect();
    let conv = m_union.mul_vec(&psi);
    let mut worst = f64::INFINITY;
    let mut worst_point = 0usize;
    for (i, &v) in conv.iter().enumerate() {
        if v < worst {
            worst = v;
            worst_point = i;
        }
    }
    if worst >= 1.0 - FEASIBILITY_MARGIN {
        Ok(UnionBounds {
            lower,
            upper: Some(psi.iter().sum()),
            violated: None,
        })
    } else {
        Ok(UnionBounds {
            lower,
            upper: None,
            violated: Some((union.points()[worst_point].clone(), worst)),
        })
    }
}

/// Riesz derivative-formula sweep with certified error bars: for each radius,
/// `ratio = [Cap(A) + Cap(B) - Cap(A u (z+B))] / g_alpha(z)` with bracket
/// widths propagated, against the target `2 Cap(A) Cap(B)`.
pub fn derivative_sweep_riesz(
    a: &FiniteSet,
    b: &FiniteSet,
    direction: &LatticePoint,
    radii: &[i64],
    alpha: f64,
    tol: f64,
) -> Result<Vec<SweepRecord>> {
    if direction.is_zero() {
        return Err(Error::Config("sweep direction must be nonzero".into()));
    }
    let kernel = Kernel::riesz(a.dim(), alpha)?;
    let res_a = capacity_alpha(a, alpha, tol)?;
    let res_b = capacity_alpha(b, alpha, tol)?;
    let (cap_a, ha) = (res_a.capacity(), res_a.half_width());
    let (cap_b, hb) = (res_b.capacity(), res_b.half_width());
    let target = 2.0 * cap_a * cap_b;
    let target_err = 2.0 * (cap_a * hb + cap_b * ha);

    let mut records = Vec::with_capacity(radii.len());
    for &r in radii {
        let z = direction.scale(r);
        let shifted = translate(b, &z)?;
        if a.intersects(&shifted) {
            records.push(SweepRecord::overlap(r, z.coords().to_vec()));
            continue;
        }
        let union = a.union(&shifted)?;
        let res_u = capacity_alpha(&union, alpha, tol)?;
        let g_z = kernel.eval(&z)?;
        let ratio = (cap_a + cap_b - res_u.capacity()) / g_z;
        let ratio_err = (ha + hb + res_u.half_width()) / g_z;
        records.push(SweepRecord {
            r,
            z: z.coords().to_vec(),
            cap_a,
            cap_a_err: ha,
            cap_b,
            cap_b_err: hb,
            cap_union: res_u.capacity(),
            cap_union_err: res_u.half_width(),
            kernel_at_z: g_z,
            ratio,
            ratio_err,
            target,
            target_err,
            n_samples: 0,
            flags: String::new(),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_shape, Shape};
    use crate::numerics::Matrix;
    use crate::reference::simplex_grid_min_energy;

    fn origin_set(d: usize) -> FiniteSet {
        FiniteSet::singleton(LatticePoint::origin(d))
    }

    #[test]
    fn singleton_capacity_is_one() {
        let r = capacity_alpha(&origin_set(5), 2.0, 1e-8).unwrap();
        assert_eq!(r.capacity_lower(), 1.0);
        assert_eq!(r.capacity_upper(), 1.0);
        assert_eq!(r.mu().weights(), &[1.0]);
    }

    #[test]
    fn two_point_closed_form() {
        let p = LatticePoint::new(vec![5, 0, 0, 0, 0]).unwrap();
        let a = FiniteSet::new(vec![LatticePoint::origin(5), p]).unwrap();
        let r = capacity_alpha(&a, 2.0, 1e-10).unwrap();
        let want = 2.0 / (1.0 + 1.0 / 36.0);
        assert!(r.capacity_lower() <= want + 1e-12);
        assert!(r.capacity_upper() >= want - 1e-12);
        assert!(r.half_width() < 1e-9);
    }

    #[test]
    fn segment_matches_grid_oracle() {
        let a = make_shape(&Shape::Segment { n: 2 }, 5, None).unwrap();
        let r = capacity_alpha(&a, 2.0, 1e-8).unwrap();
        let kernel = Kernel::riesz(5, 2.0).unwrap();
        let m = kernel.matrix(&a).unwrap();
        let grid_energy = simplex_grid_min_energy(&m, 1000);
        assert!(
            (r.certificate().energy - grid_energy).abs() < 2e-3,
            "energy {} vs grid {grid_energy}",
            r.certificate().energy
        );
    }

    #[test]
    fn capacity_translation_and_reflection_invariance() {
        let a = FiniteSet::new(vec![
            LatticePoint::origin(5),
            LatticePoint::new(vec![2, 1, 0, 0, 0]).unwrap(),
            LatticePoint::new(vec![0, 0, 3, 0, 0]).unwrap(),
        ])
        .unwrap();
        let shifted = translate(&a, &LatticePoint::new(vec![4, -7, 1, 0, 2]).unwrap()).unwrap();
        let neg = FiniteSet::new(a.points().iter().map(|p| p.neg()).collect()).unwrap();
        let c0 = capacity_alpha(&a, 2.0, 1e-9).unwrap();
        let c1 = capacity_alpha(&shifted, 2.0, 1e-9).unwrap();
        let c2 = capacity_alpha(&neg, 2.0, 1e-9).unwrap();
        // translation preserves the canonical ordering: identical iteration
        assert!((c0.capacity() - c1.capacity()).abs() < 1e-12);
        // reflection reorders the points; equality holds within certificates
        assert!(
            (c0.capacity() - c2.capacity()).abs()
                <= c0.half_width() + c2.half_width() + 1e-12
        );
    }

    #[test]
    fn capacity_monotone_under_inclusion() {
        let small = make_shape(&Shape::Segment { n: 1 }, 5, None).unwrap();
        let big = make_shape(&Shape::Segment { n: 3 }, 5, None).unwrap();
        let cs = capacity_alpha(&small, 2.0, 1e-9).unwrap();
        let cb = capacity_alpha(&big, 2.0, 1e-9).unwrap();
        assert!(cs.capacity_upper() <= cb.capacity_upper() + 1e-12);
        assert!(cs.capacity() < cb.capacity());
    }

    #[test]
    fn equilibrium_check_singleton_and_pair() {
        let r = capacity_alpha(&origin_set(5), 2.0, 1e-9).unwrap();
        assert_eq!(equilibrium_function_check(&r).unwrap(), 0.0);

        let pair = FiniteSet::new(vec![
            LatticePoint::origin(5),
            LatticePoint::new(vec![3, 0, 0, 0, 0]).unwrap(),
        ])
        .unwrap();
        let r = capacity_alpha(&pair, 2.0, 1e-10).unwrap();
        assert!(equilibrium_function_check(&r).unwrap() < 1e-12);
    }

    #[test]
    fn equilibrium_check_segment_within_calibrated_bound() {
        let a = make_shape(&Shape::Segment { n: 4 }, 5, None).unwrap();
        let r = capacity_alpha(&a, 2.0, 1e-9).unwrap();
        let dev = equilibrium_function_check(&r).unwrap();
        assert!(dev <= 1e-3, "deviation {dev}");
    }

    #[test]
    fn union_bounds_sandwich_singletons() {
        let a = origin_set(5);
        let b = origin_set(5);
        for r in [6i64, 16, 32] {
            let z = LatticePoint::axis(5, r);
            let ub = union_bounds(&a, &b, &z, 2.0, 0.1, 1e-9).unwrap();
            let union = a.union(&translate(&b, &z).unwrap()).unwrap();
            let cert = capacity_alpha(&union, 2.0, 1e-9).unwrap();
            assert!(
                ub.lower <= cert.capacity_upper() + 1e-12,
                "lower {} vs cap upper {}",
                ub.lower,
                cert.capacity_upper()
            );
            if let Some(up) = ub.upper {
                assert!(
                    up >= cert.capacity_lower() - 1e-12,
                    "upper {up} vs cap lower {}",
                    cert.capacity_lower()
                );
            }
        }
        // far separation: the slacked function must be feasible
        let z = LatticePoint::axis(5, 32);
        let ub = union_bounds(&a, &b, &z, 2.0, 0.1, 1e-9).unwrap();
        assert!(ub.upper.is_some(), "violated: {:?}", ub.violated);
    }

    #[test]
    fn union_bounds_upper_two_evaluation_routes_agree() {
        let a = origin_set(5);
        let b = make_shape(&Shape::Ball { radius: 1.0 }, 5, None).unwrap();
        let z = LatticePoint::axis(5, 24);
        let res_a = capacity_alpha(&a, 2.0, 1e-9).unwrap();
        let res_b = capacity_alpha(&b, 2.0, 1e-9).unwrap();
        let g_z = Kernel::riesz(5, 2.0).unwrap().eval(&z).unwrap();
        let coef_a = 1.0 - 0.9 * g_z * res_b.capacity_lower();
        let coef_b = 1.0 - 0.9 * g_z * res_a.capacity_lower();
        let closed = coef_a * res_a.capacity_lower() + coef_b * res_b.capacity_lower();
        let ub = union_bounds(&a, &b, &z, 2.0, 0.1, 1e-9).unwrap();
        let upper = ub.upper.expect("feasible at this separation");
        assert!((upper - closed).abs() < 1e-10, "{upper} vs {closed}");
    }

    #[test]
    fn union_bounds_rejects_overlap() {
        let a = make_shape(&Shape::Ball { radius: 1.0 }, 5, None).unwrap();
        let z = LatticePoint::axis(5, 1);
        assert!(union_bounds(&a, &a, &z, 2.0, 0.1, 1e-9).is_err());
    }

    #[test]
    fn sweep_singleton_closed_form_ratio() {
        let a = origin_set(5);
        let dir = LatticePoint::axis(5, 1);
        let recs = derivative_sweep_riesz(&a, &a, &dir, &[4, 8, 16, 32], 2.0, 1e-10).unwrap();
        for rec in &recs {
            let g_z = rec.kernel_at_z;
            let closed = 2.0 / (1.0 + g_z);
            assert!(
                (rec.ratio - closed).abs() <= rec.ratio_err.max(1e-10),
                "ratio {} vs {closed}",
                rec.ratio
            );
            assert!((rec.target - 2.0).abs() < 1e-12);
        }
        // monotone approach to the limit from below
        let gaps: Vec<f64> = recs.iter().map(|r| (r.ratio / r.target - 1.0).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn sweep_ratio_bracketed_by_union_bounds() {
        let a = make_shape(&Shape::Ball { radius: 1.0 }, 5, None).unwrap();
        let dir = LatticePoint::axis(5, 1);
        let radii = [8i64, 16];
        let recs = derivative_sweep_riesz(&a, &a, &dir, &radii, 2.0, 1e-9).unwrap();
        for rec in &recs {
            let z = LatticePoint::new(rec.z.clone()).unwrap();
            let ub = union_bounds(&a, &a, &z, 2.0, 0.1, 1e-9).unwrap();
            // union capacity certified bracket lies inside the sandwich
            assert!(ub.lower <= rec.cap_union + rec.cap_union_err + 1e-12);
            if let Some(up) = ub.upper {
                assert!(up >= rec.cap_union - rec.cap_union_err - 1e-12);
            }
        }
    }

    #[test]
    fn grid_value_inside_certified_bracket_small_sets() {
        // four-point sets: the refined enumeration oracle value must fall in
        // the certified capacity bracket
        let sets = [
            vec![vec![0, 0, 0, 0, 0], vec![1, 0, 0, 0, 0], vec![0, 2, 0, 0, 0], vec![3, 3, 0, 0, 0]],
            vec![vec![0, 0, 0, 0, 0], vec![2, 2, 2, 0, 0], vec![4, 0, 0, 0, 0], vec![0, 0, 5, 0, 0]],
        ];
        for coords in sets {
            let a = FiniteSet::new(
                coords
                    .iter()
                    .map(|c| LatticePoint::new(c.clone()).unwrap())
                    .collect(),
            )
            .unwrap();
            let r = capacity_alpha(&a, 2.0, 1e-8).unwrap();
            let kernel = Kernel::riesz(5, 2.0).unwrap();
            let m: Matrix = kernel.matrix(&a).unwrap();
            let grid_energy = crate::reference::refined_grid_min_energy(&m, 60, 6);
            let cap_grid = 1.0 / grid_energy;
            let fuzz = 1e-9 * cap_grid;
            assert!(
                cap_grid >= r.capacity_lower() - fuzz && cap_grid <= r.capacity_upper() + fuzz,
                "grid {cap_grid} outside [{}, {}]",
                r.capacity_lower(),
                r.capacity_upper()
            );
        }
    }
}

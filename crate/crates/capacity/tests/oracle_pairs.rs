//! Cross-validation of independent computation routes: semi-analytic kernels
//! against direct Monte Carlo, and the two branching-capacity estimators
//! against each other.

use capacity::branching::{
    builtin_offspring, estimate_bcap, estimate_hitting_ratio, mc_occupation, mc_past_green,
    sample_past_range, RadiiParams,
};
use capacity::green::{brw_past_green, srw_green};
use capacity::lattice::{FiniteSet, LatticePoint};

fn origin_set() -> FiniteSet {
    FiniteSet::singleton(LatticePoint::origin(5))
}

#[test]
fn past_green_kernel_matches_direct_monte_carlo() {
    let mu = builtin_offspring("binary").unwrap();
    let z = LatticePoint::new(vec![5, 0, 0, 0, 0]).unwrap();
    let exact = brw_past_green(&z, &mu, 1e-10).unwrap();
    let mc = mc_past_green(&z, &mu, 40_000, 16.0, 901, Some(2)).unwrap();
    let err = (mc.estimate - exact).abs();
    assert!(
        err <= 3.0 * mc.stderr + mc.bias_bound,
        "kernel {exact} vs mc {} +- {}",
        mc.estimate,
        mc.stderr
    );
}

#[test]
fn past_green_symmetric_probes_agree() {
    let mu = builtin_offspring("geometric_half").unwrap();
    let z = LatticePoint::new(vec![3, 1, 0, 0, 0]).unwrap();
    let a = mc_past_green(&z, &mu, 20_000, 12.0, 77, Some(2)).unwrap();
    let b = mc_past_green(&z.neg(), &mu, 20_000, 12.0, 78, Some(2)).unwrap();
    let joint = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!(
        (a.estimate - b.estimate).abs() <= 3.0 * joint,
        "{} vs {}",
        a.estimate,
        b.estimate
    );
}

#[test]
fn mc_past_green_stderr_scales_like_clt() {
    let mu = builtin_offspring("binary").unwrap();
    let z = LatticePoint::new(vec![2, 1, 0, 0, 0]).unwrap();
    let e1 = mc_past_green(&z, &mu, 10_000, 12.0, 5, Some(2)).unwrap();
    let e2 = mc_past_green(&z, &mu, 20_000, 12.0, 5, Some(2)).unwrap();
    let shrink = e2.stderr / e1.stderr;
    let want = 1.0 / 2f64.sqrt();
    assert!((shrink / want - 1.0).abs() < 0.2, "shrink {shrink}");
}

#[test]
fn critical_tree_occupation_equals_walk_green() {
    let mu = builtin_offspring("binary").unwrap();
    let probes: Vec<LatticePoint> = [[1i64, 0, 0, 0, 0], [2, 1, 0, 0, 0]]
        .iter()
        .map(|c| LatticePoint::new(c.to_vec()).unwrap())
        .collect();
    let radii = RadiiParams {
        prune_radius: 16.0,
        spine_exit_radius: 16.0,
        node_budget: 10_000_000,
    };
    let ests = mc_occupation(
        &LatticePoint::origin(5),
        &mu,
        &probes,
        60_000,
        &radii,
        314,
        Some(2),
        false,
    )
    .unwrap();
    for (p, e) in probes.iter().zip(&ests) {
        let g = srw_green(p, 1e-10).unwrap();
        assert!(
            (e.estimate - g).abs() <= 3.0 * e.stderr + e.bias_bound,
            "probe {:?}: mc {} vs g {g}",
            p.coords(),
            e.estimate
        );
    }
}

#[test]
fn escape_and_hitting_estimators_are_consistent() {
    // the two defining characterizations of the branching capacity, compared
    // at desk scale with combined uncertainties
    let mu = builtin_offspring("binary").unwrap();
    let a = origin_set();
    let radii = RadiiParams {
        prune_radius: 14.0,
        spine_exit_radius: 28.0,
        node_budget: 10_000_000,
    };
    let bcap = estimate_bcap(&a, &mu, 100_000, &radii, 2001, Some(2)).unwrap();
    let w = LatticePoint::axis(5, 16);
    let hit = estimate_hitting_ratio(&a, &w, &mu, 200_000, 2002, Some(2), None).unwrap();
    let joint = (bcap.stderr.powi(2) + hit.stderr.powi(2)).sqrt();
    let err = (bcap.estimate - hit.estimate).abs();
    assert!(
        err <= 3.0 * joint + bcap.bias_bound + hit.bias_bound,
        "bcap {} +- {} vs hitting {} +- {}",
        bcap.estimate,
        bcap.stderr,
        hit.estimate,
        hit.stderr
    );
}

#[test]
fn singleton_escape_probability_reproducible_across_seeds() {
    let mu = builtin_offspring("binary").unwrap();
    let x = LatticePoint::origin(5);
    let own = FiniteSet::singleton(x.clone());
    let estimate = |seed: u64| {
        let n = 20_000u64;
        let mut esc = 0u64;
        for i in 0..n {
            let s = sample_past_range(
                &x,
                &mu,
                24.0,
                12.0,
                10_000_000,
                seed ^ (i * 2 + 1),
                std::slice::from_ref(&own),
            )
            .unwrap();
            if !s.hit_flags[0] {
                esc += 1;
            }
        }
        let p = esc as f64 / n as f64;
        (p, (p * (1.0 - p) / n as f64).sqrt())
    };
    let (p1, s1) = estimate(0x1111);
    let (p2, s2) = estimate(0x2222);
    let joint = (s1 * s1 + s2 * s2).sqrt();
    assert!((p1 - p2).abs() <= 3.0 * joint, "{p1} vs {p2}");
}

#[test]
fn hitting_ratio_stderr_scales_like_clt() {
    let mu = builtin_offspring("binary").unwrap();
    let a = origin_set();
    let w = LatticePoint::axis(5, 8);
    let e1 = estimate_hitting_ratio(&a, &w, &mu, 40_000, 9, Some(2), None).unwrap();
    let e2 = estimate_hitting_ratio(&a, &w, &mu, 80_000, 9, Some(2), None).unwrap();
    let shrink = e2.stderr / e1.stderr;
    let want = 1.0 / 2f64.sqrt();
    assert!((shrink / want - 1.0).abs() < 0.25, "shrink {shrink}");
}

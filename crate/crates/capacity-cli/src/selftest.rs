//! Built-in invariant suites, runnable without any configuration.

use capacity::branching::{
    builtin_offspring, estimate_bcap, law_histogram, sample_tree_range, LawKind, RadiiParams,
    TreeKind,
};
use capacity::green::{srw_green, Kernel};
use capacity::lattice::{make_shape, FiniteSet, LatticePoint, Shape};
use capacity::newtonian;
use capacity::numerics::{min_energy_simplex, solve_spd, Matrix};
use capacity::reference::{chi_square_test, simplex_grid_min_energy};
use capacity::riesz;
use capacity::rng::SplitMix;

pub struct SuiteReport {
    pub lines: Vec<String>,
    pub all_passed: bool,
}

struct Runner {
    lines: Vec<String>,
    all_passed: bool,
}

impl Runner {
    fn check(&mut self, name: &str, outcome: std::result::Result<(), String>) {
        match outcome {
            Ok(()) => self.lines.push(format!("PASS {name}")),
            Err(detail) => {
                self.all_passed = false;
                self.lines.push(format!("FAIL {name}: {detail}"));
            }
        }
    }
}

fn ensure(cond: bool, detail: String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(detail)
    }
}

/// Run the invariant suites. `quick` shrinks the Monte Carlo sample counts.
pub fn run(quick: bool) -> SuiteReport {
    let mut r = Runner {
        lines: Vec::new(),
        all_passed: true,
    };
    let n_mc: u64 = if quick { 20_000 } else { 100_000 };

    // kernel identities
    r.check("green.watson_value", {
        let g0 = srw_green(&LatticePoint::origin(3), 1e-10).unwrap_or(f64::NAN);
        ensure(
            (g0 - 1.516386059151978).abs() < 1e-11,
            format!("g(0) = {g0}"),
        )
    });
    r.check("green.harmonicity", {
        let k = Kernel::srw_green(3, 1e-10).unwrap();
        let x = LatticePoint::new(vec![2, 1, 0]).unwrap();
        let gx = k.eval(&x).unwrap_or(f64::NAN);
        let mut avg = 0.0;
        for axis in 0..3 {
            for sign in [-1i64, 1] {
                let mut c = x.coords().to_vec();
                c[axis] += sign;
                avg += k.eval(&LatticePoint::new(c).unwrap()).unwrap_or(f64::NAN);
            }
        }
        avg /= 6.0;
        ensure((avg - gx).abs() < 5e-11, format!("{avg} vs {gx}"))
    });

    // linear solver postcondition
    r.check("numerics.solver_residual", {
        let mut rng = SplitMix::new(17);
        let n = 24;
        let seed_mat = Matrix::from_fn(n, |_, _| rng.uniform() - 0.5);
        let m = Matrix::from_fn(n, |i, j| {
            (0..n).map(|k| seed_mat.get(i, k) * seed_mat.get(j, k)).sum::<f64>()
                + if i == j { 1.0 } else { 0.0 }
        });
        let rhs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        match solve_spd(&m, &rhs) {
            Ok(x) => {
                let mv = m.mul_vec(&x);
                let res = rhs
                    .iter()
                    .zip(&mv)
                    .map(|(b, a)| (b - a).abs())
                    .fold(0.0, f64::max);
                ensure(res <= 1e-10, format!("residual {res}"))
            }
            Err(e) => Err(e.to_string()),
        }
    });

    // simplex QP vs enumeration
    r.check("numerics.qp_vs_grid", {
        let base = make_shape(&Shape::Segment { n: 2 }, 5, None).unwrap();
        let kernel = Kernel::riesz(5, 2.0).unwrap();
        let m = kernel.matrix(&base).unwrap();
        match min_energy_simplex(&base, &m, 1e-9, 100_000) {
            Ok((_, cert)) => {
                let grid = simplex_grid_min_energy(&m, 400);
                ensure(
                    (cert.energy - grid).abs() < 1e-4,
                    format!("{} vs {grid}", cert.energy),
                )
            }
            Err(e) => Err(e.to_string()),
        }
    });

    // newtonian union identity
    r.check("newtonian.union_identity", {
        let a = make_shape(&Shape::Random { side: 4, count: 8 }, 3, Some(5)).unwrap();
        let b = capacity::lattice::translate(
            &make_shape(&Shape::Random { side: 4, count: 6 }, 3, Some(6)).unwrap(),
            &LatticePoint::new(vec![13, 0, 0]).unwrap(),
        )
        .unwrap();
        match newtonian::union_capacity_identity_check(&a, &b, 1e-10) {
            Ok((lhs, _, residual)) => {
                ensure(residual <= 1e-6 * lhs, format!("residual {residual}"))
            }
            Err(e) => Err(e.to_string()),
        }
    });

    // riesz closed forms and sandwich
    r.check("riesz.singleton_and_sandwich", {
        let a = FiniteSet::singleton(LatticePoint::origin(5));
        match riesz::capacity_alpha(&a, 2.0, 1e-9) {
            Ok(res) if res.capacity_lower() == 1.0 && res.capacity_upper() == 1.0 => {
                let z = LatticePoint::axis(5, 16);
                match riesz::union_bounds(&a, &a, &z, 2.0, 0.1, 1e-9) {
                    Ok(ub) => {
                        let union = a
                            .union(&capacity::lattice::translate(&a, &z).unwrap())
                            .unwrap();
                        let cert = riesz::capacity_alpha(&union, 2.0, 1e-9).unwrap();
                        ensure(
                            ub.lower <= cert.capacity_upper() + 1e-12
                                && ub
                                    .upper
                                    .is_some_and(|u| u >= cert.capacity_lower() - 1e-12),
                            format!("lower {} upper {:?}", ub.lower, ub.upper),
                        )
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            Ok(res) => Err(format!(
                "singleton bracket [{}, {}]",
                res.capacity_lower(),
                res.capacity_upper()
            )),
            Err(e) => Err(e.to_string()),
        }
    });

    // offspring law histograms
    for name in ["binary", "geometric_half"] {
        r.check(&format!("branching.laws_{name}"), {
            let mu = builtin_offspring(name).unwrap();
            let mut worst = 1.0f64;
            for (law, probs) in [
                (LawKind::Base, mu.pmf().to_vec()),
                (LawKind::Tail, mu.tail_pmf().to_vec()),
                (LawKind::SizeBiased, mu.size_biased_pmf().to_vec()),
            ] {
                let hist = law_histogram(&mu, law, n_mc, 31);
                worst = worst.min(chi_square_test(&hist, &probs));
            }
            ensure(worst > 0.01, format!("worst p-value {worst}"))
        });
    }

    // occupation identity: critical-tree visits at a neighbor site equal g
    r.check("branching.occupation_vs_green", {
        let mu = builtin_offspring("binary").unwrap();
        let probe = LatticePoint::new(vec![1, 0, 0, 0, 0]).unwrap();
        let g = srw_green(&probe, 1e-10).unwrap();
        let n = n_mc;
        let mut sum = 0u64;
        let mut sq = 0u128;
        for i in 0..n {
            let s = sample_tree_range(
                TreeKind::Critical,
                &LatticePoint::origin(5),
                &mu,
                24.0,
                1_000_000,
                1_000_000 + i,
                std::slice::from_ref(&FiniteSet::singleton(probe.clone())),
            )
            .unwrap();
            // multiplicity not tracked by the public range; use hits of the
            // singleton as a lower-variance Bernoulli comparison instead
            let v = u64::from(s.hit_flags[0]);
            sum += v;
            sq += (v as u128) * (v as u128);
        }
        let mean = sum as f64 / n as f64;
        let var = (sq as f64 - n as f64 * mean * mean) / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        // P(visit) <= E[visits] = g, with equality gap below 25% at distance 1
        ensure(
            mean < g + 3.0 * se && mean > 0.5 * g,
            format!("hit rate {mean} vs g {g}"),
        )
    });

    // estimator determinism across worker counts
    r.check("branching.worker_determinism", {
        let mu = builtin_offspring("binary").unwrap();
        let a = FiniteSet::singleton(LatticePoint::origin(5));
        let radii = RadiiParams {
            prune_radius: 10.0,
            spine_exit_radius: 20.0,
            node_budget: 10_000_000,
        };
        let n = if quick { 2_000 } else { 10_000 };
        let e1 = estimate_bcap(&a, &mu, n, &radii, 4242, Some(1)).unwrap();
        let e2 = estimate_bcap(&a, &mu, n, &radii, 4242, Some(3)).unwrap();
        ensure(
            e1.estimate == e2.estimate && e1.stderr == e2.stderr,
            format!("{} vs {}", e1.estimate, e2.estimate),
        )
    });

    // csv round trip
    r.check("cli.csv_round_trip", {
        let a = FiniteSet::singleton(LatticePoint::origin(3));
        let recs =
            newtonian::derivative_sweep_newton(&a, &a, &LatticePoint::axis(3, 1), &[4, 8], 1e-9)
                .unwrap();
        let doc = crate::csv::write_csv(&["selftest".into()], 3, &recs);
        match crate::csv::parse_csv(&doc) {
            Ok(back) => ensure(back == recs, "records changed across round trip".into()),
            Err(e) => Err(e.to_string()),
        }
    });

    SuiteReport {
        all_passed: r.all_passed,
        lines: r.lines,
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn quick_selftest_passes() {
        let report = super::run(true);
        for line in &report.lines {
            eprintln!("{line}");
        }
        assert!(report.all_passed);
    }
}

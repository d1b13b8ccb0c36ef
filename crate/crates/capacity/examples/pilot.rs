//! Calibration pilot: truncation-bias knees and rough capacity values used
//! to size the verification experiments.

use capacity::branching::{
    builtin_offspring, coupled_union_deficit, estimate_bcap, estimate_hitting_ratio,
    estimate_two_sided_hit, mc_past_green, RadiiParams,
};
use capacity::green::{brw_past_green, Kernel};
use capacity::lattice::{FiniteSet, LatticePoint};
use std::io::Write;
use std::time::Instant;

fn flush() {
    std::io::stdout().flush().unwrap();
}

fn main() {
    let mu = builtin_offspring("binary").unwrap();
    let a = FiniteSet::singleton(LatticePoint::origin(5));

    println!("== bcap refinement (n = 200k) ==");
    flush();
    for (prune, spine) in [(16.0, 32.0), (20.0, 40.0)] {
        let radii = RadiiParams {
            prune_radius: prune,
            spine_exit_radius: spine,
            node_budget: 10_000_000,
        };
        let t0 = Instant::now();
        let e = estimate_bcap(&a, &mu, 200_000, &radii, 424242, Some(2)).unwrap();
        println!(
            "prune {prune:5.1}: bcap {:.5}+-{:.5} bias {:.2e} nodes {:9.1} [{:6.2}s]",
            e.estimate,
            e.stderr,
            e.bias_bound,
            e.mean_nodes,
            t0.elapsed().as_secs_f64()
        );
        flush();
    }

    println!("== hitting ratio default radii (n = 100k) ==");
    flush();
    for w in [16i64, 32] {
        let t0 = Instant::now();
        let e = estimate_hitting_ratio(&a, &LatticePoint::axis(5, w), &mu, 100_000, 7, Some(2), None)
            .unwrap();
        println!(
            "w {w}: ratio {:.4}+-{:.4} bias {:.2e} nodes {:9.1} [{:6.2}s]",
            e.estimate,
            e.stderr,
            e.bias_bound,
            e.mean_nodes,
            t0.elapsed().as_secs_f64()
        );
        flush();
    }

    println!("== mc_past_green vs kernel, z = (5,0,0,0,0) (n = 150k) ==");
    flush();
    let z = LatticePoint::new(vec![5, 0, 0, 0, 0]).unwrap();
    let g_exact = brw_past_green(&z, &mu, 1e-10).unwrap();
    let t0 = Instant::now();
    let e = mc_past_green(&z, &mu, 150_000, 16.0, 99, Some(2)).unwrap();
    println!(
        "kernel {g_exact:.6} vs mc {:.6}+-{:.6} bias {:.2e} nodes {:8.1} [{:6.2}s]",
        e.estimate,
        e.stderr,
        e.bias_bound,
        e.mean_nodes,
        t0.elapsed().as_secs_f64()
    );
    flush();

    println!("== coupled deficit (n = 60k) ==");
    flush();
    let kernel = Kernel::brw_past_green(5, &mu, 1e-10).unwrap();
    for r in [8i64, 16, 24] {
        for prune in [10.0, 14.0, 18.0] {
            let zp = LatticePoint::axis(5, r);
            let radii = RadiiParams {
                prune_radius: prune,
                spine_exit_radius: r as f64 + 2.0 * prune,
                node_budget: 10_000_000,
            };
            let t0 = Instant::now();
            let e = coupled_union_deficit(&a, &a, &zp, &mu, 60_000, &radii, 5150, Some(2)).unwrap();
            let g = kernel.eval(&zp).unwrap();
            println!(
                "r {r:3} prune {prune:5.1}: ratio {:.4}+-{:.4} bias/G {:.2e} nodes {:9.1} [{:6.2}s]",
                e.estimate / g,
                e.stderr / g,
                e.bias_bound / g,
                e.mean_nodes,
                t0.elapsed().as_secs_f64()
            );
            flush();
        }
    }

    println!("== two-sided hit z = 16 (n = 60k) ==");
    flush();
    for prune in [12.0, 16.0] {
        let zp = LatticePoint::axis(5, 16);
        let radii = RadiiParams {
            prune_radius: prune,
            spine_exit_radius: 16.0 + 2.0 * prune,
            node_budget: 10_000_000,
        };
        let t0 = Instant::now();
        let full = estimate_two_sided_hit(&a, &zp, &mu, 60_000, &radii, 8, Some(2), false).unwrap();
        let past = estimate_two_sided_hit(&a, &zp, &mu, 60_000, &radii, 9, Some(2), true).unwrap();
        println!(
            "prune {prune:5.1}: full {:.4}+-{:.4} past {:.4}+-{:.4} nodes {:8.1}/{:8.1} [{:6.2}s]",
            full.estimate,
            full.stderr,
            past.estimate,
            past.stderr,
            full.mean_nodes,
            past.mean_nodes,
            t0.elapsed().as_secs_f64()
        );
        flush();
    }
}

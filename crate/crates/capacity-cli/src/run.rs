//! Experiment dispatch: single capacities and derivative sweeps.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::csv;
use crate::error::{CliError, Result};
use capacity::branching::{
    builtin_offspring, derivative_sweep_branching, estimate_bcap, RadiiParams,
};
use capacity::newtonian;
use capacity::riesz;
use capacity::sweep::SweepRecord;

fn radii_params(cfg: &ExperimentConfig, diam: f64) -> RadiiParams {
    match &cfg.budgets {
        Some(b) => RadiiParams {
            prune_radius: b.prune_radius,
            spine_exit_radius: b.spine_exit_radius,
            node_budget: b.node_budget,
        },
        None => RadiiParams::for_past(diam),
    }
}

/// Compute the capacity of `set_a` under the configured notion. Returns a
/// small CSV document (`capacity,err` plus kind-specific comments).
pub fn run_cap(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let a = cfg.set_a.build(cfg.dimension)?;
    let mut comments = vec![format!("config: {}", cfg.echo())];
    let (value, err) = match cfg.kind {
        ExperimentKind::Newton => {
            let e = newtonian::equilibrium_measure(&a, cfg.tol)?;
            (e.capacity(), 0.0)
        }
        ExperimentKind::Riesz => {
            let r = riesz::capacity_alpha(&a, cfg.alpha.expect("validated"), cfg.tol)?;
            comments.push(format!(
                "bracket: [{:.16e}, {:.16e}]",
                r.capacity_lower(),
                r.capacity_upper()
            ));
            (r.capacity(), r.half_width())
        }
        ExperimentKind::Branch => {
            let mu = builtin_offspring(cfg.offspring.as_deref().expect("validated"))?;
            let params = radii_params(cfg, a.diameter());
            let e = estimate_bcap(
                &a,
                &mu,
                cfg.n_samples.expect("validated"),
                &params,
                cfg.seed,
                cfg.workers,
            )?;
            comments.push(format!(
                "bias_bound: {:.3e} exhausted_fraction: {:.3e}",
                e.bias_bound, e.exhausted_fraction
            ));
            (e.estimate, e.stderr)
        }
    };
    let mut out = String::new();
    for line in &comments {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("capacity,err\n");
    out.push_str(&format!("{value:.16e},{err:.16e}\n"));
    Ok(out)
}

/// Run the configured derivative sweep and return the CSV document.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let a = cfg.set_a.build(cfg.dimension)?;
    let b = cfg.set_b.build(cfg.dimension)?;
    let direction = cfg.direction_point()?;
    let mut comments = vec![format!("config: {}", cfg.echo())];

    let records: Vec<SweepRecord> = match cfg.kind {
        ExperimentKind::Newton => {
            newtonian::derivative_sweep_newton(&a, &b, &direction, &cfg.radii, cfg.tol)?
        }
        ExperimentKind::Riesz => riesz::derivative_sweep_riesz(
            &a,
            &b,
            &direction,
            &cfg.radii,
            cfg.alpha.expect("validated"),
            cfg.tol,
        )?,
        ExperimentKind::Branch => {
            let mu = builtin_offspring(cfg.offspring.as_deref().expect("validated"))?;
            let diam = a.diameter().max(b.diameter());
            let params = radii_params(cfg, diam);
            let n = cfg.n_samples.expect("validated");
            let sweep = derivative_sweep_branching(
                &a,
                &b,
                &direction,
                &cfg.radii,
                &mu,
                n,
                &params,
                cfg.seed,
                cfg.workers,
            )?;
            comments.push(format!(
                "budgets: prune_radius={} spine_exit_radius={} node_budget={}",
                params.prune_radius, params.spine_exit_radius, params.node_budget
            ));
            comments.push(format!(
                "exhausted_fraction: {:.3e} mean_nodes_per_sample: {:.1}",
                sweep.exhausted_fraction, sweep.mean_nodes
            ));
            sweep.records
        }
    };
    comments.push(format!("seed: {}", cfg.seed));
    Ok(csv::write_csv(&comments, cfg.dimension, &records))
}

/// Entry point used by the binary: dispatch a subcommand, returning the text
/// to print on stdout.
pub fn dispatch(sub: &str, cfg: &ExperimentConfig) -> Result<String> {
    match sub {
        "cap" => run_cap(cfg),
        "sweep" => run_sweep(cfg),
        other => Err(CliError::Config(format!("unknown subcommand '{other}'"))),
    }
}

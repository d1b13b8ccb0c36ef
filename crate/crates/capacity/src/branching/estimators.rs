//! Monte Carlo estimators for branching capacity and its derivative formula.
//!
//! Every estimator aggregates integer event counts through
//! [`crate::exec::parallel_fold`], so results are bit-identical for any
//! worker count. Randomness comes from per-(site, sample, retry) streams.

use super::offspring::OffspringDistribution;
use super::sampler::{pos_from_point, Engine, HitVisitor, Pos, TargetSet, TreeKind};
use crate::error::{Error, Result};
use crate::exec;
use crate::green::Kernel;
use crate::lattice::{translate, FiniteSet, LatticePoint};
use crate::reference::ln_gamma;
use crate::rng::StreamFactory;
use crate::sweep::SweepRecord;

/// Spatial truncation parameters of the tree samplers.
#[derive(Debug, Clone, Copy)]
pub struct RadiiParams {
    /// Subtrees rooted farther than this from every prune center are
    /// recorded but not expanded.
    pub prune_radius: f64,
    /// The spine stops on leaving `B(0, spine_exit_radius)`.
    pub spine_exit_radius: f64,
    /// Node budget per sample; exhausted samples are redrawn (up to three
    /// retries) and the exhaustion frequency is reported.
    pub node_budget: u64,
}

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Exhaustion frequency above which a run is flagged as biased.
pub const EXHAUSTION_FLAG_THRESHOLD: f64 = 1e-4;

impl RadiiParams {
    /// Default for hitting estimators: prune at four times the separation
    /// plus set extent.
    pub fn for_hitting(separation: f64, diam: f64) -> Self {
        let prune = (4.0 * (separation + diam)).max(16.0);
        Self {
            prune_radius: prune,
            spine_exit_radius: 2.0 * prune,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    /// Default for past/escape estimators. The past occupies volume like the
    /// fourth power of the prune radius, so the radius stays moderate and the
    /// residual truncation bias is reported instead.
    pub fn for_past(diam: f64) -> Self {
        let prune = (4.0 * diam).max(24.0);
        Self {
            prune_radius: prune,
            spine_exit_radius: 2.0 * prune,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    pub fn with_budget(mut self, node_budget: u64) -> Self {
        self.node_budget = node_budget;
        self
    }
}

/// A Monte Carlo estimate with its standard error, the reported truncation
/// bias bound, and budget bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Engineering bound on the spatial truncation bias (far-field constants
    /// times observed pruning flux); reported, never folded into `stderr`.
    pub bias_bound: f64,
    /// Samples per site.
    pub n: u64,
    /// Fraction of samples that exhausted the node budget at least once.
    pub exhausted_fraction: f64,
    /// True when the exhaustion frequency exceeds the reporting threshold.
    pub flagged_biased: bool,
    pub mean_nodes: f64,
}

#[derive(Clone)]
struct Counts {
    events: Vec<u64>,
    nodes: u64,
    pruned: u64,
    exhausted: u64,
    persistent: u64,
}

impl Counts {
    fn new(sites: usize) -> Self {
        Self {
            events: vec![0; sites],
            nodes: 0,
            pruned: 0,
            exhausted: 0,
            persistent: 0,
        }
    }

    fn merge(a: &mut Self, b: &Self) {
        for (x, y) in a.events.iter_mut().zip(&b.events) {
            *x += y;
        }
        a.nodes += b.nodes;
        a.pruned += b.pruned;
        a.exhausted += b.exhausted;
        a.persistent += b.persistent;
    }
}

const RETRY_CAP: u64 = 3;

/// Far-field constant of `g`: `g(x) ~ C_d ||x||^{2-d}`.
fn walk_green_constant(d: usize) -> f64 {
    let df = d as f64;
    df * (ln_gamma(df / 2.0 - 1.0)).exp() / (2.0 * std::f64::consts::PI.powf(df / 2.0))
}

/// Surface constant of the unit sphere in `R^d`.
fn sphere_surface(d: usize) -> f64 {
    let df = d as f64;
    2.0 * std::f64::consts::PI.powf(df / 2.0) / (ln_gamma(df / 2.0)).exp()
}

/// Reported truncation bias bound for past-based estimators: trees launched
/// from the spine beyond the exit radius, the truncated spine itself, and the
/// observed pruning flux, all priced at far-field hitting rates.
fn past_bias_bound(
    d: usize,
    offspring: &OffspringDistribution,
    target_points: f64,
    target_extent: f64,
    radii: &RadiiParams,
    pruned_mean: f64,
) -> f64 {
    let c_d = walk_green_constant(d);
    let s_d = sphere_surface(d);
    let l_spine = (radii.spine_exit_radius - target_extent).max(2.0);
    let l_prune = (radii.prune_radius - target_extent).max(2.0);
    let df = d as f64;
    // trees hanging past the spine exit: sum_{|y|>L} g(y) * m * g(y) * |A|
    let spine_trees =
        target_points * offspring.tail_mean() * s_d * c_d * c_d * l_spine.powf(4.0 - df)
            / (df - 4.0);
    // the truncated spine returning
    let spine_walk = target_points * c_d * l_spine.powf(2.0 - df);
    // pruned subtrees returning
    let pruned = pruned_mean * target_points * c_d * l_prune.powf(2.0 - df);
    spine_trees + spine_walk + pruned
}

fn require_d5(d: usize) -> Result<()> {
    if d < 5 {
        return Err(Error::Domain(format!(
            "branching capacity estimators require d >= 5, got {d}"
        )));
    }
    Ok(())
}

fn centers_of(sets: &[&FiniteSet]) -> Result<Vec<Pos>> {
    sets.iter()
        .map(|s| {
            let d = s.dim();
            let mut mid = [0i32; super::sampler::MAX_DIM];
            for (i, m) in mid.iter_mut().enumerate().take(d) {
                let lo = s.points().iter().map(|p| p.coords()[i]).min().unwrap();
                let hi = s.points().iter().map(|p| p.coords()[i]).max().unwrap();
                *m = i32::try_from((lo + hi) / 2)
                    .map_err(|_| Error::Config("set coordinates out of sampler range".into()))?;
            }
            Ok(mid)
        })
        .collect()
}

/// Escape-probability estimator of the branching capacity:
/// `BCap(A) = sum_{x in A} P(past from x avoids A)`.
pub fn estimate_bcap(
    a: &FiniteSet,
    offspring: &OffspringDistribution,
    n: u64,
    radii: &RadiiParams,
    seed: u64,
    workers: Option<usize>,
) -> Result<McEstimate> {
    require_d5(a.dim())?;
    if n == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    let d = a.dim();
    let target = TargetSet::from_set(a)?;
    let starts: Vec<Pos> = a
        .points()
        .iter()
        .map(pos_from_point)
        .collect::<Result<_>>()?;
    let centers = centers_of(&[a])?;
    let factory = StreamFactory::new(seed);
    let sites = starts.len();
    let total = sites as u64 * n;

    let counts = exec::parallel_fold(
        total,
        exec::worker_count(workers),
        Counts::new(sites),
        |idx, acc| {
            let site = (idx / n) as usize;
            let sample = idx % n;
            let mut engine = Engine::new(
                offspring,
                d,
                radii.prune_radius,
                centers.clone(),
                radii.node_budget,
            )
            .expect("validated params");
            let mut vis = HitVisitor::new(vec![target.clone()], Some(0));
            for retry in 0..=RETRY_CAP {
                let mut rng = factory.stream(site as u64, sample, retry);
                vis.reset();
                let out = engine.sample_past(
                    starts[site],
                    radii.spine_exit_radius,
                    &mut rng,
                    &mut vis,
                );
                acc.nodes += out.nodes_used;
                acc.pruned += out.pruned;
                if out.complete {
                    if retry > 0 {
                        acc.exhausted += 1;
                    }
                    if !vis.hit[0] {
                        acc.events[site] += 1;
                    }
                    return;
                }
            }
            acc.persistent += 1;
            acc.exhausted += 1;
        },
        Counts::merge,
    );
    finish_sum_estimate(counts, n, a, offspring, radii, 1.0)
}

fn finish_sum_estimate(
    counts: Counts,
    n: u64,
    a: &FiniteSet,
    offspring: &OffspringDistribution,
    radii: &RadiiParams,
    target_points_scale: f64,
) -> Result<McEstimate> {
    if counts.persistent > 0 {
        return Err(Error::Budget(format!(
            "{} samples exhausted the node budget in every retry",
            counts.persistent
        )));
    }
    let total = counts.events.len() as u64 * n;
    let nf = n as f64;
    let mut estimate = 0.0;
    let mut var = 0.0;
    for &c in &counts.events {
        let p = c as f64 / nf;
        estimate += p;
        var += p * (1.0 - p) / nf;
    }
    let exhausted_fraction = counts.exhausted as f64 / total as f64;
    let pruned_mean = counts.pruned as f64 / total as f64;
    let bias = past_bias_bound(
        a.dim(),
        offspring,
        a.len() as f64 * target_points_scale,
        a.max_norm(),
        radii,
        pruned_mean,
    );
    Ok(McEstimate {
        estimate,
        stderr: var.sqrt(),
        bias_bound: bias,
        n,
        exhausted_fraction,
        flagged_biased: exhausted_fraction > EXHAUSTION_FLAG_THRESHOLD,
        mean_nodes: counts.nodes as f64 / total as f64,
    })
}

/// Hitting-probability estimator of the branching capacity:
/// `P(critical tree from w hits A) / g(w) -> BCap(A)`.
pub fn estimate_hitting_ratio(
    a: &FiniteSet,
    w: &LatticePoint,
    offspring: &OffspringDistribution,
    n: u64,
    seed: u64,
    workers: Option<usize>,
    radii: Option<RadiiParams>,
) -> Result<McEstimate> {
    require_d5(a.dim())?;
    if n == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    let d = a.dim();
    let radii = radii.unwrap_or_else(|| RadiiParams::for_hitting(w.norm(), a.diameter()));
    let target = TargetSet::from_set(a)?;
    let start = pos_from_point(w)?;
    let centers = centers_of(&[a])?;
    let factory = StreamFactory::new(seed);

    let counts = exec::parallel_fold(
        n,
        exec::worker_count(workers),
        Counts::new(1),
        |sample, acc| {
            let mut engine = Engine::new(
                offspring,
                d,
                radii.prune_radius,
                centers.clone(),
                radii.node_budget,
            )
            .expect("validated params");
            let mut vis = HitVisitor::new(vec![target.clone()], Some(0));
            for retry in 0..=RETRY_CAP {
                let mut rng = factory.stream(0, sample, retry);
                vis.reset();
                let out = engine.sample_tree(TreeKind::Critical, start, &mut rng, &mut vis);
                acc.nodes += out.nodes_used;
                acc.pruned += out.pruned;
                if out.complete {
                    if retry > 0 {
                        acc.exhausted += 1;
                    }
                    if vis.hit[0] {
                        acc.events[0] += 1;
                    }
                    return;
                }
            }
            acc.persistent += 1;
            acc.exhausted += 1;
        },
        Counts::merge,
    );
    if counts.persistent > 0 {
        return Err(Error::Budget(format!(
            "{} samples exhausted the node budget in every retry",
            counts.persistent
        )));
    }
    let g_w = Kernel::srw_green(d, 1e-10)?.eval(w)?;
    let hits = counts.events[0];
    let nf = n as f64;
    // Poisson-style error floor keeps the reported uncertainty meaningful in
    // the rare-hit regime, where the plug-in binomial error degenerates
    let stderr = (hits.max(1) as f64).sqrt() / (nf * g_w);
    let pruned_mean = counts.pruned as f64 / nf;
    let c_d = walk_green_constant(d);
    let l = (radii.prune_radius - a.max_norm()).max(2.0);
    let bias = pruned_mean * a.len() as f64 * c_d * l.powf(2.0 - d as f64) / g_w;
    let exhausted_fraction = counts.exhausted as f64 / nf;
    Ok(McEstimate {
        estimate: hits as f64 / (nf * g_w),
        stderr,
        bias_bound: bias,
        n,
        exhausted_fraction,
        flagged_biased: exhausted_fraction > EXHAUSTION_FLAG_THRESHOLD,
        mean_nodes: counts.nodes as f64 / nf,
    })
}

/// Monte Carlo of the past-occupation kernel: mean visits to `z` by the past
/// started at the origin, with the spine truncated on exiting
/// `B(0, r_trunc)` and the truncated parts completed by their conditional
/// expected visits. Cross-validates the semi-analytic kernel.
pub fn mc_past_green(
    z: &LatticePoint,
    offspring: &OffspringDistribution,
    n: u64,
    r_trunc: f64,
    seed: u64,
    workers: Option<usize>,
) -> Result<McEstimate> {
    if !(r_trunc > 2.0 * z.norm()) {
        return Err(Error::Config(
            "truncation radius must exceed twice the probe distance".into(),
        ));
    }
    let radii = RadiiParams {
        prune_radius: r_trunc,
        spine_exit_radius: r_trunc,
        node_budget: DEFAULT_NODE_BUDGET,
    };
    let origin = LatticePoint::origin(z.dim());
    let mut out = mc_occupation(
        &origin,
        offspring,
        std::slice::from_ref(z),
        n,
        &radii,
        seed,
        workers,
        true,
    )?;
    Ok(out.remove(0))
}

/// Radial evaluation of the walk kernel and the spine-remainder kernel, used
/// to complete truncated occupation expectations.
///
/// Values are interpolated from exact axis evaluations; the neglected lattice
/// anisotropy decays like the inverse square of the distance and is priced
/// into the reported bias bound.
struct CorrectionKernels {
    d: usize,
    m_tilde: f64,
    /// `g(s e_1) * s^{d-2}` for `s = 0..=smax` (entry 0 unused).
    g_scaled: Vec<f64>,
    /// `(g*g)(s e_1) * s^{d-4}` likewise.
    gg_scaled: Vec<f64>,
}

impl CorrectionKernels {
    fn build(d: usize, m_tilde: f64, smax: usize) -> Result<Self> {
        let mut g_scaled = vec![0.0; smax + 2];
        let mut gg_scaled = vec![0.0; smax + 2];
        for s in 1..=smax + 1 {
            let mut key = vec![0u32; d];
            key[0] = s as u32;
            key.sort_unstable_by(|a, b| b.cmp(a));
            let m = crate::green::quadrature::green_integral(&key, d, true, 1e-12)?;
            let sf = s as f64;
            g_scaled[s] = m.p0 * sf.powi(d as i32 - 2);
            gg_scaled[s] = m.p1 * sf.powi(d as i32 - 4);
        }
        Ok(Self {
            d,
            m_tilde,
            g_scaled,
            gg_scaled,
        })
    }

    #[inline]
    fn lerp(table: &[f64], u: f64) -> f64 {
        let s0 = (u.floor() as usize).clamp(1, table.len() - 2);
        let t = (u - s0 as f64).clamp(0.0, 1.0);
        table[s0] * (1.0 - t) + table[s0 + 1] * t
    }

    /// Expected visits to a site at distance `u` by a critical tree hung one
    /// step from a truncated vertex (the harmonic average of `g` over the
    /// neighbors, which equals `g` away from the site itself).
    #[inline]
    fn pruned_subtree(&self, u: f64) -> f64 {
        Self::lerp(&self.g_scaled, u) / u.powi(self.d as i32 - 2)
    }

    /// Expected visits to a site at distance `u` by the whole remaining past
    /// once the spine has been truncated there:
    /// `g + m * ((g*g) - g)`.
    #[inline]
    fn spine_remainder(&self, u: f64) -> f64 {
        let g = Self::lerp(&self.g_scaled, u) / u.powi(self.d as i32 - 2);
        let gg = Self::lerp(&self.gg_scaled, u) / u.powi(self.d as i32 - 4);
        g + self.m_tilde * (gg - g)
    }
}

/// Visit counter with analytic completion of the truncated parts: every
/// pruned subtree and the post-exit spine contribute their conditional
/// expected visits, making the estimator unbiased up to the interpolation
/// residual.
struct CorrectedCounts<'a> {
    d: usize,
    probes: &'a [Pos],
    counts: Vec<u64>,
    corrections: Vec<f64>,
    kernels: &'a CorrectionKernels,
}

impl<'a> CorrectedCounts<'a> {
    fn new(d: usize, probes: &'a [Pos], kernels: &'a CorrectionKernels) -> Self {
        Self {
            d,
            probes,
            counts: vec![0; probes.len()],
            corrections: vec![0.0; probes.len()],
            kernels,
        }
    }

    fn reset(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.corrections.iter_mut().for_each(|c| *c = 0.0);
    }

    #[inline]
    fn dist(&self, p: &Pos, q: &Pos) -> f64 {
        let mut s = 0i64;
        for i in 0..self.d {
            let dd = (p[i] - q[i]) as i64;
            s += dd * dd;
        }
        (s as f64).sqrt()
    }
}

impl crate::branching::sampler::Visitor for CorrectedCounts<'_> {
    #[inline]
    fn visit(&mut self, p: &Pos) -> super::sampler::Control {
        for (i, q) in self.probes.iter().enumerate() {
            if q[..self.d] == p[..self.d] {
                self.counts[i] += 1;
            }
        }
        super::sampler::Control::Continue
    }

    #[inline]
    fn on_pruned(&mut self, p: &Pos) {
        for (i, q) in self.probes.iter().enumerate() {
            let u = self.dist(p, q);
            debug_assert!(u >= 1.0);
            self.corrections[i] += self.kernels.pruned_subtree(u);
        }
    }

    #[inline]
    fn on_spine_exit(&mut self, p: &Pos) {
        for (i, q) in self.probes.iter().enumerate() {
            let u = self.dist(p, q);
            self.corrections[i] += self.kernels.spine_remainder(u);
        }
    }
}

/// Relative weight given to the interpolation residual of the analytic
/// completion when reporting the bias bound.
const CORRECTION_RESIDUAL_FRACTION: f64 = 0.01;

/// Mean visit counts (with multiplicity) at probe sites.
///
/// With `past = false` this measures the critical-tree occupation, whose
/// expectation is the walk Green's function; with `past = true` the past
/// occupation, whose expectation is the past-occupation kernel. Spatial
/// truncation is completed analytically (see [`CorrectedCounts`]), so the
/// estimators are unbiased up to the far-field interpolation residual
/// reported in `bias_bound`.
#[allow(clippy::too_many_arguments)]
pub fn mc_occupation(
    start: &LatticePoint,
    offspring: &OffspringDistribution,
    probes: &[LatticePoint],
    n: u64,
    radii: &RadiiParams,
    seed: u64,
    workers: Option<usize>,
    past: bool,
) -> Result<Vec<McEstimate>> {
    require_d5(start.dim())?;
    if probes.is_empty() || n == 0 {
        return Err(Error::Config("need probes and samples".into()));
    }
    let d = start.dim();
    let x0 = pos_from_point(start)?;
    let probe_pos: Vec<Pos> = probes.iter().map(pos_from_point).collect::<Result<_>>()?;
    let max_probe = probes.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let smax = (radii.spine_exit_radius + start.norm() + max_probe + 4.0).ceil() as usize;
    let kernels = CorrectionKernels::build(d, offspring.tail_mean(), smax)?;
    let factory = StreamFactory::new(seed);

    #[derive(Clone)]
    struct OccStats {
        sums: Vec<f64>,
        sq: Vec<f64>,
        corr: Vec<f64>,
        nodes: u64,
        exhausted: u64,
        persistent: u64,
    }
    let k = probes.len();
    let stats = exec::parallel_fold(
        n,
        exec::worker_count(workers),
        OccStats {
            sums: vec![0.0; k],
            sq: vec![0.0; k],
            corr: vec![0.0; k],
            nodes: 0,
            exhausted: 0,
            persistent: 0,
        },
        |sample, acc| {
            let mut engine = Engine::new(
                offspring,
                d,
                radii.prune_radius,
                vec![[0; super::sampler::MAX_DIM]],
                radii.node_budget,
            )
            .expect("validated params");
            let mut vis = CorrectedCounts::new(d, &probe_pos, &kernels);
            for retry in 0..=RETRY_CAP {
                let mut rng = factory.stream(0, sample, retry);
                vis.reset();
                let out = if past {
                    engine.sample_past(x0, radii.spine_exit_radius, &mut rng, &mut vis)
                } else {
                    engine.sample_tree(TreeKind::Critical, x0, &mut rng, &mut vis)
                };
                acc.nodes += out.nodes_used;
                if out.complete {
                    if retry > 0 {
                        acc.exhausted += 1;
                    }
                    for i in 0..k {
                        let v = vis.counts[i] as f64 + vis.corrections[i];
                        acc.sums[i] += v;
                        acc.sq[i] += v * v;
                        acc.corr[i] += vis.corrections[i];
                    }
                    return;
                }
            }
            acc.persistent += 1;
            acc.exhausted += 1;
        },
        |a, b| {
            for (x, y) in a.sums.iter_mut().zip(&b.sums) {
                *x += y;
            }
            for (x, y) in a.sq.iter_mut().zip(&b.sq) {
                *x += y;
            }
            for (x, y) in a.corr.iter_mut().zip(&b.corr) {
                *x += y;
            }
            a.nodes += b.nodes;
            a.exhausted += b.exhausted;
            a.persistent += b.persistent;
        },
    );
    if stats.persistent > 0 {
        return Err(Error::Budget(format!(
            "{} samples exhausted the node budget in every retry",
            stats.persistent
        )));
    }
    let nf = n as f64;
    let exhausted_fraction = stats.exhausted as f64 / nf;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mean = stats.sums[i] / nf;
        let var = (stats.sq[i] - nf * mean * mean) / (nf - 1.0).max(1.0);
        out.push(McEstimate {
            estimate: mean,
            stderr: (var.max(0.0) / nf).sqrt(),
            bias_bound: CORRECTION_RESIDUAL_FRACTION * stats.corr[i] / nf,
            n,
            exhausted_fraction,
            flagged_biased: exhausted_fraction > EXHAUSTION_FLAG_THRESHOLD,
            mean_nodes: stats.nodes as f64 / nf,
        });
    }
    Ok(out)
}

/// Coupled estimator of the union capacity deficit
/// `BCap(A) + BCap(B) - BCap(A u (z+B))`: for each start in `A`, the
/// probability of escaping `A` while hitting `z+B`, plus the symmetric term,
/// with both events evaluated on one realization.
#[allow(clippy::too_many_arguments)]
pub fn coupled_union_deficit(
    a: &FiniteSet,
    b: &FiniteSet,
    z: &LatticePoint,
    offspring: &OffspringDistribution,
    n: u64,
    radii: &RadiiParams,
    seed: u64,
    workers: Option<usize>,
) -> Result<McEstimate> {
    require_d5(a.dim())?;
    let shifted = translate(b, z)?;
    if a.intersects(&shifted) {
        return Err(Error::Config(
            "coupled deficit requires A and z+B disjoint".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    let d = a.dim();
    let t_a = TargetSet::from_set(a)?;
    let t_zb = TargetSet::from_set(&shifted)?;
    let centers = centers_of(&[a, &shifted])?;
    // starts: all of A (own target 0), then all of z+B (own target 1)
    let mut starts: Vec<(Pos, usize)> = Vec::new();
    for p in a.points() {
        starts.push((pos_from_point(p)?, 0));
    }
    for p in shifted.points() {
        starts.push((pos_from_point(p)?, 1));
    }
    let sites = starts.len();
    let factory = StreamFactory::new(seed);
    let total = sites as u64 * n;

    let counts = exec::parallel_fold(
        total,
        exec::worker_count(workers),
        Counts::new(sites),
        |idx, acc| {
            let site = (idx / n) as usize;
            let sample = idx % n;
            let (start, own) = starts[site];
            let mut engine = Engine::new(
                offspring,
                d,
                radii.prune_radius,
                centers.clone(),
                radii.node_budget,
            )
            .expect("validated params");
            // stop as soon as the own set is hit: the indicator is then zero
            let mut vis = HitVisitor::new(vec![t_a.clone(), t_zb.clone()], Some(own));
            for retry in 0..=RETRY_CAP {
                let mut rng = factory.stream(site as u64, sample, retry);
                vis.reset();
                let out = engine.sample_past(start, radii.spine_exit_radius, &mut rng, &mut vis);
                acc.nodes += out.nodes_used;
                acc.pruned += out.pruned;
                if out.complete {
                    if retry > 0 {
                        acc.exhausted += 1;
                    }
                    let escaped_own = !vis.hit[own];
                    let hit_other = vis.hit[1 - own];
                    if escaped_own && hit_other {
                        acc.events[site] += 1;
                    }
                    return;
                }
            }
            acc.persistent += 1;
            acc.exhausted += 1;
        },
        Counts::merge,
    );
    // the deficit couples both sets; price the bias on their union
    let union = a.union(&shifted)?;
    finish_sum_estimate(counts, n, &union, offspring, radii, 1.0)
}

/// Hitting ratio of the whole invariant tree (or the past only) from `z`
/// against the past-occupation kernel: `P(T^z hits A) / G(z)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_two_sided_hit(
    a: &FiniteSet,
    z: &LatticePoint,
    offspring: &OffspringDistribution,
    n: u64,
    radii: &RadiiParams,
    seed: u64,
    workers: Option<usize>,
    past_only: bool,
) -> Result<McEstimate> {
    require_d5(a.dim())?;
    if n == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    let d = a.dim();
    if radii.spine_exit_radius < z.norm() + radii.prune_radius {
        return Err(Error::Config(
            "spine exit radius must cover the start separation plus the prune radius".into(),
        ));
    }
    let target = TargetSet::from_set(a)?;
    let start = pos_from_point(z)?;
    let centers = centers_of(&[a])?;
    let factory = StreamFactory::new(seed);

    let counts = exec::parallel_fold(
        n,
        exec::worker_count(workers),
        Counts::new(1),
        |sample, acc| {
            let mut engine = Engine::new(
                offspring,
                d,
                radii.prune_radius,
                centers.clone(),
                radii.node_budget,
            )
            .expect("validated params");
            let mut vis = HitVisitor::new(vec![target.clone()], Some(0));
            for retry in 0..=RETRY_CAP {
                let mut rng = factory.stream(0, sample, retry);
                vis.reset();
                let out = if past_only {
                    engine.sample_past(start, radii.spine_exit_radius, &mut rng, &mut vis)
                } else {
                    engine.sample_full_tree(start, radii.spine_exit_radius, &mut rng, &mut vis)
                };
                acc.nodes += out.nodes_used;
                acc.pruned += out.pruned;
                if out.complete {
                    if retry > 0 {
                        acc.exhausted += 1;
                    }
                    if vis.hit[0] {
                        acc.events[0] += 1;
                    }
                    return;
                }
            }
            acc.persistent += 1;
            acc.exhausted += 1;
        },
        Counts::merge,
    );
    if counts.persistent > 0 {
        return Err(Error::Budget(format!(
            "{} samples exhausted the node budget in every retry",
            counts.persistent
        )));
    }
    let g_z = Kernel::brw_past_green(d, offspring, 1e-10)?.eval(z)?;
    let nf = n as f64;
    let hits = counts.events[0];
    let stderr = (hits.max(1) as f64).sqrt() / (nf * g_z);
    let pruned_mean = counts.pruned as f64 / nf;
    let bias = past_bias_bound(d, offspring, a.len() as f64, a.max_norm(), radii, pruned_mean)
        / g_z;
    let exhausted_fraction = counts.exhausted as f64 / nf;
    Ok(McEstimate {
        estimate: hits as f64 / (nf * g_z),
        stderr,
        bias_bound: bias,
        n,
        exhausted_fraction,
        flagged_biased: exhausted_fraction > EXHAUSTION_FLAG_THRESHOLD,
        mean_nodes: counts.nodes as f64 / nf,
    })
}

/// Output of the branching sweep: the records plus run metadata destined for
/// output headers.
#[derive(Debug, Clone)]
pub struct BranchSweep {
    pub records: Vec<SweepRecord>,
    /// Fraction of samples that exhausted the node budget, worst case over
    /// the constituent estimator runs.
    pub exhausted_fraction: f64,
    /// Mean sampled nodes per Monte Carlo sample, averaged over runs.
    pub mean_nodes: f64,
}

/// Branching derivative-formula sweep: per radius, the coupled deficit over
/// `G(z)` against the target `2 BCap(A) BCap(B)`, all error bars propagated.
#[allow(clippy::too_many_arguments)]
pub fn derivative_sweep_branching(
    a: &FiniteSet,
    b: &FiniteSet,
    direction: &LatticePoint,
    radii: &[i64],
    offspring: &OffspringDistribution,
    n: u64,
    params: &RadiiParams,
    seed: u64,
    workers: Option<usize>,
) -> Result<BranchSweep> {
    require_d5(a.dim())?;
    if direction.is_zero() {
        return Err(Error::Config("sweep direction must be nonzero".into()));
    }
    let factory = StreamFactory::new(seed);
    let bcap_a = estimate_bcap(a, offspring, n, params, factory.child(1).seed(), workers)?;
    let bcap_b = estimate_bcap(b, offspring, n, params, factory.child(2).seed(), workers)?;
    let target = 2.0 * bcap_a.estimate * bcap_b.estimate;
    let target_err = 2.0
        * ((bcap_a.estimate * bcap_b.stderr).powi(2) + (bcap_b.estimate * bcap_a.stderr).powi(2))
            .sqrt();
    let kernel = Kernel::brw_past_green(a.dim(), offspring, 1e-10)?;
    let mut worst_exhausted = bcap_a.exhausted_fraction.max(bcap_b.exhausted_fraction);
    let mut nodes_acc = bcap_a.mean_nodes + bcap_b.mean_nodes;
    let mut nodes_runs = 2.0;

    let mut records = Vec::with_capacity(radii.len());
    for &r in radii {
        let z = direction.scale(r);
        let shifted = translate(b, &z)?;
        if a.intersects(&shifted) {
            records.push(SweepRecord::overlap(r, z.coords().to_vec()));
            continue;
        }
        // the spine must be able to travel between the two clusters
        let mut per_radius = *params;
        per_radius.spine_exit_radius = per_radius
            .spine_exit_radius
            .max(z.norm() + 2.0 * per_radius.prune_radius);
        let deficit = coupled_union_deficit(
            a,
            b,
            &z,
            offspring,
            n,
            &per_radius,
            factory.child(1000 + r as u64).seed(),
            workers,
        )?;
        let g_z = kernel.eval(&z)?;
        worst_exhausted = worst_exhausted.max(deficit.exhausted_fraction);
        nodes_acc += deficit.mean_nodes;
        nodes_runs += 1.0;
        let mut flags = Vec::new();
        if deficit.flagged_biased || bcap_a.flagged_biased || bcap_b.flagged_biased {
            flags.push("budget_biased");
        }
        records.push(SweepRecord {
            r,
            z: z.coords().to_vec(),
            cap_a: bcap_a.estimate,
            cap_a_err: bcap_a.stderr,
            cap_b: bcap_b.estimate,
            cap_b_err: bcap_b.stderr,
            cap_union: bcap_a.estimate + bcap_b.estimate - deficit.estimate,
            cap_union_err: (bcap_a.stderr.powi(2)
                + bcap_b.stderr.powi(2)
                + deficit.stderr.powi(2))
            .sqrt(),
            kernel_at_z: g_z,
            ratio: deficit.estimate / g_z,
            ratio_err: deficit.stderr / g_z,
            target,
            target_err,
            n_samples: n,
            flags: flags.join(";"),
        });
    }
    Ok(BranchSweep {
        records,
        exhausted_fraction: worst_exhausted,
        mean_nodes: nodes_acc / nodes_runs,
    })
}

/// Which derived law of an offspring distribution to histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    /// The base law, as drawn for normal vertices.
    Base,
    /// The tail law, as drawn for one-sided spine attachments.
    Tail,
    /// The size-biased law, as drawn for spine vertex offspring.
    SizeBiased,
}

/// Histogram of `n` draws from one of the sampler's vertex laws, for
/// goodness-of-fit testing. Uses the same sampling routines as the engine.
pub fn law_histogram(
    offspring: &OffspringDistribution,
    law: LawKind,
    n: u64,
    seed: u64,
) -> Vec<u64> {
    let len = match law {
        LawKind::Base => offspring.pmf().len(),
        LawKind::Tail => offspring.tail_pmf().len(),
        LawKind::SizeBiased => offspring.size_biased_pmf().len(),
    };
    let mut hist = vec![0u64; len];
    let factory = StreamFactory::new(seed);
    let mut rng = factory.stream(0, 0, 0);
    for _ in 0..n {
        let k = match law {
            LawKind::Base => offspring.sample(&mut rng),
            LawKind::Tail => offspring.sample_tail(&mut rng),
            LawKind::SizeBiased => offspring.sample_size_biased(&mut rng),
        } as usize;
        if k < hist.len() {
            hist[k] += 1;
        }
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::offspring::builtin_offspring;
    use crate::branching::sampler::sample_past_range;

    fn origin_set() -> FiniteSet {
        FiniteSet::singleton(LatticePoint::origin(5))
    }

    fn lean_radii() -> RadiiParams {
        RadiiParams {
            prune_radius: 12.0,
            spine_exit_radius: 24.0,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    #[test]
    fn bcap_singleton_basic_properties() {
        let mu = builtin_offspring("binary").unwrap();
        let e = estimate_bcap(&origin_set(), &mu, 4_000, &lean_radii(), 7, Some(2)).unwrap();
        assert!(e.estimate > 0.0 && e.estimate <= 1.0, "BCap {}", e.estimate);
        assert!(e.stderr > 0.0);
        assert!(e.bias_bound > 0.0);
    }

    #[test]
    fn bcap_translation_invariant_within_noise() {
        let mu = builtin_offspring("binary").unwrap();
        let a = origin_set();
        let b = FiniteSet::singleton(LatticePoint::new(vec![3, -2, 1, 0, 4]).unwrap());
        let ea = estimate_bcap(&a, &mu, 6_000, &lean_radii(), 11, Some(2)).unwrap();
        let eb = estimate_bcap(&b, &mu, 6_000, &lean_radii(), 12, Some(2)).unwrap();
        let joint = (ea.stderr.powi(2) + eb.stderr.powi(2)).sqrt();
        assert!(
            (ea.estimate - eb.estimate).abs() <= 3.0 * joint + 1e-9,
            "{} vs {}",
            ea.estimate,
            eb.estimate
        );
    }

    #[test]
    fn bcap_worker_count_invariance() {
        let mu = builtin_offspring("binary").unwrap();
        let e1 = estimate_bcap(&origin_set(), &mu, 2_000, &lean_radii(), 5, Some(1)).unwrap();
        let e2 = estimate_bcap(&origin_set(), &mu, 2_000, &lean_radii(), 5, Some(4)).unwrap();
        assert_eq!(e1.estimate, e2.estimate);
        assert_eq!(e1.stderr, e2.stderr);
        assert_eq!(e1.mean_nodes, e2.mean_nodes);
    }

    #[test]
    fn deficit_is_nonnegative_and_decays() {
        let mu = builtin_offspring("binary").unwrap();
        let a = origin_set();
        let d8 = coupled_union_deficit(
            &a,
            &a,
            &LatticePoint::axis(5, 8),
            &mu,
            3_000,
            &RadiiParams {
                prune_radius: 10.0,
                spine_exit_radius: 30.0,
                node_budget: DEFAULT_NODE_BUDGET,
            },
            3,
            Some(2),
        )
        .unwrap();
        assert!(d8.estimate >= 0.0);
    }

    #[test]
    fn deficit_decomposition_identity_per_realization() {
        // escape(A) - escape(A u C) = escape(A) and hit(C), realization by
        // realization
        let mu = builtin_offspring("binary").unwrap();
        let a = origin_set();
        let z = LatticePoint::axis(5, 4);
        let c = FiniteSet::singleton(z.clone());
        let union = a.union(&c).unwrap();
        for seed in 0..300 {
            let s = sample_past_range(
                &LatticePoint::origin(5),
                &mu,
                24.0,
                12.0,
                1_000_000,
                seed,
                &[a.clone(), c.clone(), union.clone()],
            )
            .unwrap();
            let esc_a = !s.hit_flags[0];
            let esc_c = !s.hit_flags[1];
            let esc_u = !s.hit_flags[2];
            assert_eq!(esc_u, esc_a && esc_c, "seed {seed}");
            let lhs = (esc_a as i32) - (esc_u as i32);
            let rhs = (esc_a && !esc_c) as i32;
            assert_eq!(lhs, rhs, "seed {seed}");
        }
    }

    #[test]
    fn two_sided_requires_covering_spine_radius() {
        let mu = builtin_offspring("binary").unwrap();
        let bad = RadiiParams {
            prune_radius: 12.0,
            spine_exit_radius: 12.0,
            node_budget: DEFAULT_NODE_BUDGET,
        };
        let r = estimate_two_sided_hit(
            &origin_set(),
            &LatticePoint::axis(5, 16),
            &mu,
            10,
            &bad,
            1,
            Some(1),
            false,
        );
        assert!(r.is_err());
    }

    #[test]
    fn hitting_ratio_root_in_set_hits_always() {
        let mu = builtin_offspring("binary").unwrap();
        let a = origin_set();
        let w = LatticePoint::origin(5);
        let e = estimate_hitting_ratio(&a, &w, &mu, 500, 3, Some(2), None).unwrap();
        // every tree contains its root, so the raw hit count equals n and
        // the ratio is 1/g(0)
        let g0 = Kernel::srw_green(5, 1e-10).unwrap().eval(&w).unwrap();
        assert!((e.estimate - 1.0 / g0).abs() < 1e-12);
    }

    #[test]
    fn law_histograms_pass_chi_square() {
        let mu = builtin_offspring("geometric_half").unwrap();
        for (law, probs) in [
            (LawKind::Base, mu.pmf().to_vec()),
            (LawKind::Tail, mu.tail_pmf().to_vec()),
            (LawKind::SizeBiased, mu.size_biased_pmf().to_vec()),
        ] {
            let hist = law_histogram(&mu, law, 100_000, 31);
            let p = crate::reference::chi_square_test(&hist, &probs);
            assert!(p > 0.01, "law {law:?}: p = {p}");
        }
    }

    #[test]
    fn sweep_records_well_formed() {
        let mu = builtin_offspring("binary").unwrap();
        let a = origin_set();
        let dir = LatticePoint::axis(5, 1);
        let sweep = derivative_sweep_branching(
            &a,
            &a,
            &dir,
            &[6, 10],
            &mu,
            2_000,
            &RadiiParams {
                prune_radius: 8.0,
                spine_exit_radius: 16.0,
                node_budget: DEFAULT_NODE_BUDGET,
            },
            17,
            Some(2),
        )
        .unwrap();
        let recs = &sweep.records;
        assert_eq!(recs.len(), 2);
        assert!(sweep.mean_nodes > 0.0);
        for rec in recs {
            assert!(!rec.is_flagged(), "flags: {}", rec.flags);
            assert!(rec.ratio.is_finite());
            assert!(rec.ratio_err > 0.0);
            assert!(rec.target > 0.0);
            assert!(rec.kernel_at_z > 0.0);
            assert_eq!(rec.n_samples, 2_000);
        }
    }
}

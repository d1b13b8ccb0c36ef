//! Tree-indexed random walk samplers.
//!
//! All samplers share one engine: a breadth-first expansion of critical trees
//! whose vertices carry lattice positions, with spatial pruning (subtrees
//! rooted outside the prune region are recorded but not expanded) and a hard
//! node budget. The spine-based samplers walk the spine first, collecting the
//! roots of the attached trees, then expand the trees one at a time so an
//! early decision skips the remaining work.
//!
//! Each sample consumes randomness from a single stream in a fixed program
//! order, so a (seed, site, sample, retry) tuple fully determines the
//! realization.

use super::offspring::OffspringDistribution;
use crate::error::{Error, Result};
use crate::lattice::{FiniteSet, LatticePoint};
use crate::rng::SplitMix;
use std::collections::VecDeque;

/// Largest ambient dimension supported by the samplers.
pub const MAX_DIM: usize = 16;

/// Fixed-size position; only the first `d` coordinates are meaningful.
pub type Pos = [i32; MAX_DIM];

pub fn pos_from_point(p: &LatticePoint) -> Result<Pos> {
    if p.dim() > MAX_DIM {
        return Err(Error::Domain(format!(
            "samplers support dimension up to {MAX_DIM}, got {}",
            p.dim()
        )));
    }
    let mut out = [0i32; MAX_DIM];
    for (i, &c) in p.coords().iter().enumerate() {
        out[i] = i32::try_from(c)
            .map_err(|_| Error::Config(format!("coordinate {c} out of sampler range")))?;
    }
    Ok(out)
}

#[inline]
fn norm_sq(p: &Pos, d: usize) -> i64 {
    let mut s = 0i64;
    for &c in &p[..d] {
        s += (c as i64) * (c as i64);
    }
    s
}

#[inline]
fn dist_sq(p: &Pos, q: &Pos, d: usize) -> i64 {
    let mut s = 0i64;
    for i in 0..d {
        let dd = (p[i] - q[i]) as i64;
        s += dd * dd;
    }
    s
}

/// A target set in sampler representation: sorted positions with a bounding
/// box for cheap rejection.
#[derive(Debug, Clone)]
pub struct TargetSet {
    d: usize,
    points: Vec<Pos>,
    lo: Pos,
    hi: Pos,
}

impl TargetSet {
    pub fn from_set(s: &FiniteSet) -> Result<Self> {
        let d = s.dim();
        let mut points = Vec::with_capacity(s.len());
        for p in s.points() {
            points.push(pos_from_point(p)?);
        }
        points.sort_unstable();
        let mut lo = [i32::MAX; MAX_DIM];
        let mut hi = [i32::MIN; MAX_DIM];
        for p in &points {
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        Ok(Self { d, points, lo, hi })
    }

    #[inline]
    pub fn contains(&self, p: &Pos) -> bool {
        for i in 0..self.d {
            if p[i] < self.lo[i] || p[i] > self.hi[i] {
                return false;
            }
        }
        if self.points.len() <= 8 {
            self.points.iter().any(|q| q[..self.d] == p[..self.d])
        } else {
            self.points.binary_search(p).is_ok()
        }
    }
}

/// What a visitor tells the engine after seeing a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    /// The sample's outputs are fully decided; stop expanding.
    Decided,
}

/// Per-vertex callback. Implementations accumulate hit flags, visit counts,
/// or the full range. The pruning hooks let occupation estimators complete
/// the truncated expectation analytically.
pub trait Visitor {
    fn visit(&mut self, p: &Pos) -> Control;

    /// A vertex at `p` was visited but its subtree will not be expanded.
    #[inline]
    fn on_pruned(&mut self, p: &Pos) {
        let _ = p;
    }

    /// The spine left the exit ball at `p` (which is not itself visited).
    #[inline]
    fn on_spine_exit(&mut self, p: &Pos) {
        let _ = p;
    }
}

/// Hit flags against a list of targets, with an optional decisive target:
/// once the decisive target is hit (or all targets are hit) the sample stops.
#[derive(Debug, Clone)]
pub struct HitVisitor {
    pub targets: Vec<TargetSet>,
    pub hit: Vec<bool>,
    decisive: Option<usize>,
}

impl HitVisitor {
    pub fn new(targets: Vec<TargetSet>, decisive: Option<usize>) -> Self {
        let n = targets.len();
        Self {
            targets,
            hit: vec![false; n],
            decisive,
        }
    }

    pub fn reset(&mut self) {
        self.hit.iter_mut().for_each(|h| *h = false);
    }
}

impl Visitor for HitVisitor {
    #[inline]
    fn visit(&mut self, p: &Pos) -> Control {
        let mut all = true;
        for (i, t) in self.targets.iter().enumerate() {
            if !self.hit[i] {
                if t.contains(p) {
                    self.hit[i] = true;
                    if self.decisive == Some(i) {
                        return Control::Decided;
                    }
                } else {
                    all = false;
                }
            }
        }
        if all && !self.targets.is_empty() {
            Control::Decided
        } else {
            Control::Continue
        }
    }
}

/// Counts visits (with multiplicity) to a fixed list of probe sites.
#[derive(Debug, Clone)]
pub struct CountVisitor {
    d: usize,
    probes: Vec<Pos>,
    pub counts: Vec<u64>,
}

impl CountVisitor {
    pub fn new(d: usize, probes: Vec<Pos>) -> Self {
        let n = probes.len();
        Self {
            d,
            probes,
            counts: vec![0; n],
        }
    }

    pub fn reset(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
    }
}

impl Visitor for CountVisitor {
    #[inline]
    fn visit(&mut self, p: &Pos) -> Control {
        for (i, q) in self.probes.iter().enumerate() {
            if q[..self.d] == p[..self.d] {
                self.counts[i] += 1;
            }
        }
        Control::Continue
    }
}

/// Records every visited position.
#[derive(Debug, Clone, Default)]
pub struct CollectVisitor {
    pub visited: Vec<Pos>,
}

impl Visitor for CollectVisitor {
    fn visit(&mut self, p: &Pos) -> Control {
        self.visited.push(*p);
        Control::Continue
    }
}

/// Outcome of one sample.
#[derive(Debug, Clone, Copy)]
pub struct Outcome {
    pub nodes_used: u64,
    pub pruned: u64,
    /// False when the node budget ran out before the sample was decided.
    pub complete: bool,
}

/// Root offspring law of a standalone sampled tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeKind {
    /// Every vertex reproduces with the base law.
    Critical,
    /// Root count follows the tail law.
    Adjoint,
    /// Root count follows the size-biased law minus one.
    Hat,
}

/// Sampler configuration: offspring law, geometry of the prune region
/// (a union of balls), and the node budget.
pub struct Engine<'a> {
    pub offspring: &'a OffspringDistribution,
    pub d: usize,
    prune_radius_sq: f64,
    centers: Vec<Pos>,
    pub node_budget: u64,
    queue: VecDeque<Pos>,
    roots: Vec<Pos>,
}

impl<'a> Engine<'a> {
    pub fn new(
        offspring: &'a OffspringDistribution,
        d: usize,
        prune_radius: f64,
        centers: Vec<Pos>,
        node_budget: u64,
    ) -> Result<Self> {
        if d > MAX_DIM {
            return Err(Error::Domain(format!(
                "samplers support dimension up to {MAX_DIM}, got {d}"
            )));
        }
        if !(prune_radius > 0.0) {
            return Err(Error::Config("prune radius must be positive".into()));
        }
        if node_budget == 0 {
            return Err(Error::Config("node budget must be positive".into()));
        }
        Ok(Self {
            offspring,
            d,
            prune_radius_sq: prune_radius * prune_radius,
            centers: if centers.is_empty() {
                vec![[0; MAX_DIM]]
            } else {
                centers
            },
            node_budget,
            queue: VecDeque::new(),
            roots: Vec::new(),
        })
    }

    #[inline]
    fn in_region(&self, p: &Pos) -> bool {
        self.centers
            .iter()
            .any(|c| (dist_sq(p, c, self.d) as f64) <= self.prune_radius_sq)
    }

    #[inline]
    fn step(&self, p: &Pos, rng: &mut SplitMix) -> Pos {
        let dir = rng.below(2 * self.d as u64) as usize;
        let mut q = *p;
        q[dir >> 1] += if dir & 1 == 0 { 1 } else { -1 };
        q
    }

    /// Expand one tree from an already-visited root. Children of any vertex
    /// outside the prune region are not generated.
    fn grow(
        &mut self,
        root: Pos,
        root_kind: TreeKind,
        rng: &mut SplitMix,
        visitor: &mut impl Visitor,
        out: &mut Outcome,
    ) -> Control {
        // root offspring
        let k = match root_kind {
            TreeKind::Critical => self.offspring.sample(rng),
            TreeKind::Adjoint => self.offspring.sample_tail(rng),
            TreeKind::Hat => self.offspring.sample_size_biased(rng) - 1,
        };
        if !self.in_region(&root) {
            out.pruned += 1;
            visitor.on_pruned(&root);
            return Control::Continue;
        }
        self.queue.clear();
        for _ in 0..k {
            self.queue.push_back(self.step(&root, rng));
        }
        while let Some(p) = self.queue.pop_front() {
            if out.nodes_used >= self.node_budget {
                out.complete = false;
                return Control::Decided;
            }
            out.nodes_used += 1;
            if visitor.visit(&p) == Control::Decided {
                return Control::Decided;
            }
            if !self.in_region(&p) {
                out.pruned += 1;
                visitor.on_pruned(&p);
                continue;
            }
            let k = self.offspring.sample(rng);
            for _ in 0..k {
                self.queue.push_back(self.step(&p, rng));
            }
        }
        Control::Continue
    }

    /// Standalone tree started at `x`; the root itself is part of the range.
    pub fn sample_tree(
        &mut self,
        kind: TreeKind,
        x: Pos,
        rng: &mut SplitMix,
        visitor: &mut impl Visitor,
    ) -> Outcome {
        let mut out = Outcome {
            nodes_used: 0,
            pruned: 0,
            complete: true,
        };
        out.nodes_used += 1;
        if visitor.visit(&x) == Control::Decided {
            return out;
        }
        self.grow(x, kind, rng, visitor, &mut out);
        out
    }

    /// The past of the invariant tree from `x`: the spine (a walk from `x`,
    /// excluding the root) truncated on exiting `B(0, spine_exit_radius)`,
    /// with a tail-law number of critical trees hanging one step off each
    /// spine vertex.
    pub fn sample_past(
        &mut self,
        x: Pos,
        spine_exit_radius: f64,
        rng: &mut SplitMix,
        visitor: &mut impl Visitor,
    ) -> Outcome {
        self.sample_spine_tree(x, spine_exit_radius, rng, visitor, false)
    }

    /// The whole invariant tree from `x`: the root (included in the range),
    /// its normal children starting critical trees, and both-side attachments
    /// along the spine with the joint split law.
    pub fn sample_full_tree(
        &mut self,
        x: Pos,
        spine_exit_radius: f64,
        rng: &mut SplitMix,
        visitor: &mut impl Visitor,
    ) -> Outcome {
        self.sample_spine_tree(x, spine_exit_radius, rng, visitor, true)
    }

    fn sample_spine_tree(
        &mut self,
        x: Pos,
        spine_exit_radius: f64,
        rng: &mut SplitMix,
        visitor: &mut impl Visitor,
        full: bool,
    ) -> Outcome {
        let mut out = Outcome {
            nodes_used: 0,
            pruned: 0,
            complete: true,
        };
        let exit_sq = spine_exit_radius * spine_exit_radius;
        self.roots.clear();

        if full {
            // the root is part of the tree and spawns `mu` right-side trees
            out.nodes_used += 1;
            if visitor.visit(&x) == Control::Decided {
                return out;
            }
            let k = self.offspring.sample(rng);
            // spine step is drawn before the normal children's steps
            let first = self.step(&x, rng);
            for _ in 0..k {
                let root = self.step(&x, rng);
                self.roots.push(root);
            }
            self.walk_spine(first, exit_sq, rng, visitor, full, &mut out);
        } else {
            let first = self.step(&x, rng);
            self.walk_spine(first, exit_sq, rng, visitor, full, &mut out);
        }
        if !out.complete {
            return out;
        }

        // expand collected tree roots one at a time
        let roots = std::mem::take(&mut self.roots);
        for root in &roots {
            if out.nodes_used >= self.node_budget {
                out.complete = false;
                break;
            }
            out.nodes_used += 1;
            if visitor.visit(root) == Control::Decided {
                break;
            }
            if self.grow(*root, TreeKind::Critical, rng, visitor, &mut out) == Control::Decided {
                break;
            }
        }
        self.roots = roots;
        out
    }

    fn walk_spine(
        &mut self,
        first: Pos,
        exit_sq: f64,
        rng: &mut SplitMix,
        visitor: &mut impl Visitor,
        full: bool,
        out: &mut Outcome,
    ) {
        let mut v = first;
        loop {
            if (norm_sq(&v, self.d) as f64) > exit_sq {
                visitor.on_spine_exit(&v);
                return; // spine truncated outside the exit ball
            }
            if out.nodes_used >= self.node_budget {
                out.complete = false;
                return;
            }
            out.nodes_used += 1;
            if visitor.visit(&v) == Control::Decided {
                return;
            }
            let attach = if full {
                let (l, r) = self.offspring.sample_spine_split(rng);
                l + r
            } else {
                self.offspring.sample_tail(rng)
            };
            // the next spine position is drawn before the attachment steps
            let next = self.step(&v, rng);
            for _ in 0..attach {
                let root = self.step(&v, rng);
                self.roots.push(root);
            }
            v = next;
        }
    }
}

/// Range of one sampled tree, as exposed by the public sampling operations.
#[derive(Debug, Clone)]
pub struct RangeSample {
    /// Distinct visited lattice points.
    pub visited: FiniteSet,
    /// Per queried target set: whether the walk hit it.
    pub hit_flags: Vec<bool>,
    /// Whether spatial pruning cut any subtree.
    pub pruned: bool,
    pub nodes_used: u64,
}

const RETRY_CAP: u64 = 3;

struct FullVisitor {
    hits: HitVisitor,
    collect: CollectVisitor,
}

impl Visitor for FullVisitor {
    fn visit(&mut self, p: &Pos) -> Control {
        self.collect.visit(p);
        // collecting the range means no early exit: hit flags must stay
        // consistent with the recorded range
        self.hits.visit(p);
        Control::Continue
    }
}

fn range_from(d: usize, visited: &[Pos], fallback: Pos) -> Result<FiniteSet> {
    if visited.is_empty() {
        // empty tree range cannot happen for critical roots (the root is
        // always visited); the past can be empty only if the spine exits
        // immediately, in which case we record the fallback alone
        return FiniteSet::new(vec![LatticePoint::new(
            fallback[..d].iter().map(|&c| c as i64).collect(),
        )?]);
    }
    let pts = visited
        .iter()
        .map(|p| LatticePoint::new(p[..d].iter().map(|&c| c as i64).collect()))
        .collect::<Result<Vec<_>>>()?;
    FiniteSet::new(pts)
}

/// Sample the range of a critical / adjoint / hat tree started at `x`.
///
/// Deterministic given the seed; on node budget exhaustion the sample is
/// retried with a fresh derived stream up to three times before a budget
/// error is reported.
#[allow(clippy::too_many_arguments)]
pub fn sample_tree_range(
    kind: TreeKind,
    x: &LatticePoint,
    offspring: &OffspringDistribution,
    prune_radius: f64,
    node_budget: u64,
    seed: u64,
    targets: &[FiniteSet],
) -> Result<RangeSample> {
    let d = x.dim();
    let mut engine = Engine::new(offspring, d, prune_radius, vec![], node_budget)?;
    let x0 = pos_from_point(x)?;
    let tsets = targets
        .iter()
        .map(TargetSet::from_set)
        .collect::<Result<Vec<_>>>()?;
    let factory = crate::rng::StreamFactory::new(seed);
    for retry in 0..=RETRY_CAP {
        let mut rng = factory.stream(0, 0, retry);
        let mut vis = FullVisitor {
            hits: HitVisitor::new(tsets.clone(), None),
            collect: CollectVisitor::default(),
        };
        let out = engine.sample_tree(kind, x0, &mut rng, &mut vis);
        if out.complete {
            return Ok(RangeSample {
                visited: range_from(d, &vis.collect.visited, x0)?,
                hit_flags: vis.hits.hit,
                pruned: out.pruned > 0,
                nodes_used: out.nodes_used,
            });
        }
    }
    Err(Error::Budget(format!(
        "tree sample exhausted {node_budget} nodes in {} attempts",
        RETRY_CAP + 1
    )))
}

/// Sample the range of the past `T_-` started at `x` (the root is excluded).
#[allow(clippy::too_many_arguments)]
pub fn sample_past_range(
    x: &LatticePoint,
    offspring: &OffspringDistribution,
    spine_exit_radius: f64,
    prune_radius: f64,
    node_budget: u64,
    seed: u64,
    targets: &[FiniteSet],
) -> Result<RangeSample> {
    if !(spine_exit_radius > 0.0) {
        return Err(Error::Config("spine exit radius must be positive".into()));
    }
    let d = x.dim();
    let mut engine = Engine::new(offspring, d, prune_radius, vec![], node_budget)?;
    let x0 = pos_from_point(x)?;
    let tsets = targets
        .iter()
        .map(TargetSet::from_set)
        .collect::<Result<Vec<_>>>()?;
    let factory = crate::rng::StreamFactory::new(seed);
    for retry in 0..=RETRY_CAP {
        let mut rng = factory.stream(0, 0, retry);
        let mut vis = FullVisitor {
            hits: HitVisitor::new(tsets.clone(), None),
            collect: CollectVisitor::default(),
        };
        let out = engine.sample_past(x0, spine_exit_radius, &mut rng, &mut vis);
        if out.complete {
            return Ok(RangeSample {
                visited: range_from(d, &vis.collect.visited, x0)?,
                hit_flags: vis.hits.hit,
                pruned: out.pruned > 0,
                nodes_used: out.nodes_used,
            });
        }
    }
    Err(Error::Budget(format!(
        "past sample exhausted {node_budget} nodes in {} attempts",
        RETRY_CAP + 1
    )))
}

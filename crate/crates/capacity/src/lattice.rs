//! Lattice geometry: points of `Z^d`, finite point sets, shape generators,
//! translations and distances.

use crate::error::{Error, Result};
use crate::rng::SplitMix;

/// A point of the integer lattice `Z^d`.
///
/// The ambient dimension is the length of `coords`; all operations check that
/// dimensions agree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint {
    coords: Vec<i64>,
}

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Config("lattice point needs dimension >= 1".into()));
        }
        Ok(Self { coords })
    }

    /// Origin of `Z^d`.
    pub fn origin(d: usize) -> Self {
        Self { coords: vec![0; d] }
    }

    /// First coordinate vector `e_1` scaled by `k`.
    pub fn axis(d: usize, k: i64) -> Self {
        let mut coords = vec![0; d];
        coords[0] = k;
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    /// Squared Euclidean norm.
    pub fn norm_sq(&self) -> i64 {
        self.coords.iter().map(|&c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn neg(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|&c| -c).collect(),
        }
    }

    pub fn scale(&self, k: i64) -> Self {
        Self {
            coords: self.coords.iter().map(|&c| k * c).collect(),
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }
}

/// A finite, nonempty subset of `Z^d`.
///
/// Points are kept sorted lexicographically and deduplicated, so the index of
/// a point in [`FiniteSet::points`] is a deterministic canonical index; kernel
/// matrices and weight vectors built from the set share that index map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSet {
    dim: usize,
    points: Vec<LatticePoint>,
}

impl FiniteSet {
    pub fn new(points: Vec<LatticePoint>) -> Result<Self> {
        let mut points = points;
        let dim = match points.first() {
            Some(p) => p.dim(),
            None => return Err(Error::Config("finite set must be nonempty".into())),
        };
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch(dim, p.dim()));
            }
        }
        points.sort();
        points.dedup();
        Ok(Self { dim, points })
    }

    pub fn singleton(p: LatticePoint) -> Self {
        Self {
            dim: p.dim(),
            points: vec![p],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    /// Points in canonical (lexicographic) order.
    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.points.binary_search(p).is_ok()
    }

    /// Canonical index of `p`, if present.
    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    /// Union of two sets of the same dimension.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let mut pts = self.points.clone();
        pts.extend(other.points.iter().cloned());
        Self::new(pts)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        let (small, big) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.points.iter().any(|p| big.contains(p))
    }

    /// Largest pairwise Euclidean distance within the set.
    pub fn diameter(&self) -> f64 {
        let mut best = 0i64;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                let d2 = p
                    .coords()
                    .iter()
                    .zip(q.coords())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<i64>();
                best = best.max(d2);
            }
        }
        (best as f64).sqrt()
    }

    /// Largest Euclidean norm over the set.
    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.norm())
            .fold(0.0, f64::max)
    }
}

/// Shape generators understood by [`make_shape`].
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Euclidean ball `B(0, r)` intersected with the lattice.
    Ball { radius: f64 },
    /// Box `[0, side]^d`.
    Box { side: i64 },
    /// Segment `{0, .., n} * e_1`.
    Segment { n: i64 },
    /// Uniform random subset of `[0, side]^d` with the requested cardinality.
    Random { side: i64, count: usize },
}

/// Build one of the catalog shapes in dimension `d`.
///
/// Deterministic given `seed`; the seed is only consulted for `Random`.
pub fn make_shape(shape: &Shape, d: usize, seed: Option<u64>) -> Result<FiniteSet> {
    if d == 0 {
        return Err(Error::Config("dimension must be >= 1".into()));
    }
    match *shape {
        Shape::Ball { radius } => {
            if radius < 0.0 || !radius.is_finite() {
                return Err(Error::Config("ball radius must be >= 0".into()));
            }
            let r = radius.floor() as i64;
            let r2 = radius * radius;
            let mut pts = Vec::new();
            let mut cur = vec![-r; d];
            enumerate_box(&mut cur, 0, -r, r, &mut |c| {
                let n2: i64 = c.iter().map(|&x| x * x).sum();
                if (n2 as f64) <= r2 {
                    pts.push(LatticePoint { coords: c.to_vec() });
                }
            });
            FiniteSet::new(pts)
        }
        Shape::Box { side } => {
            if side < 0 {
                return Err(Error::Config("box side must be >= 0".into()));
            }
            let mut pts = Vec::new();
            let mut cur = vec![0; d];
            enumerate_box(&mut cur, 0, 0, side, &mut |c| {
                pts.push(LatticePoint { coords: c.to_vec() });
            });
            FiniteSet::new(pts)
        }
        Shape::Segment { n } => {
            if n < 0 {
                return Err(Error::Config("segment length must be >= 0".into()));
            }
            let pts = (0..=n).map(|k| LatticePoint::axis(d, k)).collect();
            FiniteSet::new(pts)
        }
        Shape::Random { side, count } => {
            let seed = seed.ok_or_else(|| Error::Config("random shape requires a seed".into()))?;
            if count == 0 {
                return Err(Error::Config("random shape requires cardinality >= 1".into()));
            }
            let per_axis = (side + 1) as u128;
            let total = per_axis.checked_pow(d as u32).unwrap_or(u128::MAX);
            if (count as u128) > total {
                return Err(Error::Config(format!(
                    "cannot place {count} distinct points in a box with {total} sites"
                )));
            }
            let mut rng = SplitMix::new(seed);
            let mut pts: Vec<LatticePoint> = Vec::with_capacity(count);
            while pts.len() < count {
                let coords: Vec<i64> =
                    (0..d).map(|_| rng.below(side as u64 + 1) as i64).collect();
                let p = LatticePoint { coords };
                if !pts.contains(&p) {
                    pts.push(p);
                }
            }
            FiniteSet::new(pts)
        }
    }
}

fn enumerate_box(cur: &mut [i64], axis: usize, lo: i64, hi: i64, f: &mut impl FnMut(&[i64])) {
    if axis == cur.len() {
        f(cur);
        return;
    }
    for v in lo..=hi {
        cur[axis] = v;
        enumerate_box(cur, axis + 1, lo, hi, f);
    }
}

/// `{x + z : x in S}`.
pub fn translate(s: &FiniteSet, z: &LatticePoint) -> Result<FiniteSet> {
    if s.dim() != z.dim() {
        return Err(Error::DimensionMismatch(s.dim(), z.dim()));
    }
    let pts = s
        .points()
        .iter()
        .map(|p| p.add(z))
        .collect::<Result<Vec<_>>>()?;
    FiniteSet::new(pts)
}

/// Minimal Euclidean distance between any pair of points; zero iff the sets
/// intersect.
pub fn min_distance(s: &FiniteSet, t: &FiniteSet) -> Result<f64> {
    if s.dim() != t.dim() {
        return Err(Error::DimensionMismatch(s.dim(), t.dim()));
    }
    let mut best = i64::MAX;
    for p in s.points() {
        for q in t.points() {
            let d2: i64 = p
                .coords()
                .iter()
                .zip(q.coords())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best = best.min(d2);
        }
    }
    Ok((best as f64).sqrt())
}

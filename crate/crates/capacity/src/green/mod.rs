//! Kernel evaluation: the simple-random-walk Green's function `g`, the
//! Bessel-Riesz kernel `g_alpha`, the branching past-Green's function `G`,
//! and asymptotic surrogates.
//!
//! `g` and the self-convolution `g*g` come from one quadrature engine (see
//! [`quadrature`]); `G` is assembled from them by the spine decomposition:
//! the spine contributes its walk occupation, and each spine vertex hangs an
//! independent mean-`m` bundle of critical trees one step away, where `m` is
//! the mean of the tail law. Collapsing the resulting convolutions with the
//! discrete harmonicity of `g` gives, with `d0` the indicator of the origin,
//!
//! ```text
//!   G(z) = g(z) - d0(z) + m * [ (g*g)(z) - 2 g(z) + d0(z) ].
//! ```

pub mod bessel;
pub mod quadrature;

use crate::branching::offspring::OffspringDistribution;
use crate::error::{Error, Result};
use crate::lattice::{FiniteSet, LatticePoint};
use crate::numerics::Matrix;
use quadrature::{canonical, green_integral, Moments};
use std::collections::HashMap;
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// Green's function of the simple random walk, `d >= 3`.
    SrwGreen,
    /// `(1 + ||x||)^{-alpha}`, `0 < alpha < d`.
    Riesz { alpha: f64 },
    /// Past-occupation Green's function of the invariant tree, `d >= 5`.
    /// `m_tilde` is the mean of the offspring tail law (`sigma^2 / 2`).
    BrwPastGreen { m_tilde: f64 },
    /// Far-field surrogate `c * max(||x||, 1)^{-exponent}`, display use only.
    Asymptotic { c: f64, exponent: f64 },
}

/// An evaluable symmetric kernel on `Z^d` with an internal memo cache.
///
/// Evaluation is pure; the cache is keyed by the canonical form of the point
/// (sorted absolute coordinates), which is a complete invariant for all
/// supported kinds. Shared references can be used from many threads.
#[derive(Debug)]
pub struct Kernel {
    kind: KernelKind,
    d: usize,
    tol: f64,
    cache: Mutex<HashMap<Vec<u32>, Moments>>,
}

impl Kernel {
    pub fn srw_green(d: usize, tol: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain(format!(
                "walk Green's function requires d >= 3 (transience), got {d}"
            )));
        }
        Self::checked(KernelKind::SrwGreen, d, tol)
    }

    pub fn riesz(d: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < d as f64) {
            return Err(Error::Domain(format!(
                "Riesz kernel requires 0 < alpha < d, got alpha={alpha}, d={d}"
            )));
        }
        Self::checked(KernelKind::Riesz { alpha }, d, 0.0)
    }

    pub fn brw_past_green(d: usize, offspring: &OffspringDistribution, tol: f64) -> Result<Self> {
        if d < 5 {
            return Err(Error::Domain(format!(
                "branching past-Green's function requires d >= 5, got {d}"
            )));
        }
        Self::checked(
            KernelKind::BrwPastGreen {
                m_tilde: offspring.tail_mean(),
            },
            d,
            tol,
        )
    }

    pub fn asymptotic(d: usize, c: f64, exponent: f64) -> Result<Self> {
        if !(c > 0.0) || !(exponent > 0.0) {
            return Err(Error::Config(
                "asymptotic surrogate needs positive constant and exponent".into(),
            ));
        }
        Self::checked(KernelKind::Asymptotic { c, exponent }, d, 0.0)
    }

    fn checked(kind: KernelKind, d: usize, tol: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be >= 1".into()));
        }
        let needs_tol = matches!(kind, KernelKind::SrwGreen | KernelKind::BrwPastGreen { .. });
        if needs_tol && !(tol > 0.0 && tol < 1.0) {
            return Err(Error::Config(format!(
                "relative tolerance must lie in (0, 1), got {tol}"
            )));
        }
        Ok(Self {
            kind,
            d,
            tol,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Evaluate the kernel at one point.
    pub fn eval(&self, x: &LatticePoint) -> Result<f64> {
        if x.dim() != self.d {
            return Err(Error::DimensionMismatch(self.d, x.dim()));
        }
        match self.kind {
            KernelKind::Riesz { alpha } => Ok((1.0 + x.norm()).powf(-alpha)),
            KernelKind::Asymptotic { c, exponent } => Ok(c * x.norm().max(1.0).powf(-exponent)),
            _ => Ok(self.eval_lattice_many(std::slice::from_ref(x))?[0]),
        }
    }

    /// Evaluate the kernel at many points, batching quadrature work.
    pub fn eval_many(&self, xs: &[LatticePoint]) -> Result<Vec<f64>> {
        match self.kind {
            KernelKind::Riesz { .. } | KernelKind::Asymptotic { .. } => {
                xs.iter().map(|x| self.eval(x)).collect()
            }
            _ => self.eval_lattice_many(xs),
        }
    }

    fn eval_lattice_many(&self, xs: &[LatticePoint]) -> Result<Vec<f64>> {
        let keys: Vec<Vec<u32>> = xs
            .iter()
            .map(|x| {
                if x.dim() != self.d {
                    return Err(Error::DimensionMismatch(self.d, x.dim()));
                }
                Ok(canonical(x.coords()))
            })
            .collect::<Result<_>>()?;
        let mut missing: Vec<Vec<u32>> = Vec::new();
        {
            let cache = self.cache.lock().unwrap();
            for k in &keys {
                if !cache.contains_key(k) && !missing.contains(k) {
                    missing.push(k.clone());
                }
            }
        }
        if !missing.is_empty() {
            // each point is integrated on its own grid: values are a pure
            // function of the point, independent of call grouping or order
            let want_p1 = matches!(self.kind, KernelKind::BrwPastGreen { .. });
            let mut computed = Vec::with_capacity(missing.len());
            for k in &missing {
                computed.push(green_integral(k, self.d, want_p1, self.quad_tol())?);
            }
            let mut cache = self.cache.lock().unwrap();
            for (k, m) in missing.into_iter().zip(computed) {
                cache.insert(k, m);
            }
        }
        let cache = self.cache.lock().unwrap();
        Ok(keys
            .iter()
            .map(|k| self.finish(&cache[k], k))
            .collect())
    }

    fn quad_tol(&self) -> f64 {
        (self.tol * 0.1).clamp(1e-13, 1e-6)
    }

    fn finish(&self, m: &Moments, key: &[u32]) -> f64 {
        match self.kind {
            KernelKind::SrwGreen => m.p0,
            KernelKind::BrwPastGreen { m_tilde } => {
                let at_origin = key.iter().all(|&c| c == 0);
                let d0 = if at_origin { 1.0 } else { 0.0 };
                m.p0 - d0 + m_tilde * (m.p1 - 2.0 * m.p0 + d0)
            }
            _ => unreachable!("closed-form kernels do not reach the cache"),
        }
    }

    /// Kernel matrix `M[i][j] = k(x_j - x_i)` over the canonical ordering of
    /// the set; symmetric with `k(0)` on the diagonal.
    pub fn matrix(&self, s: &FiniteSet) -> Result<Matrix> {
        if s.dim() != self.d {
            return Err(Error::DimensionMismatch(self.d, s.dim()));
        }
        let pts = s.points();
        let n = pts.len();
        let mut diffs = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                diffs.push(pts[j].sub(&pts[i])?);
            }
        }
        let vals = self.eval_many(&diffs)?;
        let mut m = Matrix::zeros(n);
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                m.set(i, j, vals[idx]);
                m.set(j, i, vals[idx]);
                idx += 1;
            }
        }
        Ok(m)
    }
}

/// Green's function of the simple random walk on `Z^d` at `x`, to relative
/// accuracy `tol` (the implementation computes close to machine precision).
pub fn srw_green(x: &LatticePoint, tol: f64) -> Result<f64> {
    Kernel::srw_green(x.dim(), tol)?.eval(x)
}

/// The Bessel-Riesz kernel `(1 + ||x||)^{-alpha}`.
pub fn riesz_kernel(x: &LatticePoint, alpha: f64) -> Result<f64> {
    Kernel::riesz(x.dim(), alpha)?.eval(x)
}

/// Past-occupation Green's function `G(z)` of the invariant tree, computed
/// semi-analytically by the spine decomposition.
pub fn brw_past_green(
    z: &LatticePoint,
    offspring: &OffspringDistribution,
    tol: f64,
) -> Result<f64> {
    Kernel::brw_past_green(z.dim(), offspring, tol)?.eval(z)
}

/// Kernel matrix over a finite set (see [`Kernel::matrix`]).
pub fn green_matrix(s: &FiniteSet, kernel: &Kernel) -> Result<Matrix> {
    kernel.matrix(s)
}

/// Monte Carlo cross-check of [`brw_past_green`], sampling the defining
/// expectation directly.
pub use crate::branching::estimators::mc_past_green;

/// Estimate the far-field constant `c` in `k(x) ~ c ||x||^{-exponent}` by
/// averaging `k(r e_1) r^exponent` over the given radii. Display use only:
/// capacity computations never consume this value.
pub fn fit_far_field_constant(kernel: &Kernel, exponent: f64, radii: &[i64]) -> Result<f64> {
    if radii.is_empty() {
        return Err(Error::Config("far-field fit needs at least one radius".into()));
    }
    let pts: Vec<LatticePoint> = radii
        .iter()
        .map(|&r| LatticePoint::axis(kernel.dim(), r))
        .collect();
    let vals = kernel.eval_many(&pts)?;
    let mut acc = 0.0;
    for (v, &r) in vals.iter().zip(radii) {
        acc += v * (r as f64).powf(exponent);
    }
    Ok(acc / radii.len() as f64)
}

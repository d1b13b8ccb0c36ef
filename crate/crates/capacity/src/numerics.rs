//! Shared numeric engines: a dense symmetric linear solver and certified
//! quadratic minimization over the probability simplex.

use crate::error::{Error, Result};
use crate::lattice::FiniteSet;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.n {
            for j in 0..i {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Quadratic form `v^T M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// LU factorization with partial pivoting.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    fn factor(m: &Matrix) -> Result<Self> {
        let n = m.n;
        let mut lu = m.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Numerical(format!(
                    "singular matrix (zero pivot at column {k})"
                )));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                for j in k + 1..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(Self { n, lu, piv })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        // (PA)^T y = P^T ... for the condition estimator we only need A^T
        // solves up to permutation bookkeeping: A^T x = b <=> U^T L^T P x = b
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * y[j];
            }
            y[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i] * y[j];
            }
            y[i] = s;
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.piv.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// Hager-style 1-norm estimate of `||A^{-1}||`.
    fn inv_norm_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= zx.abs() {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        est
    }
}

const RESIDUAL_TOL: f64 = 1e-10;

/// Solve `M v = rhs` for symmetric `M` with a pivoted factorization and
/// iterative refinement. The returned vector satisfies
/// `||M v - rhs||_inf <= 1e-10 ||rhs||_inf`; otherwise a numerical failure
/// with a condition estimate is reported.
pub fn solve_spd(m: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != m.n {
        return Err(Error::Config(format!(
            "rhs length {} does not match matrix size {}",
            rhs.len(),
            m.n
        )));
    }
    if !m.is_symmetric() {
        return Err(Error::Config("solve_spd expects a symmetric matrix".into()));
    }
    let lu = Lu::factor(m)?;
    let mut x = lu.solve(rhs);
    let rhs_scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    for _ in 0..3 {
        let mv = m.mul_vec(&x);
        let res: Vec<f64> = rhs.iter().zip(&mv).map(|(b, a)| b - a).collect();
        let rnorm = res.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if rnorm <= RESIDUAL_TOL * rhs_scale {
            return Ok(x);
        }
        let dx = lu.solve(&res);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }
    let mv = m.mul_vec(&x);
    let rnorm = rhs
        .iter()
        .zip(&mv)
        .map(|(b, a)| (b - a).abs())
        .fold(0.0, f64::max);
    if rnorm <= RESIDUAL_TOL * rhs_scale {
        return Ok(x);
    }
    let cond = m.norm_inf() * lu.inv_norm_estimate();
    Err(Error::Numerical(format!(
        "linear solve residual {rnorm:.3e} exceeds {RESIDUAL_TOL:.0e} (condition estimate {cond:.3e})"
    )))
}

/// Nonnegative weights attached to the points of a finite set, in canonical
/// point order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    base: FiniteSet,
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(base: FiniteSet, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != base.len() {
            return Err(Error::Config(format!(
                "{} weights for a set of {} points",
                weights.len(),
                base.len()
            )));
        }
        Ok(Self { base, weights })
    }

    pub fn base(&self) -> &FiniteSet {
        &self.base
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Certificate attached to a simplex QP solution: the achieved energy is
/// within `duality_gap` of the true minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpCertificate {
    pub energy: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Minimize `mu^T M mu` over probability vectors on the base set.
///
/// Frank-Wolfe with away steps and exact line search; the Frank-Wolfe gap is
/// a true duality gap for the convex quadratic, so the certificate brackets
/// the minimum in `[energy - gap, energy]`. Ties in the vertex oracles break
/// toward the lowest canonical index, making the iteration deterministic.
pub fn min_energy_simplex(
    base: &FiniteSet,
    m: &Matrix,
    tol: f64,
    max_iter: usize,
) -> Result<(WeightVector, QpCertificate)> {
    let n = m.size();
    if n != base.len() {
        return Err(Error::Config(format!(
            "matrix size {} does not match set size {}",
            n,
            base.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Config("gap tolerance must be positive".into()));
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut s = m.mul_vec(&x); // s = M x, gradient is 2 s
    let mut iterations = 0;
    let mut gap;

    while iterations < max_iter {
        iterations += 1;
        let xs: f64 = x.iter().zip(&s).map(|(a, b)| a * b).sum();

        // linear minimization oracle over the simplex vertices
        let mut fw = 0usize;
        for i in 1..n {
            if s[i] < s[fw] {
                fw = i;
            }
        }
        // away vertex: worst active coordinate
        let mut away = usize::MAX;
        for i in 0..n {
            if x[i] > 0.0 && (away == usize::MAX || s[i] > s[away]) {
                away = i;
            }
        }
        gap = 2.0 * (xs - s[fw]);
        if gap <= tol {
            break;
        }

        let fw_descent = xs - s[fw];
        let away_descent = s[away] - xs;
        let use_fw = fw_descent >= away_descent;

        if use_fw {
            // direction e_fw - x, max step 1
            let col: Vec<f64> = (0..n).map(|i| m.get(i, fw)).collect();
            let d_m_d = m.get(fw, fw) - 2.0 * s[fw] + x.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
            let slope = s[fw] - xs; // (1/2) <grad, d>
            let mut gamma = if d_m_d > 0.0 { -slope / d_m_d } else { 1.0 };
            gamma = gamma.clamp(0.0, 1.0);
            if gamma == 0.0 {
                break; // no descent available: gap is numerical noise
            }
            for i in 0..n {
                x[i] *= 1.0 - gamma;
                s[i] += gamma * (col[i] - s[i]);
            }
            x[fw] += gamma;
        } else {
            // direction x - e_away, max step keeps x[away] >= 0
            let col: Vec<f64> = (0..n).map(|i| m.get(i, away)).collect();
            let d_m_d = x.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() - 2.0 * s[away]
                + m.get(away, away);
            let slope = xs - s[away];
            let gamma_max = x[away] / (1.0 - x[away]).max(1e-300);
            let mut gamma = if d_m_d > 0.0 { -slope / d_m_d } else { gamma_max };
            gamma = gamma.clamp(0.0, gamma_max);
            if gamma == 0.0 {
                break;
            }
            let drop = (gamma - gamma_max).abs() < 1e-15;
            for i in 0..n {
                x[i] *= 1.0 + gamma;
                s[i] += gamma * (s[i] - col[i]);
            }
            x[away] -= gamma;
            if drop {
                x[away] = 0.0;
            }
        }
        // keep x a clean probability vector
        let total: f64 = x.iter().sum();
        if (total - 1.0).abs() > 1e-13 {
            for v in x.iter_mut() {
                *v /= total;
            }
            s = m.mul_vec(&x);
        }
    }

    let energy = m.quad_form(&x);
    let xs: f64 = x.iter().zip(&s).map(|(a, b)| a * b).sum();
    let fw_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    gap = (2.0 * (xs - fw_min)).max(0.0);
    let cert = QpCertificate {
        energy,
        duality_gap: gap,
        iterations,
    };
    if gap > tol {
        return Err(Error::Numerical(format!(
            "simplex QP did not certify: gap {gap:.3e} > tol {tol:.3e} after {iterations} iterations (energy {energy:.12e})"
        )));
    }
    Ok((WeightVector::new(base.clone(), x)?, cert))
}

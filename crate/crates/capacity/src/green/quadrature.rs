//! Quadrature engine for lattice Green's function integrals.
//!
//! Both the walk Green's function and its self-convolution reduce to
//! one-dimensional integrals of products of scaled modified Bessel functions:
//!
//! ```text
//!   I_p(x) = integral_0^inf  t^p  prod_j  e^{-t/d} I_{x_j}(t/d)  dt
//! ```
//!
//! with `p = 0` giving `g(x)` and `p = 1` giving `(g*g)(x)`. The head of the
//! integral is evaluated with Gauss-Legendre panels on a dyadic grid; the tail
//! beyond `T` is integrated analytically from the Hankel expansion of the
//! scaled Bessel factors, so the slow algebraic decay costs nothing.

use super::bessel::scaled_column;
use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Largest coordinate magnitude accepted by the kernel quadrature.
pub const MAX_COORD: i64 = 4096;

/// Canonical form of a lattice point for kernel evaluation: absolute
/// coordinates sorted descending. Kernels are invariant under coordinate
/// permutations and sign flips, so this is a complete invariant.
pub fn canonical(coords: &[i64]) -> Vec<u32> {
    let mut c: Vec<u32> = coords.iter().map(|&v| v.unsigned_abs() as u32).collect();
    c.sort_unstable_by(|a, b| b.cmp(a));
    c
}

/// Zeroth and first moments of the Bessel-product integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `integral t^0 ...` — the Green's function `g(x)`.
    pub p0: f64,
    /// `integral t^1 ...` — the convolution `(g*g)(x)`.
    pub p1: f64,
}

fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    assert_eq!(n, 40);
    TABLE.get_or_init(|| {
        // nodes of P_40 on (-1, 1) by Newton iteration
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Evaluate `I_0` and (when `want_p1`) `I_1` at one canonical point.
///
/// The quadrature grid is a pure function of the point, the dimension and the
/// tolerance, so a given value is reproduced bit-for-bit no matter when or
/// where it is computed.
pub fn green_integral(point: &[u32], d: usize, want_p1: bool, rel_tol: f64) -> Result<Moments> {
    let nmax = point.iter().copied().max().unwrap_or(0) as usize;
    if nmax as i64 > MAX_COORD {
        return Err(Error::Domain(format!(
            "kernel evaluation supports coordinates up to {MAX_COORD}, got {nmax}"
        )));
    }
    if point.len() != d {
        return Err(Error::DimensionMismatch(d, point.len()));
    }
    // T chosen so the Hankel series parameter (4 n^2 + 3) d / (8 T) <= 0.05,
    // then rounded up to a dyadic boundary.
    let t_min = f64::max(2000.0, 2.5 * d as f64 * (4.0 * (nmax * nmax) as f64 + 3.0));
    let n_panels = t_min.log2().ceil() as i32;
    let t_split = f64::powi(2.0, n_panels);

    let mut head = head_pass(point, d, nmax, want_p1, t_split, 1);
    let mut level = 2;
    loop {
        let refined = head_pass(point, d, nmax, want_p1, t_split, level);
        let mut worst = (head.p0 - refined.p0).abs() / refined.p0.abs().max(1e-290);
        if want_p1 {
            worst = worst.max((head.p1 - refined.p1).abs() / refined.p1.abs().max(1e-290));
        }
        head = refined;
        if worst <= rel_tol.max(1e-13) {
            break;
        }
        level *= 2;
        if level > 8 {
            return Err(Error::Numerical(format!(
                "green quadrature did not converge (residual {worst:.3e})"
            )));
        }
    }

    let (tail0, tail1) = hankel_tail(point, d, t_split);
    Ok(Moments {
        p0: head.p0 + tail0,
        p1: if want_p1 { head.p1 + tail1 } else { 0.0 },
    })
}

/// One Gauss-Legendre sweep over the dyadic panel grid, with each dyadic
/// panel split into `sub` equal parts.
fn head_pass(point: &[u32], d: usize, nmax: usize, want_p1: bool, t_split: f64, sub: usize) -> Moments {
    let (nodes, weights) = gauss_legendre(40);
    let mut acc = Moments { p0: 0.0, p1: 0.0 };
    let mut col = Vec::new();
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    loop {
        for s in 0..sub {
            let a = lo + (hi - lo) * s as f64 / sub as f64;
            let b = lo + (hi - lo) * (s + 1) as f64 / sub as f64;
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in nodes.iter().zip(weights) {
                let t = mid + half * x;
                let wt = w * half;
                scaled_column(nmax, t / d as f64, &mut col);
                let mut prod = 1.0;
                for &c in point {
                    prod *= col[c as usize];
                }
                acc.p0 += wt * prod;
                if want_p1 {
                    acc.p1 += wt * t * prod;
                }
            }
        }
        if hi >= t_split {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    acc
}

const HANKEL_ORDER: usize = 12;

/// Analytic tail `integral_T^inf t^p prod_j itilde(x_j, t/d) dt` from the
/// Hankel expansion
/// `itilde(n, z) = (2 pi z)^{-1/2} sum_k (-1)^k a_k(n) z^{-k}`.
fn hankel_tail(coords: &[u32], d: usize, t_split: f64) -> (f64, f64) {
    let df = d as f64;
    // product of the per-coordinate series, as a polynomial in 1/t
    let mut prod = [0.0_f64; HANKEL_ORDER + 1];
    prod[0] = 1.0;
    let mut series = [0.0_f64; HANKEL_ORDER + 1];
    for &n in coords {
        let mu = 4.0 * (n as f64) * (n as f64);
        series[0] = 1.0;
        let mut a = 1.0_f64;
        for (k, slot) in series.iter_mut().enumerate().skip(1) {
            let k = k as f64;
            let odd = 2.0 * k - 1.0;
            a *= -(mu - odd * odd) / (k * 8.0);
            // substitute z = t/d: each power of 1/z carries a factor d
            *slot = a * df.powi(k as i32);
        }
        let mut next = [0.0_f64; HANKEL_ORDER + 1];
        for i in 0..=HANKEL_ORDER {
            if prod[i] == 0.0 {
                continue;
            }
            for j in 0..=HANKEL_ORDER - i {
                next[i + j] += prod[i] * series[j];
            }
        }
        prod = next;
    }
    let front = (df / (2.0 * std::f64::consts::PI)).powf(df / 2.0);
    let mut tail0 = 0.0;
    let mut tail1 = 0.0;
    for (m, &c) in prod.iter().enumerate() {
        let m = m as f64;
        // integral_T^inf t^{p - d/2 - m} dt, convergent for d >= 3 (p=0)
        // and d >= 5 (p=1)
        let e0 = df / 2.0 + m - 1.0;
        tail0 += c * t_split.powf(-e0) / e0;
        let e1 = df / 2.0 + m - 2.0;
        if e1 > 0.0 {
            tail1 += c * t_split.powf(-e1) / e1;
        }
    }
    (front * tail0, front * tail1)
}

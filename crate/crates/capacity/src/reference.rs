//! Independent reference computations used by the verification suites.
//!
//! Everything here is deliberately written against the raw definitions
//! (exhaustive enumeration, textbook special functions) and shares no code
//! with the optimized paths it is used to check.

use crate::numerics::Matrix;

/// Minimum of `c^T M c` over the grid `{k/resolution}` on the simplex, by
/// exhaustive enumeration of integer compositions. This is an upper bound on
/// the true minimal energy that tightens as the resolution grows.
pub fn simplex_grid_min_energy(m: &Matrix, resolution: usize) -> f64 {
    let n = m.size();
    let mut comp = vec![0usize; n];
    let mut best = f64::INFINITY;
    enumerate_compositions(&mut comp, 0, resolution, &mut |c| {
        let inv = 1.0 / resolution as f64;
        let mut e = 0.0;
        for i in 0..n {
            if c[i] == 0 {
                continue;
            }
            let wi = c[i] as f64 * inv;
            for j in 0..n {
                if c[j] != 0 {
                    e += wi * (c[j] as f64 * inv) * m.get(i, j);
                }
            }
        }
        if e < best {
            best = e;
        }
    });
    best
}

fn enumerate_compositions(
    comp: &mut [usize],
    axis: usize,
    remaining: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if axis + 1 == comp.len() {
        comp[axis] = remaining;
        f(comp);
        return;
    }
    for v in 0..=remaining {
        comp[axis] = v;
        enumerate_compositions(comp, axis + 1, remaining - v, f);
    }
}

/// Grid minimization with zooming refinement: after each level the grid is
/// refined by a factor of five inside a window around the best point found so
/// far. Still pure enumeration; for a positive-definite quadratic the value
/// converges to the true minimum. The result never exceeds the coarse value.
pub fn refined_grid_min_energy(m: &Matrix, base_resolution: usize, levels: usize) -> f64 {
    let n = m.size();
    let mut k = base_resolution;
    let mut best_val = f64::INFINITY;
    let mut best_comp: Vec<usize> = vec![];
    {
        let mut comp = vec![0usize; n];
        enumerate_compositions(&mut comp, 0, k, &mut |c| {
            let e = energy_of(m, c, k);
            if e < best_val {
                best_val = e;
                best_comp = c.to_vec();
            }
        });
    }
    for _ in 0..levels {
        let factor = 5;
        let knew = k * factor;
        // window: +-(3 * factor + 2) new-grid units around the previous best
        let halfwidth = (3 * factor + 2) as i64;
        let center: Vec<i64> = best_comp.iter().map(|&c| (c * factor) as i64).collect();
        let lo: Vec<usize> = center
            .iter()
            .map(|&c| (c - halfwidth).max(0) as usize)
            .collect();
        let hi: Vec<usize> = center
            .iter()
            .map(|&c| ((c + halfwidth) as usize).min(knew))
            .collect();
        let mut comp = vec![0usize; n];
        let mut new_best = best_val;
        let mut new_comp = best_comp.iter().map(|&c| c * factor).collect::<Vec<_>>();
        enumerate_window(&mut comp, 0, knew, &lo, &hi, &mut |c| {
            let e = energy_of(m, c, knew);
            if e < new_best {
                new_best = e;
                new_comp = c.to_vec();
            }
        });
        best_val = new_best;
        best_comp = new_comp;
        k = knew;
    }
    best_val
}

fn energy_of(m: &Matrix, comp: &[usize], k: usize) -> f64 {
    let inv = 1.0 / k as f64;
    let n = comp.len();
    let mut e = 0.0;
    for i in 0..n {
        if comp[i] == 0 {
            continue;
        }
        let wi = comp[i] as f64 * inv;
        for j in 0..n {
            if comp[j] != 0 {
                e += wi * (comp[j] as f64 * inv) * m.get(i, j);
            }
        }
    }
    e
}

fn enumerate_window(
    comp: &mut [usize],
    axis: usize,
    remaining: usize,
    lo: &[usize],
    hi: &[usize],
    f: &mut impl FnMut(&[usize]),
) {
    if axis + 1 == comp.len() {
        if remaining >= lo[axis] && remaining <= hi[axis] {
            comp[axis] = remaining;
            f(comp);
        }
        return;
    }
    let tail_max: usize = hi[axis + 1..].iter().sum();
    let vmin = lo[axis].max(remaining.saturating_sub(tail_max));
    let vmax = hi[axis].min(remaining);
    for v in vmin..=vmax {
        comp[axis] = v;
        enumerate_window(comp, axis + 1, remaining - v, lo, hi, f);
    }
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom:
/// the p-value of an observed statistic.
pub fn chi_square_p_value(stat: f64, dof: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Regularized upper incomplete gamma `Q(a, x)`, by series for `x < a + 1`
/// and continued fraction otherwise.
fn gamma_q(a: f64, x: f64) -> f64 {
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut term = sum;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Lanczos log-gamma.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for c in COEF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Pearson chi-square p-value for an observed histogram against expected
/// probabilities. Cells with expected count below 5 are pooled into the last
/// kept cell.
pub fn chi_square_test(observed: &[u64], expected_probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected_probs.len());
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut pool_obs = 0.0;
    let mut pool_exp = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * nf;
        if e < 5.0 {
            pool_obs += o as f64;
            pool_exp += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pool_exp > 0.0 {
        cells.push((pool_obs, pool_exp));
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells
        .iter()
        .map(|&(o, e)| (o - e) * (o - e) / e)
        .sum();
    chi_square_p_value(stat, cells.len() - 1)
}

/// Ordinary least squares line `y = intercept + slope * x`.
/// Returns `(slope, intercept, r_squared)`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

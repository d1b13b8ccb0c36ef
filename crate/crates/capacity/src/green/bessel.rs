//! Exponentially scaled modified Bessel functions of integer order.

/// Fill `out[n] = e^{-z} I_n(z)` for `n = 0..=nmax`.
///
/// Uses Miller's downward recurrence with the normalization
/// `I_0(z) + 2 * sum_{k>=1} I_k(z) = e^z`, which keeps every order at full
/// relative accuracy: the recurrence runs in the direction where `I_n` is the
/// dominant solution.
pub fn scaled_column(nmax: usize, z: f64, out: &mut Vec<f64>) {
    out.clear();
    out.resize(nmax + 1, 0.0);
    if z == 0.0 {
        out[0] = 1.0;
        return;
    }
    debug_assert!(z > 0.0);
    // start high enough that I_start/I_0 < 1e-19; the e^{-n^2/2z} profile
    // gives n ~ 9.4 sqrt(z), plus slack for small z and the requested order
    let start = nmax + 2 + (9.5 * z.sqrt()) as usize + 16;
    let mut fip1 = 0.0_f64; // f_{n+1}
    let mut fi = 1e-280_f64; // f_n, arbitrary tiny scale
    let mut norm = 0.0_f64; // accumulates f_0 + 2 sum f_k as we descend
    for n in (1..=start).rev() {
        let fim1 = fip1 + (2.0 * n as f64 / z) * fi;
        fip1 = fi;
        fi = fim1;
        if n - 1 <= nmax {
            out[n - 1] = fi;
        }
        norm += 2.0 * fip1;
        if fi > 1e280 {
            // rescale to avoid overflow
            let s = 1e-280;
            fi *= s;
            fip1 *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    norm += fi; // f_0 counted once
    let inv = 1.0 / norm;
    for v in out.iter_mut() {
        *v *= inv;
    }
}

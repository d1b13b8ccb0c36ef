//! Critical offspring laws and their derived distributions.

use crate::error::{Error, Result};
use crate::rng::SplitMix;

/// A critical offspring distribution (mean one) with the derived laws used by
/// the spine decomposition:
///
/// * the tail law `mu_tilde(i) = sum_{j>i} mu(j)`, which is itself a
///   probability law because the mean is one, and governs the number of
///   subtrees hanging on one side of the spine;
/// * the size-biased law `mu_sb(i) = i * mu(i)`, governing spine vertex
///   offspring counts.
#[derive(Debug, Clone)]
pub struct OffspringDistribution {
    name: String,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    tail_pmf: Vec<f64>,
    tail_cdf: Vec<f64>,
    sb_pmf: Vec<f64>,
    sb_cdf: Vec<f64>,
    variance: f64,
    third_moment: f64,
}

const MASS_TOL: f64 = 1e-12;

impl OffspringDistribution {
    /// Build from an explicit pmf on `{0, 1, ..}`. The law must sum to one
    /// and have mean one, both within `1e-12`.
    pub fn from_pmf(name: &str, pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() || pmf.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config("offspring pmf must be probabilities".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Config(format!(
                "offspring pmf sums to {total}, expected 1"
            )));
        }
        let mean: f64 = pmf.iter().enumerate().map(|(k, &p)| k as f64 * p).sum();
        if (mean - 1.0).abs() > MASS_TOL {
            return Err(Error::Config(format!(
                "offspring mean is {mean}, criticality requires 1"
            )));
        }
        let m2: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| (k * k) as f64 * p)
            .sum();
        let m3: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| (k * k * k) as f64 * p)
            .sum();
        let variance = m2 - mean * mean;

        // tail law: mu_tilde(i) = P(X > i); total mass = mean = 1
        let mut tail_pmf = vec![0.0; pmf.len()];
        let mut acc = 0.0;
        for i in (0..pmf.len()).rev() {
            tail_pmf[i] = acc; // sum of pmf[j] for j > i
            acc += pmf[i];
        }
        while tail_pmf.last() == Some(&0.0) && tail_pmf.len() > 1 {
            tail_pmf.pop();
        }
        // size-biased law: mu_sb(i) = i mu(i); total mass = mean = 1
        let sb_pmf: Vec<f64> = pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .collect();

        Ok(Self {
            name: name.to_string(),
            cdf: cumulative(&pmf),
            tail_cdf: cumulative(&tail_pmf),
            sb_cdf: cumulative(&sb_pmf),
            pmf,
            tail_pmf,
            sb_pmf,
            variance,
            third_moment: m3,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn tail_pmf(&self) -> &[f64] {
        &self.tail_pmf
    }

    pub fn size_biased_pmf(&self) -> &[f64] {
        &self.sb_pmf
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn third_moment(&self) -> f64 {
        self.third_moment
    }

    /// Mean of the tail law, `sigma^2 / 2`.
    pub fn tail_mean(&self) -> f64 {
        self.tail_pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum()
    }

    #[inline]
    pub fn sample(&self, rng: &mut SplitMix) -> u32 {
        sample_cdf(&self.cdf, rng)
    }

    #[inline]
    pub fn sample_tail(&self, rng: &mut SplitMix) -> u32 {
        sample_cdf(&self.tail_cdf, rng)
    }

    #[inline]
    pub fn sample_size_biased(&self, rng: &mut SplitMix) -> u32 {
        sample_cdf(&self.sb_cdf, rng)
    }

    /// Offspring of a spine vertex: total count `k ~ mu_sb` (so `k >= 1`),
    /// with the special child placed uniformly among the `k` children.
    /// Returns (#children left of the special one, #children right of it),
    /// jointly distributed as `P(l, r) = mu(l + r + 1)`.
    #[inline]
    pub fn sample_spine_split(&self, rng: &mut SplitMix) -> (u32, u32) {
        let k = self.sample_size_biased(rng);
        debug_assert!(k >= 1);
        let left = rng.below(k as u64) as u32;
        (left, k - 1 - left)
    }
}

fn cumulative(pmf: &[f64]) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(pmf.len());
    let mut acc = 0.0;
    for &p in pmf {
        acc += p;
        cdf.push(acc);
    }
    if let Some(last) = cdf.last_mut() {
        *last = f64::max(*last, 1.0);
    }
    cdf
}

#[inline]
fn sample_cdf(cdf: &[f64], rng: &mut SplitMix) -> u32 {
    let u = rng.uniform();
    let mut k = 0usize;
    while k + 1 < cdf.len() && u >= cdf[k] {
        k += 1;
    }
    k as u32
}

/// Names accepted by [`builtin_offspring`].
pub const BUILTIN_NAMES: [&str; 3] = ["binary", "geometric_half", "poisson1"];

/// The catalog laws: `binary` (mu(0)=mu(2)=1/2, sigma^2=1), `geometric_half`
/// (mu(k)=2^-(k+1), sigma^2=2), and `poisson1` (mean-one Poisson truncated
/// where the tail drops below 1e-15 and renormalized, sigma^2=1).
pub fn builtin_offspring(name: &str) -> Result<OffspringDistribution> {
    match name {
        "binary" => OffspringDistribution::from_pmf("binary", vec![0.5, 0.0, 0.5]),
        "geometric_half" => {
            // truncate where the tail 2^-(k+1) falls below 1e-15
            let kmax = 52;
            let mut pmf: Vec<f64> = (0..=kmax).map(|k| f64::powi(2.0, -(k + 1))).collect();
            renormalize_to_critical(&mut pmf);
            OffspringDistribution::from_pmf("geometric_half", pmf)
        }
        "poisson1" => {
            let mut pmf = Vec::new();
            let mut term = (-1.0_f64).exp();
            let mut tail = 1.0 - term;
            let mut k = 0;
            pmf.push(term);
            while tail > 1e-15 {
                k += 1;
                term /= k as f64;
                tail -= term;
                pmf.push(term);
            }
            renormalize_to_critical(&mut pmf);
            OffspringDistribution::from_pmf("poisson1", pmf)
        }
        other => Err(Error::Config(format!(
            "unknown offspring law '{other}' (expected one of {BUILTIN_NAMES:?})"
        ))),
    }
}

/// Rescale mass and then nudge the top two entries so the truncated law has
/// total mass and mean both exactly 1 to machine precision.
fn renormalize_to_critical(pmf: &mut [f64]) {
    let total: f64 = pmf.iter().sum();
    for p in pmf.iter_mut() {
        *p /= total;
    }
    let mean: f64 = pmf.iter().enumerate().map(|(k, &p)| k as f64 * p).sum();
    // shift mass between index 0 and 1 to restore mean exactly
    let delta = mean - 1.0;
    pmf[0] -= delta;
    pmf[1] += delta;
    let total: f64 = pmf.iter().sum();
    pmf[0] += 1.0 - total;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_law() {
        let mu = builtin_offspring("binary").unwrap();
        assert_eq!(mu.pmf(), &[0.5, 0.0, 0.5]);
        assert!((mu.variance() - 1.0).abs() < 1e-12);
        // mu_sb(2) = 1
        assert!((mu.size_biased_pmf()[2] - 1.0).abs() < 1e-15);
        // mean of tail law = sigma^2/2 = 1/2
        assert!((mu.tail_mean() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn geometric_tail_identity() {
        let mu = builtin_offspring("geometric_half").unwrap();
        assert!((mu.variance() - 2.0).abs() < 1e-10, "var {}", mu.variance());
        // mu_tilde = mu for the geometric law
        for (k, &p) in mu.pmf().iter().enumerate().take(30) {
            let t = mu.tail_pmf()[k];
            assert!((p - t).abs() < 1e-13, "k={k}: {p} vs {t}");
        }
    }

    #[test]
    fn poisson_truncated_is_critical() {
        let mu = builtin_offspring("poisson1").unwrap();
        let mean: f64 = mu
            .pmf()
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum();
        assert!((mean - 1.0).abs() < 1e-13);
        assert!((mu.variance() - 1.0).abs() < 1e-10);
        assert!(mu.third_moment().is_finite());
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(builtin_offspring("supercritical").is_err());
    }

    #[test]
    fn non_critical_pmf_is_rejected() {
        assert!(OffspringDistribution::from_pmf("sub", vec![0.9, 0.1]).is_err());
        assert!(OffspringDistribution::from_pmf("bad-mass", vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn spine_split_matches_joint_law() {
        // P(l, r) = mu(l + r + 1); for binary only (l, r) in {(0,1), (1,0)}
        // each with probability 1/2
        let mu = builtin_offspring("binary").unwrap();
        let mut rng = SplitMix::new(11);
        let mut counts = [0u32; 2];
        let n = 40_000;
        for _ in 0..n {
            let (l, r) = mu.sample_spine_split(&mut rng);
            assert_eq!(l + r, 1);
            counts[l as usize] += 1;
        }
        let frac = counts[0] as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "left fraction {frac}");
    }

    #[test]
    fn generation_sizes_stay_critical() {
        // E[Z_k] = 1 for every generation of the plain branching process
        let mu = builtin_offspring("poisson1").unwrap();
        let mut rng = SplitMix::new(77);
        let n = 50_000;
        let mut sum = 0u64;
        let mut sum_sq = 0u128;
        for _ in 0..n {
            let mut z = 1u64;
            for _ in 0..3 {
                let mut next = 0u64;
                for _ in 0..z {
                    next += mu.sample(&mut rng) as u64;
                }
                z = next;
                if z == 0 {
                    break;
                }
            }
            sum += z;
            sum_sq += (z as u128) * (z as u128);
        }
        let mean = sum as f64 / n as f64;
        let var = (sum_sq as f64 - n as f64 * mean * mean) / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * se, "E[Z_3] = {mean} +- {se}");
    }

    #[test]
    fn sampling_matches_pmf() {
        let mu = builtin_offspring("geometric_half").unwrap();
        let mut rng = SplitMix::new(3);
        let n = 200_000;
        let mut hist = vec![0u32; 8];
        for _ in 0..n {
            let k = mu.sample(&mut rng) as usize;
            if k < hist.len() {
                hist[k] += 1;
            }
        }
        for k in 0..6 {
            let want = mu.pmf()[k];
            let got = hist[k] as f64 / n as f64;
            let se = (want * (1.0 - want) / n as f64).sqrt();
            assert!(
                (got - want).abs() < 4.0 * se + 1e-4,
                "k={k}: {got} vs {want}"
            );
        }
    }
}

//! One row of a derivative-formula experiment.

/// Record of a single sweep radius: the separation `z = r * direction`, the
/// three capacities with their uncertainty (certificate bracket half-width or
/// Monte Carlo standard error, zero when exact), the kernel value at `z`, and
/// the measured ratio against its limit target.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub r: i64,
    pub z: Vec<i64>,
    pub cap_a: f64,
    pub cap_a_err: f64,
    pub cap_b: f64,
    pub cap_b_err: f64,
    pub cap_union: f64,
    pub cap_union_err: f64,
    pub kernel_at_z: f64,
    pub ratio: f64,
    pub ratio_err: f64,
    pub target: f64,
    pub target_err: f64,
    pub n_samples: u64,
    pub flags: String,
}

impl SweepRecord {
    /// Row flagged as skipped because the translated sets overlap.
    pub fn overlap(r: i64, z: Vec<i64>) -> Self {
        Self {
            r,
            z,
            cap_a: f64::NAN,
            cap_a_err: 0.0,
            cap_b: f64::NAN,
            cap_b_err: 0.0,
            cap_union: f64::NAN,
            cap_union_err: 0.0,
            kernel_at_z: f64::NAN,
            ratio: f64::NAN,
            ratio_err: 0.0,
            target: f64::NAN,
            target_err: 0.0,
            n_samples: 0,
            flags: "overlap".into(),
        }
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

use crate::dataset::{latin_hypercube, ParameterRanges};
use crate::heston::HestonParams;
use crate::rng::{seeded, stream};
use crate::{Error, Result};

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `θ_i = lo_i + (hi_i - lo_i) sigmoid(z_i)`, mapping unconstrained `z` into
/// the feasible Heston box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxTransform {
    pub lo: [f64; 5],
    pub hi: [f64; 5],
}

impl Default for BoxTransform {
    fn default() -> Self {
        Self::from_ranges(&ParameterRanges::default())
    }
}

impl BoxTransform {
    pub fn new(lo: [f64; 5], hi: [f64; 5]) -> Result<Self> {
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::Config(format!("calibration box needs lo < hi, got {lo:?} / {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn from_ranges(r: &ParameterRanges) -> Self {
        let (lo, hi) = r.heston_box();
        Self { lo, hi }
    }

    pub fn to_params(&self, z: &[f64; 5]) -> HestonParams {
        HestonParams::from_array(std::array::from_fn(|i| self.lo[i] + (self.hi[i] - self.lo[i]) * sigmoid(z[i])))
    }

    /// Inverse of [`BoxTransform::to_params`]; points on or outside the box
    /// edge map to a large finite `z`.
    pub fn to_z(&self, theta: &HestonParams) -> [f64; 5] {
        let t = theta.to_array();
        std::array::from_fn(|i| {
            let s = ((t[i] - self.lo[i]) / (self.hi[i] - self.lo[i])).clamp(1e-12, 1.0 - 1e-12);
            (s / (1.0 - s)).ln()
        })
    }

    /// Diagonal of `∂θ/∂z`.
    pub fn jacobian(&self, z: &[f64; 5]) -> [f64; 5] {
        std::array::from_fn(|i| {
            let s = sigmoid(z[i]);
            (self.hi[i] - self.lo[i]) * s * (1.0 - s)
        })
    }

    /// Latin-hypercube start points inside the box, shared by every
    /// calibration method for a given seed.
    pub fn start_points(&self, n: usize, seed: u64) -> Vec<HestonParams> {
        let mut rng = seeded(seed, stream::STARTS);
        latin_hypercube(n, &self.lo, &self.hi, &mut rng)
            .into_iter()
            .map(|row| HestonParams::from_array(row.try_into().expect("five columns")))
            .collect()
    }
}

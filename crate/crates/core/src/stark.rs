//! Electric-field shifts of a transition and the inhomogeneous donor ensemble.

use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::spin::{transition_sensitivities, SpinSystem, Transition};

/// Upper truncation of the local field scale.
pub const FIELD_SCALE_MAX: f64 = 4.0;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Quadratic Stark coefficient `(eta_A A) df/dA + (eta_g g_e) df/dg_e` of a
/// transition, in Hz per (V/um)^2.
pub fn stark_coefficient(sys: &SpinSystem, b0: f64, t: &Transition) -> Result<f64> {
    let s = transition_sensitivities(sys, b0, t)?;
    Ok(sys.eta_a * sys.hyperfine * s.df_da + sys.eta_g * sys.electron_g * s.df_dg)
}

/// Quadratic Stark shift of a transition at field `e` (V/um), Hz.
pub fn quadratic_shift(sys: &SpinSystem, b0: f64, t: &Transition, e: f64) -> Result<f64> {
    Ok(stark_coefficient(sys, b0, t)? * e * e)
}

/// Local deviations of one ensemble member from the nominal donor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DonorInstance {
    /// Additive detuning of the addressed transition, Hz.
    pub magnetic_detuning: f64,
    /// Local field over applied field.
    pub field_scale: f64,
    /// Linear Stark coefficient, Hz per V/um (signed).
    pub linear_stark: f64,
}

impl DonorInstance {
    pub const NOMINAL: Self = Self {
        magnetic_detuning: 0.0,
        field_scale: 1.0,
        linear_stark: 0.0,
    };

    /// Field-induced shift (quadratic plus linear) at applied field `e`,
    /// given the transition's quadratic coefficient. Excludes the magnetic
    /// detuning.
    pub fn field_shift(&self, coefficient: f64, e: f64) -> f64 {
        let local = self.field_scale * e;
        coefficient * local * local + self.linear_stark * local
    }

    /// Full detuning of the addressed transition at applied field `e`.
    pub fn detuning(&self, coefficient: f64, e: f64) -> f64 {
        self.magnetic_detuning + self.field_shift(coefficient, e)
    }
}

impl Default for DonorInstance {
    fn default() -> Self {
        Self::NOMINAL
    }
}

/// `quadratic_shift(s E) + lambda s E + delta_f_B`.
pub fn total_shift(
    sys: &SpinSystem,
    b0: f64,
    t: &Transition,
    e: f64,
    donor: &DonorInstance,
) -> Result<f64> {
    let local = donor.field_scale * e;
    Ok(quadratic_shift(sys, b0, t, local)? + donor.linear_stark * local + donor.magnetic_detuning)
}

/// Widths of the ensemble distributions; all zero gives the nominal donor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnsembleDistribution {
    /// Gaussian FWHM of the magnetic detuning, Hz.
    pub magnetic_fwhm: f64,
    /// Lorentzian FWHM of the field scale around 1.
    pub field_scale_fwhm: f64,
    /// Standard deviation of the zero-mean linear Stark coefficient, Hz/(V/um).
    pub linear_stark_std: f64,
}

impl EnsembleDistribution {
    pub fn is_degenerate(&self) -> bool {
        self.magnetic_fwhm == 0.0 && self.field_scale_fwhm == 0.0 && self.linear_stark_std == 0.0
    }
}

/// Inverse CDF of a unit-centred Cauchy with half-width `gamma`, truncated
/// to `(0, FIELD_SCALE_MAX]`.
fn truncated_cauchy(u: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 1.0;
    }
    let cdf = |s: f64| 0.5 + ((s - 1.0) / gamma).atan() / std::f64::consts::PI;
    let (lo, hi) = (cdf(0.0), cdf(FIELD_SCALE_MAX));
    let p = lo + u * (hi - lo);
    let s = 1.0 + gamma * (std::f64::consts::PI * (p - 0.5)).tan();
    s.clamp(f64::MIN_POSITIVE, FIELD_SCALE_MAX)
}

/// Per-donor generator: a ChaCha stream keyed by the master seed and
/// selected by the donor index, so adding donors never reshuffles earlier ones.
pub fn donor_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws ensemble member `index` for a given master seed.
pub fn sample_donor(dist: &EnsembleDistribution, seed: u64, index: u64) -> DonorInstance {
    let mut rng = donor_rng(seed, index);
    let z_b: f64 = StandardNormal.sample(&mut rng);
    let u_s: f64 = Open01.sample(&mut rng);
    let z_l: f64 = StandardNormal.sample(&mut rng);
    DonorInstance {
        magnetic_detuning: z_b * dist.magnetic_fwhm / FWHM_PER_SIGMA,
        field_scale: truncated_cauchy(u_s, 0.5 * dist.field_scale_fwhm),
        linear_stark: z_l * dist.linear_stark_std,
    }
}

/// A seeded, finite ensemble of donors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ensemble {
    pub distribution: EnsembleDistribution,
    pub seed: u64,
    pub count: usize,
}

impl Ensemble {
    pub fn new(distribution: EnsembleDistribution, seed: u64, count: usize) -> Self {
        Self {
            distribution,
            seed,
            count,
        }
    }

    /// A single nominal donor.
    pub fn nominal() -> Self {
        Self::new(EnsembleDistribution::default(), 0, 1)
    }

    pub fn donors(&self) -> Vec<DonorInstance> {
        (0..self.count as u64)
            .map(|i| sample_donor(&self.distribution, self.seed, i))
            .collect()
    }
}

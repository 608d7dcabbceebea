//! Aerodynamic disturbance inputs: the bow-wave force surrogate, the affine
//! terminal drogue-offset map, exponentially correlated turbulence and the
//! 1-cosine gust.

use nalgebra::{DMatrix, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::linalg;
use crate::scalar::{lit, to_f64, Real};

/// Absolute symmetry tolerance for offset Jacobians.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisturbanceError {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("offset Jacobian M1 is not negative definite")]
    NotNegativeDefinite,
    #[error("drogue fluctuation |v_dr| = {norm} exceeds bound {bound}")]
    NoiseBoundViolation { norm: f64, bound: f64 },
    #[error("invalid bow-wave parameter `{0}`")]
    InvalidBowWave(&'static str),
    #[error("eigenvalue computation failed: {0}")]
    Eigen(#[from] linalg::LinalgError),
}

/// Smooth, radially symmetric stand-in for the receiver forebody flow field
/// acting on the drogue.
///
/// `F(dp) = A · exp(-r²/2σr²) · exp(-Δx²/2σx² - κ·Δx) · (c_x·x̂ + c_r·ρ/σr)`
/// where `ρ = (0, Δy, Δz)` is the radial offset of the drogue from the probe
/// axis and `r = |ρ|`. `κ` tilts the axial profile so the push keeps growing
/// as the probe closes the last metre; `κ = 0` gives a centred Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BowWaveSurrogate<T: Real> {
    pub amplitude: T,
    pub radial_scale: T,
    pub axial_scale: T,
    pub radial_gain: T,
    pub axial_gain: T,
    pub axial_decay: T,
}

impl<T: Real> BowWaveSurrogate<T> {
    pub fn new(
        amplitude: T,
        radial_scale: T,
        axial_scale: T,
        radial_gain: T,
        axial_gain: T,
        axial_decay: T,
    ) -> Result<Self, DisturbanceError> {
        let s = Self { amplitude, radial_scale, axial_scale, radial_gain, axial_gain, axial_decay };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), DisturbanceError> {
        if !(self.amplitude >= T::zero()) {
            return Err(DisturbanceError::InvalidBowWave("amplitude"));
        }
        if !(self.radial_scale > T::zero()) {
            return Err(DisturbanceError::InvalidBowWave("radial_scale"));
        }
        if !(self.axial_scale > T::zero()) {
            return Err(DisturbanceError::InvalidBowWave("axial_scale"));
        }
        if !(self.axial_decay >= T::zero()) {
            return Err(DisturbanceError::InvalidBowWave("axial_decay"));
        }
        if !self.radial_gain.is_finite() || !self.axial_gain.is_finite() {
            return Err(DisturbanceError::InvalidBowWave("gain"));
        }
        Ok(())
    }

    pub fn disabled() -> Self {
        Self {
            amplitude: T::zero(),
            radial_scale: T::one(),
            axial_scale: T::one(),
            radial_gain: T::zero(),
            axial_gain: T::zero(),
            axial_decay: T::zero(),
        }
    }

    /// Force on the drogue for the drogue-minus-probe offset `dp`.
    pub fn force(&self, dp: &Vec3<T>) -> Vec3<T> {
        if self.amplitude == T::zero() {
            return Vec3::zeros();
        }
        let two = lit::<T>(2.0);
        let r2 = dp.y * dp.y + dp.z * dp.z;
        let radial_env = (-r2 / (two * self.radial_scale * self.radial_scale)).exp();
        let axial_env = (-dp.x * dp.x / (two * self.axial_scale * self.axial_scale) - self.axial_decay * dp.x).exp();
        let k = self.amplitude * radial_env * axial_env;
        let rad = self.radial_gain / self.radial_scale;
        Vec3::new(k * self.axial_gain, k * rad * dp.y, k * rad * dp.z)
    }
}

/// `true` iff every eigenvalue of the symmetric matrix `m` is strictly below
/// `-1e-12 · max(1, max|m_ij|)`.
pub fn validate_negative_definite<T: Real>(m: &Matrix3<T>) -> Result<bool, DisturbanceError> {
    let dm = DMatrix::from_iterator(3, 3, m.iter().copied());
    let scale = dm.amax().max(T::one());
    let asym = linalg::asymmetry(&dm);
    if asym > lit::<T>(SYMMETRY_TOLERANCE) * scale {
        return Err(DisturbanceError::NotSymmetric(to_f64(asym)));
    }
    let eig = linalg::eigenvalues(&dm)?;
    let cutoff = -lit::<T>(1e-12) * scale;
    Ok(eig.iter().all(|z| z.re < cutoff))
}

/// Negative definiteness in the quadratic-form sense (`xᵀMx < 0` for all
/// `x ≠ 0`), which for a non-symmetric matrix is decided by its symmetric part.
pub fn is_negative_definite_form<T: Real>(m: &Matrix3<T>) -> bool {
    let sym = (m + m.transpose()) * lit::<T>(0.5);
    validate_negative_definite(&sym).unwrap_or(false)
}

/// Affine model of the terminal drogue offset: `m0 + M1·dp_T + v_dr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrogueOffsetMap<T: Real> {
    pub m0: Vec3<T>,
    pub m1: Matrix3<T>,
}

impl<T: Real> DrogueOffsetMap<T> {
    /// Requires `m1` symmetric negative definite.
    pub fn new(m0: Vec3<T>, m1: Matrix3<T>) -> Result<Self, DisturbanceError> {
        if !validate_negative_definite(&m1)? {
            return Err(DisturbanceError::NotNegativeDefinite);
        }
        Ok(Self { m0, m1 })
    }

    /// Accepts a non-symmetric `m1` whose quadratic form is negative definite.
    /// Convergence must then be certified numerically.
    pub fn new_general(m0: Vec3<T>, m1: Matrix3<T>) -> Result<Self, DisturbanceError> {
        if !is_negative_definite_form(&m1) {
            return Err(DisturbanceError::NotNegativeDefinite);
        }
        Ok(Self { m0, m1 })
    }

    pub fn terminal_offset(&self, dp_t: &Vec3<T>, v_dr: &Vec3<T>, bound: T) -> Result<Vec3<T>, DisturbanceError> {
        let norm = v_dr.norm();
        if norm > bound {
            return Err(DisturbanceError::NoiseBoundViolation { norm: to_f64(norm), bound: to_f64(bound) });
        }
        Ok(self.m0 + self.m1 * dp_t + v_dr)
    }
}

/// Bounds and intensities of the random disturbances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Drogue terminal fluctuation bound (m).
    pub b_dr: f64,
    /// Probe terminal tracking-error bound (m).
    pub b_pr: f64,
    /// Turbulence velocity standard deviation (m/s).
    pub turbulence_intensity: f64,
    /// Correlation time of the turbulence filter (s).
    pub turbulence_time_constant: f64,
    pub gust: GustSpec,
}

impl NoiseSpec {
    pub fn quiet() -> Self {
        Self { b_dr: 0.0, b_pr: 0.0, turbulence_intensity: 0.0, turbulence_time_constant: 1.0, gust: GustSpec::none() }
    }
}

/// Samples beyond this many standard deviations are clipped.
pub const TURBULENCE_CLIP_SIGMAS: f64 = 3.0;

/// Exponentially correlated (first-order filtered white noise) turbulence,
/// three independent axes, clipped at `TURBULENCE_CLIP_SIGMAS`.
#[derive(Debug, Clone)]
pub struct Turbulence {
    state: nalgebra::Vector3<f64>,
    intensity: f64,
    time_constant: f64,
    rng: ChaCha8Rng,
}

impl Turbulence {
    /// Starts in the stationary distribution.
    pub fn new(seed: u64, intensity: f64, time_constant: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = nalgebra::Vector3::zeros();
        if intensity > 0.0 {
            for i in 0..3 {
                let n: f64 = StandardNormal.sample(&mut rng);
                state[i] = clip(intensity * n, intensity);
            }
        }
        Self { state, intensity, time_constant: time_constant.max(1e-9), rng }
    }

    pub fn current(&self) -> nalgebra::Vector3<f64> {
        self.state
    }

    /// Advances the filter by `dt` and returns the new value.
    pub fn sample(&mut self, dt: f64) -> nalgebra::Vector3<f64> {
        assert!(dt > 0.0, "turbulence step must be positive");
        if self.intensity == 0.0 {
            return self.state;
        }
        let a = (-dt / self.time_constant).exp();
        let b = self.intensity * (1.0 - a * a).sqrt();
        for i in 0..3 {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            self.state[i] = clip(a * self.state[i] + b * n, self.intensity);
        }
        self.state
    }
}

fn clip(x: f64, sigma: f64) -> f64 {
    let lim = TURBULENCE_CLIP_SIGMAS * sigma;
    x.clamp(-lim, lim)
}

/// Discrete gust with a 1-cosine onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GustSpec {
    /// Full gust velocity per axis (m/s); zero axes are masked out.
    pub amplitude: [f64; 3],
    /// Campaign time at which the ramp starts (s).
    pub onset: f64,
    /// Duration of the 1-cosine ramp (s).
    pub ramp: f64,
}

impl GustSpec {
    pub fn none() -> Self {
        Self { amplitude: [0.0; 3], onset: f64::INFINITY, ramp: 0.0 }
    }

    pub fn is_active(&self) -> bool {
        self.amplitude.iter().any(|a| *a != 0.0) && self.onset.is_finite()
    }

    /// Gust velocity at campaign time `t`.
    pub fn velocity(&self, t: f64) -> nalgebra::Vector3<f64> {
        let a = nalgebra::Vector3::from(self.amplitude);
        if !(t >= self.onset) {
            return nalgebra::Vector3::zeros();
        }
        if self.ramp <= 0.0 || t >= self.onset + self.ramp {
            return a;
        }
        let phase = std::f64::consts::PI * (t - self.onset) / self.ramp;
        a * (0.5 * (1.0 - phase.cos()))
    }
}

/// Equivalent force of the gust through a per-axis linear drag map (N per m/s).
pub fn gust_force(t: f64, spec: &GustSpec, drag_gain: &[f64; 3]) -> nalgebra::Vector3<f64> {
    spec.velocity(t).component_mul(&nalgebra::Vector3::from(*drag_gain))
}

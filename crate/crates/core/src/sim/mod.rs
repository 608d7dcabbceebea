//! Docking attempts, learning campaigns and Monte Carlo sweeps.

mod attempt;
mod campaign;
mod offset;
pub mod seeds;

pub use attempt::{
    estimate_equilibrium, run_docking_attempt, AttemptLog, ClosureStats, Phase, PhaseMark, TrajectorySample,
};
pub use campaign::{monte_carlo, run_campaign, wilson_interval, CampaignResult, MonteCarloReport, RunSummary};
pub use offset::{estimate_offset_map, OffsetMapEstimate};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convergence::ConvergenceError;
use crate::disturbances::{BowWaveSurrogate, DisturbanceError, DrogueOffsetMap, GustSpec, NoiseSpec};
use crate::geometry::GeometryError;
use crate::hose::{HoseError, HoseParams};
use crate::receiver::{stability_check, AutopilotGains, ReceiverError, ReceiverLinearModel};
use crate::tilc::{validate_gains, TilcGains, TilcState};

type V3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("observation window holds {0} s of samples; at least 1 s is required")]
    InsufficientSamples(f64),
    #[error("attempt {attempt} made no contact within {limit} s")]
    Timeout { attempt: usize, limit: f64 },
    #[error("hose: {0}")]
    Hose(#[from] HoseError),
    #[error("receiver: {0}")]
    Receiver(#[from] ReceiverError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("disturbance: {0}")]
    Disturbance(#[from] DisturbanceError),
    #[error("convergence: {0}")]
    Convergence(#[from] ConvergenceError),
}

/// Which plant the attempt is flown on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Hose and receiver dynamics with disturbance forces.
    Physical,
    /// Terminal positions straight from the affine drogue-offset map.
    Affine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSettings {
    pub tier: Tier,
    pub bow_wave: BowWaveSurrogate<f64>,
    /// Used by the affine tier.
    pub offset_map: DrogueOffsetMap<f64>,
    pub noise: NoiseSpec,
    /// Steady stand-in for the tanker-wake force on the drogue (N).
    pub drogue_steady_force: V3,
    /// Turbulence and gust velocity to receiver force (N per m/s, per axis).
    pub receiver_force_gain: V3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSettings {
    /// Radial capture threshold R_C (m).
    pub r_c: f64,
    /// Standby distance behind the drogue along x (m).
    pub standby_offset: f64,
    /// Time spent at standby before the approach (s).
    pub standby_duration: f64,
    /// Trailing part of the standby used to estimate the drogue equilibrium (s).
    pub observation_window: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Approach time limit (s).
    pub max_attempt_duration: f64,
    /// Campaign time of the first attempt (s).
    pub first_attempt_time: f64,
    /// Spacing between attempt starts (s).
    pub attempt_interval: f64,
    pub n_attempts: usize,
    pub master_seed: u64,
    /// Keep every n-th trajectory sample in logs.
    pub decimation: usize,
    /// Samples within this many seconds of contact are kept at full rate.
    pub terminal_window: f64,
    /// Closure speed is assessed from this long after the approach starts (s).
    pub closure_settle_time: f64,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        Self {
            r_c: 0.15,
            standby_offset: 5.0,
            standby_duration: 10.0,
            observation_window: 10.0,
            dt: 1e-3,
            max_attempt_duration: 60.0,
            first_attempt_time: 50.0,
            attempt_interval: 50.0,
            n_attempts: 4,
            master_seed: 2024,
            decimation: 10,
            terminal_window: 0.5,
            closure_settle_time: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub hose: HoseParams,
    pub receiver: ReceiverLinearModel,
    pub autopilot: AutopilotGains,
    pub disturbances: DisturbanceSettings,
    pub tilc: TilcGains<f64>,
    pub warm_start: TilcState<f64>,
    pub campaign: CampaignSettings,
}

/// Receiver lag and closed-loop pole of the shipped autopilot.
pub const DEFAULT_RECEIVER_LAG: f64 = 0.5;
pub const DEFAULT_AUTOPILOT_POLE: f64 = 1.5;
pub const DEFAULT_CLOSURE_SPEED: f64 = 0.75;
pub const DEFAULT_RECEIVER_MASS: f64 = 9000.0;

impl Scenario {
    /// Calibrated physical-tier scenario.
    pub fn default_physical() -> Self {
        let mut noise = NoiseSpec::quiet();
        noise.b_dr = 0.05;
        noise.b_pr = 0.03;
        noise.turbulence_intensity = 0.12;
        noise.turbulence_time_constant = 1.0;
        Self {
            hose: HoseParams::default(),
            receiver: ReceiverLinearModel::velocity_lag(DEFAULT_RECEIVER_LAG, DEFAULT_RECEIVER_MASS, V3::zeros()),
            autopilot: AutopilotGains::triple_pole(DEFAULT_RECEIVER_LAG, DEFAULT_AUTOPILOT_POLE, DEFAULT_CLOSURE_SPEED)
                .expect("default closure speed is in range"),
            disturbances: DisturbanceSettings {
                tier: Tier::Physical,
                bow_wave: BowWaveSurrogate {
                    amplitude: 235.0,
                    radial_scale: 1.5,
                    axial_scale: 1.0,
                    radial_gain: -0.05,
                    axial_gain: 1.0,
                    axial_decay: 0.5,
                },
                offset_map: default_offset_map(),
                noise,
                drogue_steady_force: V3::zeros(),
                receiver_force_gain: V3::repeat(2000.0),
            },
            tilc: TilcGains::uniform(0.2, 0.8),
            warm_start: TilcState::default(),
            campaign: CampaignSettings::default(),
        }
    }

    /// Affine-tier scenario with the default offset map and gains.
    pub fn default_affine() -> Self {
        let mut s = Self::default_physical();
        s.disturbances.tier = Tier::Affine;
        s.disturbances.noise.turbulence_intensity = 0.0;
        s
    }

    /// Same scenario with every random and aerodynamic disturbance removed.
    pub fn without_disturbances(mut self) -> Self {
        self.disturbances.bow_wave = BowWaveSurrogate::disabled();
        self.disturbances.noise = NoiseSpec::quiet();
        self.disturbances.offset_map.m0 = V3::zeros();
        self.disturbances.drogue_steady_force = V3::zeros();
        self
    }

    pub fn with_gust(mut self, gust: GustSpec) -> Self {
        self.disturbances.noise.gust = gust;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.hose.validate()?;
        self.receiver.validate()?;
        self.autopilot.validate_for(&self.receiver)?;
        let report = stability_check(&self.receiver, &self.autopilot)?;
        if !report.stable {
            return Err(SimError::InvalidScenario(format!(
                "autopilot closed loop is unstable (spectral abscissa {:.4})",
                report.spectral_abscissa
            )));
        }
        self.disturbances.bow_wave.validate()?;
        if let Err(v) = validate_gains(&self.tilc) {
            let msgs: Vec<String> = v.iter().map(|g| g.to_string()).collect();
            return Err(SimError::InvalidScenario(msgs.join("; ")));
        }
        let n = &self.disturbances.noise;
        let nonneg = [
            (n.b_dr, "disturbances.b_dr"),
            (n.b_pr, "disturbances.b_pr"),
            (n.turbulence_intensity, "disturbances.turbulence_intensity"),
        ];
        for (v, name) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::InvalidScenario(format!("{name} must be >= 0")));
            }
        }
        if !(n.turbulence_time_constant > 0.0) {
            return Err(SimError::InvalidScenario("disturbances.turbulence_time_constant must be > 0".into()));
        }
        let c = &self.campaign;
        let checks = [
            (c.r_c > 0.0, "campaign.r_c must be > 0"),
            (c.standby_offset > 0.0, "campaign.standby_offset must be > 0"),
            (c.dt > 0.0 && c.dt <= 0.02, "campaign.dt must lie in (0, 0.02]"),
            (c.standby_duration >= 1.0, "campaign.standby_duration must be >= 1 s"),
            (
                c.observation_window >= 1.0 && c.observation_window <= c.standby_duration,
                "campaign.observation_window must lie in [1 s, standby_duration]",
            ),
            (c.max_attempt_duration > 0.0, "campaign.max_attempt_duration must be > 0"),
            (c.attempt_interval > 0.0, "campaign.attempt_interval must be > 0"),
            (c.n_attempts >= 1, "campaign.n_attempts must be >= 1"),
            (c.decimation >= 1, "campaign.decimation must be >= 1"),
            (c.terminal_window >= 0.0, "campaign.terminal_window must be >= 0"),
            (c.closure_settle_time >= 0.0, "campaign.closure_settle_time must be >= 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(SimError::InvalidScenario(msg.into()));
            }
        }
        Ok(())
    }
}

/// Offset Jacobian of the affine tier: `diag(−0.4, −0.6, −0.6)`, with the
/// half-metre vertical drift of the first cold-start attempt in `m0`.
pub fn default_offset_map() -> DrogueOffsetMap<f64> {
    DrogueOffsetMap::new(V3::new(0.3, 0.0, -0.8), Matrix3::from_diagonal(&V3::new(-0.4, -0.6, -0.6)))
        .expect("default M1 is negative definite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Scenario::default_physical().validate().unwrap();
        Scenario::default_affine().validate().unwrap();
        Scenario::default_physical().without_disturbances().validate().unwrap();
    }

    #[test]
    fn rejects_bad_settings() {
        let mut s = Scenario::default_physical();
        s.campaign.dt = 0.05;
        assert!(matches!(s.validate(), Err(SimError::InvalidScenario(m)) if m.contains("dt")));

        let mut s = Scenario::default_physical();
        s.tilc.k_alpha.x = 1.0;
        assert!(matches!(s.validate(), Err(SimError::InvalidScenario(m)) if m.contains("0 <= k_alpha < 1")));

        let mut s = Scenario::default_physical();
        s.autopilot.k_i = -s.autopilot.k_i.clone();
        assert!(matches!(s.validate(), Err(SimError::InvalidScenario(m)) if m.contains("unstable")));
    }
}

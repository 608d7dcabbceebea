//! TOML scenario files.
//!
//! Every section is required and unknown keys are rejected. Matrices are
//! nested arrays of rows.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disturbances::{BowWaveSurrogate, DrogueOffsetMap, GustSpec, NoiseSpec};
use crate::hose::HoseParams;
use crate::receiver::{AutopilotGains, ReceiverLinearModel};
use crate::sim::{CampaignSettings, DisturbanceSettings, Scenario, SimError, Tier};
use crate::tilc::{validate_gains, TilcGains, TilcState};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub hose: HoseParams,
    pub receiver: ReceiverSection,
    pub autopilot: AutopilotSection,
    pub disturbances: DisturbanceSection,
    pub tilc: TilcSection,
    pub campaign: CampaignSettings,
}

/// Either the built-in velocity-lag receiver (`tau`, `mass`) or a full
/// state-space model (`a`, `b`, `g`, `c`, optional `x0`, `u0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<f64>>,
    /// Probe position at the trim state (m).
    pub p_pr0: [f64; 3],
}

/// Either a triple-pole design (`pole`, needs a velocity-lag receiver) or
/// explicit `k_p` (3×n) and `k_i` (3×3) matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutopilotSection {
    pub closure_speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pole: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_i: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub tier: Tier,
    pub b_dr: f64,
    pub b_pr: f64,
    pub turbulence_intensity: f64,
    pub turbulence_time_constant: f64,
    pub drogue_steady_force: [f64; 3],
    pub receiver_force_gain: [f64; 3],
    pub m0: [f64; 3],
    pub m1: Vec<Vec<f64>>,
    /// Accept a non-symmetric `m1` whose quadratic form is negative definite.
    #[serde(default)]
    pub allow_general_m1: bool,
    pub bow_wave: BowWaveSurrogate<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gust: Option<GustSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TilcSection {
    pub k_alpha: [f64; 3],
    pub k_p: [f64; 3],
    #[serde(default)]
    pub u_de_dr: [f64; 3],
    #[serde(default)]
    pub u_e_pr: [f64; 3],
}

impl TilcSection {
    pub fn gains(&self) -> TilcGains<f64> {
        TilcGains { k_alpha: Vector3::from(self.k_alpha), k_p: Vector3::from(self.k_p) }
    }
}

impl DisturbanceSection {
    pub fn m1_matrix(&self) -> Result<Matrix3<f64>, ConfigError> {
        let m = matrix("disturbances.m1", &self.m1)?;
        if m.shape() != (3, 3) {
            return Err(invalid("disturbances.m1", "must be 3×3"));
        }
        Ok(Matrix3::from_fn(|i, j| m[(i, j)]))
    }
}

fn matrix(key: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(invalid(key, "must be a non-empty rectangular array of rows"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(key, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario file serializes")
    }

    /// Builds and validates the scenario.
    pub fn into_scenario(&self) -> Result<Scenario, ConfigError> {
        self.hose.validate().map_err(|e| invalid("hose", e))?;
        let receiver = self.receiver_model()?;
        receiver.validate().map_err(|e| invalid("receiver", e))?;
        let autopilot = self.autopilot_gains()?;

        let d = &self.disturbances;
        d.bow_wave.validate().map_err(|e| invalid("disturbances.bow_wave", e))?;
        let m1 = d.m1_matrix()?;
        let m0 = Vector3::from(d.m0);
        let offset_map =
            if d.allow_general_m1 { DrogueOffsetMap::new_general(m0, m1) } else { DrogueOffsetMap::new(m0, m1) }
                .map_err(|e| invalid("disturbances.m1", e))?;

        let tilc = self.tilc.gains();
        if let Err(v) = validate_gains(&tilc) {
            let msgs: Vec<String> = v.iter().map(|g| g.to_string()).collect();
            return Err(invalid("tilc", msgs.join("; ")));
        }

        let scenario = Scenario {
            hose: self.hose,
            receiver,
            autopilot,
            disturbances: DisturbanceSettings {
                tier: d.tier,
                bow_wave: d.bow_wave,
                offset_map,
                noise: NoiseSpec {
                    b_dr: d.b_dr,
                    b_pr: d.b_pr,
                    turbulence_intensity: d.turbulence_intensity,
                    turbulence_time_constant: d.turbulence_time_constant,
                    gust: d.gust.unwrap_or_else(GustSpec::none),
                },
                drogue_steady_force: Vector3::from(d.drogue_steady_force),
                receiver_force_gain: Vector3::from(d.receiver_force_gain),
            },
            tilc,
            warm_start: TilcState {
                u_de_dr: Vector3::from(self.tilc.u_de_dr),
                u_e_pr: Vector3::from(self.tilc.u_e_pr),
                k: 0,
            },
            campaign: self.campaign,
        };
        scenario.validate().map_err(|e| match e {
            SimError::InvalidScenario(m) => match m.split_once(' ') {
                Some((key, rest)) if key.contains('.') => invalid(key, rest),
                _ => invalid("scenario", m),
            },
            other => invalid("scenario", other),
        })?;
        Ok(scenario)
    }

    fn receiver_model(&self) -> Result<ReceiverLinearModel, ConfigError> {
        let r = &self.receiver;
        let p_pr0 = Vector3::from(r.p_pr0);
        match (r.tau, r.mass, &r.a) {
            (Some(tau), Some(mass), None) => {
                if r.b.is_some() || r.g.is_some() || r.c.is_some() || r.x0.is_some() || r.u0.is_some() {
                    return Err(invalid("receiver", "state-space keys cannot be combined with tau/mass"));
                }
                if !(tau > 0.0) {
                    return Err(invalid("receiver.tau", "must be > 0"));
                }
                if !(mass > 0.0) {
                    return Err(invalid("receiver.mass", "must be > 0"));
                }
                Ok(ReceiverLinearModel::velocity_lag(tau, mass, p_pr0))
            }
            (None, None, Some(a)) => {
                let need = |key: &str, m: &Option<Vec<Vec<f64>>>| {
                    m.as_deref().ok_or_else(|| invalid(key, "required with receiver.a")).and_then(|m| matrix(key, m))
                };
                let a = matrix("receiver.a", a)?;
                let b = need("receiver.b", &r.b)?;
                let g = need("receiver.g", &r.g)?;
                let c = need("receiver.c", &r.c)?;
                let n = a.nrows();
                let x0 = DVector::from_vec(r.x0.clone().unwrap_or_else(|| vec![0.0; n]));
                let u0 = DVector::from_vec(r.u0.clone().unwrap_or_else(|| vec![0.0; b.ncols()]));
                Ok(ReceiverLinearModel { a, b, g, c, x0, u0, p_pr0 })
            }
            _ => Err(invalid("receiver", "give either tau and mass, or a state-space model a, b, g, c")),
        }
    }

    fn autopilot_gains(&self) -> Result<AutopilotGains, ConfigError> {
        let ap = &self.autopilot;
        let gains = match (ap.pole, &ap.k_p, &ap.k_i) {
            (Some(pole), None, None) => {
                let tau = self
                    .receiver
                    .tau
                    .ok_or_else(|| invalid("autopilot.pole", "needs a velocity-lag receiver (receiver.tau)"))?;
                if !(pole > 0.0) {
                    return Err(invalid("autopilot.pole", "must be > 0"));
                }
                AutopilotGains::triple_pole(tau, pole, ap.closure_speed)
            }
            (None, Some(k_p), Some(k_i)) => {
                AutopilotGains::new(matrix("autopilot.k_p", k_p)?, matrix("autopilot.k_i", k_i)?, ap.closure_speed)
            }
            _ => return Err(invalid("autopilot", "give either pole, or both k_p and k_i")),
        };
        gains.map_err(|e| invalid("autopilot.closure_speed", e))
    }

    /// File equivalent of [`Scenario::default_physical`].
    pub fn default_physical() -> Self {
        Self::from_scenario(&Scenario::default_physical(), Some(crate::sim::DEFAULT_AUTOPILOT_POLE))
    }

    /// Writes explicit gain matrices unless `pole` reproduces them.
    pub fn from_scenario(s: &Scenario, pole: Option<f64>) -> Self {
        let d = &s.disturbances;
        let tau = crate::sim::DEFAULT_RECEIVER_LAG;
        let lag = ReceiverLinearModel::velocity_lag(tau, crate::sim::DEFAULT_RECEIVER_MASS, s.receiver.p_pr0);
        let receiver = if lag == s.receiver {
            ReceiverSection {
                tau: Some(tau),
                mass: Some(crate::sim::DEFAULT_RECEIVER_MASS),
                a: None,
                b: None,
                g: None,
                c: None,
                x0: None,
                u0: None,
                p_pr0: s.receiver.p_pr0.into(),
            }
        } else {
            ReceiverSection {
                tau: None,
                mass: None,
                a: Some(rows_of(&s.receiver.a)),
                b: Some(rows_of(&s.receiver.b)),
                g: Some(rows_of(&s.receiver.g)),
                c: Some(rows_of(&s.receiver.c)),
                x0: Some(s.receiver.x0.iter().copied().collect()),
                u0: Some(s.receiver.u0.iter().copied().collect()),
                p_pr0: s.receiver.p_pr0.into(),
            }
        };
        let designed = pole
            .filter(|_| receiver.tau.is_some())
            .and_then(|p| AutopilotGains::triple_pole(tau, p, s.autopilot.closure_speed).ok())
            .filter(|g| *g == s.autopilot);
        let autopilot = match designed {
            Some(_) => AutopilotSection { closure_speed: s.autopilot.closure_speed, pole, k_p: None, k_i: None },
            None => AutopilotSection {
                closure_speed: s.autopilot.closure_speed,
                pole: None,
                k_p: Some(rows_of(&s.autopilot.k_p)),
                k_i: Some(rows_of(&s.autopilot.k_i)),
            },
        };
        let m1 = d.offset_map.m1;
        Self {
            hose: s.hose,
            receiver,
            autopilot,
            disturbances: DisturbanceSection {
                tier: d.tier,
                b_dr: d.noise.b_dr,
                b_pr: d.noise.b_pr,
                turbulence_intensity: d.noise.turbulence_intensity,
                turbulence_time_constant: d.noise.turbulence_time_constant,
                drogue_steady_force: d.drogue_steady_force.into(),
                receiver_force_gain: d.receiver_force_gain.into(),
                m0: d.offset_map.m0.into(),
                m1: (0..3).map(|i| (0..3).map(|j| m1[(i, j)]).collect()).collect(),
                allow_general_m1: false,
                bow_wave: d.bow_wave,
                gust: d.noise.gust.is_active().then_some(d.noise.gust),
            },
            tilc: TilcSection {
                k_alpha: s.tilc.k_alpha.into(),
                k_p: s.tilc.k_p.into(),
                u_de_dr: s.warm_start.u_de_dr.into(),
                u_e_pr: s.warm_start.u_e_pr.into(),
            },
            campaign: s.campaign,
        }
    }
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    ScenarioFile::load(path)?.into_scenario()
}

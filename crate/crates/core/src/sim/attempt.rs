//! One docking attempt: standby observation, reference, approach, contact and
//! learning update.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::seeds::{self, STREAM_DROGUE_TURBULENCE, STREAM_MEASUREMENT, STREAM_RECEIVER_TURBULENCE};
use super::{Scenario, SimError, Tier, V3};
use crate::disturbances::Turbulence;
use crate::geometry::{detect_terminal_time, docking_outcome, DockingSample, TerminalState};
use crate::hose::{drogue_position, hose_dynamics_step, solve_equilibrium, HoseState};
use crate::receiver::{terminal_tracking_error, Approach, Guidance, ReceiverLoop};
use crate::tilc::{compute_reference, record_attempt, AttemptRecord, TilcState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Standby,
    EquilibriumEstimated,
    ReferenceComputed,
    Approach,
    Contact,
    Timeout,
    LearningUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMark {
    pub phase: Phase,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub p_dr: V3,
    pub p_pr: V3,
}

/// Probe axial speed over the settled part of the approach (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    /// 1-based attempt index within the campaign.
    pub k: usize,
    pub seed: u64,
    pub tier: Tier,
    pub start_time: f64,
    pub p_dr_e0: V3,
    pub reference: V3,
    pub terminal_time: Option<f64>,
    pub p_dr_t: Option<V3>,
    pub p_pr_t: Option<V3>,
    pub radial_error: Option<f64>,
    pub success: bool,
    pub timed_out: bool,
    /// `û − p_pr(T)`.
    pub tracking_error: Option<V3>,
    pub closure: Option<ClosureStats>,
    pub tilc_before: TilcState<f64>,
    pub tilc_after: TilcState<f64>,
    /// `(v_dr, v_pr)` drawn by the affine tier.
    pub affine_noise: Option<(V3, V3)>,
    pub phases: Vec<PhaseMark>,
    pub trajectory: Vec<TrajectorySample>,
}

impl AttemptLog {
    /// `p_dr(T) − p_pr(T)`.
    pub fn docking_error(&self) -> Option<V3> {
        Some(self.p_dr_t? - self.p_pr_t?)
    }

    /// `p_dr_e0 + u_de_dr − p_pr(T)` with the offset estimate the attempt flew with.
    pub fn probe_error(&self) -> Option<V3> {
        Some(self.p_dr_e0 + self.tilc_before.u_de_dr - self.p_pr_t?)
    }
}

/// Time average of drogue positions sampled every `dt` seconds; at least one
/// second of samples is required.
pub fn estimate_equilibrium(positions: &[V3], dt: f64) -> Result<V3, SimError> {
    let span = positions.len() as f64 * dt;
    if positions.is_empty() || span < 1.0 - 1e-9 {
        return Err(SimError::InsufficientSamples(span));
    }
    Ok(positions.iter().sum::<V3>() / positions.len() as f64)
}

/// Flies attempt `k` (1-based) from `state`. A timeout is an error here;
/// campaigns log it as a failed attempt instead.
pub fn run_docking_attempt(
    scenario: &Scenario,
    state: &TilcState<f64>,
    k: usize,
    seed: u64,
) -> Result<AttemptLog, SimError> {
    let log = fly(scenario, state, k, seed)?;
    if log.timed_out {
        return Err(SimError::Timeout { attempt: k, limit: scenario.campaign.max_attempt_duration });
    }
    Ok(log)
}

pub(super) fn fly(scenario: &Scenario, state: &TilcState<f64>, k: usize, seed: u64) -> Result<AttemptLog, SimError> {
    match scenario.disturbances.tier {
        Tier::Physical => fly_physical(scenario, state, k, seed),
        Tier::Affine => fly_affine(scenario, state, k, seed),
    }
}

pub(super) fn attempt_start(scenario: &Scenario, k: usize) -> f64 {
    let c = &scenario.campaign;
    c.first_attempt_time + (k.saturating_sub(1)) as f64 * c.attempt_interval
}

struct Flight<'a> {
    sc: &'a Scenario,
    hose: HoseState,
    rx: ReceiverLoop,
    turb_dr: Turbulence,
    turb_rc: Turbulence,
    t0: f64,
    steps: u64,
    p_dr: V3,
    p_pr: V3,
}

impl Flight<'_> {
    fn t(&self) -> f64 {
        self.t0 + self.steps as f64 * self.sc.campaign.dt
    }

    fn advance(&mut self, guidance: &Guidance) -> Result<(), SimError> {
        let sc = self.sc;
        let d = &sc.disturbances;
        let dt = sc.campaign.dt;
        let t = self.t();
        let gust = d.noise.gust.velocity(t);
        let wind = sc.hose.freestream() + gust + self.turb_dr.current();
        let f_r = d.receiver_force_gain.component_mul(&(gust + self.turb_rc.current()));
        let f_bow = d.bow_wave.force(&(self.p_dr - self.p_pr));
        self.hose = hose_dynamics_step(&self.hose, &sc.hose, &d.drogue_steady_force, &f_bow, &wind, dt)?;
        self.rx.step(&sc.receiver, &sc.autopilot, guidance, t, &f_r, dt)?;
        self.turb_dr.sample(dt);
        self.turb_rc.sample(dt);
        self.steps += 1;
        self.p_dr = drogue_position(&self.hose, &sc.hose);
        self.p_pr = self.rx.probe_position(&sc.receiver);
        Ok(())
    }

    fn sample(&self) -> TrajectorySample {
        TrajectorySample { t: self.t(), p_dr: self.p_dr, p_pr: self.p_pr }
    }
}

fn fly_physical(sc: &Scenario, state: &TilcState<f64>, k: usize, seed: u64) -> Result<AttemptLog, SimError> {
    let c = &sc.campaign;
    let d = &sc.disturbances;
    let t0 = attempt_start(sc, k);
    let noise = &d.noise;
    let mean_wind = sc.hose.freestream() + noise.gust.velocity(t0);
    let (hose, p_eq) = solve_equilibrium(&sc.hose, &d.drogue_steady_force, &mean_wind)?;
    let standby = p_eq - V3::new(c.standby_offset, 0.0, 0.0);
    let turbulence = |stream| {
        Turbulence::new(seeds::stream_seed(seed, stream), noise.turbulence_intensity, noise.turbulence_time_constant)
    };
    let mut f = Flight {
        sc,
        hose,
        rx: ReceiverLoop::at_position(&sc.receiver, &standby),
        turb_dr: turbulence(STREAM_DROGUE_TURBULENCE),
        turb_rc: turbulence(STREAM_RECEIVER_TURBULENCE),
        t0,
        steps: 0,
        p_dr: p_eq,
        p_pr: standby,
    };
    f.p_pr = f.rx.probe_position(&sc.receiver);

    let mut phases = vec![PhaseMark { phase: Phase::Standby, t: t0 }];
    let mut trajectory = vec![f.sample()];

    let hold = Guidance::hold(standby);
    let n_standby = (c.standby_duration / c.dt).round() as usize;
    let n_obs = ((c.observation_window / c.dt).round() as usize).min(n_standby);
    let mut observed = Vec::with_capacity(n_obs);
    for i in 0..n_standby {
        f.advance(&hold)?;
        trajectory.push(f.sample());
        if i + n_obs >= n_standby {
            observed.push(f.p_dr);
        }
    }
    let p_dr_e0 = estimate_equilibrium(&observed, c.dt)?;
    phases.push(PhaseMark { phase: Phase::EquilibriumEstimated, t: f.t() });
    let reference = compute_reference(&p_dr_e0, state);
    phases.push(PhaseMark { phase: Phase::ReferenceComputed, t: f.t() });

    let t_app = f.t();
    phases.push(PhaseMark { phase: Phase::Approach, t: t_app });
    let approach = Guidance {
        target: reference,
        approach: Some(Approach { start_x: f.p_pr.x, start_time: t_app, speed: sc.autopilot.closure_speed }),
    };
    let mut docking = vec![DockingSample { t: t_app, p_dr: f.p_dr, p_pr: f.p_pr }];
    let mut speeds = Vec::new();
    let n_max = (c.max_attempt_duration / c.dt).ceil() as usize;
    let mut contact = false;
    for _ in 0..n_max {
        f.advance(&approach)?;
        trajectory.push(f.sample());
        if f.t() - t_app >= c.closure_settle_time {
            speeds.push(f.rx.probe_velocity(&sc.receiver).x);
        }
        let s = DockingSample { t: f.t(), p_dr: f.p_dr, p_pr: f.p_pr };
        docking.push(s);
        if s.axial_gap() <= 0.0 {
            contact = true;
            break;
        }
    }

    let closure = (!speeds.is_empty()).then(|| ClosureStats {
        min: speeds.iter().copied().fold(f64::INFINITY, f64::min),
        max: speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: speeds.iter().sum::<f64>() / speeds.len() as f64,
    });

    let mut log = AttemptLog {
        k,
        seed,
        tier: Tier::Physical,
        start_time: t0,
        p_dr_e0,
        reference,
        terminal_time: None,
        p_dr_t: None,
        p_pr_t: None,
        radial_error: None,
        success: false,
        timed_out: !contact,
        tracking_error: None,
        closure,
        tilc_before: *state,
        tilc_after: *state,
        affine_noise: None,
        phases,
        trajectory: Vec::new(),
    };
    if contact {
        let terminal = detect_terminal_time(&docking)?;
        finish(sc, &mut log, &terminal, None)?;
    } else {
        log.phases.push(PhaseMark { phase: Phase::Timeout, t: f.t() });
    }
    log.trajectory = decimate(&trajectory, c.decimation, log.terminal_time, c.terminal_window);
    Ok(log)
}

/// Outcome, tracking error and learning update once the terminal state is known.
fn finish(
    sc: &Scenario,
    log: &mut AttemptLog,
    terminal: &TerminalState<f64>,
    pr_bound: Option<f64>,
) -> Result<(), SimError> {
    let outcome = docking_outcome(terminal, sc.campaign.r_c)?;
    log.terminal_time = Some(outcome.terminal_time);
    log.p_dr_t = Some(outcome.p_dr_t);
    log.p_pr_t = Some(outcome.p_pr_t);
    log.radial_error = Some(outcome.radial_error);
    log.success = outcome.success;
    log.tracking_error = Some(terminal_tracking_error(&log.reference, &outcome.p_pr_t, pr_bound)?);
    log.phases.push(PhaseMark { phase: Phase::Contact, t: outcome.terminal_time });
    let record = AttemptRecord {
        p_dr_e0: log.p_dr_e0,
        p_dr_t: outcome.p_dr_t,
        p_pr_t: outcome.p_pr_t,
        t: outcome.terminal_time,
    };
    log.tilc_after = record_attempt(&log.tilc_before, &record, &sc.tilc);
    log.phases.push(PhaseMark { phase: Phase::LearningUpdate, t: outcome.terminal_time });
    Ok(())
}

fn decimate(traj: &[TrajectorySample], every: usize, terminal: Option<f64>, window: f64) -> Vec<TrajectorySample> {
    let last = traj.len().saturating_sub(1);
    traj.iter()
        .enumerate()
        .filter(|(i, s)| *i % every == 0 || *i == last || terminal.is_some_and(|t| s.t >= t - window))
        .map(|(_, s)| *s)
        .collect()
}

fn ball(rng: &mut ChaCha8Rng, radius: f64) -> V3 {
    if radius == 0.0 {
        return V3::zeros();
    }
    let dir = loop {
        let v = Vector3::<f64>::from_fn(|_, _| rng.sample(StandardNormal));
        if let Some(u) = v.try_normalize(1e-12) {
            break u;
        }
    };
    dir * (radius * rng.random::<f64>().cbrt())
}

fn fly_affine(sc: &Scenario, state: &TilcState<f64>, k: usize, seed: u64) -> Result<AttemptLog, SimError> {
    let c = &sc.campaign;
    let d = &sc.disturbances;
    let t0 = attempt_start(sc, k);
    let mean_wind = sc.hose.freestream() + d.noise.gust.velocity(t0);
    let (_, p_dr_e0) = solve_equilibrium(&sc.hose, &d.drogue_steady_force, &mean_wind)?;
    let standby = p_dr_e0 - V3::new(c.standby_offset, 0.0, 0.0);
    let t_app = t0 + c.standby_duration;
    let mut phases =
        vec![PhaseMark { phase: Phase::Standby, t: t0 }, PhaseMark { phase: Phase::EquilibriumEstimated, t: t_app }];
    let reference = compute_reference(&p_dr_e0, state);
    phases.push(PhaseMark { phase: Phase::ReferenceComputed, t: t_app });
    phases.push(PhaseMark { phase: Phase::Approach, t: t_app });

    let mut rng = ChaCha8Rng::seed_from_u64(seeds::stream_seed(seed, STREAM_MEASUREMENT));
    let v_dr = ball(&mut rng, d.noise.b_dr);
    let v_pr = ball(&mut rng, d.noise.b_pr);

    // Terminal positions solve p_dr = p_e0 + m0 + M1·(p_dr − p_pr) + v_dr
    // with p_pr = û − v_pr.
    let map = &d.offset_map;
    let p_pr_t = reference - v_pr;
    let lhs = Matrix3::identity() - map.m1;
    let rhs = p_dr_e0 + map.m0 + v_dr - p_pr_t;
    let dp = lhs.lu().solve(&rhs).ok_or_else(|| SimError::InvalidScenario("I − M1 is singular".into()))?;
    // Slack covers rounding in `û − (û − v_pr)`.
    let slack = 1.0 + 1e-9;
    let p_dr_t = p_dr_e0 + map.terminal_offset(&dp, &v_dr, d.noise.b_dr * slack)?;
    let t_end = t_app + c.standby_offset / sc.autopilot.closure_speed;

    let mut log = AttemptLog {
        k,
        seed,
        tier: Tier::Affine,
        start_time: t0,
        p_dr_e0,
        reference,
        terminal_time: None,
        p_dr_t: None,
        p_pr_t: None,
        radial_error: None,
        success: false,
        timed_out: false,
        tracking_error: None,
        closure: Some(ClosureStats {
            min: sc.autopilot.closure_speed,
            max: sc.autopilot.closure_speed,
            mean: sc.autopilot.closure_speed,
        }),
        tilc_before: *state,
        tilc_after: *state,
        affine_noise: Some((v_dr, v_pr)),
        phases,
        trajectory: Vec::new(),
    };
    let terminal = TerminalState { t: t_end, p_dr: p_dr_t, p_pr: p_pr_t };
    finish(sc, &mut log, &terminal, Some(d.noise.b_pr * slack))?;

    // Straight-line stand-in trajectory for plotting.
    let n = 20;
    log.trajectory.push(TrajectorySample { t: t0, p_dr: p_dr_e0, p_pr: standby });
    for i in 0..=n {
        let s = i as f64 / n as f64;
        log.trajectory.push(TrajectorySample {
            t: t_app + s * (t_end - t_app),
            p_dr: p_dr_e0 + (p_dr_t - p_dr_e0) * s,
            p_pr: standby + (p_pr_t - standby) * s,
        });
    }
    Ok(log)
}

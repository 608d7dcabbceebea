//! Linearized receiver translational dynamics and the PI tracking autopilot.
//!
//! All loop quantities are deviations from the trim point. The probe position
//! is `p_pr = p_pr0 + C·Δx`.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::integrator::rk4_step;
use crate::linalg::{eigenvalues, spectral_abscissa, LinalgError};

type V3 = Vector3<f64>;

pub const MAX_STEP: f64 = 0.02;
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Accepted closure speed range (m/s).
pub const CLOSURE_SPEED_RANGE: (f64, f64) = (0.5, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReceiverError {
    #[error("receiver state diverged (|x| > {DIVERGENCE_LIMIT:e})")]
    NumericalDivergence,
    #[error("integration step {0} outside (0, {MAX_STEP}]")]
    InvalidStep(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("closure speed {0} m/s outside [0.5, 1.0]")]
    ClosureSpeed(f64),
    #[error("terminal tracking error {norm} m exceeds declared bound {bound} m")]
    BoundViolation { norm: f64, bound: f64 },
    #[error(transparent)]
    Eigen(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverLinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub u0: DVector<f64>,
    pub p_pr0: V3,
}

impl ReceiverLinearModel {
    /// Per-axis point mass whose velocity follows the command through a
    /// first-order lag `tau`; disturbance forces act through `1/mass`.
    /// State order is `[p; v]`.
    pub fn velocity_lag(tau: f64, mass: f64, p_pr0: V3) -> Self {
        let mut a = DMatrix::zeros(6, 6);
        let mut b = DMatrix::zeros(6, 3);
        let mut g = DMatrix::zeros(6, 3);
        let mut c = DMatrix::zeros(3, 6);
        for i in 0..3 {
            a[(i, i + 3)] = 1.0;
            a[(i + 3, i + 3)] = -1.0 / tau;
            b[(i + 3, i)] = 1.0 / tau;
            g[(i + 3, i)] = 1.0 / mass;
            c[(i, i)] = 1.0;
        }
        Self { a, b, g, c, x0: DVector::zeros(6), u0: DVector::zeros(3), p_pr0 }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<(), ReceiverError> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        let checks = [
            (self.a.ncols() == n, "A must be square"),
            (self.b.nrows() == n, "B must have n rows"),
            (self.g.shape() == (n, 3), "G must be n×3"),
            (self.c.shape() == (3, n), "C must be 3×n"),
            (self.x0.len() == n, "x0 must have n entries"),
            (self.u0.len() == m, "u0 must have m entries"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(ReceiverError::Dimension(msg.into()));
            }
        }
        Ok(())
    }

    pub fn probe_position(&self, dx: &DVector<f64>) -> V3 {
        let y = &self.c * dx;
        self.p_pr0 + V3::new(y[0], y[1], y[2])
    }

    pub fn probe_velocity(&self, dx: &DVector<f64>, du: &DVector<f64>) -> V3 {
        let y = &self.c * (&self.a * dx + &self.b * du);
        V3::new(y[0], y[1], y[2])
    }

    /// State deviation that places the probe at `r` moving with `r_dot`.
    /// Uses minimum-norm inverses of the position map `C` and the velocity
    /// map `C·A`.
    pub fn reference_state(&self, r: &V3, r_dot: &V3) -> DVector<f64> {
        let pos = DVector::from_column_slice((r - self.p_pr0).as_slice());
        let vel = DVector::from_column_slice(r_dot.as_slice());
        let mut x = min_norm_solve(&self.c, &pos);
        let ca = &self.c * &self.a;
        // Velocity slots are those the position map does not touch.
        let residual = &vel - &ca * &x;
        x += min_norm_solve(&ca, &residual);
        x
    }
}

fn min_norm_solve(m: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mmt = m * m.transpose();
    match mmt.clone().cholesky() {
        Some(ch) => m.transpose() * ch.solve(y),
        None => DVector::zeros(m.ncols()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutopilotGains {
    pub k_p: DMatrix<f64>,
    pub k_i: DMatrix<f64>,
    /// Integrator clamp per axis (m·s).
    pub clamp: V3,
    /// m/s
    pub closure_speed: f64,
}

impl AutopilotGains {
    /// Clamp levels follow from the closure speed: `c_i = v_close / |K_I,ii|`.
    pub fn new(k_p: DMatrix<f64>, k_i: DMatrix<f64>, closure_speed: f64) -> Result<Self, ReceiverError> {
        let (lo, hi) = CLOSURE_SPEED_RANGE;
        if !(lo..=hi).contains(&closure_speed) {
            return Err(ReceiverError::ClosureSpeed(closure_speed));
        }
        if k_i.shape() != (k_p.nrows(), 3) {
            return Err(ReceiverError::Dimension("K_I must be m×3".into()));
        }
        let mut clamp = V3::repeat(f64::INFINITY);
        for i in 0..3.min(k_i.nrows()) {
            let k = k_i[(i, i)].abs();
            if k > 0.0 {
                clamp[i] = closure_speed / k;
            }
        }
        Ok(Self { k_p, k_i, clamp, closure_speed })
    }

    /// Per-axis gains `[k_p, k_v]` with integral gain `k_i` for the
    /// `[p; v]` state layout.
    pub fn per_axis(k_pos: f64, k_vel: f64, k_int: f64, closure_speed: f64) -> Result<Self, ReceiverError> {
        let mut k_p = DMatrix::zeros(3, 6);
        for i in 0..3 {
            k_p[(i, i)] = k_pos;
            k_p[(i, i + 3)] = k_vel;
        }
        Self::new(k_p, DMatrix::identity(3, 3) * k_int, closure_speed)
    }

    /// Triple closed-loop pole at `-pole` for the velocity-lag model.
    pub fn triple_pole(tau: f64, pole: f64, closure_speed: f64) -> Result<Self, ReceiverError> {
        let k_vel = 3.0 * pole * tau - 1.0;
        let k_pos = 3.0 * pole * pole * tau;
        let k_int = pole.powi(3) * tau;
        Self::per_axis(k_pos, k_vel, k_int, closure_speed)
    }

    pub fn validate_for(&self, model: &ReceiverLinearModel) -> Result<(), ReceiverError> {
        if self.k_p.shape() != (model.n_inputs(), model.n_states()) {
            return Err(ReceiverError::Dimension("K_P must be m×n".into()));
        }
        if self.k_i.shape() != (model.n_inputs(), 3) {
            return Err(ReceiverError::Dimension("K_I must be m×3".into()));
        }
        Ok(())
    }
}

/// One RK4 step of `Δẋ = A·Δx + B·Δu + G·F_r` with inputs held over the step.
pub fn receiver_step(
    dx: &DVector<f64>,
    du: &DVector<f64>,
    f_r: &V3,
    dt: f64,
    model: &ReceiverLinearModel,
) -> Result<DVector<f64>, ReceiverError> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(ReceiverError::InvalidStep(dt));
    }
    propagate(dx, du, f_r, dt, model)
}

fn propagate(
    dx: &DVector<f64>,
    du: &DVector<f64>,
    f_r: &V3,
    dt: f64,
    model: &ReceiverLinearModel,
) -> Result<DVector<f64>, ReceiverError> {
    let forcing = &model.b * du + &model.g * f_r;
    let next = rk4_step(0.0, dx.as_slice(), dt, |_, y, dy| {
        let y = DVector::from_column_slice(y);
        let d = &model.a * y + &forcing;
        dy.copy_from_slice(d.as_slice());
    });
    if next.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        return Err(ReceiverError::NumericalDivergence);
    }
    Ok(DVector::from_vec(next))
}

pub fn saturate(e_i: &V3, clamp: &V3) -> V3 {
    e_i.zip_map(clamp, |e, c| e.clamp(-c, c))
}

/// `Δu = −K_P·Δx − K_I·sat(e_I)`.
pub fn autopilot_control(dx: &DVector<f64>, e_i: &V3, gains: &AutopilotGains) -> DVector<f64> {
    let sat = saturate(e_i, &gains.clamp);
    -(&gains.k_p * dx) - &gains.k_i * DVector::from_column_slice(sat.as_slice())
}

/// Integrates `p_pr − û` and clamps the result.
pub fn integrator_update(e_i: &V3, p_pr: &V3, u_hat: &V3, dt: f64, gains: &AutopilotGains) -> V3 {
    saturate(&(e_i + (p_pr - u_hat) * dt), &gains.clamp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    pub spectral_abscissa: f64,
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Closed loop with the integrator states appended:
/// `d/dt [Δx; e] = [[A − B·K_P, −B·K_I], [C, 0]]·[Δx; e]`.
pub fn closed_loop_matrix(model: &ReceiverLinearModel, gains: &AutopilotGains) -> DMatrix<f64> {
    let n = model.n_states();
    let mut m = DMatrix::zeros(n + 3, n + 3);
    m.view_mut((0, 0), (n, n)).copy_from(&(&model.a - &model.b * &gains.k_p));
    m.view_mut((0, n), (n, 3)).copy_from(&(-&model.b * &gains.k_i));
    m.view_mut((n, 0), (3, n)).copy_from(&model.c);
    m
}

pub fn stability_check(model: &ReceiverLinearModel, gains: &AutopilotGains) -> Result<StabilityReport, ReceiverError> {
    model.validate()?;
    gains.validate_for(model)?;
    let m = closed_loop_matrix(model, gains);
    let abscissa = spectral_abscissa(&m)?;
    let eigenvalues = eigenvalues(&m)?.into_iter().map(|z| (z.re, z.im)).collect();
    Ok(StabilityReport { stable: abscissa < 0.0, spectral_abscissa: abscissa, eigenvalues })
}

/// `v_pr = û(T) − p_pr(T)`, checked against a declared bound when present.
pub fn terminal_tracking_error(u_hat_t: &V3, p_pr_t: &V3, bound: Option<f64>) -> Result<V3, ReceiverError> {
    let v = u_hat_t - p_pr_t;
    if let Some(b) = bound {
        if v.norm() > b {
            return Err(ReceiverError::BoundViolation { norm: v.norm(), bound: b });
        }
    }
    Ok(v)
}

/// Reference trajectory handed to the autopilot. Lateral and vertical axes
/// hold the target; during an approach the axial reference advances from
/// `start_x` at the closure speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guidance {
    pub target: V3,
    pub approach: Option<Approach>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approach {
    pub start_x: f64,
    pub start_time: f64,
    pub speed: f64,
}

impl Guidance {
    pub fn hold(target: V3) -> Self {
        Self { target, approach: None }
    }

    pub fn reference(&self, t: f64) -> (V3, V3) {
        match self.approach {
            None => (self.target, V3::zeros()),
            Some(a) => {
                let mut r = self.target;
                r.x = a.start_x + a.speed * (t - a.start_time).max(0.0);
                (r, V3::new(a.speed, 0.0, 0.0))
            }
        }
    }
}

/// Mutable loop state of one receiver during a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverLoop {
    pub dx: DVector<f64>,
    pub e_i: V3,
    pub du: DVector<f64>,
}

impl ReceiverLoop {
    pub fn at_rest(model: &ReceiverLinearModel) -> Self {
        Self { dx: DVector::zeros(model.n_states()), e_i: V3::zeros(), du: DVector::zeros(model.n_inputs()) }
    }

    /// Starts at rest on the given probe position.
    pub fn at_position(model: &ReceiverLinearModel, p: &V3) -> Self {
        let mut s = Self::at_rest(model);
        s.dx = model.reference_state(p, &V3::zeros());
        s
    }

    pub fn probe_position(&self, model: &ReceiverLinearModel) -> V3 {
        model.probe_position(&self.dx)
    }

    pub fn probe_velocity(&self, model: &ReceiverLinearModel) -> V3 {
        model.probe_velocity(&self.dx, &self.du)
    }

    /// Control from the current state, receiver step, then integrator update.
    pub fn step(
        &mut self,
        model: &ReceiverLinearModel,
        gains: &AutopilotGains,
        guidance: &Guidance,
        t: f64,
        f_r: &V3,
        dt: f64,
    ) -> Result<(), ReceiverError> {
        let (r, r_dot) = guidance.reference(t);
        let x_ref = model.reference_state(&r, &r_dot);
        self.du = autopilot_control(&(&self.dx - x_ref), &self.e_i, gains);
        let p = self.probe_position(model);
        self.dx = receiver_step(&self.dx, &self.du, f_r, dt, model)?;
        self.e_i = integrator_update(&self.e_i, &p, &r, dt, gains);
        Ok(())
    }
}

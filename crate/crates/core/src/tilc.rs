//! Terminal iterative learning controller.
//!
//! Each attempt aims at one fixed point `û = p_dr_e0 + u_de_dr + u_e_pr`.
//! Between attempts the drogue-offset estimate is low-pass filtered and the
//! probe compensation integrates the terminal probe error.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::scalar::{to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TilcGains<T: Real> {
    /// Diagonal of K_α.
    pub k_alpha: Vector3<T>,
    /// Diagonal of K_p.
    pub k_p: Vector3<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainViolation {
    Alpha { axis: usize, value: f64 },
    Probe { axis: usize, value: f64 },
}

impl fmt::Display for GainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Alpha { axis, value } => {
                write!(f, "k_alpha[{axis}] = {value} violates 0 <= k_alpha < 1")
            }
            Self::Probe { axis, value } => write!(f, "k_p[{axis}] = {value} violates 0 < k_p <= 1"),
        }
    }
}

impl<T: Real> TilcGains<T> {
    pub fn uniform(k_alpha: T, k_p: T) -> Self {
        Self { k_alpha: Vector3::repeat(k_alpha), k_p: Vector3::repeat(k_p) }
    }

    pub fn k_alpha_matrix(&self) -> Matrix3<T> {
        Matrix3::from_diagonal(&self.k_alpha)
    }

    pub fn k_p_matrix(&self) -> Matrix3<T> {
        Matrix3::from_diagonal(&self.k_p)
    }
}

/// Checks `0 ≤ kα_i < 1` and `0 < kp_i ≤ 1` on every axis.
pub fn validate_gains<T: Real>(g: &TilcGains<T>) -> Result<(), Vec<GainViolation>> {
    let mut bad = Vec::new();
    for i in 0..3 {
        let a = g.k_alpha[i];
        if !(a >= T::zero() && a < T::one()) {
            bad.push(GainViolation::Alpha { axis: i, value: to_f64(a) });
        }
        let p = g.k_p[i];
        if !(p > T::zero() && p <= T::one()) {
            bad.push(GainViolation::Probe { axis: i, value: to_f64(p) });
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TilcState<T: Real> {
    /// Drogue-offset estimate u_de_dr (m).
    pub u_de_dr: Vector3<T>,
    /// Probe-error compensation u_e_pr (m).
    pub u_e_pr: Vector3<T>,
    /// Attempts recorded so far.
    pub k: u64,
}

impl<T: Real> Default for TilcState<T> {
    fn default() -> Self {
        Self::warm_start(Vector3::zeros(), Vector3::zeros())
    }
}

impl<T: Real> TilcState<T> {
    pub fn warm_start(u_de_dr: Vector3<T>, u_e_pr: Vector3<T>) -> Self {
        Self { u_de_dr, u_e_pr, k: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord<T: Real> {
    pub p_dr_e0: Vector3<T>,
    pub p_dr_t: Vector3<T>,
    pub p_pr_t: Vector3<T>,
    pub t: T,
}

pub fn compute_reference<T: Real>(p_dr_e0: &Vector3<T>, s: &TilcState<T>) -> Vector3<T> {
    p_dr_e0 + s.u_de_dr + s.u_e_pr
}

/// `K_α·u_de_dr + (I − K_α)·(p_dr_T − p_dr_e0)`.
pub fn update_offset_estimate<T: Real>(s: &TilcState<T>, rec: &AttemptRecord<T>, g: &TilcGains<T>) -> Vector3<T> {
    let offset = rec.p_dr_t - rec.p_dr_e0;
    Vector3::from_fn(|i, _| g.k_alpha[i] * s.u_de_dr[i] + (T::one() - g.k_alpha[i]) * offset[i])
}

/// `u_e_pr + K_p·(p_dr_e0 + u_de_dr − p_pr_T)`, where `s` is the state the
/// attempt was flown with, so `u_de_dr` is the estimate that built its
/// reference.
pub fn update_probe_compensation<T: Real>(s: &TilcState<T>, rec: &AttemptRecord<T>, g: &TilcGains<T>) -> Vector3<T> {
    let e_pr = rec.p_dr_e0 + s.u_de_dr - rec.p_pr_t;
    s.u_e_pr + g.k_p.component_mul(&e_pr)
}

/// Offset update, then probe compensation, both from the attempt's own state;
/// increments the counter.
pub fn record_attempt<T: Real>(s: &TilcState<T>, rec: &AttemptRecord<T>, g: &TilcGains<T>) -> TilcState<T> {
    TilcState { u_de_dr: update_offset_estimate(s, rec, g), u_e_pr: update_probe_compensation(s, rec, g), k: s.k + 1 }
}

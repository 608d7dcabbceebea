//! Tanker-frame positions, docking error, terminal-time detection and the
//! capture criterion.
//!
//! Frame convention: origin at the hose root on the tanker, `x` forward along
//! the flight direction, `y` to the right, `z` down.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Position (m) or force (N) expressed in the tanker joint frame.
pub type Vec3<T> = Vector3<T>;

/// Residual axial separation tolerated at the detected terminal instant (m).
pub const CONTACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("probe never reached the drogue plane in the trajectory")]
    NoContact,
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(&'static str),
    #[error("criterion radius must be positive, got {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DockingSample<T: Real> {
    pub t: T,
    pub p_dr: Vec3<T>,
    pub p_pr: Vec3<T>,
}

impl<T: Real> DockingSample<T> {
    pub fn axial_gap(&self) -> T {
        self.p_dr.x - self.p_pr.x
    }
}

/// Contact instant and both positions at that instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalState<T: Real> {
    pub t: T,
    pub p_dr: Vec3<T>,
    pub p_pr: Vec3<T>,
}

impl<T: Real> TerminalState<T> {
    pub fn error(&self) -> Vec3<T> {
        position_error(&self.p_dr, &self.p_pr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DockingOutcome<T: Real> {
    pub terminal_time: T,
    pub p_dr_t: Vec3<T>,
    pub p_pr_t: Vec3<T>,
    pub radial_error: T,
    pub success: bool,
}

/// Drogue position minus probe position.
pub fn position_error<T: Real>(p_dr: &Vec3<T>, p_pr: &Vec3<T>) -> Vec3<T> {
    p_dr - p_pr
}

/// Miss distance in the plane normal to the flight direction; `x` is ignored.
pub fn radial_error<T: Real>(dp: &Vec3<T>) -> T {
    dp.y.hypot(dp.z)
}

/// Finds the first instant the axial gap reaches zero, interpolating linearly
/// between samples when the crossing falls inside a step.
pub fn detect_terminal_time<T: Real>(traj: &[DockingSample<T>]) -> Result<TerminalState<T>, GeometryError> {
    if traj.len() < 2 {
        return Err(GeometryError::InvalidTrajectory("need at least two samples"));
    }
    if traj[0].axial_gap() <= T::zero() {
        return Err(GeometryError::InvalidTrajectory("probe must start behind the drogue"));
    }
    for w in traj.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.t < a.t {
            return Err(GeometryError::InvalidTrajectory("time must be non-decreasing"));
        }
        let gb = b.axial_gap();
        if gb > T::zero() {
            continue;
        }
        if gb == T::zero() {
            return Ok(TerminalState { t: b.t, p_dr: b.p_dr, p_pr: b.p_pr });
        }
        let ga = a.axial_gap();
        let frac = ga / (ga - gb);
        return Ok(TerminalState {
            t: a.t + frac * (b.t - a.t),
            p_dr: a.p_dr + (b.p_dr - a.p_dr) * frac,
            p_pr: a.p_pr + (b.p_pr - a.p_pr) * frac,
        });
    }
    Err(GeometryError::NoContact)
}

/// Applies the capture criterion `radial error < r_c` (strict).
pub fn docking_outcome<T: Real>(terminal: &TerminalState<T>, r_c: T) -> Result<DockingOutcome<T>, GeometryError> {
    if !(r_c > T::zero()) {
        return Err(GeometryError::InvalidThreshold(crate::scalar::to_f64(r_c)));
    }
    let radial = radial_error(&terminal.error());
    Ok(DockingOutcome {
        terminal_time: terminal.t,
        p_dr_t: terminal.p_dr,
        p_pr_t: terminal.p_pr,
        radial_error: radial,
        success: radial < r_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    fn sample(t: f64, gap: f64) -> DockingSample<f64> {
        DockingSample { t, p_dr: v(0.0, 0.1, 10.0), p_pr: v(-gap, 0.0, 10.0) }
    }

    #[test]
    fn position_error_cases() {
        assert_eq!(position_error(&v(0.0, 0.0, 0.0), &v(0.0, 0.0, 0.0)), v(0.0, 0.0, 0.0));
        assert_eq!(position_error(&v(1.0, 2.0, 3.0), &v(1.0, 2.0, 3.0)), v(0.0, 0.0, 0.0));
        let e = position_error(&v(-16.0, 0.3, 6.0), &v(-17.0, 0.0, 5.6));
        assert!((e - v(1.0, 0.3, 0.4)).norm() < 1e-12);
    }

    #[test]
    fn radial_error_cases() {
        assert_eq!(radial_error(&v(5.0, 0.0, 0.0)), 0.0);
        assert!((radial_error(&v(0.0, 0.3, 0.4)) - 0.5).abs() < 1e-15);
        assert!((radial_error(&v(1.0, 0.15, 0.0)) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn exact_zero_sample_is_terminal() {
        let traj: Vec<_> = (0..=20)
            .map(|i| {
                let t = 70.0 + 0.05 * i as f64;
                sample(t, 0.75 * (71.0 - t))
            })
            .collect();
        let term = detect_terminal_time(&traj).unwrap();
        assert_eq!(term.t, 71.0);
    }

    #[test]
    fn interpolated_crossing() {
        let traj = vec![sample(1.0, 0.2), sample(1.1, -0.2)];
        let term = detect_terminal_time(&traj).unwrap();
        assert!((term.t - 1.05).abs() < 1e-12);
        assert!((term.p_dr.x - term.p_pr.x).abs() < CONTACT_TOLERANCE);
    }

    #[test]
    fn no_crossing_is_no_contact() {
        let traj = vec![sample(0.0, 1.0), sample(1.0, 0.5), sample(2.0, 0.1)];
        assert_eq!(detect_terminal_time(&traj), Err(GeometryError::NoContact));
    }

    #[test]
    fn first_crossing_wins_over_later_ones() {
        let traj = vec![sample(0.0, 1.0), sample(1.0, -0.5), sample(2.0, 0.5), sample(3.0, -1.0)];
        let term = detect_terminal_time(&traj).unwrap();
        assert!((term.t - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_preconditions() {
        assert!(detect_terminal_time(&[sample(0.0, 1.0)]).is_err());
        assert!(detect_terminal_time(&[sample(0.0, -1.0), sample(1.0, -2.0)]).is_err());
    }

    #[test]
    fn outcome_strict_threshold() {
        let mk = |dy: f64| TerminalState { t: 71.0, p_dr: v(0.0, dy, 10.0), p_pr: v(0.0, 0.0, 10.0) };
        assert!(!docking_outcome(&mk(0.5), 0.15).unwrap().success);
        assert!(docking_outcome(&mk(0.0), 0.15).unwrap().success);
        assert!(!docking_outcome(&mk(0.15), 0.15).unwrap().success);
        assert!(docking_outcome(&mk(0.0), 0.0).is_err());
    }

    #[test]
    fn generic_in_f32() {
        let e = Vec3::<f32>::new(0.0, 3.0, 4.0);
        assert_eq!(radial_error(&e), 5.0f32);
    }

    proptest! {
        #[test]
        fn radial_error_rotation_invariant(y in -5.0..5.0f64, z in -5.0..5.0f64, x in -5.0..5.0f64, ang in 0.0..6.3f64) {
            let (c, s) = (ang.cos(), ang.sin());
            let r = v(x, c * y - s * z, s * y + c * z);
            prop_assert!((radial_error(&v(x, y, z)) - radial_error(&r)).abs() < 1e-12);
        }

        #[test]
        fn position_error_antisymmetric(a in prop::array::uniform3(-100.0..100.0f64), b in prop::array::uniform3(-100.0..100.0f64)) {
            let (a, b) = (v(a[0], a[1], a[2]), v(b[0], b[1], b[2]));
            prop_assert_eq!(position_error(&a, &b), -position_error(&b, &a));
        }

        #[test]
        fn detected_crossing_is_minimal(gaps in prop::collection::vec(-1.0..1.0f64, 2..40)) {
            let mut traj = vec![sample(0.0, 1.0)];
            traj.extend(gaps.iter().enumerate().map(|(i, g)| sample(i as f64 + 1.0, *g)));
            match detect_terminal_time(&traj) {
                Ok(term) => {
                    let idx = traj.iter().position(|s| s.axial_gap() <= 0.0).unwrap();
                    prop_assert!(traj[..idx].iter().all(|s| s.axial_gap() > 0.0));
                    prop_assert!(term.t <= traj[idx].t && term.t >= traj[idx - 1].t);
                    prop_assert!((term.p_dr.x - term.p_pr.x).abs() < CONTACT_TOLERANCE);
                }
                Err(e) => {
                    prop_assert_eq!(e, GeometryError::NoContact);
                    prop_assert!(traj.iter().all(|s| s.axial_gap() > 0.0));
                }
            }
        }
    }
}

//! Affine drogue-offset map extracted from the physical tier.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{Scenario, SimError, V3};
use crate::disturbances::is_negative_definite_form;
use crate::hose::solve_equilibrium;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetMapEstimate {
    /// Static drogue offset at contact with the probe on the drogue axis.
    pub m0: V3,
    /// Jacobian of the static offset with respect to `p_dr − p_pr`.
    pub m1: Matrix3<f64>,
    /// Finite-difference step (m).
    pub step: f64,
    pub negative_definite: bool,
}

/// Static drogue offset `eq(F + F_bow(dp)) − eq(F)` linearised about `dp = 0`
/// by central differences. Runs without gusts or turbulence.
pub fn estimate_offset_map(scenario: &Scenario, step: f64) -> Result<OffsetMapEstimate, SimError> {
    if !(step > 0.0) {
        return Err(SimError::InvalidScenario("finite-difference step must be > 0".into()));
    }
    let d = &scenario.disturbances;
    let wind = scenario.hose.freestream();
    let base = solve_equilibrium(&scenario.hose, &d.drogue_steady_force, &wind)?.1;
    let offset = |dp: V3| -> Result<V3, SimError> {
        let f = d.drogue_steady_force + d.bow_wave.force(&dp);
        Ok(solve_equilibrium(&scenario.hose, &f, &wind)?.1 - base)
    };
    let m0 = offset(V3::zeros())?;
    let mut m1 = Matrix3::zeros();
    for j in 0..3 {
        let mut e = V3::zeros();
        e[j] = step;
        let col = (offset(e)? - offset(-e)?) / (2.0 * step);
        m1.set_column(j, &col);
    }
    Ok(OffsetMapEstimate { m0, m1, step, negative_definite: is_negative_definite_form(&m1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::build_augmented;

    #[test]
    fn default_plant_offset_learns() {
        let sc = Scenario::default_physical();
        let est = estimate_offset_map(&sc, 1e-3).unwrap();
        // The links are inextensible, so the drogue barely moves along the
        // hose line and the x-z block is close to rank one. The cross-track
        // block is still a strict push-away field.
        let yz = est.m1.fixed_view::<2, 2>(1, 1).into_owned();
        let sym = (yz + yz.transpose()) * 0.5;
        assert!(sym.trace() < 0.0 && sym.determinant() > 0.0, "{}", est.m1);
        let it = build_augmented(&est.m1, &sc.tilc).unwrap();
        assert!(it.rho < 1.0, "rho = {}", it.rho);
        assert!(est.m0.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn no_bow_wave_means_no_offset() {
        let sc = Scenario::default_physical().without_disturbances();
        let est = estimate_offset_map(&sc, 1e-3).unwrap();
        assert!(est.m0.norm() < 1e-9);
        assert!(est.m1.norm() < 1e-6);
        assert!(!est.negative_definite);
        assert!(estimate_offset_map(&sc, 0.0).is_err());
    }
}

//! Lumped-mass link-chain model of the refueling hose with the drogue as the
//! end mass.
//!
//! The hose is `n` rigid massless links of length `L`; each link end carries a
//! point mass (the last one also carries the drogue). Link `j` is oriented by a
//! trailing pitch angle `α` (rotation about `y` away from vertical, positive
//! trailing aft) and a lateral angle `β`:
//!
//! `d(α, β) = (-sin α cos β, sin β, cos α cos β)`
//!
//! so a hanging link points along `+z` and the chain stays regular for any
//! trailing angle. Accelerations come from an O(n) tridiagonal solve for the
//! link tensions.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::rk4_step;

type V3 = Vector3<f64>;

/// Largest accepted integration step (s).
pub const MAX_STEP: f64 = 0.02;
/// State magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Torque residual accepted by the static solver (N·m).
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoseError {
    #[error("hose state diverged (|x| > {DIVERGENCE_LIMIT:e})")]
    NumericalDivergence,
    #[error("integration step {0} outside (0, {MAX_STEP}]")]
    InvalidStep(f64),
    #[error("static equilibrium did not converge (residual {0:e} N·m)")]
    NoConvergence(f64),
    #[error("invalid hose parameter `{0}`")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoseParams {
    pub n_links: usize,
    /// m
    pub link_length: f64,
    /// kg per link
    pub link_mass: f64,
    /// kg
    pub drogue_mass: f64,
    /// m
    pub hose_diameter: f64,
    /// Cross-flow drag coefficient of a link.
    pub link_drag_coefficient: f64,
    pub drogue_drag_coefficient: f64,
    /// m²
    pub drogue_area: f64,
    /// kg/m³
    pub air_density: f64,
    /// m/s, tanker true airspeed
    pub airspeed: f64,
    /// m/s²
    pub gravity: f64,
    /// Damper between neighbouring link ends (N·s/m).
    pub joint_damping: f64,
}

impl Default for HoseParams {
    fn default() -> Self {
        Self {
            n_links: 20,
            link_length: 0.75,
            link_mass: 3.0,
            drogue_mass: 30.0,
            hose_diameter: 0.067,
            link_drag_coefficient: 1.0,
            drogue_drag_coefficient: 0.8,
            drogue_area: 0.28,
            air_density: 0.65,
            airspeed: 100.0,
            gravity: 9.81,
            joint_damping: 5.0,
        }
    }
}

impl HoseParams {
    pub fn validate(&self) -> Result<(), HoseError> {
        let positive = [
            (self.link_length, "link_length"),
            (self.link_mass, "link_mass"),
            (self.drogue_mass, "drogue_mass"),
            (self.gravity, "gravity"),
        ];
        for (v, name) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HoseError::InvalidParameter(name));
            }
        }
        let non_negative = [
            (self.hose_diameter, "hose_diameter"),
            (self.link_drag_coefficient, "link_drag_coefficient"),
            (self.drogue_drag_coefficient, "drogue_drag_coefficient"),
            (self.drogue_area, "drogue_area"),
            (self.air_density, "air_density"),
            (self.airspeed, "airspeed"),
            (self.joint_damping, "joint_damping"),
        ];
        for (v, name) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(HoseError::InvalidParameter(name));
            }
        }
        if self.n_links == 0 {
            return Err(HoseError::InvalidParameter("n_links"));
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.n_links as f64 * self.link_length
    }

    /// Undisturbed air velocity seen in the tanker frame.
    pub fn freestream(&self) -> V3 {
        V3::new(-self.airspeed, 0.0, 0.0)
    }

    fn node_mass(&self, j: usize) -> f64 {
        if j + 1 == self.n_links {
            self.link_mass + self.drogue_mass
        } else {
            self.link_mass
        }
    }

    fn link_drag(&self, d: &V3, v_rel: &V3) -> V3 {
        let vn = v_rel - d * d.dot(v_rel);
        0.5 * self.air_density * self.link_drag_coefficient * self.hose_diameter * self.link_length * vn.norm() * vn
    }

    fn drogue_drag(&self, v_rel: &V3) -> V3 {
        0.5 * self.air_density * self.drogue_drag_coefficient * self.drogue_area * v_rel.norm() * v_rel
    }
}

/// Generalized coordinates, four per link: `[α, β, α̇, β̇]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoseState {
    pub x: Vec<f64>,
}

impl HoseState {
    pub fn from_angles(pitch: &[f64], lateral: &[f64]) -> Self {
        assert_eq!(pitch.len(), lateral.len());
        let mut x = Vec::with_capacity(4 * pitch.len());
        for (a, b) in pitch.iter().zip(lateral) {
            x.extend_from_slice(&[*a, *b, 0.0, 0.0]);
        }
        Self { x }
    }

    /// All links hanging straight down, at rest.
    pub fn hanging(n_links: usize) -> Self {
        Self { x: vec![0.0; 4 * n_links] }
    }

    pub fn n_links(&self) -> usize {
        self.x.len() / 4
    }

    pub fn pitch(&self, j: usize) -> f64 {
        self.x[4 * j]
    }

    pub fn lateral(&self, j: usize) -> f64 {
        self.x[4 * j + 1]
    }

    pub fn pitch_rate(&self, j: usize) -> f64 {
        self.x[4 * j + 2]
    }

    pub fn lateral_rate(&self, j: usize) -> f64 {
        self.x[4 * j + 3]
    }
}

/// Unit direction of a link and its partial derivatives.
#[derive(Debug, Clone, Copy)]
struct LinkFrame {
    d: V3,
    ja: V3,
    jb: V3,
    cb2: f64,
}

fn link_frame(a: f64, b: f64) -> LinkFrame {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    LinkFrame {
        d: V3::new(-sa * cb, sb, ca * cb),
        ja: V3::new(-ca * cb, 0.0, -sa * cb),
        jb: V3::new(sa * sb, cb, -ca * sb),
        cb2: cb * cb,
    }
}

/// Link direction for the given angles.
pub fn link_direction(pitch: f64, lateral: f64) -> V3 {
    link_frame(pitch, lateral).d
}

/// Angles reproducing a unit direction (inverse of [`link_direction`]).
pub fn direction_angles(d: &V3) -> (f64, f64) {
    let b = d.y.clamp(-1.0, 1.0).asin();
    let a = (-d.x).atan2(d.z);
    (a, b)
}

/// Drogue position: link directions times link length, summed from the root.
pub fn drogue_position(state: &HoseState, params: &HoseParams) -> V3 {
    (0..state.n_links()).map(|j| link_direction(state.pitch(j), state.lateral(j))).sum::<V3>() * params.link_length
}

/// Positions of every link end, root excluded.
pub fn node_positions(state: &HoseState, params: &HoseParams) -> Vec<V3> {
    let mut p = V3::zeros();
    (0..state.n_links())
        .map(|j| {
            p += link_direction(state.pitch(j), state.lateral(j)) * params.link_length;
            p
        })
        .collect()
}

/// Kinetic plus gravitational potential energy (z points down).
pub fn mechanical_energy(state: &HoseState, params: &HoseParams) -> f64 {
    let n = state.n_links();
    let (mut pos, mut vel) = (V3::zeros(), V3::zeros());
    let mut e = 0.0;
    for j in 0..n {
        let f = link_frame(state.pitch(j), state.lateral(j));
        pos += f.d * params.link_length;
        vel += (f.ja * state.pitch_rate(j) + f.jb * state.lateral_rate(j)) * params.link_length;
        let m = params.node_mass(j);
        e += 0.5 * m * vel.norm_squared() - m * params.gravity * pos.z;
    }
    e
}

/// Time derivative of the generalized state under a uniform wind field and an
/// external force acting on the drogue.
fn derivative(params: &HoseParams, x: &[f64], wind: &V3, drogue_force: &V3, dx: &mut [f64]) {
    let n = x.len() / 4;
    let l = params.link_length;
    let mut frames = Vec::with_capacity(n);
    let mut ddot = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    let mut v = V3::zeros();
    for j in 0..n {
        let f = link_frame(x[4 * j], x[4 * j + 1]);
        let dd = f.ja * x[4 * j + 2] + f.jb * x[4 * j + 3];
        v += dd * l;
        frames.push(f);
        ddot.push(dd);
        vel.push(v);
    }

    // Applied forces per node.
    let mut force = vec![V3::zeros(); n];
    for j in 0..n {
        let m = params.node_mass(j);
        let mut f = V3::new(0.0, 0.0, m * params.gravity);
        let v_prev = if j == 0 { V3::zeros() } else { vel[j - 1] };
        let v_mid = 0.5 * (vel[j] + v_prev);
        f += params.link_drag(&frames[j].d, &(wind - v_mid));
        if params.joint_damping > 0.0 {
            let damp = ddot[j] * (l * params.joint_damping);
            f -= damp;
            if j > 0 {
                force[j - 1] += damp;
            }
        }
        force[j] += f;
    }
    force[n - 1] += params.drogue_drag(&(wind - vel[n - 1])) + drogue_force;

    // Tridiagonal system for link tensions.
    let inv_m: Vec<f64> = (0..n).map(|j| 1.0 / params.node_mass(j)).collect();
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        let d = &frames[j].d;
        diag[j] = inv_m[j];
        rhs[j] = l * ddot[j].norm_squared() + d.dot(&force[j]) * inv_m[j];
        if j > 0 {
            diag[j] += inv_m[j - 1];
            lower[j] = -frames[j - 1].d.dot(d) * inv_m[j - 1];
            rhs[j] -= d.dot(&force[j - 1]) * inv_m[j - 1];
        }
        if j + 1 < n {
            upper[j] = -d.dot(&frames[j + 1].d) * inv_m[j];
        }
    }
    let tension = thomas(&lower, &diag, &upper, &rhs);

    let mut a_prev = V3::zeros();
    for j in 0..n {
        let mut a = force[j] - frames[j].d * tension[j];
        if j + 1 < n {
            a += frames[j + 1].d * tension[j + 1];
        }
        a *= inv_m[j];

        let f = &frames[j];
        let (ad, bd) = (x[4 * j + 2], x[4 * j + 3]);
        let (sa, ca) = x[4 * j].sin_cos();
        let (sb, cb) = x[4 * j + 1].sin_cos();
        let d_aa = V3::new(sa * cb, 0.0, -ca * cb);
        let d_ab = V3::new(ca * sb, 0.0, sa * sb);
        let h = d_aa * (ad * ad) + d_ab * (2.0 * ad * bd) - f.d * (bd * bd);
        let rel = (a - a_prev) / l - h;

        dx[4 * j] = ad;
        dx[4 * j + 1] = bd;
        dx[4 * j + 2] = f.ja.dot(&rel) / f.cb2;
        dx[4 * j + 3] = f.jb.dot(&rel);
        a_prev = a;
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Advances the hose one RK4 step. `f_hd` and `f_bow` act at the drogue;
/// `wind` is the air velocity in the tanker frame (freestream plus gusts).
pub fn hose_dynamics_step(
    state: &HoseState,
    params: &HoseParams,
    f_hd: &V3,
    f_bow: &V3,
    wind: &V3,
    dt: f64,
) -> Result<HoseState, HoseError> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(HoseError::InvalidStep(dt));
    }
    let ext = f_hd + f_bow;
    let x = rk4_step(0.0, &state.x, dt, |_, y, dy| derivative(params, y, wind, &ext, dy));
    if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        return Err(HoseError::NumericalDivergence);
    }
    Ok(HoseState { x })
}

/// Static equilibrium of the hose under the freestream-plus-`wind_offset`
/// wind with a steady force on the drogue. Solved link by link from the free
/// end: each link aligns with the resultant of everything hanging below it.
pub fn solve_equilibrium(params: &HoseParams, steady_force: &V3, wind: &V3) -> Result<(HoseState, V3), HoseError> {
    params.validate()?;
    if !steady_force.iter().all(|v| v.is_finite()) {
        return Err(HoseError::InvalidParameter("steady_force"));
    }
    let n = params.n_links;
    let mut dirs = vec![V3::new(0.0, 0.0, 1.0); n];
    let mut below = params.drogue_drag(wind) + steady_force;
    let mut worst: f64 = 0.0;
    for j in (0..n).rev() {
        let gravity = V3::new(0.0, 0.0, params.node_mass(j) * params.gravity);
        let mut d = (gravity + below).try_normalize(0.0).unwrap_or(V3::z());
        for _ in 0..500 {
            let next = (gravity + params.link_drag(&d, wind) + below).normalize();
            let step = (next - d).norm();
            d = next;
            if step < 1e-15 {
                break;
            }
        }
        let total = gravity + params.link_drag(&d, wind) + below;
        worst = worst.max(params.link_length * d.cross(&total).norm());
        dirs[j] = d;
        below = total;
    }
    if worst > EQUILIBRIUM_TOLERANCE {
        return Err(HoseError::NoConvergence(worst));
    }
    let mut pitch = Vec::with_capacity(n);
    let mut lateral = Vec::with_capacity(n);
    for d in &dirs {
        let (a, b) = direction_angles(d);
        pitch.push(a);
        lateral.push(b);
    }
    let state = HoseState::from_angles(&pitch, &lateral);
    let p = drogue_position(&state, params);
    Ok((state, p))
}

/// Integrates with constant inputs for `duration` seconds.
pub fn settle(
    state: &HoseState,
    params: &HoseParams,
    force: &V3,
    wind: &V3,
    dt: f64,
    duration: f64,
) -> Result<HoseState, HoseError> {
    let steps = (duration / dt).round() as usize;
    let mut s = state.clone();
    let zero = V3::zeros();
    for _ in 0..steps {
        s = hose_dynamics_step(&s, params, force, &zero, wind, dt)?;
    }
    Ok(s)
}

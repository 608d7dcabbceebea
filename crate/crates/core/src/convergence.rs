//! Augmented iteration of the learning loop, its convergence certificate and
//! the brute-force recursion used as an oracle.
//!
//! With `X^(k) = [Δp_dr/pr^(k)(T); e_pr^(k)]` the learning loop on the affine
//! plant is `X^(k) = A·X^(k−1) + v^(k−1)` where
//!
//! ```text
//! A = [[A1, A2], [0, A3]]
//! A1 = (M1 − I)⁻¹(M1 − K_α)
//! A2 = (M1 − I)⁻¹(K_p + K_α − I)
//! A3 = I − K_p
//! ```

use nalgebra::{DMatrix, Matrix3, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disturbances::{is_negative_definite_form, validate_negative_definite};
use crate::linalg::{self, LinalgError};
use crate::scalar::{lit, to_f64, Real};
use crate::tilc::{validate_gains, TilcGains};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvergenceError {
    #[error("M1 − I is singular")]
    SingularMatrix,
    #[error(transparent)]
    Eigen(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedIteration<T: Real> {
    pub a1: Matrix3<T>,
    pub a2: Matrix3<T>,
    pub a3: Matrix3<T>,
    pub a: DMatrix<T>,
    pub rho: T,
    /// `(M1 − I)⁻¹`, which maps the drogue noise into the docking error.
    pub noise_map: Matrix3<T>,
}

impl<T: Real> AugmentedIteration<T> {
    pub fn a6(&self) -> nalgebra::Matrix6<T> {
        nalgebra::Matrix6::from_iterator(self.a.iter().copied())
    }
}

pub fn build_augmented<T: Real>(
    m1: &Matrix3<T>,
    gains: &TilcGains<T>,
) -> Result<AugmentedIteration<T>, ConvergenceError> {
    let i = Matrix3::<T>::identity();
    let noise_map = (m1 - i).try_inverse().ok_or(ConvergenceError::SingularMatrix)?;
    if noise_map.iter().any(|v| !v.is_finite()) {
        return Err(ConvergenceError::SingularMatrix);
    }
    let ka = gains.k_alpha_matrix();
    let kp = gains.k_p_matrix();
    let a1 = noise_map * (m1 - ka);
    let a2 = noise_map * (kp + ka - i);
    let a3 = i - kp;
    let mut a = DMatrix::zeros(6, 6);
    a.view_mut((0, 0), (3, 3)).copy_from(&a1);
    a.view_mut((0, 3), (3, 3)).copy_from(&a2);
    a.view_mut((3, 3), (3, 3)).copy_from(&a3);
    let rho = linalg::spectral_radius(&a)?;
    Ok(AugmentedIteration { a1, a2, a3, a, rho, noise_map })
}

pub fn spectral_radius<T: Real>(a: &DMatrix<T>) -> Result<T, ConvergenceError> {
    Ok(linalg::spectral_radius(a)?)
}

/// Nominal limit bound on the docking error:
/// `2·sqrt(B_pr² + B_dr²)`.
pub fn nominal_bound<T: Real>(b_pr: T, b_dr: T) -> T {
    lit::<T>(2.0) * (b_pr * b_pr + b_dr * b_dr).sqrt()
}

/// Per-attempt noise realizations `(v_dr^(k), v_pr^(k))`, `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSequence<T: Real> {
    pub v_dr: Vec<Vector3<T>>,
    pub v_pr: Vec<Vector3<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Uniform in the ball of the declared radius.
    UniformBall,
    /// On the sphere, random direction, each draw independent.
    Sphere,
    /// On the sphere along one fixed direction with alternating sign, which
    /// maximizes every attempt-to-attempt difference.
    Alternating,
}

impl<T: Real> NoiseSequence<T> {
    pub fn zero(len: usize) -> Self {
        Self { v_dr: vec![Vector3::zeros(); len], v_pr: vec![Vector3::zeros(); len] }
    }

    pub fn len(&self) -> usize {
        self.v_dr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_dr.is_empty()
    }

    pub fn sample(seed: u64, len: usize, b_dr: f64, b_pr: f64, model: NoiseModel) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir_dr = unit(&mut rng);
        let dir_pr = unit(&mut rng);
        let draw = |rng: &mut ChaCha8Rng, k: usize, b: f64, fixed: &Vector3<f64>| -> Vector3<T> {
            let v = match model {
                NoiseModel::UniformBall => unit(rng) * (b * rng.random::<f64>().cbrt()),
                NoiseModel::Sphere => unit(rng) * b,
                NoiseModel::Alternating => fixed * if k.is_multiple_of(2) { b } else { -b },
            };
            v.map(lit::<T>)
        };
        let mut out = Self::zero(0);
        for k in 0..len {
            out.v_dr.push(draw(&mut rng, k, b_dr, &dir_dr));
            out.v_pr.push(draw(&mut rng, k, b_pr, &dir_pr));
        }
        out
    }
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::<f64>::from_fn(|_, _| rng.sample(StandardNormal));
        if let Some(u) = v.try_normalize(1e-12) {
            return u;
        }
    }
}

/// Docking-error / probe-error pairs for `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSequence<T: Real> {
    pub x: Vec<(Vector3<T>, Vector3<T>)>,
    pub noise: Option<NoiseSequence<T>>,
}

impl<T: Real> ErrorSequence<T> {
    pub fn docking_error_norms(&self) -> Vec<T> {
        self.x.iter().map(|(d, _)| d.norm()).collect()
    }

    pub fn stacked(&self, k: usize) -> Vector6<T> {
        let (d, e) = &self.x[k];
        Vector6::new(d.x, d.y, d.z, e.x, e.y, e.z)
    }
}

/// Stacked noise entering the step from attempt `k − 1` to `k`.
///
/// The docking-error row picks up both noise differences through
/// `(M1 − I)⁻¹`; the probe row sees only the tracking-noise difference.
pub fn step_noise<T: Real>(it: &AugmentedIteration<T>, noise: &NoiseSequence<T>, k: usize) -> (Vector3<T>, Vector3<T>) {
    let d_dr = noise.v_dr[k - 1] - noise.v_dr[k];
    let d_pr = noise.v_pr[k - 1] - noise.v_pr[k];
    (it.noise_map * (d_dr + d_pr), -d_pr)
}

/// `X^(k) = A·X^(k−1) + v^(k−1)` by direct multiplication. `noise`, when
/// given, must hold at least `k_max + 1` draws.
pub fn iterate_recursion<T: Real>(
    it: &AugmentedIteration<T>,
    x0: (Vector3<T>, Vector3<T>),
    k_max: usize,
    noise: Option<&NoiseSequence<T>>,
) -> ErrorSequence<T> {
    if let Some(n) = noise {
        assert!(n.len() > k_max, "noise sequence shorter than k_max + 1");
    }
    let mut x = Vec::with_capacity(k_max + 1);
    x.push(x0);
    for k in 1..=k_max {
        let (d, e) = x[k - 1];
        let mut d_next = it.a1 * d + it.a2 * e;
        let mut e_next = it.a3 * e;
        if let Some(n) = noise {
            let (vd, ve) = step_noise(it, n, k);
            d_next += vd;
            e_next += ve;
        }
        x.push((d_next, e_next));
    }
    ErrorSequence { x, noise: noise.cloned() }
}

/// `A^k` by repeated squaring.
pub fn matrix_power<T: Real>(a: &DMatrix<T>, mut k: u32) -> DMatrix<T> {
    let n = a.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = a.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Spectral,
    /// `‖x‖_P = ‖Lᵀx‖` with `P = L·Lᵀ` solving `P − AᵀPA = I`.
    Lyapunov,
}

/// An induced norm of `A` below one, with the condition number that converts
/// bounds in that norm back to Euclidean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractiveNorm {
    pub kind: NormKind,
    pub value: f64,
    pub condition: f64,
}

/// Spectral norm if it already contracts, else the Lyapunov norm, which
/// contracts whenever `ρ(A) < 1`.
pub fn contractive_norm<T: Real>(a: &DMatrix<T>) -> Option<ContractiveNorm> {
    let a = a.map(to_f64);
    let spectral = linalg::spectral_norm(&a);
    if spectral < 1.0 {
        return Some(ContractiveNorm { kind: NormKind::Spectral, value: spectral, condition: 1.0 });
    }
    let n = a.nrows();
    let p = linalg::discrete_lyapunov(&a, &DMatrix::identity(n, n))?;
    let l = p.cholesky()?.l();
    let l_inv = l.clone().try_inverse()?;
    let similar = l.transpose() * &a * l_inv.transpose();
    let value = linalg::spectral_norm(&similar);
    if !(value < 1.0) {
        return None;
    }
    let condition = linalg::spectral_norm(&l) * linalg::spectral_norm(&l_inv);
    Some(ContractiveNorm { kind: NormKind::Lyapunov, value, condition })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub pass: bool,
    pub gains_valid: bool,
    pub gain_violations: Vec<String>,
    pub m1_symmetric: bool,
    pub m1_negative_definite: bool,
    pub spectral_radius: Option<f64>,
    pub spectral_radius_below_one: bool,
    pub eigenvalues: Vec<(f64, f64)>,
    pub b_pr: f64,
    pub b_dr: f64,
    /// `2·sqrt(B_pr² + B_dr²)`, the nominal limit bound.
    pub nominal_bound: f64,
    /// Nominal bound divided by `1 − ‖A‖` in a contracting norm.
    pub conservative_bound: Option<f64>,
    /// Bound from the exact noise term of the recursion.
    pub rigorous_bound: Option<f64>,
    pub norm: Option<ContractiveNorm>,
    pub error: Option<String>,
}

pub fn certify<T: Real>(m1: &Matrix3<T>, gains: &TilcGains<T>, b_pr: T, b_dr: T) -> Certificate {
    let (gains_valid, gain_violations) = match validate_gains(gains) {
        Ok(()) => (true, Vec::new()),
        Err(v) => (false, v.iter().map(|g| g.to_string()).collect()),
    };
    let (m1_symmetric, m1_negative_definite) = match validate_negative_definite(m1) {
        Ok(nd) => (true, nd),
        Err(_) => (false, is_negative_definite_form(m1)),
    };
    let nominal_bound = to_f64(nominal_bound(b_pr, b_dr));
    let mut cert = Certificate {
        pass: false,
        gains_valid,
        gain_violations,
        m1_symmetric,
        m1_negative_definite,
        spectral_radius: None,
        spectral_radius_below_one: false,
        eigenvalues: Vec::new(),
        b_pr: to_f64(b_pr),
        b_dr: to_f64(b_dr),
        nominal_bound,
        conservative_bound: None,
        rigorous_bound: None,
        norm: None,
        error: None,
    };
    let it = match build_augmented(m1, gains) {
        Ok(it) => it,
        Err(e) => {
            cert.error = Some(e.to_string());
            return cert;
        }
    };
    let rho = to_f64(it.rho);
    cert.spectral_radius = Some(rho);
    cert.spectral_radius_below_one = rho < 1.0;
    if let Ok(eig) = linalg::eigenvalues(&it.a) {
        cert.eigenvalues = eig.iter().map(|z| (to_f64(z.re), to_f64(z.im))).collect();
    }
    if cert.spectral_radius_below_one {
        if let Some(norm) = contractive_norm(&it.a) {
            let shrink = norm.condition / (1.0 - norm.value);
            cert.conservative_bound = Some(nominal_bound * shrink);
            let (bp, bd) = (to_f64(b_pr), to_f64(b_dr));
            let map = linalg::spectral_norm(&DMatrix::from_iterator(3, 3, it.noise_map.iter().map(|v| to_f64(*v))));
            let top = map * 2.0 * (bd + bp);
            let bottom = 2.0 * bp;
            cert.rigorous_bound = Some(top.hypot(bottom) * shrink);
            cert.norm = Some(norm);
        }
    }
    cert.pass = cert.gains_valid && cert.m1_negative_definite && cert.spectral_radius_below_one;
    cert
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3 as V;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn scalar_case(m1: f64, ka: f64, kp: f64) -> AugmentedIteration<f64> {
        build_augmented(&(Matrix3::identity() * m1), &TilcGains::uniform(ka, kp)).unwrap()
    }

    #[test]
    fn scalar_examples() {
        let it = scalar_case(-0.5, 0.5, 0.5);
        assert!((it.a1[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!(it.a2[(0, 0)].abs() < 1e-15);
        assert!((it.a3[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((it.rho - 2.0 / 3.0).abs() < 1e-12);

        let it = scalar_case(-1.0, 0.0, 1.0);
        assert!((it.a1[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(it.a2[(0, 0)], 0.0);
        assert_eq!(it.a3[(0, 0)], 0.0);
        assert!((it.rho - 0.5).abs() < 1e-12);
    }

    #[test]
    fn complementary_gains_decouple() {
        let m1 = Matrix3::new(-0.7, 0.1, 0.0, 0.1, -0.4, 0.05, 0.0, 0.05, -0.9);
        let g = TilcGains { k_alpha: V::new(0.2, 0.6, 0.35), k_p: V::new(0.8, 0.4, 0.65) };
        let it = build_augmented(&m1, &g).unwrap();
        assert!(it.a2.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn singular_guard() {
        let m1 = Matrix3::from_diagonal(&V::new(1.0, -0.5, -0.5));
        assert_eq!(build_augmented(&m1, &TilcGains::uniform(0.5, 0.5)).unwrap_err(), ConvergenceError::SingularMatrix);
    }

    #[test]
    fn radius_of_block_triangular_is_max_of_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut a = DMatrix::<f64>::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
            a.view_mut((3, 0), (3, 3)).fill(0.0);
            let r1 = linalg::spectral_radius(&a.view((0, 0), (3, 3)).into_owned()).unwrap();
            let r3 = linalg::spectral_radius(&a.view((3, 3), (3, 3)).into_owned()).unwrap();
            let dense = a.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            let rho = spectral_radius(&a).unwrap();
            assert!((rho - r1.max(r3)).abs() < 1e-9);
            assert!((rho - dense).abs() < 1e-9);
        }
    }

    #[test]
    fn bound_examples() {
        assert_eq!(nominal_bound(0.0, 0.0), 0.0);
        assert!((nominal_bound(0.03f64, 0.04) - 0.1).abs() < 1e-15);
        assert!((nominal_bound(0.07f64, 0.0) - 0.14).abs() < 1e-15);
        assert!((nominal_bound(0.03f32, 0.04) - 0.1).abs() < 1e-7);
    }

    #[test]
    fn hand_iteration() {
        // Decoupled scalar-per-block case: A = diag(2/3, 0.5) on the first axis.
        let it = scalar_case(-0.5, 0.5, 0.5);
        let seq = iterate_recursion(&it, (V::new(0.5, 0.0, 0.0), V::new(0.2, 0.0, 0.0)), 2, None);
        assert!((seq.x[1].0.x - 1.0 / 3.0).abs() < 1e-15);
        assert!((seq.x[1].1.x - 0.1).abs() < 1e-15);
        assert!((seq.x[2].0.x - 2.0 / 9.0).abs() < 1e-15);
        assert!((seq.x[2].1.x - 0.05).abs() < 1e-15);
        assert_eq!(seq.x.len(), 3);
    }

    #[test]
    fn zero_start_stays_zero() {
        let it = scalar_case(-0.3, 0.4, 0.5);
        let seq = iterate_recursion(&it, (V::zeros(), V::zeros()), 50, None);
        assert!(seq.x.iter().all(|(d, e)| d.norm() == 0.0 && e.norm() == 0.0));
    }

    #[test]
    fn default_gains_decay_geometrically() {
        let m1 = Matrix3::from_diagonal(&V::new(-0.4, -0.6, -0.6));
        let it = build_augmented(&m1, &TilcGains::uniform(0.4, 0.5)).unwrap();
        assert!(it.rho < 0.7);
        let x0 = (V::new(0.1, 0.5, -0.3), V::new(0.05, -0.02, 0.01));
        let seq = iterate_recursion(&it, x0, 40, None);
        assert!(seq.stacked(40).norm() < 1e-6 * seq.stacked(0).norm());
    }

    #[test]
    fn recursion_matches_repeated_squaring() {
        let m1 = Matrix3::new(-0.8, 0.2, 0.1, 0.2, -0.5, 0.0, 0.1, 0.0, -1.3);
        let g = TilcGains { k_alpha: V::new(0.3, 0.7, 0.1), k_p: V::new(0.6, 0.9, 0.2) };
        let it = build_augmented(&m1, &g).unwrap();
        let x0 = (V::new(0.3, -0.2, 0.4), V::new(-0.1, 0.25, 0.05));
        let seq = iterate_recursion::<f64>(&it, x0, 64, None);
        for k in [1u32, 2, 7, 31, 64] {
            let direct = matrix_power(&it.a, k) * DMatrix::from_column_slice(6, 1, seq.stacked(0).as_slice());
            let rec = seq.stacked(k as usize);
            for i in 0..6 {
                assert!((direct[i] - rec[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn certificate_cases() {
        let m1 = Matrix3::from_diagonal(&V::new(-0.4, -0.6, -0.6));
        let cert = certify(&m1, &TilcGains::uniform(0.4, 0.5), 0.02, 0.03);
        assert!(cert.pass);
        assert!(cert.conservative_bound.unwrap() >= cert.nominal_bound);
        assert!(cert.rigorous_bound.is_some());

        let mut g = TilcGains::uniform(0.4, 0.5);
        g.k_alpha.x = 1.0;
        let cert = certify(&m1, &g, 0.02, 0.03);
        assert!(!cert.pass && !cert.gains_valid);
        assert!(cert.gain_violations[0].contains("0 <= k_alpha < 1"));

        let cert = certify(&(Matrix3::identity() * -5.0), &TilcGains::uniform(0.0, 0.5), 0.0, 0.0);
        assert!(cert.pass);
        assert!((cert.spectral_radius.unwrap() - 5.0 / 6.0).abs() < 1e-12);

        let cert = certify(&Matrix3::from_diagonal(&V::new(0.2, -0.5, -0.5)), &TilcGains::uniform(0.4, 0.5), 0.0, 0.0);
        assert!(!cert.pass && !cert.m1_negative_definite);
    }

    #[test]
    fn lyapunov_norm_contracts_when_spectral_does_not() {
        // Strong coupling: ρ < 1 but ‖A‖₂ > 1.
        let m1 = Matrix3::identity() * -0.05;
        let g = TilcGains::uniform(0.9, 0.05);
        let it = build_augmented(&m1, &g).unwrap();
        assert!(it.rho < 1.0);
        let norm = contractive_norm(&it.a).unwrap();
        assert!(norm.value < 1.0 && norm.condition >= 1.0);
    }

    #[test]
    fn random_negative_definite_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..10_000 {
            let q = nalgebra::Matrix3::<f64>::from_fn(|_, _| rng.sample(StandardNormal)).qr().q();
            let lam = V::from_fn(|_, _| -(10f64.powf(rng.random_range(-3.0..1.0))));
            let m1 = q * Matrix3::from_diagonal(&lam) * q.transpose();
            let m1 = (m1 + m1.transpose()) * 0.5;
            let ka = V::from_fn(|_, _| rng.random_range(0.0..1.0));
            let kp = V::from_fn(|_, _| 1.0 - rng.random_range(0.0..1.0));
            let it = build_augmented(&m1, &TilcGains { k_alpha: ka, k_p: kp }).unwrap();
            assert!(it.rho < 1.0, "rho = {} for {m1} {ka} {kp}", it.rho);
        }
    }

    #[test]
    fn bounded_noise_respects_conservative_bound() {
        let m1 = Matrix3::from_diagonal(&V::new(-0.4, -0.6, -0.6));
        let g = TilcGains::uniform(0.4, 0.5);
        let (b_pr, b_dr) = (0.02, 0.03);
        let it = build_augmented(&m1, &g).unwrap();
        let cert = certify(&m1, &g, b_pr, b_dr);
        for (seed, model) in [(1, NoiseModel::UniformBall), (2, NoiseModel::Sphere), (3, NoiseModel::Alternating)] {
            let noise = NoiseSequence::sample(seed, 201, b_dr, b_pr, model);
            let seq = iterate_recursion(&it, (V::new(0.5, 0.5, 0.5), V::zeros()), 200, Some(&noise));
            let limsup = seq.docking_error_norms()[100..].iter().copied().fold(0.0, f64::max);
            assert!(limsup <= cert.conservative_bound.unwrap());
            assert!(limsup <= cert.rigorous_bound.unwrap());
        }
    }

    #[test]
    fn noise_draws_respect_bounds() {
        for model in [NoiseModel::UniformBall, NoiseModel::Sphere, NoiseModel::Alternating] {
            let n = NoiseSequence::<f64>::sample(9, 500, 0.03, 0.02, model);
            assert!(n.v_dr.iter().all(|v| v.norm() <= 0.03 + 1e-15));
            assert!(n.v_pr.iter().all(|v| v.norm() <= 0.02 + 1e-15));
        }
        let a = NoiseSequence::<f64>::sample(9, 10, 0.03, 0.02, NoiseModel::Sphere);
        assert_eq!(a, NoiseSequence::sample(9, 10, 0.03, 0.02, NoiseModel::Sphere));
    }

    #[test]
    fn single_precision_build() {
        let it = build_augmented(&(Matrix3::<f32>::identity() * -0.5), &TilcGains::uniform(0.5, 0.5)).unwrap();
        assert!((it.rho - 2.0 / 3.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn certificate_is_deterministic(a in -3.0..-0.01f64, b in -3.0..-0.01f64, ka in 0.0..0.99f64, kp in 0.01..1.0f64) {
            let m1 = Matrix3::from_diagonal(&V::new(a, b, a));
            let g = TilcGains::uniform(ka, kp);
            let c1 = certify(&m1, &g, 0.01, 0.01);
            prop_assert!(c1.pass);
            prop_assert_eq!(c1, certify(&m1, &g, 0.01, 0.01));
        }
    }
}

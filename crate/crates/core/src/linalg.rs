//! Dense eigenvalue routines used by the convergence certificate and the
//! autopilot stability check.
//!
//! Eigenvalues come from a Householder reduction to upper Hessenberg form
//! followed by Francis double-shift QR sweeps with deflation of converged
//! 1x1 and 2x2 blocks.

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::scalar::{lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("QR iteration did not converge within {0} sweeps for one eigenvalue")]
    NoConvergence(usize),
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// Sweep cap per eigenvalue before giving up.
pub const MAX_QR_SWEEPS: usize = 60;

fn sign<T: Real>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// In-place reduction to upper Hessenberg form by Householder reflections.
fn hessenberg<T: Real>(h: &mut DMatrix<T>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![T::zero(); n];
    for m in 1..high {
        let mut scale = T::zero();
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == T::zero() {
            continue;
        }
        let mut hh = T::zero();
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > T::zero() {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = T::zero();
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = T::zero();
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }
}

/// All eigenvalues of a real square matrix, in no particular order.
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Result<Vec<Complex<T>>, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = m.nrows();
    let mut a = m.clone();
    hessenberg(&mut a);

    let zero = T::zero();
    let mut wr = vec![zero; n];
    let mut wi = vec![zero; n];
    let mut anorm = zero;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = zero;
    let (half, three_q, c7_16) = (lit::<T>(0.5), lit::<T>(0.75), lit::<T>(0.4375));
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            // Find a negligible subdiagonal element.
            let mut l = nu;
            while l >= 1 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == zero {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() + s == s {
                    a[(l, l - 1)] = zero;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = zero;
                nn -= 1;
                break;
            }
            let mut y = a[(nu - 1, nu - 1)];
            let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nu - 1 {
                let p = half * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= zero {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if z != zero {
                        wr[nu] = x - w / z;
                    }
                    wi[nu - 1] = zero;
                    wi[nu] = zero;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            if its == MAX_QR_SWEEPS {
                return Err(LinalgError::NoConvergence(MAX_QR_SWEEPS));
            }
            if its > 0 && its.is_multiple_of(10) {
                // Exceptional shift to break cycles.
                t += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = three_q * s;
                y = x;
                w = -c7_16 * s * s;
            }
            its += 1;

            let (mut p, mut q, mut r);
            let mut mm = nu - 2;
            loop {
                let z = a[(mm, mm)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(mm + 1, mm)] + a[(mm, mm + 1)];
                q = a[(mm + 1, mm + 1)] - z - rr - ss;
                r = a[(mm + 2, mm + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if mm == l {
                    break;
                }
                let u = a[(mm, mm - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(mm - 1, mm - 1)].abs() + z.abs() + a[(mm + 1, mm + 1)].abs());
                if u + v == v {
                    break;
                }
                mm -= 1;
            }
            for i in (mm + 2)..=nu {
                a[(i, i - 2)] = zero;
                if i != mm + 2 {
                    a[(i, i - 3)] = zero;
                }
            }
            let mut k = mm;
            while k < nu {
                if k != mm {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k != nu - 1 { a[(k + 2, k - 1)] } else { zero };
                    x = p.abs() + q.abs() + r.abs();
                    if x != zero {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != zero {
                    if k == mm {
                        if l != mm {
                            a[(k, k - 1)] = -a[(k, k - 1)];
                        }
                    } else {
                        a[(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                        if k != nu - 1 {
                            pp += r * a[(k + 2, j)];
                            a[(k + 2, j)] -= pp * z;
                        }
                        a[(k + 1, j)] -= pp * y;
                        a[(k, j)] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                        if k != nu - 1 {
                            pp += z * a[(i, k + 2)];
                            a[(i, k + 2)] -= pp * r;
                        }
                        a[(i, k + 1)] -= pp * q;
                        a[(i, k)] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex::new(re, im)).collect())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius<T: Real>(m: &DMatrix<T>) -> Result<T, LinalgError> {
    Ok(eigenvalues(m)?.into_iter().map(|z| z.re.hypot(z.im)).fold(T::zero(), |acc, v| if v > acc { v } else { acc }))
}

/// Largest real part among the eigenvalues.
pub fn spectral_abscissa<T: Real>(m: &DMatrix<T>) -> Result<T, LinalgError> {
    let eig = eigenvalues(m)?;
    Ok(eig
        .into_iter()
        .map(|z| z.re)
        .fold(T::min_value().unwrap_or(lit(-1e300)), |acc, v| if v > acc { v } else { acc }))
}

/// Induced 2-norm (largest singular value).
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    m.clone().singular_values().iter().copied().fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Largest absolute asymmetry `|m_ij - m_ji|`.
pub fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in 0..i {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Solves the discrete Lyapunov equation `P - Aᵀ P A = Q` through its
/// Kronecker form. Only intended for the small matrices used here.
pub fn discrete_lyapunov<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let nn = n * n;
    // vec(Aᵀ P A) = (Aᵀ ⊗ Aᵀ) vec(P) with column-major vec.
    let at = a.transpose();
    let kron = at.kronecker(&at);
    let lhs = DMatrix::<T>::identity(nn, nn) - kron;
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
    let sol = lhs.lu().solve(&rhs)?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    // Symmetrize round-off.
    Some((&p + p.transpose()) * lit::<T>(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn sorted_moduli(v: &[Complex<f64>]) -> Vec<f64> {
        let mut m: Vec<f64> = v.iter().map(|z| z.norm()).collect();
        m.sort_by(|a, b| a.partial_cmp(b).unwrap());
        m
    }

    #[test]
    fn identity_has_unit_radius() {
        let i = DMatrix::<f64>::identity(6, 6);
        assert!((spectral_radius(&i).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_read() {
        let d = DMatrix::from_diagonal(&nalgebra::dvector![2.0_f64 / 3.0, 0.5]);
        assert!((spectral_radius(&d).unwrap() - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_gives_complex_pair() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = dmatrix![0.9 * c, -0.9 * s; 0.9 * s, 0.9 * c];
        let eig = eigenvalues(&r).unwrap();
        assert!(eig.iter().all(|z| (z.norm() - 0.9).abs() < 1e-12));
        assert!(eig.iter().any(|z| (z.im - 0.9 * s).abs() < 1e-12));
    }

    #[test]
    fn matches_nalgebra_on_random_dense() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in 1..9 {
            for _ in 0..20 {
                let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
                let ours = sorted_moduli(&eigenvalues(&m).unwrap());
                let reference: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
                let theirs = sorted_moduli(&reference);
                for (a, b) in ours.iter().zip(&theirs) {
                    assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn works_in_f32() {
        let d = DMatrix::<f32>::from_diagonal(&nalgebra::dvector![0.25f32, -0.75]);
        assert!((spectral_radius(&d).unwrap() - 0.75).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_square() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(eigenvalues(&m), Err(LinalgError::NotSquare { .. })));
    }

    #[test]
    fn lyapunov_solution_satisfies_equation() {
        let a = dmatrix![0.5, 0.9; 0.0, 0.6];
        let q = DMatrix::<f64>::identity(2, 2);
        let p = discrete_lyapunov(&a, &q).unwrap();
        let resid = &p - a.transpose() * &p * &a - &q;
        assert!(resid.amax() < 1e-12);
    }
}

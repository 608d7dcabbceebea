//! Classical fixed-step fourth-order Runge-Kutta.

use crate::scalar::{lit, Real};

/// Advances `y` by one step of size `dt`. `f(t, y, dy)` writes the derivative into `dy`.
pub fn rk4_step<T, F>(t: T, y: &[T], dt: T, mut f: F) -> Vec<T>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    let n = y.len();
    let half = lit::<T>(0.5);
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut tmp = vec![T::zero(); n];

    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + half * dt * k1[i];
    }
    f(t + half * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + half * dt * k2[i];
    }
    f(t + half * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(t + dt, &tmp, &mut k4);

    let sixth = dt / lit::<T>(6.0);
    (0..n).map(|i| y[i] + sixth * (k1[i] + lit::<T>(2.0) * (k2[i] + k3[i]) + k4[i])).collect()
}

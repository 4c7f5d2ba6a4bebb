//! Classical fourth-order Runge–Kutta over any state with an `axpy`.

use crate::{Error, Result};

pub(crate) trait OdeState: Sized {
    /// `self + a * k`.
    fn axpy(&self, a: f64, k: &Self) -> Self;
    fn is_finite(&self) -> bool;
}

/// One RK4 step. Fails as soon as a stage derivative or the result is not
/// finite.
pub(crate) fn rk4_step<S: OdeState>(
    state: &S,
    dt: f64,
    mut rhs: impl FnMut(&S) -> Result<S>,
) -> Result<S> {
    let mut stage = |s: &S| -> Result<S> {
        let k = rhs(s)?;
        if k.is_finite() {
            Ok(k)
        } else {
            Err(Error::NonFinite)
        }
    };
    let k1 = stage(state)?;
    let k2 = stage(&state.axpy(0.5 * dt, &k1))?;
    let k3 = stage(&state.axpy(0.5 * dt, &k2))?;
    let k4 = stage(&state.axpy(dt, &k3))?;
    let next = state
        .axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite)
    }
}

/// Step count and the length of a trailing partial step, if any, so that a
/// fixed-step run lands exactly on `t_end`.
pub(crate) fn step_schedule(dt: f64, t_end: f64) -> (usize, Option<f64>) {
    let full = (t_end / dt + 1e-9).floor() as usize;
    let rest = t_end - full as f64 * dt;
    if rest > 1e-12 * t_end.max(1.0) {
        (full, Some(rest))
    } else {
        (full, None)
    }
}

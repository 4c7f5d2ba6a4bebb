//! Euler's free rigid body on `SO(3)`:
//!
//! ```text
//! I Ω̇ = (IΩ) × Ω,    Ṙ = R Ω̂,
//! ```
//!
//! with body momentum `Π = IΩ` and spatial momentum `π = RΠ`, which is
//! conserved.

use nalgebra::{Matrix3, Vector3};

use crate::ode::{rk4_step, step_schedule, OdeState};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyState {
    pub attitude: Matrix3<f64>,
    pub omega: Vector3<f64>,
    /// Principal moments of inertia.
    pub inertia: Vector3<f64>,
}

impl RigidBodyState {
    pub fn new(inertia: Vector3<f64>, omega: Vector3<f64>) -> Result<Self> {
        if inertia.iter().any(|&i| !(i > 0.0 && i.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "principal moments must be positive, got {inertia:?}"
            )));
        }
        Ok(Self {
            attitude: Matrix3::identity(),
            omega,
            inertia,
        })
    }

    pub fn body_momentum(&self) -> Vector3<f64> {
        self.inertia.component_mul(&self.omega)
    }

    pub fn spatial_momentum(&self) -> Vector3<f64> {
        self.attitude * self.body_momentum()
    }

    /// `Ω · IΩ`.
    pub fn energy(&self) -> f64 {
        self.omega.dot(&self.body_momentum())
    }
}

/// `x̂` with `x̂ y = x × y`.
pub fn hat(x: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -x[2], x[1], x[2], 0.0, -x[0], -x[1], x[0], 0.0)
}

/// `Ω̇ = I⁻¹((IΩ) × Ω)`.
pub fn euler_rhs(state: &RigidBodyState) -> Vector3<f64> {
    state
        .body_momentum()
        .cross(&state.omega)
        .component_div(&state.inertia)
}

#[derive(Clone, Copy)]
struct Motion {
    omega: Vector3<f64>,
    attitude: Matrix3<f64>,
}

impl OdeState for Motion {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        Motion {
            omega: self.omega + k.omega * a,
            attitude: self.attitude + k.attitude * a,
        }
    }

    fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.attitude.iter()).all(|v| v.is_finite())
    }
}

/// Nearest rotation in the Frobenius norm, `U Vᵀ` from the SVD.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested Vᵀ"));
    let mut q = u * v_t;
    if q.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        q = u * v_t;
    }
    q
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodySample {
    pub t: f64,
    pub omega: [f64; 3],
    pub body_momentum: [f64; 3],
    pub spatial_momentum: [f64; 3],
    pub energy: f64,
    pub attitude: Matrix3<f64>,
}

impl RigidBodySample {
    fn of(t: f64, s: &RigidBodyState) -> Self {
        Self {
            t,
            omega: s.omega.into(),
            body_momentum: s.body_momentum().into(),
            spatial_momentum: s.spatial_momentum().into(),
            energy: s.energy(),
            attitude: s.attitude,
        }
    }
}

/// RK4 on `(Ω, R)`, projecting `R` back onto `SO(3)` after every step. One
/// sample per step, including `t = 0`.
pub fn evolve_rigidbody(state0: &RigidBodyState, dt: f64, t_end: f64) -> Result<Vec<RigidBodySample>> {
    if !(dt > 0.0 && t_end > 0.0 && dt < t_end) {
        return Err(Error::InvalidConfig(format!(
            "need 0 < dt < t_end, got dt={dt} t_end={t_end}"
        )));
    }
    let inertia = state0.inertia;
    let mut state = *state0;
    let mut out = vec![RigidBodySample::of(0.0, &state)];
    let (full, partial) = step_schedule(dt, t_end);
    let total = full + usize::from(partial.is_some());
    out.reserve(total);
    for step in 1..=total {
        let h = if step > full { partial.unwrap_or(dt) } else { dt };
        let t = if step > full { t_end } else { step as f64 * dt };
        let m = Motion {
            omega: state.omega,
            attitude: state.attitude,
        };
        let next = rk4_step(&m, h, |s| {
            let probe = RigidBodyState {
                attitude: s.attitude,
                omega: s.omega,
                inertia,
            };
            Ok(Motion {
                omega: euler_rhs(&probe),
                attitude: s.attitude * hat(&s.omega),
            })
        })?;
        state.omega = next.omega;
        state.attitude = orthonormalize(&next.attitude);
        out.push(RigidBodySample::of(t, &state));
    }
    Ok(out)
}

/// `max_t ‖Π(t) - R(t)ᵀ π(0)‖`.
pub fn ad_star_check(trajectory: &[RigidBodySample]) -> f64 {
    let Some(first) = trajectory.first() else {
        return 0.0;
    };
    let pi0 = Vector3::from(first.spatial_momentum);
    trajectory
        .iter()
        .map(|s| (Vector3::from(s.body_momentum) - s.attitude.transpose() * pi0).norm())
        .fold(0.0, f64::max)
}

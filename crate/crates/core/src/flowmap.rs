//! Lagrangian description: the group element `(φ, f)` of `Diff(S¹) ⋉ F(S¹)`
//! transported by the Eulerian solution through
//!
//! ```text
//! φ_t = u ∘ φ,    f_t = ρ ∘ φ,
//! ```
//!
//! together with the adjoint and coadjoint actions used to state the
//! conservation laws in body variables.

use serde::{Deserialize, Serialize};

use crate::connection::{Model, VelocityPair};
use crate::evolution::{check_thresholds, rhs, BlowupReason, EvolutionConfig};
use crate::ode::{rk4_step, step_schedule, OdeState};
use crate::spectral::{
    apply_a, compose, compose_many, derivative, eval_series, invert_diffeo, Diffeo, Grid,
    PeriodicField,
};
use crate::{Error, Result};

pub const DEFAULT_JACOBIAN_FLOOR: f64 = 1e-8;

/// Element `(φ, f)` with `φ = id + ψ`.
#[derive(Clone, Debug)]
pub struct GroupElement {
    pub phi: Diffeo,
    pub f: PeriodicField,
}

impl GroupElement {
    pub fn new(phi: Diffeo, f: PeriodicField) -> Self {
        assert!(phi.grid() == f.grid(), "φ and f on different grids");
        Self { phi, f }
    }

    pub fn identity(grid: &Grid) -> Self {
        Self {
            phi: Diffeo::identity(grid),
            f: PeriodicField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    /// `(φ⁻¹, -f ∘ φ⁻¹)`.
    pub fn inverse(&self) -> Result<Self> {
        let inv = invert_diffeo(&self.phi)?;
        let f = compose(&self.f, &inv).map(|v| -v);
        Ok(Self { phi: inv, f })
    }

    /// Max-norm distance of both slots.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.phi
            .displacement()
            .max_abs_diff(other.phi.displacement())
            .max(self.f.max_abs_diff(&other.f))
    }
}

/// `a · b = (φ_a ∘ φ_b, f_b + f_a ∘ φ_b)`.
pub fn group_product(a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
    let parts = compose_many(&[a.phi.displacement(), &a.f], &b.phi);
    let psi = b.phi.displacement() + &parts[0];
    let f = &b.f + &parts[1];
    Ok(GroupElement {
        phi: Diffeo::new(psi)?,
        f,
    })
}

/// `(U₁, U₂) = (φ_t/φ_x, f_t - (f_x/φ_x) φ_t)`.
pub fn body_velocity(g: &GroupElement, phi_t: &PeriodicField, f_t: &PeriodicField) -> VelocityPair {
    let jac = g.phi.jacobian();
    let fx = derivative(&g.f);
    let u1 = phi_t.zip_map(jac, |p, j| p / j);
    let u2 = f_t.zip_map(&fx.zip_map(&u1, |a, b| a * b), |p, q| p - q);
    VelocityPair::new(u1, u2)
}

/// `Ad_{(φ,f)}(v, τ) = ((φ_x v) ∘ φ⁻¹, (f_x v + τ) ∘ φ⁻¹)`.
pub fn adjoint_action(g: &GroupElement, v: &VelocityPair) -> Result<VelocityPair> {
    let inv = invert_diffeo(&g.phi)?;
    let fx = derivative(&g.f);
    let first = g.phi.jacobian() * &v.u;
    let second = (&fx * &v.u).zip_map(&v.rho, |p, t| p + t);
    let mut out = compose_many(&[&first, &second], &inv);
    let rho = out.pop().expect("two fields");
    let u = out.pop().expect("two fields");
    Ok(VelocityPair::new(u, rho))
}

/// Body momentum `Ad*_{(φ,f)}(m, ρ)`.
#[derive(Clone, Debug)]
pub struct BodyMomentum {
    pub m0: PeriodicField,
    pub rho0: PeriodicField,
}

/// `Ad*_{(φ,f)}(m, ρ) = ((m∘φ)φ_x² + (ρ∘φ) f_x φ_x, (ρ∘φ) φ_x)`.
pub fn coadjoint_action(g: &GroupElement, m: &PeriodicField, rho: &PeriodicField) -> BodyMomentum {
    let parts = compose_many(&[m, rho], &g.phi);
    let jac = g.phi.jacobian();
    let fx = derivative(&g.f);
    let rho0 = parts[1].zip_map(jac, |r, j| r * j);
    let m0 = PeriodicField::from_values(
        jac.grid(),
        (0..jac.values().len())
            .map(|i| {
                let j = jac.values()[i];
                parts[0].values()[i] * j * j + rho0.values()[i] * fx.values()[i]
            })
            .collect(),
    );
    BodyMomentum { m0, rho0 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FlowStatus {
    Completed,
    BlowupDetected { t: f64, reason: BlowupReason },
    JacobianDegenerate { t: f64, min_jacobian: f64 },
}

impl FlowStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, FlowStatus::Completed)
    }
}

/// Saved states of a flow-map run; all vectors share the save times.
#[derive(Clone, Debug)]
pub struct FlowMapRun {
    pub model: Model,
    pub times: Vec<f64>,
    pub group: Vec<GroupElement>,
    pub eulerian: Vec<VelocityPair>,
    pub status: FlowStatus,
}

#[derive(Clone)]
struct FlowState {
    pair: VelocityPair,
    psi: PeriodicField,
    f: PeriodicField,
}

impl OdeState for FlowState {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        FlowState {
            pair: self.pair.axpy(a, &k.pair),
            psi: self.psi.zip_map(&k.psi, |x, y| x + a * y),
            f: self.f.zip_map(&k.f, |x, y| x + a * y),
        }
    }

    fn is_finite(&self) -> bool {
        self.pair.is_finite() && self.psi.is_finite() && self.f.is_finite()
    }
}

fn transport_rhs(model: Model, s: &FlowState) -> FlowState {
    let grid = s.psi.grid();
    let points: Vec<f64> = s
        .psi
        .values()
        .iter()
        .enumerate()
        .map(|(j, d)| grid.point(j) + d)
        .collect();
    let (mut vals, _) = eval_series(&[&s.pair.u, &s.pair.rho], &points, false);
    let f_t = PeriodicField::from_values(grid, vals.pop().expect("two fields"));
    let psi_t = PeriodicField::from_values(grid, vals.pop().expect("two fields"));
    FlowState {
        pair: rhs(model, &s.pair),
        psi: psi_t,
        f: f_t,
    }
}

/// Co-integrates `(u, ρ, ψ, f)` with RK4 from the identity element. The
/// Eulerian part is dealiased after every step exactly as in
/// [`crate::evolution::evolve`]; `ψ` and `f` are not, since they are
/// generally not band-limited.
///
/// Stops on an Eulerian threshold crossing or when `min φ_x <= jacobian_floor`.
pub fn evolve_flowmap(
    config: &EvolutionConfig,
    initial: &VelocityPair,
    jacobian_floor: f64,
) -> Result<FlowMapRun> {
    config.validate()?;
    if initial.grid().n() != config.grid_n {
        return Err(Error::GridMismatch {
            left: config.grid_n,
            right: initial.grid().n(),
        });
    }
    let model = config.model;
    let grid = initial.grid().clone();
    let pair = if model.is_two_component() {
        initial.dealias()
    } else {
        VelocityPair::velocity_only(initial.u.dealias())
    };
    let mut state = FlowState {
        pair,
        psi: PeriodicField::zeros(&grid),
        f: PeriodicField::zeros(&grid),
    };
    let mut run = FlowMapRun {
        model,
        times: vec![0.0],
        group: vec![GroupElement::identity(&grid)],
        eulerian: vec![state.pair.clone()],
        status: FlowStatus::Completed,
    };

    let threshold = |s: &VelocityPair| check_thresholds(config, s);
    if let Some(reason) = threshold(&state.pair) {
        run.status = FlowStatus::BlowupDetected { t: 0.0, reason };
        return Ok(run);
    }

    let (full, partial) = step_schedule(config.dt, config.t_end);
    let total = full + usize::from(partial.is_some());
    for step in 1..=total {
        let h = if step > full { partial.unwrap_or(config.dt) } else { config.dt };
        let t = if step > full { config.t_end } else { step as f64 * config.dt };
        match rk4_step(&state, h, |s| Ok(transport_rhs(model, s))) {
            Ok(mut next) => {
                next.pair = next.pair.dealias();
                state = next;
            }
            Err(Error::NonFinite) => {
                run.status = FlowStatus::BlowupDetected {
                    t,
                    reason: BlowupReason::NonFinite,
                };
                return Ok(run);
            }
            Err(e) => return Err(e),
        }
        if let Some(reason) = threshold(&state.pair) {
            run.status = FlowStatus::BlowupDetected { t, reason };
            return Ok(run);
        }
        let min_jac = 1.0 + derivative(&state.psi).min();
        if !(min_jac > jacobian_floor) {
            run.status = FlowStatus::JacobianDegenerate {
                t,
                min_jacobian: min_jac,
            };
            return Ok(run);
        }
        if step % config.diagnostics_stride == 0 || step == total {
            run.times.push(t);
            run.group.push(GroupElement {
                phi: Diffeo::new(state.psi.clone())?,
                f: state.f.clone(),
            });
            run.eulerian.push(state.pair.clone());
        }
    }
    Ok(run)
}

/// Pointwise-in-label quadrature `f(t) = ρ₀ ∫₀ᵗ w(s) ds` over equally
/// spaced samples `φ(s_i)`, `s_i = i·h`, with `w = 1/φ_x` for CH-type models
/// and `w = 1/φ_x²` for DP-type models.
///
/// Composite Simpson; an odd number of intervals closes with Simpson's 3/8
/// rule on the last three, a single interval falls back to the trapezoid rule.
pub fn reconstruct_f(
    model: Model,
    rho0: &PeriodicField,
    phi_history: &[Diffeo],
    h: f64,
) -> Result<PeriodicField> {
    let power = match model {
        Model::Ch | Model::Ch2 => 1,
        Model::Dp | Model::Dp2 => 2,
    };
    let n = rho0.grid().n();
    let weights = quadrature_weights(phi_history.len(), h);
    let mut acc = vec![0.0; n];
    for (phi, w) in phi_history.iter().zip(&weights) {
        assert!(phi.grid() == rho0.grid(), "history on a different grid");
        let jac = phi.jacobian();
        let min = jac.min();
        if !(min > 0.0) {
            return Err(Error::NonPositiveJacobian { min });
        }
        for (a, &j) in acc.iter_mut().zip(jac.values()) {
            *a += w / j.powi(power);
        }
    }
    Ok(PeriodicField::from_values(
        rho0.grid(),
        acc.iter().zip(rho0.values()).map(|(a, r)| a * r).collect(),
    ))
}

fn quadrature_weights(samples: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; samples];
    if samples < 2 {
        return w;
    }
    let intervals = samples - 1;
    if intervals == 1 {
        w[0] = h / 2.0;
        w[1] = h / 2.0;
        return w;
    }
    let simpson = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    for i in (0..simpson).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if simpson < intervals {
        let s = simpson;
        for (k, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[s + k] += 3.0 * h / 8.0 * c;
        }
    }
    w
}

/// Per-save deviation of the conserved body quantities from their `t = 0`
/// values, in the max norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumDrift {
    pub t: f64,
    /// `(ρ∘φ)φ_x` for CH-type, `(ρ∘φ)φ_x²` for DP-type models.
    pub density: f64,
    /// First slot of `Ad*(m, ρ)`; only for the metric models CH and 2CH.
    pub body_momentum: Option<f64>,
}

/// Reference sizes `(max|ρ₀|, max|m₀|)` for turning drifts into relative ones.
pub fn momentum_scales(run: &FlowMapRun) -> (f64, f64) {
    let first = &run.eulerian[0];
    (first.rho.max_abs(), apply_a(&first.u).max_abs())
}

pub fn momentum_drift(run: &FlowMapRun) -> Vec<MomentumDrift> {
    let model = run.model;
    let power = match model {
        Model::Ch | Model::Ch2 => 1,
        Model::Dp | Model::Dp2 => 2,
    };
    let with_body = model.is_metric();
    let density = |g: &GroupElement, pair: &VelocityPair| {
        compose(&pair.rho, &g.phi).zip_map(g.phi.jacobian(), |r, j| r * j.powi(power))
    };
    let body = |g: &GroupElement, pair: &VelocityPair| {
        coadjoint_action(g, &apply_a(&pair.u), &pair.rho).m0
    };
    let (g0, p0) = (&run.group[0], &run.eulerian[0]);
    let d0 = density(g0, p0);
    let b0 = with_body.then(|| body(g0, p0));
    run.times
        .iter()
        .zip(run.group.iter().zip(&run.eulerian))
        .map(|(&t, (g, pair))| MomentumDrift {
            t,
            density: density(g, pair).max_abs_diff(&d0),
            body_momentum: b0.as_ref().map(|b0| body(g, pair).max_abs_diff(b0)),
        })
        .collect()
}

//! Eulerian time stepping of the weak Cauchy forms
//!
//! ```text
//! 2CH:  u_t = -u u_x - A⁻¹∂_x(u² + ½u_x² + ½ρ²),   ρ_t = -u ρ_x - ρ u_x
//! 2DP:  u_t = -u u_x - A⁻¹((3/2 u² - ρ²)_x + ρ u_x), ρ_t = -u ρ_x - 2ρ u_x
//! ```
//!
//! with CH and DP as the `ρ ≡ 0` reductions. Fixed-step RK4, dealiased after
//! every stage. Blow-up is operationalized as a threshold crossing of
//! `min u_x` or `max |ρ_x|`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::connection::{metric, Model, VelocityPair};
use crate::ode::{rk4_step, step_schedule, OdeState};
use crate::spectral::{apply_a, apply_a_inv, derivative, PeriodicField};
use crate::{Error, Result};

pub const DEFAULT_SLOPE_THRESHOLD: f64 = -1e6;
pub const DEFAULT_RHOX_THRESHOLD: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub model: Model,
    pub dt: f64,
    pub t_end: f64,
    pub grid_n: usize,
    #[serde(default = "default_slope")]
    pub blowup_slope_threshold: f64,
    #[serde(default = "default_rhox")]
    pub blowup_rhox_threshold: f64,
    #[serde(default = "default_stride")]
    pub diagnostics_stride: usize,
}

fn default_slope() -> f64 {
    DEFAULT_SLOPE_THRESHOLD
}

fn default_rhox() -> f64 {
    DEFAULT_RHOX_THRESHOLD
}

fn default_stride() -> usize {
    100
}

impl EvolutionConfig {
    pub fn new(model: Model, grid_n: usize, dt: f64, t_end: f64) -> Self {
        Self {
            model,
            dt,
            t_end,
            grid_n,
            blowup_slope_threshold: DEFAULT_SLOPE_THRESHOLD,
            blowup_rhox_threshold: DEFAULT_RHOX_THRESHOLD,
            diagnostics_stride: default_stride(),
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.diagnostics_stride = stride;
        self
    }

    pub fn with_thresholds(mut self, slope: f64, rhox: f64) -> Self {
        self.blowup_slope_threshold = slope;
        self.blowup_rhox_threshold = rhox;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.dt >= self.t_end {
            return bad(format!("dt ({}) must be smaller than t_end ({})", self.dt, self.t_end));
        }
        if self.grid_n % 2 != 0 {
            return bad(format!("grid size must be even, got {}", self.grid_n));
        }
        if !(self.blowup_slope_threshold < 0.0 && self.blowup_slope_threshold.is_finite()) {
            return bad(format!(
                "blow-up slope threshold must be finite and negative, got {}",
                self.blowup_slope_threshold
            ));
        }
        if !(self.blowup_rhox_threshold > 0.0 && self.blowup_rhox_threshold.is_finite()) {
            return bad(format!(
                "blow-up rho_x threshold must be finite and positive, got {}",
                self.blowup_rhox_threshold
            ));
        }
        if self.diagnostics_stride == 0 {
            return bad("diagnostics stride must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub min_ux: f64,
    pub max_abs_rhox: f64,
    pub mean_m: f64,
    pub mean_rho: f64,
}

impl DiagnosticsRecord {
    pub fn of(model: Model, t: f64, state: &VelocityPair) -> Self {
        let (mean_m, mean_rho) = mean_invariants(state, model);
        let (min_ux, max_abs_rhox) = slope_functionals(state);
        Self {
            t,
            energy: conserved_energy(state),
            min_ux,
            max_abs_rhox,
            mean_m,
            mean_rho,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupReason {
    MinUx,
    MaxAbsRhox,
    NonFinite,
}

impl fmt::Display for BlowupReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlowupReason::MinUx => "min_ux",
            BlowupReason::MaxAbsRhox => "max_abs_rhox",
            BlowupReason::NonFinite => "non_finite",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowupDetected { t: f64, reason: BlowupReason },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// Output of [`evolve`]: snapshots and diagnostics share the save times.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub trajectory: Vec<VelocityPair>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub status: RunStatus,
}

impl Evolution {
    pub fn final_state(&self) -> &VelocityPair {
        self.trajectory.last().expect("trajectory holds the initial state")
    }
}

impl OdeState for VelocityPair {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        VelocityPair::new(
            self.u.zip_map(&k.u, |x, y| x + a * y),
            self.rho.zip_map(&k.rho, |x, y| x + a * y),
        )
    }

    fn is_finite(&self) -> bool {
        VelocityPair::is_finite(self)
    }
}

fn dealiased_product(a: &PeriodicField, b: &PeriodicField) -> PeriodicField {
    (a * b).dealias()
}

/// Right-hand side `(u_t, ρ_t)` of the weak form of `model`.
pub fn rhs(model: Model, state: &VelocityPair) -> VelocityPair {
    let u = &state.u;
    let rho = &state.rho;
    let ux = derivative(u);
    let advection = dealiased_product(u, &ux);
    match model {
        Model::Ch | Model::Ch2 => {
            let rho_sq = if model == Model::Ch2 {
                rho * rho
            } else {
                PeriodicField::zeros(u.grid())
            };
            let flux = (u * u)
                .zip_map(&(&ux * &ux), |p, q| p + 0.5 * q)
                .zip_map(&rho_sq, |p, r| p + 0.5 * r)
                .dealias();
            let ut = (-&advection).zip_map(&apply_a_inv(&derivative(&flux)), |p, q| p - q);
            let rt = if model == Model::Ch2 {
                let rhox = derivative(rho);
                (u * &rhox).zip_map(&(rho * &ux), |p, q| -(p + q)).dealias()
            } else {
                PeriodicField::zeros(u.grid())
            };
            VelocityPair::new(ut, rt)
        }
        Model::Dp | Model::Dp2 => {
            if model == Model::Dp {
                let flux = (1.5 * &(u * u)).dealias();
                let ut = (-&advection).zip_map(&apply_a_inv(&derivative(&flux)), |p, q| p - q);
                return VelocityPair::velocity_only(ut);
            }
            let flux = (u * u).zip_map(&(rho * rho), |p, r| 1.5 * p - r).dealias();
            let source = dealiased_product(rho, &ux);
            let forcing = derivative(&flux).zip_map(&source, |p, q| p + q);
            let ut = (-&advection).zip_map(&apply_a_inv(&forcing), |p, q| p - q);
            let rhox = derivative(rho);
            let rt = (u * &rhox).zip_map(&(rho * &ux), |p, q| -(p + 2.0 * q)).dealias();
            VelocityPair::new(ut, rt)
        }
    }
}

/// Momentum-form right-hand side `(m_t, ρ_t)` with `m = A u`:
///
/// ```text
/// 2CH: m_t = -u m_x - 2 m u_x - ρ ρ_x,          ρ_t = -(ρ u)_x
/// 2DP: m_t = -3 m u_x - m_x u - ρ u_x + 2 ρ ρ_x,  ρ_t = -2 ρ u_x - ρ_x u
/// ```
///
/// Independent of [`rhs`]; `A` applied to the velocity slot of [`rhs`]
/// must agree with the momentum slot here.
pub fn rhs_strong_m_form(model: Model, state: &VelocityPair) -> VelocityPair {
    let u = &state.u;
    let rho = &state.rho;
    let m = apply_a(u);
    let mx = derivative(&m);
    let ux = derivative(u);
    let rhox = derivative(rho);
    let zero = PeriodicField::zeros(u.grid());
    let (mt, rt) = match model {
        Model::Ch => ((u * &mx).zip_map(&(&m * &ux), |p, q| -p - 2.0 * q), zero),
        Model::Dp => ((&m * &ux).zip_map(&(&mx * u), |p, q| -3.0 * p - q), zero),
        Model::Ch2 => {
            let mt = (u * &mx)
                .zip_map(&(&m * &ux), |p, q| -p - 2.0 * q)
                .zip_map(&(rho * &rhox), |p, r| p - r);
            let rt = derivative(&(rho * u)).map(|v| -v);
            (mt, rt)
        }
        Model::Dp2 => {
            let mt = (&m * &ux)
                .zip_map(&(&mx * u), |p, q| -3.0 * p - q)
                .zip_map(&(rho * &ux), |p, r| p - r)
                .zip_map(&(rho * &rhox), |p, r| p + 2.0 * r);
            let rt = (rho * &ux).zip_map(&(&rhox * u), |p, q| -2.0 * p - q);
            (mt, rt)
        }
    };
    VelocityPair::new(mt.dealias(), rt.dealias())
}

/// One RK4 step; the result is dealiased.
pub fn step_rk4(model: Model, state: &VelocityPair, dt: f64) -> Result<VelocityPair> {
    let next = rk4_step(state, dt, |s| Ok(rhs(model, s)))?;
    Ok(next.dealias())
}

/// Metric energy `⟨(u,ρ),(u,ρ)⟩`. Conserved along CH and 2CH solutions;
/// only recorded for DP and 2DP.
pub fn conserved_energy(state: &VelocityPair) -> f64 {
    metric(state, state)
}

/// `(∫ m dx, ∫ ρ dx)`. Both are conserved for 2CH; `∫ m dx` for CH and DP.
pub fn mean_invariants(state: &VelocityPair, model: Model) -> (f64, f64) {
    let mean_m = apply_a(&state.u).mean();
    let mean_rho = if model.is_two_component() {
        state.rho.mean()
    } else {
        0.0
    };
    (mean_m, mean_rho)
}

/// `(min u_x, max |ρ_x|)`.
pub fn slope_functionals(state: &VelocityPair) -> (f64, f64) {
    (derivative(&state.u).min(), derivative(&state.rho).max_abs())
}

pub(crate) fn check_thresholds(config: &EvolutionConfig, state: &VelocityPair) -> Option<BlowupReason> {
    let (min_ux, max_rhox) = slope_functionals(state);
    if !(min_ux.is_finite() && max_rhox.is_finite()) {
        Some(BlowupReason::NonFinite)
    } else if min_ux < config.blowup_slope_threshold {
        Some(BlowupReason::MinUx)
    } else if max_rhox > config.blowup_rhox_threshold {
        Some(BlowupReason::MaxAbsRhox)
    } else {
        None
    }
}

/// Integrates from `t = 0` to `config.t_end`, stopping early on a threshold
/// crossing. The state is checked after every step; snapshots and
/// diagnostics are kept every `diagnostics_stride` steps, at the final
/// time, and at the moment blow-up is detected.
pub fn evolve(config: &EvolutionConfig, initial: &VelocityPair) -> Result<Evolution> {
    config.validate()?;
    if initial.grid().n() != config.grid_n {
        return Err(Error::GridMismatch {
            left: config.grid_n,
            right: initial.grid().n(),
        });
    }
    let model = config.model;
    let mut state = if model.is_two_component() {
        initial.dealias()
    } else {
        VelocityPair::velocity_only(initial.u.dealias())
    };

    let mut out = Evolution {
        times: vec![0.0],
        trajectory: vec![state.clone()],
        diagnostics: vec![DiagnosticsRecord::of(model, 0.0, &state)],
        status: RunStatus::Completed,
    };
    if let Some(reason) = check_thresholds(config, &state) {
        out.status = RunStatus::BlowupDetected { t: 0.0, reason };
        return Ok(out);
    }

    let (full, partial) = step_schedule(config.dt, config.t_end);
    let total = full + usize::from(partial.is_some());
    for step in 1..=total {
        let h = if step > full { partial.unwrap_or(config.dt) } else { config.dt };
        let t = if step > full { config.t_end } else { step as f64 * config.dt };
        let reason = match step_rk4(model, &state, h) {
            Ok(next) => {
                state = next;
                check_thresholds(config, &state)
            }
            Err(Error::NonFinite) => Some(BlowupReason::NonFinite),
            Err(e) => return Err(e),
        };
        if let Some(reason) = reason {
            if reason != BlowupReason::NonFinite {
                out.times.push(t);
                out.trajectory.push(state.clone());
                out.diagnostics.push(DiagnosticsRecord::of(model, t, &state));
            }
            out.status = RunStatus::BlowupDetected { t, reason };
            return Ok(out);
        }
        if step % config.diagnostics_stride == 0 || step == total {
            out.times.push(t);
            out.trajectory.push(state.clone());
            out.diagnostics.push(DiagnosticsRecord::of(model, t, &state));
        }
    }
    Ok(out)
}

//! Christoffel maps at the identity, the operator `B`, the algebra bracket
//! and the right-invariant metric on `T_(id,0) G ≅ F(S¹) × F(S¹)`.
//!
//! Every quadratic product is formed pointwise and dealiased with the 2/3
//! rule before `∂_x` or `A⁻¹` touches it, so outputs stay spectrally clean
//! under repeated application.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::spectral::{apply_a, apply_a_inv, derivative, inner_h1, inner_l2, Grid, PeriodicField};
use crate::Error;

/// Which system's connection to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "ch")]
    Ch,
    #[serde(rename = "dp")]
    Dp,
    #[serde(rename = "2ch")]
    Ch2,
    #[serde(rename = "2dp")]
    Dp2,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Ch, Model::Dp, Model::Ch2, Model::Dp2];

    /// Single-component models carry `ρ ≡ 0`.
    pub fn is_two_component(self) -> bool {
        matches!(self, Model::Ch2 | Model::Dp2)
    }

    /// CH and 2CH come from the `H¹ × L²` metric; DP and 2DP do not.
    pub fn is_metric(self) -> bool {
        matches!(self, Model::Ch | Model::Ch2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Ch => "ch",
            Model::Dp => "dp",
            Model::Ch2 => "2ch",
            Model::Dp2 => "2dp",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ch" => Ok(Model::Ch),
            "dp" => Ok(Model::Dp),
            "2ch" | "ch2" => Ok(Model::Ch2),
            "2dp" | "dp2" => Ok(Model::Dp2),
            other => Err(Error::InvalidConfig(format!(
                "unknown model '{other}' (expected ch, dp, 2ch or 2dp)"
            ))),
        }
    }
}

/// Algebra element `(u, ρ)`: velocity and density.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityPair {
    pub u: PeriodicField,
    pub rho: PeriodicField,
}

impl VelocityPair {
    pub fn new(u: PeriodicField, rho: PeriodicField) -> Self {
        assert!(u.grid() == rho.grid(), "components on different grids");
        Self { u, rho }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::new(PeriodicField::zeros(grid), PeriodicField::zeros(grid))
    }

    /// `(u, 0)`.
    pub fn velocity_only(u: PeriodicField) -> Self {
        let rho = PeriodicField::zeros(u.grid());
        Self { u, rho }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn dealias(&self) -> Self {
        Self::new(self.u.dealias(), self.rho.dealias())
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.rho.is_finite()
    }

    /// Max over both components of the max-norm difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.u
            .max_abs_diff(&other.u)
            .max(self.rho.max_abs_diff(&other.rho))
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.rho.max_abs())
    }
}

impl Add for &VelocityPair {
    type Output = VelocityPair;
    fn add(self, rhs: Self) -> VelocityPair {
        VelocityPair::new(&self.u + &rhs.u, &self.rho + &rhs.rho)
    }
}

impl Sub for &VelocityPair {
    type Output = VelocityPair;
    fn sub(self, rhs: Self) -> VelocityPair {
        VelocityPair::new(&self.u - &rhs.u, &self.rho - &rhs.rho)
    }
}

impl Mul<&VelocityPair> for f64 {
    type Output = VelocityPair;
    fn mul(self, rhs: &VelocityPair) -> VelocityPair {
        VelocityPair::new(self * &rhs.u, self * &rhs.rho)
    }
}

/// Dealiased pointwise product.
fn product(a: &PeriodicField, b: &PeriodicField) -> PeriodicField {
    (a * b).dealias()
}

/// CH Christoffel operator `-A⁻¹∂_x(uv + ½u_x v_x)`.
pub fn gamma0_ch(u: &PeriodicField, v: &PeriodicField) -> PeriodicField {
    let ux = derivative(u);
    let vx = derivative(v);
    let s = (u * v).zip_map(&(&ux * &vx), |a, b| a + 0.5 * b).dealias();
    -&apply_a_inv(&derivative(&s))
}

/// DP Christoffel operator `-(3/2)A⁻¹∂_x(uv)`.
pub fn gamma0_dp(u: &PeriodicField, v: &PeriodicField) -> PeriodicField {
    let s = (1.5 * &(u * v)).dealias();
    -&apply_a_inv(&derivative(&s))
}

/// 2CH Christoffel map
/// `(Γ⁰(u,v) - ½A⁻¹∂_x(ρτ), -½(u_x τ + v_x ρ))`.
pub fn gamma_2ch(a: &VelocityPair, b: &VelocityPair) -> VelocityPair {
    let ux = derivative(&a.u);
    let vx = derivative(&b.u);
    let uv = &a.u * &b.u;
    let uxvx = &ux * &vx;
    let rt = &a.rho * &b.rho;
    let flux = PeriodicField::from_values(
        a.grid(),
        uv.values()
            .iter()
            .zip(uxvx.values())
            .zip(rt.values())
            .map(|((p, q), r)| p + 0.5 * q + 0.5 * r)
            .collect(),
    )
    .dealias();
    let first = -&apply_a_inv(&derivative(&flux));
    let second = (&ux * &b.rho)
        .zip_map(&(&vx * &a.rho), |p, q| -0.5 * (p + q))
        .dealias();
    VelocityPair::new(first, second)
}

/// 2DP Christoffel map
/// `(Γ⁰(u,v) - ½A⁻¹(u_x τ + v_x ρ) + A⁻¹∂_x(ρτ), -(u_x τ + v_x ρ))`
/// with the DP operator `Γ⁰`.
pub fn gamma_2dp(a: &VelocityPair, b: &VelocityPair) -> VelocityPair {
    let ux = derivative(&a.u);
    let vx = derivative(&b.u);
    let cross = (&ux * &b.rho).zip_map(&(&vx * &a.rho), |p, q| p + q).dealias();
    let flux = (&a.u * &b.u)
        .zip_map(&(&a.rho * &b.rho), |p, q| 1.5 * p - q)
        .dealias();
    let inner = derivative(&flux).zip_map(&cross, |p, q| p + 0.5 * q);
    let first = -&apply_a_inv(&inner);
    let second = -&cross;
    VelocityPair::new(first, second)
}

/// `B(a, b) = (-A⁻¹(2 b₁ₓ A a₁ + b₁ (A a₁)ₓ + a₂ b₂ₓ), -(a₂ b₁)ₓ)`, the
/// metric transpose of the bracket: `⟨B(a,b), c⟩ = ⟨a, [b,c]⟩`.
pub fn bilinear_b(a: &VelocityPair, b: &VelocityPair) -> VelocityPair {
    let m = apply_a(&a.u);
    let mx = derivative(&m);
    let b1x = derivative(&b.u);
    let b2x = derivative(&b.rho);
    let t1 = &b1x * &m;
    let t2 = &b.u * &mx;
    let t3 = &a.rho * &b2x;
    let sum = PeriodicField::from_values(
        a.grid(),
        t1.values()
            .iter()
            .zip(t2.values())
            .zip(t3.values())
            .map(|((p, q), r)| 2.0 * p + q + r)
            .collect(),
    )
    .dealias();
    let first = -&apply_a_inv(&sum);
    let second = -&derivative(&product(&a.rho, &b.u));
    VelocityPair::new(first, second)
}

/// Lie bracket of the semidirect-product algebra, in the sign convention
/// that makes `B` its metric transpose:
/// `[a, b] = (b₁ₓ a₁ - a₁ₓ b₁, b₂ₓ a₁ - a₂ₓ b₁)`.
pub fn bracket(a: &VelocityPair, b: &VelocityPair) -> VelocityPair {
    let a1x = derivative(&a.u);
    let b1x = derivative(&b.u);
    let a2x = derivative(&a.rho);
    let b2x = derivative(&b.rho);
    let first = (&b1x * &a.u).zip_map(&(&a1x * &b.u), |p, q| p - q).dealias();
    let second = (&b2x * &a.u).zip_map(&(&a2x * &b.u), |p, q| p - q).dealias();
    VelocityPair::new(first, second)
}

/// The 2CH Christoffel map assembled from `B`:
/// `½[((a₁b₁)ₓ, a₂ₓb₁ + b₂ₓa₁) + B(a,b) + B(b,a)]`.
pub fn gamma_2ch_from_b(a: &VelocityPair, b: &VelocityPair) -> VelocityPair {
    let transport = VelocityPair::new(
        derivative(&product(&a.u, &b.u)),
        (&derivative(&a.rho) * &b.u)
            .zip_map(&(&derivative(&b.rho) * &a.u), |p, q| p + q)
            .dealias(),
    );
    let sum = &(&transport + &bilinear_b(a, b)) + &bilinear_b(b, a);
    0.5 * &sum
}

/// Right-invariant metric at the identity, `⟨u,v⟩_{H¹} + ⟨ρ,τ⟩_{L²}`.
///
/// Panics if the pairs live on different grids.
pub fn metric(a: &VelocityPair, b: &VelocityPair) -> f64 {
    let h1 = inner_h1(&a.u, &b.u).expect("metric: grid mismatch");
    let l2 = inner_l2(&a.rho, &b.rho).expect("metric: grid mismatch");
    h1 + l2
}

/// Christoffel map of `model`. Single-component models ignore the density
/// slots and return `(Γ⁰(u, v), 0)`.
pub fn christoffel(model: Model, a: &VelocityPair, b: &VelocityPair) -> VelocityPair {
    match model {
        Model::Ch => VelocityPair::velocity_only(gamma0_ch(&a.u, &b.u)),
        Model::Dp => VelocityPair::velocity_only(gamma0_dp(&a.u, &b.u)),
        Model::Ch2 => gamma_2ch(a, b),
        Model::Dp2 => gamma_2dp(a, b),
    }
}

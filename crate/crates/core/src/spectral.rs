//! Periodic Fourier grid on the unit circle `[0, 1)`.
//!
//! Fields are stored as physical samples; their normalized DFT coefficients
//! are computed on first use and cached. All linear operators (derivative,
//! Helmholtz operator `A = 1 - d²/dx²` and its inverse, dealiasing) act as
//! diagonal multipliers on the coefficients. Off-grid evaluation sums the
//! truncated Fourier series exactly, which is what composition with a
//! diffeomorphism and diffeomorphism inversion are built on.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Smallest admissible grid.
pub const MIN_GRID_SIZE: usize = 16;

/// Newton iterations allowed in [`invert_diffeo`].
pub const MAX_NEWTON_ITERS: usize = 50;

const NEWTON_TOL: f64 = 1e-14;

struct GridInner {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform grid `x_j = j / n` with cached FFT plans. Cheap to clone.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("grid size must be even, got {n}")));
        }
        if n < MIN_GRID_SIZE {
            return Err(Error::InvalidGrid(format!(
                "grid size must be at least {MIN_GRID_SIZE}, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner { n, forward, inverse }),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 / self.n() as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.point(j)).collect()
    }

    /// Signed integer mode of DFT index `j`; the Nyquist index maps to `+n/2`.
    #[inline]
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n();
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// Angular frequency `2πk` of DFT index `j`.
    #[inline]
    pub fn angular(&self, j: usize) -> f64 {
        2.0 * PI * self.mode(j) as f64
    }

    /// Largest mode kept by the 2/3 rule: quadratic products of fields
    /// restricted to `|k| <= cutoff` are alias-free on this grid.
    pub fn dealias_cutoff(&self) -> usize {
        (self.n() - 1) / 3
    }

    fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let n = self.n();
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inner.forward.process(&mut buf);
        let scale = 1.0 / n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inner.inverse.process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n() == other.n()
    }
}

impl Eq for Grid {}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n()).finish()
    }
}

/// Real periodic function sampled on a [`Grid`].
#[derive(Clone)]
pub struct PeriodicField {
    grid: Grid,
    values: Vec<f64>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl PeriodicField {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n(), "sample count does not match grid");
        Self {
            grid: grid.clone(),
            values,
            coeffs: OnceLock::new(),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n()).map(|j| f(grid.point(j))).collect();
        Self::from_values(grid, values)
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_values(grid, vec![c; grid.n()])
    }

    /// `amp * cos(2π m x)`.
    pub fn cosine(grid: &Grid, mode: u32, amp: f64) -> Self {
        let w = 2.0 * PI * mode as f64;
        Self::from_fn(grid, |x| amp * (w * x).cos())
    }

    /// Builds a field from normalized coefficients. Conjugate symmetry is
    /// not enforced; the imaginary part of the synthesis is discarded.
    pub fn from_spectrum(grid: &Grid, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.n());
        let values = grid.inverse(&coeffs);
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Normalized DFT coefficients `c_k = (1/n) Σ_j f_j e^{-2πi k j / n}`.
    pub fn spectrum(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| self.grid.forward(&self.values))
    }

    fn map_spectrum(&self, mult: impl Fn(usize) -> f64) -> Self {
        let coeffs = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(j, &c)| c * mult(j))
            .collect();
        Self::from_spectrum(&self.grid, coeffs)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_same_grid(self, other);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(&self.grid, values)
    }

    /// Zeroes every mode with `|k| > n/3` (the Nyquist mode included).
    pub fn dealias(&self) -> Self {
        let cutoff = self.grid.dealias_cutoff() as i64;
        let grid = &self.grid;
        self.map_spectrum(|j| if grid.mode(j).abs() <= cutoff { 1.0 } else { 0.0 })
    }

    /// Zeroes every mode with `|k| > max_mode`.
    pub fn truncate(&self, max_mode: usize) -> Self {
        let grid = &self.grid;
        self.map_spectrum(|j| {
            if grid.mode(j).unsigned_abs() as usize <= max_mode {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Max-norm distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_same_grid(self, other);
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl fmt::Debug for PeriodicField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicField")
            .field("n", &self.grid.n())
            .field("values", &self.values)
            .finish()
    }
}

impl PartialEq for PeriodicField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

pub(crate) fn assert_same_grid(a: &PeriodicField, b: &PeriodicField) {
    assert!(
        a.grid == b.grid,
        "fields live on different grids ({} vs {})",
        a.grid.n(),
        b.grid.n()
    );
}

impl Add for &PeriodicField {
    type Output = PeriodicField;
    fn add(self, rhs: Self) -> PeriodicField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &PeriodicField {
    type Output = PeriodicField;
    fn sub(self, rhs: Self) -> PeriodicField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

/// Pointwise product in physical space. Not dealiased.
impl Mul for &PeriodicField {
    type Output = PeriodicField;
    fn mul(self, rhs: Self) -> PeriodicField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<&PeriodicField> for f64 {
    type Output = PeriodicField;
    fn mul(self, rhs: &PeriodicField) -> PeriodicField {
        rhs.map(|v| self * v)
    }
}

impl Neg for &PeriodicField {
    type Output = PeriodicField;
    fn neg(self) -> PeriodicField {
        self.map(|v| -v)
    }
}

/// `∂_x` via the multiplier `i 2πk`; the Nyquist mode is dropped.
pub fn derivative(field: &PeriodicField) -> PeriodicField {
    let grid = field.grid();
    let nyquist = grid.n() / 2;
    let coeffs = field
        .spectrum()
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            if j == nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                c * Complex64::new(0.0, grid.angular(j))
            }
        })
        .collect();
    PeriodicField::from_spectrum(grid, coeffs)
}

/// Helmholtz operator `A = 1 - ∂_x²`, multiplier `1 + (2πk)²`.
pub fn apply_a(field: &PeriodicField) -> PeriodicField {
    let grid = field.grid();
    field.map_spectrum(|j| 1.0 + grid.angular(j).powi(2))
}

/// `A⁻¹`, multiplier `1 / (1 + (2πk)²)`.
pub fn apply_a_inv(field: &PeriodicField) -> PeriodicField {
    let grid = field.grid();
    field.map_spectrum(|j| 1.0 / (1.0 + grid.angular(j).powi(2)))
}

/// `∫₀¹ f g dx` by the trapezoid rule, which is exact for trigonometric
/// products resolved on the grid.
pub fn inner_l2(f: &PeriodicField, g: &PeriodicField) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch {
            left: f.grid().n(),
            right: g.grid().n(),
        });
    }
    let sum: f64 = f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum();
    Ok(sum / f.grid().n() as f64)
}

/// `∫₀¹ (f g + f_x g_x) dx`.
pub fn inner_h1(f: &PeriodicField, g: &PeriodicField) -> Result<f64> {
    let l2 = inner_l2(f, g)?;
    Ok(l2 + inner_l2(&derivative(f), &derivative(g))?)
}

/// Evaluates the trigonometric interpolants of several fields (all on the
/// same grid) and optionally their derivatives at arbitrary points.
///
/// Uses Horner's rule in `z = e^{2πiy}`, `O(n)` per point and field.
pub(crate) fn eval_series(
    fields: &[&PeriodicField],
    points: &[f64],
    with_derivative: bool,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let Some(first) = fields.first() else {
        return (Vec::new(), Vec::new());
    };
    let grid = first.grid().clone();
    let n = grid.n();
    let half = n / 2;
    let specs: Vec<&[Complex64]> = fields
        .iter()
        .map(|f| {
            assert_same_grid(first, f);
            f.spectrum()
        })
        .collect();
    // Derivative coefficients i 2πk c_k for k = 1..half-1.
    let dspecs: Vec<Vec<Complex64>> = if with_derivative {
        specs
            .iter()
            .map(|s| {
                (0..half)
                    .map(|k| s[k] * Complex64::new(0.0, 2.0 * PI * k as f64))
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut values = vec![vec![0.0; points.len()]; fields.len()];
    let mut derivs = vec![vec![0.0; if with_derivative { points.len() } else { 0 }]; fields.len()];

    let horner = |c: &[Complex64], z: Complex64| -> Complex64 {
        // Σ_{k=1}^{half-1} c_k z^k
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (1..half).rev() {
            acc = acc * z + c[k];
        }
        acc * z
    };

    for (p, &y) in points.iter().enumerate() {
        let theta = 2.0 * PI * y;
        let z = Complex64::new(theta.cos(), theta.sin());
        let nyq = (PI * n as f64 * y).cos();
        for (i, s) in specs.iter().enumerate() {
            values[i][p] = s[0].re + 2.0 * horner(s, z).re + s[half].re * nyq;
            if with_derivative {
                derivs[i][p] = 2.0 * horner(&dspecs[i], z).re;
            }
        }
    }
    (values, derivs)
}

/// Orientation-preserving circle diffeomorphism `φ(x) = x + ψ(x)` with
/// periodic displacement `ψ`; the Jacobian `φ_x = 1 + ψ_x` is cached.
#[derive(Clone, Debug)]
pub struct Diffeo {
    displacement: PeriodicField,
    jacobian: PeriodicField,
}

impl Diffeo {
    /// Fails when `min φ_x <= 0` on the grid.
    pub fn new(displacement: PeriodicField) -> Result<Self> {
        let jacobian = derivative(&displacement).map(|v| 1.0 + v);
        let min = jacobian.min();
        if !(min > 0.0) {
            return Err(Error::NonPositiveJacobian { min });
        }
        Ok(Self {
            displacement,
            jacobian,
        })
    }

    pub fn identity(grid: &Grid) -> Self {
        Self {
            displacement: PeriodicField::zeros(grid),
            jacobian: PeriodicField::constant(grid, 1.0),
        }
    }

    /// Rigid rotation `x ↦ x + s`.
    pub fn shift(grid: &Grid, s: f64) -> Self {
        Self {
            displacement: PeriodicField::constant(grid, s),
            jacobian: PeriodicField::constant(grid, 1.0),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.displacement.grid()
    }

    pub fn displacement(&self) -> &PeriodicField {
        &self.displacement
    }

    pub fn jacobian(&self) -> &PeriodicField {
        &self.jacobian
    }

    /// Sample values `φ(x_j) = x_j + ψ(x_j)` (not reduced mod 1).
    pub fn values(&self) -> Vec<f64> {
        let grid = self.grid();
        self.displacement
            .values()
            .iter()
            .enumerate()
            .map(|(j, &d)| grid.point(j) + d)
            .collect()
    }

    /// `φ` evaluated at arbitrary points.
    pub fn eval(&self, points: &[f64]) -> Vec<f64> {
        let (vals, _) = eval_series(&[&self.displacement], points, false);
        points.iter().zip(&vals[0]).map(|(y, d)| y + d).collect()
    }
}

/// `x_j ↦ field(φ(x_j))` by exact summation of the truncated series.
pub fn compose(field: &PeriodicField, phi: &Diffeo) -> PeriodicField {
    compose_many(&[field], phi).pop().expect("one field in, one out")
}

/// [`compose`] for several fields sharing one diffeomorphism.
pub fn compose_many(fields: &[&PeriodicField], phi: &Diffeo) -> Vec<PeriodicField> {
    if let Some(f) = fields.first() {
        assert!(f.grid() == phi.grid(), "field and diffeomorphism on different grids");
    }
    let points = phi.values();
    let (vals, _) = eval_series(fields, &points, false);
    vals.into_iter()
        .map(|v| PeriodicField::from_values(phi.grid(), v))
        .collect()
}

/// Inverse diffeomorphism by Newton's method, seeded by piecewise-linear
/// interpolation of the monotone samples `(x_j, φ(x_j))`.
pub fn invert_diffeo(phi: &Diffeo) -> Result<Diffeo> {
    let grid = phi.grid();
    let n = grid.n();
    let samples = phi.values();

    // Pairs (x_j + m, φ(x_j) + m) for integer m sample φ as well. Shift by the
    // integer part of the mean displacement so the targets in [0, 1) are
    // bracketed even after long transport.
    let base = phi.displacement().mean().floor();
    let mut ext_x = Vec::with_capacity(5 * n + 1);
    let mut ext_phi = Vec::with_capacity(5 * n + 1);
    for m in -2..=2 {
        let shift = m as f64 - base;
        for j in 0..n {
            ext_x.push(grid.point(j) + shift);
            ext_phi.push(samples[j] + shift);
        }
    }
    ext_x.push(3.0 - base);
    ext_phi.push(samples[0] + 3.0 - base);
    if ext_phi.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InversionFailed(
            "sampled diffeomorphism is not monotone".into(),
        ));
    }

    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let target = grid.point(i);
            let idx = ext_phi.partition_point(|&p| p <= target);
            let (lo, hi) = (idx.saturating_sub(1), idx.min(ext_phi.len() - 1));
            if lo == hi {
                ext_x[lo]
            } else {
                let t = (target - ext_phi[lo]) / (ext_phi[hi] - ext_phi[lo]);
                ext_x[lo] + t * (ext_x[hi] - ext_x[lo])
            }
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_NEWTON_ITERS {
        let (vals, ders) = eval_series(&[phi.displacement()], &y, true);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let target = grid.point(i);
            let residual = y[i] + vals[0][i] - target;
            let slope = 1.0 + ders[0][i];
            if !(slope > 0.0) {
                return Err(Error::InversionFailed(format!(
                    "non-positive slope {slope} during Newton iteration"
                )));
            }
            y[i] -= residual / slope;
            worst = worst.max(residual.abs());
        }
        if worst <= NEWTON_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::InversionFailed(format!(
            "Newton did not converge in {MAX_NEWTON_ITERS} iterations"
        )));
    }

    let displacement: Vec<f64> = (0..n).map(|i| y[i] - grid.point(i)).collect();
    Diffeo::new(PeriodicField::from_values(grid, displacement))
}

//! Unnormalized sectional curvature of the 2CH metric,
//!
//! ```text
//! S(u, v) = ⟨Γ(u,v), Γ(u,v)⟩ - ⟨Γ(u,u), Γ(v,v)⟩,
//! ```
//!
//! evaluated numerically from the Christoffel map, and in closed form for
//! directions `u = (cos k₁x, cos k₂x)`, `v = (cos l₁x, cos l₂x)`.

use std::f64::consts::PI;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connection::{gamma_2ch, metric, VelocityPair};
use crate::spectral::{Grid, PeriodicField};
use crate::{Error, Result};

/// Gram determinants at or below this are treated as parallel directions.
pub const GRAM_FLOOR: f64 = 1e-12;

/// Lower bound on `Sec` for the family with vanishing first components.
pub const SEC_LOWER_BOUND: f64 = 0.125;

/// Cosine directions given by integer modes `m`, wavenumber `2πm`.
///
/// With `first_components_zero`, `k1` and `l1` are ignored and
/// `u = (0, cos k₂x)`, `v = (0, cos l₂x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CosineDirectionPair {
    pub k1: u32,
    pub k2: u32,
    pub l1: u32,
    pub l2: u32,
    pub first_components_zero: bool,
}

impl CosineDirectionPair {
    pub fn new(k1: u32, k2: u32, l1: u32, l2: u32) -> Result<Self> {
        let dir = Self {
            k1,
            k2,
            l1,
            l2,
            first_components_zero: false,
        };
        dir.validate()?;
        Ok(dir)
    }

    pub fn second_only(k2: u32, l2: u32) -> Result<Self> {
        let dir = Self {
            k1: 0,
            k2,
            l1: 0,
            l2,
            first_components_zero: true,
        };
        dir.validate()?;
        Ok(dir)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDirection(msg));
        if self.k2 == 0 || self.l2 == 0 {
            return bad(format!("modes must be positive, got k2={} l2={}", self.k2, self.l2));
        }
        if !self.first_components_zero && (self.k1 == 0 || self.l1 == 0) {
            return bad(format!("modes must be positive, got k1={} l1={}", self.k1, self.l1));
        }
        if self.is_degenerate() {
            return bad(format!("u = v for modes {:?}", self.modes()));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.k2 == self.l2 && (self.first_components_zero || self.k1 == self.l1)
    }

    /// `[k1, k2, l1, l2]`, with zeros in the first slots for the second-only family.
    pub fn modes(&self) -> [u32; 4] {
        if self.first_components_zero {
            [0, self.k2, 0, self.l2]
        } else {
            [self.k1, self.k2, self.l1, self.l2]
        }
    }

    /// Sampled `(u, v)` on `grid`.
    pub fn fields(&self, grid: &Grid) -> (VelocityPair, VelocityPair) {
        let first = |m: u32| {
            if self.first_components_zero {
                PeriodicField::zeros(grid)
            } else {
                PeriodicField::cosine(grid, m, 1.0)
            }
        };
        (
            VelocityPair::new(first(self.k1), PeriodicField::cosine(grid, self.k2, 1.0)),
            VelocityPair::new(first(self.l1), PeriodicField::cosine(grid, self.l2, 1.0)),
        )
    }
}

/// `S(u, v)` from the 2CH Christoffel map.
pub fn curvature_s(u: &VelocityPair, v: &VelocityPair) -> f64 {
    let guv = gamma_2ch(u, v);
    let guu = gamma_2ch(u, u);
    let gvv = gamma_2ch(v, v);
    metric(&guv, &guv) - metric(&guu, &gvv)
}

/// `⟨u,u⟩⟨v,v⟩ - ⟨u,v⟩²`.
pub fn gram(u: &VelocityPair, v: &VelocityPair) -> f64 {
    let uv = metric(u, v);
    metric(u, u) * metric(v, v) - uv * uv
}

/// `S(u,v)` divided by the Gram determinant.
pub fn sectional(u: &VelocityPair, v: &VelocityPair) -> Result<f64> {
    let g = gram(u, v);
    if !(g > GRAM_FLOOR) {
        return Err(Error::DegeneratePlane {
            gram: g,
            threshold: GRAM_FLOOR,
        });
    }
    Ok(curvature_s(u, v) / g)
}

fn wavenumber(m: u32) -> f64 {
    2.0 * PI * m as f64
}

/// Closed-form `S_CH(cos kx, cos lx)` for integer modes `k ≠ l`.
pub fn closedform_s_ch(k: u32, l: u32) -> Result<f64> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidDirection(format!("modes must be positive, got {k}, {l}")));
    }
    if k == l {
        return Err(Error::InvalidDirection(format!(
            "closed form requires distinct modes, got {k} twice"
        )));
    }
    let (k, l) = (wavenumber(k), wavenumber(l));
    let d = (k - l) * (k - l);
    let s = (k + l) * (k + l);
    Ok(((1.0 + 0.5 * k * l).powi(2) / (1.0 + d) * d + (1.0 - 0.5 * k * l).powi(2) / (1.0 + s) * s)
        / 8.0)
}

/// The four integrals `I₁..I₄` in closed form. Every Kronecker delta is an
/// integer comparison of mode numbers.
pub fn closedform_i(dir: &CosineDirectionPair) -> [f64; 4] {
    let (mk2, ml2) = (dir.k2 as i64, dir.l2 as i64);
    let (k2, l2) = (wavenumber(dir.k2), wavenumber(dir.l2));
    let delta = |a: i64, b: i64| if a == b { 1.0 } else { 0.0 };

    let dm = (k2 - l2) * (k2 - l2);
    let sm = (k2 + l2) * (k2 + l2);
    let i1 = (dm / (1.0 + dm) + sm / (1.0 + sm)) / 32.0;
    let i2 = -k2 * k2 / (1.0 + 4.0 * k2 * k2) * delta(mk2, ml2) / 8.0;
    if dir.first_components_zero {
        return [i1, i2, 0.0, 0.0];
    }

    let (mk1, ml1) = (dir.k1 as i64, dir.l1 as i64);
    let (k1, l1) = (wavenumber(dir.k1), wavenumber(dir.l1));
    let plus = delta(mk1 + ml1, mk2 - ml2) + delta(mk1 + ml1, ml2 - mk2) + delta(mk1 + ml1, mk2 + ml2);
    let minus = delta(mk1 - ml1, mk2 - ml2)
        + delta(mk1 - ml1, ml2 - mk2)
        + delta(mk1 - ml1, mk2 + ml2)
        + delta(ml1 - mk1, mk2 + ml2);
    let sp = (k1 + l1) * (k1 + l1);
    let sd = (k1 - l1) * (k1 - l1);
    let i3 = (1.0 - 0.5 * k1 * l1) * sp / (1.0 + sp) * plus / 8.0
        + (1.0 + 0.5 * k1 * l1) * sd / (1.0 + sd) * minus / 8.0
        - k1 * k1 / 4.0 * (1.0 - 0.5 * k1 * k1) / (1.0 + 4.0 * k1 * k1) * delta(mk1, ml2)
        - l1 * l1 / 4.0 * (1.0 - 0.5 * l1 * l1) / (1.0 + 4.0 * l1 * l1) * delta(mk2, ml1);
    let i4 = k1 * k1 * (1.0 - 0.5 * delta(mk1, ml2)) / 16.0
        + l1 * l1 * (1.0 - 0.5 * delta(ml1, mk2)) / 16.0
        - k1 * l1 * (minus - plus) / 16.0;
    [i1, i2, i3, i4]
}

/// `S_CH(k₁, l₁) + Σ Iⱼ`. For `k₁ = l₁` the first components coincide and
/// `S_CH(w, w) = 0`, so that term is dropped.
pub fn closedform_s(dir: &CosineDirectionPair) -> Result<f64> {
    dir.validate()?;
    let s_ch = if dir.first_components_zero || dir.k1 == dir.l1 {
        0.0
    } else {
        closedform_s_ch(dir.k1, dir.l1)?
    };
    Ok(s_ch + closedform_i(dir).iter().sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub modes: [u32; 4],
    pub first_components_zero: bool,
    pub s_numeric: f64,
    pub s_closed: f64,
    pub sec: f64,
    pub gram: f64,
}

/// All unordered direction pairs `u ≠ v` with modes in `1..=max_mode`:
/// first the full cosine family, then the family with vanishing first
/// components. Pairs with `u = v` are skipped.
pub fn scan_directions(max_mode: u32) -> Vec<CosineDirectionPair> {
    let mut out = Vec::new();
    let mut skipped = 0usize;
    let range = 1..=max_mode;
    for k1 in range.clone() {
        for k2 in range.clone() {
            for l1 in range.clone() {
                for l2 in range.clone() {
                    if (k1, k2) > (l1, l2) {
                        continue;
                    }
                    if (k1, k2) == (l1, l2) {
                        skipped += 1;
                        continue;
                    }
                    out.push(CosineDirectionPair {
                        k1,
                        k2,
                        l1,
                        l2,
                        first_components_zero: false,
                    });
                }
            }
        }
    }
    for k2 in range.clone() {
        for l2 in range.clone() {
            if k2 < l2 {
                out.push(CosineDirectionPair {
                    k1: 0,
                    k2,
                    l1: 0,
                    l2,
                    first_components_zero: true,
                });
            } else if k2 == l2 {
                skipped += 1;
            }
        }
    }
    debug!("skipped {skipped} degenerate direction pairs with u = v");
    out
}

/// Evaluates every direction from [`scan_directions`] on an `n`-point grid and
/// asserts `S > 0` everywhere and `Sec >= 1/8` on the second-only family.
pub fn positivity_scan(max_mode: u32, n: usize) -> Result<Vec<ScanRow>> {
    if max_mode < 2 {
        return Err(Error::InvalidConfig(format!("max mode must be at least 2, got {max_mode}")));
    }
    if n < 16 * max_mode as usize {
        return Err(Error::InvalidConfig(format!(
            "grid of {n} points under-resolves modes up to {max_mode}; need at least {}",
            16 * max_mode
        )));
    }
    let grid = Grid::new(n)?;
    let dirs = scan_directions(max_mode);
    info!("curvature scan: {} direction pairs on {n} points", dirs.len());
    let rows: Vec<ScanRow> = dirs
        .par_iter()
        .map(|dir| -> Result<ScanRow> {
            let (u, v) = dir.fields(&grid);
            let g = gram(&u, &v);
            let s_numeric = curvature_s(&u, &v);
            Ok(ScanRow {
                modes: dir.modes(),
                first_components_zero: dir.first_components_zero,
                s_numeric,
                s_closed: closedform_s(dir)?,
                sec: sectional(&u, &v)?,
                gram: g,
            })
        })
        .collect::<Result<_>>()?;
    for row in &rows {
        if !(row.s_numeric > 0.0) {
            return Err(Error::CurvatureViolation {
                modes: row.modes,
                detail: format!("S = {:e} is not positive", row.s_numeric),
            });
        }
        if row.first_components_zero && row.sec < SEC_LOWER_BOUND - 1e-12 {
            return Err(Error::CurvatureViolation {
                modes: row.modes,
                detail: format!("Sec = {} is below 1/8", row.sec),
            });
        }
    }
    Ok(rows)
}

/// Direction pair with the smallest sectional curvature seen by
/// [`negative_curvature_search`].
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub min_sec: f64,
    pub u: VelocityPair,
    pub v: VelocityPair,
    pub trials: usize,
}

/// Random trigonometric directions with up to `max_mode` Fourier modes per
/// component. Reports the most negative sectional curvature found; the
/// result is informational only.
pub fn negative_curvature_search(grid: &Grid, max_mode: u32, trials: usize, seed: u64) -> Result<SearchOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_field = |rng: &mut ChaCha8Rng| {
        let coeffs: Vec<(f64, f64)> = (0..=max_mode)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        PeriodicField::from_fn(grid, |x| {
            coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(m, (a, b))| {
                    let arg = 2.0 * PI * m as f64 * x;
                    a * arg.cos() + b * arg.sin()
                })
                .sum::<f64>()
        })
    };
    let mut best: Option<SearchOutcome> = None;
    for _ in 0..trials {
        let u = VelocityPair::new(random_field(&mut rng), random_field(&mut rng));
        let v = VelocityPair::new(random_field(&mut rng), random_field(&mut rng));
        let Ok(sec) = sectional(&u, &v) else { continue };
        if best.as_ref().map_or(true, |b| sec < b.min_sec) {
            best = Some(SearchOutcome {
                min_sec: sec,
                u,
                v,
                trials,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("no non-degenerate direction pair sampled".into()))
}

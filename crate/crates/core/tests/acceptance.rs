//! End-to-end acceptance suite. Runs every criterion at its stated tolerance
//! and prints one PASS/FAIL line each; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use geoflow::connection::{bilinear_b, bracket, christoffel, gamma0_ch, metric};
use geoflow::curvature::{
    closedform_s_ch, curvature_s, gram, positivity_scan, sectional, CosineDirectionPair,
};
use geoflow::evolution::{
    evolve, rhs, rhs_strong_m_form, BlowupReason, EvolutionConfig, Evolution, RunStatus,
};
use geoflow::flowmap::{
    evolve_flowmap, momentum_drift, momentum_scales, reconstruct_f, FlowMapRun,
    DEFAULT_JACOBIAN_FLOOR,
};
use geoflow::rigidbody::{ad_star_check, evolve_rigidbody, RigidBodyState};
use geoflow::spectral::{apply_a_inv, compose, derivative, inner_h1, invert_diffeo};
use geoflow::{Diffeo, Grid, Model, PeriodicField, VelocityPair};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

const SEED: u64 = 20_240_517;

fn random_field(rng: &mut ChaCha8Rng, grid: &Grid, max_mode: usize) -> PeriodicField {
    let coeffs: Vec<(f64, f64)> = (0..=max_mode)
        .map(|k| {
            let scale = 1.0 / (1.0 + k as f64);
            (scale * rng.gen_range(-1.0..1.0), scale * rng.gen_range(-1.0..1.0))
        })
        .collect();
    PeriodicField::from_fn(grid, |x| {
        coeffs[0].0
            + coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, (a, b))| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 * x;
                    a * t.cos() + b * t.sin()
                })
                .sum::<f64>()
    })
}

fn random_pair(rng: &mut ChaCha8Rng, grid: &Grid, max_mode: usize, two_component: bool) -> VelocityPair {
    let u = random_field(rng, grid, max_mode);
    if two_component {
        VelocityPair::new(u, random_field(rng, grid, max_mode))
    } else {
        VelocityPair::velocity_only(u)
    }
}

/// Shared data for criteria 6, 7, 8 and 12: `u₀ = 0.1 cos 2πx`, `ρ₀ = 0.1 cos 2πx`
/// (ρ₀ = 0 for DP) on 256 points, `dt = 1e-4`, `t ∈ [0, 1]`, thresholds ±50.
struct SmoothRuns {
    eulerian: Vec<(Model, Evolution, Duration)>,
    flow: Vec<(Model, FlowMapRun, Duration)>,
}

const SMOOTH_N: usize = 256;
const SMOOTH_DT: f64 = 1e-4;
const SMOOTH_STRIDE: usize = 10;

fn smooth_initial(grid: &Grid, model: Model) -> VelocityPair {
    let u = PeriodicField::cosine(grid, 1, 0.1);
    if model.is_two_component() {
        VelocityPair::new(u, PeriodicField::cosine(grid, 1, 0.1))
    } else {
        VelocityPair::velocity_only(u)
    }
}

fn smooth_config(model: Model) -> EvolutionConfig {
    EvolutionConfig::new(model, SMOOTH_N, SMOOTH_DT, 1.0)
        .with_stride(SMOOTH_STRIDE)
        .with_thresholds(-50.0, 50.0)
}

fn smooth_runs() -> SmoothRuns {
    let grid = Grid::new(SMOOTH_N).unwrap();
    thread::scope(|s| {
        let eulerian: Vec<_> = [Model::Ch2, Model::Dp, Model::Dp2]
            .into_iter()
            .map(|model| {
                let grid = grid.clone();
                s.spawn(move || {
                    let start = Instant::now();
                    let run = evolve(&smooth_config(model), &smooth_initial(&grid, model)).unwrap();
                    (model, run, start.elapsed())
                })
            })
            .collect();
        let flow: Vec<_> = [Model::Ch2, Model::Dp2]
            .into_iter()
            .map(|model| {
                let grid = grid.clone();
                s.spawn(move || {
                    let start = Instant::now();
                    let run = evolve_flowmap(
                        &smooth_config(model),
                        &smooth_initial(&grid, model),
                        DEFAULT_JACOBIAN_FLOOR,
                    )
                    .unwrap();
                    (model, run, start.elapsed())
                })
            })
            .collect();
        SmoothRuns {
            eulerian: eulerian.into_iter().map(|h| h.join().unwrap()).collect(),
            flow: flow.into_iter().map(|h| h.join().unwrap()).collect(),
        }
    })
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let rows = positivity_scan(4, 128).unwrap();
    let elapsed = start.elapsed();
    let worst = rows
        .iter()
        .map(|r| (r.s_numeric - r.s_closed).abs() / r.s_closed.abs())
        .fold(0.0, f64::max);
    (
        worst <= 1e-8 && elapsed < Duration::from_secs(10),
        format!("{} tuples, max rel err {worst:.2e}, {elapsed:.2?}", rows.len()),
    )
}

fn criterion_2() -> Verdict {
    let rows = positivity_scan(4, 128).unwrap();
    let min_numeric = rows.iter().map(|r| r.s_numeric).fold(f64::INFINITY, f64::min);
    let min_closed = rows.iter().map(|r| r.s_closed).fold(f64::INFINITY, f64::min);
    (
        min_numeric > 0.0 && min_closed > 0.0,
        format!("{} tuples, min S numeric {min_numeric:.4e}, closed {min_closed:.4e}", rows.len()),
    )
}

fn criterion_3() -> Verdict {
    let grid = Grid::new(128).unwrap();
    let mut worst_gram = 0.0f64;
    let mut min_sec = f64::INFINITY;
    let mut count = 0;
    for k2 in 1..=6 {
        for l2 in 1..=6 {
            if k2 == l2 {
                continue;
            }
            let (u, v) = CosineDirectionPair::second_only(k2, l2).unwrap().fields(&grid);
            worst_gram = worst_gram.max((gram(&u, &v) - 0.25).abs());
            min_sec = min_sec.min(sectional(&u, &v).unwrap());
            count += 1;
        }
    }
    (
        worst_gram <= 1e-12 && min_sec >= 0.125 - 1e-12,
        format!("{count} pairs, max |gram - 1/4| {worst_gram:.2e}, min Sec {min_sec:.6}"),
    )
}

fn criterion_4() -> Verdict {
    let grid = Grid::new(128).unwrap();
    let zero = PeriodicField::zeros(&grid);
    let mut worst_closed = 0.0f64;
    let mut worst_gamma0 = 0.0f64;
    for k in 1..=6u32 {
        for l in 1..=6u32 {
            if k == l {
                continue;
            }
            let (a, b) = (PeriodicField::cosine(&grid, k, 1.0), PeriodicField::cosine(&grid, l, 1.0));
            let s = curvature_s(
                &VelocityPair::new(a.clone(), zero.clone()),
                &VelocityPair::new(b.clone(), zero.clone()),
            );
            let closed = closedform_s_ch(k, l).unwrap();
            worst_closed = worst_closed.max((s - closed).abs() / closed);
            // S_CH straight from its definition with the one-component Γ⁰.
            let gab = gamma0_ch(&a, &b);
            let s_ch = inner_h1(&gab, &gab).unwrap()
                - inner_h1(&gamma0_ch(&a, &a), &gamma0_ch(&b, &b)).unwrap();
            worst_gamma0 = worst_gamma0.max((s - s_ch).abs() / s_ch.abs());
        }
    }
    (
        worst_closed <= 1e-9 && worst_gamma0 <= 1e-9,
        format!("rel err vs closed form {worst_closed:.2e}, vs Γ⁰ definition {worst_gamma0:.2e}"),
    )
}

fn criterion_5() -> Verdict {
    let grid = Grid::new(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_gamma = 0.0f64;
    let mut worst_strong = 0.0f64;
    for model in Model::ALL {
        for _ in 0..20 {
            let s = random_pair(&mut rng, &grid, 10, model.is_two_component());
            let weak = rhs(model, &s);
            let transport = VelocityPair::new(
                (&s.u * &derivative(&s.u)).dealias(),
                (&s.u * &derivative(&s.rho)).dealias(),
            );
            let via_gamma = &christoffel(model, &s, &s) - &transport;
            worst_gamma = worst_gamma.max(weak.max_abs_diff(&via_gamma));
            let strong = rhs_strong_m_form(model, &s);
            let via_strong = VelocityPair::new(apply_a_inv(&strong.u), strong.rho);
            worst_strong = worst_strong.max(weak.max_abs_diff(&via_strong));
        }
    }
    (
        worst_gamma <= 1e-9 && worst_strong <= 1e-9,
        format!("80 states, max |weak - Γ form| {worst_gamma:.2e}, |weak - A⁻¹ strong| {worst_strong:.2e}"),
    )
}

fn criterion_6(runs: &SmoothRuns) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (model, run, elapsed) in &runs.eulerian {
        let e0 = run.diagnostics[0].energy;
        let drift = run
            .diagnostics
            .iter()
            .map(|d| (d.energy - e0).abs() / e0)
            .fold(0.0, f64::max);
        let complete = run.status.is_completed() && (run.times.last().unwrap() - 1.0).abs() < 1e-12;
        if *model == Model::Ch2 {
            pass &= complete && drift <= 1e-7 && *elapsed < Duration::from_secs(60);
            parts.push(format!("2CH drift {drift:.2e} in {elapsed:.2?}"));
        } else {
            pass &= complete;
            parts.push(format!("{model} drift {drift:.2e} (recorded)"));
        }
    }
    (pass, parts.join(", "))
}

fn criterion_7(runs: &SmoothRuns) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (model, run, _) in &runs.flow {
        let (rho_scale, m_scale) = momentum_scales(run);
        let drifts = momentum_drift(run);
        let density = drifts.iter().map(|d| d.density).fold(0.0, f64::max) / rho_scale;
        pass &= run.status.is_completed() && density <= 1e-6;
        let label = if *model == Model::Ch2 { "(ρ∘φ)φ_x" } else { "(ρ∘φ)φ_x²" };
        parts.push(format!("{model} {label} {density:.2e}"));
        if *model == Model::Ch2 {
            let body = drifts
                .iter()
                .map(|d| d.body_momentum.expect("metric model"))
                .fold(0.0, f64::max)
                / m_scale;
            pass &= body <= 1e-6;
            parts.push(format!("2CH Ad* m₀ {body:.2e}"));
        }
    }
    (pass, parts.join(", "))
}

/// Fourth-order central difference in time of saved snapshots spaced `h`.
fn time_derivative(samples: [&PeriodicField; 5], h: f64) -> PeriodicField {
    let [m2, m1, _, p1, p2] = samples;
    let num = &(&(-p2) + &(8.0 * p1)) + &(&(-8.0 * m1) + m2);
    (1.0 / (12.0 * h)) * &num
}

fn criterion_8(runs: &SmoothRuns) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    let h = SMOOTH_DT * SMOOTH_STRIDE as f64;
    for (model, flow, _) in &runs.flow {
        let (_, euler, _) = runs
            .eulerian
            .iter()
            .find(|(m, _, _)| m == model)
            .expect("matching Eulerian run");
        let mut worst_u = 0.0f64;
        let mut worst_rho = 0.0f64;
        for i in [100usize, 250, 500, 750, 998] {
            assert!((flow.times[i] - euler.times[i]).abs() < 1e-12);
            let psi: Vec<&PeriodicField> = (i - 2..=i + 2).map(|j| flow.group[j].phi.displacement()).collect();
            let f: Vec<&PeriodicField> = (i - 2..=i + 2).map(|j| &flow.group[j].f).collect();
            let phi_t = time_derivative(psi.try_into().unwrap(), h);
            let f_t = time_derivative(f.try_into().unwrap(), h);
            let inv = invert_diffeo(&flow.group[i].phi).unwrap();
            worst_u = worst_u.max(compose(&phi_t, &inv).max_abs_diff(&euler.trajectory[i].u));
            worst_rho = worst_rho.max(compose(&f_t, &inv).max_abs_diff(&euler.trajectory[i].rho));
        }
        pass &= worst_u <= 1e-6 && worst_rho <= 1e-6;
        parts.push(format!("{model} |φ_t∘φ⁻¹ - u| {worst_u:.2e}, |f_t∘φ⁻¹ - ρ| {worst_rho:.2e}"));
    }

    // Quadrature of the reconstruction formula against the co-integrated f on
    // the same data with coarse steps, so the O(dt⁴) terms dominate roundoff.
    let grid = Grid::new(SMOOTH_N).unwrap();
    for model in [Model::Ch2, Model::Dp2] {
        let init = smooth_initial(&grid, model);
        let err = |dt: f64| {
            let cfg = EvolutionConfig::new(model, SMOOTH_N, dt, 1.0).with_stride(1);
            let run = evolve_flowmap(&cfg, &init, DEFAULT_JACOBIAN_FLOOR).unwrap();
            let history: Vec<Diffeo> = run.group.iter().map(|g| g.phi.clone()).collect();
            let f = reconstruct_f(model, &init.rho, &history, dt).unwrap();
            f.max_abs_diff(&run.group.last().unwrap().f)
        };
        let (coarse, fine) = (err(0.05), err(0.025));
        let ratio = coarse / fine;
        pass &= (12.0..=20.0).contains(&ratio);
        parts.push(format!("{model} f Richardson {ratio:.2}"));
    }
    (pass, parts.join(", "))
}

fn criterion_9() -> Verdict {
    let grid = Grid::new(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let mut worst = 0.0f64;
    let mut largest = 0.0f64;
    for _ in 0..50 {
        let a = random_pair(&mut rng, &grid, 8, true);
        let b = random_pair(&mut rng, &grid, 8, true);
        let c = random_pair(&mut rng, &grid, 8, true);
        let lhs = metric(&bilinear_b(&a, &b), &c);
        let rhs = metric(&a, &bracket(&b, &c));
        worst = worst.max((lhs - rhs).abs());
        largest = largest.max(lhs.abs());
    }
    (
        worst <= 1e-9,
        format!("50 triples, max |⟨B(a,b),c⟩ - ⟨a,[b,c]⟩| {worst:.2e} (max |⟨B(a,b),c⟩| {largest:.2e})"),
    )
}

fn criterion_10() -> Verdict {
    let start = Instant::now();
    let s0 = RigidBodyState::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(1.0, 1.0, 1.0)).unwrap();
    let traj = evolve_rigidbody(&s0, 1e-3, 10.0).unwrap();
    let elapsed = start.elapsed();
    let first = &traj[0];
    let pi0 = Vector3::from(first.spatial_momentum);
    let casimir0 = Vector3::from(first.body_momentum).norm_squared();
    let mut pi_drift = 0.0f64;
    let mut energy_drift = 0.0f64;
    let mut casimir_drift = 0.0f64;
    for s in &traj {
        pi_drift = pi_drift.max((Vector3::from(s.spatial_momentum) - pi0).norm());
        energy_drift = energy_drift.max((s.energy - first.energy).abs());
        casimir_drift = casimir_drift.max((Vector3::from(s.body_momentum).norm_squared() - casimir0).abs());
    }
    let ad_star = ad_star_check(&traj);
    let finished = (traj.last().unwrap().t - 10.0).abs() < 1e-12;
    (
        finished
            && pi_drift <= 1e-8
            && energy_drift <= 1e-8
            && casimir_drift <= 1e-8
            && ad_star <= 1e-8
            && elapsed < Duration::from_secs(5),
        format!(
            "π {pi_drift:.2e}, energy {energy_drift:.2e}, |Π|² {casimir_drift:.2e}, Ad* {ad_star:.2e}, {elapsed:.2?}"
        ),
    )
}

fn criterion_11() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    let grid = Grid::new(32).unwrap();
    for model in [Model::Ch2, Model::Dp2] {
        let init = VelocityPair::new(PeriodicField::cosine(&grid, 1, 0.1), PeriodicField::cosine(&grid, 1, 0.1));
        let solve = |dt: f64| {
            let cfg = EvolutionConfig::new(model, 32, dt, 1.0).with_stride(usize::MAX);
            evolve(&cfg, &init).unwrap().final_state().clone()
        };
        let reference = solve(1e-4);
        let ratio = solve(0.04).max_abs_diff(&reference) / solve(0.02).max_abs_diff(&reference);
        pass &= (14.0..=18.0).contains(&ratio);
        parts.push(format!("{model} {ratio:.2}"));
    }
    let s0 = RigidBodyState::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(1.0, 1.0, 1.0)).unwrap();
    let omega_end = |dt: f64| Vector3::from(evolve_rigidbody(&s0, dt, 10.0).unwrap().last().unwrap().omega);
    let reference = omega_end(1e-4);
    let ratio = (omega_end(0.02) - reference).norm() / (omega_end(0.01) - reference).norm();
    pass &= (14.0..=18.0).contains(&ratio);
    parts.push(format!("rigid body {ratio:.2}"));
    (pass, parts.join(", "))
}

fn criterion_12(runs: &SmoothRuns) -> Verdict {
    let grid = Grid::new(256).unwrap();
    let init = VelocityPair::velocity_only(PeriodicField::cosine(&grid, 3, 1.0));
    let cfg = EvolutionConfig::new(Model::Ch2, 256, 1e-4, 1.0)
        .with_stride(100)
        .with_thresholds(-50.0, 50.0);
    let run = evolve(&cfg, &init).unwrap();
    let last = run.diagnostics.last().unwrap();
    let before_ok = run.diagnostics[..run.diagnostics.len() - 1]
        .iter()
        .all(|d| d.min_ux >= -50.0 && d.max_abs_rhox <= 50.0);
    let fired = matches!(
        run.status,
        RunStatus::BlowupDetected { reason: BlowupReason::MinUx, t } if t == last.t
    ) && last.min_ux < -50.0;
    let quiet = runs.eulerian.iter().all(|(_, r, _)| r.status.is_completed())
        && runs.flow.iter().all(|(_, r, _)| r.status.is_completed());
    let t = match run.status {
        RunStatus::BlowupDetected { t, .. } => t,
        RunStatus::Completed => f64::NAN,
    };
    (
        fired && before_ok && quiet,
        format!(
            "steep 2CH run stopped at t = {t:.4} with min u_x = {:.1}; smooth runs completed: {quiet}",
            last.min_ux
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = catch_unwind(smooth_runs);
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut record = |id: u32, name: &'static str, f: &dyn Fn() -> Verdict| {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        results.push((id, name, verdict));
    };
    let no_runs = || -> Verdict { (false, "shared smooth runs failed".into()) };

    record(1, "curvature oracle equivalence", &criterion_1);
    record(2, "positivity", &criterion_2);
    record(3, "Sec >= 1/8 and Gram = 1/4", &criterion_3);
    record(4, "CH reduction identity", &criterion_4);
    record(5, "RHS equivalence", &criterion_5);
    match &runs {
        Ok(runs) => {
            record(6, "2CH energy conservation", &|| criterion_6(runs));
            record(7, "momentum conservation", &|| criterion_7(runs));
            record(8, "Eulerian/Lagrangian consistency", &|| criterion_8(runs));
        }
        Err(_) => {
            record(6, "2CH energy conservation", &no_runs);
            record(7, "momentum conservation", &no_runs);
            record(8, "Eulerian/Lagrangian consistency", &no_runs);
        }
    }
    record(9, "B-operator identity", &criterion_9);
    record(10, "rigid body conservation", &criterion_10);
    record(11, "RK4 order", &criterion_11);
    match &runs {
        Ok(runs) => record(12, "blow-up detector", &|| criterion_12(runs)),
        Err(_) => record(12, "blow-up detector", &no_runs),
    }

    let mut failed = 0;
    for (id, name, (pass, detail)) in &results {
        let tag = if *pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag}  {name}: {detail}");
        failed += usize::from(!pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1?}",
        results.len() - failed,
        start.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

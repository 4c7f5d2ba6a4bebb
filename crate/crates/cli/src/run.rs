//! Dispatch from a resolved [`RunConfig`] to the solvers, and the artifacts
//! each command leaves in `out_dir`.
//!
//! | command        | files                                                        |
//! |----------------|--------------------------------------------------------------|
//! | evolve         | `diagnostics.csv`, `snapshots/snapshot_NNNNN.csv`            |
//! | flowmap        | the above plus `flowmap/flowmap_NNNNN.csv`, `momentum.csv`   |
//! | curvature      | `scan.csv` (one row)                                         |
//! | curvature-scan | `scan.csv`                                                   |
//! | rigidbody      | `trajectory.csv`                                             |
//! | verify         | nothing unless `out_dir` is given                            |
//!
//! Every command that writes files also writes `run.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use geoflow::curvature::{
    closedform_s, curvature_s, gram, negative_curvature_search, positivity_scan, sectional, ScanRow,
};
use geoflow::evolution::{evolve, DiagnosticsRecord, RunStatus};
use geoflow::flowmap::{evolve_flowmap, momentum_drift, momentum_scales, FlowStatus};
use geoflow::rigidbody::{ad_star_check, evolve_rigidbody, RigidBodyState};
use geoflow::{io, verify, Grid};
use log::info;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_BLOWUP: u8 = 2;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: RunConfig,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub final_diagnostics: Value,
    pub wall_seconds: f64,
}

struct Outcome {
    status: String,
    reason: Option<String>,
    final_diagnostics: Value,
    exit: u8,
}

impl Outcome {
    fn completed(final_diagnostics: Value) -> Self {
        Self {
            status: "completed".into(),
            reason: None,
            final_diagnostics,
            exit: EXIT_OK,
        }
    }
}

/// Runs a resolved config and returns the process exit code.
pub fn run(config: &RunConfig) -> Result<u8> {
    let start = Instant::now();
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    }
    let out_dir = config.out_dir.as_deref();
    let outcome = match config.command {
        Command::Evolve => run_evolve(config, out_dir.context("out_dir")?)?,
        Command::Flowmap => run_flowmap(config, out_dir.context("out_dir")?)?,
        Command::Curvature => run_curvature(config, out_dir.context("out_dir")?)?,
        Command::CurvatureScan => run_scan(config, out_dir.context("out_dir")?)?,
        Command::Rigidbody => run_rigidbody(config, out_dir.context("out_dir")?)?,
        Command::Verify => run_verify(config)?,
    };
    if let Some(dir) = out_dir {
        let manifest = Manifest {
            config: config.clone(),
            status: outcome.status,
            reason: outcome.reason,
            final_diagnostics: outcome.final_diagnostics,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        let path = dir.join("run.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(outcome.exit)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn subdir(dir: &Path, name: &str) -> Result<std::path::PathBuf> {
    let sub = dir.join(name);
    fs::create_dir_all(&sub).with_context(|| format!("cannot create {}", sub.display()))?;
    Ok(sub)
}

fn write_pde_outputs(dir: &Path, states: &[geoflow::VelocityPair], diagnostics: &[DiagnosticsRecord]) -> Result<()> {
    io::write_diagnostics(create(&dir.join("diagnostics.csv"))?, diagnostics).context("writing diagnostics.csv")?;
    let snaps = subdir(dir, "snapshots")?;
    for (i, s) in states.iter().enumerate() {
        let path = snaps.join(format!("snapshot_{i:05}.csv"));
        io::write_snapshot(create(&path)?, s).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn initial_state(config: &RunConfig) -> Result<geoflow::VelocityPair> {
    let grid = Grid::new(config.n.context("n")?)?;
    config.ic.as_ref().context("ic")?.build(&grid)
}

fn run_evolve(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let ec = config.evolution_config()?;
    let run = evolve(&ec, &initial_state(config)?).context("evolution failed")?;
    write_pde_outputs(dir, &run.trajectory, &run.diagnostics)?;
    let last = run.diagnostics.last().copied();
    let final_diagnostics = serde_json::to_value(last)?;
    Ok(match run.status {
        RunStatus::Completed => Outcome::completed(final_diagnostics),
        RunStatus::BlowupDetected { t, reason } => {
            info!("blow-up detected at t = {t}: {reason}");
            Outcome {
                status: "blowup_detected".into(),
                reason: Some(reason.to_string()),
                final_diagnostics,
                exit: EXIT_BLOWUP,
            }
        }
    })
}

fn run_flowmap(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let ec = config.evolution_config()?;
    let floor = config.jacobian_floor.context("jacobian_floor")?;
    let run = evolve_flowmap(&ec, &initial_state(config)?, floor).context("flow-map evolution failed")?;
    let diagnostics: Vec<DiagnosticsRecord> = run
        .times
        .iter()
        .zip(&run.eulerian)
        .map(|(&t, s)| DiagnosticsRecord::of(ec.model, t, s))
        .collect();
    write_pde_outputs(dir, &run.eulerian, &diagnostics)?;
    let maps = subdir(dir, "flowmap")?;
    for (i, g) in run.group.iter().enumerate() {
        let path = maps.join(format!("flowmap_{i:05}.csv"));
        io::write_flowmap_snapshot(create(&path)?, g).with_context(|| format!("writing {}", path.display()))?;
    }

    let drift = momentum_drift(&run);
    let mut w = create(&dir.join("momentum.csv"))?;
    writeln!(w, "t,density_drift,body_momentum_drift")?;
    for d in &drift {
        let body = d.body_momentum.map(|b| b.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{}", d.t, d.density, body)?;
    }
    w.flush()?;

    let (rho_scale, m_scale) = momentum_scales(&run);
    let last = drift.last().copied();
    let final_diagnostics = json!({
        "diagnostics": diagnostics.last(),
        "min_phix": run.group.last().map(|g| g.phi.jacobian().min()),
        "density_drift": last.map(|d| d.density),
        "body_momentum_drift": last.and_then(|d| d.body_momentum),
        "rho_scale": rho_scale,
        "m_scale": m_scale,
    });
    Ok(match run.status {
        FlowStatus::Completed => Outcome::completed(final_diagnostics),
        FlowStatus::BlowupDetected { reason, .. } => Outcome {
            status: "blowup_detected".into(),
            reason: Some(reason.to_string()),
            final_diagnostics,
            exit: EXIT_BLOWUP,
        },
        FlowStatus::JacobianDegenerate { .. } => Outcome {
            status: "blowup_detected".into(),
            reason: Some("jacobian_degenerate".into()),
            final_diagnostics,
            exit: EXIT_BLOWUP,
        },
    })
}

fn run_curvature(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let dir_pair = config.direction()?;
    let grid = Grid::new(config.n.context("n")?)?;
    let (u, v) = dir_pair.fields(&grid);
    let row = ScanRow {
        modes: dir_pair.modes(),
        first_components_zero: dir_pair.first_components_zero,
        s_numeric: curvature_s(&u, &v),
        s_closed: closedform_s(&dir_pair)?,
        sec: sectional(&u, &v)?,
        gram: gram(&u, &v),
    };
    println!(
        "modes {:?}: S = {} (closed form {}), Sec = {}, gram = {}",
        row.modes, row.s_numeric, row.s_closed, row.sec, row.gram
    );
    io::write_scan(create(&dir.join("scan.csv"))?, std::slice::from_ref(&row)).context("writing scan.csv")?;
    Ok(Outcome::completed(json!({
        "S_numeric": row.s_numeric,
        "S_closed": row.s_closed,
        "Sec": row.sec,
        "gram": row.gram,
    })))
}

fn run_scan(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let max_mode = config.max_mode.context("max_mode")?;
    let n = config.n.context("n")?;
    let mut rows = positivity_scan(max_mode, n).context("curvature scan failed")?;
    rows.sort_by(|a, b| (a.first_components_zero, a.modes).cmp(&(b.first_components_zero, b.modes)));
    io::write_scan(create(&dir.join("scan.csv"))?, &rows).context("writing scan.csv")?;

    let min_s = rows.iter().map(|r| r.s_numeric).fold(f64::INFINITY, f64::min);
    let max_rel = rows
        .iter()
        .map(|r| (r.s_numeric - r.s_closed).abs() / r.s_closed.abs())
        .fold(0.0, f64::max);
    let min_sec_second = rows
        .iter()
        .filter(|r| r.first_components_zero)
        .map(|r| r.sec)
        .fold(f64::INFINITY, f64::min);
    println!(
        "{} direction pairs: min S = {min_s}, max relative error vs closed form = {max_rel:e}, min Sec (0, cos) family = {min_sec_second}",
        rows.len()
    );
    let mut diag = json!({
        "pairs": rows.len(),
        "min_S": min_s,
        "max_relative_error": max_rel,
        "min_sec_second_only": min_sec_second,
    });
    let trials = config.search_trials.unwrap_or(0);
    if trials > 0 {
        let seed = config.seed.unwrap_or(0);
        let found = negative_curvature_search(&Grid::new(n)?, max_mode, trials, seed)?;
        println!("random search over {trials} planes: min Sec = {}", found.min_sec);
        diag["search_min_sec"] = json!(found.min_sec);
    }
    Ok(Outcome::completed(diag))
}

fn run_rigidbody(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let inertia = config.inertia.context("inertia")?;
    let omega = config.omega.context("omega")?;
    let state = RigidBodyState::new(Vector3::from(inertia), Vector3::from(omega))?;
    let samples = evolve_rigidbody(&state, config.dt.context("dt")?, config.t_end.context("t_end")?)?;
    let stride = config.stride.context("stride")?;
    let last = samples.len() - 1;
    let kept: Vec<_> = samples
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
        .map(|(_, s)| s.clone())
        .collect();
    io::write_rigidbody(create(&dir.join("trajectory.csv"))?, &kept).context("writing trajectory.csv")?;

    let first = &samples[0];
    let pi0 = Vector3::from(first.spatial_momentum);
    let pi_drift = samples
        .iter()
        .map(|s| (Vector3::from(s.spatial_momentum) - pi0).norm())
        .fold(0.0, f64::max);
    let energy_drift = samples.iter().map(|s| (s.energy - first.energy).abs()).fold(0.0, f64::max);
    let end = &samples[last];
    Ok(Outcome::completed(json!({
        "t": end.t,
        "omega": end.omega,
        "energy": end.energy,
        "spatial_momentum_drift": pi_drift,
        "energy_drift": energy_drift,
        "ad_star_residual": ad_star_check(&samples),
    })))
}

fn run_verify(config: &RunConfig) -> Result<Outcome> {
    let checks = verify::run_all(config.seed.unwrap_or(0), config.quick.unwrap_or(false));
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{mark}  {:width$}  {}", c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    Ok(Outcome {
        status: if failed == 0 { "passed" } else { "failed" }.into(),
        reason: None,
        final_diagnostics: serde_json::to_value(&checks)?,
        exit: if failed == 0 { EXIT_OK } else { EXIT_ERROR },
    })
}

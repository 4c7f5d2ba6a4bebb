//! CSV formats shared by the library and the command-line driver.
//!
//! | file        | header                                                |
//! |-------------|-------------------------------------------------------|
//! | snapshot    | `x,u,rho`                                             |
//! | diagnostics | `t,energy,min_ux,max_abs_rhox,mean_m,mean_rho`        |
//! | flow map    | `x,phi,phix,f`                                        |
//! | scan        | `m_k1,m_k2,m_l1,m_l2,S_numeric,S_closed,Sec,gram`     |
//! | rigid body  | `t,w1,w2,w3,pi1,pi2,pi3,energy`                       |
//!
//! Floats are written in Rust's shortest round-trip form, so identical runs
//! produce byte-identical files.

use std::io::{Read, Write};

use crate::connection::VelocityPair;
use crate::curvature::ScanRow;
use crate::evolution::DiagnosticsRecord;
use crate::flowmap::GroupElement;
use crate::rigidbody::RigidBodySample;
use crate::spectral::{Grid, PeriodicField};
use crate::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn write_snapshot<W: Write>(out: W, state: &VelocityPair) -> Result<()> {
    let grid = state.grid();
    write_rows(
        out,
        &["x", "u", "rho"],
        (0..grid.n()).map(|j| {
            vec![
                fmt(grid.point(j)),
                fmt(state.u.values()[j]),
                fmt(state.rho.values()[j]),
            ]
        }),
    )
}

/// Reads a snapshot written by [`write_snapshot`]. The `x` column must be the
/// uniform grid `j/n` and `n` must be a valid grid size.
pub fn read_snapshot<R: Read>(input: R) -> Result<VelocityPair> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["x", "u", "rho"] {
        return Err(Error::Parse(format!(
            "expected header x,u,rho, found {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut xs = Vec::new();
    let mut us = Vec::new();
    let mut rhos = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 3 {
            return Err(Error::Parse(format!("row {}: expected 3 columns, found {}", line + 1, rec.len())));
        }
        let parse = |i: usize| -> Result<f64> {
            let field = rec[i].trim();
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("row {}: bad number {field:?}", line + 1)))
        };
        xs.push(parse(0)?);
        us.push(parse(1)?);
        rhos.push(parse(2)?);
    }
    let grid = Grid::new(xs.len())?;
    for (j, &x) in xs.iter().enumerate() {
        if (x - grid.point(j)).abs() > 1e-12 {
            return Err(Error::Parse(format!(
                "row {}: x = {x} is not the uniform grid point {}",
                j + 1,
                grid.point(j)
            )));
        }
    }
    Ok(VelocityPair::new(
        PeriodicField::from_values(&grid, us),
        PeriodicField::from_values(&grid, rhos),
    ))
}

pub fn write_diagnostics<W: Write>(out: W, records: &[DiagnosticsRecord]) -> Result<()> {
    write_rows(
        out,
        &["t", "energy", "min_ux", "max_abs_rhox", "mean_m", "mean_rho"],
        records.iter().map(|d| {
            [d.t, d.energy, d.min_ux, d.max_abs_rhox, d.mean_m, d.mean_rho]
                .into_iter()
                .map(fmt)
                .collect()
        }),
    )
}

pub fn write_flowmap_snapshot<W: Write>(out: W, g: &GroupElement) -> Result<()> {
    let grid = g.grid();
    let phi = g.phi.values();
    write_rows(
        out,
        &["x", "phi", "phix", "f"],
        (0..grid.n()).map(|j| {
            vec![
                fmt(grid.point(j)),
                fmt(phi[j]),
                fmt(g.phi.jacobian().values()[j]),
                fmt(g.f.values()[j]),
            ]
        }),
    )
}

pub fn write_scan<W: Write>(out: W, rows: &[ScanRow]) -> Result<()> {
    write_rows(
        out,
        &["m_k1", "m_k2", "m_l1", "m_l2", "S_numeric", "S_closed", "Sec", "gram"],
        rows.iter().map(|r| {
            r.modes
                .iter()
                .map(|m| m.to_string())
                .chain([r.s_numeric, r.s_closed, r.sec, r.gram].into_iter().map(fmt))
                .collect()
        }),
    )
}

pub fn write_rigidbody<W: Write>(out: W, samples: &[RigidBodySample]) -> Result<()> {
    write_rows(
        out,
        &["t", "w1", "w2", "w3", "pi1", "pi2", "pi3", "energy"],
        samples.iter().map(|s| {
            std::iter::once(s.t)
                .chain(s.omega)
                .chain(s.spatial_momentum)
                .chain(std::iter::once(s.energy))
                .map(fmt)
                .collect()
        }),
    )
}

//! CSV ingestion and export for functional samples.
//!
//! Two layouts are supported:
//!
//! * **wide** — a header row of grid points (optionally preceded by a group
//!   column) and one curve per row;
//! * **long** — columns `group,curve_id,t,value`, one observation per row;
//!   the grid is the union of all `t` values and every curve must cover it
//!   exactly (no imputation).
//!
//! Exported files round-trip bit-exactly: values are written in Rust's
//! shortest round-trip decimal form.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{FunctionalSample, Grid};

/// CSV layout selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Wide,
    Long,
}

impl std::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide" => Ok(Layout::Wide),
            "long" => Ok(Layout::Long),
            other => Err(Error::InvalidParameter(format!(
                "unknown layout '{other}' (expected wide or long)"
            ))),
        }
    }
}

/// Read samples from a CSV file.
pub fn ingest_csv_path(path: impl AsRef<Path>, layout: Layout) -> Result<Vec<FunctionalSample>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Ingest(format!("cannot open {}: {e}", path.as_ref().display())))?;
    ingest_csv(BufReader::new(file), layout)
}

/// Read samples from any CSV reader.
pub fn ingest_csv<R: Read>(reader: R, layout: Layout) -> Result<Vec<FunctionalSample>> {
    let mut lines = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::Ingest(format!("line {}: {e}", idx + 1)))?;
        if !line.trim().is_empty() {
            lines.push(line);
        }
    }
    if lines.is_empty() {
        return Err(Error::Ingest("empty file".into()));
    }
    match layout {
        Layout::Wide => ingest_wide(&lines),
        Layout::Long => ingest_long(&lines),
    }
}

fn parse_cell(cell: &str, line: usize, column: usize) -> Result<f64> {
    let trimmed = cell.trim();
    trimmed.parse::<f64>().map_err(|_| {
        Error::Ingest(format!(
            "line {line}, column {column}: '{trimmed}' is not a number"
        ))
    })
}

fn ingest_wide(lines: &[String]) -> Result<Vec<FunctionalSample>> {
    let header: Vec<&str> = lines[0].split(',').collect();
    if header.len() < 2 {
        return Err(Error::Ingest("wide header needs at least 2 columns".into()));
    }
    // A leading non-numeric header cell names the group column.
    let has_group = header[0].trim().parse::<f64>().is_err();
    let first_point_col = if has_group { 1 } else { 0 };
    let mut points = Vec::new();
    for (c, cell) in header.iter().enumerate().skip(first_point_col) {
        points.push(parse_cell(cell, 1, c + 1)?);
    }
    let grid = Grid::with_trapezoid_weights(points)
        .map_err(|e| Error::Ingest(format!("header grid: {e}")))?;
    let p = grid.len();

    // Groups in order of first appearance.
    let mut groups: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Ingest(format!(
                "line {}: expected {} cells, got {}",
                idx + 1,
                header.len(),
                cells.len()
            )));
        }
        let label = if has_group {
            cells[0].trim().to_string()
        } else {
            "all".to_string()
        };
        let mut row = Vec::with_capacity(p);
        for (c, cell) in cells.iter().enumerate().skip(first_point_col) {
            row.push(parse_cell(cell, idx + 1, c + 1)?);
        }
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, rows)) => rows.push(row),
            None => groups.push((label, vec![row])),
        }
    }
    build_samples(grid, groups)
}

fn ingest_long(lines: &[String]) -> Result<Vec<FunctionalSample>> {
    let header: Vec<String> = lines[0]
        .split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect();
    if header != ["group", "curve_id", "t", "value"] {
        return Err(Error::Ingest(format!(
            "long header must be 'group,curve_id,t,value', got '{}'",
            lines[0]
        )));
    }

    struct CurveAcc {
        id: String,
        observations: Vec<(f64, f64)>,
    }
    let mut groups: Vec<(String, Vec<CurveAcc>)> = Vec::new();
    let mut all_points: Vec<f64> = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(Error::Ingest(format!(
                "line {}: expected 4 cells, got {}",
                idx + 1,
                cells.len()
            )));
        }
        let group = cells[0].trim().to_string();
        let curve_id = cells[1].trim().to_string();
        let t = parse_cell(cells[2], idx + 1, 3)?;
        let value = parse_cell(cells[3], idx + 1, 4)?;
        if !all_points.contains(&t) {
            all_points.push(t);
        }
        let group_entry = match groups.iter_mut().find(|(l, _)| *l == group) {
            Some(entry) => entry,
            None => {
                groups.push((group.clone(), Vec::new()));
                groups.last_mut().expect("just pushed")
            }
        };
        let curve = match group_entry.1.iter_mut().find(|c| c.id == curve_id) {
            Some(curve) => curve,
            None => {
                group_entry.1.push(CurveAcc {
                    id: curve_id.clone(),
                    observations: Vec::new(),
                });
                group_entry.1.last_mut().expect("just pushed")
            }
        };
        if curve.observations.iter().any(|(x, _)| *x == t) {
            return Err(Error::Ingest(format!(
                "line {}: duplicate observation for curve '{curve_id}' in group '{group}' at t={t}",
                idx + 1
            )));
        }
        curve.observations.push((t, value));
    }

    all_points.sort_by(f64::total_cmp);
    let grid = Grid::with_trapezoid_weights(all_points.clone())
        .map_err(|e| Error::Ingest(format!("union grid: {e}")))?;

    let mut out_groups: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (label, curves) in groups {
        let mut rows = Vec::with_capacity(curves.len());
        for curve in curves {
            let mut row = Vec::with_capacity(all_points.len());
            for t in &all_points {
                match curve.observations.iter().find(|(x, _)| x == t) {
                    Some((_, v)) => row.push(*v),
                    None => {
                        return Err(Error::Ingest(format!(
                            "curve '{}' in group '{label}' is missing a value at t={t}",
                            curve.id
                        )));
                    }
                }
            }
            rows.push(row);
        }
        out_groups.push((label, rows));
    }
    build_samples(grid, out_groups)
}

fn build_samples(
    grid: Grid,
    groups: Vec<(String, Vec<Vec<f64>>)>,
) -> Result<Vec<FunctionalSample>> {
    if groups.is_empty() {
        return Err(Error::Ingest("no data rows".into()));
    }
    let mut samples = Vec::with_capacity(groups.len());
    for (label, rows) in groups {
        if rows.len() < 2 {
            return Err(Error::Ingest(format!(
                "group '{label}' has {} curve(s); need at least 2",
                rows.len()
            )));
        }
        let n = rows.len();
        let p = grid.len();
        let values = DMatrix::from_fn(n, p, |j, m| rows[j][m]);
        samples.push(FunctionalSample::new(grid.clone(), values, label)?);
    }
    Ok(samples)
}

/// Write samples in the wide layout. Values use the shortest decimal form
/// that parses back to the same bits.
pub fn export_wide_csv<W: Write>(samples: &[FunctionalSample], out: &mut W) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("nothing to export".into()));
    }
    let grid = samples[0].grid();
    for s in samples.iter().skip(1) {
        if s.grid() != grid {
            return Err(Error::GridMismatch("export"));
        }
    }
    write!(out, "group")?;
    for t in grid.points() {
        write!(out, ",{t}")?;
    }
    writeln!(out)?;
    for s in samples {
        for j in 0..s.n_curves() {
            write!(out, "{}", s.label())?;
            for m in 0..grid.len() {
                write!(out, ",{}", s.values()[(j, m)])?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

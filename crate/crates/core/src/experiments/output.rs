//! CSV files written by runs and sweeps.
//!
//! Snapshots have columns `x` (and `y` in 2D), `rho`, `p`, `v`, then `n_0`,
//! `n_1`, ... one per phenotype node. Diagnostics files start with the line
//! `# phenoflow-diagnostics/1` followed by [`DIAGNOSTICS_HEADER`] and one
//! row per record. Floats use the shortest representation that round-trips,
//! so identical runs give byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::diagnostics::{DiagnosticsRecord, DIAGNOSTICS_HEADER, DIAGNOSTICS_SCHEMA};
use crate::error::{Error, Result};
use crate::fields::PopulationField;
use crate::grid::{PhenotypeMesh, SpatialGrid};
use crate::solver::{RunStats, SimulationState, Trajectory};

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

pub fn snapshot_header(grid: &SpatialGrid, layers: usize) -> Vec<String> {
    let mut h = vec!["x".to_string()];
    if grid.dim() == 2 {
        h.push("y".into());
    }
    h.extend(["rho", "p", "v"].map(String::from));
    h.extend((0..layers).map(|j| format!("n_{j}")));
    h
}

pub fn write_snapshot(path: &Path, state: &SimulationState, grid: &SpatialGrid) -> Result<()> {
    let mut w = writer(path)?;
    let layers = state.n.layer_count();
    let err = |e| Error::csv(path, e);
    w.write_record(snapshot_header(grid, layers)).map_err(err)?;
    let mut row = Vec::with_capacity(layers + 5);
    for c in 0..grid.len() {
        row.clear();
        let x = grid.center(c);
        row.push(x[0].to_string());
        if grid.dim() == 2 {
            row.push(x[1].to_string());
        }
        row.push(state.rho[c].to_string());
        row.push(state.p[c].to_string());
        row.push(state.v[c].to_string());
        row.extend((0..layers).map(|j| state.n.layer(j)[c].to_string()));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the `n_j` columns of a snapshot written on the same grid.
pub fn read_snapshot(path: &Path, grid: &SpatialGrid, mesh: &PhenotypeMesh) -> Result<PopulationField> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let cols: Vec<usize> = (0..mesh.len())
        .map(|j| {
            let name = format!("n_{j}");
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Config {
                path: path.to_path_buf(),
                message: format!("missing column {name}"),
            })
        })
        .collect::<Result<_>>()?;
    let mut layers = vec![Vec::with_capacity(grid.len()); mesh.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        for (j, &c) in cols.iter().enumerate() {
            let v: f64 = rec.get(c).unwrap_or("").parse().map_err(|_| Error::Config {
                path: path.to_path_buf(),
                message: format!("row {}: column n_{j} is not a number", line + 2),
            })?;
            layers[j].push(v);
        }
    }
    if layers[0].len() != grid.len() {
        return Err(Error::dims(format!("{} rows", grid.len()), layers[0].len()));
    }
    PopulationField::from_layers(layers)
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut file = create(path)?;
    writeln!(file, "# {DIAGNOSTICS_SCHEMA}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e| Error::csv(path, e);
    if records.is_empty() {
        w.write_record(DIAGNOSTICS_HEADER.split(',')).map_err(err)?;
    }
    for rec in records {
        w.serialize(rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a diagnostics file, failing on any schema or header drift.
pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let expected = format!("# {DIAGNOSTICS_SCHEMA}");
    if first.trim_end() != expected {
        return Err(Error::Validation(vec![format!(
            "{}: schema line {:?}, expected {expected:?}",
            path.display(),
            first.trim_end()
        )]));
    }
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(|e| Error::csv(path, e))?;
    let got: Vec<&str> = header.iter().collect();
    if got.join(",") != DIAGNOSTICS_HEADER {
        return Err(Error::Validation(vec![format!(
            "{}: diagnostics header drifted: {}",
            path.display(),
            got.join(",")
        )]));
    }
    r.deserialize()
        .map(|rec| rec.map_err(|e| Error::csv(path, e)))
        .collect()
}

pub fn write_stats(path: &Path, stats: &RunStats) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    let rows = [
        ("steps", stats.steps.to_string()),
        ("flushed", stats.flushed.to_string()),
        ("boundary_contacts", stats.boundary_contacts.to_string()),
        ("min_dt", stats.min_dt.to_string()),
        ("max_dt", stats.max_dt.to_string()),
        ("initial_mass", stats.initial_mass.to_string()),
        ("final_mass", stats.final_mass.to_string()),
        ("max_sup_rho", stats.max_sup_rho.to_string()),
        ("max_gronwall_ratio", stats.max_gronwall_ratio.to_string()),
        ("max_discrete_gronwall_ratio", stats.max_discrete_gronwall_ratio.to_string()),
    ];
    w.write_record(["key", "value"]).map_err(err)?;
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `snapshot_<k>.csv` for every snapshot, `snapshots.csv` (index of
/// times), `diagnostics.csv` and `stats.csv` into `dir`.
pub fn write_trajectory(dir: &Path, trajectory: &Trajectory, grid: &SpatialGrid) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let index_path = dir.join("snapshots.csv");
    let mut index = writer(&index_path)?;
    let err = |e| Error::csv(&index_path, e);
    index.write_record(["index", "t", "file"]).map_err(err)?;
    for (k, snap) in trajectory.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:04}.csv");
        write_snapshot(&dir.join(&name), &snap.state, grid)?;
        index
            .write_record([k.to_string(), snap.t.to_string(), name])
            .map_err(err)?;
    }
    index.flush().map_err(|e| Error::io(&index_path, e))?;
    write_diagnostics(&dir.join("diagnostics.csv"), &trajectory.records)?;
    write_stats(&dir.join("stats.csv"), &trajectory.stats)
}

//! Parameter sweeps on a fixed grid: the pressure exponent (incompressible
//! limit) and the viscosity (regularization limit).

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solver::{BoundaryPolicy, SimulationState, Trajectory};

use super::config::RunConfig;
use super::output::write_trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Gamma,
    Epsilon,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Gamma => "gamma",
            SweepKind::Epsilon => "epsilon",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepMetrics {
    /// Time averages over `[T/2, T]`.
    pub saturation_residual: f64,
    pub complementarity_residual: f64,
    /// Time integrals over `[0, T]`.
    pub grad_p_l4_integral: f64,
    pub hessian_integral: f64,
    pub final_mass: f64,
    pub max_sup_rho: f64,
    pub steps: usize,
    pub boundary_contacts: usize,
    /// Distances to the `ε = 0` run at the final time (epsilon sweeps only).
    pub rho_l1_diff: Option<f64>,
    pub v_l2_diff: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Error message of a failed entry.
    pub outcome: std::result::Result<SweepMetrics, String>,
    /// Wall-clock seconds; kept out of the data CSV.
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn metrics(&self) -> Vec<Option<&SweepMetrics>> {
        self.rows.iter().map(|r| r.outcome.as_ref().ok()).collect()
    }

    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.outcome.is_ok())
    }

    pub const HEADER: [&'static str; 12] = [
        "value",
        "status",
        "saturation_residual",
        "complementarity_residual",
        "grad_p_l4_integral",
        "hessian_integral",
        "rho_l1_diff",
        "v_l2_diff",
        "final_mass",
        "max_sup_rho",
        "steps",
        "boundary_contacts",
    ];

    /// Writes `<kind>_sweep.csv` and `<kind>_sweep_timing.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}_sweep.csv", self.kind.name()));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        let err = |e| Error::csv(&path, e);
        w.write_record(Self::HEADER).map_err(err)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for row in &self.rows {
            let rec: Vec<String> = match &row.outcome {
                Ok(m) => vec![
                    row.value.to_string(),
                    "ok".into(),
                    m.saturation_residual.to_string(),
                    m.complementarity_residual.to_string(),
                    m.grad_p_l4_integral.to_string(),
                    m.hessian_integral.to_string(),
                    opt(m.rho_l1_diff),
                    opt(m.v_l2_diff),
                    m.final_mass.to_string(),
                    m.max_sup_rho.to_string(),
                    m.steps.to_string(),
                    m.boundary_contacts.to_string(),
                ],
                Err(msg) => {
                    let mut r = vec![row.value.to_string(), format!("error: {msg}")];
                    r.resize(Self::HEADER.len(), String::new());
                    r
                }
            };
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let tpath = dir.join(format!("{}_sweep_timing.csv", self.kind.name()));
        let mut t = csv::Writer::from_path(&tpath).map_err(|e| Error::csv(&tpath, e))?;
        t.write_record(["value", "runtime_s"]).map_err(|e| Error::csv(&tpath, e))?;
        for row in &self.rows {
            t.write_record([row.value.to_string(), format!("{:.3}", row.runtime)])
                .map_err(|e| Error::csv(&tpath, e))?;
        }
        t.flush().map_err(|e| Error::io(&tpath, e))
    }
}

/// Options shared by both sweeps.
#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    /// Per-entry run outputs go to `<out>/<kind>_<index>/`.
    pub out: Option<PathBuf>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start {jobs} workers: {e}")))
}

struct EntryRun {
    trajectory: Trajectory,
    grid: crate::grid::SpatialGrid,
}

/// Runs one entry; returns the outcome and the wall-clock seconds it took.
fn run_entry(cfg: &RunConfig, out: Option<PathBuf>) -> (std::result::Result<EntryRun, String>, f64) {
    let start = Instant::now();
    let result = (|| -> Result<EntryRun> {
        let prepared = cfg.prepare()?;
        let trajectory = prepared.solver.run(&prepared.n0)?;
        if let Some(dir) = out {
            write_trajectory(&dir, &trajectory, &prepared.solver.grid)?;
        }
        Ok(EntryRun {
            trajectory,
            grid: prepared.solver.grid,
        })
    })();
    (result.map_err(|e| e.to_string()), start.elapsed().as_secs_f64())
}

fn metrics_of(t: &Trajectory) -> SweepMetrics {
    let end = t.t_end;
    SweepMetrics {
        saturation_residual: t.average(0.5 * end, end, |r| r.saturation_residual),
        complementarity_residual: t.average(0.5 * end, end, |r| r.complementarity_residual),
        grad_p_l4_integral: t.integrate(0.0, end, |r| r.grad_p_l4),
        hessian_integral: t.integrate(0.0, end, |r| r.hessian_weighted),
        final_mass: t.stats.final_mass,
        max_sup_rho: t.stats.max_sup_rho,
        steps: t.stats.steps,
        boundary_contacts: t.stats.boundary_contacts,
        rho_l1_diff: None,
        v_l2_diff: None,
    }
}

fn entry_dir(opts: &SweepOptions, kind: SweepKind, index: usize) -> Option<PathBuf> {
    opts.out
        .as_ref()
        .map(|o| o.join(format!("{}_{index:02}", kind.name())))
}

/// Runs `base` once per exponent. Entries fail independently.
pub fn gamma_sweep(base: &RunConfig, gammas: &[f64], opts: &SweepOptions) -> Result<SweepResult> {
    if gammas.is_empty() {
        return Err(Error::Parameter("empty γ list".into()));
    }
    if gammas.iter().any(|&g| !(g > 1.0 && g.is_finite())) || gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(format!(
            "γ list must be strictly increasing with every γ > 1, got {gammas:?}"
        )));
    }
    let runs: Vec<_> = pool(opts.jobs)?.install(|| {
        gammas
            .par_iter()
            .enumerate()
            .map(|(k, &g)| {
                let mut cfg = base.clone();
                cfg.solver.gamma = g;
                if cfg.solver.alpha.is_some_and(|a| a >= 1.0 / g) {
                    cfg.solver.alpha = None;
                }
                run_entry(&cfg, entry_dir(opts, SweepKind::Gamma, k))
            })
            .collect()
    });
    let rows = gammas
        .iter()
        .zip(runs)
        .map(|(&value, (run, runtime))| SweepRow {
            value,
            outcome: run.map(|r| metrics_of(&r.trajectory)),
            runtime,
        })
        .collect();
    let result = SweepResult {
        kind: SweepKind::Gamma,
        rows,
    };
    if let Some(dir) = &opts.out {
        result.write(dir)?;
    }
    Ok(result)
}

fn l1_diff(a: &SimulationState, b: &SimulationState, vol: f64) -> f64 {
    a.rho.iter().zip(b.rho.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() * vol
}

fn l2_diff_v(a: &SimulationState, b: &SimulationState, vol: f64) -> f64 {
    (a.v.iter().zip(b.v.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() * vol).sqrt()
}

/// Runs `base` once per viscosity and compares final states against the
/// `ε = 0` entry. Data are lifted by `ε e^{−|x|²}` (unless the config turns
/// the lift off), so entries with `ε > 0` use the `warn` boundary policy.
pub fn epsilon_sweep(base: &RunConfig, epsilons: &[f64], opts: &SweepOptions) -> Result<SweepResult> {
    if epsilons.is_empty()
        || epsilons.iter().any(|&e| !(e >= 0.0 && e.is_finite()))
        || epsilons.windows(2).any(|w| w[1] >= w[0])
        || !epsilons.contains(&0.0)
    {
        return Err(Error::Parameter(format!(
            "ε list must be strictly decreasing, nonnegative and contain 0, got {epsilons:?}"
        )));
    }
    let runs: Vec<_> = pool(opts.jobs)?.install(|| {
        epsilons
            .par_iter()
            .enumerate()
            .map(|(k, &eps)| {
                let mut cfg = base.clone();
                cfg.solver.epsilon = eps;
                if eps > 0.0 && cfg.solver.boundary == BoundaryPolicy::Abort {
                    cfg.solver.boundary = BoundaryPolicy::Warn;
                }
                run_entry(&cfg, entry_dir(opts, SweepKind::Epsilon, k))
            })
            .collect()
    });
    let reference_idx = epsilons.iter().position(|&e| e == 0.0).expect("checked");
    let reference = runs[reference_idx].0.as_ref().ok().map(|r| {
        (
            r.trajectory.final_state().clone(),
            r.grid.cell_volume(),
        )
    });
    let rows = epsilons
        .iter()
        .zip(&runs)
        .map(|(&value, (run, runtime))| SweepRow {
            value,
            outcome: run.as_ref().map_err(Clone::clone).map(|r| {
                let mut m = metrics_of(&r.trajectory);
                if let Some((ref_state, vol)) = &reference {
                    let fin = r.trajectory.final_state();
                    m.rho_l1_diff = Some(l1_diff(fin, ref_state, *vol));
                    m.v_l2_diff = Some(l2_diff_v(fin, ref_state, *vol));
                }
                m
            }),
            runtime: *runtime,
        })
        .collect();
    let result = SweepResult {
        kind: SweepKind::Epsilon,
        rows,
    };
    if let Some(dir) = &opts.out {
        result.write(dir)?;
    }
    Ok(result)
}

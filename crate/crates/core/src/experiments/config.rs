//! TOML run configuration.
//!
//! ```toml
//! [grid]
//! x = [-3.0, 3.0]
//! cells = 400
//!
//! [phenotype]
//! nodes = 4
//!
//! [solver]
//! gamma = 20.0
//! t_end = 1.0
//!
//! [reaction]
//! kind = "linear"      # linear | zero | table
//! g0 = 1.0
//! g1 = 0.5
//!
//! [initial]
//! profile = "box"      # zero | uniform | box | gaussian | barenblatt | file
//! amplitude = 0.6
//! half_width = 0.5
//! ```
//!
//! Every key is optional; unknown keys are rejected. Relative paths are
//! resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsSettings;
use crate::error::{Error, Result};
use crate::fields::{PopulationField, PressureExponent};
use crate::grid::{PhenotypeMesh, SpatialGrid, MIN_CELLS_PER_AXIS};
use crate::initial::{lift_initial_data, InitialData, Profile, Provenance};
use crate::oracles::BarenblattProfile;
use crate::reaction::{MutationKernel, ReactionSpec, TabulatedRate};
use crate::solver::{BoundaryPolicy, Solver, SolverConfig};

use super::output::read_snapshot;

/// Initial support must keep this fraction of the domain width free on each side.
pub const SUPPORT_MARGIN: f64 = 0.1;
/// Pressure samples of the diagonal mutation kernel span `[0, 2 p_M]`.
const KERNEL_SAMPLES: usize = 65;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub phenotype: PhenotypeSection,
    pub solver: SolverSection,
    pub reaction: ReactionSection,
    pub initial: InitialSection,
    pub output: OutputSection,
    /// Directory that relative paths refer to.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub x: [f64; 2],
    pub cells: usize,
    /// Second axis; both or neither of `y` and `cells_y`.
    pub y: Option<[f64; 2]>,
    pub cells_y: Option<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            x: [-3.0, 3.0],
            cells: 400,
            y: None,
            cells_y: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhenotypeSection {
    pub nodes: usize,
}

impl Default for PhenotypeSection {
    fn default() -> Self {
        PhenotypeSection { nodes: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub gamma: f64,
    pub epsilon: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub boundary: BoundaryPolicy,
    pub support_tol: f64,
    pub diagnostics_interval: f64,
    /// Exponent of the weighted `L⁴` diagnostic; defaults to `1/(2γ)`.
    pub alpha: Option<f64>,
    /// Use the (diagonal) mutation kernel in place of the local reaction.
    pub mutation: bool,
    pub skip_checks: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            gamma: 2.0,
            epsilon: 0.0,
            cfl: 0.4,
            t_end: 1.0,
            snapshot_times: Vec::new(),
            boundary: BoundaryPolicy::Abort,
            support_tol: 1e-10,
            diagnostics_interval: 0.0,
            alpha: None,
            mutation: false,
            skip_checks: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReactionKind {
    Linear,
    Zero,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactionSection {
    pub kind: ReactionKind,
    pub g0: f64,
    pub g1: f64,
    pub p_max: f64,
    /// Rate table for `kind = "table"`.
    pub table: Option<PathBuf>,
}

impl Default for ReactionSection {
    fn default() -> Self {
        ReactionSection {
            kind: ReactionKind::Linear,
            g0: 1.0,
            g1: 0.0,
            p_max: 1.0,
            table: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Zero,
    Uniform,
    Box,
    Gaussian,
    Barenblatt,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub profile: ProfileKind,
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
    pub width: f64,
    pub cutoff: f64,
    /// Barenblatt mass and time offset.
    pub mass: f64,
    pub t0: f64,
    /// Snapshot CSV for `profile = "file"`.
    pub path: Option<PathBuf>,
    /// Add `ε e^{−|x|²}` when `ε > 0` (default true).
    pub lift: bool,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            profile: ProfileKind::Box,
            amplitude: 0.6,
            center: 0.0,
            half_width: 0.5,
            width: 0.5,
            cutoff: 1.5,
            mass: 1.0,
            t0: crate::oracles::DEFAULT_T0,
            path: None,
            lift: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Everything needed to start a run.
#[derive(Clone, Debug)]
pub struct PreparedRun {
    pub solver: Solver,
    pub initial: InitialData,
    /// Initial data after the viscous lift.
    pub n0: PopulationField,
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config_str(&text).map_err(|e| match e {
        Error::Config { message, .. } => Error::Config {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate()?;
    Ok(cfg)
}

/// Parses config text without validating it.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config {
        path: PathBuf::from("<string>"),
        message: e.to_string(),
    })
}

impl RunConfig {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Collects every violation instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let g = &self.grid;
        if !(g.x[0] < g.x[1]) || !g.x.iter().all(|v| v.is_finite()) {
            errs.push(format!("grid.x must be an increasing interval, got {:?}", g.x));
        }
        if g.cells < MIN_CELLS_PER_AXIS {
            errs.push(format!("grid.cells must be at least {MIN_CELLS_PER_AXIS}, got {}", g.cells));
        }
        match (g.y, g.cells_y) {
            (None, None) => {}
            (Some(y), Some(cy)) => {
                if !(y[0] < y[1]) {
                    errs.push(format!("grid.y must be an increasing interval, got {y:?}"));
                }
                if cy < MIN_CELLS_PER_AXIS {
                    errs.push(format!("grid.cells_y must be at least {MIN_CELLS_PER_AXIS}, got {cy}"));
                }
            }
            _ => errs.push("grid.y and grid.cells_y must be given together".into()),
        }
        if self.phenotype.nodes == 0 {
            errs.push("phenotype.nodes must be at least 1".into());
        }

        let s = &self.solver;
        if !(s.gamma > 1.0 && s.gamma.is_finite()) {
            errs.push(format!("solver.gamma must satisfy γ > 1, got {}", s.gamma));
        }
        if !(s.epsilon >= 0.0 && s.epsilon.is_finite()) {
            errs.push(format!("solver.epsilon must be nonnegative, got {}", s.epsilon));
        }
        if !(s.cfl > 0.0 && s.cfl <= 1.0) {
            errs.push(format!("solver.cfl must lie in (0, 1], got {}", s.cfl));
        }
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
            errs.push(format!("solver.t_end must be nonnegative, got {}", s.t_end));
        }
        if let Some(t) = s.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= s.t_end)) {
            errs.push(format!("snapshot time {t} outside [0, t_end = {}]", s.t_end));
        }
        if !(s.support_tol > 0.0) {
            errs.push("solver.support_tol must be positive".into());
        }
        if !(s.diagnostics_interval >= 0.0) {
            errs.push("solver.diagnostics_interval must be nonnegative".into());
        }
        if let Some(a) = s.alpha {
            if !(a >= 0.0 && a < 1.0 / s.gamma) {
                errs.push(format!("solver.alpha must lie in [0, 1/γ), got {a}"));
            }
        }

        let r = &self.reaction;
        if !(r.p_max > 0.0 && r.p_max.is_finite()) {
            errs.push(format!("reaction.p_max must be positive, got {}", r.p_max));
        }
        if r.kind == ReactionKind::Table && r.table.is_none() {
            errs.push("reaction.table is required for kind = \"table\"".into());
        }

        let i = &self.initial;
        if !(i.amplitude >= 0.0 && i.amplitude.is_finite()) {
            errs.push(format!("initial.amplitude must be nonnegative, got {}", i.amplitude));
        }
        match i.profile {
            ProfileKind::Box if !(i.half_width > 0.0) => errs.push("initial.half_width must be positive".into()),
            ProfileKind::Gaussian if !(i.width > 0.0 && i.cutoff > 0.0) => {
                errs.push("initial.width and initial.cutoff must be positive".into())
            }
            ProfileKind::Barenblatt if !(i.mass > 0.0 && i.t0 > 0.0) => {
                errs.push("initial.mass and initial.t0 must be positive".into())
            }
            ProfileKind::File if i.path.is_none() => {
                errs.push("initial.path is required for profile = \"file\"".into())
            }
            _ => {}
        }
        if errs.is_empty() && s.boundary == BoundaryPolicy::Abort {
            if let Ok(Some(profile)) = self.profile() {
                if let Some(msg) = self.margin_violation(profile.support_x()) {
                    errs.push(msg);
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    fn margin_violation(&self, support: Option<(f64, f64)>) -> Option<String> {
        let mut axes = vec![(self.grid.x, 0)];
        if let Some(y) = self.grid.y {
            axes.push((y, 1));
        }
        for (range, axis) in axes {
            let margin = SUPPORT_MARGIN * (range[1] - range[0]);
            let (lo, hi) = match support {
                None => return Some("initial support fills the domain; use a profile with compact support or boundary = \"warn\"".into()),
                Some((lo, hi)) if axis == 0 => (lo, hi),
                // analytic profiles are centered at y = 0
                Some((lo, hi)) => {
                    let r = 0.5 * (hi - lo);
                    (-r, r)
                }
            };
            if lo >= hi {
                continue;
            }
            if lo < range[0] + margin || hi > range[1] - margin {
                return Some(format!(
                    "initial support [{lo}, {hi}] on axis {axis} is within {}% of the boundary of [{}, {}]",
                    SUPPORT_MARGIN * 100.0,
                    range[0],
                    range[1]
                ));
            }
        }
        None
    }

    pub fn gamma(&self) -> Result<PressureExponent> {
        PressureExponent::new(self.solver.gamma)
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        let g = &self.grid;
        match (g.y, g.cells_y) {
            (Some(y), Some(cy)) => SpatialGrid::new_2d((g.x[0], g.x[1]), (y[0], y[1]), (g.cells, cy)),
            _ => SpatialGrid::new_1d(g.x[0], g.x[1], g.cells),
        }
    }

    pub fn reaction_spec(&self) -> Result<ReactionSpec> {
        let r = &self.reaction;
        Ok(match r.kind {
            ReactionKind::Linear => ReactionSpec::linear(r.g0, r.g1, r.p_max),
            ReactionKind::Zero => ReactionSpec::zero(r.p_max),
            ReactionKind::Table => {
                let path = r
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::Parameter("reaction.table missing".into()))?;
                ReactionSpec::Tabulated(TabulatedRate::from_csv(&self.resolve(path), r.p_max)?)
            }
        })
    }

    /// Analytic profile, or `None` for file data.
    pub fn profile(&self) -> Result<Option<Profile>> {
        let i = &self.initial;
        Ok(Some(match i.profile {
            ProfileKind::Zero => Profile::Zero,
            ProfileKind::Uniform => Profile::Uniform { amplitude: i.amplitude },
            ProfileKind::Box => Profile::Box {
                amplitude: i.amplitude,
                center: i.center,
                half_width: i.half_width,
            },
            ProfileKind::Gaussian => Profile::Gaussian {
                amplitude: i.amplitude,
                center: i.center,
                width: i.width,
                cutoff: i.cutoff,
            },
            ProfileKind::Barenblatt => Profile::Barenblatt(BarenblattProfile::new(
                self.gamma()?,
                self.grid.y.map_or(1, |_| 2),
                i.mass,
                i.t0,
            )?),
            ProfileKind::File => return Ok(None),
        }))
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let gamma = self.gamma()?;
        let mut cfg = SolverConfig::new(gamma, s.t_end);
        cfg.epsilon = s.epsilon;
        cfg.cfl = s.cfl;
        cfg.snapshot_times = s.snapshot_times.clone();
        cfg.boundary = s.boundary;
        cfg.support_tol = s.support_tol;
        cfg.diagnostics_interval = s.diagnostics_interval;
        cfg.mutation = s.mutation;
        cfg.skip_checks = s.skip_checks;
        cfg.diagnostics = match s.alpha {
            Some(alpha) => DiagnosticsSettings { alpha },
            None => DiagnosticsSettings::for_gamma(gamma.value()),
        };
        Ok(cfg)
    }

    /// Builds the solver and initial data.
    pub fn prepare(&self) -> Result<PreparedRun> {
        self.validate()?;
        let grid = self.spatial_grid()?;
        let mesh = PhenotypeMesh::new(self.phenotype.nodes)?;
        let reaction = self.reaction_spec()?;
        let cfg = self.solver_config()?;
        let initial = match self.profile()? {
            Some(profile) => InitialData::from_profile(profile, &mesh, &grid),
            None => {
                let path = self.resolve(self.initial.path.as_ref().expect("validated"));
                let n0 = read_snapshot(&path, &grid, &mesh)?;
                if cfg.boundary == BoundaryPolicy::Abort {
                    if let Some(msg) = self.margin_violation(occupied_x(&n0, &grid)) {
                        return Err(Error::Validation(vec![msg]));
                    }
                }
                InitialData {
                    n0,
                    provenance: Provenance::File(path),
                }
            }
        };
        let n0 = if self.initial.lift {
            lift_initial_data(&initial.n0, cfg.epsilon, &grid)
        } else {
            initial.n0.clone()
        };
        let mutation = cfg.mutation;
        let mut solver = Solver::new(grid, mesh, reaction, cfg)?;
        if mutation {
            let p_top = 2.0 * solver.p_max();
            let samples = (0..KERNEL_SAMPLES)
                .map(|k| p_top * k as f64 / (KERNEL_SAMPLES - 1) as f64)
                .collect();
            let kernel = MutationKernel::diagonal(&solver.mesh, &solver.reaction, samples)?;
            solver = solver.with_kernel(kernel);
        }
        Ok(PreparedRun { solver, initial, n0 })
    }
}

/// Extent along the first axis of the cells holding any population.
fn occupied_x(n: &PopulationField, grid: &SpatialGrid) -> Option<(f64, f64)> {
    let h = 0.5 * grid.spacing(0);
    let mut out: Option<(f64, f64)> = None;
    for c in 0..grid.len() {
        if n.layers().iter().any(|l| l[c] > 0.0) {
            let x = grid.center(c)[0];
            out = Some(match out {
                None => (x - h, x + h),
                Some((lo, hi)) => (lo.min(x - h), hi.max(x + h)),
            });
        }
    }
    Some(out.unwrap_or((0.0, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gets_defaults() {
        let cfg = parse_config_str("").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.solver.gamma, 2.0);
        assert_eq!(cfg.solver.epsilon, 0.0);
        assert_eq!(cfg.reaction.p_max, 1.0);
        assert_eq!(cfg.solver.cfl, 0.4);
    }

    #[test]
    fn unknown_keys_are_rejected_with_context() {
        let err = parse_config_str("[solver]\ngama = 3.0\n").unwrap_err().to_string();
        assert!(err.contains("gama"), "{err}");
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_config_str("[solvr]\n").is_err());
    }

    #[test]
    fn sublinear_gamma_is_rejected() {
        let cfg = parse_config_str("[solver]\ngamma = 0.5\n").unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("γ > 1"), "{err}");
    }

    #[test]
    fn all_violations_are_listed() {
        let cfg = parse_config_str(
            "[solver]\ngamma = 1.0\ncfl = 2.0\n[grid]\ncells = 2\n[phenotype]\nnodes = 0\n",
        )
        .unwrap();
        match cfg.validate().unwrap_err() {
            Error::Validation(v) => assert_eq!(v.len(), 4, "{v:?}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn support_touching_boundary_is_rejected() {
        let cfg = parse_config_str("[grid]\nx = [-1.0, 1.0]\n[initial]\nhalf_width = 0.95\n").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("boundary"));
        let ok = parse_config_str("[grid]\nx = [-1.0, 1.0]\n[initial]\nhalf_width = 0.7\n").unwrap();
        ok.validate().unwrap();
        let uniform = parse_config_str("[initial]\nprofile = \"uniform\"\n").unwrap();
        assert!(uniform.validate().is_err());
        let warned =
            parse_config_str("[solver]\nboundary = \"warn\"\n[initial]\nprofile = \"uniform\"\n").unwrap();
        warned.validate().unwrap();
    }

    #[test]
    fn prepare_builds_lifted_data() {
        let cfg = parse_config_str(
            "[solver]\nepsilon = 0.1\nboundary = \"warn\"\n[phenotype]\nnodes = 2\n[initial]\nprofile = \"zero\"\n",
        )
        .unwrap();
        let run = cfg.prepare().unwrap();
        assert_eq!(run.n0.layer_count(), 2);
        let mid = run.solver.grid.len() / 2;
        assert!((run.n0.layer(1)[mid] - 0.1 * (-run.solver.grid.radius_sq(mid)).exp()).abs() < 1e-15);
        assert!(run.initial.n0.layers().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn mutation_mode_gets_a_kernel() {
        let cfg = parse_config_str("[solver]\nmutation = true\n[phenotype]\nnodes = 3\n").unwrap();
        let run = cfg.prepare().unwrap();
        assert!(run.solver.kernel.is_some());
    }

    #[test]
    fn config_roundtrips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.solver.snapshot_times = vec![0.5];
        cfg.solver.boundary = BoundaryPolicy::Warn;
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), cfg);
    }
}

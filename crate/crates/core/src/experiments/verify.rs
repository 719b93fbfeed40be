//! Acceptance suite. Scenarios come from the reference configs in a config
//! directory (`barenblatt.toml`, `logistic.toml`, `saturation.toml`,
//! `positivity.toml`); runs shared by several criteria are computed once.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::diagnostics::{
    ab_weighted_grad_in, entropy_dissipation_in, weighted_grad4, DiagnosticsRecord, DIAGNOSTICS_HEADER,
};
use crate::error::{Error, Result};
use crate::fields::{PressureExponent, ScalarField};
use crate::oracles::{convergence_order, ode_self_consistency, BarenblattProfile};
use crate::solver::{RunStats, SimulationState};

use super::config::{parse_config, RunConfig};
use super::output::{read_diagnostics, write_diagnostics};
use super::sweep::{epsilon_sweep, gamma_sweep, SweepOptions, SweepResult};

pub const BARENBLATT_CELLS: [usize; 4] = [100, 200, 400, 800];
pub const SWEEP_GAMMAS: [f64; 4] = [5.0, 20.0, 80.0, 320.0];
pub const SWEEP_EPSILONS: [f64; 4] = [0.1, 0.03, 0.01, 0.0];
pub const WEIGHT_ALPHAS: [f64; 3] = [0.1, 0.25, 0.4];
const LOGISTIC_TARGET: f64 = 0.75;
const LOGISTIC_CFLS: [f64; 3] = [0.4, 0.2, 0.1];

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionOutcome {
    /// `"1"` to `"9"`, or the name of a supporting check.
    pub id: String,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>9}  {:<34} {}", self.id, self.name, self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub config_dir: PathBuf,
    /// Sweep workers; 0 uses the rayon default.
    pub jobs: usize,
    /// Overrides the oracle's shape constant (to check that a wrong oracle
    /// is caught by its self-test).
    pub barenblatt_shape: Option<f64>,
}

impl VerifyOptions {
    pub fn new(config_dir: impl Into<PathBuf>) -> Self {
        VerifyOptions {
            config_dir: config_dir.into(),
            jobs: 0,
            barenblatt_shape: None,
        }
    }
}

#[derive(Clone, Debug)]
struct BarenblattRun {
    h: f64,
    rho_bound: f64,
    l1_error: f64,
    /// `κ(α)·∫∫|∇p|⁴/p^{1−α}` per entry of [`WEIGHT_ALPHAS`].
    weighted: [f64; 3],
    entropy: f64,
    ab: f64,
    stats: RunStats,
}

#[derive(Clone, Debug)]
struct PositivityRun {
    min_ratio: f64,
    stats: RunStats,
    rho_bound: f64,
    h: f64,
}

type Shared<T> = std::result::Result<T, String>;

pub struct Verifier {
    opts: VerifyOptions,
    barenblatt: Mutex<BTreeMap<usize, Arc<Shared<BarenblattRun>>>>,
    gamma_sweep: OnceLock<Shared<SweepResult>>,
    positivity: OnceLock<Shared<PositivityRun>>,
}

fn fail(id: &str, name: &'static str, detail: impl Into<String>) -> CriterionOutcome {
    CriterionOutcome {
        id: id.into(),
        name,
        passed: false,
        detail: detail.into(),
    }
}

fn outcome(id: &str, name: &'static str, passed: bool, detail: String) -> CriterionOutcome {
    CriterionOutcome {
        id: id.into(),
        name,
        passed,
        detail,
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

impl Verifier {
    /// Fails with an I/O error when the config directory is missing.
    pub fn new(opts: VerifyOptions) -> Result<Self> {
        let meta = std::fs::metadata(&opts.config_dir).map_err(|e| Error::io(&opts.config_dir, e))?;
        if !meta.is_dir() {
            return Err(Error::io(
                &opts.config_dir,
                std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
            ));
        }
        Ok(Verifier {
            opts,
            barenblatt: Mutex::new(BTreeMap::new()),
            gamma_sweep: OnceLock::new(),
            positivity: OnceLock::new(),
        })
    }

    pub fn config(&self, name: &str) -> Result<RunConfig> {
        parse_config(&self.opts.config_dir.join(name))
    }

    /// Supporting checks followed by criteria 1 to 9.
    pub fn run_all(&self) -> Vec<CriterionOutcome> {
        self.run_with(|_| {})
    }

    /// As [`Verifier::run_all`], reporting each outcome as soon as it is known.
    pub fn run_with(&self, mut report: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
        let mut out = Vec::new();
        for id in ["self-test", "schema", "1", "2", "3", "4", "5", "6", "7", "8", "9"] {
            let o = self.run_one(id).expect("known id");
            report(&o);
            out.push(o);
        }
        out
    }

    pub fn run_one(&self, id: &str) -> Option<CriterionOutcome> {
        Some(match id {
            "self-test" => self.oracle_self_tests(),
            "schema" => self.schema_check(),
            "1" => self.barenblatt_convergence(),
            "2" => self.logistic(),
            "3" => self.invariants(),
            "4" => self.incompressible_limit(),
            "5" => self.regularization_limit(),
            "6" => self.uniform_bounds(),
            "7" => self.weighted_l4(),
            "8" => self.entropy_identity(),
            "9" => self.viscous_positivity(),
            _ => return None,
        })
    }

    fn oracle(&self) -> Result<BarenblattProfile> {
        let cfg = self.config("barenblatt.toml")?;
        let mut b = BarenblattProfile::new(cfg.gamma()?, 1, cfg.initial.mass, cfg.initial.t0)?;
        if let Some(k) = self.opts.barenblatt_shape {
            b = b.with_shape_constant(k);
        }
        Ok(b)
    }

    fn checked_oracle(&self) -> std::result::Result<BarenblattProfile, String> {
        let b = self.oracle().map_err(|e| e.to_string())?;
        let st = b.self_test();
        if st.passed() {
            Ok(b)
        } else {
            Err(format!(
                "oracle self-test failed (mass error {:.2e}, residual order {:.2})",
                st.mass_rel_err, st.residual_order
            ))
        }
    }

    fn oracle_self_tests(&self) -> CriterionOutcome {
        const NAME: &str = "oracle self-tests";
        let b = match self.oracle() {
            Ok(b) => b,
            Err(e) => return fail("self-test", NAME, e.to_string()),
        };
        let st = b.self_test();
        let ode = (|| -> Result<f64> {
            let cfg = self.config("saturation.toml")?;
            let mesh = crate::grid::PhenotypeMesh::new(cfg.phenotype.nodes)?;
            let n0 = vec![0.3; mesh.len()];
            Ok(ode_self_consistency(&n0, &mesh, &cfg.reaction_spec()?, cfg.gamma()?, 1.0))
        })();
        match ode {
            Ok(ode_err) => outcome(
                "self-test",
                NAME,
                st.passed() && ode_err < 1e-10,
                format!(
                    "Barenblatt mass err {:.2e}, residual order {:.2}; RK4 Richardson gap {:.2e}",
                    st.mass_rel_err, st.residual_order, ode_err
                ),
            ),
            Err(e) => fail("self-test", NAME, e.to_string()),
        }
    }

    fn schema_check(&self) -> CriterionOutcome {
        const NAME: &str = "diagnostics CSV schema";
        let mut w = csv::Writer::from_writer(Vec::new());
        let serialized = w
            .serialize(DiagnosticsRecord::default())
            .ok()
            .and_then(|_| w.into_inner().ok())
            .map(|b| String::from_utf8_lossy(&b).lines().next().unwrap_or("").to_string());
        if serialized.as_deref() != Some(DIAGNOSTICS_HEADER) {
            return fail("schema", NAME, format!("record fields drifted: {serialized:?}"));
        }
        let dir = std::env::temp_dir().join(format!("phenoflow-verify-{}", std::process::id()));
        let path = dir.join("diagnostics.csv");
        let recs = vec![DiagnosticsRecord {
            t: 0.5,
            mass: 1.0,
            ..Default::default()
        }];
        let res = write_diagnostics(&path, &recs).and_then(|_| read_diagnostics(&path));
        let _ = std::fs::remove_dir_all(&dir);
        match res {
            Ok(back) if back == recs => outcome("schema", NAME, true, "header and version line round-trip".into()),
            Ok(_) => fail("schema", NAME, "records changed on round-trip"),
            Err(e) => fail("schema", NAME, e.to_string()),
        }
    }

    fn barenblatt_run(&self, cells: usize) -> Arc<Shared<BarenblattRun>> {
        if let Some(r) = self.barenblatt.lock().unwrap().get(&cells) {
            return r.clone();
        }
        let run = Arc::new(self.compute_barenblatt(cells));
        self.barenblatt.lock().unwrap().insert(cells, run.clone());
        run
    }

    fn prefetch_barenblatt(&self, cells: &[usize]) {
        let missing: Vec<usize> = {
            let cache = self.barenblatt.lock().unwrap();
            cells.iter().copied().filter(|c| !cache.contains_key(c)).collect()
        };
        let runs: Vec<_> = missing
            .par_iter()
            .map(|&c| (c, Arc::new(self.compute_barenblatt(c))))
            .collect();
        self.barenblatt.lock().unwrap().extend(runs);
    }

    fn compute_barenblatt(&self, cells: usize) -> Shared<BarenblattRun> {
        let oracle = self.checked_oracle()?;
        let run = (|| -> Result<BarenblattRun> {
            let mut cfg = self.config("barenblatt.toml")?;
            cfg.grid.cells = cells;
            let prepared = cfg.prepare()?;
            let solver = &prepared.solver;
            let gamma = solver.gamma();
            let p_max = solver.p_max();
            let grid = &solver.grid;
            let weighted_now = |s: &SimulationState| -> [f64; 3] {
                WEIGHT_ALPHAS.map(|a| {
                    weighted_grad4(&s.p, a, gamma, p_max, grid).map_or(f64::NAN, |(v, k)| k * v)
                })
            };
            let init = solver.state(prepared.n0.clone(), 0.0, 0)?;
            let mut prev = weighted_now(&init);
            let mut acc = [0.0; 3];
            let traj = solver.run_with(&prepared.n0, |s, dt| {
                for k in 0..3 {
                    acc[k] += prev[k] * dt;
                }
                prev = weighted_now(s);
            })?;
            let fin = traj.final_state();
            let t_end = traj.t_end;
            let h = grid.spacing(0);
            let l1_error = grid
                .centers_x()
                .iter()
                .zip(fin.rho.iter())
                .map(|(x, r)| (r - oracle.density(x.abs(), t_end).unwrap_or(f64::NAN)).abs())
                .sum::<f64>()
                * h;
            let inner = 0.8 * oracle.support_radius(t_end);
            let region = move |x: [f64; 2]| x[0].abs() < inner;
            Ok(BarenblattRun {
                h,
                rho_bound: solver.rho_max(),
                l1_error,
                weighted: acc,
                entropy: entropy_dissipation_in(&fin.rho, gamma, grid, Some(&region)),
                ab: ab_weighted_grad_in(&fin.p, gamma, p_max, grid, Some(&region)),
                stats: traj.stats.clone(),
            })
        })();
        run.map_err(|e| e.to_string())
    }

    fn barenblatt_convergence(&self) -> CriterionOutcome {
        const NAME: &str = "Barenblatt convergence";
        self.prefetch_barenblatt(&BARENBLATT_CELLS);
        let mut errors = Vec::new();
        let mut hs = Vec::new();
        for cells in BARENBLATT_CELLS {
            match &*self.barenblatt_run(cells) {
                Ok(r) => {
                    errors.push(r.l1_error);
                    hs.push(r.h);
                }
                Err(e) => return fail("1", NAME, format!("N = {cells}: {e}")),
            }
        }
        let mass = self.oracle().map(|b| b.mass()).unwrap_or(f64::NAN);
        match convergence_order(&errors, &hs) {
            Ok(order) => {
                let finest = *errors.last().unwrap();
                outcome(
                    "1",
                    NAME,
                    order.order >= 0.75 && finest < 2e-2 * mass,
                    format!(
                        "L1 errors {} (N = 100..800), order {:.3} (need ≥ 0.75), finest {:.2e} (need < {:.1e})",
                        fmt_list(&errors),
                        order.order,
                        finest,
                        2e-2 * mass
                    ),
                )
            }
            Err(e) => fail("1", NAME, e.to_string()),
        }
    }

    fn logistic_error(&self, cfl: f64) -> Result<f64> {
        let mut cfg = self.config("logistic.toml")?;
        cfg.solver.cfl = cfl;
        let mut prepared = cfg.prepare()?;
        let solver = &mut prepared.solver;
        solver.config.gamma = PressureExponent::linear();
        solver.config.diagnostics = crate::diagnostics::DiagnosticsSettings::for_gamma(1.0);
        let traj = solver.run(&prepared.n0)?;
        let grid = &solver.grid;
        let center = (0..grid.len())
            .min_by(|&a, &b| grid.radius_sq(a).total_cmp(&grid.radius_sq(b)))
            .expect("nonempty grid");
        Ok((traj.final_state().rho[center] - LOGISTIC_TARGET).abs())
    }

    fn logistic(&self) -> CriterionOutcome {
        const NAME: &str = "logistic ODE oracle";
        let errs: Result<Vec<f64>> = LOGISTIC_CFLS.iter().map(|&c| self.logistic_error(c)).collect();
        let errs = match errs {
            Ok(e) => e,
            Err(e) => return fail("2", NAME, e.to_string()),
        };
        match convergence_order(&errs, &LOGISTIC_CFLS) {
            Ok(order) => outcome(
                "2",
                NAME,
                errs[0] < 1e-3 && (order.order - 1.0).abs() <= 0.2 && order.monotone,
                format!(
                    "|n(ln 3) − 0.75| = {} at c_cfl = 0.4/0.2/0.1, order in dt {:.3}",
                    fmt_list(&errs),
                    order.order
                ),
            ),
            Err(e) => fail("2", NAME, e.to_string()),
        }
    }

    fn positivity_run(&self) -> &Shared<PositivityRun> {
        self.positivity.get_or_init(|| {
            (|| -> Result<PositivityRun> {
                let cfg = self.config("positivity.toml")?;
                let prepared = cfg.prepare()?;
                let solver = &prepared.solver;
                let eps = solver.config.epsilon;
                let k = 2.0 * (eps + solver.gamma().value()) + solver.rate_bound();
                let cells: Vec<(usize, f64)> = (0..solver.grid.len())
                    .filter(|&c| solver.grid.radius_sq(c) <= 4.0)
                    .map(|c| (c, solver.grid.radius_sq(c)))
                    .collect();
                let ratio = |rho: &ScalarField, t: f64| {
                    cells
                        .iter()
                        .map(|&(c, r2)| rho[c] / (eps * (-k * t).exp() * (-r2).exp()))
                        .fold(f64::INFINITY, f64::min)
                };
                let init = solver.state(prepared.n0.clone(), 0.0, 0)?;
                let mut min_ratio = ratio(&init.rho, 0.0);
                let traj = solver.run_with(&prepared.n0, |s, _| {
                    min_ratio = min_ratio.min(ratio(&s.rho, s.t));
                })?;
                Ok(PositivityRun {
                    min_ratio,
                    stats: traj.stats.clone(),
                    rho_bound: solver.rho_max(),
                    h: solver.grid.min_spacing(),
                })
            })()
            .map_err(|e| e.to_string())
        })
    }

    fn viscous_positivity(&self) -> CriterionOutcome {
        const NAME: &str = "viscous positivity bound";
        match self.positivity_run() {
            Ok(r) => outcome(
                "9",
                NAME,
                r.min_ratio >= 0.9,
                format!("min ρ/(ε e^(−Kt) e^(−x²)) over |x| ≤ 2, t ≤ T: {:.4} (need ≥ 0.9)", r.min_ratio),
            ),
            Err(e) => fail("9", NAME, e.clone()),
        }
    }

    /// Bounds every run of the invariant suite must satisfy.
    fn run_invariants(name: &str, stats: &RunStats, rho_bound: f64, h: f64) -> Vec<String> {
        let mut bad = Vec::new();
        let tol = 1.0 + 1e-10;
        if stats.max_gronwall_ratio > tol || stats.max_discrete_gronwall_ratio > tol {
            bad.push(format!(
                "{name}: mass exceeds the Gronwall bound (ratio {:.3e})",
                stats.max_gronwall_ratio.max(stats.max_discrete_gronwall_ratio)
            ));
        }
        if stats.max_sup_rho > rho_bound * (1.0 + 10.0 * h) {
            bad.push(format!(
                "{name}: sup ρ = {:.6} above ρ_M(1 + 10h) = {:.6}",
                stats.max_sup_rho,
                rho_bound * (1.0 + 10.0 * h)
            ));
        }
        bad
    }

    fn layer_sum_gap(&self) -> Result<(f64, RunStats, f64, f64)> {
        let mut cfg = self.config("saturation.toml")?;
        cfg.reaction.g1 = 0.0;
        cfg.solver.gamma = 5.0;
        cfg.solver.t_end = 0.2;
        let prepared = cfg.prepare()?;
        let solver = &prepared.solver;
        solver.preflight(&prepared.n0)?;
        let mut state = solver.state(prepared.n0.clone(), 0.0, 0)?;
        let mut gap: f64 = 0.0;
        let volume = solver.grid.cell_volume();
        let rate = solver.rate_bound();
        let m0 = state.rho.iter().sum::<f64>() * volume;
        let mut stats = RunStats {
            steps: 0,
            flushed: 0,
            boundary_contacts: 0,
            min_dt: f64::INFINITY,
            max_dt: 0.0,
            initial_mass: m0,
            final_mass: m0,
            max_sup_rho: state.rho.max(),
            max_gronwall_ratio: 1.0,
            max_discrete_gronwall_ratio: 1.0,
        };
        let mut product = 1.0;
        while state.t < solver.config.t_end {
            let dt = solver.stable_dt(&state).min(solver.config.t_end - state.t);
            let rho_only = solver.step_density_only(&state.rho, dt)?;
            let (next, _) = solver.step(&state, dt)?;
            for (a, b) in next.rho.iter().zip(rho_only.iter()) {
                gap = gap.max((a - b).abs());
            }
            product *= 1.0 + dt * rate;
            let mass = next.rho.iter().sum::<f64>() * volume;
            stats.steps += 1;
            stats.max_sup_rho = stats.max_sup_rho.max(next.rho.max());
            stats.max_gronwall_ratio = stats.max_gronwall_ratio.max(mass / (m0 * (rate * next.t).exp()));
            stats.max_discrete_gronwall_ratio = stats.max_discrete_gronwall_ratio.max(mass / (m0 * product));
            stats.final_mass = mass;
            state = next;
        }
        Ok((gap / solver.rho_max(), stats, solver.rho_max(), solver.grid.min_spacing()))
    }

    fn invariants(&self) -> CriterionOutcome {
        const NAME: &str = "invariant suite";
        let mut bad = Vec::new();
        let mut notes = Vec::new();

        match &*self.barenblatt_run(200) {
            Ok(r) => {
                bad.extend(Self::run_invariants("Barenblatt", &r.stats, r.rho_bound, r.h));
                let drift = ((r.stats.final_mass - r.stats.initial_mass) / r.stats.initial_mass).abs();
                let allowed = 1e-13 * (r.stats.steps as f64 / 1e3).max(1.0);
                if drift > allowed {
                    bad.push(format!("Barenblatt: mass drift {drift:.2e} > {allowed:.2e}"));
                }
                notes.push(format!("R≡0 mass drift {drift:.1e} over {} steps", r.stats.steps));
            }
            Err(e) => bad.push(format!("Barenblatt: {e}")),
        }

        match self.layer_sum_gap() {
            Ok((gap, stats, rho_m, h)) => {
                bad.extend(Self::run_invariants("layer-sum", &stats, rho_m, h));
                if gap > 1e-12 {
                    bad.push(format!("layer-sum: per-step gap {gap:.2e} > 1e-12"));
                }
                notes.push(format!("layer-sum gap {gap:.1e}"));
            }
            Err(e) => bad.push(format!("layer-sum: {e}")),
        }

        let saturating = (|| -> Result<(RunStats, f64, f64)> {
            let mut cfg = self.config("saturation.toml")?;
            cfg.solver.gamma = 20.0;
            cfg.solver.t_end = 0.5;
            cfg.solver.diagnostics_interval = cfg.solver.t_end;
            let prepared = cfg.prepare()?;
            let traj = prepared.solver.run(&prepared.n0)?;
            Ok((traj.stats, prepared.solver.rho_max(), prepared.solver.grid.min_spacing()))
        })();
        match saturating {
            Ok((stats, rho_m, h)) => {
                bad.extend(Self::run_invariants("saturating growth", &stats, rho_m, h));
                notes.push(format!("sup ρ/ρ_M {:.4}", stats.max_sup_rho / rho_m));
            }
            Err(e) => bad.push(format!("saturating growth: {e}")),
        }

        match self.positivity_run() {
            Ok(r) => bad.extend(Self::run_invariants("viscous", &r.stats, r.rho_bound, r.h)),
            Err(e) => bad.push(format!("viscous: {e}")),
        }

        if bad.is_empty() {
            outcome("3", NAME, true, format!("4 runs clean; {}", notes.join("; ")))
        } else {
            fail("3", NAME, bad.join("; "))
        }
    }

    fn gamma_sweep(&self) -> &Shared<SweepResult> {
        self.gamma_sweep.get_or_init(|| {
            let cfg = self.config("saturation.toml").map_err(|e| e.to_string())?;
            let opts = SweepOptions {
                jobs: self.opts.jobs,
                out: None,
            };
            let res = gamma_sweep(&cfg, &SWEEP_GAMMAS, &opts).map_err(|e| e.to_string())?;
            if let Some((row, msg)) = res
                .rows
                .iter()
                .find_map(|r| r.outcome.as_ref().err().map(|m| (r.value, m)))
            {
                return Err(format!("γ = {row}: {msg}"));
            }
            Ok(res)
        })
    }

    fn sweep_column(res: &SweepResult, f: impl Fn(&super::sweep::SweepMetrics) -> f64) -> Vec<f64> {
        res.metrics().into_iter().map(|m| m.map_or(f64::NAN, &f)).collect()
    }

    fn incompressible_limit(&self) -> CriterionOutcome {
        const NAME: &str = "incompressible limit (γ-sweep)";
        let res = match self.gamma_sweep() {
            Ok(r) => r,
            Err(e) => return fail("4", NAME, e.clone()),
        };
        let sat = Self::sweep_column(res, |m| m.saturation_residual);
        let comp = Self::sweep_column(res, |m| m.complementarity_residual);
        let ok = |v: &[f64]| strictly_decreasing(v) && v[3] < 0.25 * v[0];
        outcome(
            "4",
            NAME,
            ok(&sat) && ok(&comp),
            format!(
                "saturation {} ({:.1}% of γ=5), complementarity {} ({:.1}% of γ=5)",
                fmt_list(&sat),
                100.0 * sat[3] / sat[0],
                fmt_list(&comp),
                100.0 * comp[3] / comp[0]
            ),
        )
    }

    fn uniform_bounds(&self) -> CriterionOutcome {
        const NAME: &str = "γ-uniform L4 and Hessian bounds";
        let res = match self.gamma_sweep() {
            Ok(r) => r,
            Err(e) => return fail("6", NAME, e.clone()),
        };
        let l4 = Self::sweep_column(res, |m| m.grad_p_l4_integral);
        let hess = Self::sweep_column(res, |m| m.hessian_integral);
        let ok = |v: &[f64]| v[1..].iter().all(|x| *x <= 2.0 * v[0]);
        outcome(
            "6",
            NAME,
            ok(&l4) && ok(&hess),
            format!("∬|∇p|⁴ {}, ∬p|D²p|² {} (need ≤ 2× γ=5)", fmt_list(&l4), fmt_list(&hess)),
        )
    }

    fn regularization_limit(&self) -> CriterionOutcome {
        const NAME: &str = "regularization limit (ε-sweep)";
        let res = (|| -> Result<SweepResult> {
            let mut cfg = self.config("saturation.toml")?;
            cfg.solver.gamma = 5.0;
            let opts = SweepOptions {
                jobs: self.opts.jobs,
                out: None,
            };
            epsilon_sweep(&cfg, &SWEEP_EPSILONS, &opts)
        })();
        let res = match res {
            Ok(r) => r,
            Err(e) => return fail("5", NAME, e.to_string()),
        };
        if let Some(r) = res.rows.iter().find(|r| r.outcome.is_err()) {
            return fail("5", NAME, format!("ε = {}: {}", r.value, r.outcome.as_ref().unwrap_err()));
        }
        let v = Self::sweep_column(&res, |m| m.v_l2_diff.unwrap_or(f64::NAN));
        let rho = Self::sweep_column(&res, |m| m.rho_l1_diff.unwrap_or(f64::NAN));
        outcome(
            "5",
            NAME,
            strictly_decreasing(&v),
            format!(
                "‖v_ε − v_0‖_L2 {} for ε = 0.1/0.03/0.01/0; ‖ρ_ε − ρ_0‖_L1 {}",
                fmt_list(&v),
                fmt_list(&rho)
            ),
        )
    }

    fn weighted_l4(&self) -> CriterionOutcome {
        const NAME: &str = "weighted L4 grid stability";
        self.prefetch_barenblatt(&[400, 800]);
        let coarse = self.barenblatt_run(400);
        let fine = self.barenblatt_run(800);
        let (c, f) = match (&*coarse, &*fine) {
            (Ok(c), Ok(f)) => (c, f),
            (Err(e), _) | (_, Err(e)) => return fail("7", NAME, e.clone()),
        };
        let changes: Vec<f64> = c
            .weighted
            .iter()
            .zip(&f.weighted)
            .map(|(a, b)| ((b - a) / a).abs())
            .collect();
        let finite = c.weighted.iter().chain(&f.weighted).all(|v| v.is_finite() && *v > 0.0);
        outcome(
            "7",
            NAME,
            finite && changes.iter().all(|&x| x < 0.2),
            format!(
                "κ·∬|∇p|⁴/p^(1−α) at α = 0.1/0.25/0.4: N=400 {}, N=800 {}, change {}",
                fmt_list(&c.weighted),
                fmt_list(&f.weighted),
                fmt_list(&changes)
            ),
        )
    }

    fn entropy_identity(&self) -> CriterionOutcome {
        const NAME: &str = "entropy vs AB-weighted gradient";
        match &*self.barenblatt_run(800) {
            Ok(r) => {
                let rel = ((r.entropy - r.ab) / r.ab).abs();
                outcome(
                    "8",
                    NAME,
                    r.entropy.is_finite() && r.ab > 0.0 && rel < 0.05,
                    format!(
                        "inner 80% of support at T, N = 800: {:.5e} vs {:.5e}, rel. diff {:.2e} (need < 5e-2)",
                        r.entropy, r.ab, rel
                    ),
                )
            }
            Err(e) => fail("8", NAME, e.clone()),
        }
    }
}

/// Runs the whole suite with the configs in `dir`.
pub fn verify_all(dir: &Path, jobs: usize) -> Result<Vec<CriterionOutcome>> {
    let mut opts = VerifyOptions::new(dir);
    opts.jobs = jobs;
    Ok(Verifier::new(opts)?.run_all())
}

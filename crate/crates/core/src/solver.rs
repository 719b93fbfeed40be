//! Explicit finite-volume integration of the structured system
//!
//! ```text
//! ∂_t n_j − ∇·(n_j ∇p) − ε Δn_j = n_j R(y_j, p),   p = ρ^γ,  ρ = Σ_j w_j n_j
//! ```
//!
//! Every face carries the velocity `u = −∇_h p` (two-point difference of the
//! cell pressures) and the donor-cell value of the transported density, so
//! all layers share one velocity field. The density-only update uses the same
//! face flux with `ρ` as donor; summing the layer updates reproduces it up to
//! rounding.

use rayon::prelude::*;

use crate::diagnostics::{self, DiagnosticsRecord, DiagnosticsSettings};
use crate::error::{Error, Result};
use crate::fields::{
    fraction_densities, total_density, FractionField, PopulationField, PressureExponent, ScalarField,
    RHO_FLOOR_REL,
};
use crate::grid::{PhenotypeMesh, SpatialGrid};
use crate::initial::check_well_prepared;
use crate::reaction::{mean_reaction, validate_reaction, MutationKernel, ReactionSpec};

/// Values in `[−NEG_FLUSH_REL·ρ_M, 0)` are treated as roundoff and set to zero;
/// anything more negative aborts the step.
pub const NEG_FLUSH_REL: f64 = 1e-14;
/// Guard added to the gradient in the advective time-step bound.
pub const GRAD_GUARD: f64 = 1e-30;
/// Layer-parallel updates only pay off on large grids.
const PAR_MIN_WORK: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Support touching the boundary is an error.
    Abort,
    /// Count the contact and continue.
    Warn,
    /// Do not check.
    Ignore,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub gamma: PressureExponent,
    pub epsilon: f64,
    pub cfl: f64,
    pub t_end: f64,
    /// Times at which full snapshots are kept (the initial and final states
    /// are always kept).
    pub snapshot_times: Vec<f64>,
    /// Replace the local reaction by the mutation kernel.
    pub mutation: bool,
    pub boundary: BoundaryPolicy,
    /// A boundary cell counts as occupied above `support_tol·ρ_M`.
    pub support_tol: f64,
    /// Minimum time between two diagnostics records; zero records every step.
    pub diagnostics_interval: f64,
    pub diagnostics: DiagnosticsSettings,
    /// Run even when the reaction or initial-data checks fail.
    pub skip_checks: bool,
}

impl SolverConfig {
    pub fn new(gamma: PressureExponent, t_end: f64) -> Self {
        SolverConfig {
            gamma,
            epsilon: 0.0,
            cfl: 0.4,
            t_end,
            snapshot_times: Vec::new(),
            mutation: false,
            boundary: BoundaryPolicy::Abort,
            support_tol: 1e-10,
            diagnostics_interval: 0.0,
            diagnostics: DiagnosticsSettings::for_gamma(gamma.value()),
            skip_checks: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            errs.push(format!("end time must be nonnegative, got {}", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            errs.push(format!("CFL factor must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            errs.push(format!("viscosity must be nonnegative, got {}", self.epsilon));
        }
        if !(self.diagnostics_interval >= 0.0) {
            errs.push("diagnostics interval must be nonnegative".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// State of a run with every derived field consistent with `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationState {
    pub t: f64,
    pub step: usize,
    pub n: PopulationField,
    pub rho: ScalarField,
    pub p: ScalarField,
    pub v: ScalarField,
    pub sigma: FractionField,
    /// Mean growth rate `ℛ`.
    pub growth: ScalarField,
}

/// Grid, trait mesh, reaction model and configuration of one simulation.
#[derive(Clone, Debug)]
pub struct Solver {
    pub grid: SpatialGrid,
    pub mesh: PhenotypeMesh,
    pub reaction: ReactionSpec,
    pub kernel: Option<MutationKernel>,
    pub config: SolverConfig,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Entries flushed from tiny negative values to zero.
    pub flushed: usize,
    pub boundary_contact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub flushed: usize,
    pub boundary_contacts: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub max_sup_rho: f64,
    /// Largest `M(t)/(M(0)·e^{‖R‖∞ t})` seen.
    pub max_gronwall_ratio: f64,
    /// Largest `M(t_k)/(M(0)·Π(1 + dt‖R‖∞))` seen.
    pub max_discrete_gronwall_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: SimulationState,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<DiagnosticsRecord>,
    pub stats: RunStats,
    pub t_end: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &SimulationState {
        &self.snapshots.last().expect("trajectory holds the initial state").state
    }

    /// Left Riemann sum of `f(record)` over `[from, to]` on the recorded time
    /// sequence; the last record is held until `to`.
    pub fn integrate(&self, from: f64, to: f64, f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
        let mut acc = 0.0;
        for (k, rec) in self.records.iter().enumerate() {
            let next = self.records.get(k + 1).map_or(self.t_end, |r| r.t);
            let a = rec.t.max(from);
            let b = next.min(to);
            if b > a {
                acc += f(rec) * (b - a);
            }
        }
        acc
    }

    /// Time average over `[from, to]`.
    pub fn average(&self, from: f64, to: f64, f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
        if to > from {
            self.integrate(from, to, f) / (to - from)
        } else {
            self.records.last().map_or(0.0, f)
        }
    }
}

impl Solver {
    pub fn new(
        grid: SpatialGrid,
        mesh: PhenotypeMesh,
        reaction: ReactionSpec,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Solver {
            grid,
            mesh,
            reaction,
            kernel: None,
            config,
        })
    }

    pub fn with_kernel(mut self, kernel: MutationKernel) -> Self {
        self.kernel = Some(kernel);
        self
    }

    pub fn gamma(&self) -> PressureExponent {
        self.config.gamma
    }

    pub fn p_max(&self) -> f64 {
        self.reaction.homeostatic_pressure()
    }

    /// `ρ_M = p_M^{1/γ}`.
    pub fn rho_max(&self) -> f64 {
        self.gamma().saturation_density(self.p_max())
    }

    /// Bound on the reaction rate used in the time-step cap.
    pub fn rate_bound(&self) -> f64 {
        match (&self.kernel, self.config.mutation) {
            (Some(k), true) => k.sup_norm(),
            _ => self.reaction.sup_rate(),
        }
    }

    /// Bound on `|∂_p R|`, matching [`Solver::rate_bound`].
    pub fn pressure_slope_bound(&self) -> f64 {
        match (&self.kernel, self.config.mutation) {
            (Some(k), true) => k.sup_pressure_slope(),
            _ => self.reaction.sup_pressure_slope(),
        }
    }

    pub fn state(&self, n: PopulationField, t: f64, step: usize) -> Result<SimulationState> {
        n.check_shape(&self.mesh, self.grid.len())?;
        let rho = total_density(&n, &self.mesh)?;
        self.state_from(n, rho, t, step)
    }

    fn state_from(
        &self,
        n: PopulationField,
        rho: ScalarField,
        t: f64,
        step: usize,
    ) -> Result<SimulationState> {
        let gamma = self.gamma();
        let p = ScalarField(rho.iter().map(|&r| gamma.pressure_of(r.max(0.0))).collect());
        let v = ScalarField(rho.iter().zip(p.iter()).map(|(r, p)| r * p).collect());
        let sigma = fraction_densities(&n, &rho, RHO_FLOOR_REL * self.rho_max())?;
        let growth = mean_reaction(&sigma, &p, &self.mesh, &self.reaction)?;
        Ok(SimulationState {
            t,
            step,
            n,
            rho,
            p,
            v,
            sigma,
            growth,
        })
    }

    /// `c_cfl·min(h²/(2d(γ p_max + ε)), h/(max|∇_h p| + δ), 1/(2‖R‖∞),
    /// 1/(2(‖R‖∞ + γ max(p_M, p_max)‖∂_p R‖∞)))`.
    pub fn stable_dt(&self, state: &SimulationState) -> f64 {
        self.stable_dt_for(&state.p)
    }

    fn stable_dt_for(&self, p: &[f64]) -> f64 {
        let h = self.grid.min_spacing();
        let d = self.grid.dim() as f64;
        let p_top = p.iter().copied().fold(0.0, f64::max);
        let diff_coeff = self.gamma().value() * p_top + self.config.epsilon;
        let diffusive = if diff_coeff > 0.0 {
            h * h / (2.0 * d * diff_coeff)
        } else {
            f64::INFINITY
        };
        let grad = self
            .grid
            .faces()
            .iter()
            .map(|f| {
                let hp = self.grid.spacing(f.axis);
                ((SpatialGrid::ghosted(p, f.upper) - SpatialGrid::ghosted(p, f.lower)) / hp).abs()
            })
            .fold(0.0, f64::max);
        let advective = h / (grad + GRAD_GUARD);
        let rate = self.rate_bound();
        let reactive = if rate > 0.0 { 1.0 / (2.0 * rate) } else { f64::INFINITY };
        // Lipschitz constant of ρ ↦ ρR(ρ^γ) up to saturation; without it the
        // reaction step overshoots ρ_M when p starts far below p_M.
        let stiffness = rate + self.gamma().value() * self.p_max().max(p_top) * self.pressure_slope_bound();
        let saturating = if stiffness > 0.0 { 1.0 / (2.0 * stiffness) } else { f64::INFINITY };
        self.config.cfl * diffusive.min(advective).min(reactive).min(saturating)
    }

    /// Face velocities `−(p_upper − p_lower)/h`, ghost pressure zero.
    fn face_velocities(&self, p: &[f64]) -> Vec<f64> {
        self.grid
            .faces()
            .iter()
            .map(|f| {
                let hp = self.grid.spacing(f.axis);
                -(SpatialGrid::ghosted(p, f.upper) - SpatialGrid::ghosted(p, f.lower)) / hp
            })
            .collect()
    }

    /// Adds `−dt·div_h(F)` to `out` for the face flux
    /// `F = u⁺ q_lower + u⁻ q_upper + ε (q_lower − q_upper)/h`.
    fn transport(&self, q: &[f64], velocity: &[f64], dt: f64, out: &mut [f64]) {
        let eps = self.config.epsilon;
        for (face, &u) in self.grid.faces().iter().zip(velocity) {
            let hp = self.grid.spacing(face.axis);
            let lo = SpatialGrid::ghosted(q, face.lower);
            let hi = SpatialGrid::ghosted(q, face.upper);
            let mut flux = if u > 0.0 { u * lo } else { u * hi };
            if eps > 0.0 {
                flux += eps * (lo - hi) / hp;
            }
            let delta = dt * flux / hp;
            if let Some(l) = face.lower {
                out[l] -= delta;
            }
            if let Some(r) = face.upper {
                out[r] += delta;
            }
        }
    }

    /// Flushes roundoff negatives; errors on anything worse.
    fn enforce_sign(&self, values: &mut [f64], t: f64, step: usize, layer: usize) -> Result<usize> {
        let floor = -NEG_FLUSH_REL * self.rho_max();
        let mut flushed = 0;
        for (cell, v) in values.iter_mut().enumerate() {
            if *v < 0.0 || v.is_nan() {
                if *v >= floor {
                    *v = 0.0;
                    flushed += 1;
                } else {
                    return Err(Error::Instability {
                        time: t,
                        step,
                        layer,
                        cell,
                        value: *v,
                    });
                }
            } else if !v.is_finite() {
                return Err(Error::Instability {
                    time: t,
                    step,
                    layer,
                    cell,
                    value: *v,
                });
            }
        }
        Ok(flushed)
    }

    fn boundary_density(&self, rho: &[f64]) -> f64 {
        (0..self.grid.len())
            .filter(|&c| self.grid.is_boundary_cell(c))
            .map(|c| rho[c])
            .fold(0.0, f64::max)
    }

    fn check_boundary(&self, rho: &[f64], t: f64, step: usize) -> Result<bool> {
        if self.config.boundary == BoundaryPolicy::Ignore {
            return Ok(false);
        }
        let edge = self.boundary_density(rho);
        if edge > self.config.support_tol * self.rho_max() {
            if self.config.boundary == BoundaryPolicy::Abort {
                return Err(Error::BoundaryContact {
                    time: t,
                    step,
                    density: edge,
                });
            }
            return Ok(true);
        }
        Ok(false)
    }

    /// One forward-Euler step of length `dt`.
    pub fn step(&self, state: &SimulationState, dt: f64) -> Result<(SimulationState, StepReport)> {
        let velocity = self.face_velocities(&state.p);
        let t_new = state.t + dt;
        let step_no = state.step + 1;
        let mutation = if self.config.mutation {
            Some(crate::reaction::mutation_reaction(
                &state.n,
                &state.p,
                self.kernel.as_ref(),
            )?)
        } else {
            None
        };

        let update_layer = |j: usize| -> Result<(Vec<f64>, usize)> {
            let nj = state.n.layer(j);
            let mut out = nj.to_vec();
            self.transport(nj, &velocity, dt, &mut out);
            match &mutation {
                Some(m) => {
                    for (o, r) in out.iter_mut().zip(m.layer(j)) {
                        *o += dt * r;
                    }
                }
                None => {
                    let y = self.mesh.node(j);
                    for ((o, &n), &p) in out.iter_mut().zip(nj).zip(state.p.iter()) {
                        *o += dt * n * self.reaction.eval(y, p);
                    }
                }
            }
            let flushed = self.enforce_sign(&mut out, t_new, step_no, j)?;
            Ok((out, flushed))
        };

        let layers = self.mesh.len();
        let results: Vec<Result<(Vec<f64>, usize)>> = if layers * self.grid.len() >= PAR_MIN_WORK {
            (0..layers).into_par_iter().map(update_layer).collect()
        } else {
            (0..layers).map(update_layer).collect()
        };
        let mut new_layers = Vec::with_capacity(layers);
        let mut report = StepReport::default();
        for r in results {
            let (layer, flushed) = r?;
            report.flushed += flushed;
            new_layers.push(layer);
        }
        let n = PopulationField::from_layers(new_layers)?;
        let rho = total_density(&n, &self.mesh)?;
        report.boundary_contact = self.check_boundary(&rho, t_new, step_no)?;
        let next = self.state_from(n, rho, t_new, step_no)?;
        Ok((next, report))
    }

    /// Growth rate of the density-only equation, `Σ_j w_j R(y_j, p)` (exact
    /// mean rate when `R` does not depend on the trait).
    fn trait_averaged_rate(&self, p: f64) -> f64 {
        self.mesh.integrate(|j| self.reaction.eval(self.mesh.node(j), p))
    }

    /// One step of `∂_t ρ − γ/(γ+1) Δρ^{γ+1} − εΔρ = ρℛ`, with the
    /// nonlinear diffusion written as the upwind flux `ρ·(−∇_h p)`.
    pub fn step_density_only(&self, rho: &ScalarField, dt: f64) -> Result<ScalarField> {
        if rho.len() != self.grid.len() {
            return Err(Error::dims(format!("{} cells", self.grid.len()), rho.len()));
        }
        let gamma = self.gamma();
        let p: Vec<f64> = rho.iter().map(|&r| gamma.pressure_of(r.max(0.0))).collect();
        let velocity = self.face_velocities(&p);
        let mut out = rho.to_vec();
        self.transport(rho, &velocity, dt, &mut out);
        for ((o, &r), &pi) in out.iter_mut().zip(rho.iter()).zip(&p) {
            *o += dt * r * self.trait_averaged_rate(pi);
        }
        self.enforce_sign(&mut out, f64::NAN, 0, 0)?;
        self.check_boundary(&out, f64::NAN, 0)?;
        Ok(ScalarField(out))
    }

    /// Time step for the density-only mode.
    pub fn stable_dt_density_only(&self, rho: &ScalarField) -> f64 {
        let gamma = self.gamma();
        let p: Vec<f64> = rho.iter().map(|&r| gamma.pressure_of(r.max(0.0))).collect();
        self.stable_dt_for(&p)
    }

    /// Reaction and initial-data checks required before a run.
    pub fn preflight(&self, initial: &PopulationField) -> Result<()> {
        initial.check_shape(&self.mesh, self.grid.len())?;
        if self.config.mutation && self.kernel.is_none() {
            return Err(Error::Mode("mutation mode enabled without a kernel".into()));
        }
        if self.config.skip_checks {
            return Ok(());
        }
        let mut problems = Vec::new();
        let rep = validate_reaction(&self.reaction);
        if !rep.passed() {
            problems.push(format!("reaction violates the inhibition conditions: {}", rep.summary()));
        }
        if let (true, Some(k)) = (self.config.mutation, &self.kernel) {
            let bad = k.validate();
            if !bad.is_empty() {
                problems.push(format!("mutation kernel not monotone in p at {bad:?}"));
            }
        }
        let wp = check_well_prepared(initial, &self.mesh, &self.grid, self.gamma(), self.p_max())?;
        if !wp.passed() {
            let shown: Vec<_> = wp.violations.iter().take(5).collect();
            problems.push(format!(
                "initial density exceeds [0, ρ_M = {:.6}] at (cell, ρ) {shown:?}",
                wp.rho_bound
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(problems.join("; ")))
        }
    }

    /// Advances `initial` to `t_end` with `dt = stable_dt`, shortened to hit
    /// snapshot times and the end time exactly.
    pub fn run(&self, initial: &PopulationField) -> Result<Trajectory> {
        self.run_with(initial, |_, _| {})
    }

    /// As [`Solver::run`], calling `monitor(state, dt)` after every accepted step.
    pub fn run_with(
        &self,
        initial: &PopulationField,
        mut monitor: impl FnMut(&SimulationState, f64),
    ) -> Result<Trajectory> {
        self.preflight(initial)?;
        let cfg = &self.config;
        let t_end = cfg.t_end;
        let mut state = self.state(initial.clone(), 0.0, 0)?;
        let volume = self.grid.cell_volume();
        let mass_of = |s: &SimulationState| s.rho.iter().sum::<f64>() * volume;
        let initial_mass = mass_of(&state);
        let rate = self.reaction.sup_rate();

        let mut stats = RunStats {
            steps: 0,
            flushed: 0,
            boundary_contacts: 0,
            min_dt: f64::INFINITY,
            max_dt: 0.0,
            initial_mass,
            final_mass: initial_mass,
            max_sup_rho: state.rho.max(),
            max_gronwall_ratio: if initial_mass > 0.0 { 1.0 } else { 0.0 },
            max_discrete_gronwall_ratio: if initial_mass > 0.0 { 1.0 } else { 0.0 },
        };
        let mut snap_times: Vec<f64> = cfg
            .snapshot_times
            .iter()
            .copied()
            .filter(|&t| t > 0.0 && t < t_end)
            .collect();
        snap_times.sort_by(f64::total_cmp);
        snap_times.dedup();
        let mut next_snap = 0;

        let mut snapshots = vec![Snapshot {
            t: 0.0,
            state: state.clone(),
        }];
        let mut records = vec![diagnostics::record(&state, self)];
        let mut last_record = 0.0;
        let mut gronwall_product = 1.0;

        while state.t < t_end {
            let mut dt = self.stable_dt(&state);
            let mut target = t_end;
            if let Some(&ts) = snap_times.get(next_snap) {
                target = ts;
            }
            let hit = state.t + dt >= target;
            if hit {
                dt = target - state.t;
            }
            if !(dt > 0.0) {
                return Err(Error::Instability {
                    time: state.t,
                    step: state.step,
                    layer: 0,
                    cell: 0,
                    value: dt,
                });
            }
            let (mut next, report) = self.step(&state, dt)?;
            if hit {
                next.t = target;
            }
            stats.steps += 1;
            stats.flushed += report.flushed;
            stats.boundary_contacts += usize::from(report.boundary_contact);
            stats.min_dt = stats.min_dt.min(dt);
            stats.max_dt = stats.max_dt.max(dt);
            stats.max_sup_rho = stats.max_sup_rho.max(next.rho.max());
            gronwall_product *= 1.0 + dt * rate;
            if initial_mass > 0.0 {
                let mass = mass_of(&next);
                stats.max_gronwall_ratio = stats
                    .max_gronwall_ratio
                    .max(mass / (initial_mass * (rate * next.t).exp()));
                stats.max_discrete_gronwall_ratio = stats
                    .max_discrete_gronwall_ratio
                    .max(mass / (initial_mass * gronwall_product));
            }
            monitor(&next, dt);
            state = next;

            let at_end = state.t >= t_end;
            if hit && !at_end {
                snapshots.push(Snapshot {
                    t: state.t,
                    state: state.clone(),
                });
                next_snap += 1;
            }
            if at_end || state.t - last_record >= cfg.diagnostics_interval {
                records.push(diagnostics::record(&state, self));
                last_record = state.t;
            }
        }
        if t_end > 0.0 {
            snapshots.push(Snapshot {
                t: state.t,
                state: state.clone(),
            });
        }
        stats.final_mass = mass_of(&state);
        if stats.steps == 0 {
            stats.min_dt = 0.0;
        }
        Ok(Trajectory {
            snapshots,
            records,
            stats,
            t_end,
        })
    }
}

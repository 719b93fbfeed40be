//! Discrete versions of the functionals bounded by the a priori estimates and
//! of the residuals that vanish in the stiff-pressure limit.
//!
//! Gradient integrands are sampled on faces. The normal component is the
//! two-point difference across the face; in 2D the tangential component is
//! the mean of the centered differences in the two adjacent cells. Each axis'
//! faces tile the domain once, so a face carries weight `h^d/d`. Second
//! derivatives and residuals are sampled at cell centers with ghost values
//! zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{PressureExponent, ScalarField};
use crate::grid::{Face, SpatialGrid};
use crate::solver::{SimulationState, Solver};

/// Relative floor (times `p_M`) for face-mean pressures in weighted integrands.
pub const P_FLOOR_REL: f64 = 1e-12;
/// Default free-boundary threshold relative to `p_M`.
pub const FRONT_THRESHOLD_REL: f64 = 1e-6;

/// Column order of the diagnostics CSV. Changing it is a schema change.
pub const DIAGNOSTICS_HEADER: &str = "t,mass,sup_rho,second_moment,sigma_sup,grad_p_l2,grad_p_l4,\
weighted_grad4,entropy_dissipation,ab_weighted,hessian_weighted,saturation_residual,\
complementarity_residual,laplace_residual_weighted";
pub const DIAGNOSTICS_SCHEMA: &str = "phenoflow-diagnostics/1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsSettings {
    /// Exponent of the weighted `L⁴` integrand `|∇p|⁴/p^{1−α}`; must lie in `[0, 1/γ)`.
    pub alpha: f64,
}

impl DiagnosticsSettings {
    pub fn for_gamma(gamma: f64) -> Self {
        DiagnosticsSettings { alpha: 0.5 / gamma }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub sup_rho: f64,
    pub second_moment: f64,
    pub sigma_sup: f64,
    pub grad_p_l2: f64,
    pub grad_p_l4: f64,
    pub weighted_grad4: f64,
    pub entropy_dissipation: f64,
    pub ab_weighted: f64,
    pub hessian_weighted: f64,
    pub saturation_residual: f64,
    pub complementarity_residual: f64,
    /// `∫ p^{α+1}(Δp + ℛ)²`.
    pub laplace_residual_weighted: f64,
}

impl DiagnosticsRecord {
    pub fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.mass,
            self.sup_rho,
            self.second_moment,
            self.sigma_sup,
            self.grad_p_l2,
            self.grad_p_l4,
            self.weighted_grad4,
            self.entropy_dissipation,
            self.ab_weighted,
            self.hessian_weighted,
            self.saturation_residual,
            self.complementarity_residual,
            self.laplace_residual_weighted,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasicNorms {
    pub mass: f64,
    pub sup_rho: f64,
    pub second_moment: f64,
    pub sigma_sup: f64,
}

pub fn basic_norms(state: &SimulationState, grid: &SpatialGrid) -> BasicNorms {
    let vol = grid.cell_volume();
    let mut mass = 0.0;
    let mut moment = 0.0;
    for (c, &r) in state.rho.iter().enumerate() {
        mass += r;
        moment += r * grid.radius_sq(c);
    }
    BasicNorms {
        mass: mass * vol,
        sup_rho: state.rho.max(),
        second_moment: moment * vol,
        sigma_sup: state.sigma.max(),
    }
}

/// A face sample of a cell field: `|∇q|²` and the arithmetic face mean of `q`.
#[derive(Clone, Copy, Debug)]
pub struct FaceSample {
    pub grad_sq: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub face: Face,
}

fn central(q: &[f64], grid: &SpatialGrid, cell: Option<usize>, axis: usize) -> f64 {
    let Some(c) = cell else { return 0.0 };
    let up = SpatialGrid::ghosted(q, grid.neighbor(c, axis, 1));
    let down = SpatialGrid::ghosted(q, grid.neighbor(c, axis, -1));
    (up - down) / (2.0 * grid.spacing(axis))
}

pub fn face_samples<'a>(q: &'a [f64], grid: &'a SpatialGrid) -> impl Iterator<Item = FaceSample> + 'a {
    grid.faces().iter().map(move |face| {
        let lo = SpatialGrid::ghosted(q, face.lower);
        let hi = SpatialGrid::ghosted(q, face.upper);
        let normal = (hi - lo) / grid.spacing(face.axis);
        let mut grad_sq = normal * normal;
        if grid.dim() == 2 {
            let other = 1 - face.axis;
            let tangential = 0.5 * (central(q, grid, face.lower, other) + central(q, grid, face.upper, other));
            grad_sq += tangential * tangential;
        }
        FaceSample {
            grad_sq,
            mean: 0.5 * (lo + hi),
            lo,
            hi,
            face: *face,
        }
    })
}

fn face_integral(
    q: &[f64],
    grid: &SpatialGrid,
    region: Option<&dyn Fn([f64; 2]) -> bool>,
    f: impl Fn(&FaceSample) -> f64,
) -> f64 {
    let mut acc = 0.0;
    for s in face_samples(q, grid) {
        if region.is_none_or(|r| r(s.face.center)) {
            acc += f(&s);
        }
    }
    acc * grid.face_weight()
}

/// `∫|∇p|²`.
pub fn grad_p_l2(p: &[f64], grid: &SpatialGrid) -> f64 {
    face_integral(p, grid, None, |s| s.grad_sq)
}

/// `∫|∇p|⁴`.
pub fn grad_p_l4(p: &[f64], grid: &SpatialGrid) -> f64 {
    face_integral(p, grid, None, |s| s.grad_sq * s.grad_sq)
}

/// `(4γ/(γ+1)²) ∫|∇ρ^{(γ+1)/2}|²`.
pub fn entropy_dissipation(rho: &[f64], gamma: PressureExponent, grid: &SpatialGrid) -> f64 {
    entropy_dissipation_in(rho, gamma, grid, None)
}

/// [`entropy_dissipation`] restricted to faces whose center satisfies `region`.
pub fn entropy_dissipation_in(
    rho: &[f64],
    gamma: PressureExponent,
    grid: &SpatialGrid,
    region: Option<&dyn Fn([f64; 2]) -> bool>,
) -> f64 {
    let g = gamma.value();
    let q: Vec<f64> = rho.iter().map(|r| r.max(0.0).powf(0.5 * (g + 1.0))).collect();
    4.0 * g / ((g + 1.0) * (g + 1.0)) * face_integral(&q, grid, region, |s| s.grad_sq)
}

/// `(1/γ) ∫|∇p|²/p̄^{1−1/γ}` with `p̄ = max(face mean, P_FLOOR_REL·p_M)`.
pub fn ab_weighted_grad(p: &[f64], gamma: PressureExponent, p_max: f64, grid: &SpatialGrid) -> f64 {
    ab_weighted_grad_in(p, gamma, p_max, grid, None)
}

pub fn ab_weighted_grad_in(
    p: &[f64],
    gamma: PressureExponent,
    p_max: f64,
    grid: &SpatialGrid,
    region: Option<&dyn Fn([f64; 2]) -> bool>,
) -> f64 {
    let g = gamma.value();
    let floor = P_FLOOR_REL * p_max;
    let expo = 1.0 - 1.0 / g;
    face_integral(p, grid, region, |s| {
        if s.grad_sq == 0.0 {
            0.0
        } else {
            s.grad_sq / s.mean.max(floor).powf(expo)
        }
    }) / g
}

/// `κ(α) = (α/6)(1 − αγ)`.
pub fn kappa(alpha: f64, gamma: PressureExponent) -> f64 {
    alpha / 6.0 * (1.0 - alpha * gamma.value())
}

/// `(∫|∇p|⁴/p^{1−α}, κ(α))` for `0 ≤ α < 1/γ`; the weight is averaged exactly
/// along the linear interpolant of `p` across each face.
pub fn weighted_grad4(
    p: &[f64],
    alpha: f64,
    gamma: PressureExponent,
    p_max: f64,
    grid: &SpatialGrid,
) -> Result<(f64, f64)> {
    if !(alpha >= 0.0 && alpha < 1.0 / gamma.value()) {
        return Err(Error::Parameter(format!(
            "weighted L4 exponent α = {alpha} outside [0, 1/γ = {})",
            1.0 / gamma.value()
        )));
    }
    let floor = P_FLOOR_REL * p_max;
    let value = face_integral(p, grid, None, |s| {
        if s.grad_sq == 0.0 {
            0.0
        } else {
            s.grad_sq * s.grad_sq * linear_mean_pow(s.lo, s.hi, alpha, floor)
        }
    });
    Ok((value, kappa(alpha, gamma)))
}

/// Mean of `q^(α-1)` along the linear interpolant between `a` and `b`, both
/// floored at `floor`.
fn linear_mean_pow(a: f64, b: f64, alpha: f64, floor: f64) -> f64 {
    let (a, b) = (a.max(floor), b.max(floor));
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi - lo <= 1e-8 * hi {
        return (0.5 * (lo + hi)).powf(alpha - 1.0);
    }
    if alpha == 0.0 {
        (hi.ln() - lo.ln()) / (hi - lo)
    } else {
        (hi.powf(alpha) - lo.powf(alpha)) / (alpha * (hi - lo))
    }
}

/// `κ(α)` at the upper end `α = 1/γ` of the admissible range (zero).
pub fn kappa_at_upper_end(gamma: PressureExponent) -> f64 {
    kappa(1.0 / gamma.value(), gamma)
}

/// Discrete Laplacian with zero ghost values.
pub fn laplacian(p: &[f64], grid: &SpatialGrid) -> Vec<f64> {
    (0..grid.len())
        .map(|c| {
            (0..grid.dim())
                .map(|a| {
                    let h = grid.spacing(a);
                    (SpatialGrid::ghosted(p, grid.neighbor(c, a, 1)) - 2.0 * p[c]
                        + SpatialGrid::ghosted(p, grid.neighbor(c, a, -1)))
                        / (h * h)
                })
                .sum()
        })
        .collect()
}

fn hessian_sq(p: &[f64], grid: &SpatialGrid, c: usize) -> f64 {
    let mut acc = 0.0;
    for a in 0..grid.dim() {
        let h = grid.spacing(a);
        let d2 = (SpatialGrid::ghosted(p, grid.neighbor(c, a, 1)) - 2.0 * p[c]
            + SpatialGrid::ghosted(p, grid.neighbor(c, a, -1)))
            / (h * h);
        acc += d2 * d2;
    }
    if grid.dim() == 2 {
        let diag = |sx: isize, sy: isize| {
            let cell = grid.neighbor(c, 0, sx).and_then(|n| grid.neighbor(n, 1, sy));
            SpatialGrid::ghosted(p, cell)
        };
        let dxy = (diag(1, 1) - diag(1, -1) - diag(-1, 1) + diag(-1, -1))
            / (4.0 * grid.spacing(0) * grid.spacing(1));
        acc += 2.0 * dxy * dxy;
    }
    acc
}

/// `(∫ p Σ_{ij}(∂_{ij}p)², ∫|∇p|⁴)`.
pub fn hessian_weighted(p: &[f64], grid: &SpatialGrid) -> (f64, f64) {
    let weighted: f64 = (0..grid.len()).map(|c| p[c] * hessian_sq(p, grid, c)).sum();
    (weighted * grid.cell_volume(), grad_p_l4(p, grid))
}

/// `∫|p(1 − ρ)|`.
pub fn saturation_residual(p: &[f64], rho: &[f64], grid: &SpatialGrid) -> f64 {
    p.iter()
        .zip(rho)
        .map(|(p, r)| (p * (1.0 - r)).abs())
        .sum::<f64>()
        * grid.cell_volume()
}

/// `∫|p(Δ_h p + source)|` over cells not touching the ghost layer, where
/// `source = Σ_j w_j n_j R(y_j, p)`.
pub fn complementarity_residual_with(p: &[f64], source: &[f64], grid: &SpatialGrid) -> f64 {
    let lap = laplacian(p, grid);
    (0..grid.len())
        .filter(|&c| !grid.is_boundary_cell(c))
        .map(|c| (p[c] * (lap[c] + source[c])).abs())
        .sum::<f64>()
        * grid.cell_volume()
}

pub fn complementarity_residual(state: &SimulationState, solver: &Solver) -> f64 {
    let mesh = &solver.mesh;
    let source: Vec<f64> = (0..solver.grid.len())
        .map(|i| {
            mesh.integrate(|j| state.n.layer(j)[i] * solver.reaction.eval(mesh.node(j), state.p[i]))
        })
        .collect();
    complementarity_residual_with(&state.p, &source, &solver.grid)
}

/// `∫ p^{α+1}(Δ_h p + ℛ)²`.
pub fn laplace_residual_weighted(p: &[f64], growth: &[f64], alpha: f64, grid: &SpatialGrid) -> f64 {
    let lap = laplacian(p, grid);
    (0..grid.len())
        .map(|c| {
            let r = lap[c] + growth[c];
            p[c].powf(alpha + 1.0) * r * r
        })
        .sum::<f64>()
        * grid.cell_volume()
}

#[derive(Clone, Debug, PartialEq)]
pub enum FreeBoundary {
    /// Sorted crossing points of `p = threshold` along the line (1D).
    Interfaces(Vec<f64>),
    /// Cells with `p > threshold` (2D).
    Indicator(Vec<bool>),
}

/// Locates `{p > threshold}`. In 1D the crossings are linearly interpolated
/// between cell centers, including the ghost centers (where `p = 0`).
pub fn free_boundary(p: &ScalarField, threshold: f64, grid: &SpatialGrid) -> FreeBoundary {
    if grid.dim() == 2 {
        return FreeBoundary::Indicator(p.iter().map(|&v| v > threshold).collect());
    }
    let h = grid.spacing(0);
    let (x0, _) = grid.extent(0);
    let n = grid.len();
    let value = |k: isize| -> (f64, f64) {
        let x = x0 + (k as f64 + 0.5) * h;
        let v = if k < 0 || k >= n as isize { 0.0 } else { p[k as usize] };
        (x, v - threshold)
    };
    let mut out = Vec::new();
    for k in -1..n as isize {
        let (xa, a) = value(k);
        let (xb, b) = value(k + 1);
        if (a > 0.0) != (b > 0.0) {
            let t = a / (a - b);
            out.push(xa + t * (xb - xa));
        }
    }
    FreeBoundary::Interfaces(out)
}

/// Every diagnostic of `state`.
pub fn record(state: &SimulationState, solver: &Solver) -> DiagnosticsRecord {
    let grid = &solver.grid;
    let gamma = solver.gamma();
    let p_max = solver.p_max();
    let alpha = solver.config.diagnostics.alpha;
    let norms = basic_norms(state, grid);
    let (hess, grad4) = hessian_weighted(&state.p, grid);
    let weighted = weighted_grad4(&state.p, alpha, gamma, p_max, grid).map_or(f64::NAN, |(v, _)| v);
    DiagnosticsRecord {
        t: state.t,
        mass: norms.mass,
        sup_rho: norms.sup_rho,
        second_moment: norms.second_moment,
        sigma_sup: norms.sigma_sup,
        grad_p_l2: grad_p_l2(&state.p, grid),
        grad_p_l4: grad4,
        weighted_grad4: weighted,
        entropy_dissipation: entropy_dissipation(&state.rho, gamma, grid),
        ab_weighted: ab_weighted_grad(&state.p, gamma, p_max, grid),
        hessian_weighted: hess,
        saturation_residual: saturation_residual(&state.p, &state.rho, grid),
        complementarity_residual: complementarity_residual(state, solver),
        laplace_residual_weighted: laplace_residual_weighted(&state.p, &state.growth, alpha, grid),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PopulationField;
    use crate::grid::PhenotypeMesh;
    use crate::reaction::ReactionSpec;
    use crate::solver::SolverConfig;

    fn g(v: f64) -> PressureExponent {
        PressureExponent::new(v).unwrap()
    }

    fn line(cells: usize, lo: f64, hi: f64) -> SpatialGrid {
        SpatialGrid::new_1d(lo, hi, cells).unwrap()
    }

    fn solver(grid: SpatialGrid, layers: usize, reaction: ReactionSpec) -> Solver {
        let cfg = SolverConfig::new(g(2.0), 1.0);
        Solver::new(grid, PhenotypeMesh::new(layers).unwrap(), reaction, cfg).unwrap()
    }

    #[test]
    fn zero_state_has_zero_diagnostics() {
        let s = solver(line(16, -2.0, 2.0), 2, ReactionSpec::linear(1.0, 0.5, 1.0));
        let st = s.state(PopulationField::zeros(2, 16), 0.0, 0).unwrap();
        let rec = record(&st, &s);
        for v in rec.values() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn single_cell_norms() {
        // cells of width 1 on [-2.5, 2.5]: centers -2..2
        let s = solver(line(5, -2.5, 2.5), 1, ReactionSpec::linear(1.0, 0.0, 1.0));
        let mut n = PopulationField::zeros(1, 5);
        n.layer_mut(0)[4] = 1.0;
        let st = s.state(n, 0.0, 0).unwrap();
        let b = basic_norms(&st, &s.grid);
        assert_eq!(b.mass, 1.0);
        assert_eq!(b.second_moment, 4.0);
        assert_eq!(b.sigma_sup, 1.0);
    }

    #[test]
    fn entropy_two_cell_example() {
        // interior face between ρ = 0 and ρ = 1 with h = 1, γ = 1-like weight;
        // γ must exceed 1, so take the limit value through the closed form
        let grid = line(4, 0.0, 4.0);
        let rho = [0.0, 0.0, 1.0, 1.0];
        let gamma = g(1.0 + 1e-12);
        let e = entropy_dissipation_in(&rho, gamma, &grid, Some(&|x| x[0] == 2.0));
        assert!((e - 1.0).abs() < 1e-10, "{e}");
        assert!(entropy_dissipation(&[0.7; 4], g(3.0), &line(4, 0.0, 4.0)) > 0.0);
        let interior = |x: [f64; 2]| x[0] > 0.0 && x[0] < 4.0;
        assert_eq!(entropy_dissipation_in(&[0.7; 4], g(3.0), &grid, Some(&interior)), 0.0);
    }

    #[test]
    fn entropy_is_homogeneous() {
        let grid = line(50, -1.0, 1.0);
        let rho: Vec<f64> = grid.centers_x().iter().map(|x| (1.0 - x * x).max(0.0)).collect();
        let gamma = g(2.5);
        let base = entropy_dissipation(&rho, gamma, &grid);
        let scaled: Vec<f64> = rho.iter().map(|r| 3.0 * r).collect();
        let ratio = entropy_dissipation(&scaled, gamma, &grid) / base;
        assert!((ratio - 3f64.powf(3.5)).abs() < 1e-10 * ratio);
    }

    #[test]
    fn ab_weighted_degenerate_cases() {
        let grid = line(20, -1.0, 1.0);
        assert_eq!(ab_weighted_grad(&[0.0; 20], g(2.0), 1.0, &grid), 0.0);
        let interior = |x: [f64; 2]| x[0].abs() < 0.9;
        assert_eq!(ab_weighted_grad_in(&[0.4; 20], g(2.0), 1.0, &grid, Some(&interior)), 0.0);
    }

    #[test]
    fn ab_weight_tends_to_unweighted_by_p_for_large_gamma() {
        // for γ = 10³ the weight p^{1−1/γ} is nearly p; compare against the
        // face quadrature of (1/γ)|∇p|²/p̄ computed directly
        let grid = line(4000, -3.0, 3.0);
        let p: Vec<f64> = grid.centers_x().iter().map(|x| (-x * x).exp()).collect();
        let gamma = g(1e3);
        let weighted = ab_weighted_grad(&p, gamma, 1.0, &grid);
        let plain: f64 = face_samples(&p, &grid)
            .map(|s| s.grad_sq / s.mean.max(1e-12))
            .sum::<f64>()
            * grid.face_weight()
            / 1e3;
        assert!(((weighted - plain) / plain).abs() < 0.01);
    }

    #[test]
    fn kappa_values() {
        assert!((kappa(0.25, g(2.0)) - 1.0 / 48.0).abs() < 1e-15);
        assert_eq!(kappa(0.0, g(2.0)), 0.0);
        assert_eq!(kappa_at_upper_end(g(2.0)), 0.0);
        let grid = line(10, 0.0, 1.0);
        assert!(weighted_grad4(&[0.0; 10], 0.5, g(2.0), 1.0, &grid).is_err());
        assert!(weighted_grad4(&[0.0; 10], -0.1, g(2.0), 1.0, &grid).is_err());
        assert_eq!(weighted_grad4(&[0.0; 10], 0.0, g(2.0), 1.0, &grid).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn hessian_of_constant_and_quadratic() {
        let grid = line(40, -1.0, 1.0);
        let interior = |c: usize| !grid.is_boundary_cell(c);
        let (h, g4) = hessian_weighted(&[2.0; 40], &grid);
        // only the Dirichlet edges see curvature
        let edge_only: f64 = (0..40).filter(|&c| interior(c)).map(|c| hessian_sq(&[2.0; 40], &grid, c)).sum();
        assert_eq!(edge_only, 0.0);
        assert!(h > 0.0 && g4 > 0.0);
        let xs = grid.centers_x();
        let quad: Vec<f64> = xs.iter().map(|x| x * x + 1.0).collect();
        for c in (0..40).filter(|&c| interior(c)) {
            assert!((hessian_sq(&quad, &grid, c) - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn grad4_quadrature_of_parabola_cap() {
        // ∫|∇(1 − x²)₊|⁴ = ∫_{-1}^{1} 16 x⁴ dx = 32/5. The kink at ±1 sits on a
        // face for these grids, which costs O(h).
        let rel = |cells: usize| {
            let grid = line(cells, -2.0, 2.0);
            let p: Vec<f64> = grid.centers_x().iter().map(|x| (1.0 - x * x).max(0.0)).collect();
            (hessian_weighted(&p, &grid).1 - 6.4).abs() / 6.4
        };
        let (e400, e800) = (rel(400), rel(800));
        assert!(e400 < 0.025, "{e400}");
        assert!(e800 < 0.02, "{e800}");
        assert!(e800 < 0.6 * e400);
    }

    #[test]
    fn saturation_examples() {
        let grid = line(10, 0.0, 1.0);
        assert_eq!(saturation_residual(&[0.0; 10], &[0.5; 10], &grid), 0.0);
        assert_eq!(saturation_residual(&[0.3; 10], &[1.0; 10], &grid), 0.0);
        // ∫p = 1 with ρ = 0.9 on the support
        let r = saturation_residual(&[1.0; 10], &[0.9; 10], &grid);
        assert!((r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn complementarity_vanishes_on_constructed_steady_slab() {
        // p = 1 − x² on the interior has Δ_h p = −2 exactly; pick the source 2
        let grid = line(50, -1.0, 1.0);
        let p: Vec<f64> = grid.centers_x().iter().map(|x| 1.0 - x * x).collect();
        let source = vec![2.0; 50];
        assert!(complementarity_residual_with(&p, &source, &grid) < 1e-11);
        assert_eq!(complementarity_residual_with(&[0.0; 50], &source, &grid), 0.0);
    }

    #[test]
    fn free_boundary_of_tent() {
        let grid = line(200, -2.0, 2.0);
        let p = ScalarField(grid.centers_x().iter().map(|x| (1.0 - x.abs()).max(0.0)).collect());
        let FreeBoundary::Interfaces(fb) = free_boundary(&p, 1e-9, &grid) else {
            panic!("1D grid")
        };
        assert_eq!(fb.len(), 2);
        assert!((fb[0] + 1.0).abs() < grid.spacing(0));
        assert!((fb[1] - 1.0).abs() < grid.spacing(0));
        let FreeBoundary::Interfaces(empty) = free_boundary(&ScalarField::zeros(200), 1e-9, &grid) else {
            panic!()
        };
        assert!(empty.is_empty());
    }

    #[test]
    fn free_boundary_in_2d_is_indicator() {
        let grid = SpatialGrid::new_2d((-1.0, 1.0), (-1.0, 1.0), (8, 8)).unwrap();
        let p = ScalarField::from_fn(&grid, |x| (0.5 - x[0] * x[0] - x[1] * x[1]).max(0.0));
        match free_boundary(&p, 1e-6, &grid) {
            FreeBoundary::Indicator(ind) => assert_eq!(ind.iter().filter(|&&b| b).count(), 24),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn integral_diagnostics_converge_on_gaussian() {
        // p = e^{-x²} on [-6, 6]:
        //   ∫|p'|² = √(π/2),  ∫|p'|⁴ = (3/4)·√(π/4)·... computed by fine quadrature below
        let exact_l2 = (std::f64::consts::PI / 2.0).sqrt();
        let fine = |f: &dyn Fn(f64) -> f64| {
            let m = 200_000;
            let h = 12.0 / m as f64;
            (0..m).map(|k| f(-6.0 + (k as f64 + 0.5) * h)).sum::<f64>() * h
        };
        let dp = |x: f64| -2.0 * x * (-x * x).exp();
        let exact_l4 = fine(&|x| dp(x).powi(4));
        assert!((fine(&|x| dp(x).powi(2)) - exact_l2).abs() < 1e-10);
        let mut e2 = Vec::new();
        let mut e4 = Vec::new();
        let mut hs = Vec::new();
        for cells in [60, 120, 240, 480] {
            let grid = line(cells, -6.0, 6.0);
            let p: Vec<f64> = grid.centers_x().iter().map(|x| (-x * x).exp()).collect();
            e2.push((grad_p_l2(&p, &grid) - exact_l2).abs());
            e4.push((grad_p_l4(&p, &grid) - exact_l4).abs());
            hs.push(grid.spacing(0));
        }
        let o2 = crate::oracles::convergence_order(&e2, &hs).unwrap();
        let o4 = crate::oracles::convergence_order(&e4, &hs).unwrap();
        assert!(o2.order >= 1.0 && o4.order >= 1.0, "{o2:?} {o4:?}");
    }

    #[test]
    fn chain_rule_identity_on_smooth_profile() {
        // (4γ/(γ+1)²)|∇ρ^{(γ+1)/2}|² = (1/γ)|∇p|²/p^{1−1/γ} for ρ > 0
        let grid = line(800, -2.0, 2.0);
        let rho: Vec<f64> = grid.centers_x().iter().map(|x| 0.3 + 0.5 * (-x * x).exp()).collect();
        let gamma = g(2.0);
        let p: Vec<f64> = rho.iter().map(|r| r * r).collect();
        let inner = |x: [f64; 2]| x[0].abs() < 1.5;
        let a = entropy_dissipation_in(&rho, gamma, &grid, Some(&inner));
        let b = ab_weighted_grad_in(&p, gamma, 1.0, &grid, Some(&inner));
        assert!(((a - b) / a).abs() < 0.05);
    }

    #[test]
    fn header_matches_serialized_fields() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(DiagnosticsRecord::default()).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), DIAGNOSTICS_HEADER);
    }
}

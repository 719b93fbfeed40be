//! Initial data: analytic profiles, the Gaussian lift used by the viscous
//! regularization, and the well-preparedness check.

use std::path::PathBuf;

use crate::error::Result;
use crate::fields::{fraction_densities, total_density, PopulationField, PressureExponent, RHO_FLOOR_REL};
use crate::grid::{PhenotypeMesh, SpatialGrid};
use crate::oracles::BarenblattProfile;

/// Named analytic profiles. Every profile is uniform in the trait, so each
/// phenotype layer starts with the same spatial density.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Zero,
    /// Constant density over the whole domain.
    Uniform { amplitude: f64 },
    /// `amplitude` on the ball `|x − center| ≤ half_width`.
    Box { amplitude: f64, center: f64, half_width: f64 },
    /// Gaussian of standard width `width` truncated at `cutoff` from the center.
    Gaussian { amplitude: f64, center: f64, width: f64, cutoff: f64 },
    /// Self-similar porous-medium profile at the oracle's start time.
    Barenblatt(BarenblattProfile),
}

impl Profile {
    pub fn density_at(&self, x: [f64; 2], dim: usize) -> f64 {
        let dist_sq = |c: f64| {
            let mut d = (x[0] - c) * (x[0] - c);
            if dim == 2 {
                d += x[1] * x[1];
            }
            d
        };
        match *self {
            Profile::Zero => 0.0,
            Profile::Uniform { amplitude } => amplitude,
            Profile::Box {
                amplitude,
                center,
                half_width,
            } => {
                if dist_sq(center) <= half_width * half_width {
                    amplitude
                } else {
                    0.0
                }
            }
            Profile::Gaussian {
                amplitude,
                center,
                width,
                cutoff,
            } => {
                let d2 = dist_sq(center);
                if d2 <= cutoff * cutoff {
                    amplitude * (-d2 / (width * width)).exp()
                } else {
                    0.0
                }
            }
            Profile::Barenblatt(ref b) => {
                let r = x[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
                b.density(r, 0.0).unwrap_or(0.0)
            }
        }
    }

    /// Interval `[lo, hi]` along the first axis outside which the profile is
    /// zero; `None` when the profile fills the domain.
    pub fn support_x(&self) -> Option<(f64, f64)> {
        match *self {
            Profile::Zero => Some((0.0, 0.0)),
            Profile::Uniform { .. } => None,
            Profile::Box { center, half_width, .. } => Some((center - half_width, center + half_width)),
            Profile::Gaussian { center, cutoff, .. } => Some((center - cutoff, center + cutoff)),
            Profile::Barenblatt(ref b) => {
                let r = b.support_radius(0.0);
                Some((-r, r))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Analytic(Profile),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub n0: PopulationField,
    pub provenance: Provenance,
}

impl InitialData {
    pub fn from_profile(profile: Profile, mesh: &PhenotypeMesh, grid: &SpatialGrid) -> Self {
        let dim = grid.dim();
        let spatial: Vec<f64> = (0..grid.len())
            .map(|c| profile.density_at(grid.center(c), dim))
            .collect();
        InitialData {
            n0: PopulationField::uniform_in_trait(mesh.len(), &spatial),
            provenance: Provenance::Analytic(profile),
        }
    }
}

/// Adds `ε·exp(−|x|²)` to every layer; identity for `ε = 0`. The Gaussian is
/// only sampled on the grid, i.e. truncated at the ghost layer.
pub fn lift_initial_data(n0: &PopulationField, epsilon: f64, grid: &SpatialGrid) -> PopulationField {
    let mut out = n0.clone();
    if epsilon > 0.0 {
        let lift: Vec<f64> = (0..grid.len())
            .map(|c| epsilon * (-grid.radius_sq(c)).exp())
            .collect();
        for layer in out.layers_mut() {
            for (v, l) in layer.iter_mut().zip(&lift) {
                *v += l;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct WellPreparedReport {
    pub rho_max: f64,
    /// `p_M^{1/γ}`.
    pub rho_bound: f64,
    /// Density reaches the bound (within 1e-12 relative).
    pub at_bound: bool,
    /// Cells with `ρ₀ < 0`, `ρ₀ > ρ_M` or non-finite values, with their density.
    pub violations: Vec<(usize, f64)>,
    pub sigma_sup: f64,
    pub second_moment: f64,
}

impl WellPreparedReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.sigma_sup.is_finite() && self.second_moment.is_finite()
    }
}

/// Checks `0 ≤ ρ₀ ≤ p_M^{1/γ}` and reports `sup σ₀` and `∫ρ₀|x|²`.
pub fn check_well_prepared(
    n0: &PopulationField,
    mesh: &PhenotypeMesh,
    grid: &SpatialGrid,
    gamma: PressureExponent,
    p_max: f64,
) -> Result<WellPreparedReport> {
    n0.check_shape(mesh, grid.len())?;
    let rho = total_density(n0, mesh)?;
    let rho_bound = gamma.saturation_density(p_max);
    let mut violations = Vec::new();
    let mut rho_max: f64 = 0.0;
    let mut second_moment = 0.0;
    for (i, &r) in rho.iter().enumerate() {
        if !r.is_finite() || r < 0.0 || r > rho_bound * (1.0 + 1e-12) {
            violations.push((i, r));
        }
        rho_max = rho_max.max(r);
        second_moment += r * grid.radius_sq(i);
    }
    second_moment *= grid.cell_volume();
    let (n_min, finite) = n0.min_and_finite();
    if !finite || n_min < 0.0 {
        if let Some(i) = (0..grid.len())
            .find(|&i| n0.layers().iter().any(|l| !(l[i] >= 0.0)))
        {
            if !violations.iter().any(|(c, _)| *c == i) {
                violations.push((i, rho[i]));
            }
        }
    }
    let sigma = fraction_densities(n0, &rho, RHO_FLOOR_REL * rho_bound)?;
    Ok(WellPreparedReport {
        rho_max,
        rho_bound,
        at_bound: (rho_max - rho_bound).abs() <= 1e-12 * rho_bound,
        violations,
        sigma_sup: sigma.max(),
        second_moment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(cells: usize) -> (PhenotypeMesh, SpatialGrid) {
        (
            PhenotypeMesh::new(3).unwrap(),
            SpatialGrid::new_1d(-5.0, 5.0, cells).unwrap(),
        )
    }

    #[test]
    fn lift_zero_epsilon_is_identity() {
        let (mesh, grid) = setup(20);
        let n0 = InitialData::from_profile(
            Profile::Box { amplitude: 0.4, center: 0.0, half_width: 1.0 },
            &mesh,
            &grid,
        )
        .n0;
        assert_eq!(lift_initial_data(&n0, 0.0, &grid), n0);
    }

    #[test]
    fn lift_of_zero_is_gaussian() {
        let (mesh, grid) = setup(20);
        let out = lift_initial_data(&PopulationField::zeros(mesh.len(), grid.len()), 1.0, &grid);
        for j in 0..mesh.len() {
            for (i, x) in grid.centers_x().iter().enumerate() {
                assert_eq!(out.layer(j)[i], (-x * x).exp());
            }
        }
    }

    #[test]
    fn lift_mass_tends_to_sqrt_pi() {
        // oracle: ∫ e^{-x²} over [-8, 8] by composite Simpson on 20000 panels
        let m = 20_000;
        let (a, b) = (-8.0f64, 8.0f64);
        let hs = (b - a) / m as f64;
        let simpson: f64 = (0..=m)
            .map(|k| {
                let x = a + k as f64 * hs;
                let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * (-x * x).exp()
            })
            .sum::<f64>()
            * hs
            / 3.0;
        assert!((simpson - std::f64::consts::PI.sqrt()).abs() < 1e-12);

        let eps = 0.3;
        let mut prev = f64::INFINITY;
        for cells in [40, 80, 160, 320] {
            let grid = SpatialGrid::new_1d(-8.0, 8.0, cells).unwrap();
            let out = lift_initial_data(&PopulationField::zeros(1, cells), eps, &grid);
            let mass: f64 = out.layer(0).iter().sum::<f64>() * grid.spacing(0);
            let err = (mass - eps * simpson).abs();
            assert!(err <= prev + 1e-15);
            prev = err;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn saturated_data_passes_with_equality_flag() {
        let (mesh, grid) = setup(40);
        let gamma = PressureExponent::new(3.0).unwrap();
        let p_max = 8.0;
        let rho_m = gamma.saturation_density(p_max);
        let n0 = InitialData::from_profile(
            Profile::Box { amplitude: rho_m, center: 0.0, half_width: 1.0 },
            &mesh,
            &grid,
        )
        .n0;
        let rep = check_well_prepared(&n0, &mesh, &grid, gamma, p_max).unwrap();
        assert!(rep.passed());
        assert!(rep.at_bound);
        assert!((rep.sigma_sup - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oversaturated_cell_is_located() {
        let (mesh, grid) = setup(40);
        let gamma = PressureExponent::new(2.0).unwrap();
        let mut n0 = PopulationField::uniform_in_trait(mesh.len(), &vec![0.5; grid.len()]);
        for j in 0..mesh.len() {
            n0.layer_mut(j)[17] = 1.2;
        }
        let rep = check_well_prepared(&n0, &mesh, &grid, gamma, 1.0).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].0, 17);
    }

    #[test]
    fn second_moment_and_sigma_reported() {
        let mesh = PhenotypeMesh::new(2).unwrap();
        let grid = SpatialGrid::new_1d(-2.0, 2.0, 4).unwrap();
        // one occupied cell at x = 1.5 with trait skew (0.2, 0.6) → ρ = 0.4
        let mut n0 = PopulationField::zeros(2, 4);
        n0.layer_mut(0)[3] = 0.2;
        n0.layer_mut(1)[3] = 0.6;
        let rep = check_well_prepared(&n0, &mesh, &grid, PressureExponent::new(2.0).unwrap(), 1.0)
            .unwrap();
        assert!(rep.passed());
        assert!((rep.second_moment - 0.4 * 2.25).abs() < 1e-15);
        assert!((rep.sigma_sup - 1.5).abs() < 1e-15);
    }
}

//! Field containers and the algebraic maps between `n`, `ρ`, `p`, `v` and `σ`.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::grid::{PhenotypeMesh, SpatialGrid};

/// Relative floor (times `ρ_M`) below which a cell is treated as vacuum when
/// forming fraction densities.
pub const RHO_FLOOR_REL: f64 = 1e-14;

/// Exponent of the pressure law `p = ρ^γ`.
///
/// Constructed with [`PressureExponent::new`], which requires `γ > 1`. The
/// linear law `γ = 1` is only reachable through [`PressureExponent::linear`];
/// it is used for the space-homogeneous logistic reference.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct PressureExponent(f64);

impl PressureExponent {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::Parameter(format!(
                "pressure exponent must satisfy γ > 1, got {gamma}"
            )));
        }
        Ok(PressureExponent(gamma))
    }

    pub fn linear() -> Self {
        PressureExponent(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `ρ^γ`, with results below the smallest normal double flushed to zero.
    #[inline]
    pub fn pressure_of(self, rho: f64) -> f64 {
        let p = rho.powf(self.0);
        if p < f64::MIN_POSITIVE {
            0.0
        } else {
            p
        }
    }

    /// Saturation density `ρ_M = p_M^{1/γ}`.
    pub fn saturation_density(self, p_max: f64) -> f64 {
        p_max.powf(1.0 / self.0)
    }
}

/// A cell-centered scalar (`ρ`, `p`, `v`, `ℛ`, ...).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn zeros(len: usize) -> Self {
        ScalarField(vec![0.0; len])
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        ScalarField((0..grid.len()).map(|c| f(grid.center(c))).collect())
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(v: Vec<f64>) -> Self {
        ScalarField(v)
    }
}

/// Structured density `n[j][i]`: one layer per phenotype node.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationField {
    layers: Vec<Vec<f64>>,
}

impl PopulationField {
    pub fn zeros(layers: usize, cells: usize) -> Self {
        PopulationField {
            layers: vec![vec![0.0; cells]; layers],
        }
    }

    pub fn from_layers(layers: Vec<Vec<f64>>) -> Result<Self> {
        let cells = layers.first().map_or(0, Vec::len);
        if layers.is_empty() {
            return Err(Error::dims("at least one phenotype layer", "none"));
        }
        if let Some(bad) = layers.iter().find(|l| l.len() != cells) {
            return Err(Error::dims(format!("{cells} cells per layer"), bad.len()));
        }
        Ok(PopulationField { layers })
    }

    /// Same spatial profile in every layer.
    pub fn uniform_in_trait(layers: usize, profile: &[f64]) -> Self {
        PopulationField {
            layers: vec![profile.to_vec(); layers],
        }
    }

    pub fn from_fn(
        mesh: &PhenotypeMesh,
        grid: &SpatialGrid,
        f: impl Fn(f64, [f64; 2]) -> f64,
    ) -> Self {
        let layers = mesh
            .nodes()
            .iter()
            .map(|&y| (0..grid.len()).map(|c| f(y, grid.center(c))).collect())
            .collect();
        PopulationField { layers }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn cell_count(&self) -> usize {
        self.layers[0].len()
    }

    pub fn layer(&self, j: usize) -> &[f64] {
        &self.layers[j]
    }

    pub fn layer_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.layers[j]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.layers
    }

    pub fn scaled(&self, c: f64) -> Self {
        PopulationField {
            layers: self
                .layers
                .iter()
                .map(|l| l.iter().map(|v| c * v).collect())
                .collect(),
        }
    }

    pub fn check_shape(&self, mesh: &PhenotypeMesh, cells: usize) -> Result<()> {
        if self.layer_count() != mesh.len() {
            return Err(Error::dims(
                format!("{} phenotype layers", mesh.len()),
                self.layer_count(),
            ));
        }
        if self.cell_count() != cells {
            return Err(Error::dims(format!("{cells} cells"), self.cell_count()));
        }
        Ok(())
    }

    /// Minimum entry and whether every entry is finite.
    pub fn min_and_finite(&self) -> (f64, bool) {
        let mut min = f64::INFINITY;
        let mut finite = true;
        for v in self.layers.iter().flatten() {
            finite &= v.is_finite();
            min = min.min(*v);
        }
        (min, finite)
    }
}

/// Fraction densities `σ[j][i] = n[j][i]/ρ[i]`, zero in vacuum.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionField {
    layers: Vec<Vec<f64>>,
}

impl FractionField {
    pub fn layer(&self, j: usize) -> &[f64] {
        &self.layers[j]
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn cell_count(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }

    pub fn max(&self) -> f64 {
        self.layers.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Uniform composition `σ ≡ 1` over `cells` cells.
    pub fn uniform(layers: usize, cells: usize) -> Self {
        FractionField {
            layers: vec![vec![1.0; cells]; layers],
        }
    }

    pub fn from_layers(layers: Vec<Vec<f64>>) -> Self {
        FractionField { layers }
    }
}

/// `ρ[i] = Σ_j w_j n[j][i]`.
pub fn total_density(n: &PopulationField, mesh: &PhenotypeMesh) -> Result<ScalarField> {
    if n.layer_count() != mesh.len() {
        return Err(Error::dims(
            format!("{} phenotype layers", mesh.len()),
            n.layer_count(),
        ));
    }
    let cells = n.cell_count();
    Ok(ScalarField(
        (0..cells)
            .map(|i| mesh.integrate(|j| n.layers[j][i]))
            .collect(),
    ))
}

/// `p = ρ^γ`. Negative densities are a domain error.
pub fn pressure(rho: &ScalarField, gamma: PressureExponent) -> Result<ScalarField> {
    if let Some((i, r)) = rho.iter().enumerate().find(|(_, r)| !(**r >= 0.0)) {
        return Err(Error::Domain(format!("density {r} at cell {i} is negative or NaN")));
    }
    Ok(ScalarField(rho.iter().map(|&r| gamma.pressure_of(r)).collect()))
}

/// `v = ρ^{γ+1}`, formed as `ρ·p` so the identity holds exactly.
pub fn v_field(rho: &ScalarField, gamma: PressureExponent) -> Result<ScalarField> {
    let p = pressure(rho, gamma)?;
    Ok(ScalarField(rho.iter().zip(p.iter()).map(|(r, p)| r * p).collect()))
}

/// `σ = n/ρ` where `ρ > ρ_floor`, zero elsewhere.
pub fn fraction_densities(
    n: &PopulationField,
    rho: &ScalarField,
    rho_floor: f64,
) -> Result<FractionField> {
    if n.cell_count() != rho.len() {
        return Err(Error::dims(format!("{} cells", rho.len()), n.cell_count()));
    }
    let layers = n
        .layers
        .iter()
        .map(|layer| {
            layer
                .iter()
                .zip(rho.iter())
                .map(|(&nj, &r)| if r > rho_floor { nj / r } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(FractionField { layers })
}

//! Cell-centered spatial grids and the midpoint quadrature in the trait variable.
//!
//! The spatial grid is uniform per axis with one ghost cell on each side. Ghost
//! values are never stored: every stencil that reaches outside the grid reads a
//! zero, which is the homogeneous Dirichlet condition.

use crate::error::{Error, Result};

pub const MIN_CELLS_PER_AXIS: usize = 4;

/// A face between two neighbouring cells along one axis. `lower`/`upper` are
/// `None` when that side is a ghost cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Face {
    pub axis: usize,
    pub lower: Option<usize>,
    pub upper: Option<usize>,
    /// Face-center coordinates (second entry unused in 1D).
    pub center: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
    faces: Vec<Face>,
}

impl SpatialGrid {
    pub fn new_1d(x_min: f64, x_max: f64, cells: usize) -> Result<Self> {
        Self::build(1, [x_min, 0.0], [x_max, 1.0], [cells, 1])
    }

    pub fn new_2d(x: (f64, f64), y: (f64, f64), cells: (usize, usize)) -> Result<Self> {
        Self::build(2, [x.0, y.0], [x.1, y.1], [cells.0, cells.1])
    }

    fn build(dim: usize, lo: [f64; 2], hi: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        let mut spacing = [1.0; 2];
        for axis in 0..dim {
            if cells[axis] < MIN_CELLS_PER_AXIS {
                return Err(Error::Parameter(format!(
                    "axis {axis}: need at least {MIN_CELLS_PER_AXIS} cells, got {}",
                    cells[axis]
                )));
            }
            if !(lo[axis].is_finite() && hi[axis].is_finite() && hi[axis] > lo[axis]) {
                return Err(Error::Parameter(format!(
                    "axis {axis}: extent [{}, {}] is empty or not finite",
                    lo[axis], hi[axis]
                )));
            }
            spacing[axis] = (hi[axis] - lo[axis]) / cells[axis] as f64;
        }
        let mut grid = SpatialGrid {
            dim,
            lo,
            hi,
            cells,
            spacing,
            faces: Vec::new(),
        };
        grid.faces = grid.build_faces();
        Ok(grid)
    }

    fn build_faces(&self) -> Vec<Face> {
        let mut faces = Vec::new();
        for axis in 0..self.dim {
            let other = 1 - axis;
            let n_other = if self.dim == 2 { self.cells[other] } else { 1 };
            for k in 0..n_other {
                for f in 0..=self.cells[axis] {
                    let mut idx = [0usize; 2];
                    idx[other] = k;
                    let lower = (f > 0).then(|| {
                        idx[axis] = f - 1;
                        self.index(idx[0], idx[1])
                    });
                    let upper = (f < self.cells[axis]).then(|| {
                        idx[axis] = f;
                        self.index(idx[0], idx[1])
                    });
                    let mut center = [0.0; 2];
                    center[axis] = self.lo[axis] + f as f64 * self.spacing[axis];
                    if self.dim == 2 {
                        center[other] = self.lo[other] + (k as f64 + 0.5) * self.spacing[other];
                    }
                    faces.push(Face {
                        axis,
                        lower,
                        upper,
                        center,
                    });
                }
            }
        }
        faces
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of cells along `axis`.
    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn len(&self) -> usize {
        self.cells[0] * if self.dim == 2 { self.cells[1] } else { 1 }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    /// Smallest spacing over the active axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn extent(&self, axis: usize) -> (f64, f64) {
        (self.lo[axis], self.hi[axis])
    }

    /// Cell volume h^d.
    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.cells[0] * j
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.cells[0], cell / self.cells[0])
    }

    pub fn center(&self, cell: usize) -> [f64; 2] {
        let (i, j) = self.coords(cell);
        let mut c = [self.lo[0] + (i as f64 + 0.5) * self.spacing[0], 0.0];
        if self.dim == 2 {
            c[1] = self.lo[1] + (j as f64 + 0.5) * self.spacing[1];
        }
        c
    }

    /// x-coordinates of the cell centers along the first axis.
    pub fn centers_x(&self) -> Vec<f64> {
        (0..self.cells[0])
            .map(|i| self.lo[0] + (i as f64 + 0.5) * self.spacing[0])
            .collect()
    }

    /// Squared distance of the cell center from the origin.
    pub fn radius_sq(&self, cell: usize) -> f64 {
        let c = self.center(cell);
        c[..self.dim].iter().map(|x| x * x).sum()
    }

    /// Neighbour of `cell` shifted by `offset` along `axis`; `None` for ghosts.
    pub fn neighbor(&self, cell: usize, axis: usize, offset: isize) -> Option<usize> {
        let (i, j) = self.coords(cell);
        let mut idx = [i as isize, j as isize];
        idx[axis] += offset;
        if idx[axis] < 0 || idx[axis] >= self.cells[axis] as isize {
            return None;
        }
        Some(self.index(idx[0] as usize, idx[1] as usize))
    }

    /// True when the cell touches the ghost layer.
    pub fn is_boundary_cell(&self, cell: usize) -> bool {
        (0..self.dim).any(|a| self.neighbor(cell, a, -1).is_none() || self.neighbor(cell, a, 1).is_none())
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Quadrature weight of one face when integrating a face-sampled quantity:
    /// the faces of each axis tile the domain once, so each axis contributes
    /// `1/d` of the integral.
    pub fn face_weight(&self) -> f64 {
        self.cell_volume() / self.dim as f64
    }

    /// Value of a cell field at `cell`, zero in the ghost layer.
    #[inline]
    pub fn ghosted(values: &[f64], cell: Option<usize>) -> f64 {
        cell.map_or(0.0, |c| values[c])
    }
}

/// Midpoint nodes `y_j = (j + 1/2)/N_y` with equal weights `1/N_y`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhenotypeMesh {
    nodes: Vec<f64>,
    weight: f64,
}

impl PhenotypeMesh {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Parameter("phenotype mesh needs at least one node".into()));
        }
        let nodes = (0..count).map(|j| (j as f64 + 0.5) / count as f64).collect();
        Ok(PhenotypeMesh {
            nodes,
            weight: 1.0 / count as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Weighted sum `Σ_j w_j f(j)` in fixed left-to-right order. The equal
    /// weight is applied as a final division by `N_y`, so constants integrate
    /// exactly.
    pub fn integrate(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.len() {
            acc += f(j);
        }
        acc / self.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centers_are_offset_by_half_spacing() {
        let g = SpatialGrid::new_1d(-1.0, 1.0, 4).unwrap();
        assert_eq!(g.spacing(0), 0.5);
        assert_eq!(g.centers_x(), vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.faces().len(), 5);
        assert_eq!(g.faces()[0].lower, None);
        assert_eq!(g.faces()[4].upper, None);
        assert_eq!(g.faces()[2].center[0], 0.0);
    }

    #[test]
    fn too_few_cells_rejected() {
        assert!(SpatialGrid::new_1d(0.0, 1.0, 3).is_err());
        assert!(SpatialGrid::new_1d(1.0, 0.0, 10).is_err());
    }

    #[test]
    fn grid_2d_faces_and_neighbors() {
        let g = SpatialGrid::new_2d((0.0, 1.0), (0.0, 2.0), (4, 5)).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g.faces().len(), 5 * 5 + 4 * 6);
        let c = g.index(0, 3);
        assert_eq!(g.neighbor(c, 0, -1), None);
        assert_eq!(g.neighbor(c, 1, 1), Some(g.index(0, 4)));
        assert!(g.is_boundary_cell(c));
        assert!(!g.is_boundary_cell(g.index(1, 2)));
        assert!((g.cell_volume() - 0.25 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn phenotype_weights_sum_to_one() {
        for n in [1, 2, 3, 7, 49, 64, 1000] {
            let m = PhenotypeMesh::new(n).unwrap();
            assert_eq!(m.integrate(|_| 1.0), 1.0);
            assert!(m.nodes().iter().all(|&y| y > 0.0 && y < 1.0));
        }
        assert_eq!(PhenotypeMesh::new(2).unwrap().nodes(), &[0.25, 0.75]);
    }
}

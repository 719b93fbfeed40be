//! Growth-rate families `R(y, p)`, their validation against the inhibition
//! conditions, the mean growth rate `ℛ`, and the optional mutation kernel.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{FractionField, PopulationField, ScalarField};
use crate::grid::PhenotypeMesh;

/// Number of pressure samples used when checking monotonicity in `p`.
pub const P_SAMPLES: usize = 64;
/// Trait samples used for analytic families.
pub const Y_SAMPLES: usize = 65;

#[derive(Clone, Debug, PartialEq)]
pub enum ReactionSpec {
    /// `R(y, p) = (g0 + g1·y)(1 − p/p_M)`.
    LinearInhibition { g0: f64, g1: f64, p_max: f64 },
    Tabulated(TabulatedRate),
}

impl ReactionSpec {
    pub fn linear(g0: f64, g1: f64, p_max: f64) -> Self {
        ReactionSpec::LinearInhibition { g0, g1, p_max }
    }

    /// `R ≡ 0`. Fails validation (no proliferation at zero pressure) and is
    /// meant for runs that explicitly skip the reaction checks.
    pub fn zero(p_max: f64) -> Self {
        ReactionSpec::LinearInhibition {
            g0: 0.0,
            g1: 0.0,
            p_max,
        }
    }

    pub fn homeostatic_pressure(&self) -> f64 {
        match self {
            ReactionSpec::LinearInhibition { p_max, .. } => *p_max,
            ReactionSpec::Tabulated(t) => t.p_max,
        }
    }

    /// `R(y, p)`; `p < 0` is a domain error.
    pub fn rate(&self, y: f64, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::Domain(format!("pressure {p} is negative")));
        }
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!("trait {y} outside [0, 1]")));
        }
        Ok(self.eval(y, p))
    }

    /// Unchecked evaluation for the inner loops.
    #[inline]
    pub fn eval(&self, y: f64, p: f64) -> f64 {
        match self {
            ReactionSpec::LinearInhibition { g0, g1, p_max } => (g0 + g1 * y) * (1.0 - p / p_max),
            ReactionSpec::Tabulated(t) => t.eval(y, p),
        }
    }

    /// `‖R‖_∞ = sup_y R(y, 0)`.
    pub fn sup_rate(&self) -> f64 {
        match self {
            ReactionSpec::LinearInhibition { g0, g1, .. } => g0.max(g0 + g1).max(0.0),
            ReactionSpec::Tabulated(t) => t
                .y
                .iter()
                .map(|&y| t.eval(y, 0.0))
                .fold(0.0, f64::max),
        }
    }

    /// `sup |∂_p R|` over the trait interval and the sampled pressures.
    pub fn sup_pressure_slope(&self) -> f64 {
        match self {
            ReactionSpec::LinearInhibition { g0, g1, p_max } => g0.abs().max((g0 + g1).abs()) / p_max,
            ReactionSpec::Tabulated(t) => t
                .values
                .iter()
                .map(|row| max_slope(&t.p, row))
                .fold(0.0, f64::max),
        }
    }

    /// True when `R` does not depend on the trait.
    pub fn is_trait_independent(&self) -> bool {
        match self {
            ReactionSpec::LinearInhibition { g1, .. } => *g1 == 0.0,
            ReactionSpec::Tabulated(t) => t.values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn trait_lattice(&self) -> Vec<f64> {
        match self {
            ReactionSpec::LinearInhibition { .. } => (0..Y_SAMPLES)
                .map(|k| k as f64 / (Y_SAMPLES - 1) as f64)
                .collect(),
            ReactionSpec::Tabulated(t) => t.y.clone(),
        }
    }
}

/// Rate table sampled on trait nodes (rows) and pressures (columns), linearly
/// interpolated in both variables and clamped outside the sampled range.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedRate {
    y: Vec<f64>,
    p: Vec<f64>,
    values: Vec<Vec<f64>>,
    p_max: f64,
}

impl TabulatedRate {
    pub fn new(y: Vec<f64>, p: Vec<f64>, values: Vec<Vec<f64>>, p_max: f64) -> Result<Self> {
        if y.is_empty() || p.is_empty() {
            return Err(Error::Parameter("rate table needs at least one row and column".into()));
        }
        if values.len() != y.len() || values.iter().any(|r| r.len() != p.len()) {
            return Err(Error::dims(
                format!("{}x{} rate table", y.len(), p.len()),
                "ragged rows",
            ));
        }
        if !is_strictly_increasing(&y) || !is_strictly_increasing(&p) {
            return Err(Error::Parameter("table axes must be strictly increasing".into()));
        }
        if y[0] < 0.0 || y[y.len() - 1] > 1.0 || p[0] < 0.0 {
            return Err(Error::Parameter(
                "table traits must lie in [0, 1] and pressures be nonnegative".into(),
            ));
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::Parameter(format!("homeostatic pressure {p_max} must be positive")));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("rate table has non-finite entries".into()));
        }
        Ok(TabulatedRate { y, p, values, p_max })
    }

    /// Reads a CSV table: the header row holds the pressure samples after a
    /// leading label cell, and every following row is `y, R(y, p_1), ...`.
    pub fn from_csv(path: &Path, p_max: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::csv(path, e))?;
        let mut rows = reader.records();
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Config {
                path: path.to_path_buf(),
                message: format!("cannot parse {what} `{s}`"),
            })
        };
        let header = rows
            .next()
            .ok_or_else(|| Error::Config {
                path: path.to_path_buf(),
                message: "empty rate table".into(),
            })?
            .map_err(|e| Error::csv(path, e))?;
        let p = header
            .iter()
            .skip(1)
            .map(|s| parse(s, "pressure sample"))
            .collect::<Result<Vec<_>>>()?;
        let mut y = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            let row = row.map_err(|e| Error::csv(path, e))?;
            let mut cells = row.iter();
            let Some(first) = cells.next() else { continue };
            y.push(parse(first, "trait node")?);
            values.push(cells.map(|s| parse(s, "rate")).collect::<Result<Vec<_>>>()?);
        }
        TabulatedRate::new(y, p, values, p_max)
    }

    fn eval(&self, y: f64, p: f64) -> f64 {
        let (r0, r1, ty) = bracket(&self.y, y);
        let (c0, c1, tp) = bracket(&self.p, p);
        let row = |r: usize| self.values[r][c0] * (1.0 - tp) + self.values[r][c1] * tp;
        row(r0) * (1.0 - ty) + row(r1) * ty
    }
}

fn is_strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

/// Interpolation bracket `(lo, hi, t)` of `x` in a sorted axis, clamped.
fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let last = axis.len() - 1;
    if x <= axis[0] || last == 0 {
        return (0, 0, 0.0);
    }
    if x >= axis[last] {
        return (last, last, 0.0);
    }
    let hi = axis.partition_point(|&a| a <= x);
    let lo = hi - 1;
    (lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo]))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    /// `R(y, 0) ≤ 0`.
    NoGrowthAtZeroPressure,
    /// `R(y, p_M) > 0`.
    GrowthAtHomeostaticPressure,
    /// `R(y, ·)` increases between two consecutive pressure samples.
    IncreasingInPressure,
    NotFinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub y: f64,
    pub p: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReactionReport {
    pub violations: Vec<Violation>,
    pub sup_rate: f64,
}

impl ReactionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("{:?} at y = {}, p = {} (R = {})", v.kind, v.y, v.p, v.value))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Samples the inhibition conditions `∂_p R ≤ 0`, `R(·,0) > 0`, `R(·,p_M) ≤ 0`
/// on a trait lattice and [`P_SAMPLES`] pressures in `[0, p_M]`.
pub fn validate_reaction(spec: &ReactionSpec) -> ReactionReport {
    let p_max = spec.homeostatic_pressure();
    let mut violations = Vec::new();
    if !(p_max > 0.0 && p_max.is_finite()) {
        violations.push(Violation {
            kind: ViolationKind::NotFinite,
            y: f64::NAN,
            p: p_max,
            value: f64::NAN,
        });
        return ReactionReport {
            violations,
            sup_rate: f64::NAN,
        };
    }
    let ps: Vec<f64> = (0..P_SAMPLES)
        .map(|k| p_max * k as f64 / (P_SAMPLES - 1) as f64)
        .collect();
    for y in spec.trait_lattice() {
        let rates: Vec<f64> = ps.iter().map(|&p| spec.eval(y, p)).collect();
        if let Some((k, &r)) = rates.iter().enumerate().find(|(_, r)| !r.is_finite()) {
            violations.push(Violation {
                kind: ViolationKind::NotFinite,
                y,
                p: ps[k],
                value: r,
            });
            continue;
        }
        if rates[0] <= 0.0 {
            violations.push(Violation {
                kind: ViolationKind::NoGrowthAtZeroPressure,
                y,
                p: 0.0,
                value: rates[0],
            });
        }
        let at_max = rates[P_SAMPLES - 1];
        if at_max > 0.0 {
            violations.push(Violation {
                kind: ViolationKind::GrowthAtHomeostaticPressure,
                y,
                p: p_max,
                value: at_max,
            });
        }
        for k in 1..P_SAMPLES {
            if rates[k] > rates[k - 1] {
                violations.push(Violation {
                    kind: ViolationKind::IncreasingInPressure,
                    y,
                    p: ps[k],
                    value: rates[k] - rates[k - 1],
                });
                break;
            }
        }
    }
    ReactionReport {
        violations,
        sup_rate: spec.sup_rate(),
    }
}

/// `ℛ[i] = Σ_j w_j σ[j][i] R(y_j, p[i])`.
pub fn mean_reaction(
    sigma: &FractionField,
    p: &ScalarField,
    mesh: &PhenotypeMesh,
    spec: &ReactionSpec,
) -> Result<ScalarField> {
    if sigma.layer_count() != mesh.len() {
        return Err(Error::dims(
            format!("{} phenotype layers", mesh.len()),
            sigma.layer_count(),
        ));
    }
    if sigma.cell_count() != p.len() {
        return Err(Error::dims(format!("{} cells", p.len()), sigma.cell_count()));
    }
    Ok(ScalarField(
        (0..p.len())
            .map(|i| mesh.integrate(|j| sigma.layer(j)[i] * spec.eval(mesh.node(j), p[i])))
            .collect(),
    ))
}

/// Trait-to-trait kernel `R(η, y, p)` tabulated on the phenotype nodes and a
/// set of pressure samples, linear in `p` between samples.
#[derive(Clone, Debug, PartialEq)]
pub struct MutationKernel {
    nodes: usize,
    p: Vec<f64>,
    // values[(k * nodes + j) * p.len() + s] = R(η_k, y_j, p_s)
    values: Vec<f64>,
}

impl MutationKernel {
    pub fn from_fn(
        mesh: &PhenotypeMesh,
        p_samples: Vec<f64>,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<Self> {
        if p_samples.is_empty() || !is_strictly_increasing(&p_samples) {
            return Err(Error::Parameter(
                "mutation kernel needs strictly increasing pressure samples".into(),
            ));
        }
        let nodes = mesh.len();
        let mut values = Vec::with_capacity(nodes * nodes * p_samples.len());
        for k in 0..nodes {
            for j in 0..nodes {
                for &p in &p_samples {
                    values.push(f(mesh.node(k), mesh.node(j), p));
                }
            }
        }
        Ok(MutationKernel {
            nodes,
            p: p_samples,
            values,
        })
    }

    /// Kernel `R(η, y, p) = R(y, p)/w` for `η = y` and zero otherwise, which
    /// reproduces the diagonal reaction `n_j R(y_j, p)`.
    pub fn diagonal(mesh: &PhenotypeMesh, spec: &ReactionSpec, p_samples: Vec<f64>) -> Result<Self> {
        let nodes = mesh.nodes().to_vec();
        let w = mesh.weight();
        Self::from_fn(mesh, p_samples, |eta, y, p| {
            if eta == y && nodes.contains(&y) {
                spec.eval(y, p) / w
            } else {
                0.0
            }
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn eval(&self, from: usize, to: usize, p: f64) -> f64 {
        let base = (from * self.nodes + to) * self.p.len();
        let (lo, hi, t) = bracket(&self.p, p);
        self.values[base + lo] * (1.0 - t) + self.values[base + hi] * t
    }

    /// Bound on the reaction operator: `max_j Σ_k w_k max_p |R(η_k, y_j, p)|`.
    pub fn sup_norm(&self) -> f64 {
        let s = self.p.len();
        (0..self.nodes)
            .map(|j| {
                let sum: f64 = (0..self.nodes)
                    .map(|k| {
                        let base = (k * self.nodes + j) * s;
                        self.values[base..base + s]
                            .iter()
                            .fold(0.0f64, |m, v| m.max(v.abs()))
                    })
                    .sum();
                sum / self.nodes as f64
            })
            .fold(0.0, f64::max)
    }

    /// `max_j Σ_k w_k max_p |∂_p R(η_k, y_j, p)|`.
    pub fn sup_pressure_slope(&self) -> f64 {
        let s = self.p.len();
        (0..self.nodes)
            .map(|j| {
                let sum: f64 = (0..self.nodes)
                    .map(|k| {
                        let base = (k * self.nodes + j) * s;
                        max_slope(&self.p, &self.values[base..base + s])
                    })
                    .sum();
                sum / self.nodes as f64
            })
            .fold(0.0, f64::max)
    }

    /// Lists `(η index, y index, p)` where the kernel is non-finite or
    /// increases in `p`.
    pub fn validate(&self) -> Vec<(usize, usize, f64)> {
        let s = self.p.len();
        let mut bad = Vec::new();
        for k in 0..self.nodes {
            for j in 0..self.nodes {
                let base = (k * self.nodes + j) * s;
                let col = &self.values[base..base + s];
                if let Some(idx) = (0..s).find(|&i| !col[i].is_finite() || (i > 0 && col[i] > col[i - 1])) {
                    bad.push((k, j, self.p[idx]));
                }
            }
        }
        bad
    }
}

fn max_slope(p: &[f64], values: &[f64]) -> f64 {
    p.windows(2)
        .zip(values.windows(2))
        .map(|(p, v)| ((v[1] - v[0]) / (p[1] - p[0])).abs())
        .fold(0.0, f64::max)
}

/// `out[j][i] = Σ_k w_k n[k][i] R(η_k, y_j, p[i])`.
pub fn mutation_reaction(
    n: &PopulationField,
    p: &ScalarField,
    kernel: Option<&MutationKernel>,
) -> Result<PopulationField> {
    let kernel = kernel.ok_or_else(|| Error::Mode("mutation mode requires a kernel".into()))?;
    if n.layer_count() != kernel.nodes() {
        return Err(Error::dims(
            format!("{} phenotype layers", kernel.nodes()),
            n.layer_count(),
        ));
    }
    if n.cell_count() != p.len() {
        return Err(Error::dims(format!("{} cells", p.len()), n.cell_count()));
    }
    let nodes = kernel.nodes();
    let layers = (0..nodes)
        .map(|j| {
            (0..p.len())
                .map(|i| {
                    let mut acc = 0.0;
                    for k in 0..nodes {
                        acc += n.layer(k)[i] * kernel.eval(k, j, p[i]);
                    }
                    acc / nodes as f64
                })
                .collect()
        })
        .collect();
    PopulationField::from_layers(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_inhibition_values() {
        let r = ReactionSpec::linear(1.0, 0.0, 1.0);
        assert_eq!(r.rate(0.3, 1.0).unwrap(), 0.0);
        assert_eq!(r.rate(0.3, 0.0).unwrap(), 1.0);
        assert_eq!(r.rate(0.7, 0.5).unwrap(), 0.5);
        assert!(matches!(r.rate(0.5, -1e-3), Err(Error::Domain(_))));
        assert_eq!(ReactionSpec::linear(1.0, 0.5, 1.0).sup_rate(), 1.5);
        assert_eq!(ReactionSpec::linear(1.0, -0.5, 1.0).sup_rate(), 1.0);
    }

    #[test]
    fn validation_passes_for_affine_family() {
        let rep = validate_reaction(&ReactionSpec::linear(1.0, 0.5, 1.0));
        assert!(rep.passed(), "{}", rep.summary());
        assert_eq!(rep.sup_rate, 1.5);
    }

    #[test]
    fn validation_flags_zero_growth_at_y0() {
        let rep = validate_reaction(&ReactionSpec::linear(0.0, 1.0, 1.0));
        assert!(!rep.passed());
        let v = &rep.violations[0];
        assert_eq!(v.kind, ViolationKind::NoGrowthAtZeroPressure);
        assert_eq!(v.y, 0.0);
        assert!(!validate_reaction(&ReactionSpec::zero(1.0)).passed());
    }

    #[test]
    fn validation_locates_increasing_column() {
        let p = vec![0.0, 0.5, 1.0];
        let y = vec![0.0, 0.5, 1.0];
        let values = vec![
            vec![1.0, 0.5, 0.0],
            vec![1.0, 1.2, -0.1],
            vec![2.0, 1.0, -1.0],
        ];
        let t = TabulatedRate::new(y, p, values, 1.0).unwrap();
        let rep = validate_reaction(&ReactionSpec::Tabulated(t));
        assert_eq!(rep.violations.len(), 1);
        let v = &rep.violations[0];
        assert_eq!(v.kind, ViolationKind::IncreasingInPressure);
        assert_eq!(v.y, 0.5);
        assert!(v.p > 0.0 && v.p <= 0.5);
        assert_eq!(rep.sup_rate, 2.0);
    }

    #[test]
    fn tabulated_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rate.csv");
        std::fs::write(&path, "y\\p,0,1\n0.0,1.0,0.0\n1.0,2.0,-1.0\n").unwrap();
        let t = TabulatedRate::from_csv(&path, 1.0).unwrap();
        let spec = ReactionSpec::Tabulated(t);
        assert!((spec.eval(0.5, 0.5) - 0.5).abs() < 1e-15);
        assert!(validate_reaction(&spec).passed());

        std::fs::write(&path, "y,0,1\n0.0,1.0,abc\n").unwrap();
        assert!(TabulatedRate::from_csv(&path, 1.0).is_err());
    }

    #[test]
    fn mean_reaction_examples() {
        let mesh = PhenotypeMesh::new(2).unwrap();
        let spec = ReactionSpec::linear(1.0, 1.0, 1.0);
        let sigma = FractionField::from_layers(vec![vec![0.5, 0.0], vec![1.5, 0.0]]);
        let p = ScalarField(vec![0.0, 0.0]);
        let r = mean_reaction(&sigma, &p, &mesh, &spec).unwrap();
        // brute force: Σ_j w_j σ_j (1 + y_j)(1 − p)
        let brute: f64 = [(0.5, 0.25), (1.5, 0.75)]
            .iter()
            .map(|(s, y)| 0.5 * s * (1.0 + y))
            .sum();
        assert!((brute - 1.625).abs() < 1e-15);
        assert!((r[0] - 1.625).abs() < 1e-15);
        assert_eq!(r[1], 0.0);

        let flat = ReactionSpec::linear(2.0, 0.0, 1.0);
        let m4 = PhenotypeMesh::new(4).unwrap();
        let p = ScalarField(vec![0.2, 0.9]);
        let r = mean_reaction(&FractionField::uniform(4, 2), &p, &m4, &flat).unwrap();
        assert!((r[0] - flat.eval(0.0, 0.2)).abs() < 1e-15);
        assert!((r[1] - flat.eval(0.0, 0.9)).abs() < 1e-15);
    }

    #[test]
    fn mutation_mode_requires_kernel() {
        let n = PopulationField::zeros(2, 4);
        assert!(matches!(
            mutation_reaction(&n, &ScalarField::zeros(4), None),
            Err(Error::Mode(_))
        ));
    }

    #[test]
    fn constant_kernel_integrates_density() {
        let mesh = PhenotypeMesh::new(3).unwrap();
        let k = MutationKernel::from_fn(&mesh, vec![0.0, 1.0], |_, _, _| 0.7).unwrap();
        let n = PopulationField::from_layers(vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]])
            .unwrap();
        let out = mutation_reaction(&n, &ScalarField(vec![0.3, 0.0]), Some(&k)).unwrap();
        for j in 0..3 {
            assert!((out.layer(j)[0] - 0.7 * 2.0).abs() < 1e-14);
            assert_eq!(out.layer(j)[1], 0.0);
        }
        let zero = mutation_reaction(&PopulationField::zeros(3, 2), &ScalarField(vec![0.3, 0.1]), Some(&k))
            .unwrap();
        assert!(zero.layers().iter().flatten().all(|&v| v == 0.0));
        assert!(k.validate().is_empty());
        assert!((k.sup_norm() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn kernel_validation_flags_increase() {
        let mesh = PhenotypeMesh::new(2).unwrap();
        let k = MutationKernel::from_fn(&mesh, vec![0.0, 0.5, 1.0], |eta, y, p| {
            if eta < y { p } else { 1.0 - p }
        })
        .unwrap();
        assert_eq!(k.validate(), vec![(0, 1, 0.5)]);
    }

    fn arb_state(nodes: usize, cells: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (
            proptest::collection::vec(proptest::collection::vec(0.0f64..4.0, cells), nodes),
            proptest::collection::vec(0.0f64..1.5, cells),
        )
    }

    proptest! {
        #[test]
        fn diagonal_kernel_matches_local_reaction((layers, p) in arb_state(4, 8)) {
            // brute force: n_j R(y_j, p_i) evaluated directly
            let mesh = PhenotypeMesh::new(4).unwrap();
            let spec = ReactionSpec::linear(1.0, 0.5, 1.0);
            let ps: Vec<f64> = (0..=30).map(|k| 1.5 * k as f64 / 30.0).collect();
            let kernel = MutationKernel::diagonal(&mesh, &spec, ps).unwrap();
            let n = PopulationField::from_layers(layers).unwrap();
            let p = ScalarField(p);
            let out = mutation_reaction(&n, &p, Some(&kernel)).unwrap();
            for j in 0..4 {
                for i in 0..8 {
                    let direct = n.layer(j)[i] * spec.eval(mesh.node(j), p[i]);
                    prop_assert!((out.layer(j)[i] - direct).abs() < 1e-12 * (1.0 + direct.abs()));
                }
            }
        }

        #[test]
        fn mutation_reaction_is_linear((a, p) in arb_state(3, 5), (b, _) in arb_state(3, 5), c in -3.0f64..3.0) {
            let mesh = PhenotypeMesh::new(3).unwrap();
            let kernel = MutationKernel::from_fn(&mesh, vec![0.0, 1.0, 2.0], |eta, y, p| (1.0 + eta - y) * (1.0 - p)).unwrap();
            let p = ScalarField(p);
            let na = PopulationField::from_layers(a).unwrap();
            let nb = PopulationField::from_layers(b).unwrap();
            let combo = PopulationField::from_layers(
                na.layers().iter().zip(nb.layers()).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + c * v).collect()).collect()
            ).unwrap();
            let ra = mutation_reaction(&na, &p, Some(&kernel)).unwrap();
            let rb = mutation_reaction(&nb, &p, Some(&kernel)).unwrap();
            let rc = mutation_reaction(&combo, &p, Some(&kernel)).unwrap();
            for j in 0..3 {
                for i in 0..5 {
                    let want = ra.layer(j)[i] + c * rb.layer(j)[i];
                    prop_assert!((rc.layer(j)[i] - want).abs() < 1e-12 * (1.0 + want.abs()));
                }
            }
        }

        #[test]
        fn linear_sign_structure(y in 0.0f64..=1.0, p in 0.0f64..3.0, g0 in 0.1f64..3.0, g1 in -0.09f64..3.0) {
            let spec = ReactionSpec::linear(g0, g1, 1.0);
            let r = spec.rate(y, p).unwrap();
            if p < 1.0 { prop_assert!(r > 0.0) } else if p > 1.0 { prop_assert!(r < 0.0) } else { prop_assert_eq!(r, 0.0) }
        }

        #[test]
        fn mean_reaction_is_monotone_and_bounded(
            (layers, p1) in arb_state(4, 6),
            bump in proptest::collection::vec(0.0f64..1.0, 6),
        ) {
            let mesh = PhenotypeMesh::new(4).unwrap();
            let spec = ReactionSpec::linear(1.0, 0.5, 1.0);
            let n = PopulationField::from_layers(layers).unwrap();
            let rho = crate::fields::total_density(&n, &mesh).unwrap();
            let sigma = crate::fields::fraction_densities(&n, &rho, 1e-14).unwrap();
            let p1 = ScalarField(p1.iter().map(|v| v.min(1.0)).collect());
            let p2 = ScalarField(p1.iter().zip(&bump).map(|(a, b)| (a + b).min(1.0)).collect());
            let r1 = mean_reaction(&sigma, &p1, &mesh, &spec).unwrap();
            let r2 = mean_reaction(&sigma, &p2, &mesh, &spec).unwrap();
            for i in 0..6 {
                prop_assert!(r1[i] >= r2[i] - 1e-15);
                if rho[i] > 1e-14 {
                    prop_assert!(r1[i].abs() <= spec.sup_rate() * (1.0 + 1e-12));
                }
            }
        }
    }
}

//! Independent reference solutions: the self-similar porous-medium profile,
//! a fixed-step RK4 integrator for space-homogeneous dynamics, and observed
//! convergence orders.

use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};
use crate::fields::PressureExponent;
use crate::grid::PhenotypeMesh;
use crate::reaction::ReactionSpec;

/// Default time offset that moves the self-similar solution off its initial
/// singularity.
pub const DEFAULT_T0: f64 = 0.1;
/// RK4 step of the ODE reference.
pub const ODE_DT: f64 = 1e-5;

/// Self-similar solution of `∂_t ρ = c Δ ρ^m` with `m = γ + 1`, `c = γ/(γ+1)`:
///
/// `U(x, t) = τ^{−α} (C − k |x|² τ^{−2β})_+^{1/(m−1)}`, `τ = c (t + t₀)`,
///
/// `α = d/(d(m−1)+2)`, `β = α/d`, `k = α(m−1)/(2md)` and `C` fixed by the mass.
#[derive(Clone, Debug, PartialEq)]
pub struct BarenblattProfile {
    gamma: f64,
    dim: usize,
    mass: f64,
    t0: f64,
    alpha: f64,
    beta: f64,
    k: f64,
    c_level: f64,
    coeff: f64,
}

impl BarenblattProfile {
    pub fn new(gamma: PressureExponent, dim: usize, mass: f64, t0: f64) -> Result<Self> {
        let g = gamma.value();
        if g <= 1.0 {
            return Err(Error::Parameter("Barenblatt profile needs γ > 1".into()));
        }
        if !(dim == 1 || dim == 2) {
            return Err(Error::Parameter(format!("dimension {dim} not supported")));
        }
        if !(mass > 0.0 && t0 > 0.0 && mass.is_finite() && t0.is_finite()) {
            return Err(Error::Parameter("mass and time offset must be positive".into()));
        }
        let d = dim as f64;
        let m = g + 1.0;
        let alpha = d / (d * (m - 1.0) + 2.0);
        let beta = alpha / d;
        let k = alpha * (m - 1.0) / (2.0 * m * d);
        let q = 1.0 / (m - 1.0);
        let omega = std::f64::consts::PI.powf(d / 2.0) * gamma_fn(q + 1.0) / gamma_fn(q + 1.0 + d / 2.0);
        let c_level = (mass * k.powf(d / 2.0) / omega).powf(1.0 / (q + d / 2.0));
        Ok(BarenblattProfile {
            gamma: g,
            dim,
            mass,
            t0,
            alpha,
            beta,
            k,
            c_level,
            coeff: g / (g + 1.0),
        })
    }

    /// Replaces the shape constant `k`, keeping `C` consistent with the mass.
    /// Only useful to check that the self-test rejects a wrong profile.
    pub fn with_shape_constant(mut self, k: f64) -> Self {
        let d = self.dim as f64;
        let q = 1.0 / self.gamma;
        let omega = std::f64::consts::PI.powf(d / 2.0) * gamma_fn(q + 1.0) / gamma_fn(q + 1.0 + d / 2.0);
        self.k = k;
        self.c_level = (self.mass * k.powf(d / 2.0) / omega).powf(1.0 / (q + d / 2.0));
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn shape_constant(&self) -> f64 {
        self.k
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn tau(&self, t: f64) -> f64 {
        self.coeff * (t + self.t0)
    }

    /// Density at distance `r` from the origin, `t` measured from the run start.
    pub fn density(&self, r: f64, t: f64) -> Result<f64> {
        if !(t + self.t0 > 0.0) {
            return Err(Error::Domain(format!("time {t} precedes the profile origin")));
        }
        let tau = self.tau(t);
        let inner = self.c_level - self.k * r * r * tau.powf(-2.0 * self.beta);
        Ok(if inner > 0.0 {
            tau.powf(-self.alpha) * inner.powf(1.0 / self.gamma)
        } else {
            0.0
        })
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c_level / self.k).sqrt() * self.tau(t).powf(self.beta)
    }

    /// Mass by quadrature in the radial variable after the substitution
    /// `s = R sin θ`, which removes the edge singularity.
    pub fn quadrature_mass(&self, t: f64, panels: usize) -> f64 {
        let radius = self.support_radius(t);
        let panels = panels + panels % 2;
        let h = std::f64::consts::FRAC_PI_2 / panels as f64;
        let surface = if self.dim == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
        let integrand = |theta: f64| {
            let s = radius * theta.sin();
            let jac = radius * theta.cos();
            s.powi(self.dim as i32 - 1) * self.density(s, t).unwrap_or(0.0) * jac
        };
        let mut acc = integrand(0.0) + integrand(std::f64::consts::FRAC_PI_2);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(i as f64 * h);
        }
        surface * acc * h / 3.0
    }

    /// Pointwise residual `∂_t U − c Δ U^m` at `x` (along the first axis),
    /// with centered differences of step `h` in space and time.
    fn residual_at(&self, x: f64, t: f64, h: f64) -> f64 {
        let m = self.gamma + 1.0;
        let u = |x: f64, y: f64, t: f64| {
            let r = (x * x + y * y).sqrt();
            self.density(r, t).unwrap_or(0.0)
        };
        let um = |x: f64, y: f64| u(x, y, t).powf(m);
        let dt = (u(x, 0.0, t + h) - u(x, 0.0, t - h)) / (2.0 * h);
        let mut lap = (um(x + h, 0.0) - 2.0 * um(x, 0.0) + um(x - h, 0.0)) / (h * h);
        if self.dim == 2 {
            lap += (um(x, h) - 2.0 * um(x, 0.0) + um(x, -h)) / (h * h);
        }
        dt - self.coeff * lap
    }

    /// Checks the profile before it is used as a reference: quadrature mass
    /// against the prescribed mass, and the PDE residual on the interior of
    /// the support decaying at least linearly under refinement.
    pub fn self_test(&self) -> BarenblattSelfTest {
        let times = [0.0, 0.5];
        let mass_rel_err = times
            .iter()
            .map(|&t| (self.quadrature_mass(t, 200_000) - self.mass).abs() / self.mass)
            .fold(0.0, f64::max);

        let t = 0.25;
        let radius = self.support_radius(t);
        let samples: Vec<f64> = (0..15).map(|k| -0.7 * radius + 1.4 * radius * k as f64 / 14.0).collect();
        let spacings: Vec<f64> = [20.0, 40.0, 80.0, 160.0].iter().map(|n| radius / n).collect();
        let residuals: Vec<f64> = spacings
            .iter()
            .map(|&h| {
                samples
                    .iter()
                    .map(|&x| self.residual_at(x, t, h).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let order = convergence_order(&residuals, &spacings)
            .map(|c| c.order)
            .unwrap_or(f64::INFINITY);
        BarenblattSelfTest {
            mass_rel_err,
            residuals,
            residual_order: order,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarenblattSelfTest {
    pub mass_rel_err: f64,
    pub residuals: Vec<f64>,
    pub residual_order: f64,
}

impl BarenblattSelfTest {
    pub const MASS_TOL: f64 = 1e-8;
    pub const MIN_RESIDUAL_ORDER: f64 = 1.0;

    pub fn passed(&self) -> bool {
        self.mass_rel_err < Self::MASS_TOL && self.residual_order >= Self::MIN_RESIDUAL_ORDER
    }
}

/// Solution of the space-homogeneous system `dn_j/dt = n_j R(y_j, ρ^γ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeReference {
    pub values: Vec<f64>,
    pub dt: f64,
}

impl OdeReference {
    pub fn density(&self, mesh: &PhenotypeMesh) -> f64 {
        mesh.integrate(|j| self.values[j])
    }
}

/// Fixed-step RK4 with step at most `dt`, calling `observe(t, n)` after every
/// step (and once at `t = 0`).
pub fn ode_reference_with(
    n0: &[f64],
    mesh: &PhenotypeMesh,
    spec: &ReactionSpec,
    gamma: PressureExponent,
    t_end: f64,
    dt: f64,
    mut observe: impl FnMut(f64, &[f64]),
) -> OdeReference {
    let steps = ((t_end / dt).ceil() as usize).max(1);
    let dt = t_end / steps as f64;
    let rhs = |n: &[f64], out: &mut [f64]| {
        let rho = mesh.integrate(|j| n[j]);
        let p = gamma.pressure_of(rho.max(0.0));
        for j in 0..n.len() {
            out[j] = n[j] * spec.eval(mesh.node(j), p);
        }
    };
    let len = n0.len();
    let mut n = n0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    observe(0.0, &n);
    if t_end <= 0.0 {
        return OdeReference { values: n, dt: 0.0 };
    }
    for step in 0..steps {
        rhs(&n, &mut k1);
        for j in 0..len {
            tmp[j] = n[j] + 0.5 * dt * k1[j];
        }
        rhs(&tmp, &mut k2);
        for j in 0..len {
            tmp[j] = n[j] + 0.5 * dt * k2[j];
        }
        rhs(&tmp, &mut k3);
        for j in 0..len {
            tmp[j] = n[j] + dt * k3[j];
        }
        rhs(&tmp, &mut k4);
        for j in 0..len {
            n[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        observe((step + 1) as f64 * dt, &n);
    }
    OdeReference { values: n, dt }
}

/// RK4 reference at the default step [`ODE_DT`].
pub fn ode_reference(
    n0: &[f64],
    mesh: &PhenotypeMesh,
    spec: &ReactionSpec,
    gamma: PressureExponent,
    t_end: f64,
) -> OdeReference {
    ode_reference_with(n0, mesh, spec, gamma, t_end, ODE_DT, |_, _| {})
}

/// Largest relative change between the reference at `ODE_DT` and at half
/// that step.
pub fn ode_self_consistency(
    n0: &[f64],
    mesh: &PhenotypeMesh,
    spec: &ReactionSpec,
    gamma: PressureExponent,
    t_end: f64,
) -> f64 {
    let a = ode_reference(n0, mesh, spec, gamma, t_end);
    let b = ode_reference_with(n0, mesh, spec, gamma, t_end, ODE_DT / 2.0, |_, _| {});
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceOrder {
    pub order: f64,
    /// False when the errors do not decrease along the refinement.
    pub monotone: bool,
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn convergence_order(errors: &[f64], spacings: &[f64]) -> Result<ConvergenceOrder> {
    if errors.len() != spacings.len() {
        return Err(Error::dims(format!("{} errors", spacings.len()), errors.len()));
    }
    if errors.len() < 3 {
        return Err(Error::Parameter("need at least three grids".into()));
    }
    if !spacings.windows(2).all(|w| w[1] < w[0]) || spacings.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::Parameter("spacings must be positive and strictly decreasing".into()));
    }
    if errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Parameter("errors must be positive and finite".into()));
    }
    let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(ConvergenceOrder {
        order: sxy / sxx,
        monotone: errors.windows(2).all(|w| w[1] <= w[0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(v: f64) -> PressureExponent {
        PressureExponent::new(v).unwrap()
    }

    #[test]
    fn constants_for_gamma_two_in_1d() {
        let b = BarenblattProfile::new(g(2.0), 1, 1.0, 0.1).unwrap();
        assert!((b.alpha() - 0.25).abs() < 1e-15);
        assert!((b.beta() - 0.25).abs() < 1e-15);
        assert!((b.shape_constant() - 1.0 / 12.0).abs() < 1e-15);
        // with m = 3 the mass integral is π√3·C
        let c = 1.0 / (std::f64::consts::PI * 3f64.sqrt());
        assert!((b.c_level - c).abs() < 1e-14);
    }

    #[test]
    fn self_test_passes_for_several_profiles() {
        for (gamma, dim, mass) in [(2.0, 1, 1.0), (5.0, 1, 0.3), (1.5, 2, 2.0), (40.0, 1, 1.0)] {
            let b = BarenblattProfile::new(g(gamma), dim, mass, 0.1).unwrap();
            let rep = b.self_test();
            assert!(rep.passed(), "γ={gamma} d={dim}: {rep:?}");
        }
    }

    #[test]
    fn corrupted_shape_constant_fails_self_test() {
        let b = BarenblattProfile::new(g(2.0), 1, 1.0, 0.1).unwrap();
        let bad = b.clone().with_shape_constant(b.shape_constant() * 1.1);
        let rep = bad.self_test();
        assert!(rep.mass_rel_err < BarenblattSelfTest::MASS_TOL);
        assert!(!rep.passed(), "{rep:?}");
    }

    #[test]
    fn mass_is_time_invariant() {
        let b = BarenblattProfile::new(g(2.0), 1, 1.0, 0.1).unwrap();
        let m1 = b.quadrature_mass(0.0, 100_000);
        let m2 = b.quadrature_mass(3.0, 100_000);
        assert!((m1 - m2).abs() < 1e-9);
    }

    #[test]
    fn support_radius_scales_like_tau_beta() {
        let b = BarenblattProfile::new(g(2.0), 1, 1.0, 0.1).unwrap();
        // τ(t) = c(t + t0); 4τ at t' = 4(t + t0) − t0
        let t = 0.2;
        let t4 = 4.0 * (t + 0.1) - 0.1;
        let ratio = b.support_radius(t4) / b.support_radius(t);
        assert!((ratio - 4f64.powf(0.25)).abs() < 1e-12);
        // numerically: last positive sample on a fine line
        let edge = |t: f64| {
            let n = 200_000;
            let r_max = 5.0;
            (0..n)
                .map(|i| r_max * i as f64 / n as f64)
                .filter(|&r| b.density(r, t).unwrap() > 0.0)
                .fold(0.0, f64::max)
        };
        assert!((edge(t4) / edge(t) - 4f64.powf(0.25)).abs() < 1e-3);
    }

    #[test]
    fn density_rejects_time_before_origin() {
        let b = BarenblattProfile::new(g(2.0), 1, 1.0, 0.1).unwrap();
        assert!(b.density(0.0, -0.2).is_err());
    }

    #[test]
    fn logistic_reference() {
        let mesh = PhenotypeMesh::new(1).unwrap();
        let spec = ReactionSpec::linear(1.0, 0.0, 1.0);
        let t = 3f64.ln();
        let r = ode_reference(&[0.5], &mesh, &spec, PressureExponent::linear(), t);
        // n(t) = e^t/(1 + e^t)
        assert!((r.values[0] - 0.75).abs() < 1e-12);
        assert!(ode_self_consistency(&[0.5], &mesh, &spec, PressureExponent::linear(), t) < 1e-10);
    }

    #[test]
    fn zero_rate_and_equilibrium_are_stationary() {
        let mesh = PhenotypeMesh::new(3).unwrap();
        let n0 = [0.2, 0.5, 0.9];
        let r = ode_reference(&n0, &mesh, &ReactionSpec::zero(1.0), g(2.0), 1.0);
        assert_eq!(r.values, n0.to_vec());
        // ρ = 1 ⇒ p = p_M = 1 ⇒ R = 0 in every layer
        let n0 = [1.0, 1.0, 1.0];
        let r = ode_reference(&n0, &mesh, &ReactionSpec::linear(1.0, 0.5, 1.0), g(3.0), 1.0);
        assert_eq!(r.values, n0.to_vec());
    }

    #[test]
    fn fittest_fraction_is_nondecreasing() {
        let mesh = PhenotypeMesh::new(4).unwrap();
        let spec = ReactionSpec::linear(1.0, 0.5, 1.0);
        let mut last = 0.0;
        let mut ok = true;
        ode_reference_with(&[0.1, 0.1, 0.1, 0.1], &mesh, &spec, g(2.0), 3.0, 1e-3, |_, n| {
            let rho = mesh.integrate(|j| n[j]);
            let frac = n[3] / rho;
            ok &= frac >= last - 1e-14;
            last = frac;
        });
        assert!(ok);
        assert!(last > 1.0);
    }

    #[test]
    fn convergence_order_examples() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e1: Vec<f64> = h.iter().map(|h| 3.0 * h).collect();
        let e2: Vec<f64> = h.iter().map(|h| 0.5 * h * h).collect();
        assert!((convergence_order(&e1, &h).unwrap().order - 1.0).abs() < 1e-12);
        assert!((convergence_order(&e2, &h).unwrap().order - 2.0).abs() < 1e-12);
        let c = convergence_order(&[0.2; 4], &h).unwrap();
        assert!(c.order.abs() < 1e-12);
        assert!(c.monotone);
        let bumpy = convergence_order(&[0.1, 0.2, 0.05, 0.01], &h).unwrap();
        assert!(!bumpy.monotone);
        assert!(convergence_order(&[0.1, 0.2], &[0.1, 0.05]).is_err());
        assert!(convergence_order(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.05]).is_err());
    }
}

//! FitzHugh-Nagumo drift, its quasi-dissipativity constant, and the monotone
//! resolvent / Yosida machinery used by the regularized time stepping.
//!
//! The cubic `f_j(u) = u(u-1)(a_j - u)` has derivative bounded above by
//! `eta* = max_j (a_j^2 - a_j + 1)/3`, so `phi_j(u) = eta* u - f_j(u)` is
//! nondecreasing and `u -> u + lambda phi_j(u)` is strictly increasing for
//! every `lambda > 0`.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, StateVector};

/// How the reaction term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftMode {
    /// No reaction term (the linear equation).
    Zero,
    /// The cubic FitzHugh-Nagumo drift.
    Fhn,
    /// FHN clipped outside `[-radius, radius]` with linear continuation;
    /// globally Lipschitz.
    LipschitzClipped { radius: f64 },
    /// Sign-flipped FHN, an anti-dissipative negative control for the
    /// verification suite. Not reachable from configs.
    FhnFlipped,
}

/// Per-edge reaction parameters.
#[derive(Debug, Clone)]
pub struct FhnParams {
    a: Vec<f64>,
    mode: DriftMode,
}

impl FhnParams {
    pub fn new(a: Vec<f64>, mode: DriftMode) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Parameter("at least one edge parameter a_j required".into()));
        }
        for (j, &aj) in a.iter().enumerate() {
            if !(0.0 < aj && aj < 1.0) {
                return Err(Error::Parameter(format!(
                    "the cubic's middle root must satisfy 0 < a_j < 1; edge {} has a = {aj}",
                    j + 1
                )));
            }
        }
        if let DriftMode::LipschitzClipped { radius } = mode {
            if radius <= 0.0 {
                return Err(Error::Parameter(format!(
                    "clipping radius must be positive, got {radius}"
                )));
            }
        }
        Ok(Self { a, mode })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn mode(&self) -> DriftMode {
        self.mode
    }

    pub fn with_mode(&self, mode: DriftMode) -> Self {
        Self {
            a: self.a.clone(),
            mode,
        }
    }

    fn cubic(a: f64, u: f64) -> f64 {
        u * (u - 1.0) * (a - u)
    }

    fn cubic_derivative(a: f64, u: f64) -> f64 {
        -3.0 * u * u + 2.0 * (1.0 + a) * u - a
    }

    /// Evaluates the drift on edge `j` (0-based) at value `u`.
    pub fn eval(&self, j: usize, u: f64) -> f64 {
        let a = self.a[j];
        match self.mode {
            DriftMode::Zero => 0.0,
            DriftMode::Fhn => Self::cubic(a, u),
            DriftMode::FhnFlipped => -Self::cubic(a, u),
            DriftMode::LipschitzClipped { radius } => {
                if u > radius {
                    Self::cubic(a, radius) + Self::cubic_derivative(a, radius) * (u - radius)
                } else if u < -radius {
                    Self::cubic(a, -radius) + Self::cubic_derivative(a, -radius) * (u + radius)
                } else {
                    Self::cubic(a, u)
                }
            }
        }
    }

    /// The smallest shift making every `f_j(u) - eta* u` nonincreasing:
    /// `eta* = max_j sup_u f_j'(u) = max_j (a_j^2 - a_j + 1)/3`.
    pub fn eta_star(&self) -> f64 {
        self.a
            .iter()
            .map(|&a| (a * a - a + 1.0) / 3.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The monotone shift `phi_j(u) = eta* u - f_j(u)` together with scalar
/// resolvent and Yosida evaluations.
#[derive(Debug, Clone)]
pub struct MonotoneShift {
    params: FhnParams,
    eta_star: f64,
}

impl MonotoneShift {
    /// Builds the shift and verifies the closed-form `eta*` against a grid
    /// maximization of `f'` at startup.
    pub fn new(params: &FhnParams) -> Result<Self> {
        let eta_star = params.eta_star();
        let mut grid_max = f64::NEG_INFINITY;
        for j in 0..params.a.len() {
            for k in 0..=2000 {
                let u = -10.0 + 20.0 * k as f64 / 2000.0;
                grid_max = grid_max.max(FhnParams::cubic_derivative(params.a[j], u));
            }
        }
        if (grid_max - eta_star).abs() > 1e-4 || grid_max > eta_star + 1e-10 {
            return Err(Error::Parameter(format!(
                "closed-form shift {eta_star} disagrees with grid maximum {grid_max}"
            )));
        }
        Ok(Self {
            params: params.clone(),
            eta_star,
        })
    }

    pub fn eta_star(&self) -> f64 {
        self.eta_star
    }

    pub fn params(&self) -> &FhnParams {
        &self.params
    }

    /// The monotone map `phi_j(u) = eta* u - f_j(u)`.
    pub fn phi(&self, j: usize, u: f64) -> f64 {
        self.eta_star * u - self.params.eval(j, u)
    }

    fn phi_derivative(&self, j: usize, u: f64) -> f64 {
        let a = self.params.a[j];
        let fp = match self.params.mode {
            DriftMode::Zero => 0.0,
            DriftMode::Fhn => FhnParams::cubic_derivative(a, u),
            DriftMode::FhnFlipped => -FhnParams::cubic_derivative(a, u),
            DriftMode::LipschitzClipped { radius } => {
                FhnParams::cubic_derivative(a, u.clamp(-radius, radius))
            }
        };
        self.eta_star - fp
    }

    /// The resolvent `(1 + lambda phi_j)^{-1} v`: the unique root `u` of
    /// `u + lambda phi_j(u) = v`, solved by safeguarded Newton with a
    /// geometrically grown bisection bracket.
    pub fn resolvent(&self, lambda: f64, j: usize, v: f64) -> Result<f64> {
        if lambda <= 0.0 {
            return Err(Error::Parameter(format!(
                "resolvent parameter must be positive, got {lambda}"
            )));
        }
        let g = |u: f64| u + lambda * self.phi(j, u) - v;
        let tol = 1e-13 * (1.0 + v.abs());

        // Bracket the root; g is increasing and surjective.
        let mut width = 1.0 + v.abs();
        let (mut lo, mut hi) = (v - width, v + width);
        while g(lo) > 0.0 {
            width *= 2.0;
            lo = v - width;
        }
        while g(hi) < 0.0 {
            width *= 2.0;
            hi = v + width;
        }

        let mut u = v;
        if u < lo || u > hi {
            u = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let gu = g(u);
            if gu.abs() <= tol {
                return Ok(u);
            }
            if gu > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let slope = 1.0 + lambda * self.phi_derivative(j, u);
            let newton = u - gu / slope;
            u = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(u)
    }

    /// The Yosida approximation `phi_lambda(v) = phi((1 + lambda phi)^{-1} v)`.
    pub fn yosida(&self, lambda: f64, j: usize, v: f64) -> Result<f64> {
        let u = self.resolvent(lambda, j, v)?;
        Ok(self.phi(j, u))
    }

    /// Resolvent of the Yosida approximation itself:
    /// `(1 + delta phi_lambda)^{-1} v = (lambda v + delta J_{lambda+delta} v)
    ///  / (lambda + delta)`.
    pub fn resolvent_of_yosida(&self, delta: f64, lambda: f64, j: usize, v: f64) -> Result<f64> {
        if delta <= 0.0 || lambda <= 0.0 {
            return Err(Error::Parameter(
                "resolvent parameters must be positive".into(),
            ));
        }
        let inner = self.resolvent(lambda + delta, j, v)?;
        Ok((lambda * v + delta * inner) / (lambda + delta))
    }
}

/// Evaluates the reaction drift in the state space: edge interior entries get
/// `f_j(u)` (`lambda = 0`) or its Yosida-regularized counterpart
/// `eta* u - phi_lambda(u)` (`lambda > 0`); vertex entries are zero, matching
/// the block structure of the nonlinearity.
pub fn drift_apply(
    shift: &MonotoneShift,
    mesh: &Mesh,
    state: &StateVector,
    lambda: f64,
) -> Result<StateVector> {
    mesh.check_state(state)?;
    if lambda < 0.0 {
        return Err(Error::Parameter(format!(
            "regularization parameter must be >= 0, got {lambda}"
        )));
    }
    let mut out = mesh.zero_state();
    for dof in mesh.n_vertices()..mesh.n_dofs() {
        let j = mesh.interior_dof_edge(dof);
        let u = state[dof];
        out[dof] = if lambda == 0.0 {
            shift.params().eval(j, u)
        } else {
            shift.eta_star() * u - shift.yosida(lambda, j, u)?
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NetworkGraph;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fhn(a: Vec<f64>) -> FhnParams {
        FhnParams::new(a, DriftMode::Fhn).unwrap()
    }

    #[test]
    fn cubic_roots_and_values() {
        let p = fhn(vec![0.25]);
        for u in [0.0, 1.0, 0.25] {
            assert_eq!(p.eval(0, u), 0.0);
        }
        // 0.5 * (0.5 - 1) * (0.25 - 0.5) = 0.0625
        assert_relative_eq!(p.eval(0, 0.5), 0.0625, epsilon = 1e-15);
        // Leading term -u^3 dominates: f(-10) > 0.
        let p = fhn(vec![0.5]);
        assert!(p.eval(0, -10.0) > 0.0);
    }

    #[test]
    fn eta_star_closed_form() {
        assert_relative_eq!(fhn(vec![0.5]).eta_star(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(fhn(vec![0.2]).eta_star(), 0.28, epsilon = 1e-15);
        assert_relative_eq!(fhn(vec![0.5, 0.2]).eta_star(), 0.28, epsilon = 1e-15);
        // Matches the equivalent form (a^3 + 1)/(3(a + 1)).
        for a in [0.1, 0.3, 0.5, 0.9] {
            let lhs = fhn(vec![a]).eta_star();
            let rhs = (a.powi(3) + 1.0) / (3.0 * (a + 1.0));
            assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
        }
    }

    #[test]
    fn grid_maximization_agrees() {
        // MonotoneShift::new runs the defensive grid check internally.
        for a in [0.1, 0.25, 0.5, 0.75] {
            MonotoneShift::new(&fhn(vec![a])).unwrap();
        }
    }

    #[test]
    fn invalid_a_rejected() {
        assert!(FhnParams::new(vec![1.2], DriftMode::Fhn).is_err());
        assert!(FhnParams::new(vec![0.0], DriftMode::Fhn).is_err());
        assert!(FhnParams::new(vec![], DriftMode::Fhn).is_err());
    }

    #[test]
    fn phi_nondecreasing_on_grid() {
        let shift = MonotoneShift::new(&fhn(vec![0.3])).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=400 {
            let u = -5.0 + 10.0 * k as f64 / 400.0;
            let val = shift.phi(0, u);
            assert!(val >= prev - 1e-12);
            prev = val;
        }
    }

    #[test]
    fn resolvent_fixed_point_and_identity_limit() {
        let shift = MonotoneShift::new(&fhn(vec![0.5])).unwrap();
        assert_relative_eq!(shift.resolvent(1.0, 0, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        for v in [-1.0, 0.3, 2.0] {
            let r = shift.resolvent(1e-8, 0, v).unwrap();
            assert!((r - v).abs() <= 1e-6);
        }
    }

    #[test]
    fn resolvent_matches_bisection_oracle() {
        // a = 0.5, eta* = 0.25, lambda = 1, v = 1.
        let shift = MonotoneShift::new(&fhn(vec![0.5])).unwrap();
        let lambda = 1.0;
        let v = 1.0;
        let g = |u: f64| u + lambda * (0.25 * u - u * (u - 1.0) * (0.5 - u)) - v;
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let u = shift.resolvent(lambda, 0, v).unwrap();
        assert_relative_eq!(u, oracle, epsilon = 1e-10);
        let resid = u + lambda * shift.phi(0, u) - v;
        assert!(resid.abs() <= 1e-12 * (1.0 + v.abs()));
    }

    #[test]
    fn yosida_identity_and_pointwise_limit() {
        let shift = MonotoneShift::new(&fhn(vec![0.5])).unwrap();
        assert_relative_eq!(shift.yosida(1.0, 0, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        for lambda in [0.5, 0.1, 0.01] {
            for v in [-2.0, -0.3, 0.7, 1.5] {
                let y = shift.yosida(lambda, 0, v).unwrap();
                let r = shift.resolvent(lambda, 0, v).unwrap();
                assert_relative_eq!(y, (v - r) / lambda, epsilon = 1e-10, max_relative = 1e-10);
            }
        }
        // Monotone on a grid.
        let mut prev = f64::NEG_INFINITY;
        for k in 0..100 {
            let v = -3.0 + 6.0 * k as f64 / 99.0;
            let y = shift.yosida(0.2, 0, v).unwrap();
            assert!(y >= prev - 1e-12);
            prev = y;
        }
        // lambda -> 0 pointwise convergence to phi.
        let y = shift.yosida(1e-4, 0, 0.7).unwrap();
        assert!((y - shift.phi(0, 0.7)).abs() < 1e-3);
    }

    #[test]
    fn resolvent_of_yosida_identity() {
        let shift = MonotoneShift::new(&fhn(vec![0.35])).unwrap();
        let (delta, lambda) = (0.01, 0.1);
        for v in [-1.5, 0.0, 0.4, 2.3] {
            let w = shift.resolvent_of_yosida(delta, lambda, 0, v).unwrap();
            // Nested oracle: w must satisfy w + delta*phi_lambda(w) = v.
            let resid = w + delta * shift.yosida(lambda, 0, w).unwrap() - v;
            assert!(resid.abs() < 1e-10, "residual {resid} at v = {v}");
        }
    }

    #[test]
    fn one_sided_lipschitz_on_grid() {
        let shift = MonotoneShift::new(&fhn(vec![0.4])).unwrap();
        let eta = shift.eta_star();
        let f = |u: f64| shift.params().eval(0, u);
        for p in 0..200 {
            for q in 0..200 {
                let u = -5.0 + 10.0 * p as f64 / 199.0;
                let w = -5.0 + 10.0 * q as f64 / 199.0;
                let lhs = (f(u) - f(w)) * (u - w);
                assert!(lhs <= eta * (u - w) * (u - w) + 1e-12);
            }
        }
    }

    #[test]
    fn clipped_mode_is_globally_lipschitz() {
        let p = FhnParams::new(vec![0.5], DriftMode::LipschitzClipped { radius: 3.0 }).unwrap();
        // Slope between distant points bounded by the slope at the clip radius.
        let max_slope = (3.0f64 * 3.0 * 3.0 + 2.0 * 1.5 * 3.0 + 0.5).abs();
        for (u, v) in [(-100.0, 100.0), (-10.0, 4.0), (3.5, 50.0)] {
            let slope = ((p.eval(0, u) - p.eval(0, v)) / (u - v)).abs();
            assert!(slope <= max_slope + 1.0);
        }
        // Inside the radius it coincides with the cubic.
        let cubic = FhnParams::new(vec![0.5], DriftMode::Fhn).unwrap();
        for u in [-2.9, -1.0, 0.0, 0.7, 2.9] {
            assert_eq!(p.eval(0, u), cubic.eval(0, u));
        }
    }

    #[test]
    fn drift_apply_edge_entries_vertex_zero() {
        let g = NetworkGraph::build(2, &[(1, 2)]).unwrap();
        let mesh = crate::mesh::Mesh::build(&g, 4).unwrap();
        let shift = MonotoneShift::new(&fhn(vec![0.5])).unwrap();

        let zero = mesh.zero_state();
        assert!(drift_apply(&shift, &mesh, &zero, 0.0).unwrap().amax() == 0.0);

        let mut state = mesh.zero_state();
        for d in 0..mesh.n_dofs() {
            state[d] = 0.1 * d as f64 - 0.2;
        }
        let out = drift_apply(&shift, &mesh, &state, 0.0).unwrap();
        for i in 0..mesh.n_vertices() {
            assert_eq!(out[i], 0.0, "vertex block of the drift is zero");
        }
        for dof in mesh.n_vertices()..mesh.n_dofs() {
            assert_eq!(out[dof], shift.params().eval(0, state[dof]));
        }

        // Regularized drift converges to the exact one as lambda -> 0,
        // with monotone max-deviation.
        let mut prev = f64::INFINITY;
        for lambda in [1e-1, 1e-2, 1e-3] {
            let reg = drift_apply(&shift, &mesh, &state, lambda).unwrap();
            let dev = (&reg - &out).amax();
            assert!(dev <= prev + 1e-14);
            prev = dev;
        }
        assert!(prev < 1e-2);
    }

    proptest! {
        #[test]
        fn resolvent_is_contraction(v1 in -5.0f64..5.0, v2 in -5.0f64..5.0,
                                    lambda in 1e-3f64..2.0, a in 0.05f64..0.95) {
            let shift = MonotoneShift::new(&fhn(vec![a])).unwrap();
            let r1 = shift.resolvent(lambda, 0, v1).unwrap();
            let r2 = shift.resolvent(lambda, 0, v2).unwrap();
            prop_assert!((r1 - r2).abs() <= (v1 - v2).abs() + 1e-9);
        }

        #[test]
        fn polynomial_growth(u in -50.0f64..50.0, a in 0.05f64..0.95) {
            let p = fhn(vec![a]);
            // |f(u)| <= c (1 + |u|^3) with c from the coefficient bounds.
            let c = 1.0 + (1.0 + a) + a;
            prop_assert!(p.eval(0, u).abs() <= c * (1.0 + u.abs().powi(3)));
        }
    }
}

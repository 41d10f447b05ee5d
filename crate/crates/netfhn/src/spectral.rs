//! Spectral decomposition of the discrete generator and exact-in-time
//! semigroup evaluation.
//!
//! The M-symmetric pencil `(-K, M)` is reduced to a standard symmetric
//! problem through the Cholesky factor of `M`; the resulting basis is
//! M-orthonormal and the semigroup acts as `V exp(Lambda t) V^T M`.

use nalgebra::{DMatrix, DVector};

use crate::assembly::DiscreteGenerator;
use crate::error::{Error, Result};
use crate::mesh::StateVector;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Generator eigenvalues, sorted descending; all `<= 0` up to round-off.
    eigenvalues: DVector<f64>,
    /// M-orthonormal eigenvectors, one column per eigenvalue.
    eigenvectors: DMatrix<f64>,
    /// Precomputed `V^T M` for fast coefficient extraction.
    vt_m: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// Full real spectral decomposition of the generator `-M^{-1}K`.
    pub fn decompose(gen: &DiscreteGenerator) -> Result<Self> {
        let l = gen.mass_cholesky().l();
        // S = L^{-1} K L^{-T}, symmetric with the pencil's eigenvalues.
        let a = l
            .solve_lower_triangular(&gen.stiffness)
            .ok_or_else(|| Error::Linalg("singular Cholesky factor".into()))?;
        let s = l
            .solve_lower_triangular(&a.transpose())
            .ok_or_else(|| Error::Linalg("singular Cholesky factor".into()))?;
        let s = 0.5 * (&s + s.transpose());
        let eig = s.symmetric_eigen();

        // Pencil eigenvalue theta >= 0 maps to generator eigenvalue -theta;
        // sort generator eigenvalues descending.
        let dim = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&p, &q| eig.eigenvalues[p].partial_cmp(&eig.eigenvalues[q]).unwrap());

        let mut eigenvalues = DVector::zeros(dim);
        let mut w = DMatrix::zeros(dim, dim);
        for (col, &src) in order.iter().enumerate() {
            eigenvalues[col] = -eig.eigenvalues[src];
            w.set_column(col, &eig.eigenvectors.column(src));
        }
        // Back-transform: V = L^{-T} W.
        let eigenvectors = l
            .transpose()
            .solve_upper_triangular(&w)
            .ok_or_else(|| Error::Linalg("singular Cholesky factor".into()))?;
        let vt_m = eigenvectors.transpose() * &gen.mass;
        Ok(Self {
            eigenvalues,
            eigenvectors,
            vt_m,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The largest generator eigenvalue; the discrete growth bound
    /// (`|T(t)|_M = e^{lambda_1 t}`).
    pub fn spectral_bound(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Modal coefficients of a state: `V^T M x`.
    pub fn coefficients(&self, x: &StateVector) -> DVector<f64> {
        &self.vt_m * x
    }

    /// Applies the semigroup: `T(t) x = V exp(Lambda t) V^T M x`.
    pub fn semigroup_apply(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        if t < 0.0 {
            return Err(Error::Parameter(format!("semigroup time must be >= 0, got {t}")));
        }
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "state has {} entries, decomposition has {}",
                x.len(),
                self.dim()
            )));
        }
        let mut coeff = self.coefficients(x);
        for (c, &lam) in coeff.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= (lam * t).exp();
        }
        Ok(&self.eigenvectors * coeff)
    }

    /// Exact integral of the semigroup against a constant forcing:
    /// `int_0^t T(s) c ds = V diag((e^{lambda t} - 1)/lambda) V^T M c`,
    /// with the `lambda -> 0` limit handled as `t`.
    pub fn convolve_constant(&self, t: f64, c: &StateVector) -> Result<StateVector> {
        if t < 0.0 {
            return Err(Error::Parameter(format!("time must be >= 0, got {t}")));
        }
        let mut coeff = self.coefficients(c);
        for (v, &lam) in coeff.iter_mut().zip(self.eigenvalues.iter()) {
            let factor = if lam.abs() * t < 1e-12 {
                t
            } else {
                (lam * t).exp_m1() / lam
            };
            *v *= factor;
        }
        Ok(&self.eigenvectors * coeff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{EdgeCoefficients, VertexParams};
    use crate::graph::NetworkGraph;
    use crate::mesh::Mesh;
    use approx::assert_relative_eq;
    use rand::prelude::*;

    fn path_gen(n_cells: usize, b: (f64, f64)) -> DiscreteGenerator {
        let g = NetworkGraph::build(2, &[(1, 2)]).unwrap();
        let mesh = Mesh::build(&g, n_cells).unwrap();
        let vp = VertexParams {
            b: vec![b.0, b.1],
            sigma: vec![1.0, 1.0],
        };
        DiscreteGenerator::assemble(&mesh, &EdgeCoefficients::uniform(1), &vp).unwrap()
    }

    #[test]
    fn kernel_mode_when_no_leak() {
        let gen = path_gen(8, (0.0, 0.0));
        let dec = SpectralDecomposition::decompose(&gen).unwrap();
        assert!(dec.spectral_bound().abs() < 1e-10);
        // Eigenvector of the zero eigenvalue is the constant state.
        let v0 = dec.eigenvectors().column(0).into_owned();
        let spread = v0.max() - v0.min();
        assert!(spread < 1e-8, "kernel eigenvector should be constant, spread {spread}");
        assert_eq!(dec.dim(), gen.mesh.n_dofs());
    }

    #[test]
    fn strictly_negative_with_leak() {
        let gen = path_gen(8, (1.0, 1.0));
        let dec = SpectralDecomposition::decompose(&gen).unwrap();
        assert!(dec.spectral_bound() < 0.0);
        assert!(dec.eigenvalues().iter().all(|&l| l < 0.0));
    }

    #[test]
    fn pencil_residuals_and_m_orthonormality() {
        let gen = path_gen(10, (1.0, 0.0));
        let dec = SpectralDecomposition::decompose(&gen).unwrap();
        let k_norm = gen.stiffness.norm();
        for i in 0..dec.dim() {
            let v = dec.eigenvectors().column(i).into_owned();
            let lam = dec.eigenvalues()[i];
            let resid = &gen.stiffness * &v + lam * (&gen.mass * &v);
            assert!(resid.norm() <= 1e-8 * k_norm, "residual too large for pair {i}");
        }
        let gram = dec.eigenvectors().transpose() * &gen.mass * dec.eigenvectors();
        let eye = DMatrix::identity(dec.dim(), dec.dim());
        assert!((gram - eye).amax() < 1e-10);
    }

    #[test]
    fn spectral_bound_monotone_in_leak() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let b0 = rng.random::<f64>() + 0.1;
            let b1 = rng.random::<f64>() + 0.1;
            let lo = path_gen(8, (b0, b1));
            let hi = path_gen(8, (b0 + 0.5, b1 + 0.5));
            let bound_lo = SpectralDecomposition::decompose(&lo).unwrap().spectral_bound();
            let bound_hi = SpectralDecomposition::decompose(&hi).unwrap().spectral_bound();
            assert!(bound_hi <= bound_lo + 1e-12);
        }
    }

    #[test]
    fn eigenvalues_stable_under_refinement() {
        // Dense eigensolver oracle at two mesh resolutions: the leading
        // eigenvalues agree to O(N^-2).
        let coarse = SpectralDecomposition::decompose(&path_gen(16, (1.0, 1.0))).unwrap();
        let fine = SpectralDecomposition::decompose(&path_gen(32, (1.0, 1.0))).unwrap();
        for i in 0..4 {
            let a = coarse.eigenvalues()[i];
            let b = fine.eigenvalues()[i];
            assert!(
                (a - b).abs() < 0.05 * b.abs().max(1.0),
                "eigenvalue {i}: coarse {a}, fine {b}"
            );
        }
        assert!(fine.eigenvalues().iter().all(|&l| l < 0.0));
    }

    #[test]
    fn semigroup_identity_law_and_decay() {
        let gen = path_gen(8, (1.0, 1.0));
        let dec = SpectralDecomposition::decompose(&gen).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = StateVector::from_fn(gen.mesh.n_dofs(), |_, _| rng.random::<f64>() - 0.5);

        let x0 = dec.semigroup_apply(0.0, &x).unwrap();
        assert!((&x0 - &x).amax() < 1e-12 * x.amax());

        let one_shot = dec.semigroup_apply(0.7, &x).unwrap();
        let two_step = dec
            .semigroup_apply(0.3, &dec.semigroup_apply(0.4, &x).unwrap())
            .unwrap();
        assert!((one_shot - &two_step).norm() <= 1e-10 * two_step.norm().max(1.0));

        let t = 10.0;
        let decayed = dec.semigroup_apply(t, &x).unwrap();
        let bound = (dec.spectral_bound() * t).exp() * gen.m_norm(&x) * (1.0 + 1e-10);
        assert!(gen.m_norm(&decayed) <= bound);
        assert!(gen.m_norm(&decayed) <= gen.m_norm(&x), "contraction");

        assert!(dec.semigroup_apply(-1.0, &x).is_err());
    }

    #[test]
    fn semigroup_commutes_with_generator() {
        let gen = path_gen(8, (1.0, 0.0));
        let dec = SpectralDecomposition::decompose(&gen).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let x = StateVector::from_fn(gen.mesh.n_dofs(), |_, _| rng.random::<f64>() - 0.5);
            let ta = dec
                .semigroup_apply(0.5, &gen.apply(&x).unwrap())
                .unwrap();
            let at = gen
                .apply(&dec.semigroup_apply(0.5, &x).unwrap())
                .unwrap();
            assert!((ta - &at).norm() <= 1e-8 * at.norm().max(1.0));
        }
    }

    #[test]
    fn constant_convolution_matches_quadrature() {
        let gen = path_gen(6, (1.0, 0.5));
        let dec = SpectralDecomposition::decompose(&gen).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let c = StateVector::from_fn(gen.mesh.n_dofs(), |_, _| rng.random::<f64>() - 0.5);
        let t = 0.8;
        let exact = dec.convolve_constant(t, &c).unwrap();
        // Composite midpoint quadrature oracle of int_0^t T(s) c ds.
        let steps = 20_000;
        let ds = t / steps as f64;
        let mut approx = gen.mesh.zero_state();
        for k in 0..steps {
            let s = (k as f64 + 0.5) * ds;
            approx += dec.semigroup_apply(s, &c).unwrap() * ds;
        }
        assert_relative_eq!(exact.norm(), approx.norm(), max_relative = 1e-6);
        assert!((exact - approx).norm() < 1e-6);
    }
}

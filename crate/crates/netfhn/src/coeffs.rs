//! Edge diffusion coefficients and vertex parameters.

use crate::error::{Error, Result};

/// A piecewise polynomial (degree <= 3) on `[0,1]`, used for the edge
/// conductance `c_j`. Polynomials are stored in ascending-power order and
/// evaluated in the global coordinate `x`.
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    /// Breakpoints `0 = b_0 < ... < b_K = 1`.
    breaks: Vec<f64>,
    /// One coefficient vector per piece, `pieces.len() == breaks.len() - 1`.
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn constant(value: f64) -> Self {
        Self::polynomial(vec![value])
    }

    /// A single polynomial on all of `[0,1]`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self {
            breaks: vec![0.0, 1.0],
            pieces: vec![coeffs],
        }
    }

    pub fn piecewise(breaks: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.len() < 2 || breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::Parameter(
                "piecewise breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if !breaks.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parameter(
                "piecewise breakpoints must be strictly increasing".into(),
            ));
        }
        if pieces.len() != breaks.len() - 1 {
            return Err(Error::Parameter(format!(
                "{} pieces do not match {} breakpoints",
                pieces.len(),
                breaks.len()
            )));
        }
        if pieces.iter().any(|p| p.is_empty() || p.len() > 4) {
            return Err(Error::Parameter(
                "each polynomial piece needs 1 to 4 coefficients (degree <= 3)".into(),
            ));
        }
        Ok(Self { breaks, pieces })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self
            .breaks
            .windows(2)
            .position(|w| x < w[1])
            .unwrap_or(self.pieces.len() - 1);
        // Horner in ascending-power storage.
        self.pieces[idx].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }
}

/// Per-edge data: conductance `c_j` (positive, C^1 per piece) and the
/// postsynaptic amplitude weight `mu_j > 0`.
#[derive(Debug, Clone)]
pub struct EdgeCoefficients {
    pub c: Vec<PiecewisePoly>,
    pub mu: Vec<f64>,
}

impl EdgeCoefficients {
    pub fn uniform(n_edges: usize) -> Self {
        Self {
            c: vec![PiecewisePoly::constant(1.0); n_edges],
            mu: vec![1.0; n_edges],
        }
    }

    pub fn validate(&self, n_edges: usize) -> Result<()> {
        if self.c.len() != n_edges || self.mu.len() != n_edges {
            return Err(Error::Dimension(format!(
                "expected {n_edges} edge coefficient entries, got c: {}, mu: {}",
                self.c.len(),
                self.mu.len()
            )));
        }
        for (j, mu) in self.mu.iter().enumerate() {
            if *mu <= 0.0 {
                return Err(Error::Parameter(format!(
                    "mu must be strictly positive on every edge; edge {} has mu = {mu}",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// Per-vertex data: leak rate `b_i >= 0` and noise amplitude `sigma_i > 0`.
#[derive(Debug, Clone)]
pub struct VertexParams {
    pub b: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl VertexParams {
    pub fn validate(&self, n_vertices: usize, require_invertible: bool) -> Result<()> {
        if self.b.len() != n_vertices || self.sigma.len() != n_vertices {
            return Err(Error::Dimension(format!(
                "expected {n_vertices} vertex parameter entries, got b: {}, sigma: {}",
                self.b.len(),
                self.sigma.len()
            )));
        }
        for (i, b) in self.b.iter().enumerate() {
            if *b < 0.0 {
                return Err(Error::Parameter(format!(
                    "leak rates must be nonnegative; vertex {} has b = {b}",
                    i + 1
                )));
            }
        }
        if require_invertible && !self.b.iter().any(|&b| b > 0.0) {
            return Err(Error::Parameter(
                "at least one vertex leak rate b_i must be strictly positive \
                 for the generator to be invertible"
                    .into(),
            ));
        }
        for (i, s) in self.sigma.iter().enumerate() {
            if *s <= 0.0 {
                return Err(Error::Parameter(format!(
                    "noise amplitudes must be strictly positive; vertex {} has sigma = {s}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

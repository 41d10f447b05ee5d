//! Finite oriented networks and their incidence structure.
//!
//! A network is a set of `n` vertices joined by `m` oriented edges, each edge
//! identified with the interval `[0,1]` (tail at 0, head at 1). The incidence
//! matrices `phi_plus` / `phi_minus` record tails and heads; their difference
//! `phi` carries the signs used by the Kirchhoff flux balance.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Which endpoint of an edge touches a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// The edge's parametrization starts here (x = 0).
    Tail,
    /// The edge's parametrization ends here (x = 1).
    Head,
}

/// A finite oriented network with normalized edges.
///
/// Vertex and edge indices are 0-based everywhere inside the library;
/// 1-based indices appear only in configs and file output.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    phi_plus: DMatrix<f64>,
    phi_minus: DMatrix<f64>,
    phi: DMatrix<f64>,
}

impl NetworkGraph {
    /// Builds the network from a 1-based edge list `(tail, head)`.
    ///
    /// Rejects out-of-range indices, self-loops, and isolated vertices.
    /// Parallel edges are allowed.
    pub fn build(n_vertices: usize, edge_list_1based: &[(usize, usize)]) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::Graph("network must have at least one vertex".into()));
        }
        if edge_list_1based.is_empty() {
            return Err(Error::Graph("edge list must be non-empty".into()));
        }
        let mut edges = Vec::with_capacity(edge_list_1based.len());
        for (k, &(tail, head)) in edge_list_1based.iter().enumerate() {
            if tail < 1 || tail > n_vertices || head < 1 || head > n_vertices {
                return Err(Error::Graph(format!(
                    "edge {} endpoints ({tail}, {head}) out of range 1..={n_vertices}",
                    k + 1
                )));
            }
            if tail == head {
                return Err(Error::Graph(format!(
                    "edge {} is a self-loop at vertex {tail}; the node continuity \
                     condition presumes distinct endpoints per edge",
                    k + 1
                )));
            }
            edges.push((tail - 1, head - 1));
        }
        let m = edges.len();
        let mut phi_plus = DMatrix::zeros(n_vertices, m);
        let mut phi_minus = DMatrix::zeros(n_vertices, m);
        for (j, &(tail, head)) in edges.iter().enumerate() {
            phi_plus[(tail, j)] = 1.0;
            phi_minus[(head, j)] = 1.0;
        }
        for i in 0..n_vertices {
            let deg = phi_plus.row(i).sum() + phi_minus.row(i).sum();
            if deg == 0.0 {
                return Err(Error::Graph(format!(
                    "vertex {} is isolated (degree 0); every vertex must belong to an edge",
                    i + 1
                )));
            }
        }
        let phi = &phi_plus - &phi_minus;
        Ok(Self {
            n_vertices,
            edges,
            phi_plus,
            phi_minus,
            phi,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// 0-based `(tail, head)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn phi_plus(&self) -> &DMatrix<f64> {
        &self.phi_plus
    }

    pub fn phi_minus(&self) -> &DMatrix<f64> {
        &self.phi_minus
    }

    /// Signed incidence matrix `phi = phi_plus - phi_minus`.
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// The star of vertex `i` (0-based): every incident edge together with the
    /// endpoint that touches `i`. Parallel edges appear once per incidence.
    pub fn vertex_star(&self, i: usize) -> Result<Vec<(usize, Endpoint)>> {
        if i >= self.n_vertices {
            return Err(Error::Graph(format!(
                "vertex index {i} out of range 0..{}",
                self.n_vertices
            )));
        }
        let mut star = Vec::new();
        for (j, &(tail, head)) in self.edges.iter().enumerate() {
            if tail == i {
                star.push((j, Endpoint::Tail));
            }
            if head == i {
                star.push((j, Endpoint::Head));
            }
        }
        Ok(star)
    }

    /// Number of edges entering or leaving vertex `i`.
    pub fn degree(&self, i: usize) -> Result<usize> {
        Ok(self.vertex_star(i)?.len())
    }

    /// True if every vertex is reachable from vertex 0 through edges
    /// (orientation ignored).
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_vertices];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(tail, head) in &self.edges {
                for (a, b) in [(tail, head), (head, tail)] {
                    if a == v && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

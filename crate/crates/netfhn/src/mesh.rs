//! Uniform P1 mesh over a network, with edge endpoints identified with their
//! vertex degree of freedom.
//!
//! Global numbering: vertices occupy dofs `0..n`; edge `j` keeps its `N-1`
//! interior nodes at dofs `n + j*(N-1) .. n + (j+1)*(N-1)`, ordered by
//! increasing coordinate. Node `k` of edge `j` sits at `x = k/N`; nodes 0 and
//! `N` are the tail and head vertex dofs. Storing traces once makes the node
//! continuity condition structural.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;

/// A state over the global mesh numbering: per-edge nodal potentials with the
/// vertex potentials stored once, in the leading `n` entries.
pub type StateVector = DVector<f64>;

#[derive(Debug, Clone)]
pub struct Mesh {
    graph: NetworkGraph,
    cells_per_edge: usize,
}

impl Mesh {
    /// `points_per_edge` is the number of mesh cells per edge (so each edge
    /// carries nodes `x_0 = 0 < ... < x_N = 1`). Must be at least 2.
    pub fn build(graph: &NetworkGraph, points_per_edge: usize) -> Result<Self> {
        if points_per_edge < 2 {
            return Err(Error::Mesh(format!(
                "points_per_edge must be >= 2, got {points_per_edge}"
            )));
        }
        Ok(Self {
            graph: graph.clone(),
            cells_per_edge: points_per_edge,
        })
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    /// Number of cells (subintervals) per edge.
    pub fn cells_per_edge(&self) -> usize {
        self.cells_per_edge
    }

    /// Cell width `1/N`.
    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_edge as f64
    }

    /// Total degrees of freedom: `m*(N-1) + n`.
    pub fn n_dofs(&self) -> usize {
        self.graph.n_edges() * (self.cells_per_edge - 1) + self.graph.n_vertices()
    }

    pub fn n_vertices(&self) -> usize {
        self.graph.n_vertices()
    }

    pub fn n_edges(&self) -> usize {
        self.graph.n_edges()
    }

    /// Global dof of node `k` (0..=N) on edge `j`.
    pub fn node_index(&self, edge: usize, k: usize) -> usize {
        let n = self.graph.n_vertices();
        let nn = self.cells_per_edge;
        debug_assert!(edge < self.graph.n_edges() && k <= nn);
        let (tail, head) = self.graph.edges()[edge];
        if k == 0 {
            tail
        } else if k == nn {
            head
        } else {
            n + edge * (nn - 1) + (k - 1)
        }
    }

    /// True if `dof` is a vertex degree of freedom.
    pub fn is_vertex_dof(&self, dof: usize) -> bool {
        dof < self.graph.n_vertices()
    }

    /// The edge owning an interior dof.
    pub fn interior_dof_edge(&self, dof: usize) -> usize {
        debug_assert!(!self.is_vertex_dof(dof));
        (dof - self.graph.n_vertices()) / (self.cells_per_edge - 1)
    }

    /// Coordinate in `[0,1]` of an interior dof on its edge.
    pub fn interior_dof_position(&self, dof: usize) -> f64 {
        debug_assert!(!self.is_vertex_dof(dof));
        let k = (dof - self.graph.n_vertices()) % (self.cells_per_edge - 1) + 1;
        k as f64 * self.h()
    }

    pub fn zero_state(&self) -> StateVector {
        DVector::zeros(self.n_dofs())
    }

    /// Nodal values of edge `j` including both endpoints (length `N+1`).
    pub fn edge_values(&self, state: &StateVector, edge: usize) -> Result<DVector<f64>> {
        self.check_state(state)?;
        let nn = self.cells_per_edge;
        Ok(DVector::from_fn(nn + 1, |k, _| {
            state[self.node_index(edge, k)]
        }))
    }

    /// The vertex potentials `p = Pi u` (the trace of the state).
    pub fn vertex_values(&self, state: &StateVector) -> Result<DVector<f64>> {
        self.check_state(state)?;
        Ok(state.rows(0, self.graph.n_vertices()).into_owned())
    }

    /// Embeds a vector of node amplitudes into the state space: vertex entries
    /// set, edge interiors zero. This is `(0, z)` in the product space.
    pub fn embed_vertex(&self, z: &DVector<f64>) -> Result<StateVector> {
        if z.len() != self.graph.n_vertices() {
            return Err(Error::Dimension(format!(
                "vertex vector has length {}, expected {}",
                z.len(),
                self.graph.n_vertices()
            )));
        }
        let mut state = self.zero_state();
        state.rows_mut(0, z.len()).copy_from(z);
        Ok(state)
    }

    pub fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.len() != self.n_dofs() {
            return Err(Error::Dimension(format!(
                "state has {} entries, mesh has {} dofs",
                state.len(),
                self.n_dofs()
            )));
        }
        Ok(())
    }
}

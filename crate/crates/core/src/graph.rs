//! Weighted undirected communication graph between agents.
//!
//! Vertices are 0-based here; the scenario parser and the CSV writers do
//! the conversion from and to the 1-based labels users see.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Symmetric, nonnegative, zero-diagonal adjacency weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CommGraph<T> {
    weights: Matrix<T>,
    neighbors: Vec<Vec<usize>>,
}

impl<T: Real> CommGraph<T> {
    /// Builds a graph on `n` vertices from `(i, j, weight)` triples.
    ///
    /// Each undirected edge must appear once; listing both `(i, j)` and
    /// `(j, i)` is a duplicate.
    pub fn new(n: usize, edges: &[(usize, usize, T)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one vertex".into(),
            ));
        }
        let mut weights = Matrix::zeros(n, n);
        for &(i, j, w) in edges {
            for index in [i, j] {
                if index >= n {
                    return Err(Error::BadIndex { index, n });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !(w > T::zero()) || !w.is_finite() {
                return Err(Error::NonPositiveWeight);
            }
            if weights[(i, j)] != T::zero() {
                return Err(Error::DuplicateEdge(i, j));
            }
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| weights[(i, j)] > T::zero()).collect())
            .collect();
        Ok(Self { weights, neighbors })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.weights[(i, j)]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n() && j < self.n() && self.weights[(i, j)] > T::zero()
    }

    /// Neighbors of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Number of neighbors of `i` (out-degree and in-degree coincide).
    pub fn neighbor_count(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Edges as `(i, j, weight)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n()).flat_map(move |i| {
            self.neighbors[i]
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j, self.weights[(i, j)]))
        })
    }

    pub fn adjacency(&self) -> &Matrix<T> {
        &self.weights
    }

    /// `d_ii = Σ_j a_ij`.
    pub fn degree_matrix(&self) -> Matrix<T> {
        let degrees: Vec<T> = (0..self.n())
            .map(|i| {
                self.weights
                    .row(i)
                    .iter()
                    .fold(T::zero(), |acc, &w| acc + w)
            })
            .collect();
        Matrix::from_diagonal(&degrees)
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> Matrix<T> {
        let degree = self.degree_matrix();
        Matrix::from_fn(self.n(), self.n(), |r, c| {
            degree[(r, c)] - self.weights[(r, c)]
        })
    }

    /// Breadth-first reachability from vertex 0.
    pub fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        reached == n
    }

    pub(crate) fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Disconnected)
        }
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index < self.n() {
            Ok(())
        } else {
            Err(Error::BadIndex { index, n: self.n() })
        }
    }
}

/// The six-agent topology used in the reference study: nine links of weight 6.
pub fn reference_six_agent_graph<T: Real>() -> CommGraph<T> {
    let w = T::lit(6.0);
    let edges = [
        (0, 1),
        (0, 3),
        (0, 4),
        (1, 3),
        (2, 3),
        (2, 4),
        (3, 4),
        (3, 5),
        (4, 5),
    ];
    let edges: Vec<_> = edges.iter().map(|&(i, j)| (i, j, w)).collect();
    CommGraph::new(6, &edges).expect("reference graph is valid")
}

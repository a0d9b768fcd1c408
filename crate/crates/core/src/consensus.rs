//! Capacity-estimation consensus.
//!
//! Every agent holds an estimate `s_i` of the microgrid's total capacity.
//! After agent `k` sees its own capacity change by `δ`, it pins itself toward
//! the new total with gain `h` while all agents diffuse along the graph:
//!
//! ```text
//! ṡ_i = -Σ_j a_ij (s_i - s_j)  -  [i = k]·h·(s_k - P̃_T)
//! ```
//!
//! The simulator integrates this with explicit Euler steps. The closed form
//! `S(t) = P̃_T·1 + exp(-(L+Δ)t)·(-δ·1)` is provided as a reference solution.

use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::matrix::SymmetricEigen;
use crate::scalar::{max_abs, sum, Real};
use crate::spectral::{euler_step_limit, symmetric_decomposition};

/// Right-hand side of one agent's estimate dynamics.
///
/// `neighbors` yields `(a_ij, s_j)` pairs; `pin` is `(h, P̃_T)` and is only
/// present for the informed agent. Centralized and message-passing code both
/// go through this function so their trajectories agree bit for bit.
#[inline]
pub fn local_rate<T: Real>(
    own: T,
    neighbors: impl IntoIterator<Item = (T, T)>,
    pin: Option<(T, T)>,
) -> T {
    let coupling = neighbors
        .into_iter()
        .fold(T::zero(), |acc, (a, s_j)| acc + a * (own - s_j));
    match pin {
        Some((h, target)) => -coupling - h * (own - target),
        None => -coupling,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusState<T> {
    /// Estimates `s_i` of the total capacity.
    pub s: Vec<T>,
    /// Pinning gain of the informed agent.
    pub h: T,
    /// Informed agent (0-based).
    pub k: usize,
    /// Updated total `P̃_T`, known only to agent `k`.
    pub p_tilde_t: T,
    /// Step counter.
    pub w: u64,
    pub dt: T,
}

/// Starts a consensus run from `S = P_T·1` after agent `k` changes by `delta`.
pub fn init_consensus<T: Real>(
    p_t: T,
    n: usize,
    k: usize,
    delta: T,
    h: T,
    dt: T,
) -> Result<ConsensusState<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "consensus needs at least two agents".into(),
        ));
    }
    if k >= n {
        return Err(Error::BadIndex { index: k, n });
    }
    if !(h > T::zero()) {
        return Err(Error::NonPositiveGain);
    }
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    if !p_t.is_finite() || !delta.is_finite() {
        return Err(Error::InvalidParameter(
            "capacity values must be finite".into(),
        ));
    }
    Ok(ConsensusState {
        s: vec![p_t; n],
        h,
        k,
        p_tilde_t: p_t + delta,
        w: 0,
        dt,
    })
}

impl<T: Real> ConsensusState<T> {
    fn check_graph(&self, graph: &CommGraph<T>) -> Result<()> {
        if graph.n() != self.s.len() {
            return Err(Error::DimensionMismatch {
                expected: self.s.len(),
                found: graph.n(),
            });
        }
        Ok(())
    }

    /// `-(L+Δ)S + h·d_k·P̃_T`, evaluated agent by agent.
    pub fn rates(&self, graph: &CommGraph<T>) -> Result<Vec<T>> {
        self.check_graph(graph)?;
        Ok((0..self.s.len())
            .map(|i| {
                let neighbors = graph
                    .neighbors(i)
                    .iter()
                    .map(|&j| (graph.weight(i, j), self.s[j]));
                let pin = (i == self.k).then_some((self.h, self.p_tilde_t));
                local_rate(self.s[i], neighbors, pin)
            })
            .collect())
    }

    /// One forward-Euler step.
    pub fn step(&self, graph: &CommGraph<T>) -> Result<Self> {
        let mut next = self.clone();
        next.advance(graph)?;
        Ok(next)
    }

    /// In-place variant of [`ConsensusState::step`].
    pub fn advance(&mut self, graph: &CommGraph<T>) -> Result<()> {
        let rates = self.rates(graph)?;
        for (s, r) in self.s.iter_mut().zip(&rates) {
            *s = *s + self.dt * *r;
        }
        if self.s.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalDivergence { step: self.w });
        }
        self.w += 1;
        Ok(())
    }

    pub fn has_converged(&self, graph: &CommGraph<T>, eps_rel: T) -> Result<bool> {
        let rates = self.rates(graph)?;
        let drift = max_abs(&rates) * self.dt;
        Ok(estimates_settled(&self.s, drift, eps_rel))
    }

    /// Errors when `dt` is outside the explicit-Euler stability region.
    pub fn check_step_stable(&self, graph: &CommGraph<T>) -> Result<()> {
        check_step_stable(graph, Some(self.k), self.h, self.dt)
    }
}

/// Spread-and-drift convergence test shared by the centralized state and
/// the message-passing network.
pub fn estimates_settled<T: Real>(s: &[T], drift: T, eps_rel: T) -> bool {
    if s.is_empty() {
        return true;
    }
    let mean = sum(s) / T::from_count(s.len());
    let lo = s.iter().copied().fold(T::infinity(), T::min);
    let hi = s.iter().copied().fold(T::neg_infinity(), T::max);
    let scale = eps_rel * mean.abs();
    hi - lo <= scale && drift <= scale
}

/// Errors unless `dt < 2 / |λ_min(-(L+Δ))|`.
pub fn check_step_stable<T: Real>(
    graph: &CommGraph<T>,
    k: Option<usize>,
    h: T,
    dt: T,
) -> Result<()> {
    let limit = euler_step_limit(graph, k, h)?;
    if dt < limit {
        Ok(())
    } else {
        Err(Error::UnstableStep {
            dt: dt.to_f64().unwrap_or(f64::NAN),
            limit: limit.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Exact solution of the pinned consensus, diagonalized once.
#[derive(Clone, Debug)]
pub struct ClosedForm<T> {
    eig: SymmetricEigen<T>,
    p_tilde_t: T,
    initial_offset: Vec<T>,
}

impl<T: Real> ClosedForm<T> {
    pub fn new(graph: &CommGraph<T>, k: usize, h: T, p_t: T, delta: T) -> Result<Self> {
        graph.require_connected()?;
        graph.check_index(k)?;
        if !(h > T::zero()) {
            return Err(Error::NonPositiveGain);
        }
        let mut m = graph.laplacian();
        m[(k, k)] = m[(k, k)] + h;
        let eig = symmetric_decomposition(&m)?;
        Ok(Self {
            eig,
            p_tilde_t: p_t + delta,
            initial_offset: vec![-delta; graph.n()],
        })
    }

    /// `S(t)` for `t >= 0`.
    pub fn eval(&self, t: T) -> Vec<T> {
        self.eig
            .apply_fn(&self.initial_offset, |lambda| (-lambda * t).exp())
            .into_iter()
            .map(|y| self.p_tilde_t + y)
            .collect()
    }

    /// Largest eigenvalue of `-(L+Δ)`.
    pub fn dominant_eigenvalue(&self) -> T {
        -self.eig.values[0]
    }
}

pub fn closed_form_solution<T: Real>(
    graph: &CommGraph<T>,
    k: usize,
    h: T,
    p_t: T,
    delta: T,
    t: T,
) -> Result<Vec<T>> {
    if t < T::zero() {
        return Err(Error::InvalidParameter("t must be nonnegative".into()));
    }
    Ok(ClosedForm::new(graph, k, h, p_t, delta)?.eval(t))
}

//! Brute-force references for tests. Nothing here is used by the simulator.

use crate::consensus::closed_form_solution;
use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::scalar::Real;

/// Exact pinned-consensus trajectory at time `t`.
pub fn exact_consensus<T: Real>(
    graph: &CommGraph<T>,
    k: usize,
    h: T,
    p_t: T,
    delta: T,
    t: T,
) -> Result<Vec<T>> {
    closed_form_solution(graph, k, h, p_t, delta, t)
}

/// Arithmetic mean.
pub fn direct_average<T: Real>(values: &[T]) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let mut total = T::zero();
    for &v in values {
        total = total + v;
    }
    Ok(total / T::from_count(values.len()))
}

/// Sum of every entry except `values[k]`.
pub fn direct_sum_excluding<T: Real>(values: &[T], k: usize) -> Result<T> {
    if k >= values.len() {
        return Err(Error::BadIndex {
            index: k,
            n: values.len(),
        });
    }
    let mut total = T::zero();
    for (i, &v) in values.iter().enumerate() {
        if i != k {
            total = total + v;
        }
    }
    Ok(total)
}

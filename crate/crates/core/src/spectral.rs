//! Eigen-analysis of the pinned consensus system `-(L + Δ)`.
//!
//! `Δ = h·e_k·e_kᵀ` adds the informed agent's pinning gain to one diagonal
//! entry of the Laplacian. On a connected graph the negated sum is Hurwitz
//! for every `h > 0`, its dominant (largest) eigenvalue moves left as `h`
//! grows, and it never crosses `λ_{N-1}(-L)`, the negated algebraic
//! connectivity. The functions here check all three numerically, together
//! with the admissible capacity-change bound that keeps every estimate inside
//! a band around the pre-event total.

use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::matrix::{symmetric_eigen, Matrix, SymmetricEigen};
use crate::scalar::Real;

const SYMMETRY_TOL: f64 = 1e-9;
const HURWITZ_TOL: f64 = 1e-12;

/// Sorted spectrum of a symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport<T> {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<T>,
    /// Largest eigenvalue; for `-(L+Δ)` it sets the convergence rate.
    pub dominant: T,
}

/// Admissible capacity change for a margin `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaBound<T> {
    pub theta: T,
    /// `theta·P_T / (1 + √N)`, in the same unit as `P_T`.
    pub delta_max: T,
}

/// `L + h·e_k·e_kᵀ` without the sign flip. `h` may be zero.
fn pinned_laplacian<T: Real>(laplacian: &Matrix<T>, k: usize, h: T) -> Result<Matrix<T>> {
    if !laplacian.is_square() {
        return Err(Error::DimensionMismatch {
            expected: laplacian.rows(),
            found: laplacian.cols(),
        });
    }
    if k >= laplacian.rows() {
        return Err(Error::BadIndex {
            index: k,
            n: laplacian.rows(),
        });
    }
    let mut m = laplacian.clone();
    m[(k, k)] = m[(k, k)] + h;
    Ok(m)
}

/// Returns `-(L + Δ)` with `Δ_kk = h`.
pub fn perturbed_system_matrix<T: Real>(
    laplacian: &Matrix<T>,
    k: usize,
    h: T,
) -> Result<Matrix<T>> {
    if !(h > T::zero()) {
        return Err(Error::NonPositiveGain);
    }
    Ok(pinned_laplacian(laplacian, k, h)?.scale(-T::one()))
}

/// Full symmetric eigen-decomposition after a symmetry check.
pub fn symmetric_decomposition<T: Real>(m: &Matrix<T>) -> Result<SymmetricEigen<T>> {
    if !m.is_symmetric(T::lit(SYMMETRY_TOL)) {
        return Err(Error::NotSymmetric);
    }
    symmetric_eigen(m)
}

pub fn eigenvalues_sym<T: Real>(m: &Matrix<T>) -> Result<SpectralReport<T>> {
    let eig = symmetric_decomposition(m)?;
    let dominant = *eig.values.last().ok_or(Error::Empty)?;
    Ok(SpectralReport {
        eigenvalues: eig.values,
        dominant,
    })
}

/// Checks that `-(L + Δ)` is Hurwitz for informed agent `k` and gain `h >= 0`.
///
/// The verdict requires `λ_max < -1e-12·‖L + Δ‖_∞`, so `h = 0` (plain
/// Laplacian, zero eigenvalue) is reported as not Hurwitz.
pub fn verify_hurwitz<T: Real>(
    graph: &CommGraph<T>,
    k: usize,
    h: T,
) -> Result<(bool, SpectralReport<T>)> {
    graph.require_connected()?;
    if h < T::zero() {
        return Err(Error::NonPositiveGain);
    }
    let pinned = pinned_laplacian(&graph.laplacian(), k, h)?;
    let report = eigenvalues_sym(&pinned.scale(-T::one()))?;
    let hurwitz = report.dominant < -T::lit(HURWITZ_TOL) * pinned.norm_inf();
    Ok((hurwitz, report))
}

/// Dominant eigenvalue of `-(L + Δ(h))` for each gain in a strictly ascending grid.
pub fn dominant_eigenvalue_sweep<T: Real>(
    graph: &CommGraph<T>,
    k: usize,
    gains: &[T],
) -> Result<Vec<T>> {
    graph.require_connected()?;
    graph.check_index(k)?;
    if gains.is_empty() || !(gains[0] > T::zero()) || gains.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::BadGainGrid);
    }
    let laplacian = graph.laplacian();
    gains
        .iter()
        .map(|&h| Ok(eigenvalues_sym(&perturbed_system_matrix(&laplacian, k, h)?)?.dominant))
        .collect()
}

/// `λ_{N-1}(-L)`: the second largest eigenvalue of the negated Laplacian,
/// which lower-bounds the dominant eigenvalue of `-(L + Δ)` for every `h`.
pub fn weyl_lower_bound<T: Real>(graph: &CommGraph<T>) -> Result<T> {
    if graph.n() < 2 {
        return Err(Error::InvalidParameter("need at least two agents".into()));
    }
    let report = eigenvalues_sym(&graph.laplacian().scale(-T::one()))?;
    Ok(report.eigenvalues[graph.n() - 2])
}

/// Largest explicit-Euler step for which `S ← S + dt·(-(L+Δ)S + …)` is stable:
/// `2 / |λ_min(-(L+Δ))|`.
pub fn euler_step_limit<T: Real>(graph: &CommGraph<T>, k: Option<usize>, h: T) -> Result<T> {
    let laplacian = graph.laplacian();
    let m = match k {
        Some(k) => pinned_laplacian(&laplacian, k, h)?,
        None => laplacian,
    };
    let report = eigenvalues_sym(&m)?;
    let spectral_radius = report.dominant.abs();
    if spectral_radius == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(2.0) / spectral_radius)
}

/// Sufficient bound on `|δ|` keeping every estimate in the `theta` band.
pub fn delta_bound<T: Real>(p_t: T, p_l: T, n: usize, theta: T) -> Result<DeltaBound<T>> {
    if !(p_l < p_t) {
        return Err(Error::LoadExceedsCapacity);
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one agent".into()));
    }
    if !(theta > T::zero() && theta * p_t < p_t - p_l) {
        return Err(Error::ThetaOutOfRange);
    }
    let delta_max = theta * p_t / (T::one() + T::from_count(n).sqrt());
    Ok(DeltaBound { theta, delta_max })
}

/// Supremum of [`delta_bound`] over admissible `theta` (the open end `1 - P_L/P_T`).
pub fn delta_bound_supremum<T: Real>(p_t: T, p_l: T, n: usize) -> Result<T> {
    if !(p_l < p_t) {
        return Err(Error::LoadExceedsCapacity);
    }
    Ok((p_t - p_l) / (T::one() + T::from_count(n).sqrt()))
}

/// `((1-θ)·P_T, (1+θ)·P_T)`.
pub fn transient_band<T: Real>(p_t: T, theta: T) -> (T, T) {
    ((T::one() - theta) * p_t, (T::one() + theta) * p_t)
}

// √(N+1) − √N written as 1/(√(N+1) + √N) to avoid cancellation at large N.
fn sqrt_gap<T: Real>(n: usize) -> T {
    let a = T::from_count(n + 1).sqrt();
    let b = T::from_count(n).sqrt();
    T::one() / (a + b)
}

/// Smallest capacity an added agent must bring so the admissible `|δ|` grows
/// when going from `N` to `N + 1` agents.
pub fn capacity_addition_threshold<T: Real>(p_t: T, n: usize) -> T {
    sqrt_gap::<T>(n) / (T::one() + T::from_count(n).sqrt()) * p_t
}

/// The same threshold expressed relative to the mean capacity `P_T / N`.
pub fn addition_ratio<T: Real>(n: usize) -> T {
    T::from_count(n) * sqrt_gap::<T>(n) / (T::one() + T::from_count(n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::reference_six_agent_graph;

    fn two_node() -> CommGraph<f64> {
        CommGraph::new(2, &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn perturbed_matrix_two_node() {
        let m = perturbed_system_matrix(&two_node().laplacian(), 0, 10.0).unwrap();
        assert_eq!(
            m,
            Matrix::from_rows(&[vec![-11.0, 1.0], vec![1.0, -1.0]]).unwrap()
        );
    }

    #[test]
    fn perturbed_matrix_reference_graph() {
        let l = reference_six_agent_graph::<f64>().laplacian();
        let m = perturbed_system_matrix(&l, 0, 10.0).unwrap();
        assert_eq!(m[(0, 0)], -28.0);
        for r in 0..6 {
            for c in 0..6 {
                if (r, c) != (0, 0) {
                    assert_eq!(m[(r, c)], -l[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn perturbed_matrix_rejects_bad_gain() {
        let l = two_node().laplacian();
        assert_eq!(
            perturbed_system_matrix(&l, 0, 0.0),
            Err(Error::NonPositiveGain)
        );
        assert_eq!(
            perturbed_system_matrix(&l, 0, -1.0),
            Err(Error::NonPositiveGain)
        );
        assert!(matches!(
            perturbed_system_matrix(&l, 2, 1.0),
            Err(Error::BadIndex { .. })
        ));
    }

    #[test]
    fn small_gain_approaches_negated_laplacian() {
        let l = reference_six_agent_graph::<f64>().laplacian();
        let m = perturbed_system_matrix(&l, 3, 1e-12).unwrap();
        assert!(m.add(&l).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn eigenvalues_two_node() {
        let r = eigenvalues_sym(&two_node().laplacian()).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-15 && (r.eigenvalues[1] - 2.0).abs() < 1e-15);

        let m = perturbed_system_matrix(&two_node().laplacian(), 0, 10.0).unwrap();
        let r = eigenvalues_sym(&m).unwrap();
        // roots of λ² + 12λ + 10
        let disc = 104.0_f64.sqrt();
        assert!((r.eigenvalues[0] - (-12.0 - disc) / 2.0).abs() < 1e-12);
        assert!((r.eigenvalues[1] - (-12.0 + disc) / 2.0).abs() < 1e-12);
        assert!((r.eigenvalues[1] + 0.9010).abs() < 1e-4);
    }

    #[test]
    fn eigenvalues_reject_asymmetric() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(eigenvalues_sym(&m), Err(Error::NotSymmetric));
    }

    #[test]
    fn reference_laplacian_has_single_zero() {
        let l = reference_six_agent_graph::<f64>().laplacian();
        let r = eigenvalues_sym(&l).unwrap();
        assert!(r.eigenvalues[0].abs() <= 1e-9 * l.norm_inf());
        assert!(r.eigenvalues[1..].iter().all(|&x| x > 1e-6));
    }

    #[test]
    fn hurwitz_checks() {
        let g = reference_six_agent_graph::<f64>();
        for k in 0..6 {
            assert!(verify_hurwitz(&g, k, 10.0).unwrap().0);
        }
        let (ok, report) = verify_hurwitz(&two_node(), 0, 1.0).unwrap();
        assert!(ok);
        assert!((report.eigenvalues[0] - (-3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((report.eigenvalues[1] - (-3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(!verify_hurwitz(&two_node(), 0, 0.0).unwrap().0);

        let split = CommGraph::new(3, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(
            verify_hurwitz(&split, 0, 1.0).unwrap_err(),
            Error::Disconnected
        );
    }

    #[test]
    fn sweep_two_node_closed_form() {
        let gains = [1.0, 10.0, 100.0];
        let sweep = dominant_eigenvalue_sweep(&two_node(), 0, &gains).unwrap();
        for (h, got) in gains.iter().zip(&sweep) {
            let expected = (-(2.0 + h) + (h * h + 4.0).sqrt()) / 2.0;
            assert!((got - expected).abs() < 1e-12, "h={h}: {got} vs {expected}");
        }
        assert!(sweep.windows(2).all(|w| w[1] < w[0]));
        assert!(sweep.iter().all(|&x| x > -1.0));
    }

    #[test]
    fn sweep_rejects_bad_grid() {
        assert_eq!(
            dominant_eigenvalue_sweep(&two_node(), 0, &[1.0, 1.0]),
            Err(Error::BadGainGrid)
        );
        assert_eq!(
            dominant_eigenvalue_sweep(&two_node(), 0, &[0.0, 1.0]),
            Err(Error::BadGainGrid)
        );
        assert_eq!(
            dominant_eigenvalue_sweep(&two_node(), 0, &[]),
            Err(Error::BadGainGrid)
        );
    }

    #[test]
    fn sweep_reference_graph_inside_weyl_interval() {
        let g = reference_six_agent_graph::<f64>();
        let sweep = dominant_eigenvalue_sweep(&g, 0, &[1.0, 10.0]).unwrap();
        let lower = weyl_lower_bound(&g).unwrap();
        assert!(sweep[1] < sweep[0]);
        assert!(sweep.iter().all(|&x| lower <= x && x < 0.0));
    }

    #[test]
    fn delta_bound_arithmetic() {
        let b = delta_bound(2400.0, 1600.0, 6, 0.3).unwrap();
        assert!((b.delta_max - 720.0 / (1.0 + 6f64.sqrt())).abs() < 1e-12);
        assert!((b.delta_max - 208.73).abs() < 0.01);
        let sup = delta_bound_supremum(2400.0, 1600.0, 6).unwrap();
        assert!((sup - 800.0 / (1.0 + 6f64.sqrt())).abs() < 1e-12);
        assert!((sup - 231.92).abs() < 0.01);
        assert_eq!(
            delta_bound(2400.0, 1600.0, 6, 1.0 / 3.0),
            Err(Error::ThetaOutOfRange)
        );
        assert_eq!(
            delta_bound(2400.0, 1600.0, 6, 0.0),
            Err(Error::ThetaOutOfRange)
        );
        assert_eq!(
            delta_bound(2400.0, 2400.0, 6, 0.1),
            Err(Error::LoadExceedsCapacity)
        );
    }

    #[test]
    fn band_arithmetic() {
        assert_eq!(transient_band(2400.0, 0.3), (1680.0, 3120.0));
        assert_eq!(transient_band(2400.0, 0.0), (2400.0, 2400.0));
        let (low, high) = transient_band(2400.0f64, 1.0 / 3.0);
        assert!((low - 1600.0).abs() < 1e-9 && (high - 3200.0).abs() < 1e-9);
    }

    #[test]
    fn addition_threshold_values() {
        assert!((capacity_addition_threshold(1.0, 1) - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!((capacity_addition_threshold(1.0f64, 3) - 0.098).abs() < 1e-3);
        assert!((addition_ratio::<f64>(1) - 0.2071).abs() < 1e-4);
        let r100 = addition_ratio::<f64>(100);
        assert!(r100 > 0.45 && r100 < 0.5);
        let r_big = addition_ratio::<f64>(1_000_000);
        assert!(r_big > 0.4995 && r_big < 0.5);
    }

    #[test]
    fn step_limit_matches_spectrum() {
        let g = reference_six_agent_graph::<f64>();
        let limit = euler_step_limit(&g, Some(0), 10.0).unwrap();
        let report =
            eigenvalues_sym(&perturbed_system_matrix(&g.laplacian(), 0, 10.0).unwrap()).unwrap();
        assert!((limit - 2.0 / report.eigenvalues[0].abs()).abs() < 1e-12);
    }
}

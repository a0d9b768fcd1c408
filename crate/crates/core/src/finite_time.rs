//! Finite-time average consensus by Hankel rank detection.
//!
//! Two linear iterations run side by side over a column-stochastic mixing
//! matrix: `ḡ` seeded with the values to average and `g` seeded with ones.
//! Each agent watches only its own two scalar sequences. Their successive
//! differences satisfy a linear recurrence whose order is bounded by `N`, so
//! after `2N + 1` rounds the agent can find the first Hankel matrix of
//! differences that loses rank, read the recurrence coefficients off its
//! kernel, and extrapolate both sequences to their limits. The ratio of the
//! two limits is the exact network average.

use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::matrix::{symmetric_eigen, Matrix};
use crate::scalar::{max_abs, Real};

/// Mixing weights `p_ij = 1 / (1 + |N_j|)` for `i ∈ N_j ∪ {j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FtWeights<T> {
    p: Matrix<T>,
    /// `N_i ∪ {i}` in ascending order, i.e. the senders agent `i` mixes.
    mixing_sets: Vec<Vec<usize>>,
}

pub fn build_ft_weights<T: Real>(graph: &CommGraph<T>) -> Result<FtWeights<T>> {
    graph.require_connected()?;
    let n = graph.n();
    let mut p = Matrix::zeros(n, n);
    let mut mixing_sets = Vec::with_capacity(n);
    for j in 0..n {
        let share = outgoing_share::<T>(graph.neighbor_count(j));
        p[(j, j)] = share;
        for &i in graph.neighbors(j) {
            p[(i, j)] = share;
        }
    }
    for i in 0..n {
        let mut set = graph.neighbors(i).to_vec();
        set.push(i);
        set.sort_unstable();
        mixing_sets.push(set);
    }
    Ok(FtWeights { p, mixing_sets })
}

/// Weight a sender with `out_degree` outgoing links attaches to each copy of its value.
#[inline]
pub fn outgoing_share<T: Real>(out_degree: usize) -> T {
    T::one() / T::from_count(1 + out_degree)
}

/// One agent's mixing step: `Σ p_ij·x_j` over `(j, p_ij, x_j)` sorted by `j`.
#[inline]
pub fn mix<T: Real>(terms: impl IntoIterator<Item = (T, T)>) -> T {
    terms.into_iter().fold(T::zero(), |acc, (p, x)| acc + p * x)
}

impl<T: Real> FtWeights<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.rows()
    }

    pub fn column_sums(&self) -> Vec<T> {
        (0..self.n())
            .map(|c| self.p.column(c).into_iter().fold(T::zero(), |a, b| a + b))
            .collect()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.mixing_sets
            .iter()
            .enumerate()
            .map(|(i, set)| mix(set.iter().map(|&j| (self.p[(i, j)], x[j]))))
            .collect()
    }
}

/// Iterate histories, indexed `[m][agent]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterates<T> {
    pub gbar: Vec<Vec<T>>,
    pub g: Vec<Vec<T>>,
}

impl<T: Real> Iterates<T> {
    pub fn gbar_of(&self, agent: usize) -> Vec<T> {
        self.gbar.iter().map(|v| v[agent]).collect()
    }

    pub fn g_of(&self, agent: usize) -> Vec<T> {
        self.g.iter().map(|v| v[agent]).collect()
    }
}

/// Runs `steps` rounds of `ḡ ← Pḡ`, `g ← Pg` from `g(0) = 1`, keeping every vector.
pub fn iterate<T: Real>(weights: &FtWeights<T>, gbar0: &[T], steps: usize) -> Result<Iterates<T>> {
    if gbar0.len() != weights.n() {
        return Err(Error::DimensionMismatch {
            expected: weights.n(),
            found: gbar0.len(),
        });
    }
    if gbar0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "finite-time inputs must be finite".into(),
        ));
    }
    let mut gbar = Vec::with_capacity(steps + 1);
    let mut g = Vec::with_capacity(steps + 1);
    gbar.push(gbar0.to_vec());
    g.push(vec![T::one(); weights.n()]);
    for m in 0..steps {
        gbar.push(weights.apply(&gbar[m]));
        g.push(weights.apply(&g[m]));
    }
    Ok(Iterates { gbar, g })
}

/// `[seq(1) - seq(0), …, seq(2m+1) - seq(2m)]`.
pub fn difference_vectors<T: Real>(seq: &[T], m: usize) -> Result<Vec<T>> {
    let needed = 2 * m + 2;
    if seq.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: seq.len(),
        });
    }
    Ok(seq[..needed].windows(2).map(|w| w[1] - w[0]).collect())
}

/// Square Hankel matrix with `H[r][c] = diff[r + c]`; `diff` must have odd length.
pub fn hankel<T: Real>(diff: &[T]) -> Result<Matrix<T>> {
    if diff.len().is_multiple_of(2) {
        return Err(Error::HankelLength(diff.len()));
    }
    let size = diff.len() / 2 + 1;
    Ok(Matrix::from_fn(size, size, |r, c| diff[r + c]))
}

/// Numerical rank criterion for the Hankel matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankTest<T> {
    /// Defective when `σ_min <= eps_rank · σ_max`.
    pub eps_rank: T,
    /// Also defective when `σ_max <= eps_zero · max|seq|`: the differences
    /// are rounding noise around a sequence that has stopped moving.
    pub eps_zero: T,
}

impl<T: Real> Default for RankTest<T> {
    fn default() -> Self {
        Self {
            eps_rank: T::lit(1e-12),
            eps_zero: T::lit(1e-12),
        }
    }
}

/// Which of the two sequences supplied the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSource {
    Ratio,
    Mass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Defect<T> {
    /// Hankel order `M` at which the agent stops.
    pub m: usize,
    /// Kernel `β`, normalized so the last entry is exactly one.
    pub beta: Vec<T>,
    pub source: KernelSource,
}

enum Rank<T> {
    Full,
    Defective(Vec<T>),
    /// Defective, but the kernel's last entry is numerically zero.
    Unnormalizable,
}

/// Rank status of the order-`m` Hankel matrix of `seq`, with its normalized kernel.
fn hankel_rank<T: Real>(seq: &[T], m: usize, test: &RankTest<T>) -> Result<Rank<T>> {
    let diff = difference_vectors(seq, m)?;
    let h = hankel(&diff)?;
    // Hankel matrices are symmetric, so singular values are |eigenvalues|
    // and the right singular vector of σ_min is the matching eigenvector.
    let eig = symmetric_eigen(&h)?;
    let (imin, smin) =
        eig.values
            .iter()
            .map(|v| v.abs())
            .enumerate()
            .fold(
                (0, T::infinity()),
                |best, (i, v)| {
                    if v < best.1 {
                        (i, v)
                    } else {
                        best
                    }
                },
            );
    let smax = eig.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let scale = max_abs(&seq[..2 * m + 2]);
    if smax <= test.eps_zero * scale {
        let mut beta = vec![T::zero(); m + 1];
        beta[m] = T::one();
        return Ok(Rank::Defective(beta));
    }
    if smin > test.eps_rank * smax {
        return Ok(Rank::Full);
    }
    let v = eig.vector(imin);
    let last = v[m];
    let norm = v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    if last.abs() < T::lit(1e-10) * norm {
        return Ok(Rank::Unnormalizable);
    }
    Ok(Rank::Defective(v.iter().map(|&x| x / last).collect()))
}

/// Finds the Hankel order at which the agent can stop, and the kernel to use.
///
/// The stopping order is the first `m >= 1` at which the Hankel matrices of
/// both sequences have lost rank; the kernel comes from the sequence whose
/// matrix became defective at that order (`ḡ` on a tie). A defect whose
/// kernel cannot be scaled to a unit last entry (vanishing leading
/// differences) does not count.
pub fn find_defect<T: Real>(gbar_seq: &[T], g_seq: &[T], test: &RankTest<T>) -> Result<Defect<T>> {
    if gbar_seq.len() != g_seq.len() {
        return Err(Error::DimensionMismatch {
            expected: gbar_seq.len(),
            found: g_seq.len(),
        });
    }
    if gbar_seq.len() < 4 {
        return Err(Error::InsufficientHistory {
            needed: 4,
            available: gbar_seq.len(),
        });
    }
    let max_order = (gbar_seq.len() - 2) / 2;
    let mut ratio_kernel: Option<(usize, Vec<T>)> = None;
    let mut mass_kernel: Option<(usize, Vec<T>)> = None;
    let mut unnormalizable = false;
    for m in 1..=max_order {
        for (slot, seq) in [(&mut ratio_kernel, gbar_seq), (&mut mass_kernel, g_seq)] {
            if slot.is_none() {
                match hankel_rank(seq, m, test)? {
                    Rank::Defective(beta) => *slot = Some((m, beta)),
                    Rank::Unnormalizable => unnormalizable = true,
                    Rank::Full => {}
                }
            }
        }
        if let (Some((mr, br)), Some((mm, bm))) = (&ratio_kernel, &mass_kernel) {
            let defect = if *mr == m {
                Defect {
                    m,
                    beta: br.clone(),
                    source: KernelSource::Ratio,
                }
            } else {
                debug_assert_eq!(*mm, m);
                Defect {
                    m,
                    beta: bm.clone(),
                    source: KernelSource::Mass,
                }
            };
            return Ok(defect);
        }
    }
    Err(if unnormalizable {
        Error::KernelNormalization
    } else {
        Error::NoDefect
    })
}

/// `([ḡ(s..s+M)]·β) / ([g(s..s+M)]·β)` for the window starting at `s`.
///
/// An exact kernel gives the same value for every admissible `s`.
pub fn kernel_average_at<T: Real>(
    gbar_seq: &[T],
    g_seq: &[T],
    defect: &Defect<T>,
    s: usize,
) -> Result<T> {
    let len = defect.m + 1;
    let available = gbar_seq.len().min(g_seq.len());
    if defect.beta.len() != len || available < s + len {
        return Err(Error::InsufficientHistory {
            needed: s + len,
            available,
        });
    }
    let dot = |seq: &[T]| {
        seq[s..s + len]
            .iter()
            .zip(&defect.beta)
            .fold(T::zero(), |acc, (&x, &b)| acc + x * b)
    };
    let numerator = dot(gbar_seq);
    let denominator = dot(g_seq);
    if !(denominator.abs() >= T::lit(1e-12) * max_abs(&g_seq[s..s + len])) {
        return Err(Error::DegenerateDenominator);
    }
    Ok(numerator / denominator)
}

/// Kernel average over the first window, `([ḡ(0..M)]·β) / ([g(0..M)]·β)`.
pub fn kernel_average<T: Real>(gbar_seq: &[T], g_seq: &[T], defect: &Defect<T>) -> Result<T> {
    kernel_average_at(gbar_seq, g_seq, defect, 0)
}

/// Kernel average over the most recent window, where leftover transients
/// from an inexact kernel have decayed the most.
pub fn kernel_average_latest<T: Real>(
    gbar_seq: &[T],
    g_seq: &[T],
    defect: &Defect<T>,
) -> Result<T> {
    let available = gbar_seq.len().min(g_seq.len());
    let s = available
        .checked_sub(defect.m + 1)
        .ok_or(Error::InsufficientHistory {
            needed: defect.m + 1,
            available,
        })?;
    kernel_average_at(gbar_seq, g_seq, defect, s)
}

/// One complete finite-time run: iterates, per-agent defects and averages.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteTimeRun<T> {
    pub iterates: Iterates<T>,
    pub defects: Vec<Defect<T>>,
    /// `C_a` as computed locally by each agent.
    pub averages: Vec<T>,
}

impl<T: Real> FiniteTimeRun<T> {
    /// Largest disagreement between any agent's average and agent 0's.
    pub fn agreement_spread(&self) -> T {
        let first = self.averages[0];
        self.averages
            .iter()
            .fold(T::zero(), |acc, &c| acc.max((c - first).abs()))
    }
}

/// Number of rounds each agent runs before its local rank analysis.
#[inline]
pub fn rounds_for(n: usize) -> usize {
    2 * n + 1
}

pub fn run_finite_time<T: Real>(
    weights: &FtWeights<T>,
    gbar0: &[T],
    test: &RankTest<T>,
) -> Result<FiniteTimeRun<T>> {
    let n = weights.n();
    let iterates = iterate(weights, gbar0, rounds_for(n))?;
    let mut defects = Vec::with_capacity(n);
    let mut averages = Vec::with_capacity(n);
    for i in 0..n {
        let gbar = iterates.gbar_of(i);
        let g = iterates.g_of(i);
        let defect = find_defect(&gbar, &g, test)?;
        averages.push(kernel_average_latest(&gbar, &g, &defect)?);
        defects.push(defect);
    }
    Ok(FiniteTimeRun {
        iterates,
        defects,
        averages,
    })
}

/// `N·C_a - P_k,max / s_k`: the informed agent's view of `Σ_{i≠k} P_i,max / s_i`.
pub fn sum_excluding_k<T: Real>(c_a: T, n: usize, p_k_max: T, s_k: T) -> Result<T> {
    if !(s_k > T::zero()) {
        return Err(Error::InvalidParameter("estimate must be positive".into()));
    }
    Ok(T::from_count(n) * c_a - p_k_max / s_k)
}

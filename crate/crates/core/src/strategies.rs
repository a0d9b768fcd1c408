//! Power command generation.
//!
//! Every agent other than the informed one commands its proportional share
//! `P_i = P_L·P_i,max / s_i` from its own estimate. The strategies differ only
//! in what the informed agent `k` does while the estimates are converging:
//!
//! | strategy          | `P_k`                                   |
//! |-------------------|-----------------------------------------|
//! | `strategy1`       | `P_L·(P_k,max + δ) / s_k`               |
//! | `strategy2`       | `P_L·(P_k,max + δ) / P̃_T`               |
//! | `strategy3`       | `P_L·(P_k,max + s_k − P_T) / s_k`       |
//! | `transient_match` | `P_L·P'_k,max / s_k`, `P'_k,max = s_k·(1 − Σ_{i≠k} P_i,max/s_i)` |
//!
//! The transient-match rule makes the delivered total equal the load at every
//! instant; the sum it needs comes from the finite-time average consensus.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::{sum, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Strategy1,
    Strategy2,
    Strategy3,
    TransientMatch,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Strategy1,
        Strategy::Strategy2,
        Strategy::Strategy3,
        Strategy::TransientMatch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Strategy1 => "strategy1",
            Strategy::Strategy2 => "strategy2",
            Strategy::Strategy3 => "strategy3",
            Strategy::TransientMatch => "transient_match",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy '{s}'")))
    }
}

/// A capacity change `δ` at agent `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation<T> {
    pub k: usize,
    pub delta: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MicrogridModel<T> {
    capacities: Vec<T>,
    p_t: T,
    p_l: T,
    perturbation: Option<Perturbation<T>>,
}

impl<T: Real> MicrogridModel<T> {
    pub fn new(capacities: Vec<T>, p_l: T) -> Result<Self> {
        if capacities.is_empty() {
            return Err(Error::Empty);
        }
        if capacities
            .iter()
            .any(|&c| !(c > T::zero()) || !c.is_finite())
        {
            return Err(Error::InvalidParameter(
                "capacities must be positive".into(),
            ));
        }
        let p_t = sum(&capacities);
        let model = Self {
            capacities,
            p_t,
            p_l,
            perturbation: None,
        };
        model.check_load(p_l)?;
        Ok(model)
    }

    fn check_load(&self, p_l: T) -> Result<()> {
        if !(p_l > T::zero()) {
            return Err(Error::InvalidParameter("load must be positive".into()));
        }
        if !(p_l < self.p_t) {
            return Err(Error::LoadExceedsCapacity);
        }
        Ok(())
    }

    /// Returns the model with agent `k`'s capacity changed by `delta`.
    pub fn with_perturbation(mut self, k: usize, delta: T) -> Result<Self> {
        self.perturb(k, delta)?;
        Ok(self)
    }

    /// Records a new capacity change; the previous one (if any) is committed first.
    pub fn perturb(&mut self, k: usize, delta: T) -> Result<()> {
        if k >= self.n() {
            return Err(Error::BadIndex {
                index: k,
                n: self.n(),
            });
        }
        self.commit_perturbation();
        if !(self.capacities[k] + delta > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "capacity of agent {} would not stay positive",
                k + 1
            )));
        }
        self.perturbation = Some(Perturbation { k, delta });
        Ok(())
    }

    /// Folds the pending change into the capacities and the total.
    pub fn commit_perturbation(&mut self) {
        if let Some(Perturbation { k, delta }) = self.perturbation.take() {
            self.capacities[k] = self.capacities[k] + delta;
            self.p_t = sum(&self.capacities);
        }
    }

    pub fn set_load(&mut self, p_l: T) -> Result<()> {
        self.check_load(p_l)?;
        self.p_l = p_l;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.capacities.len()
    }

    /// Capacities before the pending change.
    pub fn capacities(&self) -> &[T] {
        &self.capacities
    }

    /// Total capacity before the pending change.
    pub fn p_t(&self) -> T {
        self.p_t
    }

    pub fn p_l(&self) -> T {
        self.p_l
    }

    pub fn perturbation(&self) -> Option<Perturbation<T>> {
        self.perturbation
    }

    /// `P_T + δ`.
    pub fn p_tilde_t(&self) -> T {
        self.p_t + self.perturbation.map_or(T::zero(), |p| p.delta)
    }

    /// Capacity of agent `i` after the pending change.
    pub fn updated_capacity(&self, i: usize) -> T {
        match self.perturbation {
            Some(Perturbation { k, delta }) if k == i => self.capacities[i] + delta,
            _ => self.capacities[i],
        }
    }

    /// Estimates at or below this value abort command evaluation.
    pub fn estimate_floor(&self) -> T {
        self.p_l.max(T::lit(1e-9) * self.p_t)
    }

    /// What the informed agent knows, or `None` without a pending change.
    pub fn informed_view(&self, s_k: T) -> Option<InformedView<T>> {
        self.perturbation
            .map(|Perturbation { k, delta }| InformedView {
                agent: k,
                p_l: self.p_l,
                s_k,
                p_k_max: self.capacities[k],
                delta,
                p_t: self.p_t,
                floor: self.estimate_floor(),
            })
    }
}

/// Commanded powers with their total and mismatch against the load.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerCommand<T> {
    pub p: Vec<T>,
    pub p_o: T,
    pub e: T,
}

impl<T: Real> PowerCommand<T> {
    pub fn from_powers(p: Vec<T>, p_l: T) -> Self {
        let p_o = sum(&p);
        Self {
            p,
            p_o,
            e: p_o - p_l,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransientMatchState<T> {
    /// Auxiliary capacity `P'_k,max` the informed agent dispatches against.
    pub p_k_max_prime: T,
}

/// `r = P_L / P_T`.
pub fn share_ratio<T: Real>(p_l: T, p_t: T) -> Result<T> {
    if !(p_t > T::zero()) {
        return Err(Error::InvalidParameter(
            "total capacity must be positive".into(),
        ));
    }
    Ok(p_l / p_t)
}

fn guard<T: Real>(agent: usize, s: T, floor: T) -> Result<()> {
    if s > floor {
        Ok(())
    } else {
        Err(Error::EstimateBelowLoad { agent })
    }
}

/// Proportional command of a non-informed agent; uses only its own data.
pub fn follower_command<T: Real>(agent: usize, p_l: T, s_i: T, p_i_max: T, floor: T) -> Result<T> {
    guard(agent, s_i, floor)?;
    Ok(p_l * p_i_max / s_i)
}

/// Private information of the informed agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InformedView<T> {
    pub agent: usize,
    pub p_l: T,
    pub s_k: T,
    /// Own capacity before the change.
    pub p_k_max: T,
    pub delta: T,
    /// Total capacity before the change.
    pub p_t: T,
    pub floor: T,
}

impl<T: Real> InformedView<T> {
    pub fn p_tilde_t(&self) -> T {
        self.p_t + self.delta
    }
}

/// Command of the informed agent. `sum_excl_k` is required for
/// [`Strategy::TransientMatch`] and ignored otherwise.
pub fn informed_command<T: Real>(
    strategy: Strategy,
    view: &InformedView<T>,
    sum_excl_k: Option<T>,
) -> Result<(T, Option<TransientMatchState<T>>)> {
    let InformedView {
        agent,
        p_l,
        s_k,
        p_k_max,
        delta,
        p_t,
        floor,
    } = *view;
    guard(agent, s_k, floor)?;
    let (p, state) = match strategy {
        Strategy::Strategy1 => (p_l * (p_k_max + delta) / s_k, None),
        Strategy::Strategy2 => (p_l * (p_k_max + delta) / view.p_tilde_t(), None),
        Strategy::Strategy3 => (p_l * (p_k_max + s_k - p_t) / s_k, None),
        Strategy::TransientMatch => {
            let rest = sum_excl_k.ok_or_else(|| {
                Error::InvalidParameter("transient match needs the finite-time sum".into())
            })?;
            let p_prime = s_k * (T::one() - rest);
            (
                p_l * p_prime / s_k,
                Some(TransientMatchState {
                    p_k_max_prime: p_prime,
                }),
            )
        }
    };
    if p < T::zero() {
        log::warn!("agent {} commanded negative power {}", agent + 1, p);
    }
    Ok((p, state))
}

fn dispatch<T: Real>(
    strategy: Strategy,
    model: &MicrogridModel<T>,
    s: &[T],
    sum_excl_k: Option<T>,
) -> Result<(PowerCommand<T>, Option<TransientMatchState<T>>)> {
    if s.len() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            found: s.len(),
        });
    }
    let floor = model.estimate_floor();
    let informed = model.perturbation().map(|p| p.k);
    let mut state = None;
    let mut p = Vec::with_capacity(model.n());
    for (i, &s_i) in s.iter().enumerate() {
        if Some(i) == informed {
            let view = model.informed_view(s_i).expect("perturbation present");
            let (p_k, st) = informed_command(strategy, &view, sum_excl_k)?;
            state = st;
            p.push(p_k);
        } else {
            p.push(follower_command(
                i,
                model.p_l(),
                s_i,
                model.capacities()[i],
                floor,
            )?);
        }
    }
    Ok((PowerCommand::from_powers(p, model.p_l()), state))
}

pub fn strategy1<T: Real>(model: &MicrogridModel<T>, s: &[T]) -> Result<PowerCommand<T>> {
    dispatch(Strategy::Strategy1, model, s, None).map(|(c, _)| c)
}

pub fn strategy2<T: Real>(model: &MicrogridModel<T>, s: &[T]) -> Result<PowerCommand<T>> {
    dispatch(Strategy::Strategy2, model, s, None).map(|(c, _)| c)
}

pub fn strategy3<T: Real>(model: &MicrogridModel<T>, s: &[T]) -> Result<PowerCommand<T>> {
    dispatch(Strategy::Strategy3, model, s, None).map(|(c, _)| c)
}

/// Transient-match commands given the informed agent's `Σ_{i≠k} P_i,max / s_i`.
///
/// Without a pending change there is nothing to modulate and the state is `None`.
pub fn transient_match<T: Real>(
    model: &MicrogridModel<T>,
    s: &[T],
    sum_excl_k: T,
) -> Result<(PowerCommand<T>, Option<TransientMatchState<T>>)> {
    dispatch(Strategy::TransientMatch, model, s, Some(sum_excl_k))
}

/// Dispatches any strategy; `sum_excl_k` only matters for transient match.
pub fn evaluate<T: Real>(
    strategy: Strategy,
    model: &MicrogridModel<T>,
    s: &[T],
    sum_excl_k: Option<T>,
) -> Result<(PowerCommand<T>, Option<TransientMatchState<T>>)> {
    dispatch(strategy, model, s, sum_excl_k)
}

/// Mismatch `E(t₀)` right at the event and, where derived, its slope `Ė(t₀)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialError<T> {
    pub e0: T,
    /// `None` where no closed form is available (strategies 1 and 2).
    pub edot0: Option<T>,
}

/// Closed-form mismatch at the event instant for gain `h`.
pub fn initial_error_oracle<T: Real>(
    strategy: Strategy,
    model: &MicrogridModel<T>,
    h: T,
) -> InitialError<T> {
    let Some(Perturbation { k, delta }) = model.perturbation() else {
        return InitialError {
            e0: T::zero(),
            edot0: Some(T::zero()),
        };
    };
    let p_l = model.p_l();
    let p_t = model.p_t();
    let rest = p_t - model.capacities()[k];
    match strategy {
        Strategy::Strategy1 => InitialError {
            e0: p_l * delta / p_t,
            edot0: None,
        },
        Strategy::Strategy2 => InitialError {
            e0: p_l * delta * rest / (p_t * (p_t + delta)),
            edot0: None,
        },
        Strategy::Strategy3 => InitialError {
            e0: T::zero(),
            edot0: Some(p_l * h * delta * rest / (p_t * p_t)),
        },
        Strategy::TransientMatch => InitialError {
            e0: T::zero(),
            edot0: Some(T::zero()),
        },
    }
}

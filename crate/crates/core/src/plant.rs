//! Physical-layer stand-in turning power commands into delivered power.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::strategies::PowerCommand;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlantMode<T> {
    /// Delivers the command immediately.
    Ideal,
    /// Tracks the command with time constant `tau`.
    FirstOrder { tau: T },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantConfig<T> {
    pub mode: PlantMode<T>,
    /// Fraction `ρ ∈ [0, 0.05]` of the command lost before delivery.
    pub loss_fraction: T,
}

impl<T: Real> Default for PlantConfig<T> {
    fn default() -> Self {
        Self {
            mode: PlantMode::Ideal,
            loss_fraction: T::zero(),
        }
    }
}

impl<T: Real> PlantConfig<T> {
    pub fn new(mode: PlantMode<T>, loss_fraction: T) -> Result<Self> {
        let cfg = Self {
            mode,
            loss_fraction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss_fraction >= T::zero() && self.loss_fraction <= T::lit(0.05)) {
            return Err(Error::InvalidParameter(
                "loss fraction must lie in [0, 0.05]".into(),
            ));
        }
        if let PlantMode::FirstOrder { tau } = self.mode {
            if !(tau > T::zero()) {
                return Err(Error::InvalidParameter(
                    "plant time constant must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Errors unless `dt < τ/2` for a lagged plant.
    pub fn check_step(&self, dt: T) -> Result<()> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        match self.mode {
            PlantMode::FirstOrder { tau } if !(dt < tau / T::lit(2.0)) => {
                Err(Error::UnstableStep {
                    dt: dt.to_f64().unwrap_or(f64::NAN),
                    limit: (tau / T::lit(2.0)).to_f64().unwrap_or(f64::NAN),
                })
            }
            _ => Ok(()),
        }
    }

    /// What a lagged plant starts from when it has been holding `cmd` forever.
    pub fn steady_state(&self, cmd: &[T]) -> Vec<T> {
        let keep = T::one() - self.loss_fraction;
        cmd.iter().map(|&p| keep * p).collect()
    }
}

/// Delivered power after one step of length `dt`.
pub fn deliver<T: Real>(
    cmd: &PowerCommand<T>,
    cfg: &PlantConfig<T>,
    prev_delivered: &[T],
    dt: T,
) -> Result<Vec<T>> {
    let target = cfg.steady_state(&cmd.p);
    match cfg.mode {
        PlantMode::Ideal => Ok(target),
        PlantMode::FirstOrder { tau } => {
            if prev_delivered.len() != target.len() {
                return Err(Error::DimensionMismatch {
                    expected: target.len(),
                    found: prev_delivered.len(),
                });
            }
            let gain = dt / tau;
            Ok(prev_delivered
                .iter()
                .zip(&target)
                .map(|(&d, &t)| d + gain * (t - d))
                .collect())
        }
    }
}

//! Failure probabilities, the noisy observation channel, and treatment
//! utility functions.
//!
//! An agent with per-round failure probability `p` emits a visible failure
//! signal each round with probability `ptilde = 1 - (1 - p)^gamma`. The
//! exponent `gamma >= 1` controls how much more often near-failures are
//! seen than actual failures. Utility functions score the value of treating
//! an agent at time `t` given its failure probability, over a fixed horizon.

use crate::error::{domain, Result};

/// A per-round failure probability, validated to lie in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FailureProbability(f64);

impl FailureProbability {
    /// Validates that `p` is finite and lies in `[0, 1]`.
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(domain(format!(
                "failure probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(FailureProbability(p))
    }

    /// The underlying probability.
    pub fn value(self) -> f64 {
        self.0
    }
}

/// The observation channel mapping a failure probability `p` to the
/// probability `1 - (1 - p)^gamma` of emitting a visible signal per round.
#[derive(Clone, Copy, Debug)]
pub struct ObservationModel {
    gamma: f64,
}

impl ObservationModel {
    /// Builds a channel with signal exponent `gamma >= 1`.
    pub fn new(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma < 1.0 {
            return Err(domain(format!(
                "signal exponent must be finite and at least 1, got {gamma}"
            )));
        }
        Ok(ObservationModel { gamma })
    }

    /// The signal exponent.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Signal probability `1 - (1 - p)^gamma`, computed as
    /// `-expm1(gamma * ln_1p(-p))` so that values near 0 and 1 keep full
    /// relative precision.
    pub fn ptilde(&self, p: f64) -> f64 {
        -f64::exp_m1(self.gamma * f64::ln_1p(-p))
    }

    /// `(1 - p)^gamma`, the per-round probability of staying silent.
    pub fn silence(&self, p: f64) -> f64 {
        f64::exp(self.gamma * f64::ln_1p(-p))
    }

    /// The ratio `ptilde(p) / p`, extended continuously to `gamma` at
    /// `p = 0`. It is smooth on `[0, 1]` and decreases from `gamma` to 1.
    pub fn signal_ratio(&self, p: f64) -> f64 {
        if p <= 0.0 {
            self.gamma
        } else {
            self.ptilde(p) / p
        }
    }
}

/// Signal probability for a validated failure probability.
pub fn ptilde(p: FailureProbability, model: &ObservationModel) -> f64 {
    model.ptilde(p.value())
}

/// The four supported treatment effect families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UtilityKind {
    /// Treatment removes all remaining failure risk.
    FullyEffective,
    /// Treatment removes all remaining risk with probability `success`,
    /// and does nothing otherwise.
    RiskyProcedure {
        /// Success probability in `(0, 1]`.
        success: f64,
    },
    /// Treatment is worth a fixed fraction of the averted risk.
    PartialSuccess {
        /// Value fraction in `(0, 1]`.
        fraction: f64,
    },
    /// Treatment divides the failure probability by `factor`.
    RiskReduction {
        /// Risk divisor, strictly greater than 1.
        factor: f64,
    },
}

/// Multiplicative decay constants `(lambda1, lambda2)` bounding how fast a
/// utility function can shrink from one round to the next.
#[derive(Clone, Copy, Debug)]
pub struct DecayingConstants {
    /// Lower constant: `u(t, p) - (1 - p) u(t + 1, p) >= lambda1 * p`.
    pub lambda1: f64,
    /// Upper constant: the slope of `u` in `p` is controlled by
    /// `(lambda2 - u)` times the slope at the origin.
    pub lambda2: f64,
}

/// Booleans summarizing the shape of a utility function on a grid.
#[derive(Clone, Copy, Debug)]
pub struct ShapeReport {
    /// `u(t, 0) = 0` for every valid `t`.
    pub zero_at_origin: bool,
    /// `u(t, p)` is nondecreasing in `p` for every valid `t`.
    pub nondecreasing_in_p: bool,
    /// `u(t, p)` is nonincreasing in `t` for every `p`.
    pub nonincreasing_in_t: bool,
    /// `u(t, p)` is concave in `p` for every valid `t`.
    pub concave_in_p: bool,
}

/// A treatment utility over a fixed decision horizon.
///
/// `eval(t, p)` is the expected benefit of treating an agent with failure
/// probability `p` at round `t`, measured over the `horizon - t` rounds it
/// would otherwise still face.
#[derive(Clone, Debug)]
pub struct UtilityFunction {
    kind: UtilityKind,
    horizon: u32,
}

impl UtilityFunction {
    /// Builds a utility function, validating the kind parameters and
    /// requiring `horizon >= 2`.
    pub fn new(kind: UtilityKind, horizon: u32) -> Result<Self> {
        if horizon < 2 {
            return Err(domain(format!(
                "horizon must be at least 2, got {horizon}"
            )));
        }
        match kind {
            UtilityKind::FullyEffective => {}
            UtilityKind::RiskyProcedure { success } => {
                if !success.is_finite() || success <= 0.0 || success > 1.0 {
                    return Err(domain(format!(
                        "success probability must lie in (0, 1], got {success}"
                    )));
                }
            }
            UtilityKind::PartialSuccess { fraction } => {
                if !fraction.is_finite() || fraction <= 0.0 || fraction > 1.0 {
                    return Err(domain(format!(
                        "value fraction must lie in (0, 1], got {fraction}"
                    )));
                }
            }
            UtilityKind::RiskReduction { factor } => {
                if !factor.is_finite() || factor <= 1.0 {
                    return Err(domain(format!(
                        "risk divisor must be greater than 1, got {factor}"
                    )));
                }
            }
        }
        Ok(UtilityFunction { kind, horizon })
    }

    /// The effect family.
    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    /// The decision horizon.
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    fn check_round(&self, t: u32) -> Result<()> {
        if t < 1 || t > self.horizon {
            return Err(domain(format!(
                "round {t} outside horizon 1..={}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Expected benefit of treating at round `t` an agent with failure
    /// probability `p`, with `1 <= t <= horizon` and `p` in `[0, 1]`.
    pub fn eval(&self, t: u32, p: f64) -> Result<f64> {
        self.check_round(t)?;
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(domain(format!(
                "failure probability must lie in [0, 1], got {p}"
            )));
        }
        let n = (self.horizon - t) as i32;
        let survive = (1.0 - p).powi(n);
        Ok(match self.kind {
            UtilityKind::FullyEffective => 1.0 - survive,
            UtilityKind::RiskyProcedure { success } => success * (1.0 - survive),
            UtilityKind::PartialSuccess { fraction } => fraction * (1.0 - survive),
            UtilityKind::RiskReduction { factor } => {
                (1.0 - p / factor).powi(n) - survive
            }
        })
    }

    /// Derivative of `eval(t, .)` at `p = 0`.
    pub fn deriv_at_zero(&self, t: u32) -> Result<f64> {
        self.check_round(t)?;
        let n = (self.horizon - t) as f64;
        Ok(match self.kind {
            UtilityKind::FullyEffective => n,
            UtilityKind::RiskyProcedure { success } => success * n,
            UtilityKind::PartialSuccess { fraction } => fraction * n,
            UtilityKind::RiskReduction { factor } => n * (1.0 - 1.0 / factor),
        })
    }

    /// Decay constants at round `t`, valid for `1 <= t < horizon`.
    pub fn decaying_constants(&self, t: u32) -> Result<DecayingConstants> {
        if t < 1 || t >= self.horizon {
            return Err(domain(format!(
                "decay constants need a round in 1..{}, got {t}",
                self.horizon
            )));
        }
        Ok(match self.kind {
            UtilityKind::FullyEffective => DecayingConstants {
                lambda1: 1.0,
                lambda2: 1.0,
            },
            UtilityKind::RiskyProcedure { success } => DecayingConstants {
                lambda1: success,
                lambda2: success,
            },
            UtilityKind::PartialSuccess { fraction } => DecayingConstants {
                lambda1: fraction,
                lambda2: 1.0,
            },
            UtilityKind::RiskReduction { factor } => DecayingConstants {
                lambda1: (1.0 - 1.0 / factor).powi((self.horizon - t) as i32),
                lambda2: 1.0,
            },
        })
    }

    /// Evaluates shape properties on an `n`-point grid in `p` for every
    /// round, with a small tolerance for floating-point noise.
    pub fn shape_report(&self, n: usize) -> ShapeReport {
        let n = n.max(3);
        let tol = 1e-12;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let mut zero_at_origin = true;
        let mut nondecreasing_in_p = true;
        let mut nonincreasing_in_t = true;
        let mut concave_in_p = true;
        let mut prev_row: Option<Vec<f64>> = None;
        for t in 1..=self.horizon {
            let row: Vec<f64> = grid
                .iter()
                .map(|&p| self.eval(t, p).expect("grid point in range"))
                .collect();
            if row[0].abs() > tol {
                zero_at_origin = false;
            }
            for w in row.windows(2) {
                if w[1] < w[0] - tol {
                    nondecreasing_in_p = false;
                }
            }
            for w in row.windows(3) {
                if w[2] - 2.0 * w[1] + w[0] > tol {
                    concave_in_p = false;
                }
            }
            if let Some(prev) = &prev_row {
                for (now, before) in row.iter().zip(prev.iter()) {
                    if *now > *before + tol {
                        nonincreasing_in_t = false;
                    }
                }
            }
            prev_row = Some(row);
        }
        ShapeReport {
            zero_at_origin,
            nondecreasing_in_p,
            nonincreasing_in_t,
            concave_in_p,
        }
    }
}

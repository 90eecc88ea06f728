//! One-shot treatment planning: spend the whole budget at a single round.
//!
//! The planner ranks cohorts by signal count, treats from the top until the
//! budget runs out, and scores the result with the engine's conditional
//! utilities. Companion routines give closed-form guidance: the sign of the
//! gain from waiting one more round, an upper bound on the optimal start
//! round, an upper bound on the treated threshold, and a sufficient
//! condition for deferral to keep improving welfare.

use crate::dynamics::CohortEngine;
use crate::error::{domain, Result};
use crate::model::UtilityFunction;

/// A treatment budget as a fraction of the initial population, in `(0, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct BudgetSpec {
    fraction: f64,
}

impl BudgetSpec {
    /// Validates that the fraction lies in `(0, 1]`.
    pub fn new(fraction: f64) -> Result<Self> {
        if !fraction.is_finite() || fraction <= 0.0 || fraction > 1.0 {
            return Err(domain(format!(
                "budget fraction must lie in (0, 1], got {fraction}"
            )));
        }
        Ok(BudgetSpec { fraction })
    }

    /// The budget fraction.
    pub fn fraction(&self) -> f64 {
        self.fraction
    }
}

/// Outcome of spending the whole budget at one round.
#[derive(Clone, Debug)]
pub struct OneTimeResult {
    /// The round treated.
    pub t: u32,
    /// Welfare delivered per initial agent.
    pub welfare_per_capita: f64,
    /// Lowest signal count that received any treatment.
    pub threshold_k: u32,
    /// Fraction of the threshold cohort treated (1.0 when it was fully
    /// covered).
    pub partial_fraction: f64,
    /// Mass actually treated; below the budget only when the active
    /// population ran out.
    pub treated_mass: f64,
}

/// Treats the highest-signal cohorts at round `t` until the budget is
/// exhausted and reports the welfare delivered.
pub fn one_time_welfare(
    engine: &CohortEngine,
    budget: &BudgetSpec,
    t: u32,
) -> Result<OneTimeResult> {
    let horizon = engine.horizon();
    if t < 1 || t > horizon {
        return Err(domain(format!(
            "treatment round {t} outside horizon {horizon}"
        )));
    }
    let mut remaining = budget.fraction();
    let mut welfare = 0.0;
    let mut threshold_k = 0u32;
    let mut partial_fraction = 0.0;
    for k in (0..=t).rev() {
        if remaining <= 0.0 {
            break;
        }
        let cell = engine.stats(t, k)?;
        if cell.mass <= 0.0 {
            continue;
        }
        let take = remaining.min(cell.mass);
        welfare += take * cell.utility;
        threshold_k = k;
        partial_fraction = take / cell.mass;
        remaining -= take;
    }
    Ok(OneTimeResult {
        t,
        welfare_per_capita: welfare,
        threshold_k,
        partial_fraction,
        treated_mass: budget.fraction() - remaining.max(0.0),
    })
}

/// The best single treatment round and the full sweep it was chosen from.
#[derive(Clone, Debug)]
pub struct BestOneTime {
    /// Earliest round achieving the maximum welfare.
    pub t_opt: u32,
    /// Per-round outcomes for rounds 1 through the horizon.
    pub results: Vec<OneTimeResult>,
}

/// Evaluates every treatment round and returns the earliest maximizer.
pub fn best_one_time(engine: &CohortEngine, budget: &BudgetSpec) -> Result<BestOneTime> {
    let mut results = Vec::with_capacity(engine.horizon() as usize);
    for t in 1..=engine.horizon() {
        results.push(one_time_welfare(engine, budget, t)?);
    }
    let mut t_opt = 1u32;
    let mut best = results[0].welfare_per_capita;
    for r in &results[1..] {
        if r.welfare_per_capita > best {
            best = r.welfare_per_capita;
            t_opt = r.t;
        }
    }
    Ok(BestOneTime { t_opt, results })
}

/// Sign of the welfare change from deferring a small-budget treatment from
/// round 1 to round 2 under a Beta(1, 1 + g) prior with a unit-exponent
/// channel: positive when `(g + 1)(horizon - 4) > 6`, negative when below,
/// zero on the boundary.
pub fn defer_one_step_sign(g: f64, horizon: u32) -> i32 {
    let value = (g + 1.0) * (f64::from(horizon) - 4.0) - 6.0;
    if value.abs() <= 1e-9 {
        0
    } else if value > 0.0 {
        1
    } else {
        -1
    }
}

/// Upper bound on the optimal one-shot start round for the fully effective
/// utility.
#[derive(Clone, Copy, Debug)]
pub struct TStarBound {
    /// The bound itself, in rounds.
    pub value: f64,
    /// True when the bound exceeds the horizon and carries no information.
    pub vacuous: bool,
}

/// Closed-form upper bound on the optimal one-shot treatment round for the
/// fully effective utility, given a prior whose density decays no faster
/// than level `g` and a channel exponent `gamma > 1`.
pub fn t_star_fully_effective(
    horizon: u32,
    g: f64,
    gamma: f64,
    budget: &BudgetSpec,
) -> Result<TStarBound> {
    if !gamma.is_finite() || gamma <= 1.0 {
        return Err(domain(format!(
            "the start-round bound needs a channel exponent above 1, got {gamma}"
        )));
    }
    if !g.is_finite() || g < 0.0 {
        return Err(domain(format!(
            "decay bound must be nonnegative, got {g}"
        )));
    }
    let warmup = (gamma + 1.0) * (1.0 / budget.fraction()).ln();
    let value = f64::from(horizon) / 2.0
        + (g / 4.0 + (gamma + 1.0 / gamma) / 4.0 + 1.0) * (warmup + 1.0);
    Ok(TStarBound {
        value,
        vacuous: value > f64::from(horizon),
    })
}

/// Upper bound `(gamma + 1) ln(1 / b)` on the signal threshold an optimal
/// one-shot policy can use.
pub fn threshold_upper_bound(gamma: f64, budget: &BudgetSpec) -> f64 {
    (gamma + 1.0) * (1.0 / budget.fraction()).ln()
}

/// Verdict of the deferral condition at one round.
#[derive(Clone, Copy, Debug)]
pub struct DeferralReport {
    /// Warm-up horizon `(gamma + 1) ln(1 / b)`: rounds before it defer
    /// unconditionally.
    pub warmup_t_star: f64,
    /// Whether deferring past round `t` cannot lose welfare.
    pub condition_holds: bool,
    /// Marginal value of information: slope of next round's utility at the
    /// origin.
    pub lhs: f64,
    /// Decay-adjusted cost of waiting.
    pub rhs: f64,
}

/// Sufficient condition for deferring treatment past round `t` under any
/// prior with decay level at most `g_bound` and channel exponent
/// `gamma > 1`. Valid for `1 <= t < horizon`.
pub fn general_deferral_condition(
    t: u32,
    gamma: f64,
    g_bound: f64,
    utility: &UtilityFunction,
    budget: &BudgetSpec,
) -> Result<DeferralReport> {
    if !gamma.is_finite() || gamma <= 1.0 {
        return Err(domain(format!(
            "the deferral condition needs a channel exponent above 1, got {gamma}"
        )));
    }
    if !g_bound.is_finite() || g_bound < 0.0 {
        return Err(domain(format!(
            "decay bound must be nonnegative, got {g_bound}"
        )));
    }
    let horizon = utility.horizon();
    if t < 1 || t >= horizon {
        return Err(domain(format!(
            "deferral round must lie in 1..{horizon}, got {t}"
        )));
    }
    let warmup = (gamma + 1.0) * (1.0 / budget.fraction()).ln();
    let lhs = utility.deriv_at_zero(t + 1)?;
    let constants = utility.decaying_constants(t.min(horizon - 1))?;
    let tf = f64::from(t);
    let rhs = if constants.lambda1 >= constants.lambda2 {
        let drag = (2.0 + gamma + 1.0 / gamma + g_bound) * (warmup + 1.0)
            / (2.0 * tf - warmup + 1.0);
        (constants.lambda1 / constants.lambda2) * (tf - warmup) / (1.0 + drag)
    } else {
        constants.lambda1 * (tf - warmup) / (warmup + 1.0)
    };
    let condition_holds = tf < warmup || lhs >= rhs;
    Ok(DeferralReport {
        warmup_t_star: warmup,
        condition_holds,
        lhs,
        rhs,
    })
}

//! Agent-level Monte Carlo counterpart of the continuum dynamics.
//!
//! Every random draw is produced by a counter-based generator keyed on
//! `(seed, agent, round, purpose)`, so results are reproducible bit for bit
//! regardless of evaluation order and two runs with the same seed agree
//! exactly. Treated agents are scored by replaying the failure draws they
//! would have faced untreated, which couples realized utility tightly to
//! the counterfactual and keeps comparison variance low.

use crate::density::{Prior, PriorForm};
use crate::dynamics::Convention;
use crate::error::{domain, Result};
use crate::model::{ObservationModel, UtilityFunction, UtilityKind};
use crate::one_time::BudgetSpec;
use crate::over_time::PolicySchedule;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::Distribution;

const PURPOSE_PRIOR: u64 = 0;
const PURPOSE_OBSERVE: u64 = 1;
const PURPOSE_FAIL: u64 = 2;
const PURPOSE_HOLD: u64 = 3;
const PURPOSE_PROCEDURE: u64 = 4;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed counter RNG: one independent uniform per (seed, agent, round,
/// purpose) tuple.
pub(crate) fn keyed_u64(seed: u64, agent: u64, round: u64, purpose: u64) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    h = mix(h.wrapping_add(agent.wrapping_mul(0xa24b_aed4_963e_e407)));
    h = mix(h ^ round.wrapping_mul(0x9fb2_1c65_1e98_df25));
    mix(h.wrapping_add(purpose))
}

/// Uniform draw in `[0, 1)` from the keyed generator.
pub(crate) fn keyed_unit(seed: u64, agent: u64, round: u64, purpose: u64) -> f64 {
    (keyed_u64(seed, agent, round, purpose) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A sampled population of agents with fixed failure probabilities.
pub struct AgentPool {
    probabilities: Vec<f64>,
    seed: u64,
}

impl AgentPool {
    /// Draws `n >= 1` failure probabilities from the prior, reproducibly
    /// from the seed.
    pub fn sample(prior: &Prior, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(domain("agent pool must contain at least one agent"));
        }
        let probabilities = match prior.form() {
            PriorForm::Beta { alpha, beta } => {
                let dist = rand_distr::Beta::new(*alpha, *beta)
                    .map_err(|e| domain(format!("Beta sampler: {e}")))?;
                (0..n)
                    .map(|i| {
                        let mut rng = StdRng::seed_from_u64(keyed_u64(
                            seed,
                            i as u64,
                            0,
                            PURPOSE_PRIOR,
                        ));
                        dist.sample(&mut rng)
                    })
                    .collect()
            }
            PriorForm::Grid { points, weights } => {
                let mut cdf = Vec::with_capacity(weights.len());
                let mut acc = 0.0;
                for &w in weights {
                    acc += w;
                    cdf.push(acc);
                }
                (0..n)
                    .map(|i| {
                        let u = keyed_unit(seed, i as u64, 0, PURPOSE_PRIOR);
                        let idx = cdf.partition_point(|&c| c < u).min(points.len() - 1);
                        points[idx]
                    })
                    .collect()
            }
        };
        Ok(AgentPool {
            probabilities,
            seed,
        })
    }

    /// Number of agents.
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    /// Whether the pool is empty (never true for a constructed pool).
    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// The seed the pool and all its simulations derive their draws from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The sampled failure probabilities, in agent order.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// Cross-section of one simulated round.
#[derive(Clone, Debug)]
pub struct StepRecord {
    /// Round index, starting at 1.
    pub t: u32,
    /// `active_by_count[k]` counts untreated active agents with `k`
    /// signals, recorded after this round's observation and before
    /// treatment.
    pub active_by_count: Vec<u64>,
    /// Agents that failed during this round.
    pub failures: u64,
    /// Agents treated during this round.
    pub treated: u64,
}

/// Full record of a Monte Carlo run.
#[derive(Clone, Debug)]
pub struct McRun {
    /// One record per round from 1 to the horizon.
    pub records: Vec<StepRecord>,
}

/// Replays the failure draws an agent would face over `rounds` and reports
/// whether it would fail at least once.
fn would_fail(seed: u64, agent: u64, p: f64, rounds: std::ops::Range<u32>) -> bool {
    for round in rounds {
        if keyed_unit(seed, agent, round as u64, PURPOSE_FAIL) < p {
            return true;
        }
    }
    false
}

/// Realized utility of treating `agent` at round `t`: the utility actually
/// delivered given the failure draws the agent would have seen untreated.
fn realized_utility(
    seed: u64,
    agent: u64,
    p: f64,
    t: u32,
    utility: &UtilityFunction,
    convention: Convention,
) -> f64 {
    let horizon = utility.horizon();
    // Remaining failure draws the treatment can avert: with observation
    // first, the round-t draw has not happened yet; with survival first,
    // it already has.
    let rounds = match convention {
        Convention::ObserveFirst => t..horizon,
        Convention::SurviveFirst => (t + 1)..(horizon + 1),
    };
    match utility.kind() {
        UtilityKind::FullyEffective => {
            f64::from(would_fail(seed, agent, p, rounds) as u8)
        }
        UtilityKind::RiskyProcedure { success } => {
            if keyed_unit(seed, agent, 0, PURPOSE_PROCEDURE) < success {
                f64::from(would_fail(seed, agent, p, rounds) as u8)
            } else {
                0.0
            }
        }
        UtilityKind::PartialSuccess { fraction } => {
            fraction * f64::from(would_fail(seed, agent, p, rounds) as u8)
        }
        UtilityKind::RiskReduction { factor } => {
            let reduced = p / factor;
            let mut fail_full = false;
            let mut fail_reduced = false;
            for round in rounds {
                let u = keyed_unit(seed, agent, round as u64, PURPOSE_FAIL);
                fail_full |= u < p;
                fail_reduced |= u < reduced;
            }
            f64::from(fail_full as u8) - f64::from(fail_reduced as u8)
        }
    }
}

/// Core agent loop shared by the simulation entry points. Returns the sum
/// of realized utilities over treated agents.
fn run_agents(
    pool: &AgentPool,
    model: &ObservationModel,
    utility: &UtilityFunction,
    policy: Option<&PolicySchedule>,
    convention: Convention,
    records: &mut [StepRecord],
) -> f64 {
    let seed = pool.seed;
    let horizon = utility.horizon();
    let mut total_utility = 0.0;
    for (i, &p) in pool.probabilities.iter().enumerate() {
        let agent = i as u64;
        let pt = model.ptilde(p);
        let mut y: u32 = 0;
        for t in 1..=horizon {
            if convention == Convention::SurviveFirst
                && keyed_unit(seed, agent, t as u64, PURPOSE_FAIL) < p
            {
                records[(t - 1) as usize].failures += 1;
                break;
            }
            if keyed_unit(seed, agent, t as u64, PURPOSE_OBSERVE) < pt {
                y += 1;
            }
            records[(t - 1) as usize].active_by_count[y as usize] += 1;
            if let Some(schedule) = policy {
                let threshold = schedule
                    .q
                    .get((t - 1) as usize)
                    .copied()
                    .unwrap_or(u32::MAX);
                if y >= threshold {
                    let held_back = t == schedule.t_hat
                        && y == threshold
                        && keyed_unit(seed, agent, 0, PURPOSE_HOLD) < schedule.rho;
                    if !held_back {
                        records[(t - 1) as usize].treated += 1;
                        total_utility +=
                            realized_utility(seed, agent, p, t, utility, convention);
                        break;
                    }
                }
            }
            if convention == Convention::ObserveFirst
                && keyed_unit(seed, agent, t as u64, PURPOSE_FAIL) < p
            {
                records[(t - 1) as usize].failures += 1;
                break;
            }
        }
    }
    total_utility
}

fn empty_records(horizon: u32) -> Vec<StepRecord> {
    (1..=horizon)
        .map(|t| StepRecord {
            t,
            active_by_count: vec![0; t as usize + 1],
            failures: 0,
            treated: 0,
        })
        .collect()
}

/// Simulates every agent over the full horizon, optionally applying a
/// threshold treatment schedule, and returns per-round cross-sections.
pub fn mc_simulate(
    pool: &AgentPool,
    model: &ObservationModel,
    utility: &UtilityFunction,
    policy: Option<&PolicySchedule>,
    convention: Convention,
) -> McRun {
    let mut records = empty_records(utility.horizon());
    run_agents(pool, model, utility, policy, convention, &mut records);
    McRun { records }
}

/// Simulates an untreated population to round `t`, treats the
/// highest-signal agents up to the budget, and returns realized utility
/// per initial agent.
pub fn mc_one_time(
    pool: &AgentPool,
    model: &ObservationModel,
    utility: &UtilityFunction,
    budget: &BudgetSpec,
    t: u32,
    convention: Convention,
) -> Result<f64> {
    let horizon = utility.horizon();
    if t < 1 || t > horizon {
        return Err(domain(format!(
            "treatment round {t} outside horizon {horizon}"
        )));
    }
    let n = pool.len();
    let slots = (n as f64 * budget.fraction()).floor() as usize;
    if slots == 0 {
        return Err(domain(
            "budget covers less than one agent at this pool size",
        ));
    }
    let seed = pool.seed;

    // Signal counts of agents still active at round t, bucketed by count.
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); t as usize + 1];
    for (i, &p) in pool.probabilities.iter().enumerate() {
        let agent = i as u64;
        let pt = model.ptilde(p);
        let mut y: u32 = 0;
        let mut active = true;
        for round in 1..=t {
            if convention == Convention::SurviveFirst
                && keyed_unit(seed, agent, round as u64, PURPOSE_FAIL) < p
            {
                active = false;
                break;
            }
            if keyed_unit(seed, agent, round as u64, PURPOSE_OBSERVE) < pt {
                y += 1;
            }
            if convention == Convention::ObserveFirst
                && round < t
                && keyed_unit(seed, agent, round as u64, PURPOSE_FAIL) < p
            {
                active = false;
                break;
            }
        }
        if active {
            buckets[y as usize].push(i);
        }
    }

    let mut remaining = slots;
    let mut total = 0.0;
    for y in (0..buckets.len()).rev() {
        if remaining == 0 {
            break;
        }
        for &i in buckets[y].iter().take(remaining) {
            total += realized_utility(
                seed,
                i as u64,
                pool.probabilities[i],
                t,
                utility,
                convention,
            );
        }
        remaining = remaining.saturating_sub(buckets[y].len());
    }

    Ok(total / n as f64)
}

/// Monte Carlo estimate of a schedule's utility per capita: mean and
/// standard error over independent replications.
pub fn mc_policy_value(
    policy: &PolicySchedule,
    prior: &Prior,
    model: &ObservationModel,
    utility: &UtilityFunction,
    convention: Convention,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n == 0 || reps == 0 {
        return Err(domain("need at least one agent and one replication"));
    }
    if policy.q.len() != utility.horizon() as usize {
        return Err(domain(format!(
            "schedule covers {} rounds but the horizon is {}",
            policy.q.len(),
            utility.horizon()
        )));
    }
    let mut values = Vec::with_capacity(reps);
    for r in 0..reps {
        let rep_seed = mix(seed ^ 0x5851_f42d_4c95_7f2d_u64.wrapping_mul(r as u64 + 1));
        let pool = AgentPool::sample(prior, n, rep_seed)?;
        let mut records = empty_records(utility.horizon());
        let total = run_agents(&pool, model, utility, Some(policy), convention, &mut records);
        values.push(total / n as f64);
    }
    let mean = values.iter().sum::<f64>() / reps as f64;
    let stderr = if reps > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (reps - 1) as f64;
        (var / reps as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

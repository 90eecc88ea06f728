//! Threshold schedules that spread treatment over the horizon.
//!
//! A schedule treats every cohort at or above a signal threshold `q(t)`
//! each round. Thresholds are nondecreasing and rise by at most one per
//! round, except at one designated round `t_hat` where the threshold rise
//! is one higher and a fraction `rho` of the cohort sitting exactly at the
//! threshold is deferred instead of treated. Sweeping `rho` from 0 to 1
//! interpolates continuously between two adjacent pure threshold policies,
//! which lets a discrete search hit any budget exactly.

use crate::dynamics::{simulate_trajectory, CohortEngine, CohortTable};
use crate::error::{domain, Result};
use crate::one_time::BudgetSpec;

/// A randomized threshold schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySchedule {
    /// Round whose threshold cohort is randomized.
    pub t_hat: u32,
    /// Treatment thresholds by round; `q[i]` applies at round `i + 1`.
    pub q: Vec<u32>,
    /// Fraction of the round-`t_hat` threshold cohort that is deferred.
    pub rho: f64,
}

/// Enumerates every structurally valid `(t_hat, q)` pair for the horizon:
/// the first threshold is at most 2, each later round raises the threshold
/// by 0 or 1 (by 1 or 2 at `t_hat`), and no threshold exceeds the cohort
/// range of its round.
pub fn enumerate_schedules(horizon: u32) -> Vec<(u32, Vec<u32>)> {
    if horizon == 0 {
        return Vec::new();
    }
    let windows = (horizon - 1) as usize;
    let mut out = Vec::new();
    for t_hat in 1..=horizon {
        for first in 0..=2u32 {
            for bits in 0..(1u64 << windows) {
                let mut q = Vec::with_capacity(horizon as usize);
                q.push(first);
                for t in 1..horizon {
                    let extra = ((bits >> (t - 1)) & 1) as u32;
                    let inc = if t == t_hat { 1 + extra } else { extra };
                    let cap = t + 2;
                    q.push((q[(t - 1) as usize] + inc).min(cap));
                }
                out.push((t_hat, q));
            }
        }
    }
    out
}

/// Checks the structural rules a schedule must satisfy: `t_hat` within the
/// horizon, `rho` in `[0, 1]`, first threshold at most 2, increments of 0
/// or 1 (1 or 2 at `t_hat`), and thresholds within each round's cohort
/// range.
pub fn verify_structure(schedule: &PolicySchedule) -> bool {
    let horizon = schedule.q.len() as u32;
    if horizon == 0 {
        return false;
    }
    if schedule.t_hat < 1 || schedule.t_hat > horizon {
        return false;
    }
    if !schedule.rho.is_finite() || !(0.0..=1.0).contains(&schedule.rho) {
        return false;
    }
    if schedule.q[0] > 2 {
        return false;
    }
    for t in 1..horizon {
        let prev = schedule.q[(t - 1) as usize];
        let now = schedule.q[t as usize];
        if now < prev {
            return false;
        }
        let inc = now - prev;
        let allowed = if t == schedule.t_hat {
            inc == 1 || inc == 2
        } else {
            inc <= 1
        };
        if !allowed {
            return false;
        }
        if now > t + 2 {
            return false;
        }
    }
    true
}

/// Evaluation of a schedule against the continuum dynamics.
#[derive(Clone, Debug)]
pub struct ScheduleOutcome {
    /// Total mass treated over the horizon.
    pub expenditure: f64,
    /// Welfare delivered per initial agent.
    pub utility_per_capita: f64,
    /// Mass treated at each round; index `i` is round `i + 1`.
    pub treated_by_time: Vec<f64>,
}

/// Mass-weighted mean treatment round of an outcome, or `None` when the
/// schedule treats nothing.
pub fn mean_treatment_time(outcome: &ScheduleOutcome) -> Option<f64> {
    let total: f64 = outcome.treated_by_time.iter().sum();
    if total > 0.0 {
        let weighted: f64 = outcome
            .treated_by_time
            .iter()
            .enumerate()
            .map(|(i, m)| (i + 1) as f64 * m)
            .sum();
        Some(weighted / total)
    } else {
        None
    }
}

/// Affine decomposition of a schedule's outcome in `rho`.
#[derive(Clone)]
struct ScheduleParts {
    e_max: f64,
    d_e: f64,
    util0: f64,
    dutil: f64,
    trace0: Vec<f64>,
    dtrace: Vec<f64>,
}

impl ScheduleParts {
    fn outcome(&self, rho: f64) -> ScheduleOutcome {
        ScheduleOutcome {
            expenditure: self.e_max - rho * self.d_e,
            utility_per_capita: self.util0 + rho * self.dutil,
            treated_by_time: self
                .trace0
                .iter()
                .zip(self.dtrace.iter())
                .map(|(a, b)| a + rho * b)
                .collect(),
        }
    }
}

fn mass_at(tables: &[CohortTable], t: u32, k: u32) -> f64 {
    let start = tables[0].t;
    if t < start {
        return 0.0;
    }
    tables
        .get((t - start) as usize)
        .map(|table| table.masses.get(k as usize).copied().unwrap_or(0.0))
        .unwrap_or(0.0)
}

fn schedule_parts(engine: &CohortEngine, t_hat: u32, q: &[u32]) -> Result<ScheduleParts> {
    let horizon = engine.horizon();
    let init = engine.initial();
    let trajectory = simulate_trajectory(engine, &init, q)?;
    let cell_utility = |t: u32, k: u32| -> f64 {
        engine.stats(t, k).map(|c| c.utility).unwrap_or(0.0)
    };

    // Treating at threshold 0 in round 1 also covers the cohort that
    // signaled immediately, which no threshold index reaches on its own.
    let bonus = if q[0] == 0 { init.masses[1] } else { 0.0 };

    let mut e_max = bonus;
    for t in 1..=horizon {
        e_max += mass_at(&trajectory.tables, t, q[(t - 1) as usize]);
    }

    let q_hat = q[(t_hat - 1) as usize];
    let m_hat = mass_at(&trajectory.tables, t_hat, q_hat);

    // Deferred branch: the held-back fraction of the t_hat threshold cohort
    // evolves under thresholds one notch higher at t_hat, and its later
    // treatments refund part of the expenditure.
    let mut d_e = 0.0;
    let mut deferred_tables: Option<Vec<CohortTable>> = None;
    if q_hat <= t_hat && m_hat > 0.0 {
        let mut deferred_init = CohortTable {
            t: t_hat,
            masses: vec![0.0; t_hat as usize + 1],
        };
        deferred_init.masses[q_hat as usize] = m_hat;
        let mut raised: Vec<u32> = q[(t_hat - 1) as usize..].to_vec();
        raised[0] += 1;
        let deferred = simulate_trajectory(engine, &deferred_init, &raised)?;
        let mut descendants = 0.0;
        for t in (t_hat + 1)..=horizon {
            descendants += mass_at(&deferred.tables, t, q[(t - 1) as usize]);
        }
        d_e = m_hat - descendants;
        deferred_tables = Some(deferred.tables);
    }

    let mut util0 = 0.0;
    let mut dutil = 0.0;
    let mut trace0 = vec![0.0; horizon as usize];
    let mut dtrace = vec![0.0; horizon as usize];
    if q[0] == 0 {
        util0 += bonus * cell_utility(1, 1);
        trace0[0] += bonus;
    }
    for t in 1..=horizon {
        let k = q[(t - 1) as usize];
        if k > t {
            continue;
        }
        let idx = (t - 1) as usize;
        if t == t_hat {
            let value = m_hat * cell_utility(t, k);
            util0 += value;
            dutil -= value;
            trace0[idx] += m_hat;
            dtrace[idx] -= m_hat;
        } else {
            let m = mass_at(&trajectory.tables, t, k);
            util0 += m * cell_utility(t, k);
            trace0[idx] += m;
            if t > t_hat {
                if let Some(tables) = &deferred_tables {
                    let dm = mass_at(tables, t, k);
                    dutil += dm * cell_utility(t, k);
                    dtrace[idx] += dm;
                }
            }
        }
    }

    Ok(ScheduleParts {
        e_max,
        d_e,
        util0,
        dutil,
        trace0,
        dtrace,
    })
}

fn validate_schedule(engine: &CohortEngine, schedule: &PolicySchedule) -> Result<()> {
    let horizon = engine.horizon();
    if schedule.q.len() != horizon as usize {
        return Err(domain(format!(
            "schedule covers {} rounds but the horizon is {horizon}",
            schedule.q.len()
        )));
    }
    if schedule.t_hat < 1 || schedule.t_hat > horizon {
        return Err(domain(format!(
            "randomized round {} outside horizon {horizon}",
            schedule.t_hat
        )));
    }
    if !schedule.rho.is_finite() || !(0.0..=1.0).contains(&schedule.rho) {
        return Err(domain(format!(
            "deferral fraction must lie in [0, 1], got {}",
            schedule.rho
        )));
    }
    for w in schedule.q.windows(2) {
        if w[1] < w[0] {
            return Err(domain("thresholds must be nondecreasing"));
        }
    }
    if schedule.q[0] > 2 {
        return Err(domain(format!(
            "first threshold must be at most 2, got {}",
            schedule.q[0]
        )));
    }
    for (i, &k) in schedule.q.iter().enumerate() {
        let t = i as u32 + 1;
        if k > t + 1 {
            return Err(domain(format!(
                "threshold {k} at round {t} exceeds cohort range"
            )));
        }
    }
    Ok(())
}

/// Evaluates a schedule against the continuum dynamics: expenditure,
/// welfare, and treated mass by round.
pub fn evaluate_schedule(
    engine: &CohortEngine,
    schedule: &PolicySchedule,
) -> Result<ScheduleOutcome> {
    validate_schedule(engine, schedule)?;
    let parts = schedule_parts(engine, schedule.t_hat, &schedule.q)?;
    Ok(parts.outcome(schedule.rho))
}

/// Result of the exact schedule search.
#[derive(Clone, Debug)]
pub struct SolveResult {
    /// The chosen schedule.
    pub schedule: PolicySchedule,
    /// Its continuum evaluation.
    pub outcome: ScheduleOutcome,
    /// True when the schedule spends the budget exactly; false only in the
    /// degenerate case where even treating everything cannot reach it.
    pub budget_exhausted: bool,
}

/// Searches every structurally valid schedule, tunes `rho` on each so the
/// expenditure matches the budget exactly, and returns the welfare
/// maximizer. Ties prefer earlier `t_hat`, then lexicographically smaller
/// thresholds, then smaller `rho`.
pub fn solve_optimal(engine: &CohortEngine, budget: &BudgetSpec) -> Result<SolveResult> {
    let target = budget.fraction();
    struct Candidate {
        t_hat: u32,
        q: Vec<u32>,
        rho: f64,
        utility: f64,
        parts: ScheduleParts,
    }
    let mut best: Option<Candidate> = None;
    let mut fallback: Option<Candidate> = None;

    for (t_hat, q) in enumerate_schedules(engine.horizon()) {
        let parts = schedule_parts(engine, t_hat, &q)?;

        if fallback
            .as_ref()
            .map(|c| parts.e_max > c.parts.e_max)
            .unwrap_or(true)
        {
            fallback = Some(Candidate {
                t_hat,
                q: q.clone(),
                rho: 0.0,
                utility: parts.util0,
                parts: parts.clone(),
            });
        }

        let rho = if parts.d_e > 1e-15 {
            (parts.e_max - target) / parts.d_e
        } else if (parts.e_max - target).abs() <= 1e-12 {
            0.0
        } else {
            continue;
        };
        if !(-1e-12..=1.0 + 1e-12).contains(&rho) {
            continue;
        }
        let rho = rho.clamp(0.0, 1.0);
        let utility = parts.util0 + rho * parts.dutil;

        let better = match &best {
            None => true,
            Some(current) => {
                if utility != current.utility {
                    utility > current.utility
                } else if t_hat != current.t_hat {
                    t_hat < current.t_hat
                } else if q != current.q {
                    q < current.q
                } else {
                    rho < current.rho
                }
            }
        };
        if better {
            best = Some(Candidate {
                t_hat,
                q,
                rho,
                utility,
                parts,
            });
        }
    }

    let (candidate, budget_exhausted) = match best {
        Some(c) => (c, true),
        None => (
            fallback.expect("enumeration is never empty"),
            false,
        ),
    };
    let outcome = candidate.parts.outcome(candidate.rho);
    Ok(SolveResult {
        schedule: PolicySchedule {
            t_hat: candidate.t_hat,
            q: candidate.q,
            rho: candidate.rho,
        },
        outcome,
        budget_exhausted,
    })
}

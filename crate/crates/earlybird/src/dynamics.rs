//! Deterministic continuum dynamics of the observed population.
//!
//! The population is tracked as a table of cohort masses indexed by signal
//! count. Each round, every cohort splits: a fraction fails and leaves, a
//! fraction survives silently, and a fraction survives while emitting a
//! signal (moving up one cohort). The engine precomputes, for every
//! reachable cohort, its mass, conditional failure rate, transition
//! fractions, and conditional treatment utility, so planners can evaluate
//! policies by simple mass bookkeeping.

use crate::density::{Prior, PriorForm};
use crate::error::{domain, Result};
use crate::model::{ObservationModel, UtilityFunction};
use crate::quad::{beta_multi_integral, binomial, ln_beta};

/// Order of failure and observation within a round.
///
/// `ObserveFirst` lets an agent signal in the same round it first becomes
/// observable, so a cohort at round `t` has survived `t - 1` failure draws.
/// `SurviveFirst` applies the failure draw before the observation, so the
/// same cohort has survived `t` draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// Observation precedes the failure draw in each round.
    ObserveFirst,
    /// The failure draw precedes observation in each round.
    SurviveFirst,
}

/// Population masses by signal count at a given round, as fractions of the
/// initial population.
#[derive(Clone, Debug, PartialEq)]
pub struct CohortTable {
    /// Round index, starting at 1.
    pub t: u32,
    /// `masses[k]` is the active mass with exactly `k` signals.
    pub masses: Vec<f64>,
}

/// Precomputed statistics of one cohort cell `(t, k)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CellStats {
    /// Active mass of the cell as a fraction of the initial population.
    pub mass: f64,
    /// Mean failure probability within the cell.
    pub mu: f64,
    /// Fraction of the cell that survives the round without a new signal.
    pub stay: f64,
    /// Fraction of the cell that survives the round and signals.
    pub up: f64,
    /// Mean treatment utility of the cell at its round.
    pub utility: f64,
}

struct CellDerived {
    stats: CellStats,
    risk_weighted_utility: f64,
}

fn survival_exponent(t: u32, convention: Convention) -> u32 {
    match convention {
        Convention::ObserveFirst => t - 1,
        Convention::SurviveFirst => t,
    }
}

/// Computes the six cell integrals for `(t, k)` under the given prior.
fn compute_cell(
    prior: &Prior,
    model: &ObservationModel,
    convention: Convention,
    utility: Option<(&UtilityFunction, u32)>,
    t: u32,
    k: u32,
) -> CellDerived {
    let s = survival_exponent(t, convention);
    let gamma = model.gamma();
    let coeff = binomial(t, k);
    let eval_u = |p: f64| -> f64 {
        match utility {
            Some((u, at)) => u.eval(at, p).unwrap_or(0.0),
            None => 0.0,
        }
    };
    let (raw, normalizer) = match prior.form() {
        PriorForm::Beta { alpha, beta } => {
            let a_eff = alpha + k as f64;
            let b_eff = beta + s as f64 + gamma * (t - k) as f64;
            let raw = beta_multi_integral(a_eff, b_eff, |p| {
                let ratio_k = if k == 0 {
                    1.0
                } else {
                    let pt = -f64::exp_m1(gamma * f64::ln_1p(-p));
                    let ratio = if p <= 0.0 { gamma } else { pt / p };
                    ratio.powi(k as i32)
                };
                let silent = f64::exp(gamma * f64::ln_1p(-p));
                let pt = 1.0 - silent;
                let u = eval_u(p);
                [
                    ratio_k,
                    ratio_k * p,
                    ratio_k * (1.0 - p) * silent,
                    ratio_k * (1.0 - p) * pt,
                    ratio_k * u,
                    ratio_k * p * u,
                ]
            });
            (raw, ln_beta(*alpha, *beta).exp())
        }
        PriorForm::Grid { points, weights } => {
            let mut raw = [0.0f64; 6];
            for (&x, &w) in points.iter().zip(weights.iter()) {
                let pt = model.ptilde(x);
                let silent = model.silence(x);
                let base = w
                    * (1.0 - x).powi(s as i32)
                    * pt.powi(k as i32)
                    * silent.powi((t - k) as i32);
                if base == 0.0 {
                    continue;
                }
                let u = eval_u(x);
                raw[0] += base;
                raw[1] += base * x;
                raw[2] += base * (1.0 - x) * silent;
                raw[3] += base * (1.0 - x) * pt;
                raw[4] += base * u;
                raw[5] += base * x * u;
            }
            (raw, 1.0)
        }
    };
    if !(raw[0] > 0.0) || !raw[0].is_finite() {
        return CellDerived {
            stats: CellStats::default(),
            risk_weighted_utility: 0.0,
        };
    }
    CellDerived {
        stats: CellStats {
            mass: coeff * raw[0] / normalizer,
            mu: raw[1] / raw[0],
            stay: raw[2] / raw[0],
            up: raw[3] / raw[0],
            utility: raw[4] / raw[0],
        },
        risk_weighted_utility: raw[5] / raw[0],
    }
}

/// The round-one cohort table implied by a prior: masses of the silent
/// and signaling cohorts after the first round's events.
pub fn initial_cohorts(
    prior: &Prior,
    model: &ObservationModel,
    convention: Convention,
) -> CohortTable {
    let masses = (0..=1)
        .map(|k| compute_cell(prior, model, convention, None, 1, k).stats.mass)
        .collect();
    CohortTable { t: 1, masses }
}

/// Precomputed cohort statistics for every cell reachable within the
/// utility horizon.
pub struct CohortEngine {
    prior: Prior,
    model: ObservationModel,
    utility: UtilityFunction,
    convention: Convention,
    cells: Vec<Vec<CellStats>>,
    risk_weighted: Vec<Vec<f64>>,
}

impl CohortEngine {
    /// Builds the engine, computing stats for all cells `(t, k)` with
    /// `1 <= t <= horizon` and `0 <= k <= t`.
    pub fn new(
        prior: Prior,
        model: ObservationModel,
        utility: UtilityFunction,
        convention: Convention,
    ) -> Result<Self> {
        let horizon = utility.horizon();
        let mut cells = Vec::with_capacity(horizon as usize);
        let mut risk_weighted = Vec::with_capacity(horizon as usize);
        for t in 1..=horizon {
            let mut row = Vec::with_capacity(t as usize + 1);
            let mut rw_row = Vec::with_capacity(t as usize + 1);
            for k in 0..=t {
                let cell =
                    compute_cell(&prior, &model, convention, Some((&utility, t)), t, k);
                row.push(cell.stats);
                rw_row.push(cell.risk_weighted_utility);
            }
            cells.push(row);
            risk_weighted.push(rw_row);
        }
        Ok(CohortEngine {
            prior,
            model,
            utility,
            convention,
            cells,
            risk_weighted,
        })
    }

    fn check_cell(&self, t: u32, k: u32) -> Result<()> {
        if t < 1 || t > self.utility.horizon() || k > t {
            return Err(domain(format!(
                "cell ({t}, {k}) outside horizon {}",
                self.utility.horizon()
            )));
        }
        Ok(())
    }

    /// Statistics of cell `(t, k)`.
    pub fn stats(&self, t: u32, k: u32) -> Result<&CellStats> {
        self.check_cell(t, k)?;
        Ok(&self.cells[(t - 1) as usize][k as usize])
    }

    /// Conditional mean of `p * u(t, p)` within cell `(t, k)`: the part of
    /// the cell's utility carried by its failure risk.
    pub fn risk_weighted_utility(&self, t: u32, k: u32) -> Result<f64> {
        self.check_cell(t, k)?;
        Ok(self.risk_weighted[(t - 1) as usize][k as usize])
    }

    /// The round-one cohort table.
    pub fn initial(&self) -> CohortTable {
        CohortTable {
            t: 1,
            masses: vec![self.cells[0][0].mass, self.cells[0][1].mass],
        }
    }

    /// The prior the engine was built from.
    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    /// The observation channel.
    pub fn model(&self) -> &ObservationModel {
        &self.model
    }

    /// The treatment utility.
    pub fn utility(&self) -> &UtilityFunction {
        &self.utility
    }

    /// The event-order convention.
    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// The decision horizon.
    pub fn horizon(&self) -> u32 {
        self.utility.horizon()
    }
}

/// Masked continuum evolution of a cohort table under a nondecreasing
/// treatment threshold sequence.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Pre-treatment cohort tables, one per round from the initial round to
    /// the horizon.
    pub tables: Vec<CohortTable>,
    /// Mass sitting exactly at the threshold cohort of each round.
    pub threshold_masses: Vec<f64>,
    /// Mass at or above the threshold (removed by treatment) each round.
    pub treated_masses: Vec<f64>,
    /// Mass lost to failure in each round transition (one fewer entry than
    /// tables).
    pub failed_masses: Vec<f64>,
}

/// Evolves `init` forward to the horizon, each round removing all mass in
/// cohorts at or above `thresholds[i]` before applying the failure and
/// signal transition.
///
/// `thresholds` must cover every round from `init.t` to the horizon, be
/// nondecreasing, and never exceed the highest cohort index plus one (the
/// value that treats nobody).
pub fn simulate_trajectory(
    engine: &CohortEngine,
    init: &CohortTable,
    thresholds: &[u32],
) -> Result<Trajectory> {
    let horizon = engine.horizon();
    let t0 = init.t;
    if t0 < 1 || t0 > horizon {
        return Err(domain(format!(
            "initial round {t0} outside horizon {horizon}"
        )));
    }
    if init.masses.len() != t0 as usize + 1 {
        return Err(domain(format!(
            "table at round {t0} must have {} cohorts, got {}",
            t0 + 1,
            init.masses.len()
        )));
    }
    let steps = (horizon - t0) as usize + 1;
    if thresholds.len() != steps {
        return Err(domain(format!(
            "need {} thresholds for rounds {}..={}, got {}",
            steps,
            t0,
            horizon,
            thresholds.len()
        )));
    }
    for w in thresholds.windows(2) {
        if w[1] < w[0] {
            return Err(domain("thresholds must be nondecreasing"));
        }
    }
    for (i, &q) in thresholds.iter().enumerate() {
        let t = t0 + i as u32;
        if q > t + 1 {
            return Err(domain(format!(
                "threshold {q} at round {t} exceeds cohort range"
            )));
        }
    }

    let mut tables = Vec::with_capacity(steps);
    tables.push(init.clone());
    let mut threshold_masses = Vec::with_capacity(steps);
    let mut treated_masses = Vec::with_capacity(steps);
    let mut failed_masses = Vec::with_capacity(steps - 1);

    for i in 0..steps {
        let t = t0 + i as u32;
        let q = thresholds[i] as usize;
        let masses = &tables[i].masses;
        threshold_masses.push(masses.get(q).copied().unwrap_or(0.0));
        treated_masses.push(masses.iter().skip(q).sum());
        if i + 1 == steps {
            break;
        }
        let masked: Vec<f64> = masses
            .iter()
            .enumerate()
            .map(|(k, &m)| if k >= q { 0.0 } else { m })
            .collect();
        let mut failed = 0.0;
        let mut next = vec![0.0f64; t as usize + 2];
        for (k, &m) in masked.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let stats = engine.stats(t, k as u32)?;
            failed += m * stats.mu;
            next[k] += m * stats.stay;
            next[k + 1] += m * stats.up;
        }
        failed_masses.push(failed);
        tables.push(CohortTable {
            t: t + 1,
            masses: next,
        });
    }

    Ok(Trajectory {
        tables,
        threshold_masses,
        treated_masses,
        failed_masses,
    })
}

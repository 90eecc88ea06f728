//! Brute-force reference optimizer for budgeted treatment over time.
//!
//! Splits the budget across rounds on a fixed integer lattice, enumerates
//! every split, and greedily treats the highest-signal cohorts inside each
//! round. The result is a lower bound on the best schedule value that
//! serves as an independent check on the schedule solver.

use crate::dynamics::{CellStats, CohortEngine};
use crate::error::{domain, Result};
use crate::one_time::BudgetSpec;

/// Resolution of the brute-force search lattice.
#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    budget_units: u32,
}

impl OracleConfig {
    /// Validates the lattice resolution; between 1 and 200 units.
    pub fn new(budget_units: u32) -> Result<Self> {
        if !(1..=200).contains(&budget_units) {
            return Err(domain(format!(
                "budget units must lie in 1..=200, got {budget_units}"
            )));
        }
        Ok(OracleConfig { budget_units })
    }

    /// Number of equal budget units the search may distribute.
    pub fn budget_units(&self) -> u32 {
        self.budget_units
    }
}

/// Best split found by the brute-force search.
#[derive(Clone, Debug)]
pub struct OracleOutcome {
    /// Welfare per capita of the best split.
    pub utility: f64,
    /// Budget units assigned to each round, one entry per round.
    pub split: Vec<u32>,
}

/// Enumerates every way to spread the budget over the rounds at the
/// configured resolution and returns the best greedy outcome.
///
/// The number of splits grows combinatorially in both the horizon and the
/// resolution, so horizons above 6 are rejected.
pub fn brute_force_over_time(
    engine: &CohortEngine,
    budget: &BudgetSpec,
    config: &OracleConfig,
) -> Result<OracleOutcome> {
    let horizon = engine.horizon();
    if horizon > 6 {
        return Err(domain(format!(
            "brute force is limited to horizons of at most 6, got {horizon}"
        )));
    }
    let parts = horizon as usize;
    let units = config.budget_units;
    let unit_value = budget.fraction() / f64::from(units);

    // Snapshot the cell table so the hot loop avoids repeated lookups.
    let mut cells: Vec<Vec<CellStats>> = Vec::with_capacity(parts);
    for t in 1..=horizon {
        let mut row = Vec::with_capacity(t as usize + 1);
        for k in 0..=t {
            row.push(*engine.stats(t, k)?);
        }
        cells.push(row);
    }
    let initial = engine.initial().masses;

    let mut best_utility = f64::NEG_INFINITY;
    let mut best_split: Vec<u32> = vec![0; parts];
    let mut comp = vec![0u32; parts];
    let mut cur: Vec<f64> = Vec::with_capacity(parts + 1);
    let mut next: Vec<f64> = Vec::with_capacity(parts + 1);

    // Walk all weak compositions of `units` into `parts` slots in
    // lexicographic order; ties keep the earliest split.
    fn walk(
        idx: usize,
        remaining: u32,
        comp: &mut Vec<u32>,
        visit: &mut impl FnMut(&[u32]),
    ) {
        if idx + 1 == comp.len() {
            comp[idx] = remaining;
            visit(comp);
            return;
        }
        for v in 0..=remaining {
            comp[idx] = v;
            walk(idx + 1, remaining - v, comp, visit);
        }
    }

    let mut visit = |split: &[u32]| {
        cur.clear();
        cur.extend_from_slice(&initial);
        let mut welfare = 0.0;
        for t in 1..=horizon {
            let row = &cells[t as usize - 1];
            let mut remaining = f64::from(split[t as usize - 1]) * unit_value;
            for k in (0..cur.len()).rev() {
                if remaining <= 0.0 {
                    break;
                }
                if cur[k] <= 0.0 {
                    continue;
                }
                let take = remaining.min(cur[k]);
                cur[k] -= take;
                welfare += take * row[k].utility;
                remaining -= take;
            }
            if t < horizon {
                next.clear();
                next.resize(cur.len() + 1, 0.0);
                for (k, &m) in cur.iter().enumerate() {
                    next[k] += m * row[k].stay;
                    next[k + 1] += m * row[k].up;
                }
                std::mem::swap(&mut cur, &mut next);
            }
        }
        if welfare > best_utility {
            best_utility = welfare;
            best_split.copy_from_slice(split);
        }
    };
    walk(0, units, &mut comp, &mut visit);

    Ok(OracleOutcome {
        utility: best_utility,
        split: best_split,
    })
}

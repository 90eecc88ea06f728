//! Early detection and budgeted treatment of rare failure risks in a
//! surviving population.
//!
//! Agents carry an unknown per-round failure probability drawn from a
//! prior. Each round an active agent may emit an early-warning signal,
//! may fail and leave the population, and may be treated. This crate
//! models that process end to end:
//!
//! * [`ObservationModel`] maps failure probability to signal probability
//!   through a power-law channel, and [`UtilityFunction`] scores what a
//!   treatment at a given round is worth under several intervention types.
//! * [`Prior`], [`PopulationDensity`], and [`posterior`] track the mix of
//!   risk levels among survivors and condition it on observed signals.
//! * [`CohortEngine`] tabulates cohort masses and treatment values for
//!   every round and signal count, and [`simulate_trajectory`] pushes
//!   cohorts through threshold policies.
//! * [`one_time_welfare`], [`best_one_time`], and the deferral bounds
//!   analyze a single budgeted campaign; [`solve_optimal`] searches
//!   threshold schedules that spend a budget over time; and
//!   [`brute_force_over_time`] cross-checks the solver on a budget
//!   lattice.
//! * [`ranking_risk_exact`], [`ranking_risk_approx`], and
//!   [`ranking_risk_mc`] quantify how often signal counts misrank
//!   survivors, with [`delta_ranking_risk`], [`improvement_condition`],
//!   and [`bayes_ranking_check`] characterizing when more observation
//!   helps.
//! * [`mc_simulate`], [`mc_one_time`], and [`mc_policy_value`] validate
//!   the analytic tables against keyed, reproducible agent simulation.
//!
//! Deterministic by construction. Quadrature sums run in a fixed order
//! and all Monte Carlo draws derive from keyed counters, so every result
//! is bit-reproducible for a given seed.

mod density;
mod dynamics;
mod error;
mod mc;
mod model;
mod one_time;
mod oracle;
mod over_time;
mod quad;
mod ranking;

pub use density::{
    beta_forward_moments, check_g_decaying, cohort_stats, estimate_beta_prior,
    g_decaying_bounds, posterior, posterior_expect, GDecayReport, GDecayingBounds,
    InequalityBound, PopulationDensity, PosteriorSpec, Prior,
};
pub use dynamics::{
    initial_cohorts, simulate_trajectory, CellStats, CohortEngine, CohortTable,
    Convention, Trajectory,
};
pub use error::{EarlyBirdError, Result};
pub use mc::{mc_one_time, mc_policy_value, mc_simulate, AgentPool, McRun, StepRecord};
pub use model::{
    ptilde, DecayingConstants, FailureProbability, ObservationModel, ShapeReport,
    UtilityFunction, UtilityKind,
};
pub use one_time::{
    best_one_time, defer_one_step_sign, general_deferral_condition, one_time_welfare,
    t_star_fully_effective, threshold_upper_bound, BestOneTime, BudgetSpec,
    DeferralReport, OneTimeResult, TStarBound,
};
pub use oracle::{brute_force_over_time, OracleConfig, OracleOutcome};
pub use over_time::{
    enumerate_schedules, evaluate_schedule, mean_treatment_time, solve_optimal,
    verify_structure, PolicySchedule, ScheduleOutcome, SolveResult,
};
pub use ranking::{
    bayes_ranking_check, delta_ranking_risk, improvement_condition, ranking_risk_approx,
    ranking_risk_exact, ranking_risk_mc, ImprovementInputs, ImprovementReport,
    RankingRisk, RiskDecomposition,
};

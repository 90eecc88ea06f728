//! Risk of misranking agents by their observed signal counts.
//!
//! Two surviving agents are misranked when the one with the lower failure
//! probability has strictly more signals. The routines here quantify that
//! probability for the population surviving to a given round: an exact
//! enumeration over a discretized population, a normal approximation, a
//! Monte Carlo estimate, a one-step decomposition separating survival
//! filtering from observation noise, and two analytic checks on whether
//! more observation rounds can still improve ranking quality.

use crate::density::{Prior, PriorForm};
use crate::error::{domain, extinct, unsupported, Result};
use crate::mc::{keyed_u64, keyed_unit, AgentPool};
use crate::model::ObservationModel;
use crate::quad::binomial;
use statrs::distribution::ContinuousCDF;

const PURPOSE_OBSERVE: u64 = 1;
const PURPOSE_FAIL: u64 = 2;
const PURPOSE_PAIR_FIRST: u64 = 5;
const PURPOSE_PAIR_SECOND: u64 = 6;

/// Number of cells used to discretize a Beta prior.
const BETA_CELLS: usize = 2048;

/// A misranking risk value for round `t`.
#[derive(Clone, Copy, Debug)]
pub struct RankingRisk {
    /// The risk estimate.
    pub value: f64,
    /// Sampling standard error; exactly zero for deterministic methods.
    pub std_error: f64,
    /// The round the risk refers to.
    pub t: u32,
}

/// Population atoms at round `t`: support points and survival-tilted
/// weights. Beta priors are discretized into equal-width cells; grid
/// priors keep their own atoms.
fn atoms_at_round(
    prior: &Prior,
    t: u32,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let (points, base): (Vec<f64>, Vec<f64>) = match prior.form() {
        PriorForm::Beta { alpha, beta } => {
            let dist = statrs::distribution::Beta::new(*alpha, *beta)
                .map_err(|e| domain(format!("Beta prior: {e}")))?;
            let m = BETA_CELLS;
            let mut points = Vec::with_capacity(m);
            let mut weights = Vec::with_capacity(m);
            let mut lower = 0.0;
            for i in 0..m {
                let upper = dist.cdf((i + 1) as f64 / m as f64);
                points.push((i as f64 + 0.5) / m as f64);
                weights.push((upper - lower).max(0.0));
                lower = upper;
            }
            (points, weights)
        }
        PriorForm::Grid { points, weights } => (points.clone(), weights.clone()),
    };
    let tilted: Vec<f64> = points
        .iter()
        .zip(base.iter())
        .map(|(x, w)| w * (1.0 - x).powi((t - 1) as i32))
        .collect();
    let total: f64 = tilted.iter().sum();
    if total <= 0.0 {
        return Err(extinct(format!("no population survives to round {t}")));
    }
    let weights = tilted.iter().map(|w| w / total).collect();
    let is_grid = matches!(prior.form(), PriorForm::Grid { .. });
    Ok((points, weights, is_grid))
}

/// Normal approximation to the misranking probability of a random ordered
/// pair of survivors at round `t`.
pub fn ranking_risk_approx(
    prior: &Prior,
    model: &ObservationModel,
    t: u32,
) -> Result<RankingRisk> {
    if t < 1 {
        return Err(domain("round index must be at least 1"));
    }
    let (points, weights, _) = atoms_at_round(prior, t)?;
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("unit normal");
    let signal: Vec<f64> = points.iter().map(|&x| model.ptilde(x)).collect();
    let tf = f64::from(t);
    let n = points.len();
    let pair_value = |i: usize, j: usize| -> f64 {
        let si = signal[i];
        let sj = signal[j];
        let s2 = si * (1.0 - si) + sj * (1.0 - sj);
        let dp = (si - sj).abs();
        if s2 > 0.0 {
            normal.cdf(-dp * tf.sqrt() / s2.sqrt())
        } else if dp == 0.0 {
            0.5
        } else {
            0.0
        }
    };
    let mut value = 0.0;
    for i in 0..n {
        value += weights[i] * weights[i] * pair_value(i, i);
        for j in (i + 1)..n {
            value += 2.0 * weights[i] * weights[j] * pair_value(i, j);
        }
    }
    Ok(RankingRisk {
        value,
        std_error: 0.0,
        t,
    })
}

/// Log-space binomial pmf over `0..=t` signals for signal probability `s`.
fn signal_pmf(t: u32, s: f64) -> Vec<f64> {
    let len = t as usize + 1;
    if s <= 0.0 {
        let mut pmf = vec![0.0; len];
        pmf[0] = 1.0;
        return pmf;
    }
    if s >= 1.0 {
        let mut pmf = vec![0.0; len];
        pmf[len - 1] = 1.0;
        return pmf;
    }
    let ls = s.ln();
    let lq = f64::ln_1p(-s);
    let mut pmf: Vec<f64> = (0..=t)
        .map(|k| {
            (binomial(t, k).ln() + k as f64 * ls + (t - k) as f64 * lq).exp()
        })
        .collect();
    let total: f64 = pmf.iter().sum();
    for v in &mut pmf {
        *v /= total;
    }
    pmf
}

/// Exact misranking probability of a random ordered pair of distinct-risk
/// survivors at round `t`, computed by enumerating signal counts over the
/// discretized population.
pub fn ranking_risk_exact(
    prior: &Prior,
    model: &ObservationModel,
    t: u32,
) -> Result<RankingRisk> {
    if t < 1 {
        return Err(domain("round index must be at least 1"));
    }
    let (points, weights, is_grid) = atoms_at_round(prior, t)?;
    let n = points.len();
    let pmfs: Vec<Vec<f64>> = points
        .iter()
        .map(|&x| signal_pmf(t, model.ptilde(x)))
        .collect();
    let cdfs: Vec<Vec<f64>> = pmfs
        .iter()
        .map(|pmf| {
            let mut acc = 0.0;
            pmf.iter()
                .map(|v| {
                    acc += v;
                    acc
                })
                .collect()
        })
        .collect();
    // Probability that the lower-risk member of the pair shows strictly
    // more signals.
    let pair_loss = |lo: usize, hi: usize| -> f64 {
        let mut loss = 0.0;
        for k in 1..=(t as usize) {
            loss += pmfs[lo][k] * cdfs[hi][k - 1];
        }
        loss
    };
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let w = weights[i] * weights[j];
            numerator += w * pair_loss(i, j);
            denominator += w;
        }
    }
    if is_grid {
        // Atomic populations draw genuinely identical pairs. Sampling two
        // distinct survivors hits an unordered cross-atom pair with twice
        // the product weight of a same-atom pair, so the diagonal enters
        // at half weight to match the pair-sampling frequencies.
        for i in 0..n {
            let w = weights[i] * weights[i] / 2.0;
            numerator += w * pair_loss(i, i);
            denominator += w;
        }
    }
    if denominator <= 0.0 {
        return Err(extinct("population has no rankable pairs"));
    }
    Ok(RankingRisk {
        value: numerator / denominator,
        std_error: 0.0,
        t,
    })
}

/// Monte Carlo misranking risk: simulates survival and signals to round
/// `t`, then scores random ordered pairs of surviving agents.
pub fn ranking_risk_mc(
    prior: &Prior,
    model: &ObservationModel,
    t: u32,
    n_agents: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<RankingRisk> {
    if t < 1 {
        return Err(domain("round index must be at least 1"));
    }
    if n_agents < 2 {
        return Err(domain("need at least two agents to form pairs"));
    }
    if n_pairs == 0 {
        return Err(domain("need at least one pair"));
    }
    let pool = AgentPool::sample(prior, n_agents, seed)?;
    let mut survivors: Vec<(f64, u32)> = Vec::new();
    for (i, &p) in pool.probabilities().iter().enumerate() {
        let agent = i as u64;
        let pt = model.ptilde(p);
        let mut y = 0u32;
        let mut active = true;
        for round in 1..=t {
            if keyed_unit(seed, agent, round as u64, PURPOSE_OBSERVE) < pt {
                y += 1;
            }
            if round < t && keyed_unit(seed, agent, round as u64, PURPOSE_FAIL) < p {
                active = false;
                break;
            }
        }
        if active {
            survivors.push((p, y));
        }
    }
    let alive = survivors.len();
    if alive < 2 {
        return Err(extinct(format!(
            "only {alive} agents survive to round {t}"
        )));
    }
    let mut losses = 0u64;
    for pair in 0..n_pairs {
        let a = (keyed_u64(seed, pair as u64, 0, PURPOSE_PAIR_FIRST) % alive as u64)
            as usize;
        let mut b = a;
        let mut attempt = 0u64;
        while b == a {
            attempt += 1;
            b = (keyed_u64(seed, pair as u64, attempt, PURPOSE_PAIR_SECOND)
                % alive as u64) as usize;
        }
        let (lo, hi) = if survivors[a].0 <= survivors[b].0 {
            (a, b)
        } else {
            (b, a)
        };
        if survivors[lo].1 > survivors[hi].1 {
            losses += 1;
        }
    }
    let value = losses as f64 / n_pairs as f64;
    let std_error = (value * (1.0 - value) / n_pairs as f64).sqrt();
    Ok(RankingRisk {
        value,
        std_error,
        t,
    })
}

/// One-step change in ranking risk split into its two drivers.
#[derive(Clone, Copy, Debug)]
pub struct RiskDecomposition {
    /// Net approximate change in risk from round `t` to `t + 1`.
    pub delta: f64,
    /// Contribution of survival filtering, which reshapes the population.
    pub population_effect: f64,
    /// Contribution of the extra observation round, which sharpens counts.
    pub observation_effect: f64,
    /// The base round.
    pub t: u32,
}

/// Splits the approximate one-step change in misranking risk at round `t`
/// into a population term (survival reshapes who is being ranked) and an
/// observation term (one more round sharpens the counts).
pub fn delta_ranking_risk(
    prior: &Prior,
    model: &ObservationModel,
    t: u32,
) -> Result<RiskDecomposition> {
    if t < 1 {
        return Err(domain("round index must be at least 1"));
    }
    let (points, weights, _) = atoms_at_round(prior, t)?;
    let n = points.len();
    let signal: Vec<f64> = points.iter().map(|&x| model.ptilde(x)).collect();
    let mu: f64 = points
        .iter()
        .zip(weights.iter())
        .map(|(x, w)| x * w)
        .sum();
    let tf = f64::from(t);
    let prefactor = 1.0 / (2.0 * std::f64::consts::PI * tf).sqrt();
    // Value of the density ratio at the point where the Gaussian tail is
    // least sensitive; caps the ratio where the mean gap vanishes.
    let cap = (1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::LN_2)).sqrt();
    const TINY_GAP: f64 = 1e-6;

    let pair_terms = |i: usize, j: usize| -> (f64, f64) {
        let survival =
            (1.0 - points[i]) * (1.0 - points[j]) / ((1.0 - mu) * (1.0 - mu)) - 1.0;
        let si = signal[i];
        let sj = signal[j];
        let s2 = si * (1.0 - si) + sj * (1.0 - sj);
        let dp = (si - sj).abs();
        if s2 <= 0.0 {
            let pop = if dp < TINY_GAP { cap * survival } else { 0.0 };
            return (pop, 0.0);
        }
        let expf = (-dp * dp * tf / (2.0 * s2).max(1e-300)).exp();
        let mills = if dp < TINY_GAP {
            cap
        } else {
            prefactor * expf * s2.sqrt() / dp
        };
        let pop = mills * survival;
        let obs = -prefactor * expf * dp / (2.0 * s2.sqrt()).max(1e-300);
        (pop, obs)
    };

    let mut population_effect = 0.0;
    let mut observation_effect = 0.0;
    for i in 0..n {
        let (pop_d, obs_d) = pair_terms(i, i);
        let wd = weights[i] * weights[i];
        population_effect += wd * pop_d;
        observation_effect += wd * obs_d;
        for j in (i + 1)..n {
            let (pop, obs) = pair_terms(i, j);
            let w = 2.0 * weights[i] * weights[j];
            population_effect += w * pop;
            observation_effect += w * obs;
        }
    }
    Ok(RiskDecomposition {
        delta: population_effect + observation_effect,
        population_effect,
        observation_effect,
        t,
    })
}

/// Inputs to the improvement-exclusion condition.
#[derive(Clone, Copy, Debug)]
pub struct ImprovementInputs {
    /// Confidence cutoff in `(0, 1)`.
    pub alpha_cutoff: f64,
    /// Inverse Lipschitz constant of the signal map, strictly positive.
    pub lipschitz_inv: f64,
    /// Observation noise level in `[0, 0.5)`.
    pub epsilon: f64,
}

/// Verdict of the improvement-exclusion condition.
#[derive(Clone, Copy, Debug)]
pub struct ImprovementReport {
    /// Population-spread side of the comparison.
    pub lhs: f64,
    /// Information-rate side of the comparison.
    pub rhs: f64,
    /// True when further rounds can still improve ranking (the exclusion
    /// fails).
    pub improvement_possible: bool,
}

/// Tests whether the population surviving to round `t` is already too
/// concentrated for more observation to help ranking: improvement is
/// excluded when the normalized variance exceeds the information rate.
pub fn improvement_condition(
    prior: &Prior,
    model: &ObservationModel,
    t: u32,
    inputs: &ImprovementInputs,
) -> Result<ImprovementReport> {
    let _ = model;
    if t < 1 {
        return Err(domain("round index must be at least 1"));
    }
    let a = inputs.alpha_cutoff;
    if !a.is_finite() || a <= 0.0 || a >= 1.0 {
        return Err(domain(format!(
            "confidence cutoff must lie strictly inside (0, 1), got {a}"
        )));
    }
    if !inputs.lipschitz_inv.is_finite() || inputs.lipschitz_inv <= 0.0 {
        return Err(domain("inverse Lipschitz constant must be positive"));
    }
    if !inputs.epsilon.is_finite() || !(0.0..0.5).contains(&inputs.epsilon) {
        return Err(domain(format!(
            "noise level must lie in [0, 0.5), got {}",
            inputs.epsilon
        )));
    }
    // Exact population at round t: the prior thinned by t - 1 survivals.
    let (mean, var) = match prior.form() {
        PriorForm::Beta { alpha, beta } => {
            let a_t = *alpha;
            let b_t = *beta + f64::from(t - 1);
            let mean = a_t / (a_t + b_t);
            let var = a_t * b_t / ((a_t + b_t) * (a_t + b_t) * (a_t + b_t + 1.0));
            (mean, var)
        }
        PriorForm::Grid { points, weights } => {
            let tilted: Vec<f64> = points
                .iter()
                .zip(weights.iter())
                .map(|(x, w)| w * (1.0 - x).powi((t - 1) as i32))
                .collect();
            let total: f64 = tilted.iter().sum();
            if total <= 0.0 {
                return Err(extinct(format!(
                    "no population survives to round {t}"
                )));
            }
            let mean: f64 = points
                .iter()
                .zip(tilted.iter())
                .map(|(x, w)| x * w)
                .sum::<f64>()
                / total;
            let second: f64 = points
                .iter()
                .zip(tilted.iter())
                .map(|(x, w)| x * x * w)
                .sum::<f64>()
                / total;
            (mean, second - mean * mean)
        }
    };
    let c = (1.0 / a).ln();
    let rate = (2.0 * c / f64::from(t)).sqrt();
    let lhs = var / ((1.0 - mean) * (1.0 - mean))
        - (inputs.lipschitz_inv / (1.0 - 2.0 * inputs.epsilon)) * rate / (1.0 - mean);
    let rhs = c / f64::from(t);
    Ok(ImprovementReport {
        lhs,
        rhs,
        improvement_possible: lhs < rhs,
    })
}

/// Checks whether ranking by signal count is Bayes-optimal among all
/// pairwise decision rules for an atomic population at round `t`.
///
/// Enumerates every rule mapping a pair of signal counts to an order and
/// compares the count rules (with either tie convention) to the best.
/// Supported for `t` in `{1, 2}`, where the rule space is small enough to
/// enumerate literally.
pub fn bayes_ranking_check(
    prior: &Prior,
    model: &ObservationModel,
    t: u32,
) -> Result<bool> {
    if !(1..=2).contains(&t) {
        return Err(unsupported(format!(
            "rule enumeration is only feasible for rounds 1 and 2, got {t}"
        )));
    }
    let (points, weights, is_grid) = atoms_at_round(prior, t)?;
    if !is_grid {
        return Err(domain(
            "the rule enumeration needs an atomic population; discretize first",
        ));
    }
    let n = points.len();
    let pmfs: Vec<Vec<f64>> = points
        .iter()
        .map(|&x| signal_pmf(t, model.ptilde(x)))
        .collect();
    let counts = t as usize + 1;
    // a_table[u][v]: mass of pairs where the first agent is truly riskier,
    // so declaring the second riskier on counts (u, v) is wrong. b_table
    // is the mirror image.
    let mut a_table = vec![vec![0.0f64; counts]; counts];
    let mut b_table = vec![vec![0.0f64; counts]; counts];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = weights[i] * weights[j];
            for u in 0..counts {
                for v in 0..counts {
                    let mass = w * pmfs[i][u] * pmfs[j][v];
                    if points[i] > points[j] {
                        a_table[u][v] += mass;
                    } else {
                        b_table[u][v] += mass;
                    }
                }
            }
        }
    }

    let cells = counts * counts;
    let risk_of = |decide_second_riskier: &dyn Fn(usize, usize) -> bool| -> f64 {
        let mut risk = 0.0;
        for u in 0..counts {
            for v in 0..counts {
                risk += if decide_second_riskier(u, v) {
                    a_table[u][v]
                } else {
                    b_table[u][v]
                };
            }
        }
        risk
    };

    let mut global_min = f64::INFINITY;
    for mask in 0u64..(1u64 << cells) {
        let mut risk = 0.0;
        for u in 0..counts {
            for v in 0..counts {
                let bit = (mask >> (u * counts + v)) & 1;
                risk += if bit == 1 {
                    a_table[u][v]
                } else {
                    b_table[u][v]
                };
            }
        }
        if risk < global_min {
            global_min = risk;
        }
    }

    let count_rule_ge = risk_of(&|u, v| v >= u);
    let count_rule_gt = risk_of(&|u, v| v > u);
    Ok(count_rule_ge.min(count_rule_gt) <= global_min + 1e-12)
}

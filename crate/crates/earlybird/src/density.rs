//! Priors over failure probabilities and their posterior updates.
//!
//! A population starts from a prior over per-round failure probability `p`.
//! Each round, agents fail (and leave) with probability `p` and emit a
//! visible signal with probability `ptilde(p)`. Conditioning the survivors
//! on an observed signal count tilts the prior by survival and signal
//! likelihood factors; this module computes those conditional densities and
//! their moments, plus diagnostics on how fast a prior density decays.

use crate::dynamics::Convention;
use crate::error::{domain, extinct, Result};
use crate::model::ObservationModel;
use crate::quad::beta_multi_integral;

/// A prior over failure probabilities: either a Beta density or a finite
/// grid of atoms.
#[derive(Clone, Debug)]
pub struct Prior {
    form: PriorForm,
}

#[derive(Clone, Debug)]
pub(crate) enum PriorForm {
    Beta { alpha: f64, beta: f64 },
    Grid { points: Vec<f64>, weights: Vec<f64> },
}

impl Prior {
    /// Beta prior with strictly positive shape parameters.
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() || alpha <= 0.0 || beta <= 0.0 {
            return Err(domain(format!(
                "Beta parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(Prior {
            form: PriorForm::Beta { alpha, beta },
        })
    }

    /// Atomic prior on strictly increasing points in `[0, 1]` with
    /// nonnegative weights of positive total. Weights are normalized.
    pub fn grid(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(domain(
                "grid prior needs matching nonempty point and weight lists",
            ));
        }
        for &x in &points {
            if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                return Err(domain(format!("grid point {x} outside [0, 1]")));
            }
        }
        for w in points.windows(2) {
            if w[1] <= w[0] {
                return Err(domain("grid points must be strictly increasing"));
            }
        }
        let mut total = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(domain(format!("grid weight {w} must be nonnegative")));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(domain("grid weights must have positive total"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Prior {
            form: PriorForm::Grid { points, weights },
        })
    }

    pub(crate) fn form(&self) -> &PriorForm {
        &self.form
    }

    /// Prior mean of `p`.
    pub fn mean(&self) -> f64 {
        match &self.form {
            PriorForm::Beta { alpha, beta } => alpha / (alpha + beta),
            PriorForm::Grid { points, weights } => points
                .iter()
                .zip(weights.iter())
                .map(|(x, w)| x * w)
                .sum(),
        }
    }

    /// Prior mean of `p^2`.
    pub fn second_moment(&self) -> f64 {
        match &self.form {
            PriorForm::Beta { alpha, beta } => {
                alpha * (alpha + 1.0) / ((alpha + beta) * (alpha + beta + 1.0))
            }
            PriorForm::Grid { points, weights } => points
                .iter()
                .zip(weights.iter())
                .map(|(x, w)| x * x * w)
                .sum(),
        }
    }

    /// Shape parameters when the prior is a Beta density.
    pub fn beta_params(&self) -> Option<(f64, f64)> {
        match &self.form {
            PriorForm::Beta { alpha, beta } => Some((*alpha, *beta)),
            PriorForm::Grid { .. } => None,
        }
    }
}

/// First two raw moments `(E[p], E[p^2])` of a Beta prior. These are what
/// cohort failure fractions estimate: the round-one failure fraction has
/// mean `E[p]`, and the round-two fraction has mean `E[p] - E[p^2]`.
pub fn beta_forward_moments(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let prior = Prior::beta(alpha, beta)?;
    Ok((prior.mean(), prior.second_moment()))
}

/// Recovers Beta shape parameters from the first two raw moments of `p`.
///
/// Requires `0 < m1 < m0 < 1` and `m1 > m0^2` (positive variance). The
/// inversion is exact: `alpha + beta = (m0 - m1) / (m1 - m0^2)`.
pub fn estimate_beta_prior(m0: f64, m1: f64) -> Result<Prior> {
    if !m0.is_finite() || !m1.is_finite() {
        return Err(domain("moments must be finite"));
    }
    if !(0.0 < m1 && m1 < m0 && m0 < 1.0) {
        return Err(domain(format!(
            "moments must satisfy 0 < m1 < m0 < 1, got ({m0}, {m1})"
        )));
    }
    if m1 <= m0 * m0 {
        return Err(domain(format!(
            "moments imply nonpositive variance: m1 = {m1} <= m0^2 = {}",
            m0 * m0
        )));
    }
    let total = (m0 - m1) / (m1 - m0 * m0);
    let alpha = m0 * total;
    let beta = total - alpha;
    Prior::beta(alpha, beta)
}

/// A nonnegative constant wrapped with validation, used for decay-rate
/// bounds in analytic conditions.
#[derive(Clone, Copy, Debug)]
pub struct InequalityBound(f64);

impl InequalityBound {
    /// Validates that the bound is finite and nonnegative.
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(domain(format!(
                "bound must be finite and nonnegative, got {value}"
            )));
        }
        Ok(InequalityBound(value))
    }

    /// The wrapped value.
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Outcome of checking whether a prior density decays no faster than
/// `g / (1 - p)` in log scale while never increasing.
#[derive(Clone, Copy, Debug)]
pub struct GDecayReport {
    /// Whether the condition holds everywhere on the check grid.
    pub holds: bool,
    /// Location of the dominant violation (or of the largest slack residual
    /// when the condition holds).
    pub worst_point: f64,
    /// Magnitude of the dominant violation.
    pub worst_violation: f64,
}

/// Checks whether the prior density `f` satisfies
/// `-g * f(p) / (1 - p) <= f'(p) <= 0` on the open interval.
///
/// The condition is evaluated through the normalized slack
/// `u(p) = -(1 - p) f'(p) / f(p)`, which must lie in `[0, g]`. Density
/// increases (`u < 0`) are reported in preference to overly fast decay
/// (`u > g`) because they break the monotonicity half of the condition.
/// Grid priors are read as piecewise-constant densities on cells bounded by
/// midpoints, so the check reduces to comparing adjacent cell heights.
pub fn check_g_decaying(prior: &Prior, g: f64) -> Result<GDecayReport> {
    if !g.is_finite() || g < 0.0 {
        return Err(domain(format!(
            "decay bound must be finite and nonnegative, got {g}"
        )));
    }
    let tol = 1e-9;
    match prior.form() {
        PriorForm::Beta { alpha, beta } => {
            const CELLS: usize = 2048;
            let mut rise_worst = (0.0f64, 0.0f64);
            let mut decay_worst = (0.0f64, 0.0f64);
            for i in 1..CELLS {
                let p = i as f64 / CELLS as f64;
                let slack = (beta - 1.0) - (alpha - 1.0) * (1.0 - p) / p;
                let rise = (-slack).max(0.0);
                let decay = (slack - g).max(0.0);
                if rise > rise_worst.1 {
                    rise_worst = (p, rise);
                }
                if decay > decay_worst.1 {
                    decay_worst = (p, decay);
                }
            }
            report_from_violations(tol, rise_worst, decay_worst)
        }
        PriorForm::Grid { points, weights } => {
            if points.len() == 1 {
                return Ok(GDecayReport {
                    holds: true,
                    worst_point: points[0],
                    worst_violation: 0.0,
                });
            }
            // Piecewise-constant density: cell i spans the midpoints around
            // atom i, clipped to [0, 1].
            let n = points.len();
            let mut bounds = Vec::with_capacity(n + 1);
            bounds.push(0.0);
            for i in 1..n {
                bounds.push(0.5 * (points[i - 1] + points[i]));
            }
            bounds.push(1.0);
            let heights: Vec<f64> = (0..n)
                .map(|i| weights[i] / (bounds[i + 1] - bounds[i]))
                .collect();
            let mut rise_worst = (0.0f64, 0.0f64);
            let mut decay_worst = (0.0f64, 0.0f64);
            for i in 1..n {
                let at = bounds[i];
                let jump = heights[i] - heights[i - 1];
                if jump > rise_worst.1 {
                    rise_worst = (at, jump);
                }
                if -jump > decay_worst.1 {
                    decay_worst = (at, -jump);
                }
            }
            report_from_violations(tol, rise_worst, decay_worst)
        }
    }
}

fn report_from_violations(
    tol: f64,
    rise_worst: (f64, f64),
    decay_worst: (f64, f64),
) -> Result<GDecayReport> {
    let holds = rise_worst.1 <= tol && decay_worst.1 <= tol;
    let (worst_point, worst_violation) = if rise_worst.1 > tol {
        rise_worst
    } else if decay_worst.1 > tol {
        decay_worst
    } else if rise_worst.1 >= decay_worst.1 {
        rise_worst
    } else {
        decay_worst
    };
    Ok(GDecayReport {
        holds,
        worst_point,
        worst_violation,
    })
}

/// Moment floors implied by the decay condition checked by
/// [`check_g_decaying`], tight for the Beta(1, 1 + g) family.
#[derive(Clone, Copy, Debug)]
pub struct GDecayingBounds {
    /// Smallest possible mean of a density passing the check.
    pub mu_lower: f64,
    g: f64,
}

impl GDecayingBounds {
    /// Smallest possible variance of a passing density with mean `mu`.
    pub fn var_lower(&self, mu: f64) -> f64 {
        2.0 * mu / (3.0 + self.g) - mu * mu
    }
}

/// Moment floors for densities that pass [`check_g_decaying`] at level `g`.
pub fn g_decaying_bounds(g: f64) -> Result<GDecayingBounds> {
    if !g.is_finite() || g < 0.0 {
        return Err(domain(format!(
            "decay bound must be finite and nonnegative, got {g}"
        )));
    }
    Ok(GDecayingBounds {
        mu_lower: 1.0 / (2.0 + g),
        g,
    })
}

/// Which cohort to condition on: t-th round reached, k signals seen.
#[derive(Clone, Copy, Debug)]
pub struct PosteriorSpec {
    t: u32,
    k: u32,
}

impl PosteriorSpec {
    /// Round `t >= 1` and signal count `k <= t`.
    pub fn new(t: u32, k: u32) -> Result<Self> {
        if t < 1 {
            return Err(domain("round index must be at least 1"));
        }
        if k > t {
            return Err(domain(format!(
                "signal count {k} cannot exceed round {t}"
            )));
        }
        Ok(PosteriorSpec { t, k })
    }

    /// The round index.
    pub fn t(&self) -> u32 {
        self.t
    }

    /// The signal count.
    pub fn k(&self) -> u32 {
        self.k
    }
}

/// A (possibly unnormalized-origin) population density over `p`, tracking
/// the fraction of the initial population still active.
#[derive(Clone, Debug)]
pub struct PopulationDensity {
    form: DensityForm,
    active_mass: f64,
}

#[derive(Clone, Debug)]
enum DensityForm {
    Beta {
        a: f64,
        b: f64,
    },
    Grid {
        points: Vec<f64>,
        weights: Vec<f64>,
    },
    /// Density proportional to `p^(a-1) (1-p)^(b-1) r(p)^k`, where `r` is
    /// the smooth signal ratio `ptilde(p) / p`. This is the general-form
    /// posterior for a Beta prior when the channel exponent exceeds 1.
    Kernel {
        a: f64,
        b: f64,
        gamma: f64,
        k: u32,
    },
}

fn signal_ratio(gamma: f64, p: f64) -> f64 {
    if p <= 0.0 {
        gamma
    } else {
        -f64::exp_m1(gamma * f64::ln_1p(-p)) / p
    }
}

fn kernel_expect(a: f64, b: f64, gamma: f64, k: u32, f: &dyn Fn(f64) -> f64) -> f64 {
    let [num, den] = beta_multi_integral(a, b, |p| {
        let rk = signal_ratio(gamma, p).powi(k as i32);
        [rk * f(p), rk]
    });
    num / den
}

impl PopulationDensity {
    /// Wraps a prior as a fully active population.
    pub fn from_prior(prior: &Prior) -> Self {
        let form = match prior.form() {
            PriorForm::Beta { alpha, beta } => DensityForm::Beta {
                a: *alpha,
                b: *beta,
            },
            PriorForm::Grid { points, weights } => DensityForm::Grid {
                points: points.clone(),
                weights: weights.clone(),
            },
        };
        PopulationDensity {
            form,
            active_mass: 1.0,
        }
    }

    /// Applies one survival round: the density is tilted by `(1 - p)` and
    /// the active mass shrinks by the expected failure fraction.
    pub fn survival_update(&self) -> Result<Self> {
        match &self.form {
            DensityForm::Beta { a, b } => Ok(PopulationDensity {
                form: DensityForm::Beta { a: *a, b: *b + 1.0 },
                active_mass: self.active_mass * (b / (a + b)),
            }),
            DensityForm::Grid { points, weights } => {
                let tilted: Vec<f64> = points
                    .iter()
                    .zip(weights.iter())
                    .map(|(x, w)| w * (1.0 - x))
                    .collect();
                let total: f64 = tilted.iter().sum();
                if total <= 0.0 {
                    return Err(extinct(
                        "every active agent fails with certainty this round",
                    ));
                }
                Ok(PopulationDensity {
                    form: DensityForm::Grid {
                        points: points.clone(),
                        weights: tilted.iter().map(|w| w / total).collect(),
                    },
                    active_mass: self.active_mass * total,
                })
            }
            DensityForm::Kernel { a, b, gamma, k } => {
                let survive = kernel_expect(*a, *b, *gamma, *k, &|p| 1.0 - p);
                Ok(PopulationDensity {
                    form: DensityForm::Kernel {
                        a: *a,
                        b: *b + 1.0,
                        gamma: *gamma,
                        k: *k,
                    },
                    active_mass: self.active_mass * survive,
                })
            }
        }
    }

    /// Mean failure probability among active agents.
    pub fn mean(&self) -> f64 {
        match &self.form {
            DensityForm::Beta { a, b } => a / (a + b),
            DensityForm::Grid { points, weights } => points
                .iter()
                .zip(weights.iter())
                .map(|(x, w)| x * w)
                .sum(),
            DensityForm::Kernel { a, b, gamma, k } => {
                kernel_expect(*a, *b, *gamma, *k, &|p| p)
            }
        }
    }

    /// Fraction of the initial population still active.
    pub fn active_mass(&self) -> f64 {
        self.active_mass
    }

    /// Shape parameters when the density is an exact Beta.
    pub fn beta_params(&self) -> Option<(f64, f64)> {
        match &self.form {
            DensityForm::Beta { a, b } => Some((*a, *b)),
            _ => None,
        }
    }
}

/// Expectation of `f(p)` under the conditional density of an active
/// population.
pub fn posterior_expect<F>(density: &PopulationDensity, f: &F) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    match &density.form {
        DensityForm::Beta { a, b } => {
            let [num, den] = beta_multi_integral(*a, *b, |p| [f(p), 1.0]);
            num / den
        }
        DensityForm::Grid { points, weights } => points
            .iter()
            .zip(weights.iter())
            .map(|(x, w)| w * f(*x))
            .sum(),
        DensityForm::Kernel { a, b, gamma, k } => kernel_expect(*a, *b, *gamma, *k, &f),
    }
}

fn survival_exponent(spec: &PosteriorSpec, convention: Convention) -> u32 {
    match convention {
        Convention::ObserveFirst => spec.t - 1,
        Convention::SurviveFirst => spec.t,
    }
}

/// Conditional density of `p` for agents still active at round `t` with
/// `k` signals observed.
///
/// With channel exponent exactly 1 and a Beta prior, the posterior is a
/// Beta density in closed form; otherwise it is represented through its
/// integral kernel and evaluated by quadrature. Errors with
/// [`crate::EarlyBirdError::Extinct`] when the conditioning event has zero
/// probability.
pub fn posterior(
    prior: &Prior,
    model: &ObservationModel,
    spec: &PosteriorSpec,
    convention: Convention,
) -> Result<PopulationDensity> {
    let s = survival_exponent(spec, convention);
    let gamma = model.gamma();
    match prior.form() {
        PriorForm::Beta { alpha, beta } => {
            if gamma == 1.0 {
                Ok(PopulationDensity {
                    form: DensityForm::Beta {
                        a: alpha + spec.k as f64,
                        b: beta + s as f64 + (spec.t - spec.k) as f64,
                    },
                    active_mass: 1.0,
                })
            } else {
                Ok(PopulationDensity {
                    form: DensityForm::Kernel {
                        a: alpha + spec.k as f64,
                        b: beta + s as f64 + gamma * (spec.t - spec.k) as f64,
                        gamma,
                        k: spec.k,
                    },
                    active_mass: 1.0,
                })
            }
        }
        PriorForm::Grid { points, weights } => {
            let tilted: Vec<f64> = points
                .iter()
                .zip(weights.iter())
                .map(|(x, w)| {
                    let pt = model.ptilde(*x);
                    let silent = model.silence(*x);
                    w * (1.0 - x).powi(s as i32)
                        * pt.powi(spec.k as i32)
                        * silent.powi((spec.t - spec.k) as i32)
                })
                .collect();
            let total: f64 = tilted.iter().sum();
            if total <= 0.0 {
                return Err(extinct(format!(
                    "no prior mass is consistent with {} signals by round {}",
                    spec.k, spec.t
                )));
            }
            Ok(PopulationDensity {
                form: DensityForm::Grid {
                    points: points.clone(),
                    weights: tilted.iter().map(|w| w / total).collect(),
                },
                active_mass: 1.0,
            })
        }
    }
}

/// Mean failure probability and expected survive-and-signal fraction
/// `E[(1 - p) ptilde(p)]` for the cohort selected by `spec`.
pub fn cohort_stats(
    prior: &Prior,
    model: &ObservationModel,
    spec: &PosteriorSpec,
    convention: Convention,
) -> Result<(f64, f64)> {
    let density = posterior(prior, model, spec, convention)?;
    let mu = density.mean();
    let stilde = posterior_expect(&density, &|p| (1.0 - p) * model.ptilde(p));
    Ok((mu, stilde))
}

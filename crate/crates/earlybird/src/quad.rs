//! Fixed-order Gauss-Legendre quadrature tuned for Beta-kernel integrals.
//!
//! All continuous expectations in the crate reduce to integrals of the form
//! `int_0^1 p^(a-1) (1-p)^(b-1) f(p) dp` with `f` smooth. The integrand can
//! be singular (but integrable) at an endpoint when `a < 1` or `b < 1`, so
//! the integral is split at `1/2` and each half is mapped through a power
//! substitution that removes its endpoint singularity before applying a
//! 2048-node Gauss-Legendre rule. With integer `a` and `b` the integrands
//! are polynomials well below the rule's degree, so those cases are exact
//! to rounding.

use once_cell::sync::Lazy;

/// Number of Gauss-Legendre nodes per half-interval.
pub(crate) const GL_NODES: usize = 2048;

/// Nodes and weights on `[0, 1]`, derived once from the classical rule on
/// `[-1, 1]` by Newton iteration on the Legendre recurrence.
static GL_UNIT: Lazy<(Vec<f64>, Vec<f64>)> = Lazy::new(|| {
    let n = GL_NODES;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi-style initial guess for the i-th root of P_n.
        let mut x =
            (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and its derivative by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to [0, 1]; roots come out in descending order.
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 0.5 * w;
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
    }
    (nodes, weights)
});

/// Integrates `K` smooth functions against the weight
/// `p^(a-1) (1-p)^(b-1)` over `[0, 1]`, returning the `K` raw integrals.
///
/// The evaluation order is fixed, so results are bit-stable across runs.
pub(crate) fn beta_multi_integral<const K: usize>(
    a: f64,
    b: f64,
    f: impl Fn(f64) -> [f64; K],
) -> [f64; K] {
    let (nodes, weights) = (&GL_UNIT.0, &GL_UNIT.1);
    let mut total = [0.0f64; K];

    // Left half [0, 1/2]. An integer exponent makes p^(a-1) polynomial and
    // the rule integrates it to rounding; any fractional exponent leaves an
    // algebraic endpoint singularity whose plain Gauss-Legendre error decays
    // only like n^(-2a). Substituting u = p^(a/m) with m = ceil(6a) turns
    // the weight into the exact monomial u^(m-1) and lifts the remaining
    // composed singularity to exponent m/a >= 6, far below rounding.
    if a.fract() == 0.0 {
        for (&u, &w) in nodes.iter().zip(weights.iter()) {
            let p = 0.5 * u;
            let vals = f(p);
            let factor = 0.5 * w * p.powf(a - 1.0) * (1.0 - p).powf(b - 1.0);
            for (acc, v) in total.iter_mut().zip(vals.iter()) {
                *acc += factor * v;
            }
        }
    } else {
        let m = (6.0 * a).ceil().max(1.0);
        let expo = m / a;
        let upper = 0.5f64.powf(a / m);
        for (&u, &w) in nodes.iter().zip(weights.iter()) {
            let uu = upper * u;
            let p = uu.powf(expo);
            let vals = f(p);
            let factor =
                upper * w * expo * uu.powi(m as i32 - 1) * (1.0 - p).powf(b - 1.0);
            for (acc, v) in total.iter_mut().zip(vals.iter()) {
                *acc += factor * v;
            }
        }
    }

    // Right half [1/2, 1], mirrored through v = (1-p)^(b/m).
    if b.fract() == 0.0 {
        for (&u, &w) in nodes.iter().zip(weights.iter()) {
            let p = 0.5 + 0.5 * u;
            let vals = f(p);
            let factor = 0.5 * w * p.powf(a - 1.0) * (1.0 - p).powf(b - 1.0);
            for (acc, v) in total.iter_mut().zip(vals.iter()) {
                *acc += factor * v;
            }
        }
    } else {
        let m = (6.0 * b).ceil().max(1.0);
        let expo = m / b;
        let upper = 0.5f64.powf(b / m);
        for (&u, &w) in nodes.iter().zip(weights.iter()) {
            let vv = upper * u;
            let p = 1.0 - vv.powf(expo);
            let vals = f(p);
            let factor = upper * w * expo * vv.powi(m as i32 - 1) * p.powf(a - 1.0);
            for (acc, v) in total.iter_mut().zip(vals.iter()) {
                *acc += factor * v;
            }
        }
    }

    total
}

/// Natural log of the Beta function.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    statrs::function::gamma::ln_gamma(a) + statrs::function::gamma::ln_gamma(b)
        - statrs::function::gamma::ln_gamma(a + b)
}

/// Binomial coefficient as a float, exact for the small arguments used here.
pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

//! Analytic envelopes for the `K_t` statistic.
//!
//! Stage I bounds `K_t ≤ γ_t` while the expected neighbourhood request mass
//! is above `12 ln n`, where
//!
//! ```text
//! γ_0 = 1,   γ_t = (2ρ'/c) · Σ_{i=1}^{t} Π_{j=0}^{i-1} γ_j
//! ```
//!
//! and `ρ' = Δmax(S)/Δmin(C)` (1 on regular graphs). Stage II bounds
//! `K_t ≤ δ_t = 1/4 + 24 t ln n / (c d Δmin(C))` up to `⌊3 ln n⌋`. All
//! logarithms are natural.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Search limit for the Stage-I horizon scan.
const MAX_HORIZON: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("c too small for envelope: need 2·ratio/c ≤ 1/4 (c={c}, ratio={ratio})")]
    CTooSmall { c: u32, ratio: f64 },
    #[error("invalid theory parameters: {0}")]
    Invalid(String),
}

/// Inputs of the envelope computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub n: usize,
    pub d: u32,
    pub c: u32,
    pub eta: f64,
    pub rho: f64,
    /// `Δmin(C)`; `Δ` on regular graphs.
    pub delta_min_c: usize,
    /// `Δmax(S)`; `Δ` on regular graphs.
    pub delta_max_s: usize,
    pub alpha: f64,
}

impl TheoryParams {
    pub fn new(
        n: usize,
        d: u32,
        c: u32,
        eta: f64,
        rho: f64,
        delta_min_c: usize,
        delta_max_s: usize,
    ) -> Result<Self, TheoryError> {
        if n < 2 || d == 0 || c == 0 || delta_min_c == 0 || delta_max_s < delta_min_c {
            return Err(TheoryError::Invalid(format!(
                "need n ≥ 2, d ≥ 1, c ≥ 1 and 1 ≤ Δmin(C) ≤ Δmax(S) \
                 (got n={n}, d={d}, c={c}, Δmin(C)={delta_min_c}, Δmax(S)={delta_max_s})"
            )));
        }
        if !(eta > 0.0) || !(rho >= 1.0) {
            return Err(TheoryError::Invalid(format!(
                "need eta > 0 and rho ≥ 1 (got {eta}, {rho})"
            )));
        }
        let ratio = delta_max_s as f64 / delta_min_c as f64;
        let alpha = alpha_for(c, ratio)?;
        Ok(Self {
            n,
            d,
            c,
            eta,
            rho,
            delta_min_c,
            delta_max_s,
            alpha,
        })
    }

    /// Parameters for a `delta`-regular graph.
    pub fn regular(n: usize, d: u32, c: u32, eta: f64, delta: usize) -> Result<Self, TheoryError> {
        Self::new(n, d, c, eta, 1.0, delta, delta)
    }

    /// `Δmax(S)/Δmin(C)`.
    pub fn ratio(&self) -> f64 {
        self.delta_max_s as f64 / self.delta_min_c as f64
    }

    pub fn ln_n(&self) -> f64 {
        (self.n as f64).ln()
    }
}

/// Largest `α` with `2·ratio/c ≤ 1/α²` (evaluated in `f64`), at least 2.
pub fn alpha_for(c: u32, ratio: f64) -> Result<f64, TheoryError> {
    check_c(c, ratio)?;
    let rate = 2.0 * ratio / f64::from(c);
    let mut alpha = (f64::from(c) / (2.0 * ratio)).sqrt();
    while rate > 1.0 / (alpha * alpha) {
        alpha = alpha.next_down();
    }
    Ok(alpha.max(2.0))
}

fn check_c(c: u32, ratio: f64) -> Result<(), TheoryError> {
    if c == 0 || !(ratio >= 1.0) || 2.0 * ratio / f64::from(c) > 0.25 {
        return Err(TheoryError::CTooSmall { c, ratio });
    }
    Ok(())
}

/// `γ_0..=γ_{t_max}` through the incremental form
/// `γ_{t+1} = γ_t + (2·ratio/c) · Π_{j ≤ t} γ_j` (with `γ_1 = 2·ratio/c`).
pub fn gamma_sequence(c: u32, ratio: f64, t_max: usize) -> Result<Vec<f64>, TheoryError> {
    check_c(c, ratio)?;
    let rate = 2.0 * ratio / f64::from(c);
    let mut gamma = Vec::with_capacity(t_max + 1);
    gamma.push(1.0);
    let mut product = 1.0; // Π_{j ≤ t} γ_j
    let mut current = 0.0;
    for _ in 1..=t_max {
        current += rate * product;
        product *= current;
        gamma.push(current);
    }
    Ok(gamma)
}

/// Running products `Π_{j<t} γ_j` for `t = 0..=gamma.len()`.
pub fn gamma_products(gamma: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(gamma.len() + 1);
    let mut p = 1.0;
    out.push(p);
    for &g in gamma {
        p *= g;
        out.push(p);
    }
    out
}

/// Stage-I horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    /// Smallest `T ≥ 1` with `d·Δmax(S)·Π_{j<T} γ_j ≤ 12 ln n`.
    pub t: u32,
    /// `½ ln(d·Δmax(S) / (12 ln n))`, shown for reference only.
    pub cap: f64,
}

/// Scans for the Stage-I horizon. `gamma` is extended as needed.
pub fn stage1_horizon(params: &TheoryParams, gamma: &[f64]) -> Result<Horizon, TheoryError> {
    let mass = f64::from(params.d) * params.delta_max_s as f64;
    let target = 12.0 * params.ln_n();
    let extended;
    let gamma = if gamma.len() >= MAX_HORIZON {
        gamma
    } else {
        extended = gamma_sequence(params.c, params.ratio(), MAX_HORIZON)?;
        &extended[..]
    };
    let mut product = 1.0;
    let mut t = 1usize;
    // Π_{j<t} γ_j for the current t
    product *= gamma[0];
    while mass * product > target {
        if t >= MAX_HORIZON {
            return Err(TheoryError::Invalid("Stage-I horizon not reached".into()));
        }
        product *= gamma[t];
        t += 1;
    }
    Ok(Horizon {
        t: t as u32,
        cap: 0.5 * (mass / target).ln(),
    })
}

/// `δ_t = 1/4 + 24 t ln n / (c d Δmin(C))` for `t = 0..=t_max`.
pub fn delta_sequence(params: &TheoryParams, t_max: usize) -> Vec<f64> {
    let slope = delta_slope(params);
    (0..=t_max).map(|t| 0.25 + slope * t as f64).collect()
}

/// `24 ln n / (c d Δmin(C))`.
pub fn delta_slope(params: &TheoryParams) -> f64 {
    24.0 * params.ln_n() / (f64::from(params.c) * f64::from(params.d) * params.delta_min_c as f64)
}

/// Smallest integer `≥ max(32ρ, 288/(ηd))`.
pub fn recommended_c(eta: f64, rho: f64, d: u32) -> u32 {
    (32.0 * rho).max(288.0 / (eta * f64::from(d))).ceil() as u32
}

/// `⌊3 ln n⌋`.
pub fn completion_bound(n: usize) -> u32 {
    (3.0 * (n as f64).ln()).floor() as u32
}

/// Everything needed to compare a `K_t` trajectory with the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryEnvelope {
    pub params: TheoryParams,
    /// `γ_t` (or `γ'_t`), `t = 0..`, at least through `max(T, completion_bound)`.
    pub gamma: Vec<f64>,
    /// `Π_{j<t} γ_j`, same indexing as `gamma`.
    pub products: Vec<f64>,
    /// `δ_t` (or `δ'_t`), `t = 0..=completion_bound`.
    pub delta_seq: Vec<f64>,
    pub horizon: Horizon,
    pub completion_bound: u32,
    pub recommended_c: u32,
    pub alpha: f64,
}

impl TheoryEnvelope {
    /// Bound on `K_t` that applies at round `t ≥ 1`: `γ_t` before the
    /// horizon, `δ_t` from the horizon up to `completion_bound`.
    pub fn bound_at(&self, t: u32) -> Option<EnvelopeBound> {
        if t == 0 {
            return None;
        }
        if t < self.horizon.t {
            Some(EnvelopeBound::Gamma(self.gamma[t as usize]))
        } else if t <= self.completion_bound {
            Some(EnvelopeBound::Delta(self.delta_seq[t as usize]))
        } else {
            None
        }
    }

    /// CSV rows `(t, γ_t, Π_{j<t} γ_j, δ_t)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64, Option<f64>)> + '_ {
        self.gamma
            .iter()
            .zip(&self.products)
            .enumerate()
            .map(|(t, (&g, &p))| (t, g, p, self.delta_seq.get(t).copied()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeBound {
    Gamma(f64),
    Delta(f64),
}

impl EnvelopeBound {
    pub fn value(self) -> f64 {
        match self {
            EnvelopeBound::Gamma(x) | EnvelopeBound::Delta(x) => x,
        }
    }
}

pub fn envelope(params: &TheoryParams) -> Result<TheoryEnvelope, TheoryError> {
    let completion_bound = completion_bound(params.n);
    let horizon = stage1_horizon(params, &[])?;
    let len = horizon.t.max(completion_bound) as usize;
    let gamma = gamma_sequence(params.c, params.ratio(), len)?;
    let mut products = gamma_products(&gamma);
    products.truncate(gamma.len());
    Ok(TheoryEnvelope {
        params: *params,
        delta_seq: delta_sequence(params, completion_bound as usize),
        gamma,
        products,
        horizon,
        completion_bound,
        recommended_c: recommended_c(params.eta, params.rho, params.d),
        alpha: params.alpha,
    })
}

/// Outcome of checking the recurrence properties on `γ_0..=γ_{t_max}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCheck {
    /// For `t ≥ 1`, every increment `γ_{t+1} − γ_t = γ_1 Π_{j≤t} γ_j` is
    /// positive and the stored values never decrease.
    pub increasing: bool,
    /// `γ_t ≤ 1/α` for `t ≥ 1`.
    pub bounded_by_inverse_alpha: bool,
    /// `Π_{j<t} γ_j ≤ α^{-t}` for `t ≥ 1`, as literally stated.
    pub product_bound: bool,
    /// First `t` where `product_bound` fails.
    pub product_bound_first_failure: Option<usize>,
    /// `Π_{j=1}^{t} γ_j ≤ α^{-t}` for `t ≥ 1`.
    pub shifted_product_bound: bool,
    /// `γ_t ≤ 1/α − 1/α^{t+1}` for `t ≥ 1`.
    pub induction_bound: bool,
}

/// Exact (tolerance-free) comparisons on the computed sequence.
pub fn check_recurrence(gamma: &[f64], alpha: f64) -> RecurrenceCheck {
    let inv = 1.0 / alpha;
    // The increment γ_{t+1} − γ_t = γ_1 · Π_{j≤t} γ_j drops below one ulp of
    // γ_t after a dozen terms and underflows for large c, so stored values
    // stall. Require non-decreasing values and a finite log-increment
    // ln γ_1 + Σ_{j≤t} ln γ_j, i.e. a strictly positive increment.
    let mut log_increment = gamma.get(1).map_or(f64::NEG_INFINITY, |g| g.ln());
    let mut increasing = true;
    for t in 1..gamma.len().saturating_sub(1) {
        // γ_0 = 1 contributes ln 1 = 0; monotonicity starts at t = 1
        log_increment += gamma[t].ln();
        if !log_increment.is_finite() || gamma[t + 1] < gamma[t] {
            increasing = false;
        }
    }
    let tail = || gamma.iter().enumerate().skip(1);
    let bounded_by_inverse_alpha = tail().all(|(_, &g)| g <= inv);
    let induction_bound = tail().all(|(t, &g)| g <= inv - alpha.powi(-(t as i32 + 1)));

    let mut product_bound_first_failure = None;
    let mut shifted_product_bound = true;
    let mut product = 1.0; // Π_{j<t} γ_j
    let mut shifted = 1.0; // Π_{j=1}^{t} γ_j
    for t in 1..gamma.len() {
        product *= gamma[t - 1];
        shifted *= gamma[t];
        let bound = alpha.powi(-(t as i32));
        if product > bound && product_bound_first_failure.is_none() {
            product_bound_first_failure = Some(t);
        }
        if shifted > bound {
            shifted_product_bound = false;
        }
    }
    RecurrenceCheck {
        increasing,
        bounded_by_inverse_alpha,
        product_bound: product_bound_first_failure.is_none(),
        product_bound_first_failure,
        shifted_product_bound,
        induction_bound,
    }
}

//! Closed-form rate and bound calculators.
//!
//! Conventions: `log` is the positive logarithm max(ln x, 1); 1/∞ = 0, so a
//! prefix containing an infinite exponent contributes a term base⁰ = 1.
//! Prefixes are indexed by their length t = 1..=N+1 over the ranked tasks.
//!
//! ```text
//! ε(m, δ)  = (V/m)·log(m/V) + (1/m)·log(1/δ)
//! ρ̄_t      = Σ_{s≤t} n_(s) ρ_(s) / Σ_{s≤t} n_(s)
//! N_t      = Σ_{s≤t} n_(s),   N = Σ_all n
//! minimax  = min_t N_t^{−1/((2−β)ρ̄_t)}
//! oracle   = min_t C_ρ (2¹⁰C₀⁴C_β (V log(N_t/V) + log(1/δ)) / N_t)^{1/((2−β)ρ̄_t)}
//! pooling  = min_t C_ρ (32C₀²C_β (V log(N/V) + log(1/δ)) / N_t)^{1/ρ̄_t}            (β = 1)
//! quantile = C_ρ ((32C₀²/α)^{2−β} C_β (V log(N/V) + log(1/δ)) / N)^{1/((2−β)ρ̄_{t(α)})}
//! general  = min_t C_ρ ((32C₀²)^{2−β} C_β (V log(N/V) + log(1/δ)) / (N_t^{2−β} N^{−(1−β)}))^{1/((2−β)ρ̄_t)}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub fn positive_log(x: f64) -> f64 {
    x.ln().max(1.0)
}

/// Deviation radius ε(m, δ) for a class of VC dimension `vc`.
pub fn eps(m: usize, delta: f64, vc: usize) -> f64 {
    debug_assert!(m >= 1 && vc >= 1 && delta > 0.0 && delta < 1.0);
    let (m, v) = (m as f64, vc as f64);
    (v / m) * positive_log(m / v) + positive_log(1.0 / delta) / m
}

/// Sample-size weighted mean of the first `t` sorted exponents.
pub fn avg_rho(rhos: &[f64], sizes: &[usize], t: usize) -> Result<f64> {
    if t == 0 || t > rhos.len() || rhos.len() != sizes.len() {
        return Err(Error::IndexOutOfRange { index: t, max: rhos.len().min(sizes.len()) });
    }
    let total: usize = sizes[..t].iter().sum();
    if total == 0 {
        // no data in the prefix: plain mean keeps the value defined
        return Ok(rhos[..t].iter().sum::<f64>() / t as f64);
    }
    let mut acc = 0.0;
    for s in 0..t {
        if sizes[s] > 0 {
            if rhos[s].is_infinite() {
                return Ok(f64::INFINITY);
            }
            acc += sizes[s] as f64 * rhos[s];
        }
    }
    Ok(acc / total as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateQuery {
    /// Sorted ascending; ∞ allowed.
    #[serde(with = "crate::rho_serde::vec")]
    pub rhos: Vec<f64>,
    pub sizes: Vec<usize>,
    pub beta: f64,
    #[serde(default = "one_usize")]
    pub vc: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "two")]
    pub c_beta: f64,
    #[serde(default = "two")]
    pub c_rho: f64,
    #[serde(default = "one")]
    pub c0: f64,
}

fn one_usize() -> usize {
    1
}
fn default_delta() -> f64 {
    0.1
}
fn two() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}

impl RateQuery {
    pub fn new(rhos: Vec<f64>, sizes: Vec<usize>, beta: f64) -> Self {
        RateQuery { rhos, sizes, beta, vc: 1, delta: 0.1, c_beta: 2.0, c_rho: 2.0, c0: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rhos.is_empty() || self.rhos.len() != self.sizes.len() {
            return Err(invalid("rhos and sizes must be nonempty and of equal length"));
        }
        if self.rhos.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return Err(invalid("exponents must be positive"));
        }
        if self.rhos.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("exponents must be sorted ascending"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid(format!("beta = {} outside [0, 1]", self.beta)));
        }
        if self.vc == 0 {
            return Err(invalid("vc must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if !(self.c0 > 0.0 && self.c_beta > 0.0 && self.c_rho > 0.0) {
            return Err(invalid("constants must be positive"));
        }
        Ok(())
    }

    fn prefix_sizes(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .scan(0usize, |acc, &n| {
                *acc += n;
                Some(*acc)
            })
            .collect()
    }

    fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn complexity(&self, m: usize) -> f64 {
        let v = self.vc as f64;
        v * positive_log(m as f64 / v) + positive_log(1.0 / self.delta)
    }
}

/// A bound minimized over prefixes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    /// Prefix length attaining the minimum (smallest on ties).
    pub argmin_t: usize,
    pub per_t_terms: Vec<f64>,
}

impl BoundValue {
    fn from_terms(per_t_terms: Vec<f64>) -> Self {
        let mut best = (0, f64::INFINITY);
        for (i, &v) in per_t_terms.iter().enumerate() {
            if v < best.1 {
                best = (i, v);
            }
        }
        BoundValue { value: best.1, argmin_t: best.0 + 1, per_t_terms }
    }
}

/// base^{1/e} with 1/∞ = 0; an empty prefix (base = ∞) yields ∞.
fn root(base: f64, exponent: f64) -> f64 {
    if base.is_infinite() {
        return f64::INFINITY;
    }
    base.powf(1.0 / exponent)
}

fn prefix_terms(q: &RateQuery, mut term: impl FnMut(usize, usize, f64) -> f64) -> Result<BoundValue> {
    q.validate()?;
    let prefix = q.prefix_sizes();
    let mut terms = Vec::with_capacity(prefix.len());
    for t in 1..=prefix.len() {
        let n_t = prefix[t - 1];
        if n_t == 0 {
            terms.push(f64::INFINITY);
            continue;
        }
        let rho_bar = avg_rho(&q.rhos, &q.sizes, t)?;
        terms.push(term(t, n_t, rho_bar));
    }
    Ok(BoundValue::from_terms(terms))
}

pub fn minimax_rate(q: &RateQuery) -> Result<BoundValue> {
    let beta = q.beta;
    prefix_terms(q, |_, n_t, rho_bar| root(1.0 / n_t as f64, (2.0 - beta) * rho_bar))
}

pub fn oracle_bound(q: &RateQuery) -> Result<BoundValue> {
    let c = 2f64.powi(10) * q.c0.powi(4) * q.c_beta;
    prefix_terms(q, |_, n_t, rho_bar| {
        q.c_rho * root(c * q.complexity(n_t) / n_t as f64, (2.0 - q.beta) * rho_bar)
    })
}

/// Semi-adaptive bound with the universal constant instantiated as 2¹⁰C₀⁴; logs the prefix size.
pub fn semi_adaptive_bound(q: &RateQuery) -> Result<BoundValue> {
    oracle_bound(q)
}

/// Pooling bound at β = 1 with c = 32C₀²; logs the total sample size.
pub fn pooling_bound_beta1(q: &RateQuery) -> Result<BoundValue> {
    let c = 32.0 * q.c0.powi(2) * q.c_beta;
    let num = c * q.complexity(q.total());
    prefix_terms(q, |_, n_t, rho_bar| q.c_rho * root(num / n_t as f64, rho_bar))
}

/// Smallest prefix holding at least an α-fraction of all samples.
pub fn quantile_index(sizes: &[usize], alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha = {alpha} outside (0, 1]")));
    }
    let total: usize = sizes.iter().sum();
    let mut acc = 0usize;
    for (i, &n) in sizes.iter().enumerate() {
        acc += n;
        if acc as f64 >= alpha * total as f64 {
            return Ok(i + 1);
        }
    }
    Ok(sizes.len())
}

/// Quantile pooling bound; `per_t_terms` is ∞ except at t(α).
pub fn quantile_pooling_bound(q: &RateQuery, alpha: f64) -> Result<BoundValue> {
    q.validate()?;
    let t_alpha = quantile_index(&q.sizes, alpha)?;
    let total = q.total();
    if total == 0 {
        return Err(Error::Degenerate("no samples".into()));
    }
    let c = (32.0 * q.c0.powi(2) / alpha).powf(2.0 - q.beta) * q.c_beta;
    let rho_bar = avg_rho(&q.rhos, &q.sizes, t_alpha)?;
    let value = q.c_rho * root(c * q.complexity(total) / total as f64, (2.0 - q.beta) * rho_bar);
    let mut terms = vec![f64::INFINITY; q.rhos.len()];
    terms[t_alpha - 1] = value;
    Ok(BoundValue { value, argmin_t: t_alpha, per_t_terms: terms })
}

pub fn general_pooling_bound(q: &RateQuery) -> Result<BoundValue> {
    let total = q.total() as f64;
    let c = (32.0 * q.c0.powi(2)).powf(2.0 - q.beta) * q.c_beta;
    let num = c * q.complexity(q.total());
    prefix_terms(q, |_, n_t, rho_bar| {
        let denom = (n_t as f64).powf(2.0 - q.beta) * total.powf(-(1.0 - q.beta));
        q.c_rho * root(num / denom, (2.0 - q.beta) * rho_bar)
    })
}

/// KL(Bernoulli(p) ‖ Bernoulli(q)) in nats.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    let open = |x: f64| x > 0.0 && x < 1.0;
    if !open(p) || !open(q) {
        return Err(invalid(format!("Bernoulli parameters must lie in (0, 1), got p={p}, q={q}")));
    }
    Ok(p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln())
}

/// (1/4)·exp(−m₀²/(m p (1−p))), valid for p ≤ 1/2 and 0 ≤ m₀ ≤ m(1−2p).
pub fn slud_lower_bound(m: usize, p: f64, m0: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(invalid(format!("p = {p} outside (0, 1/2]")));
    }
    let mf = m as f64;
    if m == 0 || !(m0 >= 0.0 && m0 <= mf * (1.0 - 2.0 * p)) {
        return Err(invalid(format!("m0 = {m0} outside [0, m(1-2p)] for m = {m}")));
    }
    Ok(0.25 * (-(m0 * m0) / (mf * p * (1.0 - p))).exp())
}

pub const MAX_BINOMIAL_TRIALS: usize = 10_000;

/// Exact P(Bin(m, p) > k) by log-space summation of the upper tail.
pub fn binomial_tail_exact(m: usize, p: f64, k: i64) -> Result<f64> {
    if m > MAX_BINOMIAL_TRIALS {
        return Err(invalid(format!("m = {m} exceeds {MAX_BINOMIAL_TRIALS}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("p = {p} outside [0, 1]")));
    }
    if k < 0 {
        return Ok(1.0);
    }
    let k = k as usize;
    if k >= m {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    // log C(m, j) built incrementally
    let mut log_c = 0.0;
    let mut logs = Vec::with_capacity(m - k);
    for j in 1..=m {
        log_c += ((m - j + 1) as f64).ln() - (j as f64).ln();
        if j > k {
            logs.push(log_c + j as f64 * lp + (m - j) as f64 * lq);
        }
    }
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = logs.iter().map(|l| (l - mx).exp()).sum();
    Ok((mx + s.ln()).exp().min(1.0))
}

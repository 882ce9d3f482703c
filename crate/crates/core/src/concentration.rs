//! Empirical check of the uniform Bernstein event for non-identical samples.
//!
//! For a sample S of m independent points drawn from tasks P_1..P_k with
//! sizes n_1..n_k, expectations are size-weighted task averages. The event
//! holds when, for every ordered pair (h, h′) of a finite class,
//!
//! ```text
//! E[Ê_S(h;h′)] ≤ Ê_S(h;h′) + C₀ √(min{E[P̂_S(h≠h′)], P̂_S(h≠h′)} ε) + C₀ ε      (first)
//! ½ E[P̂_S(h≠h′)] − C₀ ε ≤ P̂_S(h≠h′) ≤ 2 E[P̂_S(h≠h′)] + C₀ ε                  (second)
//! ```
//!
//! with ε = ε(m, δ).

use serde::Serialize;

use crate::distributions::TaskDistribution;
use crate::error::{invalid, Error, Result};
use crate::hypothesis::{empirical_disagreement, empirical_risk, HypothesisClass};
use crate::procedures::MultiSample;
use crate::theory::eps;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BernsteinEvent {
    pub first_holds: bool,
    pub second_holds: bool,
    /// Largest violation of the first inequality (lhs − rhs; ≤ 0 when it holds).
    pub worst_first_gap: f64,
    pub worst_second_gap: f64,
    pub epsilon: f64,
}

/// Evaluates both inequalities on one draw; `tasks[i]` generated `sample.datasets[i]`.
pub fn check_uniform_bernstein(
    tasks: &[TaskDistribution],
    sample: &MultiSample,
    class: &HypothesisClass,
    c0: f64,
    delta: f64,
) -> Result<BernsteinEvent> {
    if !matches!(class, HypothesisClass::Finite { .. }) {
        return Err(Error::Unsupported("uniform Bernstein check needs a finite class".into()));
    }
    if tasks.len() != sample.datasets.len() {
        return Err(invalid("one task per dataset required"));
    }
    let m = sample.total();
    if m == 0 {
        return Err(invalid("sample is empty"));
    }
    let weights: Vec<f64> = sample.datasets.iter().map(|d| d.len() as f64 / m as f64).collect();
    let members = class.members();
    let pooled = sample.pooled();
    let e = eps(m, delta, class.vc_dimension());

    let mut exp_risk = Vec::with_capacity(members.len());
    for h in &members {
        let mut r = 0.0;
        for (task, w) in tasks.iter().zip(&weights) {
            r += w * task.risk(h)?;
        }
        exp_risk.push(r);
    }
    let emp_risk: Vec<f64> = members.iter().map(|h| empirical_risk(h, &pooled)).collect();

    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for (i, h) in members.iter().enumerate() {
        for (j, h2) in members.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut exp_dis = 0.0;
            for (task, w) in tasks.iter().zip(&weights) {
                exp_dis += w * task.disagreement(h, h2)?;
            }
            let emp_dis = empirical_disagreement(h, h2, &pooled);
            let lhs = exp_risk[i] - exp_risk[j];
            let rhs = emp_risk[i] - emp_risk[j] + c0 * (exp_dis.min(emp_dis) * e).sqrt() + c0 * e;
            first = first.max(lhs - rhs);
            second = second
                .max(0.5 * exp_dis - c0 * e - emp_dis)
                .max(emp_dis - 2.0 * exp_dis - c0 * e);
        }
    }
    Ok(BernsteinEvent {
        first_holds: first <= 0.0,
        second_holds: second <= 0.0,
        worst_first_gap: first,
        worst_second_gap: second,
        epsilon: e,
    })
}

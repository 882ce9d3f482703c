//! Multisource learners: target-only ERM, pooled ERM, the oracle prefix
//! procedure and the rank-based procedure.
//!
//! Tasks are indexed 0..=N with the target last. A [`Ranking`] lists task
//! indices by non-decreasing declared exponent; prefix `t` (1-based length)
//! is the union of the first `t` ranked datasets.
//!
//! ```text
//! H_(t) = { h : Ê_{Z^(t)}(h; ĥ_t) ≤ C₀ √(P̂_{Z^(t)}(h ≠ ĥ_t) ε_t) + C₀ ε_t },
//! ε_t   = ε(N_t, δ/(6t²))
//! ```

mod rank;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{default_grid, validate_bernstein, validate_transfer_exponent, ConditionReport, TaskDistribution};
use crate::error::{invalid, Error, Result};
use crate::hypothesis::{erm, erm_fit, Hypothesis, HypothesisClass, LabeledSample};
use crate::theory::{eps, oracle_bound, RateQuery};

pub use rank::{constraint_sets, ConstraintSets};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultisourceInstance {
    /// N sources followed by the target.
    pub tasks: Vec<TaskDistribution>,
    pub sample_sizes: Vec<usize>,
    #[serde(with = "crate::rho_serde::vec")]
    pub declared_rhos: Vec<f64>,
    pub beta: f64,
    pub c_beta: f64,
    pub c_rho: f64,
    pub class: HypothesisClass,
}

/// Result of checking an instance's shared optimum, transfer exponents and Bernstein condition.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    /// Tasks whose excess risk at the target's best-in-class hypothesis is nonzero.
    pub optimum_violations: Vec<usize>,
    pub transfer: Vec<ConditionReport>,
    pub bernstein: Vec<ConditionReport>,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.optimum_violations.is_empty()
            && self.transfer.iter().all(|r| r.holds)
            && self.bernstein.iter().all(|r| r.holds)
    }

    /// Human-readable failure lines; empty when everything holds.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.optimum_violations {
            out.push(format!("task {t}: target's best-in-class hypothesis is not optimal"));
        }
        for (t, r) in self.transfer.iter().enumerate().filter(|(_, r)| !r.holds) {
            out.push(format!("task {t}: transfer exponent fails (worst ratio {:.6e})", r.worst_ratio));
        }
        for (t, r) in self.bernstein.iter().enumerate().filter(|(_, r)| !r.holds) {
            out.push(format!("task {t}: Bernstein condition fails (worst ratio {:.6e})", r.worst_ratio));
        }
        out
    }
}

impl MultisourceInstance {
    pub fn new(
        tasks: Vec<TaskDistribution>,
        sample_sizes: Vec<usize>,
        declared_rhos: Vec<f64>,
        beta: f64,
        c_beta: f64,
        c_rho: f64,
        class: HypothesisClass,
    ) -> Result<Self> {
        let inst = MultisourceInstance { tasks, sample_sizes, declared_rhos, beta, c_beta, c_rho, class };
        inst.check_shape()?;
        Ok(inst)
    }

    pub fn check_shape(&self) -> Result<()> {
        let k = self.tasks.len();
        if k == 0 || self.sample_sizes.len() != k || self.declared_rhos.len() != k {
            return Err(invalid("tasks, sample sizes and exponents must have equal nonzero length"));
        }
        if self.declared_rhos[k - 1] != 1.0 {
            return Err(invalid("the target's exponent must be 1"));
        }
        if self.declared_rhos.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return Err(invalid("exponents must be positive"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid(format!("beta = {} outside [0, 1]", self.beta)));
        }
        self.class.validate()?;
        for t in &self.tasks {
            t.validate()?;
        }
        Ok(())
    }

    pub fn n_sources(&self) -> usize {
        self.tasks.len() - 1
    }

    pub fn target(&self) -> &TaskDistribution {
        self.tasks.last().expect("instance has a target")
    }

    pub fn ranking(&self) -> Ranking {
        Ranking::from_rhos(&self.declared_rhos)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MultiSample {
        MultiSample {
            datasets: self.tasks.iter().zip(&self.sample_sizes).map(|(d, &n)| d.sample(n, rng)).collect(),
        }
    }

    /// Checks the shared optimum, the declared exponents and the Bernstein condition.
    /// Identical (task, exponent) pairs are validated once.
    pub fn validate(&self) -> Result<AssumptionReport> {
        let target = self.target();
        let hstar = target.bayes_in_class(&self.class)?;
        let grid = default_grid(target, &self.class)?;
        let mut cache: Vec<(&TaskDistribution, f64, bool, ConditionReport, ConditionReport)> = Vec::new();
        let mut report = AssumptionReport { optimum_violations: Vec::new(), transfer: Vec::new(), bernstein: Vec::new() };
        for (t, (task, &rho)) in self.tasks.iter().zip(&self.declared_rhos).enumerate() {
            let hit = cache.iter().position(|(d, r, ..)| *d == task && *r == rho);
            let idx = match hit {
                Some(i) => i,
                None => {
                    let optimal = task.excess_risk(&hstar, &self.class)? <= 1e-12;
                    let tr = validate_transfer_exponent(task, target, &self.class, self.c_rho, rho, &grid)?;
                    let br = validate_bernstein(task, &self.class, self.c_beta, self.beta, &grid)?;
                    cache.push((task, rho, optimal, tr, br));
                    cache.len() - 1
                }
            };
            let (_, _, optimal, tr, br) = &cache[idx];
            if !optimal {
                report.optimum_violations.push(t);
            }
            report.transfer.push(tr.clone());
            report.bernstein.push(br.clone());
        }
        Ok(report)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MultiSample {
    /// N source datasets followed by the target dataset.
    pub datasets: Vec<LabeledSample>,
}

impl MultiSample {
    pub fn target(&self) -> &LabeledSample {
        self.datasets.last().expect("multisample has a target dataset")
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.datasets.iter().map(LabeledSample::len).collect()
    }

    pub fn total(&self) -> usize {
        self.datasets.iter().map(LabeledSample::len).sum()
    }

    pub fn pooled(&self) -> LabeledSample {
        let mut all = LabeledSample::new(Vec::with_capacity(self.total()));
        for d in &self.datasets {
            all.extend_from(d);
        }
        all
    }
}

/// Task indices ordered by non-decreasing declared exponent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    /// Any permutation of 0..len is accepted (misranked orders are allowed on purpose).
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("{order:?} is not a permutation")));
            }
        }
        Ok(Ranking { order })
    }

    /// Stable sort by exponent; ties keep task-index order.
    pub fn from_rhos(rhos: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..rhos.len()).collect();
        order.sort_by(|&a, &b| rhos[a].total_cmp(&rhos[b]));
        Ranking { order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_sorted_by(&self, rhos: &[f64]) -> bool {
        self.order.windows(2).all(|w| rhos[w[0]] <= rhos[w[1]])
    }

    pub fn apply<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.order.iter().map(|&i| values[i].clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    AnyHypothesis,
    #[default]
    PooledErm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureConfig {
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub fallback: Fallback,
}

fn default_c0() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.1
}

impl Default for ProcedureConfig {
    fn default() -> Self {
        ProcedureConfig { c0: 1.0, delta: 0.1, fallback: Fallback::PooledErm }
    }
}

impl ProcedureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0) {
            return Err(invalid(format!("C0 = {} must be positive", self.c0)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta = {} outside (0, 1)", self.delta)));
        }
        Ok(())
    }
}

pub fn target_only_erm(z: &MultiSample, class: &HypothesisClass) -> Result<Hypothesis> {
    let target = z.target();
    if target.is_empty() {
        return Err(Error::Degenerate("target dataset is empty".into()));
    }
    Ok(erm(class, target))
}

pub fn pool_erm(z: &MultiSample, class: &HypothesisClass) -> Hypothesis {
    erm(class, &z.pooled())
}

pub fn prefix_sample(z: &MultiSample, ranking: &Ranking, t: usize) -> Result<LabeledSample> {
    if t == 0 || t > ranking.len() || ranking.len() != z.datasets.len() {
        return Err(Error::IndexOutOfRange { index: t, max: ranking.len().min(z.datasets.len()) });
    }
    let mut out = LabeledSample::default();
    for &i in &ranking.order()[..t] {
        out.extend_from(&z.datasets[i]);
    }
    Ok(out)
}

/// argmin_t of the oracle bound over ranked exponents and sizes (smallest t on ties).
#[allow(clippy::too_many_arguments)]
pub fn oracle_select_t_star(
    rhos: &[f64],
    sizes: &[usize],
    beta: f64,
    c_beta: f64,
    c_rho: f64,
    vc: usize,
    config: &ProcedureConfig,
) -> Result<usize> {
    let q = RateQuery {
        rhos: rhos.to_vec(),
        sizes: sizes.to_vec(),
        beta,
        vc,
        delta: config.delta,
        c_beta,
        c_rho,
        c0: config.c0,
    };
    Ok(oracle_bound(&q)?.argmin_t)
}

/// ERM over the prefix chosen by the oracle rule, using the instance's declared exponents.
pub fn oracle_procedure(
    z: &MultiSample,
    ranking: &Ranking,
    instance: &MultisourceInstance,
    config: &ProcedureConfig,
) -> Result<Hypothesis> {
    let rhos = ranking.apply(&instance.declared_rhos);
    let sizes = ranking.apply(&z.sizes());
    let t = oracle_select_t_star(
        &rhos,
        &sizes,
        instance.beta,
        instance.c_beta,
        instance.c_rho,
        instance.class.vc_dimension(),
        config,
    )?;
    Ok(erm(&instance.class, &prefix_sample(z, ranking, t)?))
}

/// Integer form of the rank constraint: excess and disagreement counted on N_t points.
pub(crate) fn within_radius(excess: i64, disagree: u64, n_t: usize, t: usize, vc: usize, config: &ProcedureConfig) -> bool {
    if n_t == 0 {
        return true;
    }
    let e = eps(n_t, config.delta / (6.0 * (t * t) as f64), vc);
    let n = n_t as f64;
    excess as f64 / n <= config.c0 * (disagree as f64 / n * e).sqrt() + config.c0 * e
}

/// Membership of `h` in H_(t), computed directly on the prefix sample.
pub fn constraint_set_contains(
    h: &Hypothesis,
    prefix: &LabeledSample,
    t: usize,
    class: &HypothesisClass,
    config: &ProcedureConfig,
) -> bool {
    if prefix.is_empty() {
        return true;
    }
    let fit = erm_fit(class, prefix);
    let errors = prefix.iter().filter(|(x, y)| h.predict(*x) != *y).count();
    let disagree = prefix
        .iter()
        .filter(|(x, _)| h.predict(*x) != fit.hypothesis.predict(*x))
        .count();
    within_radius(
        errors as i64 - fit.errors as i64,
        disagree as u64,
        prefix.len(),
        t,
        class.vc_dimension(),
        config,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankOutcome {
    pub hypothesis: Hypothesis,
    /// The intersection of constraint sets was empty.
    pub fallback_used: bool,
    /// Number of pooled-sample behaviors in every constraint set.
    pub intersection_size: usize,
}

/// Returns the lowest-pooled-risk behavior lying in every H_(t), else the fallback.
pub fn rank_based_procedure(
    z: &MultiSample,
    ranking: &Ranking,
    class: &HypothesisClass,
    config: &ProcedureConfig,
) -> Result<RankOutcome> {
    if ranking.len() != z.datasets.len() {
        return Err(invalid("ranking length differs from the number of datasets"));
    }
    let mut alive: Option<Vec<bool>> = None;
    let run = rank::sweep(z, ranking, class, config, |_, member| match alive.as_mut() {
        None => alive = Some(member.to_vec()),
        Some(a) => a.iter_mut().zip(member).for_each(|(x, m)| *x &= *m),
    });
    let alive = alive.unwrap_or_else(|| vec![true; run.candidates.len()]);
    let intersection_size = alive.iter().filter(|a| **a).count();
    let chosen = (0..run.candidates.len()).filter(|&i| alive[i]).min_by(|&a, &b| {
        run.pooled_errors[a]
            .cmp(&run.pooled_errors[b])
            .then(run.widths[b].total_cmp(&run.widths[a]))
            .then(a.cmp(&b))
    });
    Ok(match chosen {
        Some(i) => RankOutcome { hypothesis: run.candidates[i].clone(), fallback_used: false, intersection_size },
        None => RankOutcome {
            hypothesis: match config.fallback {
                Fallback::PooledErm => pool_erm(z, class),
                Fallback::AnyHypothesis => class.default_hypothesis(),
            },
            fallback_used: true,
            intersection_size: 0,
        },
    })
}

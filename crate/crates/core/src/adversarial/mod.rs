//! Adversarial constructions: the two-point impossibility family, its
//! mixture-of-tasks sampler and likelihood machinery, the Varshamov–Gilbert
//! packing, and the packing-indexed lower-bound instances.
//!
//! Impossibility family on {x₀, x₁} (x₀ always labeled +1), with
//! ε = (n·N_P)^{−1/(2−β)} and ε₀ = 1 ∧ n_D^{−1/(2−β)}:
//!
//! ```text
//! D_σ: D_X(x₁) = ε₀^β / 2,  η(x₁) = 1/2 + σ c₀ ε₀^{1−β}
//! P_σ: P_X(x₁) = c₁ ε^β,    η(x₁) = 1/2 + σ ε^{1−β}
//! Q_σ: Q_X(x₁) = 1,         η(x₁) = 1/2 + σ/2
//! Γ_σ = (α_P P_σⁿ + α_Q Q_σⁿ)^N × D_σ^{n_D}
//! ```

mod gamma;
mod lower_bound;
mod packing;

use serde::{Deserialize, Serialize};

use crate::distributions::TaskDistribution;
use crate::error::{invalid, Result};
use crate::hypothesis::{HypothesisClass, Label};
use crate::procedures::MultisourceInstance;

pub use gamma::{
    bayes_discriminant, estimate_flip_probability, impossibility_statistics, likelihood_ratio_decomposed,
    likelihood_ratio_direct, sample_gamma, sample_gamma_stats, stats_of, verify_event_probabilities, Estimate,
    EventReport, GammaDraw, GammaStats, ImpossibilityStats, ImpossibilityTally,
};
pub use lower_bound::{build_lower_bound_instance, build_lower_bound_instance_with_sigma, lower_bound_class};
pub use packing::{vg_packing, SignVector};

/// Largest c₁ accepted; the flip-probability guarantee needs c₁ ≤ 2⁻¹⁰.
pub const C1_MAX: f64 = 1.0 / 64.0;
pub const C1_STRICT: f64 = 1.0 / 1024.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpossibilityParams {
    pub beta: f64,
    /// Points per source vector.
    pub n: usize,
    pub n_target: usize,
    pub n_p: usize,
    pub n_q: usize,
    pub c0: f64,
    pub c1: f64,
    pub sigma: Label,
}

impl ImpossibilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(invalid(format!("beta = {} outside [0, 1)", self.beta)));
        }
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if self.beta > 0.0 && self.n as f64 >= 2.0 / self.beta - 1.0 {
            return Err(invalid(format!("n = {} violates n < 2/beta - 1", self.n)));
        }
        if self.n_p == 0 {
            return Err(invalid("N_P must be at least 1"));
        }
        if !(self.c0 > 0.0 && self.c0 <= 0.25) {
            return Err(invalid(format!("c0 = {} outside (0, 1/4]", self.c0)));
        }
        if !(self.c1 > 0.0 && self.c1 <= C1_MAX) {
            return Err(invalid(format!("c1 = {} outside (0, 1/64]", self.c1)));
        }
        if self.margin_p() >= 0.5 {
            return Err(invalid(format!(
                "eps^(1-beta) = {} must be below 1/2; increase n * N_P",
                self.margin_p()
            )));
        }
        Ok(())
    }

    /// Unmet preconditions of the constant-probability flip guarantee.
    pub fn strict_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let (b, n) = (self.beta, self.n as f64);
        let nnp = n * self.n_p as f64;
        if self.c1 > C1_STRICT {
            w.push(format!("c1 = {} exceeds 2^-10", self.c1));
        }
        if self.n_q < 16 {
            w.push(format!("N_Q = {} is below 16", self.n_q));
        }
        if self.n_p < 3 * self.n_q {
            w.push(format!("N_P = {} is below 3 N_Q", self.n_p));
        }
        if nnp.powf((2.0 - 2.0 * b) / (2.0 - b)) < 4096.0 * n * n / self.c1 {
            w.push("(n N_P)^((2-2b)/(2-b)) >= 4096 n^2 / c1 fails".into());
        }
        let e = (2.0 - (n + 1.0) * b) / (2.0 - b);
        let nq = self.n_q as f64;
        if nnp.powf(e) < 4.0 * nq * nq * n * 2f64.powf(4.0 * n) * self.c1.powf(-n) {
            w.push("(n N_P)^((2-(n+1)b)/(2-b)) >= 4 N_Q^2 n 2^(4n) c1^-n fails".into());
        }
        if (self.n_p as f64).powf(e) < 22.0 * n * 2f64.powf(n) * self.c1.powf(-n) {
            w.push("N_P^((2-(n+1)b)/(2-b)) >= 22 n 2^n c1^-n fails".into());
        }
        w
    }

    pub fn epsilon(&self) -> f64 {
        ((self.n * self.n_p) as f64).powf(-1.0 / (2.0 - self.beta))
    }

    pub fn epsilon0(&self) -> f64 {
        if self.n_target == 0 {
            1.0
        } else {
            (self.n_target as f64).powf(-1.0 / (2.0 - self.beta)).min(1.0)
        }
    }

    pub fn n_tasks(&self) -> usize {
        self.n_p + self.n_q
    }

    pub fn alpha_p(&self) -> f64 {
        self.n_p as f64 / self.n_tasks() as f64
    }

    pub fn alpha_q(&self) -> f64 {
        self.n_q as f64 / self.n_tasks() as f64
    }

    /// P_X(x₁).
    pub fn mass_p(&self) -> f64 {
        self.c1 * self.epsilon().powf(self.beta)
    }

    /// ε^{1−β}: the P margin at x₁.
    pub fn margin_p(&self) -> f64 {
        self.epsilon().powf(1.0 - self.beta)
    }

    pub fn mass_target(&self) -> f64 {
        0.5 * self.epsilon0().powf(self.beta)
    }

    pub fn margin_target(&self) -> f64 {
        self.c0 * self.epsilon0().powf(1.0 - self.beta)
    }

    /// η_{P,s}(x₁).
    pub fn eta_p(&self, s: Label) -> f64 {
        0.5 + s.sign() as f64 * self.margin_p()
    }

    /// η_{D,s}(x₁).
    pub fn eta_target(&self, s: Label) -> f64 {
        0.5 + s.sign() as f64 * self.margin_target()
    }

    /// E[N̂_P] = N_P P_X(x₁)ⁿ (η₋ⁿ + η₊ⁿ).
    pub fn expected_hom_from_p(&self) -> f64 {
        let n = self.n as i32;
        self.n_p as f64 * self.mass_p().powi(n) * (self.eta_p(Label::Neg).powi(n) + self.eta_p(Label::Pos).powi(n))
    }

    /// Exponent of P relative to D:
    /// log(c₁^{−(2−β)} n N_P) / log(c₀^{−(2−β)} (1 ∨ n_D)).
    pub fn rho_p(&self) -> f64 {
        let k = 2.0 - self.beta;
        let num = (self.c1.powf(-k) * (self.n * self.n_p) as f64).ln();
        let den = (self.c0.powf(-k) * self.n_target.max(1) as f64).ln();
        num / den
    }

    /// Bernstein constant of the family: max{c₀^{−β}/2, 2}.
    pub fn c_beta(&self) -> f64 {
        (0.5 * self.c0.powf(-self.beta)).max(2.0)
    }

    /// Transfer constant of P and Q relative to D.
    pub fn c_rho(&self) -> f64 {
        3.0
    }

    pub fn with_sigma(&self, sigma: Label) -> Self {
        ImpossibilityParams { sigma, ..self.clone() }
    }
}

/// (D_σ, P_σ, Q_σ) as two-point tasks.
pub fn build_impossibility_tasks(p: &ImpossibilityParams) -> Result<(TaskDistribution, TaskDistribution, TaskDistribution)> {
    p.validate()?;
    let d = TaskDistribution::two_point(p.mass_target(), p.eta_target(p.sigma), 1.0)?;
    let src_p = TaskDistribution::two_point(p.mass_p(), p.eta_p(p.sigma), 1.0)?;
    let q = TaskDistribution::two_point(1.0, 0.5 + p.sigma.sign() as f64 * 0.5, 1.0)?;
    Ok((d, src_p, q))
}

/// Product-form instance with fixed task identities: N_P copies of P, then
/// N_Q copies of Q, then the target. Declared exponents are ρ_P for P and 1
/// for Q, so the exponent ranking puts every Q task first.
pub fn impossibility_instance(p: &ImpossibilityParams) -> Result<MultisourceInstance> {
    let (d, src_p, q) = build_impossibility_tasks(p)?;
    let mut tasks = vec![src_p; p.n_p];
    tasks.extend(std::iter::repeat_n(q, p.n_q));
    tasks.push(d);
    let mut sizes = vec![p.n; p.n_tasks()];
    sizes.push(p.n_target);
    let mut rhos = vec![p.rho_p(); p.n_p];
    rhos.extend(std::iter::repeat_n(1.0, p.n_q));
    rhos.push(1.0);
    MultisourceInstance::new(tasks, sizes, rhos, p.beta, p.c_beta(), p.c_rho(), HypothesisClass::two_point())
}

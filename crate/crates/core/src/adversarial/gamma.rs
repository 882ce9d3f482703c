//! Sampling Γ_σ, its sufficient statistics, and the likelihood ratio Γ₊/Γ₋.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use super::{build_impossibility_tasks, ImpossibilityParams};
use crate::error::{invalid, Error, Result};
use crate::hypothesis::{Label, LabeledSample, Point};
use crate::procedures::MultiSample;

/// Sufficient statistics of a draw Z ~ Γ_σ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct GammaStats {
    /// N̂₊, N̂₋: source vectors entirely at x₁ with a single label.
    pub hom_plus: u64,
    pub hom_minus: u64,
    /// n̂₊, n̂₋: labels at x₁ over all source vectors.
    pub n_plus: u64,
    pub n_minus: u64,
    /// ñ± = n̂± − n·N̂±.
    pub n_tilde_plus: u64,
    pub n_tilde_minus: u64,
    /// Labels at x₁ in the target dataset.
    pub target_plus: u64,
    pub target_minus: u64,
    /// N̂_P: homogeneous vectors generated by P.
    pub hom_from_p: u64,
    /// N̂_Q: vectors generated by Q (all homogeneous).
    pub q_vectors: u64,
}

/// A materialized draw with the hidden source of each vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaDraw {
    pub sample: MultiSample,
    pub from_q: Vec<bool>,
}

/// Materializes every vector; cost is O(N·n + n_D).
pub fn sample_gamma<R: Rng + ?Sized>(p: &ImpossibilityParams, rng: &mut R) -> Result<GammaDraw> {
    let (d, src_p, q) = build_impossibility_tasks(p)?;
    let alpha_q = p.alpha_q();
    let mut datasets = Vec::with_capacity(p.n_tasks() + 1);
    let mut from_q = Vec::with_capacity(p.n_tasks());
    for _ in 0..p.n_tasks() {
        let is_q = rng.random::<f64>() < alpha_q;
        datasets.push(if is_q { q.sample(p.n, rng) } else { src_p.sample(p.n, rng) });
        from_q.push(is_q);
    }
    datasets.push(d.sample(p.n_target, rng));
    Ok(GammaDraw { sample: MultiSample { datasets }, from_q })
}

#[derive(Clone, Copy, Default)]
struct VectorCounts {
    x0: u64,
    plus: u64,
    minus: u64,
}

fn count_vector(s: &LabeledSample) -> Result<VectorCounts> {
    let mut c = VectorCounts::default();
    for &(x, y) in s.iter() {
        match (x, y) {
            (Point::Atom(0), Label::Pos) => c.x0 += 1,
            (Point::Atom(1), Label::Pos) => c.plus += 1,
            (Point::Atom(1), Label::Neg) => c.minus += 1,
            _ => return Err(Error::OutsideSupport(format!("{x:?} labeled {y:?}"))),
        }
    }
    Ok(c)
}

/// Statistics of a materialized draw.
pub fn stats_of(draw: &GammaDraw, p: &ImpossibilityParams) -> Result<GammaStats> {
    let z = &draw.sample;
    if z.datasets.len() != p.n_tasks() + 1 || draw.from_q.len() != p.n_tasks() {
        return Err(invalid("draw does not match the parameter's task count"));
    }
    let mut st = GammaStats::default();
    for (s, &is_q) in z.datasets[..p.n_tasks()].iter().zip(&draw.from_q) {
        let c = count_vector(s)?;
        st.n_plus += c.plus;
        st.n_minus += c.minus;
        let len = s.len() as u64;
        let hom = c.plus == len || c.minus == len;
        if c.plus == len {
            st.hom_plus += 1;
        } else if c.minus == len {
            st.hom_minus += 1;
        }
        if is_q {
            st.q_vectors += 1;
        } else if hom {
            st.hom_from_p += 1;
        }
    }
    let n = p.n as u64;
    st.n_tilde_plus = st.n_plus - n * st.hom_plus;
    st.n_tilde_minus = st.n_minus - n * st.hom_minus;
    let t = count_vector(z.target())?;
    st.target_plus = t.plus;
    st.target_minus = t.minus;
    Ok(st)
}

/// Sequential-binomial multinomial draw.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, probs: &[f64]) -> Vec<u64> {
    let mut tail = vec![0.0; probs.len() + 1];
    for i in (0..probs.len()).rev() {
        tail[i] = tail[i + 1] + probs[i];
    }
    let mut left = trials;
    let mut out = vec![0; probs.len()];
    for i in 0..probs.len() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let q = if tail[i] > 0.0 { (probs[i] / tail[i]).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(left, q).expect("probability clamped to [0, 1]").sample(rng);
        out[i] = k;
        left -= k;
    }
    out
}

fn ln_choose(n: usize, k: usize) -> f64 {
    (1..=k).map(|j| ((n - k + j) as f64 / j as f64).ln()).sum()
}

/// Draws the statistics directly from closed-form counts, without
/// materializing vectors; distributed exactly as `stats_of(sample_gamma(..))`.
///
/// Each P vector falls in one category: k < n points at x₁ (labels drawn
/// afterwards in bulk), all n at x₁ with j plus labels for j = 0..=n.
pub fn sample_gamma_stats<R: Rng + ?Sized>(p: &ImpossibilityParams, rng: &mut R) -> Result<GammaStats> {
    p.validate()?;
    let n = p.n;
    let big_n = p.n_tasks() as u64;
    let k_q = Binomial::new(big_n, p.alpha_q()).expect("alpha in [0, 1]").sample(rng);
    let k_p = big_n - k_q;

    let pi = p.mass_p();
    let eta = p.eta_p(p.sigma);
    let (ln_pi, ln_rest) = (pi.ln(), (-pi).ln_1p());
    // categories: k = 0..n-1 points at x₁, then j = 0..=n plus labels with all n at x₁
    let mut probs = Vec::with_capacity(2 * n + 1);
    for k in 0..n {
        probs.push((ln_choose(n, k) + k as f64 * ln_pi + (n - k) as f64 * ln_rest).exp());
    }
    let (ln_eta, ln_eta_c) = (eta.ln(), (1.0 - eta).ln());
    for j in 0..=n {
        probs.push((n as f64 * ln_pi + ln_choose(n, j) + j as f64 * ln_eta + (n - j) as f64 * ln_eta_c).exp());
    }
    let counts = multinomial(rng, k_p, &probs);

    let partial: u64 = (0..n).map(|k| k as u64 * counts[k]).sum();
    let partial_plus = if partial > 0 { Binomial::new(partial, eta).expect("eta in (0, 1)").sample(rng) } else { 0 };
    let full = &counts[n..];
    let (hom_minus_p, hom_plus_p) = (full[0], full[n]);
    let mut mixed_plus = 0;
    let mut mixed_minus = 0;
    for (j, &c) in full.iter().enumerate().take(n).skip(1) {
        mixed_plus += j as u64 * c;
        mixed_minus += (n - j) as u64 * c;
    }

    let nn = n as u64;
    let mut st = GammaStats {
        n_tilde_plus: partial_plus + mixed_plus,
        n_tilde_minus: partial - partial_plus + mixed_minus,
        hom_plus: hom_plus_p,
        hom_minus: hom_minus_p,
        hom_from_p: hom_plus_p + hom_minus_p,
        q_vectors: k_q,
        ..GammaStats::default()
    };
    if p.sigma.is_pos() {
        st.hom_plus += k_q;
    } else {
        st.hom_minus += k_q;
    }
    st.n_plus = st.n_tilde_plus + nn * st.hom_plus;
    st.n_minus = st.n_tilde_minus + nn * st.hom_minus;

    let m = p.mass_target();
    let eta_d = p.eta_target(p.sigma);
    let t = multinomial(rng, p.n_target as u64, &[1.0 - m, m * eta_d, m * (1.0 - eta_d)]);
    st.target_plus = t[1];
    st.target_minus = t[2];
    Ok(st)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// ln Γ₊(Z) − ln Γ₋(Z), one mixture term per vector with log-sum-exp.
pub fn likelihood_ratio_direct(z: &MultiSample, p: &ImpossibilityParams) -> Result<f64> {
    p.validate()?;
    if z.datasets.len() != p.n_tasks() + 1 {
        return Err(invalid("sample does not match the parameter's task count"));
    }
    let pi = p.mass_p();
    let (ln_ap, ln_aq) = (p.alpha_p().ln(), p.alpha_q().ln());
    let log_gamma = |c: &VectorCounts, len: u64, s: Label| -> f64 {
        let eta = p.eta_p(s);
        let lp = c.x0 as f64 * (-pi).ln_1p() + c.plus as f64 * (pi * eta).ln() + c.minus as f64 * (pi * (1.0 - eta)).ln();
        let hom_s = if s.is_pos() { c.plus == len } else { c.minus == len };
        let lq = if hom_s { 0.0 } else { f64::NEG_INFINITY };
        log_sum_exp(ln_ap + lp, ln_aq + lq)
    };
    let mut total = 0.0;
    for s in &z.datasets[..p.n_tasks()] {
        let c = count_vector(s)?;
        let (lp, lm) = (log_gamma(&c, s.len() as u64, Label::Pos), log_gamma(&c, s.len() as u64, Label::Neg));
        if lp == f64::NEG_INFINITY && lm == f64::NEG_INFINITY {
            return Err(Error::OutsideSupport("vector has zero probability under both signs".into()));
        }
        total += lp - lm;
    }
    let t = count_vector(z.target())?;
    let m = p.mass_target();
    let ld = |s: Label| {
        let eta = p.eta_target(s);
        t.x0 as f64 * (-m).ln_1p() + t.plus as f64 * (m * eta).ln() + t.minus as f64 * (m * (1.0 - eta)).ln()
    };
    if t.plus + t.minus > 0 {
        total += ld(Label::Pos) - ld(Label::Neg);
    }
    Ok(total)
}

/// ln(1 + eˣ) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// ln((1/2 + a)/(1/2 − a)).
fn ln_odds(a: f64) -> f64 {
    (2.0 * a).ln_1p() - (-2.0 * a).ln_1p()
}

/// The three (coefficient, log-base) terms of the closed-form log-ratio:
/// (n̂₊ − n̂₋)·ln(η₊/η₋) + (N̂₊ − N̂₋)·ln(1 + α_Q/A) + (t₊ − t₋)·ln(η_{D,+}/η_{D,−}),
/// A = α_P (η_{P,+} P_X(x₁))ⁿ.
fn decomposed_terms(st: &GammaStats, p: &ImpossibilityParams) -> [(i64, f64); 3] {
    let hom_base = if p.n_q == 0 {
        0.0
    } else {
        let ln_a = p.alpha_p().ln() + p.n as f64 * (p.eta_p(Label::Pos).ln() + p.mass_p().ln());
        softplus(p.alpha_q().ln() - ln_a)
    };
    [
        (st.n_plus as i64 - st.n_minus as i64, ln_odds(p.margin_p())),
        (st.hom_plus as i64 - st.hom_minus as i64, hom_base),
        (st.target_plus as i64 - st.target_minus as i64, ln_odds(p.margin_target())),
    ]
}

pub fn likelihood_ratio_decomposed(st: &GammaStats, p: &ImpossibilityParams) -> Result<f64> {
    p.validate()?;
    Ok(decomposed_terms(st, p)
        .iter()
        .filter(|(c, _)| *c != 0)
        .map(|(c, b)| *c as f64 * b)
        .sum())
}

/// Sign of Γ₊(Z) − Γ₋(Z); ties go to −1. Terms with bit-identical log
/// bases are merged in integer arithmetic first, so exact cancellations
/// are detected without rounding.
pub fn bayes_discriminant(st: &GammaStats, p: &ImpossibilityParams) -> Result<Label> {
    p.validate()?;
    let mut merged: Vec<(i64, f64)> = Vec::with_capacity(3);
    for (c, b) in decomposed_terms(st, p) {
        if c == 0 || b == 0.0 {
            continue;
        }
        match merged.iter_mut().find(|(_, mb)| mb.to_bits() == b.to_bits()) {
            Some(m) => m.0 += c,
            None => merged.push((c, b)),
        }
    }
    let value: f64 = merged.iter().filter(|(c, _)| *c != 0).map(|(c, b)| *c as f64 * b).sum();
    Ok(Label::from_bool(value > 0.0))
}

/// A Monte Carlo frequency with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_count(hits: u64, reps: u64) -> Self {
        let p = if reps == 0 { 0.0 } else { hits as f64 / reps as f64 };
        Estimate { estimate: p, stderr: if reps == 0 { 0.0 } else { (p * (1.0 - p) / reps as f64).sqrt() } }
    }

    /// estimate ≥ bound − k·stderr.
    pub fn at_least(&self, bound: f64, k: f64) -> bool {
        self.estimate >= bound - k * self.stderr
    }
}

/// Event counts accumulated over replications under Γ₋.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ImpossibilityTally {
    pub reps: u64,
    pub flips: u64,
    pub hom_plus_wins: u64,
    pub e_p: u64,
    pub e_q: u64,
    pub e_pq: u64,
    pub target_event: u64,
}

impl ImpossibilityTally {
    pub fn add(&mut self, st: &GammaStats, p: &ImpossibilityParams) -> Result<()> {
        let e_np = p.expected_hom_from_p();
        let hp = st.hom_from_p as f64;
        let ep = e_np / 2.0 <= hp && hp <= 2.0 * e_np;
        let eq = st.q_vectors as f64 <= 2.0 * p.n_q as f64;
        self.reps += 1;
        self.flips += (bayes_discriminant(st, p)? == Label::Pos) as u64;
        self.hom_plus_wins += (st.hom_plus > st.hom_minus) as u64;
        self.e_p += ep as u64;
        self.e_q += eq as u64;
        self.e_pq += (ep && eq) as u64;
        self.target_event += (st.target_plus >= st.target_minus) as u64;
        Ok(())
    }

    pub fn merge(&mut self, other: &ImpossibilityTally) {
        self.reps += other.reps;
        self.flips += other.flips;
        self.hom_plus_wins += other.hom_plus_wins;
        self.e_p += other.e_p;
        self.e_q += other.e_q;
        self.e_pq += other.e_pq;
        self.target_event += other.target_event;
    }

    pub fn finish(&self) -> ImpossibilityStats {
        let e = |k| Estimate::from_count(k, self.reps);
        ImpossibilityStats {
            reps: self.reps,
            flip: e(self.flips),
            hom_plus_wins: e(self.hom_plus_wins),
            e_p: e(self.e_p),
            e_q: e(self.e_q),
            e_pq: e(self.e_pq),
            target_event: e(self.target_event),
        }
    }
}

/// Frequencies under Γ₋ of: the discriminant choosing +, N̂₊ > N̂₋, the
/// concentration events E_P, E_Q and their intersection, and D₊/D₋ ≥ 1 on
/// the target sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImpossibilityStats {
    pub reps: u64,
    pub flip: Estimate,
    pub hom_plus_wins: Estimate,
    pub e_p: Estimate,
    pub e_q: Estimate,
    pub e_pq: Estimate,
    pub target_event: Estimate,
}

fn require_minus(p: &ImpossibilityParams) -> Result<()> {
    if p.sigma != Label::Neg {
        return Err(invalid("flip probabilities are estimated under sigma = -1"));
    }
    Ok(())
}

pub fn impossibility_statistics<R: Rng + ?Sized>(p: &ImpossibilityParams, reps: u64, rng: &mut R) -> Result<ImpossibilityStats> {
    require_minus(p)?;
    let mut tally = ImpossibilityTally::default();
    for _ in 0..reps {
        tally.add(&sample_gamma_stats(p, rng)?, p)?;
    }
    Ok(tally.finish())
}

/// P_{Γ₋}(Γ₊(Z) > Γ₋(Z)).
pub fn estimate_flip_probability<R: Rng + ?Sized>(p: &ImpossibilityParams, reps: u64, rng: &mut R) -> Result<Estimate> {
    Ok(impossibility_statistics(p, reps, rng)?.flip)
}

/// Complement frequencies of E_P and E_Q against their Chernoff bounds
/// 2exp(−E[N̂_P]/8) and exp(−N_Q/3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EventReport {
    pub expected_hom_from_p: f64,
    pub e_p_failure: Estimate,
    pub e_p_bound: f64,
    pub e_q_failure: Estimate,
    pub e_q_bound: f64,
}

impl EventReport {
    /// Both failure frequencies sit below their bounds up to `k` standard errors.
    pub fn consistent(&self, k: f64) -> bool {
        self.e_p_failure.estimate <= self.e_p_bound + k * self.e_p_failure.stderr
            && self.e_q_failure.estimate <= self.e_q_bound + k * self.e_q_failure.stderr
    }
}

pub fn verify_event_probabilities<R: Rng + ?Sized>(p: &ImpossibilityParams, reps: u64, rng: &mut R) -> Result<EventReport> {
    let st = impossibility_statistics(p, reps, rng)?;
    let e_np = p.expected_hom_from_p();
    let fail = |e: Estimate| Estimate { estimate: 1.0 - e.estimate, stderr: e.stderr };
    Ok(EventReport {
        expected_hom_from_p: e_np,
        e_p_failure: fail(st.e_p),
        e_p_bound: (2.0 * (-e_np / 8.0).exp()).min(1.0),
        e_q_failure: fail(st.e_q),
        e_q_bound: (-(p.n_q as f64) / 3.0).exp(),
    })
}

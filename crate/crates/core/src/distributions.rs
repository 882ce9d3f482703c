//! Parametric task distributions with closed-form risks, samplers, and exact
//! validators for the Bernstein class condition and the transfer exponent.
//!
//! ```text
//! Bernstein (C_β, β):       P_X(h ≠ h*) ≤ C_β · E_P(h)^β
//! transfer exponent (C_ρ, ρ): E_D(h)    ≤ C_ρ · E_P(h)^{1/ρ}      (1/∞ = 0)
//! ```
//!
//! Atomic families place x₀ at atom 0 and x₁, …, x_d at atoms 1..=d.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hypothesis::{Hypothesis, HypothesisClass, Label, LabeledSample, Point, Side, MAX_FINITE_SUPPORT};

/// Slack for floating-point equality cases in the validators (e.g. a U[0,2]
/// source against a U[0,1] target holds with equality at ρ = 1).
pub const RATIO_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Uniform { a: f64, b: f64 },
    /// Density ∝ x^{ρ−1} on (0, b], normalized there.
    PowerLaw { rho: f64, b: f64 },
}

impl Marginal {
    fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Uniform { a, b } if !(a.is_finite() && b.is_finite() && a < b) => {
                Err(invalid(format!("uniform marginal needs a < b, got [{a}, {b}]")))
            }
            Marginal::PowerLaw { rho, b } if !(rho >= 1.0 && rho.is_finite() && b > 0.0 && b.is_finite()) => {
                Err(invalid(format!("power-law marginal needs rho >= 1 and b > 0, got rho={rho}, b={b}")))
            }
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Marginal::PowerLaw { rho, b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= b {
                    1.0
                } else {
                    (x / b).powf(rho)
                }
            }
        }
    }

    /// Mass of the half-open interval between `x` and `y`.
    pub fn mass_between(&self, x: f64, y: f64) -> f64 {
        (self.cdf(x) - self.cdf(y)).abs()
    }

    fn quantile(&self, u: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => a + (b - a) * u,
            Marginal::PowerLaw { rho, b } => b * u.powf(1.0 / rho),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    #[default]
    Realizable,
    /// Each clean label is flipped independently with probability q ≤ 1/2.
    Flip { q: f64 },
}

impl Noise {
    pub fn q(&self) -> f64 {
        match *self {
            Noise::Realizable => 0.0,
            Noise::Flip { q } => q,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskDistribution {
    TwoPoint {
        mass_x1: f64,
        eta_x1: f64,
        eta_x0: f64,
    },
    FinitePoints {
        masses: Vec<f64>,
        etas: Vec<f64>,
    },
    ThresholdFamily {
        marginal: Marginal,
        hstar_cut: f64,
        #[serde(default)]
        side: Side,
        #[serde(default)]
        noise: Noise,
    },
}

fn unsupported(what: &str) -> Error {
    Error::Unsupported(what.to_string())
}

impl TaskDistribution {
    pub fn two_point(mass_x1: f64, eta_x1: f64, eta_x0: f64) -> Result<Self> {
        let d = TaskDistribution::TwoPoint { mass_x1, eta_x1, eta_x0 };
        d.validate()?;
        Ok(d)
    }

    pub fn finite_points(masses: Vec<f64>, etas: Vec<f64>) -> Result<Self> {
        let d = TaskDistribution::FinitePoints { masses, etas };
        d.validate()?;
        Ok(d)
    }

    pub fn threshold(marginal: Marginal, hstar_cut: f64, side: Side, noise: Noise) -> Result<Self> {
        let d = TaskDistribution::ThresholdFamily { marginal, hstar_cut, side, noise };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        match self {
            TaskDistribution::TwoPoint { mass_x1, eta_x1, eta_x0 } => {
                unit("mass_x1", *mass_x1)?;
                unit("eta_x1", *eta_x1)?;
                unit("eta_x0", *eta_x0)
            }
            TaskDistribution::FinitePoints { masses, etas } => {
                if masses.is_empty() || masses.len() != etas.len() || masses.len() > MAX_FINITE_SUPPORT {
                    return Err(invalid(format!(
                        "finite distribution needs 1..={MAX_FINITE_SUPPORT} masses matching etas, got {} and {}",
                        masses.len(),
                        etas.len()
                    )));
                }
                for &m in masses {
                    unit("mass", m)?;
                }
                for &e in etas {
                    unit("eta", e)?;
                }
                let total: f64 = masses.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("masses sum to {total}, not 1")));
                }
                Ok(())
            }
            TaskDistribution::ThresholdFamily { marginal, hstar_cut, noise, .. } => {
                marginal.validate()?;
                if !hstar_cut.is_finite() {
                    return Err(invalid("hstar_cut must be finite"));
                }
                let q = noise.q();
                if !(0.0..=0.5).contains(&q) {
                    return Err(invalid(format!("flip probability {q} outside [0, 1/2]")));
                }
                Ok(())
            }
        }
    }

    /// Masses and conditionals of an atomic family.
    pub fn atoms(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            TaskDistribution::TwoPoint { mass_x1, eta_x1, eta_x0 } => {
                Some((vec![1.0 - mass_x1, *mass_x1], vec![*eta_x0, *eta_x1]))
            }
            TaskDistribution::FinitePoints { masses, etas } => Some((masses.clone(), etas.clone())),
            TaskDistribution::ThresholdFamily { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> LabeledSample {
        let mut out = Vec::with_capacity(n);
        match self {
            TaskDistribution::ThresholdFamily { marginal, hstar_cut, side, noise } => {
                let hstar = Hypothesis::threshold(*hstar_cut, *side);
                let q = noise.q();
                for _ in 0..n {
                    let x = Point::Real(marginal.quantile(rng.random::<f64>()));
                    let mut y = hstar.predict(x);
                    if q > 0.0 && rng.random::<f64>() < q {
                        y = y.flip();
                    }
                    out.push((x, y));
                }
            }
            _ => {
                let (masses, etas) = self.atoms().expect("atomic family");
                let mut cum = Vec::with_capacity(masses.len());
                let mut acc = 0.0;
                for m in &masses {
                    acc += m;
                    cum.push(acc);
                }
                let last = masses.iter().rposition(|&m| m > 0.0).unwrap_or(0);
                for _ in 0..n {
                    let u = rng.random::<f64>();
                    let i = cum.iter().position(|&c| u < c).unwrap_or(last).min(last);
                    let y = Label::from_bool(rng.random::<f64>() < etas[i]);
                    out.push((Point::Atom(i), y));
                }
            }
        }
        LabeledSample::new(out)
    }

    /// Population risk R(h).
    pub fn risk(&self, h: &Hypothesis) -> Result<f64> {
        match self {
            TaskDistribution::ThresholdFamily { marginal, hstar_cut, side, noise } => {
                let dis = threshold_disagreement(marginal, h, &Hypothesis::threshold(*hstar_cut, *side))?;
                let q = noise.q();
                Ok(q + (1.0 - 2.0 * q) * dis)
            }
            _ => {
                let (masses, etas) = self.atoms().expect("atomic family");
                self.check_atoms_fit(h)?;
                Ok((0..masses.len())
                    .map(|i| masses[i] * atom_cost(etas[i], h.predict(Point::Atom(i))))
                    .sum())
            }
        }
    }

    /// P_X(h ≠ h').
    pub fn disagreement(&self, h: &Hypothesis, h2: &Hypothesis) -> Result<f64> {
        match self {
            TaskDistribution::ThresholdFamily { marginal, .. } => threshold_disagreement(marginal, h, h2),
            _ => {
                let (masses, _) = self.atoms().expect("atomic family");
                self.check_atoms_fit(h)?;
                self.check_atoms_fit(h2)?;
                Ok((0..masses.len())
                    .filter(|&i| h.predict(Point::Atom(i)) != h2.predict(Point::Atom(i)))
                    .map(|i| masses[i])
                    .sum())
            }
        }
    }

    fn check_atoms_fit(&self, h: &Hypothesis) -> Result<()> {
        let k = self.atoms().map(|(m, _)| m.len()).unwrap_or(0);
        match h {
            Hypothesis::Table { labels } if labels.len() != k => Err(invalid(format!(
                "table over {} points evaluated on a {k}-point distribution",
                labels.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Exact best-in-class hypothesis (lowest index / canonical cut on ties).
    pub fn bayes_in_class(&self, class: &HypothesisClass) -> Result<Hypothesis> {
        match (self, class) {
            (TaskDistribution::ThresholdFamily { hstar_cut, side, .. }, HypothesisClass::Thresholds { lo, hi, side: cs }) => {
                if side != cs {
                    return Err(unsupported("threshold class orientation differs from the distribution's h*"));
                }
                Ok(Hypothesis::threshold(hstar_cut.clamp(*lo, *hi), *side))
            }
            (TaskDistribution::ThresholdFamily { .. }, HypothesisClass::Finite { .. }) => {
                Err(unsupported("finite class on a continuous threshold family"))
            }
            (_, HypothesisClass::Finite { .. }) => {
                let mut best: Option<(Hypothesis, f64)> = None;
                for h in class.members() {
                    let r = self.risk(&h)?;
                    if best.as_ref().is_none_or(|(_, b)| r < *b) {
                        best = Some((h, r));
                    }
                }
                Ok(best.expect("validated class has members").0)
            }
            (_, HypothesisClass::Thresholds { lo, hi, side }) => {
                let k = self.atoms().expect("atomic family").0.len();
                let mut cuts = vec![*lo, *hi];
                cuts.extend((0..k).flat_map(|i| [i as f64, i as f64 + 0.5]).filter(|c| (*lo..=*hi).contains(c)));
                let mut best: Option<(Hypothesis, f64)> = None;
                for c in cuts {
                    let h = Hypothesis::threshold(c, *side);
                    let r = self.risk(&h)?;
                    if best.as_ref().is_none_or(|(_, b)| r < *b) {
                        best = Some((h, r));
                    }
                }
                Ok(best.expect("nonempty cut list").0)
            }
        }
    }

    /// E(h) = R(h) − inf_H R, evaluated without cancellation against the best risk.
    pub fn excess_risk(&self, h: &Hypothesis, class: &HypothesisClass) -> Result<f64> {
        let best = self.bayes_in_class(class)?;
        match self {
            TaskDistribution::ThresholdFamily { marginal, hstar_cut, side, noise } => {
                let hstar = Hypothesis::threshold(*hstar_cut, *side);
                let d = threshold_disagreement(marginal, h, &hstar)? - threshold_disagreement(marginal, &best, &hstar)?;
                Ok(((1.0 - 2.0 * noise.q()) * d).max(0.0))
            }
            _ => {
                let (masses, etas) = self.atoms().expect("atomic family");
                self.check_atoms_fit(h)?;
                let e: f64 = (0..masses.len())
                    .filter_map(|i| {
                        let a = h.predict(Point::Atom(i));
                        let b = best.predict(Point::Atom(i));
                        (a != b).then(|| masses[i] * (atom_cost(etas[i], a) - atom_cost(etas[i], b)))
                    })
                    .sum();
                Ok(e.max(0.0))
            }
        }
    }
}

fn atom_cost(eta: f64, label: Label) -> f64 {
    if label.is_pos() {
        1.0 - eta
    } else {
        eta
    }
}

fn threshold_disagreement(marginal: &Marginal, h: &Hypothesis, h2: &Hypothesis) -> Result<f64> {
    match (h, h2) {
        (Hypothesis::Threshold { cut: a, side: sa }, Hypothesis::Threshold { cut: b, side: sb }) => {
            let between = marginal.mass_between(*a, *b);
            Ok(if sa == sb { between } else { 1.0 - between })
        }
        _ => Err(unsupported("table hypothesis on a continuous threshold family")),
    }
}

/// Outcome of a grid check of a population condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub worst_hypothesis: Hypothesis,
    /// max over the grid of lhs / rhs (0/0 = 0, x/0 = ∞).
    pub worst_ratio: f64,
    pub grid_size: usize,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 0.0 {
        0.0
    } else if rhs <= 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

fn report(grid: &[Hypothesis], mut eval: impl FnMut(&Hypothesis) -> Result<f64>) -> Result<ConditionReport> {
    if grid.is_empty() {
        return Err(invalid("validation grid is empty"));
    }
    let mut worst = (0usize, f64::NEG_INFINITY);
    for (i, h) in grid.iter().enumerate() {
        let r = eval(h)?;
        if r > worst.1 {
            worst = (i, r);
        }
    }
    Ok(ConditionReport {
        holds: worst.1 <= 1.0 + RATIO_TOL,
        worst_hypothesis: grid[worst.0].clone(),
        worst_ratio: worst.1,
        grid_size: grid.len(),
    })
}

/// Checks P(h ≠ h*) ≤ C_β E_P(h)^β on every grid hypothesis.
pub fn validate_bernstein(
    dist: &TaskDistribution,
    class: &HypothesisClass,
    c_beta: f64,
    beta: f64,
    grid: &[Hypothesis],
) -> Result<ConditionReport> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("beta = {beta} outside [0, 1]")));
    }
    let hstar = dist.bayes_in_class(class)?;
    report(grid, |h| {
        let lhs = dist.disagreement(h, &hstar)?;
        let rhs = c_beta * dist.excess_risk(h, class)?.powf(beta);
        Ok(ratio(lhs, rhs))
    })
}

/// Checks E_target(h) ≤ C_ρ E_source(h)^{1/ρ} on every grid hypothesis; ρ may be ∞.
pub fn validate_transfer_exponent(
    source: &TaskDistribution,
    target: &TaskDistribution,
    class: &HypothesisClass,
    c_rho: f64,
    rho: f64,
    grid: &[Hypothesis],
) -> Result<ConditionReport> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(invalid(format!("rho = {rho} must be positive")));
    }
    report(grid, |h| {
        let lhs = target.excess_risk(h, class)?;
        let rhs = c_rho * source.excess_risk(h, class)?.powf(1.0 / rho);
        Ok(ratio(lhs, rhs))
    })
}

/// Smallest ρ for which the transfer relation holds on the grid, found on a
/// dyadic grid 2^-10..2^10 and refined by geometric bisection to relative
/// tolerance 1e-3. Returns ∞ when no finite ρ on the search grid works.
pub fn estimate_min_rho(
    source: &TaskDistribution,
    target: &TaskDistribution,
    class: &HypothesisClass,
    c_rho: f64,
    grid: &[Hypothesis],
) -> Result<f64> {
    let holds = |rho: f64| -> Result<bool> {
        Ok(validate_transfer_exponent(source, target, class, c_rho, rho, grid)?.holds)
    };
    let mut prev: Option<f64> = None;
    for k in -10..=10 {
        let rho = 2f64.powi(k);
        if holds(rho)? {
            let Some(mut lo) = prev else { return Ok(rho) };
            let mut hi = rho;
            while hi / lo - 1.0 > 1e-3 {
                let mid = (lo * hi).sqrt();
                if holds(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(hi);
        }
        prev = Some(rho);
    }
    Ok(f64::INFINITY)
}

/// Validator grid: all members of a finite class, or 200 threshold cuts placed
/// geometrically around `center` (offsets from the domain span down to 1e-12 of it).
pub fn validation_grid(class: &HypothesisClass, center: &Hypothesis) -> Vec<Hypothesis> {
    match class {
        HypothesisClass::Finite { .. } => class.members(),
        HypothesisClass::Thresholds { lo, hi, side } => {
            let c = match center {
                Hypothesis::Threshold { cut, .. } => cut.clamp(*lo, *hi),
                Hypothesis::Table { .. } => 0.5 * (lo + hi),
            };
            let span = (hi - c).max(c - lo);
            let mut cuts = Vec::with_capacity(200);
            for k in 0..100 {
                let off = span * 10f64.powf(-12.0 * k as f64 / 99.0);
                cuts.push((c - off).clamp(*lo, *hi));
                cuts.push((c + off).clamp(*lo, *hi));
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cuts.into_iter().map(|x| Hypothesis::threshold(x, *side)).collect()
        }
    }
}

/// Grid centered on the distribution's best-in-class hypothesis.
pub fn default_grid(dist: &TaskDistribution, class: &HypothesisClass) -> Result<Vec<Hypothesis>> {
    Ok(validation_grid(class, &dist.bayes_in_class(class)?))
}

/// Source/target pair with σ = −1 on which pooling hurts the target:
/// ε = n_P^{−1/(2−β)}, P_X(x₁) = ε^β, η_P(x₁) = 1/2 − c₂ε^{1−β}; D_X(x₁) = 1/2, η_D(x₁) = 1/4.
pub fn make_asymmetry_pair(beta: f64, n_p: usize, c2: f64) -> Result<(TaskDistribution, TaskDistribution)> {
    if !(0.0..1.0).contains(&beta) {
        return Err(invalid(format!("beta = {beta} outside [0, 1)")));
    }
    if n_p == 0 {
        return Err(invalid("n_P must be at least 1"));
    }
    if !(c2 > 0.0 && c2 <= 1.0 / (8.0 * 2f64.sqrt())) {
        return Err(invalid(format!("c2 = {c2} outside (0, 1/(8√2)]")));
    }
    let eps = (n_p as f64).powf(-1.0 / (2.0 - beta));
    let p = TaskDistribution::two_point(eps.powf(beta), 0.5 - c2 * eps.powf(1.0 - beta), 1.0)?;
    let d = TaskDistribution::two_point(0.5, 0.25, 1.0)?;
    Ok((p, d))
}

/// One FinitePoints task per exponent: x₀ carries 1 − ε^{ρβ} with label +1,
/// each xᵢ carries ε^{ρβ}/d with η = 1/2 + σᵢ ε^{ρ(1−β)}/2. ρ = ∞ is a point mass at x₀.
pub fn make_lower_bound_family(
    rhos: &[f64],
    beta: f64,
    epsilon: f64,
    d: usize,
    sigma: &[Label],
) -> Result<Vec<TaskDistribution>> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("beta = {beta} outside [0, 1]")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    if d == 0 || d + 1 > MAX_FINITE_SUPPORT {
        return Err(invalid(format!("d = {d} outside 1..={}", MAX_FINITE_SUPPORT - 1)));
    }
    if sigma.len() != d {
        return Err(invalid(format!("sign vector has length {}, expected {d}", sigma.len())));
    }
    rhos.iter()
        .map(|&rho| {
            if !(rho >= 1.0) {
                return Err(invalid(format!("rho = {rho} must be >= 1")));
            }
            let (x0_mass, margin) = if rho.is_infinite() {
                (1.0, 0.0)
            } else {
                (1.0 - epsilon.powf(rho * beta), epsilon.powf(rho * (1.0 - beta)))
            };
            let each = (1.0 - x0_mass) / d as f64;
            let mut masses = vec![x0_mass];
            let mut etas = vec![1.0];
            for s in sigma {
                masses.push(each);
                etas.push(0.5 + s.sign() as f64 * margin / 2.0);
            }
            TaskDistribution::finite_points(masses, etas)
        })
        .collect()
}

//! Binary classifiers, hypothesis classes and exact empirical risk minimization.
//!
//! Two classes are supported: one-sided thresholds on an interval and finite
//! label tables over a small atomic support. Atoms `0..k` double as real
//! coordinates when a threshold is evaluated on them.
//!
//! ```text
//! R̂_S(h)     = |S|⁻¹ Σ 1{h(x) ≠ y}          (0 on the empty sample)
//! P̂_S(h≠h')  = |S|⁻¹ Σ 1{h(x) ≠ h'(x)}
//! Ê_S(h; h') = R̂_S(h) − R̂_S(h')
//! ```

use serde::{Deserialize, Serialize};

use crate::distributions::TaskDistribution;
use crate::error::{invalid, Result};

/// A label in {−1, +1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Label::Neg => -1,
            Label::Pos => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }

    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.sign()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Label::Neg),
            1 => Ok(Label::Pos),
            other => Err(format!("label must be -1 or 1, got {other}")),
        }
    }
}

/// A point of the instance space: a real coordinate or an atom id.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Real(f64),
    Atom(usize),
}

impl Point {
    /// Coordinate used by thresholds; atom `i` sits at `i`.
    pub fn coord(self) -> f64 {
        match self {
            Point::Real(x) => x,
            Point::Atom(i) => i as f64,
        }
    }

    pub fn atom(self) -> Option<usize> {
        match self {
            Point::Atom(i) => Some(i),
            Point::Real(_) => None,
        }
    }
}

/// Which side of the cut is labeled +1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// h(x) = +1 iff x ≤ cut.
    #[default]
    Left,
    /// h(x) = +1 iff x > cut.
    Right,
}

impl Side {
    /// Label assigned to points with x ≤ cut.
    pub fn inside_label(self) -> Label {
        match self {
            Side::Left => Label::Pos,
            Side::Right => Label::Neg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Threshold { cut: f64, side: Side },
    Table { labels: Vec<Label> },
}

impl Hypothesis {
    pub fn threshold(cut: f64, side: Side) -> Self {
        Hypothesis::Threshold { cut, side }
    }

    /// Panics when a table is evaluated off its support; that is a caller bug.
    pub fn predict(&self, x: Point) -> Label {
        match self {
            Hypothesis::Threshold { cut, side } => {
                if x.coord() <= *cut {
                    side.inside_label()
                } else {
                    side.inside_label().flip()
                }
            }
            Hypothesis::Table { labels } => {
                let i = x
                    .atom()
                    .expect("table hypothesis evaluated on a real-valued point");
                labels[i]
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub points: Vec<(Point, Label)>,
}

impl LabeledSample {
    pub fn new(points: Vec<(Point, Label)>) -> Self {
        LabeledSample { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, x: Point, y: Label) {
        self.points.push((x, y));
    }

    pub fn extend_from(&mut self, other: &LabeledSample) {
        self.points.extend_from_slice(&other.points);
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Point, Label)> {
        self.points.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HypothesisClass {
    Thresholds {
        lo: f64,
        hi: f64,
        #[serde(default)]
        side: Side,
    },
    Finite {
        /// Atoms are `0..support`.
        support: usize,
        members: Vec<Vec<Label>>,
    },
}

/// Support sizes above this are rejected (VC dimension is computed exhaustively).
pub const MAX_FINITE_SUPPORT: usize = 16;

impl HypothesisClass {
    pub fn thresholds(lo: f64, hi: f64, side: Side) -> Result<Self> {
        let c = HypothesisClass::Thresholds { lo, hi, side };
        c.validate()?;
        Ok(c)
    }

    pub fn finite(support: usize, members: Vec<Vec<Label>>) -> Result<Self> {
        let c = HypothesisClass::Finite { support, members };
        c.validate()?;
        Ok(c)
    }

    /// The class {h₊, h₋} on {x₀, x₁}: both label x₀ as +1, members differ at x₁.
    pub fn two_point() -> Self {
        HypothesisClass::Finite {
            support: 2,
            members: vec![vec![Label::Pos, Label::Pos], vec![Label::Pos, Label::Neg]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HypothesisClass::Thresholds { lo, hi, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(invalid(format!("threshold domain [{lo}, {hi}] is not a proper interval")));
                }
            }
            HypothesisClass::Finite { support, members } => {
                if *support == 0 || *support > MAX_FINITE_SUPPORT {
                    return Err(invalid(format!("finite support size {support} outside 1..={MAX_FINITE_SUPPORT}")));
                }
                if members.is_empty() {
                    return Err(invalid("finite class has no members"));
                }
                if let Some(m) = members.iter().find(|m| m.len() != *support) {
                    return Err(invalid(format!(
                        "member labels {} points, support has {support}",
                        m.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Lower-bound constructions need at least three members.
    pub fn check_nontrivial(&self) -> Result<()> {
        match self {
            HypothesisClass::Finite { members, .. } if members.len() < 3 => {
                Err(invalid("class must contain at least 3 hypotheses"))
            }
            _ => Ok(()),
        }
    }

    pub fn member(&self, i: usize) -> Option<Hypothesis> {
        match self {
            HypothesisClass::Finite { members, .. } => members
                .get(i)
                .map(|labels| Hypothesis::Table { labels: labels.clone() }),
            HypothesisClass::Thresholds { .. } => None,
        }
    }

    pub fn members(&self) -> Vec<Hypothesis> {
        match self {
            HypothesisClass::Finite { members, .. } => members
                .iter()
                .map(|labels| Hypothesis::Table { labels: labels.clone() })
                .collect(),
            HypothesisClass::Thresholds { .. } => Vec::new(),
        }
    }

    /// Returned by ERM on an empty sample.
    pub fn default_hypothesis(&self) -> Hypothesis {
        match self {
            HypothesisClass::Thresholds { lo, hi, side } => Hypothesis::threshold(0.5 * (lo + hi), *side),
            HypothesisClass::Finite { .. } => self.member(0).expect("validated class has members"),
        }
    }

    pub fn vc_dimension(&self) -> usize {
        match self {
            HypothesisClass::Thresholds { .. } => 1,
            HypothesisClass::Finite { support, members } => {
                let masks: Vec<u32> = members.iter().map(|m| label_mask(m)).collect();
                let kmax = (*support).min(usize::BITS as usize - 1 - masks.len().leading_zeros() as usize);
                let mut patterns = Vec::with_capacity(masks.len());
                // largest first, so big classes stop at the first shattered subset
                for k in (1..=kmax).rev() {
                    for subset in (1u32..(1u32 << support)).filter(|s| s.count_ones() as usize == k) {
                        patterns.clear();
                        patterns.extend(masks.iter().map(|m| m & subset));
                        patterns.sort_unstable();
                        patterns.dedup();
                        if patterns.len() == 1usize << k {
                            return k;
                        }
                    }
                }
                0
            }
        }
    }
}

fn label_mask(labels: &[Label]) -> u32 {
    labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_pos())
        .fold(0, |acc, (i, _)| acc | (1 << i))
}

pub fn empirical_risk(h: &Hypothesis, s: &LabeledSample) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let errors = s.iter().filter(|(x, y)| h.predict(*x) != *y).count();
    errors as f64 / s.len() as f64
}

pub fn empirical_disagreement(h: &Hypothesis, h2: &Hypothesis, s: &LabeledSample) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let d = s.iter().filter(|(x, _)| h.predict(*x) != h2.predict(*x)).count();
    d as f64 / s.len() as f64
}

pub fn excess_empirical_risk(h: &Hypothesis, h2: &Hypothesis, s: &LabeledSample) -> f64 {
    empirical_risk(h, s) - empirical_risk(h2, s)
}

/// ERM result with its error count.
#[derive(Clone, Debug, PartialEq)]
pub struct ErmFit {
    pub hypothesis: Hypothesis,
    pub errors: usize,
    /// The sample was empty and the class default was returned.
    pub empty_sample: bool,
}

pub fn erm(class: &HypothesisClass, s: &LabeledSample) -> Hypothesis {
    erm_fit(class, s).hypothesis
}

pub fn erm_fit(class: &HypothesisClass, s: &LabeledSample) -> ErmFit {
    if s.is_empty() {
        return ErmFit {
            hypothesis: class.default_hypothesis(),
            errors: 0,
            empty_sample: true,
        };
    }
    match class {
        HypothesisClass::Thresholds { lo, hi, side } => {
            let cells = Cells::from_points(s.iter().copied());
            let best = cells.sweep(*lo, *hi, *side);
            ErmFit {
                hypothesis: Hypothesis::threshold(best.cut, *side),
                errors: best.errors as usize,
                empty_sample: false,
            }
        }
        HypothesisClass::Finite { support, members } => {
            let counts = AtomCounts::from_points(*support, s.iter().copied());
            let (idx, errors) = counts.best_member(members);
            ErmFit {
                hypothesis: Hypothesis::Table { labels: members[idx].clone() },
                errors: errors as usize,
                empty_sample: false,
            }
        }
    }
}

/// Exact excess risk over the best in class, from closed-form population risks.
pub fn population_excess_risk(h: &Hypothesis, dist: &TaskDistribution, class: &HypothesisClass) -> Result<f64> {
    dist.excess_risk(h, class)
}

/// Label counts at distinct coordinates, sorted by coordinate.
#[derive(Clone, Debug, Default)]
pub(crate) struct Cells {
    pub xs: Vec<f64>,
    pub pos: Vec<u64>,
    pub neg: Vec<u64>,
}

/// One feasible cut behavior: the first `k` cells lie at or below the cut.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct CutChoice {
    pub k: usize,
    pub cut: f64,
    pub width: f64,
    pub errors: u64,
}

impl Cells {
    pub fn from_points(points: impl Iterator<Item = (Point, Label)>) -> Self {
        let mut v: Vec<(f64, Label)> = points.map(|(x, y)| (x.coord(), y)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cells = Cells::default();
        for (x, y) in v {
            if cells.xs.last() != Some(&x) {
                cells.xs.push(x);
                cells.pos.push(0);
                cells.neg.push(0);
            }
            let j = cells.xs.len() - 1;
            if y.is_pos() {
                cells.pos[j] += 1;
            } else {
                cells.neg[j] += 1;
            }
        }
        cells
    }

    /// Cut interval of behavior `k`, clipped to the domain; `None` if no cut in
    /// `[lo, hi]` realizes it.
    pub fn interval(xs: &[f64], k: usize, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let c = xs.len();
        let lower = if k == 0 { lo } else { xs[k - 1].max(lo) };
        let upper = if k == c { hi } else { xs[k].min(hi) };
        // The cut must stay strictly below xs[k]; the last behavior may sit on hi.
        let feasible = if k == c { lower <= upper } else { lower < upper };
        feasible.then_some((lower, upper))
    }

    /// ERM sweep with the widest-interval, then lowest-k, tie-break.
    pub fn sweep(&self, lo: f64, hi: f64, side: Side) -> CutChoice {
        let errs = cut_errors(&self.pos, &self.neg, side);
        let mut best: Option<CutChoice> = None;
        for (k, &e) in errs.iter().enumerate() {
            let Some((a, b)) = Cells::interval(&self.xs, k, lo, hi) else {
                continue;
            };
            let cand = CutChoice { k, cut: 0.5 * (a + b), width: b - a, errors: e };
            best = match best {
                None => Some(cand),
                Some(cur) if e < cur.errors || (e == cur.errors && cand.width > cur.width) => Some(cand),
                keep => keep,
            };
        }
        best.unwrap_or(CutChoice { k: 0, cut: 0.5 * (lo + hi), width: 0.0, errors: 0 })
    }
}

/// Error count of every cut behavior `k = 0..=cells`.
pub(crate) fn cut_errors(pos: &[u64], neg: &[u64], side: Side) -> Vec<u64> {
    let inside_pos = side.inside_label().is_pos();
    // behavior k: cells j < k inside, j ≥ k outside.
    let outside_total: u64 = if inside_pos { pos.iter().sum() } else { neg.iter().sum() };
    let mut errs = Vec::with_capacity(pos.len() + 1);
    let mut e = outside_total;
    errs.push(e);
    for j in 0..pos.len() {
        let (wrong_inside, wrong_outside) = if inside_pos { (neg[j], pos[j]) } else { (pos[j], neg[j]) };
        e = e + wrong_inside - wrong_outside;
        errs.push(e);
    }
    errs
}

/// Per-atom label counts.
#[derive(Clone, Debug)]
pub(crate) struct AtomCounts {
    pub pos: Vec<u64>,
    pub neg: Vec<u64>,
}

impl AtomCounts {
    pub fn new(support: usize) -> Self {
        AtomCounts { pos: vec![0; support], neg: vec![0; support] }
    }

    pub fn from_points(support: usize, points: impl Iterator<Item = (Point, Label)>) -> Self {
        let mut c = AtomCounts::new(support);
        for (x, y) in points {
            c.add(x, y);
        }
        c
    }

    pub fn add(&mut self, x: Point, y: Label) {
        let i = x.atom().expect("finite class evaluated on a real-valued point");
        if y.is_pos() {
            self.pos[i] += 1;
        } else {
            self.neg[i] += 1;
        }
    }

    pub fn errors(&self, labels: &[Label]) -> u64 {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| if l.is_pos() { self.neg[i] } else { self.pos[i] })
            .sum()
    }

    pub fn disagreement(&self, a: &[Label], b: &[Label]) -> u64 {
        (0..a.len())
            .filter(|&i| a[i] != b[i])
            .map(|i| self.pos[i] + self.neg[i])
            .sum()
    }

    /// Lowest-index minimizer and its error count.
    pub fn best_member(&self, members: &[Vec<Label>]) -> (usize, u64) {
        let mut best = (0, u64::MAX);
        for (i, m) in members.iter().enumerate() {
            let e = self.errors(m);
            if e < best.1 {
                best = (i, e);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(pairs: &[(f64, i8)]) -> LabeledSample {
        LabeledSample::new(
            pairs
                .iter()
                .map(|&(x, y)| (Point::Real(x), Label::try_from(y).unwrap()))
                .collect(),
        )
    }

    #[test]
    fn empirical_risk_examples() {
        let h = Hypothesis::threshold(0.5, Side::Right);
        assert_eq!(empirical_risk(&h, &s(&[(0.3, -1), (0.7, 1)])), 0.0);
        assert_eq!(empirical_risk(&h, &LabeledSample::default()), 0.0);
        assert_eq!(empirical_risk(&h, &s(&[(0.3, 1), (0.7, 1)])), 0.5);
    }

    #[test]
    fn disagreement_examples() {
        let a = Hypothesis::threshold(0.2, Side::Right);
        let b = Hypothesis::threshold(0.8, Side::Right);
        let sample = s(&[(0.1, 1), (0.5, 1), (0.9, 1)]);
        assert_eq!(empirical_disagreement(&a, &a, &sample), 0.0);
        assert!((empirical_disagreement(&a, &b, &sample) - 1.0 / 3.0).abs() < 1e-15);

        let t1 = Hypothesis::Table { labels: vec![Label::Pos, Label::Neg, Label::Pos, Label::Neg] };
        let t2 = Hypothesis::Table { labels: vec![Label::Neg, Label::Pos, Label::Neg, Label::Pos] };
        let four = LabeledSample::new((0..4).map(|i| (Point::Atom(i), Label::Pos)).collect());
        assert_eq!(empirical_disagreement(&t1, &t2, &four), 1.0);
    }

    #[test]
    fn excess_empirical_risk_composes() {
        let h = Hypothesis::threshold(0.5, Side::Right);
        let bad = s(&[(0.3, 1), (0.7, 1)]);
        let g = Hypothesis::threshold(0.0, Side::Right);
        assert_eq!(excess_empirical_risk(&h, &h, &bad), 0.0);
        assert_eq!(excess_empirical_risk(&h, &g, &bad), 0.5);
    }

    #[test]
    fn erm_threshold_midpoint() {
        let class = HypothesisClass::thresholds(0.0, 1.0, Side::Right).unwrap();
        let fit = erm_fit(&class, &s(&[(0.3, -1), (0.7, 1)]));
        assert_eq!(fit.hypothesis, Hypothesis::threshold(0.5, Side::Right));
        assert_eq!(fit.errors, 0);
        assert!(!fit.empty_sample);
    }

    #[test]
    fn erm_empty_sample_is_flagged_default() {
        let class = HypothesisClass::thresholds(0.0, 2.0, Side::Left).unwrap();
        let fit = erm_fit(&class, &LabeledSample::default());
        assert!(fit.empty_sample);
        assert_eq!(fit.hypothesis, Hypothesis::threshold(1.0, Side::Left));
    }

    #[test]
    fn erm_finite_strict_minimizer() {
        let class = HypothesisClass::two_point();
        let sample = LabeledSample::new(vec![(Point::Atom(1), Label::Pos); 3]);
        assert_eq!(erm(&class, &sample), class.member(0).unwrap());
        let sample = LabeledSample::new(vec![(Point::Atom(1), Label::Neg); 3]);
        assert_eq!(erm(&class, &sample), class.member(1).unwrap());
    }

    #[test]
    fn erm_finite_tie_goes_to_lowest_index() {
        let class = HypothesisClass::two_point();
        let sample = LabeledSample::new(vec![(Point::Atom(1), Label::Pos), (Point::Atom(1), Label::Neg)]);
        assert_eq!(erm(&class, &sample), class.member(0).unwrap());
    }

    // Oracle: try every cut in {lo, hi} ∪ {x ± 1e-9} and keep the best error count.
    fn brute_force_min(sample: &LabeledSample, lo: f64, hi: f64, side: Side) -> f64 {
        let mut cuts = vec![lo, hi];
        for (x, _) in sample.iter() {
            cuts.push(x.coord() - 1e-9);
            cuts.push(x.coord() + 1e-9);
            cuts.push(x.coord());
        }
        cuts.into_iter()
            .filter(|c| (lo..=hi).contains(c))
            .map(|c| empirical_risk(&Hypothesis::threshold(c, side), sample))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn erm_matches_brute_force_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let n = rng.random_range(0..=200);
            let side = if trial % 2 == 0 { Side::Left } else { Side::Right };
            let pts = (0..n)
                .map(|_| {
                    // coarse grid forces repeated coordinates
                    let x = (rng.random_range(0..50) as f64) / 50.0;
                    (Point::Real(x), Label::from_bool(rng.random_bool(0.5)))
                })
                .collect();
            let sample = LabeledSample::new(pts);
            let class = HypothesisClass::thresholds(0.0, 1.0, side).unwrap();
            let h = erm(&class, &sample);
            assert_eq!(empirical_risk(&h, &sample), brute_force_min(&sample, 0.0, 1.0, side));
        }
    }

    #[test]
    fn widest_interval_wins_ties() {
        // errors by k: 2, 1 (width 0.1), 2, 1 (width 0.5), 2
        let class = HypothesisClass::thresholds(0.0, 1.0, Side::Left).unwrap();
        let sample = s(&[(0.1, 1), (0.2, -1), (0.3, 1), (0.8, -1)]);
        let h = erm(&class, &sample);
        assert_eq!(h, Hypothesis::threshold(0.55, Side::Left));
    }

    #[test]
    fn vc_dimension_exhaustive() {
        assert_eq!(HypothesisClass::thresholds(0.0, 1.0, Side::Left).unwrap().vc_dimension(), 1);
        assert_eq!(HypothesisClass::two_point().vc_dimension(), 1);
        let all: Vec<Vec<Label>> = (0..8u32)
            .map(|m| (0..3).map(|i| Label::from_bool(m & (1 << i) != 0)).collect())
            .collect();
        assert_eq!(HypothesisClass::finite(3, all).unwrap().vc_dimension(), 3);
        let single = vec![vec![Label::Pos, Label::Neg]];
        assert_eq!(HypothesisClass::finite(2, single).unwrap().vc_dimension(), 0);
    }

    #[test]
    fn class_validation() {
        assert!(HypothesisClass::thresholds(1.0, 0.0, Side::Left).is_err());
        assert!(HypothesisClass::finite(2, vec![vec![Label::Pos]]).is_err());
        assert!(HypothesisClass::two_point().check_nontrivial().is_err());
    }

    #[test]
    fn label_serde_is_signed_integer() {
        assert_eq!(serde_json::to_string(&Label::Neg).unwrap(), "-1");
        assert_eq!(serde_json::from_str::<Label>("1").unwrap(), Label::Pos);
        assert!(serde_json::from_str::<Label>("0").is_err());
    }
}

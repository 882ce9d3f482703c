//! Sampler goodness-of-fit, Monte Carlo checks of the closed-form risks and
//! the shortcut Γ sampler against full materialization.

use std::collections::BTreeMap;

use msl_core::adversarial::{
    impossibility_statistics, sample_gamma, sample_gamma_stats, stats_of, GammaStats, ImpossibilityParams,
};
use msl_core::hypothesis::population_excess_risk;
use msl_core::{Hypothesis, HypothesisClass, Label, LabeledSample, Marginal, Noise, Point, Side, TaskDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const LEVEL: f64 = 1e-3;
const DRAWS: usize = 100_000;
const MC_DRAWS: usize = 1_000_000;
const MC_STDERRS: f64 = 3.0;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn chi2_pvalue(stat: f64, df: usize) -> f64 {
    1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
}

/// Goodness of fit of `observed` against cell probabilities `probs`.
fn gof_pvalue(observed: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), probs.len());
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            assert_eq!(o, 0, "draw in a zero-probability cell");
            continue;
        }
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    chi2_pvalue(stat, cells - 1)
}

/// χ² homogeneity test of two samples of a discrete statistic; categories
/// with fewer than 10 combined observations are merged into their neighbor.
fn homogeneity_pvalue(a: &[u64], b: &[u64]) -> f64 {
    let mut counts: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for &v in a {
        counts.entry(v).or_default().0 += 1;
    }
    for &v in b {
        counts.entry(v).or_default().1 += 1;
    }
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut pending = (0, 0);
    for (_, (x, y)) in counts {
        pending = (pending.0 + x, pending.1 + y);
        if pending.0 + pending.1 >= 10 {
            cells.push(pending);
            pending = (0, 0);
        }
    }
    match cells.last_mut() {
        Some(last) => *last = (last.0 + pending.0, last.1 + pending.1),
        None => return 1.0,
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut stat = 0.0;
    for &(x, y) in &cells {
        let total = (x + y) as f64;
        let (ea, eb) = (total * na / (na + nb), total * nb / (na + nb));
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    chi2_pvalue(stat, cells.len() - 1)
}

/// Cell index 2·atom + (label = +1) for atomic samples.
fn atom_counts(s: &LabeledSample, support: usize) -> Vec<u64> {
    let mut c = vec![0u64; 2 * support];
    for (x, y) in s.iter() {
        c[2 * x.atom().unwrap() + y.is_pos() as usize] += 1;
    }
    c
}

fn atom_probs(masses: &[f64], etas: &[f64]) -> Vec<f64> {
    masses.iter().zip(etas).flat_map(|(m, e)| [m * (1.0 - e), m * e]).collect()
}

/// Joint (bin, label) probabilities of a threshold task over the bins between
/// consecutive `edges`; the Bayes cut must be an edge.
fn threshold_cells(marginal: &Marginal, cut: f64, side: Side, q: f64, edges: &[f64]) -> Vec<f64> {
    edges
        .windows(2)
        .flat_map(|w| {
            let mass = marginal.mass_between(w[0], w[1]);
            let clean_pos = match side {
                Side::Left => w[1] <= cut,
                Side::Right => w[0] >= cut,
            };
            let p_pos = if clean_pos { 1.0 - q } else { q };
            [mass * (1.0 - p_pos), mass * p_pos]
        })
        .collect()
}

fn threshold_counts(s: &LabeledSample, edges: &[f64]) -> Vec<u64> {
    let mut c = vec![0u64; 2 * (edges.len() - 1)];
    for (x, y) in s.iter() {
        let v = x.coord();
        let bin = edges.windows(2).position(|w| v >= w[0] && v < w[1]).unwrap_or(edges.len() - 2);
        c[2 * bin + y.is_pos() as usize] += 1;
    }
    c
}

#[test]
fn two_point_sampler_fits() {
    let d = TaskDistribution::two_point(0.3, 0.2, 0.9).unwrap();
    let s = d.sample(DRAWS, &mut rng(1));
    let p = gof_pvalue(&atom_counts(&s, 2), &atom_probs(&[0.7, 0.3], &[0.9, 0.2]));
    assert!(p > LEVEL, "p = {p}");
}

#[test]
fn finite_points_sampler_fits() {
    let masses = vec![0.1, 0.25, 0.0, 0.4, 0.25];
    let etas = vec![0.5, 1.0, 0.3, 0.05, 0.7];
    let d = TaskDistribution::finite_points(masses.clone(), etas.clone()).unwrap();
    let s = d.sample(DRAWS, &mut rng(2));
    let p = gof_pvalue(&atom_counts(&s, 5), &atom_probs(&masses, &etas));
    assert!(p > LEVEL, "p = {p}");
}

#[test]
fn uniform_threshold_sampler_fits() {
    let marginal = Marginal::Uniform { a: 0.0, b: 2.0 };
    let d = TaskDistribution::threshold(marginal.clone(), 0.5, Side::Left, Noise::Flip { q: 0.15 }).unwrap();
    let edges: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
    let s = d.sample(DRAWS, &mut rng(3));
    let p = gof_pvalue(&threshold_counts(&s, &edges), &threshold_cells(&marginal, 0.5, Side::Left, 0.15, &edges));
    assert!(p > LEVEL, "p = {p}");
}

#[test]
fn power_law_threshold_sampler_fits() {
    let marginal = Marginal::PowerLaw { rho: 2.5, b: 1.0 };
    let d = TaskDistribution::threshold(marginal.clone(), 0.6, Side::Right, Noise::Realizable).unwrap();
    // equal-mass edges plus the cut
    let mut edges: Vec<f64> = (0..=16).map(|k| (k as f64 / 16.0).powf(1.0 / 2.5)).collect();
    edges.push(0.6);
    edges.sort_by(f64::total_cmp);
    let s = d.sample(DRAWS, &mut rng(4));
    let p = gof_pvalue(&threshold_counts(&s, &edges), &threshold_cells(&marginal, 0.6, Side::Right, 0.0, &edges));
    assert!(p > LEVEL, "p = {p}");
}

/// Sample mean and standard error of the loss difference ℓ(h) − ℓ(h*).
fn mc_excess(d: &TaskDistribution, h: &Hypothesis, hstar: &Hypothesis, seed: u64) -> (f64, f64) {
    let s = d.sample(MC_DRAWS, &mut rng(seed));
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for (x, y) in s.iter() {
        let diff = (h.predict(*x) != *y) as i32 as f64 - (hstar.predict(*x) != *y) as i32 as f64;
        sum += diff;
        sumsq += diff * diff;
    }
    let n = MC_DRAWS as f64;
    let mean = sum / n;
    let var = (sumsq - n * mean * mean) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_excess(d: &TaskDistribution, class: &HypothesisClass, hs: &[Hypothesis], seed: u64) {
    let hstar = d.bayes_in_class(class).unwrap();
    for (i, h) in hs.iter().enumerate() {
        let exact = population_excess_risk(h, d, class).unwrap();
        let (mean, se) = mc_excess(d, h, &hstar, seed + i as u64);
        assert!(
            (mean - exact).abs() <= MC_STDERRS * se + 1e-12,
            "{h:?}: exact {exact}, Monte Carlo {mean} ± {se}"
        );
    }
}

#[test]
fn excess_risk_matches_monte_carlo_on_two_point() {
    let d = TaskDistribution::two_point(0.5, 0.25, 1.0).unwrap();
    let class = HypothesisClass::two_point();
    check_excess(&d, &class, &class.members(), 100);
}

#[test]
fn excess_risk_matches_monte_carlo_on_finite_points() {
    let d = TaskDistribution::finite_points(vec![0.2, 0.3, 0.5], vec![0.9, 0.4, 0.55]).unwrap();
    let members: Vec<Vec<Label>> =
        (0..8u32).map(|m| (0..3).map(|i| Label::from_bool(m >> i & 1 == 1)).collect()).collect();
    let class = HypothesisClass::finite(3, members).unwrap();
    check_excess(&d, &class, &class.members(), 200);
}

#[test]
fn excess_risk_matches_monte_carlo_on_uniform_thresholds() {
    let d = TaskDistribution::threshold(Marginal::Uniform { a: 0.0, b: 2.0 }, 0.5, Side::Left, Noise::Flip { q: 0.2 })
        .unwrap();
    let class = HypothesisClass::thresholds(0.0, 2.0, Side::Left).unwrap();
    let hs: Vec<Hypothesis> = [0.0, 0.3, 0.5, 0.55, 1.0, 2.0].iter().map(|&c| Hypothesis::threshold(c, Side::Left)).collect();
    check_excess(&d, &class, &hs, 300);
}

#[test]
fn excess_risk_matches_monte_carlo_on_power_law_thresholds() {
    let d = TaskDistribution::threshold(Marginal::PowerLaw { rho: 2.0, b: 1.0 }, 0.0, Side::Left, Noise::Realizable)
        .unwrap();
    let class = HypothesisClass::thresholds(0.0, 1.0, Side::Left).unwrap();
    let hs: Vec<Hypothesis> = [0.05, 0.2, 0.5, 1.0].iter().map(|&c| Hypothesis::threshold(c, Side::Left)).collect();
    check_excess(&d, &class, &hs, 400);
}

type StatField = fn(&GammaStats) -> u64;

fn small_gamma() -> ImpossibilityParams {
    ImpossibilityParams { beta: 0.0, n: 2, n_target: 6, n_p: 40, n_q: 10, c0: 0.25, c1: 1.0 / 64.0, sigma: Label::Neg }
}

#[test]
fn shortcut_gamma_sampler_matches_materialized_draws() {
    let p = small_gamma();
    p.validate().unwrap();
    const REPS: usize = 100_000;
    let mut fast = rng(500);
    let mut slow = rng(501);
    let a: Vec<_> = (0..REPS).map(|_| sample_gamma_stats(&p, &mut fast).unwrap()).collect();
    let b: Vec<_> = (0..REPS)
        .map(|_| stats_of(&sample_gamma(&p, &mut slow).unwrap(), &p).unwrap())
        .collect();
    let fields: [(&str, StatField); 6] = [
        ("hom_plus", |s| s.hom_plus),
        ("hom_minus", |s| s.hom_minus),
        ("n_tilde_plus", |s| s.n_tilde_plus),
        ("n_tilde_minus", |s| s.n_tilde_minus),
        ("target_plus", |s| s.target_plus),
        ("q_vectors", |s| s.q_vectors),
    ];
    for (name, f) in fields {
        let xa: Vec<u64> = a.iter().map(f).collect();
        let xb: Vec<u64> = b.iter().map(f).collect();
        let pv = homogeneity_pvalue(&xa, &xb);
        assert!(pv > LEVEL, "{name}: p = {pv}");
    }
}

#[test]
fn target_event_frequency_reaches_one_in_eighty_four() {
    for n_target in [1, 4, 16, 64] {
        let p = ImpossibilityParams { n_target, ..small_gamma() };
        let st = impossibility_statistics(&p, 100_000, &mut rng(600 + n_target as u64)).unwrap();
        assert!(st.target_event.at_least(1.0 / 84.0, 3.0), "n_D = {n_target}: {:?}", st.target_event);
    }
}

#[test]
fn homogeneity_test_rejects_shifted_samples() {
    let a: Vec<u64> = (0..20_000).map(|i| i % 5).collect();
    let b: Vec<u64> = (0..20_000).map(|i| (i % 5).min(3)).collect();
    assert!(homogeneity_pvalue(&a, &b) < LEVEL);
    assert!(homogeneity_pvalue(&a, &a) > LEVEL);
}

#[test]
fn point_cells_cover_the_unit_mass() {
    let marginal = Marginal::Uniform { a: 0.0, b: 1.0 };
    let edges = [0.0, 0.25, 0.5, 1.0];
    let cells = threshold_cells(&marginal, 0.5, Side::Left, 0.1, &edges);
    assert!((cells.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let s = LabeledSample::new(vec![(Point::Real(1.0), Label::Pos)]);
    assert_eq!(threshold_counts(&s, &edges), vec![0, 0, 0, 0, 0, 1]);
}

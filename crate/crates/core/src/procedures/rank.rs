//! Incremental evaluation of the rank constraint sets over pooled-sample behaviors.
//!
//! Thresholds are enumerated as the feasible cut behaviors of the pooled
//! distinct coordinates; finite classes use their members. Each prefix adds
//! one dataset's counts, so the sweep costs O(T · C) for C pooled cells.

use super::{within_radius, MultiSample, ProcedureConfig, Ranking};
use crate::hypothesis::{cut_errors, AtomCounts, Cells, Hypothesis, HypothesisClass, Label, Point, Side};

pub(super) struct SweepRun {
    pub candidates: Vec<Hypothesis>,
    /// Interval width for cut behaviors, 0 for table members.
    pub widths: Vec<f64>,
    pub pooled_errors: Vec<u64>,
}

/// Membership of each pooled behavior in each H_(t).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSets {
    pub candidates: Vec<Hypothesis>,
    /// `members[t - 1][i]`: candidate `i` lies in H_(t).
    pub members: Vec<Vec<bool>>,
}

pub fn constraint_sets(z: &MultiSample, ranking: &Ranking, class: &HypothesisClass, config: &ProcedureConfig) -> ConstraintSets {
    let mut members = Vec::with_capacity(ranking.len());
    let run = sweep(z, ranking, class, config, |_, m| members.push(m.to_vec()));
    ConstraintSets { candidates: run.candidates, members }
}

enum Space<'a> {
    Cut { xs: Vec<f64>, ks: Vec<usize>, lo: f64, hi: f64, side: Side },
    Table { members: &'a [Vec<Label>] },
}

pub(super) fn sweep(
    z: &MultiSample,
    ranking: &Ranking,
    class: &HypothesisClass,
    config: &ProcedureConfig,
    mut on_prefix: impl FnMut(usize, &[bool]),
) -> SweepRun {
    let vc = class.vc_dimension();
    let (space, candidates, widths, ncells) = match class {
        HypothesisClass::Thresholds { lo, hi, side } => {
            let mut xs: Vec<f64> = z.datasets.iter().flat_map(|d| d.iter().map(|(x, _)| x.coord())).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let mut ks = Vec::new();
            let mut hyps = Vec::new();
            let mut widths = Vec::new();
            for k in 0..=xs.len() {
                if let Some((a, b)) = Cells::interval(&xs, k, *lo, *hi) {
                    ks.push(k);
                    hyps.push(Hypothesis::threshold(0.5 * (a + b), *side));
                    widths.push(b - a);
                }
            }
            let n = xs.len();
            (Space::Cut { xs, ks, lo: *lo, hi: *hi, side: *side }, hyps, widths, n)
        }
        HypothesisClass::Finite { support, members } => {
            let hyps = members.iter().map(|m| Hypothesis::Table { labels: m.clone() }).collect();
            (Space::Table { members }, hyps, vec![0.0; members.len()], *support)
        }
    };

    let cell_of = |x: Point| -> usize {
        match &space {
            Space::Cut { xs, .. } => xs.partition_point(|v| *v < x.coord()),
            Space::Table { .. } => x.atom().expect("finite class evaluated on a real-valued point"),
        }
    };

    let mut counts = AtomCounts::new(ncells);
    let mut n_t = 0usize;
    let mut errors = vec![0u64; candidates.len()];
    let mut member = vec![true; candidates.len()];
    for (t0, &task) in ranking.order().iter().enumerate() {
        let t = t0 + 1;
        for &(x, y) in z.datasets[task].iter() {
            let c = cell_of(x);
            if y.is_pos() {
                counts.pos[c] += 1;
            } else {
                counts.neg[c] += 1;
            }
        }
        n_t += z.datasets[task].len();
        match &space {
            Space::Cut { xs, ks, lo, hi, side } => {
                let all = cut_errors(&counts.pos, &counts.neg, *side);
                for (e, &k) in errors.iter_mut().zip(ks) {
                    *e = all[k];
                }
                if n_t == 0 {
                    member.fill(true);
                } else {
                    // prefix ERM on prefix-occupied cells, mapped back to a pooled behavior
                    let mut prefix = Cells::default();
                    for j in 0..ncells {
                        if counts.pos[j] + counts.neg[j] > 0 {
                            prefix.xs.push(xs[j]);
                            prefix.pos.push(counts.pos[j]);
                            prefix.neg.push(counts.neg[j]);
                        }
                    }
                    let best = prefix.sweep(*lo, *hi, *side);
                    let k_star = xs.partition_point(|v| *v <= best.cut);
                    let mut occ = Vec::with_capacity(ncells + 1);
                    occ.push(0u64);
                    for j in 0..ncells {
                        occ.push(occ[j] + counts.pos[j] + counts.neg[j]);
                    }
                    for ((m, &e), &k) in member.iter_mut().zip(&errors).zip(ks) {
                        let dis = occ[k].abs_diff(occ[k_star]);
                        *m = within_radius(e as i64 - best.errors as i64, dis, n_t, t, vc, config);
                    }
                }
            }
            Space::Table { members } => {
                for (e, m) in errors.iter_mut().zip(members.iter()) {
                    *e = counts.errors(m);
                }
                if n_t == 0 {
                    member.fill(true);
                } else {
                    let (i_star, e_star) = counts.best_member(members);
                    for (i, m) in member.iter_mut().enumerate() {
                        let dis = counts.disagreement(&members[i], &members[i_star]);
                        *m = within_radius(errors[i] as i64 - e_star as i64, dis, n_t, t, vc, config);
                    }
                }
            }
        }
        on_prefix(t, &member);
    }
    SweepRun { candidates, widths, pooled_errors: errors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Marginal, Noise, TaskDistribution};
    use crate::procedures::{constraint_set_contains, prefix_sample};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_against_direct(z: &MultiSample, ranking: &Ranking, class: &HypothesisClass, cfg: &ProcedureConfig) {
        let sets = constraint_sets(z, ranking, class, cfg);
        for t in 1..=ranking.len() {
            let prefix = prefix_sample(z, ranking, t).unwrap();
            for (i, h) in sets.candidates.iter().enumerate() {
                assert_eq!(
                    sets.members[t - 1][i],
                    constraint_set_contains(h, &prefix, t, class, cfg),
                    "t = {t}, candidate {h:?}"
                );
            }
        }
    }

    #[test]
    fn thresholds_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let class = HypothesisClass::thresholds(0.0, 1.0, Side::Left).unwrap();
        for trial in 0..60 {
            let k = 1 + trial % 4;
            let datasets = (0..k)
                .map(|_| {
                    let q = rng.random_range(0.0..0.5);
                    let cut = rng.random_range(0.2..0.8);
                    let d = TaskDistribution::threshold(Marginal::Uniform { a: 0.0, b: 1.0 }, cut, Side::Left, Noise::Flip { q })
                        .unwrap();
                    let n = rng.random_range(0..25);
                    let mut s = d.sample(n, &mut rng);
                    // coarse grid so cells repeat across datasets
                    for p in s.points.iter_mut() {
                        p.0 = Point::Real((p.0.coord() * 8.0).floor() / 8.0);
                    }
                    s
                })
                .collect();
            let z = MultiSample { datasets };
            let mut order: Vec<usize> = (0..k).collect();
            order.rotate_left(trial % k);
            let cfg = ProcedureConfig { c0: rng.random_range(0.05..2.0), ..Default::default() };
            check_against_direct(&z, &Ranking::new(order).unwrap(), &class, &cfg);
        }
    }

    #[test]
    fn finite_class_matches_direct_evaluation() {
        use Label::{Neg, Pos};
        let class = HypothesisClass::finite(3, vec![vec![Pos, Pos, Neg], vec![Pos, Neg, Neg], vec![Neg, Pos, Pos], vec![Pos, Pos, Pos]])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..60 {
            let datasets = (0..3)
                .map(|_| {
                    let n = rng.random_range(0..20);
                    let d = TaskDistribution::finite_points(vec![0.3, 0.3, 0.4], vec![rng.random(), rng.random(), rng.random()])
                        .unwrap();
                    d.sample(n, &mut rng)
                })
                .collect();
            let z = MultiSample { datasets };
            let cfg = ProcedureConfig { c0: rng.random_range(0.05..2.0), ..Default::default() };
            check_against_direct(&z, &Ranking::new(vec![2, 0, 1]).unwrap(), &class, &cfg);
        }
    }
}

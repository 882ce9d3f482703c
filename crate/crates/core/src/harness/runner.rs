//! Experiment runners.
//!
//! Replications run on a dedicated rayon pool; each replication draws from
//! its own stream and results are folded in replication order, so reports do
//! not depend on the thread count.

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, FitAxis, InstanceSpec, Procedure, SweepAxis};
use super::emit::{Cell, Chart, Meta, Report, Series, Table};
use super::fit::{fit_rate_exponent, RatePoint};
use crate::adversarial::{impossibility_instance, sample_gamma_stats, vg_packing, ImpossibilityTally};
use crate::error::{invalid, Error, Result};
use crate::hypothesis::{erm, Hypothesis, Label, Point};
use crate::procedures::{
    oracle_procedure, pool_erm, rank_based_procedure, target_only_erm, AssumptionReport, MultiSample,
    MultisourceInstance,
};
use crate::streams::stream;
use crate::theory::{
    avg_rho, general_pooling_bound, minimax_rate, oracle_bound, pooling_bound_beta1, quantile_pooling_bound,
    semi_adaptive_bound,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run even when the instance fails its assumption checks.
    pub force: bool,
}

/// A finished run. `assumptions_hold` is false only for `validate` runs
/// that found a violation (other experiments refuse to start instead).
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Report,
    pub assumptions_hold: bool,
}

pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Outcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let report = |r| Ok(Outcome { report: r, assumptions_hold: true });
    match cfg.experiment {
        ExperimentKind::Rates | ExperimentKind::Pooling => report(pool.install(|| run_rate_experiment(cfg, opts))?),
        ExperimentKind::Asymmetry => report(pool.install(|| run_asymmetry_experiment(cfg, opts))?),
        ExperimentKind::Adaptivity => report(pool.install(|| run_adaptivity_experiment(cfg, opts))?),
        ExperimentKind::Validate => run_validate(cfg),
        ExperimentKind::Bounds => report(run_bounds(cfg)?),
        ExperimentKind::Pack => report(run_pack(cfg)?),
    }
}

fn meta(cfg: &ExperimentConfig) -> Meta {
    Meta::new(cfg.hash(), cfg.master_seed)
}

/// Runs `f` for replications 0..reps on the current pool, results in order.
fn replicate<T: Send>(reps: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..reps).into_par_iter().map(f).collect()
}

/// Running mean and standard error, accumulated in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    n: u64,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Sample standard deviation over √n; 0 for fewer than two values.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

fn require_assumptions(inst: &MultisourceInstance, opts: RunOptions, at: &str) -> Result<()> {
    if opts.force {
        return Ok(());
    }
    let rep = inst.validate()?;
    if rep.holds() {
        Ok(())
    } else {
        Err(Error::Assumption(format!("{at}: {}", rep.failures().join("; "))))
    }
}

fn apply_procedure(
    proc_: Procedure,
    z: &MultiSample,
    inst: &MultisourceInstance,
    cfg: &ExperimentConfig,
) -> Result<(Hypothesis, bool)> {
    Ok(match proc_ {
        Procedure::TargetOnly => (target_only_erm(z, &inst.class)?, false),
        Procedure::Pooled => (pool_erm(z, &inst.class), false),
        Procedure::Oracle => (oracle_procedure(z, &inst.ranking(), inst, &cfg.learning)?, false),
        Procedure::RankBased => {
            let out = rank_based_procedure(z, &inst.ranking(), &inst.class, &cfg.learning)?;
            (out.hypothesis, out.fallback_used)
        }
    })
}

/// Sweeps the grid; per point and replication samples the instance and
/// records each procedure's exact target excess risk. Zero means are
/// clamped to 1/(2·reps) for the log-log fit and flagged.
pub fn run_rate_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let spec = cfg.instance.as_ref().ok_or_else(|| Error::Config("missing [instance]".into()))?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("missing [sweep]".into()))?;
    let name = cfg.experiment.name();
    let reps = cfg.replications;
    let procs = &cfg.procedures;

    let mut rows = Table::new(
        "rows",
        &["sweep", "x", "procedure", "mean_excess", "stderr", "replications", "clamped", "fallback_rate"],
    );
    let mut points: Vec<Vec<RatePoint>> = vec![Vec::new(); procs.len()];
    let mut last_inst = None;
    for (t, &v) in sweep.grid.iter().enumerate() {
        let inst = spec.build(Some((sweep.axis, v)))?;
        require_assumptions(&inst, opts, &format!("grid point {v}"))?;
        let x = match sweep.fit_x {
            FitAxis::Sweep => v as f64,
            FitAxis::Total => inst.sample_sizes.iter().sum::<usize>() as f64,
        };
        let per_rep = replicate(reps, |r| {
            let mut rng = stream(cfg.master_seed, name, t as u64, r);
            let z = inst.sample(&mut rng);
            procs
                .iter()
                .map(|&p| {
                    let (h, fallback) = apply_procedure(p, &z, &inst, cfg)?;
                    Ok((inst.target().excess_risk(&h, &inst.class)?, fallback))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (j, &p) in procs.iter().enumerate() {
            let mut m = Moments::default();
            let mut fallbacks = 0u64;
            for rep in &per_rep {
                m.push(rep[j].0);
                fallbacks += rep[j].1 as u64;
            }
            let clamped = m.mean() == 0.0;
            let mean = if clamped { 1.0 / (2.0 * reps as f64) } else { m.mean() };
            points[j].push(RatePoint { x, mean, stderr: m.stderr() });
            rows.push(vec![
                v.into(),
                x.into(),
                p.name().into(),
                mean.into(),
                m.stderr().into(),
                reps.into(),
                clamped.into(),
                (fallbacks as f64 / reps as f64).into(),
            ]);
        }
        last_inst = Some(inst);
    }

    let mut report = Report::new(name, meta(cfg));
    let mut fits = Table::new("fits", &["procedure", "slope", "band", "intercept", "used", "excluded"]);
    for (j, &p) in procs.iter().enumerate() {
        match fit_rate_exponent(&points[j]) {
            Ok(f) => fits.push(vec![
                p.name().into(),
                f.slope.into(),
                f.band.into(),
                f.intercept.into(),
                f.used.into(),
                f.excluded.into(),
            ]),
            Err(_) => fits.push(vec![
                p.name().into(),
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                0usize.into(),
                points[j].len().into(),
            ]),
        }
    }
    if let Some(inst) = last_inst {
        // −1/((2−β)ρ̄) over all ranked tasks at the largest grid point
        let order = inst.ranking();
        let rhos = order.apply(&inst.declared_rhos);
        let sizes = order.apply(&inst.sample_sizes);
        let rho_bar = avg_rho(&rhos, &sizes, rhos.len())?;
        report.note("reference_slope", -1.0 / ((2.0 - inst.beta) * rho_bar));
    }
    report.chart = Some(Chart {
        title: format!("{name}: target excess risk"),
        x_label: match sweep.fit_x {
            FitAxis::Sweep => sweep_label(sweep.axis).into(),
            FitAxis::Total => "total samples".into(),
        },
        y_label: "mean excess risk".into(),
        series: procs
            .iter()
            .zip(&points)
            .map(|(p, pts)| Series { name: p.name().into(), points: pts.iter().map(|q| (q.x, q.mean)).collect() })
            .collect(),
    });
    report.tables.push(rows);
    report.tables.push(fits);
    Ok(report)
}

fn sweep_label(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::TargetN => "target samples",
        SweepAxis::SourceN => "samples per source",
        SweepAxis::Sources => "sources",
    }
}

fn wrong_at_x1(h: &Hypothesis, hstar: &Hypothesis) -> bool {
    h.predict(Point::Atom(1)) != hstar.predict(Point::Atom(1))
}

/// Pooled, source-only and target-only ERM on the two-task asymmetry pair.
/// `e_d` and `e_p` are excess risks under the original target D and source P
/// (so they keep their meaning when `swap_target` is set).
pub fn run_asymmetry_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let Some(InstanceSpec::Asymmetry(spec)) = &cfg.instance else {
        return Err(Error::Config("asymmetry needs an instance of kind 'asymmetry'".into()));
    };
    let inst = spec.build()?;
    require_assumptions(&inst, opts, "asymmetry instance")?;
    let (src, tgt) = (0usize, 1usize);
    let (p_task, d_task) = if spec.swap_target { (&inst.tasks[tgt], &inst.tasks[src]) } else { (&inst.tasks[src], &inst.tasks[tgt]) };
    let class = &inst.class;
    let hstar = inst.target().bayes_in_class(class)?;
    let name = cfg.experiment.name();
    let learners = ["pooled", "source_only", "target_only"];

    let per_rep = replicate(cfg.replications, |r| {
        let mut rng = stream(cfg.master_seed, name, 0, r);
        let z = inst.sample(&mut rng);
        let hs = [pool_erm(&z, class), erm(class, &z.datasets[src]), erm(class, &z.datasets[tgt])];
        hs.iter()
            .map(|h| Ok((d_task.excess_risk(h, class)?, p_task.excess_risk(h, class)?, wrong_at_x1(h, &hstar))))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut table = Table::new(
        "learners",
        &["learner", "mean_e_d", "stderr_e_d", "mean_e_p", "stderr_e_p", "wrong_x1", "stderr_wrong_x1", "replications"],
    );
    for (j, l) in learners.iter().enumerate() {
        let (mut ed, mut ep, mut wrong) = (Moments::default(), Moments::default(), Moments::default());
        for rep in &per_rep {
            ed.push(rep[j].0);
            ep.push(rep[j].1);
            wrong.push(rep[j].2 as u8 as f64);
        }
        table.push(vec![
            (*l).into(),
            ed.mean().into(),
            ed.stderr().into(),
            ep.mean().into(),
            ep.stderr().into(),
            wrong.mean().into(),
            wrong.stderr().into(),
            cfg.replications.into(),
        ]);
    }
    let mut report = Report::new(name, meta(cfg));
    report.note("n_p", spec.n_p);
    report.note("n_target", spec.n_target);
    report.note("swap_target", spec.swap_target);
    report.tables.push(table);
    Ok(report)
}

/// Rank-based (true ranking) and pooled ERM on the product-form impossibility
/// instance, plus the sufficient-statistic sampler under σ = −1 for the
/// flip-probability and concentration-event frequencies.
pub fn run_adaptivity_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let Some(InstanceSpec::Impossibility(p)) = &cfg.instance else {
        return Err(Error::Config("adaptivity needs an instance of kind 'impossibility'".into()));
    };
    let name = cfg.experiment.name();
    let learner_reps = cfg.learner_reps();
    let mut learners = Table::new(
        "learners",
        &["procedure", "correct_x1", "stderr_correct_x1", "mean_e_d", "stderr_e_d", "fallback_rate", "replications"],
    );
    // learner_reps = 0 skips materializing the instance (N_P tasks)
    if learner_reps > 0 {
        let inst = impossibility_instance(p)?;
        require_assumptions(&inst, opts, "impossibility instance")?;
        let hstar = inst.target().bayes_in_class(&inst.class)?;
        let ranking = inst.ranking();
        let per_rep = replicate(learner_reps, |r| {
            let mut rng = stream(cfg.master_seed, name, 0, r);
            let z = inst.sample(&mut rng);
            let rank = rank_based_procedure(&z, &ranking, &inst.class, &cfg.learning)?;
            let pooled = pool_erm(&z, &inst.class);
            let eval = |h: &Hypothesis, fb: bool| -> Result<(f64, bool, bool)> {
                Ok((inst.target().excess_risk(h, &inst.class)?, !wrong_at_x1(h, &hstar), fb))
            };
            Ok([eval(&rank.hypothesis, rank.fallback_used)?, eval(&pooled, false)?])
        })?;
        for (j, l) in ["rank_based", "pooled"].iter().enumerate() {
            let (mut e, mut ok, mut fb) = (Moments::default(), Moments::default(), 0u64);
            for rep in &per_rep {
                e.push(rep[j].0);
                ok.push(rep[j].1 as u8 as f64);
                fb += rep[j].2 as u64;
            }
            learners.push(vec![
                (*l).into(),
                ok.mean().into(),
                ok.stderr().into(),
                e.mean().into(),
                e.stderr().into(),
                (fb as f64 / learner_reps as f64).into(),
                learner_reps.into(),
            ]);
        }
    }

    let pm = p.with_sigma(Label::Neg);
    let stats_reps = cfg.stats_reps();
    let draws = replicate(stats_reps, |r| {
        let mut rng = stream(cfg.master_seed, name, 1, r);
        sample_gamma_stats(&pm, &mut rng)
    })?;
    let mut tally = ImpossibilityTally::default();
    for st in &draws {
        tally.add(st, &pm)?;
    }
    let s = tally.finish();
    let e_np = pm.expected_hom_from_p();
    let mut stats = Table::new("statistics", &["quantity", "estimate", "stderr", "reference"]);
    let mut stat = |q: &str, est: f64, se: f64, reference: f64| {
        stats.push(vec![q.into(), est.into(), se.into(), reference.into()])
    };
    stat("flip", s.flip.estimate, s.flip.stderr, 1.0 / (12.0 * 96.0 * 84.0));
    stat("hom_plus_wins", s.hom_plus_wins.estimate, s.hom_plus_wins.stderr, s.e_pq.estimate / 12.0);
    stat("target_event", s.target_event.estimate, s.target_event.stderr, 1.0 / 84.0);
    stat("e_p_failure", 1.0 - s.e_p.estimate, s.e_p.stderr, (2.0 * (-e_np / 8.0).exp()).min(1.0));
    stat("e_q_failure", 1.0 - s.e_q.estimate, s.e_q.stderr, (-(pm.n_q as f64) / 3.0).exp());
    stat("e_pq", s.e_pq.estimate, s.e_pq.stderr, f64::NAN);

    let mut report = Report::new(name, meta(cfg));
    report.note("epsilon", p.epsilon());
    report.note("rho_p", p.rho_p());
    report.note("expected_hom_from_p", e_np);
    report.note("achievable_rate", ((p.n * p.n_q).max(1) as f64).powf(-1.0 / (2.0 - p.beta)));
    report.note("strict_warnings", p.strict_warnings().len());
    report.note("stats_replications", stats_reps);
    report.tables.push(learners);
    report.tables.push(stats);
    Ok(report)
}

fn assumption_table(rep: &AssumptionReport, inst: &MultisourceInstance) -> Table {
    let mut t = Table::new(
        "assumptions",
        &["task", "rho", "shares_optimum", "transfer_ratio", "transfer_holds", "bernstein_ratio", "bernstein_holds"],
    );
    for (i, (tr, br)) in rep.transfer.iter().zip(&rep.bernstein).enumerate() {
        t.push(vec![
            i.into(),
            inst.declared_rhos[i].into(),
            (!rep.optimum_violations.contains(&i)).into(),
            tr.worst_ratio.into(),
            tr.holds.into(),
            br.worst_ratio.into(),
            br.holds.into(),
        ]);
    }
    t
}

/// Checks the shared optimum, transfer exponents and Bernstein condition at every grid point (or once without a sweep).
fn run_validate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = cfg.instance.as_ref().ok_or_else(|| Error::Config("missing [instance]".into()))?;
    let points: Vec<Option<(SweepAxis, usize)>> = match &cfg.sweep {
        Some(s) if matches!(spec, InstanceSpec::Explicit(_) | InstanceSpec::LowerBound(_)) => {
            s.grid.iter().map(|&v| Some((s.axis, v))).collect()
        }
        _ => vec![None],
    };
    let mut report = Report::new(cfg.experiment.name(), meta(cfg));
    let mut all_hold = true;
    let mut failures = 0usize;
    for (k, pt) in points.iter().enumerate() {
        let inst = spec.build(*pt)?;
        let rep = inst.validate()?;
        all_hold &= rep.holds();
        failures += rep.failures().len();
        let mut t = assumption_table(&rep, &inst);
        if points.len() > 1 {
            t.name = format!("assumptions_{k}");
        }
        report.tables.push(t);
    }
    report.note("holds", all_hold);
    report.note("failures", failures);
    Ok(Outcome { report, assumptions_hold: all_hold })
}

fn run_bounds(cfg: &ExperimentConfig) -> Result<Report> {
    let b = cfg.bounds.as_ref().ok_or_else(|| Error::Config("bounds needs a [bounds] table".into()))?;
    let q = &b.query;
    let named = [
        ("minimax", minimax_rate(q)?),
        ("oracle", oracle_bound(q)?),
        ("semi_adaptive", semi_adaptive_bound(q)?),
        ("pooling_beta1", pooling_bound_beta1(q)?),
        ("quantile_pooling", quantile_pooling_bound(q, b.alpha)?),
        ("general_pooling", general_pooling_bound(q)?),
    ];
    let mut summary = Table::new("bounds", &["bound", "value", "argmin_t"]);
    for (n, v) in &named {
        summary.push(vec![(*n).into(), v.value.into(), v.argmin_t.into()]);
    }
    let mut cols = vec!["t", "rho", "size", "rho_bar"];
    cols.extend(named.iter().map(|(n, _)| *n));
    let mut terms = Table::new("terms", &cols);
    for t in 1..=q.rhos.len() {
        let mut row: Vec<Cell> = vec![t.into(), q.rhos[t - 1].into(), q.sizes[t - 1].into(), avg_rho(&q.rhos, &q.sizes, t)?.into()];
        row.extend(named.iter().map(|(_, v)| Cell::from(v.per_t_terms[t - 1])));
        terms.push(row);
    }
    let mut report = Report::new(cfg.experiment.name(), meta(cfg));
    report.note("alpha", b.alpha);
    report.tables.push(summary);
    report.tables.push(terms);
    Ok(report)
}

fn run_pack(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = cfg.pack.as_ref().ok_or_else(|| Error::Config("pack needs a [pack] table".into()))?;
    let mut t = Table::new("packing", &["d", "size", "required", "min_distance", "distance_floor", "contains_ones"]);
    for &d in &spec.dims {
        let pk = vg_packing(d)?;
        let mut min_dist = u32::MAX;
        for i in 0..pk.len() {
            for j in i + 1..pk.len() {
                min_dist = min_dist.min(pk[i].hamming(&pk[j]));
            }
        }
        t.push(vec![
            d.into(),
            pk.len().into(),
            2f64.powf(d as f64 / 8.0).into(),
            (min_dist as u64).into(),
            d.div_ceil(8).into(),
            (pk[0].bits == 0).into(),
        ]);
    }
    let mut report = Report::new(cfg.experiment.name(), meta(cfg));
    report.tables.push(t);
    Ok(report)
}

//! TOML experiment configuration. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversarial::{build_lower_bound_instance, impossibility_instance, ImpossibilityParams};
use crate::distributions::{make_asymmetry_pair, Noise, TaskDistribution};
use crate::error::{invalid, Error, Result};
use crate::hypothesis::HypothesisClass;
use crate::procedures::{MultisourceInstance, ProcedureConfig};
use crate::theory::RateQuery;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rates,
    Pooling,
    Asymmetry,
    Adaptivity,
    Validate,
    Bounds,
    Pack,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Rates => "rates",
            ExperimentKind::Pooling => "pooling",
            ExperimentKind::Asymmetry => "asymmetry",
            ExperimentKind::Adaptivity => "adaptivity",
            ExperimentKind::Validate => "validate",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::Pack => "pack",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    TargetOnly,
    Pooled,
    Oracle,
    RankBased,
}

impl Procedure {
    pub fn name(self) -> &'static str {
        match self {
            Procedure::TargetOnly => "target_only",
            Procedure::Pooled => "pooled",
            Procedure::Oracle => "oracle",
            Procedure::RankBased => "rank_based",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub dist: TaskDistribution,
    pub n: usize,
    #[serde(with = "crate::rho_serde::single")]
    pub rho: f64,
    /// Number of identical copies of this source.
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}
fn two() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    pub class: HypothesisClass,
    pub beta: f64,
    #[serde(default = "two")]
    pub c_beta: f64,
    #[serde(default = "two")]
    pub c_rho: f64,
    pub target: TaskDistribution,
    #[serde(default)]
    pub n_target: usize,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    /// If set, every threshold-family task gets flip noise with margin
    /// 1/2 − q = min(1/2, scale · m^{−(1−β)/(2−β)}), m the total sample count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymmetrySpec {
    pub beta: f64,
    pub n_p: usize,
    pub n_target: usize,
    pub c2: f64,
    /// Use P as the target and the original target as the source.
    #[serde(default)]
    pub swap_target: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundSpec {
    #[serde(with = "crate::rho_serde::vec")]
    pub rhos: Vec<f64>,
    pub beta: f64,
    pub d: usize,
    #[serde(default)]
    pub sigma_index: usize,
    pub epsilon: f64,
    /// One entry per source plus the target.
    pub sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    Explicit(ExplicitSpec),
    Asymmetry(AsymmetrySpec),
    Impossibility(ImpossibilityParams),
    LowerBound(LowerBoundSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Target sample size.
    TargetN,
    /// Per-source sample size.
    SourceN,
    /// Copies of each source.
    Sources,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitAxis {
    /// Regress on the sweep value.
    #[default]
    Sweep,
    /// Regress on the total sample count.
    Total,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<usize>,
    #[serde(default)]
    pub fit_x: FitAxis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_out() -> String {
    "out".into()
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_out(), formats: default_formats() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub query: RateQuery,
    #[serde(default = "half")]
    pub alpha: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackSpec {
    pub dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "one_u64")]
    pub replications: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; 0 uses all cores. Does not affect results.
    #[serde(default, skip_serializing)]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub procedures: Vec<Procedure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub learning: ProcedureConfig,
    /// Not part of the config hash.
    #[serde(default, skip_serializing)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pack: Option<PackSpec>,
    /// Replications of the learners in the adaptivity experiment (defaults to `replications`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner_reps: Option<u64>,
    /// Replications of the statistics sampler in the adaptivity experiment (defaults to `replications`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats_reps: Option<u64>,
}

fn one_u64() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form; thread count and output paths are excluded.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Error::Config(m);
        if self.replications == 0 {
            return Err(cfg_err("replications must be at least 1".into()));
        }
        self.learning.validate().map_err(|e| cfg_err(format!("[learning] {e}")))?;
        if let Some(s) = &self.sweep {
            if s.grid.is_empty() || s.grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(cfg_err("sweep grid must be nonempty and strictly increasing".into()));
            }
        }
        let needs_instance = matches!(
            self.experiment,
            ExperimentKind::Rates | ExperimentKind::Pooling | ExperimentKind::Asymmetry | ExperimentKind::Adaptivity | ExperimentKind::Validate
        );
        if needs_instance && self.instance.is_none() {
            return Err(cfg_err(format!("experiment '{}' needs an [instance] table", self.experiment.name())));
        }
        match self.experiment {
            ExperimentKind::Rates | ExperimentKind::Pooling => {
                if !matches!(self.instance, Some(InstanceSpec::Explicit(_)) | Some(InstanceSpec::LowerBound(_))) {
                    return Err(cfg_err("rate experiments need an explicit or lower_bound instance".into()));
                }
                if self.procedures.is_empty() {
                    return Err(cfg_err("procedures list is empty".into()));
                }
                if self.sweep.is_none() {
                    return Err(cfg_err("rate experiments need a [sweep] table".into()));
                }
            }
            ExperimentKind::Asymmetry => {
                if !matches!(self.instance, Some(InstanceSpec::Asymmetry(_))) {
                    return Err(cfg_err("asymmetry needs an instance of kind 'asymmetry'".into()));
                }
            }
            ExperimentKind::Adaptivity => {
                if !matches!(self.instance, Some(InstanceSpec::Impossibility(_))) {
                    return Err(cfg_err("adaptivity needs an instance of kind 'impossibility'".into()));
                }
            }
            ExperimentKind::Bounds => {
                let b = self.bounds.as_ref().ok_or_else(|| cfg_err("bounds needs a [bounds] table".into()))?;
                b.query.validate().map_err(|e| cfg_err(format!("[bounds] {e}")))?;
            }
            ExperimentKind::Pack => {
                if self.pack.is_none() {
                    return Err(cfg_err("pack needs a [pack] table".into()));
                }
            }
            ExperimentKind::Validate => {}
        }
        if let Some(inst) = &self.instance {
            inst.check().map_err(|e| cfg_err(format!("[instance] {e}")))?;
        }
        Ok(())
    }

    pub fn learner_reps(&self) -> u64 {
        self.learner_reps.unwrap_or(self.replications)
    }

    pub fn stats_reps(&self) -> u64 {
        self.stats_reps.unwrap_or(self.replications)
    }
}

impl InstanceSpec {
    fn check(&self) -> Result<()> {
        match self {
            InstanceSpec::Explicit(e) => {
                if let Some(s) = e.margin_scale {
                    if !(s > 0.0) {
                        return Err(invalid("margin_scale must be positive"));
                    }
                }
                e.build(None).map(|_| ())
            }
            InstanceSpec::Asymmetry(a) => a.build().map(|_| ()),
            InstanceSpec::Impossibility(p) => p.validate(),
            InstanceSpec::LowerBound(l) => l.build().map(|_| ()),
        }
    }

    /// The instance at a sweep point (`None` keeps the configured sizes).
    pub fn build(&self, point: Option<(SweepAxis, usize)>) -> Result<MultisourceInstance> {
        match self {
            InstanceSpec::Explicit(e) => e.build(point),
            InstanceSpec::LowerBound(l) => {
                let mut inst = l.build()?;
                if let Some((axis, v)) = point {
                    let k = inst.sample_sizes.len();
                    match axis {
                        SweepAxis::TargetN => inst.sample_sizes[k - 1] = v,
                        SweepAxis::SourceN => inst.sample_sizes[..k - 1].iter_mut().for_each(|n| *n = v),
                        SweepAxis::Sources => return Err(invalid("lower_bound instances cannot sweep the source count")),
                    }
                }
                Ok(inst)
            }
            InstanceSpec::Asymmetry(a) => a.build(),
            InstanceSpec::Impossibility(p) => impossibility_instance(p),
        }
    }
}

impl ExplicitSpec {
    pub fn build(&self, point: Option<(SweepAxis, usize)>) -> Result<MultisourceInstance> {
        let mut spec = self.clone();
        if let Some((axis, v)) = point {
            match axis {
                SweepAxis::TargetN => spec.n_target = v,
                SweepAxis::SourceN => spec.sources.iter_mut().for_each(|s| s.n = v),
                SweepAxis::Sources => spec.sources.iter_mut().for_each(|s| s.count = v),
            }
        }
        let mut tasks = Vec::new();
        let mut sizes = Vec::new();
        let mut rhos = Vec::new();
        for s in &spec.sources {
            for _ in 0..s.count {
                tasks.push(s.dist.clone());
                sizes.push(s.n);
                rhos.push(s.rho);
            }
        }
        tasks.push(spec.target.clone());
        sizes.push(spec.n_target);
        rhos.push(1.0);
        if let Some(scale) = spec.margin_scale {
            let m: usize = sizes.iter().sum();
            let margin = (scale * (m.max(1) as f64).powf(-(1.0 - spec.beta) / (2.0 - spec.beta))).min(0.5);
            for t in tasks.iter_mut() {
                if let TaskDistribution::ThresholdFamily { noise, .. } = t {
                    *noise = Noise::Flip { q: 0.5 - margin };
                }
            }
        }
        MultisourceInstance::new(tasks, sizes, rhos, spec.beta, spec.c_beta, spec.c_rho, spec.class.clone())
    }
}

impl AsymmetrySpec {
    /// One source and the target, in the swapped roles if requested.
    pub fn build(&self) -> Result<MultisourceInstance> {
        let (p, d) = make_asymmetry_pair(self.beta, self.n_p.max(1), self.c2)?;
        let (src, tgt, n_src, n_tgt) = if self.swap_target {
            (d, p, self.n_target, self.n_p)
        } else {
            (p, d, self.n_p, self.n_target)
        };
        // the asymmetry learners ignore exponents; the source is declared uninformative
        MultisourceInstance::new(
            vec![src, tgt],
            vec![n_src, n_tgt],
            vec![f64::INFINITY, 1.0],
            self.beta,
            2.0,
            2.0,
            HypothesisClass::two_point(),
        )
    }
}

impl LowerBoundSpec {
    pub fn build(&self) -> Result<MultisourceInstance> {
        build_lower_bound_instance(&self.rhos, self.beta, self.d, self.sigma_index, self.epsilon, &self.sizes)
    }
}

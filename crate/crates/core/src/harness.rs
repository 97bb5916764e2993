//! Config-driven benchmark runner and report writers.
//!
//! A run samples balanced concept datasets from the train split, extracts
//! one CAV per (method, concept, seed) cell, scores vector metrics on the
//! configured vector split and steering metrics on the test split with a
//! task probe fitted once on unsteered train rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cav::{extract, save_cav, Cav, MethodId};
use crate::error::{Error, Result};
use crate::ingest::{
    generate_synthetic, load_embeddings, sample_concept_sets, save_embeddings, ConceptDataset,
    LabelTable, SamplingStrategy, Split, SyntheticSpec,
};
use crate::linalg::{dot, EmbeddingMatrix, UnitVector};
use crate::metrics::{
    aggregate, auc_with, ccr, collateral_damage, f1, mad, max_similarity, steering_disparity,
    threshold_predictions, youden_threshold, ScorePair, TieRule,
};
use crate::probes::{fit_task_probe, TaskProbe};
use crate::sae::{activation_density, load_bundle, normalize_store, train_sae, SaeParams};
use crate::steer::orthogonalize_matrix;

pub const DEFAULT_N_PER_SIDE: usize = 500;

pub const CSV_HEADER: [&str; 9] = [
    "method",
    "concept",
    "seed",
    "metric",
    "value",
    "status",
    "threshold",
    "config_hash",
    "two_se",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricId {
    Auc,
    Mad,
    Ms,
    Ccr,
    F1,
    Cd,
    Sd,
}

impl MetricId {
    pub const ALL: [MetricId; 7] = [
        MetricId::Auc,
        MetricId::Mad,
        MetricId::Ms,
        MetricId::Ccr,
        MetricId::F1,
        MetricId::Cd,
        MetricId::Sd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Auc => "auc",
            MetricId::Mad => "mad",
            MetricId::Ms => "ms",
            MetricId::Ccr => "ccr",
            MetricId::F1 => "f1",
            MetricId::Cd => "cd",
            MetricId::Sd => "sd",
        }
    }

    fn needs_task(self) -> bool {
        matches!(self, MetricId::Cd | MetricId::Sd)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Steering {
    #[default]
    Orthogonalize,
}

/// Settings for training a desk-scale SAE on the train split when no
/// bundle directory is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaeTrainSettings {
    /// latent width
    pub m: usize,
    pub k: usize,
    #[serde(default = "default_sae_epochs")]
    pub epochs: usize,
    #[serde(default = "default_sae_lr")]
    pub lr: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_sae_epochs() -> usize {
    200
}

fn default_sae_lr() -> f64 {
    1e-2
}

fn default_n_per_side() -> usize {
    DEFAULT_N_PER_SIDE
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_metrics() -> Vec<MetricId> {
    MetricId::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_vector_split() -> Split {
    Split::Val
}

/// Benchmark configuration, read from TOML.
///
/// Relative input paths are resolved against `base_dir` (the directory of
/// the config file when loaded with [`BenchmarkConfig::from_file`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default)]
    pub embeddings_path: Option<PathBuf>,
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    /// Concepts to evaluate; empty means every concept column.
    #[serde(default)]
    pub concepts: Vec<String>,
    /// `task_label` or a concept column; required for CD and SD.
    #[serde(default)]
    pub target_task: Option<String>,
    pub methods: Vec<MethodId>,
    #[serde(default = "default_n_per_side")]
    pub n_per_side: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sae_dir: Option<PathBuf>,
    #[serde(default)]
    pub sae_train: Option<SaeTrainSettings>,
    #[serde(default)]
    pub steering: Steering,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricId>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Split used for AUC, MAD and CCR.
    #[serde(default = "default_vector_split")]
    pub vector_split: Split,
    #[serde(default)]
    pub sampling: SamplingStrategy,
    /// Count AUC ties as zero instead of one half.
    #[serde(default)]
    pub strict_auc: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    }

    fn tie_rule(&self) -> TieRule {
        if self.strict_auc {
            TieRule::Strict
        } else {
            TieRule::Half
        }
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_owned()));
        match (&self.synthetic, &self.embeddings_path, &self.labels_path) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            (Some(_), _, _) => return bad("give either `synthetic` or the two input paths, not both"),
            _ => return bad("`embeddings_path` and `labels_path` are both required"),
        }
        if self.methods.is_empty() {
            return bad("`methods` is empty");
        }
        if self.seeds.is_empty() {
            return bad("`seeds` is empty");
        }
        if self.metrics.is_empty() {
            return bad("`metrics` is empty");
        }
        if self.n_per_side == 0 {
            return bad("`n_per_side` must be positive");
        }
        if self.metrics.iter().any(|m| m.needs_task()) && self.target_task.is_none() {
            return bad("CD and SD need `target_task`");
        }
        if self.methods.iter().any(|m| m.is_sae()) && self.sae_dir.is_none() && self.sae_train.is_none() {
            return bad("SAE methods need `sae_dir` or `sae_train`");
        }
        Ok(())
    }

    /// Short digest of every setting that influences results. Output
    /// location and the config's own directory are excluded.
    pub fn hash(&self) -> String {
        let canonical = format!(
            "{:?}{:?}",
            (
                &self.embeddings_path,
                &self.labels_path,
                &self.synthetic,
                &self.concepts,
                &self.target_task,
                &self.methods,
            ),
            (
                self.n_per_side,
                &self.seeds,
                &self.sae_dir,
                &self.sae_train,
                self.steering,
                &self.metrics,
                self.vector_split,
                &self.sampling,
                self.strict_auc,
            )
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Data, probe and SAE shared by every cell of a run.
pub struct Inputs {
    pub embeddings: EmbeddingMatrix,
    pub labels: LabelTable,
    pub concepts: Vec<String>,
    /// Task labels per row, when a target task is configured.
    pub task_labels: Option<Vec<u32>>,
    pub sae: Option<SaeParams>,
    pub notes: Vec<String>,
}

/// Loads (or generates) the data and builds the SAE if any method needs one.
pub fn prepare(cfg: &BenchmarkConfig) -> Result<Inputs> {
    cfg.validate()?;
    let (embeddings, labels) = match &cfg.synthetic {
        Some(spec) => {
            let data = generate_synthetic(spec)?;
            (data.embeddings, data.labels)
        }
        None => {
            let e = load_embeddings(cfg.resolve(cfg.embeddings_path.as_deref().unwrap_or(Path::new(""))))?;
            let l = LabelTable::read_csv(cfg.resolve(cfg.labels_path.as_deref().unwrap_or(Path::new(""))))?;
            (e, l)
        }
    };
    if labels.n() != embeddings.n() {
        return Err(Error::LabelTable(format!(
            "{} label rows for {} embeddings",
            labels.n(),
            embeddings.n()
        )));
    }
    let concepts = if cfg.concepts.is_empty() {
        labels.concept_names().map(str::to_owned).collect()
    } else {
        for c in &cfg.concepts {
            labels.concept(c)?;
        }
        cfg.concepts.clone()
    };
    if cfg.metrics.contains(&MetricId::Sd) && labels.pair_ids.is_none() {
        return Err(Error::ConfigInvalid(
            "SD needs counterfactual pairs (a pair_id column)".into(),
        ));
    }
    let task_labels = match &cfg.target_task {
        Some(t) => Some(labels.group_column(t).map_err(|_| {
            Error::ConfigInvalid(format!("unknown target_task column {t:?}"))
        })?),
        None => None,
    };
    let sae = if cfg.methods.iter().any(|m| m.is_sae()) {
        Some(match (&cfg.sae_dir, &cfg.sae_train) {
            (Some(dir), _) => load_bundle(cfg.resolve(dir))?,
            (None, Some(t)) => {
                let train = embeddings.select(&labels.rows_in(Split::Train))?;
                let (store, scale) = normalize_store(&train)?;
                let mut params = train_sae(&store, t.m, t.k, t.epochs, t.lr, t.seed)?.params;
                params.scale = scale;
                params
            }
            (None, None) => unreachable!("validated above"),
        })
    } else {
        None
    };
    let mut notes = Vec::new();
    if let Some(sae) = &sae {
        let train = labels.rows_in(Split::Train);
        if !train.is_empty() {
            let density = activation_density(sae, &embeddings, &train)?;
            let dead = density.iter().filter(|&&p| p == 0.0).count();
            notes.push(format!("SAE: {dead} of {} latents never fire on the train split", sae.m()));
        }
    }
    Ok(Inputs {
        embeddings,
        labels,
        concepts,
        task_labels,
        sae,
        notes,
    })
}

/// One line of the CSV report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub concept: String,
    /// Seed number, or `agg` for aggregate rows.
    pub seed: String,
    pub metric: String,
    pub value: Option<f64>,
    /// `ok`, `flagged:<why>` or `failed:<ErrorKind>`.
    pub status: String,
    pub threshold: Option<f64>,
    pub config_hash: String,
    /// Aggregate rows only.
    pub two_se: Option<f64>,
}

impl ReportRow {
    pub fn failed(&self) -> bool {
        self.status.starts_with("failed:")
    }

    pub fn is_aggregate(&self) -> bool {
        self.seed == "agg"
    }
}

/// Result of one extraction cell.
pub struct CellCav {
    pub method: MethodId,
    pub concept: String,
    pub seed: u64,
    /// The extracted CAV or the failing error's kind.
    pub cav: std::result::Result<Cav, &'static str>,
}

pub struct RunReport {
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
    pub cavs: Vec<CellCav>,
    /// SAE normalisation note for the report header.
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    pub fn value(&self, method: &str, concept: &str, seed: &str, metric: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.concept == concept && r.seed == seed && r.metric == metric)
    }
}

/// Row sets a concept's metrics are evaluated on.
struct ConceptEval {
    /// vector split, positives / negatives
    vec_pos: Vec<usize>,
    vec_neg: Vec<usize>,
    test_rows: Vec<usize>,
    test_y: Vec<bool>,
    /// test rows without the concept (CD)
    test_absent: Vec<usize>,
    /// test counterfactual pairs (clean, infused) for SD
    test_clean: Vec<usize>,
    test_infused: Vec<usize>,
}

fn concept_eval(labels: &LabelTable, concept: &str, vector_split: Split) -> Result<ConceptEval> {
    let y = labels.concept(concept)?;
    let (vec_pos, vec_neg) = labels.rows_in(vector_split).into_iter().partition(|&i| y[i]);
    let test_rows = labels.rows_in(Split::Test);
    let test_y = test_rows.iter().map(|&i| y[i]).collect();
    let test_absent = test_rows.iter().copied().filter(|&i| !y[i]).collect();
    let (mut test_clean, mut test_infused) = (Vec::new(), Vec::new());
    if labels.pair_ids.is_some() {
        let partner = labels.partner_map()?;
        for &i in &test_rows {
            if let (true, Some(j)) = (y[i], partner[i]) {
                if labels.split[j] == Split::Test && !y[j] {
                    test_infused.push(i);
                    test_clean.push(j);
                }
            }
        }
    }
    Ok(ConceptEval {
        vec_pos,
        vec_neg,
        test_rows,
        test_y,
        test_absent,
        test_clean,
        test_infused,
    })
}

type Kind = &'static str;

fn failed(kind: Kind) -> String {
    format!("failed:{kind}")
}

struct MetricValue {
    metric: &'static str,
    value: std::result::Result<f64, Kind>,
    threshold: Option<f64>,
    flag: Option<&'static str>,
}

impl MetricValue {
    fn plain(metric: &'static str, value: Result<f64>) -> Self {
        Self {
            metric,
            value: value.map_err(|e| e.kind()),
            threshold: None,
            flag: None,
        }
    }
}

struct CellContext<'a> {
    cfg: &'a BenchmarkConfig,
    inputs: &'a Inputs,
    probe: Option<&'a TaskProbe>,
}

fn score_metrics(
    ctx: &CellContext<'_>,
    metric: MetricId,
    v: &UnitVector,
    others: &[&UnitVector],
    ds: &ConceptDataset,
    ev: &ConceptEval,
) -> Vec<MetricValue> {
    let m = &ctx.inputs.embeddings;
    let vs = v.as_slice();
    let scores = || ScorePair::project(vs, m, &ev.vec_pos, &ev.vec_neg);
    let task = || {
        ctx.inputs
            .task_labels
            .as_deref()
            .ok_or_else(|| Error::ConfigInvalid("no target_task".into()))
    };
    let probe = || {
        ctx.probe
            .ok_or_else(|| Error::ConfigInvalid("no task probe".into()))
    };
    match metric {
        MetricId::Auc => {
            let s = scores();
            vec![MetricValue::plain("auc", auc_with(&s.pos, &s.neg, ctx.cfg.tie_rule()))]
        }
        MetricId::Mad => vec![MetricValue::plain("mad", mad(&scores()))],
        MetricId::Ms => vec![MetricValue::plain("ms", max_similarity(v, others))],
        MetricId::Ccr => vec![MetricValue::plain(
            "ccr",
            ccr(v, others, m, &ev.vec_pos, &ev.vec_neg),
        )],
        MetricId::F1 => {
            // threshold from the CAV's own training sample, scored on test
            let train_scores: Vec<f64> = ds.all_rows().iter().map(|&i| dot(vs, m.row(i))).collect();
            let mut mv = MetricValue::plain("f1", Err(Error::Empty));
            match youden_threshold(&train_scores, &ds.labels()) {
                Err(e) => mv.value = Err(e.kind()),
                Ok(t) => {
                    mv.threshold = Some(t);
                    let test_scores: Vec<f64> = ev.test_rows.iter().map(|&i| dot(vs, m.row(i))).collect();
                    match f1(&ev.test_y, &threshold_predictions(&test_scores, t)) {
                        Ok(r) => {
                            mv.value = Ok(r.value);
                            mv.flag = r.degenerate.then_some("NoPositives");
                        }
                        Err(e) => mv.value = Err(e.kind()),
                    }
                }
            }
            vec![mv]
        }
        MetricId::Cd => {
            let cd = (|| {
                let steered = orthogonalize_matrix(m, &ev.test_absent, v)?;
                collateral_damage(probe()?, m, &steered, &ev.test_absent, task()?)
            })();
            let cd = MetricValue::plain("cd", cd);
            let abs = MetricValue {
                metric: "cd_abs",
                value: cd.value.map(f64::abs),
                threshold: None,
                flag: None,
            };
            vec![cd, abs]
        }
        MetricId::Sd => {
            let sd = (|| {
                if ev.test_infused.is_empty() {
                    return Err(Error::NoPairMapping);
                }
                let steered = orthogonalize_matrix(m, &ev.test_infused, v)?;
                steering_disparity(probe()?, m, &steered, &ev.test_clean, &ev.test_infused, task()?)
                    .map(|(sd, _)| sd)
            })();
            vec![MetricValue::plain("sd", sd)]
        }
    }
}

fn metric_names(metrics: &[MetricId]) -> Vec<&'static str> {
    let mut names = Vec::new();
    for m in metrics {
        names.push(m.as_str());
        if *m == MetricId::Cd {
            names.push("cd_abs");
        }
    }
    names
}

fn fit_probe(cfg: &BenchmarkConfig, inputs: &Inputs) -> Result<Option<TaskProbe>> {
    if !cfg.metrics.iter().any(|m| m.needs_task()) {
        return Ok(None);
    }
    let labels = inputs
        .task_labels
        .as_deref()
        .ok_or_else(|| Error::ConfigInvalid("CD and SD need `target_task`".into()))?;
    let train = inputs.labels.rows_in(Split::Train);
    let classes = labels.iter().max().map_or(0, |&c| c as usize + 1).max(2);
    fit_task_probe(&inputs.embeddings, &train, labels, classes).map(Some)
}

/// Samples, extracts and scores every cell. Pure apart from the rayon
/// thread pool; output ordering does not depend on scheduling.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<RunReport> {
    let inputs = prepare(cfg)?;
    run_prepared(cfg, &inputs)
}

pub fn run_prepared(cfg: &BenchmarkConfig, inputs: &Inputs) -> Result<RunReport> {
    let hash = cfg.hash();
    let probe = fit_probe(cfg, inputs)?;
    let m = &inputs.embeddings;

    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut methods = cfg.methods.clone();
    methods.sort_by_key(|m| m.as_str());
    methods.dedup();
    let mut concepts = inputs.concepts.clone();
    concepts.sort();
    concepts.dedup();

    // one balanced dataset per (concept, seed), shared by every method
    let datasets: BTreeMap<(usize, u64), std::result::Result<ConceptDataset, Kind>> = concepts
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| seeds.iter().map(move |&s| (ci, c, s)))
        .map(|(ci, c, s)| {
            let ds = sample_concept_sets(&inputs.labels, c, cfg.n_per_side, s, &cfg.sampling);
            ((ci, s), ds.map_err(|e| e.kind()))
        })
        .collect();

    let mut jobs: Vec<(MethodId, usize, u64)> = Vec::new();
    for &me in &methods {
        for ci in 0..concepts.len() {
            jobs.extend(seeds.iter().map(|&s| (me, ci, s)));
        }
    }

    let cavs: Vec<std::result::Result<Cav, Kind>> = jobs
        .par_iter()
        .map(|&(method, ci, seed)| {
            let ds = datasets[&(ci, seed)].as_ref().map_err(|k| *k)?;
            // extraction only ever sees the sampled train rows
            let (sub, local) = ds.gather(m).map_err(|e| e.kind())?;
            extract(method, &sub, &local, inputs.sae.as_ref(), seed).map_err(|e| e.kind())
        })
        .collect();

    let evals: Vec<std::result::Result<ConceptEval, Kind>> = concepts
        .iter()
        .map(|c| concept_eval(&inputs.labels, c, cfg.vector_split).map_err(|e| e.kind()))
        .collect();
    let ctx = CellContext {
        cfg,
        inputs,
        probe: probe.as_ref(),
    };
    let names = metric_names(&cfg.metrics);

    let rows: Vec<Vec<ReportRow>> = jobs
        .par_iter()
        .zip(&cavs)
        .map(|(&(method, ci, seed), cav)| {
            let row = |metric: &str, value: Option<f64>, status: String, threshold: Option<f64>| ReportRow {
                method: method.to_string(),
                concept: concepts[ci].clone(),
                seed: seed.to_string(),
                metric: metric.to_owned(),
                value,
                status,
                threshold,
                config_hash: hash.clone(),
                two_se: None,
            };
            let prepared = (|| {
                let cav = cav.as_ref().map_err(|k| *k)?;
                let ds = datasets[&(ci, seed)].as_ref().map_err(|k| *k)?;
                let ev = evals[ci].as_ref().map_err(|k| *k)?;
                Ok::<_, Kind>((cav, ds, ev))
            })();
            let (cav, ds, ev) = match prepared {
                Ok(t) => t,
                Err(kind) => {
                    return names.iter().map(|n| row(n, None, failed(kind), None)).collect();
                }
            };
            let others: Vec<&UnitVector> = jobs
                .iter()
                .zip(&cavs)
                .filter(|((me, cj, s), _)| *me == method && *s == seed && *cj != ci)
                .filter_map(|(_, c)| c.as_ref().ok().map(|c| &c.direction))
                .collect();
            let mut out = Vec::new();
            for &metric in &cfg.metrics {
                for mv in score_metrics(&ctx, metric, &cav.direction, &others, ds, ev) {
                    let status = match (&mv.value, mv.flag) {
                        (Ok(_), Some(flag)) => format!("flagged:{flag}"),
                        (Ok(_), None) => "ok".into(),
                        (Err(kind), _) => failed(kind),
                    };
                    out.push(row(mv.metric, mv.value.ok(), status, mv.threshold));
                }
            }
            out
        })
        .collect();

    let mut rows: Vec<ReportRow> = rows.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (&a.method, &a.concept, a.seed.parse::<u64>().ok(), &a.metric).cmp(&(
            &b.method,
            &b.concept,
            b.seed.parse::<u64>().ok(),
            &b.metric,
        ))
    });
    let aggregates = aggregate_rows(&rows, &hash);
    rows.extend(aggregates);

    let mut notes = Vec::new();
    if let Some(sae) = &inputs.sae {
        notes.push(format!(
            "SAE: m={}, k={}, store scale={} (inputs rescaled to RMS row norm sqrt(d))",
            sae.m(),
            sae.k,
            sae.scale
        ));
    }
    notes.extend(inputs.notes.iter().cloned());
    let cavs = jobs
        .into_iter()
        .zip(cavs)
        .map(|((method, ci, seed), cav)| CellCav {
            method,
            concept: concepts[ci].clone(),
            seed,
            cav,
        })
        .collect();
    Ok(RunReport {
        config_hash: hash,
        rows,
        cavs,
        notes,
    })
}

/// Per (method, metric): average each concept over its successful seeds,
/// then mean ± 2SE across concepts.
fn aggregate_rows(rows: &[ReportRow], hash: &str) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(&str, &str), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        let per_concept = groups.entry((&r.method, &r.metric)).or_default();
        let vals = per_concept.entry(&r.concept).or_default();
        if let (false, Some(v)) = (r.failed(), r.value) {
            vals.push(v);
        }
    }
    groups
        .into_iter()
        .map(|((method, metric), per_concept)| {
            let means: Vec<f64> = per_concept
                .values()
                .filter(|v| !v.is_empty())
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect();
            let agg = aggregate(&means);
            ReportRow {
                method: method.to_owned(),
                concept: "all".into(),
                seed: "agg".into(),
                metric: metric.to_owned(),
                value: agg.as_ref().ok().map(|a| a.mean),
                status: match &agg {
                    Ok(_) => "ok".into(),
                    Err(e) => failed(e.kind()),
                },
                threshold: None,
                config_hash: hash.to_owned(),
                two_se: agg.ok().map(|a| a.two_se),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn csv_string(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let err = |e: csv::Error| Error::ConfigInvalid(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.method.as_str(),
            &r.concept,
            &r.seed,
            &r.metric,
            &opt(r.value),
            &r.status,
            &opt(r.threshold),
            &r.config_hash,
            &opt(r.two_se),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::ConfigInvalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_csv(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, csv_string(rows)?).map_err(|e| Error::io(path, e))
}

/// Two decimals without the leading zero: `0.884` -> `.88`.
pub fn table_number(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_owned()
    } else {
        s
    };
    if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = s.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        s
    }
}

pub fn table_cell(mean: f64, two_se: f64) -> String {
    format!("{}±{}", table_number(mean), table_number(two_se))
}

pub fn markdown_string(rows: &[ReportRow], notes: &[String]) -> String {
    let mut metrics: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    let mut concepts: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| !r.is_aggregate()) {
        for (list, item) in [(&mut metrics, &r.metric), (&mut methods, &r.method), (&mut concepts, &r.concept)] {
            if !list.contains(&item.as_str()) {
                list.push(item);
            }
        }
    }
    for r in rows.iter().filter(|r| r.is_aggregate()) {
        if !metrics.contains(&r.metric.as_str()) {
            metrics.push(&r.metric);
        }
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut out = String::from("# Benchmark report\n");
    if let Some(h) = rows.first().map(|r| &r.config_hash) {
        let _ = writeln!(out, "\nconfig hash `{h}`");
    }
    for n in notes {
        let _ = writeln!(out, "\n{n}");
    }
    for metric in &metrics {
        let _ = writeln!(out, "\n## {metric}\n");
        let _ = writeln!(out, "| method | {} | all |", concepts.join(" | "));
        let _ = writeln!(out, "|---|{}---|", "---|".repeat(concepts.len()));
        for method in &methods {
            let mut cells = Vec::new();
            for concept in &concepts {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| {
                        !r.is_aggregate()
                            && r.method == *method
                            && r.metric == *metric
                            && r.concept == *concept
                            && !r.failed()
                    })
                    .filter_map(|r| r.value)
                    .collect();
                cells.push(match aggregate(&vals) {
                    Ok(a) => table_cell(a.mean, a.two_se),
                    Err(_) => "—".into(),
                });
            }
            let all = rows
                .iter()
                .find(|r| r.is_aggregate() && r.method == *method && r.metric == *metric)
                .and_then(|r| Some(table_cell(r.value?, r.two_se?)))
                .unwrap_or_else(|| "—".into());
            let _ = writeln!(out, "| {method} | {} | {all} |", cells.join(" | "));
        }
    }
    out
}

pub fn emit_markdown(rows: &[ReportRow], notes: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, markdown_string(rows, notes)).map_err(|e| Error::io(path, e))
}

pub fn cav_stem(method: MethodId, concept: &str, seed: u64) -> String {
    format!("{method}__{concept}__s{seed}")
}

/// Writes `report.csv`, `report.md` and `cavs/` under `dir`.
pub fn write_outputs(report: &RunReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    emit_csv(&report.rows, dir.join("report.csv"))?;
    emit_markdown(&report.rows, &report.notes, dir.join("report.md"))?;
    let cav_dir = dir.join("cavs");
    for cell in &report.cavs {
        if let Ok(cav) = &cell.cav {
            save_cav(&cav_dir, &cav_stem(cell.method, &cell.concept, cell.seed), cav)?;
        }
    }
    Ok(())
}

/// Extracts a single CAV with the config's first seed.
pub fn extract_one(cfg: &BenchmarkConfig, inputs: &Inputs, method: MethodId, concept: &str) -> Result<Cav> {
    let seed = cfg.seeds.iter().copied().min().unwrap_or(0);
    let ds = sample_concept_sets(&inputs.labels, concept, cfg.n_per_side, seed, &cfg.sampling)?;
    let (sub, local) = ds.gather(&inputs.embeddings)?;
    extract(method, &sub, &local, inputs.sae.as_ref(), seed)
}

/// Writes `embeddings.cavb`, `labels.csv` and `ground_truth.cavb` (one
/// planted direction per row).
pub fn write_synthetic(spec: &SyntheticSpec, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data = generate_synthetic(spec)?;
    save_embeddings(dir.join("embeddings.cavb"), &data.embeddings)?;
    data.labels.write_csv(dir.join("labels.csv"))?;
    let truth = EmbeddingMatrix::from_rows(&data.ground_truth)?;
    save_embeddings(dir.join("ground_truth.cavb"), &truth)
}

/// Process exit status for an error that aborted a run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid(_)
        | Error::UnknownMethod(_)
        | Error::UnknownConcept(_)
        | Error::InvalidSpec(_)
        | Error::NoPairMapping => 1,
        _ => 3,
    }
}

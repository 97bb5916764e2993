//! CAV extraction methods behind a single registry.
//!
//! Every method receives the full store `M` plus a [`ConceptDataset`] of
//! row indices and returns a unit-norm direction in representation space.
//! SAE-based methods encode the dataset rows, work in latent space and map
//! the latent direction back through the decoder (or encoder rows).

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{load_embeddings, save_embeddings, ConceptDataset, Pairing};
use crate::linalg::{
    check_rows, dot, first_pc, mean_rows, median_rows, normalize, EmbeddingMatrix, UnitVector,
};
use crate::metrics::auc;
use crate::probes::{fit_with_selection, CvPlan, LinearModel, Penalty, SolverKind, DEFAULT_FOLDS};
use crate::sae::{encode_store, latent_density, SaeParams};

/// Number of latents kept by the first stage of S&PTopK.
pub const SP_TOPK_K: usize = 16;
pub const SAS_TAU_MIN_PCT: u32 = 30;
pub const SAS_TAU_MAX_PCT: u32 = 100;

/// Candidate density thresholds 0.30, 0.31, ..., 1.00.
pub fn sas_tau_grid() -> Vec<f64> {
    (SAS_TAU_MIN_PCT..=SAS_TAU_MAX_PCT).map(|p| p as f64 / 100.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    DiffMean,
    DiffMedian,
    Svm,
    Lr,
    FastCav,
    PatCav,
    Pca,
    PosPca,
    Lat,
    Aura,
    SaeDiffMean,
    SaeDiffMedian,
    SaeFastCav,
    Sas,
    SaeLr,
    SpTopK,
    SaeAuraDec,
    SaeAuraEnc,
}

impl MethodId {
    pub const ALL: [MethodId; 18] = [
        MethodId::DiffMean,
        MethodId::DiffMedian,
        MethodId::Svm,
        MethodId::Lr,
        MethodId::FastCav,
        MethodId::PatCav,
        MethodId::Pca,
        MethodId::PosPca,
        MethodId::Lat,
        MethodId::Aura,
        MethodId::SaeDiffMean,
        MethodId::SaeDiffMedian,
        MethodId::SaeFastCav,
        MethodId::Sas,
        MethodId::SaeLr,
        MethodId::SpTopK,
        MethodId::SaeAuraDec,
        MethodId::SaeAuraEnc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::DiffMean => "diffmean",
            MethodId::DiffMedian => "diffmedian",
            MethodId::Svm => "svm",
            MethodId::Lr => "lr",
            MethodId::FastCav => "fastcav",
            MethodId::PatCav => "patcav",
            MethodId::Pca => "pca",
            MethodId::PosPca => "pospca",
            MethodId::Lat => "lat",
            MethodId::Aura => "aura",
            MethodId::SaeDiffMean => "sae_diffmean",
            MethodId::SaeDiffMedian => "sae_diffmedian",
            MethodId::SaeFastCav => "sae_fastcav",
            MethodId::Sas => "sas",
            MethodId::SaeLr => "sae_lr",
            MethodId::SpTopK => "sp_topk",
            MethodId::SaeAuraDec => "sae_aura_dec",
            MethodId::SaeAuraEnc => "sae_aura_enc",
        }
    }

    pub fn is_sae(self) -> bool {
        matches!(
            self,
            MethodId::SaeDiffMean
                | MethodId::SaeDiffMedian
                | MethodId::SaeFastCav
                | MethodId::Sas
                | MethodId::SaeLr
                | MethodId::SpTopK
                | MethodId::SaeAuraDec
                | MethodId::SaeAuraEnc
        )
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_owned()))
    }
}

impl serde::Serialize for MethodId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for MethodId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Hyperparameters and provenance recorded with a CAV.
#[derive(Clone, Debug, PartialEq)]
pub struct CavMeta {
    /// Selected C values (two for S&PTopK: selection stage, then refit).
    pub c: Vec<f64>,
    pub tau: Option<f64>,
    /// Latent indices the direction was built from (SAS, S&PTopK).
    pub neurons: Option<Vec<usize>>,
    pub pairing: Pairing,
    pub n_samples: usize,
    pub seed: u64,
    /// S&PTopK found fewer than K nonzero coefficients and kept them all.
    pub short_selection: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cav {
    pub direction: UnitVector,
    pub method: MethodId,
    pub concept: String,
    pub meta: CavMeta,
}

impl Cav {
    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.direction.as_slice()
    }
}

/// Tuned values collected while a method runs.
#[derive(Default)]
struct Tuned {
    c: Vec<f64>,
    tau: Option<f64>,
    neurons: Option<Vec<usize>>,
    short_selection: bool,
}

/// Per-dimension AurA weights: `2 (AUC_j - 0.5)` where the AUC of feature
/// `j` exceeds one half, zero elsewhere.
pub fn aura_weights(x: &EmbeddingMatrix, pos: &[usize], neg: &[usize]) -> Result<Vec<f64>> {
    check_rows(pos, x.n())?;
    check_rows(neg, x.n())?;
    let mut sp = vec![0.0; pos.len()];
    let mut sn = vec![0.0; neg.len()];
    (0..x.d())
        .map(|j| {
            sp.iter_mut().zip(pos).for_each(|(s, &i)| *s = x.row(i)[j]);
            sn.iter_mut().zip(neg).for_each(|(s, &i)| *s = x.row(i)[j]);
            let a = auc(&sp, &sn)?;
            Ok(if a > 0.5 { 2.0 * (a - 0.5) } else { 0.0 })
        })
        .collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn diff_of_means(x: &EmbeddingMatrix, pos: &[usize], neg: &[usize]) -> Result<Vec<f64>> {
    Ok(sub(&mean_rows(x, pos)?, &mean_rows(x, neg)?))
}

fn diff_of_medians(x: &EmbeddingMatrix, pos: &[usize], neg: &[usize]) -> Result<Vec<f64>> {
    Ok(sub(&median_rows(x, pos)?, &median_rows(x, neg)?))
}

/// Mean positive activation relative to the global mean.
fn fastcav_raw(x: &EmbeddingMatrix, pos: &[usize], neg: &[usize]) -> Result<Vec<f64>> {
    let all: Vec<usize> = pos.iter().chain(neg).copied().collect();
    Ok(sub(&mean_rows(x, pos)?, &mean_rows(x, &all)?))
}

/// Population `Cov(h, y) / Var(y)` with `y = 1` on positives.
fn patcav_raw(x: &EmbeddingMatrix, pos: &[usize], neg: &[usize]) -> Result<Vec<f64>> {
    check_rows(pos, x.n())?;
    check_rows(neg, x.n())?;
    let n = (pos.len() + neg.len()) as f64;
    let y_bar = pos.len() as f64 / n;
    let var_y = y_bar * (1.0 - y_bar);
    if !(var_y > 0.0) {
        return Err(Error::SingleClass);
    }
    let all: Vec<usize> = pos.iter().chain(neg).copied().collect();
    let mu = mean_rows(x, &all)?;
    let mut cov = vec![0.0; x.d()];
    for (&i, y) in pos.iter().map(|i| (i, 1.0)).chain(neg.iter().map(|i| (i, 0.0))) {
        let dy = y - y_bar;
        for ((c, h), m) in cov.iter_mut().zip(x.row(i)).zip(&mu) {
            *c += (h - m) * dy;
        }
    }
    Ok(cov.iter().map(|c| c / n / var_y).collect())
}

/// Flips `v` so that positives project higher on average than negatives.
fn orient(v: UnitVector, x: &EmbeddingMatrix, pos: &[usize], neg: &[usize]) -> Result<UnitVector> {
    let gap = diff_of_means(x, pos, neg)?;
    Ok(if dot(&gap, v.as_slice()) < 0.0 {
        v.negated()
    } else {
        v
    })
}

fn lat_pairs(ds: &ConceptDataset, seed: u64) -> Vec<(usize, usize)> {
    match ds.pairing {
        Pairing::Counterfactual => ds
            .positives
            .iter()
            .copied()
            .zip(ds.negatives.iter().copied())
            .collect(),
        Pairing::Unpaired => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = ds.positives.clone();
            let mut q = ds.negatives.clone();
            p.shuffle(&mut rng);
            q.shuffle(&mut rng);
            p.into_iter().zip(q).collect()
        }
    }
}

fn lat_raw(ds: &ConceptDataset, x: &EmbeddingMatrix, seed: u64) -> Result<UnitVector> {
    let mut deltas: Vec<Vec<f64>> = Vec::new();
    for (i, j) in lat_pairs(ds, seed) {
        check_rows(&[i, j], x.n())?;
        match normalize(&sub(x.row(i), x.row(j))) {
            Ok(u) => deltas.push(u.into_vec()),
            Err(Error::ZeroNorm) => {}
            Err(e) => return Err(e),
        }
    }
    let v = match deltas.len() {
        0 => return Err(Error::AllPairsIdentical),
        1 => {
            let mut v = deltas.pop().unwrap_or_default();
            crate::linalg::apply_sign_convention(&mut v);
            normalize(&v)?
        }
        k => {
            let delta = EmbeddingMatrix::from_rows(&deltas)?;
            first_pc(&delta, &(0..k).collect::<Vec<_>>(), false)?
        }
    };
    orient(v, x, &ds.positives, &ds.negatives)
}

fn linear_model(
    x: &EmbeddingMatrix,
    ds: &ConceptDataset,
    kind: SolverKind,
    seed: u64,
) -> Result<LinearModel> {
    let rows = ds.all_rows();
    let design = x.select(&rows)?;
    fit_with_selection(&design, &ds.labels(), kind, seed)
}

/// Latent codes of the dataset rows: positives occupy `0..p`, negatives
/// `p..p+q`.
struct Latents {
    z: EmbeddingMatrix,
    pos: Vec<usize>,
    neg: Vec<usize>,
}

fn latents(sae: &SaeParams, m: &EmbeddingMatrix, ds: &ConceptDataset) -> Result<Latents> {
    let z = encode_store(sae, m, &ds.all_rows())?;
    let p = ds.positives.len();
    Ok(Latents {
        z,
        pos: (0..p).collect(),
        neg: (p..p + ds.negatives.len()).collect(),
    })
}

/// Latent-space aggregate used by the SAE transport methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregator {
    Mean,
    Median,
    FastCav,
}

fn sas(lat: &Latents, sae: &SaeParams, seed: u64, tuned: &mut Tuned) -> Result<Vec<f64>> {
    let Latents { z, pos, neg } = lat;
    let y: Vec<bool> = (0..z.n()).map(|i| i < pos.len()).collect();
    let survivors = |p_rows: &[usize], n_rows: &[usize], tau: f64| -> Vec<usize> {
        let dp = latent_density(z, p_rows);
        let dn = latent_density(z, n_rows);
        (0..z.d()).filter(|&j| dp[j] >= tau && dn[j] < tau).collect()
    };
    let restricted_mean = |p_rows: &[usize], n_rows: &[usize], keep: &[usize]| -> Result<Vec<f64>> {
        let full = diff_of_means(z, p_rows, n_rows)?;
        let mut w = vec![0.0; z.d()];
        keep.iter().for_each(|&j| w[j] = full[j]);
        Ok(w)
    };

    let folds = CvPlan::StratifiedKFold {
        k: DEFAULT_FOLDS,
        seed,
    }
    .splits(&y)?;
    let split_side = |idx: &[usize]| -> (Vec<usize>, Vec<usize>) { idx.iter().partition(|&&i| y[i]) };

    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    for tau in sas_tau_grid() {
        let keep_all = survivors(pos, neg, tau);
        if keep_all.is_empty() {
            continue;
        }
        let mut total = 0.0;
        for (train, val) in &folds {
            let (tp, tn) = split_side(train);
            let (vp, vn) = split_side(val);
            let keep = survivors(&tp, &tn, tau);
            total += if keep.is_empty() {
                0.5
            } else {
                let w = restricted_mean(&tp, &tn, &keep)?;
                let sp: Vec<f64> = vp.iter().map(|&i| dot(&w, z.row(i))).collect();
                let sn: Vec<f64> = vn.iter().map(|&i| dot(&w, z.row(i))).collect();
                auc(&sp, &sn)?
            };
        }
        let score = total / folds.len() as f64;
        // ascending grid: >= hands ties to the larger threshold
        if best.as_ref().is_none_or(|(s, _, _)| score >= *s) {
            best = Some((score, tau, keep_all));
        }
    }
    let (_, tau, keep) = best.ok_or(Error::NoSurvivingNeurons)?;
    let w = restricted_mean(pos, neg, &keep)?;
    tuned.tau = Some(tau);
    tuned.neurons = Some(keep);
    sae.decode_direction(&w)
}

fn sp_topk(lat: &Latents, sae: &SaeParams, ds: &ConceptDataset, seed: u64, tuned: &mut Tuned) -> Result<Vec<f64>> {
    let y = ds.labels();
    let stage1 = fit_with_selection(&lat.z, &y, SolverKind::Logistic(Penalty::L1), seed)?;
    let mut ranked: Vec<usize> = (0..stage1.weights.len())
        .filter(|&j| stage1.weights[j] != 0.0)
        .collect();
    if ranked.is_empty() {
        return Err(Error::FewerThanKActive);
    }
    ranked.sort_by(|&a, &b| {
        stage1.weights[b]
            .abs()
            .total_cmp(&stage1.weights[a].abs())
            .then(a.cmp(&b))
    });
    tuned.short_selection = ranked.len() < SP_TOPK_K;
    ranked.truncate(SP_TOPK_K);
    ranked.sort_unstable();

    let cols: Vec<f64> = (0..lat.z.n())
        .flat_map(|i| ranked.iter().map(move |&j| (i, j)))
        .map(|(i, j)| lat.z.row(i)[j])
        .collect();
    let xs = EmbeddingMatrix::new(lat.z.n(), ranked.len(), cols)?;
    let stage2 = fit_with_selection(&xs, &y, SolverKind::Logistic(Penalty::L2), seed)?;
    let mut v = vec![0.0; sae.d()];
    for (&j, &w) in ranked.iter().zip(&stage2.weights) {
        crate::linalg::axpy(w, sae.w_enc.row(j), &mut v);
    }
    tuned.c = vec![stage1.c, stage2.c];
    tuned.neurons = Some(ranked);
    Ok(v)
}

fn require_sae<'a>(method: MethodId, sae: Option<&'a SaeParams>, d: usize) -> Result<&'a SaeParams> {
    let sae = sae.ok_or_else(|| Error::MissingSae(method.to_string()))?;
    if sae.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: sae.d(),
        });
    }
    Ok(sae)
}

/// Extracts one CAV. `seed` drives C-selection folds, LAT's random pairing
/// and SAS folds; results are bit-identical for identical inputs.
pub fn extract(
    method: MethodId,
    m: &EmbeddingMatrix,
    ds: &ConceptDataset,
    sae: Option<&SaeParams>,
    seed: u64,
) -> Result<Cav> {
    check_rows(&ds.positives, m.n())?;
    check_rows(&ds.negatives, m.n())?;
    let (pos, neg) = (&ds.positives, &ds.negatives);
    let mut tuned = Tuned::default();
    let direction = match method {
        MethodId::DiffMean => normalize(&diff_of_means(m, pos, neg)?)?,
        MethodId::DiffMedian => normalize(&diff_of_medians(m, pos, neg)?)?,
        MethodId::FastCav => normalize(&fastcav_raw(m, pos, neg)?)?,
        MethodId::PatCav => normalize(&patcav_raw(m, pos, neg)?)?,
        MethodId::Pca => orient(first_pc(m, &ds.all_rows(), true)?, m, pos, neg)?,
        MethodId::PosPca => orient(first_pc(m, pos, true)?, m, pos, neg)?,
        MethodId::Lat => lat_raw(ds, m, seed)?,
        MethodId::Aura => normalize(&aura_weights(m, pos, neg)?)?,
        MethodId::Svm | MethodId::Lr => {
            let kind = if method == MethodId::Svm {
                SolverKind::Svm
            } else {
                SolverKind::Logistic(Penalty::L2)
            };
            let model = linear_model(m, ds, kind, seed)?;
            tuned.c = vec![model.c];
            normalize(&model.weights)?
        }
        _ => {
            let sae = require_sae(method, sae, m.d())?;
            let lat = latents(sae, m, ds)?;
            let (z, zp, zn) = (&lat.z, &lat.pos, &lat.neg);
            let raw = match method {
                MethodId::SaeDiffMean => sae.decode_direction(&diff_of_means(z, zp, zn)?)?,
                MethodId::SaeDiffMedian => sae.decode_direction(&diff_of_medians(z, zp, zn)?)?,
                MethodId::SaeFastCav => sae.decode_direction(&fastcav_raw(z, zp, zn)?)?,
                MethodId::SaeAuraDec => sae.decode_direction(&aura_weights(z, zp, zn)?)?,
                MethodId::SaeAuraEnc => sae.encoder_transpose(&aura_weights(z, zp, zn)?)?,
                MethodId::SaeLr => {
                    let model = fit_with_selection(z, &ds.labels(), SolverKind::Logistic(Penalty::L1), seed)?;
                    tuned.c = vec![model.c];
                    sae.decode_direction(&model.weights)?
                }
                MethodId::Sas => sas(&lat, sae, seed, &mut tuned)?,
                MethodId::SpTopK => sp_topk(&lat, sae, ds, seed, &mut tuned)?,
                _ => unreachable!("non-SAE methods are handled above"),
            };
            normalize(&raw)?
        }
    };
    Ok(Cav {
        direction,
        method,
        concept: ds.concept.clone(),
        meta: CavMeta {
            c: tuned.c,
            tau: tuned.tau,
            neurons: tuned.neurons,
            pairing: ds.pairing.clone(),
            n_samples: ds.positives.len() + ds.negatives.len(),
            seed,
            short_selection: tuned.short_selection,
        },
    })
}

/// Normalised latent aggregate transported through the decoder.
pub fn sae_aggregate_cav(
    m: &EmbeddingMatrix,
    ds: &ConceptDataset,
    sae: &SaeParams,
    aggregator: Aggregator,
) -> Result<Cav> {
    let method = match aggregator {
        Aggregator::Mean => MethodId::SaeDiffMean,
        Aggregator::Median => MethodId::SaeDiffMedian,
        Aggregator::FastCav => MethodId::SaeFastCav,
    };
    extract(method, m, ds, Some(sae), 0)
}

/// L1- or L2-penalised logistic CAV on raw representations with C
/// selection; `lr` in the registry is the L2 variant.
pub fn logistic_cav(m: &EmbeddingMatrix, ds: &ConceptDataset, penalty: Penalty, seed: u64) -> Result<UnitVector> {
    let model = linear_model(m, ds, SolverKind::Logistic(penalty), seed)?;
    normalize(&model.weights)
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Plain-text sidecar: one `key=value` per line.
pub fn meta_text(cav: &Cav) -> String {
    let m = &cav.meta;
    let mut s = String::new();
    let _ = writeln!(s, "method={}", cav.method);
    let _ = writeln!(s, "concept={}", cav.concept);
    let _ = writeln!(s, "C={}", join(&m.c));
    let _ = writeln!(s, "tau={}", m.tau.map(|t| t.to_string()).unwrap_or_default());
    let _ = writeln!(s, "S={}", m.neurons.as_deref().map(join).unwrap_or_default());
    let _ = writeln!(s, "seed={}", m.seed);
    let pairing = match m.pairing {
        Pairing::Unpaired => "unpaired",
        Pairing::Counterfactual => "counterfactual",
    };
    let _ = writeln!(s, "pairing={pairing}");
    let _ = writeln!(s, "n={}", m.n_samples);
    if m.short_selection {
        let _ = writeln!(s, "short_selection=true");
    }
    if matches!(cav.method, MethodId::Pca | MethodId::PosPca) {
        let _ = writeln!(s, "centered=true");
    }
    s
}

/// Writes `<stem>.cavb` and `<stem>.meta`.
pub fn save_cav(dir: impl AsRef<Path>, stem: &str, cav: &Cav) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let v = EmbeddingMatrix::new(1, cav.dim(), cav.as_slice().to_vec())?;
    save_embeddings(dir.join(format!("{stem}.cavb")), &v)?;
    let meta = dir.join(format!("{stem}.meta"));
    std::fs::write(&meta, meta_text(cav)).map_err(|e| Error::io(meta, e))
}

/// Reads a `.cavb` file and its `.meta` sidecar if present.
///
/// The stored vector is `f32`, so it is renormalised on load.
pub fn load_cav(path: impl AsRef<Path>) -> Result<(UnitVector, Vec<(String, String)>)> {
    let path = path.as_ref();
    let m = load_embeddings(path)?;
    if m.n() != 1 {
        return Err(Error::Parse {
            path: path.to_owned(),
            msg: format!("expected a 1×d matrix, found {}×{}", m.n(), m.d()),
        });
    }
    let v = normalize(m.data())?;
    let meta_path = path.with_extension("meta");
    let meta = match std::fs::read_to_string(&meta_path) {
        Ok(text) => text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(Error::io(meta_path, e)),
    };
    Ok((v, meta))
}

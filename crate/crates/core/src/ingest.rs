//! Embedding/label I/O, balanced concept sampling and the synthetic
//! planted-concept generator.
//!
//! Embedding files are little-endian: magic `CAVB`, `u32` version 1,
//! `u64` rows, `u64` columns, then `rows * cols` row-major `f32` values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, normalize, EmbeddingMatrix, UnitVector};

pub const MAGIC: [u8; 4] = *b"CAVB";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 8 + 8;

pub fn encode_matrix(m: &EmbeddingMatrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN as usize + 4 * m.data().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.n() as u64).to_le_bytes());
    out.extend_from_slice(&(m.d() as u64).to_le_bytes());
    for (i, &x) in m.data().iter().enumerate() {
        let f = x as f32;
        if !f.is_finite() {
            return Err(Error::NonFiniteValue(i));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let found = bytes.len() as u64;
    if found < HEADER_LEN {
        if found >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN,
            found,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or(Error::TruncatedFile {
            expected: u64::MAX,
            found,
        })?;
    if found < expected {
        return Err(Error::TruncatedFile { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingBytes(found - expected));
    }
    let data: Vec<f64> = bytes[HEADER_LEN as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    EmbeddingMatrix::new(n as usize, d as usize, data)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes)
}

pub fn save_embeddings(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_matrix(m)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::LabelTable(format!("unknown split {other:?}"))),
        }
    }
}

/// Per-sample labels aligned with embedding rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTable {
    pub sample_ids: Vec<String>,
    pub split: Vec<Split>,
    pub task_labels: Vec<u32>,
    /// Concept columns in file order.
    pub concepts: Vec<(String, Vec<bool>)>,
    /// Rows sharing a pair id are counterfactual twins.
    pub pair_ids: Option<Vec<Option<String>>>,
}

impl LabelTable {
    pub fn n(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn concept_names(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(|(n, _)| n.as_str())
    }

    pub fn concept(&self, name: &str) -> Result<&[bool]> {
        self.concepts
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::UnknownConcept(name.to_owned()))
    }

    pub fn rows_in(&self, split: Split) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.task_labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    /// Integer group value of a column: `task_label` or a concept name.
    pub fn group_column(&self, key: &str) -> Result<Vec<u32>> {
        if key == "task_label" {
            return Ok(self.task_labels.clone());
        }
        Ok(self.concept(key)?.iter().map(|&b| b as u32).collect())
    }

    /// Counterpart of each row according to the pair mapping (groups of
    /// exactly two rows only).
    pub fn partner_map(&self) -> Result<Vec<Option<usize>>> {
        let ids = self.pair_ids.as_ref().ok_or(Error::NoPairMapping)?;
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            if let Some(id) = id {
                groups.entry(id.as_str()).or_default().push(i);
            }
        }
        let mut partner = vec![None; self.n()];
        for rows in groups.values() {
            if let [a, b] = rows[..] {
                partner[a] = Some(b);
                partner[b] = Some(a);
            }
        }
        Ok(partner)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let bad = |what: &str, len: usize| {
            Error::LabelTable(format!("{what} has {len} entries, expected {n}"))
        };
        if self.split.len() != n {
            return Err(bad("split", self.split.len()));
        }
        if self.task_labels.len() != n {
            return Err(bad("task_label", self.task_labels.len()));
        }
        for (name, col) in &self.concepts {
            if col.len() != n {
                return Err(bad(name, col.len()));
            }
        }
        if let Some(p) = &self.pair_ids {
            if p.len() != n {
                return Err(bad("pair_id", p.len()));
            }
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let parse_err = |msg: String| Error::Parse {
            path: path.to_owned(),
            msg,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (id_col, split_col, task_col) = match (col("sample_id"), col("split"), col("task_label"))
        {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(parse_err(
                    "header must contain sample_id,split,task_label".into(),
                ))
            }
        };
        let pair_col = col("pair_id");
        let concept_cols: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| ![Some(id_col), Some(split_col), Some(task_col), pair_col].contains(&Some(*i)))
            .map(|(i, h)| (i, h.to_owned()))
            .collect();

        let mut table = LabelTable {
            sample_ids: Vec::new(),
            split: Vec::new(),
            task_labels: Vec::new(),
            concepts: concept_cols
                .iter()
                .map(|(_, name)| (name.clone(), Vec::new()))
                .collect(),
            pair_ids: pair_col.map(|_| Vec::new()),
        };
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| parse_err(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim();
            table.sample_ids.push(field(id_col).to_owned());
            table.split.push(field(split_col).parse()?);
            table.task_labels.push(field(task_col).parse().map_err(|_| {
                parse_err(format!("row {}: bad task_label {:?}", line + 1, field(task_col)))
            })?);
            for (k, (ci, name)) in concept_cols.iter().enumerate() {
                let v = match field(*ci) {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(parse_err(format!(
                            "row {}: concept {name} must be 0/1, got {other:?}",
                            line + 1
                        )))
                    }
                };
                table.concepts[k].1.push(v);
            }
            if let (Some(pc), Some(p)) = (pair_col, table.pair_ids.as_mut()) {
                let id = field(pc);
                p.push((!id.is_empty()).then(|| id.to_owned()));
            }
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e: csv::Error| Error::Parse {
            path: path.to_owned(),
            msg: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["sample_id", "split", "task_label"];
        header.extend(self.concept_names());
        if self.pair_ids.is_some() {
            header.push("pair_id");
        }
        w.write_record(&header).map_err(io)?;
        for i in 0..self.n() {
            let mut rec = vec![
                self.sample_ids[i].clone(),
                self.split[i].as_str().to_owned(),
                self.task_labels[i].to_string(),
            ];
            rec.extend(self.concepts.iter().map(|(_, c)| (c[i] as u8).to_string()));
            if let Some(p) = &self.pair_ids {
                rec.push(p[i].clone().unwrap_or_default());
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pairing {
    Unpaired,
    /// `positives[i]` and `negatives[i]` are counterfactual twins.
    Counterfactual,
}

/// Concept-positive and concept-negative row sets.
#[derive(Clone, Debug, PartialEq)]
pub struct ConceptDataset {
    pub concept: String,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub pairing: Pairing,
    pub n_per_side: usize,
    /// Set when fewer rows than requested were available.
    pub clamped: bool,
}

impl ConceptDataset {
    pub fn new(
        concept: impl Into<String>,
        positives: Vec<usize>,
        negatives: Vec<usize>,
        pairing: Pairing,
    ) -> Result<Self> {
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::EmptySelection);
        }
        if pairing == Pairing::Counterfactual && positives.len() != negatives.len() {
            return Err(Error::LengthMismatch(positives.len(), negatives.len()));
        }
        let pos: std::collections::HashSet<_> = positives.iter().collect();
        if negatives.iter().any(|i| pos.contains(i)) {
            return Err(Error::LabelTable(
                "positive and negative sets overlap".into(),
            ));
        }
        let n_per_side = positives.len().min(negatives.len());
        Ok(Self {
            concept: concept.into(),
            positives,
            negatives,
            pairing,
            n_per_side,
            clamped: false,
        })
    }

    /// Binary labels over `positives ++ negatives`.
    pub fn labels(&self) -> Vec<bool> {
        let mut y = vec![true; self.positives.len()];
        y.resize(self.positives.len() + self.negatives.len(), false);
        y
    }

    pub fn all_rows(&self) -> Vec<usize> {
        self.positives.iter().chain(&self.negatives).copied().collect()
    }

    /// Copies only this dataset's rows out of `m` and re-indexes the sets
    /// onto the copy (positives first).
    pub fn gather(&self, m: &EmbeddingMatrix) -> Result<(EmbeddingMatrix, ConceptDataset)> {
        let sub = m.select(&self.all_rows())?;
        let p = self.positives.len();
        let local = ConceptDataset {
            concept: self.concept.clone(),
            positives: (0..p).collect(),
            negatives: (p..p + self.negatives.len()).collect(),
            pairing: self.pairing.clone(),
            n_per_side: self.n_per_side,
            clamped: self.clamped,
        };
        Ok((sub, local))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SamplingStrategy {
    RandomBalanced,
    PairedCounterfactual,
    /// Both sides restricted to the majority value of `group_key` among
    /// the concept positives.
    Stratified { group_key: String },
}

impl Default for SamplingStrategy {
    fn default() -> Self {
        SamplingStrategy::RandomBalanced
    }
}

/// Draws a balanced concept dataset from the train split.
pub fn sample_concept_sets(
    labels: &LabelTable,
    concept: &str,
    n: usize,
    seed: u64,
    strategy: &SamplingStrategy,
) -> Result<ConceptDataset> {
    let y = labels.concept(concept)?;
    let train = |i: &usize| labels.split[*i] == Split::Train;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (positives, negatives, pairing) = match strategy {
        SamplingStrategy::RandomBalanced => {
            let (pos, neg): (Vec<usize>, Vec<usize>) =
                (0..labels.n()).filter(train).partition(|&i| y[i]);
            let (p, q) = draw_two(pos, neg, n, &mut rng);
            (p, q, Pairing::Unpaired)
        }
        SamplingStrategy::Stratified { group_key } => {
            let group = labels.group_column(group_key)?;
            let pos_all: Vec<usize> = (0..labels.n()).filter(train).filter(|&i| y[i]).collect();
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for &i in &pos_all {
                *counts.entry(group[i]).or_default() += 1;
            }
            let majority = counts
                .iter()
                .fold(None, |best: Option<(u32, usize)>, (&g, &c)| match best {
                    Some((_, bc)) if bc >= c => best,
                    _ => Some((g, c)),
                })
                .map(|(g, _)| g)
                .ok_or(Error::EmptySelection)?;
            let pos = pos_all.into_iter().filter(|&i| group[i] == majority).collect();
            let neg = (0..labels.n())
                .filter(train)
                .filter(|&i| !y[i] && group[i] == majority)
                .collect();
            let (p, q) = draw_two(pos, neg, n, &mut rng);
            (p, q, Pairing::Unpaired)
        }
        SamplingStrategy::PairedCounterfactual => {
            let partner = labels.partner_map()?;
            let mut pairs: Vec<(usize, usize)> = (0..labels.n())
                .filter(train)
                .filter(|&i| y[i])
                .filter_map(|i| partner[i].map(|j| (i, j)))
                .filter(|&(_, j)| train(&j) && !y[j])
                .collect();
            pairs.shuffle(&mut rng);
            pairs.truncate(n);
            pairs.sort_unstable();
            let (p, q) = pairs.into_iter().unzip();
            (p, q, Pairing::Counterfactual)
        }
    };
    let mut ds = ConceptDataset::new(concept, positives, negatives, pairing)?;
    ds.clamped = ds.n_per_side < n;
    Ok(ds)
}

fn draw_two(
    mut pos: Vec<usize>,
    mut neg: Vec<usize>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let k = n.min(pos.len()).min(neg.len());
    for side in [&mut pos, &mut neg] {
        side.shuffle(rng);
        side.truncate(k);
        side.sort_unstable();
    }
    (pos, neg)
}

/// Parameters of the planted-concept generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub d: usize,
    /// Counterfactual pairs per concept in the train split.
    pub n_per_side: usize,
    /// Pairs per concept in each of val and test (defaults to `n_per_side`).
    #[serde(default)]
    pub n_eval: Option<usize>,
    /// Explicit planted directions; normalised on use.
    #[serde(default)]
    pub concept_dirs: Option<Vec<Vec<f64>>>,
    /// Number of random planted directions when `concept_dirs` is absent.
    #[serde(default)]
    pub n_concepts: Option<usize>,
    /// Pairwise cosine between generated directions.
    #[serde(default)]
    pub concept_cosine: f64,
    #[serde(default)]
    pub concept_names: Option<Vec<String>>,
    pub beta: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub base_orthogonal: bool,
    #[serde(default)]
    pub task_dir: Option<Vec<f64>>,
    /// Infused train rows carry this task label instead of their clean
    /// twin's, planting a spurious concept/label association.
    #[serde(default)]
    pub confound_class: Option<u32>,
    #[serde(default)]
    pub seed: u64,
}

pub struct SyntheticData {
    pub embeddings: EmbeddingMatrix,
    pub labels: LabelTable,
    pub ground_truth: Vec<UnitVector>,
    pub task_dir: UnitVector,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_owned()));
        if self.d == 0 || self.n_per_side == 0 {
            return bad("d and n_per_side must be positive");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be > 0");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be >= 0");
        }
        if !(0.0..1.0).contains(&self.concept_cosine) {
            return bad("concept_cosine must lie in [0, 1)");
        }
        if let Some(dirs) = &self.concept_dirs {
            if dirs.is_empty() {
                return bad("concept_dirs is empty");
            }
            for v in dirs {
                if v.len() != self.d {
                    return bad("concept_dirs entries must have length d");
                }
                if (norm(v) - 1.0).abs() > 1e-6 {
                    return bad("concept_dirs must be unit norm");
                }
            }
        } else if self.n_concepts.unwrap_or(0) == 0 {
            return bad("either concept_dirs or n_concepts is required");
        }
        if let Some(names) = &self.concept_names {
            if names.len() != self.num_concepts() {
                return bad("concept_names length must match the number of concepts");
            }
        }
        Ok(())
    }

    pub fn num_concepts(&self) -> usize {
        self.concept_dirs
            .as_ref()
            .map_or(self.n_concepts.unwrap_or(0), Vec::len)
    }

    pub fn names(&self) -> Vec<String> {
        self.concept_names.clone().unwrap_or_else(|| {
            (0..self.num_concepts())
                .map(|c| format!("concept_{c}"))
                .collect()
        })
    }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Orthonormal basis of `span(vs)` by modified Gram-Schmidt (twice).
fn orthonormal_basis(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&w);
        if n > 1e-10 {
            basis.push(w.iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Generates clean/infused counterfactual pairs for every planted concept
/// across train, val and test splits.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let d = spec.d;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let dirs: Vec<Vec<f64>> = match &spec.concept_dirs {
        Some(dirs) => dirs
            .iter()
            .map(|v| normalize(v).map(UnitVector::into_vec))
            .collect::<Result<_>>()?,
        None => {
            let k = spec.n_concepts.unwrap_or(0);
            let shared = spec.concept_cosine > 0.0;
            let need = k + shared as usize;
            if need > d {
                return Err(Error::InvalidSpec(format!(
                    "cannot place {need} independent directions in d={d}"
                )));
            }
            let raw: Vec<Vec<f64>> = (0..need).map(|_| gaussian(&mut rng, d)).collect();
            let q = orthonormal_basis(&raw);
            let (a, b) = ((1.0 - spec.concept_cosine).sqrt(), spec.concept_cosine.sqrt());
            (0..k)
                .map(|i| {
                    let v: Vec<f64> = if shared {
                        q[i].iter().zip(&q[k]).map(|(x, s)| a * x + b * s).collect()
                    } else {
                        q[i].clone()
                    };
                    normalize(&v).map(UnitVector::into_vec)
                })
                .collect::<Result<_>>()?
        }
    };
    let basis = orthonormal_basis(&dirs);

    let task_dir = match &spec.task_dir {
        Some(t) => {
            if t.len() != d {
                return Err(Error::InvalidSpec("task_dir must have length d".into()));
            }
            normalize(t)?
        }
        None => {
            let mut t = gaussian(&mut rng, d);
            if spec.base_orthogonal && basis.len() < d {
                project_out(&mut t, &basis);
            }
            normalize(&t)?
        }
    };

    let names = spec.names();
    let n_eval = spec.n_eval.unwrap_or(spec.n_per_side);
    let mut data = Vec::new();
    let mut table = LabelTable {
        sample_ids: Vec::new(),
        split: Vec::new(),
        task_labels: Vec::new(),
        concepts: names.iter().map(|n| (n.clone(), Vec::new())).collect(),
        pair_ids: Some(Vec::new()),
    };
    for split in [Split::Train, Split::Val, Split::Test] {
        let pairs = if split == Split::Train {
            spec.n_per_side
        } else {
            n_eval
        };
        for (c, v) in dirs.iter().enumerate() {
            for i in 0..pairs {
                let mut clean = gaussian(&mut rng, d);
                if spec.base_orthogonal {
                    project_out(&mut clean, &basis);
                }
                let mut infused: Vec<f64> =
                    clean.iter().zip(v).map(|(h, u)| h + spec.beta * u).collect();
                if spec.noise_sigma > 0.0 {
                    for x in infused.iter_mut() {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        *x += spec.noise_sigma * e;
                    }
                }
                let label = (dot(&clean, task_dir.as_slice()) > 0.0) as u32;
                let infused_label = match (split, spec.confound_class) {
                    (Split::Train, Some(k)) => k,
                    _ => label,
                };
                let pair = format!("{}-{}-{i}", split.as_str(), names[c]);
                for (row, tag, task, positive) in [
                    (clean, "clean", label, false),
                    (infused, "infused", infused_label, true),
                ] {
                    data.extend(row);
                    table.sample_ids.push(format!("{pair}-{tag}"));
                    table.split.push(split);
                    table.task_labels.push(task);
                    for (k, (_, col)) in table.concepts.iter_mut().enumerate() {
                        col.push(positive && k == c);
                    }
                    table.pair_ids.as_mut().unwrap().push(Some(pair.clone()));
                }
            }
        }
    }
    let n = table.n();
    Ok(SyntheticData {
        embeddings: EmbeddingMatrix::new(n, d, data)?,
        labels: table,
        ground_truth: dirs
            .into_iter()
            .map(|v| normalize(&v))
            .collect::<Result<_>>()?,
        task_dir,
    })
}

//! TopK sparse autoencoder: forward pass, store normalisation, activation
//! density and a small deterministic full-batch trainer.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::{load_embeddings, save_embeddings};
use crate::linalg::{check_rows, dot, mean_rows, norm, EmbeddingMatrix};

/// TopK SAE weights.
///
/// `scale` is the store normalisation factor: inputs in original units are
/// multiplied by it before encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct SaeParams {
    /// `m × d`
    pub w_enc: EmbeddingMatrix,
    pub b_enc: Vec<f64>,
    /// `d × m`
    pub w_dec: EmbeddingMatrix,
    pub b_dec: Vec<f64>,
    pub k: usize,
    pub scale: f64,
}

impl SaeParams {
    pub fn new(
        w_enc: EmbeddingMatrix,
        b_enc: Vec<f64>,
        w_dec: EmbeddingMatrix,
        b_dec: Vec<f64>,
        k: usize,
        scale: f64,
    ) -> Result<Self> {
        let (m, d) = (w_enc.n(), w_enc.d());
        let dims = [
            (w_dec.n(), d),
            (w_dec.d(), m),
            (b_enc.len(), m),
            (b_dec.len(), d),
        ];
        if let Some(&(got, expected)) = dims.iter().find(|(g, e)| g != e) {
            return Err(Error::DimensionMismatch { expected, got });
        }
        if k == 0 || k > m {
            return Err(Error::ConfigInvalid(format!("SAE k={k} must lie in 1..={m}")));
        }
        if let Some(i) = b_enc.iter().chain(&b_dec).position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::ConfigInvalid(format!("SAE scale {scale} must be positive")));
        }
        Ok(Self {
            w_enc,
            b_enc,
            w_dec,
            b_dec,
            k,
            scale,
        })
    }

    /// `W_enc = W_dec = I`, zero biases, `k = m = d`.
    pub fn identity(d: usize) -> Result<Self> {
        let mut eye = vec![0.0; d * d];
        (0..d).for_each(|i| eye[i * d + i] = 1.0);
        let eye = EmbeddingMatrix::new(d, d, eye)?;
        Self::new(eye.clone(), vec![0.0; d], eye, vec![0.0; d], d, 1.0)
    }

    pub fn m(&self) -> usize {
        self.w_enc.n()
    }

    pub fn d(&self) -> usize {
        self.w_enc.d()
    }

    /// Column `j` of the decoder.
    pub fn decoder_column(&self, j: usize) -> Vec<f64> {
        (0..self.d()).map(|r| self.w_dec.row(r)[j]).collect()
    }

    /// `W_dec w` for a latent-space direction.
    pub fn decode_direction(&self, w: &[f64]) -> Result<Vec<f64>> {
        decode(self, w)
    }

    /// `W_enc^T w` for a latent-space direction.
    pub fn encoder_transpose(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.w_enc.matvec_t(w)
    }
}

/// Rescales `m` so that the RMS row norm equals `sqrt(d)`.
pub fn normalize_store(m: &EmbeddingMatrix) -> Result<(EmbeddingMatrix, f64)> {
    let ms = m.rows().map(|r| dot(r, r)).sum::<f64>() / m.n() as f64;
    if !(ms > 0.0) {
        return Err(Error::AllZeroRows);
    }
    let s = (m.d() as f64 / ms).sqrt();
    let s = if (s - 1.0).abs() <= 4.0 * f64::EPSILON { 1.0 } else { s };
    Ok((m.scaled(s)?, s))
}

fn relu_pre(params: &SaeParams, h: &[f64], out: &mut [f64]) {
    let centred: Vec<f64> = h.iter().zip(&params.b_dec).map(|(x, b)| x - b).collect();
    for (j, o) in out.iter_mut().enumerate() {
        let a = dot(params.w_enc.row(j), &centred) + params.b_enc[j];
        *o = a.max(0.0);
    }
}

/// Zeroes all but the `k` largest entries; ties keep the lower index.
fn top_k(z: &mut [f64], k: usize) {
    let mut active: Vec<usize> = (0..z.len()).filter(|&j| z[j] > 0.0).collect();
    if active.len() <= k {
        return;
    }
    active.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    for &j in &active[k..] {
        z[j] = 0.0;
    }
}

/// Latent code of one representation (already in SAE units).
pub fn encode(params: &SaeParams, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != params.d() {
        return Err(Error::DimensionMismatch {
            expected: params.d(),
            got: h.len(),
        });
    }
    let mut z = vec![0.0; params.m()];
    relu_pre(params, h, &mut z);
    top_k(&mut z, params.k);
    Ok(z)
}

/// `W_dec z`; the centring bias is not added back.
pub fn decode(params: &SaeParams, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != params.m() {
        return Err(Error::DimensionMismatch {
            expected: params.m(),
            got: z.len(),
        });
    }
    params.w_dec.matvec(z)
}

/// Latent codes of `rows` of a store in original units (the SAE scale is
/// applied first). Output row `i` corresponds to `rows[i]`.
pub fn encode_store(params: &SaeParams, m: &EmbeddingMatrix, rows: &[usize]) -> Result<EmbeddingMatrix> {
    check_rows(rows, m.n())?;
    if m.d() != params.d() {
        return Err(Error::DimensionMismatch {
            expected: params.d(),
            got: m.d(),
        });
    }
    let mut data = Vec::with_capacity(rows.len() * params.m());
    let mut h = vec![0.0; m.d()];
    for &i in rows {
        for (x, y) in h.iter_mut().zip(m.row(i)) {
            *x = y * params.scale;
        }
        data.extend(encode(params, &h)?);
    }
    EmbeddingMatrix::new(rows.len(), params.m(), data)
}

/// Fraction of `rows` on which each latent is nonzero after TopK.
pub fn activation_density(params: &SaeParams, m: &EmbeddingMatrix, rows: &[usize]) -> Result<Vec<f64>> {
    let z = encode_store(params, m, rows)?;
    Ok(latent_density(&z, &(0..z.n()).collect::<Vec<_>>()))
}

/// Per-column fraction of nonzero entries over `rows` of a latent matrix.
pub(crate) fn latent_density(z: &EmbeddingMatrix, rows: &[usize]) -> Vec<f64> {
    let mut counts = vec![0usize; z.d()];
    for &i in rows {
        for (c, &x) in counts.iter_mut().zip(z.row(i)) {
            *c += (x != 0.0) as usize;
        }
    }
    counts.iter().map(|&c| c as f64 / rows.len() as f64).collect()
}

/// Sum of squared reconstruction errors over the squared norms of the data.
pub fn relative_mse(params: &SaeParams, data: &EmbeddingMatrix) -> Result<f64> {
    let (mut err, mut tot) = (0.0, 0.0);
    for h in data.rows() {
        let r = decode(params, &encode(params, h)?)?;
        err += r.iter().zip(h).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        tot += dot(h, h);
    }
    if !(tot > 0.0) {
        return Err(Error::AllZeroRows);
    }
    Ok(err / tot)
}

/// Trainer output: parameters and the mean squared error before each step
/// plus the final value (`epochs + 1` entries).
#[derive(Clone, Debug)]
pub struct TrainedSae {
    pub params: SaeParams,
    pub losses: Vec<f64>,
}

fn renormalize_columns(w_dec: &mut [f64], d: usize, m: usize) {
    for j in 0..m {
        let col: Vec<f64> = (0..d).map(|r| w_dec[r * m + j]).collect();
        let n = norm(&col);
        if n > 0.0 {
            (0..d).for_each(|r| w_dec[r * m + j] /= n);
        }
    }
}

/// Full-batch gradient descent on the mean squared reconstruction error.
///
/// The decoder is drawn from `N(0, 1/d)` with unit-norm columns and the
/// encoder starts as its transpose. `b_dec` is frozen at the data mean.
/// Gradients pass straight through the TopK mask of each step.
pub fn train_sae(
    data: &EmbeddingMatrix,
    m: usize,
    k: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<TrainedSae> {
    let (n, d) = (data.n(), data.d());
    if m == 0 || k == 0 || k > m {
        return Err(Error::ConfigInvalid(format!("SAE needs 1 <= k <= m (k={k}, m={m})")));
    }
    if !(lr > 0.0) {
        return Err(Error::ConfigInvalid("SAE learning rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("finite std");
    let mut w_dec: Vec<f64> = (0..d * m).map(|_| normal.sample(&mut rng)).collect();
    renormalize_columns(&mut w_dec, d, m);
    let mut w_enc = vec![0.0; m * d];
    for r in 0..d {
        for j in 0..m {
            w_enc[j * d + r] = w_dec[r * m + j];
        }
    }
    let mut b_enc = vec![0.0; m];
    let b_dec = mean_rows(data, &(0..n).collect::<Vec<_>>())?;
    let centred: Vec<Vec<f64>> = data
        .rows()
        .map(|h| h.iter().zip(&b_dec).map(|(x, b)| x - b).collect())
        .collect();

    let inv_n = 1.0 / n as f64;
    let mut losses = Vec::with_capacity(epochs + 1);
    let mut z = vec![0.0; m];
    let mut resid = vec![0.0; d];
    let mut g_dec = vec![0.0; d * m];
    let mut g_enc = vec![0.0; m * d];
    let mut g_benc = vec![0.0; m];
    for epoch in 0..=epochs {
        let train = epoch < epochs;
        if train {
            g_dec.iter_mut().for_each(|g| *g = 0.0);
            g_enc.iter_mut().for_each(|g| *g = 0.0);
            g_benc.iter_mut().for_each(|g| *g = 0.0);
        }
        let mut loss = 0.0;
        for (i, c) in centred.iter().enumerate() {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = (dot(&w_enc[j * d..(j + 1) * d], c) + b_enc[j]).max(0.0);
            }
            top_k(&mut z, k);
            let active: Vec<usize> = (0..m).filter(|&j| z[j] > 0.0).collect();
            let h = data.row(i);
            for r in 0..d {
                let row = &w_dec[r * m..(r + 1) * m];
                resid[r] = active.iter().map(|&j| row[j] * z[j]).sum::<f64>() - h[r];
            }
            loss += dot(&resid, &resid) * inv_n;
            if !train {
                continue;
            }
            for r in 0..d {
                let g = 2.0 * inv_n * resid[r];
                for &j in &active {
                    g_dec[r * m + j] += g * z[j];
                }
            }
            for &j in &active {
                let gz: f64 = (0..d).map(|r| w_dec[r * m + j] * resid[r]).sum::<f64>() * 2.0 * inv_n;
                g_benc[j] += gz;
                for (ge, x) in g_enc[j * d..(j + 1) * d].iter_mut().zip(c) {
                    *ge += gz * x;
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        losses.push(loss);
        if !train {
            break;
        }
        w_dec.iter_mut().zip(&g_dec).for_each(|(w, g)| *w -= lr * g);
        w_enc.iter_mut().zip(&g_enc).for_each(|(w, g)| *w -= lr * g);
        b_enc.iter_mut().zip(&g_benc).for_each(|(w, g)| *w -= lr * g);
        renormalize_columns(&mut w_dec, d, m);
    }
    let params = SaeParams::new(
        EmbeddingMatrix::new(m, d, w_enc)?,
        b_enc,
        EmbeddingMatrix::new(d, m, w_dec)?,
        b_dec,
        k,
        1.0,
    )?;
    Ok(TrainedSae { params, losses })
}

fn vector_matrix(v: &[f64]) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::new(1, v.len(), v.to_vec())
}

/// Writes `W_enc.cavb`, `b_enc.cavb`, `W_dec.cavb`, `b_dec.cavb` and `meta`.
pub fn save_bundle(dir: impl AsRef<Path>, params: &SaeParams) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_embeddings(dir.join("W_enc.cavb"), &params.w_enc)?;
    save_embeddings(dir.join("b_enc.cavb"), &vector_matrix(&params.b_enc)?)?;
    save_embeddings(dir.join("W_dec.cavb"), &params.w_dec)?;
    save_embeddings(dir.join("b_dec.cavb"), &vector_matrix(&params.b_dec)?)?;
    let mut meta = String::new();
    let _ = writeln!(meta, "k={}", params.k);
    let _ = writeln!(meta, "m={}", params.m());
    let _ = writeln!(meta, "scale={}", params.scale);
    let path = dir.join("meta");
    std::fs::write(&path, meta).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<SaeParams> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta");
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let parse_err = |msg: String| Error::Parse {
        path: meta_path.clone(),
        msg,
    };
    let (mut k, mut m, mut scale) = (None, None, 1.0);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected key=value, got {line:?}")))?;
        let bad = |_| parse_err(format!("bad value for {key}: {val:?}"));
        match key.trim() {
            "k" => k = Some(val.trim().parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "m" => m = Some(val.trim().parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "scale" => scale = val.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?,
            _ => {}
        }
    }
    let k = k.ok_or_else(|| parse_err("missing k".into()))?;
    let w_enc = load_embeddings(dir.join("W_enc.cavb"))?;
    if let Some(m) = m {
        if m != w_enc.n() {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: w_enc.n(),
            });
        }
    }
    let b_enc = load_embeddings(dir.join("b_enc.cavb"))?.into_data();
    let w_dec = load_embeddings(dir.join("W_dec.cavb"))?;
    let b_dec = load_embeddings(dir.join("b_dec.cavb"))?.into_data();
    SaeParams::new(w_enc, b_enc, w_dec, b_dec, k, scale)
}

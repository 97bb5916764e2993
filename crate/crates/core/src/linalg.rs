//! Dense primitives shared by every extraction method: the embedding
//! matrix, unit vectors, row statistics and the leading principal component.
//!
//! Everything here is a pure function of its inputs. Matrices are stored
//! row-major in `f64`; the on-disk format is `f32` and widening is exact.

use crate::error::{Error, Result};

/// Components of a vector already within this distance of unit norm are
/// left untouched by [`normalize`], which makes normalisation idempotent.
const UNIT_SNAP: f64 = 8.0 * f64::EPSILON;

/// Tolerance accepted by [`UnitVector::new`].
pub const UNIT_TOLERANCE: f64 = 1e-6;

const PC_COS_TOL: f64 = 1e-10;
const PC_MAX_ITERS: usize = 10_000;
/// Power steps on the current operator before it is squared.
const PC_SQUARE_EVERY: usize = 64;
const PC_MAX_SQUARINGS: usize = 8;

/// `n` rows of `d`-dimensional activations, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyMatrix { n, d });
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Copy of the listed rows, in the listed order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        check_rows(rows, self.n)?;
        let mut data = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self::new(rows.len(), self.d, data)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.n, self.d, self.data.iter().map(|x| x * s).collect())
    }

    /// `rows × cols` matrix-vector product for a row-major weight matrix
    /// stored in `self` (`n` outputs, `d` inputs).
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(self.rows().map(|r| dot(r, x)).collect())
    }

    /// `selfᵀ · y`, length `d`.
    pub fn matvec_t(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: y.len(),
            });
        }
        let mut out = vec![0.0; self.d];
        for (r, &w) in self.rows().zip(y) {
            if w != 0.0 {
                axpy(w, r, &mut out);
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.n * self.d];
        for i in 0..self.n {
            for j in 0..self.d {
                data[j * self.n + i] = self.data[i * self.d + j];
            }
        }
        Self {
            n: self.d,
            d: self.n,
            data,
        }
    }
}

/// Unit-norm direction. Construction renormalises, so stored components
/// are unit length to within a few ulps.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Accepts vectors whose norm is within [`UNIT_TOLERANCE`] of one.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        let n = norm(&components);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnitNorm(n));
        }
        normalize(&components)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_rows(rows: &[usize], n: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptySelection);
    }
    match rows.iter().find(|&&i| i >= n) {
        Some(&index) => Err(Error::IndexOutOfRange { index, len: n }),
        None => Ok(()),
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Euclidean norm with a compensated sum of squares.
pub fn norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in v {
        let t = (x / scale) * (x / scale);
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    scale * (sum + comp).sqrt()
}

pub fn normalize(v: &[f64]) -> Result<UnitVector> {
    let n = norm(v);
    if !(n > 1e-12) || !n.is_finite() {
        return Err(Error::ZeroNorm);
    }
    if (n - 1.0).abs() <= UNIT_SNAP {
        return Ok(UnitVector(v.to_vec()));
    }
    Ok(UnitVector(v.iter().map(|x| x / n).collect()))
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if !(nu > 1e-12 && nv > 1e-12) {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn mean_rows(m: &EmbeddingMatrix, rows: &[usize]) -> Result<Vec<f64>> {
    check_rows(rows, m.n())?;
    let mut acc = vec![0.0; m.d()];
    for &i in rows {
        for (a, x) in acc.iter_mut().zip(m.row(i)) {
            *a += x;
        }
    }
    let k = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(acc)
}

/// Per-dimension median; even counts take the midpoint of the middle pair.
pub fn median_rows(m: &EmbeddingMatrix, rows: &[usize]) -> Result<Vec<f64>> {
    check_rows(rows, m.n())?;
    let mut col = Vec::with_capacity(rows.len());
    Ok((0..m.d())
        .map(|j| {
            col.clear();
            col.extend(rows.iter().map(|&i| m.row(i)[j]));
            median_in_place(&mut col)
        })
        .collect())
}

pub(crate) fn median_in_place(xs: &mut [f64]) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Leading principal component with its eigenvalue.
#[derive(Clone, Debug)]
pub struct PrincipalComponent {
    pub direction: UnitVector,
    pub eigenvalue: f64,
}

/// Unit eigenvector of the population second-moment matrix of the
/// selected rows (covariance when `center`), for the largest eigenvalue.
pub fn first_pc(m: &EmbeddingMatrix, rows: &[usize], center: bool) -> Result<UnitVector> {
    first_pc_full(m, rows, center).map(|pc| pc.direction)
}

pub fn first_pc_full(
    m: &EmbeddingMatrix,
    rows: &[usize],
    center: bool,
) -> Result<PrincipalComponent> {
    check_rows(rows, m.n())?;
    if rows.len() < 2 {
        return Err(Error::DegenerateVariance);
    }
    let d = m.d();
    let mu = if center {
        mean_rows(m, rows)?
    } else {
        vec![0.0; d]
    };
    let mut cov = vec![0.0; d * d];
    let mut centred = vec![0.0; d];
    let mut raw_scale = 0.0;
    for &i in rows {
        let r = m.row(i);
        raw_scale += dot(r, r);
        for ((c, x), u) in centred.iter_mut().zip(r).zip(&mu) {
            *c = x - u;
        }
        for a in 0..d {
            let ca = centred[a];
            if ca == 0.0 {
                continue;
            }
            let out = &mut cov[a * d..(a + 1) * d];
            for (o, cb) in out[a..].iter_mut().zip(&centred[a..]) {
                *o += ca * cb;
            }
        }
    }
    let k = rows.len() as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / k;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    let trace: f64 = (0..d).map(|a| cov[a * d + a]).sum();
    raw_scale /= k;
    if raw_scale == 0.0 || trace <= 1e-20 * raw_scale {
        return Err(Error::DegenerateVariance);
    }
    let v = power_iteration(&cov, d)?;
    let cv: Vec<f64> = (0..d).map(|a| dot(&cov[a * d..(a + 1) * d], &v)).collect();
    let eigenvalue = dot(&v, &cv);
    Ok(PrincipalComponent {
        direction: normalize(&v)?,
        eigenvalue,
    })
}

/// Deterministic power iteration on a symmetric PSD `d × d` matrix.
///
/// Starts from the column of largest norm. When convergence stalls the
/// operator is squared (same eigenvectors, squared eigenvalue ratios).
fn power_iteration(cov: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut op = cov.to_vec();
    let start = (0..d)
        .map(|j| (j, (0..d).map(|i| op[i * d + j].powi(2)).sum::<f64>()))
        .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best })
        .0;
    let mut v: Vec<f64> = (0..d).map(|i| op[i * d + start]).collect();
    let n0 = norm(&v);
    if n0 == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    v.iter_mut().for_each(|x| *x /= n0);

    let mut w = vec![0.0; d];
    let mut since_square = 0;
    let mut squarings = 0;
    for _ in 0..PC_MAX_ITERS {
        for (a, wa) in w.iter_mut().enumerate() {
            *wa = dot(&op[a * d..(a + 1) * d], &v);
        }
        let nw = norm(&w);
        if !(nw > 0.0) || !nw.is_finite() {
            return Err(Error::DegenerateVariance);
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let cos = dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
        if cos >= 1.0 - PC_COS_TOL {
            break;
        }
        since_square += 1;
        if since_square == PC_SQUARE_EVERY && squarings < PC_MAX_SQUARINGS {
            op = square_normalized(&op, d);
            since_square = 0;
            squarings += 1;
        }
    }
    apply_sign_convention(&mut v);
    Ok(v)
}

fn square_normalized(op: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        let row_i = &op[i * d..(i + 1) * d];
        for j in i..d {
            // op is symmetric, so column j equals row j
            let v = dot(row_i, &op[j * d..(j + 1) * d]);
            out[i * d + j] = v;
            out[j * d + i] = v;
        }
    }
    let scale = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale > 0.0 {
        out.iter_mut().for_each(|x| *x /= scale);
    }
    out
}

/// Makes the component of largest magnitude positive (first index on ties).
pub fn apply_sign_convention(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn mean_rows_examples() {
        let m = mat(&[&[1.0, 0.0], &[3.0, 0.0]]);
        assert_eq!(mean_rows(&m, &[0, 1]).unwrap(), vec![2.0, 0.0]);
        let m = mat(&[&[5.0, -2.0]]);
        assert_eq!(mean_rows(&m, &[0]).unwrap(), vec![5.0, -2.0]);
        let m = mat(&[&[1.0, 1.0], &[-1.0, -1.0]]);
        assert_eq!(mean_rows(&m, &[0, 1]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mean_rows_errors() {
        let m = mat(&[&[1.0]]);
        assert!(matches!(mean_rows(&m, &[]), Err(Error::EmptySelection)));
        assert!(matches!(
            mean_rows(&m, &[3]),
            Err(Error::IndexOutOfRange { index: 3, len: 1 })
        ));
    }

    #[test]
    fn median_rows_examples() {
        let m = mat(&[&[0.0], &[1.0], &[10.0]]);
        assert_eq!(median_rows(&m, &[0, 1, 2]).unwrap(), vec![1.0]);
        let m = mat(&[&[0.0], &[2.0]]);
        assert_eq!(median_rows(&m, &[0, 1]).unwrap(), vec![1.0]);
        let m = mat(&[&[4.0, -1.5]]);
        assert_eq!(median_rows(&m, &[0]).unwrap(), vec![4.0, -1.5]);
        assert!(matches!(median_rows(&m, &[]), Err(Error::EmptySelection)));
    }

    #[test]
    fn first_pc_examples() {
        let m = mat(&[&[-1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(first_pc(&m, &[0, 1], true).unwrap().as_slice(), &[1.0, 0.0]);

        let m = mat(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]]);
        let pc = first_pc(&m, &[0, 1, 2], true).unwrap();
        let h = 0.5f64.sqrt();
        assert!((pc.as_slice()[0] - h).abs() < 1e-12);
        assert!((pc.as_slice()[1] - h).abs() < 1e-12);

        let m = mat(&[&[3.0, 3.0], &[3.0, 3.0]]);
        assert!(matches!(
            first_pc(&m, &[0, 1], true),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn first_pc_sign_convention() {
        // variance along (-2, 1): the dominant component must come out positive
        let m = mat(&[&[-2.0, 1.0], &[2.0, -1.0]]);
        let pc = first_pc(&m, &[0, 1], true).unwrap();
        assert!(pc.as_slice()[0] > 0.0);
        assert!(pc.as_slice()[1] < 0.0);
    }

    #[test]
    fn first_pc_close_eigenvalues_converges() {
        // eigenvalues 1.0 and 0.999 along rotated axes
        let (c, s) = (0.6f64, 0.8f64);
        let a = 1.0f64.sqrt();
        let b = 0.999f64.sqrt();
        let m = mat(&[
            &[a * c, a * s],
            &[-a * c, -a * s],
            &[-b * s, b * c],
            &[b * s, -b * c],
        ]);
        let pc = first_pc(&m, &[0, 1, 2, 3], true).unwrap();
        assert!((cosine(pc.as_slice(), &[c, s]).unwrap().abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[2.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        let c = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm)));
    }

    #[test]
    fn normalize_examples() {
        let u = normalize(&[3.0, 4.0]).unwrap();
        assert!((u.as_slice()[0] - 0.6).abs() < 1e-15);
        assert!((u.as_slice()[1] - 0.8).abs() < 1e-15);
        assert_eq!(normalize(&[1.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert!(matches!(normalize(&[0.0, 0.0]), Err(Error::ZeroNorm)));
    }

    #[test]
    fn unit_vector_rejects_far_from_unit() {
        assert!(UnitVector::new(vec![1.0, 1.0]).is_err());
        assert!(UnitVector::new(vec![1.0 + 1e-8, 0.0]).is_ok());
    }

    #[test]
    fn matrix_rejects_non_finite_and_empty() {
        assert!(matches!(
            EmbeddingMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFiniteValue(1))
        ));
        assert!(matches!(
            EmbeddingMatrix::new(0, 2, vec![]),
            Err(Error::EmptyMatrix { .. })
        ));
    }
}

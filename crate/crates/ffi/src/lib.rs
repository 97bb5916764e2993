//! C ABI over the cavbench library.
//!
//! Every function returns a [`CavStatus`]. On failure a message is stored in
//! thread-local storage and can be read with [`cavbench_last_error`] until
//! the next failing call on the same thread. Matrices and SAEs are opaque
//! handles owned by the caller and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cavbench::harness::{run_benchmark, write_outputs, BenchmarkConfig};
use cavbench::ingest::{load_embeddings, save_embeddings};
use cavbench::metrics::{self, ScorePair};
use cavbench::sae::load_bundle;
use cavbench::{steer, ConceptDataset, EmbeddingMatrix, Error, MethodId, Pairing, SaeParams, UnitVector};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CavStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Dimensions, indices, lengths or names that do not fit the inputs.
    InvalidArgument = 3,
    Io = 4,
    /// Malformed file contents.
    Format = 5,
    /// The inputs admit no answer (zero-norm direction, one class, ...).
    Degenerate = 6,
    Config = 7,
    Panic = 8,
}

/// Opaque embedding matrix.
pub struct CavMatrix(EmbeddingMatrix);

/// Opaque sparse-autoencoder parameters.
pub struct CavSae(SaeParams);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> CavStatus {
    match e {
        Error::Io { .. } => CavStatus::Io,
        Error::BadMagic(_)
        | Error::VersionMismatch(_)
        | Error::TruncatedFile { .. }
        | Error::TrailingBytes(_)
        | Error::Parse { .. }
        | Error::LabelTable(_) => CavStatus::Format,
        Error::ConfigInvalid(_) | Error::InvalidSpec(_) => CavStatus::Config,
        Error::IndexOutOfRange { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyMatrix { .. }
        | Error::NonFiniteValue(_)
        | Error::NotUnitNorm(_)
        | Error::LengthMismatch(..)
        | Error::UnknownMethod(_)
        | Error::UnknownConcept(_)
        | Error::MissingSae(_)
        | Error::EmptySelection
        | Error::EmptySide
        | Error::Empty => CavStatus::InvalidArgument,
        _ => CavStatus::Degenerate,
    }
}

struct Failure(CavStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: CavStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CavStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CavStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            CavStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(CavStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CavStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cavbench_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cavbench_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n * d` row-major values into a new matrix.
///
/// # Safety
/// `data` must point to `n * d` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavbench_matrix_new(n: usize, d: usize, data: *const f64, out: *mut *mut CavMatrix) -> CavStatus {
    guard(|| {
        non_null(out, "out")?;
        let len = n.checked_mul(d).ok_or_else(|| fail(CavStatus::InvalidArgument, "n * d overflows"))?;
        let values = slice_arg(data, len, "data")?.to_vec();
        let m = EmbeddingMatrix::new(n, d, values)?;
        *out = Box::into_raw(Box::new(CavMatrix(m)));
        Ok(())
    })
}

/// Reads a matrix in the CAVB binary format.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavbench_matrix_load(path: *const c_char, out: *mut *mut CavMatrix) -> CavStatus {
    guard(|| {
        non_null(out, "out")?;
        let m = load_embeddings(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(CavMatrix(m)));
        Ok(())
    })
}

/// Writes a matrix in the CAVB binary format (values stored as f32).
///
/// # Safety
/// `m` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cavbench_matrix_save(m: *const CavMatrix, path: *const c_char) -> CavStatus {
    guard(|| {
        non_null(m, "matrix")?;
        save_embeddings(str_arg(path, "path")?, &(*m).0)?;
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle; `n` and `d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavbench_matrix_dims(m: *const CavMatrix, n: *mut usize, d: *mut usize) -> CavStatus {
    guard(|| {
        non_null(m, "matrix")?;
        non_null(n, "n")?;
        non_null(d, "d")?;
        *n = (*m).0.n();
        *d = (*m).0.d();
        Ok(())
    })
}

/// Releases a matrix. Null is ignored.
///
/// # Safety
/// `m` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cavbench_matrix_free(m: *mut CavMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Loads an SAE bundle directory (`W_enc.cavb`, `b_enc.cavb`, `W_dec.cavb`,
/// `b_dec.cavb`, `meta`).
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavbench_sae_load(dir: *const c_char, out: *mut *mut CavSae) -> CavStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = load_bundle(PathBuf::from(str_arg(dir, "dir")?))?;
        *out = Box::into_raw(Box::new(CavSae(p)));
        Ok(())
    })
}

/// Releases an SAE. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cavbench_sae_free(s: *mut CavSae) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Extracts a unit CAV with `method` (registry name such as "diffmean")
/// from the given row sets and writes its `d` components to `out`.
/// `sae` may be null for methods that do not need one.
///
/// # Safety
/// Handles must be live; `pos`/`neg` must hold `n_pos`/`n_neg` indices;
/// `out` must have room for `d` doubles.
#[no_mangle]
pub unsafe extern "C" fn cavbench_extract(
    m: *const CavMatrix,
    method: *const c_char,
    pos: *const usize,
    n_pos: usize,
    neg: *const usize,
    n_neg: usize,
    sae: *const CavSae,
    seed: u64,
    out: *mut f64,
) -> CavStatus {
    guard(|| {
        non_null(m, "matrix")?;
        let m = &(*m).0;
        let method: MethodId = str_arg(method, "method")?.parse()?;
        let pos = slice_arg(pos, n_pos, "pos")?.to_vec();
        let neg = slice_arg(neg, n_neg, "neg")?.to_vec();
        let ds = ConceptDataset::new("ffi", pos, neg, Pairing::Unpaired)
            .map_err(|e| fail(CavStatus::InvalidArgument, e.to_string()))?;
        let sae = if sae.is_null() { None } else { Some(&(*sae).0) };
        let (sub, local) = ds.gather(m)?;
        let cav = cavbench::extract(method, &sub, &local, sae, seed)?;
        out_slice(out, m.d(), "out")?.copy_from_slice(cav.as_slice());
        Ok(())
    })
}

/// `out = h - (v.h) v` for a unit vector `v` of length `d`. `out` may
/// alias `h`.
///
/// # Safety
/// `h`, `v` and `out` must each hold `d` doubles.
#[no_mangle]
pub unsafe extern "C" fn cavbench_orthogonalize(h: *const f64, v: *const f64, d: usize, out: *mut f64) -> CavStatus {
    guard(|| {
        let h = slice_arg(h, d, "h")?.to_vec();
        let v = UnitVector::new(slice_arg(v, d, "v")?.to_vec())?;
        let r = steer::orthogonalize(&h, &v)?;
        out_slice(out, d, "out")?.copy_from_slice(&r);
        Ok(())
    })
}

/// Mann-Whitney AUC of positive over negative scores, ties counting one half.
///
/// # Safety
/// `pos`/`neg` must hold `n_pos`/`n_neg` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cavbench_auc(pos: *const f64, n_pos: usize, neg: *const f64, n_neg: usize, out: *mut f64) -> CavStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = metrics::auc(slice_arg(pos, n_pos, "pos")?, slice_arg(neg, n_neg, "neg")?)?;
        Ok(())
    })
}

/// Mean projection difference in units of the negative standard deviation.
///
/// # Safety
/// As for [`cavbench_auc`].
#[no_mangle]
pub unsafe extern "C" fn cavbench_mad(pos: *const f64, n_pos: usize, neg: *const f64, n_neg: usize, out: *mut f64) -> CavStatus {
    guard(|| {
        non_null(out, "out")?;
        let s = ScorePair {
            pos: slice_arg(pos, n_pos, "pos")?.to_vec(),
            neg: slice_arg(neg, n_neg, "neg")?.to_vec(),
        };
        *out = metrics::mad(&s)?;
        Ok(())
    })
}

/// Runs a benchmark config and writes `report.csv`, `report.md` and
/// `cavs/` under `out_dir` (the config's `output_dir` when null). Failed
/// cells do not fail the call; their count goes to `failed_rows` when it is
/// non-null.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out_dir` null or one.
#[no_mangle]
pub unsafe extern "C" fn cavbench_run_benchmark(config: *const c_char, out_dir: *const c_char, failed_rows: *mut usize) -> CavStatus {
    guard(|| {
        let cfg = BenchmarkConfig::from_file(str_arg(config, "config")?)?;
        let dir = if out_dir.is_null() {
            cfg.output_dir.clone()
        } else {
            PathBuf::from(str_arg(out_dir, "out_dir")?)
        };
        let report = run_benchmark(&cfg)?;
        write_outputs(&report, &dir)?;
        if !failed_rows.is_null() {
            *failed_rows = report.failed_rows();
        }
        Ok(())
    })
}

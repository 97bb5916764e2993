use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use cavbench_ffi::*;

fn last_error() -> String {
    let p = cavbench_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn matrix(rows: &[[f64; 3]]) -> *mut CavMatrix {
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    let mut m = ptr::null_mut();
    let st = unsafe { cavbench_matrix_new(rows.len(), 3, data.as_ptr(), &mut m) };
    assert_eq!(st, CavStatus::Ok);
    m
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(cavbench_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn matrix_round_trip_through_disk() {
    let m = matrix(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(&dir.path().join("m.cavb"));
    unsafe {
        assert_eq!(cavbench_matrix_save(m, path.as_ptr()), CavStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(cavbench_matrix_load(path.as_ptr(), &mut back), CavStatus::Ok);
        let (mut n, mut d) = (0, 0);
        assert_eq!(cavbench_matrix_dims(back, &mut n, &mut d), CavStatus::Ok);
        assert_eq!((n, d), (2, 3));
        cavbench_matrix_free(back);
        cavbench_matrix_free(m);
        cavbench_matrix_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(cavbench_matrix_new(2, 2, ptr::null(), &mut m), CavStatus::NullPointer);
        assert!(last_error().contains("data"));

        let missing = CString::new("/nonexistent/x.cavb").unwrap();
        assert_eq!(cavbench_matrix_load(missing.as_ptr(), &mut m), CavStatus::Io);

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.cavb");
        std::fs::write(&junk, b"not a matrix file").unwrap();
        assert_eq!(cavbench_matrix_load(cstr(&junk).as_ptr(), &mut m), CavStatus::Format);

        let nan = [f64::NAN, 0.0];
        assert_eq!(cavbench_matrix_new(1, 2, nan.as_ptr(), &mut m), CavStatus::InvalidArgument);
    }
    assert!(m.is_null());
}

#[test]
fn extract_diffmean() {
    let m = matrix(&[[1.0, 0.0, 2.0], [1.0, 0.0, 4.0], [0.0, 0.0, 2.0], [0.0, 0.0, 4.0]]);
    let method = CString::new("diffmean").unwrap();
    let (pos, neg) = ([0usize, 1], [2usize, 3]);
    let mut out = [0.0; 3];
    unsafe {
        let st = cavbench_extract(m, method.as_ptr(), pos.as_ptr(), 2, neg.as_ptr(), 2, ptr::null(), 0, out.as_mut_ptr());
        assert_eq!(st, CavStatus::Ok, "{}", last_error());
        assert_eq!(out, [1.0, 0.0, 0.0]);

        let bogus = CString::new("bogus").unwrap();
        let st = cavbench_extract(m, bogus.as_ptr(), pos.as_ptr(), 2, neg.as_ptr(), 2, ptr::null(), 0, out.as_mut_ptr());
        assert_eq!(st, CavStatus::InvalidArgument);

        // identical class means leave nothing to normalise
        let (a, b) = ([0usize, 3], [1usize, 2]);
        let st = cavbench_extract(m, method.as_ptr(), a.as_ptr(), 2, b.as_ptr(), 2, ptr::null(), 0, out.as_mut_ptr());
        assert_eq!(st, CavStatus::Degenerate, "{}", last_error());

        let overlap = [0usize, 2];
        let st = cavbench_extract(m, method.as_ptr(), pos.as_ptr(), 2, overlap.as_ptr(), 2, ptr::null(), 0, out.as_mut_ptr());
        assert_eq!(st, CavStatus::InvalidArgument);

        let sae_method = CString::new("sae_diffmean").unwrap();
        let st = cavbench_extract(m, sae_method.as_ptr(), pos.as_ptr(), 2, neg.as_ptr(), 2, ptr::null(), 0, out.as_mut_ptr());
        assert_eq!(st, CavStatus::InvalidArgument);
        cavbench_matrix_free(m);
    }
}

#[test]
fn sae_bundle_feeds_sae_methods() {
    let rows = [[1.0, 0.0, 2.0], [1.0, 0.5, 4.0], [0.0, 0.0, 2.0], [0.2, 0.0, 4.0]];
    let em = cavbench::EmbeddingMatrix::from_rows(&rows).unwrap();
    let (store, scale) = cavbench::sae::normalize_store(&em).unwrap();
    let mut params = cavbench::sae::train_sae(&store, 6, 2, 20, 0.05, 0).unwrap().params;
    params.scale = scale;
    let dir = tempfile::tempdir().unwrap();
    cavbench::sae::save_bundle(dir.path(), &params).unwrap();

    let m = matrix(&rows);
    let mut sae = ptr::null_mut();
    let method = CString::new("sae_diffmean").unwrap();
    let (pos, neg) = ([0usize, 1], [2usize, 3]);
    let mut out = [0.0; 3];
    unsafe {
        assert_eq!(cavbench_sae_load(cstr(dir.path()).as_ptr(), &mut sae), CavStatus::Ok, "{}", last_error());
        let st = cavbench_extract(m, method.as_ptr(), pos.as_ptr(), 2, neg.as_ptr(), 2, sae, 0, out.as_mut_ptr());
        assert_eq!(st, CavStatus::Ok, "{}", last_error());
        assert!((out.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
        cavbench_sae_free(sae);
        cavbench_matrix_free(m);
    }
}

#[test]
fn orthogonalize_and_scores() {
    let h = [3.0, 4.0, 5.0];
    let v = [0.0, 1.0, 0.0];
    let mut out = [0.0; 3];
    unsafe {
        assert_eq!(cavbench_orthogonalize(h.as_ptr(), v.as_ptr(), 3, out.as_mut_ptr()), CavStatus::Ok);
        assert_eq!(out, [3.0, 0.0, 5.0]);
        let not_unit = [0.0, 2.0, 0.0];
        assert_eq!(cavbench_orthogonalize(h.as_ptr(), not_unit.as_ptr(), 3, out.as_mut_ptr()), CavStatus::InvalidArgument);

        let pos = [1.0, 1.0];
        let neg = [-1.0, 1.0];
        let mut x = 0.0;
        assert_eq!(cavbench_auc(pos.as_ptr(), 2, neg.as_ptr(), 2, &mut x), CavStatus::Ok);
        assert_eq!(x, 0.75);
        assert_eq!(cavbench_mad(pos.as_ptr(), 2, neg.as_ptr(), 2, &mut x), CavStatus::Ok);
        assert!((x - 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(cavbench_auc(pos.as_ptr(), 2, ptr::null(), 0, &mut x), CavStatus::InvalidArgument);
    }
}

#[test]
fn run_benchmark_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    std::fs::write(
        &cfg,
        "methods = [\"diffmean\", \"lr\"]\nmetrics = [\"auc\", \"mad\"]\nn_per_side = 20\nseeds = [0]\n\n\
         [synthetic]\nd = 8\nn_per_side = 30\nn_eval = 20\nn_concepts = 2\nbeta = 3.0\nnoise_sigma = 0.5\nseed = 1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let mut failed = usize::MAX;
    unsafe {
        let st = cavbench_run_benchmark(cstr(&cfg).as_ptr(), cstr(&out).as_ptr(), &mut failed);
        assert_eq!(st, CavStatus::Ok, "{}", last_error());
    }
    assert_eq!(failed, 0);
    assert!(out.join("report.csv").exists());
    assert!(out.join("report.md").exists());

    std::fs::write(&cfg, "methods = [\"nope\"]\n").unwrap();
    let st = unsafe { cavbench_run_benchmark(cstr(&cfg).as_ptr(), ptr::null(), ptr::null_mut()) };
    assert_eq!(st, CavStatus::Config);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cavbench.h")).unwrap();
    for f in [
        "cavbench_last_error",
        "cavbench_version",
        "cavbench_matrix_new",
        "cavbench_matrix_load",
        "cavbench_matrix_save",
        "cavbench_matrix_dims",
        "cavbench_matrix_free",
        "cavbench_sae_load",
        "cavbench_sae_free",
        "cavbench_extract",
        "cavbench_orthogonalize",
        "cavbench_auc",
        "cavbench_mad",
        "cavbench_run_benchmark",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f}");
    }
    assert!(header.contains("CAV_STATUS_DEGENERATE = 6"));
}

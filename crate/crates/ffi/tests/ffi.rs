use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use s3c::synth::{generate, SynthSpec};
use s3c_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(s3c_last_error()) }.to_string_lossy().into_owned()
}

fn blocks() -> (Vec<f64>, usize, usize, Vec<usize>) {
    let ds = generate(&SynthSpec {
        ambient_dim: 12,
        subspace_dim: 2,
        n_subspaces: 3,
        points_per_subspace: 8,
        corruption: 0.0,
        noise_factor: 0.3,
        seed: 5,
    })
    .unwrap();
    let (rows, cols) = ds.values.shape();
    (ds.values.as_slice().to_vec(), rows, cols, ds.truth)
}

struct Handles {
    data: *mut S3cData,
    config: *mut S3cConfig,
}

impl Handles {
    fn new(method: i32) -> (Self, Vec<usize>) {
        let (values, rows, cols, truth) = blocks();
        let mut data = ptr::null_mut();
        let mut config = ptr::null_mut();
        unsafe {
            assert_eq!(s3c_data_new(values.as_ptr(), rows, cols, true, &mut data), S3cStatus::Ok);
            assert_eq!(s3c_config_new_default(&mut config), S3cStatus::Ok);
            assert_eq!(s3c_config_set_n_clusters(config, 3), S3cStatus::Ok);
            assert_eq!(s3c_config_set_method(config, method), S3cStatus::Ok);
            assert_eq!(s3c_config_set_t_max(config, 3), S3cStatus::Ok);
        }
        (Self { data, config }, truth)
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            s3c_data_free(self.data);
            s3c_config_free(self.config);
        }
    }
}

#[test]
fn clusters_independent_blocks() {
    let (h, truth) = Handles::new(S3C_METHOD_S3C);
    assert_eq!(unsafe { s3c_data_num_points(h.data) }, 24);

    let mut result = ptr::null_mut();
    let status = unsafe { s3c_cluster(h.data, h.config, ptr::null(), ptr::null(), ptr::null(), 0, &mut result) };
    assert_eq!(status, S3cStatus::Ok, "{}", last_error());
    let n = unsafe { s3c_result_num_points(result) };
    assert_eq!(n, 24);
    let iters = unsafe { s3c_result_outer_iterations(result) };
    assert!((1..=3).contains(&iters));
    assert!((0..=S3C_STOP_MAX_ITERS).contains(&unsafe { s3c_result_stop_reason(result) }));

    let mut labels = vec![usize::MAX; n];
    assert_eq!(unsafe { s3c_result_labels(result, labels.as_mut_ptr(), n) }, S3cStatus::Ok);
    assert!(labels.iter().all(|&l| l < 3));

    let mut err = -1.0;
    let status = unsafe { s3c_clustering_error(truth.as_ptr(), labels.as_ptr(), n, 3, &mut err) };
    assert_eq!(status, S3cStatus::Ok);
    assert_eq!(err, 0.0);

    let mut coeffs = vec![f64::NAN; n * n];
    assert_eq!(unsafe { s3c_result_coefficients(result, coeffs.as_mut_ptr(), n * n) }, S3cStatus::Ok);
    assert!((0..n).all(|k| coeffs[k * n + k] == 0.0));

    let mut short = vec![0.0; n];
    assert_eq!(
        unsafe { s3c_result_coefficients(result, short.as_mut_ptr(), n) },
        S3cStatus::BufferTooSmall
    );
    assert!(last_error().contains("needed"));
    unsafe { s3c_result_free(result) };
}

#[test]
fn constrained_run_and_conflicts() {
    let (h, _) = Handles::new(S3C_METHOD_CS3C);
    let ci = [0usize, 0];
    let cj = [1usize, 1];
    let mut result = ptr::null_mut();

    let ok_kind = [S3C_MUST_LINK, S3C_MUST_LINK];
    let status = unsafe { s3c_cluster(h.data, h.config, ci.as_ptr(), cj.as_ptr(), ok_kind.as_ptr(), 2, &mut result) };
    assert_eq!(status, S3cStatus::Ok, "{}", last_error());
    unsafe { s3c_result_free(result) };

    let mut result = ptr::null_mut();
    let bad_kind = [S3C_MUST_LINK, S3C_CANNOT_LINK];
    let status = unsafe { s3c_cluster(h.data, h.config, ci.as_ptr(), cj.as_ptr(), bad_kind.as_ptr(), 2, &mut result) };
    assert_eq!(status, S3cStatus::InconsistentSideInfo);
    assert!(result.is_null());
    assert!(!last_error().is_empty());

    let weird = [7, 7];
    let status = unsafe { s3c_cluster(h.data, h.config, ci.as_ptr(), cj.as_ptr(), weird.as_ptr(), 2, &mut result) };
    assert_eq!(status, S3cStatus::InvalidInput);
}

#[test]
fn constraints_need_cs3c() {
    let (h, _) = Handles::new(S3C_METHOD_SSC);
    let (ci, cj, ck) = ([0usize], [1usize], [S3C_MUST_LINK]);
    let mut result = ptr::null_mut();
    let status = unsafe { s3c_cluster(h.data, h.config, ci.as_ptr(), cj.as_ptr(), ck.as_ptr(), 1, &mut result) };
    assert_eq!(status, S3cStatus::InvalidInput);
    assert!(last_error().contains("cs3c"));
}

#[test]
fn null_and_invalid_arguments() {
    let mut data = ptr::null_mut();
    let status = unsafe { s3c_data_new(ptr::null(), 2, 2, true, &mut data) };
    assert_eq!(status, S3cStatus::NullPointer);
    assert!(last_error().contains("values"));

    let nan = [1.0, f64::NAN, 0.0, 1.0];
    assert_ne!(unsafe { s3c_data_new(nan.as_ptr(), 2, 2, true, &mut data) }, S3cStatus::Ok);

    assert_eq!(unsafe { s3c_config_set_lambda0(ptr::null_mut(), 1.0) }, S3cStatus::NullPointer);
    assert_eq!(unsafe { s3c_data_num_points(ptr::null()) }, 0);
    assert_eq!(unsafe { s3c_result_stop_reason(ptr::null()) }, -1);
    unsafe {
        s3c_data_free(ptr::null_mut());
        s3c_config_free(ptr::null_mut());
        s3c_result_free(ptr::null_mut());
    }

    let mut config = ptr::null_mut();
    assert_eq!(unsafe { s3c_config_new_default(&mut config) }, S3cStatus::Ok);
    assert_eq!(unsafe { s3c_config_set_mode(config, 9) }, S3cStatus::InvalidInput);
    assert_eq!(unsafe { s3c_config_set_method(config, -1) }, S3cStatus::InvalidInput);
    assert_eq!(unsafe { s3c_config_set_mode(config, S3C_MODE_SOFT) }, S3cStatus::Ok);
    assert_eq!(unsafe { s3c_config_set_alpha(config, 0.5) }, S3cStatus::Ok);
    assert_eq!(unsafe { s3c_config_set_seed(config, 11) }, S3cStatus::Ok);

    let (values, rows, cols, _) = blocks();
    assert_eq!(unsafe { s3c_data_new(values.as_ptr(), rows, cols, true, &mut data) }, S3cStatus::Ok);
    let mut result = ptr::null_mut();
    let status = unsafe { s3c_cluster(data, config, ptr::null(), ptr::null(), ptr::null(), 0, &mut result) };
    assert_eq!(status, S3cStatus::InvalidInput, "cluster count is unset");
    assert!(last_error().contains("cluster count"));
    unsafe {
        s3c_data_free(data);
        s3c_config_free(config);
    }
}

#[test]
fn config_from_json() {
    let mut config = ptr::null_mut();
    let good = CString::new(r#"{"lambda0": 5, "n_clusters": 3, "method": "ssc"}"#).unwrap();
    assert_eq!(unsafe { s3c_config_from_json(good.as_ptr(), &mut config) }, S3cStatus::Ok);
    unsafe { s3c_config_free(config) };

    let mut config = ptr::null_mut();
    let bad = CString::new(r#"{"lambda0": "#).unwrap();
    assert_eq!(unsafe { s3c_config_from_json(bad.as_ptr(), &mut config) }, S3cStatus::Parse);
    assert!(config.is_null());
    let unknown = CString::new(r#"{"gamma": 1}"#).unwrap();
    assert_eq!(unsafe { s3c_config_from_json(unknown.as_ptr(), &mut config) }, S3cStatus::Parse);
    assert!(last_error().contains("gamma"));
}

#[test]
fn clustering_error_matches_permutation() {
    let truth = [0usize, 0, 1, 1, 2, 2];
    let pred = [2usize, 2, 0, 0, 1, 0];
    let mut err = 0.0;
    assert_eq!(
        unsafe { s3c_clustering_error(truth.as_ptr(), pred.as_ptr(), 6, 3, &mut err) },
        S3cStatus::Ok
    );
    assert!((err - 1.0 / 6.0).abs() < 1e-15);
    let out_of_range = [5usize, 0, 0, 0, 0, 0];
    assert_ne!(
        unsafe { s3c_clustering_error(truth.as_ptr(), out_of_range.as_ptr(), 6, 3, &mut err) },
        S3cStatus::Ok
    );
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(s3c_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header_dir.join("s3c.h").exists());
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"s3c.h\"\n\
         int main(void) {\n\
           S3cConfig *cfg = 0;\n\
           enum S3cStatus st = s3c_config_new_default(&cfg);\n\
           s3c_config_set_mode(cfg, S3C_MODE_SOFT);\n\
           s3c_config_free(cfg);\n\
           return st == S3C_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&header_dir)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<String, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .map(str::to_string)
        .ok_or(())
}

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ballot_ffi::*;

fn last_error() -> String {
    let p = ballot_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn sample(n: usize, d: usize, k: usize, delta: f64, seed: u64) -> *mut BallotDataset {
    let mut data = ptr::null_mut();
    assert_eq!(unsafe { ballot_dataset_sample_ball(n, d, k, delta, seed, &mut data) }, BallotStatus::Ok);
    data
}

fn run_from(data: *const BallotDataset, init: &[f64], algo: BallotAlgo) -> *mut BallotTrace {
    let mut trace = ptr::null_mut();
    let status = unsafe { ballot_run(data, init.as_ptr(), algo, ptr::null(), &mut trace) };
    assert_eq!(status, BallotStatus::Ok, "{}", last_error());
    trace
}

#[test]
fn planted_start_recovers_with_every_algorithm() {
    let data = sample(90, 3, 3, 3.0, 1);
    let (n, d, k) = unsafe { (ballot_dataset_n(data), ballot_dataset_d(data), ballot_dataset_k(data)) };
    assert_eq!((n, d, k), (90, 3, 3));
    let mut init = vec![0.0; k * d];
    assert_eq!(unsafe { ballot_planted_centroids(data, init.as_mut_ptr(), init.len()) }, BallotStatus::Ok);
    for algo in [BallotAlgo::Exact, BallotAlgo::Entropic, BallotAlgo::Lloyd, BallotAlgo::Matching] {
        let trace = run_from(data, &init, algo);
        let mut labels = vec![u32::MAX; n];
        assert_eq!(unsafe { ballot_trace_labels(trace, labels.as_mut_ptr(), n) }, BallotStatus::Ok);
        let mut counts = [0; 3];
        for &l in &labels {
            counts[l as usize] += 1;
        }
        assert_eq!(counts, [30, 30, 30], "{algo:?}");
        let mut mu = vec![f64::NAN; k * d];
        assert_eq!(unsafe { ballot_trace_centroids(trace, mu.as_mut_ptr(), mu.len()) }, BallotStatus::Ok);
        assert!(mu.iter().all(|v| v.is_finite()));
        assert!(unsafe { ballot_trace_objective(trace) } > 0.0);
        assert!(unsafe { ballot_trace_iterations(trace) } >= 1);
        unsafe { ballot_trace_free(trace) };
    }
    unsafe { ballot_dataset_free(data) };
}

#[test]
fn explicit_points_and_json_round_trip() {
    let points = [0.0, 0.1, 5.0, 5.1];
    let labels = [0u32, 0, 1, 1];
    let mut data = ptr::null_mut();
    let status = unsafe { ballot_dataset_new(points.as_ptr(), 4, 1, 2, labels.as_ptr(), &mut data) };
    assert_eq!(status, BallotStatus::Ok);
    let mut init = [0.0; 2];
    assert_eq!(unsafe { ballot_kmeanspp(data, 3, init.as_mut_ptr(), 2) }, BallotStatus::Ok);
    let trace = run_from(data, &init, BallotAlgo::Exact);
    assert!(unsafe { ballot_trace_converged(trace) });
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ballot_trace_to_json(trace, &mut json) }, BallotStatus::Ok);
    let doc: serde_json::Value =
        serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    unsafe { ballot_string_free(json) };
    let mut centroids: Vec<f64> = doc["centroids"].as_array().unwrap().iter().map(|r| r[0].as_f64().unwrap()).collect();
    centroids.sort_by(f64::total_cmp);
    assert!((centroids[0] - 0.05).abs() < 1e-12 && (centroids[1] - 5.05).abs() < 1e-12);
    unsafe {
        ballot_trace_free(trace);
        ballot_dataset_free(data);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let points = [0.0, 1.0, 2.0];
    let mut data = ptr::null_mut();
    let status = unsafe { ballot_dataset_new(points.as_ptr(), 3, 1, 2, ptr::null(), &mut data) };
    assert_eq!(status, BallotStatus::Unbalanced);
    assert!(data.is_null());
    assert!(last_error().contains("divide"));

    let status = unsafe { ballot_dataset_new(ptr::null(), 3, 1, 3, ptr::null(), &mut data) };
    assert_eq!(status, BallotStatus::NullPointer);

    let bad = [0.0, f64::NAN];
    assert_eq!(unsafe { ballot_dataset_new(bad.as_ptr(), 2, 1, 2, ptr::null(), &mut data) }, BallotStatus::NonFinite);

    let missing = CString::new("/nonexistent/data.csv").unwrap();
    assert_eq!(unsafe { ballot_dataset_load(missing.as_ptr(), &mut data) }, BallotStatus::Io);

    let data = sample(20, 2, 2, 3.0, 0);
    let mut small = [0.0; 3];
    assert_eq!(unsafe { ballot_kmeanspp(data, 0, small.as_mut_ptr(), 3) }, BallotStatus::Dimension);

    let mut opts = ballot_options_default();
    opts.max_iters = 0;
    let init = [0.0, 0.0, 1.0, 1.0];
    let mut trace = ptr::null_mut();
    let status = unsafe { ballot_run(data, init.as_ptr(), BallotAlgo::Exact, &opts, &mut trace) };
    assert_eq!(status, BallotStatus::InvalidArgument);

    let mut unlabeled = ptr::null_mut();
    let pts = [0.0, 1.0];
    assert_eq!(unsafe { ballot_dataset_new(pts.as_ptr(), 2, 1, 2, ptr::null(), &mut unlabeled) }, BallotStatus::Ok);
    let mut mu = [0.0; 2];
    assert_eq!(unsafe { ballot_planted_centroids(unlabeled, mu.as_mut_ptr(), 2) }, BallotStatus::InvalidArgument);

    unsafe {
        ballot_dataset_free(data);
        ballot_dataset_free(unlabeled);
        ballot_dataset_free(ptr::null_mut());
        ballot_trace_free(ptr::null_mut());
        ballot_string_free(ptr::null_mut());
        assert_eq!(ballot_dataset_n(ptr::null()), 0);
        assert!(ballot_trace_objective(ptr::null()).is_nan());
    }
}

#[test]
fn loads_dataset_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "# d=2 n=2 k=1\n1,0.5,1.5\n1,1.5,2.5\n").unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut data = ptr::null_mut();
    assert_eq!(unsafe { ballot_dataset_load(cpath.as_ptr(), &mut data) }, BallotStatus::Ok);
    let mut mu = [0.0; 2];
    assert_eq!(unsafe { ballot_planted_centroids(data, mu.as_mut_ptr(), 2) }, BallotStatus::Ok);
    assert_eq!(mu, [1.0, 2.0]);
    unsafe { ballot_dataset_free(data) };
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_builds_against_header_and_static_library() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libballot_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok 60");
}

use std::ffi::{CStr, CString};
use std::ptr;

use wavefront_ffi::*;

fn last_error() -> String {
    let n = unsafe { wf_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; n];
    unsafe { wf_last_error(buf.as_mut_ptr().cast(), n) };
    CStr::from_bytes_until_nul(&buf).unwrap().to_str().unwrap().to_string()
}

fn model(name: &str) -> *mut WfModel {
    let name = CString::new(name).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { wf_model_new(name.as_ptr(), &mut m) }, WfStatus::Ok);
    m
}

#[test]
fn riemann_problem_round_trip() {
    let m = model("decoupled");
    let mut dim = 0;
    unsafe {
        assert_eq!(wf_model_dim(m, &mut dim), WfStatus::Ok);
        assert_eq!(dim, 2);
        let mut ld = false;
        assert_eq!(wf_model_is_linearly_degenerate(m, 1, &mut ld), WfStatus::Ok);
        assert!(ld);
        let xs = [0.0];
        let states = [1.0, 0.5, 0.0, 0.5];
        let mut tr = ptr::null_mut();
        assert_eq!(wf_simulate(m, 2, xs.as_ptr(), 1, states.as_ptr(), 1.0, &mut tr), WfStatus::Ok, "{}", last_error());
        let mut count = 0;
        assert_eq!(wf_trajectory_front_count(tr, 1.0, &mut count), WfStatus::Ok);
        assert_eq!(count, 1);
        // Burgers shock from 1 to 0 moves with speed 1/2
        let probe = [0.4, 0.6];
        let mut out = [0.0; 4];
        assert_eq!(wf_trajectory_sample(tr, 1.0, probe.as_ptr(), 2, out.as_mut_ptr()), WfStatus::Ok);
        assert_eq!(out, [1.0, 0.5, 0.0, 0.5]);
        let (mut tv, mut q) = (0, 0);
        assert_eq!(wf_trajectory_monitors(tr, &mut tv, &mut q), WfStatus::Ok);
        assert_eq!((tv, q), (4, 0));
        let mut defect = -1.0;
        assert_eq!(wf_trajectory_max_mass_defect(tr, &mut defect), WfStatus::Ok);
        assert_eq!(defect, 0.0);
        wf_trajectory_free(tr);
        wf_model_free(m);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let name = CString::new("euler").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(wf_model_new(name.as_ptr(), &mut m), WfStatus::UnknownModel);
        assert!(m.is_null());
        assert!(last_error().contains("euler"));

        assert_eq!(wf_model_dim(ptr::null(), ptr::null_mut()), WfStatus::NullPointer);

        let m = model("aw-rascle");
        let states = [0.0, 0.0];
        let mut tr = ptr::null_mut();
        assert_eq!(wf_simulate(m, 2, ptr::null(), 0, states.as_ptr(), 1.0, &mut tr), WfStatus::InvalidData);
        assert!(last_error().contains("outside the domain"));

        let states = [1.5, 4.5];
        assert_eq!(wf_simulate(m, 2, ptr::null(), 0, states.as_ptr(), f64::NAN, &mut tr), WfStatus::InvalidArgument);
        assert_eq!(wf_simulate(m, 2, ptr::null(), 0, states.as_ptr(), 1.0, &mut tr), WfStatus::Ok);
        let mut n = 0;
        assert_eq!(wf_trajectory_front_count(tr, 5.0, &mut n), WfStatus::OutOfSpan);
        wf_trajectory_free(tr);
        wf_model_free(m);
        wf_model_free(ptr::null_mut());
    }
}

#[test]
fn scenario_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(&scenario, "model = \"ld-ld\"\nhorizon = 1.0\nseed = 4\n[grid]\nnu = 3\n[data]\nkind = \"random\"\njumps = 6\nx_min = 0.0\nx_max = 2.0\n").unwrap();
    let path = CString::new(scenario.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let mut violations = usize::MAX;
    assert_eq!(unsafe { wf_scenario_run(path.as_ptr(), out.as_ptr(), &mut violations) }, WfStatus::Ok, "{}", last_error());
    assert_eq!(violations, 0);
    for f in ["events.csv", "trajectories.csv", "metrics.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let version = unsafe { CStr::from_ptr(wf_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

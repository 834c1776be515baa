use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ctnd::instance::{brute_force_solve, generate_knapsack};
use ctnd_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ctnd_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn solve_matches_oracle() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(
            ctnd_instance_generate_knapsack(4, 9, 2, &mut inst),
            CtndStatus::Ok
        );
        let mut traj = ptr::null_mut();
        assert_eq!(
            ctnd_solve(inst, ptr::null(), ptr::null(), 0, 100_000, CtndEmphasis::Off as i32, &mut traj),
            CtndStatus::Ok
        );
        let n = ctnd_trajectory_len(traj);
        let (mut step, mut obj) = (0u64, 0.0f64);
        assert_eq!(ctnd_trajectory_event(traj, n - 1, &mut step, &mut obj), CtndStatus::Ok);
        let opt = brute_force_solve(&generate_knapsack(4, 9, 2)).unwrap().objective;
        assert!((obj - opt).abs() < 1e-6);
        assert!(ctnd_trajectory_proved_optimal(traj));
        assert_eq!(
            ctnd_trajectory_event(traj, n, &mut step, &mut obj),
            CtndStatus::InvalidArgument
        );
        ctnd_trajectory_free(traj);
        ctnd_instance_free(inst);
    }
}

#[test]
fn contradictory_fixings_report_infeasible() {
    unsafe {
        let text = CString::new(
            "NAME c\nVAR a binary 0 1 1\nVAR b binary 0 1 1\nCON r >= 1 0:1 1:1\n",
        )
        .unwrap();
        let mut inst = ptr::null_mut();
        assert_eq!(ctnd_instance_parse(text.as_ptr(), &mut inst), CtndStatus::Ok);
        let vars = [0usize, 1];
        let values = [0u8, 0];
        let mut traj = ptr::null_mut();
        let status = ctnd_solve(
            inst,
            vars.as_ptr(),
            values.as_ptr(),
            2,
            100,
            CtndEmphasis::Aggressive as i32,
            &mut traj,
        );
        assert_eq!(status, CtndStatus::Infeasible);
        assert!(traj.is_null());
        assert!(!last_error().is_empty());
        ctnd_instance_free(inst);
    }
}

#[test]
fn null_and_bad_arguments() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(ctnd_instance_parse(ptr::null(), &mut inst), CtndStatus::NullPointer);
        assert_eq!(
            ctnd_instance_generate_covering(1, 3, 5, &mut inst),
            CtndStatus::InvalidArgument
        );
        assert_eq!(ctnd_instance_num_vars(ptr::null()), 0);
        let bad = [0xffu8, 0];
        assert_eq!(
            ctnd_instance_parse(bad.as_ptr().cast(), &mut inst),
            CtndStatus::InvalidUtf8
        );
        let mut pi = 0.0;
        assert_eq!(
            ctnd_primal_integral(ptr::null(), 10, 0.0, 1.0, &mut pi),
            CtndStatus::NullPointer
        );

        assert_eq!(ctnd_instance_generate_knapsack(1, 5, 1, &mut inst), CtndStatus::Ok);
        let mut traj = ptr::null_mut();
        assert_eq!(
            ctnd_solve(inst, ptr::null(), ptr::null(), 0, 10, 7, &mut traj),
            CtndStatus::InvalidArgument
        );
        assert!(traj.is_null());
        ctnd_instance_free(inst);

        ctnd_instance_free(ptr::null_mut());
        ctnd_model_free(ptr::null_mut());
        ctnd_trajectory_free(ptr::null_mut());
        ctnd_string_free(ptr::null_mut());
    }
}

#[test]
fn model_save_load_predict() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.txt").to_str().unwrap()).unwrap();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(ctnd_model_new(6, 2, &mut model), CtndStatus::Ok);
        assert_eq!(ctnd_model_save(model, path.as_ptr()), CtndStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(ctnd_model_load(path.as_ptr(), &mut loaded), CtndStatus::Ok);

        let mut inst = ptr::null_mut();
        assert_eq!(ctnd_instance_generate_covering(3, 12, 5, &mut inst), CtndStatus::Ok);
        let n = ctnd_instance_num_binary(inst);
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        assert_eq!(ctnd_model_predict(model, inst, a.as_mut_ptr(), n), CtndStatus::Ok);
        assert_eq!(ctnd_model_predict(loaded, inst, b.as_mut_ptr(), n), CtndStatus::Ok);
        assert_eq!(a, b);

        let missing = CString::new("/nonexistent/model.txt").unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(ctnd_model_load(missing.as_ptr(), &mut none), CtndStatus::IoError);

        let mut traj = ptr::null_mut();
        assert_eq!(
            ctnd_dive_and_solve(inst, model, 0.3, 50, CtndEmphasis::Off as i32, &mut traj, ptr::null_mut()),
            CtndStatus::InvalidArgument
        );
        ctnd_instance_free(inst);
        ctnd_model_free(model);
        ctnd_model_free(loaded);
    }
}

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libctnd_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let output = Command::new(&exe).output().unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(String::from_utf8_lossy(&output.stdout).starts_with("ok "));
}

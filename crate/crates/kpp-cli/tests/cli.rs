//! End-to-end tests driving the `kpp` binary the way a shell user would.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn kpp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpp"))
        .args(args)
        .current_dir(cwd)
        .env_remove("KPP_OUT")
        .output()
        .expect("spawning kpp")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn config_file_run_and_manifest_revalidation() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "[run]\ncommand = tw\nout = waves\n\n[tw]\nm = 2\nlambda = 0.5\nh = 0.1\nleft = -60\nright = 250\n",
    )
    .unwrap();
    let out = kpp(&["--config", "run.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let profile = dir.path().join("waves/profile_m2_lambda0.5.csv");
    let text = fs::read_to_string(&profile).unwrap();
    assert!(text.starts_with("# m=2 lambda=0.5 status=converged"));
    assert!(text.lines().nth(1) == Some("y,f"));

    // the manifest lists the profile and its digest re-validates
    let manifest = dir.path().join("waves/manifest.json");
    let man: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let outputs = man["outputs"].as_array().unwrap();
    assert!(outputs
        .iter()
        .any(|o| o["path"] == "profile_m2_lambda0.5.csv"));
    let out = kpp(
        &["verify", "manifest=waves/manifest.json", "--out", "check"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let report = fs::read_to_string(dir.path().join("check/verify.csv")).unwrap();
    assert!(report.contains("manifest-digest,pass"));

    // tampering flips the digest check and the exit code
    fs::write(&profile, "y,f\n0,0\n").unwrap();
    let out = kpp(
        &["verify", "manifest=waves/manifest.json", "--out", "check2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_key_is_rejected_with_its_line() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("bad.cfg"),
        "[tw]\nm = 1\nlambda = 0.5\nwavelength = 3\n",
    )
    .unwrap();
    let out = kpp(&["tw", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(err.contains("tw.wavelength"), "stderr: {err}");
    assert!(err.contains("line 4"), "stderr: {err}");
}

#[test]
fn malformed_numeric_fails_cleanly() {
    let dir = TempDir::new().unwrap();
    let out = kpp(&["tw", "m=2", "lambda=quick"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("lambda"));
}

#[test]
fn negative_lambda_runs_with_warning_and_expected_nonexistence() {
    let dir = TempDir::new().unwrap();
    let out = kpp(
        &["tw", "m=2", "lambda=-1", "h=0.1", "left=-60", "right=120", "--out", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("warning"));
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    for (out_dir, jobs) in [("a", "3"), ("b", "1")] {
        let out = kpp(
            &[
                "sweep",
                "m=1",
                "lambdas=0.5,1.0",
                "h=0.1",
                "left=-40",
                "right=80",
                "--out",
                out_dir,
                "--jobs",
                jobs,
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    }
    for f in ["summary.csv", "profile_m1_lambda0.5.csv", "profile_m1_lambda1.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between --jobs 3 and --jobs 1");
    }
    let summary = fs::read_to_string(dir.path().join("a/summary.csv")).unwrap();
    assert!(summary.starts_with("lambda,status,momentum,oscillations\n"));
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn evolve_then_fit_shift_roundtrip() {
    let dir = TempDir::new().unwrap();
    let out = kpp(
        &[
            "evolve",
            "m=1",
            "t_final=6",
            "h=0.1",
            "window_a=30",
            "window_b=90",
            "output_dt=0.25",
            "snapshots=2.0",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let front = fs::read_to_string(dir.path().join("run/front.csv")).unwrap();
    assert!(front.starts_with("t,xf,umin,umax\n"));
    let snap = fs::read_to_string(dir.path().join("run/snapshot_t2.csv")).unwrap();
    assert!(snap.starts_with("# t=2\nx,u\n"));

    let out = kpp(
        &[
            "fit-shift",
            "input=run/front.csv",
            "window=1:6",
            "--out",
            "fit",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let fit = fs::read_to_string(dir.path().join("fit/fit.csv")).unwrap();
    assert!(fit.starts_with("lambda0,k,c,residual_rms,window_lo,window_hi\n"));
}

#[test]
fn profiles_plot_bundle() {
    let dir = TempDir::new().unwrap();
    let out = kpp(
        &[
            "tw",
            "m=2",
            "lambda=0.2,0.3,0.4,0.5",
            "h=0.1",
            "left=-60",
            "right=250",
            "plotdata=profiles",
            "--out",
            "fig",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let bundle = fs::read_to_string(dir.path().join("fig/fig_profiles.csv")).unwrap();
    assert_eq!(
        bundle.lines().next(),
        Some("y,lambda=0.2,lambda=0.3,lambda=0.4,lambda=0.5")
    );
    let script = fs::read_to_string(dir.path().join("fig/plot_profiles.gp")).unwrap();
    assert!(script.contains("fig_profiles.csv"));
}

#[test]
fn env_var_overrides_config_output_root() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("r.cfg"),
        "[run]\ncommand = roots\nout = ignored\n[roots]\nm = 2\nlambda = 0\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kpp"))
        .args(["--config", "r.cfg"])
        .current_dir(dir.path())
        .env("KPP_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(dir.path().join("from-env/roots.csv").exists());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn inline_overrides_config_file() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.cfg"), "[tw]\nm = 1\nlambda = 0.5\nh = 0.1\nleft = -40\nright = 80\n").unwrap();
    let out = kpp(
        &["tw", "lambda=1.0", "--config", "t.cfg", "--out", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(dir.path().join("o/profile_m1_lambda1.csv").exists());
    assert!(!dir.path().join("o/profile_m1_lambda0.5.csv").exists());
}

#[test]
fn missing_command_is_an_error() {
    let dir = TempDir::new().unwrap();
    let out = kpp(&["m=2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("no command"));
}

use std::path::{Path, PathBuf};
use std::process::Command;

use phonolab::dataio::FitReport;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn phonolab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_phonolab"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_ringupdown_with_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ring.csv");
    let (code, stdout, stderr) = phonolab(&["simulate", p(&config("ringupdown.json")), "-o", p(&csv), "--plot"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("truncation dim:"), "{stdout}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("axis,nbar,sigma\n"));
    assert_eq!(text.lines().count(), 51);
    let svg = std::fs::read_to_string(dir.path().join("ring.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<circle").count(), 50);
    assert!(svg.contains("stroke-dasharray"));
}

#[test]
fn simulate_ramsey_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ramsey.csv");
    let (code, _, stderr) = phonolab(&["simulate", p(&config("ramsey.json")), "-o", p(&csv)]);
    assert_eq!(code, 0, "{stderr}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("tau,phi,nbar,sigma\n"));
    assert_eq!(text.lines().count(), 1 + 16 * 12);
    assert!(!dir.path().join("ramsey.svg").exists());
}

#[test]
fn missing_config_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    let (code, _, stderr) = phonolab(&["simulate", "/nonexistent/config.json", "-o", p(&csv)]);
    assert_eq!(code, 1);
    assert!(stderr.contains("error"), "{stderr}");
    assert!(!csv.exists());
}

#[test]
fn invalid_config_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let text = std::fs::read_to_string(config("ringupdown.json")).unwrap().replace("\"t_d\": 2e-6", "\"t_d\": -2e-6");
    std::fs::write(&cfg, text).unwrap();
    let csv = dir.path().join("x.csv");
    let (code, _, stderr) = phonolab(&["simulate", p(&cfg), "-o", p(&csv)]);
    assert_eq!(code, 1);
    assert!(stderr.contains("t_d"), "{stderr}");
    assert!(!csv.exists());
}

#[test]
fn simulate_then_fit_ringupdown() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ring.csv");
    let report = dir.path().join("fit.json");
    let cfg = config("ringupdown.json");
    assert_eq!(phonolab(&["simulate", p(&cfg), "-o", p(&csv)]).0, 0);
    let (code, stdout, stderr) = phonolab(&["fit", p(&csv), p(&cfg), "-o", p(&report), "--spec-fwhm", "430k"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("kappa1"), "{stdout}");
    let r = FitReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.protocol, "ringupdown");
    let u = r.fit.params["U"];
    let k1 = r.fit.params["kappa1"];
    assert!((u / 4.35e6 - 1.0).abs() < 0.05, "U {u}");
    assert!((k1 / 480e3 - 1.0).abs() < 0.1, "kappa1 {k1}");
    assert!(r.fit.sigmas["U"] > 0.0 && r.fit.sigmas["kappa1"] > 0.0);
    assert_eq!(r.fit.fixed["kappa_phi"], 0.0);
    let cc = r.cross_check.unwrap();
    assert_eq!(cc.spectroscopic_fwhm, Some(430e3));
}

#[test]
fn fixing_a_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ring.csv");
    let report = dir.path().join("fit.json");
    let cfg = config("ringupdown.json");
    assert_eq!(phonolab(&["simulate", p(&cfg), "-o", p(&csv)]).0, 0);
    let (code, _, stderr) = phonolab(&["fit", p(&csv), p(&cfg), "-o", p(&report), "--fix", "U=4.35M"]);
    assert_eq!(code, 0, "{stderr}");
    let r = FitReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.fit.fixed["U"], 4.35e6);
    assert!(!r.fit.params.contains_key("U"));
    assert_eq!(r.fit.free, vec!["kappa1".to_string()]);

    let (code, _, stderr) = phonolab(&["fit", p(&csv), p(&cfg), "-o", p(&report), "--fix", "t_d=1"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("t_d"), "{stderr}");
}

#[test]
fn wrong_protocol_for_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ramsey.csv");
    let report = dir.path().join("fit.json");
    assert_eq!(phonolab(&["simulate", p(&config("ramsey.json")), "-o", p(&csv)]).0, 0);
    let (code, _, stderr) = phonolab(&[
        "fit",
        p(&csv),
        p(&config("ringupdown.json")),
        "-o",
        p(&report),
        "--protocol",
        "ringupdown",
    ]);
    assert_eq!(code, 1, "{stderr}");
    assert!(!report.exists());
}

#[test]
fn spectroscopy_fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("spec.csv");
    let report = dir.path().join("fit.json");
    let cfg = config("spectroscopy.json");
    let (code, _, stderr) = phonolab(&["simulate", p(&cfg), "-o", p(&csv)]);
    assert_eq!(code, 0, "{stderr}");
    let (code, stdout, stderr) = phonolab(&["fit", p(&csv), p(&cfg), "-o", p(&report)]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("fwhm"), "{stdout}");
    let r = FitReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let fwhm = r.fit.params["fwhm"];
    assert!((fwhm / 570e3 - 1.0).abs() < 0.01, "fwhm {fwhm}");
    assert!(r.fit.params["center"].abs() < 1e3);
}

#[test]
fn derive_commands() {
    let (code, stdout, _) = phonolab(&["derive", "kappa", "480e3", "180e3"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("420.00 kHz"), "{stdout}");
    assert!(stdout.contains("570.00 kHz"), "{stdout}");

    let (code, stdout, _) = phonolab(&["derive", "tphi", "494e-9", "750e-9"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("3.11 us"), "{stdout}");

    let (code, stdout, _) = phonolab(&["derive", "chi", "9M", "-237.37M", "318M"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("MHz"), "{stdout}");

    let (code, _, stderr) = phonolab(&["derive", "tphi", "494e-9", "2e-6"]);
    assert_eq!(code, 1, "{stderr}");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("ramsey.json");
    let mut bytes = Vec::new();
    for i in 0..2 {
        let csv = dir.path().join(format!("r{i}.csv"));
        let (code, _, stderr) = phonolab(&["simulate", p(&cfg), "-o", p(&csv), "--plot", "--noise-seed", "3"]);
        assert_eq!(code, 0, "{stderr}");
        bytes.push((std::fs::read(&csv).unwrap(), std::fs::read(csv.with_extension("svg")).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("ramsey.json");
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let csv = dir.path().join(format!("t{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_phonolab"))
            .env("PHONOLAB_THREADS", threads)
            .args(["simulate", p(&cfg), "-o", p(&csv)])
            .output()
            .unwrap();
        assert!(status.status.success());
        outputs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn simulate_then_fit_ramsey() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ramsey.csv");
    let report = dir.path().join("fit.json");
    let cfg = config("ramsey.json");
    assert_eq!(phonolab(&["simulate", p(&cfg), "-o", p(&csv)]).0, 0);
    let (code, _, stderr) = phonolab(&["fit", p(&csv), p(&cfg), "-o", p(&report)]);
    assert_eq!(code, 0, "{stderr}");
    let r = FitReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for (name, truth, tol) in [("U", 4.35e6, 0.02), ("kappa1", 480e3, 0.05), ("kappa_phi", 180e3, 0.15), ("phi0", 0.3, 0.05)] {
        let v = r.fit.params[name];
        assert!((v / truth - 1.0).abs() < tol, "{name} {v}");
        assert!(r.fit.sigmas[name] > 0.0);
    }
}

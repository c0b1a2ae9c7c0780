use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roict::io::{read_image, write_sinogram};
use roict::tomo::Sinogram;

const GEOMETRY: &str = r#"
[geometry]
width = 24
pixel_size = 1.0
grid_diameter = 18.0
roi_diameter = 12.0
n_bins = 15
bin_size = 1.0
n_angles = 12
subrays = 2
"#;

const SOLVER: &str = r#"
[solver]
outer = 2
inner = 15
tv_outer = 3
tv_inner = 10
groups = [2, 2]
"#;

fn roict(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roict")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("{GEOMETRY}{SOLVER}{body}")).unwrap();
    p
}

#[test]
fn usage_errors_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&roict(dir.path(), &["simulate"])), 2);
    assert_eq!(code(&roict(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&roict(dir.path(), &["simulate", "--config", "missing.toml"])), 1);
    assert_eq!(code(&roict(dir.path(), &["--help"])), 0);
    assert_eq!(code(&roict(dir.path(), &["--version"])), 0);
    fs::write(dir.path().join("bad.toml"), "[geometry]\nwidth = 4\n").unwrap();
    let out = roict(dir.path(), &["simulate", "--config", "bad.toml"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pixel_size"));
}

#[test]
fn simulate_writes_manifest_and_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.toml", "[simulate]\nout_dir = \"a\"\ncount = 10\n");
    write_config(dir.path(), "b.toml", "[simulate]\nout_dir = \"b\"\ncount = 10\n");
    assert_eq!(code(&roict(dir.path(), &["simulate", "--config", "a.toml", "--seed", "9", "--threads", "1"])), 0);
    assert_eq!(code(&roict(dir.path(), &["simulate", "--config", "b.toml", "--seed", "9", "--threads", "3"])), 0);
    let manifest = fs::read_to_string(dir.path().join("a/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 10);
    for line in manifest.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(dir.path().join("a").join(v["sinogram"].as_str().unwrap()).exists());
        assert!(dir.path().join("a").join(v["phantom"].as_str().unwrap()).exists());
    }
    for i in 0..10 {
        for kind in ["phantom", "sinogram"] {
            let name = format!("{kind}_{i:04}.bin");
            assert_eq!(fs::read(dir.path().join("a").join(&name)).unwrap(), fs::read(dir.path().join("b").join(&name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn fbp_of_zero_sinogram_is_zero_image() {
    let dir = tempfile::tempdir().unwrap();
    write_sinogram(&dir.path().join("zero.bin"), &Sinogram::zeros(12, 15)).unwrap();
    write_config(dir.path(), "r.toml", "[reconstruct]\nmethod = \"fbp\"\nsinogram = \"zero.bin\"\noutput = \"x.bin\"\n");
    assert_eq!(code(&roict(dir.path(), &["reconstruct", "--config", "r.toml"])), 0);
    let x = read_image(&dir.path().join("x.bin")).unwrap();
    assert_eq!(x.width(), 24);
    assert!(x.as_slice().iter().all(|v| *v == 0.0));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("x.bin.json")).unwrap()).unwrap();
    assert_eq!(meta["method"], "fbp");
}

#[test]
fn shape_mismatch_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    write_sinogram(&dir.path().join("s.bin"), &Sinogram::zeros(11, 15)).unwrap();
    write_config(dir.path(), "r.toml", "[reconstruct]\nmethod = \"fbp\"\nsinogram = \"s.bin\"\noutput = \"x.bin\"\n");
    assert_eq!(code(&roict(dir.path(), &["reconstruct", "--config", "r.toml"])), 4);
}

#[test]
fn corrupt_sinogram_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.bin"), b"not a matrix").unwrap();
    write_config(dir.path(), "r.toml", "[reconstruct]\nmethod = \"fbp\"\nsinogram = \"s.bin\"\noutput = \"x.bin\"\n");
    assert_eq!(code(&roict(dir.path(), &["reconstruct", "--config", "r.toml"])), 1);
}

#[test]
fn understepped_reconstruction_is_refused_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    write_sinogram(&dir.path().join("s.bin"), &Sinogram::from_vec(12, 15, vec![0.5; 180]).unwrap()).unwrap();
    let body = "[reconstruct]\nmethod = \"rdbfb\"\nsinogram = \"s.bin\"\noutput = \"x.bin\"\n";
    let p = dir.path().join("r.toml");
    fs::write(&p, format!("{GEOMETRY}{SOLVER}steps = {{ sigma = 1e-4, tau = 1e-4 }}\n{body}")).unwrap();
    let out = roict(dir.path(), &["reconstruct", "--config", "r.toml"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
    assert!(!dir.path().join("x.bin").exists());
    assert_eq!(code(&roict(dir.path(), &["reconstruct", "--config", "r.toml", "--override-step-check"])), 0);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("x.bin.json")).unwrap()).unwrap();
    let conds = meta["step_report"]["conditions"].as_array().unwrap();
    assert!(conds.iter().any(|c| c["name"] == "sigma" && c["pass"] == false));
}

#[test]
fn reconstruct_evaluate_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "sim.toml", "[simulate]\nout_dir = \"d\"\ncount = 1\nphantom = \"desk-wire\"\n");
    assert_eq!(code(&roict(dir.path(), &["simulate", "--config", "sim.toml", "--seed", "3"])), 0);
    write_config(
        dir.path(),
        "r.toml",
        "[reconstruct]\nmethod = \"rdbfb\"\nsinogram = \"d/sinogram_0000.bin\"\noutput = \"x.bin\"\ntrace = \"t.csv\"\npng = \"x.png\"\nreference = \"d/phantom_0000.bin\"\n",
    );
    let out = roict(dir.path(), &["reconstruct", "--config", "r.toml"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 2 * 15);
    assert!(fs::read(dir.path().join("x.png")).unwrap().starts_with(b"\x89PNG"));
    write_config(
        dir.path(),
        "e.toml",
        "[evaluate]\noutput = \"m.csv\"\n[[evaluate.items]]\nid = \"0\"\nmethod = \"rdbfb\"\nreconstruction = \"x.bin\"\nreference = \"d/phantom_0000.bin\"\n",
    );
    assert_eq!(code(&roict(dir.path(), &["evaluate", "--config", "e.toml"])), 0);
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for col in ["psnr", "ssim", "mae"] {
        assert!(header.contains(col), "{header}");
    }
}

#[test]
fn bench_negative_control_fails_and_missing_case_skips() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("suite.toml"),
        "[[case]]\nname = \"understep\"\ncriteria = [\"AC6\"]\ntau_scale = 0.5\n\n[[case]]\nname = \"absent\"\nconfig = \"nope.toml\"\ncriteria = [\"AC1\"]\n",
    )
    .unwrap();
    let out = roict(dir.path(), &["bench", "--suite", "suite.toml", "--report", "rep.jsonl"]);
    assert_eq!(code(&out), 5);
    let report = fs::read_to_string(dir.path().join("rep.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = report.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let status = |c: &str| rows.iter().find(|r| r["criterion"] == c).map(|r| r["status"].as_str().unwrap().to_string());
    assert_eq!(status("AC6").as_deref(), Some("FAIL"));
    assert_eq!(status("AC1").as_deref(), Some("SKIP"));

    fs::write(dir.path().join("ok.toml"), "[[case]]\nname = \"steps\"\ncriteria = [\"AC6\"]\n").unwrap();
    assert_eq!(code(&roict(dir.path(), &["bench", "--suite", "ok.toml"])), 0);
    fs::write(dir.path().join("bad.toml"), "[[case]]\nname = \"x\"\ncriteria = [\"AC99\"]\n").unwrap();
    assert_eq!(code(&roict(dir.path(), &["bench", "--suite", "bad.toml"])), 2);
}

use std::path::Path;
use std::process::{Command, Output};

fn aetomo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aetomo"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn generate(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["generate", "--preset", "test1-bc1-clean", "--h", "0.1", "--out", out];
    args.extend_from_slice(extra);
    let o = aetomo(&args, dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_is_deterministic_and_records_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "a", &["--noise", "0.1", "--seed", "4"]);
    generate(tmp.path(), "b", &["--noise", "0.1", "--seed", "4"]);
    let a = std::fs::read(tmp.path().join("a/data.txt")).unwrap();
    let b = std::fs::read(tmp.path().join("b/data.txt")).unwrap();
    assert_eq!(a, b);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    for key in ["config_hash", "coarse_mesh_hash", "fine_mesh_hash", "data_sha256", "version"] {
        assert!(manifest[key].as_str().is_some_and(|s| !s.is_empty()), "{key}");
    }
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["noise_streams"], 2);
}

#[test]
fn reconstruct_writes_all_artifacts_and_compare_tabulates_them() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "d", &[]);
    let o = aetomo(&["reconstruct", "--data", "d/data.txt", "--kmax", "3", "--out", "r"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["sigma.csv", "sigma.vtk", "sigma.png", "history.csv", "metrics.json", "manifest.json"] {
        assert!(tmp.path().join("r").join(f).exists(), "{f}");
    }
    let history = std::fs::read_to_string(tmp.path().join("r/history.csv")).unwrap();
    assert!(history.starts_with("k,cost,grad_norm,step,beta,backtracks,active_frac\n"));
    assert_eq!(history.lines().count(), 4);

    let o = aetomo(&["compare", "r", "r", "--out", "table.csv"], tmp.path());
    assert_eq!(code(&o), 0);
    let table = std::fs::read_to_string(tmp.path().join("table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);
}

#[test]
fn zero_iterations_return_the_initial_guess() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "d", &[]);
    let o = aetomo(&["reconstruct", "--data", "d/data.txt", "--kmax", "0", "--out", "r"], tmp.path());
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(tmp.path().join("r/sigma.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(v, 1.0);
    }
}

#[test]
fn configuration_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aetomo(&["generate", "--preset", "nope", "--out", "x"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("available presets"));

    let o = aetomo(&["generate", "--preset", "heart-clean", "--noise", "0.05", "--h", "0.1", "--out", "x"], tmp.path());
    assert_eq!(code(&o), 2);

    generate(tmp.path(), "d", &[]);
    // data synthesized for s = 1 cannot be used with s = 0
    let o = aetomo(&["reconstruct", "--data", "d/data.txt", "--s", "0", "--out", "r"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("r").exists());
}

#[test]
fn inverse_crime_data_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "d", &[]);
    let path = tmp.path().join("d/manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    m["fine_h"] = m["coarse_h"].clone();
    std::fs::write(&path, m.to_string()).unwrap();
    let o = aetomo(&["reconstruct", "--data", "d/data.txt", "--out", "r"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fine_h"));
    assert!(!tmp.path().join("r").exists());
}

#[test]
fn line_search_failure_exits_with_4_and_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "d", &[]);
    std::fs::write(
        tmp.path().join("bad.json"),
        r#"{"preset": "test1-bc1-clean", "nlcg": {"alpha0": 1e8, "bb_warm_start": false, "max_backtracks": 0}}"#,
    )
    .unwrap();
    let o = aetomo(&["reconstruct", "--data", "d/data.txt", "--config", "bad.json", "--out", "r"], tmp.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let leftovers: Vec<_> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.contains('r') && n != "d" && n != "bad.json")
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn linear_solver_failure_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("cg.json"),
        r#"{"coarse_h": 0.1, "fine_h": 0.05, "nlcg": {"solver": {"kind": "cg", "rel_tol": 1e-14, "max_iter_factor": 0}}}"#,
    )
    .unwrap();
    let o = aetomo(&["generate", "--config", "cg.json", "--out", "d"], tmp.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gradcheck_and_mesh_export() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aetomo(&["gradcheck", "--h", "0.1", "--directions", "1", "--out", "g.csv"], tmp.path());
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("v-shaped=true").count(), 2, "{stdout}");
    assert_eq!(std::fs::read_to_string(tmp.path().join("g.csv")).unwrap().lines().count(), 1 + 2 * 9);

    let o = aetomo(&["mesh", "--h", "0.2", "--out", "m"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("m/mesh.txt").exists() && tmp.path().join("m/mesh.vtk").exists());
}

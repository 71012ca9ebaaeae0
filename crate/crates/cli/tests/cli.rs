use std::path::Path;
use std::process::{Command, Output};

fn isaacs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isaacs"))
        .args(args)
        .env("ISAACS_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_writes_solution_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = isaacs(&["solve", "--problem", "laplace-sine", "--n", "8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("outer iters  1"));
    assert!(out.join("solution.dat").is_file());
    assert!(out.join("report.csv").is_file());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "problem = \"laplace-sine\"\nunknown_key = 3\n");
    let o = isaacs(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    assert_eq!(isaacs(&["solve", "--problem", "no-such-problem"]).status.code(), Some(2));
    assert_eq!(isaacs(&["solve"]).status.code(), Some(2));
    assert_eq!(isaacs(&["solve", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
}

#[test]
fn outer_iteration_cap_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "capped.toml",
        "problem = \"isaacs-2x2\"\nn = 16\n[solver]\nmax_outer = 1\n",
    );
    let o = isaacs(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn studies_print_csv_and_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "study.toml",
        "problem = \"isaacs-2x2\"\nns = [4, 8]\nseed = 11\n[study]\nreference_n = 16\n",
    );
    for sub in ["study", "consistency", "abp"] {
        let a = isaacs(&[sub, "--config", &cfg, "--out", dir.path().join("a").to_str().unwrap()]);
        let b = isaacs(&[sub, "--config", &cfg, "--out", dir.path().join("b").to_str().unwrap()]);
        assert!(a.status.success(), "{sub}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{sub}");
        assert_eq!(stdout(&a).lines().count(), 3, "{sub}");
    }
    for name in ["convergence.csv", "consistency.csv", "abp.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let other = isaacs(&["abp", "--config", &cfg, "--seed", "12"]);
    let base = isaacs(&["abp", "--config", &cfg]);
    assert_ne!(other.stdout, base.stdout);
}

#[test]
fn mesh_info_round_trips_through_a_mesh_file() {
    let dir = tempfile::tempdir().unwrap();
    let tables = dir.path().join("mesh.txt");
    let o = isaacs(&["mesh-info", "--problem", "constant-f", "--n", "5", "--write", tables.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("nodes          36"));
    assert!(text.contains("weakly acute   true"));

    let cfg = write_config(
        dir.path(),
        "file.toml",
        &format!("problem = \"constant-f\"\n[mesh]\nfile = {:?}\n", tables.to_str().unwrap()),
    );
    let o = isaacs(&["solve", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // refinement studies refuse a fixed mesh file
    assert_eq!(isaacs(&["study", "--config", &cfg]).status.code(), Some(2));
}

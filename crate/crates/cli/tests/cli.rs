use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str], config: &str, dir: &Path) -> Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_degree-pde"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn ok(args: &[&str], config: &str, dir: &Path) -> PathBuf {
    let out = run(args, config, dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir.join("out")
}

/// Data rows of a CSV file, skipping comments and the header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn float(s: &str) -> f64 {
    s.parse().unwrap()
}

fn project_config(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    fs::read_to_string(path).unwrap()
}

const MIXED_SHORT: &str = r#"
[rates]
omega_r = 1.0
omega_p = 1.0
l_d = 1.0
l_r = 1.0
n_d = 1.0
n_r = 1.0
n_p = 1.0
m = 3

[initial]
kind = "geometric"
rho = 3.0

[grid]
x_step = 0.25
t_max = 1.0
t_step = 0.25
"#;

#[test]
fn solve_keeps_the_boundary_value_and_writes_the_moment() {
    let dir = TempDir::new().unwrap();
    let out = ok(&["solve"], MIXED_SHORT, dir.path());
    let field = rows(&out.join("field.csv"));
    assert_eq!(field.len(), 5 * 9);
    for r in field.iter().filter(|r| float(&r[1]) == 1.0) {
        assert!(
            (float(&r[2]) - 1.0).abs() < 1e-9,
            "G(1, {}) = {}",
            r[0],
            r[2]
        );
    }
    let g = rows(&out.join("gmoment.csv"));
    assert_eq!(float(&g[0][1]), 0.5);
}

#[test]
fn zero_time_grid_returns_the_initial_condition() {
    let dir = TempDir::new().unwrap();
    let config = MIXED_SHORT.replace("t_max = 1.0", "t_max = 0.0");
    let out = ok(&["solve"], &config, dir.path());
    for r in rows(&out.join("field.csv")) {
        let x = float(&r[1]);
        assert!((float(&r[2]) - 2.0 / (3.0 - x)).abs() < 1e-14);
    }
}

#[test]
fn unnormalized_initial_condition_is_rejected() {
    let dir = TempDir::new().unwrap();
    let config = MIXED_SHORT.replace(
        "kind = \"geometric\"\nrho = 3.0",
        "kind = \"polynomial\"\ncoefficients = [0.5, 0.4]",
    );
    let out = run(&["solve"], &config, dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let out = run(&["solve"], "[rates]\nomega = 1.0\n", dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn two_singularity_steady_state_passes_its_anchor_values() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        &["steady"],
        &project_config("two_singularities.toml"),
        dir.path(),
    );
    let table = rows(&out.join("steady.csv"));
    let at = |x: f64| {
        let r = table
            .iter()
            .find(|r| (float(&r[0]) - x).abs() < 1e-12)
            .unwrap();
        float(&r[1])
    };
    assert!((at(0.5) - 0.1).abs() < 1e-6);
    assert_eq!(at(1.0), 1.0);
}

#[test]
fn constants_flag_overrides_the_rates() {
    let dir = TempDir::new().unwrap();
    let out = run(&["steady", "--constants", "2,1,1,2,3"], "", dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("out/steady.csv")).unwrap();
    assert!(text.contains("# case: TwoSingularities"));
}

#[test]
fn without_node_addition_the_steady_state_is_one() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        &["steady"],
        "[rates]\nomega_p = 1.0\nl_d = 1.0\nl_p = 1.0\nn_d = 1.0\nm = 3\n",
        dir.path(),
    );
    for r in rows(&out.join("steady.csv")) {
        assert_eq!(float(&r[1]), 1.0);
    }
}

#[test]
fn unbounded_growth_exits_with_no_steady_state() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["steady"],
        "[rates]\nl_r = 1.0\nomega_r = 1.0\n",
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no steady state"));
}

#[test]
fn master_equation_tracks_the_closed_form_moment() {
    let dir = TempDir::new().unwrap();
    let out = ok(&["ode"], MIXED_SHORT, dir.path());
    for r in rows(&out.join("moments.csv")) {
        assert!((float(&r[1]) - 1.0).abs() < 1e-6);
        assert!((float(&r[2]) - float(&r[3])).abs() < 1e-4);
    }
}

fn fit_models(json: &serde_json::Value) -> Vec<String> {
    json["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["sup_fit"]["model"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn compare_separates_exponential_and_algebraic_decay() {
    let dir = TempDir::new().unwrap();
    let out = ok(&["compare"], &project_config("mixed.toml"), dir.path());
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit_models(&fit), ["exponential"]);
    assert!(fit["runs"][0]["oracle_max_deviation"].as_f64().unwrap() < 1e-6);

    let dir = TempDir::new().unwrap();
    let out = ok(
        &["compare"],
        &project_config("no_node_addition.toml"),
        dir.path(),
    );
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit_models(&fit), ["algebraic"]);
}

#[test]
fn compare_reports_every_initial_condition() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        &["compare"],
        &project_config("random_only.toml"),
        dir.path(),
    );
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let runs = fit["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    for run in &runs[..2] {
        assert!(run["bend_time"].as_f64().is_some());
    }
    let table = rows(&out.join("norms.csv"));
    assert!(table.iter().any(|r| r[0] == "2"));
}

#[test]
fn static_network_matches_the_master_equation_exactly() {
    let dir = TempDir::new().unwrap();
    let config = "[initial]\nkind = \"monomial\"\ndegree = 2\n[mc]\nnodes = 200\nreplicas = 2\n";
    let out = ok(&["mc"], config, dir.path());
    for r in rows(&out.join("mc.csv")) {
        assert_eq!(float(&r[5]), 0.0);
    }
}

#[test]
fn rewiring_keeps_the_mean_degree() {
    let dir = TempDir::new().unwrap();
    let config = "[rates]\nomega_r = 1.0\nomega_p = 1.0\n[initial]\nkind = \"monomial\"\ndegree = 4\n[mc]\nnodes = 300\nreplicas = 3\n";
    let out = ok(&["mc"], config, dir.path());
    let table = rows(&out.join("mc.csv"));
    let first = float(&table[0][6]);
    for r in &table {
        assert!((float(&r[6]) - first).abs() < 1e-12);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let config = format!("{MIXED_SHORT}\n[mc]\nnodes = 300\nreplicas = 3\nseed = 9\n");
    let read = |cmd: &str, file: &str| {
        let dir = TempDir::new().unwrap();
        let out = ok(&[cmd], &config, dir.path());
        fs::read(out.join(file)).unwrap()
    };
    assert_eq!(read("mc", "mc.csv"), read("mc", "mc.csv"));
    assert_eq!(read("solve", "field.csv"), read("solve", "field.csv"));
}

#[test]
fn seed_flag_changes_the_digest() {
    let dir = TempDir::new().unwrap();
    let a = ok(&["steady", "--seed", "1"], "", dir.path());
    let first = fs::read_to_string(a.join("steady.csv")).unwrap();
    let b = ok(&["steady", "--seed", "2"], "", dir.path());
    let second = fs::read_to_string(b.join("steady.csv")).unwrap();
    assert_ne!(first.lines().next(), second.lines().next());
}

#[test]
fn usage_errors_exit_with_bad_input() {
    let dir = TempDir::new().unwrap();
    let out = run(&["steady", "--constants", "1,2"], "", dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["steady", "--tol", "fast"], "", dir.path());
    assert_eq!(out.status.code(), Some(1));
}

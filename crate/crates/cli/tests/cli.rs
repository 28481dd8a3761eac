use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn thetacover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thetacover"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(dir: &Path, name: &str, sizes: &str, p: &str) -> String {
    let path = dir.join(name);
    let path = path.to_str().unwrap().to_string();
    let o = thetacover(&["generate", "--sizes", sizes, "--p", p, "--seed", "3", "--out", &path]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn theta_on_disjoint_cliques_prints_k() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "g.json", "3,4,2", "0");
    let o = thetacover(&["theta", &g]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let theta: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("theta = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((theta - 3.0).abs() < 1e-5, "{text}");
    assert!(text.contains("recovery = strong"), "{text}");
}

#[test]
fn json_output_and_out_file_agree() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "g.json", "2,2", "0");
    let res = dir.path().join("theta.json");
    let o = thetacover(&["theta", &g, "--json", "--out", res.to_str().unwrap()]);
    assert!(o.status.success());
    let printed: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let written: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res).unwrap()).unwrap();
    assert_eq!(printed, written);
    assert_eq!(printed["k"], 2);
}

#[test]
fn certify_on_complete_instance_is_not_certified_but_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "g.json", "3,3", "1");
    let o = thetacover(&["certify", &g]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: NotCertified"), "{}", stdout(&o));

    let g = generate(dir.path(), "h.json", "3,3", "0");
    let dump = dir.path().join("dump");
    let o = thetacover(&["certify", &g, "--dump", dump.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("verdict: Certified"), "{}", stdout(&o));
    let z = fs::read_to_string(dump.join("z_prime.csv")).unwrap();
    assert_eq!(z.lines().count(), 6);
    assert_eq!(z, fs::read_to_string(dump.join("z_star.csv")).unwrap());
}

#[test]
fn cover_reports_exact_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c5.json");
    fs::write(&path, r#"{"n":5,"edges":[[0,1],[1,2],[2,3],[3,4],[0,4]]}"#).unwrap();
    let o = thetacover(&["cover", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("chi_bar = 3\n") && text.contains("alpha = 2\n"), "{text}");
}

#[test]
fn baselines_recover_disjoint_cliques() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "g.json", "4,4", "0");
    for method in ["kdc", "schurhorn", "deconvolution"] {
        let o = thetacover(&["baseline", &g, "--method", method]);
        assert!(o.status.success(), "{method}");
        assert!(stdout(&o).contains("success = true"), "{method}: {}", stdout(&o));
    }
}

#[test]
fn experiment_comparison_writes_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cmp.toml");
    fs::write(
        &cfg,
        "kind = \"comparison\"\nsizes = [3, 3]\ntrials = 1\nlambda_grid = [0.5]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = thetacover(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 21 * 5);
    let trials = fs::read_to_string(out.join("trials.csv")).unwrap();
    assert!(trials.starts_with("schema,"));
    assert!(trials.lines().nth(1).unwrap().starts_with("v1,comparison,"));
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["jobs"], 2);
}

#[test]
fn flags_override_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ilp.toml");
    fs::write(&cfg, "kind = \"ilp_gap\"\nsizes = [2, 2]\np_grid = [0.5]\ntrials = 4\nseed = 1\n").unwrap();
    let out = dir.path().join("out");
    let o = thetacover(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "2",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!((run["config"]["trials"].as_u64(), run["config"]["seed"].as_u64()), (Some(2), Some(9)));
}

#[test]
fn exit_codes() {
    assert_eq!(thetacover(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(thetacover(&["theta", "--bogus", "x"]).status.code(), Some(2));
    assert_eq!(thetacover(&["theta", "/nonexistent/g.json"]).status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "kind = \"comparison\"\ntrails = 3\n").unwrap();
    let o = thetacover(&["experiment", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let g = generate(dir.path(), "g.json", "3,3", "0.5");
    let o = thetacover(&["certify", &generate(dir.path(), "np.json", "1", "0")]);
    assert_eq!(o.status.code(), Some(0));
    let nopart = dir.path().join("nopart.json");
    fs::write(&nopart, r#"{"n":2,"edges":[[0,1]]}"#).unwrap();
    assert_eq!(thetacover(&["certify", nopart.to_str().unwrap()]).status.code(), Some(2));

    let o = thetacover(&["theta", &g, "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let o = thetacover(&["theta", &g, "--max-iter", "1", "--strict"]);
    assert_eq!(o.status.code(), Some(4));
}

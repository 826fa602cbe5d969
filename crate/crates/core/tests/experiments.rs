use edgecloud::experiments::*;

fn ctx(seed: u64) -> RunContext {
    RunContext::new(std::env::temp_dir(), seed)
}

fn run(kind: Experiment, text: &str, sweep: Option<&str>) -> Result<ExperimentOutput, ExperimentError> {
    let sweep = sweep.map(Sweep::parse).transpose()?;
    run_experiment(kind, text, &ctx(3), sweep.as_ref())
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

const SMALL_GRAPH: &str = r#"{"two_cluster": {"sizes": [6, 6], "p_in": 0.6, "bridges": 2}}"#;

#[test]
fn centrality_flags_the_bridges_first() {
    let out = run(Experiment::Centrality, "{}", None).unwrap();
    let t = rows(&out.csv);
    assert_eq!(t[0], ["i", "j", "p_K", "bridge"]);
    assert!(t[1..5].iter().all(|r| r[3] == "1"), "{}", out.csv);
    let scores: Vec<f64> = t[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn centrality_on_an_inline_path() {
    let text = r#"{"graph": {"n": 4, "edges": [[0, 1, 1.0], [1, 2, 1.0], [2, 3, 1.0]]}}"#;
    let t = rows(&run(Experiment::Centrality, text, None).unwrap().csv);
    assert_eq!(t.len(), 4);
    assert_eq!(t[1][..2], ["1", "2"]);
    assert_eq!(t[1][3], "");
}

#[test]
fn degenerate_connectivity_is_infeasible() {
    let cycle = r#"{"graph": {"n": 4, "edges": [[0, 1, 1.0], [1, 2, 1.0], [2, 3, 1.0], [0, 3, 1.0]]}}"#;
    let err = run(Experiment::Centrality, cycle, None).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn reliability_rows_and_ordering() {
    let text = format!(r#"{{"graph": {SMALL_GRAPH}, "budgets": [40, 80]}}"#);
    let out = run(Experiment::Reliability, &text, None).unwrap();
    let t = rows(&out.csv);
    assert_eq!(t[0], ["budget", "optimized_norm_perturbation", "uniform_norm_perturbation", "n", "status"]);
    assert_eq!(t.len(), 1 + 2 * 2);
    for r in &t[1..] {
        let (opt, uni): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(opt <= uni, "{r:?}");
        assert_eq!(r[4], "ok");
    }
    assert!(out.summary.unwrap().starts_with("edges="));
}

#[test]
fn reliability_marks_budgets_below_the_floor() {
    let text = format!(r#"{{"graph": {SMALL_GRAPH}, "budgets": [1, 80], "n": [1]}}"#);
    let t = rows(&run(Experiment::Reliability, &text, None).unwrap().csv);
    assert_eq!(t[1][4], "infeasible");
    assert_eq!(t[1][1], "NaN");
    assert_eq!(t[2][4], "ok");
    let text = format!(r#"{{"graph": {SMALL_GRAPH}, "budgets": [1], "n": [1]}}"#);
    assert_eq!(run(Experiment::Reliability, &text, None).unwrap_err().exit_code(), 3);
}

#[test]
fn disconnected_graph_is_infeasible() {
    let text = r#"{"graph": {"n": 4, "edges": [[0, 1, 1.0], [2, 3, 1.0]]}, "budgets": [10]}"#;
    assert_eq!(run(Experiment::Reliability, text, None).unwrap_err().exit_code(), 3);
}

#[test]
fn axis_sweep_replaces_the_list() {
    let text = format!(r#"{{"graph": {SMALL_GRAPH}, "n": [1]}}"#);
    let t = rows(&run(Experiment::Reliability, &text, Some("budget=50,60,70")).unwrap().csv);
    let budgets: Vec<&str> = t[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(budgets, ["50", "60", "70"]);
}

#[test]
fn scalar_sweep_prepends_a_column() {
    let out = run(Experiment::Centrality, "{}", Some("K=2,3")).unwrap();
    let t = rows(&out.csv);
    assert_eq!(t[0], ["K", "i", "j", "p_K", "bridge"]);
    let edges = (t.len() - 1) / 2;
    assert!(t[1..=edges].iter().all(|r| r[0] == "2"));
    assert!(t[edges + 1..].iter().all(|r| r[0] == "3"));
}

#[test]
fn nested_sweep_addresses_inner_fields() {
    let out = run(Experiment::Centrality, "{}", Some("graph.two_cluster.bridges=1,2")).unwrap();
    let t = rows(&out.csv);
    assert_eq!(t[0][0], "graph.two_cluster.bridges");
    let flagged = |v: &str| t[1..].iter().filter(|r| r[0] == v && r[4] == "1").count();
    assert_eq!((flagged("1"), flagged("2")), (1, 2));
}

#[test]
fn schema_errors() {
    let cases: [(Experiment, &str, Option<&str>); 6] = [
        (Experiment::Centrality, "{\"bogus\": 1}", None),
        (Experiment::Centrality, "not json", None),
        (Experiment::Centrality, "{}", Some("nope=1,2")),
        (Experiment::Reliability, "{\"budgets\": []}", None),
        (Experiment::Rem, "{\"grid\": \"missing.json\"}", None),
        (Experiment::Centrality, "{\"graph\": \"no_such_graph.json\"}", None),
    ];
    for (kind, text, sweep) in cases {
        let err = run(kind, text, sweep).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
    }
    assert_eq!(Sweep::parse("K").unwrap_err().exit_code(), 2);
    assert_eq!("bogus".parse::<Experiment>().unwrap_err().exit_code(), 2);
}

#[test]
fn graph_files_resolve_against_the_scenario_dir() {
    let dir = std::env::temp_dir().join("edgecloud_graph_ref");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("g.json"), r#"{"n": 3, "edges": [[0, 1, 1.0], [1, 2, 2.0]]}"#).unwrap();
    let out = run_experiment(Experiment::Centrality, r#"{"graph": "g.json"}"#, &RunContext::new(&dir, 0), None).unwrap();
    assert_eq!(rows(&out.csv).len(), 3);
}

#[test]
fn rem_synthetic_recovers_the_map() {
    let text = r#"{"K": 5, "synthetic": {"nodes": 120}, "samples": 40}"#;
    let out = run(Experiment::Rem, text, None).unwrap();
    let t = rows(&out.csv);
    assert_eq!(t[0], ["vertex", "x_true", "x_hat"]);
    assert_eq!(t.len(), 121);
    let summary = out.summary.unwrap();
    let nmse: f64 = summary.split_whitespace().next().unwrap().trim_start_matches("nmse=").parse().unwrap();
    if summary.contains("recoverable=true") {
        assert!(nmse <= 1e-6, "{summary}");
    }
}

#[test]
fn offload_small_sweep() {
    let text = r#"{"L": [0.8, 1.2], "instances": 2}"#;
    let t = rows(&run(Experiment::Offload, text, None).unwrap().csv);
    assert_eq!(t[0], ["L", "psca_power", "exhaustive_power", "snr_joint_power", "snr_disjoint_power", "infeasible_count"]);
    assert_eq!(t.len(), 3);
    for r in &t[1..] {
        let v: Vec<f64> = r[1..5].iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[1] <= v[0] * (1.0 + 1e-9) && v[2] <= v[3] * (1.0 + 1e-9), "{r:?}");
    }
    let loose: f64 = t[2][1].parse().unwrap();
    let tight: f64 = t[1][1].parse().unwrap();
    assert!(loose <= tight);
}

#[test]
fn cache_small_sweep() {
    let text = r#"{"arrival_rates": [1.0], "D": [1, 2], "instances": 2, "nodes": 6, "T": 10}"#;
    let t = rows(&run(Experiment::Cache, text, None).unwrap().csv);
    assert_eq!(t[0], ["arrival_rate", "D", "lp_cost_mean", "sp_cost_mean"]);
    assert_eq!(t.len(), 3);
    for r in &t[1..] {
        let (lp, sp): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!(lp <= sp + 1e-9);
    }
}

#[test]
fn seeds_drive_the_draws() {
    let text = r#"{"L": [1.0], "instances": 2, "exhaustive": false}"#;
    let a = run_experiment(Experiment::Offload, text, &ctx(1), None).unwrap();
    let b = run_experiment(Experiment::Offload, text, &ctx(1), None).unwrap();
    let c = run_experiment(Experiment::Offload, text, &ctx(2), None).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.csv, c.csv);
}

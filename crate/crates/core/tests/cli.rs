mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use backhaul::net::Network;
use common::chain;

fn backhaul(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_backhaul"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn chain_file(dir: &Path) -> String {
    let path = dir.join("chain.json");
    chain(3).save(&path).unwrap();
    path.to_str().unwrap().to_string()
}

fn solve_chain(dir: &Path, net: &str, extra: &[&str]) -> Output {
    let mut args = vec!["solve", "--network", net, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    backhaul(&args)
}

#[test]
fn chain_solve_matches_golden_report() {
    let tmp = tempfile::tempdir().unwrap();
    let net = chain_file(tmp.path());
    let out_dir = tmp.path().join("out");
    ok(&solve_chain(&out_dir, &net, &["--formulation", "comb-dl"]));
    let nodes = fs::read_to_string(out_dir.join("nodes.csv")).unwrap();
    assert_eq!(nodes, "node,d,u\n1,1.153143873,0.000000000\n2,1.153143873,0.000000000\n");
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert!((run["objective"].as_f64().unwrap() - 1.153143873).abs() < 1e-9);
    assert!(run["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(run["formulation"], "comb-dl");
    let links = fs::read_to_string(out_dir.join("links.csv")).unwrap();
    assert!(links.starts_with("link,tx,rx,capacity,utilization\n"));
    assert!(links.contains(",0,1,2.306287746,1.000000000\n"), "{links}");
    assert!(links.contains(",1,2,1.153143873,1.000000000\n"), "{links}");
}

#[test]
fn scalable_chain_with_two_slots_reaches_the_same_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let net = chain_file(tmp.path());
    let out_dir = tmp.path().join("out");
    ok(&solve_chain(&out_dir, &net, &["--formulation", "scal-dl", "--slots", "2"]));
    let nodes = fs::read_to_string(out_dir.join("nodes.csv")).unwrap();
    assert_eq!(nodes, "node,d,u\n1,1.153143873,0.000000000\n2,1.153143873,0.000000000\n");
}

#[test]
fn same_config_twice_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 5\n[network]\nkind = \"suburban\"\n[network.suburban]\nnodes = 12\n\
         [model]\nslots = 3\n[solver]\ntime_limit = 30.0\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        ok(&backhaul(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]));
        let read = |f: &str| fs::read_to_string(dir.join(f)).unwrap();
        outputs.push((read("nodes.csv"), read("links.csv"), read("schedule.json")));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn generate_writes_the_configured_networks() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let out = backhaul(&["generate", "--out", dir]);
    ok(&out);
    let urban = Network::load(&tmp.path().join("network.json")).unwrap();
    assert_eq!(urban.num_nodes(), 48);
    assert_eq!(urban.gateways().len(), 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("nodes 48"));

    let cfg = tmp.path().join("suburban.toml");
    fs::write(&cfg, "[network]\nkind = \"suburban\"\n").unwrap();
    ok(&backhaul(&["generate", "--config", cfg.to_str().unwrap(), "--out", dir]));
    let suburban = Network::load(&tmp.path().join("network.json")).unwrap();
    assert_eq!(suburban.num_nodes(), 100);
    assert!((9..=10).contains(&suburban.gateways().len()));
}

#[test]
fn bad_config_exits_with_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[network]\nkind = \"suburban\"\n[network.suburban]\ngateway_fraction = 0.0\n")
        .unwrap();
    let out = backhaul(&["generate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gateway"));

    fs::write(&cfg, "[model]\nslotz = 3\n").unwrap();
    let out = backhaul(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = backhaul(&["solve", "--formulation", "comb-xx"]);
    assert_eq!(out.status.code(), Some(1));

    let out = backhaul(&["solve", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn clustering_a_single_gateway_network_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let net = chain_file(tmp.path());
    let cfg = tmp.path().join("chain.toml");
    fs::write(&cfg, format!("[network]\nkind = \"file\"\npath = {net:?}\n")).unwrap();
    let out = backhaul(&["cluster-compare", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn truncation_sweep_matches_golden_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let net = chain_file(tmp.path());
    let cfg = tmp.path().join("chain.toml");
    fs::write(&cfg, format!("[network]\nkind = \"file\"\npath = {net:?}\n")).unwrap();
    let dir = tmp.path().join("out");
    ok(&backhaul(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--axis",
        "truncation",
        "--values",
        "2,1,3",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(dir.join("sweep_truncation.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["axis", "value", "objective", "relative", "bound", "gap", "max_min", "degradation", "runtime_s", "status", "error"]
    );
    // Runtime varies between runs, so it is left out of the comparison. The
    // model objective uses pessimistic rates and sits a little below the
    // exact max-min, which for two or more slots is a third of log2(11).
    let got: Vec<Vec<String>> = rows
        .records()
        .map(|r| {
            let r = r.unwrap();
            [0, 1, 6, 7, 9, 10].iter().map(|&i| r[i].to_string()).collect()
        })
        .collect();
    let row = |v: &str, mm: &str| -> Vec<String> {
        ["truncation", v, mm, "", "Optimal", ""].iter().map(|s| s.to_string()).collect()
    };
    // One slot serves a single link, so the far node gets nothing.
    assert_eq!(
        got,
        vec![
            row("1", "0.000000000"),
            row("2", "1.153143873"),
            row("3", "1.153143873"),
        ]
    );
    let objectives: Vec<f64> = csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap()[2].parse().unwrap())
        .collect();
    assert_eq!(objectives[0], 0.0);
    assert!(objectives[1] > 0.99 * 1.153143873 && objectives[1] <= 1.153143873);
    assert!(objectives[2] >= objectives[1]);
}

#[test]
fn export_mps_writes_model_and_map() {
    let tmp = tempfile::tempdir().unwrap();
    let net = chain_file(tmp.path());
    let out_dir = tmp.path().join("out");
    ok(&solve_chain(&out_dir, &net, &["--formulation", "scal-dl", "--slots", "2", "--export-mps"]));
    let mps = fs::read_to_string(out_dir.join("model.mps")).unwrap();
    assert!(mps.contains("ROWS") && mps.contains("COLUMNS") && mps.ends_with("ENDATA\n"));
    let map: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("model_map.json")).unwrap()).unwrap();
    assert_eq!(map["kind"], "scalable");
    assert_eq!(map["slots"], 2);
}

#[test]
fn neighborhoods_are_printed() {
    let tmp = tempfile::tempdir().unwrap();
    let net = chain_file(tmp.path());
    let cfg = tmp.path().join("chain.toml");
    fs::write(&cfg, format!("[network]\nkind = \"file\"\npath = {net:?}\n")).unwrap();
    let out = backhaul(&["neighborhoods", "--config", cfg.to_str().unwrap()]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("threshold 3 dB below noise"));
    assert_eq!(text.lines().filter(|l| l.starts_with("link ")).count(), 4);
}

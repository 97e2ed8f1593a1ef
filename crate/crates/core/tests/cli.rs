use std::path::Path;
use std::process::Command;

use hsm_admm::harness::output::{read_trace, RunSummary, TRACE_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hsm-admm"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_writes_trace_summary_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            "loss = least_squares\nagents = 4\ndim = 5\nsamples_per_agent = 20\nl1 = 0\nalpha = 0\nbatch = full\nrounds = 300\noutput = {}\n",
            out.display()
        ),
    );
    let status = bin().args(["run", "--config"]).arg(&cfg).status().unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
    let rows = read_trace(&out.join("trace.csv")).unwrap();
    let summary: RunSummary =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let last = summary.last.unwrap();
    assert_eq!(last.k, 300);
    assert_eq!(last.stat_total.to_bits(), rows.last().unwrap().stat_total.to_bits());
    assert_eq!(last.scalars_tx, rows.last().unwrap().scalars_tx);
    assert_eq!(summary.total_scalars, last.scalars_tx);
    for f in ["stationarity.svg", "residuals.svg", "stationarity_vs_scalars.svg"] {
        let svg = std::fs::read_to_string(out.join(f)).unwrap();
        assert!(svg.starts_with("<svg"));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin().args(["run", "--config", "/nonexistent/run.cfg"]).status().unwrap();
    assert_eq!(missing.code(), Some(2));

    let unknown = write_config(dir.path(), "speed = 3\n");
    assert_eq!(bin().args(["run", "--config"]).arg(&unknown).status().unwrap().code(), Some(2));

    let out = dir.path().join("div");
    let diverging = write_config(
        dir.path(),
        &format!("agents = 4\ndim = 3\nsamples_per_agent = 10\nc_eta = 0.05\ndivergence_guard = 1e6\nrounds = 500\noutput = {}\n", out.display()),
    );
    let status = bin().args(["run", "--config"]).arg(&diverging).status().unwrap();
    assert_eq!(status.code(), Some(3));
    let summary: RunSummary =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.divergence.is_some());
}

#[test]
fn sweep_and_plot_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let cfg = write_config(dir.path(), "agents = 6\ndim = 3\nsamples_per_agent = 10\nrounds = 50\n");
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args([
            "--topologies",
            "ring,star",
            "--algos",
            "hsm_admm,uniform_admm",
            "--constants",
            "1,1,2;2,1,4",
            "--seeds",
            "2",
            "--output",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let cells: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep_summary.json")).unwrap()).unwrap();
    assert_eq!(cells.len(), 16);
    let first = out.join("ring_hsm_admm_r1-a1-e2_s0");
    assert!(first.join("config.txt").exists());

    let plots = dir.path().join("plots");
    let status = bin()
        .arg("plot")
        .arg(first.join("trace.csv"))
        .arg(out.join("star_uniform_admm_r2-a1-e4_s1/trace.csv"))
        .arg("--output")
        .arg(&plots)
        .status()
        .unwrap();
    assert!(status.success());
    let svg = std::fs::read_to_string(plots.join("stationarity.svg")).unwrap();
    assert!(svg.contains("ring_hsm_admm_r1-a1-e2_s0") && svg.contains("iteration k"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            hsm_admm::harness::config::RunConfig::from_file(&path).unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

//! Grid sweeps over topology × algorithm × constants × seed.
//!
//! Each cell writes its own `config.txt`, `trace.csv` and `summary.json`
//! into `<output>/<topology>_<algorithm>_<constants>_s<seed>/`; cells run in
//! parallel and `sweep_summary.json` lists them in grid order.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, TopologyKind};
use super::feasibility_of;
use super::output::{write_json, write_trace, Divergence, RunSummary};
use crate::admm::Schedules;
use crate::simulator::{run, Algorithm, RunError};
use crate::Error;

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub topologies: Vec<TopologyKind>,
    pub algorithms: Vec<Algorithm>,
    pub constants: Vec<Schedules>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub name: String,
    pub topology: String,
    pub algorithm: Algorithm,
    pub constants: Schedules,
    pub seed: u64,
    pub summary: RunSummary,
}

pub fn cell_name(topology: TopologyKind, algorithm: Algorithm, c: &Schedules, seed: u64) -> String {
    format!("{}_{}_r{}-a{}-e{}_s{}", topology.name(), algorithm.name(), c.c_rho, c.c_a, c.c_eta, seed)
}

/// Parse `c_rho,c_a,c_eta;c_rho,c_a,c_eta;…`.
pub fn parse_constants(text: &str) -> Result<Vec<Schedules>, String> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|triple| {
            let v: Vec<f64> = triple
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{triple:?}: {e}")))
                .collect::<Result<_, _>>()?;
            match v[..] {
                [c_rho, c_a, c_eta] => Ok(Schedules { c_rho, c_a, c_eta }),
                _ => Err(format!("{triple:?}: expected c_rho,c_a,c_eta")),
            }
        })
        .collect()
}

pub fn run_sweep(base: &RunConfig, spec: &SweepSpec) -> Result<Vec<CellResult>, Error> {
    let mut cells = Vec::new();
    for &t in &spec.topologies {
        for &a in &spec.algorithms {
            for c in &spec.constants {
                for &s in &spec.seeds {
                    cells.push((t, a, *c, s));
                }
            }
        }
    }
    std::fs::create_dir_all(&base.output)?;
    let prob = base.build_problem()?;
    let results: Vec<Result<CellResult, Error>> = cells
        .par_iter()
        .map(|&(topology, algorithm, constants, seed)| {
            let mut cfg = base.clone();
            cfg.topology.kind = topology;
            cfg.sim.algorithm = algorithm;
            cfg.sim.schedules = constants;
            cfg.sim.seed = seed;
            let name = cell_name(topology, algorithm, &constants, seed);
            let dir: PathBuf = base.output.join(&name);
            cfg.output = dir.clone();
            cfg.replicas = 1;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("config.txt"), cfg.to_text())?;
            let graph = cfg.build_graph(prob.agents())?;
            let feas = feasibility_of(&cfg, &graph, prob.smoothness());
            let (trace, divergence) = match run(&cfg.sim, &prob, &graph, &mut ()) {
                Ok(t) => (t, None),
                Err(RunError::NumericalDivergence { round, magnitude, trace }) => {
                    (*trace, Some(Divergence { round, magnitude }))
                }
                Err(e) => return Err(e.into()),
            };
            let summary = RunSummary::from_trace(&trace, seed, feas, divergence);
            write_trace(&dir.join("trace.csv"), &trace.rows)?;
            write_json(&dir.join("summary.json"), &summary)?;
            Ok(CellResult { name, topology: topology.name().into(), algorithm, constants, seed, summary })
        })
        .collect();
    let results: Vec<CellResult> = results.into_iter().collect::<Result<_, _>>()?;
    write_json(&base.output.join("sweep_summary.json"), &results)?;
    Ok(results)
}

//! Synthetic desk datasets and the CSV + manifest file format.

use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CompositeProblem, LocalDataset, LossKind, ProblemError, Regularizer};
use crate::linalg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub agents: usize,
    pub dim: usize,
    pub samples_per_agent: usize,
    pub loss: LossKind,
    pub regularizer: Regularizer,
    pub alpha: f64,
    /// Standard deviation of each feature entry.
    pub feature_scale: f64,
    /// Label noise scale (Gaussian, or Cauchy for the robust loss).
    pub noise: f64,
    /// Nonzeros in the planted ground truth.
    pub sparsity: usize,
    /// Sort samples by label before splitting them across agents.
    pub non_iid: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            agents: 8,
            dim: 20,
            samples_per_agent: 150,
            loss: LossKind::Logistic,
            regularizer: Regularizer::L1 { weight: 0.01 },
            alpha: 0.1,
            feature_scale: 1.0,
            noise: 0.1,
            sparsity: 5,
            non_iid: false,
            seed: 0,
        }
    }
}

/// Gaussian features, a planted sparse truth `x*`, and labels derived from `aᵀx*`.
pub fn synthetic(spec: &SyntheticSpec) -> Result<CompositeProblem, ProblemError> {
    if spec.agents == 0 || spec.dim == 0 || spec.samples_per_agent == 0 {
        return Err(ProblemError::Invalid("agents, dim and samples_per_agent must be positive".into()));
    }
    if !(spec.feature_scale >= 0.0 && spec.noise >= 0.0) {
        return Err(ProblemError::Invalid("feature_scale and noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.dim;
    let mut truth = vec![0.0; p];
    for j in sample(&mut rng, p, spec.sparsity.min(p)) {
        truth[j] = StandardNormal.sample(&mut rng);
    }

    let total = spec.agents * spec.samples_per_agent;
    let mut rows = Vec::with_capacity(total);
    for _ in 0..total {
        let a: Vec<f64> = (0..p).map(|_| spec.feature_scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let z = linalg::dot(&a, &truth);
        let b = match spec.loss {
            LossKind::LeastSquares => z + spec.noise * rng.sample::<f64, _>(StandardNormal),
            LossKind::NonconvexRobust => z + spec.noise * Cauchy::new(0.0, 1.0).expect("unit scale").sample(&mut rng),
            LossKind::Logistic => {
                let t: f64 = z + spec.noise * rng.sample::<f64, _>(StandardNormal);
                if t >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        rows.push((a, b));
    }
    if spec.non_iid {
        rows.sort_by(|x, y| x.1.total_cmp(&y.1));
    }

    let data = rows
        .chunks(spec.samples_per_agent)
        .map(|chunk| {
            let features = chunk.iter().flat_map(|(a, _)| a.iter().copied()).collect();
            let labels = chunk.iter().map(|(_, b)| *b).collect();
            LocalDataset::new(p, features, labels)
        })
        .collect::<Result<Vec<_>, _>>()?;
    CompositeProblem::new(spec.loss, spec.regularizer, spec.alpha, data)
}

/// JSON manifest mapping agents to half-open row ranges of a CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// CSV path, relative to the manifest's directory.
    pub data: PathBuf,
    pub dim: usize,
    pub agents: Vec<(usize, usize)>,
}

/// Write `data.csv` (features then label, no header) and `manifest.json` into `dir`.
pub fn save_dataset(dir: &Path, datasets: &[LocalDataset]) -> Result<PathBuf, ProblemError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("data.csv");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&csv_path)
        .map_err(|e| ProblemError::Dataset(e.to_string()))?;
    let mut ranges = Vec::with_capacity(datasets.len());
    let mut start = 0;
    for d in datasets {
        for s in 0..d.len() {
            let record: Vec<String> =
                d.row(s).iter().chain(std::iter::once(&d.label(s))).map(|v| v.to_string()).collect();
            w.write_record(&record).map_err(|e| ProblemError::Dataset(e.to_string()))?;
        }
        ranges.push((start, start + d.len()));
        start += d.len();
    }
    w.flush()?;
    let manifest = DatasetManifest {
        data: PathBuf::from("data.csv"),
        dim: datasets.first().map_or(0, LocalDataset::dim),
        agents: ranges,
    };
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| ProblemError::Dataset(e.to_string()))?;
    std::fs::write(&manifest_path, text)?;
    Ok(manifest_path)
}

/// Read a manifest and the CSV it points to.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<LocalDataset>, ProblemError> {
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| ProblemError::Dataset(format!("manifest: {e}")))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(base.join(&manifest.data))
        .map_err(|e| ProblemError::Dataset(e.to_string()))?;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ProblemError::Dataset(e.to_string()))?;
        if record.len() != manifest.dim + 1 {
            return Err(ProblemError::Dataset(format!(
                "row {}: expected {} fields, found {}",
                line + 1,
                manifest.dim + 1,
                record.len()
            )));
        }
        let values = record
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ProblemError::Dataset(format!("row {}: {e}", line + 1)))?;
        let (a, b) = values.split_at(manifest.dim);
        rows.push((a.to_vec(), b[0]));
    }
    manifest
        .agents
        .iter()
        .enumerate()
        .map(|(i, &(start, end))| {
            if start >= end || end > rows.len() {
                return Err(ProblemError::Dataset(format!(
                    "agent {i}: range {start}..{end} invalid for {} rows",
                    rows.len()
                )));
            }
            let chunk = &rows[start..end];
            LocalDataset::new(
                manifest.dim,
                chunk.iter().flat_map(|(a, _)| a.iter().copied()).collect(),
                chunk.iter().map(|(_, b)| *b).collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec { seed: 3, ..SyntheticSpec::default() };
        let a = synthetic(&spec).unwrap();
        let b = synthetic(&spec).unwrap();
        assert_eq!(a.datasets(), b.datasets());
        assert_eq!(a.agents(), 8);
        assert_eq!(a.dataset(0).len(), 150);
    }

    #[test]
    fn non_iid_creates_heterogeneity() {
        let spec = SyntheticSpec { non_iid: true, seed: 1, ..SyntheticSpec::default() };
        let prob = synthetic(&spec).unwrap();
        let x = vec![0.0; prob.dim()];
        let mean = prob.global_mean_gradient(&x);
        let spread: f64 = (0..prob.agents()).map(|i| linalg::dist_sq(&prob.full_gradient(i, &x), &mean)).sum();
        assert!(spread > 0.0);
        // label sorting puts the negative class first
        assert!(prob.dataset(0).labels().iter().all(|&b| b == -1.0));
        assert!(prob.dataset(7).labels().iter().all(|&b| b == 1.0));
    }

    #[test]
    fn dataset_roundtrip() {
        let spec = SyntheticSpec { agents: 3, dim: 4, samples_per_agent: 7, seed: 2, ..SyntheticSpec::default() };
        let prob = synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(dir.path(), prob.datasets()).unwrap();
        let loaded = load_dataset(&manifest).unwrap();
        assert_eq!(loaded, prob.datasets());
    }

    #[test]
    fn bad_manifest_range() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("data.csv"), "1,2,1\n").unwrap();
        std::fs::write(dir.path().join("manifest.json"), r#"{"data":"data.csv","dim":2,"agents":[[0,2]]}"#).unwrap();
        assert!(matches!(load_dataset(&dir.path().join("manifest.json")), Err(ProblemError::Dataset(_))));
    }
}

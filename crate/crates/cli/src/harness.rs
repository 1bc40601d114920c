//! Experiment orchestration: the sigma × sampler × replication grid, metric
//! CSV emission, and the replayable manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use jumpscan_core::dataset::GroundTruth;
use jumpscan_core::evaluation::{compute_mse, jump_band, MetricsReport, ReportContext};
use jumpscan_core::sampler::{run_sequential_design, DesignRun, SamplerStrategy};
use jumpscan_core::seed;
use jumpscan_core::smoother::{estimate_field, EstimateField, SmootherConfig};
use jumpscan_core::spatial::SpatialIndex;

use crate::config::ExperimentConfig;

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const METRICS_HEADER: &str =
    "sampler,sigma,replication,stage,j_mse,c_mse,root_j_mse,root_c_mse,n_jb,n_cont,cell_seed";

/// One experiment cell: everything is derived from `(sigma, sampler, rep)`.
#[derive(Clone, Debug)]
struct Cell {
    sigma_idx: usize,
    sampler_idx: usize,
    rep: usize,
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub sampler: SamplerStrategy,
    pub sigma: f64,
    pub rep: usize,
    pub seed: u64,
    pub result: std::result::Result<MetricsReport, String>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub metrics_path: PathBuf,
    pub manifest_path: PathBuf,
    pub rows: usize,
    pub failures: usize,
}

/// Estimate the surface at every unsampled grid cell of a finished run
/// (threaded via the core's `parallel` feature; output identical to a
/// sequential pass).
pub fn reconstruct_unsampled(
    truth: &GroundTruth,
    run: &DesignRun,
    smoother: &SmootherConfig,
) -> Result<EstimateField> {
    let unsampled: Vec<Vec<f64>> = (0..truth.grid.len())
        .filter(|&i| !run.sampled[i])
        .map(|i| truth.grid.coords(i))
        .collect();
    let index = SpatialIndex::from_dataset(&run.dataset)
        .map_err(|e| anyhow::anyhow!("building index: {e}"))?;
    estimate_field(&unsampled, &run.dataset, &index, smoother)
        .map_err(|e| anyhow::anyhow!("estimating field: {e}"))
}

/// Replication-indexed cell seed. The sampler is deliberately absent so all
/// strategies of one replication share the stage-1 design and noise stream
/// (paired comparisons).
pub fn cell_seed(master: u64, sigma_idx: usize, rep: usize) -> u64 {
    seed::derive(master, &[sigma_idx as u64, rep as u64])
}

fn run_cell(
    cfg: &ExperimentConfig,
    truth0: &GroundTruth,
    band: &[bool],
    strategy: SamplerStrategy,
    sigma: f64,
    sigma_idx: usize,
    rep: usize,
) -> std::result::Result<MetricsReport, String> {
    let smoother = cfg.smoother().map_err(|e| e.to_string())?;
    let truth = truth0.with_sigma(sigma);
    let spec = cfg
        .sampler_spec(strategy, cell_seed(cfg.seed, sigma_idx, rep))
        .map_err(|e| e.to_string())?;
    let run = run_sequential_design(&truth, &spec, &smoother, cfg.budget_fraction, cfg.n_stages)
        .map_err(|e| e.to_string())?;
    let field = reconstruct_unsampled(&truth, &run, &smoother).map_err(|e| e.to_string())?;
    compute_mse(
        &field,
        &truth,
        band,
        &run.sampled,
        ReportContext {
            sigma,
            sampler: strategy.name().into(),
            replication: rep,
            stage: cfg.n_stages,
        },
    )
    .map_err(|e| e.to_string())
}

/// Run the full experiment grid and write `metrics.csv` plus a manifest that
/// replays it exactly. Cells run in parallel; a failed cell is recorded in
/// the manifest while the rest proceed.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let strategies = cfg.strategies()?;
    let truth0 = cfg.build_truth()?;
    let band = jump_band(&truth0.grid, &truth0.jump_mask, cfg.jump_band_radius)
        .map_err(|e| anyhow::anyhow!("jump band: {e}"))?;

    let mut cells = Vec::new();
    for sigma_idx in 0..cfg.sigmas.len() {
        for sampler_idx in 0..strategies.len() {
            for rep in 0..cfg.n_replications {
                cells.push(Cell {
                    sigma_idx,
                    sampler_idx,
                    rep,
                });
            }
        }
    }

    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|cell| {
            let sigma = cfg.sigmas[cell.sigma_idx];
            let strategy = strategies[cell.sampler_idx];
            let result = run_cell(
                cfg,
                &truth0,
                &band,
                strategy,
                sigma,
                cell.sigma_idx,
                cell.rep,
            );
            CellOutcome {
                sampler: strategy,
                sigma,
                rep: cell.rep,
                seed: cell_seed(cfg.seed, cell.sigma_idx, cell.rep),
                result,
            }
        })
        .collect();

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let manifest_path = out_dir.join(MANIFEST_FILE);

    let mut csv = String::from(METRICS_HEADER);
    csv.push('\n');
    let mut failures = 0usize;
    let mut rows = 0usize;
    for o in &outcomes {
        match &o.result {
            Ok(m) => {
                csv.push_str(&metrics_row(m, o.seed));
                csv.push('\n');
                rows += 1;
            }
            Err(_) => failures += 1,
        }
    }
    fs::write(&metrics_path, &csv)
        .with_context(|| format!("writing {}", metrics_path.display()))?;

    let mut man = String::new();
    man.push_str("# jumpscan bench manifest v1\n");
    man.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    man.push_str("# replay with: jumpscan bench --replay <this file>\n");
    man.push_str("<<<config\n");
    man.push_str(&cfg.to_toml());
    man.push_str(">>>config\n");
    for o in &outcomes {
        let status = match &o.result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("failed: {}", e.replace('\n', " ")),
        };
        man.push_str(&format!(
            "cell sampler={} sigma={} rep={} seed={} status={}\n",
            o.sampler, o.sigma, o.rep, o.seed, status
        ));
    }
    man.push_str(&format!("output {METRICS_FILE}\n"));
    fs::write(&manifest_path, &man)
        .with_context(|| format!("writing {}", manifest_path.display()))?;

    Ok(ExperimentOutput {
        metrics_path,
        manifest_path,
        rows,
        failures,
    })
}

fn opt_metric(v: Option<f64>) -> (String, String) {
    match v {
        Some(x) => (x.to_string(), x.sqrt().to_string()),
        None => ("na".into(), "na".into()),
    }
}

fn metrics_row(m: &MetricsReport, cell_seed: u64) -> String {
    let (j, rj) = opt_metric(m.j_mse);
    let (c, rc) = opt_metric(m.c_mse);
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        m.sampler, m.sigma, m.replication, m.stage, j, c, rj, rc, m.n_jb, m.n_cont, cell_seed
    )
}

/// Extract the embedded config from a manifest for exact replay.
pub fn replay_config(manifest: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(manifest)
        .with_context(|| format!("reading manifest {}", manifest.display()))?;
    let start = text
        .find("<<<config\n")
        .context("manifest has no <<<config block")?
        + "<<<config\n".len();
    let end = text[start..]
        .find(">>>config")
        .context("manifest config block is unterminated")?;
    let cfg: ExperimentConfig =
        toml::from_str(&text[start..start + end]).context("parsing embedded config")?;
    cfg.validate()?;
    Ok(cfg)
}

/// One parsed metrics row (for `report`).
#[derive(Clone, Debug)]
pub struct MetricsRow {
    pub sampler: String,
    pub sigma: f64,
    pub replication: usize,
    pub stage: usize,
    pub j_mse: Option<f64>,
    pub c_mse: Option<f64>,
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if !line.starts_with("sampler,") {
                bail!("{}: not a metrics CSV (bad header)", path.display());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 8 {
            bail!("{}:{}: short row", path.display(), i + 1);
        }
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s == "na" {
                Ok(None)
            } else {
                Ok(Some(s.parse::<f64>().with_context(|| {
                    format!("{}:{}: bad number {s:?}", path.display(), i + 1)
                })?))
            }
        };
        rows.push(MetricsRow {
            sampler: f[0].to_string(),
            sigma: f[1].parse().context("sigma")?,
            replication: f[2].parse().context("replication")?,
            stage: f[3].parse().context("stage")?,
            j_mse: parse_opt(f[4])?,
            c_mse: parse_opt(f[5])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InputConfig;

    fn small_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            input: InputConfig::Synthetic {
                shape: "disk".into(),
                width: 21,
                height: 21,
            },
            sigmas: vec![0.2],
            samplers: vec!["uniform".into()],
            budget_fraction: 0.2,
            n_stages: 2,
            n_replications: 1,
            seed: 5,
            output_dir: dir.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn smallest_cell_produces_one_metrics_row() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let out = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(out.rows, 1);
        assert_eq!(out.failures, 0);
        let rows = read_metrics_csv(&out.metrics_path).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].j_mse.unwrap() >= 0.0);
        assert_eq!(rows[0].stage, 2);
    }

    #[test]
    fn failed_cells_are_recorded_while_the_rest_proceed() {
        let dir = tempfile::tempdir().unwrap();
        // A two-point budget cannot triangulate for stage 2: the proposed
        // cell fails, the uniform-only one-stage cell would too — instead
        // mix a failing sampler cell with a healthy uniform cell by making
        // stage 1 too small to support candidate generation.
        let cfg = ExperimentConfig {
            input: InputConfig::Synthetic {
                shape: "disk".into(),
                width: 21,
                height: 21,
            },
            sigmas: vec![0.2],
            samplers: vec!["proposed".into()],
            budget_fraction: 0.005, // two points over two stages
            n_stages: 2,
            n_replications: 2,
            seed: 5,
            output_dir: dir.path().to_path_buf(),
            ..Default::default()
        };
        let out = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(out.failures, 2);
        assert_eq!(out.rows, 0);
        let man = fs::read_to_string(&out.manifest_path).unwrap();
        assert!(man.contains("status=failed"), "{man}");
    }

    #[test]
    fn manifest_replay_reproduces_byte_identical_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let out = run_experiment(&cfg, &dir.path().join("a")).unwrap();
        let replayed = replay_config(&out.manifest_path).unwrap();
        assert_eq!(replayed, cfg);
        let out2 = run_experiment(&replayed, &dir.path().join("b")).unwrap();
        let a = fs::read(&out.metrics_path).unwrap();
        let b = fs::read(&out2.metrics_path).unwrap();
        assert_eq!(a, b, "replayed metrics must be byte-identical");
    }

    #[test]
    fn paired_seeds_share_the_replication_stream_across_samplers() {
        assert_eq!(cell_seed(9, 0, 3), cell_seed(9, 0, 3));
        assert_ne!(cell_seed(9, 0, 3), cell_seed(9, 1, 3));
        assert_ne!(cell_seed(9, 0, 3), cell_seed(9, 0, 4));
    }
}

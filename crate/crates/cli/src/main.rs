//! `jumpscan` — reconstruct piecewise-continuous surfaces from partial
//! scans, steering each scan stage toward the estimated discontinuities.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use jumpscan_core::dataset::{observe, Dataset, GroundTruth};
use jumpscan_core::evaluation::{
    compute_mse, jump_band, middle_row_transect, pmf_vs_error_profile, ReportContext,
};
use jumpscan_core::sampler::{run_sequential_design, KdeBandwidth, SamplerStrategy};
use jumpscan_core::spatial::SpatialIndex;

use jumpscan::config::{ExperimentConfig, InputConfig};
use jumpscan::formats::{write_csv_grid, write_pgm_mask, write_pgm_unit, GridValues};
use jumpscan::harness::{reconstruct_unsampled, replay_config, run_experiment};
use jumpscan::report::report_from_file;

#[derive(Parser)]
#[command(
    name = "jumpscan",
    version,
    about = "Jump-preserving surface reconstruction with stage-wise adaptive scanning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Synthetic surface: step, disk, or scene.
    #[arg(long, conflicts_with = "image")]
    shape: Option<String>,
    #[arg(long, default_value_t = 101)]
    width: usize,
    #[arg(long, default_value_t = 101)]
    height: usize,
    /// Input image (PGM or CSV grid) instead of a synthetic surface.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Jump-curve mask PGM ({0,255}, same dimensions as the image).
    #[arg(long, requires = "image")]
    mask: Option<PathBuf>,
}

impl InputArgs {
    fn to_config(&self) -> InputConfig {
        match &self.image {
            Some(image) => InputConfig::Image {
                image: image.clone(),
                mask: self.mask.clone(),
            },
            None => InputConfig::Synthetic {
                shape: self.shape.clone().unwrap_or_else(|| "disk".into()),
                width: self.width,
                height: self.height,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Emit a synthetic truth surface (CSV grid) and its jump mask (PGM).
    Synth {
        #[arg(long, default_value = "step")]
        shape: String,
        #[arg(long, default_value_t = 101)]
        width: usize,
        #[arg(long, default_value_t = 101)]
        height: usize,
        #[arg(long, default_value = "synth-out")]
        out_dir: PathBuf,
    },
    /// Run one sequential design and emit the sampled points and the
    /// reconstructed field.
    Design {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value = "proposed")]
        sampler: String,
        #[arg(long, default_value_t = 0.10)]
        budget: f64,
        #[arg(long, default_value_t = 6)]
        stages: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Neighbor count override (default: max(p+2, ceil(3 ln n))).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "epanechnikov")]
        kernel: String,
        /// Jump-band radius for the metrics split.
        #[arg(long, default_value_t = 6.0)]
        band_radius: f64,
        #[arg(long, default_value = "design-out")]
        out_dir: PathBuf,
    },
    /// Run the full benchmark grid (sigmas x samplers x replications).
    Bench {
        /// TOML experiment config; defaults are the reference protocol.
        #[arg(long, conflicts_with = "replay")]
        config: Option<PathBuf>,
        /// Replay a previous run from its manifest.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Replication-count override.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Transect study: normalized error vs sampling criteria through the
    /// middle of the image.
    Profile {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        /// Observe every stride-th pixel in both directions.
        #[arg(long, default_value_t = 4)]
        stride: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "profile.csv")]
        out: PathBuf,
    },
    /// Aggregate a metrics CSV into mean +/- sd rows per (sampler, sigma).
    Report {
        #[arg(long)]
        metrics: PathBuf,
        /// Output path; prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Synth {
            shape,
            width,
            height,
            out_dir,
        } => synth(&shape, width, height, &out_dir),
        Command::Design {
            input,
            sigma,
            sampler,
            budget,
            stages,
            seed,
            k,
            kernel,
            band_radius,
            out_dir,
        } => design(
            input,
            sigma,
            &sampler,
            budget,
            stages,
            seed,
            k,
            &kernel,
            band_radius,
            &out_dir,
        ),
        Command::Bench {
            config,
            replay,
            out_dir,
            seed,
            reps,
        } => bench(config, replay, out_dir, seed, reps),
        Command::Profile {
            input,
            sigma,
            stride,
            seed,
            out,
        } => profile(input, sigma, stride, seed, &out),
        Command::Report { metrics, out } => {
            let table = report_from_file(&metrics)?;
            match out {
                Some(path) => {
                    fs::write(&path, table)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{table}"),
            }
            Ok(())
        }
    }
}

fn truth_grid_values(truth: &GroundTruth) -> GridValues {
    let dims = truth.grid.dims();
    GridValues {
        width: dims[0],
        height: dims[1],
        values: (0..truth.grid.len())
            .map(|i| truth.eval(&truth.grid.coords(i)))
            .collect(),
    }
}

fn synth(shape: &str, width: usize, height: usize, out_dir: &PathBuf) -> Result<()> {
    let cfg = ExperimentConfig {
        input: InputConfig::Synthetic {
            shape: shape.into(),
            width,
            height,
        },
        ..Default::default()
    };
    let truth = cfg.build_truth()?;
    fs::create_dir_all(out_dir)?;
    let truth_path = out_dir.join("truth.csv");
    let mask_path = out_dir.join("mask.pgm");
    let preview_path = out_dir.join("truth.pgm");
    let img = truth_grid_values(&truth);
    write_csv_grid(&truth_path, &img)?;
    write_pgm_unit(&preview_path, &img)?;
    write_pgm_mask(&mask_path, img.width, img.height, &truth.jump_mask)?;
    println!(
        "wrote {} ({}x{}), {}, {}",
        truth_path.display(),
        width,
        height,
        mask_path.display(),
        preview_path.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn design(
    input: InputArgs,
    sigma: f64,
    sampler: &str,
    budget: f64,
    stages: usize,
    seed: u64,
    k: Option<usize>,
    kernel: &str,
    band_radius: f64,
    out_dir: &PathBuf,
) -> Result<()> {
    let strategy: SamplerStrategy = sampler.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
    let cfg = ExperimentConfig {
        input: input.to_config(),
        k,
        kernel: kernel.into(),
        seed,
        ..Default::default()
    };
    let smoother = cfg.smoother()?;
    let truth = cfg.build_truth()?.with_sigma(sigma);
    let spec = cfg.sampler_spec(strategy, seed)?;
    let run = run_sequential_design(&truth, &spec, &smoother, budget, stages)
        .map_err(|e| anyhow::anyhow!("sequential design: {e}"))?;

    fs::create_dir_all(out_dir)?;
    let points_path = out_dir.join("points.csv");
    let mut obs_at_cell: Vec<Option<usize>> = vec![None; truth.grid.len()];
    for o in run.dataset.observations() {
        obs_at_cell[truth.grid.exact_index(&o.point.coords).unwrap()] = Some(o.point.id);
    }
    let mut points = String::from("stage,id,x,y,value\n");
    for st in &run.stages {
        for &cell in &st.cells {
            let c = truth.grid.coords(cell);
            let id = obs_at_cell[cell].expect("drawn cells are observed");
            let o = &run.dataset.observations()[id];
            points.push_str(&format!(
                "{},{},{},{},{}\n",
                st.stage, o.point.id, c[0], c[1], o.value
            ));
        }
    }
    fs::write(&points_path, points)?;

    let field = reconstruct_unsampled(&truth, &run, &smoother)?;
    let dims = truth.grid.dims();
    let mut values = vec![0.0f64; truth.grid.len()];
    for o in run.dataset.observations() {
        values[truth.grid.exact_index(&o.point.coords).unwrap()] = o.value;
    }
    for (pt, est) in field.points.iter().zip(&field.estimates) {
        values[truth.grid.exact_index(pt).unwrap()] = est.m_hat;
    }
    let img = GridValues {
        width: dims[0],
        height: dims[1],
        values,
    };
    let field_csv = out_dir.join("field.csv");
    let field_pgm = out_dir.join("field.pgm");
    write_csv_grid(&field_csv, &img)?;
    write_pgm_unit(&field_pgm, &img)?;

    println!(
        "sampled {} of {} cells over {} stages -> {}, {}, {}",
        run.dataset.len(),
        truth.grid.len(),
        stages,
        points_path.display(),
        field_csv.display(),
        field_pgm.display()
    );
    if truth.has_jumps() {
        let band = jump_band(&truth.grid, &truth.jump_mask, band_radius)
            .map_err(|e| anyhow::anyhow!("jump band: {e}"))?;
        let m = compute_mse(
            &field,
            &truth,
            &band,
            &run.sampled,
            ReportContext {
                sigma,
                sampler: strategy.name().into(),
                replication: 0,
                stage: stages,
            },
        )
        .map_err(|e| anyhow::anyhow!("metrics: {e}"))?;
        println!(
            "j_mse = {}  c_mse = {}  (band h = {band_radius}, {} + {} unsampled cells)",
            m.j_mse
                .map(|v| v.to_string())
                .unwrap_or_else(|| "na".into()),
            m.c_mse
                .map(|v| v.to_string())
                .unwrap_or_else(|| "na".into()),
            m.n_jb,
            m.n_cont
        );
    } else {
        println!("no jump mask available: j_mse/c_mse not applicable");
    }
    Ok(())
}

fn bench(
    config: Option<PathBuf>,
    replay: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    reps: Option<usize>,
) -> Result<()> {
    let mut cfg = match (&config, &replay) {
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(manifest)) => replay_config(manifest)?,
        (None, None) => ExperimentConfig::default(),
        (Some(_), Some(_)) => bail!("--config and --replay are mutually exclusive"),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = reps {
        cfg.n_replications = r;
    }
    let out = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
    let result = run_experiment(&cfg, &out)?;
    println!(
        "wrote {} ({} rows, {} failed cells) and {}",
        result.metrics_path.display(),
        result.rows,
        result.failures,
        result.manifest_path.display()
    );
    Ok(())
}

fn profile(input: InputArgs, sigma: f64, stride: usize, seed: u64, out: &PathBuf) -> Result<()> {
    if stride == 0 {
        bail!("stride must be >= 1");
    }
    let cfg = ExperimentConfig {
        input: input.to_config(),
        ..Default::default()
    };
    let truth = cfg.build_truth()?.with_sigma(sigma);
    let smoother = cfg.smoother()?;
    let grid = &truth.grid;
    let dims = grid.dims();
    let mut coords = Vec::new();
    for y in (0..dims[1]).step_by(stride) {
        for x in (0..dims[0]).step_by(stride) {
            coords.push(vec![x as f64, y as f64]);
        }
    }
    let values =
        observe(&truth, &coords, sigma, seed).map_err(|e| anyhow::anyhow!("observing: {e}"))?;
    let mut data = Dataset::new(grid.bounds());
    for (c, v) in coords.into_iter().zip(values) {
        data.insert(c, v).map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    let index = SpatialIndex::from_dataset(&data).map_err(|e| anyhow::anyhow!("{e}"))?;
    let transect = middle_row_transect(grid).map_err(|e| anyhow::anyhow!("{e}"))?;
    let table = pmf_vs_error_profile(
        &truth,
        &data,
        &index,
        &smoother,
        KdeBandwidth::HalfDiameterRule,
        &transect,
    )
    .map_err(|e| anyhow::anyhow!("profile: {e}"))?;

    let mut csv = String::from("x,y,error,proposed,wrms_c,wrms_j\n");
    for (i, cell) in table.cells.iter().enumerate() {
        let c = grid.coords(*cell);
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c[0], c[1], table.error[i], table.proposed[i], table.wrms_c[i], table.wrms_j[i]
        ));
    }
    fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {} ({} transect locations, {} observations)",
        out.display(),
        table.cells.len(),
        data.len()
    );
    Ok(())
}

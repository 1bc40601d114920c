//! Experiment configuration (TOML-backed).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use jumpscan_core::dataset::{Grid, GroundTruth};
use jumpscan_core::sampler::{DrawPolicy, KdeBandwidth, SamplerSpec, SamplerStrategy};
use jumpscan_core::smoother::SmootherConfig;
use jumpscan_core::Kernel;

use crate::formats::{self, ImageFormat};
use crate::shapes::make_shape;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputConfig {
    /// Built-in synthetic surface (`step`, `disk`, `scene`).
    Synthetic {
        shape: String,
        width: usize,
        height: usize,
    },
    /// User-supplied image, optionally with a {0,255} jump-curve mask of the
    /// same dimensions (without it, jump-band metrics are not applicable).
    Image {
        image: PathBuf,
        #[serde(default)]
        mask: Option<PathBuf>,
    },
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig::Synthetic {
            shape: "disk".into(),
            width: 101,
            height: 101,
        }
    }
}

/// Full description of one benchmark experiment. Defaults follow the
/// reference protocol: 10% budget over six stages, 25 replications, noise
/// levels spanning [0, 1].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputConfig,
    pub sigmas: Vec<f64>,
    /// Sampler names: proposed, uniform, wrms-c, wrms-j.
    pub samplers: Vec<String>,
    pub budget_fraction: f64,
    pub n_stages: usize,
    pub n_replications: usize,
    /// Neighbor count override; empty applies `max(p+2, ceil(3 ln n))`.
    pub k: Option<usize>,
    /// epanechnikov | triweight | uniform
    pub kernel: String,
    /// KDE bandwidth override; empty applies the half-diameter rule.
    pub kde_bandwidth: Option<f64>,
    /// distinct | iid-dedup
    pub draw_policy: String,
    /// Jump-band radius h for the J-MSE / C-MSE split.
    pub jump_band_radius: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            input: InputConfig::default(),
            sigmas: vec![0.1, 0.3, 0.5, 1.0],
            samplers: SamplerStrategy::ALL
                .iter()
                .map(|s| s.name().into())
                .collect(),
            budget_fraction: 0.10,
            n_stages: 6,
            n_replications: 25,
            k: None,
            kernel: "epanechnikov".into(),
            kde_bandwidth: None,
            draw_policy: "distinct".into(),
            jump_band_radius: 6.0,
            seed: 7,
            output_dir: PathBuf::from("bench-out"),
        }
    }
}

pub fn kernel_from_name(name: &str) -> Result<Kernel> {
    Ok(match name {
        "epanechnikov" => Kernel::Epanechnikov,
        "triweight" => Kernel::Triweight,
        "uniform" => Kernel::Uniform,
        other => bail!("unknown kernel {other:?}"),
    })
}

pub fn draw_policy_from_name(name: &str) -> Result<DrawPolicy> {
    Ok(match name {
        "distinct" => DrawPolicy::Distinct,
        "iid-dedup" => DrawPolicy::IidDedup,
        other => bail!("unknown draw policy {other:?}"),
    })
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            bail!("sigmas must not be empty");
        }
        if self.sigmas.iter().any(|s| !(0.0..=1.0).contains(s)) {
            bail!("sigmas must lie in [0, 1]");
        }
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            bail!("budget_fraction must be in (0, 1]");
        }
        if self.n_stages == 0 || self.n_replications == 0 {
            bail!("n_stages and n_replications must be positive");
        }
        if self.jump_band_radius < 0.0 {
            bail!("jump_band_radius must be >= 0");
        }
        self.strategies()?;
        kernel_from_name(&self.kernel)?;
        draw_policy_from_name(&self.draw_policy)?;
        Ok(())
    }

    pub fn strategies(&self) -> Result<Vec<SamplerStrategy>> {
        if self.samplers.is_empty() {
            bail!("samplers must not be empty");
        }
        self.samplers
            .iter()
            .map(|s| {
                s.parse::<SamplerStrategy>()
                    .map_err(|e| anyhow::anyhow!("{e}"))
            })
            .collect()
    }

    pub fn smoother(&self) -> Result<SmootherConfig> {
        Ok(SmootherConfig {
            k: self.k,
            kernel: kernel_from_name(&self.kernel)?,
            ..Default::default()
        })
    }

    pub fn sampler_spec(&self, strategy: SamplerStrategy, seed: u64) -> Result<SamplerSpec> {
        Ok(SamplerSpec {
            strategy,
            kde_bandwidth: match self.kde_bandwidth {
                Some(h) => KdeBandwidth::Fixed(h),
                None => KdeBandwidth::HalfDiameterRule,
            },
            draw_policy: draw_policy_from_name(&self.draw_policy)?,
            seed,
        })
    }

    /// Build the noiseless ground truth described by `input` (the per-cell
    /// sigma is applied later).
    pub fn build_truth(&self) -> Result<GroundTruth> {
        match &self.input {
            InputConfig::Synthetic {
                shape,
                width,
                height,
            } => {
                let surface = make_shape(shape, *width, *height)?;
                let grid =
                    Grid::new_2d(*width, *height).map_err(|e| anyhow::anyhow!("bad grid: {e}"))?;
                GroundTruth::make_synthetic(surface, grid, 0.0)
                    .map_err(|e| anyhow::anyhow!("building synthetic truth: {e}"))
            }
            InputConfig::Image { image, mask } => {
                let (_, mut truth) = formats::load_image(image, ImageFormat::from_path(image))?;
                if let Some(mask_path) = mask {
                    let m = formats::read_mask_pgm(mask_path)?;
                    if m.len() != truth.grid.len() {
                        bail!(
                            "mask {} has {} cells, image grid has {}",
                            mask_path.display(),
                            m.len(),
                            truth.grid.len()
                        );
                    }
                    truth.jump_mask = m;
                }
                Ok(truth)
            }
        }
    }
}

//! Stage-wise design-point selection.
//!
//! Candidates for the next stage are the Delaunay-triangle centroids of the
//! current design, snapped to unsampled grid cells. Each strategy turns the
//! current estimates into an unnormalized score per candidate:
//!
//! * `Proposed` — `exp{(m̂₍₁₎ − m̂₍₂₎)²} / f̂₁`, the desired sampling density
//!   divided by a kernel density estimate of the points already taken, so
//!   the *joint* design over all stages follows the desired density;
//! * `Uniform` — constant;
//! * `WrmsC` — weighted residual mean square of the conventional fit;
//! * `WrmsJ` — `min(err⁽¹⁾, err⁽²⁾)` of the one-sided fits.
//!
//! Scores are normalized into a pmf and the stage batch is drawn from it
//! without duplicates.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::dataset::{observe, Dataset, Grid, GroundTruth};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::seed;
use crate::smoother::{estimate_point, PointEstimate, SmootherConfig};
use crate::spatial::{SpatialIndex, Triangulation};

#[allow(unused_imports)]
use num_traits::Float;

const TAG_DRAW: u64 = 0x11;
const TAG_NOISE: u64 = 0x22;
const TAG_POOL: u64 = 0x33;

/// Relative floor applied to the KDE denominator where no kernel support
/// reaches a candidate.
const KDE_FLOOR_REL: f64 = 1e-8;

/// Sampling strategy: the proposed jump-statistic density or one of the
/// three benchmarks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerStrategy {
    Proposed,
    Uniform,
    WrmsC,
    WrmsJ,
}

impl SamplerStrategy {
    pub const ALL: [SamplerStrategy; 4] = [
        SamplerStrategy::Proposed,
        SamplerStrategy::Uniform,
        SamplerStrategy::WrmsC,
        SamplerStrategy::WrmsJ,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SamplerStrategy::Proposed => "proposed",
            SamplerStrategy::Uniform => "uniform",
            SamplerStrategy::WrmsC => "wrms-c",
            SamplerStrategy::WrmsJ => "wrms-j",
        }
    }
}

impl fmt::Display for SamplerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(SamplerStrategy::Proposed),
            "uniform" => Ok(SamplerStrategy::Uniform),
            "wrms-c" | "wrmsc" => Ok(SamplerStrategy::WrmsC),
            "wrms-j" | "wrmsj" => Ok(SamplerStrategy::WrmsJ),
            other => Err(Error::InvalidParameter(
                ["unknown sampler \"", other, "\""].concat(),
            )),
        }
    }
}

/// Whether stage draws reject duplicates (default) or take literal i.i.d.
/// draws and collapse duplicates afterwards, shrinking the batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DrawPolicy {
    #[default]
    Distinct,
    IidDedup,
}

/// KDE bandwidth rule for the stage-density denominator.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum KdeBandwidth {
    /// `h = R · n^{-1/(p+4)}` with `R` half the design-box diameter.
    #[default]
    HalfDiameterRule,
    Fixed(f64),
}

impl KdeBandwidth {
    pub fn value(&self, data: &Dataset) -> f64 {
        match self {
            KdeBandwidth::Fixed(h) => *h,
            KdeBandwidth::HalfDiameterRule => {
                let r = data.bounds().diameter() / 2.0;
                let n = data.len().max(1) as f64;
                let p = data.dim() as f64;
                r * n.powf(-1.0 / (p + 4.0))
            }
        }
    }
}

/// Full sampler configuration for one sequential run.
#[derive(Clone, Debug)]
pub struct SamplerSpec {
    pub strategy: SamplerStrategy,
    pub kde_bandwidth: KdeBandwidth,
    pub draw_policy: DrawPolicy,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn new(strategy: SamplerStrategy, seed: u64) -> Self {
        SamplerSpec {
            strategy,
            kde_bandwidth: KdeBandwidth::default(),
            draw_policy: DrawPolicy::default(),
            seed,
        }
    }
}

/// Candidate locations with normalized selection probabilities.
#[derive(Clone, Debug)]
pub struct StagePmf {
    /// Grid indices of the candidates (pairwise distinct, all unsampled).
    pub cells: Vec<usize>,
    pub coords: Vec<Vec<f64>>,
    /// Nonnegative, sums to 1.
    pub probs: Vec<f64>,
}

impl StagePmf {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Unnormalized desired-density score `exp{jump_stat}`.
pub fn desired_density_score(jump_stat: f64) -> f64 {
    jump_stat.exp()
}

/// Kernel density estimate `(1/(n·h^p)) Σ K((x − x_i)/h)` with a normalized
/// kernel, so values are comparable to a true density.
pub fn kde_density(x: &[f64], points: &[Vec<f64>], h_kde: f64, kernel: Kernel) -> f64 {
    let p = x.len();
    let norm = kernel.density_constant(p);
    let h2 = h_kde * h_kde;
    let mut sum = 0.0;
    for pt in points {
        let d2: f64 = pt.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        sum += norm * kernel.profile(d2 / h2);
    }
    sum / (points.len() as f64 * h_kde.powi(p as i32))
}

// Same estimate as `kde_density`, but only visiting the points inside the
// kernel support via the spatial index.
fn kde_over_index(x: &[f64], index: &SpatialIndex, h_kde: f64, kernel: Kernel) -> f64 {
    let p = x.len();
    let norm = kernel.density_constant(p);
    let h2 = h_kde * h_kde;
    let sum: f64 = index
        .within_sq(x, h2, false)
        .iter()
        .map(|&(d2, _)| norm * kernel.profile(d2 / h2))
        .sum();
    sum / (index.len() as f64 * h_kde.powi(p as i32))
}

/// Numerator/denominator combination of the proposed strategy. The jump
/// statistics are shifted by their maximum before exponentiation; the pmf is
/// unchanged by any common shift, and overflow is impossible.
pub fn proposed_scores(jump_stats: &[f64], kdes: &[f64]) -> Vec<f64> {
    let smax = jump_stats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kmax = kdes.iter().copied().fold(0.0, f64::max);
    let floor = KDE_FLOOR_REL * kmax;
    jump_stats
        .iter()
        .zip(kdes)
        .map(|(s, k)| {
            let denom = if kmax > 0.0 { k.max(floor) } else { 1.0 };
            (s - smax).exp() / denom
        })
        .collect()
}

/// Normalize scores into a pmf; an all-zero score vector falls back to the
/// uniform pmf.
fn normalize_scores(mut scores: Vec<f64>) -> Vec<f64> {
    let sum: f64 = scores.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        log::warn!("all candidate scores zero or non-finite; falling back to uniform pmf");
        let u = 1.0 / scores.len() as f64;
        scores.fill(u);
        return scores;
    }
    for s in &mut scores {
        *s /= sum;
    }
    scores
}

/// Snap a continuous location to the nearest unsampled, unclaimed grid cell
/// (2-D). Ties resolve to the smallest cell index.
fn snap_to_unsampled(grid: &Grid, sampled: &[bool], claimed: &[bool], c: &[f64]) -> Option<usize> {
    let (w, h) = (grid.dims()[0] as i64, grid.dims()[1] as i64);
    let cx = c[0].round().clamp(0.0, (w - 1) as f64) as i64;
    let cy = c[1].round().clamp(0.0, (h - 1) as f64) as i64;
    let mut best: Option<(f64, usize)> = None;
    let max_ring = w.max(h);
    for r in 0..=max_ring {
        if let Some((d2, _)) = best {
            // Every cell in ring r is at least r-1 away from c.
            let ring_min = (r - 1).max(0) as f64;
            if ring_min * ring_min > d2 {
                break;
            }
        }
        let mut visit = |x: i64, y: i64| {
            if x < 0 || y < 0 || x >= w || y >= h {
                return;
            }
            let idx = (y * w + x) as usize;
            if sampled[idx] || claimed[idx] {
                return;
            }
            let dx = x as f64 - c[0];
            let dy = y as f64 - c[1];
            let d2 = dx * dx + dy * dy;
            if best.is_none_or(|(bd, bi)| (d2, idx) < (bd, bi)) {
                best = Some((d2, idx));
            }
        };
        if r == 0 {
            visit(cx, cy);
        } else {
            for x in (cx - r)..=(cx + r) {
                visit(x, cy - r);
                visit(x, cy + r);
            }
            for y in (cy - r + 1)..=(cy + r - 1) {
                visit(cx - r, y);
                visit(cx + r, y);
            }
        }
    }
    best.map(|(_, idx)| idx)
}

/// Candidate cells for the next stage: Delaunay centroids snapped to
/// unsampled cells for 2-D designs; for higher dimensions a uniform random
/// pool of unsampled cells stands in (extension point).
fn candidate_cells(
    data: &Dataset,
    grid: &Grid,
    sampled: &[bool],
    spec: &SamplerSpec,
) -> Result<Vec<usize>> {
    if !sampled.iter().any(|s| !s) {
        return Err(Error::NoUnsampledCells);
    }
    if data.dim() == 2 {
        let pts: Vec<[f64; 2]> = data
            .observations()
            .iter()
            .map(|o| [o.point.coords[0], o.point.coords[1]])
            .collect();
        let tri = Triangulation::build(&pts)?;
        let mut claimed = vec![false; grid.len()];
        let mut cells = Vec::with_capacity(tri.len());
        for c in tri.centroids() {
            if let Some(idx) = snap_to_unsampled(grid, sampled, &claimed, &c) {
                claimed[idx] = true;
                cells.push(idx);
            }
        }
        if cells.is_empty() {
            return Err(Error::NoUnsampledCells);
        }
        Ok(cells)
    } else {
        let unsampled: Vec<usize> = (0..grid.len()).filter(|&i| !sampled[i]).collect();
        let target = (2 * data.len()).clamp(1, unsampled.len());
        let mut pool = unsampled;
        let mut rng = seed::rng(spec.seed, &[TAG_POOL, data.len() as u64]);
        for j in 0..target {
            let i = rng.random_range(j..pool.len());
            pool.swap(j, i);
        }
        pool.truncate(target);
        pool.sort_unstable();
        Ok(pool)
    }
}

/// A stage pmf together with the per-candidate estimates behind it (absent
/// for the uniform strategy).
#[derive(Clone, Debug)]
pub struct StageComputation {
    pub pmf: StagePmf,
    pub estimates: Option<Vec<PointEstimate>>,
}

#[cfg(feature = "parallel")]
fn candidate_estimates(
    coords: &[Vec<f64>],
    data: &Dataset,
    index: &SpatialIndex,
    smoother: &SmootherConfig,
) -> Result<Vec<PointEstimate>> {
    use rayon::prelude::*;
    coords
        .par_iter()
        .map(|x| estimate_point(x, data, index, smoother))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn candidate_estimates(
    coords: &[Vec<f64>],
    data: &Dataset,
    index: &SpatialIndex,
    smoother: &SmootherConfig,
) -> Result<Vec<PointEstimate>> {
    coords
        .iter()
        .map(|x| estimate_point(x, data, index, smoother))
        .collect()
}

#[cfg(feature = "parallel")]
fn candidate_kdes(
    coords: &[Vec<f64>],
    index: &SpatialIndex,
    h_kde: f64,
    kernel: Kernel,
) -> Vec<f64> {
    use rayon::prelude::*;
    coords
        .par_iter()
        .map(|x| kde_over_index(x, index, h_kde, kernel))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn candidate_kdes(
    coords: &[Vec<f64>],
    index: &SpatialIndex,
    h_kde: f64,
    kernel: Kernel,
) -> Vec<f64> {
    coords
        .iter()
        .map(|x| kde_over_index(x, index, h_kde, kernel))
        .collect()
}

/// Score the candidate set under the given strategy and normalize into the
/// stage pmf.
pub fn stage_scores(
    data: &Dataset,
    index: &SpatialIndex,
    grid: &Grid,
    sampled: &[bool],
    spec: &SamplerSpec,
    smoother: &SmootherConfig,
) -> Result<StageComputation> {
    let cells = candidate_cells(data, grid, sampled, spec)?;
    let coords: Vec<Vec<f64>> = cells.iter().map(|&i| grid.coords(i)).collect();
    let (scores, estimates) = match spec.strategy {
        SamplerStrategy::Uniform => (vec![1.0; cells.len()], None),
        strategy => {
            let estimates = candidate_estimates(&coords, data, index, smoother)?;
            let scores = match strategy {
                SamplerStrategy::Proposed => {
                    let h_kde = spec.kde_bandwidth.value(data);
                    let stats: Vec<f64> = estimates.iter().map(|e| e.jump_stat).collect();
                    let kdes = candidate_kdes(&coords, index, h_kde, smoother.kernel);
                    proposed_scores(&stats, &kdes)
                }
                SamplerStrategy::WrmsC => estimates.iter().map(|e| e.conv_wrms).collect(),
                SamplerStrategy::WrmsJ => estimates.iter().map(|e| e.err_1.min(e.err_2)).collect(),
                SamplerStrategy::Uniform => unreachable!(),
            };
            (scores, Some(estimates))
        }
    };
    let probs = normalize_scores(scores);
    Ok(StageComputation {
        pmf: StagePmf {
            cells,
            coords,
            probs,
        },
        estimates,
    })
}

/// The stage pmf alone; see [`stage_scores`] for the diagnostics-carrying
/// variant.
pub fn stage_pmf(
    data: &Dataset,
    index: &SpatialIndex,
    grid: &Grid,
    sampled: &[bool],
    spec: &SamplerSpec,
    smoother: &SmootherConfig,
) -> Result<StagePmf> {
    Ok(stage_scores(data, index, grid, sampled, spec, smoother)?.pmf)
}

/// Fenwick tree over candidate weights for O(log n) sampling without
/// replacement.
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0.0; n + 1];
        tree[1..].copy_from_slice(weights);
        for j in 1..=n {
            let parent = j + (j & j.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[j];
            }
        }
        Fenwick { tree }
    }

    fn len(&self) -> usize {
        self.tree.len() - 1
    }

    fn total(&self) -> f64 {
        self.prefix(self.len())
    }

    fn prefix(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    fn add(&mut self, i: usize, delta: f64) {
        let n = self.len();
        let mut j = i + 1;
        while j <= n {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    /// Smallest index whose cumulative weight exceeds `u`.
    fn search(&self, mut u: f64) -> usize {
        let n = self.len();
        let mut pos = 0usize;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

/// Result of drawing one stage batch.
#[derive(Clone, Debug)]
pub struct DrawOutcome {
    /// Selected grid cells, in draw order.
    pub cells: Vec<usize>,
    pub coords: Vec<Vec<f64>>,
    /// How many requested draws could not be satisfied by distinct
    /// candidates.
    pub shortfall: usize,
}

/// Draw `n_stage` distinct locations from the stage pmf, deterministic in
/// `seed`. If fewer distinct candidates exist, all of them are returned and
/// the shortfall reported.
pub fn draw_stage(pmf: &StagePmf, n_stage: usize, seed_value: u64) -> Result<DrawOutcome> {
    draw_stage_with_policy(pmf, n_stage, seed_value, DrawPolicy::Distinct)
}

pub fn draw_stage_with_policy(
    pmf: &StagePmf,
    n_stage: usize,
    seed_value: u64,
    policy: DrawPolicy,
) -> Result<DrawOutcome> {
    if pmf.is_empty() {
        return Err(Error::EmptyPmf);
    }
    if n_stage == 0 {
        return Err(Error::InvalidParameter("n_stage must be >= 1".into()));
    }
    let m = pmf.len();
    let mut rng = seed::rng(seed_value, &[TAG_DRAW]);
    let mut picked: Vec<usize> = Vec::with_capacity(n_stage.min(m));
    let mut taken = vec![false; m];
    match policy {
        DrawPolicy::Distinct => {
            if n_stage >= m {
                picked.extend(0..m);
            } else {
                let mut fen = Fenwick::new(&pmf.probs);
                let initial = fen.total();
                while picked.len() < n_stage {
                    let total = fen.total();
                    if total > 1e-12 * initial {
                        let u = rng.random::<f64>() * total;
                        let i = fen.search(u);
                        if taken[i] {
                            // Numerical dust from removals; clear it.
                            fen.add(i, -fen.prefix(i + 1) + fen.prefix(i));
                            continue;
                        }
                        taken[i] = true;
                        picked.push(i);
                        fen.add(i, -pmf.probs[i]);
                    } else {
                        // Remaining weight exhausted: draw uniformly among
                        // the untaken candidates.
                        let rest: Vec<usize> = (0..m).filter(|&i| !taken[i]).collect();
                        let i = rest[rng.random_range(0..rest.len())];
                        taken[i] = true;
                        picked.push(i);
                    }
                }
            }
        }
        DrawPolicy::IidDedup => {
            let fen = Fenwick::new(&pmf.probs);
            let total = fen.total();
            for _ in 0..n_stage {
                let u = rng.random::<f64>() * total;
                let i = fen.search(u);
                if !taken[i] {
                    taken[i] = true;
                    picked.push(i);
                }
            }
        }
    }
    let shortfall = n_stage.saturating_sub(picked.len());
    Ok(DrawOutcome {
        cells: picked.iter().map(|&i| pmf.cells[i]).collect(),
        coords: picked.iter().map(|&i| pmf.coords[i].clone()).collect(),
        shortfall,
    })
}

/// Diagnostics for one completed stage.
#[derive(Clone, Debug)]
pub struct StageRecord {
    /// 1-based stage number.
    pub stage: usize,
    /// Grid cells measured in this stage.
    pub cells: Vec<usize>,
    /// Pmf the stage drew from (absent for the uniform first stage).
    pub pmf: Option<StagePmf>,
    /// Candidate-located estimates behind the pmf, when the strategy
    /// computed them.
    pub estimates: Option<Vec<PointEstimate>>,
    pub shortfall: usize,
}

/// Outcome of a full sequential design.
#[derive(Clone, Debug)]
pub struct DesignRun {
    pub dataset: Dataset,
    /// Per-grid-cell sampled flags.
    pub sampled: Vec<bool>,
    pub stages: Vec<StageRecord>,
}

/// Split `budget` across `n_stages` as evenly as possible (early stages get
/// the remainder).
pub fn stage_quotas(budget: usize, n_stages: usize) -> Vec<usize> {
    let base = budget / n_stages;
    let extras = budget % n_stages;
    (0..n_stages)
        .map(|i| base + usize::from(i < extras))
        .collect()
}

/// Run the multi-stage sequential design against a ground truth.
///
/// Stage 1 draws its quota uniformly at random over the grid; every later
/// stage rebuilds the spatial index, scores the Delaunay-centroid candidates
/// under `spec.strategy`, draws its quota from the normalized pmf, and
/// ingests the new noisy observations. Deterministic in `spec.seed`.
pub fn run_sequential_design(
    truth: &GroundTruth,
    spec: &SamplerSpec,
    smoother: &SmootherConfig,
    budget_fraction: f64,
    n_stages: usize,
) -> Result<DesignRun> {
    if !(budget_fraction > 0.0) {
        return Err(Error::InvalidParameter(
            "budget_fraction must be > 0".into(),
        ));
    }
    if n_stages == 0 {
        return Err(Error::InvalidParameter("n_stages must be >= 1".into()));
    }
    let grid = &truth.grid;
    let n_cells = grid.len();
    let mut frac = budget_fraction;
    if frac > 1.0 {
        log::warn!("budget fraction {frac} exceeds the grid; clipping to 1.0");
        frac = 1.0;
    }
    let budget = ((frac * n_cells as f64).round() as usize).clamp(1, n_cells);
    let quotas = stage_quotas(budget, n_stages);

    let mut dataset = Dataset::new(grid.bounds());
    let mut sampled = vec![false; n_cells];
    let mut stages = Vec::with_capacity(n_stages);

    for (stage_idx, &quota) in quotas.iter().enumerate() {
        let stage = stage_idx + 1;
        if quota == 0 {
            stages.push(StageRecord {
                stage,
                cells: Vec::new(),
                pmf: None,
                estimates: None,
                shortfall: 0,
            });
            continue;
        }
        let (cells, pmf, estimates, shortfall) = if stage == 1 {
            // Uniform simple random sample over the grid.
            let mut pool: Vec<usize> = (0..n_cells).collect();
            let mut rng = seed::rng(spec.seed, &[TAG_DRAW, stage as u64]);
            let take = quota.min(n_cells);
            for j in 0..take {
                let i = rng.random_range(j..pool.len());
                pool.swap(j, i);
            }
            pool.truncate(take);
            (pool, None, None, quota - take)
        } else {
            let index = SpatialIndex::from_dataset(&dataset)?;
            let comp = stage_scores(&dataset, &index, grid, &sampled, spec, smoother)?;
            let draw = draw_stage_with_policy(
                &comp.pmf,
                quota,
                seed::derive(spec.seed, &[TAG_DRAW, stage as u64]),
                spec.draw_policy,
            )?;
            if draw.shortfall > 0 {
                log::warn!(
                    "stage {stage}: only {} of {quota} requested points available",
                    draw.cells.len()
                );
            }
            (draw.cells, Some(comp.pmf), comp.estimates, draw.shortfall)
        };
        let coords: Vec<Vec<f64>> = cells.iter().map(|&i| grid.coords(i)).collect();
        let values = observe(
            truth,
            &coords,
            truth.noise_sigma,
            seed::derive(spec.seed, &[TAG_NOISE, stage as u64]),
        )?;
        for (c, v) in coords.into_iter().zip(values) {
            let idx = grid.exact_index(&c).expect("stage points are grid cells");
            sampled[idx] = true;
            dataset.insert(c, v)?;
        }
        stages.push(StageRecord {
            stage,
            cells,
            pmf,
            estimates,
            shortfall,
        });
    }
    Ok(DesignRun {
        dataset,
        sampled,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Background, SyntheticSurface};

    fn pmf_of(probs: Vec<f64>) -> StagePmf {
        let n = probs.len();
        StagePmf {
            cells: (0..n).collect(),
            coords: (0..n).map(|i| vec![i as f64, 0.0]).collect(),
            probs,
        }
    }

    #[test]
    fn desired_density_score_closed_forms() {
        assert_eq!(desired_density_score(0.0), 1.0);
        assert!((desired_density_score(1.0) - core::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn kde_single_point_at_query() {
        let pts = vec![vec![2.0, 3.0]];
        let h = 0.5;
        let got = kde_density(&[2.0, 3.0], &pts, h, Kernel::Epanechnikov);
        let want = Kernel::Epanechnikov.density_constant(2) / (h * h);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn kde_vanishes_outside_support() {
        let pts = vec![vec![0.0, 0.0]];
        assert_eq!(kde_density(&[5.0, 0.0], &pts, 1.0, Kernel::Triweight), 0.0);
    }

    /// Monte Carlo: density of a seeded uniform cloud in the unit square is
    /// about 1 in the interior.
    #[test]
    fn kde_recovers_uniform_density() {
        let mut rng = seed::rng(17, &[4]);
        let pts: Vec<Vec<f64>> = (0..1000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let h = 0.15;
        let d = kde_density(&[0.5, 0.5], &pts, h, Kernel::Epanechnikov);
        assert!((d - 1.0).abs() < 0.15, "density {d}");
    }

    #[test]
    fn proposed_scores_shift_invariance_and_kde_floor() {
        let stats = [0.0, 0.3, 0.9];
        let kdes = [1.0, 0.5, 0.0];
        let a = normalize_scores(proposed_scores(&stats, &kdes));
        let shifted: Vec<f64> = stats.iter().map(|s| s + 0.7).collect();
        let b = normalize_scores(proposed_scores(&shifted, &kdes));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // The zero-density candidate is floored, not infinite.
        assert!(a.iter().all(|p| p.is_finite()));
        // All densities zero: denominator drops out.
        let c = proposed_scores(&stats, &[0.0, 0.0, 0.0]);
        assert!((c[0] / c[2] - (stats[0] - stats[2]).exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_scores_fall_back_to_uniform() {
        let p = normalize_scores(vec![0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn flat_statistic_and_flat_density_reduce_to_the_uniform_pmf() {
        let p = normalize_scores(proposed_scores(&[0.0; 6], &[0.37; 6]));
        let u = normalize_scores(vec![1.0; 6]);
        for (a, b) in p.iter().zip(&u) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn draw_concentrated_pmf_picks_the_atom() {
        let pmf = pmf_of(vec![0.0, 1.0, 0.0]);
        let out = draw_stage(&pmf, 1, 9).unwrap();
        assert_eq!(out.cells, vec![1]);
        assert_eq!(out.shortfall, 0);
    }

    #[test]
    fn draw_is_deterministic_and_distinct() {
        let pmf = pmf_of(vec![0.1, 0.2, 0.3, 0.25, 0.15]);
        let a = draw_stage(&pmf, 3, 1234).unwrap();
        let b = draw_stage(&pmf, 3, 1234).unwrap();
        assert_eq!(a.cells, b.cells);
        let mut sorted = a.cells.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 3, "draws must be distinct");
    }

    #[test]
    fn draw_shortfall_returns_every_candidate() {
        let pmf = pmf_of(vec![0.5, 0.5]);
        let out = draw_stage(&pmf, 5, 1).unwrap();
        assert_eq!(out.cells.len(), 2);
        assert_eq!(out.shortfall, 3);
    }

    #[test]
    fn iid_policy_collapses_duplicates_and_reports_the_shortfall() {
        let pmf = pmf_of(vec![0.9, 0.05, 0.05]);
        let out = draw_stage_with_policy(&pmf, 8, 5, DrawPolicy::IidDedup).unwrap();
        let mut unique = out.cells.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), out.cells.len(), "duplicates are collapsed");
        assert_eq!(out.shortfall, 8 - out.cells.len());
        assert!(
            out.shortfall > 0,
            "a concentrated pmf repeats under i.i.d. draws"
        );
    }

    #[test]
    fn fenwick_prefix_search_matches_linear_scan() {
        let w = [0.0, 0.3, 0.0, 0.2, 0.5, 0.0];
        let fen = Fenwick::new(&w);
        assert!((fen.total() - 1.0).abs() < 1e-15);
        for &(u, want) in &[(0.0, 1usize), (0.29, 1), (0.31, 3), (0.5, 4), (0.99, 4)] {
            assert_eq!(fen.search(u), want, "u={u}");
        }
    }

    #[test]
    fn stage_quota_arithmetic() {
        assert_eq!(stage_quotas(4040, 6), vec![674, 674, 673, 673, 673, 673]);
        assert_eq!(stage_quotas(5, 3), vec![2, 2, 1]);
        assert_eq!(stage_quotas(2, 4), vec![1, 1, 0, 0]);
    }

    fn constant_truth(w: usize, h: usize, sigma: f64) -> GroundTruth {
        GroundTruth::make_synthetic(
            SyntheticSurface {
                background: Background::Constant(0.5),
                regions: vec![],
            },
            Grid::new_2d(w, h).unwrap(),
            sigma,
        )
        .unwrap()
    }

    #[test]
    fn one_stage_uniform_design_is_a_simple_random_sample() {
        let truth = constant_truth(20, 20, 0.0);
        let spec = SamplerSpec::new(SamplerStrategy::Uniform, 5);
        let run = run_sequential_design(&truth, &spec, &SmootherConfig::default(), 0.1, 1).unwrap();
        assert_eq!(run.dataset.len(), 40);
        assert_eq!(run.stages.len(), 1);
        assert!(run.stages[0].pmf.is_none());
        assert_eq!(run.sampled.iter().filter(|&&s| s).count(), 40);
    }

    #[test]
    fn sequential_design_budget_and_determinism() {
        let truth = constant_truth(31, 31, 0.1);
        let spec = SamplerSpec::new(SamplerStrategy::Proposed, 99);
        let cfg = SmootherConfig::default();
        let a = run_sequential_design(&truth, &spec, &cfg, 0.2, 3).unwrap();
        let b = run_sequential_design(&truth, &spec, &cfg, 0.2, 3).unwrap();
        let budget = (0.2 * 961.0_f64).round() as usize;
        assert_eq!(a.dataset.len(), budget);
        assert_eq!(a.dataset.len(), b.dataset.len());
        for (x, y) in a
            .dataset
            .observations()
            .iter()
            .zip(b.dataset.observations())
        {
            assert_eq!(x.point.coords, y.point.coords);
            assert_eq!(x.value, y.value);
        }
        // Sampled cells are never measured twice.
        let mut seen = vec![false; 961];
        for o in a.dataset.observations() {
            let idx = truth.grid.exact_index(&o.point.coords).unwrap();
            assert!(!seen[idx]);
            seen[idx] = true;
        }
    }

    #[test]
    fn constant_surface_proposed_pmf_is_near_uniform_over_candidates() {
        let truth = constant_truth(25, 25, 0.0);
        let spec = SamplerSpec::new(SamplerStrategy::Proposed, 3);
        let cfg = SmootherConfig::default();
        let run = run_sequential_design(&truth, &spec, &cfg, 0.15, 1).unwrap();
        let index = SpatialIndex::from_dataset(&run.dataset).unwrap();
        let pmf = stage_pmf(&run.dataset, &index, &truth.grid, &run.sampled, &spec, &cfg).unwrap();
        let s: f64 = pmf.probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        // Zero jump statistic everywhere: deviations from uniform come only
        // from the KDE denominator.
        let uniform = 1.0 / pmf.len() as f64;
        for (&cell, &p) in pmf.cells.iter().zip(&pmf.probs) {
            assert!(!run.sampled[cell], "candidates must be unsampled");
            assert!(p > 0.0);
            assert!(p < 6.0 * uniform, "p={p} vs uniform={uniform}");
        }
    }
}

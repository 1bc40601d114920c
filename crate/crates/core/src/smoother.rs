//! Jump-preserving regression estimation.
//!
//! At a query location `x` the estimator
//!
//! 1. takes the spatially varying bandwidth `h_n(x)` = distance from `x` to
//!    its k-th nearest design point,
//! 2. fits a conventional local linear kernel estimate on the neighborhood
//!    `N_n(x)` to obtain `m̂₍₀₎(x)` and the local slope `β̂₍₀₎`,
//! 3. splits `N_n(x)` by the hyperplane through `x` perpendicular to
//!    `β̂₍₀₎`, fits a one-sided local linear estimate on each half, and
//! 4. keeps the side with the smaller weighted residual mean square error.
//!
//! Near a discontinuity the winning half lies entirely on `x`'s side of the
//! jump curve, so the estimate does not smear across it, and the jump
//! statistic `(m̂₍₁₎ − m̂₍₂₎)²` gets large — which is what the stage sampler
//! feeds on.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, DesignPoint};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::solve_spd;
use crate::spatial::{default_k, SpatialIndex};

#[allow(unused_imports)]
use num_traits::Float;

/// Below this norm the local slope carries no direction and the
/// neighborhood is split along the first coordinate axis instead.
const BETA_DIRECTION_TOL: f64 = 1e-12;

/// Relative ridge jitter applied only when the plain normal-equations solve
/// reports singularity.
const RIDGE_JITTER_REL: f64 = 1e-12;

/// Configuration for the local fits.
#[derive(Clone, Debug)]
pub struct SmootherConfig {
    /// Neighbor count for the k-NN bandwidth; `None` applies
    /// `max(p + 2, ⌈3 ln n⌉)`.
    pub k: Option<usize>,
    pub kernel: Kernel,
    /// How many times a too-sparse neighborhood may double `k` before the
    /// intercept-only / conventional fallbacks engage.
    pub max_doublings: usize,
    /// Clamp point estimates to the observed value range of their
    /// neighborhood. Local linear fits evaluated at the edge of a sparse
    /// one-sided neighborhood can extrapolate far outside the data, which
    /// inflates the jump statistic arbitrarily; clamping keeps it on the
    /// intensity scale. Exact fits are unaffected (an affine surface's value
    /// at `x` lies inside its neighborhood range).
    pub clamp_to_local_range: bool,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            k: None,
            kernel: Kernel::Epanechnikov,
            max_doublings: 3,
            clamp_to_local_range: true,
        }
    }
}

impl SmootherConfig {
    pub fn effective_k(&self, n: usize, p: usize) -> usize {
        self.k.unwrap_or_else(|| default_k(n, p))
    }
}

/// Result of one weighted local linear solve.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFit {
    /// Intercept estimate at the query point.
    pub alpha: f64,
    /// Local slope, length p.
    pub beta: Vec<f64>,
    /// Weighted residual mean square, normalized by the weight sum.
    pub wrms: f64,
    /// Points with strictly positive kernel weight.
    pub n_used: usize,
}

/// Which one-sided estimate was selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    One,
    Two,
}

/// Per-location record of the jump-preserving estimate.
#[derive(Clone, Debug)]
pub struct PointEstimate {
    /// One-sided estimates `m̂₍₁₎(x)`, `m̂₍₂₎(x)`.
    pub m_hat_1: f64,
    pub m_hat_2: f64,
    /// Weighted residual mean square errors of the two one-sided fits.
    pub err_1: f64,
    pub err_2: f64,
    /// Selected final estimate: side 1 iff `err_1 < err_2`, ties to side 2.
    pub m_hat: f64,
    pub side: Side,
    /// Jump detection statistic `(m̂₍₁₎ − m̂₍₂₎)²`.
    pub jump_stat: f64,
    /// Conventional full-neighborhood estimate `m̂₍₀₎(x)` and its WRMS.
    pub conv_m: f64,
    pub conv_wrms: f64,
    /// Bandwidth `h_n(x)` actually used (after any k doubling).
    pub bandwidth: f64,
    /// Set when any fallback path (k doubling, intercept-only side, or
    /// conventional substitution) was taken.
    pub degenerate: bool,
}

/// Batch of point estimates keyed by location.
#[derive(Clone, Debug, Default)]
pub struct EstimateField {
    pub points: Vec<Vec<f64>>,
    pub estimates: Vec<PointEstimate>,
}

impl EstimateField {
    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }
}

struct NeighborData<'a> {
    coords: &'a [f64],
    value: f64,
    /// Squared distance to the query normalized by h², i.e. `‖u‖²`.
    r2n: f64,
}

fn gather<'a>(
    neigh: &[(f64, u32)],
    h2: f64,
    index: &'a SpatialIndex,
    data: &Dataset,
) -> Vec<NeighborData<'a>> {
    neigh
        .iter()
        .map(|&(d2, slot)| NeighborData {
            coords: index.point(slot as usize),
            value: data.value(slot as usize),
            r2n: d2 / h2,
        })
        .collect()
}

/// Weighted local linear solve on an explicit neighbor set. Slope
/// coordinates are prescaled by `h` so the normal equations stay
/// well-conditioned regardless of the coordinate units.
fn fit_neighbors(
    x: &[f64],
    neigh: &[NeighborData<'_>],
    h: f64,
    kernel: Kernel,
) -> Result<LocalFit> {
    let p = x.len();
    let dim = p + 1;
    let mut wsum = 0.0;
    let mut n_used = 0usize;
    for nb in neigh {
        let w = kernel.profile(nb.r2n);
        if w > 0.0 {
            n_used += 1;
            wsum += w;
        }
    }
    if wsum <= 0.0 {
        return Err(Error::EmptyNeighborhood);
    }
    if n_used < dim {
        return Err(Error::RankDeficient);
    }
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    for nb in neigh {
        let w = kernel.profile(nb.r2n);
        if w <= 0.0 {
            continue;
        }
        z[0] = 1.0;
        for j in 0..p {
            z[j + 1] = (nb.coords[j] - x[j]) / h;
        }
        for i in 0..dim {
            let wz = w * z[i];
            b[i] += wz * nb.value;
            for j in i..dim {
                a[i * dim + j] += wz * z[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            a[i * dim + j] = a[j * dim + i];
        }
    }
    let sol = solve_spd(&a, &b, dim, RIDGE_JITTER_REL).ok_or(Error::RankDeficient)?;
    let mut rss = 0.0;
    for nb in neigh {
        let w = kernel.profile(nb.r2n);
        if w <= 0.0 {
            continue;
        }
        let mut fitted = sol[0];
        for j in 0..p {
            fitted += sol[j + 1] * (nb.coords[j] - x[j]) / h;
        }
        let r = nb.value - fitted;
        rss += w * r * r;
    }
    Ok(LocalFit {
        alpha: sol[0],
        beta: sol[1..].iter().map(|s| s / h).collect(),
        wrms: rss / wsum,
        n_used,
    })
}

/// Intercept-only fallback: kernel-weighted mean, or the plain mean when
/// every neighbor sits exactly on the bandwidth sphere with zero weight.
fn intercept_only(neigh: &[NeighborData<'_>], p: usize, kernel: Kernel) -> LocalFit {
    let mut wsum = 0.0;
    let mut ysum = 0.0;
    let mut n_used = 0usize;
    for nb in neigh {
        let w = kernel.profile(nb.r2n);
        if w > 0.0 {
            wsum += w;
            ysum += w * nb.value;
            n_used += 1;
        }
    }
    let (mean, wrms) = if wsum > 0.0 {
        let mean = ysum / wsum;
        let mut rss = 0.0;
        for nb in neigh {
            let w = kernel.profile(nb.r2n);
            if w > 0.0 {
                rss += w * (nb.value - mean) * (nb.value - mean);
            }
        }
        (mean, rss / wsum)
    } else {
        let n = neigh.len() as f64;
        let mean = neigh.iter().map(|nb| nb.value).sum::<f64>() / n;
        let rss = neigh
            .iter()
            .map(|nb| (nb.value - mean) * (nb.value - mean))
            .sum::<f64>();
        (mean, rss / n)
    };
    LocalFit {
        alpha: mean,
        beta: vec![0.0; p],
        wrms,
        n_used: if n_used > 0 { n_used } else { neigh.len() },
    }
}

/// Conventional local linear kernel fit of all observations within `h` of
/// `x` (minimizer of the kernel-weighted squared residuals).
pub fn fit_local_linear(x: &[f64], data: &Dataset, h: f64, kernel: Kernel) -> Result<LocalFit> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("bandwidth must be positive".into()));
    }
    if x.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: x.len(),
        });
    }
    let h2 = h * h;
    let neigh: Vec<NeighborData<'_>> = data
        .observations()
        .iter()
        .filter_map(|o| {
            let d2: f64 = o
                .point
                .coords
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2 <= h2).then_some(NeighborData {
                coords: &o.point.coords,
                value: o.value,
                r2n: d2 / h2,
            })
        })
        .collect();
    if neigh.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    fit_neighbors(x, &neigh, h, kernel)
}

/// Split a neighborhood by the hyperplane through `x` perpendicular to
/// `beta0`. Side 1 holds points with `β̂₍₀₎ᵀ(x_i − x) ≥ 0`, side 2 the rest;
/// a vanishing `beta0` splits along the first coordinate axis. Returns
/// indices into `neighbors`.
pub fn split_neighborhood(
    x: &[f64],
    beta0: &[f64],
    neighbors: &[DesignPoint],
) -> (Vec<usize>, Vec<usize>) {
    let norm2: f64 = beta0.iter().map(|b| b * b).sum();
    let mut axis = vec![0.0; x.len()];
    if !axis.is_empty() {
        axis[0] = 1.0;
    }
    let dir: &[f64] = if norm2.sqrt() < BETA_DIRECTION_TOL {
        &axis
    } else {
        beta0
    };
    let mut side1 = Vec::new();
    let mut side2 = Vec::new();
    for (i, nb) in neighbors.iter().enumerate() {
        let dot: f64 = dir
            .iter()
            .zip(nb.coords.iter().zip(x))
            .map(|(d, (c, xc))| d * (c - xc))
            .sum();
        if dot >= 0.0 {
            side1.push(i);
        } else {
            side2.push(i);
        }
    }
    (side1, side2)
}

fn split_gathered<'a>(
    x: &[f64],
    dir: &[f64],
    neigh: &[NeighborData<'a>],
) -> (Vec<NeighborData<'a>>, Vec<NeighborData<'a>>) {
    let mut side1 = Vec::new();
    let mut side2 = Vec::new();
    for nb in neigh {
        let dot: f64 = dir
            .iter()
            .zip(nb.coords.iter().zip(x))
            .map(|(d, (c, xc))| d * (c - xc))
            .sum();
        let item = NeighborData {
            coords: nb.coords,
            value: nb.value,
            r2n: nb.r2n,
        };
        if dot >= 0.0 {
            side1.push(item);
        } else {
            side2.push(item);
        }
    }
    (side1, side2)
}

/// Jump-preserving estimate at one location.
///
/// Sparse or rank-deficient neighborhoods climb a fallback ladder: `k` is
/// doubled (up to [`SmootherConfig::max_doublings`] times) until both
/// one-sided fits are solvable; a still-degenerate side falls back to its
/// intercept-only weighted mean; an empty side inherits the conventional
/// full-neighborhood fit. Every fallback sets the `degenerate` flag.
pub fn estimate_point(
    x: &[f64],
    data: &Dataset,
    index: &SpatialIndex,
    cfg: &SmootherConfig,
) -> Result<PointEstimate> {
    let p = data.dim();
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.len(),
        });
    }
    let n = index.len();
    if n < 2 * (p + 1) {
        return Err(Error::NotEnoughPoints {
            needed: 2 * (p + 1),
            available: n,
        });
    }
    let mut k = cfg.effective_k(n, p).clamp(1, n - 1);
    let mut degenerate = false;

    struct Attempt<'a> {
        h: f64,
        neigh: Vec<NeighborData<'a>>,
        full: Result<LocalFit>,
        sides: Option<SideFits<'a>>,
    }
    struct SideFits<'a> {
        s1: Vec<NeighborData<'a>>,
        s2: Vec<NeighborData<'a>>,
        r1: Result<LocalFit>,
        r2: Result<LocalFit>,
    }
    fn run_attempt<'a>(
        x: &[f64],
        k: usize,
        data: &'a Dataset,
        index: &'a SpatialIndex,
        kernel: Kernel,
    ) -> Result<Attempt<'a>> {
        let p = x.len();
        // Self-exclusion applies to the bandwidth ranking only: h_n(x) is
        // the distance to the k-th *other* point, while the neighborhood sum
        // keeps x's own observation when x is a design point.
        let h2 = index.knn_bandwidth_sq(x, k)?;
        let raw = index.within_sq(x, h2, false);
        let neigh = gather(&raw, h2, index, data);
        let h = h2.sqrt();
        let full = fit_neighbors(x, &neigh, h, kernel);
        let sides = full.as_ref().ok().map(|f| {
            let dir = direction(&f.beta, p);
            let (s1, s2) = split_gathered(x, &dir, &neigh);
            let fit = |s: &[NeighborData<'_>]| {
                if s.is_empty() {
                    Err(Error::EmptyNeighborhood)
                } else {
                    fit_neighbors(x, s, h, kernel)
                }
            };
            let (r1, r2) = (fit(&s1), fit(&s2));
            SideFits { s1, s2, r1, r2 }
        });
        Ok(Attempt {
            h,
            neigh,
            full,
            sides,
        })
    }

    let mut att = run_attempt(x, k, data, index, cfg.kernel)?;
    for _ in 0..cfg.max_doublings {
        let solvable = matches!(
            &att.sides,
            Some(SideFits {
                r1: Ok(_),
                r2: Ok(_),
                ..
            })
        );
        if solvable {
            break;
        }
        let k2 = (2 * k).min(n - 1);
        if k2 == k {
            break;
        }
        k = k2;
        degenerate = true;
        att = run_attempt(x, k, data, index, cfg.kernel)?;
    }
    let h = att.h;

    let conv = match att.full {
        Ok(f) => f,
        Err(_) => {
            degenerate = true;
            intercept_only(&att.neigh, p, cfg.kernel)
        }
    };
    let sides = att.sides.unwrap_or_else(|| {
        let dir = direction(&conv.beta, p);
        let (s1, s2) = split_gathered(x, &dir, &att.neigh);
        let fit = |s: &[NeighborData<'_>]| {
            if s.is_empty() {
                Err(Error::EmptyNeighborhood)
            } else {
                fit_neighbors(x, s, h, cfg.kernel)
            }
        };
        let (r1, r2) = (fit(&s1), fit(&s2));
        SideFits { s1, s2, r1, r2 }
    });

    let mut resolve = |res: Result<LocalFit>, s: &[NeighborData<'_>]| -> (f64, f64) {
        match res {
            Ok(f) => (f.alpha, f.wrms),
            Err(_) if s.is_empty() => {
                // Empty half-neighborhood: inherit the conventional fit.
                degenerate = true;
                (conv.alpha, conv.wrms)
            }
            Err(_) => {
                degenerate = true;
                let f = intercept_only(s, p, cfg.kernel);
                (f.alpha, f.wrms)
            }
        }
    };
    let (mut m_hat_1, err_1) = resolve(sides.r1, &sides.s1);
    let (mut m_hat_2, err_2) = resolve(sides.r2, &sides.s2);
    let mut conv_m = conv.alpha;

    if cfg.clamp_to_local_range {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for nb in &att.neigh {
            lo = lo.min(nb.value);
            hi = hi.max(nb.value);
        }
        m_hat_1 = m_hat_1.clamp(lo, hi);
        m_hat_2 = m_hat_2.clamp(lo, hi);
        conv_m = conv_m.clamp(lo, hi);
    }

    let side = if err_1 < err_2 { Side::One } else { Side::Two };
    let m_hat = match side {
        Side::One => m_hat_1,
        Side::Two => m_hat_2,
    };
    let d = m_hat_1 - m_hat_2;
    Ok(PointEstimate {
        m_hat_1,
        m_hat_2,
        err_1,
        err_2,
        m_hat,
        side,
        jump_stat: d * d,
        conv_m,
        conv_wrms: conv.wrms,
        bandwidth: h,
        degenerate,
    })
}

fn direction(beta: &[f64], p: usize) -> Vec<f64> {
    let norm2: f64 = beta.iter().map(|b| b * b).sum();
    if norm2.sqrt() < BETA_DIRECTION_TOL {
        let mut e1 = vec![0.0; p];
        e1[0] = 1.0;
        e1
    } else {
        beta.to_vec()
    }
}

/// Elementwise [`estimate_point`] over a list of locations. Pure in
/// `(data, index)`, so results are independent of evaluation order; with the
/// `parallel` feature the points are estimated across threads with output
/// identical to the sequential pass.
pub fn estimate_field(
    test_points: &[Vec<f64>],
    data: &Dataset,
    index: &SpatialIndex,
    cfg: &SmootherConfig,
) -> Result<EstimateField> {
    #[cfg(feature = "parallel")]
    let estimates: Vec<PointEstimate> = {
        use rayon::prelude::*;
        test_points
            .par_iter()
            .map(|x| estimate_point(x, data, index, cfg))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let estimates: Vec<PointEstimate> = {
        let mut estimates = Vec::with_capacity(test_points.len());
        for x in test_points {
            estimates.push(estimate_point(x, data, index, cfg)?);
        }
        estimates
    };
    Ok(EstimateField {
        points: test_points.to_vec(),
        estimates,
    })
}

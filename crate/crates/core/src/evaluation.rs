//! Reconstruction-error metrics and the pmf-vs-error transect study.
//!
//! Errors are split by the jump band `JB(h)`: the grid cells whose Euclidean
//! distance to the nearest jump-curve cell is at most `h`. `J-MSE` averages
//! the squared reconstruction error over unsampled cells inside the band,
//! `C-MSE` over unsampled cells outside it.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, Grid, GroundTruth};
use crate::error::{Error, Result};
use crate::sampler::{kde_density, proposed_scores, KdeBandwidth};
use crate::smoother::{estimate_point, EstimateField, SmootherConfig};
use crate::spatial::SpatialIndex;

#[allow(unused_imports)]
use num_traits::Float;

/// Stand-in for infinity inside the distance transform; differences of this
/// magnitude stay finite, which keeps the parabola intersections well
/// defined when a line contains no mask cell.
const FAR: f64 = 1e30;

/// One-dimensional squared-distance transform (lower envelope of parabolas).
fn dt_line(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0usize;
    for (q, dq_out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *dq_out = dq * dq + f[p];
    }
}

/// Exact squared Euclidean distance from every grid cell to the nearest
/// masked cell (`FAR`-scale values when the mask is empty).
pub fn squared_distance_transform(grid: &Grid, mask: &[bool]) -> Result<Vec<f64>> {
    if mask.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: mask.len(),
        });
    }
    let mut dist: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { FAR }).collect();
    let total = grid.len();
    let mut stride = 1usize;
    for &d in grid.dims() {
        let mut line = vec![0.0; d];
        let mut out = vec![0.0; d];
        let lines = total / d;
        for l in 0..lines {
            // Base offset of the l-th line along this axis.
            let block = stride * d;
            let base = (l / stride) * block + (l % stride);
            for i in 0..d {
                line[i] = dist[base + i * stride];
            }
            dt_line(&line, &mut out);
            for i in 0..d {
                dist[base + i * stride] = out[i];
            }
        }
        stride *= d;
    }
    Ok(dist)
}

/// The jump band `JB(h)`: cells within Euclidean distance `h` of the mask.
/// Empty mask ⇒ empty band (J-MSE is then not applicable).
pub fn jump_band(grid: &Grid, mask: &[bool], h: f64) -> Result<Vec<bool>> {
    if h < 0.0 {
        return Err(Error::InvalidParameter("band radius must be >= 0".into()));
    }
    let d2 = squared_distance_transform(grid, mask)?;
    let limit = h * h + 1e-9;
    Ok(d2.into_iter().map(|d| d <= limit).collect())
}

/// Annotation carried into a [`MetricsReport`].
#[derive(Clone, Debug)]
pub struct ReportContext {
    pub sigma: f64,
    pub sampler: String,
    pub replication: usize,
    pub stage: usize,
}

/// J-MSE / C-MSE summary for one reconstruction. A metric is `None` when its
/// partition cell is empty.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub j_mse: Option<f64>,
    pub c_mse: Option<f64>,
    /// Unsampled cells inside / outside the band; they partition the
    /// unsampled evaluation set.
    pub n_jb: usize,
    pub n_cont: usize,
    pub sigma: f64,
    pub sampler: String,
    pub replication: usize,
    pub stage: usize,
}

/// Split the squared reconstruction error of `field` against the truth over
/// unsampled cells inside and outside the jump band.
///
/// `field` must cover every unsampled grid cell (it may also cover sampled
/// ones; those are ignored, matching evaluation at unsampled locations).
pub fn compute_mse(
    field: &EstimateField,
    truth: &GroundTruth,
    jb: &[bool],
    sampled: &[bool],
    ctx: ReportContext,
) -> Result<MetricsReport> {
    let grid = &truth.grid;
    if jb.len() != grid.len() || sampled.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: jb.len(),
        });
    }
    let mut cover: Vec<Option<usize>> = vec![None; grid.len()];
    for (i, pt) in field.points.iter().enumerate() {
        let idx = grid
            .exact_index(pt)
            .ok_or_else(|| Error::InvalidParameter("field point off the evaluation grid".into()))?;
        cover[idx] = Some(i);
    }
    let (mut j_sum, mut c_sum) = (0.0f64, 0.0f64);
    let (mut n_jb, mut n_cont) = (0usize, 0usize);
    for idx in 0..grid.len() {
        if sampled[idx] {
            continue;
        }
        let fi = cover[idx].ok_or_else(|| {
            Error::InvalidParameter("field must cover every unsampled grid cell".into())
        })?;
        let err = field.estimates[fi].m_hat - truth.eval(&grid.coords(idx));
        let sq = err * err;
        if jb[idx] {
            j_sum += sq;
            n_jb += 1;
        } else {
            c_sum += sq;
            n_cont += 1;
        }
    }
    Ok(MetricsReport {
        j_mse: (n_jb > 0).then(|| j_sum / n_jb as f64),
        c_mse: (n_cont > 0).then(|| c_sum / n_cont as f64),
        n_jb,
        n_cont,
        sigma: ctx.sigma,
        sampler: ctx.sampler,
        replication: ctx.replication,
        stage: ctx.stage,
    })
}

/// Normalized criterion curves along a transect, each summing to 1.
#[derive(Clone, Debug)]
pub struct ProfileTable {
    /// Grid indices of the transect locations.
    pub cells: Vec<usize>,
    /// Normalized squared reconstruction error `(m̂ − m)²`.
    pub error: Vec<f64>,
    /// Normalized proposed stage density `exp{jump_stat}/f̂₁`.
    pub proposed: Vec<f64>,
    pub wrms_c: Vec<f64>,
    pub wrms_j: Vec<f64>,
}

/// Default transect: the middle horizontal row of a 2-D grid.
pub fn middle_row_transect(grid: &Grid) -> Result<Vec<usize>> {
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension { dim: grid.dim() });
    }
    let (w, h) = (grid.dims()[0], grid.dims()[1]);
    let y = h / 2;
    Ok((0..w).map(|x| grid.index_of(&[x, y])).collect())
}

/// Curves of squared quantities below this level are indistinguishable from
/// solver rounding dust (residuals under ~1e-10) and carry no structure.
const ZERO_CURVE_TOL: f64 = 1e-20;

fn normalize_curve(mut v: Vec<f64>, what: &str) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    let max = v.iter().copied().fold(0.0, f64::max);
    if !(max > ZERO_CURVE_TOL) || !sum.is_finite() {
        log::warn!("{what} curve sums to zero; reporting it flat");
        let u = 1.0 / v.len() as f64;
        v.fill(u);
        return v;
    }
    for x in &mut v {
        *x /= sum;
    }
    v
}

/// Evaluate, at each transect location, the squared reconstruction error and
/// the three sampling criteria, each normalized into a pmf over the
/// transect.
pub fn pmf_vs_error_profile(
    truth: &GroundTruth,
    data: &Dataset,
    index: &SpatialIndex,
    smoother: &SmootherConfig,
    kde_bandwidth: KdeBandwidth,
    transect: &[usize],
) -> Result<ProfileTable> {
    if transect.is_empty() {
        return Err(Error::InvalidParameter("empty transect".into()));
    }
    let grid = &truth.grid;
    let h_kde = kde_bandwidth.value(data);
    let pts: Vec<Vec<f64>> = data
        .observations()
        .iter()
        .map(|o| o.point.coords.clone())
        .collect();
    let mut error = Vec::with_capacity(transect.len());
    let mut stats = Vec::with_capacity(transect.len());
    let mut kdes = Vec::with_capacity(transect.len());
    let mut wrms_c = Vec::with_capacity(transect.len());
    let mut wrms_j = Vec::with_capacity(transect.len());
    for &cell in transect {
        let x = grid.coords(cell);
        let est = estimate_point(&x, data, index, smoother)?;
        let e = est.m_hat - truth.eval(&x);
        error.push(e * e);
        stats.push(est.jump_stat);
        kdes.push(kde_density(&x, &pts, h_kde, smoother.kernel));
        wrms_c.push(est.conv_wrms);
        wrms_j.push(est.err_1.min(est.err_2));
    }
    Ok(ProfileTable {
        cells: transect.to_vec(),
        error: normalize_curve(error, "error"),
        proposed: normalize_curve(proposed_scores(&stats, &kdes), "proposed"),
        wrms_c: normalize_curve(wrms_c, "wrms-c"),
        wrms_j: normalize_curve(wrms_j, "wrms-j"),
    })
}

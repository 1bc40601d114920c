//! Independent numerical oracles for the estimation and sampling paths.
//!
//! The reference computations here (dense normal equations via Gauss-Jordan,
//! brute-force sorts, empirical distributions) deliberately share no code
//! with the library implementation.

use jumpscan_core::dataset::{
    Background, Bounds, Dataset, Grid, GroundTruth, Region, SyntheticSurface,
};
use jumpscan_core::sampler::{draw_stage, StagePmf};
use jumpscan_core::smoother::{estimate_point, fit_local_linear, SmootherConfig};
use jumpscan_core::spatial::SpatialIndex;
use jumpscan_core::{observe, Kernel};
use rand::Rng;

fn kernel_weight(kernel: Kernel, r2: f64) -> f64 {
    if r2 > 1.0 {
        return 0.0;
    }
    match kernel {
        Kernel::Epanechnikov => 1.0 - r2,
        Kernel::Triweight => (1.0 - r2).powi(3),
        Kernel::Uniform => 1.0,
    }
}

/// Gauss-Jordan solve with partial pivoting on unscaled coordinates.
fn gauss_jordan(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        b[col] /= d;
        let pivot_row = a[col].clone();
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for (aij, &pj) in a[i].iter_mut().zip(&pivot_row) {
                    *aij -= f * pj;
                }
                b[i] -= f * b[col];
            }
        }
    }
    Some(b)
}

/// Assemble and solve the weighted normal equations of the local linear
/// problem directly, without the implementation's prescaling or Cholesky.
fn wls_oracle(
    x: &[f64],
    pts: &[Vec<f64>],
    ys: &[f64],
    h: f64,
    kernel: Kernel,
) -> Option<(f64, Vec<f64>, f64)> {
    let p = x.len();
    let dim = p + 1;
    let mut a = vec![vec![0.0; dim]; dim];
    let mut b = vec![0.0; dim];
    let mut wsum = 0.0;
    for (pt, &y) in pts.iter().zip(ys) {
        let d2: f64 = pt.iter().zip(x).map(|(u, v)| (u - v) * (u - v)).sum();
        if d2 > h * h {
            continue;
        }
        let w = kernel_weight(kernel, d2 / (h * h));
        if w <= 0.0 {
            continue;
        }
        wsum += w;
        let mut z = vec![1.0];
        z.extend(pt.iter().zip(x).map(|(u, v)| u - v));
        for i in 0..dim {
            b[i] += w * z[i] * y;
            for (j, aij) in a[i].iter_mut().enumerate() {
                *aij += w * z[i] * z[j];
            }
        }
    }
    let sol = gauss_jordan(a, b)?;
    let mut rss = 0.0;
    for (pt, &y) in pts.iter().zip(ys) {
        let d2: f64 = pt.iter().zip(x).map(|(u, v)| (u - v) * (u - v)).sum();
        if d2 > h * h {
            continue;
        }
        let w = kernel_weight(kernel, d2 / (h * h));
        if w <= 0.0 {
            continue;
        }
        let mut fitted = sol[0];
        for j in 0..p {
            fitted += sol[j + 1] * (pt[j] - x[j]);
        }
        rss += w * (y - fitted) * (y - fitted);
    }
    Some((sol[0], sol[1..].to_vec(), rss / wsum))
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn wls_matches_the_dense_normal_equations_oracle() {
    let kernels = [Kernel::Epanechnikov, Kernel::Triweight, Kernel::Uniform];
    let mut checked = 0usize;
    let mut rng = jumpscan_core::seed::rng(2024, &[71]);
    while checked < 100 {
        let p = 1 + checked % 3;
        let kernel = kernels[checked % 3];
        let n = rng.random_range(3 * (p + 1)..40);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-0.5..0.5)).collect();
        let h = rng.random_range(0.9..2.5);
        let Some((alpha, beta, wrms)) = wls_oracle(&x, &pts, &ys, h, kernel) else {
            continue;
        };

        let mut data = Dataset::new(Bounds::new(vec![-1.0; p], vec![1.0; p]).unwrap());
        for (pt, &y) in pts.iter().zip(&ys) {
            data.insert(pt.clone(), y).unwrap();
        }
        let Ok(fit) = fit_local_linear(&x, &data, h, kernel) else {
            continue;
        };
        assert!(
            rel_close(fit.alpha, alpha, 1e-9),
            "alpha {} vs {alpha} (case {checked})",
            fit.alpha
        );
        for (got, want) in fit.beta.iter().zip(&beta) {
            assert!(rel_close(*got, *want, 1e-9), "beta {got} vs {want}");
        }
        assert!(
            rel_close(fit.wrms, wrms, 1e-9),
            "wrms {} vs {wrms}",
            fit.wrms
        );
        checked += 1;
    }
}

fn step_truth(w: usize, h: usize, sigma: f64) -> GroundTruth {
    GroundTruth::make_synthetic(
        SyntheticSurface {
            background: Background::Constant(0.0),
            regions: vec![(
                Region::HalfSpace {
                    normal: vec![1.0, 0.0],
                    offset: w as f64 / 2.0,
                },
                1.0,
            )],
        },
        Grid::new_2d(w, h).unwrap(),
        sigma,
    )
    .unwrap()
}

fn full_grid_dataset(truth: &GroundTruth, seed: u64) -> Dataset {
    let grid = &truth.grid;
    let coords: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.coords(i)).collect();
    let values = observe(truth, &coords, truth.noise_sigma, seed).unwrap();
    let mut data = Dataset::new(grid.bounds());
    for (c, v) in coords.into_iter().zip(values) {
        data.insert(c, v).unwrap();
    }
    data
}

/// A far-from-jump query's statistic is unremarkable against the empirical
/// far-field distribution.
#[test]
fn far_field_jump_stat_sits_below_the_empirical_p99() {
    let truth = step_truth(61, 61, 0.1);
    let data = full_grid_dataset(&truth, 404);
    let index = SpatialIndex::from_dataset(&data).unwrap();
    let cfg = SmootherConfig::default();
    let jump_x = 30.5;

    let mut far_stats = Vec::new();
    for y in (2..59).step_by(2) {
        for x in (2..59).step_by(2) {
            if (x as f64 - jump_x).abs() < 12.0 {
                continue;
            }
            let est = estimate_point(&[x as f64, y as f64], &data, &index, &cfg).unwrap();
            far_stats.push(est.jump_stat);
        }
    }
    far_stats.sort_by(f64::total_cmp);
    let p99 = far_stats[(far_stats.len() as f64 * 0.99) as usize];

    for q in [[10.0, 17.0], [50.0, 44.0], [12.0, 51.0]] {
        let est = estimate_point(&q, &data, &index, &cfg).unwrap();
        assert!(
            est.jump_stat <= p99,
            "far query {q:?} stat {} above p99 {p99}",
            est.jump_stat
        );
    }
}

/// Qualitative localization: the statistic is much larger within one
/// bandwidth of the jump curve than beyond three bandwidths.
#[test]
fn jump_stat_concentrates_near_the_curve() {
    let truth = step_truth(101, 101, 0.1);
    let data = full_grid_dataset(&truth, 2023);
    let index = SpatialIndex::from_dataset(&data).unwrap();
    let cfg = SmootherConfig::default();
    let jump_x = 50.5;

    let mut near = Vec::new();
    let mut far = Vec::new();
    for y in (1..100).step_by(2) {
        for x in 1..100 {
            let d = (x as f64 - jump_x).abs();
            if d > 14.0 && x % 3 != 0 {
                continue;
            }
            let est = estimate_point(&[x as f64, y as f64], &data, &index, &cfg).unwrap();
            if d <= est.bandwidth {
                near.push(est.jump_stat);
            } else if d > 3.0 * est.bandwidth {
                far.push(est.jump_stat);
            }
        }
    }
    assert!(near.len() > 100 && far.len() > 100);
    let near_mean: f64 = near.iter().sum::<f64>() / near.len() as f64;
    let far_mean: f64 = far.iter().sum::<f64>() / far.len() as f64;
    assert!(
        near_mean >= 5.0 * far_mean,
        "near {near_mean} vs far {far_mean}"
    );
}

/// The conventional estimate's variance is nearly location-independent on a
/// constant surface (k-NN bandwidths equalize the information content).
#[test]
fn near_constant_variance_across_locations() {
    let truth = GroundTruth::make_synthetic(
        SyntheticSurface {
            background: Background::Constant(0.5),
            regions: vec![],
        },
        Grid::new_2d(21, 21).unwrap(),
        0.2,
    )
    .unwrap();
    let queries: Vec<Vec<f64>> = vec![
        vec![5.0, 5.0],
        vec![10.0, 5.0],
        vec![15.0, 5.0],
        vec![5.0, 10.0],
        vec![10.0, 10.0],
        vec![15.0, 10.0],
        vec![5.0, 15.0],
        vec![10.0, 15.0],
        vec![15.0, 15.0],
        vec![8.0, 12.0],
    ];
    let cfg = SmootherConfig::default();
    let reps = 200;
    let mut samples = vec![Vec::with_capacity(reps); queries.len()];
    for rep in 0..reps {
        let data = full_grid_dataset(&truth, 7000 + rep as u64);
        let index = SpatialIndex::from_dataset(&data).unwrap();
        for (qi, q) in queries.iter().enumerate() {
            let est = estimate_point(q, &data, &index, &cfg).unwrap();
            samples[qi].push(est.conv_m);
        }
    }
    let variances: Vec<f64> = samples
        .iter()
        .map(|s| {
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    let vmax = variances.iter().cloned().fold(f64::MIN, f64::max);
    let vmin = variances.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        vmax / vmin <= 2.0,
        "variance ratio {} (max {vmax}, min {vmin})",
        vmax / vmin
    );
}

/// Chi-square goodness of fit for the stage drawing procedure: uniform pmf
/// over 10⁴ candidates, 100 draws per trial, 10⁴ trials.
#[test]
fn draws_from_a_uniform_pmf_are_uniform() {
    let m = 10_000usize;
    let pmf = StagePmf {
        cells: (0..m).collect(),
        coords: (0..m).map(|i| vec![i as f64, 0.0]).collect(),
        probs: vec![1.0 / m as f64; m],
    };
    let trials = 10_000usize;
    let draws = 100usize;
    let mut counts = vec![0u64; m];
    for t in 0..trials {
        let out = draw_stage(&pmf, draws, 31_000 + t as u64).unwrap();
        for c in out.cells {
            counts[c] += 1;
        }
    }
    let expected = (trials * draws) as f64 / m as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    // Wilson-Hilferty critical value for p = 0.001 with df = m - 1.
    let df = (m - 1) as f64;
    let z = 3.090_232; // standard normal 0.999 quantile
    let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
    assert!(
        stat < crit,
        "chi-square {stat} exceeds the 0.999 critical value {crit}"
    );
}

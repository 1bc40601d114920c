//! Design points, observations, grids, and ground-truth surfaces.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;

#[allow(unused_imports)]
use num_traits::Float;

/// Axis-aligned bounding box over the design space.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Bounds {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                got: max.len(),
            });
        }
        if min.iter().zip(&max).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidParameter("bounds min > max".into()));
        }
        Ok(Bounds { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Euclidean length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }
}

/// A location in the design space at which a response is (to be) measured.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignPoint {
    pub id: usize,
    pub coords: Vec<f64>,
}

/// A measured response at a design point.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub point: DesignPoint,
    pub value: f64,
}

/// Exact-coordinate key; `-0.0` is canonicalized so it cannot alias `0.0`.
fn coord_key(coords: &[f64]) -> Vec<u64> {
    coords.iter().map(|c| (c + 0.0).to_bits()).collect()
}

/// The accumulating design/observation set. Insertion is single-writer; a
/// closed stage is immutable and can be shared read-only across estimation
/// workers.
#[derive(Clone, Debug)]
pub struct Dataset {
    dim: usize,
    bounds: Bounds,
    observations: Vec<Observation>,
    seen: BTreeSet<Vec<u64>>,
}

impl Dataset {
    pub fn new(bounds: Bounds) -> Self {
        Dataset {
            dim: bounds.dim(),
            bounds,
            observations: Vec::new(),
            seen: BTreeSet::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn coords(&self, id: usize) -> &[f64] {
        &self.observations[id].point.coords
    }

    pub fn value(&self, id: usize) -> f64 {
        self.observations[id].value
    }

    /// Insert one observation. Duplicated coordinates or coordinates outside
    /// the bounds are rejected and leave the dataset unchanged.
    pub fn insert(&mut self, coords: Vec<f64>, value: f64) -> Result<usize> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        if !self.bounds.contains(&coords) {
            return Err(Error::OutOfBounds { coords });
        }
        let key = coord_key(&coords);
        if !self.seen.insert(key) {
            return Err(Error::DuplicatePoint { coords });
        }
        let id = self.observations.len();
        self.observations.push(Observation {
            point: DesignPoint { id, coords },
            value,
        });
        Ok(id)
    }

    pub fn contains_coords(&self, coords: &[f64]) -> bool {
        self.seen.contains(&coord_key(coords))
    }
}

/// A p-dimensional lattice of cells with integer coordinates
/// `0..dims[axis]` per axis, linearized with axis 0 fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    dims: Vec<usize>,
}

impl Grid {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidParameter("grid dims must be positive".into()));
        }
        Ok(Grid { dims })
    }

    pub fn new_2d(width: usize, height: usize) -> Result<Self> {
        Grid::new(vec![width, height])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, mut idx: usize) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.dims.len());
        for &d in &self.dims {
            c.push((idx % d) as f64);
            idx /= d;
        }
        c
    }

    pub fn index_of(&self, cell: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &c) in cell.iter().enumerate().rev() {
            idx = idx * self.dims[axis] + c;
        }
        idx
    }

    /// Index of the cell whose integer coordinates equal `coords` exactly.
    pub fn exact_index(&self, coords: &[f64]) -> Option<usize> {
        if coords.len() != self.dims.len() {
            return None;
        }
        let mut cell = Vec::with_capacity(coords.len());
        for (v, &d) in coords.iter().zip(&self.dims) {
            if v.fract() != 0.0 || *v < 0.0 || *v > (d - 1) as f64 {
                return None;
            }
            cell.push(*v as usize);
        }
        Some(self.index_of(&cell))
    }

    /// Index of the lattice cell nearest to arbitrary coordinates
    /// (rounded then clamped).
    pub fn nearest_index(&self, coords: &[f64]) -> usize {
        let cell: Vec<usize> = coords
            .iter()
            .zip(&self.dims)
            .map(|(v, &d)| {
                let r = v.round().max(0.0);
                (r as usize).min(d - 1)
            })
            .collect();
        self.index_of(&cell)
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            min: vec![0.0; self.dims.len()],
            max: self.dims.iter().map(|&d| (d - 1) as f64).collect(),
        }
    }
}

/// Continuous background component `g(x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Background {
    Constant(f64),
    Affine { intercept: f64, slope: Vec<f64> },
}

impl Background {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Background::Constant(c) => *c,
            Background::Affine { intercept, slope } => {
                intercept + slope.iter().zip(x).map(|(s, v)| s * v).sum::<f64>()
            }
        }
    }
}

/// Simply connected region carrying an intensity jump.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { min: Vec<f64>, max: Vec<f64> },
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => {
                let d2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                d2 <= radius * radius
            }
            Region::Box { min, max } => x
                .iter()
                .zip(min.iter().zip(max))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi),
            Region::HalfSpace { normal, offset } => {
                normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() >= *offset
            }
        }
    }

    /// Whether the region's extent stays inside the given bounds.
    /// Half-spaces are unbounded and always pass.
    fn within(&self, b: &Bounds) -> bool {
        match self {
            Region::Ball { center, radius } => center
                .iter()
                .zip(b.min.iter().zip(&b.max))
                .all(|(c, (lo, hi))| c - radius >= *lo && c + radius <= *hi),
            Region::Box { min, max } => b.contains(min) && b.contains(max),
            Region::HalfSpace { .. } => true,
        }
    }
}

/// Piecewise-continuous synthetic surface
/// `m(x) = g(x) + Σ_b τ_b 1_{A_b}(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSurface {
    pub background: Background,
    /// `(region, tau)` pairs.
    pub regions: Vec<(Region, f64)>,
}

impl SyntheticSurface {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.background.eval(x) + self.jump_part(x)
    }

    /// The discontinuous component `Σ τ_b 1_{A_b}(x)` alone.
    fn jump_part(&self, x: &[f64]) -> f64 {
        self.regions
            .iter()
            .filter(|(r, _)| r.contains(x))
            .map(|(_, tau)| *tau)
            .sum()
    }
}

/// Evaluable truth surface.
#[derive(Clone, Debug)]
pub enum Surface {
    Synthetic(SyntheticSurface),
    /// Values on the grid; off-lattice queries use the nearest cell.
    GridField(Vec<f64>),
}

/// Ground truth for synthetic or benchmark data: total evaluable surface,
/// grid, jump-curve mask, and the noise level used when observing.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub surface: Surface,
    pub grid: Grid,
    /// Cells adjacent to a jump crossing, aligned with the grid.
    pub jump_mask: Vec<bool>,
    pub noise_sigma: f64,
}

impl GroundTruth {
    /// Build a synthetic truth on `grid`. Bounded regions must lie inside
    /// the grid; the jump mask marks both cells of every axis-adjacent pair
    /// whose jump component differs.
    pub fn make_synthetic(surface: SyntheticSurface, grid: Grid, noise_sigma: f64) -> Result<Self> {
        if noise_sigma < 0.0 {
            return Err(Error::InvalidParameter("noise_sigma < 0".into()));
        }
        let bounds = grid.bounds();
        if surface.regions.iter().any(|(r, _)| !r.within(&bounds)) {
            return Err(Error::RegionOutOfBounds);
        }
        let n = grid.len();
        let mut jump = Vec::with_capacity(n);
        for idx in 0..n {
            jump.push(surface.jump_part(&grid.coords(idx)));
        }
        let mut mask = vec![false; n];
        let mut stride = 1;
        for (axis, &d) in grid.dims().iter().enumerate() {
            let _ = axis;
            for idx in 0..n {
                let along = (idx / stride) % d;
                if along + 1 < d {
                    let nb = idx + stride;
                    if jump[idx] != jump[nb] {
                        mask[idx] = true;
                        mask[nb] = true;
                    }
                }
            }
            stride *= d;
        }
        Ok(GroundTruth {
            surface: Surface::Synthetic(surface),
            grid,
            jump_mask: mask,
            noise_sigma,
        })
    }

    /// Wrap per-cell values (e.g. an ingested image) as ground truth. The
    /// jump mask must be supplied by the caller; it may be empty.
    pub fn from_grid_values(
        grid: Grid,
        values: Vec<f64>,
        jump_mask: Vec<bool>,
        noise_sigma: f64,
    ) -> Result<Self> {
        if values.len() != grid.len() || (!jump_mask.is_empty() && jump_mask.len() != grid.len()) {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let mask = if jump_mask.is_empty() {
            vec![false; grid.len()]
        } else {
            jump_mask
        };
        Ok(GroundTruth {
            surface: Surface::GridField(values),
            grid,
            jump_mask: mask,
            noise_sigma,
        })
    }

    /// Same truth with a different noise level.
    pub fn with_sigma(&self, noise_sigma: f64) -> Self {
        let mut t = self.clone();
        t.noise_sigma = noise_sigma;
        t
    }

    /// Evaluate the true surface. Total on the grid bounding box.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.surface {
            Surface::Synthetic(s) => s.eval(x),
            Surface::GridField(v) => v[self.grid.nearest_index(x)],
        }
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_mask.iter().any(|&m| m)
    }
}

/// Observe the truth at the given locations with i.i.d. Gaussian noise
/// `N(0, sigma²)` from a seeded deterministic generator. A pure function of
/// `(truth, points, sigma, seed)`.
pub fn observe(
    truth: &GroundTruth,
    points: &[Vec<f64>],
    sigma: f64,
    seed_value: u64,
) -> Result<Vec<f64>> {
    if sigma < 0.0 {
        return Err(Error::InvalidParameter("sigma < 0".into()));
    }
    let bounds = truth.grid.bounds();
    for p in points {
        if !bounds.contains(p) {
            return Err(Error::OutOfBounds { coords: p.clone() });
        }
    }
    let mut rng = seed::rng(seed_value, &[]);
    let normal = Normal::new(0.0f64, 1.0).expect("unit normal");
    Ok(points
        .iter()
        .map(|p| truth.eval(p) + sigma * normal.sample(&mut rng))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_truth(w: usize, h: usize) -> GroundTruth {
        let surface = SyntheticSurface {
            background: Background::Constant(0.0),
            regions: vec![(
                Region::HalfSpace {
                    normal: vec![1.0, 0.0],
                    offset: (w as f64) / 2.0,
                },
                1.0,
            )],
        };
        GroundTruth::make_synthetic(surface, Grid::new_2d(w, h).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn duplicate_insert_is_rejected_and_leaves_dataset_unchanged() {
        let mut d = Dataset::new(Bounds::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap());
        d.insert(vec![1.0, 2.0], 0.5).unwrap();
        let before = d.observations().to_vec();
        let err = d.insert(vec![1.0, 2.0], 0.9).unwrap_err();
        assert!(matches!(err, Error::DuplicatePoint { .. }));
        assert_eq!(d.observations(), &before[..]);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn negative_zero_coordinates_alias_zero() {
        let mut d = Dataset::new(Bounds::new(vec![-1.0], vec![1.0]).unwrap());
        d.insert(vec![0.0], 1.0).unwrap();
        assert!(matches!(
            d.insert(vec![-0.0], 2.0),
            Err(Error::DuplicatePoint { .. })
        ));
    }

    #[test]
    fn out_of_bounds_insert_names_the_point() {
        let mut d = Dataset::new(Bounds::new(vec![0.0], vec![1.0]).unwrap());
        match d.insert(vec![2.0], 0.0) {
            Err(Error::OutOfBounds { coords }) => assert_eq!(coords, vec![2.0]),
            other => panic!("expected OutOfBounds, got {other:?}"),
        }
    }

    #[test]
    fn step_surface_eval_and_mask() {
        let t = step_truth(100, 5);
        assert_eq!(t.eval(&[10.0, 2.0]), 0.0);
        assert_eq!(t.eval(&[80.0, 2.0]), 1.0);
        // Mask sits on the two columns adjacent to the crossing.
        let g = &t.grid;
        for idx in 0..g.len() {
            let c = g.coords(idx);
            let expect = c[0] == 49.0 || c[0] == 50.0;
            assert_eq!(t.jump_mask[idx], expect, "cell {c:?}");
        }
    }

    #[test]
    fn constant_surface_has_empty_mask() {
        let surface = SyntheticSurface {
            background: Background::Constant(0.5),
            regions: vec![],
        };
        let t = GroundTruth::make_synthetic(surface, Grid::new_2d(9, 9).unwrap(), 0.0).unwrap();
        assert!(!t.has_jumps());
        assert_eq!(t.eval(&[4.0, 4.0]), 0.5);
    }

    /// Brute-force membership oracle: disk mask cells straddle the circle,
    /// i.e. lie within one cell of it.
    #[test]
    fn disk_mask_lies_within_one_cell_of_the_circle() {
        let (cx, cy, r) = (10.0, 10.0, 5.0);
        let surface = SyntheticSurface {
            background: Background::Constant(0.0),
            regions: vec![(
                Region::Ball {
                    center: vec![cx, cy],
                    radius: r,
                },
                0.7,
            )],
        };
        let g = Grid::new_2d(21, 21).unwrap();
        let t = GroundTruth::make_synthetic(surface, g.clone(), 0.0).unwrap();
        assert!(t.has_jumps());
        for idx in 0..g.len() {
            if t.jump_mask[idx] {
                let c = g.coords(idx);
                let dist = ((c[0] - cx).powi(2) + (c[1] - cy).powi(2)).sqrt();
                assert!(
                    (dist - r).abs() <= core::f64::consts::SQRT_2,
                    "mask cell {c:?} too far from circle"
                );
                assert_eq!(t.eval(&c), if dist <= r { 0.7 } else { 0.0 });
            }
        }
    }

    #[test]
    fn region_outside_grid_is_rejected() {
        let surface = SyntheticSurface {
            background: Background::Constant(0.0),
            regions: vec![(
                Region::Ball {
                    center: vec![2.0, 2.0],
                    radius: 5.0,
                },
                1.0,
            )],
        };
        assert_eq!(
            GroundTruth::make_synthetic(surface, Grid::new_2d(10, 10).unwrap(), 0.0).unwrap_err(),
            Error::RegionOutOfBounds
        );
    }

    #[test]
    fn observe_is_deterministic_and_exact_at_zero_sigma() {
        let t = step_truth(20, 20);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i % 20) as f64, (i / 20) as f64])
            .collect();
        let a = observe(&t, &pts, 0.1, 42).unwrap();
        let b = observe(&t, &pts, 0.1, 42).unwrap();
        assert_eq!(a, b, "same (seed, points) must be bitwise identical");
        let exact = observe(&t, &pts, 0.0, 7).unwrap();
        for (v, p) in exact.iter().zip(&pts) {
            assert_eq!(*v, t.eval(p));
        }
    }

    #[test]
    fn observe_rejects_out_of_bounds_points() {
        let t = step_truth(20, 20);
        let err = observe(&t, &[vec![25.0, 3.0]], 0.0, 1).unwrap_err();
        assert_eq!(
            err,
            Error::OutOfBounds {
                coords: vec![25.0, 3.0]
            }
        );
    }

    /// Monte Carlo check of the noise generator: 10⁴ draws on a constant
    /// zero surface.
    #[test]
    fn observe_noise_moments() {
        let surface = SyntheticSurface {
            background: Background::Constant(0.0),
            regions: vec![],
        };
        let t = GroundTruth::make_synthetic(surface, Grid::new_2d(100, 100).unwrap(), 0.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..10_000)
            .map(|i| vec![(i % 100) as f64, (i / 100) as f64])
            .collect();
        let sigma = 0.5;
        let vals = observe(&t, &pts, sigma, 20240_u64).unwrap();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 * sigma / 100.0, "mean {mean}");
        assert!(
            (var.sqrt() - sigma).abs() < 0.05 * sigma,
            "std {}",
            var.sqrt()
        );
    }

    #[test]
    fn grid_indexing_roundtrip() {
        let g = Grid::new(vec![7, 5, 3]).unwrap();
        for idx in 0..g.len() {
            let c = g.coords(idx);
            assert_eq!(g.exact_index(&c), Some(idx));
            assert_eq!(g.nearest_index(&c), idx);
        }
        assert_eq!(g.exact_index(&[0.5, 0.0, 0.0]), None);
        assert_eq!(g.nearest_index(&[100.0, -3.0, 1.2]), g.index_of(&[6, 0, 1]));
    }
}

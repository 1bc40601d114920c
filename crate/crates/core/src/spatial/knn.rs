//! kd-tree nearest-neighbor index.
//!
//! Ties in distance are broken by point id so that query results match a
//! brute-force `(distance, id)` sort exactly, which keeps every downstream
//! computation reproducible.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[allow(unused_imports)]
use num_traits::Float;

/// A neighbor returned by index queries, sorted by `(dist, id)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub dist: f64,
}

/// Default neighbor count `k = max(p + 2, ⌈3 ln n⌉)`. A local linear fit
/// needs at least p + 1 points per half-neighborhood; logarithmic growth
/// keeps the k-NN bandwidth shrinking as the design densifies.
pub fn default_k(n: usize, p: usize) -> usize {
    let ln = if n > 1 { (n as f64).ln() } else { 0.0 };
    (p + 2).max((3.0 * ln).ceil() as usize)
}

#[derive(PartialEq)]
struct HeapItem {
    d2: f64,
    slot: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.slot.cmp(&other.slot))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Immutable snapshot of design-point coordinates with a kd-tree over them.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    coords: Vec<f64>,
    dim: usize,
    n: usize,
    order: Vec<u32>,
}

impl SpatialIndex {
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::NotEnoughPoints {
                needed: 1,
                available: 0,
            });
        }
        let dim = points[0].len();
        let mut coords = Vec::with_capacity(n * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        let mut index = SpatialIndex {
            coords,
            dim,
            n,
            order: (0..n as u32).collect(),
        };
        index.build(0, n, 0);
        Ok(index)
    }

    /// Index over a dataset; point ids equal observation ids.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let pts: Vec<Vec<f64>> = data
            .observations()
            .iter()
            .map(|o| o.point.coords.clone())
            .collect();
        Self::from_points(&pts)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize) {
        if hi - lo <= 1 {
            return;
        }
        let axis = depth % self.dim;
        let mid = lo + (hi - lo) / 2;
        let coords = &self.coords;
        let dim = self.dim;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            coords[a as usize * dim + axis]
                .total_cmp(&coords[b as usize * dim + axis])
                .then(a.cmp(&b))
        });
        self.build(lo, mid, depth + 1);
        self.build(mid + 1, hi, depth + 1);
    }

    fn d2(&self, slot: u32, x: &[f64]) -> f64 {
        let p = self.point(slot as usize);
        p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    #[allow(clippy::too_many_arguments)]
    fn knn_rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        x: &[f64],
        k: usize,
        exclude_zero: bool,
        heap: &mut BinaryHeap<HeapItem>,
    ) {
        if lo >= hi {
            return;
        }
        let axis = depth % self.dim;
        let mid = lo + (hi - lo) / 2;
        let slot = self.order[mid];
        let d2 = self.d2(slot, x);
        if !(exclude_zero && d2 == 0.0) {
            let item = HeapItem { d2, slot };
            if heap.len() < k {
                heap.push(item);
            } else if item < *heap.peek().expect("nonempty") {
                heap.pop();
                heap.push(item);
            }
        }
        let diff = x[axis] - self.coords[slot as usize * self.dim + axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(near.0, near.1, depth + 1, x, k, exclude_zero, heap);
        // Visit the far side unless every point there is strictly farther
        // than the current worst; `<=` keeps equal-distance ties reachable.
        let visit_far = heap.len() < k || diff * diff <= heap.peek().expect("nonempty").d2;
        if visit_far {
            self.knn_rec(far.0, far.1, depth + 1, x, k, exclude_zero, heap);
        }
    }

    /// Collect candidates without enforcing how many were found.
    fn knn_sq_lenient(&self, x: &[f64], k: usize, exclude_zero: bool) -> Result<Vec<(f64, u32)>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, self.n, 0, x, k, exclude_zero, &mut heap);
        let mut out: Vec<(f64, u32)> = heap.into_iter().map(|h| (h.d2, h.slot)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(out)
    }

    /// Exactly `k` entries or an error telling the caller to reduce `k` or
    /// add points.
    fn knn_sq(&self, x: &[f64], k: usize, exclude_zero: bool) -> Result<Vec<(f64, u32)>> {
        if k == 0 || k > self.n {
            return Err(Error::NotEnoughPoints {
                needed: k.max(1),
                available: self.n,
            });
        }
        let out = self.knn_sq_lenient(x, k, exclude_zero)?;
        if out.len() < k {
            return Err(Error::NotEnoughPoints {
                needed: k,
                available: out.len(),
            });
        }
        Ok(out)
    }

    /// The `min(k, n)` nearest indexed points, sorted by nondecreasing
    /// distance. The query point itself is included when it is indexed.
    pub fn knn(&self, x: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        Ok(self
            .knn_sq_lenient(x, k, false)?
            .into_iter()
            .map(|(d2, slot)| Neighbor {
                id: slot as usize,
                dist: d2.sqrt(),
            })
            .collect())
    }

    /// Like [`knn`](Self::knn) but an indexed point exactly coinciding with
    /// `x` is excluded, so bandwidths at design points stay positive.
    pub fn knn_excluding_self(&self, x: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        Ok(self
            .knn_sq_lenient(x, k, true)?
            .into_iter()
            .map(|(d2, slot)| Neighbor {
                id: slot as usize,
                dist: d2.sqrt(),
            })
            .collect())
    }

    /// k-NN bandwidth `h_n(x)`: Euclidean distance from `x` to its k-th
    /// nearest design point, excluding `x`'s own record.
    pub fn knn_bandwidth(&self, x: &[f64], k: usize) -> Result<f64> {
        let nn = self.knn_sq(x, k, true)?;
        Ok(nn[k - 1].0.sqrt())
    }

    /// Squared-distance variant used by the smoother so that the k-th
    /// neighbor sits exactly on the neighborhood boundary.
    pub(crate) fn knn_bandwidth_sq(&self, x: &[f64], k: usize) -> Result<f64> {
        let nn = self.knn_sq(x, k, true)?;
        Ok(nn[k - 1].0)
    }

    #[allow(clippy::too_many_arguments)]
    fn within_rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        x: &[f64],
        r2: f64,
        exclude_zero: bool,
        out: &mut Vec<(f64, u32)>,
    ) {
        if lo >= hi {
            return;
        }
        let axis = depth % self.dim;
        let mid = lo + (hi - lo) / 2;
        let slot = self.order[mid];
        let d2 = self.d2(slot, x);
        if d2 <= r2 && !(exclude_zero && d2 == 0.0) {
            out.push((d2, slot));
        }
        let diff = x[axis] - self.coords[slot as usize * self.dim + axis];
        if diff < 0.0 || diff * diff <= r2 {
            self.within_rec(lo, mid, depth + 1, x, r2, exclude_zero, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_rec(mid + 1, hi, depth + 1, x, r2, exclude_zero, out);
        }
    }

    pub(crate) fn within_sq(&self, x: &[f64], r2: f64, exclude_zero: bool) -> Vec<(f64, u32)> {
        let mut out = Vec::new();
        self.within_rec(0, self.n, 0, x, r2, exclude_zero, &mut out);
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    /// All indexed points within Euclidean distance `r` of `x` (inclusive),
    /// sorted by `(dist, id)`.
    pub fn within(&self, x: &[f64], r: f64) -> Vec<Neighbor> {
        self.within_sq(x, r * r, false)
            .into_iter()
            .map(|(d2, slot)| Neighbor {
                id: slot as usize,
                dist: d2.sqrt(),
            })
            .collect()
    }
}

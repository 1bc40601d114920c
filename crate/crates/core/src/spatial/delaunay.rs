//! 2-D Delaunay triangulation (Bowyer–Watson with exact predicates).
//!
//! Insertion uses a remembering walk for point location and a cavity search
//! across shared edges, so rebuilding once per stage stays cheap even for
//! image-scale designs. Orientation and in-circle tests go through the
//! `robust` adaptive predicates; exactly cocircular configurations (ubiquitous
//! on pixel grids) are resolved strictly, which together with the fixed
//! Morton insertion order makes the result deterministic.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};

#[allow(unused_imports)]
use num_traits::Float;

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Tri {
    v: [u32; 3],
    /// `adj[i]` is the neighbor across the edge opposite vertex `i`.
    adj: [u32; 3],
    alive: bool,
}

/// A Delaunay triangulation of a 2-D point set.
#[derive(Clone, Debug)]
pub struct Triangulation {
    points: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples into [`points`](Self::points).
    pub triangles: Vec<[u32; 3]>,
}

fn coord(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Interleave the low 16 bits of `x` and `y` (Morton order).
fn morton(x: u32, y: u32) -> u32 {
    fn spread(mut v: u32) -> u32 {
        v &= 0xFFFF;
        v = (v | (v << 8)) & 0x00FF_00FF;
        v = (v | (v << 4)) & 0x0F0F_0F0F;
        v = (v | (v << 2)) & 0x3333_3333;
        (v | (v << 1)) & 0x5555_5555
    }
    spread(x) | (spread(y) << 1)
}

struct Builder {
    pts: Vec<[f64; 2]>,
    tris: Vec<Tri>,
    n_real: usize,
    last: u32,
}

impl Builder {
    fn new(points: &[[f64; 2]]) -> Self {
        let n = points.len();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        let m = 1e3 * ((hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0));
        let mut pts = points.to_vec();
        pts.push([cx - 3.0 * m, cy - m]);
        pts.push([cx + 3.0 * m, cy - m]);
        pts.push([cx, cy + 3.0 * m]);
        let sup = [n as u32, n as u32 + 1, n as u32 + 2];
        let tris = vec![Tri {
            v: sup,
            adj: [NONE; 3],
            alive: true,
        }];
        Builder {
            pts,
            tris,
            n_real: n,
            last: 0,
        }
    }

    fn orient_edge(&self, t: usize, e: usize, p: u32) -> f64 {
        let a = self.tris[t].v[(e + 1) % 3] as usize;
        let b = self.tris[t].v[(e + 2) % 3] as usize;
        orient2d(
            coord(self.pts[a]),
            coord(self.pts[b]),
            coord(self.pts[p as usize]),
        )
    }

    fn in_circumcircle(&self, t: usize, p: u32) -> bool {
        let v = self.tris[t].v;
        incircle(
            coord(self.pts[v[0] as usize]),
            coord(self.pts[v[1] as usize]),
            coord(self.pts[v[2] as usize]),
            coord(self.pts[p as usize]),
        ) > 0.0
    }

    /// Walk from the last touched triangle to one containing `p`.
    fn locate(&self, p: u32) -> Result<usize> {
        let mut t = self.last as usize;
        if !self.tris[t].alive {
            t = self
                .tris
                .iter()
                .position(|tr| tr.alive)
                .expect("triangulation never empties");
        }
        let budget = 4 * self.tris.len() + 16;
        'walk: for _ in 0..budget {
            for e in 0..3 {
                if self.orient_edge(t, e, p) < 0.0 {
                    let nb = self.tris[t].adj[e];
                    debug_assert!(nb != NONE, "walked out of the super-triangle");
                    t = nb as usize;
                    continue 'walk;
                }
            }
            return Ok(t);
        }
        // Exhaustive fallback; unreachable for well-formed input.
        for i in 0..self.tris.len() {
            if self.tris[i].alive && (0..3).all(|e| self.orient_edge(i, e, p) >= 0.0) {
                return Ok(i);
            }
        }
        Err(Error::InvalidParameter("point location failed".into()))
    }

    fn insert(&mut self, p: u32) -> Result<()> {
        let t0 = self.locate(p)?;
        // Grow the cavity of triangles whose circumcircle strictly contains
        // p. The containing triangle always qualifies: p is interior to it
        // (or to one of its edges) and p is never an existing vertex.
        let mut cavity: Vec<usize> = Vec::with_capacity(8);
        let mut in_cavity: BTreeMap<usize, ()> = BTreeMap::new();
        let mut stack = vec![t0];
        in_cavity.insert(t0, ());
        while let Some(t) = stack.pop() {
            cavity.push(t);
            for e in 0..3 {
                let nb = self.tris[t].adj[e];
                if nb == NONE {
                    continue;
                }
                let nb = nb as usize;
                if in_cavity.contains_key(&nb) {
                    continue;
                }
                if self.in_circumcircle(nb, p) {
                    in_cavity.insert(nb, ());
                    stack.push(nb);
                }
            }
        }
        // Directed boundary edges (interior of the cavity to the left),
        // keyed by source vertex; the cavity of a Delaunay insertion is a
        // star-shaped polygon, so they form one simple cycle.
        let mut loop_edges: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
        for &t in &cavity {
            for e in 0..3 {
                let nb = self.tris[t].adj[e];
                if nb != NONE && in_cavity.contains_key(&(nb as usize)) {
                    continue;
                }
                let a = self.tris[t].v[(e + 1) % 3];
                let b = self.tris[t].v[(e + 2) % 3];
                loop_edges.insert(a, (b, nb));
            }
        }
        for &t in &cavity {
            self.tris[t].alive = false;
        }
        // Re-triangulate the cavity as a fan around p, stitching adjacency
        // between consecutive fan triangles and the outside neighbors.
        let start = *loop_edges.keys().next().expect("nonempty cavity boundary");
        let mut created: Vec<usize> = Vec::with_capacity(loop_edges.len());
        let mut a = start;
        for _ in 0..=loop_edges.len() {
            let (b, outside) = loop_edges[&a];
            let id = self.tris.len();
            self.tris.push(Tri {
                v: [p, a, b],
                adj: [outside, NONE, NONE],
                alive: true,
            });
            if outside != NONE {
                let o = outside as usize;
                let slot = (0..3)
                    .find(|&s| self.tris[o].v[(s + 1) % 3] == b && self.tris[o].v[(s + 2) % 3] == a)
                    .expect("outside neighbor shares the boundary edge");
                self.tris[o].adj[slot] = id as u32;
            }
            created.push(id);
            a = b;
            if a == start {
                break;
            }
        }
        debug_assert_eq!(created.len(), loop_edges.len(), "boundary is one cycle");
        let m = created.len();
        for i in 0..m {
            let next = created[(i + 1) % m];
            let cur = created[i];
            // Edge (b, p) of `cur` (opposite vertex a, slot 1) touches the
            // next fan triangle; edge (p, a) of `next` (slot 2) touches cur.
            self.tris[cur].adj[1] = next as u32;
            self.tris[next].adj[2] = cur as u32;
        }
        self.last = created[0] as u32;
        Ok(())
    }

    fn finish(self) -> Result<Triangulation> {
        let n = self.n_real as u32;
        let triangles: Vec<[u32; 3]> = self
            .tris
            .iter()
            .filter(|t| t.alive && t.v.iter().all(|&v| v < n))
            .map(|t| t.v)
            .collect();
        if triangles.is_empty() {
            return Err(Error::DegenerateTriangulation);
        }
        let mut points = self.pts;
        points.truncate(self.n_real);
        Ok(Triangulation { points, triangles })
    }
}

impl Triangulation {
    /// Build the Delaunay triangulation of at least three non-collinear,
    /// pairwise distinct points.
    pub fn build(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateTriangulation);
        }
        if points
            .iter()
            .any(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        let mut keys: Vec<[u64; 2]> = points
            .iter()
            .map(|p| [p[0].to_bits(), p[1].to_bits()])
            .collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePoint { coords: Vec::new() });
        }

        let mut b = Builder::new(points);
        // Morton-sorted insertion keeps the locate walk short.
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let ext = [(hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300)];
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        order.sort_by_key(|&i| {
            let p = points[i as usize];
            let gx = (((p[0] - lo[0]) / ext[0]) * 65535.0) as u32;
            let gy = (((p[1] - lo[1]) / ext[1]) * 65535.0) as u32;
            (morton(gx.min(65535), gy.min(65535)), i)
        });
        for &i in &order {
            b.insert(i)?;
        }
        b.finish()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Vertex-average centroid of every triangle.
    pub fn centroids(&self) -> Vec<[f64; 2]> {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = [
                    self.points[t[0] as usize],
                    self.points[t[1] as usize],
                    self.points[t[2] as usize],
                ];
                [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
            })
            .collect()
    }
}

/// Centroids of the Delaunay triangles of a 2-D design: the candidate
/// sampling locations for the next stage.
pub fn delaunay_centroids(points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if let Some(p) = points.first() {
        if p.len() != 2 {
            return Err(Error::UnsupportedDimension { dim: p.len() });
        }
    }
    let pts: Vec<[f64; 2]> = points
        .iter()
        .map(|p| {
            if p.len() == 2 {
                Ok([p[0], p[1]])
            } else {
                Err(Error::UnsupportedDimension { dim: p.len() })
            }
        })
        .collect::<Result<_>>()?;
    let tri = Triangulation::build(&pts)?;
    Ok(tri
        .centroids()
        .into_iter()
        .map(|c| vec![c[0], c[1]])
        .collect())
}

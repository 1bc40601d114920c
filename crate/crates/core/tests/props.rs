//! Property tests for the spatial structures and the split/pmf invariants.

use jumpscan_core::dataset::DesignPoint;
use jumpscan_core::smoother::split_neighborhood;
use jumpscan_core::spatial::{SpatialIndex, Triangulation};
use jumpscan_core::Error;
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    (-1000i64..1000).prop_map(|v| v as f64 / 10.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Empty-circumcircle and hull-coverage checks on arbitrary point sets;
    /// degenerate inputs (duplicates, collinear) must be rejected cleanly.
    #[test]
    fn delaunay_is_valid_or_cleanly_degenerate(
        pts in proptest::collection::vec((coord(), coord()), 3..120)
    ) {
        let points: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        match Triangulation::build(&points) {
            Err(Error::DuplicatePoint { .. }) | Err(Error::DegenerateTriangulation) => {}
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
            Ok(tri) => {
                for t in &tri.triangles {
                    // Positive area, counterclockwise.
                    let [a, b, c] = [
                        points[t[0] as usize],
                        points[t[1] as usize],
                        points[t[2] as usize],
                    ];
                    let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                    prop_assert!(area2 > 0.0);
                    // Brute-force empty circumcircle.
                    for (i, p) in points.iter().enumerate() {
                        if t.contains(&(i as u32)) {
                            continue;
                        }
                        let det = robust::incircle(
                            robust::Coord { x: a[0], y: a[1] },
                            robust::Coord { x: b[0], y: b[1] },
                            robust::Coord { x: c[0], y: c[1] },
                            robust::Coord { x: p[0], y: p[1] },
                        );
                        prop_assert!(det <= 0.0, "point {i} strictly inside a circumcircle");
                    }
                }
                // Centroids never coincide with a design point.
                for c in tri.centroids() {
                    prop_assert!(points.iter().all(|p| *p != c));
                }
            }
        }
    }

    #[test]
    fn knn_equals_the_brute_force_sort(
        pts in proptest::collection::vec((coord(), coord()), 1..60),
        q in (coord(), coord()),
        k in 1usize..12,
    ) {
        let points: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
        let index = SpatialIndex::from_points(&points).unwrap();
        let x = [q.0, q.1];
        let k = k.min(points.len());
        let got = index.knn(&x, k).unwrap();
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (g, w) in got.iter().zip(all.iter().take(k)) {
            prop_assert_eq!(g.id, w.1);
        }
    }

    /// The split is exactly the sign of the inner product, and the two
    /// sides partition the input.
    #[test]
    fn split_matches_the_inner_product_sign(
        pts in proptest::collection::vec((coord(), coord()), 1..40),
        center in (coord(), coord()),
        dir in (coord(), coord()),
    ) {
        let neighbors: Vec<DesignPoint> = pts
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| DesignPoint { id, coords: vec![x, y] })
            .collect();
        let x = [center.0, center.1];
        let beta = [dir.0, dir.1];
        let (s1, s2) = split_neighborhood(&x, &beta, &neighbors);
        prop_assert_eq!(s1.len() + s2.len(), neighbors.len());
        let norm = (beta[0] * beta[0] + beta[1] * beta[1]).sqrt();
        let effective: [f64; 2] = if norm < 1e-12 { [1.0, 0.0] } else { beta };
        for (side, want_nonneg) in [(&s1, true), (&s2, false)] {
            for &i in side.iter() {
                let dot = effective[0] * (neighbors[i].coords[0] - x[0])
                    + effective[1] * (neighbors[i].coords[1] - x[1]);
                prop_assert_eq!(dot >= 0.0, want_nonneg);
            }
        }
    }
}

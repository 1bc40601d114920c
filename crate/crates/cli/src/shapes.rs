//! Synthetic test surfaces.

use anyhow::{bail, Result};
use jumpscan_core::dataset::{Background, Region, SyntheticSurface};

/// Named piecewise-continuous test surfaces on a `width × height` grid.
///
/// * `step` — binary image: 0 on the left half, 1 on the right.
/// * `disk` — one disk jump of +0.7 on a constant 0.15 background.
/// * `scene` — gentle intensity ramp with two disks of opposite jumps.
pub fn make_shape(shape: &str, width: usize, height: usize) -> Result<SyntheticSurface> {
    let (w, h) = (width as f64, height as f64);
    let surface = match shape {
        "step" => SyntheticSurface {
            background: Background::Constant(0.0),
            regions: vec![(
                Region::HalfSpace {
                    normal: vec![1.0, 0.0],
                    offset: w / 2.0,
                },
                1.0,
            )],
        },
        "disk" => SyntheticSurface {
            background: Background::Constant(0.15),
            regions: vec![(
                Region::Ball {
                    center: vec![(w - 1.0) / 2.0, (h - 1.0) / 2.0],
                    radius: w.min(h) / 4.0,
                },
                0.7,
            )],
        },
        "scene" => SyntheticSurface {
            background: Background::Affine {
                intercept: 0.2,
                slope: vec![0.1 / w, 0.05 / h],
            },
            regions: vec![
                (
                    Region::Ball {
                        center: vec![0.3 * (w - 1.0), 0.35 * (h - 1.0)],
                        radius: 0.16 * w.min(h),
                    },
                    0.6,
                ),
                (
                    Region::Ball {
                        center: vec![0.7 * (w - 1.0), 0.68 * (h - 1.0)],
                        radius: 0.12 * w.min(h),
                    },
                    -0.15,
                ),
            ],
        },
        other => bail!("unknown shape {other:?} (expected step, disk, or scene)"),
    };
    Ok(surface)
}

#[cfg(test)]
mod tests {
    use super::*;
    use jumpscan_core::dataset::{Grid, GroundTruth};

    #[test]
    fn shapes_build_on_their_grids() {
        for shape in ["step", "disk", "scene"] {
            let s = make_shape(shape, 101, 101).unwrap();
            let t = GroundTruth::make_synthetic(s, Grid::new_2d(101, 101).unwrap(), 0.1).unwrap();
            assert!(t.has_jumps(), "{shape} must contain a jump");
        }
        assert!(make_shape("bogus", 10, 10).is_err());
    }

    #[test]
    fn step_is_binary() {
        let s = make_shape("step", 100, 50).unwrap();
        assert_eq!(s.eval(&[10.0, 25.0]), 0.0);
        assert_eq!(s.eval(&[90.0, 25.0]), 1.0);
    }
}

//! Isotropic kernels with unit-ball support.

#[allow(unused_imports)]
use num_traits::Float;

/// Kernel family. All members are isotropic with support `{u : uᵀu ≤ 1}`;
/// Epanechnikov and Triweight are Lipschitz-1 continuous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Triweight,
    Uniform,
}

impl Kernel {
    /// Unnormalized kernel profile as a function of the squared radius
    /// `r2 = uᵀu`. Zero outside the unit ball, maximal value 1 at the origin.
    #[inline]
    pub fn profile(&self, r2: f64) -> f64 {
        if !(r2 <= 1.0) {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 1.0 - r2,
            Kernel::Triweight => {
                let t = 1.0 - r2;
                t * t * t
            }
            Kernel::Uniform => 1.0,
        }
    }

    /// Constant `c` such that `c · profile(‖u‖²)` integrates to 1 over the
    /// unit ball in `ℝ^p`.
    pub fn density_constant(&self, p: usize) -> f64 {
        let v = unit_ball_volume(p);
        let pf = p as f64;
        match self {
            Kernel::Epanechnikov => (pf + 2.0) / (2.0 * v),
            Kernel::Triweight => (pf + 2.0) * (pf + 4.0) * (pf + 6.0) / (48.0 * v),
            Kernel::Uniform => 1.0 / v,
        }
    }

    /// Normalized kernel density value at squared radius `r2`.
    #[inline]
    pub fn density(&self, r2: f64, p: usize) -> f64 {
        self.density_constant(p) * self.profile(r2)
    }
}

/// Volume of the unit ball in `ℝ^p` via the recurrence
/// `V_p = V_{p-2} · 2π/p`, `V_0 = 1`, `V_1 = 2`.
pub fn unit_ball_volume(p: usize) -> f64 {
    match p {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(p - 2) * 2.0 * core::f64::consts::PI / p as f64,
    }
}

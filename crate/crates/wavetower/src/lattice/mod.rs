//! Spatial grids, sampled complex fields, packet constructors, and the
//! local observables (density, current, velocity) built from them.
//!
//! Natural units throughout: hbar = 1. Mass and the signal speed c are
//! run parameters. Grid points are cell-centered, `x_i = x_min + (i+1/2)dx`,
//! so a mirror-symmetric layout about the domain center is exact.

mod field;
mod packet;

pub use field::{expectation_position, field_norm, inner_product, local_velocity, ComplexField};
pub use packet::{
    make_gaussian, make_pulse_train, make_transverse_phase, raised_cosine_bump, PacketShape,
    PacketSpec,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary handling for a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Dirichlet ends plus a sponge ramp that drains outgoing flux.
    /// Norm and energy removed by the sponge are reported, never dropped.
    Absorbing,
}

/// A uniform 1D grid. `dt` travels with the grid because every consumer
/// (propagator, detector, audits) must agree on the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n_points: usize,
    pub dx: f64,
    pub dt: f64,
    pub x_min: f64,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(n_points: usize, dx: f64, dt: f64, x_min: f64, boundary: Boundary) -> Result<Self> {
        if n_points < 16 {
            return Err(Error::InconsistentPhysics(format!(
                "grid needs at least 16 points, got {n_points}"
            )));
        }
        if !(dx > 0.0) || !(dt > 0.0) {
            return Err(Error::InconsistentPhysics(format!(
                "grid spacings must be positive (dx={dx}, dt={dt})"
            )));
        }
        Ok(Grid {
            n_points,
            dx,
            dt,
            x_min,
            boundary,
        })
    }

    /// Domain length `L = n * dx`.
    pub fn length(&self) -> f64 {
        self.n_points as f64 * self.dx
    }

    /// Cell-centered coordinate of point `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.length()
    }

    /// Index range `[lo, hi)` of points with `|x - center| <= half_width`.
    pub fn window_indices(&self, center: f64, half_width: f64) -> (usize, usize) {
        let lo = ((center - half_width - self.x_min) / self.dx - 0.5).ceil().max(0.0) as usize;
        let hi = (((center + half_width - self.x_min) / self.dx - 0.5).floor() as isize + 1)
            .clamp(0, self.n_points as isize) as usize;
        (lo.min(self.n_points), hi.max(lo.min(self.n_points)))
    }

    /// Check that a packet of full support `width` centered at `center`
    /// fits the interior with room to spare.
    pub fn check_support(&self, center: f64, width: f64) -> Result<()> {
        if width * 10.0 > self.length() {
            return Err(Error::PacketTooWide(format!(
                "support {width} too wide for domain length {}",
                self.length()
            )));
        }
        let (lo, hi) = (center - width / 2.0, center + width / 2.0);
        if lo < self.x_min || hi > self.x_max() {
            return Err(Error::PacketTooWide(format!(
                "support [{lo}, {hi}] leaves domain [{}, {}]",
                self.x_min,
                self.x_max()
            )));
        }
        Ok(())
    }
}

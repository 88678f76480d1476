//! Per-site gradient components and magnitudes.
//!
//! In-plane components use the unnormalized 3x3 Sobel kernels (weights
//! 1-2-1) applied per z-slice; the depth component is a central difference
//! `v(z+1) - v(z-1)`. Borders replicate the nearest edge value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{site_index, GridDims, ScalarGrid, Site};

/// Operator used for the in-plane components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientOperator {
    #[default]
    Sobel,
    /// `v(x+1) - v(x-1)` and `v(y+1) - v(y-1)`.
    Central,
}

impl std::str::FromStr for GradientOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sobel" => Ok(GradientOperator::Sobel),
            "central" => Ok(GradientOperator::Central),
            other => Err(Error::config(format!(
                "unknown gradient operator `{other}` (expected sobel or central)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    dims: GridDims,
    gx: Vec<f64>,
    gy: Vec<f64>,
    gz: Vec<f64>,
    mag: Vec<f64>,
    gmax: f64,
    gmin: f64,
}

impl GradientField {
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn gx(&self) -> &[f64] {
        &self.gx
    }

    pub fn gy(&self) -> &[f64] {
        &self.gy
    }

    /// All zero for 2D grids.
    pub fn gz(&self) -> &[f64] {
        &self.gz
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.mag
    }

    /// Largest magnitude over the grid.
    pub fn gmax(&self) -> f64 {
        self.gmax
    }

    /// Smallest magnitude over the grid.
    pub fn gmin(&self) -> f64 {
        self.gmin
    }

    #[inline]
    pub fn magnitude_index(&self, index: usize) -> f64 {
        self.mag[index]
    }

    /// Magnitudes mapped linearly onto `0..=maxval` (`round(mag / gmax *
    /// maxval)`); all zero on a flat image.
    pub fn normalized(&self, maxval: u16) -> ScalarGrid {
        let scale = if self.gmax > 0.0 {
            f64::from(maxval) / self.gmax
        } else {
            0.0
        };
        let values = self
            .mag
            .iter()
            .map(|m| (m * scale).round().min(f64::from(maxval)))
            .collect();
        ScalarGrid::new(self.dims, values).expect("finite magnitudes")
    }
}

/// Gradient magnitude at `s`.
pub fn magnitude_at(field: &GradientField, s: Site) -> Result<f64> {
    Ok(field.mag[site_index(field.dims, s)?])
}

/// Sobel gradient with replicated borders.
pub fn compute_gradient(grid: &ScalarGrid) -> GradientField {
    compute_gradient_with(grid, GradientOperator::Sobel)
}

pub fn compute_gradient_with(grid: &ScalarGrid, op: GradientOperator) -> GradientField {
    let dims = grid.dims();
    let (w, h, d) = (dims.width(), dims.height(), dims.depth());
    let v = grid.values();

    let clamp = |i: usize, delta: isize, n: usize| -> usize {
        (i as isize + delta).clamp(0, n as isize - 1) as usize
    };
    let at = |x: usize, y: usize, z: usize| v[x + w * (y + h * z)];

    let components: Vec<[f64; 3]> = (0..dims.len())
        .into_par_iter()
        .map(|i| {
            let s = dims.site(i);
            let (x, y, z) = (s.x, s.y, s.z);
            let (xl, xr) = (clamp(x, -1, w), clamp(x, 1, w));
            let (yt, yb) = (clamp(y, -1, h), clamp(y, 1, h));
            let (gx, gy) = match op {
                GradientOperator::Sobel => {
                    let gx = (at(xr, yt, z) - at(xl, yt, z))
                        + 2.0 * (at(xr, y, z) - at(xl, y, z))
                        + (at(xr, yb, z) - at(xl, yb, z));
                    let gy = (at(xl, yb, z) - at(xl, yt, z))
                        + 2.0 * (at(x, yb, z) - at(x, yt, z))
                        + (at(xr, yb, z) - at(xr, yt, z));
                    (gx, gy)
                }
                GradientOperator::Central => {
                    (at(xr, y, z) - at(xl, y, z), at(x, yb, z) - at(x, yt, z))
                }
            };
            let gz = if d > 1 {
                at(x, y, clamp(z, 1, d)) - at(x, y, clamp(z, -1, d))
            } else {
                0.0
            };
            [gx, gy, gz]
        })
        .collect();

    let mut gx = Vec::with_capacity(components.len());
    let mut gy = Vec::with_capacity(components.len());
    let mut gz = Vec::with_capacity(components.len());
    let mut mag = Vec::with_capacity(components.len());
    for [a, b, c] in components {
        gx.push(a);
        gy.push(b);
        gz.push(c);
        mag.push((a * a + b * b + c * c).sqrt());
    }
    let (gmin, gmax) = mag
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| {
            (lo.min(m), hi.max(m))
        });

    GradientField {
        dims,
        gx,
        gy,
        gz,
        mag,
        gmax,
        gmin,
    }
}

//! Grid model shared by every other module.
//!
//! A 2D image is a volume with `depth == 1`. Sites are linearized x-fastest,
//! then y, then z, and every traversal in the crate follows that order.

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result};

/// Extent of a grid in sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    width: usize,
    height: usize,
    depth: usize,
}

impl GridDims {
    pub fn new(width: usize, height: usize, depth: usize) -> Result<Self> {
        if width == 0 || height == 0 || depth == 0 {
            return Err(Error::config(format!(
                "grid dimensions must be positive, got {width}x{height}x{depth}"
            )));
        }
        width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(depth))
            .ok_or_else(|| {
                Error::config(format!(
                    "grid {width}x{height}x{depth} overflows the addressable range"
                ))
            })?;
        Ok(Self {
            width,
            height,
            depth,
        })
    }

    pub fn new_2d(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, 1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_2d(&self) -> bool {
        self.depth == 1
    }

    pub fn len(&self) -> usize {
        self.width * self.height * self.depth
    }

    /// Always false; a grid holds at least one site.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, s: Site) -> bool {
        s.x < self.width && s.y < self.height && s.z < self.depth
    }

    pub fn check(&self, s: Site) -> Result<()> {
        for (axis, value, extent) in [
            (Axis::X, s.x, self.width),
            (Axis::Y, s.y, self.height),
            (Axis::Z, s.z, self.depth),
        ] {
            if value >= extent {
                return Err(Error::OutOfBounds {
                    axis,
                    value,
                    extent,
                });
            }
        }
        Ok(())
    }

    /// Linear index of a site known to be in bounds.
    #[inline]
    pub fn index_unchecked(&self, s: Site) -> usize {
        s.x + self.width * (s.y + self.height * s.z)
    }

    #[inline]
    pub fn site(&self, index: usize) -> Site {
        let plane = self.width * self.height;
        let z = index / plane;
        let rem = index % plane;
        Site {
            x: rem % self.width,
            y: rem / self.width,
            z,
        }
    }

    /// Sites in linearization order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(move |i| self.site(i))
    }
}

impl std::fmt::Display for GridDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.depth == 1 {
            write!(f, "{}x{}", self.width, self.height)
        } else {
            write!(f, "{}x{}x{}", self.width, self.height, self.depth)
        }
    }
}

/// A grid coordinate. Only meaningful relative to a [`GridDims`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Site {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }

    pub const fn xy(x: usize, y: usize) -> Self {
        Self { x, y, z: 0 }
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

/// `x + y*width + z*width*height`, with a bounds check.
pub fn site_index(dims: GridDims, s: Site) -> Result<usize> {
    dims.check(s)?;
    Ok(dims.index_unchecked(s))
}

/// Adjacency system used for growth and for region adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Neighborhood {
    /// Axis neighbors in the plane. 2D only.
    N4,
    /// Axis and diagonal neighbors in the plane. 2D only.
    N8,
    /// Axis neighbors in 3D. Volumes only.
    N6,
}

// left, right, top, bottom, front, back
const AXIS_OFFSETS: [(isize, isize, isize); 6] = [
    (-1, 0, 0),
    (1, 0, 0),
    (0, -1, 0),
    (0, 1, 0),
    (0, 0, -1),
    (0, 0, 1),
];

// diagonals in row-major order
const DIAGONAL_OFFSETS: [(isize, isize, isize); 4] =
    [(-1, -1, 0), (1, -1, 0), (-1, 1, 0), (1, 1, 0)];

impl Neighborhood {
    /// Offsets in canonical order. The order is part of the determinism contract.
    pub fn offsets(self) -> &'static [(isize, isize, isize)] {
        static N4: [(isize, isize, isize); 4] = [
            AXIS_OFFSETS[0],
            AXIS_OFFSETS[1],
            AXIS_OFFSETS[2],
            AXIS_OFFSETS[3],
        ];
        static N8: [(isize, isize, isize); 8] = [
            AXIS_OFFSETS[0],
            AXIS_OFFSETS[1],
            AXIS_OFFSETS[2],
            AXIS_OFFSETS[3],
            DIAGONAL_OFFSETS[0],
            DIAGONAL_OFFSETS[1],
            DIAGONAL_OFFSETS[2],
            DIAGONAL_OFFSETS[3],
        ];
        match self {
            Neighborhood::N4 => &N4,
            Neighborhood::N8 => &N8,
            Neighborhood::N6 => &AXIS_OFFSETS,
        }
    }

    pub fn size(self) -> usize {
        self.offsets().len()
    }

    pub fn is_compatible(self, dims: GridDims) -> bool {
        match self {
            Neighborhood::N4 | Neighborhood::N8 => dims.is_2d(),
            Neighborhood::N6 => !dims.is_2d(),
        }
    }

    pub fn check(self, dims: GridDims) -> Result<()> {
        if self.is_compatible(dims) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "neighborhood {self} cannot be used on a {} grid ({dims})",
                if dims.is_2d() { "2D" } else { "3D" }
            )))
        }
    }

    /// Default for best-first growth: the 8-connected second-order
    /// neighborhood in 2D, 6-connectivity in 3D.
    pub fn classic_default(dims: GridDims) -> Self {
        if dims.is_2d() {
            Neighborhood::N8
        } else {
            Neighborhood::N6
        }
    }

    /// Default for stack growth: 4-connectivity in 2D, 6 in 3D.
    pub fn stack_default(dims: GridDims) -> Self {
        if dims.is_2d() {
            Neighborhood::N4
        } else {
            Neighborhood::N6
        }
    }
}

impl std::fmt::Display for Neighborhood {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Neighborhood::N4 => "n4",
            Neighborhood::N8 => "n8",
            Neighborhood::N6 => "n6",
        })
    }
}

impl std::str::FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n4" | "4" => Ok(Neighborhood::N4),
            "n8" | "8" => Ok(Neighborhood::N8),
            "n6" | "6" => Ok(Neighborhood::N6),
            other => Err(Error::config(format!(
                "unknown neighborhood `{other}` (expected n4, n8 or n6)"
            ))),
        }
    }
}

/// In-bounds neighbors of a site, in canonical order, without allocating.
#[derive(Clone)]
pub struct NeighborIter {
    dims: GridDims,
    origin: Site,
    offsets: std::slice::Iter<'static, (isize, isize, isize)>,
}

impl NeighborIter {
    pub fn new(dims: GridDims, origin: Site, nb: Neighborhood) -> Self {
        Self {
            dims,
            origin,
            offsets: nb.offsets().iter(),
        }
    }
}

impl Iterator for NeighborIter {
    type Item = Site;

    #[inline]
    fn next(&mut self) -> Option<Site> {
        for &(dx, dy, dz) in self.offsets.by_ref() {
            let x = self.origin.x.checked_add_signed(dx);
            let y = self.origin.y.checked_add_signed(dy);
            let z = self.origin.z.checked_add_signed(dz);
            if let (Some(x), Some(y), Some(z)) = (x, y, z) {
                let s = Site { x, y, z };
                if self.dims.contains(s) {
                    return Some(s);
                }
            }
        }
        None
    }
}

/// In-bounds neighbors of `s` in canonical order: left, right, top, bottom,
/// then front, back (N6) or the four in-plane diagonals in row-major order (N8).
pub fn neighbors(dims: GridDims, s: Site, nb: Neighborhood) -> Result<Vec<Site>> {
    dims.check(s)?;
    nb.check(dims)?;
    Ok(NeighborIter::new(dims, s, nb).collect())
}

/// Immutable grid of finite intensity values, linearized x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    dims: GridDims,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::data(format!(
                "grid {dims} needs {} values, got {}",
                dims.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite intensity at site {}",
                dims.site(i)
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut(Site) -> f64) -> Result<Self> {
        let values = dims.sites().map(&mut f).collect();
        Self::new(dims, values)
    }

    pub fn filled(dims: GridDims, value: f64) -> Result<Self> {
        Self::new(dims, vec![value; dims.len()])
    }

    pub fn from_u8(dims: GridDims, samples: &[u8]) -> Result<Self> {
        Self::new(dims, samples.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn from_u16(dims: GridDims, samples: &[u16]) -> Result<Self> {
        Self::new(dims, samples.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: Site) -> Result<f64> {
        Ok(self.values[site_index(self.dims, s)?])
    }

    #[inline]
    pub fn at(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Multiply every intensity by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.dims, self.values.iter().map(|v| v * c).collect())
    }

    /// The 2D grid at depth `z`.
    pub fn slice_z(&self, z: usize) -> Result<Self> {
        if z >= self.dims.depth {
            return Err(Error::OutOfBounds {
                axis: Axis::Z,
                value: z,
                extent: self.dims.depth,
            });
        }
        let plane = self.dims.width * self.dims.height;
        let dims = GridDims::new_2d(self.dims.width, self.dims.height)?;
        Self::new(dims, self.values[z * plane..(z + 1) * plane].to_vec())
    }
}

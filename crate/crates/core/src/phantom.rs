//! Synthetic test images with known ground truth.
//!
//! `BridgedDisks` models a leakage scenario: two bright disks (A on top, B
//! below) joined by a narrow bright bridge. Each disk plateau at
//! `fg` is wrapped in a one-site rim at `fg - (fg - bg) / 6` (every site
//! within Chebyshev distance 1 of the plateau), so plateau sites see only a
//! gentle step while rim sites straddle the full `fg`/`bg` contrast. The
//! bridge runs between the two rims and ramps linearly from
//! `mid = (fg + bg) / 2` next to disk A up to `fg` next to disk B; the jump
//! from disk A's plateau down to the bridge start is the gradient ridge.
//!
//! Geometry for a `W x H` grid: radius `r = H / 8`, centres
//! `(W/2, round(5H/16))` and `(W/2, H - round(5H/16))`, bridge columns
//! centred on `W/2`. Volumes repeat the 2D layout on every slice.
//!
//! Noise: `ChaCha8` seeded with `rng_seed` (`seed_from_u64`), one `u64` per
//! uniform draw mapped to `[0, 1)` by its top 53 bits, Box-Muller pairs
//! consumed in site order. Noisy values are rounded and clamped to
//! `0..=65535`. Derived intensity levels (rim, bridge) are rounded to
//! integers.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridDims, ScalarGrid, Site};
use crate::grow::{LabelMap, RegionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    BridgedDisks,
    /// `bg` for `x < W/2`, `fg` from `x = W/2` on; ground truth 1 on the `fg` side.
    StepWedge,
    /// `bg` everywhere plus noise; ground truth 1 everywhere.
    UniformNoise,
}

impl std::str::FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "bridged-disks" => Ok(PhantomKind::BridgedDisks),
            "step-wedge" => Ok(PhantomKind::StepWedge),
            "uniform-noise" => Ok(PhantomKind::UniformNoise),
            other => Err(Error::config(format!(
                "unknown phantom kind `{other}` (expected bridged-disks, step-wedge or uniform-noise)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub dims: GridDims,
    pub fg_intensity: f64,
    pub bg_intensity: f64,
    pub bridge_width: usize,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl PhantomSpec {
    /// 200 on 20, bridge width 3, no noise.
    pub fn new(kind: PhantomKind, dims: GridDims) -> Self {
        Self {
            kind,
            dims,
            fg_intensity: 200.0,
            bg_intensity: 20.0,
            bridge_width: 3,
            noise_sigma: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fg_intensity.is_finite() || !self.bg_intensity.is_finite() {
            return Err(Error::config("phantom intensities must be finite"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        match self.kind {
            PhantomKind::BridgedDisks | PhantomKind::StepWedge
                if self.fg_intensity == self.bg_intensity =>
            {
                Err(Error::config("contrast phantoms need fg != bg"))
            }
            PhantomKind::BridgedDisks => DiskLayout::new(self.dims, self.bridge_width).map(|_| ()),
            _ => Ok(()),
        }
    }
}

/// Placement of the two disks and the bridge of a `BridgedDisks` phantom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiskLayout {
    pub radius: usize,
    pub center_a: Site,
    pub center_b: Site,
    /// First bridge column.
    pub bridge_x: usize,
    pub bridge_width: usize,
    /// Bridge rows, inclusive: just below A's rim to just above B's rim.
    pub bridge_rows: (usize, usize),
}

impl DiskLayout {
    pub fn new(dims: GridDims, bridge_width: usize) -> Result<Self> {
        let (w, h) = (dims.width(), dims.height());
        let r = h / 8;
        let cx = w / 2;
        let cy_a = (5 * h + 8) / 16;
        let cy_b = h - cy_a;
        let fits = r >= 2
            && cx > r
            && cx + r + 1 < w
            && cy_a > r
            && cy_b + r + 1 < h
            && cy_a + r + 2 <= cy_b - r - 2;
        if !fits {
            return Err(Error::config(format!(
                "bridged disks do not fit in {dims} (needs roughly 32x32 or larger)"
            )));
        }
        if bridge_width == 0 || bridge_width > 2 * r + 1 {
            return Err(Error::config(format!(
                "bridge width must lie in 1..={} for {dims}, got {bridge_width}",
                2 * r + 1
            )));
        }
        Ok(Self {
            radius: r,
            center_a: Site::xy(cx, cy_a),
            center_b: Site::xy(cx, cy_b),
            bridge_x: cx - bridge_width / 2,
            bridge_width,
            bridge_rows: (cy_a + r + 2, cy_b - r - 2),
        })
    }

    /// 1 inside disk A's plateau, 2 inside disk B's, else 0.
    pub fn plateau(&self, x: usize, y: usize) -> RegionId {
        let r2 = (self.radius * self.radius) as isize;
        let inside = |c: Site| {
            let dx = x as isize - c.x as isize;
            let dy = y as isize - c.y as isize;
            dx * dx + dy * dy <= r2
        };
        if inside(self.center_a) {
            1
        } else if inside(self.center_b) {
            2
        } else {
            0
        }
    }

    fn on_rim(&self, x: usize, y: usize) -> bool {
        (-1isize..=1).any(|dy| {
            (-1isize..=1).any(
                |dx| match (x.checked_add_signed(dx), y.checked_add_signed(dy)) {
                    (Some(nx), Some(ny)) => self.plateau(nx, ny) != 0,
                    _ => false,
                },
            )
        })
    }

    fn bridge_t(&self, x: usize, y: usize) -> Option<f64> {
        let (y0, y1) = self.bridge_rows;
        let in_cols = x >= self.bridge_x && x < self.bridge_x + self.bridge_width;
        (in_cols && (y0..=y1).contains(&y)).then(|| {
            if y1 == y0 {
                0.0
            } else {
                (y - y0) as f64 / (y1 - y0) as f64
            }
        })
    }
}

struct Normal {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Normal {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Generate the image and its ground-truth labels. Bit-deterministic for a
/// given spec.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(ScalarGrid, LabelMap)> {
    spec.validate()?;
    let dims = spec.dims;
    let (fg, bg) = (spec.fg_intensity, spec.bg_intensity);

    let mut values = Vec::with_capacity(dims.len());
    let mut truth = Vec::with_capacity(dims.len());
    match spec.kind {
        PhantomKind::BridgedDisks => {
            let layout = DiskLayout::new(dims, spec.bridge_width)?;
            let rim = (fg - (fg - bg) / 6.0).round();
            let mid = ((fg + bg) / 2.0).round();
            for s in dims.sites() {
                let label = layout.plateau(s.x, s.y);
                let v = if label != 0 {
                    fg
                } else if layout.on_rim(s.x, s.y) {
                    rim
                } else if let Some(t) = layout.bridge_t(s.x, s.y) {
                    (mid + (fg - mid) * t).round()
                } else {
                    bg
                };
                values.push(v);
                truth.push(label);
            }
        }
        PhantomKind::StepWedge => {
            let step = dims.width() / 2;
            for s in dims.sites() {
                let on = s.x >= step;
                values.push(if on { fg } else { bg });
                truth.push(RegionId::from(on));
            }
        }
        PhantomKind::UniformNoise => {
            values.resize(dims.len(), bg);
            truth.resize(dims.len(), 1);
        }
    }

    if spec.noise_sigma > 0.0 {
        let mut normal = Normal::new(spec.rng_seed);
        for v in &mut values {
            *v = (*v + spec.noise_sigma * normal.sample())
                .round()
                .clamp(0.0, 65535.0);
        }
    }

    let grid = ScalarGrid::new(dims, values)?;
    let regions = match spec.kind {
        PhantomKind::BridgedDisks => 2,
        _ => 1,
    };
    let truth = LabelMap::from_labels_with_count(&grid, truth, regions)?;
    Ok((grid, truth))
}

//! Image and volume I/O.
//!
//! * Binary PGM (`P5`), 8-bit (`maxval <= 255`) or 16-bit big-endian samples.
//! * Raw volumes: little-endian `u8` or `u16` samples, x-fastest, described
//!   by a sidecar text file `<path>.desc` holding `width height depth format`.
//! * Masks: labels written verbatim, as PGM for 2D grids and raw `u16` for
//!   volumes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{GridDims, ScalarGrid};
use crate::grow::{LabelMap, RegionId};

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Integer sample values of a grid, or an error naming the first value that
/// is fractional or outside `0..=max`.
fn integer_samples(values: &[f64], max: u32, dims: GridDims) -> Result<Vec<u32>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.fract() == 0.0 && v >= 0.0 && v <= f64::from(max) {
                Ok(v as u32)
            } else {
                Err(Error::data(format!(
                    "value {v} at {} is not an integer in 0..={max}",
                    dims.site(i)
                )))
            }
        })
        .collect()
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self
                    .bytes
                    .get(self.pos)
                    .is_some_and(|&c| c != b'\n' && c != b'\r')
                {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(start, format!("{what} out of range")))
    }
}

/// Decode a binary PGM image.
pub fn decode_pgm(bytes: &[u8]) -> Result<ScalarGrid> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::parse(
            0,
            "unsupported magic (expected binary PGM `P5`)",
        ));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(
            maxval_at,
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::parse(cur.pos, "expected whitespace after maxval")),
    }
    let dims = GridDims::new_2d(width as usize, height as usize)
        .map_err(|e| Error::parse(0, e.to_string()))?;

    let sample_size = if maxval < 256 { 1 } else { 2 };
    let start = cur.pos;
    let expected = dims.len() * sample_size;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(Error::parse(
            bytes.len().saturating_sub(1),
            format!(
                "truncated payload: expected {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::parse(
            start + expected,
            format!(
                "trailing data: expected {expected} payload bytes, found {}",
                payload.len()
            ),
        ));
    }

    let mut values = Vec::with_capacity(dims.len());
    for i in 0..dims.len() {
        let v = if sample_size == 1 {
            u32::from(payload[i])
        } else {
            u32::from(u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]))
        };
        if v > maxval {
            return Err(Error::parse(
                start + i * sample_size,
                format!("sample {v} exceeds maxval {maxval}"),
            ));
        }
        values.push(f64::from(v));
    }
    ScalarGrid::new(dims, values)
}

/// Encode a 2D integer-valued grid as binary PGM. Grids whose values fit in
/// a byte use `maxval = 255`, otherwise `maxval = 65535`.
pub fn encode_pgm(grid: &ScalarGrid) -> Result<Vec<u8>> {
    let dims = grid.dims();
    if !dims.is_2d() {
        return Err(Error::config(format!(
            "PGM holds 2D images only, grid is {dims}"
        )));
    }
    let samples = integer_samples(grid.values(), 65535, dims)?;
    let wide = samples.iter().any(|&v| v > 255);
    let maxval = if wide { 65535 } else { 255 };
    let mut out = format!("P5\n{} {}\n{maxval}\n", dims.width(), dims.height()).into_bytes();
    out.reserve(samples.len() * if wide { 2 } else { 1 });
    for v in samples {
        if wide {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        } else {
            out.push(v as u8);
        }
    }
    Ok(out)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<ScalarGrid> {
    decode_pgm(&read_file(path.as_ref())?)
}

pub fn write_pgm(grid: &ScalarGrid, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_pgm(grid)?)
}

/// Gray level used to display `label`: 0 stays black, region `l` maps to
/// `255 - ((l - 1) * 53) % 192`, so the first regions read as
/// 255, 202, 149, 96, 235, ...
pub fn label_gray(label: RegionId) -> u8 {
    if label == 0 {
        0
    } else {
        (255 - ((u64::from(label) - 1) * 53) % 192) as u8
    }
}

/// Display rendering of a label map using [`label_gray`].
pub fn render_labels(labels: &LabelMap) -> Result<ScalarGrid> {
    ScalarGrid::new(
        labels.dims(),
        labels
            .labels()
            .iter()
            .map(|&l| f64::from(label_gray(l)))
            .collect(),
    )
}

fn labels_as_grid(labels: &LabelMap) -> Result<ScalarGrid> {
    if let Some(&l) = labels.labels().iter().find(|&&l| l > 65535) {
        return Err(Error::data(format!("label {l} does not fit in 16 bits")));
    }
    ScalarGrid::new(
        labels.dims(),
        labels.labels().iter().map(|&l| f64::from(l)).collect(),
    )
}

/// Mask as PGM with label values verbatim.
pub fn encode_mask_pgm(labels: &LabelMap) -> Result<Vec<u8>> {
    encode_pgm(&labels_as_grid(labels)?)
}

/// Sample encoding of a raw volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    U8,
    /// Unsigned 16-bit, little-endian.
    U16Le,
}

impl SampleFormat {
    pub fn size(self) -> usize {
        match self {
            SampleFormat::U8 => 1,
            SampleFormat::U16Le => 2,
        }
    }

    fn max(self) -> u32 {
        match self {
            SampleFormat::U8 => 255,
            SampleFormat::U16Le => 65535,
        }
    }
}

impl fmt::Display for SampleFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleFormat::U8 => "u8",
            SampleFormat::U16Le => "u16le",
        })
    }
}

impl FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "u8" => Ok(SampleFormat::U8),
            "u16" | "u16le" => Ok(SampleFormat::U16Le),
            other => Err(Error::config(format!(
                "unknown sample format `{other}` (expected u8 or u16le)"
            ))),
        }
    }
}

pub fn decode_raw(bytes: &[u8], dims: GridDims, format: SampleFormat) -> Result<ScalarGrid> {
    let expected = dims.len() * format.size();
    if bytes.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    match format {
        SampleFormat::U8 => ScalarGrid::from_u8(dims, bytes),
        SampleFormat::U16Le => {
            let samples: Vec<u16> = bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            ScalarGrid::from_u16(dims, &samples)
        }
    }
}

pub fn encode_raw(grid: &ScalarGrid, format: SampleFormat) -> Result<Vec<u8>> {
    let samples = integer_samples(grid.values(), format.max(), grid.dims())?;
    let mut out = Vec::with_capacity(samples.len() * format.size());
    for v in samples {
        match format {
            SampleFormat::U8 => out.push(v as u8),
            SampleFormat::U16Le => out.extend_from_slice(&(v as u16).to_le_bytes()),
        }
    }
    Ok(out)
}

pub fn read_raw_volume(
    path: impl AsRef<Path>,
    dims: GridDims,
    format: SampleFormat,
) -> Result<ScalarGrid> {
    decode_raw(&read_file(path.as_ref())?, dims, format)
}

pub fn write_raw_volume(
    grid: &ScalarGrid,
    path: impl AsRef<Path>,
    format: SampleFormat,
) -> Result<()> {
    write_file(path.as_ref(), &encode_raw(grid, format)?)
}

/// Contents of a raw volume's sidecar: `width height depth format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VolumeDescriptor {
    pub dims: GridDims,
    pub format: SampleFormat,
}

impl fmt::Display for VolumeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.dims.width(),
            self.dims.height(),
            self.dims.depth(),
            self.format
        )
    }
}

impl FromStr for VolumeDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.split_whitespace().collect();
        let [w, h, d, fmt] = fields[..] else {
            return Err(Error::parse(
                0,
                format!(
                    "descriptor `{}`: expected `width height depth format`",
                    s.trim()
                ),
            ));
        };
        let num = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::parse(0, format!("descriptor: invalid extent `{t}`")))
        };
        Ok(Self {
            dims: GridDims::new(num(w)?, num(h)?, num(d)?)?,
            format: fmt.parse()?,
        })
    }
}

/// `<path>.desc`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".desc");
    PathBuf::from(s)
}

/// Read a raw volume described by its sidecar.
pub fn read_volume(path: impl AsRef<Path>) -> Result<ScalarGrid> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let desc: VolumeDescriptor = text.parse()?;
    read_raw_volume(path, desc.dims, desc.format)
}

/// Write a raw volume and its sidecar.
pub fn write_volume(grid: &ScalarGrid, path: impl AsRef<Path>, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_raw(grid, format)?;
    let desc = VolumeDescriptor {
        dims: grid.dims(),
        format,
    };
    write_file(path, &bytes)?;
    write_file(&sidecar_path(path), format!("{desc}\n").as_bytes())
}

/// Read a grid by extension: `.pgm` as PGM, anything else as a raw volume
/// with a sidecar.
pub fn load_grid(path: impl AsRef<Path>) -> Result<ScalarGrid> {
    let path = path.as_ref();
    if is_pgm(path) {
        read_pgm(path)
    } else {
        read_volume(path)
    }
}

/// Write a grid as PGM (2D) or raw `u16le` with sidecar (3D).
pub fn save_grid(grid: &ScalarGrid, path: impl AsRef<Path>) -> Result<()> {
    if grid.dims().is_2d() {
        write_pgm(grid, path)
    } else {
        write_volume(grid, path, SampleFormat::U16Le)
    }
}

/// Write a mask, labels verbatim: PGM for 2D, raw `u16le` with sidecar for 3D.
pub fn save_mask(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    save_grid(&labels_as_grid(labels)?, path)
}

/// Read a mask written by [`save_mask`], recomputing region statistics
/// against `grid`.
pub fn load_mask(grid: &ScalarGrid, path: impl AsRef<Path>) -> Result<LabelMap> {
    let raw = load_grid(path)?;
    if raw.dims() != grid.dims() {
        return Err(Error::data(format!(
            "mask is {} but image is {}",
            raw.dims(),
            grid.dims()
        )));
    }
    LabelMap::from_labels(grid, raw.values().iter().map(|&v| v as RegionId).collect())
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_header_example() {
        let mut bytes = b"P5 4 3 255\n".to_vec();
        bytes.extend(0u8..12);
        let g = decode_pgm(&bytes).unwrap();
        assert_eq!(g.dims(), GridDims::new_2d(4, 3).unwrap());
        assert_eq!(g.values()[11], 11.0);
    }

    #[test]
    fn pgm_comments_and_16_bit() {
        let mut bytes = b"P5\n# a comment\n2 1\n# another\n1000\n".to_vec();
        bytes.extend_from_slice(&[0x03, 0xE8, 0x00, 0x01]);
        let g = decode_pgm(&bytes).unwrap();
        assert_eq!(g.values(), &[1000.0, 1.0]);
    }

    #[test]
    fn pgm_truncated_reports_last_valid_byte() {
        let mut bytes = b"P5 4 3 255\n".to_vec();
        bytes.extend(0u8..11);
        let err = decode_pgm(&bytes).unwrap_err();
        match err {
            Error::Parse { offset, message } => {
                assert_eq!(offset, bytes.len() - 1);
                assert!(message.contains("truncated"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn pgm_trailing_byte_rejected() {
        let mut bytes = b"P5 4 3 255\n".to_vec();
        let header = bytes.len();
        bytes.extend(0u8..13);
        match decode_pgm(&bytes).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, header + 12),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn pgm_bad_headers() {
        assert!(matches!(
            decode_pgm(b"P2 1 1 255\n0"),
            Err(Error::Parse { offset: 0, .. })
        ));
        assert!(decode_pgm(b"P5 1 1 70000\n\0\0").is_err());
        assert!(decode_pgm(b"P5 1 1 0\n\0").is_err());
        assert!(decode_pgm(b"P5 0 1 255\n").is_err());
        assert!(decode_pgm(b"P5 1 1 255").is_err());
        assert!(decode_pgm(b"P5 x 1 255\n\0").is_err());
        assert!(decode_pgm(b"P5 1 1 100\n\xff").is_err());
    }

    #[test]
    fn pgm_rejects_non_integer_grid() {
        let g = ScalarGrid::new(GridDims::new_2d(1, 1).unwrap(), vec![0.5]).unwrap();
        assert!(encode_pgm(&g).is_err());
        let v = ScalarGrid::filled(GridDims::new(1, 1, 2).unwrap(), 0.0).unwrap();
        assert!(encode_pgm(&v).is_err());
    }

    #[test]
    fn raw_examples() {
        let dims = GridDims::new(4, 4, 2).unwrap();
        let g = decode_raw(&[0u8; 32], dims, SampleFormat::U8).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        match decode_raw(&[0u8; 31], dims, SampleFormat::U8).unwrap_err() {
            Error::SizeMismatch { expected, actual } => assert_eq!((expected, actual), (32, 31)),
            other => panic!("{other}"),
        }
        let g = decode_raw(
            &[0x34, 0x12],
            GridDims::new_2d(1, 1).unwrap(),
            SampleFormat::U16Le,
        )
        .unwrap();
        assert_eq!(g.values(), &[4660.0]);
    }

    #[test]
    fn descriptor_round_trip() {
        let d: VolumeDescriptor = "32 32 16 u16le\n".parse().unwrap();
        assert_eq!(d.dims, GridDims::new(32, 32, 16).unwrap());
        assert_eq!(d.to_string(), "32 32 16 u16le");
        assert!("32 32 u8".parse::<VolumeDescriptor>().is_err());
        assert!("32 32 1 f32".parse::<VolumeDescriptor>().is_err());
    }

    #[test]
    fn label_ramp() {
        let grays: Vec<u8> = (0..6).map(label_gray).collect();
        assert_eq!(grays, vec![0, 255, 202, 149, 96, 235]);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = ScalarGrid::from_fn(GridDims::new(3, 2, 2).unwrap(), |s| {
            (s.x * 1000 + s.y * 10 + s.z) as f64
        })
        .unwrap();
        let p = dir.path().join("v.raw");
        save_grid(&g, &p).unwrap();
        assert_eq!(load_grid(&p).unwrap(), g);
        let m = LabelMap::from_labels(&g, (0..12).map(|i| i % 3).collect()).unwrap();
        let mp = dir.path().join("m.raw");
        save_mask(&m, &mp).unwrap();
        assert_eq!(load_mask(&g, &mp).unwrap(), m);

        let flat = g.slice_z(0).unwrap();
        let p = dir.path().join("a.pgm");
        save_grid(&flat, &p).unwrap();
        assert_eq!(load_grid(&p).unwrap(), flat);
    }

    fn arb_grid(max: u32) -> impl Strategy<Value = ScalarGrid> {
        (1usize..12, 1usize..12).prop_flat_map(move |(w, h)| {
            prop::collection::vec(0..=max, w * h).prop_map(move |v| {
                ScalarGrid::new(
                    GridDims::new_2d(w, h).unwrap(),
                    v.into_iter().map(f64::from).collect(),
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn pgm_round_trip(g in prop_oneof![arb_grid(255), arb_grid(65535)]) {
            prop_assert_eq!(decode_pgm(&encode_pgm(&g).unwrap()).unwrap(), g);
        }

        #[test]
        fn raw_u16_round_trip(g in arb_grid(65535)) {
            let bytes = encode_raw(&g, SampleFormat::U16Le).unwrap();
            prop_assert_eq!(decode_raw(&bytes, g.dims(), SampleFormat::U16Le).unwrap(), g);
        }
    }
}

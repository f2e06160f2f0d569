//! File formats: the CT3 tensor container, its plain-text sidecar, and
//! 16-bit graymap slice export.
//!
//! CT3 layout (all little-endian):
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `b"CT3\0"`           |
//! | 4      | 4    | version, `u32` = 1         |
//! | 8      | 24   | `N`, `E`, `T` as `u64`     |
//! | 32     | 8·NET| entries: `f32` re, `f32` im |
//!
//! Entries follow tensor storage order (space fastest, then echo, then
//! motion state).

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::phantom::Grid;
use crate::scalar::Real;
use crate::tensor::{ComplexTensor3, Dims};

pub const CT3_MAGIC: [u8; 4] = *b"CT3\0";
pub const CT3_VERSION: u32 = 1;
pub const CT3_HEADER_LEN: usize = 32;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

/// Serializes `x` to CT3 bytes. Fails if an entry overflows `f32`.
pub fn encode_ct3<T: Real>(x: &ComplexTensor3<T>) -> Result<Vec<u8>> {
    let d = x.dims();
    let mut out = Vec::with_capacity(CT3_HEADER_LEN + 8 * d.len());
    out.extend_from_slice(&CT3_MAGIC);
    out.extend_from_slice(&CT3_VERSION.to_le_bytes());
    for n in [d.n(), d.e(), d.t()] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for (pos, z) in x.data().iter().enumerate() {
        let (re, im) = (z.re.as_f64() as f32, z.im.as_f64() as f32);
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::arg(format!("entry {pos} is not representable in single precision")));
        }
        out.extend_from_slice(&re.to_le_bytes());
        out.extend_from_slice(&im.to_le_bytes());
    }
    Ok(out)
}

/// Parses CT3 bytes; `path` only labels errors.
pub fn decode_ct3<T: Real>(bytes: &[u8], path: &Path) -> Result<ComplexTensor3<T>> {
    if bytes.len() < CT3_HEADER_LEN {
        return Err(format_err(
            path,
            format!("header needs {CT3_HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if bytes[..4] != CT3_MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CT3_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let dim = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (n, e, t) = (dim(8), dim(16), dim(24));
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| format_err(path, "dimension too large"));
    let dims = Dims::new(to_usize(n)?, to_usize(e)?, to_usize(t)?)
        .map_err(|err| format_err(path, err.to_string()))?;
    let expected = dims
        .len()
        .checked_mul(8)
        .ok_or_else(|| format_err(path, "payload size overflows"))?;
    let actual = bytes.len() - CT3_HEADER_LEN;
    if actual != expected {
        return Err(format_err(
            path,
            format!("payload for {dims} needs {expected} bytes, found {actual}"),
        ));
    }
    let data = bytes[CT3_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().expect("4 bytes"));
            let im = f32::from_le_bytes(c[4..].try_into().expect("4 bytes"));
            Complex::new(T::lit(re as f64), T::lit(im as f64))
        })
        .collect();
    ComplexTensor3::new(dims, data).map_err(|err| format_err(path, err.to_string()))
}

pub fn write_ct3<T: Real>(x: &ComplexTensor3<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ct3(x)?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_ct3<T: Real>(path: impl AsRef<Path>) -> Result<ComplexTensor3<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_ct3(&bytes, path)
}

/// Acquisition metadata stored next to a CT3 file as `key=value` lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sidecar {
    pub grid: Grid,
    pub te_first: f64,
    pub delta_te: f64,
    pub acceleration: f64,
    pub seed: u64,
}

impl Sidecar {
    pub fn to_text(&self) -> String {
        format!(
            "nx={}\nny={}\nnz={}\nte_first={}\ndelta_te={}\nacceleration={}\nseed={}\n",
            self.grid.nx, self.grid.ny, self.grid.nz, self.te_first, self.delta_te, self.acceleration, self.seed
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut nx = None;
        let mut ny = None;
        let mut nz = None;
        let mut te_first = None;
        let mut delta_te = None;
        let mut acceleration = None;
        let mut seed = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format_err(path, format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let line_no = lineno + 1;
            match key {
                "nx" => nx = Some(parse_value::<usize>(value, key, line_no, path)?),
                "ny" => ny = Some(parse_value::<usize>(value, key, line_no, path)?),
                "nz" => nz = Some(parse_value::<usize>(value, key, line_no, path)?),
                "te_first" => te_first = Some(parse_value::<f64>(value, key, line_no, path)?),
                "delta_te" => delta_te = Some(parse_value::<f64>(value, key, line_no, path)?),
                "acceleration" => acceleration = Some(parse_value::<f64>(value, key, line_no, path)?),
                "seed" => seed = Some(parse_value::<u64>(value, key, line_no, path)?),
                _ => {}
            }
        }
        let need = |v: Option<usize>, k: &str| v.ok_or_else(|| format_err(path, format!("missing {k}")));
        let needf = |v: Option<f64>, k: &str| v.ok_or_else(|| format_err(path, format!("missing {k}")));
        let grid = Grid::new(need(nx, "nx")?, need(ny, "ny")?, need(nz, "nz")?)
            .map_err(|e| format_err(path, e.to_string()))?;
        Ok(Sidecar {
            grid,
            te_first: needf(te_first, "te_first")?,
            delta_te: needf(delta_te, "delta_te")?,
            acceleration: needf(acceleration, "acceleration")?,
            seed: seed.ok_or_else(|| format_err(path, "missing seed"))?,
        })
    }
}

fn parse_value<V: std::str::FromStr>(value: &str, key: &str, line: usize, path: &Path) -> Result<V> {
    value
        .parse()
        .map_err(|_| format_err(path, format!("line {line}: bad value for {key}")))
}

/// Sidecar location for a CT3 file: the same path with `.meta` appended.
pub fn sidecar_path(ct3: impl AsRef<Path>) -> PathBuf {
    let mut s = ct3.as_ref().as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_sidecar(meta: &Sidecar, ct3: impl AsRef<Path>) -> Result<()> {
    let path = sidecar_path(ct3);
    fs::write(&path, meta.to_text()).map_err(io_err(&path))
}

pub fn read_sidecar(ct3: impl AsRef<Path>) -> Result<Sidecar> {
    let path = sidecar_path(ct3);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Sidecar::parse(&text, &path)
}

/// Intensity window for slice export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// `[0, 99.5th percentile]` of the magnitudes of the exported volume.
    Auto,
    Range { lo: f64, hi: f64 },
}

/// Nearest-rank percentile (`q` in `[0, 100]`).
fn percentile(mut v: Vec<f64>, q: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((q / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

/// 16-bit grayscale pixels of the central axial magnitude slice
/// (`z = nz / 2`) of volume `(echo, motion)`, row-major with `x` fastest.
pub fn render_slice<T: Real>(
    x: &ComplexTensor3<T>,
    grid: Grid,
    echo: usize,
    motion: usize,
    window: Window,
) -> Result<Vec<u16>> {
    let d = x.dims();
    grid.check_matches(d)?;
    if echo >= d.e() || motion >= d.t() {
        return Err(Error::arg(format!(
            "slice (echo {echo}, state {motion}) out of range for {} echoes and {} states",
            d.e(),
            d.t()
        )));
    }
    let vol = x.fiber(echo, motion);
    let (lo, hi) = match window {
        Window::Auto => (0.0, percentile(vol.iter().map(|z| z.norm().as_f64()).collect(), 99.5)),
        Window::Range { lo, hi } => (lo, hi),
    };
    let z = grid.nz / 2;
    let mut px = Vec::with_capacity(grid.nx * grid.ny);
    for y in 0..grid.ny {
        for xi in 0..grid.nx {
            let m = vol[grid.index(xi, y, z)].norm().as_f64();
            let level = if hi > lo { ((m - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
            px.push((level * 65535.0).round() as u16);
        }
    }
    Ok(px)
}

/// Binary 16-bit PGM (`P5`, maxval 65535, big-endian samples).
pub fn encode_pgm(width: usize, height: usize, pixels: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

/// Writes the central axial magnitude slice of `(echo, motion)` as a PGM.
pub fn export_slice<T: Real>(
    x: &ComplexTensor3<T>,
    grid: Grid,
    echo: usize,
    motion: usize,
    path: impl AsRef<Path>,
    window: Window,
) -> Result<()> {
    let path = path.as_ref();
    let px = render_slice(x, grid, echo, motion, window)?;
    fs::write(path, encode_pgm(grid.nx, grid.ny, &px)).map_err(io_err(path))
}

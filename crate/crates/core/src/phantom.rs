//! Synthetic multi-echo, multi-motion-state phantom and retrospective
//! undersampling.
//!
//! The phantom is a sum of ellipsoids, each with its own proton density,
//! R2* decay and off-resonance, rigidly translated along z (superior–
//! inferior) from one motion state to the next. Undersampling is simulated
//! per (echo, motion state) volume on a Cartesian grid: 3D FFT, variable
//! density random mask with a fully sampled centre, density compensation,
//! inverse FFT.

use std::f64::consts::PI;

use num_complex::Complex;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{ComplexTensor3, Dims};

/// Radius of the always-sampled k-space centre, as a fraction of the
/// half-width along each axis.
pub const CENTER_RADIUS: f64 = 0.08;

/// Exponent of the outer sampling density `p(ρ) ∝ ρ^-q`.
pub const DENSITY_EXPONENT: f64 = 2.0;

/// Spatial grid `(nx, ny, nz)`; `x` varies fastest in the flat voxel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::arg(format!("grid extents must be positive, got {nx}×{ny}×{nz}")));
        }
        Ok(Grid { nx, ny, nz })
    }

    pub fn voxels(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub(crate) fn check_matches(&self, dims: Dims) -> Result<()> {
        if self.voxels() != dims.n() {
            return Err(Error::dims(format!(
                "grid {}×{}×{} has {} voxels but the tensor has N = {}",
                self.nx,
                self.ny,
                self.nz,
                self.voxels(),
                dims.n()
            )));
        }
        Ok(())
    }
}

/// One ellipsoidal compartment. Geometry is in normalized coordinates where
/// each axis spans `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    /// Proton density amplitude.
    pub amplitude: f64,
    /// Decay rate in 1/ms.
    pub r2star: f64,
    /// Off-resonance in kHz.
    pub off_resonance: f64,
}

impl Ellipse {
    fn contains(&self, p: [f64; 3], dz: f64) -> bool {
        let c = [self.center[0], self.center[1], self.center[2] + dz];
        (0..3)
            .map(|a| ((p[a] - c[a]) / self.semi_axes[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }

    /// Complex signal at echo time `te` (ms).
    pub fn signal(&self, te: f64) -> Complex<f64> {
        let mag = self.amplitude * (-self.r2star * te).exp();
        Complex::from_polar(mag, 2.0 * PI * self.off_resonance * te)
    }
}

/// Abdomen-like default: body, liver with iron-overload decay, spleen,
/// a fat layer and a vessel.
pub fn default_ellipses() -> Vec<Ellipse> {
    vec![
        Ellipse {
            center: [0.0, 0.0, 0.0],
            semi_axes: [0.9, 0.75, 0.95],
            amplitude: 0.35,
            r2star: 0.03,
            off_resonance: 0.0,
        },
        Ellipse {
            center: [-0.3, 0.1, 0.1],
            semi_axes: [0.45, 0.4, 0.55],
            amplitude: 0.6,
            r2star: 0.2,
            off_resonance: 0.02,
        },
        Ellipse {
            center: [0.45, 0.2, 0.2],
            semi_axes: [0.22, 0.2, 0.35],
            amplitude: 0.5,
            r2star: 0.06,
            off_resonance: -0.03,
        },
        Ellipse {
            center: [0.0, -0.6, 0.0],
            semi_axes: [0.65, 0.12, 0.8],
            amplitude: 0.8,
            r2star: 0.02,
            off_resonance: -0.44,
        },
        Ellipse {
            center: [0.15, -0.15, 0.0],
            semi_axes: [0.09, 0.09, 0.85],
            amplitude: 0.7,
            r2star: 0.015,
            off_resonance: 0.08,
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomConfig {
    pub grid: Grid,
    pub echoes: usize,
    pub states: usize,
    /// First echo time in ms.
    pub te_first: f64,
    /// Echo spacing in ms.
    pub delta_te: f64,
    pub ellipses: Vec<Ellipse>,
    /// Peak superior–inferior translation, in voxels.
    pub motion_amplitude: f64,
    pub acceleration: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            grid: Grid { nx: 32, ny: 32, nz: 8 },
            echoes: 6,
            states: 6,
            te_first: 0.032,
            delta_te: 1.4,
            ellipses: default_ellipses(),
            motion_amplitude: 2.0,
            acceleration: 6.0,
            seed: 0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.nz)?;
        if self.echoes == 0 || self.states == 0 {
            return Err(Error::arg("echo and motion-state counts must be positive"));
        }
        if !(self.te_first > 0.0 && self.delta_te > 0.0) {
            return Err(Error::arg("echo times must be positive"));
        }
        if !(self.acceleration.is_finite() && self.acceleration >= 1.0) {
            return Err(Error::arg(format!("acceleration must be ≥ 1, got {}", self.acceleration)));
        }
        if !self.motion_amplitude.is_finite() {
            return Err(Error::arg("motion amplitude must be finite"));
        }
        for e in &self.ellipses {
            if !e.semi_axes.iter().all(|&s| s > 0.0) {
                return Err(Error::arg("ellipse semi-axes must be positive"));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> Result<Dims> {
        Dims::new(self.grid.voxels(), self.echoes, self.states)
    }

    /// Echo time of echo `j` (0-based), in ms.
    pub fn echo_time(&self, j: usize) -> f64 {
        self.te_first + j as f64 * self.delta_te
    }

    /// Superior–inferior offset of motion state `k`, in voxels: a half
    /// cosine rising from 0 at the first state to the amplitude at the last.
    pub fn motion_offset(&self, k: usize) -> f64 {
        if self.states < 2 {
            return 0.0;
        }
        let phase = PI * k as f64 / (self.states - 1) as f64;
        self.motion_amplitude * 0.5 * (1.0 - phase.cos())
    }
}

/// Ground-truth tensor `X(voxel, echo, state)`.
pub fn generate_phantom<T: Real>(cfg: &PhantomConfig) -> Result<ComplexTensor3<T>> {
    cfg.validate()?;
    let dims = cfg.dims()?;
    let g = cfg.grid;
    let coord = |i: usize, n: usize| 2.0 * (i as f64 + 0.5) / n as f64 - 1.0;
    let signals: Vec<Vec<Complex<f64>>> = (0..cfg.echoes)
        .map(|j| cfg.ellipses.iter().map(|e| e.signal(cfg.echo_time(j))).collect())
        .collect();

    let mut data = vec![Complex::<T>::zero(); dims.len()];
    for k in 0..cfg.states {
        let dz = 2.0 * cfg.motion_offset(k) / g.nz as f64;
        // Which ellipses cover each voxel in this state.
        let cover: Vec<Vec<usize>> = (0..g.voxels())
            .map(|v| {
                let (x, y, z) = (v % g.nx, (v / g.nx) % g.ny, v / (g.nx * g.ny));
                let p = [coord(x, g.nx), coord(y, g.ny), coord(z, g.nz)];
                (0..cfg.ellipses.len())
                    .filter(|&e| cfg.ellipses[e].contains(p, dz))
                    .collect()
            })
            .collect();
        for (j, sig) in signals.iter().enumerate() {
            let base = dims.offset(0, j, k);
            for (v, covering) in cover.iter().enumerate() {
                let s: Complex<f64> = covering.iter().map(|&e| sig[e]).sum();
                data[base + v] = Complex::new(T::lit(s.re), T::lit(s.im));
            }
        }
    }
    ComplexTensor3::new(dims, data)
}

/// Signed integer frequency of FFT bin `k` on an axis of length `n`.
fn signed_freq(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Normalized k-space radius of every bin (storage order, x fastest).
fn kspace_radius(grid: Grid) -> Vec<f64> {
    let norm = |k: usize, n: usize| {
        if n < 2 {
            0.0
        } else {
            signed_freq(k, n) / (n as f64 / 2.0)
        }
    };
    let mut out = Vec::with_capacity(grid.voxels());
    for z in 0..grid.nz {
        for y in 0..grid.ny {
            for x in 0..grid.nx {
                let (a, b, c) = (norm(x, grid.nx), norm(y, grid.ny), norm(z, grid.nz));
                out.push((a * a + b * b + c * c).sqrt());
            }
        }
    }
    out
}

/// Inclusion probability of each k-space bin for the given acceleration:
/// 1 inside the centre ball, `min(1, s·ρ^-q)` outside with `s` chosen so
/// the probabilities sum to `voxels / acceleration`.
pub fn sampling_density(grid: Grid, acceleration: f64) -> Result<Vec<f64>> {
    if !(acceleration.is_finite() && acceleration >= 1.0) {
        return Err(Error::arg(format!("acceleration must be ≥ 1, got {acceleration}")));
    }
    let radius = kspace_radius(grid);
    let total = radius.len() as f64;
    let budget = total / acceleration;
    let is_center = |r: f64| r <= CENTER_RADIUS;
    let n_center = radius.iter().filter(|&&r| is_center(r)).count() as f64;
    if n_center > budget {
        return Err(Error::arg(format!(
            "acceleration {acceleration} leaves a budget of {budget:.1} samples, \
             below the {n_center} fully sampled centre samples"
        )));
    }
    let outer = |s: f64| -> f64 {
        radius
            .iter()
            .filter(|&&r| !is_center(r))
            .map(|&r| (s * r.powf(-DENSITY_EXPONENT)).min(1.0))
            .sum()
    };
    let target = budget - n_center;
    let prob = |s: f64, r: f64| {
        if is_center(r) {
            1.0
        } else {
            (s * r.powf(-DENSITY_EXPONENT)).min(1.0)
        }
    };
    // s = ρ_max^q keeps every sample.
    let mut hi = radius.iter().copied().fold(1.0, f64::max).powf(DENSITY_EXPONENT);
    if outer(hi) <= target {
        return Ok(radius.iter().map(|&r| prob(hi, r)).collect());
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if outer(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(radius.iter().map(|&r| prob(s, r)).collect())
}

/// Deterministic stream id for the mask of `(echo, motion)`.
fn mask_rng(seed: u64, echo: usize, motion: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((echo as u64) << 32) | motion as u64);
    rng
}

/// Sampling mask for one `(echo, motion)` volume: `true` where kept.
pub fn sampling_mask(density: &[f64], seed: u64, echo: usize, motion: usize) -> Vec<bool> {
    let mut rng = mask_rng(seed, echo, motion);
    density
        .iter()
        .map(|&p| {
            let u: f64 = rng.random();
            p >= 1.0 || u < p
        })
        .collect()
}

struct Fft3<T: Real> {
    grid: Grid,
    axes: [std::sync::Arc<dyn Fft<T>>; 3],
}

impl<T: Real> Fft3<T> {
    fn new(grid: Grid, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let mut plan = |n| {
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        };
        let axes = [plan(grid.nx), plan(grid.ny), plan(grid.nz)];
        Fft3 { grid, axes }
    }

    fn process(&self, buf: &mut [Complex<T>]) {
        let g = self.grid;
        self.axes[0].process(buf);
        let mut line = Vec::new();
        for (axis, len, stride) in [(1, g.ny, g.nx), (2, g.nz, g.nx * g.ny)] {
            if len < 2 {
                continue;
            }
            line.resize(len, Complex::zero());
            let block = stride * len;
            for outer in 0..buf.len() / block {
                for inner in 0..stride {
                    let base = outer * block + inner;
                    for (m, l) in line.iter_mut().enumerate() {
                        *l = buf[base + m * stride];
                    }
                    self.axes[axis].process(&mut line);
                    for (m, l) in line.iter().enumerate() {
                        buf[base + m * stride] = *l;
                    }
                }
            }
        }
    }
}

/// Returns `Y = X_true + aliasing` by masking each `(echo, motion)` volume
/// in k-space. Kept samples are weighted by `1/p` (density compensation),
/// so the always-sampled DC term is preserved exactly.
pub fn inject_undersampling<T: Real>(
    x_true: &ComplexTensor3<T>,
    grid: Grid,
    acceleration: f64,
    seed: u64,
) -> Result<ComplexTensor3<T>> {
    let dims = x_true.dims();
    grid.check_matches(dims)?;
    let density = sampling_density(grid, acceleration)?;
    let forward = Fft3::<T>::new(grid, false);
    let inverse = Fft3::<T>::new(grid, true);
    let scale = T::one() / T::from_count(grid.voxels());
    let weights: Vec<T> = density.iter().map(|&p| T::lit(1.0 / p.max(f64::MIN_POSITIVE))).collect();

    let mut out = x_true.clone();
    out.data_mut()
        .par_chunks_mut(dims.n())
        .enumerate()
        .for_each(|(col, vol)| {
            let (echo, motion) = (col % dims.e(), col / dims.e());
            let mask = sampling_mask(&density, seed, echo, motion);
            forward.process(vol);
            for ((z, &keep), &w) in vol.iter_mut().zip(&mask).zip(&weights) {
                *z = if keep { *z * (w * scale) } else { Complex::zero() };
            }
            inverse.process(vol);
        });
    ComplexTensor3::new(dims, out.into_data())
}

/// Convenience: phantom plus its undersampled observation `(Y, X_true)`.
pub fn phantom_pair<T: Real>(cfg: &PhantomConfig) -> Result<(ComplexTensor3<T>, ComplexTensor3<T>)> {
    let truth = generate_phantom::<T>(cfg)?;
    let y = inject_undersampling(&truth, cfg.grid, cfg.acceleration, cfg.seed)?;
    Ok((y, truth))
}

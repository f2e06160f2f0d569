//! Dense complex 3-way tensors, complex matrices and the multilinear
//! primitives built on them (unfold/fold, Khatri–Rao, CP synthesis).
//!
//! Element `(i, j, k)` of an `N × E × T` tensor lives at linear offset
//! `(k·E + j)·N + i`: spatial index fastest, then echo, then motion state.
//! Matrices are column-major. With these layouts the mode-1 unfolding is the
//! storage buffer reinterpreted as an `N × (E·T)` matrix.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{is_finite, Real};

/// Tensor mode. Mode 1 is space, mode 2 echo, mode 3 motion state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Space,
    Echo,
    Motion,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Space, Mode::Echo, Mode::Motion];

    /// Parses the 1-based mode number.
    pub fn from_index(mode: usize) -> Result<Self> {
        match mode {
            1 => Ok(Mode::Space),
            2 => Ok(Mode::Echo),
            3 => Ok(Mode::Motion),
            m => Err(Error::arg(format!("mode must be 1, 2 or 3, got {m}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Mode::Space => 1,
            Mode::Echo => 2,
            Mode::Motion => 3,
        }
    }
}

/// Shape `(N, E, T)` of a tensor; every extent is at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    n: usize,
    e: usize,
    t: usize,
}

impl Dims {
    pub fn new(n: usize, e: usize, t: usize) -> Result<Self> {
        if n == 0 || e == 0 || t == 0 {
            return Err(Error::arg(format!(
                "tensor dimensions must be positive, got ({n}, {e}, {t})"
            )));
        }
        n.checked_mul(e)
            .and_then(|ne| ne.checked_mul(t))
            .ok_or_else(|| Error::arg("tensor dimensions overflow"))?;
        Ok(Dims { n, e, t })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn e(&self) -> usize {
        self.e
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.e * self.t
    }

    /// Always false; present for API symmetry with `len`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.e + j) * self.n + i
    }

    /// Extent along `mode`.
    pub fn extent(&self, mode: Mode) -> usize {
        match mode {
            Mode::Space => self.n,
            Mode::Echo => self.e,
            Mode::Motion => self.t,
        }
    }

    /// `(rows, cols)` of the mode-`mode` unfolding.
    pub fn unfolded_shape(&self, mode: Mode) -> (usize, usize) {
        let rows = self.extent(mode);
        (rows, self.len() / rows)
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.n, self.e, self.t)
    }
}

/// Dense complex `N × E × T` tensor.
#[derive(Clone, PartialEq)]
pub struct ComplexTensor3<T> {
    dims: Dims,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexTensor3<T> {
    /// Wraps `data` (storage order) after checking length and finiteness.
    pub fn new(dims: Dims, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::dims(format!(
                "tensor {dims} needs {} entries, got {}",
                dims.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !is_finite(z)) {
            return Err(Error::arg(format!("non-finite tensor entry at offset {pos}")));
        }
        Ok(ComplexTensor3 { dims, data })
    }

    pub(crate) fn from_raw(dims: Dims, data: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        ComplexTensor3 { dims, data }
    }

    pub fn zeros(dims: Dims) -> Self {
        ComplexTensor3 {
            dims,
            data: vec![Complex::zero(); dims.len()],
        }
    }

    /// Builds a tensor from `f(i, j, k)`.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> Complex<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.len());
        for k in 0..dims.t {
            for j in 0..dims.e {
                for i in 0..dims.n {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(dims, data)
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex<T>> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex<T> {
        self.data[self.dims.offset(i, j, k)]
    }

    /// Spatial column `X(:, j, k)`.
    #[inline]
    pub fn fiber(&self, j: usize, k: usize) -> &[Complex<T>] {
        let n = self.dims.n;
        let start = (k * self.dims.e + j) * n;
        &self.data[start..start + n]
    }

    /// Entrywise `self − other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self::from_raw(self.dims, data))
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self::from_raw(self.dims, data))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self::from_raw(self.dims, self.data.iter().map(|z| z * s).collect())
    }

    /// Swaps the echo and motion axes, giving an `N × T × E` tensor.
    pub fn swap_echo_motion(&self) -> Self {
        let d = self.dims;
        let swapped = Dims { n: d.n, e: d.t, t: d.e };
        let mut out = Vec::with_capacity(d.len());
        for j in 0..d.e {
            for k in 0..d.t {
                out.extend_from_slice(self.fiber(j, k));
            }
        }
        Self::from_raw(swapped, out)
    }

    /// Mean entry modulus.
    pub fn mean_modulus(&self) -> T {
        let total: T = self.data.iter().map(|z| z.norm()).sum();
        total / T::from_count(self.data.len())
    }

    /// Converts the scalar type, e.g. `f64 → f32`.
    pub fn cast<U: Real>(&self) -> Result<ComplexTensor3<U>> {
        let data = self
            .data
            .iter()
            .map(|z| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64())))
            .collect();
        ComplexTensor3::new(self.dims, data)
    }

    pub(crate) fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::dims(format!("{} vs {}", self.dims, other.dims)));
        }
        Ok(())
    }
}

impl<T> fmt::Debug for ComplexTensor3<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexTensor3").field("dims", &self.dims).finish_non_exhaustive()
    }
}

/// Dense column-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    /// Wraps column-major `data` after checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::arg(format!(
                "matrix dimensions must be positive, got {rows}×{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "{rows}×{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !is_finite(z)) {
            return Err(Error::arg(format!("non-finite matrix entry at offset {pos}")));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        ComplexMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self::from_raw(rows, cols, vec![Complex::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Builds a matrix from row-major nested rows (handy in tests).
    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Result<Self> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(Error::dims("ragged rows"));
        }
        Self::from_fn(nr, nc, |r, c| rows[r][c])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    #[inline]
    pub fn col(&self, c: usize) -> &[Complex<T>] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [Complex<T>] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.data.len());
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(self[(r, c)]);
            }
        }
        Self::from_raw(self.cols, self.rows, out)
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|z| z.conj()).collect())
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::dims(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = vec![Complex::zero(); self.rows * rhs.cols];
        out.par_chunks_mut(self.rows).enumerate().for_each(|(c, col)| {
            for (p, &w) in rhs.col(c).iter().enumerate() {
                if w.is_zero() {
                    continue;
                }
                for (o, &a) in col.iter_mut().zip(self.col(p)) {
                    *o += a * w;
                }
            }
        });
        Ok(Self::from_raw(self.rows, rhs.cols, out))
    }

    /// `self − rhs`.
    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(Error::dims("matrix shapes differ"));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    /// Frobenius norm of the matrix.
    pub fn norm(&self) -> T {
        sum_sq(&self.data).sqrt()
    }

    /// 2-norm of column `c`.
    pub fn col_norm(&self, c: usize) -> T {
        sum_sq(self.col(c)).sqrt()
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        &self.data[c * self.rows + r]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[c * self.rows + r]
    }
}

impl<T: fmt::Debug> fmt::Debug for ComplexMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}×{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            write!(f, " ")?;
            for c in 0..self.cols.min(8) {
                let z = &self.data[c * self.rows + r];
                write!(f, " ({:.4?}, {:.4?})", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Factor matrices `A (N×R)`, `B (E×R)`, `C (T×R)` of a rank-`R` CP model.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet<T> {
    a: ComplexMatrix<T>,
    b: ComplexMatrix<T>,
    c: ComplexMatrix<T>,
}

impl<T: Real> FactorSet<T> {
    pub fn new(a: ComplexMatrix<T>, b: ComplexMatrix<T>, c: ComplexMatrix<T>) -> Result<Self> {
        if a.cols != b.cols || b.cols != c.cols {
            return Err(Error::dims(format!(
                "factor column counts differ: {}, {}, {}",
                a.cols, b.cols, c.cols
            )));
        }
        Ok(FactorSet { a, b, c })
    }

    pub fn rank(&self) -> usize {
        self.a.cols
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.a.rows,
            e: self.b.rows,
            t: self.c.rows,
        }
    }

    pub fn a(&self) -> &ComplexMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &ComplexMatrix<T> {
        &self.b
    }

    pub fn c(&self) -> &ComplexMatrix<T> {
        &self.c
    }

    pub fn factor(&self, mode: Mode) -> &ComplexMatrix<T> {
        match mode {
            Mode::Space => &self.a,
            Mode::Echo => &self.b,
            Mode::Motion => &self.c,
        }
    }

    pub fn factor_mut(&mut self, mode: Mode) -> &mut ComplexMatrix<T> {
        match mode {
            Mode::Space => &mut self.a,
            Mode::Echo => &mut self.b,
            Mode::Motion => &mut self.c,
        }
    }

    /// Replaces one factor; its shape must match the one it replaces.
    pub fn set_factor(&mut self, mode: Mode, m: ComplexMatrix<T>) -> Result<()> {
        let slot = self.factor_mut(mode);
        if (slot.rows, slot.cols) != (m.rows, m.cols) {
            return Err(Error::dims(format!(
                "factor {} must be {}×{}, got {}×{}",
                mode.index(),
                slot.rows,
                slot.cols,
                m.rows,
                m.cols
            )));
        }
        *slot = m;
        Ok(())
    }

    /// The two factors whose Khatri–Rao product appears in the mode's
    /// unfolding identity, in `(left, right)` order: mode 1 → `(C, B)`,
    /// mode 2 → `(C, A)`, mode 3 → `(B, A)`.
    pub fn others(&self, mode: Mode) -> (&ComplexMatrix<T>, &ComplexMatrix<T>) {
        match mode {
            Mode::Space => (&self.c, &self.b),
            Mode::Echo => (&self.c, &self.a),
            Mode::Motion => (&self.b, &self.a),
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.a, &self.b, &self.c]
            .iter()
            .all(|m| m.data.iter().all(is_finite))
    }
}

#[inline]
pub(crate) fn sum_sq<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Mode-`mode` unfolding. Column index of entry `(i, j, k)`:
/// mode 1 → `j + E·k`, mode 2 → `i + N·k`, mode 3 → `i + N·j`.
pub fn unfold<T: Real>(x: &ComplexTensor3<T>, mode: Mode) -> ComplexMatrix<T> {
    let d = x.dims;
    let (rows, cols) = d.unfolded_shape(mode);
    match mode {
        Mode::Space => ComplexMatrix::from_raw(rows, cols, x.data.clone()),
        Mode::Echo => {
            let mut out = Vec::with_capacity(d.len());
            for k in 0..d.t {
                for i in 0..d.n {
                    for j in 0..d.e {
                        out.push(x.get(i, j, k));
                    }
                }
            }
            ComplexMatrix::from_raw(rows, cols, out)
        }
        Mode::Motion => {
            let mut out = Vec::with_capacity(d.len());
            for j in 0..d.e {
                for i in 0..d.n {
                    for k in 0..d.t {
                        out.push(x.get(i, j, k));
                    }
                }
            }
            ComplexMatrix::from_raw(rows, cols, out)
        }
    }
}

/// Inverse of [`unfold`].
pub fn fold<T: Real>(m: &ComplexMatrix<T>, mode: Mode, dims: Dims) -> Result<ComplexTensor3<T>> {
    let (rows, cols) = dims.unfolded_shape(mode);
    if (m.rows, m.cols) != (rows, cols) {
        return Err(Error::dims(format!(
            "mode-{} unfolding of {dims} is {rows}×{cols}, got {}×{}",
            mode.index(),
            m.rows,
            m.cols
        )));
    }
    let out = match mode {
        Mode::Space => m.data.clone(),
        Mode::Echo => {
            let mut out = vec![Complex::zero(); dims.len()];
            for k in 0..dims.t {
                for i in 0..dims.n {
                    for j in 0..dims.e {
                        out[dims.offset(i, j, k)] = m[(j, i + dims.n * k)];
                    }
                }
            }
            out
        }
        Mode::Motion => {
            let mut out = vec![Complex::zero(); dims.len()];
            for j in 0..dims.e {
                for i in 0..dims.n {
                    for k in 0..dims.t {
                        out[dims.offset(i, j, k)] = m[(k, i + dims.n * j)];
                    }
                }
            }
            out
        }
    };
    Ok(ComplexTensor3::from_raw(dims, out))
}

/// Column-wise Kronecker product: column `r` is `P[:, r] ⊗ Q[:, r]`.
pub fn khatri_rao<T: Real>(p: &ComplexMatrix<T>, q: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if p.cols != q.cols {
        return Err(Error::dims(format!(
            "Khatri–Rao operands need equal column counts, got {} and {}",
            p.cols, q.cols
        )));
    }
    let rows = p.rows * q.rows;
    let mut out = Vec::with_capacity(rows * p.cols);
    for r in 0..p.cols {
        for &pv in p.col(r) {
            out.extend(q.col(r).iter().map(|&qv| pv * qv));
        }
    }
    Ok(ComplexMatrix::from_raw(rows, p.cols, out))
}

/// `X = Σ_r a_r ∘ b_r ∘ c_r`.
pub fn cpd_synthesize<T: Real>(f: &FactorSet<T>) -> ComplexTensor3<T> {
    let dims = f.dims();
    let rank = f.rank();
    let mut data = vec![Complex::zero(); dims.len()];
    data.par_chunks_mut(dims.n).enumerate().for_each(|(col, fiber)| {
        let j = col % dims.e;
        let k = col / dims.e;
        for r in 0..rank {
            let w = f.b[(j, r)] * f.c[(k, r)];
            if w.is_zero() {
                continue;
            }
            for (x, &a) in fiber.iter_mut().zip(f.a.col(r)) {
                *x += a * w;
            }
        }
    });
    ComplexTensor3::from_raw(dims, data)
}

/// `sqrt(Σ |x|²)`.
pub fn frobenius_norm<T: Real>(x: &ComplexTensor3<T>) -> T {
    sum_sq(&x.data).sqrt()
}

/// Matricized tensor times Khatri–Rao product with conjugated factors:
/// `unfold(W, mode) · conj(P ⊙ Q)` where `(P, Q) = f.others(mode)`.
/// Evaluated without materializing either operand.
pub(crate) fn mttkrp_conj<T: Real>(w: &ComplexTensor3<T>, f: &FactorSet<T>, mode: Mode) -> ComplexMatrix<T> {
    let d = w.dims;
    let rank = f.rank();
    match mode {
        Mode::Space => {
            // G(i, r) = Σ_{j,k} W(i,j,k) · conj(B(j,r) C(k,r))
            let mut out = vec![Complex::zero(); d.n * rank];
            out.par_chunks_mut(d.n).enumerate().for_each(|(r, gcol)| {
                for k in 0..d.t {
                    for j in 0..d.e {
                        let s = (f.b[(j, r)] * f.c[(k, r)]).conj();
                        if s.is_zero() {
                            continue;
                        }
                        for (g, &x) in gcol.iter_mut().zip(w.fiber(j, k)) {
                            *g += x * s;
                        }
                    }
                }
            });
            ComplexMatrix::from_raw(d.n, rank, out)
        }
        Mode::Echo | Mode::Motion => {
            // Contract the spatial index first: M[(j,k), r] = Σ_i W(i,j,k) conj(A(i,r)).
            let ncol = d.e * d.t;
            let mut contracted = vec![Complex::<T>::zero(); ncol * rank];
            contracted.par_chunks_mut(rank).enumerate().for_each(|(col, row)| {
                let fiber = &w.data[col * d.n..(col + 1) * d.n];
                for (r, m) in row.iter_mut().enumerate() {
                    *m = fiber
                        .iter()
                        .zip(f.a.col(r))
                        .fold(Complex::zero(), |acc, (&x, a)| acc + x * a.conj());
                }
            });
            let at = |j: usize, k: usize, r: usize| contracted[(k * d.e + j) * rank + r];
            let mut out = ComplexMatrix::zeros(d.extent(mode), rank);
            for r in 0..rank {
                for k in 0..d.t {
                    for j in 0..d.e {
                        let m = at(j, k, r);
                        match mode {
                            Mode::Echo => out[(j, r)] += m * f.c[(k, r)].conj(),
                            _ => out[(k, r)] += m * f.b[(j, r)].conj(),
                        }
                    }
                }
            }
            out
        }
    }
}

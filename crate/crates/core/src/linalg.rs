//! Dense complex matrices on labeled tensor-product spaces.
//!
//! Storage is row-major. A composite index over factors `(d_0, .., d_{k-1})`
//! treats the first factor as most significant, which is the ordering
//! produced by [`kron`].

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
pub use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative tolerance on `‖m − m†‖` before an input is rejected as non-Hermitian.
pub const HERM_TOL: f64 = 1e-9;
/// Relative tolerance below zero at which eigenvalues are clipped instead of rejected.
pub const PSD_TOL: f64 = 1e-9;
/// Eigenvalues below `RANK_TOL · λ_max` are outside the support.
pub const RANK_TOL: f64 = 1e-10;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("{rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO })
    }

    /// Builds a matrix from nested real/imaginary rows.
    pub fn from_rows(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let rows = re.len();
        let cols = re.first().map_or(0, Vec::len);
        if im.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: im.len(),
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for (r, i) in re.iter().zip(im) {
            if r.len() != cols || i.len() != cols {
                return Err(Error::InvalidShape("ragged rows".into()));
            }
            data.extend(r.iter().zip(i).map(|(&a, &b)| C64::new(a, b)));
        }
        Self::new(rows, cols, data)
    }

    /// `|v⟩⟨v|`
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        Self::from_fn(n, n, |i, j| v[i] * v[j].conj())
    }

    /// Column vector.
    pub fn column(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn re_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.cols)
            .map(|r| r.iter().map(|z| z.re).collect())
            .collect()
    }

    pub fn im_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.cols)
            .map(|r| r.iter().map(|z| z.im).collect())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_c(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm of the anti-Hermitian part.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `(m + m†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Sub-matrix `[r0, r0+rows) × [c0, c0+cols)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.data.iter().zip(&other.data).all(|(a, b)| (a - b).norm() <= tol)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn to_na(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_na(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// Kronecker product; entry `(i·p + k, j·q + l)` is `a[i,j]·b[k,l]` for `b` of shape `p×q`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (p, q) = (b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(a.rows * p, a.cols * q);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..p {
                for l in 0..q {
                    out[(i * p + k, j * q + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Ordered tensor factors, each a `(label, dimension)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<(String, usize)>", into = "Vec<(String, usize)>")]
pub struct SystemDims {
    factors: Vec<(String, usize)>,
}

impl TryFrom<Vec<(String, usize)>> for SystemDims {
    type Error = Error;
    fn try_from(factors: Vec<(String, usize)>) -> Result<Self> {
        Self::new(factors)
    }
}

impl From<SystemDims> for Vec<(String, usize)> {
    fn from(d: SystemDims) -> Self {
        d.factors
    }
}

impl fmt::Display for SystemDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|(l, d)| format!("{l}:{d}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

impl SystemDims {
    pub fn new(factors: Vec<(String, usize)>) -> Result<Self> {
        for (i, (label, dim)) in factors.iter().enumerate() {
            if *dim == 0 {
                return Err(Error::InvalidShape(format!("factor `{label}` has dimension 0")));
            }
            if factors[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { factors })
    }

    /// Convenience constructor from string slices; panics on invalid input.
    pub fn of(factors: &[(&str, usize)]) -> Self {
        Self::new(factors.iter().map(|&(l, d)| (l.to_string(), d)).collect()).expect("invalid factor list")
    }

    pub fn empty() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn total(&self) -> usize {
        self.factors.iter().map(|(_, d)| d).product()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|(l, _)| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.position(label)
            .map(|p| self.factors[p].1)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Product of the dimensions of `labels`.
    pub fn dim_of_all(&self, labels: &[&str]) -> Result<usize> {
        labels.iter().map(|l| self.dim_of(l)).product()
    }

    /// Keeps `labels`, in the order they appear here.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        for l in labels {
            self.dim_of(l)?;
        }
        Ok(Self {
            factors: self
                .factors
                .iter()
                .filter(|(l, _)| labels.contains(&l.as_str()))
                .cloned()
                .collect(),
        })
    }

    /// Drops `labels`; remaining factors keep their relative order.
    pub fn without(&self, labels: &[&str]) -> Result<Self> {
        for l in labels {
            self.dim_of(l)?;
        }
        Ok(Self {
            factors: self
                .factors
                .iter()
                .filter(|(l, _)| !labels.contains(&l.as_str()))
                .cloned()
                .collect(),
        })
    }

    /// Reorders to exactly `labels`, which must be a permutation of this factor list.
    pub fn reordered(&self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "reorder expects {} labels, got {}",
                self.len(),
                labels.len()
            )));
        }
        let factors = labels
            .iter()
            .map(|l| self.dim_of(l).map(|d| (l.to_string(), d)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Self::new(factors)
    }

    pub fn relabel(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        Self::new(self.factors.iter().map(|(l, d)| (f(l), *d)).collect())
    }

    fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|(_, d)| *d).collect()
    }
}

fn check_square(m: &ComplexMatrix, dims: &SystemDims) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidShape(format!("{}x{} is not square", m.rows, m.cols)));
    }
    if m.rows != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: m.rows,
        });
    }
    Ok(())
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// For each composite index over the `sel` factors (in `sel` order), its
/// offset into the full composite index.
fn offsets(dims: &[usize], sel: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &f in sel {
        let mut next = Vec::with_capacity(out.len() * dims[f]);
        for &base in &out {
            for k in 0..dims[f] {
                next.push(base + k * st[f]);
            }
        }
        out = next;
    }
    out
}

/// Traces out `traced`; remaining factors keep their original relative order.
pub fn partial_trace(m: &ComplexMatrix, dims: &SystemDims, traced: &[&str]) -> Result<ComplexMatrix> {
    check_square(m, dims)?;
    let traced_pos: Vec<usize> = traced
        .iter()
        .map(|l| dims.position(l).ok_or_else(|| Error::UnknownLabel(l.to_string())))
        .collect::<Result<_>>()?;
    let kept_pos: Vec<usize> = (0..dims.len()).filter(|p| !traced_pos.contains(p)).collect();
    let d = dims.dims();
    let kept = offsets(&d, &kept_pos);
    let tr = offsets(&d, &traced_pos);
    let n = kept.len();
    let mut out = ComplexMatrix::zeros(n, n);
    for (i, &ri) in kept.iter().enumerate() {
        for (j, &cj) in kept.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &tr {
                acc += m[(ri + t, cj + t)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Marginal on `keep` (original relative order) together with its dims.
pub fn marginal(m: &ComplexMatrix, dims: &SystemDims, keep: &[&str]) -> Result<(ComplexMatrix, SystemDims)> {
    let kept = dims.select(keep)?;
    let traced: Vec<&str> = dims.labels().into_iter().filter(|l| !keep.contains(l)).collect();
    Ok((partial_trace(m, dims, &traced)?, kept))
}

/// Reorders tensor factors of a square operator to `order`.
pub fn permute_factors(m: &ComplexMatrix, dims: &SystemDims, order: &[&str]) -> Result<(ComplexMatrix, SystemDims)> {
    check_square(m, dims)?;
    let new_dims = dims.reordered(order)?;
    let pos: Vec<usize> = order.iter().map(|l| dims.position(l).unwrap()).collect();
    let idx = offsets(&dims.dims(), &pos);
    let n = idx.len();
    let out = ComplexMatrix::from_fn(n, n, |i, j| m[(idx[i], idx[j])]);
    Ok((out, new_dims))
}

/// Reorders the factors of a state vector.
pub fn permute_vector(v: &[C64], dims: &SystemDims, order: &[&str]) -> Result<(Vec<C64>, SystemDims)> {
    if v.len() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: v.len(),
        });
    }
    let new_dims = dims.reordered(order)?;
    let pos: Vec<usize> = order.iter().map(|l| dims.position(l).unwrap()).collect();
    let idx = offsets(&dims.dims(), &pos);
    Ok((idx.iter().map(|&k| v[k]).collect(), new_dims))
}

/// Lifts an operator on a subset of the factors of `full` to the whole space
/// by tensoring with the identity on the rest.
pub fn embed_operator(op: &ComplexMatrix, op_dims: &SystemDims, full: &SystemDims) -> Result<ComplexMatrix> {
    check_square(op, op_dims)?;
    for (l, d) in op_dims.factors() {
        if full.dim_of(l)? != *d {
            return Err(Error::DimensionMismatch {
                expected: full.dim_of(l)?,
                found: *d,
            });
        }
    }
    let rest = full.without(&op_dims.labels())?;
    let joined = op_dims.concat(&rest)?;
    let lifted = kron(op, &ComplexMatrix::identity(rest.total()));
    Ok(permute_factors(&lifted, &joined, &full.labels())?.0)
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermEig {
    /// Eigenvector `k` as a column.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect()
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `V f(Λ) V†`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &w) in fv.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }

    /// Number of eigenvalues above `RANK_TOL · λ_max`.
    pub fn rank(&self) -> usize {
        let cut = RANK_TOL * self.max_abs_value();
        self.values.iter().filter(|&&v| v > cut).count()
    }
}

pub fn herm_eig(m: &ComplexMatrix) -> Result<HermEig> {
    if !m.is_square() {
        return Err(Error::InvalidShape(format!("{}x{} is not square", m.rows, m.cols)));
    }
    let scale = m.frobenius_norm();
    let defect = m.hermiticity_defect();
    if defect > HERM_TOL * scale.max(f64::MIN_POSITIVE) && defect > 1e-300 {
        return Err(Error::NotHermitian { deviation: defect });
    }
    let eig = nalgebra::SymmetricEigen::new(m.hermitian_part().to_na());
    let n = m.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermEig { values, vectors })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatFn {
    Sqrt,
    /// Moore–Penrose inverse on the support.
    Pinv,
    /// Inverse square root on the support.
    PinvSqrt,
    /// Base-2 logarithm on the support, zero on the kernel.
    Log2,
}

/// Applies `f` spectrally to a Hermitian PSD matrix.
pub fn mat_fn(m: &ComplexMatrix, f: MatFn) -> Result<ComplexMatrix> {
    apply_fn(&herm_eig(m)?, f)
}

pub(crate) fn apply_fn(eig: &HermEig, f: MatFn) -> Result<ComplexMatrix> {
    let lmax = eig.max_abs_value();
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < -PSD_TOL * lmax {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let cut = RANK_TOL * lmax;
    Ok(eig.reconstruct_with(|v| {
        if v <= cut {
            return 0.0;
        }
        match f {
            MatFn::Sqrt => v.sqrt(),
            MatFn::Pinv => 1.0 / v,
            MatFn::PinvSqrt => 1.0 / v.sqrt(),
            MatFn::Log2 => v.log2(),
        }
    }))
}

/// Projector onto the support of a PSD matrix.
pub fn support_projector(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(m)?;
    let cut = RANK_TOL * eig.max_abs_value();
    Ok(eig.reconstruct_with(|v| if v > cut { 1.0 } else { 0.0 }))
}

/// Isometry `V` (columns = eigenvectors on the support) with `V V†` the support projector.
pub fn support_isometry(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(m)?;
    let cut = RANK_TOL * eig.max_abs_value();
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > cut).collect();
    Ok(ComplexMatrix::from_fn(m.rows(), keep.len(), |i, k| {
        eig.vectors[(i, keep[k])]
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub trace_norm: f64,
    pub operator_norm: f64,
}

pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.to_na().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn norms(m: &ComplexMatrix) -> Norms {
    let s = singular_values(m);
    Norms {
        trace_norm: s.iter().sum(),
        operator_norm: s.first().copied().unwrap_or(0.0),
    }
}

/// Minimum eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(herm_eig(m)?.values[0])
}

/// Shared on-disk matrix format: `{"dims": [["A",2],..], "re": [[..]], "im": [[..]]}`
/// with an optional `kind` tag and channel dims.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub dims: Vec<(String, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_dims: Option<Vec<(String, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dims: Option<Vec<(String, usize)>>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &ComplexMatrix, dims: &SystemDims, kind: Option<&str>) -> Self {
        Self {
            kind: kind.map(str::to_string),
            dims: dims.factors().to_vec(),
            in_dims: None,
            out_dims: None,
            re: m.re_rows(),
            im: m.im_rows(),
        }
    }

    /// Validates shape and returns the matrix with its dims. Errors name the offending field.
    pub fn to_matrix(&self) -> Result<(ComplexMatrix, SystemDims)> {
        let parse = |field: &str, message: String| Error::Parse {
            field: field.to_string(),
            message,
        };
        let dims = SystemDims::new(self.dims.clone()).map_err(|e| parse("dims", e.to_string()))?;
        let n = dims.total();
        if self.re.len() != n {
            return Err(parse("re", format!("expected {n} rows, found {}", self.re.len())));
        }
        if self.im.len() != n {
            return Err(parse("im", format!("expected {n} rows, found {}", self.im.len())));
        }
        for (name, rows) in [("re", &self.re), ("im", &self.im)] {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(parse(
                        &format!("{name}[{i}]"),
                        format!("expected {n} columns, found {}", row.len()),
                    ));
                }
                if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                    return Err(parse(&format!("{name}[{i}][{j}]"), "non-finite value".into()));
                }
            }
        }
        let m = ComplexMatrix::from_rows(&self.re, &self.im).map_err(|e| parse("re/im", e.to_string()))?;
        Ok((m, dims))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_matrix(rng: &mut ChaCha20Rng, n: usize, m: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, m, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hermitian(rng: &mut ChaCha20Rng, n: usize) -> ComplexMatrix {
        random_matrix(rng, n, n).hermitian_part()
    }

    fn random_psd(rng: &mut ChaCha20Rng, n: usize) -> ComplexMatrix {
        let g = random_matrix(rng, n, n);
        &g * &g.adjoint()
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let k = kron(
            &ComplexMatrix::from_real_diag(&[1.0, 2.0]),
            &ComplexMatrix::from_real_diag(&[3.0, 4.0]),
        );
        assert_eq!(k, ComplexMatrix::from_real_diag(&[3.0, 4.0, 6.0, 8.0]));
    }

    #[test]
    fn kron_matches_index_formula() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 2, 2);
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 2 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let a = random_psd(&mut rng, 2);
        let b = random_psd(&mut rng, 3);
        let dims = SystemDims::of(&[("A", 2), ("B", 3)]);
        let pt = partial_trace(&kron(&a, &b), &dims, &["B"]).unwrap();
        assert!(pt.approx_eq(&a.scale_c(b.trace()), 1e-12));
        let pt = partial_trace(&kron(&a, &b), &dims, &["A"]).unwrap();
        assert!(pt.approx_eq(&b.scale_c(a.trace()), 1e-12));
    }

    #[test]
    fn partial_trace_of_maximally_entangled() {
        let d = 3;
        let mut v = vec![ZERO; d * d];
        for i in 0..d {
            v[i * d + i] = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        }
        let dims = SystemDims::of(&[("A", d), ("B", d)]);
        let pt = partial_trace(&ComplexMatrix::outer(&v), &dims, &["B"]).unwrap();
        assert!(pt.approx_eq(&ComplexMatrix::identity(d).scale(1.0 / d as f64), 1e-12));
    }

    #[test]
    fn partial_trace_middle_factor_matches_index_sum() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let m = random_hermitian(&mut rng, 8);
        let dims = SystemDims::of(&[("A", 2), ("B", 2), ("C", 2)]);
        let pt = partial_trace(&m, &dims, &["B"]).unwrap();
        for a in 0..2 {
            for c in 0..2 {
                for a2 in 0..2 {
                    for c2 in 0..2 {
                        let mut acc = ZERO;
                        for b in 0..2 {
                            acc += m[(a * 4 + b * 2 + c, a2 * 4 + b * 2 + c2)];
                        }
                        assert!((pt[(a * 2 + c, a2 * 2 + c2)] - acc).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_errors() {
        let dims = SystemDims::of(&[("A", 2), ("B", 2)]);
        let m = ComplexMatrix::identity(4);
        assert!(matches!(partial_trace(&m, &dims, &["Z"]), Err(Error::UnknownLabel(_))));
        let bad = ComplexMatrix::identity(3);
        assert!(matches!(
            partial_trace(&bad, &dims, &["A"]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn permute_then_embed_consistency() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 3);
        let dims = SystemDims::of(&[("A", 2), ("B", 3)]);
        let (p, pd) = permute_factors(&kron(&a, &b), &dims, &["B", "A"]).unwrap();
        assert_eq!(pd.labels(), vec!["B", "A"]);
        assert!(p.approx_eq(&kron(&b, &a), 1e-14));

        let full = SystemDims::of(&[("A", 2), ("B", 3), ("C", 2)]);
        let e = embed_operator(&b, &SystemDims::of(&[("B", 3)]), &full).unwrap();
        let expect = kron(&kron(&ComplexMatrix::identity(2), &b), &ComplexMatrix::identity(2));
        assert!(e.approx_eq(&expect, 1e-14));
    }

    #[test]
    fn herm_eig_known_spectra() {
        let e = herm_eig(&ComplexMatrix::from_real_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
        let x = ComplexMatrix::new(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap();
        let e = herm_eig(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn herm_eig_reconstructs_random() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = random_hermitian(&mut rng, 8);
            let e = herm_eig(&m).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let r = e.reconstruct_with(|v| v);
            assert!(r.max_abs_diff(&m) <= 1e-12 * m.frobenius_norm().max(1.0));
            let u = &e.vectors.adjoint() * &e.vectors;
            assert!(u.approx_eq(&ComplexMatrix::identity(8), 1e-10));
        }
    }

    #[test]
    fn herm_eig_rejects_non_hermitian() {
        let m = ComplexMatrix::new(2, 2, vec![ZERO, ONE, ZERO, ZERO]).unwrap();
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn mat_fn_cases() {
        let id = ComplexMatrix::identity(3);
        assert!(mat_fn(&id, MatFn::Sqrt).unwrap().approx_eq(&id, 1e-14));
        let d = ComplexMatrix::from_real_diag(&[4.0, 9.0, 0.0]);
        let r = mat_fn(&d, MatFn::PinvSqrt).unwrap();
        assert!(r.approx_eq(&ComplexMatrix::from_real_diag(&[0.5, 1.0 / 3.0, 0.0]), 1e-14));
        let neg = ComplexMatrix::from_real_diag(&[1.0, -0.1]);
        assert!(matches!(mat_fn(&neg, MatFn::Sqrt), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn mat_fn_random_psd() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..20 {
            let m = random_psd(&mut rng, 5);
            let s = mat_fn(&m, MatFn::Sqrt).unwrap();
            assert!((&s * &s).approx_eq(&m, 1e-10));
            // rank-deficient: support projector idempotent
            let g = random_matrix(&mut rng, 5, 2);
            let low = &g * &g.adjoint();
            let p = &mat_fn(&low, MatFn::Pinv).unwrap() * &low;
            assert!((&p * &p).approx_eq(&p, 1e-10));
            assert!((p.trace().re - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn norms_cases() {
        let n = norms(&ComplexMatrix::identity(4));
        assert!((n.trace_norm - 4.0).abs() < 1e-14 && (n.operator_norm - 1.0).abs() < 1e-14);
        let n = norms(&ComplexMatrix::from_real_diag(&[3.0, -4.0]));
        assert!((n.trace_norm - 7.0).abs() < 1e-14 && (n.operator_norm - 4.0).abs() < 1e-14);
    }

    #[test]
    fn norms_match_gram_eigen_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..10 {
            let m = random_matrix(&mut rng, 4, 4);
            let gram = &m.adjoint() * &m;
            let e = herm_eig(&gram).unwrap();
            let sv: Vec<f64> = e.values.iter().map(|v| v.max(0.0).sqrt()).collect();
            let n = norms(&m);
            assert!((n.trace_norm - sv.iter().sum::<f64>()).abs() < 1e-10);
            assert!((n.operator_norm - sv[3]).abs() < 1e-10);
        }
    }

    #[test]
    fn matrix_file_round_trip_is_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let m = random_matrix(&mut rng, 4, 4);
        let dims = SystemDims::of(&[("A", 2), ("B", 2)]);
        let text = serde_json::to_string(&MatrixFile::from_matrix(&m, &dims, Some("state"))).unwrap();
        let back: MatrixFile = serde_json::from_str(&text).unwrap();
        let (m2, d2) = back.to_matrix().unwrap();
        assert_eq!(m2, m);
        assert_eq!(d2, dims);
    }

    #[test]
    fn matrix_file_reports_field() {
        let text = r#"{"dims": [["A",2]], "re": [[1,0],[0]], "im": [[0,0],[0,0]]}"#;
        let f: MatrixFile = serde_json::from_str(text).unwrap();
        match f.to_matrix() {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "re[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn system_dims_rejects_duplicates() {
        assert!(SystemDims::new(vec![("A".into(), 2), ("A".into(), 3)]).is_err());
        assert!(SystemDims::new(vec![("A".into(), 0)]).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            ComplexMatrix::new(1, 1, vec![C64::new(f64::NAN, 0.0)]),
            Err(Error::NonFinite)
        ));
    }
}

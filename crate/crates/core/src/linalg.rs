//! Small compressed-row sparse matrix type plus the conversions into faer
//! that the eigensolvers need.

use std::io::Write;
use std::ops::{Add, AddAssign, Mul, Sub};

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + faer::traits::ComplexField
    + 'static
{
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn to_c64(self) -> C64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn to_c64(self) -> C64 {
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

pub type SparseOperator = CsrMatrix<C64>;

impl<T: Scalar> CsrMatrix<T> {
    /// Duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indptr[i + 1] += 1;
                indices.push(j);
                values.push(v);
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let trip: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |p| (self.indices[p], self.values[p]))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out.push((i, j, v));
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or_else(T::zero)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.nrows).all(|i| self.row(i).all(|(j, v)| j == i || v == T::zero()))
    }

    pub fn adjoint(&self) -> Self {
        let trip: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip = self.triplets();
        trip.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, v * s)));
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let mut acc = T::zero();
                for (j, v) in self.row(i) {
                    acc += v * x[j];
                }
                acc
            })
            .collect()
    }

    pub fn mul_dense(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(x.nrows(), self.ncols);
        let mut out = Mat::<T>::zeros(self.nrows, x.ncols());
        for k in 0..x.ncols() {
            for i in 0..self.nrows {
                let mut acc = T::zero();
                for (j, v) in self.row(i) {
                    acc += v * x[(j, k)];
                }
                out[(i, k)] = acc;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut m = Mat::<T>::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, T>> {
        let trip: Vec<Triplet<usize, usize, T>> =
            self.triplets().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::Eigen(format!("sparse conversion: {e:?}")))
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i).conj()).modulus());
            }
        }
        worst
    }

    /// Coordinate-list dump, one `row col value` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            let z = v.to_c64();
            writeln!(w, "{i} {j} {:.17e} {:.17e}", z.re, z.im)?;
        }
        Ok(())
    }
}

/// `P^T A P` where `p_rows[i]` lists the nonzeros `(col, value)` of row `i` of a
/// real matrix `P` with `n_red` columns.
pub fn congruence<T: Scalar>(a: &CsrMatrix<T>, p_rows: &[Vec<(usize, f64)>], n_red: usize) -> CsrMatrix<T> {
    let mut trip = Vec::new();
    for (i, j, v) in a.triplets() {
        for &(pi, wi) in &p_rows[i] {
            for &(pj, wj) in &p_rows[j] {
                trip.push((pi, pj, v * T::from_f64(wi * wj)));
            }
        }
    }
    CsrMatrix::from_triplets(n_red, n_red, &trip)
}

/// Symmetric positive definite weight matrix. Diagonal (lumped) matrices are
/// tracked explicitly so that the eigensolvers can skip a factorization.
#[derive(Clone, Debug, PartialEq)]
pub struct MassMatrix {
    matrix: CsrMatrix<f64>,
    diagonal: Option<Vec<f64>>,
}

impl MassMatrix {
    pub fn from_diagonal(d: Vec<f64>) -> Result<Self> {
        if d.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::InvalidParameter("mass weights must be positive".into()));
        }
        Ok(Self { matrix: CsrMatrix::from_diagonal(&d), diagonal: Some(d) })
    }

    pub fn from_csr(m: CsrMatrix<f64>) -> Self {
        if m.is_diagonal() {
            let d = m.diagonal();
            return Self { matrix: m, diagonal: Some(d) };
        }
        Self { matrix: m, diagonal: None }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(vec![1.0; n]).expect("unit weights")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diagonal(&self) -> Option<&[f64]> {
        self.diagonal.as_deref()
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        match &self.diagonal {
            Some(d) => x.iter().zip(d).map(|(v, w)| v * w).collect(),
            None => self.matrix.map(|v| C64::new(v, 0.0)).mul_vec(x),
        }
    }

    pub fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        match &self.diagonal {
            Some(d) => x.iter().zip(d).map(|(v, w)| v * w).collect(),
            None => self.matrix.mul_vec(x),
        }
    }

    pub fn apply_dense(&self, x: &Mat<C64>) -> Mat<C64> {
        match &self.diagonal {
            Some(d) => Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * d[i]),
            None => self.matrix.map(|v| C64::new(v, 0.0)).mul_dense(x),
        }
    }

    /// `x^H M y`.
    pub fn inner(&self, x: &[C64], y: &[C64]) -> C64 {
        let my = self.apply(y);
        x.iter().zip(&my).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sq(&self, x: &[C64]) -> f64 {
        self.inner(x, x).re
    }

    pub fn as_complex(&self) -> CsrMatrix<C64> {
        self.matrix.map(|v| C64::new(v, 0.0))
    }
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

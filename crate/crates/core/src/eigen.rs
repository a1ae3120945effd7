//! Hermitian generalized eigenproblems `H v = λ M v`: dense solves for small
//! systems, shift-invert block subspace iteration with a sparse LU otherwise.

use faer::prelude::*;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, MassMatrix, SparseOperator, C64};

/// Systems up to this size are diagonalized densely.
pub const DENSE_LIMIT: usize = 2800;
/// Relative residual every returned pair must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Eigenvalues closer than this (relative) belong to one cluster.
pub const CLUSTER_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EigenWindow {
    All,
    Interval { lo: f64, hi: f64 },
    Nearest { shift: f64, count: usize },
}

/// Mass-orthonormal eigenpairs of a Hermitian pencil, sorted by eigenvalue.
#[derive(Clone, Debug)]
pub struct Spectrum {
    values: Vec<f64>,
    vectors: Mat<C64>,
    residuals: Vec<f64>,
    mass: MassMatrix,
}

impl Spectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &Mat<C64> {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, k)]).collect()
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// True when the pairs span the whole space.
    pub fn is_complete(&self) -> bool {
        self.len() == self.dim()
    }

    /// `c_j = v_j^H M u`.
    pub fn coefficients(&self, u: &[C64]) -> Vec<C64> {
        let mu = self.mass.apply(u);
        (0..self.len())
            .map(|k| (0..self.dim()).map(|i| self.vectors[(i, k)].conj() * mu[i]).sum())
            .collect()
    }

    pub fn combine(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (k, &ck) in coeffs.iter().enumerate() {
            if ck == C64::new(0.0, 0.0) {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.vectors[(i, k)] * ck;
            }
        }
        out
    }

    /// Fraction of `‖u‖_M²` carried by the computed eigenvectors.
    pub fn captured_fraction(&self, u: &[C64]) -> f64 {
        let total = self.mass.norm_sq(u);
        if total == 0.0 {
            return 1.0;
        }
        let c = self.coefficients(u);
        c.iter().map(|z| z.norm_sqr()).sum::<f64>() / total
    }

    /// Index ranges of eigenvalue clusters.
    pub fn clusters(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.len() {
            let split = k == self.len() || {
                let (a, b) = (self.values[k - 1], self.values[k]);
                (b - a).abs() > CLUSTER_RTOL * a.abs().max(b.abs()).max(1e-300)
            };
            if split {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// Sign of each pair for the `Y⁺ ⊕ Y⁻` splitting, decided per cluster.
    /// Clusters at |λ| < 1e-12 go to `Y⁺`.
    pub fn positive_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for r in self.clusters() {
            let mean = self.values[r.clone()].iter().sum::<f64>() / r.len() as f64;
            if mean.abs() < 1e-12 {
                log::warn!("eigenvalue cluster at {mean:e} treated as positive");
            }
            let pos = mean >= 0.0 || mean.abs() < 1e-12;
            for k in r {
                mask[k] = pos;
            }
        }
        mask
    }
}

fn dense_eigen(a: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let e = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("dense eigensolver: {e:?}")))?;
    let s = e.S().column_vector();
    let vals = (0..a.nrows()).map(|k| s[k].re).collect();
    Ok((vals, e.U().to_owned()))
}

fn dense_eigenvalues(a: &Mat<C64>) -> Result<Vec<f64>> {
    let v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("dense eigensolver: {e:?}")))?;
    Ok(v.into_iter().collect())
}

/// `M^{-1/2}` as either a diagonal or a dense factor.
enum Whitening {
    Diagonal(Vec<f64>),
    Dense(Mat<C64>),
}

impl Whitening {
    fn new(mass: &MassMatrix) -> Result<Self> {
        if let Some(d) = mass.diagonal() {
            return Ok(Whitening::Diagonal(d.iter().map(|w| 1.0 / w.sqrt()).collect()));
        }
        let (vals, q) = dense_eigen(&mass.as_complex().to_dense())?;
        if vals.iter().any(|&v| v <= 0.0) {
            return Err(Error::Eigen("mass matrix is not positive definite".into()));
        }
        let n = vals.len();
        let scaled = Mat::from_fn(n, n, |i, j| q[(i, j)] / vals[j].sqrt());
        Ok(Whitening::Dense(&scaled * q.adjoint()))
    }

    fn sandwich(&self, h: &Mat<C64>) -> Mat<C64> {
        match self {
            Whitening::Diagonal(s) => Mat::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] * (s[i] * s[j])),
            Whitening::Dense(w) => w * h * w,
        }
    }

    fn apply(&self, x: &Mat<C64>) -> Mat<C64> {
        match self {
            Whitening::Diagonal(s) => Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * s[i]),
            Whitening::Dense(w) => w * x,
        }
    }
}

fn check_dims(op: &SparseOperator, mass: &MassMatrix) -> Result<usize> {
    let n = op.nrows();
    if op.ncols() != n || mass.dim() != n {
        return Err(Error::Eigen(format!(
            "dimension mismatch: operator {}x{}, mass {}",
            op.nrows(),
            op.ncols(),
            mass.dim()
        )));
    }
    if n == 0 {
        return Err(Error::Eigen("empty operator".into()));
    }
    Ok(n)
}

fn relative_residuals(op: &SparseOperator, mass: &MassMatrix, vals: &[f64], vecs: &Mat<C64>) -> Vec<f64> {
    let hv = op.mul_dense(vecs);
    let mv = mass.apply_dense(vecs);
    (0..vals.len())
        .map(|k| {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..vecs.nrows() {
                num += (hv[(i, k)] - mv[(i, k)] * vals[k]).norm_sqr();
                den += mv[(i, k)].norm_sqr();
            }
            num.sqrt() / (den.sqrt() * vals[k].abs().max(1.0))
        })
        .collect()
}

fn select(vals: &[f64], window: EigenWindow) -> Vec<usize> {
    match window {
        EigenWindow::All => (0..vals.len()).collect(),
        EigenWindow::Interval { lo, hi } => (0..vals.len()).filter(|&k| vals[k] >= lo && vals[k] <= hi).collect(),
        EigenWindow::Nearest { shift, count } => {
            let mut idx: Vec<usize> = (0..vals.len()).collect();
            idx.sort_by(|&a, &b| (vals[a] - shift).abs().total_cmp(&(vals[b] - shift).abs()));
            idx.truncate(count);
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            idx
        }
    }
}

fn assemble_spectrum(
    op: &SparseOperator,
    mass: &MassMatrix,
    vals: &[f64],
    vecs: &Mat<C64>,
    keep: &[usize],
) -> Result<Spectrum> {
    let values: Vec<f64> = keep.iter().map(|&k| vals[k]).collect();
    let vectors = Mat::from_fn(vecs.nrows(), keep.len(), |i, j| vecs[(i, keep[j])]);
    let residuals = relative_residuals(op, mass, &values, &vectors);
    if let Some((k, r)) = residuals.iter().enumerate().find(|(_, &r)| !(r <= RESIDUAL_TOL)) {
        return Err(Error::Eigen(format!("pair {k} (λ = {}) has residual {r:.3e}", values[k])));
    }
    Ok(Spectrum { values, vectors, residuals, mass: mass.clone() })
}

pub fn eigendecompose(op: &SparseOperator, mass: &MassMatrix, window: EigenWindow) -> Result<Spectrum> {
    let n = check_dims(op, mass)?;
    if let EigenWindow::Interval { lo, hi } = window {
        if !(lo <= hi) {
            return Err(Error::InvalidParameter(format!("empty window [{lo}, {hi}]")));
        }
    }
    if n <= DENSE_LIMIT || window == EigenWindow::All {
        let w = Whitening::new(mass)?;
        let (vals, u) = dense_eigen(&w.sandwich(&op.to_dense()))?;
        let vecs = w.apply(&u);
        return assemble_spectrum(op, mass, &vals, &vecs, &select(&vals, window));
    }
    match window {
        EigenWindow::Nearest { shift, count } => {
            let (vals, vecs) = shift_invert(op, mass, shift, count.min(n))?;
            let all: Vec<usize> = (0..vals.len()).collect();
            assemble_spectrum(op, mass, &vals, &vecs, &all)
        }
        EigenWindow::Interval { lo, hi } => {
            let shift = 0.5 * (lo + hi);
            let mut count = 16;
            loop {
                let (vals, vecs) = shift_invert(op, mass, shift, count.min(n))?;
                let outside = vals.iter().any(|&v| v < lo || v > hi);
                if outside || count >= n {
                    let keep = select(&vals, window);
                    return assemble_spectrum(op, mass, &vals, &vecs, &keep);
                }
                count *= 2;
            }
        }
        EigenWindow::All => unreachable!(),
    }
}

/// The `count` eigenvalues nearest `shift`, sorted ascending, without vectors.
pub fn eigenvalues_near(op: &SparseOperator, mass: &MassMatrix, shift: f64, count: usize) -> Result<Vec<f64>> {
    let n = check_dims(op, mass)?;
    let count = count.min(n);
    if n <= 96 || 4 * count >= n {
        let w = Whitening::new(mass)?;
        let vals = dense_eigenvalues(&w.sandwich(&op.to_dense()))?;
        let keep = select(&vals, EigenWindow::Nearest { shift, count });
        return Ok(keep.into_iter().map(|k| vals[k]).collect());
    }
    Ok(shift_invert(op, mass, shift, count)?.0)
}

fn mat_adj_mul(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    a.adjoint() * b
}

/// M-orthonormal basis for the column span of `y`, dropping near-dependent directions.
fn m_orthonormalize(y: &Mat<C64>, mass: &MassMatrix) -> Result<Mat<C64>> {
    let mut q = y.clone();
    for _ in 0..2 {
        let g = mat_adj_mul(&q, &mass.apply_dense(&q));
        let (gv, gu) = dense_eigen(&g)?;
        let gmax = gv.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..gv.len()).filter(|&k| gv[k] > gmax * 1e-13).collect();
        let t = Mat::from_fn(gu.nrows(), keep.len(), |i, j| gu[(i, keep[j])] / gv[keep[j]].sqrt());
        q = &q * &t;
    }
    Ok(q)
}

/// Shift-invert block subspace iteration with Rayleigh-Ritz on the projected pencil.
fn shift_invert(op: &SparseOperator, mass: &MassMatrix, shift: f64, count: usize) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = op.nrows();
    let shifted = op.add_scaled(&mass.as_complex(), C64::new(-shift, 0.0));
    let lu = shifted
        .to_faer()?
        .sp_lu()
        .map_err(|e| Error::Eigen(format!("sparse LU of H - {shift} M failed: {e:?}")))?;
    let p = (count + count.max(8)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ n as u64);
    let mut x = Mat::from_fn(n, p, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let tol = 1e-12;
    let max_iter = 2000;
    let mut last = (Vec::new(), Mat::<C64>::zeros(n, 0));
    for it in 0..max_iter {
        // Ritz extraction on (H - σM)^{-1} in the M inner product; plain
        // Rayleigh-Ritz on H produces spurious values near an interior shift.
        let q = m_orthonormalize(&x, mass)?;
        let mut y = mass.apply_dense(&q);
        lu.solve_in_place(y.as_mut());
        let b = mat_adj_mul(&q, &mass.apply_dense(&y));
        let b = Mat::from_fn(b.nrows(), b.ncols(), |i, j| 0.5 * (b[(i, j)] + b[(j, i)].conj()));
        let (nu, s) = dense_eigen(&b)?;
        let mut order: Vec<usize> = (0..nu.len()).collect();
        order.sort_by(|&a, &b| nu[b].abs().total_cmp(&nu[a].abs()));
        order.truncate(count);
        let v = &q * &s;
        let hv = op.mul_dense(&v);
        let mut pairs: Vec<(f64, usize)> = order
            .iter()
            .map(|&k| ((0..n).map(|i| (v[(i, k)].conj() * hv[(i, k)]).re).sum::<f64>(), k))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let vecs = Mat::from_fn(n, pairs.len(), |i, j| v[(i, pairs[j].1)]);
        x = &y * &s;
        let res = relative_residuals(op, mass, &vals, &vecs);
        let worst = res.iter().cloned().fold(0.0, f64::max);
        if worst <= tol || (it + 1 == max_iter && worst <= RESIDUAL_TOL) {
            return Ok((vals, vecs));
        }
        last = (vals, vecs);
        if x.ncols() < count {
            return Err(Error::Eigen(format!("subspace collapsed to {} vectors", x.ncols())));
        }
    }
    let res = relative_residuals(op, mass, &last.0, &last.1);
    Err(Error::Eigen(format!(
        "shift-invert at {shift} did not converge in {max_iter} iterations (worst residual {:.3e})",
        res.iter().cloned().fold(0.0, f64::max)
    )))
}

/// Dense real-symmetric generalized solve used in tests and small checks.
pub fn dense_generalized(op: &CsrMatrix<C64>, mass: &MassMatrix) -> Result<Vec<f64>> {
    check_dims(op, mass)?;
    let w = Whitening::new(mass)?;
    dense_eigenvalues(&w.sandwich(&op.to_dense()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(2.0 + 0.1 * i as f64, 0.0)));
            if i + 1 < n {
                t.push((i, i + 1, C64::new(0.0, -1.0)));
                t.push((i + 1, i, C64::new(0.0, 1.0)));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn identity_operator() {
        let n = 5;
        let op = CsrMatrix::from_diagonal(&vec![C64::new(1.0, 0.0); n]);
        let s = eigendecompose(&op, &MassMatrix::identity(n), EigenWindow::All).unwrap();
        assert!(s.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert_eq!(s.clusters().len(), 1);
    }

    #[test]
    fn generalized_with_diagonal_mass() {
        let op = tridiag(30);
        let w: Vec<f64> = (0..30).map(|i| 0.5 + 0.01 * i as f64).collect();
        let mass = MassMatrix::from_diagonal(w).unwrap();
        let s = eigendecompose(&op, &mass, EigenWindow::All).unwrap();
        let gram = s.vectors().adjoint() * mass.apply_dense(s.vectors());
        for i in 0..30 {
            for j in 0..30 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shift_invert_matches_dense() {
        let n = 400;
        let op = tridiag(n);
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * ((i * 7) % 5) as f64).collect();
        let mass = MassMatrix::from_diagonal(w).unwrap();
        let full = dense_generalized(&op, &mass).unwrap();
        let shift = 3.3;
        let (vals, _) = shift_invert(&op, &mass, shift, 6).unwrap();
        let mut want: Vec<f64> = full.clone();
        want.sort_by(|a, b| (a - shift).abs().total_cmp(&(b - shift).abs()));
        want.truncate(6);
        want.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in vals.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let near = eigenvalues_near(&op, &mass, shift, 6).unwrap();
        assert_eq!(near.len(), 6);
    }

    #[test]
    fn nondiagonal_mass() {
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, 1.0));
                t.push((i + 1, i, 1.0));
            }
        }
        let mass = MassMatrix::from_csr(CsrMatrix::from_triplets(n, n, &t));
        let op = mass.as_complex();
        let s = eigendecompose(&op, &mass, EigenWindow::Interval { lo: 0.5, hi: 1.5 }).unwrap();
        assert_eq!(s.len(), n);
        assert!(s.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}

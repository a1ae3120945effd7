//! Floquet-Bloch fibers, band structures, gap verification, the `D²`
//! decoupling check, and the spectral splitting `Y = Y⁺ ⊕ Y⁻`.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{dense_generalized, eigenvalues_near, Spectrum};
use crate::error::{invalid, Error, Result};
use crate::fem::{
    assemble_anti_kirchhoff, assemble_dirac_unchecked, assemble_kirchhoff, make_space, DiscreteSpace, SpinorField,
};
use crate::graph::{validate, PeriodicGraph};
use crate::linalg::{CsrMatrix, MassMatrix, SparseOperator, C64};

pub use crate::eigen::{eigendecompose, EigenWindow};

/// Largest basis-truncation loss tolerated by the spectral norms.
pub const TRUNCATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct BlochFiber {
    pub theta: Vec<f64>,
    pub op: SparseOperator,
    pub mass: MassMatrix,
}

impl BlochFiber {
    pub fn dim(&self) -> usize {
        self.op.nrows()
    }
}

/// Cell discretization plus the phase bookkeeping shared by all fibers.
pub struct FiberTemplate {
    space: Arc<DiscreteSpace>,
    rank: usize,
    h_triplets: Vec<(usize, usize, C64)>,
    /// Reduced index of every cell DOF.
    reduced: Vec<usize>,
    /// Lattice offset of every cell DOF relative to its representative.
    offsets: Vec<Vec<i64>>,
    n_reduced: usize,
}

impl FiberTemplate {
    pub fn new(pg: &PeriodicGraph, h_max: f64, m: f64, c: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) || !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("need m >= 0 and c > 0, got m = {m}, c = {c}")));
        }
        let report = validate(pg);
        if !report.is_valid() {
            return Err(invalid(format!("periodic graph fails validation: {}", report.summary())));
        }
        let cell = pg.cell();
        let space = make_space(cell, h_max)?;
        let (h, _) = assemble_dirac_unchecked(&space, m, c)?;
        let nv = cell.n_vertices();
        let rank = pg.rank();

        let mut adj: Vec<Vec<(usize, Vec<i64>)>> = vec![Vec::new(); nv];
        for gl in pg.gluings() {
            for &(q, p) in &gl.pairs {
                let mut e = vec![0i64; rank];
                e[gl.generator] = 1;
                let neg: Vec<i64> = e.iter().map(|x| -x).collect();
                adj[p].push((q, e));
                adj[q].push((p, neg));
            }
        }
        let mut class = vec![usize::MAX; nv];
        let mut off = vec![vec![0i64; rank]; nv];
        let mut n_classes = 0;
        for start in 0..nv {
            if class[start] != usize::MAX {
                continue;
            }
            class[start] = n_classes;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for (w, e) in &adj[v] {
                    if class[*w] == usize::MAX {
                        class[*w] = n_classes;
                        off[*w] = off[v].iter().zip(e).map(|(a, b)| a + b).collect();
                        queue.push_back(*w);
                    }
                }
            }
            n_classes += 1;
        }
        let n = space.n_dofs();
        let mut reduced = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for d in 0..n {
            if d < nv {
                reduced.push(class[d]);
                offsets.push(off[d].clone());
            } else {
                reduced.push(n_classes + d - nv);
                offsets.push(vec![0; rank]);
            }
        }
        Ok(Self { h_triplets: h.triplets(), space, rank, reduced, offsets, n_reduced: n_classes + n - nv })
    }

    pub fn space(&self) -> &Arc<DiscreteSpace> {
        &self.space
    }

    pub fn fiber(&self, theta: &[f64]) -> Result<BlochFiber> {
        if theta.len() != self.rank {
            return Err(Error::RankMismatch { expected: self.rank, got: theta.len() });
        }
        let phase: Vec<C64> = self
            .offsets
            .iter()
            .map(|o| C64::from_polar(1.0, o.iter().zip(theta).map(|(k, t)| *k as f64 * t).sum()))
            .collect();
        let trip: Vec<(usize, usize, C64)> = self
            .h_triplets
            .iter()
            .map(|&(i, j, v)| (self.reduced[i], self.reduced[j], phase[i].conj() * v * phase[j]))
            .collect();
        let op = CsrMatrix::from_triplets(self.n_reduced, self.n_reduced, &trip);
        let mut w = vec![0.0; self.n_reduced];
        for (d, &wd) in self.space.weights().iter().enumerate() {
            w[self.reduced[d]] += wd;
        }
        Ok(BlochFiber { theta: theta.to_vec(), op, mass: MassMatrix::from_diagonal(w)? })
    }
}

pub fn bloch_fiber(pg: &PeriodicGraph, theta: &[f64], h_max: f64, m: f64, c: f64) -> Result<BlochFiber> {
    if theta.len() != pg.rank() {
        return Err(Error::RankMismatch { expected: pg.rank(), got: theta.len() });
    }
    if theta.iter().any(|t| !(0.0..2.0 * PI).contains(t)) {
        return Err(invalid("quasimomentum components must lie in [0, 2π)"));
    }
    FiberTemplate::new(pg, h_max, m, c)?.fiber(theta)
}

/// Uniform grid `θ_j = 2πj/n` in each of `d` dimensions, lexicographic.
pub fn theta_grid(d: usize, n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        let mut next = Vec::with_capacity(out.len() * n);
        for p in &out {
            for j in 0..n {
                let mut q = p.clone();
                q.push(2.0 * PI * j as f64 / n as f64);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandStructure {
    pub thetas: Vec<Vec<f64>>,
    /// `bands[t]` are the sorted eigenvalues nearest zero at `thetas[t]`.
    pub bands: Vec<Vec<f64>>,
}

impl BandStructure {
    pub fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.bands.iter().flatten().copied()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.thetas.first().map_or(0, |t| t.len());
        let head: Vec<String> = (0..d).map(|i| format!("theta{i}")).collect();
        writeln!(w, "{},band,lambda", head.join(","))?;
        for (t, vals) in self.thetas.iter().zip(&self.bands) {
            let th: Vec<String> = t.iter().map(|x| format!("{x:.12e}")).collect();
            for (b, l) in vals.iter().enumerate() {
                writeln!(w, "{},{b},{l:.12e}", th.join(","))?;
            }
        }
        Ok(())
    }
}

pub fn compute_bands(
    pg: &PeriodicGraph,
    theta_grid: &[Vec<f64>],
    n_bands: usize,
    h_max: f64,
    m: f64,
    c: f64,
) -> Result<BandStructure> {
    if theta_grid.is_empty() {
        return Err(invalid("empty quasimomentum grid"));
    }
    if n_bands == 0 {
        return Err(invalid("n_bands must be at least 1"));
    }
    let template = FiberTemplate::new(pg, h_max, m, c)?;
    let bands: Vec<Result<Vec<f64>>> = theta_grid
        .par_iter()
        .enumerate()
        .map(|(t, theta)| {
            let fiber = template.fiber(theta)?;
            let near = eigenvalues_near(&fiber.op, &fiber.mass, 0.0, n_bands)
                .or_else(|_| eigenvalues_near(&fiber.op, &fiber.mass, 1e-3 * m * c * c + 1e-9, n_bands));
            near.map_err(|e| Error::Eigen(format!("θ index {t} ({theta:?}): {e}")))
        })
        .collect();
    let bands = bands.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BandStructure { thetas: theta_grid.to_vec(), bands })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    pub pass: bool,
    /// Largest computed eigenvalue below zero.
    pub gap_lo: f64,
    /// Smallest computed eigenvalue above zero.
    pub gap_hi: f64,
    pub argmin_theta: Vec<f64>,
    pub tolerance: f64,
    pub min_abs: f64,
    pub mc2: f64,
}

pub fn verify_gap(bands: &BandStructure, m: f64, c: f64, tol: f64) -> GapReport {
    let mc2 = m * c * c;
    let mut gap_lo = f64::NEG_INFINITY;
    let mut gap_hi = f64::INFINITY;
    let mut min_abs = f64::INFINITY;
    let mut argmin = Vec::new();
    for (t, vals) in bands.thetas.iter().zip(&bands.bands) {
        for &l in vals {
            if l < 0.0 {
                gap_lo = gap_lo.max(l);
            } else {
                gap_hi = gap_hi.min(l);
            }
            if l.abs() < min_abs {
                min_abs = l.abs();
                argmin = t.clone();
            }
        }
    }
    GapReport {
        pass: min_abs.is_finite() && min_abs >= mc2 * (1.0 - tol),
        gap_lo,
        gap_hi,
        argmin_theta: argmin,
        tolerance: tol,
        min_abs,
        mc2,
    }
}

/// Intervals of the positive axis covered by the bands, merging points closer
/// than `resolution`.
pub fn band_coverage(bands: &BandStructure, lo: f64, hi: f64, resolution: f64) -> (Vec<(f64, f64)>, f64) {
    let mut vals: Vec<f64> = bands.all_values().filter(|&v| v >= lo - resolution && v <= hi + resolution).collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut widest: f64 = 0.0;
    for v in vals {
        match intervals.last_mut() {
            Some(last) if v - last.1 <= resolution => last.1 = v,
            Some(last) => {
                widest = widest.max(v - last.1);
                intervals.push((v, v));
            }
            None => intervals.push((v, v)),
        }
    }
    (intervals, widest)
}

/// Hausdorff-type defect between `{λ²}` of the Dirac operator and
/// `{c²μ + m²c⁴}` of the Kirchhoff and anti-Kirchhoff Laplacians, restricted to
/// `|λ| ≤ 3mc²`.
pub fn verify_square_identity(s: &DiscreteSpace, m: f64, c: f64) -> Result<f64> {
    square_identity_defect(s, m, c, 3.0 * m * c * c)
}

pub fn square_identity_defect(s: &DiscreteSpace, m: f64, c: f64, lambda_max: f64) -> Result<f64> {
    let (h, mass) = crate::fem::assemble_dirac(s, m, c)?;
    let dirac = dense_generalized(&h, &mass)?;
    let (k, mk) = assemble_kirchhoff(s);
    let (a, ma) = assemble_anti_kirchhoff(s);
    let mut lap = dense_generalized(&k, &mk)?;
    lap.extend(dense_generalized(&a, &ma)?);
    let c2 = c * c;
    let m2c4 = m * m * c2 * c2;
    let squares: Vec<f64> = dirac.iter().map(|l| l * l).collect();
    let shifted: Vec<f64> = lap.iter().map(|mu| c2 * mu + m2c4).collect();
    let cap = lambda_max * lambda_max;
    let dist = |x: f64, set: &[f64]| set.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min);
    let left = dirac
        .iter()
        .zip(&squares)
        .filter(|(l, _)| l.abs() <= lambda_max)
        .map(|(_, &sq)| dist(sq, &shifted))
        .fold(0.0, f64::max);
    let right = shifted.iter().filter(|&&v| v <= cap).map(|&v| dist(v, &squares)).fold(0.0, f64::max);
    Ok(left.max(right))
}

fn captured(spec: &Spectrum, u: &SpinorField) -> Result<Vec<C64>> {
    if u.values().len() != spec.dim() {
        return Err(Error::SpaceMismatch("field and spectrum dimensions differ".into()));
    }
    let total = spec.mass().norm_sq(u.values());
    let coeffs = spec.coefficients(u.values());
    if total > 0.0 {
        let got: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() / total;
        if got < 1.0 - TRUNCATION_TOL {
            return Err(Error::Truncation { captured: got, required: 1.0 - TRUNCATION_TOL });
        }
    }
    Ok(coeffs)
}

/// Projections onto the nonnegative and negative spectral subspaces.
pub fn spectral_split(spec: &Spectrum, u: &SpinorField) -> Result<(SpinorField, SpinorField)> {
    let coeffs = captured(spec, u)?;
    let mask = spec.positive_mask();
    let zero = C64::new(0.0, 0.0);
    let plus: Vec<C64> = coeffs.iter().zip(&mask).map(|(&c, &p)| if p { c } else { zero }).collect();
    let minus: Vec<C64> = coeffs.iter().zip(&mask).map(|(&c, &p)| if p { zero } else { c }).collect();
    Ok((u.with_values(spec.combine(&plus))?, u.with_values(spec.combine(&minus))?))
}

/// Squared norms `(‖u⁺‖², ‖u⁻‖², ‖u⁺‖₂², ‖u⁻‖₂²)` from spectral coefficients.
pub fn split_norms(spec: &Spectrum, u: &SpinorField) -> Result<[f64; 4]> {
    let coeffs = captured(spec, u)?;
    let mask = spec.positive_mask();
    let mut out = [0.0; 4];
    for ((c, &l), &p) in coeffs.iter().zip(spec.values()).zip(&mask) {
        let a = c.norm_sqr();
        let (g, l2) = if p { (0, 2) } else { (1, 3) };
        out[g] += l.abs() * a;
        out[l2] += a;
    }
    Ok(out)
}

/// `‖u‖ = (|D| u, u)^{1/2}`.
pub fn graph_norm(spec: &Spectrum, u: &SpinorField) -> Result<f64> {
    let n = split_norms(spec, u)?;
    Ok((n[0] + n[1]).sqrt())
}

/// `‖u‖_ω² = ‖u‖² + ω(‖u⁺‖₂² − ‖u⁻‖₂²)`.
pub fn omega_norm(spec: &Spectrum, u: &SpinorField, omega: f64) -> Result<f64> {
    let n = split_norms(spec, u)?;
    let sq = n[0] + n[1] + omega * (n[2] - n[3]);
    Ok(sq.max(0.0).sqrt())
}

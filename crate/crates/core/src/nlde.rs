//! Nonlinearities, the action functional and its gradient, hypothesis
//! sampling, and a Newton solver for bound states `Du + ωu = F_u(x, u)` on
//! truncated periodic graphs.

use std::fmt;
use std::sync::Arc;

use faer::prelude::*;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::concentration::{cell_masses, PointGraph};
use crate::eigen::{eigendecompose, EigenWindow, Spectrum};
use crate::error::{invalid, Result, SolveError};
use crate::fem::{assemble_dirac, lp_norm, make_space, DiscreteSpace, SpinorField};
use crate::graph::{translate_field, unroll, LatticeShift, PeriodicGraph, Unrolled};
use crate::linalg::{CsrMatrix, MassMatrix, SparseOperator, C64};
use crate::spectral::split_norms;

/// Position on an edge of the graph the field lives on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgePoint {
    pub edge: usize,
    pub x: f64,
}

/// Real coordinates `(Re z₁, Im z₁, Re z₂, Im z₂)`.
pub fn real_coords(z: [C64; 2]) -> [f64; 4] {
    [z[0].re, z[0].im, z[1].re, z[1].im]
}

/// A nonlinearity `F(x, z)`, `z ∈ ℂ²`. Its gradient is identified with a
/// complex pair, so `dF[δ] = Re(conj(F_u) · δ)`; the Hessian acts on real
/// coordinates as ordered by [`real_coords`].
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn params(&self) -> Vec<(String, f64)>;
    /// Asymptotic linear coefficient `b` with `F_u(z) ≈ b z` for large `|z|`.
    fn b(&self) -> f64;
    fn value(&self, at: EdgePoint, z: [C64; 2]) -> f64;
    fn gradient(&self, at: EdgePoint, z: [C64; 2]) -> [C64; 2];
    fn hessian(&self, at: EdgePoint, z: [C64; 2]) -> [[f64; 4]; 4];
    /// True when `F` depends on `z` only through `|z|`.
    fn is_radial(&self) -> bool {
        false
    }
    /// True when `F` does not depend on `x`.
    fn is_autonomous(&self) -> bool {
        false
    }
}

pub type NonlinearityModel = Arc<dyn Nonlinearity>;

/// `F(z) = f(|z|²)` given `f`, `f'`, `f''`.
pub trait RadialProfile: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn params(&self) -> Vec<(String, f64)>;
    fn b(&self) -> f64;
    fn f(&self, t: f64) -> f64;
    fn df(&self, t: f64) -> f64;
    fn d2f(&self, t: f64) -> f64;
}

#[derive(Debug)]
pub struct Radial<P>(pub P);

impl<P: RadialProfile> Nonlinearity for Radial<P> {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn params(&self) -> Vec<(String, f64)> {
        self.0.params()
    }
    fn b(&self) -> f64 {
        self.0.b()
    }
    fn value(&self, _: EdgePoint, z: [C64; 2]) -> f64 {
        self.0.f(z[0].norm_sqr() + z[1].norm_sqr())
    }
    fn gradient(&self, _: EdgePoint, z: [C64; 2]) -> [C64; 2] {
        let g = 2.0 * self.0.df(z[0].norm_sqr() + z[1].norm_sqr());
        [z[0] * g, z[1] * g]
    }
    fn hessian(&self, _: EdgePoint, z: [C64; 2]) -> [[f64; 4]; 4] {
        let r = real_coords(z);
        let t = r.iter().map(|x| x * x).sum();
        let (d1, d2) = (2.0 * self.0.df(t), 4.0 * self.0.d2f(t));
        let mut h = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                h[a][b] = d2 * r[a] * r[b] + if a == b { d1 } else { 0.0 };
            }
        }
        h
    }
    fn is_radial(&self) -> bool {
        true
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

/// `f(t) = (b/2)(t − ln(1+t))`.
#[derive(Debug, Clone, Copy)]
pub struct Saturable {
    pub b: f64,
}

impl RadialProfile for Saturable {
    fn name(&self) -> &str {
        "saturable"
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![("b".into(), self.b)]
    }
    fn b(&self) -> f64 {
        self.b
    }
    fn f(&self, t: f64) -> f64 {
        if t < 1e-4 {
            // t - ln(1+t) = t²/2 - t³/3 + t⁴/4 - ...
            0.5 * self.b * t * t * (0.5 - t / 3.0 + t * t / 4.0 - t * t * t / 5.0)
        } else {
            0.5 * self.b * (t - t.ln_1p())
        }
    }
    fn df(&self, t: f64) -> f64 {
        0.5 * self.b * t / (1.0 + t)
    }
    fn d2f(&self, t: f64) -> f64 {
        0.5 * self.b / ((1.0 + t) * (1.0 + t))
    }
}

/// `f(t) = (b/2) t`; violates the small-amplitude hypothesis, test use only.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub b: f64,
}

impl RadialProfile for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![("b".into(), self.b)]
    }
    fn b(&self) -> f64 {
        self.b
    }
    fn f(&self, t: f64) -> f64 {
        0.5 * self.b * t
    }
    fn df(&self, _: f64) -> f64 {
        0.5 * self.b
    }
    fn d2f(&self, _: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Zero;

impl RadialProfile for Zero {
    fn name(&self) -> &str {
        "zero"
    }
    fn params(&self) -> Vec<(String, f64)> {
        Vec::new()
    }
    fn b(&self) -> f64 {
        0.0
    }
    fn f(&self, _: f64) -> f64 {
        0.0
    }
    fn df(&self, _: f64) -> f64 {
        0.0
    }
    fn d2f(&self, _: f64) -> f64 {
        0.0
    }
}

/// Saturable model `F(z) = (b/2)(|z|² − ln(1+|z|²))`.
pub fn reference_model(b: f64) -> Result<NonlinearityModel> {
    if !(b.is_finite() && b > 0.0) {
        return Err(invalid(format!("b must be positive, got {b}")));
    }
    Ok(Arc::new(Radial(Saturable { b })))
}

pub fn zero_model() -> NonlinearityModel {
    Arc::new(Radial(Zero))
}

pub fn quadratic_model(b: f64) -> NonlinearityModel {
    Arc::new(Radial(Quadratic { b }))
}

pub fn model_by_name(name: &str, b: f64) -> Result<NonlinearityModel> {
    match name {
        "saturable" | "reference" => reference_model(b),
        "quadratic" => Ok(quadratic_model(b)),
        "zero" => Ok(zero_model()),
        other => Err(invalid(format!("unknown model '{other}' (saturable, quadratic, zero)"))),
    }
}

/// `F̂ = ½ Re(conj(F_u) · z) − F`.
pub fn fhat(model: &dyn Nonlinearity, at: EdgePoint, z: [C64; 2]) -> f64 {
    let g = model.gradient(at, z);
    0.5 * (g[0].conj() * z[0] + g[1].conj() * z[1]).re - model.value(at, z)
}

/// One midpoint-rule cell: `z = ((u¹_a + u¹_b)/2, u²_mid)` with weight `h`.
#[derive(Clone, Copy, Debug)]
struct QuadPoint {
    a: usize,
    b: usize,
    mid: usize,
    w: f64,
    at: EdgePoint,
}

fn quad_points(s: &DiscreteSpace) -> Vec<QuadPoint> {
    let mut out = Vec::with_capacity(s.n2());
    for (e, g) in s.edge_grids().iter().enumerate() {
        for (j, &mid) in g.mid_dofs.iter().enumerate() {
            out.push(QuadPoint {
                a: g.node_dofs[j],
                b: g.node_dofs[j + 1],
                mid,
                w: g.h,
                at: EdgePoint { edge: e, x: (j as f64 + 0.5) * g.h },
            });
        }
    }
    out
}

fn z_at(u: &[C64], q: &QuadPoint) -> [C64; 2] {
    [(u[q.a] + u[q.b]) * 0.5, u[q.mid]]
}

/// `∫ F(x, u)` with the staggered midpoint rule.
pub fn potential(u: &SpinorField, model: &dyn Nonlinearity) -> f64 {
    let v = u.values();
    quad_points(u.space()).iter().map(|q| q.w * model.value(q.at, z_at(v, q))).sum()
}

/// `∫ F̂(x, u)` with the same rule as [`potential`].
pub fn fhat_integral(u: &SpinorField, model: &dyn Nonlinearity) -> f64 {
    let v = u.values();
    quad_points(u.space()).iter().map(|q| q.w * fhat(model, q.at, z_at(v, q))).sum()
}

/// Dual vector `g` of `∫F`: `d(∫F)[φ] = Re(g^H φ)`.
pub fn potential_gradient(u: &SpinorField, model: &dyn Nonlinearity) -> Vec<C64> {
    let v = u.values();
    let mut g = vec![C64::new(0.0, 0.0); v.len()];
    for q in quad_points(u.space()) {
        let fu = model.gradient(q.at, z_at(v, &q));
        g[q.a] += fu[0] * (0.5 * q.w);
        g[q.b] += fu[0] * (0.5 * q.w);
        g[q.mid] += fu[1] * q.w;
    }
    g
}

/// `Φ(u) = ½(‖u⁺‖² − ‖u⁻‖²) + (ω/2)‖u‖₂² − ∫F(x, u)` from spectral data.
pub fn action(spec: &Spectrum, u: &SpinorField, omega: f64, model: &dyn Nonlinearity) -> Result<f64> {
    let n = split_norms(spec, u)?;
    Ok(0.5 * (n[0] - n[1]) + 0.5 * omega * (n[2] + n[3]) - potential(u, model))
}

/// `Φ(u) = ½ Re⟨u, Du⟩ + (ω/2)‖u‖₂² − ∫F` from the assembled operator.
pub fn action_direct(h: &SparseOperator, mass: &MassMatrix, u: &SpinorField, omega: f64, model: &dyn Nonlinearity) -> f64 {
    let v = u.values();
    let hu = h.mul_vec(v);
    let quad: f64 = v.iter().zip(&hu).map(|(a, b)| (a.conj() * b).re).sum();
    0.5 * quad + 0.5 * omega * mass.norm_sq(v) - potential(u, model)
}

/// `(D + ω)u − F_u(·, u)` as a field: `M^{-1}(Hu + ωMu − g)`.
pub fn residual(h: &SparseOperator, mass: &MassMatrix, u: &SpinorField, omega: f64, model: &dyn Nonlinearity) -> Result<SpinorField> {
    let dual = action_gradient_direct(h, mass, u, omega, model);
    let d = mass
        .diagonal()
        .ok_or_else(|| invalid("residual needs a lumped mass matrix"))?;
    u.with_values(dual.iter().zip(d).map(|(g, w)| g / w).collect())
}

/// Mass-weighted norm of a residual field.
pub fn residual_norm(r: &SpinorField) -> f64 {
    lp_norm(r, 2.0).expect("p = 2")
}

/// Dual vector `G` with `Φ'(u)[φ] = Re(G^H φ)`, from spectral data.
pub fn action_gradient(spec: &Spectrum, u: &SpinorField, omega: f64, model: &dyn Nonlinearity) -> Result<Vec<C64>> {
    split_norms(spec, u)?;
    let c = spec.coefficients(u.values());
    let scaled: Vec<C64> = c.iter().zip(spec.values()).map(|(c, l)| c * *l).collect();
    let du = spec.mass().apply(&spec.combine(&scaled));
    let mu = spec.mass().apply(u.values());
    let g = potential_gradient(u, model);
    Ok(du.iter().zip(&mu).zip(&g).map(|((a, b), c)| a + b * omega - c).collect())
}

pub fn action_gradient_direct(h: &SparseOperator, mass: &MassMatrix, u: &SpinorField, omega: f64, model: &dyn Nonlinearity) -> Vec<C64> {
    let hu = h.mul_vec(u.values());
    let mu = mass.apply(u.values());
    let g = potential_gradient(u, model);
    hu.iter().zip(&mu).zip(&g).map(|((a, b), c)| a + b * omega - c).collect()
}

/// `Re(G^H φ)`.
pub fn pair(dual: &[C64], phi: &SpinorField) -> f64 {
    dual.iter().zip(phi.values()).map(|(g, p)| (g.conj() * p).re).sum()
}

/// Real-phase fields `u = (g, i f)`, with `g`, `f` real, form an invariant
/// subspace for radial models; the Newton iteration works there, which
/// removes the global phase degeneracy.
fn phase(dof: usize, n1: usize) -> C64 {
    if dof < n1 {
        C64::new(1.0, 0.0)
    } else {
        C64::new(0.0, 1.0)
    }
}

fn to_real(u: &[C64], n1: usize) -> Vec<f64> {
    u.iter().enumerate().map(|(d, z)| (phase(d, n1).conj() * z).re).collect()
}

fn from_real(y: &[f64], n1: usize) -> Vec<C64> {
    y.iter().enumerate().map(|(d, &x)| phase(d, n1) * x).collect()
}

/// Share of `u` outside the real-phase subspace.
fn phase_defect(u: &[C64], n1: usize) -> f64 {
    let off: f64 = u.iter().enumerate().map(|(d, z)| (phase(d, n1).conj() * z).im.powi(2)).sum();
    let all: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    if all == 0.0 {
        0.0
    } else {
        (off / all).sqrt()
    }
}

/// Newton system for `(D + ω)u = F_u(u)` restricted to real-phase fields.
pub struct NewtonProblem {
    space: Arc<DiscreteSpace>,
    h_real: CsrMatrix<f64>,
    weights: Vec<f64>,
    omega: f64,
    model: NonlinearityModel,
    quad: Vec<QuadPoint>,
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub field: SpinorField,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl NewtonProblem {
    pub fn new(space: Arc<DiscreteSpace>, m: f64, c: f64, omega: f64, model: NonlinearityModel) -> Result<Self> {
        if !model.is_radial() {
            return Err(invalid("the Newton solver needs a model that depends on |z| only"));
        }
        let (h, _) = assemble_dirac(&space, m, c)?;
        let n1 = space.n1();
        let trip: Vec<(usize, usize, f64)> = h
            .triplets()
            .into_iter()
            .map(|(i, j, v)| {
                let z = phase(i, n1).conj() * v * phase(j, n1);
                debug_assert!(z.im.abs() < 1e-12);
                (i, j, z.re)
            })
            .collect();
        let n = space.n_dofs();
        Ok(Self {
            h_real: CsrMatrix::from_triplets(n, n, &trip),
            weights: space.weights().to_vec(),
            quad: quad_points(&space),
            space,
            omega,
            model,
        })
    }

    fn residual_real(&self, y: &[f64]) -> Vec<f64> {
        let n1 = self.space.n1();
        let u = from_real(y, n1);
        let mut r = self.h_real.mul_vec(y);
        for (ri, (yi, w)) in r.iter_mut().zip(y.iter().zip(&self.weights)) {
            *ri += self.omega * w * yi;
        }
        for q in &self.quad {
            let fu = self.model.gradient(q.at, z_at(&u, q));
            let g1 = fu[0].re * 0.5 * q.w;
            r[q.a] -= g1;
            r[q.b] -= g1;
            r[q.mid] -= (phase(q.mid, n1).conj() * fu[1]).re * q.w;
        }
        r
    }

    fn norm(&self, r: &[f64]) -> f64 {
        r.iter().zip(&self.weights).map(|(x, w)| x * x / w).sum::<f64>().sqrt()
    }

    fn jacobian(&self, y: &[f64], shift: f64) -> CsrMatrix<f64> {
        let n1 = self.space.n1();
        let u = from_real(y, n1);
        let mut trip = self.h_real.triplets();
        for (d, w) in self.weights.iter().enumerate() {
            trip.push((d, d, (self.omega + shift) * w));
        }
        for q in &self.quad {
            let hs = self.model.hessian(q.at, z_at(&u, q));
            // z₁ = (y_a + y_b)/2 along Re z₁, z₂ = i y_mid along Im z₂.
            let h00 = hs[0][0] * q.w;
            let h03 = hs[0][3] * q.w;
            let h33 = hs[3][3] * q.w;
            let nodes = [(q.a, 0.5), (q.b, 0.5)];
            for &(i, wi) in &nodes {
                for &(j, wj) in &nodes {
                    trip.push((i, j, -h00 * wi * wj));
                }
                trip.push((i, q.mid, -h03 * wi));
                trip.push((q.mid, i, -h03 * wi));
            }
            trip.push((q.mid, q.mid, -h33));
        }
        let n = self.weights.len();
        CsrMatrix::from_triplets(n, n, &trip)
    }

    /// Damped, slightly regularized Newton iteration from `u0`.
    pub fn solve(&self, u0: &SpinorField, tol: f64, max_iter: usize) -> std::result::Result<NewtonOutcome, SolveError> {
        self.run(u0, tol, max_iter).map_err(|(e, _)| e)
    }

    /// As [`solve`](Self::solve), returning the last iterate on failure.
    fn run(&self, u0: &SpinorField, tol: f64, max_iter: usize) -> std::result::Result<NewtonOutcome, (SolveError, Option<SpinorField>)> {
        let n1 = self.space.n1();
        let defect = phase_defect(u0.values(), n1);
        if defect > 1e-8 {
            return Err((
                SolveError::NonConvergence(format!("initial guess leaves the real-phase subspace (defect {defect:.2e})")),
                None,
            ));
        }
        let last = |y: &[f64]| SpinorField::new(self.space.clone(), from_real(y, n1)).ok();
        let mut y = to_real(u0.values(), n1);
        let mut r = self.residual_real(&y);
        let mut rn = self.norm(&r);
        let mut it = 0;
        while rn > tol {
            if it >= max_iter {
                return Err((SolveError::NonConvergence(format!("residual {rn:.3e} after {max_iter} Newton steps")), last(&y)));
            }
            it += 1;
            // The shift shrinks like ‖R‖² near convergence so that the
            // near-zero translation mode of a long window still contracts.
            let escalate = |s: f64| if s == 0.0 { 1e-14 } else { s * 10.0 };
            let mut shift = if rn > 1e-3 { rn.min(1e-2) } else { rn * rn };
            let mut accepted = false;
            for attempt in 0..7 {
                let step = match self.newton_step(&y, &r, shift) {
                    Ok(s) => s,
                    Err(e) if attempt + 1 == 7 => return Err((e, last(&y))),
                    Err(_) => {
                        shift = escalate(shift);
                        continue;
                    }
                };
                let mut alpha = 1.0;
                while alpha >= 1.0 / 1024.0 {
                    let trial: Vec<f64> = y.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
                    let rt = self.residual_real(&trial);
                    let rtn = self.norm(&rt);
                    if rtn.is_finite() && rtn < (1.0 - 1e-4 * alpha) * rn {
                        y = trial;
                        r = rt;
                        rn = rtn;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if accepted {
                    break;
                }
                shift = escalate(shift);
            }
            if !accepted {
                return Err((SolveError::NonConvergence(format!("line search stalled at residual {rn:.3e}")), last(&y)));
            }
        }
        let field = SpinorField::new(self.space.clone(), from_real(&y, n1))
            .map_err(|e| (SolveError::NonConvergence(e.to_string()), None))?;
        Ok(NewtonOutcome { field, residual_norm: rn, iterations: it })
    }

    /// Runs exactly `steps` undamped Newton steps (stopping early only when the
    /// residual vanishes to rounding) and reports the final residual.
    pub fn iterate(&self, u0: &SpinorField, steps: usize) -> std::result::Result<NewtonOutcome, SolveError> {
        let n1 = self.space.n1();
        let mut y = to_real(u0.values(), n1);
        let mut r = self.residual_real(&y);
        let mut rn = self.norm(&r);
        for _ in 0..steps {
            if rn < 1e-14 {
                break;
            }
            let step = self.newton_step(&y, &r, rn.clamp(1e-14, 1e-2))?;
            y.iter_mut().zip(&step).for_each(|(a, d)| *a += d);
            r = self.residual_real(&y);
            rn = self.norm(&r);
        }
        let field = SpinorField::new(self.space.clone(), from_real(&y, n1))
            .map_err(|e| SolveError::NonConvergence(e.to_string()))?;
        Ok(NewtonOutcome { field, residual_norm: rn, iterations: steps })
    }

    fn newton_step(&self, y: &[f64], r: &[f64], shift: f64) -> std::result::Result<Vec<f64>, SolveError> {
        let j = self.jacobian(y, shift);
        let lu = j
            .to_faer()
            .map_err(|e| SolveError::NonConvergence(e.to_string()))?
            .sp_lu()
            .map_err(|e| SolveError::NonConvergence(format!("Jacobian factorization failed: {e:?}")))?;
        let rhs = faer::Col::<f64>::from_fn(r.len(), |i| -r[i]);
        let d = lu.solve(rhs);
        let step: Vec<f64> = (0..r.len()).map(|i| d[i]).collect();
        if step.iter().any(|x| !x.is_finite()) {
            return Err(SolveError::NonConvergence("non-finite Newton step".into()));
        }
        Ok(step)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub m: f64,
    pub c: f64,
    pub h_max: f64,
    pub tol: f64,
    pub id_tol: f64,
    pub max_newton: usize,
    pub spectral_margin: f64,
    /// Cell the initial guess is centred on; defaults to the window cell
    /// closest to the origin.
    pub center: Option<LatticeShift>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            m: 1.0,
            c: 1.0,
            h_max: 1.0 / 16.0,
            tol: 1e-10,
            id_tol: 1e-6,
            max_newton: 60,
            spectral_margin: 1e-3,
            center: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundState {
    pub field: SpinorField,
    pub omega: f64,
    pub b: f64,
    pub model_name: String,
    pub residual_norm: f64,
    pub action_value: f64,
    pub fhat_integral: f64,
    pub decay_rate: f64,
    pub iterations: usize,
    pub amplitude: f64,
    pub center_cell: LatticeShift,
    pub unrolled: Arc<Unrolled>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundStateSummary {
    pub omega: f64,
    pub b: f64,
    pub model: String,
    pub residual_norm: f64,
    pub action_value: f64,
    pub fhat_integral: f64,
    pub decay_rate: f64,
    pub iterations: usize,
    pub center_cell: Vec<i64>,
    pub l2_norm: f64,
}

impl BoundState {
    pub fn summary(&self) -> BoundStateSummary {
        BoundStateSummary {
            omega: self.omega,
            b: self.b,
            model: self.model_name.clone(),
            residual_norm: self.residual_norm,
            action_value: self.action_value,
            fhat_integral: self.fhat_integral,
            decay_rate: self.decay_rate,
            iterations: self.iterations,
            center_cell: self.center_cell.0.clone(),
            l2_norm: lp_norm(&self.field, 2.0).unwrap_or(f64::NAN),
        }
    }
}

/// Decay rate of per-cell mass away from its peak: least squares slope of
/// `log a_k` against lattice distance over the outer half of the window.
/// Returns `(rate, window radius, peak cell)`.
pub fn fit_decay(u: &SpinorField, unrolled: &Unrolled) -> (f64, f64, usize) {
    let masses = cell_masses(u, unrolled);
    let peak = (0..masses.len()).max_by(|&a, &b| masses[a].total_cmp(&masses[b])).unwrap_or(0);
    let dist: Vec<f64> = unrolled
        .window
        .iter()
        .map(|k| (k - &unrolled.window[peak]).0.iter().map(|x| (x * x) as f64).sum::<f64>().sqrt())
        .collect();
    let radius = dist.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = dist
        .iter()
        .zip(&masses)
        .filter(|(&d, &a)| d >= 0.5 * radius && d > 0.0 && a > 1e-300)
        .map(|(&d, &a)| (d, a.ln()))
        .collect();
    if pts.len() < 2 {
        return (f64::NAN, radius, peak);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (f64::NAN, radius, peak);
    }
    (-sxy / sxx, radius, peak)
}


/// Localized positive-spectrum direction near the gap edge, normalized in the
/// graph norm, in real-phase form.
fn linking_direction(
    spec: &Spectrum,
    space: &Arc<DiscreteSpace>,
    unrolled: &Unrolled,
    center: usize,
    m: f64,
    c: f64,
    omega: f64,
    b: f64,
) -> Result<SpinorField> {
    let mc2 = m * c * c;
    let kappa = ((mc2 * mc2 - omega * omega).max(1e-12)).sqrt() / c;
    let src = space.vertex_dof(unrolled.vertex_of(center, 0));
    let dist = PointGraph::new(space).distances(src, f64::INFINITY);
    let n1 = space.n1();
    let bump: Vec<C64> = (0..space.n_dofs())
        .map(|d| if d < n1 { C64::new(1.0 / (kappa * dist[d]).cosh(), 0.0) } else { C64::new(0.0, 0.0) })
        .collect();
    let gamma = mc2 + 0.5 * (b - omega - mc2).max(0.5 * mc2);
    let coeffs = spec.coefficients(&bump);
    let kept: Vec<C64> = coeffs
        .iter()
        .zip(spec.values())
        .map(|(&cf, &l)| if l >= mc2 * (1.0 - 1e-9) && l <= gamma { cf } else { C64::new(0.0, 0.0) })
        .collect();
    let norm_sq: f64 = kept.iter().zip(spec.values()).map(|(z, l)| z.norm_sqr() * l.abs()).sum();
    if norm_sq <= 0.0 {
        return Err(invalid("no positive spectrum below the linking cut-off"));
    }
    let mut e = spec.combine(&kept);
    let (imax, _) = e[..n1].iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let ph = e[imax] / e[imax].norm();
    let scale = ph.conj() / norm_sq.sqrt();
    e.iter_mut().for_each(|z| *z *= scale);
    let y = to_real(&e, n1);
    SpinorField::new(space.clone(), from_real(&y, n1))
}

/// Newton iteration for a localized bound state, started on the ray `t e₁`
/// at the amplitude maximizing the action.
pub fn solve_bound_state(
    pg: &PeriodicGraph,
    window: &[LatticeShift],
    omega: f64,
    model: NonlinearityModel,
    opts: &SolveOptions,
) -> Result<BoundState> {
    let (m, c) = (opts.m, opts.c);
    let mc2 = m * c * c;
    if !(omega.abs() < mc2) {
        return Err(invalid(format!("need |ω| < mc² = {mc2}, got ω = {omega}")));
    }
    let unrolled = Arc::new(unroll(pg, window)?);
    let space = make_space(&unrolled.graph, opts.h_max)?;
    let (h, mass) = assemble_dirac(&space, m, c)?;
    let spec = eigendecompose(&h, &mass, EigenWindow::All)?;

    let target = model.b() - omega;
    if let Some(l) = spec.values().iter().find(|&&l| (l - target).abs() < opts.spectral_margin) {
        return Err(SolveError::Resonance(format!("b − ω = {target} is within {} of eigenvalue {l}", opts.spectral_margin)).into());
    }

    let center_shift = opts.center.clone().unwrap_or_else(|| {
        unrolled.window.iter().min_by_key(|k| (k.0.iter().map(|x| x * x).sum::<i64>(), (*k).clone())).cloned().unwrap()
    });
    let center = unrolled
        .cell_position(&center_shift)
        .ok_or_else(|| invalid(format!("centre cell {center_shift} is outside the window")))?;
    let e1 = linking_direction(&spec, &space, &unrolled, center, m, c, omega, model.b())?;

    let phi_on_ray = |t: f64| action_direct(&h, &mass, &e1.scaled_re(t), omega, model.as_ref());
    let ts: Vec<f64> = (0..60).map(|k| 0.02 * 1.2f64.powi(k)).collect();
    let t_star = ts.iter().cloned().max_by(|a, b| phi_on_ray(*a).total_cmp(&phi_on_ray(*b))).unwrap();

    let problem = NewtonProblem::new(space.clone(), m, c, omega, model.clone())?;
    let total_len = unrolled.graph.total_length();
    let trivial = 1e-8 * total_len.sqrt();
    let mut last_err = SolveError::NonConvergence("no start amplitude tried".into());
    // Largest end-of-window mass fraction among stalled, non-trivial iterates.
    let mut stalled_edge_mass: Option<f64> = None;
    for factor in [1.0, 1.5, 0.7, 2.0, 0.5, 3.0] {
        let t = t_star * factor;
        let outcome = match problem.run(&e1.scaled_re(t), opts.tol, opts.max_newton) {
            Ok(o) => o,
            Err((e, last)) => {
                log::debug!("start amplitude {t}: {e}");
                if let Some(u) = last.filter(|u| lp_norm(u, 2.0).is_ok_and(|n| n > trivial)) {
                    let f = boundary_mass_fraction(&u, &unrolled);
                    stalled_edge_mass = Some(stalled_edge_mass.map_or(f, |g| g.min(f)));
                }
                last_err = e;
                continue;
            }
        };
        let l2 = lp_norm(&outcome.field, 2.0)?;
        if l2 < trivial {
            last_err = SolveError::TrivialSolution(l2);
            continue;
        }
        let action_value = action_direct(&h, &mass, &outcome.field, omega, model.as_ref());
        let fh = fhat_integral(&outcome.field, model.as_ref());
        if (action_value - fh).abs() > opts.id_tol {
            last_err = SolveError::NonConvergence(format!(
                "critical-point identity off by {:.3e}",
                (action_value - fh).abs()
            ));
            continue;
        }
        let (rate, radius, peak) = fit_decay(&outcome.field, &unrolled);
        if !(rate.is_finite() && rate * radius >= 10.0) {
            return Err(SolveError::WindowTooSmall(format!(
                "fitted decay rate {rate:.3} over window radius {radius} (need rate·radius ≥ 10)"
            ))
            .into());
        }
        return Ok(BoundState {
            field: outcome.field,
            omega,
            b: model.b(),
            model_name: model.name().to_string(),
            residual_norm: outcome.residual_norm,
            action_value,
            fhat_integral: fh,
            decay_rate: rate,
            iterations: outcome.iterations,
            amplitude: t,
            center_cell: unrolled.window[peak].clone(),
            unrolled,
        });
    }
    // The truncation exerts a force on the state of the order of its mass in
    // the outermost cells; Newton cannot drive the residual below it.
    if let (SolveError::NonConvergence(msg), Some(f)) = (&last_err, stalled_edge_mass) {
        if f > opts.tol {
            return Err(SolveError::WindowTooSmall(format!(
                "{msg}; the stalled iterate keeps a fraction {f:.2e} of its mass in the outermost cells"
            ))
            .into());
        }
    }
    Err(last_err.into())
}

/// Share of `‖u‖₂²` carried by window cells on the boundary of the window box.
fn boundary_mass_fraction(u: &SpinorField, unrolled: &Unrolled) -> f64 {
    let masses = cell_masses(u, unrolled);
    let total: f64 = masses.iter().sum();
    let d = unrolled.window.first().map_or(0, |k| k.rank());
    let lo: Vec<i64> = (0..d).map(|i| unrolled.window.iter().map(|k| k.0[i]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..d).map(|i| unrolled.window.iter().map(|k| k.0[i]).max().unwrap()).collect();
    let edge: f64 = unrolled
        .window
        .iter()
        .zip(&masses)
        .filter(|(k, _)| (0..d).any(|i| k.0[i] == lo[i] || k.0[i] == hi[i]))
        .map(|(_, a)| a)
        .sum();
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

/// Relative distance `min_k ‖u2 − k∗u1‖₂ / ‖u1‖₂` over all window shifts.
pub fn orbit_distance(u1: &SpinorField, u2: &SpinorField, unrolled: &Unrolled) -> Result<f64> {
    let n1 = lp_norm(u1, 2.0)?;
    if n1 == 0.0 {
        return Ok(if lp_norm(u2, 2.0)? == 0.0 { 0.0 } else { f64::INFINITY });
    }
    let mut shifts: Vec<LatticeShift> = Vec::new();
    for a in &unrolled.window {
        for b in &unrolled.window {
            shifts.push(a - b);
        }
    }
    shifts.sort();
    shifts.dedup();
    let mut best = f64::INFINITY;
    for k in &shifts {
        let t = translate_field(u1, unrolled, k)?;
        best = best.min(lp_norm(&u2.sub(&t)?, 2.0)? / n1);
    }
    Ok(best)
}

/// True iff neither field is within `tol` (relative) of a lattice translate of the other.
pub fn geometric_distinctness(u1: &SpinorField, u2: &SpinorField, unrolled: &Unrolled, tol: f64) -> Result<bool> {
    Ok(orbit_distance(u1, u2, unrolled)? > tol && orbit_distance(u2, u1, unrolled)? > tol)
}

/// `ζ(c) = √(2mc²/(mc² − |ω|))`; the argument `c` of the superlevel set does
/// not enter.
pub fn zeta(m: f64, c: f64, omega: f64) -> f64 {
    let mc2 = m * c * c;
    (2.0 * mc2 / (mc2 - omega.abs())).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkingReport {
    pub rho_grid: Vec<f64>,
    /// Sampled infimum of Φ on the positive-subspace sphere of each radius.
    pub sphere_inf: Vec<f64>,
    pub best_rho: f64,
    pub varsigma: f64,
    pub r1: Option<f64>,
    pub boundary_max: f64,
    pub negative_subspace_max: f64,
    pub zeta: f64,
    pub zeta_level: f64,
    pub zeta_checked: usize,
    pub zeta_violations: usize,
}

#[derive(Clone, Debug)]
pub struct LinkingOptions {
    pub samples: usize,
    pub seed: u64,
    pub m: f64,
    pub c: f64,
    /// Level `c` of the superlevel set on which the ζ bound is sampled.
    pub level: f64,
}

impl Default for LinkingOptions {
    fn default() -> Self {
        Self { samples: 64, seed: 7, m: 1.0, c: 1.0, level: 0.1 }
    }
}

fn random_in(spec: &Spectrum, positive: bool, rng: &mut impl Rng) -> Vec<C64> {
    let mask = spec.positive_mask();
    mask.iter()
        .zip(spec.values())
        .map(|(&p, &l)| {
            if p == positive {
                // Bias towards low |λ| so that samples resolve on the grid.
                let s = 1.0 / (1.0 + l * l);
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * s
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

fn coeff_norm(spec: &Spectrum, c: &[C64]) -> f64 {
    c.iter().zip(spec.values()).map(|(z, l)| z.norm_sqr() * l.abs()).sum::<f64>().sqrt()
}

/// Samples of the linking geometry: `inf Φ` on spheres in `Y⁺`, `max Φ` on the
/// boundary of `Q = {x + t e₁ : x ∈ Y⁻, t ≥ 0, ‖·‖ ≤ R₁}`, and the bound
/// `‖u‖ ≤ ζ‖u⁺‖` on samples with `Φ ≥ level`.
pub fn linking_diagnostics(
    spec: &Spectrum,
    space: &Arc<DiscreteSpace>,
    model: &dyn Nonlinearity,
    omega: f64,
    rho_grid: &[f64],
    opts: &LinkingOptions,
) -> Result<LinkingReport> {
    if !spec.is_complete() {
        return Err(invalid("linking diagnostics need a complete spectrum"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let field = |c: &[C64]| SpinorField::new(space.clone(), spec.combine(c));
    let phi = |c: &[C64]| -> Result<f64> { action(spec, &field(c)?, omega, model) };
    let z = zeta(opts.m, opts.c, omega);
    let mut zeta_checked = 0;
    let mut zeta_violations = 0;
    let mut check_zeta = |c: &[C64], value: f64| {
        if value >= opts.level {
            zeta_checked += 1;
            let mask = spec.positive_mask();
            let plus: f64 =
                c.iter().zip(spec.values()).zip(&mask).filter(|(_, &p)| p).map(|((z, l), _)| z.norm_sqr() * l.abs()).sum();
            if coeff_norm(spec, c) > z * plus.sqrt() * (1.0 + 1e-12) {
                zeta_violations += 1;
            }
        }
    };

    let pos: Vec<usize> = (0..spec.len()).filter(|&k| spec.positive_mask()[k]).collect();
    let e1_idx = *pos
        .iter()
        .min_by(|&&a, &&b| spec.values()[a].total_cmp(&spec.values()[b]))
        .ok_or_else(|| invalid("no positive spectrum"))?;
    let mut e1 = vec![C64::new(0.0, 0.0); spec.len()];
    e1[e1_idx] = C64::new(1.0 / spec.values()[e1_idx].abs().sqrt(), 0.0);

    let mut sphere_inf = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        let mut inf = f64::INFINITY;
        for s in 0..opts.samples {
            let mut cfs = if s < pos.len().min(8) {
                let mut v = vec![C64::new(0.0, 0.0); spec.len()];
                v[pos[s]] = C64::new(1.0, 0.0);
                v
            } else {
                random_in(spec, true, &mut rng)
            };
            let n = coeff_norm(spec, &cfs);
            cfs.iter_mut().for_each(|z| *z *= rho / n);
            let v = phi(&cfs)?;
            check_zeta(&cfs, v);
            inf = inf.min(v);
        }
        sphere_inf.push(inf);
    }
    let (best_rho, varsigma) = rho_grid
        .iter()
        .zip(&sphere_inf)
        .map(|(&r, &v)| (r, v))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((f64::NAN, f64::NAN));

    let mut negative_subspace_max = f64::NEG_INFINITY;
    let mut minus_dirs = Vec::new();
    for _ in 0..opts.samples {
        let mut cfs = random_in(spec, false, &mut rng);
        let n = coeff_norm(spec, &cfs);
        if n == 0.0 {
            continue;
        }
        cfs.iter_mut().for_each(|z| *z /= n);
        minus_dirs.push(cfs.clone());
        for r in [0.1, 1.0, 10.0] {
            let scaled: Vec<C64> = cfs.iter().map(|z| z * r).collect();
            negative_subspace_max = negative_subspace_max.max(phi(&scaled)?);
        }
    }

    let mut r1 = None;
    let mut boundary_max = f64::NEG_INFINITY;
    let mut radius = 1.0;
    for _ in 0..40 {
        let mut worst = f64::NEG_INFINITY;
        for (i, x) in minus_dirs.iter().enumerate().take(16) {
            for a in 0..=8 {
                let alpha = std::f64::consts::FRAC_PI_2 * a as f64 / 8.0;
                let (ca, sa) = (alpha.cos() * radius, alpha.sin() * radius);
                let u: Vec<C64> = x.iter().zip(&e1).map(|(xm, ep)| xm * ca + ep * sa).collect();
                let v = phi(&u)?;
                if i == 0 {
                    check_zeta(&u, v);
                }
                worst = worst.max(v);
            }
        }
        if minus_dirs.is_empty() {
            worst = phi(&e1.iter().map(|z| z * radius).collect::<Vec<_>>())?;
        }
        if worst <= 0.0 {
            r1 = Some(radius);
            boundary_max = worst.max(negative_subspace_max.min(0.0));
            break;
        }
        radius *= 1.5;
    }
    if r1.is_none() {
        boundary_max = f64::INFINITY;
    }

    for _ in 0..opts.samples {
        let mut cfs = random_in(spec, true, &mut rng);
        let minus = random_in(spec, false, &mut rng);
        for (a, b) in cfs.iter_mut().zip(&minus) {
            *a += b * 0.3;
        }
        let n = coeff_norm(spec, &cfs);
        let target = best_rho.max(0.5) * (0.5 + rng.gen::<f64>());
        cfs.iter_mut().for_each(|z| *z *= target / n);
        let v = phi(&cfs)?;
        check_zeta(&cfs, v);
    }

    Ok(LinkingReport {
        rho_grid: rho_grid.to_vec(),
        sphere_inf,
        best_rho,
        varsigma,
        r1,
        boundary_max,
        negative_subspace_max,
        zeta: z,
        zeta_level: opts.level,
        zeta_checked,
        zeta_violations,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisRow {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub model: String,
    pub params: Vec<(String, f64)>,
    pub m: f64,
    pub c: f64,
    pub omega: f64,
    pub omega0: f64,
    pub rows: Vec<HypothesisRow>,
    pub delta1: Option<f64>,
    pub nu: f64,
    pub c1: f64,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&HypothesisRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn failures(&self) -> Vec<&HypothesisRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SampleGrid {
    pub radii: Vec<f64>,
    pub directions: Vec<[C64; 2]>,
    pub positions: Vec<EdgePoint>,
}

impl Default for SampleGrid {
    fn default() -> Self {
        let radii = (0..=320).map(|k| 10f64.powf(-4.0 + 8.0 * k as f64 / 320.0)).collect();
        let mut directions = Vec::new();
        for a in 0..4 {
            for p in 0..4 {
                let th = std::f64::consts::FRAC_PI_2 * a as f64 / 3.0;
                let ph = std::f64::consts::PI * p as f64 / 2.0;
                directions.push([C64::from_polar(th.cos(), 0.3 * ph), C64::from_polar(th.sin(), ph)]);
            }
        }
        let positions = vec![EdgePoint { edge: 0, x: 0.0 }, EdgePoint { edge: 0, x: 0.37 }, EdgePoint { edge: 1, x: 0.81 }];
        Self { radii, directions, positions }
    }
}

fn op_norm_sym4(h: &[[f64; 4]; 4]) -> f64 {
    let m = Mat::<f64>::from_fn(4, 4, |i, j| 0.5 * (h[i][j] + h[j][i]));
    m.self_adjoint_eigenvalues(Side::Lower)
        .map(|v| v.iter().map(|x| x.abs()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

/// Samples the standing hypotheses on a model. Rows: `F0` (F ≥ 0), `F1`
/// (periodicity in x), `F2` (F_u = o(|z|) at 0), `F3` (F_u − bz = o(|z|) at
/// infinity) and `F3_b` (b > mc² + ω), `F4` (F̂ > 0 off zero and a positive
/// δ₁), `F5` (|F_uu| ≤ c₁(1 + |z|^ν) with ν < 1), and `omega` (|ω| < mc²).
pub fn check_hypotheses(model: &dyn Nonlinearity, m: f64, c: f64, omega: f64, grid: &SampleGrid) -> HypothesisReport {
    let mc2 = m * c * c;
    let omega0 = (mc2 + omega).min(mc2 - omega);
    let b = model.b();
    let at0 = grid.positions.first().copied().unwrap_or(EdgePoint { edge: 0, x: 0.0 });
    let mut rows = Vec::new();
    let mut row = |name: &str, pass: bool, value: f64, detail: String| {
        rows.push(HypothesisRow { name: name.into(), pass, value, detail })
    };

    row("omega", omega.abs() < mc2, omega, format!("|ω| < mc² = {mc2}"));

    let samples: Vec<(f64, [C64; 2])> = grid
        .radii
        .iter()
        .flat_map(|&r| grid.directions.iter().map(move |d| (r, [d[0] * r, d[1] * r])))
        .collect();

    let min_f = samples.iter().map(|(_, z)| model.value(at0, *z)).fold(f64::INFINITY, f64::min);
    row("F0", min_f >= 0.0, min_f, "smallest sampled F".into());

    let mut f1_dev: f64 = 0.0;
    for (_, z) in samples.iter().step_by(7) {
        let base = model.value(at0, *z);
        for p in &grid.positions {
            f1_dev = f1_dev.max((model.value(*p, *z) - base).abs() / base.abs().max(1e-300));
        }
    }
    let f1_pass = model.is_autonomous() || f1_dev < 1e-12;
    row("F1", f1_pass, f1_dev, if model.is_autonomous() { "autonomous model".into() } else { "sampled x-dependence".into() });

    let ratio = |z: &[C64; 2], r: f64| {
        let g = model.gradient(at0, *z);
        (g[0].norm_sqr() + g[1].norm_sqr()).sqrt() / r
    };
    let small = samples.iter().filter(|(r, _)| *r <= 1e-3).map(|(r, z)| ratio(z, *r)).fold(0.0, f64::max);
    row("F2", small <= 1e-4 * b.max(1.0), small, "sup |F_u|/|z| over |z| ≤ 1e-3".into());

    let large = samples
        .iter()
        .filter(|(r, _)| *r >= 1e3)
        .map(|(r, z)| {
            let g = model.gradient(at0, *z);
            ((g[0] - z[0] * b).norm_sqr() + (g[1] - z[1] * b).norm_sqr()).sqrt() / r
        })
        .fold(0.0, f64::max);
    row("F3", large <= 1e-4 * b.max(1.0), large, "sup |F_u − bz|/|z| over |z| ≥ 1e3".into());
    row("F3_b", b > mc2 + omega, b - (mc2 + omega), format!("b = {b} vs mc² + ω = {}", mc2 + omega));

    let fh: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|(r, z)| {
            let g = model.gradient(at0, *z);
            ((g[0].norm_sqr() + g[1].norm_sqr()).sqrt() / r, fhat(model, at0, *z), *r)
        })
        .collect();
    let min_fhat = fh.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let mut delta1 = None;
    if omega0 > 0.0 {
        for k in (1..400).rev() {
            let d = omega0 * k as f64 / 400.0;
            if fh.iter().filter(|x| x.0 >= omega0 - d).all(|x| x.1 >= d) {
                delta1 = Some(d);
                break;
            }
        }
    }
    let f4_pass = min_fhat > 0.0 && delta1.is_some();
    row(
        "F4",
        f4_pass,
        delta1.unwrap_or(0.0),
        format!("min sampled F̂ = {min_fhat:.3e}; best sampled δ₁ (value column)"),
    );

    let hn: Vec<(f64, f64)> = samples.iter().map(|(r, z)| (*r, op_norm_sym4(&model.hessian(at0, *z)))).collect();
    let tail: Vec<(f64, f64)> = hn.iter().filter(|(r, _)| *r >= 10.0).map(|(r, h)| (r.ln(), h.max(1e-300).ln())).collect();
    let nu = if tail.len() >= 2 {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).max(0.0)
    } else {
        0.0
    };
    let nu_eff = if nu < 1e-6 { 0.0 } else { nu };
    let c1 = hn.iter().map(|(r, h)| h / (1.0 + r.powf(nu_eff))).fold(0.0, f64::max);
    row("F5", nu_eff < 1.0 && c1.is_finite(), nu_eff, format!("fitted ν = {nu_eff:.3}, c₁ = {c1:.4}"));

    HypothesisReport {
        model: model.name().into(),
        params: model.params(),
        m,
        c,
        omega,
        omega0,
        rows,
        delta1,
        nu: nu_eff,
        c1,
    }
}

/// Applies a fixed number of Newton steps to `u` on its own space, e.g. after
/// interpolation to a refined grid.
pub fn newton_refine(u: &SpinorField, m: f64, c: f64, omega: f64, model: NonlinearityModel, steps: usize) -> Result<NewtonOutcome> {
    let problem = NewtonProblem::new(u.space_arc(), m, c, omega, model)?;
    Ok(problem.iterate(u, steps)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn at() -> EdgePoint {
        EdgePoint { edge: 0, x: 0.0 }
    }

    #[test]
    fn fhat_reference_value() {
        let m = reference_model(3.0).unwrap();
        let z = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        assert_relative_eq!(fhat(m.as_ref(), at(), z), 1.5 * (2f64.ln() - 0.5), epsilon = 1e-14);
        assert_eq!(fhat(m.as_ref(), at(), [C64::new(0.0, 0.0); 2]), 0.0);
        let q = quadratic_model(2.0);
        assert!(fhat(q.as_ref(), at(), z).abs() < 1e-15);
        assert!(reference_model(0.0).is_err());
    }

    #[test]
    fn saturable_series_branch_is_continuous() {
        let s = Saturable { b: 3.0 };
        let t = 1e-4;
        let series = s.f(t * (1.0 - 1e-12));
        let direct = 0.5 * 3.0 * (t - t.ln_1p());
        assert_relative_eq!(series, direct, max_relative = 1e-8);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let m = reference_model(3.0).unwrap();
        let z = [C64::new(0.3, -0.4), C64::new(0.7, 0.2)];
        let h = m.hessian(at(), z);
        let eps = 1e-6;
        for a in 0..4 {
            let mut r = real_coords(z);
            r[a] += eps;
            let zp = [C64::new(r[0], r[1]), C64::new(r[2], r[3])];
            r[a] -= 2.0 * eps;
            let zm = [C64::new(r[0], r[1]), C64::new(r[2], r[3])];
            let gp = real_coords(m.gradient(at(), zp));
            let gm = real_coords(m.gradient(at(), zm));
            for b in 0..4 {
                assert!(((gp[b] - gm[b]) / (2.0 * eps) - h[b][a]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn hypothesis_rows() {
        let grid = SampleGrid::default();
        let rep = check_hypotheses(reference_model(3.0).unwrap().as_ref(), 1.0, 1.0, 0.0, &grid);
        assert!(rep.all_pass(), "{:?}", rep.failures());
        let d1 = rep.delta1.unwrap();
        assert!(d1 > 0.08 && d1 < 0.095, "δ₁ = {d1}");
        assert_eq!(rep.nu, 0.0);

        let weak = check_hypotheses(reference_model(0.5).unwrap().as_ref(), 1.0, 1.0, 0.0, &grid);
        assert!(!weak.row("F3_b").unwrap().pass);

        let quad = check_hypotheses(quadratic_model(3.0).as_ref(), 1.0, 1.0, 0.0, &grid);
        assert!(!quad.row("F2").unwrap().pass);
    }

    #[test]
    fn zeta_formula() {
        assert_relative_eq!(zeta(1.0, 1.0, 0.0), 2f64.sqrt());
        assert_relative_eq!(zeta(1.0, 2.0, -1.0), (8.0f64 / 3.0).sqrt());
    }
}

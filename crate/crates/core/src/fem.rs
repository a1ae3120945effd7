//! Staggered discretization of spinor fields on metric graphs.
//!
//! The first component lives on the nodes `x_j = j h_e` of each edge, with one
//! shared node per vertex; the second component lives on the midpoints
//! `x_{j+1/2}`. Degrees of freedom are ordered as all first-component nodes
//! (vertices first, then edge interiors) followed by all midpoints.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::{Endpoint, MetricGraph};
use crate::linalg::{congruence, CsrMatrix, MassMatrix, SparseOperator, C64};

#[derive(Clone, Debug)]
pub struct EdgeGrid {
    pub h: f64,
    /// First-component DOFs at `x_0 .. x_N`; the two ends are vertex DOFs.
    pub node_dofs: Vec<usize>,
    /// Second-component DOFs at `x_{1/2} .. x_{N-1/2}`.
    pub mid_dofs: Vec<usize>,
}

impl EdgeGrid {
    pub fn n_cells(&self) -> usize {
        self.mid_dofs.len()
    }
}

/// Where a degree of freedom sits on the graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DofLocation {
    Vertex(usize),
    Node { edge: usize, x: f64 },
    Midpoint { edge: usize, x: f64 },
}

#[derive(Debug)]
pub struct DiscreteSpace {
    graph: MetricGraph,
    h_max: f64,
    edges: Vec<EdgeGrid>,
    n1: usize,
    n2: usize,
    weights: Vec<f64>,
    locations: Vec<DofLocation>,
    constraints: Vec<Vec<(usize, f64)>>,
}

pub fn make_space(g: &MetricGraph, h_max: f64) -> Result<Arc<DiscreteSpace>> {
    if !(h_max.is_finite() && h_max > 0.0) {
        return Err(invalid(format!("h_max must be positive, got {h_max}")));
    }
    if g.n_edges() == 0 {
        return Err(invalid("graph has no edges"));
    }
    let nv = g.n_vertices();
    let counts: Vec<usize> =
        g.edges().iter().map(|e| ((e.length / h_max) * (1.0 - 1e-12)).ceil().max(2.0) as usize).collect();
    let n1 = nv + counts.iter().map(|n| n - 1).sum::<usize>();
    let n2: usize = counts.iter().sum();

    let mut weights = vec![0.0; n1 + n2];
    let mut locations: Vec<DofLocation> = (0..nv).map(DofLocation::Vertex).collect();
    locations.resize(n1 + n2, DofLocation::Vertex(0));
    let mut edges = Vec::with_capacity(g.n_edges());
    let mut next_node = nv;
    let mut next_mid = n1;
    for (ei, (e, &n)) in g.edges().iter().zip(&counts).enumerate() {
        let h = e.length / n as f64;
        let mut node_dofs = Vec::with_capacity(n + 1);
        node_dofs.push(e.tail);
        for j in 1..n {
            node_dofs.push(next_node);
            locations[next_node] = DofLocation::Node { edge: ei, x: j as f64 * h };
            weights[next_node] = h;
            next_node += 1;
        }
        node_dofs.push(e.head);
        weights[e.tail] += 0.5 * h;
        weights[e.head] += 0.5 * h;
        let mut mid_dofs = Vec::with_capacity(n);
        for j in 0..n {
            mid_dofs.push(next_mid);
            locations[next_mid] = DofLocation::Midpoint { edge: ei, x: (j as f64 + 0.5) * h };
            weights[next_mid] = h;
            next_mid += 1;
        }
        edges.push(EdgeGrid { h, node_dofs, mid_dofs });
    }

    // Signed sum of second-component traces at each vertex, each trace
    // extrapolated quadratically from the two nearest midpoints.
    let mut constraints = vec![Vec::new(); nv];
    for v in 0..nv {
        for &(e, end) in g.incidence(v) {
            let grid = &edges[e];
            let n = grid.n_cells();
            let (near, far) = match end {
                Endpoint::Tail => (grid.mid_dofs[0], grid.mid_dofs[1]),
                Endpoint::Head => (grid.mid_dofs[n - 1], grid.mid_dofs[n - 2]),
            };
            let s = end.sign();
            constraints[v].push((near, 1.5 * s));
            constraints[v].push((far, -0.5 * s));
        }
    }

    Ok(Arc::new(DiscreteSpace { graph: g.clone(), h_max, edges, n1, n2, weights, locations, constraints }))
}

impl DiscreteSpace {
    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn n_dofs(&self) -> usize {
        self.n1 + self.n2
    }

    /// Number of first-component DOFs; they occupy indices `0..n1`.
    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn edge_grid(&self, e: usize) -> &EdgeGrid {
        &self.edges[e]
    }

    pub fn edge_grids(&self) -> &[EdgeGrid] {
        &self.edges
    }

    pub fn vertex_dof(&self, v: usize) -> usize {
        v
    }

    /// Quadrature weights (diagonal of the mass matrix).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn location(&self, dof: usize) -> DofLocation {
        self.locations[dof]
    }

    pub fn component(&self, dof: usize) -> usize {
        usize::from(dof >= self.n1)
    }

    /// One row per vertex: the discrete signed trace sum of the second component.
    pub fn constraint_rows(&self) -> &[Vec<(usize, f64)>] {
        &self.constraints
    }

    /// Constraint residuals `Σ ± u²_e(v)` for a field.
    pub fn constraint_values(&self, u: &[C64]) -> Vec<C64> {
        self.constraints.iter().map(|row| row.iter().map(|&(d, w)| u[d] * w).sum()).collect()
    }

    pub fn mass(&self) -> MassMatrix {
        MassMatrix::from_diagonal(self.weights.clone()).expect("positive weights")
    }

    pub fn same_layout(&self, other: &DiscreteSpace) -> bool {
        self.n1 == other.n1
            && self.n2 == other.n2
            && self.edges.len() == other.edges.len()
            && self.edges.iter().zip(&other.edges).all(|(a, b)| a.n_cells() == b.n_cells())
    }
}

#[derive(Clone, Debug)]
pub struct SpinorField {
    space: Arc<DiscreteSpace>,
    values: Vec<C64>,
}

impl SpinorField {
    pub fn new(space: Arc<DiscreteSpace>, values: Vec<C64>) -> Result<Self> {
        if values.len() != space.n_dofs() {
            return Err(Error::SpaceMismatch(format!(
                "field has {} values, space has {} DOFs",
                values.len(),
                space.n_dofs()
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid("field has non-finite entries"));
        }
        Ok(Self { space, values })
    }

    pub fn zeros(space: Arc<DiscreteSpace>) -> Self {
        let n = space.n_dofs();
        Self { space, values: vec![C64::new(0.0, 0.0); n] }
    }

    /// Field sampled from continuous component profiles `(edge, x) -> value`.
    pub fn from_fn(space: Arc<DiscreteSpace>, mut f: impl FnMut(usize, DofLocation) -> C64) -> Self {
        let values = (0..space.n_dofs()).map(|d| f(space.component(d), space.location(d))).collect();
        Self { space, values }
    }

    pub fn random(space: Arc<DiscreteSpace>, rng: &mut impl Rng) -> Self {
        let values = (0..space.n_dofs()).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        Self { space, values }
    }

    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    pub fn space_arc(&self) -> Arc<DiscreteSpace> {
        self.space.clone()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<C64>) -> Result<Self> {
        Self::new(self.space.clone(), values)
    }

    pub fn scaled(&self, a: C64) -> Self {
        Self { space: self.space.clone(), values: self.values.iter().map(|v| v * a).collect() }
    }

    pub fn scaled_re(&self, a: f64) -> Self {
        self.scaled(C64::new(a, 0.0))
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: C64, other: &SpinorField) -> Result<Self> {
        check_same(self, other)?;
        Ok(Self {
            space: self.space.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
        })
    }

    pub fn add(&self, other: &SpinorField) -> Result<Self> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &SpinorField) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn component_values(&self, comp: usize) -> &[C64] {
        if comp == 0 {
            &self.values[..self.space.n1]
        } else {
            &self.values[self.space.n1..]
        }
    }
}

fn check_same(u: &SpinorField, v: &SpinorField) -> Result<()> {
    if Arc::ptr_eq(&u.space, &v.space) || u.space.same_layout(&v.space) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch("fields live on different spaces".into()))
    }
}

/// Discrete `L^p` norm; `p = f64::INFINITY` gives the largest nodal modulus.
pub fn lp_norm(u: &SpinorField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid(format!("p must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(u.values.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let s: f64 = u.values.iter().zip(u.space.weights()).map(|(z, w)| w * z.norm().powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

/// `∫ <u, v>` with the lumped quadrature (antilinear in `u`).
pub fn inner(u: &SpinorField, v: &SpinorField) -> Result<C64> {
    check_same(u, v)?;
    Ok(u.values.iter().zip(&v.values).zip(u.space.weights()).map(|((a, b), w)| a.conj() * b * *w).sum())
}

/// `Σ_e ∫ |u'|²` with forward differences of nodes and of consecutive midpoints.
pub fn h1_seminorm_sq(u: &SpinorField) -> f64 {
    let mut s = 0.0;
    for grid in u.space.edge_grids() {
        let h = grid.h;
        for w in grid.node_dofs.windows(2) {
            s += (u.values[w[1]] - u.values[w[0]]).norm_sqr() / h;
        }
        for w in grid.mid_dofs.windows(2) {
            s += (u.values[w[1]] - u.values[w[0]]).norm_sqr() / h;
        }
    }
    s
}

pub fn h1_norm(u: &SpinorField) -> f64 {
    let l2 = lp_norm(u, 2.0).expect("p = 2");
    (l2 * l2 + h1_seminorm_sq(u)).sqrt()
}

/// `‖u‖_∞ / ‖u‖_{H¹}`.
pub fn embedding_ratio(u: &SpinorField) -> f64 {
    lp_norm(u, f64::INFINITY).expect("p = inf") / h1_norm(u)
}

fn check_mc(m: f64, c: f64) -> Result<()> {
    if !(m.is_finite() && m > 0.0) {
        return Err(invalid(format!("mass m must be positive, got {m}")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid(format!("speed c must be positive, got {c}")));
    }
    Ok(())
}

/// Staggered Dirac operator `−ic σ₁ d/dx + mc² σ₃` in weak form together with
/// the lumped mass matrix; `H v = λ M v` is the discrete eigenproblem.
///
/// Continuity of the first component holds by DOF sharing. The signed trace
/// condition on the second component is the natural condition of the vertex
/// equation and is satisfied by eigenvectors up to O(h²) in the extrapolated
/// trace rows of the space.
pub fn assemble_dirac(s: &DiscreteSpace, m: f64, c: f64) -> Result<(SparseOperator, MassMatrix)> {
    check_mc(m, c)?;
    assemble_dirac_unchecked(s, m, c)
}

/// Same as [`assemble_dirac`] but allows `m = 0` (massless comparisons).
pub fn assemble_dirac_unchecked(s: &DiscreteSpace, m: f64, c: f64) -> Result<(SparseOperator, MassMatrix)> {
    let mc2 = m * c * c;
    let n = s.n_dofs();
    let mut trip = Vec::with_capacity(n + 4 * s.n2);
    for (d, &w) in s.weights.iter().enumerate() {
        let sign = if d < s.n1 { 1.0 } else { -1.0 };
        trip.push((d, d, C64::new(sign * mc2 * w, 0.0)));
    }
    let ic = C64::new(0.0, c);
    for grid in &s.edges {
        for (j, &mid) in grid.mid_dofs.iter().enumerate() {
            let (a, b) = (grid.node_dofs[j], grid.node_dofs[j + 1]);
            trip.push((mid, b, -ic));
            trip.push((mid, a, ic));
            trip.push((b, mid, ic));
            trip.push((a, mid, -ic));
        }
    }
    Ok((CsrMatrix::from_triplets(n, n, &trip), s.mass()))
}

/// Kirchhoff Laplacian on the first-component nodes: P1 elements with
/// consistent mass, continuity by sharing, flux condition natural.
pub fn assemble_kirchhoff(s: &DiscreteSpace) -> (SparseOperator, MassMatrix) {
    let n = s.n1;
    let mut k = Vec::new();
    let mut mm = Vec::new();
    for grid in &s.edges {
        let h = grid.h;
        for w in grid.node_dofs.windows(2) {
            push_p1(&mut k, &mut mm, w[0], w[1], h);
        }
    }
    (
        CsrMatrix::from_triplets(n, n, &k).map(|v| C64::new(v, 0.0)),
        MassMatrix::from_csr(CsrMatrix::from_triplets(n, n, &mm)),
    )
}

fn push_p1(k: &mut Vec<(usize, usize, f64)>, m: &mut Vec<(usize, usize, f64)>, a: usize, b: usize, h: f64) {
    k.extend([(a, a, 1.0 / h), (b, b, 1.0 / h), (a, b, -1.0 / h), (b, a, -1.0 / h)]);
    m.extend([(a, a, h / 3.0), (b, b, h / 3.0), (a, b, h / 6.0), (b, a, h / 6.0)]);
}

/// Elimination basis for the anti-Kirchhoff vertex condition on per-edge P1
/// nodes (edge ends duplicated). Returns the rows of `P` and the reduced size.
fn anti_kirchhoff_basis(s: &DiscreteSpace) -> (Vec<usize>, Vec<Vec<(usize, f64)>>, usize) {
    let g = &s.graph;
    let mut offsets = Vec::with_capacity(s.edges.len());
    let mut total = 0;
    for grid in &s.edges {
        offsets.push(total);
        total += grid.n_cells() + 1;
    }
    let end_dof = |e: usize, end: Endpoint| match end {
        Endpoint::Tail => offsets[e],
        Endpoint::Head => offsets[e] + s.edges[e].n_cells(),
    };
    let mut pivot_of = vec![None; total];
    for v in 0..g.n_vertices() {
        let ends = g.incidence(v);
        let (pe, pend) = ends[0];
        let p = end_dof(pe, pend);
        let sp = pend.sign();
        let others: Vec<(usize, f64)> =
            ends[1..].iter().map(|&(e, end)| (end_dof(e, end), -sp * end.sign())).collect();
        pivot_of[p] = Some(others);
    }
    let mut reduced = vec![usize::MAX; total];
    let mut n_red = 0;
    for d in 0..total {
        if pivot_of[d].is_none() {
            reduced[d] = n_red;
            n_red += 1;
        }
    }
    let rows = (0..total)
        .map(|d| match &pivot_of[d] {
            None => vec![(reduced[d], 1.0)],
            Some(others) => others.iter().map(|&(q, w)| (reduced[q], w)).collect(),
        })
        .collect();
    (offsets, rows, n_red)
}

/// Anti-Kirchhoff Laplacian: signed sum of values zero at each vertex,
/// derivatives matching (natural). P1 elements on per-edge nodes, with the
/// value constraint eliminated through a null-space basis.
pub fn assemble_anti_kirchhoff(s: &DiscreteSpace) -> (SparseOperator, MassMatrix) {
    let (offsets, rows, n_red) = anti_kirchhoff_basis(s);
    let total = rows.len();
    let mut k = Vec::new();
    let mut mm = Vec::new();
    for (grid, &off) in s.edges.iter().zip(&offsets) {
        for j in 0..grid.n_cells() {
            push_p1(&mut k, &mut mm, off + j, off + j + 1, grid.h);
        }
    }
    let kf = CsrMatrix::from_triplets(total, total, &k);
    let mf = CsrMatrix::from_triplets(total, total, &mm);
    (
        congruence(&kf, &rows, n_red).map(|v| C64::new(v, 0.0)),
        MassMatrix::from_csr(congruence(&mf, &rows, n_red)),
    )
}

/// Empirical `L^∞`–`H¹` embedding constant: the largest `max|G|/‖G‖_{H¹}`
/// over discrete Green's functions `G = (K + M)^{-1} e_j` of the P1 scalar
/// problem, trying every vertex node and `trials` further random nodes.
pub fn linfty_embedding_check(s: &DiscreteSpace, trials: usize, seed: u64) -> Result<f64> {
    let (k, m) = assemble_kirchhoff(s);
    let a = k.add_scaled(&m.as_complex(), C64::new(1.0, 0.0)).map(|z| z.re);
    let lu = a.to_faer()?.sp_lu().map_err(|e| Error::Eigen(format!("LU failed: {e:?}")))?;
    let n = s.n1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets: Vec<usize> = (0..s.graph.n_vertices()).collect();
    targets.extend((0..trials).map(|_| rng.gen_range(0..n)));
    let mut best: f64 = 0.0;
    for j in targets {
        let rhs = faer::Col::<f64>::from_fn(n, |i| if i == j { 1.0 } else { 0.0 });
        let g = faer::prelude::Solve::solve(&lu, rhs);
        let sup = (0..n).map(|i| g[i].abs()).fold(0.0, f64::max);
        best = best.max(sup / g[j].sqrt());
    }
    Ok(best)
}

/// Piecewise-linear transfer of a field to another discretization of the same graph.
pub fn interpolate(u: &SpinorField, target: Arc<DiscreteSpace>) -> Result<SpinorField> {
    let src = u.space();
    if src.graph.n_edges() != target.graph.n_edges() || src.graph.n_vertices() != target.graph.n_vertices() {
        return Err(Error::SpaceMismatch("interpolation needs the same graph".into()));
    }
    let mut out = vec![C64::new(0.0, 0.0); target.n_dofs()];
    let nv = src.graph.n_vertices();
    out[..nv].copy_from_slice(&u.values[..nv]);
    for (e, (sg, tg)) in src.edges.iter().zip(&target.edges).enumerate() {
        let len = src.graph.edge(e).length;
        let nodes: Vec<C64> = sg.node_dofs.iter().map(|&d| u.values[d]).collect();
        let mids: Vec<C64> = sg.mid_dofs.iter().map(|&d| u.values[d]).collect();
        for (j, &d) in tg.node_dofs.iter().enumerate().take(tg.n_cells()).skip(1) {
            out[d] = sample_linear(&nodes, 0.0, sg.h, j as f64 * tg.h);
        }
        for (j, &d) in tg.mid_dofs.iter().enumerate() {
            let x = ((j as f64 + 0.5) * tg.h).min(len);
            out[d] = sample_linear(&mids, 0.5 * sg.h, sg.h, x);
        }
    }
    SpinorField::new(target, out)
}

/// Linear interpolation (and extrapolation at the ends) of samples at `x0 + i h`.
fn sample_linear(vals: &[Complex64], x0: f64, h: f64, x: f64) -> Complex64 {
    let n = vals.len();
    if n == 1 {
        return vals[0];
    }
    let t = (x - x0) / h;
    let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
    let f = t - i as f64;
    vals[i] * (1.0 - f) + vals[i + 1] * f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_chain, circle, path, unroll, box_window, build_ladder};

    #[test]
    fn single_edge_counts() {
        let g = path(1, 1.0).unwrap();
        let s = make_space(&g, 0.25).unwrap();
        assert_eq!(s.edge_grid(0).n_cells(), 4);
        assert_eq!(s.n1(), 5);
        assert_eq!(s.n2(), 4);
        assert_eq!(s.constraint_rows().len(), 2);
    }

    #[test]
    fn shared_vertex_dof() {
        let pg = build_chain(1.0).unwrap();
        let u = unroll(&pg, &box_window(&[(0, 1)])).unwrap();
        let s = make_space(&u.graph, 0.5).unwrap();
        assert_eq!(s.n1(), 3 + 2);
        let mid_vertex = u.vertex_of(1, 0);
        assert_eq!(s.edge_grid(0).node_dofs.last(), Some(&mid_vertex));
        assert_eq!(s.edge_grid(1).node_dofs.first(), Some(&mid_vertex));
    }

    #[test]
    fn ladder_cell_grid() {
        let pg = build_ladder().unwrap();
        let s = make_space(pg.cell(), 0.1).unwrap();
        assert!(s.edge_grids().iter().all(|g| g.n_cells() == 10));
        assert_eq!(s.n2(), 30);
        for g in s.edge_grids() {
            assert!((g.h * g.n_cells() as f64 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn weights_sum_to_length() {
        let g = circle(3.0).unwrap();
        let s = make_space(&g, 0.1).unwrap();
        let w1: f64 = s.weights()[..s.n1()].iter().sum();
        let w2: f64 = s.weights()[s.n1()..].iter().sum();
        assert!((w1 - 3.0).abs() < 1e-12 && (w2 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_spinor_norms() {
        let g = path(3, 0.7).unwrap();
        let s = make_space(&g, 0.05).unwrap();
        let u = SpinorField::from_fn(s, |comp, _| C64::new(if comp == 0 { 1.0 } else { 0.0 }, 0.0));
        let l2 = lp_norm(&u, 2.0).unwrap();
        assert!((l2 * l2 - 2.1).abs() < 1e-12);
        assert!((embedding_ratio(&u) - 1.0 / 2.1f64.sqrt()).abs() < 1e-12);
        assert!(lp_norm(&u, 0.5).is_err());
    }

    #[test]
    fn dirac_is_hermitian() {
        let pg = build_ladder().unwrap();
        let u = unroll(&pg, &box_window(&[(0, 2)])).unwrap();
        let s = make_space(&u.graph, 0.1).unwrap();
        let (h, m) = assemble_dirac(&s, 1.3, 0.7).unwrap();
        assert!(h.hermitian_defect() < 1e-15);
        assert!(m.diagonal().is_some());
        assert!(assemble_dirac(&s, 0.0, 1.0).is_err());
        assert!(assemble_dirac(&s, 1.0, -1.0).is_err());
    }

    #[test]
    fn laplacians_psd() {
        let pg = build_ladder().unwrap();
        let s = make_space(pg.cell(), 0.2).unwrap();
        for (op, m) in [assemble_kirchhoff(&s), assemble_anti_kirchhoff(&s)] {
            let vals = crate::eigen::dense_generalized(&op, &m).unwrap();
            assert!(vals[0] > -1e-10);
        }
        let (k, mk) = assemble_kirchhoff(&s);
        let vals = crate::eigen::dense_generalized(&k, &mk).unwrap();
        assert!(vals[0].abs() < 1e-10);
        let ones = vec![C64::new(1.0, 0.0); s.n1()];
        assert!(k.mul_vec(&ones).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let g = path(2, 1.0).unwrap();
        let coarse = make_space(&g, 0.25).unwrap();
        let fine = make_space(&g, 0.125).unwrap();
        let f = |loc: DofLocation| match loc {
            DofLocation::Vertex(v) => v as f64,
            DofLocation::Node { edge, x } | DofLocation::Midpoint { edge, x } => edge as f64 + x,
        };
        let u = SpinorField::from_fn(coarse, |_, loc| C64::new(f(loc), 0.0));
        let v = interpolate(&u, fine.clone()).unwrap();
        for d in 0..fine.n_dofs() {
            assert!((v.values()[d].re - f(fine.location(d))).abs() < 1e-12);
        }
    }
}

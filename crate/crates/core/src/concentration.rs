//! Concentration functions, per-cell masses and the vanishing / dichotomy /
//! compactness classification of field sequences.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fem::{lp_norm, DiscreteSpace, SpinorField};
use crate::graph::{LatticeShift, Unrolled};
use crate::linalg::C64;

/// All DOF locations joined along each edge with half-cell steps, for
/// path-metric balls.
pub struct PointGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PointGraph {
    pub fn new(space: &DiscreteSpace) -> Self {
        let mut adj = vec![Vec::new(); space.n_dofs()];
        for g in space.edge_grids() {
            let half = 0.5 * g.h;
            for (j, &mid) in g.mid_dofs.iter().enumerate() {
                for node in [g.node_dofs[j], g.node_dofs[j + 1]] {
                    adj[node].push((mid, half));
                    adj[mid].push((node, half));
                }
            }
        }
        Self { adj }
    }

    /// Path distances from `src`; points beyond `cutoff` are left at infinity.
    pub fn distances(&self, src: usize, cutoff: f64) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adj.len()];
        dist[src] = 0.0;
        let mut heap = BinaryHeap::from([Item(0.0, src)]);
        while let Some(Item(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(w, len) in &self.adj[v] {
                let nd = d + len;
                if nd < dist[w] && nd <= cutoff * (1.0 + 1e-12) {
                    dist[w] = nd;
                    heap.push(Item(nd, w));
                }
            }
        }
        dist
    }
}

/// Per-DOF share of `|u|²` attributed to each window cell. Vertex weights are
/// split over incident edge ends, so the shares sum to `‖u‖₂²` exactly.
fn cell_weights(space: &DiscreteSpace, unrolled: &Unrolled) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![Vec::new(); space.n_dofs()];
    let g = space.graph();
    for (e, grid) in space.edge_grids().iter().enumerate() {
        let cell = unrolled.edge_cell[e];
        for &d in &grid.node_dofs[1..grid.n_cells()] {
            out[d].push((cell, grid.h));
        }
        for &d in &grid.mid_dofs {
            out[d].push((cell, grid.h));
        }
    }
    for v in 0..g.n_vertices() {
        for &(e, _) in g.incidence(v) {
            out[space.vertex_dof(v)].push((unrolled.edge_cell[e], 0.5 * space.edge_grid(e).h));
        }
    }
    out
}

fn check_space(u: &SpinorField, unrolled: &Unrolled) -> Result<()> {
    let g = u.space().graph();
    if g.n_edges() != unrolled.graph.n_edges() || g.n_vertices() != unrolled.graph.n_vertices() {
        return Err(Error::SpaceMismatch("field does not live on this unrolled graph".into()));
    }
    Ok(())
}

/// `a_k = ∫_{T^k K} |u|²` in window order.
pub fn cell_masses(u: &SpinorField, unrolled: &Unrolled) -> Vec<f64> {
    let mut a = vec![0.0; unrolled.n_cells()];
    for (d, shares) in cell_weights(u.space(), unrolled).iter().enumerate() {
        let v = u.values()[d].norm_sqr();
        for &(cell, w) in shares {
            a[cell] += w * v;
        }
    }
    a
}

/// `Σ_{cell} w |u|^p` over the DOF shares of one cell.
fn cell_lp_pow(u: &SpinorField, unrolled: &Unrolled, cell: usize, p: f64) -> f64 {
    let mut s = 0.0;
    for (d, shares) in cell_weights(u.space(), unrolled).iter().enumerate() {
        for &(c, w) in shares {
            if c == cell {
                s += w * u.values()[d].norm().powf(p);
            }
        }
    }
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationProfile {
    pub radii: Vec<f64>,
    pub rho: Vec<f64>,
    /// DOF at which each `rho` value is attained.
    pub centers: Vec<usize>,
    pub cell_masses: Vec<(LatticeShift, f64)>,
    /// Largest single-point mass: bound on the error of sampling the sup at nodes.
    pub sup_error: f64,
    pub total_mass: f64,
}

impl ConcentrationProfile {
    pub fn write_rho_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "R,rho")?;
        for (r, v) in self.radii.iter().zip(&self.rho) {
            writeln!(w, "{r:.12e},{v:.12e}")?;
        }
        Ok(())
    }

    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,a_k")?;
        for (k, a) in &self.cell_masses {
            writeln!(w, "{k},{a:.12e}")?;
        }
        Ok(())
    }
}

/// `ρ(R) = sup_x ∫_{B_R(x)} |u|²`, the sup taken over all first-component nodes.
pub fn concentration_profile(u: &SpinorField, unrolled: &Unrolled, radii: &[f64]) -> Result<ConcentrationProfile> {
    check_space(u, unrolled)?;
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("radii must be positive and ascending"));
    }
    let space = u.space();
    let r_max = *radii.last().unwrap();
    let pg = PointGraph::new(space);
    let point_mass: Vec<f64> = u.values().iter().zip(space.weights()).map(|(z, w)| w * z.norm_sqr()).collect();
    let mut rho = vec![0.0; radii.len()];
    let mut centers = vec![0; radii.len()];
    for src in 0..space.n1() {
        let dist = pg.distances(src, r_max);
        let mut reached: Vec<(f64, f64)> =
            dist.iter().zip(&point_mass).filter(|(d, _)| d.is_finite()).map(|(&d, &m)| (d, m)).collect();
        reached.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let mut i = 0;
        for (k, &r) in radii.iter().enumerate() {
            while i < reached.len() && reached[i].0 <= r * (1.0 + 1e-12) {
                acc += reached[i].1;
                i += 1;
            }
            if acc > rho[k] {
                rho[k] = acc;
                centers[k] = src;
            }
        }
    }
    let masses = cell_masses(u, unrolled);
    Ok(ConcentrationProfile {
        radii: radii.to_vec(),
        rho,
        centers,
        cell_masses: unrolled.window.iter().cloned().zip(masses).collect(),
        sup_error: point_mass.iter().cloned().fold(0.0, f64::max),
        total_mass: point_mass.iter().sum(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Vanishing,
    Dichotomy,
    Compact,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DichotomySplit {
    /// Inner cut-off: the near part is `u` on `B_{r1}(x)`.
    pub r1: f64,
    /// Outer cut-off: the far part is `u` outside `B_{r2}(x)`.
    pub r2: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Mass in the annulus `r1 < d ≤ r2`.
    pub annulus_mass: f64,
    /// `‖u‖₂² − ‖near‖₂² − ‖far‖₂²`.
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    pub tau: f64,
    pub mass_limit: f64,
    pub radius: f64,
    pub eps: f64,
    pub rho_n: Vec<f64>,
    pub masses: Vec<f64>,
    /// Lattice cell carrying the most mass, per sequence member.
    pub shifts: Vec<LatticeShift>,
    pub split: Option<DichotomySplit>,
}

/// Least-squares fit `y_n ≈ τ + a/n` over the last half of the sequence.
fn trend_limit(ys: &[f64]) -> f64 {
    let n = ys.len();
    let start = n / 2;
    let pts: Vec<(f64, f64)> = (start..n).map(|i| (1.0 / (i + 1) as f64, ys[i])).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return my;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    my - slope * mx
}

fn split_at_plateau(u: &SpinorField, center: usize, radius: f64, tau: f64, eps: f64) -> DichotomySplit {
    let space = u.space();
    let pg = PointGraph::new(space);
    let dist = pg.distances(center, f64::INFINITY);
    let point_mass: Vec<f64> = u.values().iter().zip(space.weights()).map(|(z, w)| w * z.norm_sqr()).collect();
    let ball = |r: f64| -> f64 { dist.iter().zip(&point_mass).filter(|(d, _)| **d <= r).map(|(_, m)| m).sum() };
    let total: f64 = point_mass.iter().sum();
    let step = space.h_max();
    let mut r1 = radius;
    let mut r = 0.25 * radius;
    while r <= radius {
        if ball(r) >= tau - 0.5 * eps {
            r1 = r;
            break;
        }
        r += step;
    }
    let mut r2 = r1;
    let r_cap = dist.iter().cloned().filter(|d| d.is_finite()).fold(0.0, f64::max);
    let mut r = r1;
    while r <= r_cap {
        if ball(r) > tau + 0.5 * eps {
            break;
        }
        r2 = r;
        r += step;
    }
    let alpha = ball(r1);
    let inside_r2 = ball(r2);
    let beta = total - inside_r2;
    DichotomySplit { r1, r2, alpha, beta, annulus_mass: inside_r2 - alpha, defect: total - alpha - beta }
}

/// Classifies a sequence by the limit `τ` of `ρ_n(R)` against the limit of
/// `‖u_n‖₂²`, both fitted over the last half of the sequence.
pub fn classify(seq: &[SpinorField], unrolled: &Unrolled, radius: f64, eps: f64) -> Result<Classification> {
    if seq.len() < 3 {
        return Err(invalid("classification needs at least three fields"));
    }
    if !(radius > 0.0 && eps > 0.0) {
        return Err(invalid("radius and eps must be positive"));
    }
    let mut rho_n = Vec::with_capacity(seq.len());
    let mut masses = Vec::with_capacity(seq.len());
    let mut shifts = Vec::with_capacity(seq.len());
    let mut last_center = 0;
    for u in seq {
        let prof = concentration_profile(u, unrolled, &[radius])?;
        rho_n.push(prof.rho[0]);
        masses.push(prof.total_mass);
        last_center = prof.centers[0];
        // Ties up to rounding (mass centred on a shared vertex) go to the smallest shift.
        let top = prof.cell_masses.iter().map(|x| x.1).fold(0.0, f64::max);
        let best = prof
            .cell_masses
            .iter()
            .filter(|x| x.1 >= top * (1.0 - 1e-9))
            .map(|x| x.0.clone())
            .min()
            .unwrap();
        shifts.push(best);
    }
    let tau = trend_limit(&rho_n).max(0.0);
    let mass_limit = trend_limit(&masses);
    let near = |x: f64, t: f64| (x - t).abs() < 0.1 * eps;
    let label = if mass_limit < eps || near(tau, eps) || near(tau, mass_limit - eps) {
        Label::Inconclusive
    } else if tau < eps {
        Label::Vanishing
    } else if (tau - mass_limit).abs() < eps {
        Label::Compact
    } else if tau < mass_limit {
        Label::Dichotomy
    } else {
        Label::Inconclusive
    };
    let split = (label == Label::Dichotomy).then(|| split_at_plateau(seq.last().unwrap(), last_center, radius, tau, eps));
    Ok(Classification { label, tau, mass_limit, radius, eps, rho_n, masses, shifts, split })
}

/// `|‖u_n‖_p^p − ‖u_n − u‖_p^p − ‖u‖_p^p|`.
pub fn brezis_lieb_defect(un: &SpinorField, u: &SpinorField, p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must lie in (1, ∞), got {p}")));
    }
    let a = lp_norm(un, p)?.powf(p);
    let b = lp_norm(&un.sub(u)?, p)?.powf(p);
    let c = lp_norm(u, p)?.powf(p);
    Ok((a - b - c).abs())
}

/// `‖u‖_{L^p(K_k)}^p / (‖u‖_{L²(K_k)}^{p−2} ‖u‖_{H¹(K_k)}²)` on the window cell `cell`.
pub fn gagliardo_nirenberg_check(u: &SpinorField, unrolled: &Unrolled, cell: &LatticeShift, p: f64) -> Result<f64> {
    check_space(u, unrolled)?;
    if !(p > 2.0) {
        return Err(invalid(format!("p must exceed 2, got {p}")));
    }
    let ci = unrolled
        .cell_position(cell)
        .ok_or_else(|| invalid(format!("cell {cell} is outside the window")))?;
    let lp = cell_lp_pow(u, unrolled, ci, p);
    let l2 = cell_lp_pow(u, unrolled, ci, 2.0);
    let mut semi = 0.0;
    let v = u.values();
    for (e, grid) in u.space().edge_grids().iter().enumerate() {
        if unrolled.edge_cell[e] != ci {
            continue;
        }
        for w in grid.node_dofs.windows(2) {
            semi += (v[w[1]] - v[w[0]]).norm_sqr() / grid.h;
        }
        for w in grid.mid_dofs.windows(2) {
            semi += (v[w[1]] - v[w[0]]).norm_sqr() / grid.h;
        }
    }
    let den = l2.powf(0.5 * (p - 2.0)) * (l2 + semi);
    if !(den > 0.0) {
        return Err(Error::Undefined("field vanishes on the cell".into()));
    }
    Ok(lp / den)
}

/// First-component bump `sech(d/width)` around vertex `vertex` of window cell
/// `cell`, scaled to the given `L²` mass.
pub fn sech_bump(space: &Arc<DiscreteSpace>, unrolled: &Unrolled, cell: usize, vertex: usize, width: f64, mass: f64) -> Result<SpinorField> {
    let src = space.vertex_dof(unrolled.vertex_of(cell, vertex));
    let dist = PointGraph::new(space).distances(src, f64::INFINITY);
    let n1 = space.n1();
    let vals: Vec<C64> = (0..space.n_dofs())
        .map(|d| if d < n1 { C64::new(1.0 / (dist[d] / width).cosh(), 0.0) } else { C64::new(0.0, 0.0) })
        .collect();
    let u = SpinorField::new(space.clone(), vals)?;
    let n = lp_norm(&u, 2.0)?;
    Ok(u.scaled_re(mass.sqrt() / n))
}

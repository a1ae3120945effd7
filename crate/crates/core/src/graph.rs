//! Metric graphs, periodic graphs given by a fundamental cell plus gluing
//! data, and finite unrollings over windows of lattice points.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fem::SpinorField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Tail,
    Head,
}

impl Endpoint {
    /// +1 at a tail, -1 at a head.
    pub fn sign(self) -> f64 {
        match self {
            Endpoint::Tail => 1.0,
            Endpoint::Head => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct MetricGraph {
    labels: Vec<String>,
    edges: Vec<Edge>,
    incidence: Vec<Vec<(usize, Endpoint)>>,
}

impl MetricGraph {
    /// Builds a finite connected metric graph. Edges are indexed by position.
    pub fn new(labels: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let g = Self::new_unchecked(labels, edges)?;
        if !g.is_connected() {
            return Err(invalid("metric graph is not connected"));
        }
        Ok(g)
    }

    fn new_unchecked(labels: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("graph has no vertices"));
        }
        let nv = labels.len();
        let mut incidence = vec![Vec::new(); nv];
        for (i, e) in edges.iter().enumerate() {
            if e.tail >= nv || e.head >= nv {
                return Err(invalid(format!("edge {i} references a missing vertex")));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(invalid(format!("edge {i} has length {}", e.length)));
            }
            incidence[e.tail].push((i, Endpoint::Tail));
            incidence[e.head].push((i, Endpoint::Head));
        }
        Ok(Self { labels, edges, incidence })
    }

    pub fn n_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vertex_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn incidence(&self, v: usize) -> &[(usize, Endpoint)] {
        &self.incidence[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence[v].len()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Same graph with the given edges reversed.
    pub fn reoriented(&self, flip: &[bool]) -> MetricGraph {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if flip.get(i).copied().unwrap_or(false) {
                    Edge { tail: e.head, head: e.tail, length: e.length }
                } else {
                    e.clone()
                }
            })
            .collect();
        MetricGraph::new_unchecked(self.labels.clone(), edges).expect("reorientation keeps validity")
    }

    fn is_connected(&self) -> bool {
        let nv = self.n_vertices();
        let mut seen = vec![false; nv];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &(e, _) in &self.incidence[v] {
                for w in [self.edges[e].tail, self.edges[e].head] {
                    if !seen[w] {
                        seen[w] = true;
                        count += 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        count == nv
    }
}

/// A single edge of the given length whose two ends are the same vertex.
pub fn circle(length: f64) -> Result<MetricGraph> {
    MetricGraph::new(vec!["o".into()], vec![Edge { tail: 0, head: 0, length }])
}

/// A path of `n` edges of the given length.
pub fn path(n: usize, length: f64) -> Result<MetricGraph> {
    if n == 0 {
        return Err(invalid("path needs at least one edge"));
    }
    let labels = (0..=n).map(|i| i.to_string()).collect();
    let edges = (0..n).map(|i| Edge { tail: i, head: i + 1, length }).collect();
    MetricGraph::new(labels, edges)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeShift(pub Vec<i64>);

impl LatticeShift {
    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn unit(d: usize, g: usize) -> Self {
        let mut k = vec![0; d];
        k[g] = 1;
        Self(k)
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn max_abs(&self) -> i64 {
        self.0.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }
}

impl Add for &LatticeShift {
    type Output = LatticeShift;
    fn add(self, o: &LatticeShift) -> LatticeShift {
        LatticeShift(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticeShift {
    type Output = LatticeShift;
    fn sub(self, o: &LatticeShift) -> LatticeShift {
        LatticeShift(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &LatticeShift {
    type Output = LatticeShift;
    fn neg(self) -> LatticeShift {
        LatticeShift(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for LatticeShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join(";"))
    }
}

impl From<Vec<i64>> for LatticeShift {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

/// Identifications for generator `generator`: each pair `(q, p)` states that
/// vertex `q` of cell `k` is the same point as vertex `p` of cell `k + e_g`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gluing {
    pub generator: usize,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct PeriodicGraph {
    cell: MetricGraph,
    rank: usize,
    gluings: Vec<Gluing>,
}

impl PeriodicGraph {
    /// Structural checks only; semantic checks live in [`validate`].
    pub fn new(cell: MetricGraph, rank: usize, gluings: Vec<Gluing>) -> Result<Self> {
        if rank == 0 {
            return Err(invalid("lattice rank must be at least 1"));
        }
        for gl in &gluings {
            if gl.generator >= rank {
                return Err(invalid(format!("gluing generator {} >= rank {rank}", gl.generator)));
            }
            for &(q, p) in &gl.pairs {
                if q >= cell.n_vertices() || p >= cell.n_vertices() {
                    return Err(invalid("gluing references a missing cell vertex"));
                }
            }
        }
        Ok(Self { cell, rank, gluings })
    }

    pub fn cell(&self) -> &MetricGraph {
        &self.cell
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn gluings(&self) -> &[Gluing] {
        &self.gluings
    }

    /// Cell vertex pairs `(q, p)` glued along generator `g`.
    pub fn pairs_for(&self, g: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.gluings.iter().filter(move |gl| gl.generator == g).flat_map(|gl| gl.pairs.iter().copied())
    }
}

pub fn build_chain(length: f64) -> Result<PeriodicGraph> {
    if !(length.is_finite() && length > 0.0) {
        return Err(invalid(format!("chain length must be positive, got {length}")));
    }
    let cell = MetricGraph::new(vec!["0".into(), "1".into()], vec![Edge { tail: 0, head: 1, length }])?;
    PeriodicGraph::new(cell, 1, vec![Gluing { generator: 0, pairs: vec![(1, 0)] }])
}

pub fn build_square_lattice() -> Result<PeriodicGraph> {
    let cell = MetricGraph::new(
        vec!["o".into(), "x".into(), "y".into()],
        vec![Edge { tail: 0, head: 1, length: 1.0 }, Edge { tail: 0, head: 2, length: 1.0 }],
    )?;
    PeriodicGraph::new(
        cell,
        2,
        vec![Gluing { generator: 0, pairs: vec![(1, 0)] }, Gluing { generator: 1, pairs: vec![(2, 0)] }],
    )
}

pub fn build_ladder() -> Result<PeriodicGraph> {
    let cell = MetricGraph::new(
        vec!["a".into(), "b".into(), "a'".into(), "b'".into()],
        vec![
            Edge { tail: 0, head: 2, length: 1.0 },
            Edge { tail: 1, head: 3, length: 1.0 },
            Edge { tail: 0, head: 1, length: 1.0 },
        ],
    )?;
    PeriodicGraph::new(cell, 1, vec![Gluing { generator: 0, pairs: vec![(2, 0), (3, 1)] }])
}

pub fn builtin(name: &str) -> Result<PeriodicGraph> {
    match name {
        "chain" => build_chain(1.0),
        "square" | "square_lattice" => build_square_lattice(),
        "ladder" => build_ladder(),
        other => Err(invalid(format!("unknown builtin graph '{other}' (chain, square, ladder)"))),
    }
}

/// All lattice points of the box `lo_i <= k_i <= hi_i`, in lexicographic order.
pub fn box_window(bounds: &[(i64, i64)]) -> Vec<LatticeShift> {
    let mut out = vec![Vec::new()];
    for &(lo, hi) in bounds {
        let mut next = Vec::new();
        for prefix in &out {
            for x in lo..=hi {
                let mut p = prefix.clone();
                p.push(x);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(LatticeShift).collect()
}

/// Window of `n` consecutive cells of a rank-1 lattice centred on 0.
pub fn centered_window(n: usize) -> Vec<LatticeShift> {
    let lo = -((n as i64 - 1) / 2);
    box_window(&[(lo, lo + n as i64 - 1)])
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Vertex classes of the window after applying all gluings.
struct Identification {
    class_of: Vec<usize>,
    n_classes: usize,
}

fn identify(pg: &PeriodicGraph, window: &[LatticeShift], index: &HashMap<LatticeShift, usize>) -> Identification {
    let nv = pg.cell.n_vertices();
    let mut uf = UnionFind::new(window.len() * nv);
    for (ci, k) in window.iter().enumerate() {
        for gl in &pg.gluings {
            let target = k + &LatticeShift::unit(pg.rank, gl.generator);
            if let Some(&cj) = index.get(&target) {
                for &(q, p) in &gl.pairs {
                    uf.union(ci * nv + q, cj * nv + p);
                }
            }
        }
    }
    let mut root_class = HashMap::new();
    let mut class_of = Vec::with_capacity(window.len() * nv);
    for x in 0..window.len() * nv {
        let r = uf.find(x);
        let n = root_class.len();
        class_of.push(*root_class.entry(r).or_insert(n));
    }
    Identification { class_of, n_classes: root_class.len() }
}

fn check_window(rank: usize, window: &[LatticeShift]) -> Result<HashMap<LatticeShift, usize>> {
    if window.is_empty() {
        return Err(invalid("window is empty"));
    }
    let mut index = HashMap::new();
    for (i, k) in window.iter().enumerate() {
        if k.rank() != rank {
            return Err(Error::RankMismatch { expected: rank, got: k.rank() });
        }
        if index.insert(k.clone(), i).is_some() {
            return Err(invalid(format!("window contains {k} twice")));
        }
    }
    let mut seen = HashSet::from([window[0].clone()]);
    let mut queue = VecDeque::from([window[0].clone()]);
    while let Some(k) = queue.pop_front() {
        for g in 0..rank {
            let e = LatticeShift::unit(rank, g);
            for nb in [&k + &e, &k - &e] {
                if index.contains_key(&nb) && seen.insert(nb.clone()) {
                    queue.push_back(nb);
                }
            }
        }
    }
    if seen.len() != window.len() {
        return Err(invalid("window is not connected in the lattice"));
    }
    Ok(index)
}

/// Finite piece of a periodic graph together with the cell bookkeeping needed
/// for per-cell masses and the lattice action.
#[derive(Clone, Debug)]
pub struct Unrolled {
    pub graph: MetricGraph,
    pub rank: usize,
    pub window: Vec<LatticeShift>,
    cell_index: HashMap<LatticeShift, usize>,
    /// Window index of the cell containing each edge.
    pub edge_cell: Vec<usize>,
    /// Cell edge each unrolled edge is a copy of.
    pub edge_origin: Vec<usize>,
    /// `(window index, cell vertex)` representatives of each unrolled vertex.
    pub vertex_reps: Vec<Vec<(usize, usize)>>,
    class_of: Vec<usize>,
    n_cell_vertices: usize,
    n_cell_edges: usize,
}

impl Unrolled {
    pub fn cell_position(&self, k: &LatticeShift) -> Option<usize> {
        self.cell_index.get(k).copied()
    }

    /// Unrolled vertex that is vertex `v` of window cell `cell`.
    pub fn vertex_of(&self, cell: usize, v: usize) -> usize {
        self.class_of[cell * self.n_cell_vertices + v]
    }

    /// Unrolled edge that is edge `e` of window cell `cell`.
    pub fn edge_of(&self, cell: usize, e: usize) -> usize {
        cell * self.n_cell_edges + e
    }

    pub fn n_cells(&self) -> usize {
        self.window.len()
    }

    pub fn n_cell_edges(&self) -> usize {
        self.n_cell_edges
    }
}

pub fn unroll(pg: &PeriodicGraph, window: &[LatticeShift]) -> Result<Unrolled> {
    let report = validate(pg);
    if !report.is_valid() {
        return Err(invalid(format!("periodic graph fails validation: {}", report.summary())));
    }
    let index = check_window(pg.rank, window)?;
    let id = identify(pg, window, &index);
    let cell = &pg.cell;
    let (nv, ne) = (cell.n_vertices(), cell.n_edges());
    let mut labels = vec![String::new(); id.n_classes];
    let mut reps = vec![Vec::new(); id.n_classes];
    for (ci, k) in window.iter().enumerate() {
        for v in 0..nv {
            let cls = id.class_of[ci * nv + v];
            if reps[cls].is_empty() {
                labels[cls] = format!("{}@{}", cell.labels[v], k);
            }
            reps[cls].push((ci, v));
        }
    }
    let mut edges = Vec::with_capacity(window.len() * ne);
    let mut edge_cell = Vec::with_capacity(window.len() * ne);
    let mut edge_origin = Vec::with_capacity(window.len() * ne);
    for ci in 0..window.len() {
        for (e, ce) in cell.edges.iter().enumerate() {
            edges.push(Edge {
                tail: id.class_of[ci * nv + ce.tail],
                head: id.class_of[ci * nv + ce.head],
                length: ce.length,
            });
            edge_cell.push(ci);
            edge_origin.push(e);
        }
    }
    let graph = MetricGraph::new(labels, edges)?;
    Ok(Unrolled {
        graph,
        rank: pg.rank,
        window: window.to_vec(),
        cell_index: index,
        edge_cell,
        edge_origin,
        vertex_reps: reps,
        class_of: id.class_of,
        n_cell_vertices: nv,
        n_cell_edges: ne,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Freeness,
    Overlap,
    Connectivity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub fn summary(&self) -> String {
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        msgs.join("; ")
    }
}

/// Combinatorial checks on a box of radius 2 around the origin.
pub fn validate(pg: &PeriodicGraph) -> ValidationReport {
    let window = box_window(&vec![(-2, 2); pg.rank]);
    let index: HashMap<_, _> = window.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let id = identify(pg, &window, &index);
    let cell = &pg.cell;
    let nv = cell.n_vertices();
    let mut report = ValidationReport::default();
    let mut push = |kind, message: String| {
        if !report.violations.iter().any(|v: &Violation| v.message == message) {
            report.violations.push(Violation { kind, message });
        }
    };

    let mut members: Vec<Vec<(usize, usize)>> = vec![Vec::new(); id.n_classes];
    for (ci, _) in window.iter().enumerate() {
        for v in 0..nv {
            members[id.class_of[ci * nv + v]].push((ci, v));
        }
    }
    for m in &members {
        for (i, &(ca, va)) in m.iter().enumerate() {
            for &(cb, vb) in &m[i + 1..] {
                if va == vb {
                    let shift = &window[cb] - &window[ca];
                    push(
                        ViolationKind::Freeness,
                        format!("shift {shift} fixes cell vertex '{}'", cell.labels[va]),
                    );
                } else if ca == cb {
                    push(
                        ViolationKind::Overlap,
                        format!(
                            "cell vertices '{}' and '{}' are identified with each other",
                            cell.labels[va], cell.labels[vb]
                        ),
                    );
                }
            }
        }
    }

    let mut seen_edges: HashMap<(usize, usize, u64), usize> = HashMap::new();
    for ci in 0..window.len() {
        for ce in cell.edges.iter() {
            let a = id.class_of[ci * nv + ce.tail];
            let b = id.class_of[ci * nv + ce.head];
            let key = (a.min(b), a.max(b), ce.length.to_bits());
            if let Some(&cj) = seen_edges.get(&key) {
                if cj != ci {
                    let shift = &window[ci] - &window[cj];
                    push(ViolationKind::Overlap, format!("cells differing by {shift} share an edge"));
                }
            } else {
                seen_edges.insert(key, ci);
            }
        }
    }

    let mut adj = vec![Vec::new(); id.n_classes];
    for ci in 0..window.len() {
        for ce in cell.edges.iter() {
            let a = id.class_of[ci * nv + ce.tail];
            let b = id.class_of[ci * nv + ce.head];
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; id.n_classes];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    if count != id.n_classes {
        push(
            ViolationKind::Connectivity,
            "translated cells do not form a connected graph".to_string(),
        );
    }
    report
}

/// Moves `u` cell-wise by `k`: the values on cell `j` end up on cell `j + k`.
/// Values leaving the window are dropped, incoming values are zero.
pub fn translate_field(u: &SpinorField, unrolled: &Unrolled, k: &LatticeShift) -> Result<SpinorField> {
    if k.rank() != unrolled.rank {
        return Err(Error::RankMismatch { expected: unrolled.rank, got: k.rank() });
    }
    let space = u.space();
    if space.graph().n_edges() != unrolled.graph.n_edges()
        || space.graph().n_vertices() != unrolled.graph.n_vertices()
    {
        return Err(Error::SpaceMismatch("field does not live on this unrolled graph".into()));
    }
    let src = u.values();
    let mut out = vec![num_complex::Complex64::new(0.0, 0.0); src.len()];
    for te in 0..unrolled.graph.n_edges() {
        let source_cell = &unrolled.window[unrolled.edge_cell[te]] - k;
        let Some(sc) = unrolled.cell_position(&source_cell) else { continue };
        let se = unrolled.edge_of(sc, unrolled.edge_origin[te]);
        let (tg, sg) = (space.edge_grid(te), space.edge_grid(se));
        let n = tg.n_cells();
        for j in 1..n {
            out[tg.node_dofs[j]] = src[sg.node_dofs[j]];
        }
        for j in 0..n {
            out[tg.mid_dofs[j]] = src[sg.mid_dofs[j]];
        }
    }
    for tv in 0..unrolled.graph.n_vertices() {
        for &(cell, cv) in &unrolled.vertex_reps[tv] {
            let source_cell = &unrolled.window[cell] - k;
            if let Some(sc) = unrolled.cell_position(&source_cell) {
                let sv = unrolled.vertex_of(sc, cv);
                out[space.vertex_dof(tv)] = src[space.vertex_dof(sv)];
                break;
            }
        }
    }
    SpinorField::new(u.space_arc(), out)
}

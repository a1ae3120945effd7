//! Graph-spec documents and per-node field tables.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fem::{DiscreteSpace, DofLocation, SpinorField};
use crate::graph::{Edge, Gluing, MetricGraph, PeriodicGraph};
use crate::linalg::C64;

/// Vertex or edge identifier; numbers are accepted and kept as text.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Id {
    Text(String),
    Number(i64),
}

impl Id {
    fn key(&self) -> String {
        match self {
            Id::Text(s) => s.clone(),
            Id::Number(n) => n.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: Id,
    pub tail: Id,
    pub head: Id,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GluingSpec {
    pub generator: usize,
    pub pairs: Vec<[Id; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSpec {
    pub rank: usize,
    pub gluings: Vec<GluingSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub vertices: Vec<Id>,
    pub edges: Vec<EdgeSpec>,
    pub periodic: PeriodicSpec,
}

impl GraphSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph spec, line {}: {e}", e.line())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph spec serializes")
    }

    pub fn to_periodic(&self) -> Result<PeriodicGraph> {
        let mut index = HashMap::new();
        let mut labels = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if index.insert(v.key(), i).is_some() {
                return Err(invalid(format!("duplicate vertex id '{}'", v.key())));
            }
            labels.push(v.key());
        }
        let look = |id: &Id| {
            index.get(&id.key()).copied().ok_or_else(|| invalid(format!("unknown vertex id '{}'", id.key())))
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut seen = HashMap::new();
        for e in &self.edges {
            if seen.insert(e.id.key(), ()).is_some() {
                return Err(invalid(format!("duplicate edge id '{}'", e.id.key())));
            }
            edges.push(Edge { tail: look(&e.tail)?, head: look(&e.head)?, length: e.length });
        }
        let cell = MetricGraph::new(labels, edges)?;
        let gluings = self
            .periodic
            .gluings
            .iter()
            .map(|g| {
                let pairs = g.pairs.iter().map(|[q, p]| Ok((look(q)?, look(p)?))).collect::<Result<Vec<_>>>()?;
                Ok(Gluing { generator: g.generator, pairs })
            })
            .collect::<Result<Vec<_>>>()?;
        PeriodicGraph::new(cell, self.periodic.rank, gluings)
    }

    pub fn from_periodic(pg: &PeriodicGraph) -> Self {
        let cell = pg.cell();
        let name = |v: usize| Id::Text(cell.labels()[v].clone());
        GraphSpec {
            vertices: (0..cell.n_vertices()).map(name).collect(),
            edges: cell
                .edges()
                .iter()
                .enumerate()
                .map(|(i, e)| EdgeSpec { id: Id::Text(format!("e{i}")), tail: name(e.tail), head: name(e.head), length: e.length })
                .collect(),
            periodic: PeriodicSpec {
                rank: pg.rank(),
                gluings: pg
                    .gluings()
                    .iter()
                    .map(|g| GluingSpec { generator: g.generator, pairs: g.pairs.iter().map(|&(q, p)| [name(q), name(p)]).collect() })
                    .collect(),
            },
        }
    }
}

fn describe(loc: DofLocation) -> (&'static str, usize, f64) {
    match loc {
        DofLocation::Vertex(v) => ("vertex", v, 0.0),
        DofLocation::Node { edge, x } => ("node", edge, x),
        DofLocation::Midpoint { edge, x } => ("midpoint", edge, x),
    }
}

/// One row per DOF: `dof,component,kind,index,x,re,im`, where `index` is the
/// vertex for vertex DOFs and the edge otherwise.
pub fn write_field_csv<W: Write>(u: &SpinorField, mut w: W) -> std::io::Result<()> {
    writeln!(w, "dof,component,kind,index,x,re,im")?;
    let s = u.space();
    for (d, z) in u.values().iter().enumerate() {
        let (kind, idx, x) = describe(s.location(d));
        writeln!(w, "{d},{},{kind},{idx},{x:.12e},{:.17e},{:.17e}", s.component(d) + 1, z.re, z.im)?;
    }
    Ok(())
}

pub fn read_field_csv<R: BufRead>(space: Arc<DiscreteSpace>, r: R) -> Result<SpinorField> {
    let mut values = vec![None; space.n_dofs()];
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        if ln == 0 {
            if !line.starts_with("dof,component") {
                return Err(Error::Parse("field table: missing header".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("field table, line {}: malformed row", ln + 1));
        if cols.len() != 7 {
            return Err(bad());
        }
        let d: usize = cols[0].parse().map_err(|_| bad())?;
        let comp: usize = cols[1].parse().map_err(|_| bad())?;
        let re: f64 = cols[5].parse().map_err(|_| bad())?;
        let im: f64 = cols[6].parse().map_err(|_| bad())?;
        if d >= space.n_dofs() || comp != space.component(d) + 1 {
            return Err(Error::Parse(format!(
                "field table, line {}: DOF {d} does not match the discretization",
                ln + 1
            )));
        }
        values[d] = Some(C64::new(re, im));
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(d, v)| v.ok_or_else(|| Error::Parse(format!("field table: DOF {d} missing"))))
        .collect::<Result<Vec<_>>>()?;
    SpinorField::new(space, values)
}

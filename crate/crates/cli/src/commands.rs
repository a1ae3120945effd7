use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use qgdirac::concentration::{cell_masses, classify, concentration_profile, Label};
use qgdirac::eigen::{eigendecompose, EigenWindow};
use qgdirac::fem::{assemble_dirac, make_space};
use qgdirac::graph::{box_window, builtin, unroll, validate, LatticeShift, PeriodicGraph, Unrolled};
use qgdirac::io::{read_field_csv, write_field_csv, GraphSpec};
use qgdirac::nlde::{
    check_hypotheses, linking_diagnostics, model_by_name, solve_bound_state, HypothesisReport, LinkingOptions,
    NonlinearityModel, SampleGrid, SolveOptions,
};
use qgdirac::spectral::{compute_bands, theta_grid, verify_gap, verify_square_identity};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{csv_field, Outputs};
use crate::Failure;

pub struct Outcome {
    pub outputs: Outputs,
    pub summary: String,
    /// Set when a verification step failed; outputs are still written.
    pub verdict: Option<String>,
}

impl Outcome {
    fn new(outputs: Outputs, summary: String) -> Self {
        Self { outputs, summary, verdict: None }
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::Numerical(format!("formatting output: {e}"))
}

pub fn load_graph(cfg: &RunConfig) -> Result<PeriodicGraph, Failure> {
    match (&cfg.graph.builtin, &cfg.graph.spec) {
        (Some(name), None) => Ok(builtin(name)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let spec = GraphSpec::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            spec.to_periodic().map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
        }
        _ => Err(Failure::Usage("graph: give exactly one of builtin or spec".into())),
    }
}

fn checked_graph(cfg: &RunConfig) -> Result<PeriodicGraph, Failure> {
    let pg = load_graph(cfg)?;
    let rep = validate(&pg);
    if !rep.is_valid() {
        return Err(Failure::Usage(format!("periodic graph is invalid: {}", rep.summary())));
    }
    Ok(pg)
}

fn window(rank: usize, n: usize) -> Vec<LatticeShift> {
    let lo = -((n as i64 - 1) / 2);
    box_window(&vec![(lo, lo + n as i64 - 1); rank])
}

fn model(cfg: &RunConfig) -> Result<NonlinearityModel, Failure> {
    Ok(model_by_name(&cfg.model.name, cfg.model.b)?)
}

fn hypotheses(cfg: &RunConfig, model: &NonlinearityModel) -> HypothesisReport {
    let p = &cfg.physics;
    check_hypotheses(model.as_ref(), p.m, p.c, p.omega, &SampleGrid::default())
}

#[derive(Serialize)]
struct GapOutput<'a> {
    graph: String,
    m: f64,
    c: f64,
    h_max: f64,
    theta_points: usize,
    n_bands: usize,
    report: &'a qgdirac::spectral::GapReport,
}

fn graph_label(cfg: &RunConfig) -> String {
    match (&cfg.graph.builtin, &cfg.graph.spec) {
        (Some(b), _) => b.clone(),
        (_, Some(p)) => p.display().to_string(),
        _ => String::new(),
    }
}

pub fn bands(cfg: &RunConfig, write_bands: bool) -> Result<Outcome, Failure> {
    let pg = checked_graph(cfg)?;
    let (p, d) = (&cfg.physics, &cfg.discretization);
    let grid = theta_grid(pg.rank(), d.theta_points);
    log::info!("computing {} bands at {} quasimomenta", d.n_bands, grid.len());
    let bands = compute_bands(&pg, &grid, d.n_bands, d.h_max, p.m, p.c)?;
    let rep = verify_gap(&bands, p.m, p.c, cfg.checks.gap_tol);
    let mut out = Outputs::default();
    if write_bands {
        out.add_with("bands.csv", |w| bands.write_csv(w)).map_err(io_failure)?;
    }
    out.add_json(
        "gap.json",
        &GapOutput {
            graph: graph_label(cfg),
            m: p.m,
            c: p.c,
            h_max: d.h_max,
            theta_points: d.theta_points,
            n_bands: d.n_bands,
            report: &rep,
        },
    );
    let summary = format!(
        "gap ({:.9}, {:.9}), min |λ| = {:.9} at θ = {:?}, mc² = {}",
        rep.gap_lo, rep.gap_hi, rep.min_abs, rep.argmin_theta, rep.mc2
    );
    let mut o = Outcome::new(out, summary);
    if !rep.pass {
        o.verdict = Some(format!("spectral gap check failed: min |λ| = {:.6} < (1 − {}) mc²", rep.min_abs, rep.tolerance));
    }
    Ok(o)
}

#[derive(Serialize)]
struct SquareOutput {
    graph: String,
    m: f64,
    c: f64,
    h: f64,
    defect: f64,
    h_half: f64,
    defect_half: f64,
    observed_order: f64,
    tolerance: f64,
    pass: bool,
}

pub fn square_check(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let pg = checked_graph(cfg)?;
    let (p, h) = (&cfg.physics, cfg.discretization.h_max);
    let coarse = verify_square_identity(&*make_space(pg.cell(), h)?, p.m, p.c)?;
    let fine = verify_square_identity(&*make_space(pg.cell(), 0.5 * h)?, p.m, p.c)?;
    let order = (coarse / fine).log2();
    let pass = coarse <= cfg.checks.square_tol;
    let mut out = Outputs::default();
    out.add_json(
        "square_check.json",
        &SquareOutput {
            graph: graph_label(cfg),
            m: p.m,
            c: p.c,
            h,
            defect: coarse,
            h_half: 0.5 * h,
            defect_half: fine,
            observed_order: order,
            tolerance: cfg.checks.square_tol,
            pass,
        },
    );
    let mut o = Outcome::new(out, format!("square defect {coarse:.3e} at h = {h}, {fine:.3e} at h/2 (order {order:.2})"));
    if !pass {
        o.verdict = Some(format!("square identity defect {coarse:.3e} exceeds {}", cfg.checks.square_tol));
    }
    Ok(o)
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    graph: String,
    window_cells: usize,
    h_max: f64,
    m: f64,
    c: f64,
    forced: bool,
    hypothesis_failures: Vec<&'a str>,
    state: qgdirac::nlde::BoundStateSummary,
}

fn write_cell_masses(w: &mut Vec<u8>, un: &Unrolled, masses: &[f64], tag: Option<usize>) -> std::io::Result<()> {
    for (k, a) in un.window.iter().zip(masses) {
        match tag {
            Some(i) => writeln!(w, "{i},{k},{a:.12e}")?,
            None => writeln!(w, "{k},{a:.12e}")?,
        }
    }
    Ok(())
}

pub fn solve(cfg: &RunConfig, force: bool) -> Result<Outcome, Failure> {
    let pg = checked_graph(cfg)?;
    let model = model(cfg)?;
    let rep = hypotheses(cfg, &model);
    let failures: Vec<&str> = rep.failures().iter().map(|r| r.name.as_str()).collect();
    if !failures.is_empty() {
        let detail: Vec<String> = rep.failures().iter().map(|r| format!("{} ({})", r.name, r.detail)).collect();
        if !force {
            return Err(Failure::Usage(format!(
                "model '{}' violates hypotheses: {}; pass --force to solve anyway",
                cfg.model.name,
                detail.join("; ")
            )));
        }
        log::warn!("solving despite hypothesis violations: {}", detail.join("; "));
    }
    let (p, d, s) = (&cfg.physics, &cfg.discretization, &cfg.solver);
    let opts = SolveOptions {
        m: p.m,
        c: p.c,
        h_max: d.h_max,
        tol: s.tol,
        id_tol: s.id_tol,
        max_newton: s.max_newton,
        spectral_margin: s.spectral_margin,
        center: None,
    };
    let win = window(pg.rank(), d.window_cells);
    log::info!("solving on {} cells", win.len());
    let st = solve_bound_state(&pg, &win, p.omega, model, &opts)?;
    let sum = st.summary();
    let mut out = Outputs::default();
    out.add_with("field.csv", |w| write_field_csv(&st.field, w)).map_err(io_failure)?;
    let masses = cell_masses(&st.field, &st.unrolled);
    out.add_with("cell_masses.csv", |w| {
        writeln!(w, "k,a_k")?;
        write_cell_masses(w, &st.unrolled, &masses, None)
    })
    .map_err(io_failure)?;
    let summary = format!(
        "residual {:.3e}, Φ = {:.12}, ∫F̂ = {:.12}, decay rate {:.6}, {} Newton steps",
        sum.residual_norm, sum.action_value, sum.fhat_integral, sum.decay_rate, sum.iterations
    );
    out.add_json(
        "bound_state.json",
        &SolveOutput {
            graph: graph_label(cfg),
            window_cells: d.window_cells,
            h_max: d.h_max,
            m: p.m,
            c: p.c,
            forced: force && !failures.is_empty(),
            hypothesis_failures: failures,
            state: sum,
        },
    );
    Ok(Outcome::new(out, summary))
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    seed: u64,
    hypotheses: &'a HypothesisReport,
    linking_cells: usize,
    linking: &'a qgdirac::nlde::LinkingReport,
}

pub fn check(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let pg = checked_graph(cfg)?;
    let model = model(cfg)?;
    let rep = hypotheses(cfg, &model);
    let (p, ch) = (&cfg.physics, &cfg.checks);
    let un = unroll(&pg, &window(pg.rank(), ch.linking_cells))?;
    let space = make_space(&un.graph, cfg.discretization.h_max)?;
    let (h, mass) = assemble_dirac(&space, p.m, p.c)?;
    let spec = eigendecompose(&h, &mass, EigenWindow::All)?;
    let lopts = LinkingOptions { samples: ch.linking_samples, seed: cfg.seed, m: p.m, c: p.c, level: ch.zeta_level };
    let link = linking_diagnostics(&spec, &space, model.as_ref(), p.omega, &ch.rho_grid, &lopts)?;

    let mut out = Outputs::default();
    out.add_with("hypotheses.csv", |w| {
        writeln!(w, "name,pass,value,detail")?;
        for r in &rep.rows {
            writeln!(w, "{},{},{:.12e},{}", r.name, r.pass, r.value, csv_field(&r.detail))?;
        }
        Ok(())
    })
    .map_err(io_failure)?;
    out.add_json("check.json", &CheckOutput { seed: cfg.seed, hypotheses: &rep, linking_cells: ch.linking_cells, linking: &link });

    let mut problems: Vec<String> = rep.failures().iter().map(|r| format!("{}: {}", r.name, r.detail)).collect();
    if !(link.varsigma > 0.0) {
        problems.push(format!("no positive sphere level (ς = {:.3e})", link.varsigma));
    }
    if link.r1.is_none() || link.boundary_max > 0.0 {
        problems.push("no linking radius with Φ ≤ 0 on the boundary".into());
    }
    if link.zeta_violations > 0 {
        problems.push(format!("{} samples violate the ζ bound", link.zeta_violations));
    }
    let passed = rep.rows.iter().filter(|r| r.pass).count();
    let summary = format!(
        "{passed}/{} hypothesis rows pass; ς = {:.6e} at ρ = {}, ζ checked on {} samples",
        rep.rows.len(),
        link.varsigma,
        link.best_rho,
        link.zeta_checked
    );
    let mut o = Outcome::new(out, summary);
    if !problems.is_empty() {
        o.verdict = Some(problems.join("; "));
    }
    Ok(o)
}

#[derive(Serialize)]
struct ProfileRow {
    field: String,
    total_mass: f64,
    sup_error: f64,
}

#[derive(Serialize)]
struct DiagnoseOutput {
    fields: Vec<ProfileRow>,
    radii: Vec<f64>,
    classification: Option<qgdirac::concentration::Classification>,
}

pub fn diagnose(cfg: &RunConfig, fields: &[PathBuf]) -> Result<Outcome, Failure> {
    if fields.is_empty() {
        return Err(Failure::Usage("diagnose needs at least one field file".into()));
    }
    let pg = checked_graph(cfg)?;
    let un = unroll(&pg, &window(pg.rank(), cfg.discretization.window_cells))?;
    let space = make_space(&un.graph, cfg.discretization.h_max)?;
    let read = |path: &Path| {
        let f = File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        read_field_csv(space.clone(), BufReader::new(f)).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    };
    let seq = fields.iter().map(|p| read(p)).collect::<Result<Vec<_>, _>>()?;

    let dg = &cfg.diagnostics;
    let mut rows = Vec::new();
    let mut rho = b"field,R,rho\n".to_vec();
    let mut cells = b"field,k,a_k\n".to_vec();
    for (i, (u, path)) in seq.iter().zip(fields).enumerate() {
        let prof = concentration_profile(u, &un, &dg.radii)?;
        for (r, v) in prof.radii.iter().zip(&prof.rho) {
            writeln!(rho, "{i},{r:.12e},{v:.12e}").map_err(io_failure)?;
        }
        let masses: Vec<f64> = prof.cell_masses.iter().map(|x| x.1).collect();
        write_cell_masses(&mut cells, &un, &masses, Some(i)).map_err(io_failure)?;
        rows.push(ProfileRow { field: path.display().to_string(), total_mass: prof.total_mass, sup_error: prof.sup_error });
    }
    let class = if seq.len() >= 3 { Some(classify(&seq, &un, dg.radius, dg.eps)?) } else { None };
    let summary = match &class {
        Some(c) => {
            let shifts: Vec<String> = c.shifts.iter().map(|k| k.to_string()).collect();
            let mut s = format!("{:?}: τ = {:.6}, mass limit {:.6}, shifts [{}]", c.label, c.tau, c.mass_limit, shifts.join(", "));
            if let Some(sp) = &c.split {
                s.push_str(&format!(", α = {:.6}, β = {:.6}", sp.alpha, sp.beta));
            }
            s
        }
        None => format!("profiles for {} field(s); classification needs at least three", seq.len()),
    };
    if let Some(c) = &class {
        if c.label == Label::Inconclusive {
            log::warn!("classification is inconclusive within eps = {}", dg.eps);
        }
    }
    let mut out = Outputs::default();
    out.add("profiles.csv", rho);
    out.add("cell_masses.csv", cells);
    out.add_json("diagnose.json", &DiagnoseOutput { fields: rows, radii: dg.radii.clone(), classification: class });
    Ok(Outcome::new(out, summary))
}

pub fn graph_validate(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let pg = load_graph(cfg)?;
    let rep = validate(&pg);
    let mut out = Outputs::default();
    out.add_json("validation.json", &rep);
    let summary = if rep.is_valid() {
        format!("valid: rank {}, {} vertices, {} edges per cell", pg.rank(), pg.cell().n_vertices(), pg.cell().n_edges())
    } else {
        format!("invalid: {}", rep.summary())
    };
    let mut o = Outcome::new(out, summary.clone());
    if !rep.is_valid() {
        o.verdict = Some(summary);
    }
    Ok(o)
}

pub fn graph_emit(cfg: &RunConfig) -> Result<String, Failure> {
    let pg = load_graph(cfg)?;
    Ok(GraphSpec::from_periodic(&pg).to_json())
}

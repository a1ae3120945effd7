use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub graph: GraphSource,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSource {
    pub builtin: Option<String>,
    /// JSON graph spec; relative paths resolve against the config file.
    pub spec: Option<PathBuf>,
}

impl Default for GraphSource {
    fn default() -> Self {
        Self { builtin: Some("chain".into()), spec: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub m: f64,
    pub c: f64,
    pub omega: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self { m: 1.0, c: 1.0, omega: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretization {
    pub h_max: f64,
    /// Quasimomentum points per lattice direction.
    pub theta_points: usize,
    pub n_bands: usize,
    /// Cells per lattice direction of the truncated window.
    pub window_cells: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self { h_max: 1.0 / 16.0, theta_points: 64, n_bands: 4, window_cells: 41 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Model {
    pub name: String,
    pub b: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self { name: "saturable".into(), b: 3.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub tol: f64,
    pub id_tol: f64,
    pub max_newton: usize,
    pub spectral_margin: f64,
}

impl Default for Solver {
    fn default() -> Self {
        Self { tol: 1e-10, id_tol: 1e-6, max_newton: 60, spectral_margin: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// Relative slack below mc² tolerated by the gap check.
    pub gap_tol: f64,
    pub square_tol: f64,
    pub linking_cells: usize,
    pub linking_samples: usize,
    pub rho_grid: Vec<f64>,
    pub zeta_level: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            gap_tol: 5e-3,
            square_tol: 5e-3,
            linking_cells: 5,
            linking_samples: 64,
            rho_grid: vec![0.05, 0.1, 0.2, 0.4],
            zeta_level: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Diagnostics {
    pub radii: Vec<f64>,
    pub radius: f64,
    pub eps: f64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self { radii: vec![0.5, 1.0, 2.0, 4.0, 8.0], radius: 3.0, eps: 0.1 }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            output_dir: None,
            graph: GraphSource::default(),
            physics: Physics::default(),
            discretization: Discretization::default(),
            model: Model::default(),
            solver: Solver::default(),
            checks: Checks::default(),
            diagnostics: Diagnostics::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, String> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| format!("{}: {e}", origin.display()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(format!(
                "{}: unsupported config version {} (expected {CONFIG_VERSION})",
                origin.display(),
                cfg.version
            ));
        }
        if let Some(spec) = &cfg.graph.spec {
            if spec.is_relative() {
                let base = origin.parent().unwrap_or(Path::new("."));
                cfg.graph.spec = Some(base.join(spec));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text, path)
    }

    /// Checks the invariants that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), String> {
        let p = &self.physics;
        let d = &self.discretization;
        let s = &self.solver;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        positive("physics.m", p.m)?;
        positive("physics.c", p.c)?;
        let mc2 = p.m * p.c * p.c;
        if !(p.omega.abs() < mc2) {
            return Err(format!("physics.omega must satisfy |ω| < mc² = {mc2}, got {}", p.omega));
        }
        positive("discretization.h_max", d.h_max)?;
        positive("solver.tol", s.tol)?;
        positive("solver.id_tol", s.id_tol)?;
        positive("checks.gap_tol", self.checks.gap_tol)?;
        positive("checks.square_tol", self.checks.square_tol)?;
        positive("diagnostics.radius", self.diagnostics.radius)?;
        positive("diagnostics.eps", self.diagnostics.eps)?;
        if s.spectral_margin < 0.0 {
            return Err("solver.spectral_margin must be non-negative".into());
        }
        if d.theta_points == 0 || d.n_bands == 0 || d.window_cells == 0 {
            return Err("discretization.theta_points, n_bands and window_cells must be at least 1".into());
        }
        match (&self.graph.builtin, &self.graph.spec) {
            (Some(_), Some(_)) => Err("graph: give either builtin or spec, not both".into()),
            (None, None) => Err("graph: one of builtin or spec is required".into()),
            _ => Ok(()),
        }
    }
}

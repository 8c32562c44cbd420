//! Scenario files.
//!
//! A config is a TOML document with optional top-level `seed` and
//! `output_dir` keys and one `[[scenario]]` table per run. See
//! `docs/config.md` for the full schema.

use std::fmt;
use std::path::{Path, PathBuf};

use oblique::ambient::{DenseOperator, DenseTerm, GridHamiltonian, Well};
use oblique::basis::{BasisFamily, DerivativeScheme, FrameSource, Grid, Law};
use oblique::curvature::RicciForm;
use oblique::propagators::{HamiltonianArgument, Observers, PropagatorKind, Trajectory};
use oblique::tensor_core::{c, CMat};
use serde::Deserialize;

pub const DEFAULT_SEED: u64 = 42;

/// Problem with a config file, reported with exit code 2.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub file: PathBuf,
    /// Dotted path of the offending field, when known.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error in {}", self.file.display())?;
        if let Some(field) = &self.field {
            write!(f, " at `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: Option<u64>,
    /// Relative paths resolve against the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub family: BasisFamily,
    pub task: Task,
    #[serde(default)]
    pub seed: Option<u64>,
    /// One law per family parameter; defaults to `R = t` for one-parameter families.
    #[serde(default)]
    pub trajectory: Option<Vec<Law>>,
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// Lowest generalized eigenstates of `H` at the start time.
    #[default]
    Eigen,
    /// Seeded random states, orthonormalized in the metric.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMeasure {
    /// Largest `‖𝒮 − I‖_∞` over the run.
    #[default]
    Orthonormality,
    /// `max |C(dt) − C_ref|` at `t_final`, the reference using `dt_min / 4`.
    Reference,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    VerifyIdentities {
        #[serde(default = "twenty")]
        points: usize,
        #[serde(default = "fd_step")]
        fd_step: f64,
        #[serde(default = "tight")]
        tolerance: f64,
        #[serde(default = "loose")]
        fd_tolerance: f64,
    },
    Propagate {
        kind: PropagatorKind,
        n_steps: usize,
        #[serde(default = "one")]
        n_states: usize,
        #[serde(default)]
        initial: Initial,
        #[serde(default)]
        t0: f64,
        #[serde(default)]
        observers: Observers,
        #[serde(default)]
        max_ortho_deviation: Option<f64>,
    },
    DtSweep {
        kind: PropagatorKind,
        #[serde(default = "five")]
        halvings: usize,
        #[serde(default)]
        t_final: Option<f64>,
        #[serde(default)]
        measure: SweepMeasure,
        #[serde(default = "one")]
        n_states: usize,
        #[serde(default)]
        initial: Initial,
        #[serde(default)]
        min_order: Option<f64>,
        #[serde(default = "min_r_squared")]
        min_r_squared: f64,
    },
    Curvature {
        #[serde(default)]
        points: Option<Vec<Vec<f64>>>,
        #[serde(default = "five")]
        random_points: usize,
        #[serde(default)]
        scheme: DerivativeScheme,
        #[serde(default = "curvature_tol")]
        tolerance: f64,
        /// Seeded random basis changes under which the general Ricci formula is re-checked.
        #[serde(default)]
        gauges: usize,
    },
    Chern {
        #[serde(default = "n_theta")]
        n0: usize,
        #[serde(default = "n_phi")]
        n1: usize,
        #[serde(default = "theta_range")]
        range0: [f64; 2],
        #[serde(default = "phi_range")]
        range1: [f64; 2],
        #[serde(default)]
        scheme: DerivativeScheme,
        #[serde(default = "trace_form")]
        form: RicciForm,
        #[serde(default = "chern_tol")]
        tolerance: f64,
        #[serde(default)]
        expected: Option<f64>,
    },
    Forces {
        #[serde(default)]
        points: Option<Vec<Vec<f64>>>,
        #[serde(default = "three")]
        random_points: usize,
        #[serde(default)]
        state: usize,
        #[serde(default = "fd_step")]
        fd_step: f64,
        #[serde(default = "loose")]
        tolerance: f64,
    },
    CompareDg {
        #[serde(default = "origin")]
        times: Vec<f64>,
        #[serde(default = "fd_step")]
        dt_fd: f64,
        #[serde(default)]
        tolerance: Option<f64>,
    },
}

fn one() -> usize {
    1
}
fn three() -> usize {
    3
}
fn five() -> usize {
    5
}
fn twenty() -> usize {
    20
}
fn fd_step() -> f64 {
    1e-4
}
fn tight() -> f64 {
    1e-10
}
fn loose() -> f64 {
    1e-6
}
fn curvature_tol() -> f64 {
    1e-8
}
fn chern_tol() -> f64 {
    1e-3
}
fn min_r_squared() -> f64 {
    0.99
}
fn n_theta() -> usize {
    64
}
fn n_phi() -> usize {
    128
}
fn theta_range() -> [f64; 2] {
    [0.0, std::f64::consts::PI]
}
fn phi_range() -> [f64; 2] {
    [0.0, 2.0 * std::f64::consts::PI]
}
fn trace_form() -> RicciForm {
    RicciForm::Trace
}
fn origin() -> Vec<f64> {
    vec![0.0]
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::VerifyIdentities { .. } => "verify_identities",
            Task::Propagate { .. } => "propagate",
            Task::DtSweep { .. } => "dt_sweep",
            Task::Curvature { .. } => "curvature",
            Task::Chern { .. } => "chern",
            Task::Forces { .. } => "forces",
            Task::CompareDg { .. } => "compare_dg",
        }
    }

    fn supports(&self, format: Format) -> bool {
        format == Format::Json || matches!(self, Task::Propagate { .. } | Task::DtSweep { .. })
    }

    fn default_format(&self) -> Format {
        match self {
            Task::Propagate { .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Entry of a dense matrix: a real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseTermSpec {
    pub matrix: Vec<Vec<Entry>>,
    pub law: Law,
    #[serde(default)]
    pub coord: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Grid {
        #[serde(default)]
        grid: Grid,
        #[serde(default = "unit_mass")]
        mass: f64,
        wells: Vec<Well>,
    },
    Dense {
        base: Vec<Vec<Entry>>,
        #[serde(default)]
        terms: Vec<DenseTermSpec>,
    },
}

fn unit_mass() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    #[serde(default = "trajectory_argument")]
    pub argument: HamiltonianArgument,
    pub operator: OperatorSpec,
}

fn trajectory_argument() -> HamiltonianArgument {
    HamiltonianArgument::Trajectory
}

fn matrix(rows: &[Vec<Entry>]) -> Result<CMat, String> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(format!("matrix must be square and non-empty, got {n} rows"));
    }
    Ok(CMat::from_fn(n, n, |i, j| match rows[i][j] {
        Entry::Real(x) => c(x, 0.0),
        Entry::Complex([re, im]) => c(re, im),
    }))
}

/// Ambient operator built from its config description, either kind behind one trait object.
pub enum BuiltOperator {
    Grid(GridHamiltonian),
    Dense(DenseOperator),
}

impl BuiltOperator {
    pub fn into_arc(self) -> std::sync::Arc<dyn oblique::ambient::AmbientOperator> {
        match self {
            BuiltOperator::Grid(g) => std::sync::Arc::new(g),
            BuiltOperator::Dense(d) => std::sync::Arc::new(d),
        }
    }
}

impl OperatorSpec {
    pub fn build(&self, n_coords: usize) -> Result<BuiltOperator, String> {
        match self {
            OperatorSpec::Grid { grid, mass, wells } => Ok(BuiltOperator::Grid(GridHamiltonian {
                grid: *grid,
                mass: *mass,
                wells: wells.clone(),
                n_coords,
            })),
            OperatorSpec::Dense { base, terms } => {
                let base = matrix(base)?;
                let terms = terms
                    .iter()
                    .map(|t| {
                        Ok(DenseTerm {
                            matrix: matrix(&t.matrix)?,
                            law: t.law.clone(),
                            coord: t.coord,
                        })
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                DenseOperator::new(base, terms, n_coords)
                    .map(BuiltOperator::Dense)
                    .map_err(|e| e.to_string())
            }
        }
    }

    fn ambient_dim(&self) -> usize {
        match self {
            OperatorSpec::Grid { grid, .. } => grid.points,
            OperatorSpec::Dense { base, .. } => base.len(),
        }
    }
}

impl HamiltonianSpec {
    /// Coordinate count the operator is evaluated at.
    pub fn n_coords(&self, family: &BasisFamily) -> usize {
        match self.argument {
            HamiltonianArgument::Time => 1,
            HamiltonianArgument::Trajectory => family.n_params(),
        }
    }
}

impl Scenario {
    pub fn trajectory(&self) -> Option<Trajectory> {
        match &self.trajectory {
            Some(laws) => Some(Trajectory { laws: laws.clone() }),
            None if self.family.n_params() == 1 => Some(Trajectory::time()),
            None => None,
        }
    }

    pub fn format(&self) -> Format {
        self.output
            .as_ref()
            .and_then(|o| o.format)
            .unwrap_or_else(|| self.task.default_format())
    }

    /// Output file relative to the output directory.
    pub fn output_path(&self) -> PathBuf {
        self.output
            .as_ref()
            .and_then(|o| o.path.clone())
            .unwrap_or_else(|| PathBuf::from(format!("{}.{}", self.name, self.format().extension())))
    }
}

fn field_error(file: &Path, field: String, message: impl Into<String>) -> ConfigError {
    ConfigError {
        file: file.to_path_buf(),
        field: Some(field),
        message: message.into(),
    }
}

fn positive(file: &Path, field: String, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(field_error(file, field, format!("must be positive and finite, got {value}")))
    }
}

fn check_points(file: &Path, field: String, points: &Option<Vec<Vec<f64>>>, p: usize) -> Result<(), ConfigError> {
    if let Some(points) = points {
        for (k, point) in points.iter().enumerate() {
            if point.len() != p {
                return Err(field_error(
                    file,
                    format!("{field}[{k}]"),
                    format!("expected {p} coordinates, got {}", point.len()),
                ));
            }
        }
    }
    Ok(())
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: path.to_path_buf(),
            field: None,
            message: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| ConfigError {
            file: path.to_path_buf(),
            field: None,
            message: e.to_string().trim_end().to_string(),
        })?;
        config.validate(path)?;
        Ok(config)
    }

    pub fn seed_for(&self, scenario: &Scenario) -> u64 {
        scenario.seed.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    fn validate(&self, file: &Path) -> Result<(), ConfigError> {
        if self.scenarios.is_empty() {
            return Err(field_error(file, "scenario".into(), "at least one [[scenario]] table is required"));
        }
        let mut names = std::collections::HashSet::new();
        for (k, s) in self.scenarios.iter().enumerate() {
            let at = |field: &str| format!("scenario[{k}].{field}");
            if s.name.is_empty() {
                return Err(field_error(file, at("name"), "must not be empty"));
            }
            if !names.insert(s.name.clone()) {
                return Err(field_error(file, at("name"), format!("duplicate scenario name `{}`", s.name)));
            }
            let p = s.family.n_params();
            let format = s.format();
            if !s.task.supports(format) {
                return Err(field_error(
                    file,
                    at("output.format"),
                    format!("task {} only writes json", s.task.name()),
                ));
            }
            if let Some(laws) = &s.trajectory {
                if laws.len() != p {
                    return Err(field_error(
                        file,
                        at("trajectory"),
                        format!("family has {p} parameters but {} laws were given", laws.len()),
                    ));
                }
            }
            if let Some(h) = &s.hamiltonian {
                if h.operator.ambient_dim() != s.family.ambient_dim() {
                    return Err(field_error(
                        file,
                        at("hamiltonian.operator"),
                        format!(
                            "operator acts on dimension {} but the family's ambient dimension is {}",
                            h.operator.ambient_dim(),
                            s.family.ambient_dim()
                        ),
                    ));
                }
                h.operator
                    .build(h.n_coords(&s.family))
                    .map_err(|m| field_error(file, at("hamiltonian.operator"), m))?;
            }
            let needs_trajectory = matches!(s.task, Task::Propagate { .. } | Task::DtSweep { .. } | Task::CompareDg { .. });
            if needs_trajectory && s.trajectory().is_none() {
                return Err(field_error(
                    file,
                    at("trajectory"),
                    format!("required for {} on a {p}-parameter family", s.task.name()),
                ));
            }
            let dim = s.family.dim();
            match &s.task {
                Task::VerifyIdentities {
                    points,
                    fd_step,
                    tolerance,
                    fd_tolerance,
                } => {
                    if *points == 0 {
                        return Err(field_error(file, at("task.points"), "must be at least 1"));
                    }
                    positive(file, at("task.fd_step"), *fd_step)?;
                    positive(file, at("task.tolerance"), *tolerance)?;
                    positive(file, at("task.fd_tolerance"), *fd_tolerance)?;
                }
                Task::Propagate {
                    kind,
                    n_steps,
                    n_states,
                    max_ortho_deviation,
                    ..
                } => {
                    positive(file, at("task.kind.dt"), kind.dt)?;
                    if *n_steps == 0 {
                        return Err(field_error(file, at("task.n_steps"), "must be at least 1"));
                    }
                    if *n_states == 0 || *n_states > dim {
                        return Err(field_error(file, at("task.n_states"), format!("must lie in 1..={dim}")));
                    }
                    if let Some(tol) = max_ortho_deviation {
                        positive(file, at("task.max_ortho_deviation"), *tol)?;
                    }
                }
                Task::DtSweep {
                    kind,
                    halvings,
                    t_final,
                    measure,
                    n_states,
                    min_r_squared,
                    ..
                } => {
                    positive(file, at("task.kind.dt"), kind.dt)?;
                    if *halvings == 0 {
                        return Err(field_error(file, at("task.halvings"), "must be at least 1"));
                    }
                    if *n_states == 0 || *n_states > dim {
                        return Err(field_error(file, at("task.n_states"), format!("must lie in 1..={dim}")));
                    }
                    if !(0.0..=1.0).contains(min_r_squared) {
                        return Err(field_error(file, at("task.min_r_squared"), "must lie in [0, 1]"));
                    }
                    match t_final {
                        Some(t) => {
                            positive(file, at("task.t_final"), *t)?;
                            let steps = t / kind.dt;
                            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                                return Err(field_error(file, at("task.t_final"), "must be a whole multiple of kind.dt"));
                            }
                        }
                        None if *measure == SweepMeasure::Reference => {
                            return Err(field_error(file, at("task.t_final"), "required for the reference measure"));
                        }
                        None => {}
                    }
                }
                Task::Curvature {
                    points, tolerance, ..
                } => {
                    if p < 2 {
                        return Err(field_error(file, at("task"), format!("curvature needs at least 2 parameters, family has {p}")));
                    }
                    check_points(file, at("task.points"), points, p)?;
                    positive(file, at("task.tolerance"), *tolerance)?;
                }
                Task::Chern {
                    n0,
                    n1,
                    range0,
                    range1,
                    tolerance,
                    ..
                } => {
                    if p < 2 {
                        return Err(field_error(file, at("task"), format!("chern needs at least 2 parameters, family has {p}")));
                    }
                    if *n0 == 0 || *n1 == 0 {
                        return Err(field_error(file, at("task.n0"), "grid sizes must be at least 1"));
                    }
                    if !(range0[1] > range0[0]) || !(range1[1] > range1[0]) {
                        return Err(field_error(file, at("task.range0"), "ranges must be increasing"));
                    }
                    positive(file, at("task.tolerance"), *tolerance)?;
                }
                Task::Forces {
                    points,
                    state,
                    fd_step,
                    tolerance,
                    ..
                } => {
                    check_points(file, at("task.points"), points, p)?;
                    if *state >= dim {
                        return Err(field_error(file, at("task.state"), format!("must be below the basis size {dim}")));
                    }
                    if let Some(h) = &s.hamiltonian {
                        if h.argument != HamiltonianArgument::Trajectory {
                            return Err(field_error(
                                file,
                                at("hamiltonian.argument"),
                                "forces differentiate with respect to the family parameters, use \"trajectory\"",
                            ));
                        }
                    }
                    positive(file, at("task.fd_step"), *fd_step)?;
                    positive(file, at("task.tolerance"), *tolerance)?;
                }
                Task::CompareDg { times, dt_fd, tolerance } => {
                    if times.is_empty() {
                        return Err(field_error(file, at("task.times"), "must not be empty"));
                    }
                    positive(file, at("task.dt_fd"), *dt_fd)?;
                    if let Some(tol) = tolerance {
                        positive(file, at("task.tolerance"), *tol)?;
                    }
                }
            }
        }
        Ok(())
    }
}

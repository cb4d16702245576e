use std::fmt;
use std::path::{Path, PathBuf};

use oseen_core::decay_lab::{RateInputs, RaySpec, TemporalTarget};
use oseen_core::potentials::{InitialField, SourceField};
use oseen_core::solver::{BoundaryData, ProblemSpec};
use serde::{Deserialize, Serialize};

/// Version of the configuration and artifact layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Overrides the root against which relative output directories resolve.
pub const OUTPUT_ROOT_VAR: &str = "OSEEN_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Experiments executed concurrently.
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Data, obstacle, mesh level and time grid.
    #[serde(default = "default_problem")]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub rates: RateInputs,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
}

fn one() -> usize {
    1
}

/// A small problem with compact force, compact initial swirl and a
/// quickly decaying uniform boundary velocity.
pub fn default_problem() -> ProblemSpec {
    use oseen_core::integral_equation::manufactured::{SpatialProfile, TemporalProfile};
    let mut spec = ProblemSpec::zero(1.0, 1, 0.2, 4.0);
    spec.source = SourceField::CompactBump { center: [-2.5, 0.0, 0.0], radius: 1.0, horizon: 1.0, amplitude: [1.0, 0.5, 0.0] };
    spec.initial = InitialField::CompactBump { center: [0.0, 0.0, 2.5], radius: 1.0, axis: [0.0, 1.0, 0.0] };
    spec.boundary = BoundaryData::Separable {
        terms: vec![(SpatialProfile::Uniform { c: [0.5, 0.0, 0.0] }, TemporalProfile::PolyExp { power: 1, rate: 1.0 })],
    };
    spec
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Kernel identities.
    pub kernel: f64,
    /// Added to predicted spatial exponents.
    pub spatial: f64,
    /// Added to predicted temporal exponents.
    pub temporal: f64,
    /// Added to the predicted density tail exponent.
    pub density_tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { kernel: 1e-6, spatial: 0.15, temporal: 0.1, density_tail: 0.2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Velocity,
    Volume,
    Initial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalFit {
    pub target: TemporalTarget,
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
    /// Required for the full velocity; defaults to the compact-data rate of
    /// the potential otherwise.
    #[serde(default)]
    pub predicted: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    KernelCheck {},
    PotentialsCheck {},
    Solve {
        #[serde(default)]
        checkpoint_every: Option<usize>,
        /// Lower tail times for the density tail fit; used when the problem
        /// declares a boundary tail rate.
        #[serde(default)]
        tail_times: Vec<f64>,
    },
    DecayFit {
        field: FieldKind,
        #[serde(default)]
        order: u8,
        /// Radius of a ball containing the obstacle and the data supports.
        enclosing_radius: f64,
        #[serde(default)]
        rays: Vec<RaySpec>,
        #[serde(default)]
        temporal: Option<TemporalFit>,
    },
    Rates {},
    #[serde(alias = "lemma110")]
    ExponentSums {
        #[serde(default = "default_grid")]
        grid: usize,
    },
}

fn default_grid() -> usize {
    1000
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::KernelCheck {} => "kernel-check",
            Experiment::PotentialsCheck {} => "potentials-check",
            Experiment::Solve { .. } => "solve",
            Experiment::DecayFit { .. } => "decay-fit",
            Experiment::Rates {} => "rates",
            Experiment::ExponentSums { .. } => "exponent-sums",
        }
    }

    pub fn needs_solution(&self) -> bool {
        matches!(self, Experiment::Solve { .. } | Experiment::DecayFit { field: FieldKind::Velocity, .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// Unreadable file or output location.
    Path,
    /// Malformed document or a field outside its admissible range.
    Schema,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Dotted field path, e.g. `experiments[2].rays[0].r_min`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::Path => "path",
            ViolationKind::Schema => "schema",
        };
        write!(f, "{kind} error at {}: {}", self.field, self.message)
    }
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation { kind: ViolationKind::Schema, field: field.into(), message: message.into() }
}

/// Reads and parses a configuration; every failure is reported as a list
/// of violations.
pub fn load(path: &Path) -> Result<RunConfig, Vec<Violation>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![Violation { kind: ViolationKind::Path, field: path.display().to_string(), message: e.to_string() }])?;
    serde_json::from_str(&text).map_err(|e| vec![schema(format!("line {} column {}", e.line(), e.column()), e.to_string())])
}

impl RunConfig {
    /// The output directory after applying the root override.
    pub fn resolved_output(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Every schema and domain violation, plus a path violation when the
    /// output directory cannot be created.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(schema("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version)));
        }
        if self.workers == 0 {
            out.push(schema("workers", "at least one worker is needed"));
        }
        let t = &self.tolerances;
        for (name, v) in
            [("kernel", t.kernel), ("spatial", t.spatial), ("temporal", t.temporal), ("density_tail", t.density_tail)]
        {
            if !(v >= 0.0) || !v.is_finite() {
                out.push(schema(format!("tolerances.{name}"), "must be a non-negative number"));
            }
        }
        if let Err(e) = self.problem.validate() {
            out.push(schema("problem", e.to_string()));
        }
        let nonlinear = self.experiments.iter().any(|e| matches!(e, Experiment::Rates {}));
        if nonlinear {
            for v in self.rates.violations(true) {
                out.push(schema("rates", v));
            }
        }
        for (i, e) in self.experiments.iter().enumerate() {
            experiment_violations(&format!("experiments[{i}]"), e, &mut out);
        }
        if self.output_dir.as_os_str().is_empty() {
            out.push(Violation {
                kind: ViolationKind::Path,
                field: "output_dir".into(),
                message: "output directory is empty".into(),
            });
        } else {
            let resolved = self.resolved_output();
            let parent = resolved.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !(resolved.is_dir() || (!resolved.exists() && parent.is_dir())) {
                out.push(Violation {
                    kind: ViolationKind::Path,
                    field: "output_dir".into(),
                    message: format!("{} is not a directory and its parent does not exist", resolved.display()),
                });
            }
        }
        out
    }
}

fn experiment_violations(at: &str, e: &Experiment, out: &mut Vec<Violation>) {
    match e {
        Experiment::Solve { checkpoint_every, tail_times } => {
            if *checkpoint_every == Some(0) {
                out.push(schema(format!("{at}.checkpoint_every"), "must be positive"));
            }
            if tail_times.iter().any(|t| !(*t >= 0.0)) {
                out.push(schema(format!("{at}.tail_times"), "times must be non-negative"));
            }
        }
        Experiment::DecayFit { field, order, enclosing_radius, rays, temporal } => {
            if *order > 1 {
                out.push(schema(format!("{at}.order"), "derivative order must be 0 or 1"));
            }
            if !(*enclosing_radius > 0.0) {
                out.push(schema(format!("{at}.enclosing_radius"), "must be positive"));
            }
            if rays.is_empty() && temporal.is_none() {
                out.push(schema(at.to_string(), "needs at least one ray or a temporal fit"));
            }
            for (j, r) in rays.iter().enumerate() {
                if let Err(err) = r.validate(*enclosing_radius) {
                    out.push(schema(format!("{at}.rays[{j}]"), err.to_string()));
                }
            }
            if let Some(tf) = temporal {
                if !(tf.t_min > 0.0) || !(tf.t_max >= 10.0 * tf.t_min) || !tf.t_max.is_finite() {
                    out.push(schema(format!("{at}.temporal"), "times must satisfy 0 < t_min and t_max >= 10 t_min"));
                }
                if tf.count < 5 {
                    out.push(schema(format!("{at}.temporal.count"), "at least 5 times are needed"));
                }
                if *field == FieldKind::Velocity && tf.predicted.is_none() {
                    out.push(schema(format!("{at}.temporal.predicted"), "required for the full velocity"));
                }
            }
        }
        Experiment::ExponentSums { grid } => {
            if *grid == 0 {
                out.push(schema(format!("{at}.grid"), "must be positive"));
            }
        }
        Experiment::KernelCheck {} | Experiment::PotentialsCheck {} | Experiment::Rates {} => {}
    }
}

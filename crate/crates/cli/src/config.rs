//! Experiment configuration: a single JSON document, validated up front.

use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use fep_core::estimators::{default_regularity_delta, HydroSettings};
use fep_core::lattice::ExclusionConfig;
use fep_core::profile::ProfileSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Pde,
    HydroCompare,
    Transience,
    MeasureTable,
    Verify,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Pde => "pde",
            ExperimentKind::HydroCompare => "hydro-compare",
            ExperimentKind::Transience => "transience",
            ExperimentKind::MeasureTable => "measure-table",
            ExperimentKind::Verify => "verify",
        };
        f.write_str(s)
    }
}

/// Raw document as written by the user. Every field is optional here; the
/// validated form fills defaults per experiment kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub kind: Option<ExperimentKind>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "N_list")]
    pub n_list: Option<Vec<usize>>,
    pub profile: Option<ProfileSpec>,
    /// Initial configuration as a 0/1 string (simulate).
    pub initial: Option<String>,
    pub t_end: Option<f64>,
    pub replicas: Option<usize>,
    pub block_ell: Option<usize>,
    pub grid_m: Option<usize>,
    pub rho: Option<f64>,
    pub ell: Option<usize>,
    pub ell_list: Option<Vec<usize>>,
    pub j: Option<usize>,
    #[serde(rename = "k")]
    pub particles: Option<usize>,
    pub delta: Option<f64>,
    pub mc_samples: Option<usize>,
    pub t_max: Option<f64>,
    pub snapshot_every: Option<usize>,
    pub allow_subcritical: Option<bool>,
    pub master_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Fields(Vec<FieldError>),
}

impl ConfigError {
    pub fn fields(&self) -> &[FieldError] {
        match self {
            ConfigError::Fields(f) => f,
            ConfigError::Json(_) => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate {
        #[serde(rename = "N")]
        n: usize,
        initial: Option<String>,
        profile: ProfileSpec,
        t_end: f64,
        replicas: usize,
        allow_subcritical: bool,
    },
    Pde {
        profile: ProfileSpec,
        t_end: f64,
        grid_m: usize,
        snapshot_every: usize,
    },
    HydroCompare {
        profile: ProfileSpec,
        settings: HydroSettings,
        replicas: usize,
    },
    Transience {
        #[serde(rename = "N_list")]
        n_list: Vec<usize>,
        profile: ProfileSpec,
        replicas: usize,
        t_max: f64,
        delta: f64,
        ell_reg: Option<usize>,
    },
    MeasureTable {
        rho: f64,
        ell_list: Vec<usize>,
        mc_samples: usize,
        #[serde(rename = "N")]
        n: Option<usize>,
        #[serde(rename = "k")]
        particles: Option<usize>,
        window: usize,
    },
    Verify,
}

/// Validated, normalized configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        match self.experiment {
            Experiment::Simulate { .. } => ExperimentKind::Simulate,
            Experiment::Pde { .. } => ExperimentKind::Pde,
            Experiment::HydroCompare { .. } => ExperimentKind::HydroCompare,
            Experiment::Transience { .. } => ExperimentKind::Transience,
            Experiment::MeasureTable { .. } => ExperimentKind::MeasureTable,
            Experiment::Verify => ExperimentKind::Verify,
        }
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

pub const DEFAULT_SEED: u64 = 1;

struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn err(&mut self, field: &'static str, message: impl Into<String>) {
        self.errors.push(FieldError {
            field,
            message: message.into(),
        });
    }

    fn require<T: Clone>(&mut self, field: &'static str, v: &Option<T>) -> Option<T> {
        if v.is_none() {
            self.err(field, "required for this experiment");
        }
        v.clone()
    }

    fn positive_time(&mut self, field: &'static str, v: Option<f64>) -> f64 {
        match v {
            Some(t) if t.is_finite() && t >= 0.0 => t,
            Some(t) => {
                self.err(field, format!("must be a finite nonnegative time, got {t}"));
                0.0
            }
            None => {
                self.err(field, "required for this experiment");
                0.0
            }
        }
    }

    fn profile(&mut self, p: &Option<ProfileSpec>, subcritical_ok: bool) -> ProfileSpec {
        let p = p.clone().unwrap_or(ProfileSpec::constant(0.75));
        if let ProfileSpec::Piecewise { pieces } = &p {
            if ProfileSpec::piecewise(pieces.clone()).is_err() {
                self.err("profile", "piece starts must increase within [0, 1)");
            }
        }
        if subcritical_ok {
            if p.min() < 0.0 || p.max() > 1.0 {
                self.err("profile", "densities must lie in [0, 1]");
            }
        } else if p.min() <= 0.5 || p.max() > 1.0 {
            self.err(
                "profile",
                format!(
                    "initial profile must take values in (1/2, 1] (got range [{}, {}])",
                    p.min(),
                    p.max()
                ),
            );
        }
        p
    }
}

/// Parse and validate a JSON document. `kind` from the command line takes
/// precedence over, and must agree with, the document's own `kind`.
pub fn validate_config(document: &str, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    let doc: ConfigDocument =
        serde_json::from_str(document).map_err(|e| ConfigError::Json(e.to_string()))?;
    validate_document(&doc, kind)
}

pub fn validate_document(
    doc: &ConfigDocument,
    kind: Option<ExperimentKind>,
) -> Result<ExperimentConfig, ConfigError> {
    let mut c = Checker { errors: Vec::new() };
    let kind = match (kind, doc.kind) {
        (Some(a), Some(b)) if a != b => {
            c.err("kind", format!("document says {b} but command is {a}"));
            a
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => {
            c.err("kind", "required when no subcommand is given");
            ExperimentKind::Verify
        }
    };

    let replicas = doc.replicas.unwrap_or(1);
    if replicas == 0 {
        c.err("replicas", "must be at least 1");
    }

    let experiment = match kind {
        ExperimentKind::Simulate => {
            let allow = doc.allow_subcritical.unwrap_or(false);
            let n = match (&doc.initial, doc.n) {
                (Some(s), n) => match s.parse::<ExclusionConfig>() {
                    Ok(cfg) => {
                        if n.is_some_and(|n| n != cfg.size()) {
                            c.err("N", "disagrees with the length of `initial`");
                        }
                        cfg.size()
                    }
                    Err(e) => {
                        c.err("initial", e.to_string());
                        0
                    }
                },
                (None, n) => c.require("N", &n).unwrap_or(0),
            };
            if n == 0 && doc.initial.is_none() && doc.n.is_some() {
                c.err("N", "must be at least 1");
            }
            let profile = c.profile(&doc.profile, allow);
            let t_end = c.positive_time("t_end", doc.t_end);
            Experiment::Simulate {
                n,
                initial: doc.initial.clone(),
                profile,
                t_end,
                replicas,
                allow_subcritical: allow,
            }
        }
        ExperimentKind::Pde => {
            let profile = c.profile(&doc.profile, false);
            let t_end = c.positive_time("t_end", doc.t_end);
            let grid_m = doc.grid_m.unwrap_or(512);
            if grid_m < 3 {
                c.err("grid_m", "must be at least 3");
            }
            Experiment::Pde {
                profile,
                t_end,
                grid_m,
                snapshot_every: doc.snapshot_every.unwrap_or(0),
            }
        }
        ExperimentKind::HydroCompare => {
            let n = c.require("N", &doc.n).unwrap_or(0);
            let profile = c.profile(&doc.profile, false);
            let t = c.positive_time("t_end", doc.t_end);
            let ell = doc.block_ell.unwrap_or_else(|| HydroSettings::default_ell(n));
            let m = doc.grid_m.unwrap_or_else(|| n.min(512));
            if n > 0 && 2 * ell + 1 > n {
                c.err("block_ell", format!("2*block_ell+1 must not exceed N = {n}"));
            }
            if n > 0 && (m == 0 || m > n) {
                c.err("grid_m", format!("must lie in 1..=N = {n}"));
            }
            Experiment::HydroCompare {
                profile,
                settings: HydroSettings { n, t, ell, m },
                replicas: doc.replicas.unwrap_or(8).max(1),
            }
        }
        ExperimentKind::Transience => {
            let n_list = c.require("N_list", &doc.n_list).unwrap_or_default();
            if doc.n_list.is_some() && (n_list.is_empty() || n_list.iter().any(|&n| n < 4)) {
                c.err("N_list", "needs at least one size, each at least 4");
            }
            let profile = c.profile(&doc.profile, false);
            if profile.min() >= 1.0 {
                c.err("profile", "must not be identically 1");
            }
            let delta = doc.delta.unwrap_or_else(|| default_regularity_delta(&profile));
            if !(delta > 0.0 && delta < 1.0) {
                c.err("delta", "must lie in (0, 1)");
            }
            let t_max = doc.t_max.unwrap_or(1.0);
            if !(t_max > 0.0 && t_max.is_finite()) {
                c.err("t_max", "must be positive");
            }
            Experiment::Transience {
                n_list,
                profile,
                replicas: doc.replicas.unwrap_or(32).max(1),
                t_max,
                delta,
                ell_reg: doc.ell,
            }
        }
        ExperimentKind::MeasureTable => {
            let rho = doc.rho.unwrap_or(0.75);
            if !(rho > 0.5 && rho < 1.0) {
                c.err("rho", "must lie in (1/2, 1)");
            }
            let ell_list = doc.ell_list.clone().unwrap_or_else(|| (1..=10).collect());
            if ell_list.iter().any(|&l| l == 0) {
                c.err("ell_list", "entries must be at least 1");
            }
            let window = doc.ell.unwrap_or(3);
            match (doc.n, doc.particles) {
                (Some(n), Some(k)) => {
                    if !(2 * k > n && k < n) {
                        c.err("k", "must satisfy N/2 < k < N");
                    }
                    if window == 0 || window > n.min(20) {
                        c.err("ell", "window length must lie in 1..=min(N, 20)");
                    }
                }
                (Some(_), None) => c.err("k", "required together with N"),
                (None, Some(_)) => c.err("N", "required together with k"),
                (None, None) => {}
            }
            Experiment::MeasureTable {
                rho,
                ell_list,
                mc_samples: doc.mc_samples.unwrap_or(100_000),
                n: doc.n,
                particles: doc.particles,
                window,
            }
        }
        ExperimentKind::Verify => Experiment::Verify,
    };

    if c.errors.is_empty() {
        Ok(ExperimentConfig {
            experiment,
            master_seed: doc.master_seed.unwrap_or(DEFAULT_SEED),
            output_dir: doc.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        })
    } else {
        Err(ConfigError::Fields(c.errors))
    }
}

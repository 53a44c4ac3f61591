//! Experiment configuration: JSON schema and construction of library objects.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use orbistab::systems::builtin;
use orbistab::{
    compile, parse, IntegratorConfig, Method, Mode, OrbitSearch, ParamTable, PerturbationSpec,
    ScalarField, SystemDef, Vec3,
};

/// CLI failure classes; the numeric code is the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1: bad usage, unreadable or invalid configuration.
    Usage(String),
    /// Exit 2: a numerical procedure failed (integration, orbit search, ...).
    Numerical(String),
    /// Exit 3: results computed but an acceptance threshold was missed.
    Threshold(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Threshold(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Threshold(m) => write!(f, "threshold failure: {m}"),
        }
    }
}

pub fn numerical(e: orbistab::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub expressions: Option<ExpressionSystem>,
    /// Parameter bindings for builtin factories and expression parameters.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionSystem {
    pub nu: String,
    pub hamiltonian: String,
    pub casimir: String,
}

/// Exactly one of the two target forms: a seed state (the fiber values are
/// read off the integrals there) or explicit (h, c) plus an orbit guess.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    #[serde(default)]
    pub seed: Option<[f64; 3]>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub guess: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub mode: Mode,
    /// Gain expressions in the grammar; default constant 1.
    #[serde(default)]
    pub alpha: Option<String>,
    #[serde(default)]
    pub beta: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub method: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            method: "dopri45".into(),
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            step: 1e-3,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub t_end: f64,
    /// Start the run displaced from the orbit by this distance.
    pub offset: Option<f64>,
    /// Direction angle of the offset in the transverse plane.
    pub offset_angle: f64,
    /// Explicit initial state (takes precedence over offset).
    pub initial: Option<[f64; 3]>,
    /// Find the orbit and fill the dist_to_orbit column.
    pub track_orbit: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { t_end: 50.0, offset: None, offset_angle: 0.0, initial: None, track_orbit: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Constant factors applied to the alpha (and beta) gain fields.
    pub alpha_scales: Option<Vec<f64>>,
    pub offsets: Option<Vec<f64>>,
    pub fibers: Option<Vec<FiberPoint>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { alpha_scales: None, offsets: None, fibers: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberPoint {
    pub h: f64,
    pub c: f64,
    pub guess: [f64; 3],
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub samples: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection { lo: [-2.0; 3], hi: [2.0; 3], samples: 1000 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// State-space closure tolerance for accepting a periodic return.
    pub closure: f64,
    /// Relative tolerance for computed vs predicted multiplier moduli.
    pub multiplier_match: f64,
    /// Relative tolerance for the pointwise identities.
    pub identity: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { closure: 1e-6, multiplier_match: 1e-3, identity: 1e-10 }
    }
}

impl Thresholds {
    /// Apply `--threshold key=value` overrides.
    pub fn apply_overrides(mut self, overrides: &[String]) -> Result<Self, CliError> {
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--threshold expects KEY=VALUE, got `{o}`")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| CliError::Usage(format!("--threshold {key}: `{value}` is not a number")))?;
            if !(value > 0.0) {
                return Err(CliError::Usage(format!("--threshold {key} must be positive")));
            }
            match key {
                "closure" => self.closure = value,
                "multiplier_match" => self.multiplier_match = value,
                "identity" => self.identity = value,
                _ => {
                    return Err(CliError::Usage(format!(
                        "unknown threshold `{key}` (expected closure, multiplier_match or identity)"
                    )))
                }
            }
        }
        Ok(self)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    // serde_json errors carry line/column context
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    match (&cfg.system.builtin, &cfg.system.expressions) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("give either system.builtin or system.expressions, not both".into()))
        }
        (None, None) => {
            return Err(CliError::Usage("system needs either builtin or expressions".into()))
        }
        _ => {}
    }
    let t = &cfg.target;
    let seed_form = t.seed.is_some();
    let fiber_form = t.h.is_some() || t.c.is_some() || t.guess.is_some();
    if seed_form && fiber_form {
        return Err(CliError::Usage(
            "target: give either a seed point or (h, c, guess), not both".into(),
        ));
    }
    if !seed_form {
        if t.h.is_none() || t.c.is_none() || t.guess.is_none() {
            return Err(CliError::Usage(
                "target: the explicit form needs all of h, c and guess".into(),
            ));
        }
    }
    if cfg.run.t_end < 0.0 {
        return Err(CliError::Usage("run.t_end must be nonnegative".into()));
    }
    match cfg.integrator.method.as_str() {
        "dopri45" | "rk4" => {}
        other => return Err(CliError::Usage(format!("unknown integrator method `{other}`"))),
    }
    if !(cfg.integrator.rel_tol > 0.0 && cfg.integrator.abs_tol > 0.0 && cfg.integrator.step > 0.0)
    {
        return Err(CliError::Usage("integrator tolerances and step must be positive".into()));
    }
    Ok(())
}

fn param_table(params: &BTreeMap<String, f64>) -> ParamTable {
    params.iter().map(|(k, v)| (k.as_str(), *v)).collect()
}

/// Build the system plus the Rikitake parameter when the componentwise
/// oracle applies.
pub fn build_system(cfg: &SystemConfig) -> Result<(SystemDef, Option<f64>), CliError> {
    let table = param_table(&cfg.params);
    if let Some(name) = &cfg.builtin {
        let sys = builtin(name, &table).map_err(|e| CliError::Usage(e.to_string()))?;
        let beta = (name == "rikitake").then(|| table.get("beta").unwrap_or(1.0));
        return Ok((sys, beta));
    }
    let exprs = cfg.expressions.as_ref().expect("validated");
    let field = |src: &str, what: &str| -> Result<ScalarField, CliError> {
        let ast = parse(src).map_err(|e| CliError::Usage(format!("{what}: {e}")))?;
        compile(&ast, &table).map_err(|e| CliError::Usage(format!("{what}: {e}")))
    };
    let sys = SystemDef::new(
        "expression-defined",
        field(&exprs.nu, "system.expressions.nu")?,
        field(&exprs.hamiltonian, "system.expressions.hamiltonian")?,
        field(&exprs.casimir, "system.expressions.casimir")?,
    );
    Ok((sys, None))
}

/// Resolve (h, c, guess) from the target section.
pub fn resolve_target(cfg: &ExperimentConfig, sys: &SystemDef) -> (f64, f64, Vec3) {
    if let Some(seed) = cfg.target.seed {
        let u = Vec3::from_array(seed);
        (sys.h(u), sys.c(u), u)
    } else {
        (
            cfg.target.h.expect("validated"),
            cfg.target.c.expect("validated"),
            Vec3::from_array(cfg.target.guess.expect("validated")),
        )
    }
}

/// Build the perturbation spec; gains compile against the system parameters.
pub fn build_spec(
    cfg: &ExperimentConfig,
    sys: &SystemDef,
    h: f64,
    c: f64,
) -> Result<Option<PerturbationSpec>, CliError> {
    let Some(p) = &cfg.perturbation else { return Ok(None) };
    let table = param_table(&cfg.system.params);
    let gain = |src: &Option<String>, what: &str| -> Result<ScalarField, CliError> {
        match src {
            None => Ok(ScalarField::constant(1.0)),
            Some(text) => {
                let ast = parse(text).map_err(|e| CliError::Usage(format!("{what}: {e}")))?;
                compile(&ast, &table).map_err(|e| CliError::Usage(format!("{what}: {e}")))
            }
        }
    };
    let spec = PerturbationSpec::new(sys.clone(), p.mode, h, c)
        .with_alpha(gain(&p.alpha, "perturbation.alpha")?)
        .with_beta(gain(&p.beta, "perturbation.beta")?);
    Ok(Some(spec))
}

pub fn integrator(cfg: &ExperimentConfig) -> IntegratorConfig {
    let s = &cfg.integrator;
    let method = match s.method.as_str() {
        "rk4" => Method::Rk4 { step: s.step },
        _ => Method::Dopri45 { rel_tol: s.rel_tol, abs_tol: s.abs_tol },
    };
    IntegratorConfig { method, max_steps: s.max_steps }
}

pub fn orbit_search(thresholds: &Thresholds) -> OrbitSearch {
    OrbitSearch { closure_tol: thresholds.closure, ..OrbitSearch::default() }
}

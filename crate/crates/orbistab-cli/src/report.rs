//! Machine-readable reports.

use serde::Serialize;

use orbistab::{FloquetReport, PeriodicOrbit};

use crate::config::Thresholds;

#[derive(Debug, Clone, Serialize)]
pub struct OrbitSummary {
    pub period: f64,
    pub closure_residual: f64,
    pub fiber_residual_h: f64,
    pub fiber_residual_c: f64,
    pub min_field_norm: f64,
    pub samples: usize,
}

impl OrbitSummary {
    pub fn from_orbit(orbit: &PeriodicOrbit) -> Self {
        let (fh, fc) = orbit.fiber_residuals();
        OrbitSummary {
            period: orbit.period(),
            closure_residual: orbit.closure_residual(),
            fiber_residual_h: fh,
            fiber_residual_c: fc,
            min_field_norm: orbit.min_field_norm(),
            samples: orbit.sample_count(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub offset: f64,
    pub t_end: f64,
    /// Log-linear slope fitted to the per-period envelope of the decaying
    /// integral residual.
    pub fitted_rate: f64,
    /// Mean closed-form rate along the orbit.
    pub predicted_rate: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationDrift {
    pub integral: String,
    pub max_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CriterionResult {
    pub fn leq(name: &str, value: f64, threshold: f64) -> Self {
        CriterionResult { name: name.into(), value, threshold, passed: value <= threshold }
    }
}

/// Full report emitted by `orbistab floquet`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub system: String,
    pub mode: String,
    pub h: f64,
    pub c: f64,
    pub seed: u64,
    pub orbit: OrbitSummary,
    pub floquet: FloquetReport,
    /// Any computed multiplier modulus above 1 (destabilizing modes).
    pub unstable_multiplier: bool,
    pub decay_fit: Option<DecayFit>,
    pub conservation: Option<ConservationDrift>,
    pub criteria: Vec<CriterionResult>,
    pub thresholds: Thresholds,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

/// One sweep row. Serialized to CSV by hand to keep the format stable.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub alpha_scale: f64,
    pub offset: Option<f64>,
    pub h: f64,
    pub c: f64,
    pub outcome: Result<SweepOutcome, String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub period: f64,
    /// Nontrivial multiplier moduli (ranks after the leading trivial one).
    pub mu_2: f64,
    pub mu_3: f64,
    pub fitted_rate: Option<f64>,
    pub predicted_rate: f64,
    pub max_rel_error: f64,
    pub pass: bool,
}

pub const SWEEP_HEADER: &str =
    "alpha_scale,offset,h,c,period,mu_2,mu_3,fitted_rate,predicted_rate,max_rel_error,status,pass";

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        let offset = self.offset.map(|o| o.to_string()).unwrap_or_default();
        match &self.outcome {
            Ok(o) => {
                let fitted = o.fitted_rate.map(|r| r.to_string()).unwrap_or_default();
                format!(
                    "{},{},{},{},{},{},{},{},{},{},ok,{}",
                    self.alpha_scale,
                    offset,
                    self.h,
                    self.c,
                    o.period,
                    o.mu_2,
                    o.mu_3,
                    fitted,
                    o.predicted_rate,
                    o.max_rel_error,
                    o.pass
                )
            }
            Err(msg) => {
                // keep the CSV single-line and comma-free in the status field
                let clean: String =
                    msg.chars().map(|ch| if ch == ',' || ch == '\n' { ';' } else { ch }).collect();
                format!(
                    "{},{},{},{},,,,,,,{clean},false",
                    self.alpha_scale, offset, self.h, self.c
                )
            }
        }
    }
}

//! The four subcommands: simulate, floquet, sweep, check.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use orbistab::checks::{pointwise_checks, SampleBox};
use orbistab::orbits::{
    fit_exponential_rate, mean_decay_rates, offset_state, per_period_envelope,
};
use orbistab::{
    build_perturbed_field, find_periodic_orbit_with, floquet_analysis, hamiltonian_field,
    integrate, orbit_distance, IntegratorConfig, PerturbationSpec, PeriodicOrbit, Preserved,
    SystemDef, Trajectory, Vec3,
};

use crate::config::{
    build_spec, build_system, integrator, numerical, orbit_search, CliError, ExperimentConfig,
    Thresholds,
};
use crate::report::{
    ConservationDrift, CriterionResult, DecayFit, OrbitSummary, RunReport, SweepOutcome, SweepRow,
    SWEEP_HEADER,
};

const MIN_ENVELOPE_FLOOR: f64 = 1e-12;

struct Prepared {
    sys: SystemDef,
    rikitake_beta: Option<f64>,
    h: f64,
    c: f64,
    guess: Vec3,
    spec: Option<PerturbationSpec>,
    cfg: IntegratorConfig,
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared, CliError> {
    let (sys, rikitake_beta) = build_system(&config.system)?;
    let (h, c, guess) = crate::config::resolve_target(config, &sys);
    let spec = build_spec(config, &sys, h, c)?;
    Ok(Prepared { sys, rikitake_beta, h, c, guess, spec, cfg: integrator(config) })
}

fn find_orbit(p: &Prepared, thresholds: &Thresholds) -> Result<PeriodicOrbit, CliError> {
    find_periodic_orbit_with(&p.sys, p.h, p.c, p.guess, &orbit_search(thresholds))
        .map_err(numerical)
}

fn initial_state(
    config: &ExperimentConfig,
    p: &Prepared,
    orbit: Option<&PeriodicOrbit>,
) -> Result<Vec3, CliError> {
    if let Some(init) = config.run.initial {
        return Ok(Vec3::from_array(init));
    }
    if let Some(offset) = config.run.offset {
        let orbit = orbit.ok_or_else(|| {
            CliError::Usage("run.offset needs an orbit; it is found automatically".into())
        })?;
        let preserved = p.spec.as_ref().and_then(|s| s.mode.preserved());
        return Ok(offset_state(orbit, &p.sys, preserved, offset, config.run.offset_angle));
    }
    Ok(p.guess)
}

/// Trajectory CSV: one row per accepted step, columns
/// t,x,y,z,H,C,H_err,C_err,dist_to_orbit (dist empty without an orbit).
pub fn cmd_simulate(config: &ExperimentConfig, thresholds: &Thresholds) -> Result<String, CliError> {
    let p = prepare(config)?;
    let orbit = if config.run.track_orbit || config.run.offset.is_some() {
        Some(find_orbit(&p, thresholds)?)
    } else {
        None
    };
    let u0 = initial_state(config, &p, orbit.as_ref())?;
    let field = match &p.spec {
        Some(spec) => build_perturbed_field(spec),
        None => hamiltonian_field(&p.sys),
    };
    let traj = integrate(&field, u0, config.run.t_end, &p.cfg).map_err(numerical)?;

    let mut out = String::with_capacity(traj.len() * 96);
    out.push_str("t,x,y,z,H,C,H_err,C_err,dist_to_orbit\n");
    for (t, u) in traj.times().iter().zip(traj.states()) {
        let h = p.sys.h(*u);
        let c = p.sys.c(*u);
        let dist = orbit
            .as_ref()
            .map(|orb| orbit_distance(orb, *u).to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            t,
            u.x,
            u.y,
            u.z,
            h,
            c,
            (h - p.h).abs(),
            (c - p.c).abs(),
            dist
        ));
    }
    Ok(out)
}

// Which integral the closed-form rate drives: H unless only C decays.
fn decays_hamiltonian(spec: &PerturbationSpec) -> bool {
    !matches!(spec.mode.preserved(), Some(Preserved::Hamiltonian))
}

fn fit_envelope_rate(
    spec: &PerturbationSpec,
    orbit: &PeriodicOrbit,
    traj: &Trajectory,
) -> Option<f64> {
    let fit_h = decays_hamiltonian(spec);
    let sys = spec.system.clone();
    let (h, c) = (spec.h, spec.c);
    let env = per_period_envelope(traj, orbit.period(), move |u| {
        if fit_h {
            sys.h(u) - h
        } else {
            sys.c(u) - c
        }
    });
    if env.is_empty() {
        return None;
    }
    // a decaying envelope bottoms out at the integrator's conservation noise;
    // fit only the strictly decreasing prefix above a floor tied to the
    // starting amplitude
    let floor = MIN_ENVELOPE_FLOOR.max(1e-6 * env[0].1);
    let mut usable = vec![env[0]];
    for w in env.windows(2) {
        if w[1].1 < w[0].1 && w[1].1 > floor {
            usable.push(w[1]);
        } else {
            break;
        }
    }
    let ts: Vec<f64> = usable.iter().map(|e| e.0).collect();
    let vs: Vec<f64> = usable.iter().map(|e| e.1).collect();
    fit_exponential_rate(&ts, &vs, MIN_ENVELOPE_FLOOR)
}

/// Orbit + Floquet analysis, emitted as a JSON `RunReport`.
pub fn cmd_floquet(
    config: &ExperimentConfig,
    thresholds: &Thresholds,
    seed: u64,
) -> Result<(String, bool), CliError> {
    let p = prepare(config)?;
    let spec = p
        .spec
        .clone()
        .ok_or_else(|| CliError::Usage("floquet needs a perturbation section".into()))?;
    let orbit = find_orbit(&p, thresholds)?;
    let floquet = floquet_analysis(&spec, &orbit).map_err(numerical)?;

    let mut criteria = vec![
        CriterionResult::leq("orbit_closure", orbit.closure_residual(), thresholds.closure),
        CriterionResult::leq("multiplier_match", floquet.max_rel_error, thresholds.multiplier_match),
    ];
    criteria.push(CriterionResult {
        name: "trivial_multiplier_count".into(),
        value: floquet.trivial_count as f64,
        threshold: floquet.expected_trivial_count as f64,
        passed: floquet.trivial_count == floquet.expected_trivial_count,
    });

    // optional offset run: decay-rate fit plus conservation drift
    let mut decay_fit = None;
    let mut conservation = None;
    if let Some(offset) = config.run.offset {
        let preserved = spec.mode.preserved();
        let u0 = offset_state(&orbit, &p.sys, preserved, offset, config.run.offset_angle);
        let field = build_perturbed_field(&spec);
        let traj = integrate(&field, u0, config.run.t_end, &p.cfg).map_err(numerical)?;
        let (mean_lh, mean_lc) = mean_decay_rates(&spec, &orbit);
        let fits_h = decays_hamiltonian(&spec);
        let predicted = if fits_h { mean_lh } else { mean_lc };
        if let Some(fitted) = fit_envelope_rate(&spec, &orbit, &traj) {
            let rel = (fitted - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE);
            criteria.push(CriterionResult::leq("decay_rate_fit", rel, 0.1));
            decay_fit = Some(DecayFit {
                offset,
                t_end: config.run.t_end,
                fitted_rate: fitted,
                predicted_rate: predicted,
                rel_error: rel,
            });
        }
        if let Some(which) = preserved {
            let (name, target, field): (&str, f64, &orbistab::ScalarField) = match which {
                Preserved::Hamiltonian => ("H", spec.h, &p.sys.hamiltonian),
                Preserved::Casimir => ("C", spec.c, &p.sys.casimir),
            };
            let mut drift = 0.0f64;
            for u in traj.states() {
                drift = drift.max((field.eval(*u) - target).abs());
            }
            criteria.push(CriterionResult::leq("preserved_integral_drift", drift, 1e-6));
            conservation = Some(ConservationDrift { integral: name.into(), max_drift: drift });
        }
    }

    let unstable = floquet.computed_moduli().into_iter().any(|m| m > 1.0 + 1e-3);
    let report = RunReport {
        system: p.sys.name.clone(),
        mode: spec.mode.to_string(),
        h: p.h,
        c: p.c,
        seed,
        orbit: OrbitSummary::from_orbit(&orbit),
        floquet,
        unstable_multiplier: unstable,
        decay_fit,
        conservation,
        criteria,
        thresholds: *thresholds,
    };
    let passed = report.passed();
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    Ok((json, passed))
}

/// Cartesian sweep over alpha scales, offsets and fibers; one CSV row per
/// run. Failed runs record their error and the sweep continues.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    thresholds: &Thresholds,
    workers: usize,
) -> Result<String, CliError> {
    let p = prepare(config)?;
    let spec = p
        .spec
        .clone()
        .ok_or_else(|| CliError::Usage("sweep needs a perturbation section".into()))?;
    let sweep = config.sweep.clone().unwrap_or_default();

    let alpha_scales = sweep.alpha_scales.unwrap_or_else(|| vec![1.0]);
    let offsets: Vec<Option<f64>> = match sweep.offsets {
        Some(list) => list.into_iter().map(Some).collect(),
        None => vec![config.run.offset],
    };
    let fibers: Vec<(f64, f64, Vec3)> = match sweep.fibers {
        Some(list) => list.iter().map(|f| (f.h, f.c, Vec3::from_array(f.guess))).collect(),
        None => vec![(p.h, p.c, p.guess)],
    };

    struct Job {
        alpha_scale: f64,
        offset: Option<f64>,
        fiber: (f64, f64, Vec3),
    }
    let mut jobs = Vec::new();
    for &scale in &alpha_scales {
        for &offset in &offsets {
            for &fiber in &fibers {
                jobs.push(Job { alpha_scale: scale, offset, fiber });
            }
        }
    }

    let run_one = |job: &Job| -> Result<SweepOutcome, String> {
        let (h, c, guess) = job.fiber;
        let mut spec = spec.clone();
        spec.h = h;
        spec.c = c;
        spec.alpha = spec.alpha.scaled(job.alpha_scale);
        spec.beta = spec.beta.scaled(job.alpha_scale);
        let orbit = find_periodic_orbit_with(&p.sys, h, c, guess, &orbit_search(thresholds))
            .map_err(|e| e.to_string())?;
        let floquet = floquet_analysis(&spec, &orbit).map_err(|e| e.to_string())?;
        let moduli = floquet.computed_moduli();
        let (mean_lh, mean_lc) = mean_decay_rates(&spec, &orbit);
        let fits_h = decays_hamiltonian(&spec);
        let predicted = if fits_h { mean_lh } else { mean_lc };
        let mut fitted = None;
        let mut fit_ok = true;
        if let Some(offset) = job.offset {
            let preserved = spec.mode.preserved();
            let u0 = offset_state(&orbit, &p.sys, preserved, offset, config.run.offset_angle);
            let field = build_perturbed_field(&spec);
            let traj =
                integrate(&field, u0, config.run.t_end, &p.cfg).map_err(|e| e.to_string())?;
            fitted = fit_envelope_rate(&spec, &orbit, &traj);
            fit_ok = match fitted {
                Some(rate) => (rate - predicted).abs() <= 0.1 * predicted.abs(),
                None => false,
            };
        }
        Ok(SweepOutcome {
            period: orbit.period(),
            mu_2: moduli[1],
            mu_3: moduli[2],
            fitted_rate: fitted,
            predicted_rate: predicted,
            max_rel_error: floquet.max_rel_error,
            pass: floquet.max_rel_error <= thresholds.multiplier_match && fit_ok,
        })
    };

    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let worker_count = workers.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let job = &jobs[i];
                let row = SweepRow {
                    alpha_scale: job.alpha_scale,
                    offset: job.offset,
                    h: job.fiber.0,
                    c: job.fiber.1,
                    outcome: run_one(job),
                };
                rows.lock().expect("sweep row lock")[i] = Some(row);
            });
        }
    });

    let rows = rows.into_inner().expect("sweep rows");
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for row in rows.into_iter().flatten() {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    Ok(out)
}

/// Pointwise identity report as JSON; pass/fail against the identity
/// threshold.
pub fn cmd_check(
    config: &ExperimentConfig,
    thresholds: &Thresholds,
    seed: u64,
) -> Result<(String, bool), CliError> {
    let p = prepare(config)?;
    let spec = p.spec.clone().unwrap_or_else(|| {
        PerturbationSpec::new(p.sys.clone(), orbistab::Mode::FullStabilize, p.h, p.c)
    });
    let sample_box = SampleBox { lo: config.check.lo, hi: config.check.hi };
    let report =
        pointwise_checks(&spec, &sample_box, config.check.samples, seed, p.rikitake_beta);
    let violations = [
        report.preserve_c_max_rel,
        report.preserve_h_max_rel,
        report.decay_h_max_rel,
        report.decay_c_max_rel,
        report.rikitake_oracle_max_rel,
    ];
    let worst = violations.into_iter().flatten().fold(0.0f64, f64::max);
    let pass = worst <= thresholds.identity;

    #[derive(serde::Serialize)]
    struct CheckOutput {
        mode: String,
        h: f64,
        c: f64,
        report: orbistab::checks::CheckReport,
        worst_violation: f64,
        identity_threshold: f64,
        pass: bool,
    }
    let out = CheckOutput {
        mode: spec.mode.to_string(),
        h: p.h,
        c: p.c,
        report,
        worst_violation: worst,
        identity_threshold: thresholds.identity,
        pass,
    };
    Ok((serde_json::to_string_pretty(&out).expect("check report serializes"), pass))
}

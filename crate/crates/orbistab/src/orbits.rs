//! Periodic-orbit tooling: projection onto an (h, c) fiber, orbit detection
//! via Poincare return, distance and phase diagnostics, and Floquet analysis
//! of the perturbed systems.
//!
//! Floquet multipliers are extracted with a hybrid scheme. A direct
//! transported monodromy matrix resolves multipliers of moderate size, but a
//! strongly stabilized orbit has multipliers like exp(-25) that sit far below
//! the attainable absolute accuracy of any single transported matrix. Those
//! are recovered from a multi-pass discrete-QR decomposition of the
//! variational flow with log-accumulated diagonal, which tracks each modulus
//! in log space and loses no precision to dynamic range. Both paths evaluate
//! coefficients on the stored orbit interpolant, so unstable modes do not
//! contaminate the base trajectory.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{hamiltonian_field, SystemDef};
use crate::integrate::{
    integrate, scan_crossings, transport_matrix, IntegratorConfig, Plane, Trajectory,
};
use crate::perturbation::{build_perturbed_field, decay_rates, PerturbationSpec, Preserved};
use crate::vec3::{cross, Mat3, Vec3};

/// Gauss-Newton projection of `guess` onto the fiber {H = h} ∩ {C = c}.
///
/// Each step is the minimal-norm correction solving the linearized residual,
/// so the returned point stays close to the guess. Fails when the 2x3
/// Jacobian loses rank (gradients parallel, e.g. near an equilibrium) or the
/// iteration does not reach |H - h|, |C - c| <= 1e-12 in 50 steps.
pub fn project_to_fiber(sys: &SystemDef, h: f64, c: f64, guess: Vec3) -> Result<Vec3> {
    const TOL: f64 = 1e-12;
    const MAX_ITER: usize = 50;
    let mut u = guess;
    for _ in 0..MAX_ITER {
        let rh = sys.h(u) - h;
        let rc = sys.c(u) - c;
        if rh.abs() <= TOL && rc.abs() <= TOL {
            return Ok(u);
        }
        let gh = sys.grad_h(u);
        let gc = sys.grad_c(u);
        let a = gh.norm_sq();
        let b = gh.dot(gc);
        let d = gc.norm_sq();
        let det = a * d - b * b;
        if det <= 1e-12 * (a * d).max(f64::MIN_POSITIVE) {
            return Err(Error::ProjectionSingular { x: u.x, y: u.y, z: u.z });
        }
        // solve (J J^T) w = r, step = -J^T w
        let w1 = (d * rh - b * rc) / det;
        let w2 = (a * rc - b * rh) / det;
        u -= gh * w1 + gc * w2;
        if !u.is_finite() {
            return Err(Error::ProjectionDiverged { iterations: MAX_ITER, residual: f64::NAN });
        }
    }
    let residual = (sys.h(u) - h).abs().max((sys.c(u) - c).abs());
    if residual <= TOL {
        Ok(u)
    } else {
        Err(Error::ProjectionDiverged { iterations: MAX_ITER, residual })
    }
}

/// A certified periodic orbit of the conservative system on a fixed fiber:
/// anchor state, period, and a dense uniform-in-time sample table.
#[derive(Clone)]
pub struct PeriodicOrbit {
    anchor: Vec3,
    period: f64,
    h: f64,
    c: f64,
    samples: Vec<Vec3>,
    derivs: Vec<Vec3>,
    closure_residual: f64,
    fiber_residual_h: f64,
    fiber_residual_c: f64,
    min_field_norm: f64,
}

impl PeriodicOrbit {
    pub fn anchor(&self) -> Vec3 {
        self.anchor
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Fiber values (h, c) the orbit lives on.
    pub fn fiber(&self) -> (f64, f64) {
        (self.h, self.c)
    }

    pub fn samples(&self) -> &[Vec3] {
        &self.samples
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn sample_time(&self, i: usize) -> f64 {
        self.period * i as f64 / self.samples.len() as f64
    }

    pub fn closure_residual(&self) -> f64 {
        self.closure_residual
    }

    /// Max |H - h| and |C - c| over the sample table.
    pub fn fiber_residuals(&self) -> (f64, f64) {
        (self.fiber_residual_h, self.fiber_residual_c)
    }

    /// Min |X(sample)| over the table; positive because periodic orbits
    /// contain no equilibria.
    pub fn min_field_norm(&self) -> f64 {
        self.min_field_norm
    }

    /// Periodic cubic Hermite evaluation of gamma(t); `t` is taken mod T.
    pub fn interpolate(&self, t: f64) -> Vec3 {
        let n = self.samples.len();
        let dt = self.period / n as f64;
        let mut tau = t % self.period;
        if tau < 0.0 {
            tau += self.period;
        }
        let i = ((tau / dt) as usize).min(n - 1);
        let theta = (tau - i as f64 * dt) / dt;
        let j = (i + 1) % n;
        let (y0, f0) = (self.samples[i], self.derivs[i]);
        let (y1, f1) = (self.samples[j], self.derivs[j]);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + f0 * (dt * (t3 - 2.0 * t2 + theta))
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + f1 * (dt * (t3 - t2))
    }

    /// Trapezoid quadrature of a scalar along one period. Uniform periodic
    /// sampling makes this spectrally accurate for smooth integrands.
    pub fn integrate_along(&self, f: impl Fn(Vec3) -> f64) -> f64 {
        let n = self.samples.len();
        let dt = self.period / n as f64;
        self.samples.iter().map(|&u| f(u)).sum::<f64>() * dt
    }
}

/// Tunables for the orbit search.
#[derive(Debug, Clone, Copy)]
pub struct OrbitSearch {
    /// Give up if no closing return appears within this flow time.
    pub t_max: f64,
    /// Upward section crossings examined for closure before giving up.
    pub max_crossings: usize,
    /// State-space closure tolerance for accepting a return as periodic.
    pub closure_tol: f64,
    pub min_samples: usize,
    pub max_samples: usize,
    /// Target max interpolation error of the sample table (doubling rule).
    pub interp_tol: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for OrbitSearch {
    fn default() -> Self {
        OrbitSearch {
            t_max: 200.0,
            max_crossings: 16,
            closure_tol: 1e-6,
            min_samples: 256,
            max_samples: 8192,
            interp_tol: 1e-9,
            rel_tol: 1e-12,
            abs_tol: 1e-13,
        }
    }
}

/// Find a periodic orbit of the conservative system on the fiber (h, c)
/// near `seed`, with default search settings.
pub fn find_periodic_orbit(sys: &SystemDef, h: f64, c: f64, seed: Vec3) -> Result<PeriodicOrbit> {
    find_periodic_orbit_with(sys, h, c, seed, &OrbitSearch::default())
}

/// Orbit search: project the seed onto the fiber, flow the conservative
/// field, detect upward returns through the Poincare plane anchored at the
/// projected seed with normal X(anchor), accept the first return that closes
/// in state space, then resample the loop uniformly in time and certify the
/// invariants (closure, fiber residuals, absence of equilibria).
pub fn find_periodic_orbit_with(
    sys: &SystemDef,
    h: f64,
    c: f64,
    seed: Vec3,
    opts: &OrbitSearch,
) -> Result<PeriodicOrbit> {
    let anchor = project_to_fiber(sys, h, c, seed)?;
    let field = hamiltonian_field(sys);
    let v0 = field.eval(anchor);
    if v0.norm() < 1e-10 {
        return Err(Error::EquilibriumSeed { norm: v0.norm() });
    }
    let plane = Plane::new(anchor, v0 * (1.0 / v0.norm()));
    let cfg = IntegratorConfig::adaptive(opts.rel_tol, opts.abs_tol);

    // chunked forward search for the first closing upward return
    let chunk = (opts.t_max / 8.0).clamp(5.0, 50.0);
    let mut t_base = 0.0;
    let mut u_cur = anchor;
    let mut inspected = 0usize;
    let mut period = None;
    'search: while t_base < opts.t_max && inspected < opts.max_crossings {
        let t_span = chunk.min(opts.t_max - t_base);
        let traj = integrate(&field, u_cur, t_span, &cfg)?;
        for (tc, uc) in scan_crossings(&traj, &plane, opts.max_crossings - inspected) {
            inspected += 1;
            if uc.distance(anchor) <= opts.closure_tol {
                period = Some(t_base + tc);
                break 'search;
            }
        }
        t_base += t_span;
        u_cur = traj.end_state();
    }
    let period = period.ok_or_else(|| {
        Error::NoPeriodicReturn(format!(
            "no closing upward return within t = {} ({} crossings inspected)",
            opts.t_max, inspected
        ))
    })?;

    // resample one period densely and build the table
    let traj = integrate(&field, anchor, period, &cfg)?;
    let closure_residual = traj.end_state().distance(anchor);
    if closure_residual > opts.closure_tol {
        return Err(Error::ClosureFailure { residual: closure_residual, tolerance: opts.closure_tol });
    }

    let mut n = opts.min_samples;
    let (samples, derivs) = loop {
        let samples: Vec<Vec3> =
            (0..n).map(|i| traj.sample(period * i as f64 / n as f64)).collect();
        let derivs: Vec<Vec3> = samples.iter().map(|&u| field.eval(u)).collect();
        let candidate = PeriodicOrbit {
            anchor,
            period,
            h,
            c,
            samples: samples.clone(),
            derivs: derivs.clone(),
            closure_residual,
            fiber_residual_h: 0.0,
            fiber_residual_c: 0.0,
            min_field_norm: 0.0,
        };
        // interpolation error estimate at segment midpoints vs the dense solution
        let mut worst = 0.0f64;
        for i in 0..n {
            let tm = period * (i as f64 + 0.5) / n as f64;
            worst = worst.max(candidate.interpolate(tm).distance(traj.sample(tm)));
        }
        if worst <= opts.interp_tol || n >= opts.max_samples {
            break (samples, derivs);
        }
        n *= 2;
    };

    let mut fh = 0.0f64;
    let mut fc = 0.0f64;
    let mut min_norm = f64::INFINITY;
    for u in &samples {
        fh = fh.max((sys.h(*u) - h).abs());
        fc = fc.max((sys.c(*u) - c).abs());
        min_norm = min_norm.min(field.eval(*u).norm());
    }
    if fh > 1e-6 || fc > 1e-6 {
        return Err(Error::OrbitInvalid(format!(
            "fiber residuals |H-h| = {fh:.3e}, |C-c| = {fc:.3e} exceed 1e-6"
        )));
    }
    if min_norm == 0.0 {
        return Err(Error::OrbitInvalid("orbit passes through an equilibrium".into()));
    }

    Ok(PeriodicOrbit {
        anchor,
        period,
        h,
        c,
        samples,
        derivs,
        closure_residual,
        fiber_residual_h: fh,
        fiber_residual_c: fc,
        min_field_norm: min_norm,
    })
}

/// Distance from `u` to the orbit: min over samples, then local minimization
/// of |u - gamma(t)|^2 in t on the interpolant. A parabola vertex through
/// the three nearest squared distances seeds a golden-section refinement;
/// the parabola alone is biased where the orbit speed varies.
pub fn orbit_distance(orbit: &PeriodicOrbit, u: Vec3) -> f64 {
    let n = orbit.samples.len();
    let mut best = 0usize;
    let mut best_d2 = f64::INFINITY;
    for (i, s) in orbit.samples.iter().enumerate() {
        let d2 = (u - *s).norm_sq();
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    let dt = orbit.period / n as f64;
    let t0 = best as f64 * dt;
    let d2_at = |t: f64| (u - orbit.interpolate(t)).norm_sq();
    // golden-section minimization over the bracketing segment pair
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = t0 - dt;
    let mut b = t0 + dt;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = d2_at(c);
    let mut fd = d2_at(d);
    while (b - a) > 1e-10 * orbit.period {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = d2_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = d2_at(d);
        }
    }
    best_d2.min(d2_at(0.5 * (a + b))).sqrt()
}

/// Optimal phase shift of `traj` against the orbit over `window`: minimizes
/// over theta the mean distance |x(t) - gamma(t + theta)|. Returns
/// (theta in [0, T), residual at the optimum).
pub fn phase_align(orbit: &PeriodicOrbit, traj: &Trajectory, window: (f64, f64)) -> (f64, f64) {
    let (ta, tb) = window;
    assert!(tb > ta, "window must have positive length");
    const K: usize = 256;
    let times: Vec<f64> = (0..K).map(|j| ta + (tb - ta) * j as f64 / (K - 1) as f64).collect();
    let states: Vec<Vec3> = times.iter().map(|&t| traj.sample(t)).collect();
    let residual = |theta: f64| -> f64 {
        times
            .iter()
            .zip(&states)
            .map(|(&t, &x)| (x - orbit.interpolate(t + theta)).norm())
            .sum::<f64>()
            / K as f64
    };
    let t_orb = orbit.period();
    const COARSE: usize = 256;
    let mut best_theta = 0.0;
    let mut best_res = f64::INFINITY;
    for i in 0..COARSE {
        let theta = t_orb * i as f64 / COARSE as f64;
        let r = residual(theta);
        if r < best_res {
            best_res = r;
            best_theta = theta;
        }
    }
    // golden-section refinement around the coarse minimum
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = best_theta - t_orb / COARSE as f64;
    let mut b = best_theta + t_orb / COARSE as f64;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = residual(c);
    let mut fd = residual(d);
    while (b - a).abs() > 1e-10 * t_orb {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = residual(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = residual(d);
        }
    }
    let theta = 0.5 * (a + b);
    let res = residual(theta);
    let theta = theta.rem_euclid(t_orb);
    (theta, res)
}

/// Log-linear least-squares fit of `values ~ exp(rate * t)`; returns the
/// signed rate. Points with values <= `floor` are excluded; needs at least
/// two usable points.
pub fn fit_exponential_rate(ts: &[f64], values: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > floor)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Per-period maxima of |f(state)| over consecutive windows of length
/// `period`: returns (window start time, max). Partial trailing windows are
/// dropped.
pub fn per_period_envelope(
    traj: &Trajectory,
    period: f64,
    f: impl Fn(Vec3) -> f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let t_end = traj.end_time();
    let mut k = 0usize;
    loop {
        let a = k as f64 * period;
        let b = a + period;
        if b > t_end + 1e-12 {
            break;
        }
        let mut m = 0.0f64;
        for (t, u) in traj.times().iter().zip(traj.states()) {
            if *t >= a && *t < b {
                m = m.max(f(*u).abs());
            }
        }
        out.push((a, m));
        k += 1;
    }
    out
}

/// A state displaced from the orbit anchor by `offset` along a generic
/// direction transverse to the flow (rotated by `angle` for variety). For
/// modes preserving an integral the point is Newton-projected back onto the
/// preserved level set, so the conserved quantity starts on target.
pub fn offset_state(
    orbit: &PeriodicOrbit,
    sys: &SystemDef,
    preserved: Option<Preserved>,
    offset: f64,
    angle: f64,
) -> Vec3 {
    let anchor = orbit.anchor();
    let field = hamiltonian_field(sys);
    let e1 = field.eval(anchor).normalized().expect("orbit anchor is not an equilibrium");
    let w = Vec3::new(0.6180339887, 0.7861513778, 0.1132486541);
    let n1 = (w - e1 * w.dot(e1)).normalized().expect("generic direction degenerate");
    let n2 = cross(e1, n1);
    let dir = n1 * angle.cos() + n2 * angle.sin();
    let mut u = anchor + dir * offset;
    if let Some(which) = preserved {
        let (h, c) = orbit.fiber();
        let (target, fld) = match which {
            Preserved::Hamiltonian => (h, &sys.hamiltonian),
            Preserved::Casimir => (c, &sys.casimir),
        };
        for _ in 0..12 {
            let r = fld.eval(u) - target;
            if r.abs() <= 1e-13 {
                break;
            }
            let g = fld.grad(u);
            u -= g * (r / g.norm_sq());
        }
    }
    u
}

/// Serializable complex number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl ComplexValue {
    fn from_c64(c: Complex64) -> Self {
        ComplexValue { re: c.re, im: c.im }
    }

    pub fn modulus(&self) -> f64 {
        (self.re * self.re + self.im * self.im).sqrt()
    }
}

/// Computed versus predicted Floquet data for one orbit and perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloquetReport {
    /// Monodromy eigenvalues, sorted by decreasing modulus.
    pub computed: [ComplexValue; 3],
    /// Closed-form predicted multiplier moduli, sorted decreasing:
    /// 1 with the mode's trivial multiplicity, then exp of the decay
    /// exponent(s).
    pub predicted: [f64; 3],
    /// Integral of lambda_H over one period.
    pub exponent_h: f64,
    /// Integral of lambda_C over one period.
    pub exponent_c: f64,
    pub period: f64,
    /// Computed multipliers within 1e-3 of 1.
    pub trivial_count: usize,
    /// Trivial multiplicity the mode's structure prescribes.
    pub expected_trivial_count: usize,
    /// Max over ranks of |modulus(computed) - predicted| / predicted.
    pub max_rel_error: f64,
}

impl FloquetReport {
    pub fn computed_moduli(&self) -> [f64; 3] {
        [self.computed[0].modulus(), self.computed[1].modulus(), self.computed[2].modulus()]
    }
}

const FLOQUET_REL_TOL: f64 = 1e-11;
const FLOQUET_ABS_TOL: f64 = 1e-13;
/// Direct eigenvalues are trusted down to this fraction of the matrix norm.
const DIRECT_TRUST: f64 = 1e-5;
/// Moduli whose log magnitude exceeds this come from the QR accumulation.
const LN_EXTREME: f64 = 9.2; // ln(1e4)

fn qr_positive(m: Mat3) -> (Mat3, Mat3) {
    let qr = m.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..3 {
        if r[(i, i)] < 0.0 {
            for j in 0..3 {
                q[(j, i)] = -q[(j, i)];
                r[(i, j)] = -r[(i, j)];
            }
        }
    }
    (q, r)
}

/// One full-period pass of the discrete-QR method over frozen coefficients:
/// returns the transported orthonormal frame and accumulated log |diag R|.
fn qr_pass(
    coeffs: &dyn Fn(f64) -> Mat3,
    period: f64,
    segments: usize,
    q0: Mat3,
) -> Result<(Mat3, [f64; 3])> {
    let mut q = q0;
    let mut logs = [0.0f64; 3];
    for k in 0..segments {
        let t0 = period * k as f64 / segments as f64;
        let t1 = period * (k + 1) as f64 / segments as f64;
        let w = transport_matrix(coeffs, t0, t1, q, FLOQUET_REL_TOL, FLOQUET_ABS_TOL, 10_000_000)?;
        let (qn, r) = qr_positive(w);
        q = qn;
        for i in 0..3 {
            logs[i] += r[(i, i)].max(f64::MIN_POSITIVE).ln();
        }
    }
    Ok((q, logs))
}

struct Extraction {
    moduli_ln: [f64; 3],
    fwd_eigs: Vec<Complex64>,
    fwd_norm: f64,
    bwd_eigs: Vec<Complex64>,
    bwd_norm: f64,
}

/// Compute multiplier moduli (log space) plus direct eigenvalue candidates
/// from forward and reversed transported monodromies.
fn extract_multipliers(coeffs: &dyn Fn(f64) -> Mat3, period: f64) -> Result<Extraction> {
    // direct forward monodromy
    let m_fwd =
        transport_matrix(coeffs, 0.0, period, Mat3::identity(), FLOQUET_REL_TOL, FLOQUET_ABS_TOL, 10_000_000)?;
    let mut fwd_eigs: Vec<Complex64> = m_fwd.complex_eigenvalues().iter().copied().collect();
    fwd_eigs.sort_by(|a, b| b.norm().total_cmp(&a.norm()));

    // reversed-time monodromy: eigenvalues are reciprocals of the multipliers
    let rev = move |s: f64| -coeffs(period - s);
    let m_bwd =
        transport_matrix(&rev, 0.0, period, Mat3::identity(), FLOQUET_REL_TOL, FLOQUET_ABS_TOL, 10_000_000)?;
    let mut bwd_eigs: Vec<Complex64> = m_bwd.complex_eigenvalues().iter().copied().collect();
    // reciprocal moduli sorted decreasing = multiplier order
    bwd_eigs.sort_by(|a, b| a.norm().total_cmp(&b.norm()));

    // multi-pass discrete QR for log moduli
    let q_seed = Mat3::new(0.7133, -0.2483, 0.5912, 0.1098, 0.8761, -0.3371, -0.4269, 0.3157, 0.6823);
    let (mut q, _) = qr_positive(q_seed);
    let segments = 48;
    let mut logs = [0.0f64; 3];
    let mut prev: Option<[f64; 3]> = None;
    for _pass in 0..6 {
        let (qn, l) = qr_pass(coeffs, period, segments, q)?;
        q = qn;
        logs = l;
        if let Some(p) = prev {
            let drift =
                (0..3).map(|i| (logs[i] - p[i]).abs()).fold(0.0f64, f64::max);
            if drift < 1e-10 {
                break;
            }
        }
        prev = Some(logs);
    }
    let mut moduli_ln = logs;
    moduli_ln.sort_by(|a, b| b.total_cmp(a));

    Ok(Extraction {
        moduli_ln,
        fwd_eigs,
        fwd_norm: m_fwd.norm(),
        bwd_eigs,
        bwd_norm: m_bwd.norm(),
    })
}

fn assemble_computed(ext: &Extraction) -> [ComplexValue; 3] {
    let mut out = [ComplexValue { re: 0.0, im: 0.0 }; 3];
    for i in 0..3 {
        let ln_mod = ext.moduli_ln[i];
        let fwd = ext.fwd_eigs[i];
        let fwd_ok = ext.fwd_norm <= 1e6 && fwd.norm() >= DIRECT_TRUST * ext.fwd_norm.max(1.0);
        let bwd = ext.bwd_eigs[i];
        let bwd_ok = ext.bwd_norm <= 1e6 && bwd.norm() >= DIRECT_TRUST * ext.bwd_norm.max(1.0);
        let value = if ln_mod.abs() <= LN_EXTREME && fwd_ok {
            fwd
        } else if ln_mod.abs() <= LN_EXTREME && bwd_ok {
            bwd.inv()
        } else {
            // log-accumulated modulus, reported as a positive real; direct
            // eigensolves carry no phase information at this dynamic range
            Complex64::new(ln_mod.exp(), 0.0)
        };
        out[i] = ComplexValue::from_c64(value);
    }
    out
}

/// Mean decay rates ((1/T) int lambda_H, (1/T) int lambda_C) along the orbit.
pub fn mean_decay_rates(spec: &PerturbationSpec, orbit: &PeriodicOrbit) -> (f64, f64) {
    let rates = decay_rates(spec);
    let ih = orbit.integrate_along(|u| rates.lambda_h(u));
    let ic = orbit.integrate_along(|u| rates.lambda_c(u));
    (ih / orbit.period(), ic / orbit.period())
}

/// Floquet analysis of the perturbed system around `orbit`.
///
/// The orbit must lie on the spec's target fiber (then it is an orbit of the
/// perturbed system as well; this is certified by the orbit invariants).
/// Computed multipliers come from variational transport along the stored
/// orbit; predicted ones from the closed-form decay exponents integrated by
/// quadrature over the sample table.
pub fn floquet_analysis(spec: &PerturbationSpec, orbit: &PeriodicOrbit) -> Result<FloquetReport> {
    let (oh, oc) = orbit.fiber();
    if (oh - spec.h).abs() > 1e-9 || (oc - spec.c).abs() > 1e-9 {
        return Err(Error::OrbitInvalid(format!(
            "orbit fiber ({oh}, {oc}) does not match spec target ({}, {})",
            spec.h, spec.c
        )));
    }
    let field = build_perturbed_field(spec);
    let coeffs = move |t: f64| field.jacobian(orbit.interpolate(t));
    let ext = extract_multipliers(&coeffs, orbit.period())?;
    let computed = assemble_computed(&ext);

    let rates = decay_rates(spec);
    let exponent_h = orbit.integrate_along(|u| rates.lambda_h(u));
    let exponent_c = orbit.integrate_along(|u| rates.lambda_c(u));
    let mut predicted = match spec.mode.preserved() {
        Some(Preserved::Casimir) => [1.0, 1.0, exponent_h.exp()],
        Some(Preserved::Hamiltonian) => [1.0, 1.0, exponent_c.exp()],
        None => [1.0, exponent_h.exp(), exponent_c.exp()],
    };
    predicted.sort_by(|a, b| b.total_cmp(a));

    let trivial_count = computed
        .iter()
        .filter(|c| ((c.re - 1.0).powi(2) + c.im.powi(2)).sqrt() <= 1e-3)
        .count();
    let mut max_rel_error = 0.0f64;
    for i in 0..3 {
        let rel = (computed[i].modulus() - predicted[i]).abs() / predicted[i];
        max_rel_error = max_rel_error.max(rel);
    }
    Ok(FloquetReport {
        computed,
        predicted,
        exponent_h,
        exponent_c,
        period: orbit.period(),
        trivial_count,
        expected_trivial_count: spec.mode.trivial_multiplier_count(),
        max_rel_error,
    })
}

/// Convenience: find the orbit for a spec's fiber and run the full analysis.
pub fn analyze_spec(spec: &PerturbationSpec, seed: Vec3) -> Result<(PeriodicOrbit, FloquetReport)> {
    let orbit = find_periodic_orbit(&spec.system, spec.h, spec.c, seed)?;
    let report = floquet_analysis(spec, &orbit)?;
    Ok((orbit, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{harmonic2d, rikitake};
    use std::f64::consts::PI;

    fn rikitake_orbit() -> PeriodicOrbit {
        find_periodic_orbit(&rikitake(1.0), -1.0, 2.0, Vec3::new(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn project_on_fiber_point_unchanged() {
        let sys = rikitake(1.0);
        let u = Vec3::new(1.0, 1.0, 1.0);
        let p = project_to_fiber(&sys, -1.0, 2.0, u).unwrap();
        assert!(p.distance(u) <= 1e-14);
    }

    #[test]
    fn project_converges_from_nearby_guess() {
        let sys = rikitake(1.0);
        let p = project_to_fiber(&sys, -1.0, 2.0, Vec3::new(1.05, 0.95, 1.0)).unwrap();
        assert!((sys.h(p) + 1.0).abs() <= 1e-12);
        assert!((sys.c(p) - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn project_fails_at_rank_deficient_point() {
        // grad H and grad C are parallel along (0, 0, z)
        let sys = rikitake(1.0);
        let res = project_to_fiber(&sys, -1.0, 2.0, Vec3::new(0.0, 0.0, 1.0));
        assert!(
            matches!(res, Err(Error::ProjectionSingular { .. }) | Err(Error::ProjectionDiverged { .. })),
            "expected failure, got {res:?}"
        );
    }

    #[test]
    fn rikitake_orbit_found_and_certified() {
        let orbit = rikitake_orbit();
        assert!(orbit.period() > 0.0);
        // period frozen from an independent adaptive-integration oracle
        assert!(
            (orbit.period() - 5.648750284).abs() < 1e-4,
            "period {} drifted from reference",
            orbit.period()
        );
        assert!(orbit.closure_residual() <= 1e-6);
        let (fh, fc) = orbit.fiber_residuals();
        assert!(fh <= 1e-6 && fc <= 1e-6);
        assert!(orbit.min_field_norm() > 0.0);
        assert!(orbit.sample_count() >= 256);
        assert!(orbit.anchor().distance(Vec3::new(1.0, 1.0, 1.0)) <= 1e-12);
    }

    #[test]
    fn harmonic_embedded_orbit_has_period_two_pi() {
        let sys = harmonic2d().embed();
        let orbit = find_periodic_orbit(&sys, 0.5, 0.0, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((orbit.period() - 2.0 * PI).abs() <= 1e-6, "period {}", orbit.period());
    }

    #[test]
    fn orbit_search_on_equilibrium_fiber_reports_failure() {
        // (h, c) = (-1, 1) is the fiber through the equilibrium (0, 0, 1),
        // where the level sets of H and C are tangent; the hypothesis
        // violation must surface as a diagnostic error
        let sys = rikitake(1.0);
        let opts = OrbitSearch { t_max: 60.0, ..OrbitSearch::default() };
        let res = find_periodic_orbit_with(&sys, -1.0, 1.0, Vec3::new(0.1, 0.1, 0.9), &opts);
        assert!(res.is_err(), "expected a diagnostic failure on the equilibrium fiber");
    }

    #[test]
    fn orbit_near_equilibrium_fiber_is_still_certified() {
        // a fiber passing close to (0, 0, 1) but missing the equilibrium
        // lines carries a slow but genuine periodic orbit
        let sys = rikitake(1.0);
        let seed = Vec3::new(0.05, 0.05, 1.0);
        let h = sys.h(seed);
        let c = sys.c(seed);
        let orbit = find_periodic_orbit(&sys, h, c, seed).unwrap();
        assert!(orbit.period() > 20.0, "period {}", orbit.period());
        assert!(orbit.closure_residual() <= 1e-6);
        assert!(orbit.min_field_norm() > 0.0);
    }

    #[test]
    fn orbit_distance_examples() {
        let orbit = rikitake_orbit();
        assert!(orbit_distance(&orbit, orbit.anchor()) <= 1e-9);

        let sys = rikitake(1.0);
        let u = offset_state(&orbit, &sys, None, 1e-3, 0.3);
        let d = orbit_distance(&orbit, u);
        assert!((0.5e-3..=1.5e-3).contains(&d), "distance {d}");
    }

    #[test]
    fn orbit_distance_circle() {
        let sys = harmonic2d().embed();
        let orbit = find_periodic_orbit(&sys, 0.5, 0.0, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let d = orbit_distance(&orbit, Vec3::new(2.0, 0.0, 0.0));
        assert!((d - 1.0).abs() <= 1e-6, "distance {d}");
    }

    #[test]
    fn phase_align_identity_and_shift() {
        let orbit = rikitake_orbit();
        let sys = rikitake(1.0);
        let field = hamiltonian_field(&sys);
        let t_orb = orbit.period();
        let cfg = IntegratorConfig::adaptive(1e-12, 1e-13);

        let traj = integrate(&field, orbit.anchor(), 2.0 * t_orb, &cfg).unwrap();
        let (theta, res) = phase_align(&orbit, &traj, (0.0, t_orb));
        let wrapped = theta.min(t_orb - theta);
        assert!(wrapped <= 1e-6 * t_orb, "theta {theta}");
        assert!(res <= 1e-9, "residual {res}");

        let start = orbit.interpolate(t_orb / 3.0);
        let traj = integrate(&field, start, 2.0 * t_orb, &cfg).unwrap();
        let (theta, _res) = phase_align(&orbit, &traj, (0.0, t_orb));
        assert!((theta - t_orb / 3.0).abs() <= 1e-4 * t_orb, "theta {theta}");
    }

    #[test]
    fn joint_monodromy_agrees_with_frozen_transport() {
        use crate::field::ScalarField;
        use crate::integrate::{monodromy_matrix, IntegratorConfig};
        use crate::perturbation::{build_perturbed_field, Mode};

        let orbit = rikitake_orbit();
        let spec = PerturbationSpec::new(rikitake(1.0), Mode::PreserveCStabilize, -1.0, 2.0)
            .with_alpha(ScalarField::constant(0.05));
        let field = build_perturbed_field(&spec);
        let m = monodromy_matrix(
            &field,
            orbit.anchor(),
            orbit.period(),
            &IntegratorConfig::adaptive(1e-11, 1e-13),
        )
        .unwrap();
        assert!(m.closed, "closure residual {}", m.closure_residual);
        // Abel-Liouville: det M = exp(int trace DY) in a moderate regime
        assert!(m.abel_liouville_residual() <= 1e-3, "residual {}", m.abel_liouville_residual());

        // eigenvalues of the jointly integrated matrix match the report from
        // the frozen-coefficient path
        let report = floquet_analysis(&spec, &orbit).unwrap();
        let mut joint: Vec<f64> =
            m.matrix.complex_eigenvalues().iter().map(|e| e.norm()).collect();
        joint.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in joint.iter().zip(report.computed_moduli()) {
            assert!((a - b).abs() <= 1e-3 * b.max(1e-6), "joint {a} vs frozen {b}");
        }
        // two unit multipliers and the predicted contraction
        assert!((joint[0] - 1.0).abs() <= 1e-3);
        assert!((joint[1] - 1.0).abs() <= 1e-3);
        assert!((joint[2] - report.exponent_h.exp()).abs() <= 1e-3 * joint[2]);
    }

    #[test]
    fn preserve_h_floquet_and_small_offset_decay_fit() {
        use crate::field::ScalarField;
        use crate::integrate::IntegratorConfig;
        use crate::perturbation::{build_perturbed_field, Mode};

        let sys = rikitake(1.0);
        let gain = 0.05;
        let spec = PerturbationSpec::new(sys.clone(), Mode::PreserveHStabilize, -1.0, 2.0)
            .with_beta(ScalarField::constant(gain));
        let (orbit, report) = analyze_spec(&spec, Vec3::new(1.0, 1.0, 1.0)).unwrap();
        assert!(report.max_rel_error <= 1e-3, "rel err {}", report.max_rel_error);
        assert_eq!(report.trivial_count, 2);
        assert!(report.computed_moduli()[2] < 1.0);

        // |C - c| decays at the mean closed-form rate for a small offset
        let (_, mean_lc) = mean_decay_rates(&spec, &orbit);
        let u0 = offset_state(&orbit, &sys, Some(Preserved::Hamiltonian), 1e-3, 0.2);
        let field = build_perturbed_field(&spec);
        let traj =
            integrate(&field, u0, 12.0 * orbit.period(), &IntegratorConfig::adaptive(1e-11, 1e-13))
                .unwrap();
        let env = per_period_envelope(&traj, orbit.period(), |u| sys.c(u) - 2.0);
        let keep: Vec<(f64, f64)> =
            env.iter().copied().filter(|e| e.1 > 1e-9 * env[0].1.max(1e-3)).collect();
        let ts: Vec<f64> = keep.iter().map(|e| e.0).collect();
        let vs: Vec<f64> = keep.iter().map(|e| e.1).collect();
        let rate = fit_exponential_rate(&ts, &vs, 0.0).unwrap();
        assert!(
            (rate - mean_lc).abs() <= 0.1 * mean_lc.abs(),
            "fitted {rate} vs mean rate {mean_lc}"
        );
        // the Hamiltonian stays pinned meanwhile
        let mut drift = 0.0f64;
        for u in traj.states() {
            drift = drift.max((sys.h(*u) + 1.0).abs());
        }
        assert!(drift <= 1e-6, "H drift {drift}");
    }

    #[test]
    fn fit_exponential_rate_recovers_synthetic_slope() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let vals: Vec<f64> = ts.iter().map(|t| 3.0 * (-0.8 * t).exp()).collect();
        let rate = fit_exponential_rate(&ts, &vals, 1e-300).unwrap();
        assert!((rate + 0.8).abs() < 1e-12);
    }

    #[test]
    fn offset_state_projects_onto_preserved_level() {
        let orbit = rikitake_orbit();
        let sys = rikitake(1.0);
        let u = offset_state(&orbit, &sys, Some(Preserved::Casimir), 1e-2, 0.0);
        assert!((sys.c(u) - 2.0).abs() <= 1e-12);
        let d = orbit_distance(&orbit, u);
        assert!((0.3e-2..=1.7e-2).contains(&d), "distance {d}");
    }
}

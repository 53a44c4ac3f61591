//! ODE integration: fixed-step classical RK4 and adaptive Dormand-Prince
//! 5(4) with cubic Hermite dense output, Poincare-section event
//! localization, and variational (monodromy) transport.

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::field::VectorField3;
use crate::vec3::{Mat3, Vec3};

/// Stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fixed-step 4th-order Runge-Kutta.
    Rk4 { step: f64 },
    /// Embedded Dormand-Prince 5(4) with PI-free step control.
    Dopri45 { rel_tol: f64, abs_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn adaptive(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorConfig { method: Method::Dopri45 { rel_tol, abs_tol }, max_steps: 10_000_000 }
    }

    pub fn fixed(step: f64) -> Self {
        IntegratorConfig { method: Method::Rk4 { step }, max_steps: 10_000_000 }
    }

    fn validate(&self) {
        match self.method {
            Method::Rk4 { step } => assert!(step > 0.0, "step must be positive"),
            Method::Dopri45 { rel_tol, abs_tol } => {
                assert!(rel_tol > 0.0 && abs_tol > 0.0, "tolerances must be positive")
            }
        }
        assert!(self.max_steps > 0);
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig::adaptive(1e-10, 1e-12)
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

pub(crate) struct RawTrajectory<const N: usize> {
    pub ts: Vec<f64>,
    pub ys: Vec<SVector<f64, N>>,
    pub fs: Vec<SVector<f64, N>>,
}

impl<const N: usize> RawTrajectory<N> {
    pub fn last(&self) -> &SVector<f64, N> {
        self.ys.last().expect("trajectory has at least one node")
    }
}

fn finite<const N: usize>(y: &SVector<f64, N>) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn error_norm<const N: usize>(
    err: &SVector<f64, N>,
    y0: &SVector<f64, N>,
    y1: &SVector<f64, N>,
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = abs_tol + rel_tol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sc;
        acc += e * e;
    }
    (acc / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    f: &F,
    t0: f64,
    span: f64,
    y0: &SVector<f64, N>,
    f0: &SVector<f64, N>,
    rel_tol: f64,
    abs_tol: f64,
) -> f64
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let sc = |y: &SVector<f64, N>, i: usize| abs_tol + rel_tol * y[i].abs();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let s = sc(y0, i);
        d0 += (y0[i] / s).powi(2);
        d1 += (f0[i] / s).powi(2);
    }
    d0 = (d0 / N as f64).sqrt();
    d1 = (d1 / N as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = y0 + f0 * h0;
    let f1 = f(t0 + h0, &y1);
    let mut d2 = 0.0;
    for i in 0..N {
        d2 += ((f1[i] - f0[i]) / sc(y0, i)).powi(2);
    }
    d2 = (d2 / N as f64).sqrt() / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dm).powf(0.2) };
    h1.min(100.0 * h0).min(span)
}

pub(crate) fn run_dopri<const N: usize, F>(
    f: &F,
    t0: f64,
    t1: f64,
    y0: SVector<f64, N>,
    rel_tol: f64,
    abs_tol: f64,
    max_steps: usize,
) -> Result<RawTrajectory<N>>
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let span = t1 - t0;
    let mut traj = RawTrajectory {
        ts: Vec::with_capacity(256),
        ys: Vec::with_capacity(256),
        fs: Vec::with_capacity(256),
    };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    traj.ts.push(t);
    traj.ys.push(y);
    traj.fs.push(k1);
    if span == 0.0 {
        return Ok(traj);
    }
    let mut h = initial_step(f, t0, span, &y, &k1, rel_tol, abs_tol);
    let mut steps = 0usize;
    while t < t1 {
        if steps >= max_steps {
            return Err(Error::MaxStepsExceeded { t, max_steps });
        }
        steps += 1;
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }
        if t + h > t1 {
            h = t1 - t;
        }
        let k2 = f(t + C2 * h, &(y + k1 * (A21 * h)));
        let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
        let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
        let k5 = f(t + C5 * h, &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
        let k6 = f(t + h, &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
        let y_new = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
        let k7 = f(t + h, &y_new);
        let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let err_norm = error_norm(&err, &y, &y_new, rel_tol, abs_tol);
        if err_norm <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7; // FSAL
            if !finite(&y) {
                return Err(Error::NonFiniteState { t });
            }
            traj.ts.push(t);
            traj.ys.push(y);
            traj.fs.push(k1);
            let fac = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(traj)
}

pub(crate) fn run_rk4<const N: usize, F>(
    f: &F,
    t0: f64,
    t1: f64,
    y0: SVector<f64, N>,
    step: f64,
    max_steps: usize,
) -> Result<RawTrajectory<N>>
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let span = t1 - t0;
    let n_steps = (span / step).ceil().max(1.0) as usize;
    if n_steps > max_steps {
        return Err(Error::MaxStepsExceeded { t: t0, max_steps });
    }
    let h = span / n_steps as f64;
    let mut traj = RawTrajectory {
        ts: Vec::with_capacity(n_steps + 1),
        ys: Vec::with_capacity(n_steps + 1),
        fs: Vec::with_capacity(n_steps + 1),
    };
    let mut t = t0;
    let mut y = y0;
    let mut fy = f(t, &y);
    traj.ts.push(t);
    traj.ys.push(y);
    traj.fs.push(fy);
    if span == 0.0 {
        return Ok(traj);
    }
    for i in 0..n_steps {
        let k1 = fy;
        let k2 = f(t + 0.5 * h, &(y + k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(y + k2 * (0.5 * h)));
        let k4 = f(t + h, &(y + k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t = t0 + (i + 1) as f64 * h;
        if !finite(&y) {
            return Err(Error::NonFiniteState { t });
        }
        fy = f(t, &y);
        traj.ts.push(t);
        traj.ys.push(y);
        traj.fs.push(fy);
    }
    Ok(traj)
}

pub(crate) fn run_core<const N: usize, F>(
    f: &F,
    t0: f64,
    t1: f64,
    y0: SVector<f64, N>,
    cfg: &IntegratorConfig,
) -> Result<RawTrajectory<N>>
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    cfg.validate();
    match cfg.method {
        Method::Rk4 { step } => run_rk4(f, t0, t1, y0, step, cfg.max_steps),
        Method::Dopri45 { rel_tol, abs_tol } => {
            run_dopri(f, t0, t1, y0, rel_tol, abs_tol, cfg.max_steps)
        }
    }
}

/// Cubic Hermite interpolation on one interval; `theta` in [0, 1].
#[inline]
pub(crate) fn hermite<const N: usize>(
    y0: &SVector<f64, N>,
    f0: &SVector<f64, N>,
    y1: &SVector<f64, N>,
    f1: &SVector<f64, N>,
    h: f64,
    theta: f64,
) -> SVector<f64, N> {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + f0 * (h * (t3 - 2.0 * t2 + theta))
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + f1 * (h * (t3 - t2))
}

#[inline]
fn hermite_deriv<const N: usize>(
    y0: &SVector<f64, N>,
    f0: &SVector<f64, N>,
    y1: &SVector<f64, N>,
    f1: &SVector<f64, N>,
    h: f64,
    theta: f64,
) -> SVector<f64, N> {
    let t2 = theta * theta;
    y0 * ((6.0 * t2 - 6.0 * theta) / h)
        + f0 * (3.0 * t2 - 4.0 * theta + 1.0)
        + y1 * ((6.0 * theta - 6.0 * t2) / h)
        + f1 * (3.0 * t2 - 2.0 * theta)
}

fn vec3_to_sv(v: Vec3) -> SVector<f64, 3> {
    SVector::<f64, 3>::new(v.x, v.y, v.z)
}

fn sv_to_vec3(v: &SVector<f64, 3>) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

/// A computed solution path with cubic Hermite dense output. Node values are
/// reproduced exactly; between nodes the interpolant tracks the solution to
/// roughly the integration tolerance.
pub struct Trajectory {
    ts: Vec<f64>,
    ys: Vec<Vec3>,
    fs: Vec<Vec3>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn states(&self) -> &[Vec3] {
        &self.ys
    }

    pub fn derivs(&self) -> &[Vec3] {
        &self.fs
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.ts[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.ts.last().expect("non-empty")
    }

    pub fn end_state(&self) -> Vec3 {
        *self.ys.last().expect("non-empty")
    }

    fn interval_of(&self, t: f64) -> usize {
        match self.ts.binary_search_by(|x| x.partial_cmp(&t).expect("finite times")) {
            Ok(i) => i.min(self.ts.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.ts.len() - 2),
        }
    }

    /// Dense evaluation at any `t` within the integration span.
    pub fn sample(&self, t: f64) -> Vec3 {
        assert!(self.len() >= 1, "empty trajectory");
        if self.len() == 1 {
            return self.ys[0];
        }
        let span = self.end_time() - self.start_time();
        let slack = 1e-9 * span.abs().max(1.0);
        assert!(
            t >= self.start_time() - slack && t <= self.end_time() + slack,
            "sample time {t} outside [{}, {}]",
            self.start_time(),
            self.end_time()
        );
        let t = t.clamp(self.start_time(), self.end_time());
        let i = self.interval_of(t);
        let h = self.ts[i + 1] - self.ts[i];
        let theta = (t - self.ts[i]) / h;
        let v = hermite(
            &vec3_to_sv(self.ys[i]),
            &vec3_to_sv(self.fs[i]),
            &vec3_to_sv(self.ys[i + 1]),
            &vec3_to_sv(self.fs[i + 1]),
            h,
            theta,
        );
        sv_to_vec3(&v)
    }

    /// Time derivative of the interpolant at `t`.
    pub fn sample_deriv(&self, t: f64) -> Vec3 {
        assert!(self.len() >= 2, "need at least two nodes");
        let t = t.clamp(self.start_time(), self.end_time());
        let i = self.interval_of(t);
        let h = self.ts[i + 1] - self.ts[i];
        let theta = (t - self.ts[i]) / h;
        let v = hermite_deriv(
            &vec3_to_sv(self.ys[i]),
            &vec3_to_sv(self.fs[i]),
            &vec3_to_sv(self.ys[i + 1]),
            &vec3_to_sv(self.fs[i + 1]),
            h,
            theta,
        );
        sv_to_vec3(&v)
    }
}

/// Integrate `field` from `u0` over [0, t_end].
///
/// `t_end = 0` yields a single-node trajectory. Errors: step underflow, step
/// budget exhaustion, or a non-finite state.
pub fn integrate(
    field: &VectorField3,
    u0: Vec3,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    assert!(t_end >= 0.0, "t_end must be nonnegative");
    crate::field::require_finite(u0, "integrate")?;
    let f = |_t: f64, y: &SVector<f64, 3>| vec3_to_sv(field.eval(sv_to_vec3(y)));
    let raw = run_core(&f, 0.0, t_end, vec3_to_sv(u0), cfg)?;
    Ok(Trajectory {
        ts: raw.ts,
        ys: raw.ys.iter().map(sv_to_vec3).collect(),
        fs: raw.fs.iter().map(sv_to_vec3).collect(),
    })
}

/// An oriented plane section {u : <u - point, normal> = 0}.
#[derive(Debug, Clone, Copy)]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
}

impl Plane {
    pub fn new(point: Vec3, normal: Vec3) -> Self {
        assert!(normal.norm() > 0.0, "section normal must be nonzero");
        Plane { point, normal }
    }

    #[inline]
    pub fn signed_distance(&self, u: Vec3) -> f64 {
        (u - self.point).dot(self.normal)
    }
}

/// Positive (upward) crossings of `plane` along the flow of `field` from
/// `u0`, localized on the dense interpolant by bisection refined to 1e-12 in
/// time. Returns the first `count` crossings as (t, state).
///
/// A crossing is counted when the section function passes from negative to
/// nonnegative with positive time derivative, so a start exactly on the
/// section does not count itself.
pub fn locate_section_crossings(
    field: &VectorField3,
    u0: Vec3,
    t_max: f64,
    plane: &Plane,
    count: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, Vec3)>> {
    let traj = integrate(field, u0, t_max, cfg)?;
    let crossings = scan_crossings(&traj, plane, count);
    if crossings.len() < count {
        return Err(Error::FewerCrossings { found: crossings.len(), requested: count });
    }
    Ok(crossings)
}

/// Scan an existing trajectory for upward crossings (up to `count`).
pub fn scan_crossings(traj: &Trajectory, plane: &Plane, count: usize) -> Vec<(f64, Vec3)> {
    let mut out = Vec::new();
    if traj.len() < 2 {
        return out;
    }
    let g = |t: f64| plane.signed_distance(traj.sample(t));
    // subsample each step so short-lived excursions inside one step are seen
    const SUB: usize = 4;
    'outer: for i in 0..traj.len() - 1 {
        let (ta, tb) = (traj.times()[i], traj.times()[i + 1]);
        let mut prev_t = ta;
        let mut prev_g = g(ta);
        for s in 1..=SUB {
            let t = ta + (tb - ta) * s as f64 / SUB as f64;
            let cur_g = g(t);
            if prev_g < 0.0 && cur_g >= 0.0 {
                if let Some(tc) = bisect_root(&g, prev_t, t) {
                    if traj.sample_deriv(tc).dot(plane.normal) > 0.0 {
                        out.push((tc, traj.sample(tc)));
                        if out.len() == count {
                            break 'outer;
                        }
                    }
                }
            }
            prev_t = t;
            prev_g = cur_g;
        }
    }
    out
}

fn bisect_root(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let mut ga = g(a);
    let gb = g(b);
    if ga >= 0.0 || gb < 0.0 {
        return if gb == 0.0 { Some(b) } else { None };
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= 1e-12 * mid.abs().max(1.0) {
            break;
        }
        let gm = g(mid);
        if gm < 0.0 {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    let _ = ga;
    Some(b)
}

/// Monodromy data for a (numerically) T-periodic trajectory.
#[derive(Debug, Clone)]
pub struct Monodromy {
    /// Solution of the variational system at t = T.
    pub matrix: Mat3,
    pub period: f64,
    /// |u(T) - u(0)|.
    pub closure_residual: f64,
    /// Whether the closure residual met the 1e-6 tolerance; the matrix is
    /// returned either way.
    pub closed: bool,
    /// Integral of trace DY along the trajectory (Abel-Liouville exponent).
    pub trace_integral: f64,
}

impl Monodromy {
    /// Relative defect of det M = exp(integral of trace DY), a consistency
    /// check between the transported matrix and the divergence along the
    /// path.
    pub fn abel_liouville_residual(&self) -> f64 {
        let expected = self.trace_integral.exp();
        (self.matrix.determinant() - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
    }
}

/// Closure tolerance used to flag non-periodic anchors.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

/// Integrate the state jointly with the variational system dM/dt = DY(u) M,
/// M(0) = I, over [0, T]. The field's exact Jacobian is used when present,
/// otherwise central finite differences.
pub fn monodromy_matrix(
    field: &VectorField3,
    anchor: Vec3,
    period: f64,
    cfg: &IntegratorConfig,
) -> Result<Monodromy> {
    assert!(period > 0.0, "period must be positive");
    crate::field::require_finite(anchor, "monodromy_matrix")?;
    // layout: [u, M (row-major), trace integral]
    let f = |_t: f64, y: &SVector<f64, 13>| {
        let u = Vec3::new(y[0], y[1], y[2]);
        let v = field.eval(u);
        let j = field.jacobian(u);
        let mut out = SVector::<f64, 13>::zeros();
        out[0] = v.x;
        out[1] = v.y;
        out[2] = v.z;
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += j[(r, k)] * y[3 + 3 * k + c];
                }
                out[3 + 3 * r + c] = acc;
            }
        }
        out[12] = j.trace();
        out
    };
    let mut y0 = SVector::<f64, 13>::zeros();
    y0[0] = anchor.x;
    y0[1] = anchor.y;
    y0[2] = anchor.z;
    y0[3] = 1.0;
    y0[7] = 1.0;
    y0[11] = 1.0;
    let raw = run_core(&f, 0.0, period, y0, cfg)?;
    let end = raw.last();
    let u_end = Vec3::new(end[0], end[1], end[2]);
    let mut m = Mat3::zeros();
    for r in 0..3 {
        for c in 0..3 {
            m[(r, c)] = end[3 + 3 * r + c];
        }
    }
    let closure_residual = u_end.distance(anchor);
    Ok(Monodromy {
        matrix: m,
        period,
        closure_residual,
        closed: closure_residual <= CLOSURE_TOLERANCE,
        trace_integral: end[12],
    })
}

/// Transport a 3x3 matrix along the linear system dM/dt = A(t) M with frozen
/// time-dependent coefficients, adaptively to (rel_tol, abs_tol).
pub fn transport_matrix(
    coeffs: &dyn Fn(f64) -> Mat3,
    t0: f64,
    t1: f64,
    m0: Mat3,
    rel_tol: f64,
    abs_tol: f64,
    max_steps: usize,
) -> Result<Mat3> {
    let f = |t: f64, y: &SVector<f64, 9>| {
        let a = coeffs(t);
        let mut out = SVector::<f64, 9>::zeros();
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += a[(r, k)] * y[3 * k + c];
                }
                out[3 * r + c] = acc;
            }
        }
        out
    };
    let mut y0 = SVector::<f64, 9>::zeros();
    for r in 0..3 {
        for c in 0..3 {
            y0[3 * r + c] = m0[(r, c)];
        }
    }
    let raw = run_dopri(&f, t0, t1, y0, rel_tol, abs_tol, max_steps)?;
    let end = raw.last();
    let mut m = Mat3::zeros();
    for r in 0..3 {
        for c in 0..3 {
            m[(r, c)] = end[3 * r + c];
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::hamiltonian_field;
    use crate::systems::rikitake;
    use std::f64::consts::PI;

    fn rotation_field() -> VectorField3 {
        VectorField3::new(|u: Vec3| Vec3::new(u.y, -u.x, 0.0))
    }

    #[test]
    fn rotation_quarter_turn() {
        let traj = integrate(
            &rotation_field(),
            Vec3::new(1.0, 0.0, 0.0),
            PI / 2.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let end = traj.end_state();
        assert!((end - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-8, "end {end}");
    }

    #[test]
    fn zero_field_is_constant() {
        let f = VectorField3::new(|_| Vec3::ZERO);
        let u0 = Vec3::new(0.4, -2.0, 1.0);
        let traj = integrate(&f, u0, 5.0, &IntegratorConfig::default()).unwrap();
        for s in traj.states() {
            assert_eq!(*s, u0);
        }
    }

    #[test]
    fn zero_length_run_has_single_node() {
        let traj = integrate(
            &rotation_field(),
            Vec3::new(1.0, 0.0, 0.0),
            0.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.end_time(), 0.0);
    }

    #[test]
    fn rk4_rotation() {
        let cfg = IntegratorConfig::fixed(1e-3);
        let traj = integrate(&rotation_field(), Vec3::new(1.0, 0.0, 0.0), PI / 2.0, &cfg).unwrap();
        assert!((traj.end_state() - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn rikitake_conservation_medium_run() {
        let sys = rikitake(1.0);
        let x = hamiltonian_field(&sys);
        let traj =
            integrate(&x, Vec3::new(1.0, 1.0, 1.0), 20.0, &IntegratorConfig::adaptive(1e-10, 1e-12))
                .unwrap();
        let mut worst_h = 0.0f64;
        let mut worst_c = 0.0f64;
        for s in traj.states() {
            worst_h = worst_h.max((sys.h(*s) + 1.0).abs());
            worst_c = worst_c.max((sys.c(*s) - 2.0).abs());
        }
        // drift budget: 10 * rel_tol * t_end
        assert!(worst_h <= 10.0 * 1e-10 * 20.0, "H drift {worst_h}");
        assert!(worst_c <= 10.0 * 1e-10 * 20.0, "C drift {worst_c}");
    }

    #[test]
    fn interpolant_error_on_rotation() {
        let traj = integrate(
            &rotation_field(),
            Vec3::new(1.0, 0.0, 0.0),
            2.0 * PI,
            &IntegratorConfig::adaptive(1e-10, 1e-12),
        )
        .unwrap();
        let mut worst = 0.0f64;
        for i in 0..traj.len() - 1 {
            let tm = 0.5 * (traj.times()[i] + traj.times()[i + 1]);
            let exact = Vec3::new(tm.cos(), -tm.sin(), 0.0);
            worst = worst.max((traj.sample(tm) - exact).norm());
        }
        assert!(worst <= 1e-6, "interpolant error {worst}");
    }

    #[test]
    fn non_finite_state_detected() {
        // quadratic blowup reaches infinity in finite time
        let f = VectorField3::new(|u: Vec3| Vec3::new(u.x * u.x, 0.0, 0.0));
        let res = integrate(&f, Vec3::new(1.0, 0.0, 0.0), 5.0, &IntegratorConfig::default());
        assert!(matches!(
            res,
            Err(Error::NonFiniteState { .. })
                | Err(Error::StepUnderflow { .. })
                | Err(Error::MaxStepsExceeded { .. })
        ));
    }

    #[test]
    fn section_crossing_rotation() {
        // u(t) = (cos t, -sin t); x = 0 going upward first at t = 3 pi / 2.
        let plane = Plane::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0));
        let crossings = locate_section_crossings(
            &rotation_field(),
            Vec3::new(1.0, 0.0, 0.0),
            10.0,
            &plane,
            1,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let (t, u) = crossings[0];
        assert!((t - 3.0 * PI / 2.0).abs() < 1e-9, "t = {t}");
        assert!(plane.signed_distance(u).abs() <= 1e-10);
    }

    #[test]
    fn section_no_crossing_errors() {
        // constant field parallel to the section plane never crosses
        let f = VectorField3::new(|_| Vec3::new(0.0, 1.0, 0.0));
        let plane = Plane::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let res = locate_section_crossings(
            &f,
            Vec3::ZERO,
            5.0,
            &plane,
            1,
            &IntegratorConfig::default(),
        );
        assert!(matches!(res, Err(Error::FewerCrossings { found: 0, requested: 1 })));
    }

    #[test]
    fn monodromy_of_diagonal_linear_field() {
        let a = Mat3::from_diagonal(&nalgebra::Vector3::new(-1.0, 0.0, 0.0));
        let f = VectorField3::new(move |u: Vec3| {
            let v = a * nalgebra::Vector3::new(u.x, u.y, u.z);
            Vec3::new(v.x, v.y, v.z)
        })
        .with_jacobian(move |_| a);
        let m = monodromy_matrix(&f, Vec3::ZERO, 1.0, &IntegratorConfig::adaptive(1e-11, 1e-13))
            .unwrap();
        let expected = Mat3::from_diagonal(&nalgebra::Vector3::new((-1.0f64).exp(), 1.0, 1.0));
        assert!((m.matrix - expected).norm() < 1e-8);
        assert!(m.closed);
        assert!(m.abel_liouville_residual() < 1e-8);
    }

    #[test]
    fn monodromy_of_zero_field_is_identity() {
        let f = VectorField3::new(|_| Vec3::ZERO).with_jacobian(|_| Mat3::zeros());
        let m = monodromy_matrix(&f, Vec3::new(1.0, 2.0, 3.0), 2.0, &IntegratorConfig::default())
            .unwrap();
        assert!((m.matrix - Mat3::identity()).norm() < 1e-12);
    }

    #[test]
    fn monodromy_of_rotation_has_unit_multipliers() {
        let m = monodromy_matrix(
            &rotation_field(),
            Vec3::new(1.0, 0.0, 0.0),
            2.0 * PI,
            &IntegratorConfig::adaptive(1e-11, 1e-13),
        )
        .unwrap();
        assert!(m.closed);
        let eigs = m.matrix.complex_eigenvalues();
        for e in eigs.iter() {
            assert!((e - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-6, "eig {e}");
        }
    }

    #[test]
    fn monodromy_flags_non_periodic_anchor() {
        // translation flow never closes
        let f = VectorField3::new(|_| Vec3::new(1.0, 0.0, 0.0)).with_jacobian(|_| Mat3::zeros());
        let m = monodromy_matrix(&f, Vec3::ZERO, 1.0, &IntegratorConfig::default()).unwrap();
        assert!(!m.closed);
        assert!((m.closure_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transport_matches_monodromy_for_frozen_coefficients() {
        // time-dependent but state-independent coefficients
        let coeffs = |t: f64| {
            let mut a = Mat3::zeros();
            a[(0, 1)] = t.sin();
            a[(1, 0)] = -t.sin();
            a[(2, 2)] = 0.1;
            a
        };
        let m = transport_matrix(&coeffs, 0.0, 3.0, Mat3::identity(), 1e-11, 1e-13, 1_000_000)
            .unwrap();
        // det M = exp(int trace) = exp(0.3)
        assert!((m.determinant() - 0.3f64.exp()).abs() < 1e-9);
    }
}

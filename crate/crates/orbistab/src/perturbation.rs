//! Constructive perturbations that stabilize or destabilize a periodic orbit
//! sitting on the level pair {H = h} ∩ {C = c}, without knowing a
//! parameterization of the orbit.
//!
//! The Casimir-preserving term is
//!     -alpha (H - h) [grad C x (grad H x grad C)],
//! the Hamiltonian-preserving term is
//!     +beta (C - c) [grad H x (grad H x grad C)],
//! added to the conservative field X = nu (grad H x grad C). Both vanish on
//! the target fiber, so the orbit survives the perturbation; the triple
//! product expansion gives the exact Lie-derivative identities
//!     d(H - h)/dt = lambda_H (H - h),   lambda_H = -alpha |grad H x grad C|^2,
//!     d(C - c)/dt = lambda_C (C - c),   lambda_C = -beta  |grad H x grad C|^2,
//! with the sign in front of a gain flipped for the destabilizing variants.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::field::{ScalarField, SystemDef, VectorField3};
use crate::vec3::{cross, Mat3, Vec3};

/// Which perturbed system to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Keep C invariant, drive H to h (stable along {C = c}).
    PreserveCStabilize,
    /// Keep C invariant, drive H away from h.
    PreserveCDestabilize,
    /// Keep H invariant, drive C to c (stable along {H = h}).
    PreserveHStabilize,
    /// Keep H invariant, drive C away from c.
    PreserveHDestabilize,
    /// Drive both integrals to their targets; conservativity is lost.
    FullStabilize,
    /// Full perturbation with the sign in front of alpha flipped.
    FullDestabilizeFlipAlpha,
    /// Full perturbation with the sign in front of beta flipped.
    FullDestabilizeFlipBeta,
}

/// Integral kept invariant by a perturbed system, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preserved {
    Hamiltonian,
    Casimir,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::PreserveCStabilize,
        Mode::PreserveCDestabilize,
        Mode::PreserveHStabilize,
        Mode::PreserveHDestabilize,
        Mode::FullStabilize,
        Mode::FullDestabilizeFlipAlpha,
        Mode::FullDestabilizeFlipBeta,
    ];

    pub fn uses_c_term(self) -> bool {
        !matches!(self, Mode::PreserveHStabilize | Mode::PreserveHDestabilize)
    }

    pub fn uses_h_term(self) -> bool {
        !matches!(self, Mode::PreserveCStabilize | Mode::PreserveCDestabilize)
    }

    /// Sign in front of alpha: -1 stabilizing, +1 flipped.
    pub fn alpha_sign(self) -> f64 {
        match self {
            Mode::PreserveCDestabilize | Mode::FullDestabilizeFlipAlpha => 1.0,
            _ => -1.0,
        }
    }

    /// Sign in front of beta: +1 stabilizing, -1 flipped.
    pub fn beta_sign(self) -> f64 {
        match self {
            Mode::PreserveHDestabilize | Mode::FullDestabilizeFlipBeta => -1.0,
            _ => 1.0,
        }
    }

    pub fn preserved(self) -> Option<Preserved> {
        match self {
            Mode::PreserveCStabilize | Mode::PreserveCDestabilize => Some(Preserved::Casimir),
            Mode::PreserveHStabilize | Mode::PreserveHDestabilize => Some(Preserved::Hamiltonian),
            _ => None,
        }
    }

    pub fn is_stabilizing(self) -> bool {
        matches!(self, Mode::PreserveCStabilize | Mode::PreserveHStabilize | Mode::FullStabilize)
    }

    /// Multiplicity of the trivial Floquet multiplier 1 predicted for an
    /// orbit of the perturbed system: the flow tangent always contributes
    /// one, a preserved integral contributes another.
    pub fn trivial_multiplier_count(self) -> usize {
        if self.preserved().is_some() {
            2
        } else {
            1
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::PreserveCStabilize => "preserve_c_stabilize",
            Mode::PreserveCDestabilize => "preserve_c_destabilize",
            Mode::PreserveHStabilize => "preserve_h_stabilize",
            Mode::PreserveHDestabilize => "preserve_h_destabilize",
            Mode::FullStabilize => "full_stabilize",
            Mode::FullDestabilizeFlipAlpha => "full_destabilize_flip_alpha",
            Mode::FullDestabilizeFlipBeta => "full_destabilize_flip_beta",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown perturbation mode `{s}`"))
    }
}

/// Everything needed to assemble one of the perturbed systems: the base
/// system, the target fiber values, the gain fields, and the mode.
///
/// Gains must be strictly positive on the working subset; alpha scales the
/// Casimir-preserving term, beta the Hamiltonian-preserving term. Both
/// default to the constant 1.
#[derive(Clone)]
pub struct PerturbationSpec {
    pub system: SystemDef,
    pub h: f64,
    pub c: f64,
    pub alpha: ScalarField,
    pub beta: ScalarField,
    pub mode: Mode,
}

impl PerturbationSpec {
    pub fn new(system: SystemDef, mode: Mode, h: f64, c: f64) -> Self {
        PerturbationSpec {
            system,
            h,
            c,
            alpha: ScalarField::constant(1.0),
            beta: ScalarField::constant(1.0),
            mode,
        }
    }

    /// Fill (h, c) from the integrals at a seed point; the fiber through the
    /// seed is then the invariant target set.
    pub fn from_seed(system: SystemDef, mode: Mode, seed: Vec3) -> Self {
        let h = system.h(seed);
        let c = system.c(seed);
        PerturbationSpec::new(system, mode, h, c)
    }

    pub fn with_alpha(mut self, alpha: ScalarField) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_beta(mut self, beta: ScalarField) -> Self {
        self.beta = beta;
        self
    }
}

/// The signed Casimir-preserving term
/// s_alpha * alpha(u) (H(u) - h) [grad C x (grad H x grad C)],
/// with s_alpha = -1 for stabilizing modes.
///
/// Orthogonal to grad C pointwise, and vanishes wherever H = h.
pub fn c_preserving_term(spec: &PerturbationSpec) -> VectorField3 {
    let sys = spec.system.clone();
    let alpha = spec.alpha.clone();
    let h = spec.h;
    let sign = spec.mode.alpha_sign();
    VectorField3::new(move |u| {
        let gh = sys.grad_h(u);
        let gc = sys.grad_c(u);
        let g = cross(gh, gc);
        cross(gc, g) * (sign * alpha.eval(u) * (sys.h(u) - h))
    })
}

/// The signed Hamiltonian-preserving term
/// s_beta * beta(u) (C(u) - c) [grad H x (grad H x grad C)],
/// with s_beta = +1 for stabilizing modes.
///
/// Orthogonal to grad H pointwise, and vanishes wherever C = c.
pub fn h_preserving_term(spec: &PerturbationSpec) -> VectorField3 {
    let sys = spec.system.clone();
    let beta = spec.beta.clone();
    let c = spec.c;
    let sign = spec.mode.beta_sign();
    VectorField3::new(move |u| {
        let gh = sys.grad_h(u);
        let gc = sys.grad_c(u);
        let g = cross(gh, gc);
        cross(gh, g) * (sign * beta.eval(u) * (sys.c(u) - c))
    })
}

struct Assembled {
    sys: SystemDef,
    alpha: ScalarField,
    beta: ScalarField,
    h: f64,
    c: f64,
    s_alpha: f64,
    s_beta: f64,
    use_c: bool,
    use_h: bool,
}

impl Assembled {
    fn eval(&self, u: Vec3) -> Vec3 {
        let gh = self.sys.grad_h(u);
        let gc = self.sys.grad_c(u);
        let g = cross(gh, gc);
        let mut out = g * self.sys.nu.eval(u);
        if self.use_c {
            out += cross(gc, g) * (self.s_alpha * self.alpha.eval(u) * (self.sys.h(u) - self.h));
        }
        if self.use_h {
            out += cross(gh, g) * (self.s_beta * self.beta.eval(u) * (self.sys.c(u) - self.c));
        }
        out
    }

    /// Analytic Jacobian assembled by the product rule from the gradients and
    /// Hessians of the ingredient fields.
    fn jacobian(&self, u: Vec3) -> Mat3 {
        let gh = self.sys.grad_h(u);
        let gc = self.sys.grad_c(u);
        let hess_h = self.sys.hamiltonian.hess(u).expect("exact Jacobian requires Hessian of H");
        let hess_c = self.sys.casimir.hess(u).expect("exact Jacobian requires Hessian of C");
        let g = cross(gh, gc);
        let nu = self.sys.nu.eval(u);
        let grad_nu = self.sys.nu.grad(u);

        let col = |m: &Mat3, j: usize| Vec3::new(m[(0, j)], m[(1, j)], m[(2, j)]);

        let (w, s, grad_s) = if self.use_c {
            let a = self.alpha.eval(u);
            let ga = self.alpha.grad(u);
            let dh = self.sys.h(u) - self.h;
            (cross(gc, g), self.s_alpha * a * dh, (gh * a + ga * dh) * self.s_alpha)
        } else {
            (Vec3::ZERO, 0.0, Vec3::ZERO)
        };
        let (v, t, grad_t) = if self.use_h {
            let b = self.beta.eval(u);
            let gb = self.beta.grad(u);
            let dc = self.sys.c(u) - self.c;
            (cross(gh, g), self.s_beta * b * dc, (gc * b + gb * dc) * self.s_beta)
        } else {
            (Vec3::ZERO, 0.0, Vec3::ZERO)
        };

        let mut m = Mat3::zeros();
        let grad_nu_arr = grad_nu.to_array();
        let grad_s_arr = grad_s.to_array();
        let grad_t_arr = grad_t.to_array();
        for j in 0..3 {
            let hh_j = col(&hess_h, j);
            let hc_j = col(&hess_c, j);
            let dg_j = cross(hh_j, gc) + cross(gh, hc_j);
            let mut out = dg_j * nu + g * grad_nu_arr[j];
            if self.use_c {
                let dw_j = cross(hc_j, g) + cross(gc, dg_j);
                out += w * grad_s_arr[j] + dw_j * s;
            }
            if self.use_h {
                let dv_j = cross(hh_j, g) + cross(gh, dg_j);
                out += v * grad_t_arr[j] + dv_j * t;
            }
            m[(0, j)] = out.x;
            m[(1, j)] = out.y;
            m[(2, j)] = out.z;
        }
        m
    }
}

/// The perturbed field X + (selected signed terms) for the spec's mode.
///
/// On the target fiber both terms vanish and the field equals X exactly, so
/// a periodic orbit on the fiber is shared by every mode. When H and C carry
/// exact Hessians, the returned field has an analytic Jacobian.
pub fn build_perturbed_field(spec: &PerturbationSpec) -> VectorField3 {
    let assembled = Arc::new(Assembled {
        sys: spec.system.clone(),
        alpha: spec.alpha.clone(),
        beta: spec.beta.clone(),
        h: spec.h,
        c: spec.c,
        s_alpha: spec.mode.alpha_sign(),
        s_beta: spec.mode.beta_sign(),
        use_c: spec.mode.uses_c_term(),
        use_h: spec.mode.uses_h_term(),
    });
    let eval = assembled.clone();
    let field = VectorField3::new(move |u| eval.eval(u));
    if spec.system.supports_exact_jacobian() {
        field.with_jacobian(move |u| assembled.jacobian(u))
    } else {
        field
    }
}

/// Closed-form Lie-derivative rates of the perturbed system:
/// d(H - h)/dt = lambda_H (H - h) and d(C - c)/dt = lambda_C (C - c)
/// along trajectories.
#[derive(Clone)]
pub struct DecayRates {
    lambda_h: Arc<dyn Fn(Vec3) -> f64 + Send + Sync>,
    lambda_c: Arc<dyn Fn(Vec3) -> f64 + Send + Sync>,
}

impl DecayRates {
    pub fn lambda_h(&self, u: Vec3) -> f64 {
        (self.lambda_h)(u)
    }

    pub fn lambda_c(&self, u: Vec3) -> f64 {
        (self.lambda_c)(u)
    }
}

/// lambda_H = s_alpha alpha |grad H x grad C|^2 and
/// lambda_C = -s_beta beta |grad H x grad C|^2: nonpositive on V for
/// stabilizing modes, with exactly one sign flipped per destabilizing mode.
///
/// For modes that preserve an integral the corresponding rate is reported
/// with the stabilizing sign but does not act (the preserved direction has
/// multiplier exactly 1).
pub fn decay_rates(spec: &PerturbationSpec) -> DecayRates {
    let sys_h = spec.system.clone();
    let alpha = spec.alpha.clone();
    let s_alpha = spec.mode.alpha_sign();
    let sys_c = spec.system.clone();
    let beta = spec.beta.clone();
    let s_beta = spec.mode.beta_sign();
    DecayRates {
        lambda_h: Arc::new(move |u| {
            let g = cross(sys_h.grad_h(u), sys_h.grad_c(u));
            s_alpha * alpha.eval(u) * g.norm_sq()
        }),
        lambda_c: Arc::new(move |u| {
            let g = cross(sys_c.grad_h(u), sys_c.grad_c(u));
            -s_beta * beta.eval(u) * g.norm_sq()
        }),
    }
}

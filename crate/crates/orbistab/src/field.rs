//! Scalar and vector field abstractions and the conservative field constructor.
//!
//! A [`SystemDef`] packages the triple (nu, H, C) that defines the conservative
//! system du/dt = nu (grad H x grad C). H and C are first integrals of that
//! field by construction; everything downstream (perturbations, orbit tools,
//! Floquet analysis) is built on top of these types.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::vec3::{cross, Mat3, Vec3};

type EvalFn = dyn Fn(Vec3) -> f64 + Send + Sync;
type GradFn = dyn Fn(Vec3) -> Vec3 + Send + Sync;
type HessFn = dyn Fn(Vec3) -> Mat3 + Send + Sync;
type VecEvalFn = dyn Fn(Vec3) -> Vec3 + Send + Sync;
type JacFn = dyn Fn(Vec3) -> Mat3 + Send + Sync;

/// A smooth real function on (an open subset of) state space with an exact
/// gradient. Gradients are analytic, never finite-difference; finite
/// differences appear only in test oracles (see [`grad_fd_check`]).
///
/// An optional exact Hessian enables analytic Jacobians of fields assembled
/// from this function. Evaluation is pure: values may be shared across
/// threads freely.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<EvalFn>,
    grad: Arc<GradFn>,
    hess: Option<Arc<HessFn>>,
    domain_hint: Arc<str>,
}

impl ScalarField {
    pub fn new(
        eval: impl Fn(Vec3) -> f64 + Send + Sync + 'static,
        grad: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            hess: None,
            domain_hint: Arc::from("all of R^3"),
        }
    }

    /// The constant function `c` (zero gradient and Hessian).
    pub fn constant(c: f64) -> Self {
        ScalarField::new(move |_| c, |_| Vec3::ZERO).with_hessian(|_| Mat3::zeros())
    }

    pub fn with_hessian(mut self, hess: impl Fn(Vec3) -> Mat3 + Send + Sync + 'static) -> Self {
        self.hess = Some(Arc::new(hess));
        self
    }

    pub fn with_domain_hint(mut self, hint: &str) -> Self {
        self.domain_hint = Arc::from(hint);
        self
    }

    /// Field value at `u`. Panics on non-finite input; domain membership
    /// beyond finiteness is advisory (see [`ScalarField::domain_hint`]).
    #[inline]
    pub fn eval(&self, u: Vec3) -> f64 {
        assert!(u.is_finite(), "non-finite state passed to ScalarField::eval");
        (self.eval)(u)
    }

    /// Exact gradient at `u`.
    #[inline]
    pub fn grad(&self, u: Vec3) -> Vec3 {
        assert!(u.is_finite(), "non-finite state passed to ScalarField::grad");
        (self.grad)(u)
    }

    /// Exact Hessian when the field carries one.
    #[inline]
    pub fn hess(&self, u: Vec3) -> Option<Mat3> {
        self.hess.as_ref().map(|h| h(u))
    }

    pub fn has_hessian(&self) -> bool {
        self.hess.is_some()
    }

    /// Human-readable description of the open set the field is meant for.
    pub fn domain_hint(&self) -> &str {
        &self.domain_hint
    }

    /// Pointwise scaling by a constant. Preserves gradient/Hessian exactness.
    pub fn scaled(&self, factor: f64) -> ScalarField {
        let e = self.eval.clone();
        let g = self.grad.clone();
        let mut out = ScalarField {
            eval: Arc::new(move |u| factor * e(u)),
            grad: Arc::new(move |u| g(u) * factor),
            hess: None,
            domain_hint: self.domain_hint.clone(),
        };
        if let Some(h) = self.hess.clone() {
            out.hess = Some(Arc::new(move |u| h(u) * factor));
        }
        out
    }
}

/// Max relative discrepancy between the exact gradient of `f` and a central
/// finite difference of its values at step `step`.
///
/// Test oracle for gradient correctness; the production paths never
/// differentiate numerically.
pub fn grad_fd_check(f: &ScalarField, u: Vec3, step: f64) -> f64 {
    assert!(step > 0.0, "step must be positive");
    let g = f.grad(u);
    let fd = |du: Vec3| (f.eval(u + du * step) - f.eval(u - du * step)) / (2.0 * step);
    let fd_vec = Vec3::new(
        fd(Vec3::new(1.0, 0.0, 0.0)),
        fd(Vec3::new(0.0, 1.0, 0.0)),
        fd(Vec3::new(0.0, 0.0, 1.0)),
    );
    let scale = [g.x.abs(), g.y.abs(), g.z.abs(), fd_vec.x.abs(), fd_vec.y.abs(), fd_vec.z.abs()]
        .into_iter()
        .fold(1.0f64, f64::max);
    let diff = g - fd_vec;
    [diff.x.abs(), diff.y.abs(), diff.z.abs()].into_iter().fold(0.0f64, f64::max) / scale
}

/// A smooth vector field on state space, with an optional exact Jacobian.
///
/// When no exact Jacobian is attached, [`VectorField3::jacobian`] falls back
/// to central finite differences with step `max(1e-6, 1e-8 |u|)`.
#[derive(Clone)]
pub struct VectorField3 {
    eval: Arc<VecEvalFn>,
    jacobian: Option<Arc<JacFn>>,
}

impl VectorField3 {
    pub fn new(eval: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        VectorField3 { eval: Arc::new(eval), jacobian: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(Vec3) -> Mat3 + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    #[inline]
    pub fn eval(&self, u: Vec3) -> Vec3 {
        assert!(u.is_finite(), "non-finite state passed to VectorField3::eval");
        (self.eval)(u)
    }

    pub fn has_exact_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Jacobian at `u`: exact when available, finite differences otherwise.
    pub fn jacobian(&self, u: Vec3) -> Mat3 {
        match &self.jacobian {
            Some(j) => j(u),
            None => self.fd_jacobian(u),
        }
    }

    /// Central-difference Jacobian; columns are d(field)/d(u_j).
    pub fn fd_jacobian(&self, u: Vec3) -> Mat3 {
        let step = (1e-8 * u.norm()).max(1e-6);
        let mut m = Mat3::zeros();
        for j in 0..3 {
            let mut du = Vec3::ZERO;
            match j {
                0 => du.x = step,
                1 => du.y = step,
                _ => du.z = step,
            }
            let col = (self.eval(u + du) - self.eval(u - du)) / (2.0 * step);
            m[(0, j)] = col.x;
            m[(1, j)] = col.y;
            m[(2, j)] = col.z;
        }
        m
    }
}

/// The triple (nu, H, C) defining a conservative system
/// du/dt = nu (grad H x grad C), plus a display name.
///
/// The working subset V is wherever grad H x grad C != 0 and nu != 0; this is
/// sampled by diagnostics, not enforced pointwise.
#[derive(Clone)]
pub struct SystemDef {
    pub name: String,
    pub nu: ScalarField,
    pub hamiltonian: ScalarField,
    pub casimir: ScalarField,
}

impl SystemDef {
    pub fn new(name: &str, nu: ScalarField, hamiltonian: ScalarField, casimir: ScalarField) -> Self {
        SystemDef { name: name.to_string(), nu, hamiltonian, casimir }
    }

    #[inline]
    pub fn h(&self, u: Vec3) -> f64 {
        self.hamiltonian.eval(u)
    }

    #[inline]
    pub fn c(&self, u: Vec3) -> f64 {
        self.casimir.eval(u)
    }

    #[inline]
    pub fn grad_h(&self, u: Vec3) -> Vec3 {
        self.hamiltonian.grad(u)
    }

    #[inline]
    pub fn grad_c(&self, u: Vec3) -> Vec3 {
        self.casimir.grad(u)
    }

    /// True when H, C carry Hessians and nu a gradient, so assembled fields
    /// get analytic Jacobians.
    pub fn supports_exact_jacobian(&self) -> bool {
        self.hamiltonian.has_hessian() && self.casimir.has_hessian()
    }
}

/// The conservative field u -> nu(u) (grad H(u) x grad C(u)).
///
/// H and C are first integrals of the returned field: the inner products
/// <X, grad H> and <X, grad C> vanish identically.
pub fn hamiltonian_field(sys: &SystemDef) -> VectorField3 {
    let nu = sys.nu.clone();
    let ham = sys.hamiltonian.clone();
    let cas = sys.casimir.clone();
    let field = VectorField3::new(move |u| cross(ham.grad(u), cas.grad(u)) * nu.eval(u));
    if sys.supports_exact_jacobian() {
        let nu = sys.nu.clone();
        let ham = sys.hamiltonian.clone();
        let cas = sys.casimir.clone();
        field.with_jacobian(move |u| {
            let gh = ham.grad(u);
            let gc = cas.grad(u);
            let hh = ham.hess(u).expect("checked");
            let hc = cas.hess(u).expect("checked");
            let n = nu.eval(u);
            let gn = nu.grad(u);
            let g = cross(gh, gc);
            // column j of D(gh x gc) is Hess_H[:,j] x gc + gh x Hess_C[:,j]
            let mut m = Mat3::zeros();
            for j in 0..3 {
                let hhj = Vec3::new(hh[(0, j)], hh[(1, j)], hh[(2, j)]);
                let hcj = Vec3::new(hc[(0, j)], hc[(1, j)], hc[(2, j)]);
                let col = (cross(hhj, gc) + cross(gh, hcj)) * n + g * gn.to_array()[j];
                m[(0, j)] = col.x;
                m[(1, j)] = col.y;
                m[(2, j)] = col.z;
            }
            m
        })
    } else {
        field
    }
}

/// det(grad H | grad C | X) at `u`, by explicit cofactor expansion.
///
/// Equals nu |grad H x grad C|^2, hence is nonzero exactly when `u` is not an
/// equilibrium of the conservative field.
pub fn independence_det(sys: &SystemDef, u: Vec3) -> f64 {
    let a = sys.grad_h(u);
    let b = sys.grad_c(u);
    let x = cross(a, b) * sys.nu.eval(u);
    a.x * (b.y * x.z - b.z * x.y) - b.x * (a.y * x.z - a.z * x.y) + x.x * (a.y * b.z - a.z * b.y)
}

/// Convenience used by orbit tooling: reject states the field constructor
/// cannot produce meaningful output for.
pub(crate) fn require_finite(u: Vec3, what: &str) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite state in {what}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::rikitake;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn rikitake_field_value_and_equilibrium() {
        let sys = rikitake(1.0);
        let x = hamiltonian_field(&sys);
        let v = x.eval(Vec3::new(1.0, 1.0, 1.0));
        assert!((v - Vec3::new(2.0, 0.0, -1.0)).norm() < 1e-14);
        // (0, 0, z) is a family of equilibria.
        assert_eq!(x.eval(Vec3::new(0.0, 0.0, 5.0)).norm(), 0.0);
    }

    #[test]
    fn parallel_gradients_give_zero_field() {
        // H = C = |u|^2/2 has parallel gradients everywhere.
        let f = ScalarField::new(|u: Vec3| 0.5 * u.norm_sq(), |u| u);
        let sys = SystemDef::new("degenerate", ScalarField::constant(1.0), f.clone(), f);
        let x = hamiltonian_field(&sys);
        assert_eq!(x.eval(Vec3::new(0.3, -1.0, 2.0)), Vec3::ZERO);
    }

    #[test]
    fn independence_det_examples() {
        let sys = rikitake(1.0);
        let d = independence_det(&sys, Vec3::new(1.0, 1.0, 1.0));
        assert!((d - 5.0).abs() < 1e-12, "got {d}");
        assert_eq!(independence_det(&sys, Vec3::new(0.0, 0.0, 5.0)), 0.0);
    }

    #[test]
    fn independence_det_identity_at_random_points() {
        let sys = rikitake(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let u = sample(&mut rng);
            let g = cross(sys.grad_h(u), sys.grad_c(u));
            let expected = sys.nu.eval(u) * g.norm_sq();
            let got = independence_det(&sys, u);
            assert!(
                (got - expected).abs() <= 1e-10 * expected.abs().max(1.0),
                "det mismatch at {u}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn first_integral_orthogonality() {
        let sys = rikitake(1.0);
        let x = hamiltonian_field(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let u = sample(&mut rng);
            let v = x.eval(u);
            let gh = sys.grad_h(u);
            let gc = sys.grad_c(u);
            let scale = 1.0 + v.norm() * gh.norm().max(gc.norm());
            assert!(v.dot(gh).abs() <= 1e-12 * scale);
            assert!(v.dot(gc).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn det_zero_iff_field_zero() {
        let sys = rikitake(1.0);
        let x = hamiltonian_field(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // Equilibrium families: (x, 0, beta), (0, y, -beta), (0, 0, z).
        for u in [
            Vec3::new(0.7, 0.0, 1.0),
            Vec3::new(0.0, -1.3, -1.0),
            Vec3::new(0.0, 0.0, 0.4),
        ] {
            assert_eq!(independence_det(&sys, u), 0.0);
            assert_eq!(x.eval(u).norm(), 0.0);
        }
        for _ in 0..200 {
            let u = sample(&mut rng);
            let det = independence_det(&sys, u);
            let norm = x.eval(u).norm();
            assert_eq!(det == 0.0, norm == 0.0, "equivalence broken at {u}");
        }
    }

    #[test]
    fn grad_fd_check_constant_field() {
        let f = ScalarField::constant(3.25);
        assert!(grad_fd_check(&f, Vec3::new(0.2, -0.4, 1.0), 1e-5) <= 1e-14);
    }

    #[test]
    fn grad_fd_check_rikitake_fields() {
        let sys = rikitake(1.0);
        let u = Vec3::new(1.0, 1.0, 1.0);
        assert!((sys.grad_h(u) - Vec3::new(-0.5, 0.5, -1.0)).norm() < 1e-14);
        assert!((sys.grad_c(u) - Vec3::new(1.0, 1.0, 2.0)).norm() < 1e-14);
        assert!(grad_fd_check(&sys.hamiltonian, u, 1e-5) <= 1e-8);
        assert!(grad_fd_check(&sys.casimir, u, 1e-5) <= 1e-8);
    }

    #[test]
    fn fd_jacobian_matches_exact_for_rikitake() {
        let sys = rikitake(1.0);
        let x = hamiltonian_field(&sys);
        assert!(x.has_exact_jacobian());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u = sample(&mut rng);
            let exact = x.jacobian(u);
            let fd = x.fd_jacobian(u);
            let scale = exact.norm().max(1.0);
            assert!((exact - fd).norm() <= 1e-5 * scale, "Jacobian mismatch at {u}");
        }
    }
}

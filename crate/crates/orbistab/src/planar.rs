//! The two-dimensional specialization: planar Hamiltonian systems
//! dv/dt = mu(v) J grad Hcal(v) with the quarter-turn matrix
//! J = [[0, 1], [-1, 0]], and their level-set stabilization.
//!
//! Everything here also embeds into the 3D machinery by adding a flat third
//! coordinate with H(v, z) = Hcal(v), C(v, z) = z, nu = mu; the embedded
//! dynamics keeps z = 0 exactly, so orbit and Floquet tooling apply verbatim.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::field::{ScalarField, SystemDef};
use crate::vec3::{Mat3, Vec3};

/// A point or tangent vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Quarter turn: J v = (v_y, -v_x).
    pub fn quarter_turn(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::fmt::Display for Vec2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

type Eval2 = dyn Fn(Vec2) -> f64 + Send + Sync;
type Grad2 = dyn Fn(Vec2) -> Vec2 + Send + Sync;
type VecEval2 = dyn Fn(Vec2) -> Vec2 + Send + Sync;

/// Smooth real function on the plane with exact gradient.
#[derive(Clone)]
pub struct ScalarField2 {
    eval: Arc<Eval2>,
    grad: Arc<Grad2>,
}

impl ScalarField2 {
    pub fn new(
        eval: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        grad: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
    ) -> Self {
        ScalarField2 { eval: Arc::new(eval), grad: Arc::new(grad) }
    }

    pub fn constant(c: f64) -> Self {
        ScalarField2::new(move |_| c, |_| Vec2::ZERO)
    }

    pub fn eval(&self, v: Vec2) -> f64 {
        (self.eval)(v)
    }

    pub fn grad(&self, v: Vec2) -> Vec2 {
        (self.grad)(v)
    }
}

/// Planar vector field.
#[derive(Clone)]
pub struct VectorField2 {
    eval: Arc<VecEval2>,
}

impl VectorField2 {
    pub fn new(eval: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        VectorField2 { eval: Arc::new(eval) }
    }

    pub fn eval(&self, v: Vec2) -> Vec2 {
        (self.eval)(v)
    }
}

/// A planar Hamiltonian system (mu, Hcal).
#[derive(Clone)]
pub struct PlanarSystem {
    pub name: String,
    mu: ScalarField2,
    hamiltonian: ScalarField2,
}

impl PlanarSystem {
    pub fn new(name: &str, mu: ScalarField2, hamiltonian: ScalarField2) -> Self {
        PlanarSystem { name: name.to_string(), mu, hamiltonian }
    }

    pub fn mu(&self) -> &ScalarField2 {
        &self.mu
    }

    pub fn hamiltonian(&self) -> &ScalarField2 {
        &self.hamiltonian
    }

    /// The conservative field v -> mu(v) J grad Hcal(v).
    pub fn conservative_field(&self) -> VectorField2 {
        let mu = self.mu.clone();
        let h = self.hamiltonian.clone();
        VectorField2::new(move |v| h.grad(v).quarter_turn() * mu.eval(v))
    }

    /// Embed into 3D: H(v, z) = Hcal(v), C(v, z) = z, nu(v, z) = mu(v).
    ///
    /// The Casimir-preserving stabilization of the embedded system restricted
    /// to z = 0 coincides with [`planar_perturbed_field`], and z stays 0
    /// exactly along trajectories started there.
    pub fn embed(&self) -> SystemDef {
        let mu = self.mu.clone();
        let h_eval = self.hamiltonian.clone();
        let h_grad = self.hamiltonian.clone();
        SystemDef::new(
            &self.name,
            ScalarField::new(
                move |u: Vec3| mu.eval(Vec2::new(u.x, u.y)),
                |_| Vec3::ZERO,
            ),
            ScalarField::new(
                move |u: Vec3| h_eval.eval(Vec2::new(u.x, u.y)),
                move |u: Vec3| {
                    let g = h_grad.grad(Vec2::new(u.x, u.y));
                    Vec3::new(g.x, g.y, 0.0)
                },
            ),
            ScalarField::new(|u: Vec3| u.z, |_| Vec3::new(0.0, 0.0, 1.0))
                .with_hessian(|_| Mat3::zeros()),
        )
    }
}

/// The perturbed planar field
/// v -> mu(v) J grad Hcal(v) -/+ alpha(v) (Hcal(v) - h) grad Hcal(v),
/// with the minus sign when `stabilize` is true.
///
/// Along the perturbed flow, d Hcal/dt = -/+ alpha (Hcal - h) |grad Hcal|^2,
/// so the level set Hcal = h attracts (repels) nearby trajectories.
pub fn planar_perturbed_field(
    mu: &ScalarField2,
    hamiltonian: &ScalarField2,
    alpha: &ScalarField2,
    h: f64,
    stabilize: bool,
) -> VectorField2 {
    let mu = mu.clone();
    let ham = hamiltonian.clone();
    let alpha = alpha.clone();
    let sign = if stabilize { -1.0 } else { 1.0 };
    VectorField2::new(move |v| {
        let g = ham.grad(v);
        g.quarter_turn() * mu.eval(v) + g * (sign * alpha.eval(v) * (ham.eval(v) - h))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::harmonic2d;

    #[test]
    fn perturbation_vanishes_on_level_set() {
        let sys = harmonic2d();
        let alpha = ScalarField2::constant(1.0);
        let f = planar_perturbed_field(sys.mu(), sys.hamiltonian(), &alpha, 0.5, true);
        let v = f.eval(Vec2::new(1.0, 0.0));
        assert!((v - Vec2::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn hand_evaluated_perturbed_value() {
        let sys = harmonic2d();
        let alpha = ScalarField2::constant(1.0);
        let f = planar_perturbed_field(sys.mu(), sys.hamiltonian(), &alpha, 0.5, true);
        // At (2,0): J grad = (0,-2); -(Hcal - h) grad = -1.5 (2,0) = (-3,0).
        let v = f.eval(Vec2::new(2.0, 0.0));
        assert!((v - Vec2::new(-3.0, -2.0)).norm() < 1e-14);
    }

    #[test]
    fn destabilizing_sign_flips_gradient_part() {
        let sys = harmonic2d();
        let alpha = ScalarField2::constant(1.0);
        let stab = planar_perturbed_field(sys.mu(), sys.hamiltonian(), &alpha, 0.5, true);
        let unstab = planar_perturbed_field(sys.mu(), sys.hamiltonian(), &alpha, 0.5, false);
        let v = Vec2::new(2.0, 0.0);
        let rot = sys.conservative_field().eval(v);
        let d_stab = stab.eval(v) - rot;
        let d_unstab = unstab.eval(v) - rot;
        assert!((d_stab + d_unstab).norm() < 1e-14);
    }

    #[test]
    fn embedding_matches_planar_field_on_z0() {
        use crate::field::hamiltonian_field;
        let sys = harmonic2d();
        let embedded = sys.embed();
        let f3 = hamiltonian_field(&embedded);
        let f2 = sys.conservative_field();
        for v in [Vec2::new(1.0, 0.0), Vec2::new(-0.3, 2.0), Vec2::new(0.7, -0.1)] {
            let a = f3.eval(Vec3::new(v.x, v.y, 0.0));
            let b = f2.eval(v);
            assert!((a - Vec3::new(b.x, b.y, 0.0)).norm() < 1e-14);
            assert_eq!(a.z, 0.0);
        }
    }
}

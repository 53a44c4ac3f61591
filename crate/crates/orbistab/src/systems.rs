//! Built-in system definitions: the two-disk dynamo (Rikitake), the free
//! rigid body in angular-momentum coordinates, and a planar harmonic
//! reference system with closed-form period.
//!
//! Builtins are defined through the expression compiler so their gradients
//! and Hessians are symbolic, which in turn gives assembled vector fields
//! analytic Jacobians.

use crate::error::{Error, Result};
use crate::expr::{compile, parse, ParamTable};
use crate::field::{ScalarField, SystemDef, VectorField3};
use crate::planar::{PlanarSystem, ScalarField2, Vec2};
use crate::vec3::Vec3;

fn compiled(src: &str, params: &ParamTable) -> ScalarField {
    compile(&parse(src).expect("builtin expression parses"), params)
        .expect("builtin expression compiles")
}

/// Conservative part of the Rikitake two-disk dynamo:
/// X = (yz + beta y, xz - beta x, -xy), realized with
/// nu = 1, H = (-x^2 + y^2)/4 - beta z, C = (x^2 + y^2)/2 + z^2.
///
/// Equilibria form the three lines (x, 0, beta), (0, y, -beta), (0, 0, z);
/// the working subset V is their complement.
pub fn rikitake(beta: f64) -> SystemDef {
    assert!(beta.is_finite(), "beta must be finite");
    let params = ParamTable::new().with("beta", beta);
    let hint = "R^3 minus the equilibrium lines (x,0,beta), (0,y,-beta), (0,0,z)";
    SystemDef::new(
        "rikitake",
        ScalarField::constant(1.0),
        compiled("0.25*(-x^2+y^2)-beta*z", &params).with_domain_hint(hint),
        compiled("0.5*(x^2+y^2)+z^2", &params).with_domain_hint(hint),
    )
}

/// The Rikitake vector field in its raw componentwise form, used as an
/// independent oracle against the cross-product construction.
pub fn rikitake_direct_field(beta: f64) -> VectorField3 {
    VectorField3::new(move |u: Vec3| {
        Vec3::new(u.y * u.z + beta * u.y, u.x * u.z - beta * u.x, -u.x * u.y)
    })
}

/// Componentwise expansion of grad C x (grad H x grad C) for the Rikitake
/// system. The Casimir-preserving perturbation term is
/// -a (H - h) times this direction field.
pub fn rikitake_c_preserving_direction(beta: f64) -> VectorField3 {
    VectorField3::new(move |u: Vec3| {
        let (x, y, z) = (u.x, u.y, u.z);
        Vec3::new(
            x * (-y * y - 2.0 * z * z + 2.0 * beta * z),
            y * (x * x + 2.0 * z * z + 2.0 * beta * z),
            z * (x * x - y * y) - beta * (x * x + y * y),
        )
    })
}

/// Componentwise expansion of grad H x (grad H x grad C) for the Rikitake
/// system. The Hamiltonian-preserving perturbation term is
/// +b (C - c) times this direction field.
pub fn rikitake_h_preserving_direction(beta: f64) -> VectorField3 {
    VectorField3::new(move |u: Vec3| {
        let (x, y, z) = (u.x, u.y, u.z);
        Vec3::new(
            x * (-0.5 * y * y + beta * z - beta * beta),
            y * (-0.5 * x * x - beta * z - beta * beta),
            0.5 * (-z * (x * x + y * y) + beta * (x * x - y * y)),
        )
    })
}

/// Free rigid body in angular-momentum coordinates with principal moments
/// (i1, i2, i3): H = (x^2/i1 + y^2/i2 + z^2/i3)/2, C = |u|^2/2, nu = -1.
///
/// nu = -1 makes nu (grad H x grad C) equal the classical Euler form
/// ((1/i3 - 1/i2) yz, (1/i1 - 1/i3) xz, (1/i2 - 1/i1) xy). C is proper, so
/// generic fibers are compact and carry periodic orbits.
pub fn rigid_body(i1: f64, i2: f64, i3: f64) -> Result<SystemDef> {
    if !(i1 > 0.0 && i2 > 0.0 && i3 > 0.0) {
        return Err(Error::InvalidSystem("moments of inertia must be positive".into()));
    }
    if i1 == i2 || i2 == i3 || i1 == i3 {
        return Err(Error::InvalidSystem("moments of inertia must be pairwise distinct".into()));
    }
    let params = ParamTable::new().with("i1", i1).with("i2", i2).with("i3", i3);
    Ok(SystemDef::new(
        "rigid_body",
        ScalarField::constant(-1.0),
        compiled("0.5*(x^2/i1+y^2/i2+z^2/i3)", &params),
        compiled("0.5*(x^2+y^2+z^2)", &params),
    ))
}

/// Classical Euler form of the rigid-body field, oracle counterpart of
/// `rigid_body`.
pub fn rigid_body_euler_field(i1: f64, i2: f64, i3: f64) -> VectorField3 {
    VectorField3::new(move |u: Vec3| {
        Vec3::new(
            (1.0 / i3 - 1.0 / i2) * u.y * u.z,
            (1.0 / i1 - 1.0 / i3) * u.x * u.z,
            (1.0 / i2 - 1.0 / i1) * u.x * u.y,
        )
    })
}

/// Planar harmonic reference system: mu = 1, Hcal = (x^2 + y^2)/2.
///
/// Level sets are circles; the orbit through (1, 0) has period 2 pi. The
/// working subset W is the plane minus the origin.
pub fn harmonic2d() -> PlanarSystem {
    PlanarSystem::new(
        "harmonic2d",
        ScalarField2::new(|_| 1.0, |_| Vec2::ZERO),
        ScalarField2::new(|v: Vec2| 0.5 * (v.x * v.x + v.y * v.y), |v| v),
    )
}

/// Look up a builtin by the name used in CLI configs.
pub fn builtin(name: &str, params: &ParamTable) -> Result<SystemDef> {
    match name {
        "rikitake" => Ok(rikitake(params.get("beta").unwrap_or(1.0))),
        "rigid_body" => rigid_body(
            params.get("i1").unwrap_or(1.0),
            params.get("i2").unwrap_or(2.0),
            params.get("i3").unwrap_or(3.0),
        ),
        "harmonic2d" => Ok(harmonic2d().embed()),
        _ => Err(Error::InvalidSystem(format!("unknown builtin system `{name}`"))),
    }
}

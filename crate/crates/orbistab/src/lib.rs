//! Feedback stabilization of periodic orbits of three-dimensional
//! conservative systems of the form du/dt = nu (grad H x grad C).
//!
//! The crate builds the perturbed vector fields that make a chosen orbit
//! orbitally phase asymptotically stable (or unstable) knowing only the
//! values (h, c) of the two first integrals on the orbit, and verifies the
//! predicted behavior numerically: invariant preservation, exponential decay
//! of the complementary integral, and Floquet multipliers matching the
//! closed-form exponents.
//!
//! Module map:
//! - [`vec3`]: vector algebra and the triple-product identity.
//! - [`field`]: scalar/vector field abstractions and the conservative field
//!   constructor.
//! - [`expr`]: expression parsing, symbolic differentiation, compilation.
//! - [`systems`]: builtin systems (Rikitake dynamo, rigid body, planar
//!   harmonic).
//! - [`perturbation`]: the stabilizing/destabilizing terms and decay rates.
//! - [`planar`]: the two-dimensional specialization.
//! - [`mod@integrate`]: RK4 / Dormand-Prince 5(4), events, monodromy transport.
//! - [`orbits`]: fiber projection, orbit search, distance/phase diagnostics,
//!   Floquet analysis.
//! - [`checks`]: seeded pointwise identity diagnostics.

pub mod checks;
pub mod error;
pub mod expr;
pub mod field;
pub mod integrate;
pub mod orbits;
pub mod perturbation;
pub mod planar;
pub mod systems;
pub mod vec3;

pub use error::{Error, Result};
pub use expr::{compile, differentiate, parse, Axis, Expr, ParamTable};
pub use field::{
    grad_fd_check, hamiltonian_field, independence_det, ScalarField, SystemDef, VectorField3,
};
pub use integrate::{
    integrate, locate_section_crossings, monodromy_matrix, IntegratorConfig, Method, Monodromy,
    Plane, Trajectory,
};
pub use orbits::{
    find_periodic_orbit, find_periodic_orbit_with, floquet_analysis, orbit_distance, phase_align,
    project_to_fiber, FloquetReport, OrbitSearch, PeriodicOrbit,
};
pub use perturbation::{
    build_perturbed_field, c_preserving_term, decay_rates, h_preserving_term, DecayRates, Mode,
    PerturbationSpec, Preserved,
};
pub use planar::{planar_perturbed_field, PlanarSystem, ScalarField2, Vec2, VectorField2};
pub use vec3::{cross, triple_expand, Mat3, Vec3};

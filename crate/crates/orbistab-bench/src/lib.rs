//! Shared fixtures for the benchmark targets.

use orbistab::systems::rikitake;
use orbistab::{Mode, PerturbationSpec};

/// The standard benchmark spec: Rikitake on the (h, c) = (-1, 2) fiber.
pub fn bench_spec(mode: Mode) -> PerturbationSpec {
    PerturbationSpec::new(rikitake(1.0), mode, -1.0, 2.0)
}

//! Pointwise identity diagnostics over seeded random samples: integral
//! preservation, the Lie-derivative decay identities, and (for the Rikitake
//! builtin) agreement of the cross-product construction with the expanded
//! componentwise systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::hamiltonian_field;
use crate::perturbation::{
    build_perturbed_field, c_preserving_term, decay_rates, h_preserving_term, PerturbationSpec,
};
use crate::systems::{rikitake_c_preserving_direction, rikitake_h_preserving_direction};
use crate::vec3::Vec3;

/// Axis-aligned sample box; degenerate axes (lo = hi) are allowed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SampleBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl SampleBox {
    pub fn symmetric(r: f64) -> Self {
        SampleBox { lo: [-r, -r, -r], hi: [r, r, r] }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        let mut coord = [0.0f64; 3];
        for i in 0..3 {
            coord[i] = if self.hi[i] > self.lo[i] {
                rng.gen_range(self.lo[i]..self.hi[i])
            } else {
                self.lo[i]
            };
        }
        Vec3::from_array(coord)
    }
}

/// Worst relative violations of the pointwise identities over the sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub n_samples: usize,
    pub seed: u64,
    /// max |<c_term, grad C>| / (1 + |c_term||grad C|); present when the mode
    /// uses the Casimir-preserving term.
    pub preserve_c_max_rel: Option<f64>,
    /// max |<h_term, grad H>| / (1 + |h_term||grad H|).
    pub preserve_h_max_rel: Option<f64>,
    /// max |<Y, grad H> - lambda_H (H - h)| / (1 + |lambda_H (H - h)|).
    pub decay_h_max_rel: Option<f64>,
    /// max |<Y, grad C> - lambda_C (C - c)| / (1 + |lambda_C (C - c)|).
    pub decay_c_max_rel: Option<f64>,
    /// max relative deviation of the assembled field from the expanded
    /// componentwise Rikitake systems; present for the Rikitake builtin.
    pub rikitake_oracle_max_rel: Option<f64>,
    /// Largest |X| seen; a sample where every point is (numerically) an
    /// equilibrium makes all identities trivial.
    pub max_field_norm: f64,
    pub degenerate_sample: bool,
}

/// Sample `n` points and report the worst violations for `spec`.
/// Pass the Rikitake parameter to enable the componentwise oracle.
pub fn pointwise_checks(
    spec: &PerturbationSpec,
    sample_box: &SampleBox,
    n: usize,
    seed: u64,
    rikitake_beta: Option<f64>,
) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = &spec.system;
    let x = hamiltonian_field(sys);
    let y = build_perturbed_field(spec);
    let rates = decay_rates(spec);
    let use_c = spec.mode.uses_c_term();
    let use_h = spec.mode.uses_h_term();
    let c_term = use_c.then(|| c_preserving_term(spec));
    let h_term = use_h.then(|| h_preserving_term(spec));
    let oracle = rikitake_beta
        .map(|b| (rikitake_c_preserving_direction(b), rikitake_h_preserving_direction(b)));

    let mut preserve_c = use_c.then_some(0.0f64);
    let mut preserve_h = use_h.then_some(0.0f64);
    let mut decay_h = use_c.then_some(0.0f64);
    let mut decay_c = use_h.then_some(0.0f64);
    let mut oracle_rel = oracle.as_ref().map(|_| 0.0f64);
    let mut max_field_norm = 0.0f64;

    for _ in 0..n {
        let u = sample_box.draw(&mut rng);
        let xv = x.eval(u);
        max_field_norm = max_field_norm.max(xv.norm());
        let gh = sys.grad_h(u);
        let gc = sys.grad_c(u);
        let yv = y.eval(u);

        if let (Some(term), Some(acc)) = (&c_term, preserve_c.as_mut()) {
            let t = term.eval(u);
            *acc = acc.max(t.dot(gc).abs() / (1.0 + t.norm() * gc.norm()));
        }
        if let (Some(term), Some(acc)) = (&h_term, preserve_h.as_mut()) {
            let t = term.eval(u);
            *acc = acc.max(t.dot(gh).abs() / (1.0 + t.norm() * gh.norm()));
        }
        if let Some(acc) = decay_h.as_mut() {
            let expected = rates.lambda_h(u) * (sys.h(u) - spec.h);
            let got = yv.dot(gh);
            *acc = acc.max((got - expected).abs() / (1.0 + expected.abs()));
        }
        if let Some(acc) = decay_c.as_mut() {
            let expected = rates.lambda_c(u) * (sys.c(u) - spec.c);
            let got = yv.dot(gc);
            *acc = acc.max((got - expected).abs() / (1.0 + expected.abs()));
        }
        if let (Some((c_dir, h_dir)), Some(acc)) = (&oracle, oracle_rel.as_mut()) {
            let mut expected = xv;
            if use_c {
                expected += c_dir.eval(u)
                    * (spec.mode.alpha_sign() * spec.alpha.eval(u) * (sys.h(u) - spec.h));
            }
            if use_h {
                expected += h_dir.eval(u)
                    * (spec.mode.beta_sign() * spec.beta.eval(u) * (sys.c(u) - spec.c));
            }
            *acc = acc.max((yv - expected).norm() / (1.0 + expected.norm()));
        }
    }

    CheckReport {
        n_samples: n,
        seed,
        preserve_c_max_rel: preserve_c,
        preserve_h_max_rel: preserve_h,
        decay_h_max_rel: decay_h,
        decay_c_max_rel: decay_c,
        rikitake_oracle_max_rel: oracle_rel,
        max_field_norm,
        degenerate_sample: max_field_norm < 1e-8,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::Mode;
    use crate::systems::rikitake;

    #[test]
    fn rikitake_identities_hold_tightly() {
        let spec = PerturbationSpec::new(rikitake(1.0), Mode::FullStabilize, -1.0, 2.0);
        let report =
            pointwise_checks(&spec, &SampleBox::symmetric(2.0), 1000, 12345, Some(1.0));
        assert!(report.preserve_c_max_rel.unwrap() <= 1e-12);
        assert!(report.preserve_h_max_rel.unwrap() <= 1e-12);
        assert!(report.decay_h_max_rel.unwrap() <= 1e-10);
        assert!(report.decay_c_max_rel.unwrap() <= 1e-10);
        assert!(report.rikitake_oracle_max_rel.unwrap() <= 1e-10);
        assert!(!report.degenerate_sample);
    }

    #[test]
    fn equilibrium_only_box_is_flagged_degenerate() {
        let spec = PerturbationSpec::new(rikitake(1.0), Mode::PreserveCStabilize, -1.0, 2.0);
        // the z-axis is a line of equilibria
        let axis_box = SampleBox { lo: [0.0, 0.0, -2.0], hi: [0.0, 0.0, 2.0] };
        let report = pointwise_checks(&spec, &axis_box, 100, 7, Some(1.0));
        assert!(report.degenerate_sample);
        assert!(report.max_field_norm < 1e-8);
    }
}

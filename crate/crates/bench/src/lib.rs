//! Shared fixtures for the tree-builder benchmarks.

use turnstile_core::integrator::{hamiltonian, MassMatrix, PhasePoint};
use turnstile_core::model::{gaussian_model, BuiltinModel};
use turnstile_core::{Criterion, TreeContext};

/// A target wide enough that trees up to depth 12 never turn with the
/// step size [`Fixture::EPS`], so every build does exactly `2^depth` steps.
pub struct Fixture {
    pub model: BuiltinModel,
    pub mass: MassMatrix,
    pub start: PhasePoint,
}

impl Fixture {
    pub const EPS: f64 = 1e-3;

    pub fn new(dim: usize) -> Self {
        let model = gaussian_model(vec![1e6; dim]).expect("positive variances");
        let mass = MassMatrix::identity(dim);
        let position = (0..dim).map(|i| 0.1 * i as f64).collect();
        let momentum = (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect();
        let start = PhasePoint::new(&model, position, momentum);
        Fixture { model, mass, start }
    }

    pub fn context(&self, criterion: Criterion) -> TreeContext<'_, BuiltinModel> {
        TreeContext {
            model: &self.model,
            mass: &self.mass,
            criterion,
            initial_energy: hamiltonian(&self.start, &self.mass),
            divergence_threshold: 1000.0,
        }
    }
}

//! Leapfrog integration of Hamiltonian dynamics with a diagonal mass matrix.

use crate::error::{Error, Result};
use crate::model::TargetModel;

/// A position-momentum pair with the potential and its gradient cached at
/// the position.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub potential: f64,
    pub grad: Vec<f64>,
}

impl PhasePoint {
    pub fn new<M: TargetModel + ?Sized>(model: &M, position: Vec<f64>, momentum: Vec<f64>) -> Self {
        assert_eq!(position.len(), momentum.len());
        let mut grad = vec![0.0; position.len()];
        let potential = model.potential_and_gradient(&position, &mut grad);
        PhasePoint {
            position,
            momentum,
            potential,
            grad,
        }
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    /// Bitwise equality of all fields, distinguishing `-0.0` from `0.0` and
    /// treating identical NaN payloads as equal.
    pub fn bitwise_eq(&self, other: &PhasePoint) -> bool {
        fn same(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        same(&self.position, &other.position)
            && same(&self.momentum, &other.momentum)
            && same(&self.grad, &other.grad)
            && self.potential.to_bits() == other.potential.to_bits()
    }
}

/// Inverse of a diagonal mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    inv_diag: Vec<f64>,
}

impl MassMatrix {
    pub fn identity(dim: usize) -> Self {
        MassMatrix {
            inv_diag: vec![1.0; dim],
        }
    }

    pub fn from_inv_diag(inv_diag: Vec<f64>) -> Result<Self> {
        if inv_diag.is_empty() || inv_diag.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(
                "inverse mass entries must be positive and finite".into(),
            ));
        }
        Ok(MassMatrix { inv_diag })
    }

    pub fn inv_diag(&self) -> &[f64] {
        &self.inv_diag
    }

    pub fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    /// `M^-1 r`, the velocity for momentum `r`.
    pub fn velocity<'a>(&'a self, momentum: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        momentum.iter().zip(&self.inv_diag).map(|(r, m)| r * m)
    }
}

pub fn kinetic_energy(momentum: &[f64], mass: &MassMatrix) -> f64 {
    0.5 * momentum
        .iter()
        .zip(&mass.inv_diag)
        .map(|(r, m)| r * r * m)
        .sum::<f64>()
}

/// Total energy, with `+inf` standing in for any non-finite value.
pub fn hamiltonian(z: &PhasePoint, mass: &MassMatrix) -> f64 {
    let h = z.potential + kinetic_energy(&z.momentum, mass);
    if h.is_finite() {
        h
    } else {
        f64::INFINITY
    }
}

/// One half-kick / drift / half-kick step. Negative `eps` integrates
/// backwards in time.
pub fn leapfrog<M: TargetModel + ?Sized>(
    z: &PhasePoint,
    eps: f64,
    mass: &MassMatrix,
    model: &M,
) -> PhasePoint {
    let half = 0.5 * eps;
    let mut momentum: Vec<f64> = z
        .momentum
        .iter()
        .zip(&z.grad)
        .map(|(r, g)| r - half * g)
        .collect();
    let position: Vec<f64> = z
        .position
        .iter()
        .zip(mass.velocity(&momentum))
        .map(|(q, v)| q + eps * v)
        .collect();
    let mut grad = vec![0.0; position.len()];
    let potential = model.potential_and_gradient(&position, &mut grad);
    for (r, g) in momentum.iter_mut().zip(&grad) {
        *r -= half * g;
    }
    PhasePoint {
        position,
        momentum,
        potential,
        grad,
    }
}

/// True when the energy error exceeds the threshold or is not finite.
pub fn is_divergent(delta_h: f64, threshold: f64) -> bool {
    !delta_h.is_finite() || delta_h > threshold
}

//! Randomized comparison of the iterative builder against the recursive one.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::integrator::{hamiltonian, MassMatrix, PhasePoint};
use crate::model::{
    funnel_model, gaussian_model, logistic_regression_model, std_normal_model, BuiltinModel,
    LogisticRegressionData,
};
use crate::rng::RngKey;
use crate::tree::{Criterion, Tree, TreeContext};
use crate::tree_iterative::build_tree_iterative;
use crate::tree_recursive::build_tree_recursive;

/// One randomly drawn tree-building problem.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub model: BuiltinModel,
    pub mass: MassMatrix,
    pub start: PhasePoint,
    pub eps: f64,
    pub criterion: Criterion,
    pub depth: u32,
    pub key: RngKey,
}

impl OracleCase {
    /// Draw a case from `key`: a built-in model of dimension 1 to 10, a
    /// random diagonal mass, a random start, `|eps|` log-uniform on
    /// `[0.01, 1]` with a random sign, and either criterion.
    pub fn random(key: &RngKey, depth: u32) -> Self {
        let (setup, tree_key) = key.split();
        let mut rng = setup.stream();
        let dim: usize = rng.random_range(1..=10);
        let model = match rng.random_range(0..4u32) {
            0 => std_normal_model(dim),
            1 => gaussian_model((0..dim).map(|_| 10f64.powf(rng.random_range(-1.5..1.5))).collect()),
            2 => {
                let data = LogisticRegressionData::synthetic(
                    rng.random_range(0..40),
                    dim - 1,
                    setup.fold_in(1),
                );
                Ok(logistic_regression_model(data))
            }
            _ => funnel_model(dim.max(2)),
        }
        .expect("valid random model");
        let dim = crate::model::TargetModel::dim(&model);
        let mass = MassMatrix::from_inv_diag((0..dim).map(|_| rng.random_range(0.5..2.0)).collect())
            .expect("positive mass");
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let position: Vec<f64> = (0..dim).map(|_| normal()).collect();
        let momentum: Vec<f64> = (0..dim).map(|_| normal()).collect();
        let start = PhasePoint::new(&model, position, momentum);
        let magnitude = 10f64.powf(rng.random_range(-2.0..=0.0));
        let eps = if rng.random_bool(0.5) { magnitude } else { -magnitude };
        let criterion = if rng.random_bool(0.5) {
            Criterion::Classic
        } else {
            Criterion::Generalized
        };
        OracleCase {
            model,
            mass,
            start,
            eps,
            criterion,
            depth,
            key: tree_key,
        }
    }

    /// Build with both builders.
    pub fn build_both(&self) -> (Tree, Tree) {
        let ctx = TreeContext {
            model: &self.model,
            mass: &self.mass,
            criterion: self.criterion,
            initial_energy: hamiltonian(&self.start, &self.mass),
            divergence_threshold: 1000.0,
        };
        let rec = build_tree_recursive(&ctx, &self.start, self.depth, self.eps, &self.key);
        let iter = build_tree_iterative(&ctx, &self.start, self.depth, self.eps, &self.key);
        (rec, iter)
    }

    pub fn agrees(&self) -> bool {
        let (a, b) = self.build_both();
        a.bitwise_eq(&b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthTally {
    pub depth: u32,
    pub passed: usize,
    pub trials: usize,
    pub turned: usize,
    pub diverged: usize,
}

impl DepthTally {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }
}

/// Run `trials` random cases at every depth `0..=depth_max`.
pub fn compare_trees(depth_max: u32, trials: usize, seed: u64) -> Vec<DepthTally> {
    let root = RngKey::from_seed(seed);
    (0..=depth_max)
        .map(|depth| {
            let level = root.fold_in(u64::from(depth));
            let mut tally = DepthTally {
                depth,
                passed: 0,
                trials,
                turned: 0,
                diverged: 0,
            };
            for t in 0..trials {
                let case = OracleCase::random(&level.fold_in(t as u64), depth);
                let (a, b) = case.build_both();
                if a.bitwise_eq(&b) {
                    tally.passed += 1;
                } else {
                    log::error!("mismatch at depth {depth}, trial {t}: {case:?}");
                }
                tally.turned += usize::from(a.turning);
                tally.diverged += usize::from(a.diverging);
            }
            tally
        })
        .collect()
}

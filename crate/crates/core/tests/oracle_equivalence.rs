use proptest::prelude::*;
use turnstile_core::integrator::{hamiltonian, MassMatrix, PhasePoint};
use turnstile_core::model::{
    funnel_model, gaussian_model, logistic_regression_model, std_normal_model, BuiltinModel,
    LogisticRegressionData,
};
use turnstile_core::oracle::OracleCase;
use turnstile_core::tree_iterative::storage_trace;
use turnstile_core::{Criterion, RngKey, TargetModel, TreeContext};

fn model_for(kind: u8, dim: usize, scales: &[f64], seed: u64) -> BuiltinModel {
    match kind {
        0 => std_normal_model(dim).unwrap(),
        1 => gaussian_model(scales[..dim].to_vec()).unwrap(),
        2 => logistic_regression_model(LogisticRegressionData::synthetic(
            25,
            dim - 1,
            RngKey::from_seed(seed),
        )),
        _ => funnel_model(dim.max(2)).unwrap(),
    }
}

prop_compose! {
    fn cases()(
        kind in 0u8..4,
        dim in 1usize..=10,
        scales in prop::collection::vec(0.05f64..20.0, 10),
        inv_mass in prop::collection::vec(0.5f64..2.0, 10),
        position in prop::collection::vec(-2.0f64..2.0, 10),
        momentum in prop::collection::vec(-2.0f64..2.0, 10),
        log_eps in -2.0f64..=0.0,
        backward in any::<bool>(),
        classic in any::<bool>(),
        depth in 0u32..=10,
        seed in any::<u64>(),
    ) -> OracleCase {
        let model = model_for(kind, dim, &scales, seed);
        let d = model.dim();
        let start = PhasePoint::new(&model, position[..d].to_vec(), momentum[..d].to_vec());
        let eps = 10f64.powf(log_eps);
        OracleCase {
            mass: MassMatrix::from_inv_diag(inv_mass[..d].to_vec()).unwrap(),
            model,
            start,
            eps: if backward { -eps } else { eps },
            criterion: if classic { Criterion::Classic } else { Criterion::Generalized },
            depth,
            key: RngKey::from_seed(seed),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn iterative_tree_matches_recursive(case in cases()) {
        let (rec, iter) = case.build_both();
        prop_assert!(rec.bitwise_eq(&iter), "{:?}\nrecursive {:?}\niterative {:?}", case, rec, iter);
    }

    #[test]
    fn storage_is_bounded_and_schedule_exact(case in cases()) {
        let ctx = TreeContext {
            model: &case.model,
            mass: &case.mass,
            criterion: case.criterion,
            initial_energy: hamiltonian(&case.start, &case.mass),
            divergence_threshold: 1000.0,
        };
        let (tree, trace) = storage_trace(&ctx, &case.start, case.depth, case.eps, &case.key);
        prop_assert!(trace.high_water <= case.depth as usize);
        prop_assert!(trace.schedule_ok);
        prop_assert_eq!(trace.leapfrog_calls, tree.leapfrog_count);
        if tree.is_valid() {
            prop_assert_eq!(tree.leapfrog_count, 1u64 << case.depth);
        } else {
            // Stopping at leaf n means exactly n + 1 leapfrog steps.
            prop_assert!(tree.leapfrog_count <= 1u64 << case.depth);
        }
    }
}

#[test]
fn turning_stops_after_n_plus_one_steps() {
    // Unit std normal, eps 0.6: a half period is about 5 steps.
    let model = std_normal_model(1).unwrap();
    let mass = MassMatrix::identity(1);
    let z = PhasePoint::new(&model, vec![1.0], vec![0.0]);
    let ctx = TreeContext {
        model: &model,
        mass: &mass,
        criterion: Criterion::Classic,
        initial_energy: hamiltonian(&z, &mass),
        divergence_threshold: 1000.0,
    };
    let (tree, trace) = storage_trace(&ctx, &z, 8, 0.6, &RngKey::from_seed(1));
    assert!(tree.turning);
    let last_check = trace
        .events
        .iter()
        .rev()
        .find_map(|e| match e {
            turnstile_core::tree_iterative::StorageEvent::Check { step, .. } => Some(*step),
            _ => None,
        })
        .unwrap();
    assert_eq!(last_check % 2, 1);
    assert_eq!(tree.leapfrog_count, last_check + 1);
}

use graphrag_irl::data::ItemId;
use graphrag_irl::features::FeatureMatrix;
use graphrag_irl::irl::{
    check_gradient, listwise_loss, loss_gradient, train, Architecture, Objective, RewardModel, TrainConfig,
    Transition,
};
use graphrag_irl::seed;
use proptest::prelude::*;
use rand::Rng;

fn random_batch(rng: &mut impl Rng, n: usize, c: usize, d: usize) -> Vec<Transition<f64>> {
    (0..n)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..c).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            Transition {
                items: (0..c as u64).map(ItemId).collect(),
                features: FeatureMatrix::from_rows(d, &rows),
                expert: ItemId(rng.gen_range(0..c as u64)),
            }
        })
        .collect()
}

/// Candidates of category A (dimension 0 = 1) are always the expert's choice.
fn category_fixture(users: usize, steps: usize, c: usize, salt: u64) -> Vec<Transition<f64>> {
    let mut rng = seed::rng(salt);
    let mut out = Vec::new();
    for u in 0..users {
        for s in 0..steps {
            let expert_slot = rng.gen_range(0..c);
            let items: Vec<ItemId> = (0..c).map(|k| ItemId((u * 1000 + s * c + k) as u64)).collect();
            let rows: Vec<Vec<f64>> = (0..c)
                .map(|k| {
                    let cat_a = if k == expert_slot { 1.0 } else { 0.0 };
                    vec![cat_a, 1.0 - cat_a, rng.gen_range(0.0..1.0), rng.gen_range(0.0..3.0)]
                })
                .collect();
            out.push(Transition {
                expert: items[expert_slot],
                items,
                features: FeatureMatrix::from_rows(4, &rows),
            });
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn reward_gradients_sum_to_zero(rewards in proptest::collection::vec(-30.0f64..30.0, 1..50), pick in 0usize..50) {
        let expert = pick % rewards.len();
        let (_, g) = graphrag_irl::irl::listwise_terms(&rewards, expert);
        prop_assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn shift_invariance(rewards in proptest::collection::vec(-30.0f64..30.0, 1..50), shift in -500.0f64..500.0) {
        let p = graphrag_irl::irl::policy(&rewards);
        let shifted: Vec<f64> = rewards.iter().map(|r| r + shift).collect();
        let q = graphrag_irl::irl::policy(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn mlp_and_linear_gradients_match_finite_differences() {
    let mut rng = seed::rng(11);
    for case in 0..60 {
        let d = rng.gen_range(1..=10);
        let c = rng.gen_range(1..=8);
        let h = rng.gen_range(1..=4);
        let n = rng.gen_range(1..4);
        let batch = random_batch(&mut rng, n, c, d);
        for arch in [Architecture::Linear, Architecture::Mlp { hidden: h }] {
            let mut model = RewardModel::<f64>::init(arch, d, case);
            for p in &mut model.params {
                *p += rng.gen_range(-0.3..0.3);
            }
            let r = check_gradient(&model, &batch, Objective::Listwise, 0.0, 1e-5).unwrap();
            assert!(r.max_relative_error < 1e-4, "case {case} {arch:?}: {r:?}");
        }
    }
}

#[test]
fn analytic_gradient_matches_public_loss() {
    let mut rng = seed::rng(5);
    let batch = random_batch(&mut rng, 3, 6, 4);
    let model = RewardModel::<f64>::init(Architecture::Mlp { hidden: 3 }, 4, 1);
    let g = loss_gradient(&model, &batch).unwrap();
    let mut step = model.clone();
    for (p, gk) in step.params.iter_mut().zip(&g) {
        *p -= 1e-3 * gk;
    }
    assert!(listwise_loss(&step, &batch).unwrap() < listwise_loss(&model, &batch).unwrap());
}

#[test]
fn separable_fixture_converges() {
    let data = (category_fixture(20, 10, 20, 1), category_fixture(20, 1, 20, 2));
    let cfg = TrainConfig {
        architecture: Architecture::Mlp { hidden: 8 },
        max_epochs: 6,
        patience: 10,
        ..TrainConfig::default()
    };
    let (model, log) = train::<f64, _>(&data, &cfg).unwrap();
    let losses: Vec<f64> = log.epochs.iter().map(|e| e.train_loss).collect();
    assert!(losses[1] < losses[0] && losses[2] < losses[1] && losses[3] < losses[2], "{losses:?}");
    assert_eq!(log.epochs[log.best_epoch].val_hr10, 1.0);
    assert!(model.check().is_ok());
}

#[test]
fn same_seed_gives_identical_parameters() {
    let data = (category_fixture(10, 5, 10, 3), category_fixture(10, 1, 10, 4));
    let cfg = TrainConfig {
        max_epochs: 3,
        shuffle: true,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let (a, la) = train::<f64, _>(&data, &cfg).unwrap();
    let (b, lb) = train::<f64, _>(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    let (c, _) = train::<f64, _>(&data, &TrainConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn pointwise_objective_separates_the_fixture() {
    let data = (category_fixture(10, 10, 10, 5), category_fixture(10, 1, 10, 6));
    let cfg = TrainConfig {
        architecture: Architecture::Linear,
        objective: Objective::Pointwise,
        learning_rate: 0.01,
        max_epochs: 5,
        ..TrainConfig::default()
    };
    let (model, log) = train::<f64, _>(&data, &cfg).unwrap();
    assert_eq!(log.epochs[log.best_epoch].val_hr10, 1.0);
    assert!(model.params[0] > model.params[1]);
}

#[test]
fn f32_training_runs() {
    let rows = category_fixture(5, 4, 8, 7);
    let conv = |v: &[Transition<f64>]| -> Vec<Transition<f32>> {
        v.iter()
            .map(|t| Transition {
                items: t.items.clone(),
                expert: t.expert,
                features: FeatureMatrix {
                    dim: t.features.dim,
                    data: t.features.data.iter().map(|&x| x as f32).collect(),
                },
            })
            .collect()
    };
    let data = (conv(&rows), conv(&rows[..5]));
    let cfg = TrainConfig { max_epochs: 2, ..TrainConfig::default() };
    let (m, log) = train::<f32, _>(&data, &cfg).unwrap();
    assert_eq!(log.epochs.len(), 2);
    assert!(m.check().is_ok());
}

use partshap::coalition::Coalition;
use partshap::shapley::{
    estimate_shapley_mc, explain_sample, select_target, ShapleyEstimator, TargetMode,
};
use partshap::value_fn::{AdditiveToyModel, CountingEvaluator, DEFAULT_PRESENCE_THRESHOLD};
use partshap_testkit::games::{
    grid_image, grid_layout, play, random_game, rng, with_dummy, with_symmetry,
};
use partshap_testkit::oracle_shapley_permutation;
use proptest::prelude::*;
use rand::RngExt;

fn additive_model(k: usize, seed: u64) -> AdditiveToyModel {
    let mut r = rng(seed);
    let weights = (0..k)
        .map(|_| vec![r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)])
        .collect();
    AdditiveToyModel::new(
        grid_layout(k),
        vec!["a".into(), "b".into()],
        weights,
        vec![0.25, -0.5],
        DEFAULT_PRESENCE_THRESHOLD,
    )
    .unwrap()
}

#[test]
fn engine_matches_oracle_and_axioms_on_random_games() {
    let mut r = rng(2024);
    for game_index in 0..200u64 {
        let k = r.random_range(1..=6usize);
        let g = random_game(&mut r, k);
        let h = random_game(&mut r, k);
        let dummy = r.random_range(0..k);
        let (i, j) = (r.random_range(0..k), r.random_range(0..k));
        let mix: Vec<f64> = g.iter().zip(&h).map(|(a, b)| 2.5 * a - 1.5 * b).collect();
        let games = vec![
            g.clone(),
            with_dummy(&g, dummy),
            with_symmetry(&g, i, j),
            h.clone(),
            mix,
        ];
        let m = play(&games, game_index).unwrap();

        for (c, game) in games.iter().enumerate() {
            let expected = oracle_shapley_permutation(|s| game[s as usize], k).unwrap();
            for (part, want) in expected.iter().enumerate() {
                let d = (m.values[part][c] - want).abs();
                assert!(d <= 1e-9, "game {game_index} class {c} part {part}: {d}");
            }
            let total: f64 = m.column(c).iter().sum();
            let gain = game[(1 << k) - 1] - game[0];
            assert!((total - gain).abs() <= 1e-6 * gain.abs().max(1.0));
        }
        assert!(m.values[dummy][1].abs() <= 1e-9);
        assert!((m.values[i][2] - m.values[j][2]).abs() <= 1e-9);
        for part in 0..k {
            let combined = 2.5 * m.values[part][0] - 1.5 * m.values[part][3];
            assert!((m.values[part][4] - combined).abs() <= 1e-9);
        }
    }
}

#[test]
fn additive_game_returns_its_weights() {
    for k in [1, 2, 4, 7] {
        let model = additive_model(k, k as u64);
        let m = explain_sample(&model, grid_image(&mut rng(1), k), grid_layout(k)).unwrap();
        for part in 0..k {
            for c in 0..2 {
                assert!((m.values[part][c] - model.weights()[part][c]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn one_model_call_per_coalition() {
    for k in [1, 3, 7] {
        let counter = CountingEvaluator::new(additive_model(k, 0));
        explain_sample(&counter, grid_image(&mut rng(2), k), grid_layout(k)).unwrap();
        assert_eq!(counter.calls(), 1 << k);
    }
}

#[test]
fn permutation_estimator_enumerating_all_orders_is_exact() {
    let games = vec![random_game(&mut rng(5), 3), random_game(&mut rng(6), 3)];
    let exact = play(&games, 0).unwrap();
    let model = partshap_testkit::games::table_model(&games);
    let img = grid_image(&mut rng(0), 3);
    let mc = estimate_shapley_mc(&model, img, grid_layout(3), 6, 1).unwrap();
    for (a, b) in exact
        .values
        .iter()
        .flatten()
        .zip(mc.values.iter().flatten())
    {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn permutation_estimator_is_exact_on_additive_games_and_seeded() {
    let k = 9;
    let model = additive_model(k, 3);
    let img = grid_image(&mut rng(3), k);
    let a = estimate_shapley_mc(&model, img.clone(), grid_layout(k), 20, 7).unwrap();
    let b = estimate_shapley_mc(&model, img, grid_layout(k), 20, 7).unwrap();
    assert_eq!(a, b);
    for part in 0..k {
        for c in 0..2 {
            assert!((a.values[part][c] - model.weights()[part][c]).abs() <= 1e-12);
        }
    }
}

#[test]
fn permutation_estimator_converges_on_random_games() {
    let k = 5;
    let games = vec![random_game(&mut rng(11), k), random_game(&mut rng(12), k)];
    let exact = play(&games, 0).unwrap();
    let model = partshap_testkit::games::table_model(&games);
    let set = partshap::masking::generate_set(grid_image(&mut rng(0), k), grid_layout(k)).unwrap();
    let mc = partshap::shapley::PermutationShapley::new(4000, 3)
        .unwrap()
        .explain(&model, &set)
        .unwrap()
        .matrix;
    for (a, b) in exact
        .values
        .iter()
        .flatten()
        .zip(mc.values.iter().flatten())
    {
        assert!((a - b).abs() < 0.5, "{a} vs {b}");
    }
}

#[test]
fn estimator_evaluates_the_full_and_empty_coalitions() {
    let k = 4;
    let model = additive_model(k, 1);
    let set = partshap::masking::generate_set(grid_image(&mut rng(0), k), grid_layout(k)).unwrap();
    let e = partshap::shapley::ExactShapley
        .explain(&model, &set)
        .unwrap();
    assert_eq!(e.logits.len(), 16);
    assert_eq!(
        e.logits.get(Coalition::full(k).unwrap()).unwrap(),
        &e.matrix.full_logits
    );
    assert_eq!(
        e.logits.get(Coalition::empty(k).unwrap()).unwrap(),
        &e.matrix.empty_logits
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn efficiency_holds_and_top_part_survives_scaling(
        seed in any::<u64>(),
        k in 1usize..=5,
        scale in 0.01f64..100.0,
    ) {
        let g = random_game(&mut rng(seed), k);
        let scaled: Vec<f64> = g.iter().map(|v| v * scale).collect();
        let m = play(&[g.clone(), scaled], seed).unwrap();
        let total: f64 = m.column(0).iter().sum();
        let gain = g[(1 << k) - 1] - g[0];
        prop_assert!((total - gain).abs() <= 1e-9 * gain.abs().max(1.0));
        let a = select_target(&m, TargetMode::Label(0)).unwrap();
        let b = select_target(&m, TargetMode::Label(1)).unwrap();
        prop_assert_eq!(a.argmax_part, b.argmax_part);
    }
}

mod common;

use proptest::prelude::*;

use echokit::imagecore::LabelMask;
use echokit::knnseg::{distance, postprocess, DistanceMetric, KnnModel, Sample, TrainingSet};

use common::oracle_knn;

fn metric() -> impl Strategy<Value = DistanceMetric> {
    prop_oneof![
        Just(DistanceMetric::Euclidean),
        Just(DistanceMetric::ChiSquare),
        Just(DistanceMetric::Cosine),
        (1.0..6.0f64).prop_map(DistanceMetric::Minkowski),
    ]
}

fn training_set(t: &[(Vec<f64>, u8)]) -> TrainingSet<f64> {
    TrainingSet::new(t.iter().map(|(f, c)| Sample { features: f.clone(), class: *c }).collect()).unwrap()
}

/// Features either continuous or on a coarse lattice, so that exact distance
/// and vote ties are common.
fn samples(dim: usize, max_n: usize) -> impl Strategy<Value = Vec<(Vec<f64>, u8)>> {
    let value = prop_oneof![(0u8..=4).prop_map(|v| v as f64 / 4.0), 0.0..1.0f64,];
    prop::collection::vec((prop::collection::vec(value, dim), 0u8..4), 2..=max_n)
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn predict_matches_full_sort_oracle(
        train in samples(3, 200),
        queries in prop::collection::vec(prop::collection::vec(prop_oneof![
            (0u8..=4).prop_map(|v| v as f64 / 4.0), -0.2..1.2f64
        ], 3), 1..8),
        k in prop::sample::select(vec![1usize, 3, 5, 15]),
        metric in metric(),
    ) {
        prop_assume!(k <= train.len());
        let model = KnnModel::new(training_set(&train), k, metric).unwrap();
        for q in &queries {
            prop_assert_eq!(model.predict(q).unwrap().class, oracle_knn(&train, q, k, metric));
        }
    }

    #[test]
    fn euclidean_and_minkowski_are_metrics(a in vec3(), b in vec3(), c in vec3(), p in 1.0..5.0f64) {
        for m in [DistanceMetric::Euclidean, DistanceMetric::Minkowski(p)] {
            let ab = distance(&a, &b, m).unwrap();
            let ba = distance(&b, &a, m).unwrap();
            let bc = distance(&b, &c, m).unwrap();
            let ac = distance(&a, &c, m).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(ab >= 0.0);
            prop_assert!(distance(&a, &a, m).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn minkowski_two_is_euclidean(a in vec3(), b in vec3()) {
        let e = distance(&a, &b, DistanceMetric::Euclidean).unwrap();
        let m = distance(&a, &b, DistanceMetric::Minkowski(2.0)).unwrap();
        prop_assert!((e - m).abs() <= 1e-12);
    }

    #[test]
    fn k_equal_n_predicts_global_majority(
        mut train in samples(2, 40),
        q in prop::collection::vec(-0.5..1.5f64, 2),
        metric in metric(),
        majority in 0u8..4,
    ) {
        // give `majority` a strict plurality
        let n = train.len();
        let counts = |t: &[(Vec<f64>, u8)]| (0..4u8).map(|c| t.iter().filter(|s| s.1 == c).count()).collect::<Vec<_>>();
        while {
            let c = counts(&train);
            (0..4).any(|o| o != majority as usize && c[o] >= c[majority as usize])
        } {
            let idx = train.iter().position(|s| s.1 != majority).unwrap();
            train[idx].1 = majority;
        }
        let model = KnnModel::new(training_set(&train), n, metric).unwrap();
        prop_assert_eq!(model.predict(&q).unwrap().class, majority);
    }

    #[test]
    fn positive_rescaling_leaves_predictions_unchanged(
        train in prop::collection::vec((prop::collection::vec(0.0..1.0f64, 4), 0u8..3), 5..60),
        queries in prop::collection::vec(prop::collection::vec(-0.2..1.2f64, 4), 1..10),
        c in 0.01..100.0f64,
        k in prop::sample::select(vec![1usize, 3, 5]),
        metric in metric(),
    ) {
        prop_assume!(k <= train.len());
        let scaled: Vec<(Vec<f64>, u8)> =
            train.iter().map(|(f, cl)| (f.iter().map(|v| v * c).collect(), *cl)).collect();
        let a = KnnModel::new(training_set(&train), k, metric).unwrap();
        let b = KnnModel::new(training_set(&scaled), k, metric).unwrap();
        for q in &queries {
            let qs: Vec<f64> = q.iter().map(|v| v * c).collect();
            prop_assert_eq!(a.predict(q).unwrap().class, b.predict(&qs).unwrap().class);
        }
    }

    #[test]
    fn postprocess_is_idempotent(
        (w, h, labels) in (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), prop::collection::vec(prop_oneof![4 => Just(0u8), 3 => Just(1u8), 3 => Just(2u8)], w * h))
        }),
        min_area in 0usize..12,
        foreground in 0u8..3,
    ) {
        let mask = LabelMask::new(w, h, 3, labels).unwrap();
        let once = postprocess(&mask, min_area, foreground).unwrap();
        let twice = postprocess(&once, min_area, foreground).unwrap();
        prop_assert_eq!(once, twice);
    }
}

#[test]
fn hand_evaluated_distances() {
    let (a, b) = ([1.0, 0.0], [0.0, 1.0]);
    let d = |m| distance(&a, &b, m).unwrap();
    assert!((d(DistanceMetric::Euclidean) - 2f64.sqrt()).abs() < 1e-15);
    assert!((d(DistanceMetric::Minkowski(1.0)) - 2.0).abs() < 1e-15);
    assert!((d(DistanceMetric::Cosine) - 1.0).abs() < 1e-15);
    assert!((d(DistanceMetric::ChiSquare) - 2.0 / (1.0 + 1e-12)).abs() < 1e-15);
}

#[test]
fn cosine_zero_vector_convention() {
    let z = [0.0, 0.0];
    assert_eq!(distance(&z, &[1.0, 2.0], DistanceMetric::Cosine).unwrap(), 1.0);
    assert_eq!(distance(&z, &z, DistanceMetric::Cosine).unwrap(), 0.0);
}

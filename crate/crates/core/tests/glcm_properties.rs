mod common;

use proptest::prelude::*;

use echokit::glcm::{compute_glcm, feature_field, glcm_features, pixel_features, Glcm, GlcmConfig, Offset};
use echokit::imagecore::{generate_phantom, quantize, GrayImage, PhantomSpec, QuantizedImage};

use common::{naive_glcm, oracle_features};

fn quantized(max_side: usize) -> impl Strategy<Value = (QuantizedImage, Vec<u8>)> {
    (2..=max_side, 2..=max_side, prop::sample::select(vec![2usize, 4, 8, 16])).prop_flat_map(|(w, h, m)| {
        prop::collection::vec(0..m as u8, w * h)
            .prop_map(move |d| (QuantizedImage::new(w, h, m, d.clone()).unwrap(), d))
    })
}

/// Normalized matrix with random support (possibly a single cell).
fn random_probs() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2usize..=12).prop_flat_map(|m| {
        prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => 0.001..1.0f64], m * m).prop_filter_map(
            "all-zero matrix",
            move |raw| {
                let s: f64 = raw.iter().sum();
                (s > 0.0).then(|| (m, raw.iter().map(|v| v / s).collect()))
            },
        )
    })
}

fn features_close(a: [f64; 4], b: [f64; 4], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_naive_pair_enumeration(
        (q, raw) in quantized(10),
        off in prop::sample::select(vec![(1i32, 0i32), (0, 1), (1, 1), (1, -1), (-1, 0), (2, -1), (0, -2)]),
        symmetric in any::<bool>(),
    ) {
        prop_assume!(off.0.unsigned_abs() < q.width() as u32 && off.1.unsigned_abs() < q.height() as u32);
        let g = compute_glcm::<f64>(&q, Offset::new(off.0, off.1).unwrap(), symmetric).unwrap();
        let want = naive_glcm(&raw, q.width(), q.height(), q.levels(), off.0, off.1, symmetric);
        prop_assert_eq!(g.counts(), want.as_slice());
        let total: u64 = want.iter().sum();
        for (p, c) in g.probs().iter().zip(&want) {
            prop_assert_eq!(*p, *c as f64 / total as f64);
        }
    }

    #[test]
    fn features_match_oracle_and_bounds((m, probs) in random_probs()) {
        let f = glcm_features(&Glcm::from_probs(m, probs.clone()).unwrap()).unwrap();
        let want = oracle_features(&probs, m);
        prop_assert!(features_close(f.to_array(), want, 1e-12), "{:?} vs {:?}", f.to_array(), want);
        let max_c = ((m - 1) * (m - 1)) as f64;
        prop_assert!((0.0..=max_c).contains(&f.contrast));
        prop_assert!(f.homogeneity > 0.0 && f.homogeneity <= 1.0);
        prop_assert!((0.0..=1.0).contains(&f.entropy));
        prop_assert!(f.local_homogeneity > 0.0 && f.local_homogeneity <= 1.0);
        let single = probs.iter().filter(|&&p| p > 0.0).count() == 1;
        prop_assert_eq!(f.homogeneity == 1.0, single);
        prop_assert_eq!(f.entropy == 0.0, single);
    }

    #[test]
    fn symmetric_matrix_is_transpose_invariant((q, _) in quantized(10), dx in -1i32..=1, dy in -1i32..=1) {
        prop_assume!(dx != 0 || dy != 0);
        let g = compute_glcm::<f64>(&q, Offset::new(dx, dy).unwrap(), true).unwrap();
        let t = g.transposed();
        prop_assert_eq!(g.probs(), t.probs());
        prop_assert_eq!(glcm_features(&g).unwrap(), glcm_features(&t).unwrap());
    }

    #[test]
    fn transposition_never_changes_features((m, probs) in random_probs()) {
        let g = Glcm::from_probs(m, probs).unwrap();
        let a = glcm_features(&g).unwrap().to_array();
        let b = glcm_features(&g.transposed()).unwrap().to_array();
        prop_assert!(features_close(a, b, 1e-12));
    }

    #[test]
    fn pixel_features_match_window_oracle(
        (w, h, data) in (4usize..14, 4usize..14).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), prop::collection::vec(0.0..=1.0f64, w * h))
        }),
        window in prop::sample::select(vec![3usize, 5, 7]),
        levels in prop::sample::select(vec![4usize, 8, 16]),
        symmetric in any::<bool>(),
        px in any::<prop::sample::Index>(),
    ) {
        let img = GrayImage::new(w, h, data).unwrap();
        let cfg = GlcmConfig { levels, window, symmetric, ..GlcmConfig::default() };
        let p = px.index(w * h);
        let (x, y) = (p % w, p / w);
        let got = pixel_features(&img, x, y, &cfg).unwrap().to_array();

        let q = quantize(&img, levels).unwrap();
        let r = (window / 2) as isize;
        let mut win = Vec::with_capacity(window * window);
        for v in -r..=r {
            for u in -r..=r {
                win.push(q.get_clamped(x as isize + u, y as isize + v));
            }
        }
        let mut avg = vec![0.0; levels * levels];
        for off in &cfg.offsets {
            let c = naive_glcm(&win, window, window, levels, off.dx(), off.dy(), symmetric);
            let total: u64 = c.iter().sum();
            for (a, n) in avg.iter_mut().zip(&c) {
                *a += *n as f64 / total as f64;
            }
        }
        avg.iter_mut().for_each(|a| *a /= cfg.offsets.len() as f64);
        let want = oracle_features(&avg, levels);
        prop_assert!(features_close(got, want, 1e-12), "{:?} vs {:?}", got, want);
    }
}

#[test]
fn default_orientations_point_up_and_right() {
    let cfg = GlcmConfig::default();
    let pairs: Vec<(i32, i32)> = cfg.offsets.iter().map(|o| (o.dx(), o.dy())).collect();
    assert_eq!(pairs, vec![(1, 0), (1, -1), (0, -1), (-1, -1)]);
}

#[test]
fn phantom_features_are_bounded() {
    let (img, _) = generate_phantom::<f64>(&PhantomSpec::scaled(48, 2)).unwrap();
    let cfg = GlcmConfig::default();
    let field = feature_field(&img, &cfg).unwrap();
    let max_c = ((cfg.levels - 1) * (cfg.levels - 1)) as f64;
    for f in field.data() {
        assert!((0.0..=max_c).contains(&f.contrast));
        for v in [f.homogeneity, f.entropy, f.local_homogeneity] {
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }
    // the field equals per-pixel evaluation
    for (x, y) in [(0, 0), (47, 47), (20, 31), (5, 40)] {
        assert_eq!(field.get(x, y), pixel_features(&img, x, y, &cfg).unwrap());
    }
}

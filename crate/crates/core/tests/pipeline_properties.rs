use std::collections::BTreeMap;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tongue_core::corpus::{center_by_speaker, item_means, synth_corpus, Corpus, CorpusError, SynthSpec};
use tongue_core::inversion::{invert, reconstruct_shape, similarity_transform};
use tongue_core::regress::train;
use tongue_core::{ModelBundleF32, ModelBundleF64, Point2};

fn noisy_spec(n_speakers: usize, reps: usize) -> SynthSpec {
    SynthSpec {
        n_speakers,
        tokens_per_item: reps,
        ..SynthSpec::paper_scale()
    }
}

fn bundle() -> &'static ModelBundleF64 {
    static B: OnceLock<ModelBundleF64> = OnceLock::new();
    B.get_or_init(|| {
        let (c, _) = synth_corpus(&noisy_spec(10, 3), 21);
        train(&c.to_csv_bytes()).unwrap()
    })
}

fn ranges() -> ((f64, f64), (f64, f64)) {
    let r = &bundle().regression;
    ((r.f1_range[0], r.f1_range[1]), (r.f2_range[0], r.f2_range[1]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn speakers_are_centred_once(seed in any::<u64>(), speakers in 1usize..6, reps in 1usize..3) {
        let (c, _) = synth_corpus(&noisy_spec(speakers, reps), seed);
        let centred = center_by_speaker(c).unwrap();
        let mut sums: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
        for r in &centred.records {
            let e = sums.entry(&r.speaker_id).or_default();
            for p in &r.knots {
                e.0 += p.x;
                e.1 += p.y;
                e.2 += 1;
            }
        }
        for (sx, sy, n) in sums.values() {
            prop_assert!((sx / *n as f64).abs() <= 1e-9 && (sy / *n as f64).abs() <= 1e-9);
        }
        prop_assert!(matches!(center_by_speaker(centred), Err(CorpusError::AlreadyCentered)));
    }

    #[test]
    fn item_means_ignore_record_order(seed in any::<u64>()) {
        let (c, _) = synth_corpus(&noisy_spec(3, 2), seed);
        let c = center_by_speaker(c).unwrap();
        let mut shuffled = c.records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        let a = item_means(&c).unwrap();
        let b = item_means(&Corpus { records: shuffled, centered: true }).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.item, &y.item);
            prop_assert!((x.mean_f1_hz - y.mean_f1_hz).abs() <= 1e-12);
            prop_assert!((x.mean_f2_hz - y.mean_f2_hz).abs() <= 1e-12);
            for (p, q) in x.mean_knots.iter().zip(&y.mean_knots) {
                prop_assert!(p.dist(*q) <= 1e-12);
            }
        }
    }

    #[test]
    fn corpus_csv_round_trips(seed in any::<u64>()) {
        let (c, _) = synth_corpus(&noisy_spec(2, 2), seed);
        let back = Corpus::<f64>::from_reader(&c.to_csv_bytes()[..]).unwrap();
        prop_assert_eq!(back, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn endpoints_are_anchored(u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let ((a1, b1), (a2, b2)) = ranges();
        let (f1, f2) = (a1 + u * (b1 - a1), a2 + v * (b2 - a2));
        let b = bundle();
        let p = b.regression.predict(f1, f2).unwrap().params;
        let c = invert(b, f1, f2).unwrap();
        prop_assert!(c.points[0].dist(p.knot1()) < 1e-9);
        prop_assert!(c.points[99].dist(p.knot11()) < 1e-9);
        prop_assert!(!c.extrapolated);
    }

    #[test]
    fn similarity_keeps_distance_ratios(
        pc1 in -0.1f64..0.1,
        pc2 in -0.1f64..0.1,
        t1x in -40.0f64..0.0,
        t1y in -10.0f64..10.0,
        t11x in 10.0f64..50.0,
        t11y in -20.0f64..30.0,
    ) {
        let shape = reconstruct_shape(&bundle().pca, pc1, pc2);
        let out = similarity_transform(&shape, Point2::new(t1x, t1y), Point2::new(t11x, t11y)).unwrap();
        let src = shape.landmarks;
        let base_in = src[0].dist(src[10]);
        let base_out = out[0].dist(out[10]);
        for i in 0..11 {
            for j in i + 1..11 {
                let r_in = src[i].dist(src[j]) / base_in;
                let r_out = out[i].dist(out[j]) / base_out;
                prop_assert!((r_in - r_out).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn inversion_is_pure_and_continuous(u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let ((a1, b1), (a2, b2)) = ranges();
        let (f1, f2) = (a1 + u * (b1 - a1 - 1.0), a2 + v * (b2 - a2));
        let b = bundle();
        let c = invert(b, f1, f2).unwrap();
        prop_assert_eq!(&c, &invert(b, f1, f2).unwrap());
        let d = invert(b, f1 + 1.0, f2).unwrap();
        let worst = c
            .points
            .iter()
            .zip(&d.points)
            .map(|(p, q)| (p.x - q.x).abs().max((p.y - q.y).abs()))
            .fold(0.0, f64::max);
        prop_assert!(worst < 0.5, "{worst}");
    }
}

#[test]
fn f32_pipeline_tracks_f64() {
    let (c, _) = synth_corpus(&SynthSpec::<f64>::noiseless(6, 2), 4);
    let bytes = c.to_csv_bytes();
    let b64 = train::<f64>(&bytes).unwrap();
    let b32: ModelBundleF32 = train::<f32>(&bytes).unwrap();
    for (f1, f2) in [(320.0, 828.0), (500.0, 1500.0), (700.0, 2200.0), (903.0, 2616.0)] {
        let x = invert(&b64, f1, f2).unwrap();
        let y = invert(&b32, f1 as f32, f2 as f32).unwrap();
        let worst = x
            .points
            .iter()
            .zip(&y.points)
            .map(|(p, q)| p.dist(q.cast()))
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "({f1}, {f2}): {worst}");
    }
}

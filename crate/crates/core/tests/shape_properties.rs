use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tongue_core::shapespace::{fit_shape_space, gpa_align, optimal_rotation, preshape};
use tongue_core::{Configuration, Point2, N_KNOTS, SHAPE_DIM};

/// Noisy tongue-like arcs with random pose and size.
fn random_configs(seed: u64, n: usize) -> Vec<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let scale = rng.random_range(0.5..2.0);
            let theta: f64 = rng.random_range(-0.6..0.6);
            let shift = Point2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            let (c, s) = (theta.cos(), theta.sin());
            Configuration::new(std::array::from_fn(|k| {
                let a = std::f64::consts::PI * (0.9 - 0.8 * k as f64 / (N_KNOTS - 1) as f64);
                let x = 30.0 * a.cos() + rng.random_range(-3.0..3.0);
                let y = 22.0 * a.sin() + rng.random_range(-3.0..3.0);
                Point2::new(scale * (c * x - s * y), scale * (s * x + c * y)) + shift
            }))
        })
        .collect()
}

fn max_diff(a: &Configuration, b: &Configuration) -> f64 {
    a.to_flat().iter().zip(b.to_flat()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gpa_ignores_a_shared_similarity(
        seed in any::<u64>(),
        n in 3usize..12,
        scale in 0.1f64..10.0,
        theta in -3.1f64..3.1,
        tx in -100.0f64..100.0,
        ty in -100.0f64..100.0,
    ) {
        let configs = random_configs(seed, n);
        let (c, s) = (theta.cos(), theta.sin());
        let moved: Vec<Configuration> = configs
            .iter()
            .map(|x| x.map(|p| Point2::new(scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty)))
            .collect();
        let a = gpa_align(&configs).unwrap();
        let b = gpa_align(&moved).unwrap();
        for (x, y) in a.aligned.iter().zip(&b.aligned) {
            prop_assert!(max_diff(x, y) <= 1e-7, "{}", max_diff(x, y));
        }
    }

    #[test]
    fn gpa_outputs_are_centred_unit_size_and_unreflected(seed in any::<u64>(), n in 2usize..15) {
        let configs = random_configs(seed, n);
        let r = gpa_align(&configs).unwrap();
        for x in r.aligned.iter().chain(std::iter::once(&r.mean)) {
            let c = x.centroid();
            prop_assert!(c.x.abs() <= 1e-9 && c.y.abs() <= 1e-9);
            prop_assert!((x.centroid_size() - 1.0).abs() <= 1e-9);
        }
        for (raw, aligned) in configs.iter().zip(&r.aligned) {
            let rot = optimal_rotation(&preshape(raw).unwrap(), aligned);
            prop_assert!((rot.det() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn pca_energy_and_truncation(seed in any::<u64>(), n in 4usize..30) {
        let configs = random_configs(seed, n);
        let space = fit_shape_space(&configs).unwrap();
        let pca = &space.pca;
        let total: f64 = pca.eigenvalues.iter().sum();
        prop_assert!((total - pca.total_variance).abs() <= 1e-10 * pca.total_variance.max(1e-300));

        let mut prev = 0.0;
        let mut cum = 0.0;
        for r in pca.variance_ratios() {
            cum += r;
            prop_assert!(cum >= prev - 1e-15);
            prev = cum;
        }
        prop_assert!((cum - 1.0).abs() <= 1e-10);

        // Mean squared residual of each truncation, computed directly.
        for k in 0..=pca.n_components() {
            let mut sse = 0.0;
            for v in &space.tangents {
                let mut r = v.clone();
                for c in &pca.components[..k] {
                    let s = dot(v, c);
                    for (ri, ci) in r.iter_mut().zip(c) {
                        *ri -= s * ci;
                    }
                }
                sse += dot(&r, &r);
            }
            let mse = sse / (n as f64 - 1.0);
            let tail: f64 = pca.eigenvalues[k..].iter().sum();
            prop_assert!((mse - tail).abs() <= 1e-8, "k={k}: {mse} vs {tail}");
        }
    }

    #[test]
    fn pca_full_rank_round_trip(seed in any::<u64>(), n in 3usize..20) {
        let configs = random_configs(seed, n);
        let space = fit_shape_space(&configs).unwrap();
        let pca = &space.pca;
        for v in &space.tangents {
            let scores = pca.scores(v, pca.n_components()).unwrap();
            let back = pca.invert(&scores).unwrap().to_flat();
            for i in 0..SHAPE_DIM {
                prop_assert!((back[i] - (pca.mean_shape[i] + v[i])).abs() <= 1e-8);
            }
        }
    }
}

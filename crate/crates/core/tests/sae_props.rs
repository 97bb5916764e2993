use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cavbench::sae::{decode, encode, normalize_store, train_sae};
use cavbench::{EmbeddingMatrix, SaeParams};

fn random_sae(seed: u64, d: usize, m: usize, k: usize) -> SaeParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.sample(StandardNormal)).collect() };
    let w_enc = EmbeddingMatrix::new(m, d, draw(m * d)).unwrap();
    let b_enc = draw(m);
    let w_dec = EmbeddingMatrix::new(d, m, draw(d * m)).unwrap();
    let b_dec = draw(d);
    SaeParams::new(w_enc, b_enc, w_dec, b_dec, k, 1.0).unwrap()
}

/// Rows that are nonnegative combinations of `atoms` random directions.
fn planted(seed: u64, d: usize, atoms: usize, n: usize) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dict: Vec<Vec<f64>> = (0..atoms)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut h = vec![0.0; d];
            for a in &dict {
                let c: f64 = rng.random();
                h.iter_mut().zip(a).for_each(|(x, u)| *x += c * u);
            }
            h
        })
        .collect();
    EmbeddingMatrix::from_rows(&rows).unwrap()
}

proptest! {
    #[test]
    fn encode_keeps_at_most_k(seed in any::<u64>(), d in 1usize..12, m in 1usize..24, k_frac in 0.0..1.0f64) {
        let k = 1 + ((m - 1) as f64 * k_frac) as usize;
        let sae = random_sae(seed, d, m, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..20 {
            let h: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0).collect();
            let z = encode(&sae, &h).unwrap();
            let nnz = z.iter().filter(|&&x| x != 0.0).count();
            prop_assert!(nnz <= k);
            prop_assert!(z.iter().all(|&x| x >= 0.0));
            // pre-activations, recomputed here
            let positive = (0..m)
                .filter(|&j| {
                    let row = sae.w_enc.row(j);
                    let pre: f64 = row.iter().zip(&h).zip(&sae.b_dec).map(|((w, x), b)| w * (x - b)).sum::<f64>() + sae.b_enc[j];
                    pre > 0.0
                })
                .count();
            prop_assert_eq!(nnz, positive.min(k));
        }
    }

    #[test]
    fn decode_is_linear(
        seed in any::<u64>(),
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
        z1 in prop::collection::vec(0.0..3.0f64, 10),
        z2 in prop::collection::vec(0.0..3.0f64, 10),
    ) {
        let sae = random_sae(seed, 6, 10, 4);
        let mix: Vec<f64> = z1.iter().zip(&z2).map(|(x, y)| a * x + b * y).collect();
        let lhs = decode(&sae, &mix).unwrap();
        let (d1, d2) = (decode(&sae, &z1).unwrap(), decode(&sae, &z2).unwrap());
        for ((l, p), q) in lhs.iter().zip(&d1).zip(&d2) {
            prop_assert!((l - (a * p + b * q)).abs() <= 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn training_loss_is_monotone(data_seed in any::<u64>(), init_seed in any::<u64>()) {
        let (store, _) = normalize_store(&planted(data_seed, 8, 4, 128)).unwrap();
        let trained = train_sae(&store, 4, 4, 300, 0.01, init_seed).unwrap();
        for (e, w) in trained.losses.windows(2).enumerate() {
            prop_assert!(w[1] <= w[0], "loss rose at epoch {}: {} -> {}", e + 1, w[0], w[1]);
        }
    }

    #[test]
    fn training_is_deterministic(seed in any::<u64>()) {
        let (store, _) = normalize_store(&planted(seed, 6, 3, 40)).unwrap();
        let a = train_sae(&store, 8, 3, 20, 0.05, seed).unwrap();
        let b = train_sae(&store, 8, 3, 20, 0.05, seed).unwrap();
        prop_assert_eq!(a.params, b.params);
        prop_assert_eq!(a.losses, b.losses);
    }
}

use proptest::prelude::*;

use cavbench::linalg::{dot, norm, normalize};
use cavbench::steer::{additive_steer, orthogonalize};

fn pair(max_d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_d).prop_flat_map(|d| {
        (
            prop::collection::vec(-1e3..1e3f64, d),
            prop::collection::vec(-1.0..1.0f64, d),
        )
    })
}

proptest! {
    #[test]
    fn orthogonalize_is_idempotent((h, v) in pair(64)) {
        prop_assume!(norm(&v) > 1e-3);
        let v = normalize(&v).unwrap();
        let once = orthogonalize(&h, &v).unwrap();
        let twice = orthogonalize(&once, &v).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-12 * norm(&h).max(1.0));
        }
        prop_assert!(dot(&once, v.as_slice()).abs() <= 1e-9 * norm(&h).max(1.0));
    }

    #[test]
    fn orthogonalize_contracts_norm((h, v) in pair(64)) {
        prop_assume!(norm(&v) > 1e-3);
        let v = normalize(&v).unwrap();
        let out = orthogonalize(&h, &v).unwrap();
        prop_assert!(norm(&out) <= norm(&h) * (1.0 + 1e-12));
    }

    #[test]
    fn orthogonal_rows_are_untouched(h in prop::collection::vec(-1e3..1e3f64, 2..32)) {
        // v = e_0, h with a zero first component
        let mut h = h;
        h[0] = 0.0;
        let mut e = vec![0.0; h.len()];
        e[0] = 1.0;
        let v = normalize(&e).unwrap();
        prop_assert_eq!(orthogonalize(&h, &v).unwrap(), h);
    }

    #[test]
    fn counterfactual_inversion((h, v) in pair(64), beta in -50.0..50.0f64) {
        prop_assume!(norm(&v) > 1e-3);
        let v = normalize(&v).unwrap();
        let clean = orthogonalize(&h, &v).unwrap();
        let infused = additive_steer(&clean, &v, beta).unwrap();
        let back = orthogonalize(&infused, &v).unwrap();
        for (a, b) in back.iter().zip(&clean) {
            prop_assert!((a - b).abs() <= 1e-9 * norm(&h).max(1.0));
        }
    }
}

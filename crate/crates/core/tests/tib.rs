use eercf_core::store::mean_pool;
use eercf_core::tib::{tib_aggregate, tib_weights};
use proptest::prelude::*;

fn rows_and_text(max_rows: usize) -> impl Strategy<Value = (usize, Vec<f32>, Vec<f32>)> {
    (1usize..=max_rows, 1usize..12).prop_flat_map(|(n, d)| {
        (
            Just(n),
            prop::collection::vec(-3.0f32..3.0, n * d),
            prop::collection::vec(-1.0f32..1.0, d),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn row_order_does_not_matter((n, rows, text) in rows_and_text(10), shift in 0usize..10, t in 0.01f64..5.0) {
        let d = text.len();
        let rotated: Vec<f32> = (0..n).flat_map(|i| rows[((i + shift) % n) * d..][..d].to_vec()).collect();
        let a = tib_aggregate(&rows, &text, t).unwrap();
        let b = tib_aggregate(&rotated, &text, t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-5);
        }
        let wa = tib_weights(&rows, &text, t).unwrap();
        let wb = tib_weights(&rotated, &text, t).unwrap();
        for i in 0..n {
            prop_assert!((wb[i] - wa[(i + shift) % n]).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_the_text_rescales_temperature((_n, rows, text) in rows_and_text(8), exp in -4i32..5, t in 0.05f64..2.0) {
        let c = 2f32.powi(exp);
        let scaled: Vec<f32> = text.iter().map(|x| x * c).collect();
        let a = tib_weights(&rows, &scaled, t).unwrap();
        let b = tib_weights(&rows, &text, t / c as f64).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn cold_attention_picks_the_best_row((n, rows, text) in rows_and_text(10)) {
        let d = text.len();
        let scores: Vec<f64> = rows.chunks(d).map(|r| r.iter().zip(&text).map(|(a, b)| *a as f64 * *b as f64).sum()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
        // need a unique argmax with a visible gap
        prop_assume!(n == 1 || scores[order[0]] - scores[order[1]] > 1e-3);
        let out = tib_aggregate(&rows, &text, 1e-6).unwrap();
        let best = &rows[order[0] * d..][..d];
        for (x, y) in out.iter().zip(best) {
            prop_assert!((x - y).abs() < 1e-4);
        }
    }

    #[test]
    fn hot_attention_is_mean_pooling((_n, rows, text) in rows_and_text(10)) {
        let d = text.len();
        let max_logit = rows.chunks(d).map(|r| r.iter().zip(&text).map(|(a, b)| *a as f64 * *b as f64).sum::<f64>().abs()).fold(0.0, f64::max);
        let t = 1e6 * max_logit.max(1.0);
        let out = tib_aggregate(&rows, &text, t).unwrap();
        let mean = mean_pool(&rows, d).unwrap();
        for (x, y) in out.iter().zip(&mean) {
            prop_assert!((x - y).abs() < 1e-4);
        }
    }
}

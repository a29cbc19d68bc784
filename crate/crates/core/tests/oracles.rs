mod common;

use common::*;
use fcofdm::fcfb::DENSE_CAP;
use fcofdm::numerology::{max_prb_entries, plan_half_subframe, sample_rate_for_channel};
use fcofdm::scenario::{builtin_config, Scenario};
use proptest::prelude::*;

#[test]
fn library_dense_operator_matches_written_out_matrix() {
    // Time-varying windows and offsets from the hopping builtin.
    let s = Scenario::prepare(builtin_config("exampleD").unwrap(), None).unwrap();
    for sb in &s.subbands {
        let (rows, cols, m) = oracle_matrix(&sb.filter);
        let d = sb.filter.dense_operator(DENSE_CAP).unwrap();
        assert_eq!((d.rows, d.cols), (rows, cols));
        let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let worst = m.iter().zip(&d.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst <= 1e-12 * scale, "{}: {worst:e}", sb.name);
        let y = noise(&mut rng(1), cols);
        assert!(rel_err(&sb.filter.apply(&y).unwrap(), &mat_vec(rows, cols, &m, &y)) <= 1e-12);
    }
}

#[test]
fn every_table_rate_tiles_a_half_subframe() {
    let mut bws: Vec<u64> = max_prb_entries().iter().map(|e| e.0).collect();
    bws.dedup();
    for bw in bws {
        let fs = sample_rate_for_channel(bw).unwrap();
        let n_hsf = (fs / 2000) as usize;
        let alpha = n_hsf % 137;
        for scs in [15_000u64, 30_000, 60_000] {
            let count = 7 * (scs / 15_000) as usize;
            let plan = plan_half_subframe(fs, &vec![scs; count]).unwrap();
            let n = (fs / scs) as usize;
            // Brute-force: base lengths plus the excess on the first symbol.
            let sum: usize = (0..count).map(|k| n + 9 * n / 128 + if k == 0 { alpha } else { 0 }).sum();
            assert_eq!(sum, n_hsf, "{bw} {scs}");
            assert_eq!(plan.total_samples(), n_hsf);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mixed_sequences_tile(picks in proptest::collection::vec(0usize..3, 1..40)) {
        // Fill one half subframe greedily with the drawn numerologies.
        let mut seq = Vec::new();
        let mut left = 4 * 7;
        for p in picks.iter().cycle().take(200) {
            let units = [4, 2, 1][*p];
            if units <= left {
                seq.push([15_000u64, 30_000, 60_000][*p]);
                left -= units;
            }
            if left == 0 {
                break;
            }
        }
        while left > 0 {
            seq.push(60_000);
            left -= 1;
        }
        let plan = plan_half_subframe(15_360_000, &seq).unwrap();
        prop_assert_eq!(plan.total_samples(), 7680);
        prop_assert_eq!(plan.symbols.iter().filter(|s| s.first_of_half_subframe).count(), 1);
    }
}

mod common;

use common::oracle::oracle_run;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uniex::metrics::Metric;

#[test]
fn counts_match_brute_force_for_every_metric() {
    for (k, metric) in [Metric::Ner, Metric::Re, Metric::EeTrigger, Metric::EeArgument].into_iter().enumerate() {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 10 + k as u64);
            let run = oracle_run(metric, 1000, &mut rng);
            let c = run.library;
            assert_eq!((c.tp, c.fp, c.fn_), run.oracle, "{metric:?} seed {seed}");
            assert!(run.per_dataset_agree, "{metric:?} seed {seed}");
            assert!(c.tp > 0 && c.fp > 0 && c.fn_ > 0, "degenerate fixture for {metric:?}");
        }
    }
}

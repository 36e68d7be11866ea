mod common;

use common::props;
use proptest::prelude::*;

use kadsim::routing::App;

proptest! {
    #[test]
    fn xor_is_a_metric(width in 1u8..=kadsim::id::MAX_WIDTH, a: u64, b: u64, c: u64) {
        props::xor_metric(width, a, b, c)?;
    }

    #[test]
    fn xor_metric_on_equal_ids(width in 1u8..=kadsim::id::MAX_WIDTH, a: u64) {
        props::xor_metric(width, a, a, a)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lookups_progress_and_tables_stay_sound(
        n in 8usize..=96,
        seed: u64,
        strategy in 0usize..4,
        routing in props::routing_mode(),
    ) {
        props::progress_and_soundness(n, seed, strategy, routing)?;
    }

    #[test]
    fn dht_latency_is_min_over_paths(n in 8usize..=96, seed: u64, strategy in 0usize..4, alpha in 1usize..=4) {
        props::dht_min_over_paths(n, seed, strategy, alpha)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn seeded_runs_write_identical_files(seed in 0u64..1_000, dht: bool) {
        props::byte_identical_outputs(seed, if dht { App::Dht } else { App::Kbr })?;
    }
}

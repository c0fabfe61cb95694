use std::collections::HashSet;
use std::io::Write;

use proptest::prelude::*;

use ota_fl_sim::datagen::{
    gen_synthetic_classification, load_csv_dataset, partition_heterogeneous, split_train_test, write_csv_dataset,
    CsvOptions, DataError, PartitionSpec, ShortfallPolicy,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_a_disjoint_cover(
        n in 20usize..400,
        classes in 2usize..8,
        clients in 1usize..20,
        pi in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(n >= clients);
        let ds = gen_synthetic_classification(n, 3, classes, 1.0, seed).unwrap();
        let part = partition_heterogeneous(&ds, &PartitionSpec::new(clients, pi, seed ^ 1)).unwrap();
        let total: usize = part.shards.iter().map(|s| s.len()).sum();
        prop_assert_eq!(total, n);
        let mut seen = HashSet::new();
        for s in &part.shards {
            for &i in &s.indices {
                prop_assert!(seen.insert(i), "index {} assigned twice", i);
            }
        }
        let sizes: Vec<usize> = part.shards.iter().map(|s| s.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn weights_sum_to_one_and_track_sizes(
        n in 20usize..400,
        clients in 1usize..20,
        pi in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(n >= clients);
        let ds = gen_synthetic_classification(n, 2, 4, 1.0, seed).unwrap();
        let part = partition_heterogeneous(&ds, &PartitionSpec::new(clients, pi, seed)).unwrap();
        let sum: f64 = part.weights().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        for s in &part.shards {
            prop_assert_eq!(s.weight, s.len() as f64 / n as f64);
        }
    }

    #[test]
    fn home_fraction_matches_similarity(
        clients in 1usize..12,
        per_client in 10usize..40,
        pi in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        // One class per client keeps every home pool large enough.
        let n = clients * per_client;
        let ds = gen_synthetic_classification(n, 2, clients, 1.0, seed).unwrap();
        let spec = PartitionSpec { shortfall: ShortfallPolicy::Error, ..PartitionSpec::new(clients, pi, seed) };
        let part = partition_heterogeneous(&ds, &spec).unwrap();
        prop_assert!(part.substitutions.is_empty());
        for s in &part.shards {
            let frac = s.home_count as f64 / s.len() as f64;
            prop_assert!((frac - (1.0 - pi)).abs() <= 1.0 / s.len() as f64);
            let home_rows = s.indices[..s.home_count].iter().filter(|&&i| ds.label(i) == s.home_label).count();
            prop_assert_eq!(home_rows, s.home_count);
        }
    }

    #[test]
    fn generation_is_deterministic(n in 10usize..200, seed in any::<u64>()) {
        let a = gen_synthetic_classification(n, 4, 3, 2.0, seed).unwrap();
        let b = gen_synthetic_classification(n, 4, 3, 2.0, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.labels().iter().all(|&y| y < 3));
        prop_assert!(a.features().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn iid_split_has_equal_class_counts() {
    let ds = gen_synthetic_classification(400, 2, 4, 1.0, 3).unwrap();
    let part = partition_heterogeneous(&ds, &PartitionSpec::new(4, 1.0, 9)).unwrap();
    for s in &part.shards {
        assert_eq!(s.dataset.class_counts(), vec![25, 25, 25, 25]);
    }
}

#[test]
fn single_label_shards_at_zero_similarity() {
    let ds = gen_synthetic_classification(400, 2, 4, 1.0, 3).unwrap();
    let part = partition_heterogeneous(&ds, &PartitionSpec::new(4, 0.0, 9)).unwrap();
    for s in &part.shards {
        let counts = s.dataset.class_counts();
        assert_eq!(counts[s.home_label], s.len());
    }
}

#[test]
fn shortfall_policy_fills_or_fails() {
    // Four of seven clients want class 0, which holds only 40 samples.
    let ds = gen_synthetic_classification(80, 2, 2, 1.0, 1).unwrap();
    let filled = partition_heterogeneous(&ds, &PartitionSpec::new(7, 0.0, 2)).unwrap();
    assert!(!filled.substitutions.is_empty());
    assert_eq!(filled.shards.iter().map(|s| s.len()).sum::<usize>(), 80);

    let strict = PartitionSpec {
        shortfall: ShortfallPolicy::Error,
        ..PartitionSpec::new(7, 0.0, 2)
    };
    assert!(matches!(
        partition_heterogeneous(&ds, &strict),
        Err(DataError::HomeLabelShortfall { .. })
    ));
}

#[test]
fn stratified_split_is_disjoint() {
    let ds = gen_synthetic_classification(500, 3, 5, 1.0, 4).unwrap();
    let (train, test) = split_train_test(&ds, 0.2, 8).unwrap();
    assert_eq!(train.len() + test.len(), 500);
    assert_eq!(test.class_counts(), vec![20; 5]);
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let ds = gen_synthetic_classification(50, 3, 4, 2.0, 12).unwrap();
    write_csv_dataset(&ds, &path).unwrap();
    let opts = CsvOptions {
        label_column: "label".into(),
        ..Default::default()
    };
    let back = load_csv_dataset(&path, &opts).unwrap();
    assert_eq!(back.labels(), ds.labels());
    let worst = back
        .features()
        .iter()
        .zip(ds.features())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-12);
}

#[test]
fn csv_errors_cite_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "x,y,label\n1,2,0\n3,4,1\n5,6,abc\n7,8,0").unwrap();
    let opts = CsvOptions {
        label_column: "label".into(),
        ..Default::default()
    };
    match load_csv_dataset(&path, &opts) {
        Err(DataError::Parse { row, value, .. }) => {
            assert_eq!(row, 3);
            assert_eq!(value, "abc");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

//! Property tests for the partition grid: every parameter coordinate is
//! covered exactly once, neuron groups tile each layer contiguously, and
//! refining a split never worsens the largest partition.

use gridnewton_core::net::NetConfig;
use gridnewton_core::partition::{build_partitions, neuron_groups, SplitStructure};
use proptest::prelude::*;

/// Random net (2-5 layers of width 1-12) with a compatible random split.
fn net_and_split() -> impl Strategy<Value = (NetConfig, SplitStructure)> {
    prop::collection::vec(1usize..=12, 2..=5)
        .prop_flat_map(|sizes| {
            let groups: Vec<BoxedStrategy<usize>> = sizes
                .iter()
                .map(|&n| (1usize..=n.min(4)).boxed())
                .collect();
            (Just(sizes), groups)
        })
        .prop_map(|(sizes, groups)| {
            (
                NetConfig::new(sizes).unwrap(),
                SplitStructure {
                    groups_per_layer: groups,
                },
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn every_parameter_is_owned_by_exactly_one_partition((cfg, split) in net_and_split()) {
        let parts = build_partitions(&cfg, &split).unwrap();
        let mut owners = vec![0usize; cfg.num_params()];
        for p in &parts {
            for j in p.out_range.start..p.out_range.end {
                for t in p.in_range.start..p.in_range.end {
                    owners[cfg.weight_index(p.layer, t, j)] += 1;
                }
                if p.owns_bias {
                    owners[cfg.bias_index(p.layer, j)] += 1;
                }
            }
        }
        prop_assert!(owners.iter().all(|&c| c == 1),
            "coverage counts {owners:?} for net {:?} split {:?}",
            cfg.layer_sizes, split.groups_per_layer);
    }

    #[test]
    fn partition_count_is_the_sum_of_group_products((cfg, split) in net_and_split()) {
        let parts = build_partitions(&cfg, &split).unwrap();
        let g = &split.groups_per_layer;
        let expected: usize = (1..g.len()).map(|m| g[m - 1] * g[m]).sum();
        prop_assert_eq!(parts.len(), expected);
    }

    #[test]
    fn neuron_groups_tile_the_layer_contiguously(n in 1usize..64, g in 1usize..8) {
        let g = g.min(n);
        let ranges = neuron_groups(n, g);
        prop_assert_eq!(ranges.len(), g);
        prop_assert_eq!(ranges[0].start, 0);
        prop_assert_eq!(ranges[g - 1].end, n);
        for w in ranges.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }
        let max = ranges.iter().map(|r| r.len()).max().unwrap();
        let min = ranges.iter().map(|r| r.len()).min().unwrap();
        prop_assert!(max - min <= 1, "group sizes differ by more than 1");
    }

    #[test]
    fn refining_a_split_never_increases_the_largest_partition(
        (cfg, split) in net_and_split(),
        which in 0usize..5,
    ) {
        let layer = which % split.groups_per_layer.len();
        let mut refined = split.clone();
        if refined.groups_per_layer[layer] < cfg.width(layer) {
            refined.groups_per_layer[layer] += 1;
        }
        let max_vars = |s: &SplitStructure| {
            build_partitions(&cfg, s)
                .unwrap()
                .iter()
                .map(|p| p.weight_vars())
                .max()
                .unwrap()
        };
        prop_assert!(max_vars(&refined) <= max_vars(&split));
    }
}

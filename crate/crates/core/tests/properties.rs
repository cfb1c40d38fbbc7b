use proptest::prelude::*;

use rasphylo::binning::{bin_sites, BinningParams};
use rasphylo::clustering::{expected_statistic_curve, oracle_sparsify};
use rasphylo::distance::{distance_from_agreement, DistortedMetric};
use rasphylo::model::{simulate_alignment, RateDistribution, SubstitutionModel};
use rasphylo::reconstruct::{reconstruct_topology, ReconstructionConfig};
use rasphylo::tree::{generate_random_regular, robinson_foulds, Phylogeny, RegularityParams};

fn params(f: f64, g: f64) -> RegularityParams {
    RegularityParams::new(f, g, 1.5).unwrap()
}

fn rates_strategy() -> impl Strategy<Value = RateDistribution> {
    prop_oneof![
        Just(RateDistribution::constant()),
        (0.3f64..5.0).prop_map(|a| RateDistribution::gamma(a).unwrap()),
        (0.1f64..1.2).prop_map(|s| RateDistribution::lognormal(s).unwrap()),
        (0.1f64..0.9, 1.1f64..3.0, 0.1f64..0.9).prop_map(|(lo, hi, p)| RateDistribution::discrete(&[
            (lo, p),
            (hi, 1.0 - p)
        ])
        .unwrap()),
    ]
}

fn exact(tree: &Phylogeny) -> DistortedMetric {
    DistortedMetric::new(tree.tree_metric().into_matrix(), Some(tree.labels().to_vec())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_weights_stay_in_bounds(n in 4usize..200, f in 0.01f64..0.5, span in 0.0f64..0.5, seed: u64) {
        let p = params(f, f + span);
        let tree = generate_random_regular(n, &p, seed).unwrap();
        prop_assert!(tree.is_regular(&p));
        prop_assert_eq!(tree.topology().num_vertices(), 2 * n - 2);
        prop_assert_eq!(tree.topology().num_edges(), 2 * n - 3);
    }

    #[test]
    fn tree_metrics_satisfy_four_points(n in 4usize..40, seed: u64, picks in prop::collection::vec(any::<[u16; 4]>(), 20)) {
        let tree = generate_random_regular(n, &params(0.05, 0.6), seed).unwrap();
        let metric = tree.tree_metric();
        for q in picks {
            let q = q.map(|x| x as usize % n);
            prop_assert!(metric.four_point_holds(q, 1e-9));
        }
    }

    #[test]
    fn robinson_foulds_is_a_pseudometric(n in 4usize..60, s1: u64, s2: u64, s3: u64) {
        let p = params(0.1, 0.2);
        let [a, b, c] = [s1, s2, s3].map(|s| generate_random_regular(n, &p, s).unwrap());
        let rf = |x: &Phylogeny, y: &Phylogeny| robinson_foulds(x.topology(), y.topology()).unwrap();
        prop_assert_eq!(rf(&a, &a), 0);
        prop_assert_eq!(rf(&a, &b), rf(&b, &a));
        prop_assert!(rf(&a, &c) <= rf(&a, &b) + rf(&b, &c));
        prop_assert!(rf(&a, &b) <= 2 * (n - 3));
        prop_assert_eq!(rf(&a, &b) % 2, 0);
    }

    #[test]
    fn phi_is_strictly_decreasing_and_inverted(rates in rates_strategy(), s in 0.0f64..5.0, ds in 1e-3f64..2.0) {
        let (a, b) = (rates.phi(s).unwrap(), rates.phi(s + ds).unwrap());
        prop_assert!(a > b && b > 0.0 && a <= 1.0);
        let back = rates.phi_inverse(b).unwrap();
        prop_assert!((back - (s + ds)).abs() < 1e-8, "{} vs {}", back, s + ds);
    }

    #[test]
    fn distance_transform_is_decreasing(q1 in 1e-9f64..1.0, q2 in 1e-9f64..1.0) {
        prop_assume!(q1 < q2);
        prop_assert!(distance_from_agreement(q1) >= distance_from_agreement(q2));
        prop_assert!(distance_from_agreement(q1) > 0.0);
    }

    #[test]
    fn bins_partition_the_sites(u in prop::collection::vec(-0.1f64..1.1, 1..400), n in 4usize..2000) {
        let bp = BinningParams::derive(&params(0.1, 0.2), n, None).unwrap();
        let ba = bin_sites(&u, &bp).unwrap();
        let mut seen = vec![0u8; u.len()];
        for (j, bin) in ba.bins.iter().enumerate() {
            for &site in bin {
                seen[site] += 1;
                prop_assert_eq!(bp.bin_of(u[site]), j);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn expected_curve_strictly_decreasing(n in 8usize..64, seed: u64, grid in prop::collection::vec(0.01f64..4.0, 2..30)) {
        let p = params(0.1, 0.2);
        let tree = generate_random_regular(n, &p, seed).unwrap();
        let pairs = oracle_sparsify(&tree, &p, 1.2).unwrap();
        let mut grid = grid;
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let curve = expected_statistic_curve(&tree, &pairs, &grid).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[0].1 > w[1].1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn reconstruction_ignores_units(n in 5usize..80, seed: u64, exponent in -6i32..6, c in 0.01f64..100.0) {
        let tree = generate_random_regular(n, &params(0.1, 0.4), seed).unwrap();
        let d = exact(&tree);
        let cfg = ReconstructionConfig::new(3.0, 0.01, 10).unwrap();
        let base = reconstruct_topology(&d, &cfg).unwrap();
        for factor in [2f64.powi(exponent), c] {
            let scaled = reconstruct_topology(&d.scaled(factor), &cfg.scaled(factor)).unwrap();
            prop_assert_eq!(&scaled, &base);
        }
    }

    #[test]
    fn simulation_is_a_function_of_its_seed(n in 4usize..30, k in 1usize..300, seed: u64) {
        let tree = generate_random_regular(n, &params(0.1, 0.3), seed).unwrap();
        let model = SubstitutionModel::poisson(4).unwrap();
        let rates = RateDistribution::gamma(1.0).unwrap();
        let run = || simulate_alignment(&tree, &model, &rates, k, seed).unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        prop_assert_eq!(run(), single);
    }
}

use proptest::prelude::*;
use rwrs_core::mdm::{is_nearest_neighbor, is_quenched_consistent, simulate_mdm_replica, MdmOptions};
use rwrs_core::oracle::{exact_rwrs, DEFAULT_BUDGET};
use rwrs_core::rwrs::simulate_rwrs_replica;
use rwrs_core::{MdmConfig, Quantity, RwrsModel, RwrsOptions, SceneryDist, WalkIncrementDist};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_scenery_range_is_an_interval(seed in any::<u64>(), replica in 0u64..1000, n in 1u64..400) {
        let model = RwrsModel::new(WalkIncrementDist::Simple, SceneryDist::Rademacher).unwrap();
        let opts = RwrsOptions { keep_path: true, force_distinct_count: true, ..Default::default() };
        let s = simulate_rwrs_replica(n, &model, seed, replica, &opts).unwrap();
        prop_assert_eq!(s.range as i128, s.running_max - s.running_min + 1);
        let v = s.v_z.unwrap() as u128;
        prop_assert!((n as u128).pow(2) <= s.range as u128 * v);
    }

    #[test]
    fn replicas_are_pure_functions_of_seed(seed in any::<u64>(), replica in 0u64..1000) {
        let model = RwrsModel::new(WalkIncrementDist::lazy(0.25).unwrap(), SceneryDist::symmetric_zipf(0.8).unwrap()).unwrap();
        let a = simulate_rwrs_replica(200, &model, seed, replica, &RwrsOptions::default()).unwrap();
        let b = simulate_rwrs_replica(200, &model, seed, replica, &RwrsOptions::default()).unwrap();
        prop_assert_eq!(a.range, b.range);
        prop_assert_eq!(a.t0, b.t0);
    }

    #[test]
    fn mdm_paths_respect_their_lines(seed in any::<u64>(), p in 0.05f64..0.95, n in 1u64..300) {
        let cfg = MdmConfig::new(p, n).unwrap();
        let opts = MdmOptions { keep_path: true, ..Default::default() };
        let s = simulate_mdm_replica(&cfg, seed, 0, &opts).unwrap();
        let path = s.path.unwrap();
        prop_assert_eq!(path.len() as u64, n + 1);
        prop_assert!(is_nearest_neighbor(&path));
        prop_assert!(is_quenched_consistent(&path));
    }

    #[test]
    fn exact_survival_is_a_decreasing_probability(q in 1u32..9) {
        let scenery = SceneryDist::ternary(q as f64 / 10.0).unwrap();
        let t = exact_rwrs(6, &WalkIncrementDist::Simple, &scenery, DEFAULT_BUDGET).unwrap();
        let mut prev = 1.0;
        for k in 1..=6 {
            let p = t.value(Quantity::Survival, k);
            prop_assert!((0.0..=prev + 1e-15).contains(&p));
            prev = p;
        }
    }
}

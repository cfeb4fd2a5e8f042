//! Property tests over the randomized surfaces: serialization, pruning,
//! and shift-add planning.

use hardwire_core::csd::{plan_weight, prune_weights, PlanMode};
use hardwire_core::model::{
    bundle_from_bytes, bundle_to_bytes, count_params, generate_synthetic, TransformerTopology,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_load_is_identity(
        seed in any::<u64>(),
        n_layers in 0u32..3,
        d_model in 1u32..9,
        d_ffn in 1u32..9,
        vocab in 1u32..17,
    ) {
        let topo = TransformerTopology::new(n_layers, d_model, d_ffn, vocab);
        let bundle = generate_synthetic(&topo, seed).unwrap();
        let bytes = bundle_to_bytes(&bundle).unwrap();
        let back = bundle_from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &bundle);
        prop_assert_eq!(count_params(&back), count_params(&bundle));
    }

    #[test]
    fn prune_is_idempotent_for_any_threshold(seed in any::<u64>(), exp in -8i32..1) {
        let topo = TransformerTopology::tiny_test();
        let bundle = generate_synthetic(&topo, seed).unwrap();
        let threshold = (exp as f64).exp2();
        let (once, _) = prune_weights(&bundle.layers[0].w_1, threshold).unwrap();
        let (twice, second) = prune_weights(&once, threshold).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(second.pruned_count, 0);
    }

    #[test]
    fn plans_reconstruct_any_int8_weight(q in -128i64..=127, scale_exp in -8i32..=0) {
        for mode in [PlanMode::Csd, PlanMode::Binary] {
            let plan = plan_weight(q, 8, scale_exp, mode).unwrap();
            prop_assert_eq!(plan.reconstruct_quantized(), q);
        }
    }
}

//! Randomized invariants over the numeric core: every suite here is a
//! universal statement ("for all grids…", "for all thresholds…") rather than
//! a worked example, so proptest drives the inputs.

use num_complex::Complex64;
use proptest::prelude::*;

use kanae::autoencoder::AutoencoderModel;
use kanae::channel::{mmse_equalize, schedule_noise, ChannelRealization};
use kanae::golay::LinearBlockCode;
use kanae::harness::persist::{model_from_json, model_to_json};
use kanae::network::{kan_edge_norms, prune_stack, PruneMode};
use kanae::splines::SplineGrid;

/// Active-edge mask of the encoder layer after pruning a fresh copy of
/// `model` at threshold `eta`.
fn active_mask(model: &AutoencoderModel, inputs: &[Vec<f64>], eta: f64) -> Vec<bool> {
    let mut pruned = model.clone();
    prune_stack(pruned.encoder_mut(), inputs, eta, PruneMode::Edge).unwrap();
    pruned.encoder()[0]
        .as_kan()
        .unwrap()
        .edges()
        .iter()
        .map(|e| e.active)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bspline_basis_is_a_partition_of_unity(
        degree in 1usize..=3,
        intervals in 1usize..=8,
        lo in -5.0f64..5.0,
        width in 0.1f64..10.0,
        t in 0.0f64..1.0,
    ) {
        let grid = SplineGrid::new(degree, (lo, lo + width), intervals).unwrap();
        let x = lo + t * width;
        let sum: f64 = grid.basis_eval(x).iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12, "sum {} at x = {}", sum, x);
    }

    #[test]
    fn pruning_active_sets_shrink_with_eta(seed in 0u64..1000, pick in 0usize..16, extra in 1usize..16) {
        let model = AutoencoderModel::kan_default(4, 2, 3, 5, seed).unwrap();
        let onehots: Vec<Vec<f64>> = (0..4).map(|m| model.one_hot(m).unwrap()).collect();
        // Thresholds straddling two of the sixteen encoder edge norms, so
        // both prunes bite somewhere in the middle of the distribution.
        let mut norms = kan_edge_norms(model.encoder()[0].as_kan().unwrap(), &onehots).unwrap();
        norms.sort_by(f64::total_cmp);
        let eta_lo = norms[pick];
        let eta_hi = norms[(pick + extra).min(norms.len() - 1)];
        let survives_lo = active_mask(&model, &onehots, eta_lo);
        let survives_hi = active_mask(&model, &onehots, eta_hi);
        for (edge, (&at_lo, &at_hi)) in survives_lo.iter().zip(&survives_hi).enumerate() {
            prop_assert!(at_lo || !at_hi, "edge {} pruned at {} but alive at {}", edge, eta_lo, eta_hi);
        }
    }

    #[test]
    fn noise_schedule_is_exact_at_endpoints_and_monotone(
        var_min in 1e-6f64..0.5,
        spread in 0.0f64..4.0,
        n_epochs in 1usize..30_000,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let var_max = var_min + spread;
        prop_assert_eq!(schedule_noise(0, n_epochs, var_max, var_min), var_max);
        prop_assert_eq!(schedule_noise(n_epochs, n_epochs, var_max, var_min), var_min);
        let (e1, e2) = {
            let (x, y) = ((a * n_epochs as f64) as usize, (b * n_epochs as f64) as usize);
            (x.min(y), x.max(y))
        };
        prop_assert!(
            schedule_noise(e1, n_epochs, var_max, var_min)
                >= schedule_noise(e2, n_epochs, var_max, var_min)
        );
    }

    #[test]
    fn mmse_is_the_identity_on_a_clean_unit_channel(
        symbols in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..12),
    ) {
        let received: Vec<Complex64> = symbols.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        let realization = ChannelRealization {
            coefficients: vec![Complex64::new(1.0, 0.0); received.len()],
            received: received.clone(),
        };
        prop_assert_eq!(mmse_equalize(&realization, 0.0), received);
    }

    #[test]
    fn mld_agrees_with_minimum_distance_search(
        symbols in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 4),
    ) {
        let code = LinearBlockCode::extended_hamming84();
        let received: Vec<Complex64> = symbols.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        let by_mld = code.mld_detect(&received).unwrap();
        let by_distance = (0..code.message_count())
            .min_by(|&a, &b| {
                let d = |i: usize| -> f64 {
                    code.modulated(i)
                        .unwrap()
                        .iter()
                        .zip(&received)
                        .map(|(&c, &r)| (c - r).norm_sqr())
                        .sum()
                };
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        prop_assert_eq!(by_mld, by_distance);
    }

    #[test]
    fn model_json_roundtrip_is_byte_identical(seed in 0u64..1000, mlp in any::<bool>()) {
        let model = if mlp {
            AutoencoderModel::mlp_default(4, 2, 13, seed).unwrap()
        } else {
            AutoencoderModel::kan_default(4, 2, 3, 5, seed).unwrap()
        };
        let first = model_to_json(&model).unwrap();
        let second = model_to_json(&model_from_json(&first).unwrap()).unwrap();
        prop_assert_eq!(first, second);
    }
}

//! Property tests over randomized networks and samplers.

use proptest::prelude::*;

use msm_core::autodiff::{init_network, ParamVector};
use msm_core::domain::BoxDomain;
use msm_core::sampling::sample_proportional;

fn arch_strategy() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=3, 2usize..=8, 1usize..=2).prop_map(|(din, width, depth)| {
        let mut arch = vec![din];
        arch.extend(std::iter::repeat_n(width, depth));
        arch.push(1);
        arch
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn params_flatten_unflatten_roundtrip(arch in arch_strategy(), seed in 0u64..1_000_000) {
        let net = init_network(&arch, seed).unwrap();
        let p = net.params();
        prop_assert_eq!(p.len(), net.param_count());
        let mut other = init_network(&arch, seed.wrapping_add(1)).unwrap();
        other.set_params(&p).unwrap();
        prop_assert_eq!(other.params(), p);
    }

    #[test]
    fn checkpoints_roundtrip_bit_exact(arch in arch_strategy(), seed in 0u64..1_000_000) {
        let net = init_network(&arch, seed).unwrap();
        let json = net.to_checkpoint_json().unwrap();
        let back = msm_core::autodiff::DenseNetwork::from_checkpoint_json(&json).unwrap();
        let (a, b) = (net.params(), back.params());
        for (x, y) in a.0.iter().zip(&b.0) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn jets_symmetric_and_consistent(arch in arch_strategy(), seed in 0u64..1_000_000,
                                     coords in prop::collection::vec(-1.0f64..1.0, 3)) {
        let net = init_network(&arch, seed).unwrap();
        let x = &coords[..arch[0]];
        let jet = net.input_jet(x).unwrap();
        prop_assert_eq!(jet.value, net.forward(x).unwrap());
        let scale = 1.0 + jet.hess_row_major().iter().fold(0.0f64, |m, h| m.max(h.abs()));
        prop_assert!(jet.hess_asymmetry() < 1e-12 * scale);
    }

    #[test]
    fn gradient_perturbation_changes_loss_direction(seed in 0u64..100_000) {
        // First-order Taylor sanity: a small step along the negative gradient
        // of f = forward^2 does not increase f (up to curvature).
        let net = init_network(&[2, 6, 1], seed).unwrap();
        let x = [0.3, -0.2];
        let grad = msm_core::autodiff::param_gradient(&net, |_, t| {
            let y = t.forward(&x);
            y * y
        }).unwrap();
        let f0 = net.forward(&x).unwrap().powi(2);
        let norm: f64 = grad.0.iter().map(|g| g * g).sum::<f64>();
        prop_assume!(norm > 1e-12);
        let step = 1e-6 / norm.sqrt();
        let moved = ParamVector(
            net.params().0.iter().zip(&grad.0).map(|(p, g)| p - step * g).collect(),
        );
        let mut net2 = net.clone();
        net2.set_params(&moved).unwrap();
        let f1 = net2.forward(&x).unwrap().powi(2);
        prop_assert!(f1 <= f0 + 1e-9, "f0 {f0}, f1 {f1}");
    }

    #[test]
    fn rejection_sampler_stays_in_support(split in 0.1f64..0.9, seed in 0u64..100_000) {
        // Indicator density: every accepted sample lies in the sub-box.
        let b = BoxDomain::cube(0.0, 1.0, 2).unwrap();
        let pts = sample_proportional(
            move |x: &[f64]| if x[0] < split { 1.0 } else { 0.0 },
            &b, 200, seed, Some(1.0),
        ).unwrap();
        prop_assert_eq!(pts.len(), 200);
        prop_assert!(pts.iter().all(|p| p[0] < split));
    }
}

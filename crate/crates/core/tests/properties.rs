use nst_core::autodiff::Matrix;
use nst_core::nst::{activation, precedes, triangle_constant, NeuralSpacetime, NstConfig};
use proptest::prelude::*;

fn metric_model(d: usize, exps: &[(f64, f64)], weights: &[f64], lambdas: &[f64]) -> NeuralSpacetime {
    let depth = lambdas.len();
    let mut m = NeuralSpacetime::new(NstConfig {
        encoder_depth: 0,
        metric_depth: depth,
        ..NstConfig::new(d, d, 0)
    })
    .unwrap();
    for (j, &(s, l)) in exps.iter().enumerate().take(depth + 1) {
        m.set_metric_exponents(j, s, l);
    }
    let mut w = weights.iter().cycle();
    for (j, &lambda) in (1..=depth).zip(lambdas) {
        let rows = if j == depth { 1 } else { d };
        let data = (0..rows * d).map(|_| *w.next().unwrap()).collect();
        m.set_metric_layer(j, lambda, Matrix::from_vec(rows, d, data));
    }
    m
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

proptest! {
    #[test]
    fn activation_is_odd_and_increasing(x in -4.0..4.0f64, dx in 1e-6..1.0f64, s in 1.0..3.0f64, l in 1.0..3.0f64) {
        prop_assert_eq!(activation(-x, s, l), -activation(x, s, l));
        prop_assert!(activation(x, s, l) < activation(x + dx, s, l));
    }

    #[test]
    fn quasi_metric_axioms(
        (d, x, y, z) in (1usize..4).prop_flat_map(|d| (Just(d), point(d), point(d), point(d))),
        exps in prop::collection::vec((1.0..2.0f64, 1.0..2.0f64), 5),
        weights in prop::collection::vec(-1.0..1.0f64, 1..16),
        lambdas in prop::collection::vec(0.01..1.0f64, 1..5),
    ) {
        let m = metric_model(d, &exps, &weights, &lambdas);
        let dxy = m.quasi_metric(&x, &y).unwrap();
        prop_assert_eq!(dxy, m.quasi_metric(&y, &x).unwrap());
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(m.quasi_metric(&x, &x).unwrap(), 0.0);
        if x != y {
            prop_assert!(dxy > 0.0);
        }
        let bound = m.quasi_metric(&x, &z).unwrap() + m.quasi_metric(&z, &y).unwrap();
        prop_assert!(dxy <= triangle_constant(&m) * bound * (1.0 + 1e-12));
    }

    #[test]
    fn time_coordinates_do_not_move_the_metric(space in point(2), a in point(2), b in point(2), seed in 0u64..100) {
        let m = NeuralSpacetime::init(NstConfig { encoder_depth: 0, ..NstConfig::new(4, 2, 2) }, seed).unwrap();
        let u: Vec<f64> = space.iter().chain(&a).copied().collect();
        let v: Vec<f64> = space.iter().chain(&b).copied().collect();
        prop_assert_eq!(m.quasi_metric(&u, &v).unwrap(), 0.0);
    }

    #[test]
    fn order_network_is_monotone_and_injective(
        x in point(3),
        step in prop::collection::vec(0.0..1.0f64, 3),
        other in point(3),
        seed in 0u64..1000,
    ) {
        let m = NeuralSpacetime::init(NstConfig { encoder_depth: 0, ..NstConfig::new(4, 1, 3) }, seed).unwrap();
        let lift = |t: &[f64]| -> Vec<f64> { std::iter::once(0.0).chain(t.iter().copied()).collect() };
        let y: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        let (tx, ty, to) = (
            m.partial_order_forward(&lift(&x)).unwrap(),
            m.partial_order_forward(&lift(&y)).unwrap(),
            m.partial_order_forward(&lift(&other)).unwrap(),
        );
        prop_assert!(precedes(&tx, &tx).unwrap());
        prop_assert!(precedes(&tx, &ty).unwrap());
        if x != other {
            prop_assert_ne!(tx, to);
        }
    }
}

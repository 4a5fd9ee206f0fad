use std::f64::consts::PI;

use ntk_core::angles::{gradient_angle, next_layer_angle};
use ntk_core::kernel::{gram, ntk_deep, ntk_linear, ntk_shallow};
use ntk_core::linalg::{psd_spectrum, Matrix};
use ntk_core::mcnet::{empirical_ntk, model_gradient, sample_network};
use ntk_core::{Activation, DatasetMatrix, NetworkConfig, Normalization};
use proptest::prelude::*;

fn dataset(max_n: usize, max_d: usize) -> impl Strategy<Value = DatasetMatrix> {
    (2..=max_n, 2..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n)
            .prop_filter("rows need non-zero norm", |rows| {
                rows.iter().all(|r| r.iter().map(|v| v * v).sum::<f64>() > 1e-3)
            })
            .prop_map(|rows| DatasetMatrix::from_rows(&rows).unwrap())
    })
}

proptest! {
    #[test]
    fn layer_map_contracts(z in 0.0..PI, w in 0.0..PI) {
        let gz = next_layer_angle(z).unwrap();
        prop_assert!((0.0..=z).contains(&gz));
        if z < w {
            prop_assert!(gz <= next_layer_angle(w).unwrap());
        }
    }

    #[test]
    fn gradient_angle_in_range(theta in 0.0..PI, depth in 0usize..20) {
        let phi = gradient_angle(theta, depth).unwrap().phi.unwrap();
        prop_assert!((0.0..=PI).contains(&phi));
        if depth == 0 {
            prop_assert!((phi - theta).abs() < 1e-7);
        }
    }

    #[test]
    fn kernels_are_symmetric_psd(data in dataset(6, 5), depth in 0usize..6) {
        for k in [ntk_deep(&data, depth, Normalization::Averaged), ntk_shallow(&data), gram(&data)] {
            prop_assert!(k.k.asymmetry() < 1e-12);
            prop_assert!(psd_spectrum(&k.k).is_ok());
        }
    }

    #[test]
    fn averaged_diagonal_is_squared_norm(data in dataset(5, 4), depth in 0usize..8) {
        let k = ntk_deep(&data, depth, Normalization::Averaged);
        for i in 0..data.n() {
            let norm2 = data.norms()[i].powi(2);
            prop_assert!((k.k[(i, i)] - norm2).abs() <= 1e-10 * norm2);
        }
    }

    #[test]
    fn raw_is_depth_plus_one_times_averaged(data in dataset(4, 3), depth in 0usize..6) {
        let raw = ntk_deep(&data, depth, Normalization::Raw);
        let avg = ntk_deep(&data, depth, Normalization::Averaged);
        let scaled = avg.k.scaled((depth + 1) as f64);
        prop_assert!(raw.k.max_abs_diff(&scaled) <= 1e-10 * scaled.frobenius_norm());
    }

    #[test]
    fn linear_kernel_keeps_gram_conditioning(data in dataset(4, 6), depth in 0usize..6) {
        let g = gram(&data).k;
        let lin = ntk_linear(&data, depth, Normalization::Averaged).k;
        prop_assert!(lin.max_abs_diff(&g) <= 1e-12 * g.frobenius_norm());
    }

    #[test]
    fn empirical_ntk_is_gradient_gram(
        data in dataset(4, 3),
        depth in 0usize..3,
        seed in any::<u64>(),
    ) {
        let net = sample_network(&NetworkConfig::new(depth, 12, Activation::Relu, seed), data.d()).unwrap();
        let k = empirical_ntk(&net, &data, Normalization::Raw).unwrap();
        let grads: Vec<_> = (0..data.n()).map(|i| model_gradient(&net, data.row(i)).unwrap()).collect();
        let direct = Matrix::from_fn(data.n(), data.n(), |i, j| grads[i].dot(&grads[j]));
        prop_assert!(k.k.max_abs_diff(&direct) <= 1e-10 * direct.frobenius_norm().max(1.0));
    }
}

//! Infinite-width angle recursion for ReLU networks.
//!
//! Two inputs at angle `θ` enter a wide ReLU layer and leave at angle
//! `next_layer_angle(θ)`. Stacking layers composes the map; the angle between
//! the full model gradients then follows from the per-layer angles. Linear
//! networks preserve every angle, which gives the baseline.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Per-layer embedding angles for one input pair, and optionally the
/// model-gradient angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleTrace {
    pub theta_in: f64,
    /// `per_layer[l]` is the angle after `l` hidden layers; `per_layer[0] == theta_in`.
    pub per_layer: Vec<f64>,
    pub phi: Option<f64>,
}

impl AngleTrace {
    pub fn depth(&self) -> usize {
        self.per_layer.len() - 1
    }
}

fn check_open_domain(theta: f64) -> Result<()> {
    if theta.is_finite() && (0.0..PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::AngleDomain(theta, "[0, pi)"))
    }
}

/// The arc-cosine layer map
/// `arccos((π - z)/π · cos z + sin z / π)` on `[0, π)`.
pub fn next_layer_angle(z: f64) -> Result<f64> {
    check_open_domain(z)?;
    Ok(next_layer_angle_unchecked(z))
}

/// Same map, accepting the closed interval `[0, π]`.
///
/// Evaluated through `1 - cos` in half-angle form so that small angles keep
/// full relative precision; mathematically identical to the arccos form with
/// its argument clamped to `[-1, 1]`.
pub(crate) fn next_layer_angle_unchecked(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let half = (0.5 * z).sin();
    let one_minus_cos = 2.0 * half * half - (z.sin() - z * z.cos()) / PI;
    let one_minus_cos = one_minus_cos.clamp(0.0, 2.0);
    2.0 * (0.5 * one_minus_cos).sqrt().asin()
}

pub(crate) fn layer_angles_unchecked(theta_in: f64, depth: usize) -> Vec<f64> {
    let mut angles = Vec::with_capacity(depth + 1);
    angles.push(theta_in);
    for l in 0..depth {
        angles.push(next_layer_angle_unchecked(angles[l]));
    }
    angles
}

/// `cos φ` from the layer angles `θ^(0..=L)`:
/// `(1/(L+1)) Σ_l cos θ^(l) Π_{l'=l}^{L-1} (1 - θ^(l')/π)`.
pub(crate) fn gradient_cos_from_layers(per_layer: &[f64]) -> f64 {
    let depth = per_layer.len() - 1;
    let mut sum = 0.0;
    let mut tail_product = 1.0;
    for l in (0..=depth).rev() {
        if l < depth {
            tail_product *= 1.0 - per_layer[l] / PI;
        }
        sum += per_layer[l].cos() * tail_product;
    }
    sum / (depth + 1) as f64
}

pub(crate) fn gradient_cos_unchecked(theta_in: f64, depth: usize) -> f64 {
    if theta_in == 0.0 {
        return 1.0;
    }
    gradient_cos_from_layers(&layer_angles_unchecked(theta_in, depth))
}

/// Embedding angles `θ^(l) = g^l(θ_in)` for `l = 0..=depth`.
pub fn embedding_angles(theta_in: f64, depth: usize) -> Result<AngleTrace> {
    check_open_domain(theta_in)?;
    Ok(AngleTrace {
        theta_in,
        per_layer: layer_angles_unchecked(theta_in, depth),
        phi: None,
    })
}

/// Cosine of the model-gradient angle of a depth-`depth` ReLU network.
pub fn gradient_angle_cos(theta_in: f64, depth: usize) -> Result<f64> {
    check_open_domain(theta_in)?;
    Ok(gradient_cos_unchecked(theta_in, depth))
}

/// Embedding angles plus the model-gradient angle `φ`.
pub fn gradient_angle(theta_in: f64, depth: usize) -> Result<AngleTrace> {
    let mut trace = embedding_angles(theta_in, depth)?;
    let cos_phi = if theta_in == 0.0 {
        1.0
    } else {
        gradient_cos_from_layers(&trace.per_layer)
    };
    trace.phi = Some(cos_phi.clamp(-1.0, 1.0).acos());
    Ok(trace)
}

/// Model-gradient angle of a linear network: the input angle, at every depth.
pub fn gradient_angle_linear(theta_in: f64, _depth: usize) -> Result<f64> {
    check_open_domain(theta_in)?;
    Ok(theta_in)
}

/// Leading-order factor `1 - L θ / (2π)` in `cos φ ≈ factor · cos θ`,
/// valid for small `θ`.
pub fn small_angle_cos_ratio(theta_in: f64, depth: usize) -> Result<f64> {
    if !(theta_in.is_finite() && (0.0..=PI / 4.0).contains(&theta_in)) {
        return Err(Error::AngleDomain(theta_in, "[0, pi/4]"));
    }
    Ok(1.0 - depth as f64 * theta_in / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct transcription of the arccos form, used as an oracle.
    fn g_direct(z: f64) -> f64 {
        (((PI - z) / PI) * z.cos() + z.sin() / PI).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn g_fixed_point_at_zero() {
        assert_eq!(next_layer_angle(0.0).unwrap(), 0.0);
    }

    #[test]
    fn g_at_right_angle() {
        // arccos(1/π)
        let v = next_layer_angle(PI / 2.0).unwrap();
        assert!((v - 1.246_850_219_862_915_9).abs() < 1e-12, "{v}");
    }

    #[test]
    fn g_matches_direct_form() {
        for i in 1..300 {
            let z = i as f64 * PI / 300.0;
            assert!((next_layer_angle(z).unwrap() - g_direct(z)).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn g_small_angle_expansion() {
        let z = 0.01;
        let expected = z - z * z / (3.0 * PI);
        assert!((next_layer_angle(z).unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn g_domain() {
        assert!(next_layer_angle(-1e-3).is_err());
        assert!(next_layer_angle(PI).is_err());
        assert!(next_layer_angle(f64::NAN).is_err());
    }

    #[test]
    fn embedding_angles_examples() {
        let zero = embedding_angles(0.0, 7).unwrap();
        assert!(zero.per_layer.iter().all(|&a| a == 0.0));

        let right = embedding_angles(PI / 2.0, 1).unwrap();
        assert!((right.per_layer[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((right.per_layer[1] - 1.246_850_219_862_915_9).abs() < 1e-12);

        let small = embedding_angles(0.01, 3).unwrap();
        let expected = 0.01 - 3.0 / (3.0 * PI) * 1e-4;
        assert!((small.per_layer[3] - expected).abs() < 1e-6);
        assert_eq!(small.depth(), 3);
        assert!(small.phi.is_none());
    }

    #[test]
    fn gradient_angle_examples() {
        for theta in [0.1, 0.7, 2.0] {
            let t = gradient_angle(theta, 0).unwrap();
            assert!((t.phi.unwrap() - theta).abs() < 1e-15);
        }
        // cos φ = (0·(1 - 1/2) + 1/π) / 2
        let right = gradient_angle(PI / 2.0, 1).unwrap();
        let cos_phi = gradient_angle_cos(PI / 2.0, 1).unwrap();
        assert!((cos_phi - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((right.phi.unwrap() - 1.410_961_700_409_759_6).abs() < 1e-12);
        assert!((right.phi.unwrap().to_degrees() - 80.842_150_488).abs() < 1e-6);

        for depth in [0, 3, 12] {
            assert_eq!(gradient_angle(0.0, depth).unwrap().phi, Some(0.0));
        }
    }

    #[test]
    fn linear_baseline_is_identity() {
        assert_eq!(gradient_angle_linear(0.3, 5).unwrap(), 0.3);
        assert_eq!(gradient_angle_linear(0.0, 0).unwrap(), 0.0);
        assert_eq!(gradient_angle_linear(1.2, 10).unwrap(), 1.2);
        assert!(gradient_angle_linear(4.0, 1).is_err());
    }

    #[test]
    fn small_angle_ratio_examples() {
        assert_eq!(small_angle_cos_ratio(0.0, 3).unwrap(), 1.0);
        let v = small_angle_cos_ratio(0.01, 4).unwrap();
        assert!((v - 0.993_633_802_276_324).abs() < 1e-12);
        assert!(small_angle_cos_ratio(1.0, 1).is_err());
    }

    #[test]
    fn small_angle_ratio_consistency() {
        let thetas = [1e-3, 5e-4, 2.5e-4];
        for depth in [1usize, 4, 10] {
            let ys: Vec<f64> = thetas
                .iter()
                .map(|&t| (1.0 - gradient_angle_cos(t, depth).unwrap() / t.cos()) / t)
                .collect();
            // intercept of the least-squares line through (θ, y)
            let intercept = linear_fit_intercept(&thetas, &ys);
            let slope = depth as f64 / (2.0 * PI);
            assert!((intercept - slope).abs() / slope < 0.05, "L={depth}");
            let ratio = small_angle_cos_ratio(2.5e-4, depth).unwrap();
            let exact = gradient_angle_cos(2.5e-4, depth).unwrap() / 2.5e-4f64.cos();
            assert!((ratio - exact).abs() < 1e-6);
        }
    }

    fn linear_fit_intercept(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        my - sxy / sxx * mx
    }

    #[test]
    fn g_is_monotone_increasing() {
        let n = 10_000;
        let mut prev = next_layer_angle(0.0).unwrap();
        for i in 1..n {
            let z = i as f64 * PI / n as f64;
            let v = next_layer_angle(z).unwrap();
            assert!(v > prev, "z={z}");
            prev = v;
        }
    }

    #[test]
    fn g_below_diagonal() {
        for i in 0..10_000 {
            let z = 1e-6 + i as f64 * (PI - 1e-6) / 10_000.0;
            assert!(next_layer_angle(z).unwrap() < z, "z={z}");
        }
    }

    #[test]
    fn iterates_collapse() {
        // high-precision values of g^200(θ); the tail decays like 3π/l
        let oracle = [
            (0.5, 0.042_285_979_845_891_91),
            (1.0, 0.043_880_550_419_045_07),
            (2.0, 0.044_510_648_829_963_91),
            (3.0, 0.044_585_125_278_799_49),
        ];
        for (theta, expected) in oracle {
            let trace = embedding_angles(theta, 200).unwrap();
            assert!(trace.per_layer.windows(2).all(|w| w[1] <= w[0]));
            assert!(trace.per_layer.iter().all(|&a| (0.0..PI).contains(&a)));
            assert!((trace.per_layer[200] - expected).abs() < 1e-10, "theta={theta}");
        }
        let deep = embedding_angles(1.0, 1000).unwrap();
        assert!(deep.per_layer[1000] < 1e-2);
        assert!((deep.per_layer[1000] * 1000.0 - 3.0 * PI).abs() < 0.5);
    }

    #[test]
    fn better_separation_for_similar_inputs() {
        for deg in 1..60 {
            let theta = (deg as f64).to_radians();
            let mut prev = theta;
            for depth in 1..=10 {
                let phi = gradient_angle(theta, depth).unwrap().phi.unwrap();
                assert!(phi > theta, "deg={deg} L={depth}");
                if deg <= 30 {
                    assert!(phi > prev, "deg={deg} L={depth}");
                }
                prev = phi;
            }
        }
    }

    #[test]
    fn dissimilar_inputs_stay_dissimilar() {
        for deg in 61..180 {
            let theta = (deg as f64).to_radians();
            for depth in 1..=10 {
                let phi = gradient_angle(theta, depth).unwrap().phi.unwrap();
                assert!(phi > 60f64.to_radians(), "deg={deg} L={depth}");
            }
        }
    }
}

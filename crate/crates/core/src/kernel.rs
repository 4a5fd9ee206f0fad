//! Analytic kernel matrices on a dataset: the Gram matrix and the
//! infinite-width NTKs of linear, shallow ReLU and deep ReLU networks.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::angles;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SpectrumReport, PSD_TOLERANCE};
use crate::mcnet::Activation;

/// Input rows with cached norms and pairwise input angles.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    x: Matrix,
    norms: Vec<f64>,
    pair_angles: Matrix,
}

impl DatasetMatrix {
    /// Rejects rows of zero norm, for which input angles are undefined.
    pub fn new(x: Matrix) -> Result<Self> {
        let norms: Vec<f64> = (0..x.rows()).map(|i| linalg::norm(x.row(i))).collect();
        if let Some(row) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroNormRow { row });
        }
        let n = x.rows();
        let mut pair_angles = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let theta = vector_angle(x.row(i), norms[i], x.row(j), norms[j]);
                pair_angles[(i, j)] = theta;
                pair_angles[(j, i)] = theta;
            }
        }
        Ok(Self {
            x,
            norms,
            pair_angles,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// `θ_in(x_i, x_j)` in radians; symmetric with a zero diagonal.
    pub fn pair_angles(&self) -> &Matrix {
        &self.pair_angles
    }

    pub fn angle(&self, i: usize, j: usize) -> f64 {
        self.pair_angles[(i, j)]
    }

    /// Rows rescaled to unit norm.
    pub fn unit_normalized(&self) -> DatasetMatrix {
        let x = Matrix::from_fn(self.n(), self.d(), |i, j| self.x[(i, j)] / self.norms[i]);
        Self::new(x).expect("unit rows are non-zero")
    }
}

/// Angle between two non-zero vectors via `2·atan2(|u - v|, |u + v|)` on the
/// normalized vectors; exact for identical and antipodal directions.
pub(crate) fn vector_angle(a: &[f64], norm_a: f64, b: &[f64], norm_b: f64) -> f64 {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let u = x / norm_a;
        let v = y / norm_b;
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Gram,
    NtkLinear,
    NtkShallow,
    NtkDeepAnalytic,
    NtkEmpirical,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Gram => "gram",
            Provenance::NtkLinear => "ntk-linear",
            Provenance::NtkShallow => "ntk-shallow",
            Provenance::NtkDeepAnalytic => "ntk-deep-analytic",
            Provenance::NtkEmpirical => "ntk-empirical",
        };
        f.write_str(s)
    }
}

/// How a depth-`L` NTK is scaled. `Averaged` divides by `L + 1` so the
/// diagonal equals `‖x_i‖²` at every depth; condition numbers do not depend
/// on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    #[default]
    Averaged,
}

impl Normalization {
    /// Factor applied to a per-layer-averaged kernel.
    pub fn scale(self, depth: usize) -> f64 {
        match self {
            Normalization::Raw => (depth + 1) as f64,
            Normalization::Averaged => 1.0,
        }
    }
}

/// A symmetric PSD kernel matrix tagged with how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub k: Matrix,
    pub provenance: Provenance,
    pub depth: usize,
    pub normalization: Normalization,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.k.rows()
    }

    pub fn spectrum(&self) -> Result<SpectrumReport> {
        linalg::psd_spectrum(&self.k)
    }

    pub fn condition_number(&self) -> Result<f64> {
        Ok(self.spectrum()?.kappa)
    }
}

/// `G = X Xᵀ`.
pub fn gram(data: &DatasetMatrix) -> KernelMatrix {
    let n = data.n();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = linalg::dot(data.row(i), data.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    KernelMatrix {
        k,
        provenance: Provenance::Gram,
        depth: 0,
        normalization: Normalization::Averaged,
    }
}

/// Infinite-width NTK of a depth-`L` linear network: `(L + 1) G` raw, `G` averaged.
pub fn ntk_linear(data: &DatasetMatrix, depth: usize, normalization: Normalization) -> KernelMatrix {
    let g = gram(data);
    KernelMatrix {
        k: g.k.scaled(normalization.scale(depth)),
        provenance: Provenance::NtkLinear,
        depth,
        normalization,
    }
}

/// NTK of the one-hidden-layer ReLU network with a fixed output layer:
/// `K_ij = x_iᵀ x_j (1 - θ_ij / π)`.
pub fn ntk_shallow(data: &DatasetMatrix) -> KernelMatrix {
    let mut k = gram(data).k;
    let n = data.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = k[(i, j)] * (1.0 - data.angle(i, j) / PI);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    KernelMatrix {
        k,
        provenance: Provenance::NtkShallow,
        depth: 1,
        normalization: Normalization::Averaged,
    }
}

/// Infinite-width NTK of a depth-`L` ReLU network:
/// `K_ij = ‖x_i‖ ‖x_j‖ cos φ(θ_ij, L)` averaged, times `L + 1` raw.
pub fn ntk_deep(data: &DatasetMatrix, depth: usize, normalization: Normalization) -> KernelMatrix {
    let n = data.n();
    let norms = data.norms();
    let scale = normalization.scale(depth);
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = scale * norms[i] * norms[i];
        for j in (i + 1)..n {
            let cos_phi = angles::gradient_cos_unchecked(data.angle(i, j), depth);
            let v = scale * norms[i] * norms[j] * cos_phi;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    KernelMatrix {
        k,
        provenance: Provenance::NtkDeepAnalytic,
        depth,
        normalization,
    }
}

/// Smallest pairwise model-gradient angle over `i < j`.
pub fn min_gradient_angle(data: &DatasetMatrix, depth: usize, kind: Activation) -> Result<f64> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "minimum pairwise angle needs at least two samples".into(),
        ));
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let theta = data.angle(i, j);
            let phi = match kind {
                Activation::Identity => theta,
                Activation::Relu => angles::gradient_cos_unchecked(theta, depth)
                    .clamp(-1.0, 1.0)
                    .acos(),
            };
            best = best.min(phi);
        }
    }
    Ok(best)
}

/// Outcome of comparing `λ_min(B Bᵀ)` with the closest-pair upper bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallestEigenvalueBound {
    pub lambda_min: f64,
    pub bound: f64,
    pub holds: bool,
    /// Row pair with the smallest angle, and that angle.
    pub pair: (usize, usize),
    pub phi: f64,
}

/// Checks `λ_min(B Bᵀ) ≤ 2‖b_i‖²‖b_j‖² / (‖b_i‖² + ‖b_j‖²) · (1 - cos φ)` for
/// the row pair with the smallest angle `φ`.
pub fn prop1_bound_check(b: &Matrix) -> Result<SmallestEigenvalueBound> {
    if b.rows() < 2 {
        return Err(Error::InvalidArgument("need at least two rows".into()));
    }
    let data = DatasetMatrix::new(b.clone())?;
    let n = data.n();
    let mut pair = (0, 1);
    for i in 0..n {
        for j in (i + 1)..n {
            if data.angle(i, j) < data.angle(pair.0, pair.1) {
                pair = (i, j);
            }
        }
    }
    let phi = data.angle(pair.0, pair.1);
    let a2 = data.norms()[pair.0].powi(2);
    let b2 = data.norms()[pair.1].powi(2);
    let half = (0.5 * phi).sin();
    let bound = 2.0 * a2 * b2 / (a2 + b2) * (2.0 * half * half);

    let spectrum = gram(&data).spectrum()?;
    let slack = PSD_TOLERANCE * spectrum.lambda_max;
    Ok(SmallestEigenvalueBound {
        lambda_min: spectrum.lambda_min,
        bound,
        holds: spectrum.lambda_min <= bound + slack,
        pair,
        phi,
    })
}

/// Closed-form spectrum of the 2×2 kernel
/// `[[n1², n1 n2 cos a], [n1 n2 cos a, n2²]]`.
pub fn two_point_spectrum(norm1: f64, norm2: f64, angle: f64) -> Result<SpectrumReport> {
    if !(norm1 > 0.0 && norm2 > 0.0 && norm1.is_finite() && norm2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "norms must be positive, got {norm1} and {norm2}"
        )));
    }
    if !(0.0..=PI).contains(&angle) {
        return Err(Error::AngleDomain(angle, "[0, pi]"));
    }
    let a = norm1 * norm1;
    let b = norm2 * norm2;
    let c = norm1 * norm2 * angle.cos();
    let disc = ((a - b).powi(2) + 4.0 * c * c).sqrt();
    let lambda_1 = 0.5 * (a + b + disc);
    // det = a b sin²(angle); dividing avoids cancellation in (a + b - disc)
    let det = a * b * angle.sin().powi(2);
    let lambda_2 = det / lambda_1;
    Ok(SpectrumReport::from_eigenvalues(vec![lambda_1, lambda_2]))
}

//! Small dense complex matrices: the fiber space E is realized as C^d.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = nalgebra::DVector<Complex64>;

/// Condition number above which a matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e13;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("matrix is numerically singular (1-norm condition {condition:e})")]
pub struct SingularMatrix {
    pub condition: f64,
}

/// Operator norm on L(E).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixNorm {
    /// Largest singular value, induced by the Euclidean norm.
    #[default]
    Spectral,
    /// Induced by the max norm.
    MaxRowSum,
    /// Induced by the l1 norm.
    MaxColSum,
}

impl MatrixNorm {
    pub fn of(self, a: &CMatrix) -> f64 {
        match self {
            MatrixNorm::Spectral => spectral_norm(a),
            MatrixNorm::MaxRowSum => a
                .row_iter()
                .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max),
            MatrixNorm::MaxColSum => norm1(a),
        }
    }

    /// The vector norm on E this operator norm is induced by.
    pub fn fiber(self) -> FiberNorm {
        match self {
            MatrixNorm::Spectral => FiberNorm::Euclidean,
            MatrixNorm::MaxRowSum => FiberNorm::Max,
            MatrixNorm::MaxColSum => FiberNorm::Sum,
        }
    }
}

/// Norm on E = C^d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberNorm {
    #[default]
    Euclidean,
    Max,
    Sum,
}

impl FiberNorm {
    pub fn of(self, v: &[Complex64]) -> f64 {
        match self {
            FiberNorm::Euclidean => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            FiberNorm::Max => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
            FiberNorm::Sum => v.iter().map(|z| z.norm()).sum(),
        }
    }

    /// The operator norm induced by this vector norm.
    pub fn induced(self) -> MatrixNorm {
        match self {
            FiberNorm::Euclidean => MatrixNorm::Spectral,
            FiberNorm::Max => MatrixNorm::MaxRowSum,
            FiberNorm::Sum => MatrixNorm::MaxColSum,
        }
    }
}

pub fn spectral_norm(a: &CMatrix) -> f64 {
    match a.shape() {
        (0, _) | (_, 0) => 0.0,
        (1, 1) => a[(0, 0)].norm(),
        _ => a
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0, |m, &s| f64::max(m, s)),
    }
}

pub fn norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Nilpotent shift: ones on the superdiagonal.
pub fn nilpotent_shift(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| {
        if j == i + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn scalar(d: usize, c: Complex64) -> CMatrix {
    CMatrix::from_diagonal_element(d, d, c)
}

/// Inverse by LU with partial pivoting, together with the 1-norm condition number.
pub fn inverse_with_condition(a: &CMatrix) -> Result<(CMatrix, f64), SingularMatrix> {
    if a.nrows() == 1 {
        let z = a[(0, 0)];
        if z.norm() == 0.0 || !z.is_finite() {
            return Err(SingularMatrix { condition: f64::INFINITY });
        }
        return Ok((CMatrix::from_element(1, 1, z.inv()), 1.0));
    }
    let inv = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or(SingularMatrix { condition: f64::INFINITY })?;
    let condition = norm1(a) * norm1(&inv);
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(SingularMatrix { condition });
    }
    Ok((inv, condition))
}

/// Inverse of a + lambda I. The reported condition also measures cancellation
/// against the size of the summands, so a near-exact shift onto an
/// eigenvalue counts as singular even for 1x1 matrices.
pub fn shifted_inverse(a: &CMatrix, lambda: Complex64) -> Result<(CMatrix, f64), SingularMatrix> {
    let shifted = a + scalar(a.nrows(), lambda);
    let (inv, cond) = inverse_with_condition(&shifted)?;
    let cancellation = norm1(&inv) * (norm1(a) + lambda.norm());
    let condition = cond.max(cancellation);
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(SingularMatrix { condition });
    }
    Ok((inv, condition))
}

/// r e^{i theta}, with exact zeros on the coordinate axes.
pub fn polar(r: f64, theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    Complex64::new(r * snap(c), r * snap(s))
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix, SingularMatrix> {
    inverse_with_condition(a).map(|(inv, _)| inv)
}

/// Matrix exponential (scaling and squaring around a Padé approximant).
pub fn expm(a: &CMatrix) -> CMatrix {
    a.exp()
}

/// phi_1(Z) = Z^{-1}(e^Z - I), entire in Z.
///
/// Taylor series below norm 0.5, otherwise read off the exponential of the
/// augmented block matrix [[Z, I], [0, 0]], which stays valid for singular Z.
pub fn phi1(z: &CMatrix) -> CMatrix {
    let d = z.nrows();
    if d == 1 {
        let w = z[(0, 0)];
        let v = if w.norm() < 0.5 {
            phi1_series_scalar(w)
        } else {
            (w.exp() - 1.0) / w
        };
        return CMatrix::from_element(1, 1, v);
    }
    if norm1(z) < 0.5 {
        let mut term = identity(d);
        let mut sum = term.clone();
        for j in 1..30 {
            term = &term * z / Complex64::from((j + 1) as f64);
            sum += &term;
            if norm1(&term) < 1e-18 {
                break;
            }
        }
        sum
    } else {
        let mut aug = CMatrix::zeros(2 * d, 2 * d);
        aug.view_mut((0, 0), (d, d)).copy_from(z);
        aug.view_mut((0, d), (d, d)).fill_with_identity();
        let e = aug.exp();
        e.view((0, d), (d, d)).into_owned()
    }
}

fn phi1_series_scalar(w: Complex64) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for j in 1..30 {
        term = term * w / (j + 1) as f64;
        sum += term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    sum
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn norms_of_jordan_block() {
        let a = identity(2) + nilpotent_shift(2);
        assert!((MatrixNorm::MaxRowSum.of(&a) - 2.0).abs() < 1e-15);
        assert!((MatrixNorm::MaxColSum.of(&a) - 2.0).abs() < 1e-15);
        // singular values of [[1,1],[0,1]] are the golden ratio and its inverse
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((MatrixNorm::Spectral.of(&a) - phi).abs() < 1e-12);
    }

    #[test]
    fn inverse_of_shifted_jordan() {
        let a = scalar(2, c(2.0, 0.0)) + nilpotent_shift(2);
        let inv = inverse(&a).unwrap();
        let expected = scalar(2, c(0.5, 0.0)) - nilpotent_shift(2) * c(0.25, 0.0);
        assert!(max_abs_diff(&inv, &expected) < 1e-15);
    }

    #[test]
    fn shift_onto_eigenvalue_is_singular() {
        let a = scalar(1, c(0.0, 10.0));
        assert!(shifted_inverse(&a, c(6e-16, -10.0)).is_err());
        assert!(shifted_inverse(&a, c(1.0, -10.0)).is_ok());
        assert_eq!(polar(2.0, -std::f64::consts::FRAC_PI_2), c(0.0, -2.0));
    }

    #[test]
    fn singular_detected() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(inverse(&a).is_err());
        assert!(inverse(&CMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn phi1_branches_agree() {
        let z = CMatrix::from_row_slice(2, 2, &[c(-0.3, 0.1), c(0.2, 0.0), c(0.0, 0.05), c(-0.1, 0.0)]);
        let series = phi1(&z);
        let mut aug = CMatrix::zeros(4, 4);
        aug.view_mut((0, 0), (2, 2)).copy_from(&z);
        aug.view_mut((0, 2), (2, 2)).fill_with_identity();
        let block = aug.exp().view((0, 2), (2, 2)).into_owned();
        assert!(max_abs_diff(&series, &block) < 1e-14);

        let w = c(-3.0, 1.0);
        let expect = (w.exp() - 1.0) / w;
        let got = phi1(&scalar(2, w));
        assert!((got[(0, 0)] - expect).norm() < 1e-13);
        assert!(got[(0, 1)].norm() < 1e-13);
    }

    #[test]
    fn phi1_of_singular_matrix() {
        // diag(0, -2): phi1 = diag(1, (1 - e^-2)/2)
        let z = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.0, 0.0), c(-2.0, 0.0)]));
        let p = phi1(&z);
        assert!((p[(0, 0)] - c(1.0, 0.0)).norm() < 1e-13);
        assert!((p[(1, 1)] - c((1.0 - (-2f64).exp()) / 2.0, 0.0)).norm() < 1e-13);
    }
}

//! Joint covariance of the Kac-Rice Gaussian vector for the Bargmann-Fock
//! field `f(z) = Σ a_j z^j / √(j!)`, `E f(z) conj(f(w)) = e^{z w̄}`.
//!
//! The vector is `(f(u), ∇'f(v) | ∇'f(u), ∇'∇'f(v), ∇''∇'f(v))` with the
//! Chern connection `∇' = ∂_z - z̄`. The first two entries are conditioned to
//! vanish; `A` is their covariance, `C` that of the last three and `B` the
//! cross block. The conditional covariance is the Schur complement
//! `Λ = C - B* A⁻¹ B`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::numerics::{self, psd_sqrt, schur_complement, ComplexMatrix, NumericsError};

/// Largest separation (and coordinate modulus) accepted; `e^{36}` is well
/// inside double range and the long-range limit is saturated long before.
pub const MAX_SEPARATION: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CovarianceError {
    #[error("separation r = {0} outside [0, {MAX_SEPARATION}]")]
    SeparationOutOfRange(f64),
    #[error("point modulus {0} exceeds {MAX_SEPARATION}")]
    ArgumentOutOfRange(f64),
    #[error("dimension m = {0} outside [1, 4]")]
    DimensionOutOfRange(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

type C64 = Complex64;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Everything the evaluator needs at one separation.
#[derive(Clone, Debug)]
pub struct JointCovariance {
    pub r: f64,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub c: ComplexMatrix,
    pub lambda: ComplexMatrix,
    /// `S P S` with `S = Λ^{1/2}`, `P = e₁e₁*`.
    pub m_p: ComplexMatrix,
    /// `S Q S` with `Q = diag(0, 1, -1)`.
    pub m_q: ComplexMatrix,
    pub det_a: f64,
}

/// Unreduced covariance blocks at arbitrary `(u, v)`.
#[derive(Clone, Debug)]
pub struct GeneralBlocks {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub c: ComplexMatrix,
}

pub fn projector_p() -> ComplexMatrix {
    ComplexMatrix::from_diag(&[1.0, 0.0, 0.0])
}

pub fn signature_q() -> ComplexMatrix {
    ComplexMatrix::from_diag(&[0.0, 1.0, -1.0])
}

impl JointCovariance {
    /// Completes the bundle from raw blocks: Schur complement, square root,
    /// the two conjugated forms and `det A`.
    pub fn from_blocks(
        r: f64,
        a: ComplexMatrix,
        b: ComplexMatrix,
        c: ComplexMatrix,
    ) -> Result<Self, CovarianceError> {
        let lambda = schur_complement(&a, &b, &c)?;
        let s = psd_sqrt(&lambda)?;
        let m_p = (&(&s * &projector_p()) * &s).hermitian_part();
        let m_q = (&(&s * &signature_q()) * &s).hermitian_part();
        let det_a = numerics::det(&a)?.re;
        if !(det_a > 0.0) {
            return Err(NumericsError::Singular.into());
        }
        Ok(Self {
            r,
            a,
            b,
            c,
            lambda,
            m_p,
            m_q,
            det_a,
        })
    }

    /// Same bundle, built from the general-position blocks at `(u, v)`.
    pub fn at_points(u: C64, v: C64) -> Result<Self, CovarianceError> {
        let GeneralBlocks { a, b, c } = build_general_covariance(u, v)?;
        Self::from_blocks((u - v).norm(), a, b, c)
    }
}

/// Reduced frame `u = r`, `v = 0`.
pub fn build_joint_covariance(r: f64) -> Result<JointCovariance, CovarianceError> {
    if !(0.0..=MAX_SEPARATION).contains(&r) {
        return Err(CovarianceError::SeparationOutOfRange(r));
    }
    let r2 = r * r;
    let e = r2.exp();
    let a = ComplexMatrix::from_real_rows(&[&[e, r], &[r, 1.0]]);
    let b = ComplexMatrix::from_real_rows(&[&[0.0, r2, -1.0], &[1.0 - r2, 0.0, 0.0]]);
    let cross = 2.0 * r - r * r2;
    let c = ComplexMatrix::from_real_rows(&[&[e, cross, r], &[cross, 2.0, 0.0], &[r, 0.0, 1.0]]);
    JointCovariance::from_blocks(r, a, b, c)
}

pub fn build_general_covariance(u: C64, v: C64) -> Result<GeneralBlocks, CovarianceError> {
    for z in [u, v] {
        if !(z.norm() <= MAX_SEPARATION) {
            return Err(CovarianceError::ArgumentOutOfRange(z.norm()));
        }
    }
    let (uu, vv) = (u.norm_sqr(), v.norm_sqr());
    let e_uv = (u * v.conj()).exp();
    let e_vu = (v * u.conj()).exp();
    let d = u - v;
    let mix = u.conj() * v + v.conj() * u;

    let a = ComplexMatrix::from_rows(&[
        vec![re(uu.exp()), d * e_uv],
        vec![d.conj() * e_vu, re(vv.exp())],
    ]);
    let b = ComplexMatrix::from_rows(&[
        vec![re(0.0), d * d * e_uv, -e_uv],
        vec![(re(1.0) + mix - uu - vv) * e_vu, re(0.0), re(0.0)],
    ]);
    let c12 = d * (mix + 2.0 - vv - uu) * e_uv;
    let c13 = d.conj() * e_uv;
    let c = ComplexMatrix::from_rows(&[
        vec![re(uu.exp()), c12, c13],
        vec![c12.conj(), re(2.0 * vv.exp()), re(0.0)],
        vec![c13.conj(), re(0.0), re(vv.exp())],
    ]);
    Ok(GeneralBlocks { a, b, c })
}

/// Long-range approximation of `Λ(r)`: exact up to terms of order
/// `r^k e^{-r^2}`.
pub fn lambda_long_range(r: f64) -> ComplexMatrix {
    let r2 = r * r;
    let cross = 2.0 * r - r * r2;
    ComplexMatrix::from_real_rows(&[
        &[r2.exp() - (r2 - 1.0).powi(2), cross, r],
        &[cross, 2.0, 0.0],
        &[r, 0.0, 1.0],
    ])
}

/// Diagonal of the limiting covariance `Λ̃` in complex dimension `m`:
/// `m` unit variances for `ξ`, then the upper triangle of the symmetric
/// Hessian `H₁` row by row (diagonal variance 2, off-diagonal 1), then `η`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HigherDimLayout {
    pub m: usize,
    pub variances: Vec<f64>,
}

impl HigherDimLayout {
    pub fn xi_len(&self) -> usize {
        self.m
    }

    pub fn hessian_len(&self) -> usize {
        self.m * (self.m + 1) / 2
    }

    /// Variance of `H₁[i][j]`, `i <= j`.
    pub fn hessian_variance(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let offset: usize = (0..i).map(|k| self.m - k).sum();
        self.variances[self.m + offset + (j - i)]
    }

    pub fn eta_variance(&self) -> f64 {
        *self.variances.last().expect("non-empty")
    }

    pub fn det(&self) -> f64 {
        self.variances.iter().product()
    }
}

pub fn higher_dim_layout(m: usize) -> Result<HigherDimLayout, CovarianceError> {
    if !(1..=4).contains(&m) {
        return Err(CovarianceError::DimensionOutOfRange(m));
    }
    let mut variances = vec![1.0; m];
    for row in 0..m {
        variances.push(2.0);
        variances.extend(std::iter::repeat_n(1.0, m - row - 1));
    }
    variances.push(1.0);
    debug_assert_eq!(variances.len(), (m + 1) * (m + 2) / 2);
    Ok(HigherDimLayout { m, variances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::hermitian_eig;

    /// Entries of `Λ(r)` written out by hand from `A⁻¹ = [[1, -r], [-r, e^{r²}]] / det A`.
    fn lambda_closed_form(r: f64) -> [[f64; 3]; 3] {
        let r2 = r * r;
        let e = r2.exp();
        let d = e - r2;
        let l11 = e - (1.0 - r2).powi(2) * e / d;
        let l12 = 2.0 * r - r * r2 + r * r2 * (1.0 - r2) / d;
        let l13 = r - r * (1.0 - r2) / d;
        let l22 = 2.0 - r2 * r2 / d;
        let l23 = r2 / d;
        let l33 = 1.0 - 1.0 / d;
        [[l11, l12, l13], [l12, l22, l23], [l13, l23, l33]]
    }

    #[test]
    fn contact_limit() {
        let cov = build_joint_covariance(0.0).unwrap();
        assert!(cov.lambda.max_abs_diff(&ComplexMatrix::from_diag(&[0.0, 2.0, 0.0])) <= 1e-12);
        assert_eq!(cov.det_a, 1.0);
        assert_eq!(cov.m_p.max_abs(), 0.0);
    }

    #[test]
    fn schur_matches_hand_algebra() {
        for r in [0.05, 0.3, 1.0, 2.0, 3.5, 6.0] {
            let cov = build_joint_covariance(r).unwrap();
            let expect = lambda_closed_form(r);
            let scale = cov.lambda.max_abs();
            for i in 0..3 {
                for j in 0..3 {
                    let got = cov.lambda[(i, j)];
                    assert!(
                        (got.re - expect[i][j]).abs() <= 1e-12 * scale.max(1.0) && got.im == 0.0,
                        "r={r} ({i},{j}): {got} vs {}",
                        expect[i][j]
                    );
                }
            }
            let det_expect = (r * r).exp() - r * r;
            assert!((cov.det_a - det_expect).abs() <= 1e-10 * det_expect);
        }
    }

    #[test]
    fn long_range_matrix_at_cap() {
        let cov = build_joint_covariance(6.0).unwrap();
        let l = &cov.lambda;
        assert!((l[(0, 0)].re / (36f64.exp() - 35.0 * 35.0) - 1.0).abs() < 1e-12);
        assert!((l[(0, 1)].re - (12.0 - 216.0)).abs() < 1e-9);
        assert!((l[(0, 2)].re - 6.0).abs() < 1e-9);
        assert!((l[(1, 1)].re - 2.0).abs() < 1e-9);
        assert!((l[(2, 2)].re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn long_range_estimate_holds_from_four() {
        for k in 0..=20 {
            let r = 4.0 + 0.1 * k as f64;
            let cov = build_joint_covariance(r).unwrap();
            let diff = cov.lambda.max_abs_diff(&lambda_long_range(r));
            assert!(diff <= 1e-6 * cov.lambda.max_abs(), "r={r}: {diff}");
        }
        // Absolute agreement once e^{-r²} has beaten the polynomial prefactors.
        for r in [5.0, 5.5, 6.0] {
            let cov = build_joint_covariance(r).unwrap();
            assert!(cov.lambda.max_abs_diff(&lambda_long_range(r)) <= 1e-6);
        }
    }

    #[test]
    fn lambda_psd_with_zero_only_at_contact() {
        for k in 1..=200 {
            let r = 6.0 * k as f64 / 200.0;
            let cov = build_joint_covariance(r).unwrap();
            let eig = hermitian_eig(&cov.lambda).unwrap();
            assert!(eig.eigenvalues[0] >= -1e-9 * cov.lambda.max_abs());
            // The smallest eigenvalue vanishes like r^8 at contact; below
            // r ≈ 0.1 it is positive but under 1e-12.
            let floor = if r >= 0.1 { 1e-12 } else { 0.0 };
            assert!(eig.eigenvalues[0] > floor, "r={r}: {:?}", eig.eigenvalues);
        }
    }

    #[test]
    fn trace_identities() {
        for r in [0.1, 0.7, 1.5, 3.0, 5.0] {
            let cov = build_joint_covariance(r).unwrap();
            let l = &cov.lambda;
            let scale = l.max_abs();
            assert!((cov.m_p.trace().re - l[(0, 0)].re).abs() <= 1e-10 * scale);
            assert!((cov.m_q.trace().re - (l[(1, 1)].re - l[(2, 2)].re)).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn general_blocks_reduce_to_canonical_frame() {
        for r in [0.0, 0.4, 1.0, 2.5] {
            let g = build_general_covariance(C64::new(r, 0.0), C64::new(0.0, 0.0)).unwrap();
            let cov = build_joint_covariance(r).unwrap();
            assert!(g.a.max_abs_diff(&cov.a) <= 1e-14 * cov.a.max_abs());
            assert!(g.b.max_abs_diff(&cov.b) <= 1e-14 * cov.b.max_abs().max(1.0));
            assert!(g.c.max_abs_diff(&cov.c) <= 1e-14 * cov.c.max_abs());
        }
        let g = build_general_covariance(C64::new(0.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        assert_eq!(g.a, ComplexMatrix::identity(2));
    }

    #[test]
    fn general_blocks_hermitian() {
        let g = build_general_covariance(C64::new(1.0, 1.0), C64::new(0.0, 1.0)).unwrap();
        assert!(g.a.is_hermitian());
        assert!(g.c.is_hermitian());
    }

    #[test]
    fn range_errors() {
        assert!(matches!(build_joint_covariance(6.5), Err(CovarianceError::SeparationOutOfRange(_))));
        assert!(matches!(build_joint_covariance(-0.1), Err(CovarianceError::SeparationOutOfRange(_))));
        assert!(matches!(
            build_general_covariance(C64::new(7.0, 0.0), C64::new(0.0, 0.0)),
            Err(CovarianceError::ArgumentOutOfRange(_))
        ));
        assert!(matches!(higher_dim_layout(0), Err(CovarianceError::DimensionOutOfRange(0))));
        assert!(matches!(higher_dim_layout(5), Err(CovarianceError::DimensionOutOfRange(5))));
    }

    #[test]
    fn higher_dim_patterns() {
        assert_eq!(higher_dim_layout(1).unwrap().variances, vec![1.0, 2.0, 1.0]);
        assert_eq!(higher_dim_layout(2).unwrap().variances, vec![1.0, 1.0, 2.0, 1.0, 2.0, 1.0]);
        let s3 = higher_dim_layout(3).unwrap();
        assert_eq!(s3.variances.len(), 10);
        assert_eq!(
            s3.variances,
            vec![1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 2.0, 1.0]
        );
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 2.0 } else { 1.0 };
                assert_eq!(s3.hessian_variance(i, j), expect);
            }
        }
        assert_eq!(higher_dim_layout(4).unwrap().variances.len(), 15);
    }
}

//! Small dense complex linear algebra.
//!
//! Everything here is sized for the covariance blocks of the correlation
//! evaluator (at most a few dozen rows), so the algorithms favour accuracy on
//! strongly graded matrices over asymptotic speed. Entries of the blocks span
//! `1 ..= e^{36}`, which is why every tolerance is scaled by `max|M|` and why
//! the eigensolver uses a relative (not absolute) off-diagonal threshold.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Relative Hermitian-symmetry tolerance, scaled by `max|M|`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Negative eigenvalues down to `-PSD_CLAMP * max|M|` are clamped to zero.
pub const PSD_CLAMP: f64 = 1e-10;
/// Smallest admissible eigenvalue of the equilibrated `A` in a Schur complement.
pub const SINGULAR_A_TOL: f64 = 1e-13;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e}, scale {scale:.3e})")]
    NonHermitianInput { asymmetry: f64, scale: f64 },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e} below {floor:.3e})")]
    NotPositiveSemidefinite { eigenvalue: f64, floor: f64 },
    #[error("Schur pivot block is singular (equilibrated eigenvalue {min_eigenvalue:.3e})")]
    SingularA { min_eigenvalue: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry produced")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().into_iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `max|M - M*|`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.is_square() && self.hermitian_asymmetry() <= HERMITIAN_TOL * self.max_abs()
    }

    /// Hermitian part `(M + M*) / 2`; the diagonal comes out exactly real.
    pub fn hermitian_part(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            out[(i, i)] = C64::new(self[(i, i)].re, 0.0);
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `v* M v` for Hermitian `M`, returned as a real number.
    pub fn quadratic_form(&self, v: &[C64]) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..self.cols {
                row += self[(i, j)] * v[j];
            }
            acc += v[i].conj() * row;
        }
        acc.re
    }

    fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "product: {}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_mul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.check_same_shape(rhs, "sum").expect("matrix sum dimension mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.check_same_shape(rhs, "difference")
            .expect("matrix difference dimension mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>12.5e}{:+.5e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Eigen-decomposition `M = U diag(λ) U*` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EigDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` is the eigenvector of `eigenvalues[k]`.
    pub basis: ComplexMatrix,
}

impl EigDecomposition {
    /// `U f(D) U*` for a real spectral function `f`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let ui = self.basis[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += ui * self.basis[(j, k)].conj();
                }
            }
        }
        out.hermitian_part()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.spectral_map(|x| x)
    }
}

/// Cyclic complex Jacobi eigensolver.
///
/// A rotation is skipped when `|m_pq| <= eps * sqrt(|m_pp m_qq|)`, the
/// relative criterion that keeps small eigenvalues of graded positive
/// matrices accurate.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<EigDecomposition> {
    if !m.is_square() {
        return Err(NumericsError::DimensionMismatch(format!(
            "eigendecomposition of {}x{}",
            m.rows, m.cols
        )));
    }
    if !m.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    if !m.is_hermitian() {
        return Err(NumericsError::NonHermitianInput {
            asymmetry: m.hermitian_asymmetry(),
            scale: m.max_abs(),
        });
    }
    let n = m.rows;
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let floor = 1e-300_f64.max(1e-30 * a.max_abs());

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let g = a[(p, q)];
                let gabs = g.norm();
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if gabs <= floor || gabs <= f64::EPSILON * 0.5 * (app.abs() * aqq.abs()).sqrt() {
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                rotated = true;
                let phase = g / gabs;
                let theta = (aqq - app) / (2.0 * gabs);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let e = phase.conj();
                // G = [[c, s], [-s e, c e]] acting on columns p, q.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * e * s;
                    a[(k, q)] = akp * s + akq * e * c;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * e * s;
                    v[(k, q)] = vkp * s + vkq * e * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * e.conj() * s;
                    a[(q, k)] = apk * s + aqk * e.conj() * c;
                }
                a[(p, p)] = C64::new(app - t * gabs, 0.0);
                a[(q, q)] = C64::new(aqq + t * gabs, 0.0);
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NumericsError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut basis = ComplexMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            basis[(k, new_col)] = v[(k, old_col)];
        }
    }
    if eigenvalues.iter().any(|x| !x.is_finite()) || !basis.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    Ok(EigDecomposition { eigenvalues, basis })
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues in `[-PSD_CLAMP * max|M|, 0)` are treated as rounding noise
/// and clamped to zero.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(ComplexMatrix::zeros(m.rows, m.cols));
    }
    let eig = hermitian_eig(m)?;
    let floor = -PSD_CLAMP * scale;
    if let Some(&lowest) = eig.eigenvalues.first() {
        if lowest < floor {
            return Err(NumericsError::NotPositiveSemidefinite {
                eigenvalue: lowest,
                floor,
            });
        }
    }
    Ok(eig.spectral_map(|x| x.max(0.0).sqrt()))
}

/// LU factorization with partial pivoting, `P A = L U` packed in one matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    packed: ComplexMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(NumericsError::DimensionMismatch(format!(
                "LU of {}x{}",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let col_scale: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| a[(i, j)].norm()).fold(0.0, f64::max))
            .collect();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (piv, piv_abs) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_abs == 0.0 || piv_abs <= f64::EPSILON * col_scale[k] || !piv_abs.is_finite() {
                return Err(NumericsError::Singular);
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    let sub = factor * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
            }
        }
        Ok(Self { packed: lu, perm, sign })
    }

    pub fn det(&self) -> C64 {
        let n = self.packed.rows;
        (0..n).fold(C64::new(self.sign, 0.0), |acc, i| acc * self.packed[(i, i)])
    }

    pub fn solve_vec(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        let n = self.packed.rows;
        if rhs.len() != n {
            return Err(NumericsError::DimensionMismatch(format!(
                "solve: {n}x{n} with rhs of length {}",
                rhs.len()
            )));
        }
        let mut x: Vec<C64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let sub = self.packed[(i, j)] * x[j];
                x[i] -= sub;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let sub = self.packed[(i, j)] * x[j];
                x[i] -= sub;
            }
            x[i] /= self.packed[(i, i)];
        }
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(x)
    }

    pub fn solve_matrix(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        let mut out = ComplexMatrix::zeros(rhs.rows, rhs.cols);
        for j in 0..rhs.cols {
            let col = self.solve_vec(&rhs.column(j))?;
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// Determinant via LU with partial pivoting. A singular matrix has
/// determinant zero rather than an error.
pub fn det(m: &ComplexMatrix) -> Result<C64> {
    match Lu::new(m) {
        Ok(lu) => Ok(lu.det()),
        Err(NumericsError::Singular) => Ok(C64::new(0.0, 0.0)),
        Err(e) => Err(e),
    }
}

pub fn solve(a: &ComplexMatrix, rhs: &[C64]) -> Result<Vec<C64>> {
    Lu::new(a)?.solve_vec(rhs)
}

/// `C - B* A^{-1} B`, returned as an exactly Hermitian matrix.
///
/// Singularity of `A` is judged on the diagonally equilibrated matrix
/// `D^{-1/2} A D^{-1/2}`, so the `e^{r^2}` grading of the covariance blocks
/// does not masquerade as rank deficiency.
pub fn schur_complement(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    c: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    if !a.is_square() || !c.is_square() || b.rows != a.rows || b.cols != c.rows {
        return Err(NumericsError::DimensionMismatch(format!(
            "schur complement: A {}x{}, B {}x{}, C {}x{}",
            a.rows, a.cols, b.rows, b.cols, c.rows, c.cols
        )));
    }
    if !a.is_hermitian() {
        return Err(NumericsError::NonHermitianInput {
            asymmetry: a.hermitian_asymmetry(),
            scale: a.max_abs(),
        });
    }
    let n = a.rows;
    let mut equil = a.clone();
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    if d.iter().any(|&x| x <= 0.0) {
        return Err(NumericsError::SingularA {
            min_eigenvalue: d.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }
    for i in 0..n {
        for j in 0..n {
            equil[(i, j)] = a[(i, j)] / (d[i] * d[j]).sqrt();
        }
    }
    let min_eig = hermitian_eig(&equil)?.eigenvalues[0];
    if min_eig < SINGULAR_A_TOL {
        return Err(NumericsError::SingularA {
            min_eigenvalue: min_eig,
        });
    }
    let x = Lu::new(a)?.solve_matrix(b)?;
    let correction = &b.adjoint() * &x;
    let out = (c - &correction).hermitian_part();
    if !out.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    Ok(out)
}

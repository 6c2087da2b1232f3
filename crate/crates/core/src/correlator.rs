//! The Bargmann-Fock zero / critical-point correlation `K̃(r)`.
//!
//! With `ξ` a standard complex Gaussian 3-vector,
//! `K̃(r) = E[(ξ*M_P ξ) |ξ*M_Q ξ|] / det A`. Diagonalizing `M_Q` and using
//! the phase invariance of `ξ` turns this into
//! `Σ_i p_i E[X_i |Σ_j d_j X_j|] / det A` over independent unit exponentials
//! `X_j`, which is what [`ktilde_quadrature`] integrates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covariance::{build_joint_covariance, higher_dim_layout, CovarianceError, JointCovariance};
use crate::numerics::{self, hermitian_eig, ComplexMatrix, NumericsError};
use crate::quadrature::{gauss_legendre_10, integrate_to_infinity, QuadratureError, Tolerance};
use crate::rng::{complex_normal, ordered_chunks, StreamFactory};

type C64 = Complex64;

pub const MIN_TOLERANCE: f64 = 1e-10;
pub const MAX_TOLERANCE: f64 = 1e-4;
pub const MIN_MC_SAMPLES: u64 = 10_000;
pub const MIN_CM_SAMPLES: u64 = 100_000;
/// Samples per reduction chunk; fixed so sums never depend on the pool.
pub const CHUNK: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelatorError {
    #[error("quadrature did not converge: {0}")]
    QuadratureNoConvergence(#[from] QuadratureError),
    #[error("invalid covariance: {0}")]
    CovarianceInvalid(String),
    #[error("tolerance {0:e} outside [{MIN_TOLERANCE:e}, {MAX_TOLERANCE:e}]")]
    ToleranceOutOfRange(f64),
    #[error("{got} samples requested, at least {min} required")]
    TooFewSamples { got: u64, min: u64 },
    #[error("grid invalid: {0}")]
    GridInvalid(String),
    #[error("dimension m = {0} outside [1, 4]")]
    DimensionOutOfRange(usize),
}

impl From<CovarianceError> for CorrelatorError {
    fn from(e: CovarianceError) -> Self {
        Self::CovarianceInvalid(e.to_string())
    }
}

impl From<NumericsError> for CorrelatorError {
    fn from(e: NumericsError) -> Self {
        Self::CovarianceInvalid(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub r: f64,
    pub value: f64,
    pub method: Method,
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmEstimate {
    pub m: usize,
    /// Plain expectation `E[‖ξ‖² |det(H₁*H₁ − |η|² I)|]`.
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    /// `value` times `π^{m+1+D}`, `D = (m+1)(m+2)/2`: the Gaussian integral
    /// written against the unnormalized density with prefactor `π^{m+1}/det Λ̃`.
    pub prefactored_value: f64,
    pub prefactored_stderr: f64,
}

fn check_tol(tol: f64) -> Result<(), CorrelatorError> {
    if (MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tol) {
        Ok(())
    } else {
        Err(CorrelatorError::ToleranceOutOfRange(tol))
    }
}

/// `x - 2 + (x + 2) e^{-x}` without cancellation for small `x`.
fn r1(x: f64) -> f64 {
    if x < 1.0 {
        // Σ_{n≥3} (-1)^{n+1} (n-2) x^n / n!
        let mut term = x * x * x / 6.0;
        let mut sum = 0.0f64;
        let mut n = 3.0;
        while term.abs() > 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
            sum += (n - 2.0) * term;
            n += 1.0;
            term *= -x / n;
            if n > 40.0 {
                break;
            }
        }
        sum
    } else {
        x - 2.0 + (x + 2.0) * (-x).exp()
    }
}

/// `x - 1 + e^{-x}`.
fn r0(x: f64) -> f64 {
    x + (-x).exp_m1()
}

/// `E[X_i |X_k + e_a X_a + e_b X_b|]` with `e_b <= e_a`, the three indices
/// being `k`, `a`, `b` in that order; `which` selects `i` (0 = k, 1 = a,
/// 2 = b).
fn reduced_moment(e_a: f64, e_b: f64, which: usize, target: f64) -> Result<f64, QuadratureError> {
    let coef = [1.0, e_a, e_b];
    let linear: f64 = (0..3).map(|j| coef[j] * if j == which { 2.0 } else { 1.0 }).sum();
    if e_b >= 0.0 {
        return Ok(linear);
    }
    // Correction 2 E[X_i (-L)_+], inner X_k integral in closed form, then
    // X_b from the sign change, then X_a.
    let nb = -e_b;
    let outer_tol = Tolerance::new(0.25 * target, 0.0);
    let outer = integrate_to_infinity(
        |xa| {
            let lo = if e_a > 0.0 { e_a * xa / nb } else { 0.0 };
            let shift = if e_a > 0.0 { 0.0 } else { -e_a * xa };
            let damp = (-xa - lo).exp();
            if damp == 0.0 {
                return 0.0;
            }
            let inner_tol = Tolerance::new(0.02 * target / damp, 1e-12);
            let inner = integrate_to_infinity(
                |y| {
                    let x0 = shift + nb * y;
                    let g = (-y).exp();
                    match which {
                        0 => g * r1(x0),
                        1 => g * xa * r0(x0),
                        _ => g * (lo + y) * r0(x0),
                    }
                },
                0.0,
                inner_tol,
            );
            match inner {
                Ok(v) => damp * v.value,
                Err(_) => f64::NAN,
            }
        },
        0.0,
        outer_tol,
    )?;
    Ok(linear + 2.0 * outer.value)
}

/// `E[X_i |Σ_j d_j X_j|]` for every `i`, `X_j` independent unit exponentials.
pub fn exponential_abs_moments(d: [f64; 3], target: f64) -> Result<[f64; 3], QuadratureError> {
    let k = (0..3)
        .max_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()))
        .expect("three entries");
    let delta = d[k].abs();
    if delta == 0.0 {
        return Ok([0.0; 3]);
    }
    let s = d[k].signum();
    let (mut a, mut b) = ((k + 1) % 3, (k + 2) % 3);
    let mut e = [0.0; 3];
    for j in 0..3 {
        let v = s * d[j] / delta;
        // Rounding noise in a vanishing eigenvalue just drops the variable.
        e[j] = if v.abs() < 1e-14 { 0.0 } else { v };
    }
    if e[b] > e[a] {
        std::mem::swap(&mut a, &mut b);
    }
    let mut out = [0.0; 3];
    for (i, slot) in out.iter_mut().enumerate() {
        let which = if i == k {
            0
        } else if i == a {
            1
        } else {
            2
        };
        *slot = delta * reduced_moment(e[a], e[b], which, target / delta)?;
    }
    Ok(out)
}

/// `E[(ξ*M_P ξ) |ξ*M_Q ξ|] / det_a` for arbitrary Hermitian 3×3 forms.
pub fn expectation_from_forms(
    m_p: &ComplexMatrix,
    m_q: &ComplexMatrix,
    det_a: f64,
    tol: f64,
) -> Result<f64, CorrelatorError> {
    check_tol(tol)?;
    if m_p.rows() != 3 || m_q.rows() != 3 || !m_p.is_square() || !m_q.is_square() {
        return Err(CorrelatorError::CovarianceInvalid("forms must be 3×3".into()));
    }
    if !(det_a > 0.0) || !det_a.is_finite() {
        return Err(CorrelatorError::CovarianceInvalid(format!("det A = {det_a}")));
    }
    let eig = hermitian_eig(m_q)?;
    let u = &eig.basis;
    let pt = &(&u.adjoint() * m_p) * u;
    let p: Vec<f64> = (0..3).map(|i| pt[(i, i)].re / det_a).collect();
    let d = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    let weight = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if weight == 0.0 {
        return Ok(0.0);
    }
    let moments = exponential_abs_moments(d, tol / (3.0 * weight))?;
    let value: f64 = p.iter().zip(moments).map(|(p, j)| p * j).sum();
    Ok(value.max(0.0))
}

pub fn ktilde_quadrature(cov: &JointCovariance, tol: f64) -> Result<EvalResult, CorrelatorError> {
    let value = expectation_from_forms(&cov.m_p, &cov.m_q, cov.det_a, tol)?;
    Ok(EvalResult {
        r: cov.r,
        value,
        method: Method::Quadrature,
        stderr: 0.0,
        samples: 0,
    })
}

/// Running sums for `Y = W + Z` with `E Z` known. `W` is accumulated
/// separately so that its variance survives when `Y ≈ Z`.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: f64,
    w: f64,
    z: f64,
    ww: f64,
    zz: f64,
    wz: f64,
}

impl Moments {
    fn push(&mut self, w: f64, z: f64) {
        self.n += 1.0;
        self.w += w;
        self.z += z;
        self.ww += w * w;
        self.zz += z * z;
        self.wz += w * z;
    }

    fn merge(mut self, o: &Self) -> Self {
        self.n += o.n;
        self.w += o.w;
        self.z += o.z;
        self.ww += o.ww;
        self.zz += o.zz;
        self.wz += o.wz;
        self
    }

    /// Control-variate mean and standard error of `W + Z` given `E Z = ez`.
    fn controlled(&self, ez: f64) -> (f64, f64) {
        let n = self.n;
        let mw = self.w / n;
        let mz = self.z / n;
        let vw = (self.ww / n - mw * mw).max(0.0);
        let vz = (self.zz / n - mz * mz).max(0.0);
        let cwz = self.wz / n - mw * mz;
        let (beta, resid) = if vz > 0.0 {
            (cwz / vz, (vw - cwz * cwz / vz).max(0.0))
        } else {
            (0.0, vw)
        };
        let mean = mw - beta * (mz - ez) + ez;
        // Floor for summation rounding, visible when W is almost never hit.
        let rounding = f64::EPSILON * n.sqrt() * mean.abs();
        (mean, (resid / (n - 2.0).max(1.0)).sqrt().max(rounding))
    }
}

/// Wick second moment `E[(ξ*M_P ξ)(ξ*M_Q ξ)] = tr M_P tr M_Q + tr(M_P M_Q)`.
pub fn wick_product_moment(m_p: &ComplexMatrix, m_q: &ComplexMatrix) -> f64 {
    m_p.trace().re * m_q.trace().re + (m_p * m_q).trace().re
}

fn forms_monte_carlo(
    m_p: &ComplexMatrix,
    m_q: &ComplexMatrix,
    det_a: f64,
    samples: u64,
    seed: u64,
    domain: &str,
) -> (Moments, f64) {
    let streams = StreamFactory::new(seed, domain);
    let parts = ordered_chunks(samples, CHUNK, |range| {
        let mut acc = Moments::default();
        let mut xi = [C64::new(0.0, 0.0); 3];
        for idx in range {
            let mut rng = streams.stream(idx);
            for x in xi.iter_mut() {
                *x = complex_normal(&mut rng);
            }
            let qp = m_p.quadratic_form(&xi) / det_a;
            let qq = m_q.quadratic_form(&xi);
            acc.push(2.0 * qp * (-qq).max(0.0), qp * qq);
        }
        acc
    });
    let total = parts.iter().fold(Moments::default(), |a, b| a.merge(b));
    (total, wick_product_moment(m_p, m_q) / det_a)
}

pub fn ktilde_monte_carlo(cov: &JointCovariance, samples: u64, seed: u64) -> Result<EvalResult, CorrelatorError> {
    if samples < MIN_MC_SAMPLES {
        return Err(CorrelatorError::TooFewSamples {
            got: samples,
            min: MIN_MC_SAMPLES,
        });
    }
    let (moments, ez) = forms_monte_carlo(&cov.m_p, &cov.m_q, cov.det_a, samples, seed, "ktilde");
    let (value, stderr) = moments.controlled(ez);
    Ok(EvalResult {
        r: cov.r,
        value,
        method: Method::MonteCarlo,
        stderr,
        samples,
    })
}

/// Sample mean and standard error of `(ξ*M_P ξ)(ξ*M_Q ξ) / det A` together
/// with its exact Wick value.
pub fn wick_check(cov: &JointCovariance, samples: u64, seed: u64) -> (f64, f64, f64) {
    let (m, ez) = forms_monte_carlo(&cov.m_p, &cov.m_q, cov.det_a, samples, seed, "wick");
    let mean = m.z / m.n;
    let var = (m.zz / m.n - mean * mean).max(0.0);
    (mean, (var / (m.n - 1.0)).sqrt(), ez)
}

pub fn check_grid(r_grid: &[f64], lo: f64, hi: f64) -> Result<(), CorrelatorError> {
    if r_grid.is_empty() {
        return Err(CorrelatorError::GridInvalid("empty grid".into()));
    }
    for &r in r_grid {
        if !(lo..=hi).contains(&r) {
            return Err(CorrelatorError::GridInvalid(format!("r = {r} outside [{lo}, {hi}]")));
        }
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CorrelatorError::GridInvalid("grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Quadrature values on an ascending grid inside `[0.01, 6]`.
pub fn ktilde_curve(r_grid: &[f64], tol: f64) -> Result<Vec<EvalResult>, CorrelatorError> {
    check_grid(r_grid, 0.01, 6.0)?;
    check_tol(tol)?;
    r_grid
        .iter()
        .map(|&r| ktilde_quadrature(&build_joint_covariance(r)?, tol))
        .collect()
}

/// Average of `K̃` over each annulus `a <= r < b` against the area element
/// `2r dr / (b² − a²)`.
pub fn ktilde_bin_averages(bin_edges: &[f64], tol: f64) -> Result<Vec<f64>, CorrelatorError> {
    if bin_edges.len() < 2 {
        return Err(CorrelatorError::GridInvalid("need at least two bin edges".into()));
    }
    check_grid(bin_edges, 0.0, 6.0)?;
    check_tol(tol)?;
    let gl = gauss_legendre_10();
    bin_edges
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            let mut s = 0.0;
            for &(x, wt) in &gl {
                let r = mid + half * x;
                let k = ktilde_quadrature(&build_joint_covariance(r)?, tol)?.value;
                s += wt * half * 2.0 * r * k;
            }
            Ok(s / (b * b - a * a))
        })
        .collect()
}

/// Options for [`cm_estimate_with`].
#[derive(Clone, Debug)]
pub struct CmOptions {
    /// Stream label; distinct labels give independent estimates.
    pub stream: String,
    /// Forces `η = 0`.
    pub zero_eta: bool,
}

impl Default for CmOptions {
    fn default() -> Self {
        Self {
            stream: "cm".into(),
            zero_eta: false,
        }
    }
}

pub fn cm_estimate(m: usize, samples: u64, seed: u64) -> Result<CmEstimate, CorrelatorError> {
    cm_estimate_with(m, samples, seed, &CmOptions::default())
}

pub fn cm_estimate_with(m: usize, samples: u64, seed: u64, opts: &CmOptions) -> Result<CmEstimate, CorrelatorError> {
    let layout = higher_dim_layout(m).map_err(|_| CorrelatorError::DimensionOutOfRange(m))?;
    if samples < MIN_CM_SAMPLES {
        return Err(CorrelatorError::TooFewSamples {
            got: samples,
            min: MIN_CM_SAMPLES,
        });
    }
    let streams = StreamFactory::new(seed, &format!("{}/m{m}", opts.stream));
    let sd: Vec<f64> = layout.variances.iter().map(|v| v.sqrt()).collect();
    let parts = ordered_chunks(samples, CHUNK, |range| {
        let mut acc = Moments::default();
        let mut h = ComplexMatrix::zeros(m, m);
        for idx in range {
            let mut rng = streams.stream(idx);
            let mut xi2 = 0.0;
            for s in &sd[..m] {
                xi2 += (complex_normal(&mut rng) * *s).norm_sqr();
            }
            let mut pos = m;
            for i in 0..m {
                for j in i..m {
                    let x = complex_normal(&mut rng) * sd[pos];
                    pos += 1;
                    h[(i, j)] = x;
                    h[(j, i)] = x;
                }
            }
            let eta = complex_normal(&mut rng) * sd[pos];
            let eta2 = if opts.zero_eta { 0.0 } else { eta.norm_sqr() };
            let mut g = &h.adjoint() * &h;
            for i in 0..m {
                g[(i, i)] -= eta2;
            }
            let det = numerics::det(&g).map(|d| d.re).unwrap_or(0.0);
            acc.push(xi2 * det.abs(), 0.0);
        }
        acc
    });
    let total = parts.iter().fold(Moments::default(), |a, b| a.merge(b));
    let (value, stderr) = total.controlled(0.0);
    let d = (m + 1) * (m + 2) / 2;
    let pref = std::f64::consts::PI.powi((m + 1 + d) as i32);
    Ok(CmEstimate {
        m,
        value,
        stderr,
        samples,
        seed,
        prefactored_value: pref * value,
        prefactored_stderr: pref * stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r1_series_matches_direct_form() {
        for x in [0.3f64, 0.7, 0.999] {
            let direct = x - 2.0 + (x + 2.0) * (-x).exp();
            assert!((r1(x) - direct).abs() < 1e-15, "{x}");
        }
        let x = 1e-3f64;
        assert!((r1(x) - (x.powi(3) / 6.0 - x.powi(4) / 12.0 + x.powi(5) / 40.0)).abs() < 1e-20);
    }

    #[test]
    fn moments_with_no_negative_coefficient_are_linear() {
        let j = exponential_abs_moments([1.0, 2.0, 0.5], 1e-10).unwrap();
        assert_eq!(j, [1.0 * 2.0 + 2.0 + 0.5, 1.0 + 4.0 + 0.5, 1.0 + 2.0 + 1.0]);
    }

    #[test]
    fn difference_of_exponentials() {
        // E[X|Y − Z|] = E|Y − Z| = 1, E[Y|Y − Z|] = 3/2.
        let j = exponential_abs_moments([0.0, 1.0, -1.0], 1e-11).unwrap();
        assert!((j[0] - 1.0).abs() < 1e-9);
        assert!((j[1] - 1.5).abs() < 1e-9);
        assert!((j[2] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn sign_flip_invariance() {
        let d = [0.7, -1.3, 0.4];
        let a = exponential_abs_moments(d, 1e-11).unwrap();
        let b = exponential_abs_moments(d.map(|x| -x), 1e-11).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn tolerance_range_enforced() {
        let cov = build_joint_covariance(1.0).unwrap();
        assert!(matches!(
            ktilde_quadrature(&cov, 1e-3),
            Err(CorrelatorError::ToleranceOutOfRange(_))
        ));
        assert!(ktilde_quadrature(&cov, 1e-4).is_ok());
    }

    #[test]
    fn monte_carlo_requires_samples() {
        let cov = build_joint_covariance(1.0).unwrap();
        assert!(matches!(
            ktilde_monte_carlo(&cov, 100, 1),
            Err(CorrelatorError::TooFewSamples { .. })
        ));
    }
}

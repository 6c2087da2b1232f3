//! SU(2) random polynomials on CP¹ with the Fubini-Study metric.
//!
//! A section of `O(n)` is `p(z) = Σ c_j z^j` in the chart `z`, and
//! `w^n p(1/w)` (reversed coefficients) in the chart `w = 1/z`. Both charts
//! carry the same Hermitian metric `h = (1 + |·|²)^{-n}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical::{self, CriticalPoint, FubiniStudy, ScaledPoly, SearchParams};
use crate::estimator::{self, CorrelationCurve, EstimatorError, Sphere, Which};
use crate::gafsim::PointPattern;
use crate::poly::{self, PolyError};
use crate::rng::{complex_normal, sample_seed, StreamFactory};

type C64 = Complex64;

/// Boundary slack used when assigning points near `|z| = 1` to a chart.
const TIE_BAND: f64 = 1e-9;
/// Chart-0 critical search extends this far past the unit circle so the
/// overlap can be compared with chart 1.
const OVERLAP: f64 = 0.1;
/// Seeding spacing in rescaled units `√n·z`.
pub const RESCALED_SPACING: f64 = 0.125;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectiveError {
    #[error("degree n = {0} not allowed here")]
    DegreeOutOfRange(usize),
    #[error("zero count {found} across charts differs from degree {n}")]
    CountMismatch { found: usize, n: usize },
    #[error("critical point seen in both charts at distance {distance:e}")]
    ChartInconsistency { distance: f64 },
    #[error("bins must lie within [0.2, 4]: {0}")]
    BinsOutOfRange(String),
    #[error(transparent)]
    RootFinding(#[from] PolyError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// `ln C(n, j)` for `j = 0..=n`.
pub fn log_binomials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0f64; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    (0..=n).map(|j| lf[n] - lf[j] - lf[n - j]).collect()
}

/// Standard deviations `√((n+1) C(n, j))` of the coefficients.
pub fn coefficient_scales(n: usize) -> Vec<f64> {
    let ln1 = ((n + 1) as f64).ln();
    log_binomials(n).into_iter().map(|l| (0.5 * (ln1 + l)).exp()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Su2Polynomial {
    pub n: usize,
    #[serde(with = "crate::gafsim::pairs")]
    pub coefficients: Vec<C64>,
    pub seed: u64,
}

impl Su2Polynomial {
    pub fn sample(n: usize, seed: u64) -> Self {
        let mut rng = StreamFactory::new(seed, "su2-coefficients").stream(0);
        let coefficients = coefficient_scales(n)
            .into_iter()
            .map(|s| complex_normal(&mut rng) * s)
            .collect();
        Self { n, coefficients, seed }
    }

    pub fn from_coefficients(coefficients: Vec<C64>) -> Self {
        Self {
            n: coefficients.len() - 1,
            coefficients,
            seed: 0,
        }
    }

    /// The same section written in the chart `w = 1/z`.
    pub fn chart1(&self) -> Vec<C64> {
        self.coefficients.iter().rev().copied().collect()
    }

    /// Pulls the section back along the rotation
    /// `z ↦ (a z + b) / (−b̄ z + ā)`, `|a|² + |b|² = 1`.
    pub fn rotated(&self, a: C64, b: C64) -> Self {
        let n = self.n;
        let num = [b, a];
        let den = [a.conj(), -b.conj()];
        let mul = |p: &[C64], q: &[C64]| {
            let mut out = vec![C64::new(0.0, 0.0); p.len() + q.len() - 1];
            for (i, x) in p.iter().enumerate() {
                for (j, y) in q.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out
        };
        let mut num_pow = vec![vec![C64::new(1.0, 0.0)]];
        let mut den_pow = vec![vec![C64::new(1.0, 0.0)]];
        for k in 1..=n {
            num_pow.push(mul(&num_pow[k - 1], &num));
            den_pow.push(mul(&den_pow[k - 1], &den));
        }
        let mut out = vec![C64::new(0.0, 0.0); n + 1];
        for (j, c) in self.coefficients.iter().enumerate() {
            let term = mul(&num_pow[j], &den_pow[n - j]);
            for (k, t) in term.iter().enumerate() {
                out[k] += c * t;
            }
        }
        Self {
            n,
            coefficients: out,
            seed: self.seed,
        }
    }
}

/// `(n+1)(1 + z w̄)^n`.
pub fn fs_bergman(n: u32, z: C64, w: C64) -> C64 {
    (C64::new(1.0, 0.0) + z * w.conj()).powu(n) * (n as f64 + 1.0)
}

/// `n⁻¹ F_n(u/√n, v/√n)` evaluated as `((n+1)/n) exp(n log(1 + u v̄ / n))`.
pub fn rescaled_bergman(n: f64, u: C64, v: C64) -> C64 {
    let x = u * v.conj() / n;
    let log1p = C64::new(0.5 * (2.0 * x.re + x.norm_sqr()).ln_1p(), x.im.atan2(1.0 + x.re));
    (log1p * n).exp() * ((n + 1.0) / n)
}

/// `sup |n⁻¹ F_n(u/√n, v/√n) − e^{u v̄}|` over `|u|, |v| <= box_radius`.
pub fn bergman_rescaling_error(n: u32, box_radius: f64) -> f64 {
    let radii: Vec<f64> = (0..=8).map(|k| box_radius * k as f64 / 8.0).collect();
    let mut pts = Vec::new();
    for &r in &radii {
        let m = if r == 0.0 { 1 } else { 24 };
        for k in 0..m {
            pts.push(C64::from_polar(r, 2.0 * PI * k as f64 / m as f64));
        }
    }
    let nf = n as f64;
    let mut worst = 0.0f64;
    for &u in &pts {
        for &v in &pts {
            let e = (rescaled_bergman(nf, u, v) - (u * v.conj()).exp()).norm();
            worst = worst.max(e);
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: u8,
    pub re: f64,
    pub im: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub multiple: bool,
}

impl ChartPoint {
    pub fn coordinate(&self) -> C64 {
        C64::new(self.re, self.im)
    }

    /// Affine coordinate in chart 0 (infinite for the point `w = 0`).
    pub fn to_chart0(&self) -> C64 {
        if self.chart == 0 {
            self.coordinate()
        } else {
            self.coordinate().inv()
        }
    }

    fn new(chart: u8, z: C64, multiple: bool) -> Self {
        Self {
            chart,
            re: z.re,
            im: z.im,
            multiple,
        }
    }
}

/// Zeros across both charts with canonical assignment; exactly `n` of them.
pub fn su2_zeros(p: &Su2Polynomial) -> Result<Vec<ChartPoint>, ProjectiveError> {
    let r0 = poly::roots(&p.coefficients)?;
    let r1 = poly::roots(&p.chart1())?;
    let mut out: Vec<ChartPoint> = r0
        .iter()
        .filter(|r| r.z.norm() <= 1.0 + TIE_BAND)
        .map(|r| ChartPoint::new(0, r.z, r.multiple))
        .collect();
    let boundary0: Vec<C64> = out.iter().map(|c| c.coordinate()).filter(|z| z.norm() >= 1.0 - TIE_BAND).collect();
    for r in &r1 {
        let a = r.z.norm();
        let keep = if a < 1.0 - TIE_BAND {
            true
        } else if a <= 1.0 + TIE_BAND {
            let z = r.z.inv();
            !boundary0.iter().any(|b| (b - z).norm() < critical::DEDUPE_TOL)
        } else {
            false
        };
        if keep {
            out.push(ChartPoint::new(1, r.z, r.multiple));
        }
    }
    if out.len() != p.n {
        return Err(ProjectiveError::CountMismatch {
            found: out.len(),
            n: p.n,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Su2CriticalSearch {
    pub points: Vec<ChartPoint>,
    /// `#(index −1) − #(index +1)`; equals `2 − n` for a complete, generic search.
    pub index_balance: i64,
    pub overlap_matched: usize,
    pub overlap_unmatched: usize,
    pub unresolved_cells: usize,
    pub refinements: u32,
}

fn chart_search(coeffs: &[C64], n: usize, spacing: f64) -> critical::CriticalSearch {
    let field = ScaledPoly { coeffs, scale: 1.0 };
    let params = SearchParams {
        radius: 1.0 + OVERLAP,
        spacing,
        margin: 2.0 * spacing,
        escape_radius: 1.0 + 2.0 * OVERLAP + 4.0 * spacing,
    };
    critical::find_critical(&field, &FubiniStudy { n: n as f64 }, params)
}

fn su2_critical_once(p: &Su2Polynomial, spacing: f64) -> Result<(Su2CriticalSearch, Vec<CriticalPoint>), ProjectiveError> {
    let s0 = chart_search(&p.coefficients, p.n, spacing);
    let s1 = chart_search(&p.chart1(), p.n, spacing);
    let mut res = Su2CriticalSearch {
        unresolved_cells: s0.unresolved_cells + s1.unresolved_cells,
        ..Default::default()
    };
    // Overlap annulus check, away from the edges of either search disk.
    let band = |z: C64| z.norm() > 1.0 + 1e-3 && z.norm() < 1.0 + 0.5 * OVERLAP;
    for c in s0.points.iter().filter(|c| band(c.z)) {
        let nearest = s1
            .points
            .iter()
            .map(|d| (d.z.inv() - c.z).norm())
            .fold(f64::INFINITY, f64::min);
        if nearest <= critical::DEDUPE_TOL * c.z.norm() {
            res.overlap_matched += 1;
        } else if nearest < 1e-3 {
            return Err(ProjectiveError::ChartInconsistency { distance: nearest });
        } else {
            res.overlap_unmatched += 1;
        }
    }
    let mut kept: Vec<CriticalPoint> = Vec::new();
    for c in s0.points.iter().filter(|c| c.z.norm() <= 1.0 + TIE_BAND) {
        res.points.push(ChartPoint::new(0, c.z, false));
        kept.push(*c);
    }
    let boundary0: Vec<C64> = kept.iter().map(|c| c.z).filter(|z| z.norm() >= 1.0 - TIE_BAND).collect();
    for c in &s1.points {
        let a = c.z.norm();
        let keep = if a < 1.0 - TIE_BAND {
            true
        } else if a <= 1.0 + TIE_BAND {
            !boundary0.iter().any(|b| (b - c.z.inv()).norm() < critical::DEDUPE_TOL)
        } else {
            false
        };
        if keep {
            res.points.push(ChartPoint::new(1, c.z, false));
            kept.push(*c);
        }
    }
    res.index_balance = kept.iter().map(|c| -(c.index as i64)).sum();
    Ok((res, kept))
}

/// Chern critical points of `|p|_h` on the whole sphere. The search is
/// repeated on a finer grid (twice at most) while the index balance
/// disagrees with `2 − n`.
pub fn su2_critical_points(p: &Su2Polynomial) -> Result<Su2CriticalSearch, ProjectiveError> {
    let base = RESCALED_SPACING / (p.n.max(1) as f64).sqrt();
    let expected = 2 - p.n as i64;
    let mut spacing = base;
    let mut refinements = 0;
    loop {
        let (mut res, _) = su2_critical_once(p, spacing)?;
        res.refinements = refinements;
        if res.index_balance == expected || refinements >= 2 {
            return Ok(res);
        }
        refinements += 1;
        spacing *= 0.5;
    }
}

/// `5n/3 − 14/9`.
pub fn expected_critical_count(n: usize) -> f64 {
    5.0 * n as f64 / 3.0 - 14.0 / 9.0
}

/// Zeros and criticals within geodesic distance `window` (rescaled units)
/// of `z = 0`, in rescaled coordinates `√n·z`.
pub fn su2_local_pattern(p: &Su2Polynomial, window: f64, index: u64) -> Result<PointPattern, ProjectiveError> {
    let n = p.n as f64;
    let s = n.sqrt();
    let geom = Sphere { n };
    let origin = C64::new(0.0, 0.0);
    let chart_radius = (window / s).tan();
    let zeros: Vec<C64> = poly::roots(&p.coefficients)?
        .into_iter()
        .map(|r| r.z * s)
        .filter(|&u| geom_distance(&geom, u, origin) <= window)
        .collect();
    let spacing = RESCALED_SPACING / s;
    let field = ScaledPoly {
        coeffs: &p.coefficients,
        scale: 1.0,
    };
    let params = SearchParams {
        radius: chart_radius,
        spacing,
        margin: 0.5 / s,
        escape_radius: chart_radius + 1.0 / s,
    };
    let crit = critical::find_critical(&field, &FubiniStudy { n }, params);
    let criticals: Vec<C64> = crit
        .points
        .into_iter()
        .map(|c| c.z * s)
        .filter(|&u| geom_distance(&geom, u, origin) <= window)
        .collect();
    Ok(PointPattern {
        seed: index,
        degree: p.n,
        radius: s,
        window_radius: window,
        zeros,
        criticals,
        holo_criticals: Vec::new(),
    })
}

fn geom_distance(g: &Sphere, a: C64, b: C64) -> f64 {
    use crate::estimator::Geometry;
    g.distance(a, b)
}

/// Rescaled empirical correlation around `z = 0`, measured with the
/// spherical metric so that curvature does not bias the annulus areas.
pub fn su2_rescaled_correlation(
    n: usize,
    samples: usize,
    bin_edges: &[f64],
    seed: u64,
) -> Result<CorrelationCurve, ProjectiveError> {
    if n < 100 {
        return Err(ProjectiveError::DegreeOutOfRange(n));
    }
    if bin_edges.is_empty()
        || bin_edges[0] < 0.2 - 1e-12
        || *bin_edges.last().expect("non-empty") > 4.0 + 1e-12
    {
        return Err(ProjectiveError::BinsOutOfRange(format!("{bin_edges:?}")));
    }
    let window = 2.0 * bin_edges.last().expect("non-empty");
    let patterns: Vec<PointPattern> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let p = Su2Polynomial::sample(n, sample_seed(seed, "su2", i));
            let mut pat = su2_local_pattern(&p, window, i)?;
            pat.seed = p.seed;
            Ok(pat)
        })
        .collect::<Result<_, ProjectiveError>>()?;
    let mut curve = estimator::estimate_ktilde(&patterns, bin_edges, Which::Chern, &Sphere { n: n as f64 })?;
    curve.metadata.source = format!("su2(n={n})");
    Ok(curve)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub n: usize,
    pub samples: usize,
    pub mean_criticals: f64,
    pub stderr: f64,
    pub expected: f64,
    pub relative_deviation: f64,
    pub zero_count_failures: usize,
    pub index_balance_failures: usize,
}

/// Mean Chern-critical count and per-sample zero-count check over a batch.
pub fn su2_count_summary(n: usize, samples: usize, seed: u64) -> Result<CountSummary, ProjectiveError> {
    let rows: Vec<(usize, bool, bool)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let p = Su2Polynomial::sample(n, sample_seed(seed, "su2-count", i));
            let zeros_ok = su2_zeros(&p).is_ok();
            let c = su2_critical_points(&p)?;
            Ok((c.points.len(), zeros_ok, c.index_balance == 2 - n as i64))
        })
        .collect::<Result<_, ProjectiveError>>()?;
    let counts: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let m = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / m;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let expected = expected_critical_count(n);
    Ok(CountSummary {
        n,
        samples,
        mean_criticals: mean,
        stderr: (var / m).sqrt(),
        expected,
        relative_deviation: (mean - expected) / expected,
        zero_count_failures: rows.iter().filter(|r| !r.1).count(),
        index_balance_failures: rows.iter().filter(|r| !r.2).count(),
    })
}

//! Truncated Bargmann-Fock Gaussian analytic functions
//! `f(z) = Σ a_j z^j / √(j!)`, their zeros, Chern critical points
//! (`f' − z̄ f = 0`) and holomorphic critical points (`f' = 0`).

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical::{self, BargmannFock, CriticalSearch, ScaledPoly, SearchParams};
use crate::poly::{self, PolyError, Root};
use crate::rng::{complex_normal, sample_seed, StreamFactory};

type C64 = Complex64;

pub const DEFAULT_EPS: f64 = 1e-8;
pub const MAX_RADIUS: f64 = 12.0;
/// Gap between the observation window and the truncation radius.
pub const WINDOW_BUFFER: f64 = 1.0;
/// Seeding grid spacing in the unit where the critical intensity is 5/(3π).
pub const GRID_SPACING: f64 = 0.125;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GafError {
    #[error("radius {0} outside (0, {MAX_RADIUS}]")]
    RadiusOutOfRange(f64),
    #[error("eps {0:e} outside [1e-12, 1e-4]")]
    EpsOutOfRange(f64),
    #[error("degree {degree} below the truncation degree {required} for radius {radius}")]
    DegreeTooLow { degree: usize, required: usize, radius: f64 },
    #[error("window radius {window} exceeds truncation radius {radius} minus buffer {WINDOW_BUFFER}")]
    WindowTooLarge { window: f64, radius: f64 },
    #[error(transparent)]
    RootFinding(#[from] PolyError),
    #[error("critical count {observed:.1} per sample deviates from {expected:.1} by {sigmas:.1} standard errors")]
    SuspectUndercount { observed: f64, expected: f64, sigmas: f64 },
}

/// Smallest `N` with `Σ_{j>N} R^{2j}/j! <= eps²`.
pub fn truncation_degree(radius: f64, eps: f64) -> Result<usize, GafError> {
    if !(radius > 0.0 && radius <= MAX_RADIUS) {
        return Err(GafError::RadiusOutOfRange(radius));
    }
    if !(1e-12..=1e-4).contains(&eps) {
        return Err(GafError::EpsOutOfRange(eps));
    }
    let r2 = radius * radius;
    let mut terms = vec![1.0f64];
    let mut j = 0usize;
    loop {
        j += 1;
        let t = terms[j - 1] * r2 / j as f64;
        terms.push(t);
        if j as f64 > r2 && t < 1e-60 {
            break;
        }
    }
    let target = eps * eps;
    let mut tail = 0.0;
    // tail after the loop holds Σ_{i > n} terms[i].
    let mut n = terms.len() - 1;
    while n > 0 {
        let next = tail + terms[n];
        if next > target {
            break;
        }
        tail = next;
        n -= 1;
    }
    Ok(n)
}

/// `ln(R^j / √(j!))` for `j = 0..=n`.
fn log_scales(n: usize, radius: f64) -> Vec<f64> {
    let lr = radius.ln();
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..=n {
        acc += lr - 0.5 * (j as f64).ln();
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GafSample {
    /// Raw draws `a_0..a_N`.
    #[serde(with = "crate::gafsim::pairs")]
    pub coefficients: Vec<C64>,
    pub degree: usize,
    pub radius: f64,
    pub seed: u64,
}

impl GafSample {
    /// Wraps given draws (degree `coefficients.len() − 1`).
    pub fn from_coefficients(coefficients: Vec<C64>, radius: f64) -> Self {
        Self {
            degree: coefficients.len().saturating_sub(1),
            coefficients,
            radius,
            seed: 0,
        }
    }

    /// Coefficients of `f` in `t = z / R`: `a_j R^j / √(j!)`.
    pub fn scaled_coefficients(&self) -> Vec<C64> {
        log_scales(self.degree, self.radius)
            .iter()
            .zip(&self.coefficients)
            .map(|(l, a)| a * l.exp())
            .collect()
    }

    pub fn eval(&self, z: C64) -> C64 {
        poly::horner2(&self.scaled_coefficients(), z / self.radius).0
    }
}

pub fn sample_gaf(degree: usize, radius: f64, seed: u64) -> Result<GafSample, GafError> {
    let required = truncation_degree(radius, DEFAULT_EPS)?;
    if degree < required {
        return Err(GafError::DegreeTooLow {
            degree,
            required,
            radius,
        });
    }
    let mut rng = StreamFactory::new(seed, "gaf-coefficients").stream(0);
    let coefficients = (0..=degree).map(|_| complex_normal(&mut rng)).collect();
    Ok(GafSample {
        coefficients,
        degree,
        radius,
        seed,
    })
}

fn check_window(sample: &GafSample, window: f64) -> Result<(), GafError> {
    if window + WINDOW_BUFFER > sample.radius + 1e-12 || !(window > 0.0) {
        return Err(GafError::WindowTooLarge {
            window,
            radius: sample.radius,
        });
    }
    Ok(())
}

fn roots_in_window(scaled: &[C64], radius: f64, window: f64) -> Result<Vec<Root>, GafError> {
    let mut out: Vec<Root> = poly::roots(scaled)?
        .into_iter()
        .map(|r| Root {
            z: r.z * radius,
            multiple: r.multiple,
        })
        .filter(|r| r.z.norm() <= window)
        .collect();
    out.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
    Ok(out)
}

/// Zeros of `f` in `|z| <= window`; clustered roots carry the `multiple` flag.
pub fn find_zeros(sample: &GafSample, window: f64) -> Result<Vec<Root>, GafError> {
    check_window(sample, window)?;
    roots_in_window(&sample.scaled_coefficients(), sample.radius, window)
}

/// Roots of `f'` in `|z| <= window`.
pub fn find_holo_critical_points(sample: &GafSample, window: f64) -> Result<Vec<Root>, GafError> {
    check_window(sample, window)?;
    let d = poly::derivative(&sample.scaled_coefficients());
    if d.iter().all(|c| c.norm() == 0.0) {
        return Ok(Vec::new());
    }
    roots_in_window(&d, sample.radius, window)
}

/// Chern critical points `f' = z̄ f` in `|z| <= window`.
pub fn find_critical_points(sample: &GafSample, window: f64) -> Result<CriticalSearch, GafError> {
    check_window(sample, window)?;
    let scaled = sample.scaled_coefficients();
    let field = ScaledPoly {
        coeffs: &scaled,
        scale: sample.radius,
    };
    let params = SearchParams {
        radius: window,
        spacing: GRID_SPACING,
        margin: 0.5,
        escape_radius: window + WINDOW_BUFFER,
    };
    Ok(critical::find_critical(&field, &BargmannFock, params))
}

/// Serde helper: complex sequences as `[[re, im], ...]`.
pub mod pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let raw: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    pub seed: u64,
    pub degree: usize,
    pub radius: f64,
    pub window_radius: f64,
    #[serde(with = "pairs")]
    pub zeros: Vec<C64>,
    #[serde(with = "pairs")]
    pub criticals: Vec<C64>,
    #[serde(with = "pairs")]
    pub holo_criticals: Vec<C64>,
}

impl PointPattern {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pattern serializes")
    }

    /// `kind,re,im` rows, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,re,im\n");
        for (kind, pts) in [
            ("zero", &self.zeros),
            ("critical", &self.criticals),
            ("holo_critical", &self.holo_criticals),
        ] {
            for z in pts {
                let _ = writeln!(s, "{kind},{:.16e},{:.16e}", z.re, z.im);
            }
        }
        s
    }
}

/// Per-sample solver bookkeeping not part of the pattern schema.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    pub multiple_zeros: usize,
    pub critical_seeds: usize,
    pub singular_seeds: usize,
    pub escaped_seeds: usize,
    pub uncertified: usize,
    pub unresolved_cells: usize,
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub samples: u64,
    pub seed: u64,
    pub window_radius: f64,
    /// Truncation radius; defaults to window + buffer.
    pub radius: Option<f64>,
    pub holo: bool,
}

pub fn simulate_one(index: u64, cfg: &SimConfig) -> Result<(PointPattern, SampleDiagnostics), GafError> {
    let radius = cfg.radius.unwrap_or(cfg.window_radius + WINDOW_BUFFER);
    let degree = truncation_degree(radius, DEFAULT_EPS)?;
    let seed = sample_seed(cfg.seed, "gaf", index);
    let sample = sample_gaf(degree, radius, seed)?;
    let zeros = find_zeros(&sample, cfg.window_radius)?;
    let crit = find_critical_points(&sample, cfg.window_radius)?;
    let holo = if cfg.holo {
        find_holo_critical_points(&sample, cfg.window_radius)?
    } else {
        Vec::new()
    };
    let diag = SampleDiagnostics {
        multiple_zeros: zeros.iter().filter(|r| r.multiple).count(),
        critical_seeds: crit.seeds,
        singular_seeds: crit.singular_seeds,
        escaped_seeds: crit.escaped_seeds,
        uncertified: crit.uncertified,
        unresolved_cells: crit.unresolved_cells,
        degenerate: crit.degenerate,
    };
    Ok((
        PointPattern {
            seed,
            degree,
            radius,
            window_radius: cfg.window_radius,
            zeros: zeros.into_iter().map(|r| r.z).collect(),
            criticals: crit.points.into_iter().map(|p| p.z).collect(),
            holo_criticals: holo.into_iter().map(|r| r.z).collect(),
        },
        diag,
    ))
}

/// Samples are independent and processed in parallel; output is in index order.
pub fn simulate_batch(cfg: &SimConfig) -> Result<Vec<(PointPattern, SampleDiagnostics)>, GafError> {
    (0..cfg.samples)
        .into_par_iter()
        .map(|i| simulate_one(i, cfg))
        .collect()
}

/// Batch diagnostic: mean Chern-critical count against `5/(3π)·area`.
pub fn check_critical_counts(patterns: &[PointPattern]) -> Result<(), GafError> {
    if patterns.len() < 2 {
        return Ok(());
    }
    let counts: Vec<f64> = patterns.iter().map(|p| p.criticals.len() as f64).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let w = patterns[0].window_radius;
    let expected = 5.0 / 3.0 * w * w;
    let sigmas = (mean - expected) / se.max(f64::MIN_POSITIVE);
    if sigmas.abs() > 6.0 {
        return Err(GafError::SuspectUndercount {
            observed: mean,
            expected,
            sigmas,
        });
    }
    Ok(())
}

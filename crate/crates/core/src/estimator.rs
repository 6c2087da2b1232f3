//! Empirical zero / critical-point pair correlation with minus-sampling
//! edge correction, normalized to be directly comparable with `K̃`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlator::{ktilde_bin_averages, CorrelatorError};
use crate::gafsim::PointPattern;

type C64 = Complex64;

pub const MIN_PATTERNS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid binning: {0}")]
    BinningInvalid(String),
    #[error("{got} patterns supplied, at least {MIN_PATTERNS} required")]
    TooFewSamples { got: usize },
    #[error("bin edges differ between curves")]
    BinMismatch,
    #[error(transparent)]
    Exact(#[from] CorrelatorError),
}

/// Distances and areas of the space the patterns live in.
pub trait Geometry: Sync {
    fn distance(&self, a: C64, b: C64) -> f64;
    /// Area of the metric disk of radius `rho`.
    fn disk_area(&self, rho: f64) -> f64;
    fn label(&self) -> String;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Flat;

impl Geometry for Flat {
    fn distance(&self, a: C64, b: C64) -> f64 {
        (a - b).norm()
    }

    fn disk_area(&self, rho: f64) -> f64 {
        PI * rho * rho
    }

    fn label(&self) -> String {
        "flat".into()
    }
}

/// Fubini-Study sphere in coordinates rescaled by `√n`: point `u` stands for
/// the affine coordinate `u/√n`, and lengths are multiplied by `√n`.
#[derive(Clone, Copy, Debug)]
pub struct Sphere {
    pub n: f64,
}

impl Geometry for Sphere {
    fn distance(&self, a: C64, b: C64) -> f64 {
        let s = self.n.sqrt();
        let (z, w) = (a / s, b / s);
        s * (z - w).norm().atan2((C64::new(1.0, 0.0) + z * w.conj()).norm())
    }

    fn disk_area(&self, rho: f64) -> f64 {
        let s = (rho / self.n.sqrt()).sin();
        PI * self.n * s * s
    }

    fn label(&self) -> String {
        format!("sphere(n={})", self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    Chern,
    Holo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointKind {
    Zeros,
    Criticals,
    Holo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub samples: usize,
    pub window: f64,
    pub seeds: Vec<u64>,
    pub geometry: String,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub bin_edges: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub pair_counts: Vec<u64>,
    pub normalization: String,
    pub metadata: CurveMetadata,
}

impl CorrelationCurve {
    pub fn bins(&self) -> usize {
        self.values.len()
    }

    /// `bin_lo,bin_hi,value,stderr,pairs` with round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,value,stderr,pairs\n");
        for i in 0..self.bins() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                self.values[i],
                self.stderr[i],
                self.pair_counts[i]
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, EstimatorError> {
        let bad = |m: &str| EstimatorError::BinningInvalid(m.to_string());
        let mut edges = Vec::new();
        let (mut values, mut stderr, mut pairs) = (Vec::new(), Vec::new(), Vec::new());
        for (k, line) in text.lines().enumerate() {
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() < 4 {
                return Err(bad("short CSV row"));
            }
            let num = |i: usize| f[i].trim().parse::<f64>().map_err(|_| bad("unparsable number"));
            if edges.is_empty() {
                edges.push(num(0)?);
            }
            edges.push(num(1)?);
            values.push(num(2)?);
            stderr.push(num(3)?);
            pairs.push(f.get(4).and_then(|p| p.trim().parse().ok()).unwrap_or(0));
        }
        if values.is_empty() {
            return Err(bad("no rows"));
        }
        Ok(Self {
            bin_edges: edges,
            values,
            stderr,
            pair_counts: pairs,
            normalization: "ktilde".into(),
            metadata: CurveMetadata {
                samples: 0,
                window: 0.0,
                seeds: Vec::new(),
                geometry: String::new(),
                source: "csv".into(),
            },
        })
    }
}

fn check_edges(edges: &[f64]) -> Result<(), EstimatorError> {
    if edges.len() < 2 {
        return Err(EstimatorError::BinningInvalid("need at least two edges".into()));
    }
    if edges[0] < 0.0 || edges.iter().any(|e| !e.is_finite()) {
        return Err(EstimatorError::BinningInvalid("edges must be finite and nonnegative".into()));
    }
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EstimatorError::BinningInvalid("edges must increase strictly".into()));
    }
    Ok(())
}

fn mean_and_stderr(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-sample `K̂` values in each bin and raw pair counts.
fn sample_curve<G: Geometry + ?Sized>(
    p: &PointPattern,
    edges: &[f64],
    which: Which,
    geom: &G,
) -> (Vec<f64>, Vec<u64>) {
    let r_max = *edges.last().expect("checked");
    let origin = C64::new(0.0, 0.0);
    let eroded = p.window_radius - r_max;
    let second = match which {
        Which::Chern => &p.criticals,
        Which::Holo => &p.holo_criticals,
    };
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    for &z in p.zeros.iter().filter(|&&z| geom.distance(z, origin) <= eroded) {
        for &w in second {
            let d = geom.distance(z, w);
            if d < edges[0] || d >= r_max {
                continue;
            }
            let k = edges.partition_point(|&e| e <= d) - 1;
            counts[k] += 1;
        }
    }
    let area = geom.disk_area(eroded);
    let values = (0..bins)
        .map(|k| {
            let ring = geom.disk_area(edges[k + 1]) - geom.disk_area(edges[k]);
            PI * PI * counts[k] as f64 / (area * ring)
        })
        .collect();
    (values, counts)
}

pub fn estimate_ktilde<G: Geometry + ?Sized>(
    patterns: &[PointPattern],
    bin_edges: &[f64],
    which: Which,
    geom: &G,
) -> Result<CorrelationCurve, EstimatorError> {
    if patterns.len() < MIN_PATTERNS {
        return Err(EstimatorError::TooFewSamples { got: patterns.len() });
    }
    check_edges(bin_edges)?;
    let window = patterns[0].window_radius;
    if patterns.iter().any(|p| p.window_radius != window) {
        return Err(EstimatorError::BinningInvalid("patterns have different windows".into()));
    }
    let r_max = *bin_edges.last().expect("checked");
    if r_max > 0.5 * window + 1e-12 {
        return Err(EstimatorError::BinningInvalid(format!(
            "last edge {r_max} exceeds half the window radius {window}"
        )));
    }
    let per: Vec<(Vec<f64>, Vec<u64>)> = patterns
        .par_iter()
        .map(|p| sample_curve(p, bin_edges, which, geom))
        .collect();
    let bins = bin_edges.len() - 1;
    let mut values = Vec::with_capacity(bins);
    let mut stderr = Vec::with_capacity(bins);
    let mut pair_counts = Vec::with_capacity(bins);
    for k in 0..bins {
        let (m, s) = mean_and_stderr(per.iter().map(|(v, _)| v[k]));
        values.push(m);
        stderr.push(s);
        pair_counts.push(per.iter().map(|(_, c)| c[k]).sum());
    }
    Ok(CorrelationCurve {
        bin_edges: bin_edges.to_vec(),
        values,
        stderr,
        pair_counts,
        normalization: "ktilde".into(),
        metadata: CurveMetadata {
            samples: patterns.len(),
            window,
            seeds: patterns.iter().map(|p| p.seed).collect(),
            geometry: geom.label(),
            source: match which {
                Which::Chern => "empirical-chern".into(),
                Which::Holo => "empirical-holo".into(),
            },
        },
    })
}

/// Mean count per unit area with across-sample standard error.
pub fn intensity<G: Geometry + ?Sized>(
    patterns: &[PointPattern],
    kind: PointKind,
    geom: &G,
) -> Result<(f64, f64), EstimatorError> {
    if patterns.len() < MIN_PATTERNS {
        return Err(EstimatorError::TooFewSamples { got: patterns.len() });
    }
    Ok(mean_and_stderr(patterns.iter().map(|p| {
        let n = match kind {
            PointKind::Zeros => p.zeros.len(),
            PointKind::Criticals => p.criticals.len(),
            PointKind::Holo => p.holo_criticals.len(),
        };
        n as f64 / geom.disk_area(p.window_radius)
    })))
}

/// Bin averages of the exact `K̃` in curve form.
pub fn exact_curve(bin_edges: &[f64], tol: f64) -> Result<CorrelationCurve, EstimatorError> {
    check_edges(bin_edges)?;
    let values = ktilde_bin_averages(bin_edges, tol)?;
    let bins = values.len();
    Ok(CorrelationCurve {
        bin_edges: bin_edges.to_vec(),
        values,
        stderr: vec![0.0; bins],
        pair_counts: vec![0; bins],
        normalization: "ktilde".into(),
        metadata: CurveMetadata {
            samples: 0,
            window: 0.0,
            seeds: Vec::new(),
            geometry: "flat".into(),
            source: format!("quadrature(tol={tol:e})"),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinComparison {
    pub lo: f64,
    pub hi: f64,
    pub empirical: f64,
    pub empirical_stderr: f64,
    pub exact: f64,
    pub exact_stderr: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub bins: Vec<BinComparison>,
    pub max_abs_z: f64,
    pub fraction_within_4: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-bin z-scores; passes when every `|z| <= threshold`.
pub fn compare_curves(
    empirical: &CorrelationCurve,
    exact: &CorrelationCurve,
    threshold: f64,
) -> Result<ComparisonReport, EstimatorError> {
    if empirical.bin_edges.len() != exact.bin_edges.len()
        || empirical
            .bin_edges
            .iter()
            .zip(&exact.bin_edges)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(EstimatorError::BinMismatch);
    }
    let bins: Vec<BinComparison> = (0..empirical.bins())
        .map(|k| {
            let diff = empirical.values[k] - exact.values[k];
            let se = empirical.stderr[k].hypot(exact.stderr[k]);
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            BinComparison {
                lo: empirical.bin_edges[k],
                hi: empirical.bin_edges[k + 1],
                empirical: empirical.values[k],
                empirical_stderr: empirical.stderr[k],
                exact: exact.values[k],
                exact_stderr: exact.stderr[k],
                z,
            }
        })
        .collect();
    let max_abs_z = bins.iter().map(|b| b.z.abs()).fold(0.0, f64::max);
    let within = bins.iter().filter(|b| b.z.abs() <= 4.0).count();
    Ok(ComparisonReport {
        fraction_within_4: within as f64 / bins.len().max(1) as f64,
        pass: bins.iter().all(|b| b.z.abs() <= threshold),
        max_abs_z,
        threshold,
        bins,
    })
}

/// `(last − first) / combined stderr` of a curve.
pub fn shape_separation(curve: &CorrelationCurve) -> f64 {
    let (first, last) = (0, curve.bins() - 1);
    let se = curve.stderr[first].hypot(curve.stderr[last]);
    (curve.values[last] - curve.values[first]) / se
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_reduces_to_flat_for_large_n() {
        let s = Sphere { n: 1e10 };
        let (a, b) = (C64::new(0.3, 1.0), C64::new(-1.2, 0.4));
        assert!((s.distance(a, b) - (a - b).norm()).abs() < 1e-8);
        assert!((s.disk_area(2.0) - PI * 4.0).abs() < 1e-8);
    }

    #[test]
    fn sphere_area_is_total_at_antipode() {
        let n = 9.0;
        let s = Sphere { n };
        assert!((s.disk_area(n.sqrt() * PI / 2.0) - PI * n).abs() < 1e-9);
        let d = s.distance(C64::new(0.0, 0.0), C64::new(1e12, 0.0));
        assert!((d - 3.0 * PI / 2.0).abs() < 1e-6);
    }

    #[test]
    fn edges_validated() {
        assert!(check_edges(&[0.5]).is_err());
        assert!(check_edges(&[1.0, 0.5]).is_err());
        assert!(check_edges(&[-1.0, 0.5]).is_err());
        assert!(check_edges(&[0.2, 0.5, 1.0]).is_ok());
    }
}

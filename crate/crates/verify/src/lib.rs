//! End-to-end acceptance checks with pinned tolerances.

use std::f64::consts::TAU;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use zerocrit_core::correlator::{self, CmOptions};
use zerocrit_core::covariance::{build_joint_covariance, JointCovariance};
use zerocrit_core::estimator::{self, Flat, PointKind, Which};
use zerocrit_core::gafsim::{self, PointPattern, SimConfig};
use zerocrit_core::numerics::ComplexMatrix;
use zerocrit_core::projective;
use zerocrit_core::rng::StreamFactory;

const FIVE_THIRDS: f64 = 5.0 / 3.0;
const QUAD_TOL: f64 = 1e-9;

/// Sample sizes for one run of the suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub mc_samples: u64,
    pub cm_samples: u64,
    pub gaf_samples: u64,
    pub gaf_window: f64,
    pub su2_count_samples: usize,
    pub su2_corr_n: usize,
    pub su2_corr_samples: usize,
    pub seed: u64,
}

impl Profile {
    pub fn full() -> Self {
        Self {
            name: "full".into(),
            mc_samples: 1_000_000,
            cm_samples: 1_000_000,
            gaf_samples: 2000,
            gaf_window: 8.0,
            su2_count_samples: 500,
            su2_corr_n: 400,
            su2_corr_samples: 5000,
            seed: 20240601,
        }
    }

    pub fn quick() -> Self {
        Self {
            name: "quick".into(),
            mc_samples: 100_000,
            cm_samples: 100_000,
            gaf_samples: 200,
            su2_count_samples: 100,
            su2_corr_samples: 100,
            ..Self::full()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {}: {} ({:.1}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub profile: Profile,
    pub criteria: Vec<CriterionResult>,
    pub all_pass: bool,
}

pub const TITLES: [&str; 12] = [
    "long-range constant",
    "repulsion",
    "integrand regression",
    "quadrature vs monte carlo",
    "frame invariance",
    "c_m monte carlo",
    "simulation vs theory",
    "intensities",
    "su2 counts",
    "bergman rescaling",
    "universality on CP1",
    "determinism",
];

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn kq(r: f64) -> Result<f64, String> {
    let cov = build_joint_covariance(r).map_err(err)?;
    Ok(correlator::ktilde_quadrature(&cov, QUAD_TOL).map_err(err)?.value)
}

fn c1_long_range() -> Outcome {
    let mut worst = 0.0f64;
    for r in [4.0, 4.5, 5.0, 5.5, 6.0] {
        worst = worst.max((kq(r)? - FIVE_THIRDS).abs());
    }
    Ok((worst <= 0.01, format!("max |K(r) - 5/3| = {worst:.3e} on r in [4, 6]")))
}

fn c2_repulsion() -> Outcome {
    let (a, b) = (kq(0.1)?, kq(0.03)?);
    Ok((
        a < 0.05 && b < 0.005,
        format!("K(0.1) = {a:.6} (< 0.05), K(0.03) = {b:.6} (< 0.005)"),
    ))
}

fn c3_integrand() -> Outcome {
    let p = ComplexMatrix::from_diag(&[1.0, 0.0, 0.0]);
    let wrong = correlator::expectation_from_forms(&p, &ComplexMatrix::from_diag(&[-1.0, 2.0, 0.0]), 1.0, 1e-10)
        .map_err(err)?;
    let right = correlator::expectation_from_forms(&p, &ComplexMatrix::from_diag(&[0.0, 2.0, -1.0]), 1.0, 1e-10)
        .map_err(err)?;
    Ok((
        (wrong - 16.0 / 9.0).abs() <= 1e-4 && (right - FIVE_THIRDS).abs() <= 1e-4,
        format!("|2x2-x1| -> {wrong:.8} (16/9), |2x2-x3| -> {right:.8} (5/3)"),
    ))
}

fn c4_mc(p: &Profile) -> Outcome {
    let mut worst = 0.0f64;
    for (k, r) in [0.1, 0.5, 1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
        let cov = build_joint_covariance(r).map_err(err)?;
        let q = correlator::ktilde_quadrature(&cov, QUAD_TOL).map_err(err)?;
        let mc = correlator::ktilde_monte_carlo(&cov, p.mc_samples, p.seed + k as u64).map_err(err)?;
        worst = worst.max((q.value - mc.value).abs() / mc.stderr);
    }
    Ok((worst <= 4.0, format!("max |quad - mc| / stderr = {worst:.2} with {} samples", p.mc_samples)))
}

fn c5_frame(p: &Profile) -> Outcome {
    let mut rng = StreamFactory::new(p.seed, "acceptance-frame").stream(0);
    let mut worst = 0.0f64;
    for r in [0.5, 1.0, 2.0] {
        let reduced = kq(r)?;
        for _ in 0..10 {
            let u = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let v = u + Complex64::from_polar(r, TAU * rng.random::<f64>());
            let cov = JointCovariance::at_points(u, v).map_err(err)?;
            let got = correlator::ktilde_quadrature(&cov, 1e-10).map_err(err)?.value;
            worst = worst.max((got - reduced).abs());
        }
    }
    Ok((worst <= 1e-6, format!("max deviation over 30 frames = {worst:.2e}")))
}

fn c6_cm(p: &Profile) -> Outcome {
    let c1 = correlator::cm_estimate(1, p.cm_samples, p.seed).map_err(err)?;
    let z1 = (c1.value - FIVE_THIRDS) / c1.stderr;
    let a = correlator::cm_estimate(2, p.cm_samples, p.seed).map_err(err)?;
    let alt = CmOptions {
        stream: "cm-alt".into(),
        ..CmOptions::default()
    };
    let b = correlator::cm_estimate_with(2, p.cm_samples, p.seed, &alt).map_err(err)?;
    let z2 = (a.value - b.value) / a.stderr.hypot(b.stderr);
    Ok((
        z1.abs() <= 3.0 && z2.abs() <= 3.0,
        format!(
            "c1 = {:.5} +- {:.5} (z = {z1:.2}); c2 = {:.5} vs {:.5} (z = {z2:.2})",
            c1.value, c1.stderr, a.value, b.value
        ),
    ))
}

fn gaf_bins() -> Vec<f64> {
    (0..=19).map(|k| 0.2 + 0.2 * k as f64).collect()
}

fn c7_sim(patterns: &[PointPattern]) -> Outcome {
    let edges = gaf_bins();
    let emp = estimator::estimate_ktilde(patterns, &edges, Which::Chern, &Flat).map_err(err)?;
    let exact = estimator::exact_curve(&edges, 1e-8).map_err(err)?;
    let rep = estimator::compare_curves(&emp, &exact, 4.0).map_err(err)?;
    let sep = estimator::shape_separation(&emp);
    Ok((
        rep.pass && sep >= 5.0,
        format!(
            "{} samples, window {}: max |z| = {:.2} over {} bins, shape separation = {sep:.1}",
            patterns.len(),
            patterns.first().map_or(0.0, |p| p.window_radius),
            rep.max_abs_z,
            rep.bins.len()
        ),
    ))
}

fn c8_intensity(patterns: &[PointPattern]) -> Outcome {
    let z = estimator::intensity(patterns, PointKind::Zeros, &Flat).map_err(err)?.0 * std::f64::consts::PI;
    let c = estimator::intensity(patterns, PointKind::Criticals, &Flat).map_err(err)?.0 * std::f64::consts::PI;
    let dz = z - 1.0;
    let dc = c / FIVE_THIRDS - 1.0;
    Ok((
        dz.abs() <= 0.05 && dc.abs() <= 0.05,
        format!("pi*zeros = {z:.4} ({:+.2}%), pi*criticals = {c:.4} ({:+.2}% vs 5/3)", 100.0 * dz, 100.0 * dc),
    ))
}

fn c9_counts(p: &Profile) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [50, 100] {
        let s = projective::su2_count_summary(n, p.su2_count_samples, p.seed).map_err(err)?;
        pass &= s.zero_count_failures == 0 && s.relative_deviation.abs() <= 0.02;
        parts.push(format!(
            "n={n}: mean {:.2} +- {:.2} vs {:.2} ({:+.2}%), zero-count failures {}",
            s.mean_criticals,
            s.stderr,
            s.expected,
            100.0 * s.relative_deviation,
            s.zero_count_failures
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn c10_bergman() -> Outcome {
    let errs: Vec<f64> = [16u32, 64, 256, 1024]
        .into_iter()
        .map(|n| projective::bergman_rescaling_error(n, 1.0))
        .collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let vanishing = errs[3] < 0.01;
    Ok((decreasing && vanishing, format!("errors {}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "))))
}

fn c11_universality(p: &Profile) -> Outcome {
    let edges = gaf_bins();
    let emp = projective::su2_rescaled_correlation(p.su2_corr_n, p.su2_corr_samples, &edges, p.seed).map_err(err)?;
    let exact = estimator::exact_curve(&edges, 1e-8).map_err(err)?;
    let rep = estimator::compare_curves(&emp, &exact, 4.0).map_err(err)?;
    Ok((
        rep.pass,
        format!(
            "n = {}, {} samples: max |z| = {:.2} over {} bins",
            p.su2_corr_n,
            p.su2_corr_samples,
            rep.max_abs_z,
            rep.bins.len()
        ),
    ))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(err)?;
    Ok(pool.install(f))
}

/// Byte-level fingerprint of every seeded computation at a small size.
fn seeded_outputs(seed: u64) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let cfg = SimConfig {
        samples: 8,
        seed,
        window_radius: 3.0,
        radius: None,
        holo: true,
    };
    for (pat, _) in gafsim::simulate_batch(&cfg).map_err(err)? {
        out.push(pat.to_json());
    }
    let cov = build_joint_covariance(1.0).map_err(err)?;
    let mc = correlator::ktilde_monte_carlo(&cov, 20_000, seed).map_err(err)?;
    out.push(serde_json::to_string(&mc).map_err(err)?);
    let cm = correlator::cm_estimate(1, 100_000, seed).map_err(err)?;
    out.push(serde_json::to_string(&cm).map_err(err)?);
    let s = projective::su2_count_summary(20, 4, seed).map_err(err)?;
    out.push(serde_json::to_string(&s).map_err(err)?);
    Ok(out)
}

fn c12_determinism(p: &Profile) -> Outcome {
    let a = in_pool(1, || seeded_outputs(p.seed))??;
    let b = in_pool(1, || seeded_outputs(p.seed))??;
    let c = in_pool(4, || seeded_outputs(p.seed))??;
    let same = a == b && a == c;
    Ok((
        same,
        format!("{} artefacts compared across reruns and 1 vs 4 workers", a.len()),
    ))
}

/// Runs the selected criteria (all when `only` is empty), reporting each
/// result as soon as it is known.
pub fn run_suite(profile: &Profile, only: &[u8], mut on_result: impl FnMut(&CriterionResult)) -> AcceptanceReport {
    let wanted = |id: u8| only.is_empty() || only.contains(&id);
    let mut patterns: Option<Result<Vec<PointPattern>, String>> = None;
    let mut criteria = Vec::new();
    for id in 1u8..=12 {
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let outcome = match id {
            1 => c1_long_range(),
            2 => c2_repulsion(),
            3 => c3_integrand(),
            4 => c4_mc(profile),
            5 => c5_frame(profile),
            6 => c6_cm(profile),
            7 | 8 => {
                let pats = patterns.get_or_insert_with(|| {
                    let cfg = SimConfig {
                        samples: profile.gaf_samples,
                        seed: profile.seed,
                        window_radius: profile.gaf_window,
                        radius: None,
                        holo: false,
                    };
                    gafsim::simulate_batch(&cfg)
                        .map(|v| v.into_iter().map(|(p, _)| p).collect())
                        .map_err(err)
                });
                match pats {
                    Ok(p) if id == 7 => c7_sim(p),
                    Ok(p) => c8_intensity(p),
                    Err(e) => Err(e.clone()),
                }
            }
            9 => c9_counts(profile),
            10 => c10_bergman(),
            11 => c11_universality(profile),
            _ => c12_determinism(profile),
        };
        let (pass, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let res = CriterionResult {
            id,
            title: TITLES[id as usize - 1].to_string(),
            pass,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_result(&res);
        criteria.push(res);
    }
    AcceptanceReport {
        profile: profile.clone(),
        all_pass: criteria.iter().all(|c| c.pass),
        criteria,
    }
}

//! Thin drivers over the core modules. Every command writes its primary
//! outputs plus a manifest next to them.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use zerocrit_core::correlator::{self, CmOptions};
use zerocrit_core::covariance::build_joint_covariance;
use zerocrit_core::estimator::{self, CorrelationCurve, Flat, Sphere, Which};
use zerocrit_core::gafsim::{self, PointPattern, SimConfig};
use zerocrit_core::projective;
use zerocrit_core::rng::sample_seed;
use zerocrit_verify::Profile;

use crate::grid::{parse_grid, parse_list};
use crate::manifest::{manifest_path, write_file, Manifest};
use crate::plot;
use crate::{CliError, CmArgs, EstimateArgs, EvalArgs, PlotArgs, SimulateArgs, Su2Args, Su2Mode, VerifyArgs, WhichArg};

fn config<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Numerical(e.to_string()))
}

fn grid(s: &str) -> Result<Vec<f64>, CliError> {
    parse_grid(s).map_err(CliError::Config)
}

fn sidecar(output: &Path, suffix: &str) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn finish(mut m: Manifest, outputs: &[&Path], manifest_at: &Path) -> Result<(), CliError> {
    m.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    m.write(manifest_at)
}

pub fn eval(a: &EvalArgs, argv: &[String]) -> Result<(), CliError> {
    let r = grid(&a.r_grid)?;
    let exact = correlator::ktilde_curve(&r, a.tol)?;
    let mc = match a.mc_samples {
        Some(n) => Some(
            r.iter()
                .enumerate()
                .map(|(k, &x)| {
                    let cov = build_joint_covariance(x).map_err(|e| CliError::Config(e.to_string()))?;
                    Ok(correlator::ktilde_monte_carlo(&cov, n, sample_seed(a.seed, "eval-mc", k as u64))?)
                })
                .collect::<Result<Vec<_>, CliError>>()?,
        ),
        None => None,
    };
    let mut csv = String::from(if mc.is_some() { "r,value,mc_value,mc_stderr\n" } else { "r,value\n" });
    for (k, e) in exact.iter().enumerate() {
        let _ = write!(csv, "{:.16e},{:.16e}", e.r, e.value);
        if let Some(mc) = &mc {
            let _ = write!(csv, ",{:.16e},{:.16e}", mc[k].value, mc[k].stderr);
        }
        csv.push('\n');
    }
    write_file(&a.output, &csv)?;
    if let Some(mc) = &mc {
        let worst = exact
            .iter()
            .zip(mc)
            .map(|(e, m)| (e.value - m.value).abs() / m.stderr.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        println!("{} points, max |quadrature - mc| / stderr = {worst:.2}", exact.len());
    } else {
        println!("{} points written to {}", exact.len(), a.output.display());
    }
    let m = Manifest::new("eval", argv, a.mc_samples.map(|_| a.seed), config(a));
    finish(m, &[&a.output], &manifest_path(&a.output, false))
}

#[derive(Serialize)]
struct CmOutput<'a> {
    estimate: correlator::CmEstimate,
    zero_eta: bool,
    stream: &'a str,
}

pub fn cm(a: &CmArgs, argv: &[String]) -> Result<(), CliError> {
    let opts = CmOptions {
        stream: a.stream.clone(),
        zero_eta: a.zero_eta,
    };
    let e = correlator::cm_estimate_with(a.m, a.samples, a.seed, &opts)?;
    println!("c_{} = {:.6} ± {:.6} ({} samples)", a.m, e.value, e.stderr, e.samples);
    write_file(
        &a.output,
        &json(&CmOutput {
            estimate: e,
            zero_eta: a.zero_eta,
            stream: &a.stream,
        })?,
    )?;
    let m = Manifest::new("cm", argv, Some(a.seed), config(a));
    finish(m, &[&a.output], &manifest_path(&a.output, false))
}

pub fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<(), CliError> {
    let cfg = SimConfig {
        samples: a.samples,
        seed: a.seed,
        window_radius: a.window,
        radius: a.radius,
        holo: a.holo,
    };
    let batch = gafsim::simulate_batch(&cfg)?;
    std::fs::create_dir_all(&a.output).map_err(|e| CliError::Config(format!("{}: {e}", a.output.display())))?;
    let mut files = Vec::with_capacity(batch.len());
    for (i, (pat, _)) in batch.iter().enumerate() {
        let (name, text) = if a.csv {
            (format!("pattern_{i:06}.csv"), pat.to_csv())
        } else {
            (format!("pattern_{i:06}.json"), pat.to_json() + "\n")
        };
        let path = a.output.join(name);
        write_file(&path, &text)?;
        files.push(path);
    }
    let diags: Vec<_> = batch.iter().map(|(_, d)| d.clone()).collect();
    let diag_path = a.output.join("diagnostics.json");
    write_file(&diag_path, &json(&diags)?)?;
    let mut m = Manifest::new("simulate", argv, Some(a.seed), config(a));
    let patterns: Vec<PointPattern> = batch.into_iter().map(|(p, _)| p).collect();
    if let Err(e) = gafsim::check_critical_counts(&patterns) {
        eprintln!("warning: {e}");
        m.notes.push(e.to_string());
    }
    let unresolved: usize = diags.iter().map(|d| d.unresolved_cells).sum();
    if unresolved > 0 {
        m.notes.push(format!("{unresolved} unresolved winding cells"));
    }
    println!("{} patterns written to {}", patterns.len(), a.output.display());
    let mut outs: Vec<&Path> = files.iter().map(|p| p.as_path()).collect();
    outs.push(&diag_path);
    finish(m, &outs, &manifest_path(&a.output, true))
}

fn read_patterns(dir: &Path) -> Result<Vec<PointPattern>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("pattern_"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!("no pattern_*.json files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn write_curve_and_report(
    curve: &CorrelationCurve,
    tol: f64,
    threshold: f64,
    output: &Path,
) -> Result<(PathBuf, estimator::ComparisonReport), CliError> {
    let exact = estimator::exact_curve(&curve.bin_edges, tol)?;
    let report = estimator::compare_curves(curve, &exact, threshold)?;
    write_file(output, &curve.to_csv())?;
    let report_path = sidecar(output, ".report.json");
    write_file(&report_path, &(report.to_json() + "\n"))?;
    println!(
        "{} bins, max |z| = {:.2}, within 4 stderr: {:.0}%, {}",
        report.bins.len(),
        report.max_abs_z,
        100.0 * report.fraction_within_4,
        if report.pass { "consistent with the exact curve" } else { "INCONSISTENT with the exact curve" }
    );
    Ok((report_path, report))
}

pub fn estimate(a: &EstimateArgs, argv: &[String]) -> Result<(), CliError> {
    let edges = grid(&a.bins)?;
    let patterns = read_patterns(&a.patterns)?;
    let which = match a.which {
        WhichArg::Chern => Which::Chern,
        WhichArg::Holo => Which::Holo,
    };
    let curve = match a.sphere_n {
        Some(n) => estimator::estimate_ktilde(&patterns, &edges, which, &Sphere { n })?,
        None => estimator::estimate_ktilde(&patterns, &edges, which, &Flat)?,
    };
    let (report_path, _) = write_curve_and_report(&curve, a.tol, a.threshold, &a.output)?;
    let m = Manifest::new("estimate", argv, None, config(a));
    finish(m, &[&a.output, &report_path], &manifest_path(&a.output, false))
}

pub fn su2(a: &Su2Args, argv: &[String]) -> Result<(), CliError> {
    match &a.mode {
        Su2Mode::Counts { n, samples, seed, output } => {
            let ns = parse_list(n).map_err(CliError::Config)?;
            let mut csv = String::from(
                "n,samples,mean_criticals,stderr,expected,relative_deviation,zero_count_failures,index_balance_failures\n",
            );
            for n in ns {
                if n == 0 {
                    return Err(CliError::Config("degree must be positive".into()));
                }
                let s = projective::su2_count_summary(n, *samples as usize, *seed)?;
                println!(
                    "n = {n}: mean {:.3} ± {:.3}, expected {:.3} ({:+.2}%)",
                    s.mean_criticals,
                    s.stderr,
                    s.expected,
                    100.0 * s.relative_deviation
                );
                let _ = writeln!(
                    csv,
                    "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                    s.n,
                    s.samples,
                    s.mean_criticals,
                    s.stderr,
                    s.expected,
                    s.relative_deviation,
                    s.zero_count_failures,
                    s.index_balance_failures
                );
            }
            write_file(output, &csv)?;
            let m = Manifest::new("su2", argv, Some(*seed), config(&a.mode));
            finish(m, &[output], &manifest_path(output, false))
        }
        Su2Mode::Correlation {
            n,
            samples,
            bins,
            seed,
            threshold,
            output,
        } => {
            let edges = grid(bins)?;
            let curve = projective::su2_rescaled_correlation(*n, *samples as usize, &edges, *seed)?;
            let (report_path, _) = write_curve_and_report(&curve, 1e-8, *threshold, output)?;
            let m = Manifest::new("su2", argv, Some(*seed), config(&a.mode));
            finish(m, &[output, &report_path], &manifest_path(output, false))
        }
        Su2Mode::Bergman { n, box_radius, output } => {
            let ns = parse_list(n).map_err(CliError::Config)?;
            if !(*box_radius > 0.0) {
                return Err(CliError::Config("box radius must be positive".into()));
            }
            let mut csv = String::from("n,error\n");
            for n in ns {
                let e = projective::bergman_rescaling_error(n as u32, *box_radius);
                println!("n = {n}: {e:.6e}");
                let _ = writeln!(csv, "{n},{e:.16e}");
            }
            write_file(output, &csv)?;
            let m = Manifest::new("su2", argv, None, config(&a.mode));
            finish(m, &[output], &manifest_path(output, false))
        }
    }
}

pub fn verify(a: &VerifyArgs, argv: &[String]) -> Result<(), CliError> {
    let mut profile = if a.quick { Profile::quick() } else { Profile::full() };
    if let Some(seed) = a.seed {
        profile.seed = seed;
    }
    let only: Vec<u8> = match &a.only {
        Some(s) => parse_list(s)
            .map_err(CliError::Config)?
            .into_iter()
            .map(|i| {
                u8::try_from(i)
                    .ok()
                    .filter(|i| (1..=12).contains(i))
                    .ok_or_else(|| CliError::Config(format!("no criterion {i}")))
            })
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    let report = zerocrit_verify::run_suite(&profile, &only, |c| println!("{}", c.line()));
    write_file(&a.output, &json(&report)?)?;
    let m = Manifest::new("verify", argv, Some(profile.seed), config(a));
    finish(m, &[&a.output], &manifest_path(&a.output, false))?;
    let failed: Vec<String> = report.criteria.iter().filter(|c| !c.pass).map(|c| c.id.to_string()).collect();
    if failed.is_empty() {
        println!("all {} criteria pass", report.criteria.len());
        Ok(())
    } else {
        Err(CliError::Acceptance(format!("criteria {} failed", failed.join(", "))))
    }
}

pub fn plot(a: &PlotArgs, argv: &[String]) -> Result<(), CliError> {
    let mut curves = Vec::new();
    for p in &a.curves {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        let c = CorrelationCurve::from_csv(&text)?;
        let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        curves.push((label, c));
    }
    let exact = if a.exact {
        let hi = curves
            .iter()
            .filter_map(|(_, c)| c.bin_edges.last().copied())
            .fold(0.0f64, f64::max)
            .clamp(0.1, correlator_max());
        let grid: Vec<f64> = (1..=200).map(|k| (0.01 + (hi - 0.01) * k as f64 / 200.0).min(hi)).collect();
        let vals = correlator::ktilde_curve(&grid, 1e-7)?;
        Some(vals.into_iter().map(|e| (e.r, e.value)).collect::<Vec<_>>())
    } else {
        None
    };
    write_file(&a.output, &plot::render(&curves, exact.as_deref()))?;
    println!("wrote {}", a.output.display());
    let m = Manifest::new("plot", argv, None, config(a));
    finish(m, &[&a.output], &manifest_path(&a.output, false))
}

fn correlator_max() -> f64 {
    zerocrit_core::covariance::MAX_SEPARATION
}

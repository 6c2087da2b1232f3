use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::f64::consts::PI;
use zerocrit_core::estimator::*;
use zerocrit_core::gafsim::PointPattern;

/// Uniform points of intensity `lambda` in a geodesic disk of radius `w`.
fn poisson_disk<G: Geometry>(rng: &mut ChaCha8Rng, lambda: f64, w: f64, geom: &G, sphere_n: Option<f64>) -> Vec<Complex64> {
    let count = Poisson::new(lambda * geom.disk_area(w)).unwrap().sample(rng) as usize;
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let th = 2.0 * PI * rng.random::<f64>();
            let rho = match sphere_n {
                None => w * u.sqrt(),
                Some(n) => n.sqrt() * (u.sqrt() * (w / n.sqrt()).sin()).asin(),
            };
            let r = match sphere_n {
                None => rho,
                Some(n) => n.sqrt() * (rho / n.sqrt()).tan(),
            };
            Complex64::from_polar(r, th)
        })
        .collect()
}

fn poisson_patterns<G: Geometry>(samples: usize, w: f64, geom: &G, sphere_n: Option<f64>) -> Vec<PointPattern> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    (0..samples)
        .map(|i| PointPattern {
            seed: i as u64,
            degree: 0,
            radius: w,
            window_radius: w,
            zeros: poisson_disk(&mut rng, 1.0 / PI, w, geom, sphere_n),
            criticals: poisson_disk(&mut rng, 5.0 / (3.0 * PI), w, geom, sphere_n),
            holo_criticals: poisson_disk(&mut rng, 1.0 / PI, w, geom, sphere_n),
        })
        .collect()
}

fn edges() -> Vec<f64> {
    (0..=10).map(|k| 0.3 * k as f64 + 0.2).collect()
}

#[test]
fn independent_poisson_patterns_give_five_thirds() {
    let pats = poisson_patterns(800, 7.0, &Flat, None);
    let curve = estimate_ktilde(&pats, &edges(), Which::Chern, &Flat).unwrap();
    for k in 0..curve.bins() {
        let z = (curve.values[k] - 5.0 / 3.0) / curve.stderr[k];
        assert!(z.abs() < 4.0, "bin {k}: {} ± {}", curve.values[k], curve.stderr[k]);
    }
    let holo = estimate_ktilde(&pats, &edges(), Which::Holo, &Flat).unwrap();
    let mean = holo.values.iter().sum::<f64>() / holo.bins() as f64;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn poisson_on_the_sphere_needs_spherical_areas() {
    let n = 30.0;
    let geom = Sphere { n };
    let pats = poisson_patterns(800, 6.6, &geom, Some(n));
    let curve = estimate_ktilde(&pats, &edges(), Which::Chern, &geom).unwrap();
    for k in 0..curve.bins() {
        let z = (curve.values[k] - 5.0 / 3.0) / curve.stderr[k];
        assert!(z.abs() < 4.0, "bin {k}: {} ± {}", curve.values[k], curve.stderr[k]);
    }
    let (zi, se) = intensity(&pats, PointKind::Zeros, &geom).unwrap();
    assert!((zi - 1.0 / PI).abs() < 4.0 * se);
}

#[test]
fn single_pair_by_hand() {
    let w = 4.0;
    let mk = |i| PointPattern {
        seed: i,
        degree: 0,
        radius: w,
        window_radius: w,
        zeros: vec![Complex64::new(0.5, 0.0), Complex64::new(3.5, 0.0)],
        criticals: vec![Complex64::new(0.5, 1.0)],
        holo_criticals: vec![],
    };
    let pats: Vec<PointPattern> = (0..MIN_PATTERNS as u64).map(mk).collect();
    let e = [0.5, 1.5, 2.0];
    let c = estimate_ktilde(&pats, &e, Which::Chern, &Flat).unwrap();
    // One zero survives erosion to radius 2; its partner sits at distance 1.
    let expect = PI * PI / (PI * 4.0 * PI * (1.5f64.powi(2) - 0.25));
    assert!((c.values[0] - expect).abs() < 1e-12);
    assert_eq!(c.values[1], 0.0);
    assert_eq!(c.pair_counts, vec![MIN_PATTERNS as u64, 0]);
    assert_eq!(c.stderr[0], 0.0);
}

#[test]
fn preconditions() {
    let pats = poisson_patterns(MIN_PATTERNS, 4.0, &Flat, None);
    assert!(matches!(
        estimate_ktilde(&pats[..10], &[0.2, 1.0], Which::Chern, &Flat),
        Err(EstimatorError::TooFewSamples { .. })
    ));
    assert!(matches!(
        estimate_ktilde(&pats, &[0.2, 2.5], Which::Chern, &Flat),
        Err(EstimatorError::BinningInvalid(_))
    ));
    assert!(matches!(
        estimate_ktilde(&pats, &[0.5, 0.2], Which::Chern, &Flat),
        Err(EstimatorError::BinningInvalid(_))
    ));
}

#[test]
fn comparison_flags_shifted_curves() {
    let e: Vec<f64> = vec![0.2, 1.0, 2.0, 4.0];
    let exact = exact_curve(&e, 1e-8).unwrap();
    let mut emp = exact.clone();
    emp.stderr = vec![0.01; 3];
    let same = compare_curves(&emp, &exact, 4.0).unwrap();
    assert!(same.pass && same.max_abs_z == 0.0 && same.fraction_within_4 == 1.0);
    emp.values[1] += 0.05;
    let off = compare_curves(&emp, &exact, 4.0).unwrap();
    assert!(!off.pass);
    assert!((off.max_abs_z - 5.0).abs() < 1e-6);
    let other = exact_curve(&[0.2, 1.0, 2.0, 3.0], 1e-8).unwrap();
    assert!(matches!(compare_curves(&emp, &other, 4.0), Err(EstimatorError::BinMismatch)));
}

#[test]
fn exact_curve_has_the_expected_shape() {
    let c = exact_curve(&[0.01, 0.05, 0.4, 0.6, 4.0, 6.0], 1e-8).unwrap();
    // K ≈ 8r² near contact, so the first bin averages to about 4(a² + b²).
    assert!((c.values[0] - 4.0 * (0.01f64.powi(2) + 0.05f64.powi(2))).abs() < 1e-3, "{}", c.values[0]);
    // Overshoot above the independent level near r = 0.5.
    assert!(c.values[2] > 5.0 / 3.0 + 0.2, "{}", c.values[2]);
    assert!((c.values[4] - 5.0 / 3.0).abs() < 0.01);
    assert!(c.stderr.iter().all(|&s| s == 0.0));
}

#[test]
fn csv_round_trip_is_exact() {
    let pats = poisson_patterns(60, 7.0, &Flat, None);
    let c = estimate_ktilde(&pats, &edges(), Which::Chern, &Flat).unwrap();
    let back = CorrelationCurve::from_csv(&c.to_csv()).unwrap();
    assert_eq!(back.bin_edges, c.bin_edges);
    assert_eq!(back.values, c.values);
    assert_eq!(back.stderr, c.stderr);
    assert_eq!(back.pair_counts, c.pair_counts);
}

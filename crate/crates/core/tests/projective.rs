use num_complex::Complex64;
use proptest::prelude::*;
use zerocrit_core::projective::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Point of the unit sphere for homogeneous coordinates `[x : y]`.
fn sphere(x: Complex64, y: Complex64) -> [f64; 3] {
    let s = x.norm_sqr() + y.norm_sqr();
    let p = x * y.conj();
    [2.0 * p.re / s, 2.0 * p.im / s, (x.norm_sqr() - y.norm_sqr()) / s]
}

fn homogeneous(p: &ChartPoint) -> (Complex64, Complex64) {
    if p.chart == 0 {
        (p.coordinate(), c(1.0, 0.0))
    } else {
        (c(1.0, 0.0), p.coordinate())
    }
}

/// Image under `z ↦ (a z + b) / (−b̄ z + ā)`.
fn rotate(p: &ChartPoint, a: Complex64, b: Complex64) -> [f64; 3] {
    let (x, y) = homogeneous(p);
    sphere(a * x + b * y, -b.conj() * x + a.conj() * y)
}

fn same_sets(xs: &[[f64; 3]], ys: &[[f64; 3]], tol: f64) -> bool {
    xs.len() == ys.len()
        && xs.iter().all(|x| {
            ys.iter()
                .any(|y| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt() < tol)
        })
}

fn unit_rotation(t: f64, u: f64, v: f64) -> (Complex64, Complex64) {
    (Complex64::from_polar(t.cos(), u), Complex64::from_polar(t.sin(), v))
}

#[test]
fn coefficient_scales_follow_binomials() {
    let s = coefficient_scales(6);
    let want = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
    for (x, w) in s.iter().zip(want) {
        assert!((x * x - 7.0 * w).abs() < 1e-9);
    }
}

#[test]
fn covariance_is_fubini_study_bergman_kernel() {
    let n = 6;
    let (z, w) = (c(0.4, -0.3), c(-0.5, 0.8));
    let m = 6000;
    let (mut sum, mut sq) = (c(0.0, 0.0), [0.0f64; 2]);
    for seed in 0..m {
        let p = Su2Polynomial::sample(n, seed);
        let eval = |x: Complex64| p.coefficients.iter().rev().fold(c(0.0, 0.0), |acc, a| acc * x + a);
        let v = eval(z) * eval(w).conj();
        sum += v;
        sq[0] += v.re * v.re;
        sq[1] += v.im * v.im;
    }
    let mf = m as f64;
    let mean = sum / mf;
    let exact = fs_bergman(n as u32, z, w);
    let se_re = ((sq[0] / mf - mean.re.powi(2)) / mf).sqrt();
    let se_im = ((sq[1] / mf - mean.im.powi(2)) / mf).sqrt();
    assert!((mean.re - exact.re).abs() < 4.0 * se_re, "{mean} vs {exact}");
    assert!((mean.im - exact.im).abs() < 4.0 * se_im, "{mean} vs {exact}");
}

#[test]
fn monomial_sections_put_zeros_at_the_poles() {
    let n = 5;
    let mut co = vec![c(0.0, 0.0); n + 1];
    co[n] = c(1.0, 0.0);
    let zs = su2_zeros(&Su2Polynomial::from_coefficients(co.clone())).unwrap();
    assert_eq!(zs.len(), n);
    assert!(zs.iter().all(|p| p.chart == 0 && p.coordinate().norm() == 0.0 && p.multiple));
    co.reverse();
    let zs = su2_zeros(&Su2Polynomial::from_coefficients(co)).unwrap();
    assert!(zs.iter().all(|p| p.chart == 1 && p.coordinate().norm() == 0.0));
}

#[test]
fn unit_circle_zeros_are_not_double_counted() {
    // z^n − 1 has every zero on |z| = 1.
    let n = 12;
    let mut co = vec![c(0.0, 0.0); n + 1];
    co[0] = c(-1.0, 0.0);
    co[n] = c(1.0, 0.0);
    let zs = su2_zeros(&Su2Polynomial::from_coefficients(co)).unwrap();
    assert_eq!(zs.len(), n);
}

#[test]
fn critical_search_balances_indices() {
    for (n, seed) in [(1usize, 3u64), (7, 4), (40, 5)] {
        let p = Su2Polynomial::sample(n, seed);
        let found = su2_critical_points(&p).unwrap();
        assert_eq!(found.index_balance, 2 - n as i64, "n={n}");
        assert_eq!(found.unresolved_cells, 0);
        assert_eq!(found.overlap_unmatched, 0);
    }
}

#[test]
fn rescaled_correlation_preconditions() {
    assert!(matches!(
        su2_rescaled_correlation(50, 60, &[0.2, 1.0], 1),
        Err(ProjectiveError::DegreeOutOfRange(50))
    ));
    assert!(matches!(
        su2_rescaled_correlation(100, 60, &[0.1, 1.0], 1),
        Err(ProjectiveError::BinsOutOfRange(_))
    ));
    assert!(matches!(
        su2_rescaled_correlation(100, 60, &[0.2, 4.5], 1),
        Err(ProjectiveError::BinsOutOfRange(_))
    ));
}

#[test]
fn local_pattern_lies_in_the_window() {
    let p = Su2Polynomial::sample(150, 8);
    let pat = su2_local_pattern(&p, 5.0, 0).unwrap();
    let n = 150f64;
    let within = |u: &Complex64| n.sqrt() * (u.norm() / n.sqrt()).atan() <= 5.0 + 1e-12;
    assert!(pat.zeros.iter().all(within) && pat.criticals.iter().all(within));
    // Expected counts n sin²(w/√n) and 5/3 of that.
    let area = n * (5.0 / n.sqrt()).sin().powi(2);
    assert!((pat.zeros.len() as f64 - area).abs() < 6.0 * area.sqrt());
    assert!((pat.criticals.len() as f64 - 5.0 * area / 3.0).abs() < 8.0 * area.sqrt());
}

#[test]
fn rescaling_error_decreases() {
    let e: Vec<f64> = [16u32, 64, 256, 1024].iter().map(|&n| bergman_rescaling_error(n, 1.0)).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    assert!(e[3] < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_count_is_exact(n in 1usize..120, seed in any::<u64>()) {
        let p = Su2Polynomial::sample(n, seed);
        prop_assert_eq!(su2_zeros(&p).unwrap().len(), n);
    }

    #[test]
    fn zeros_rotate_with_the_section(n in 2usize..30, seed in any::<u64>(), t in 0.0f64..1.5, u in 0.0f64..6.0, v in 0.0f64..6.0) {
        let (a, b) = unit_rotation(t, u, v);
        let p = Su2Polynomial::sample(n, seed);
        let q = p.rotated(a, b);
        let mapped: Vec<[f64; 3]> = su2_zeros(&q).unwrap().iter().map(|z| rotate(z, a, b)).collect();
        let direct: Vec<[f64; 3]> = su2_zeros(&p).unwrap().iter().map(|z| { let (x, y) = homogeneous(z); sphere(x, y) }).collect();
        prop_assert!(same_sets(&mapped, &direct, 1e-6));
    }

    #[test]
    fn critical_points_rotate_with_the_section(n in 2usize..16, seed in any::<u64>(), t in 0.0f64..1.5, u in 0.0f64..6.0, v in 0.0f64..6.0) {
        let (a, b) = unit_rotation(t, u, v);
        let p = Su2Polynomial::sample(n, seed);
        let q = p.rotated(a, b);
        let mapped: Vec<[f64; 3]> = su2_critical_points(&q).unwrap().points.iter().map(|z| rotate(z, a, b)).collect();
        let direct: Vec<[f64; 3]> = su2_critical_points(&p).unwrap().points.iter().map(|z| { let (x, y) = homogeneous(z); sphere(x, y) }).collect();
        prop_assert!(same_sets(&mapped, &direct, 1e-6));
    }
}

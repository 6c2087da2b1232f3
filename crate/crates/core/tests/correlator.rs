use num_complex::Complex64;
use proptest::prelude::*;
use zerocrit_core::correlator::*;
use zerocrit_core::covariance::{build_joint_covariance, JointCovariance};
use zerocrit_core::numerics::ComplexMatrix;

const FIVE_THIRDS: f64 = 5.0 / 3.0;

/// Reference values from a 50-digit computation: partial-fraction density of
/// a signed hypoexponential sum (`E|Σ d_j X_j| = Σ_j c_j |d_j|`), with the
/// size-bias identity `E[X g(X)] = E[g(X + X')]` for the `X_i` weight.
const REFERENCE: [(f64, f64); 10] = [
    (0.03, 0.0072024207594448239),
    (0.1, 0.080287234332613245),
    (0.3, 0.7344754675307537),
    (0.5, 1.9632462876239842),
    (1.0, 1.8190630117648104),
    (1.5, 1.3915872138241445),
    (2.0, 1.5793249542133827),
    (3.0, 1.6901266156022423),
    (4.0, 1.6668797337660599),
    (6.0, 1.6666666666734819),
];

fn kq(r: f64, tol: f64) -> f64 {
    ktilde_quadrature(&build_joint_covariance(r).unwrap(), tol).unwrap().value
}

#[test]
fn quadrature_matches_high_precision_reference() {
    for (r, want) in REFERENCE {
        let got = kq(r, 1e-10);
        assert!((got - want).abs() < 1e-9, "r={r}: {got} vs {want}");
    }
}

#[test]
fn long_range_limit() {
    assert!((kq(6.0, 1e-8) - FIVE_THIRDS).abs() < 1e-4);
    for k in 0..20 {
        let r = 4.0 + 2.0 * k as f64 / 19.0;
        assert!((kq(r, 1e-8) - FIVE_THIRDS).abs() <= 0.01, "r={r}");
    }
}

#[test]
fn contact_repulsion_is_quadratic() {
    // Near contact K ≈ 8 r²; independent plain Monte Carlo with 2·10⁶ draws
    // gave 0.00721(1) at r = 0.03 and 0.0802(1) at r = 0.1.
    assert!((kq(0.03, 1e-10) - 0.00721).abs() < 5e-5);
    assert!((kq(0.1, 1e-10) - 0.0802).abs() < 5e-4);
    let mut last = f64::INFINITY;
    for r in [0.04, 0.02, 0.01, 0.005] {
        let ratio = kq(r, 1e-10) / (r * r);
        assert!((ratio - 8.0).abs() < 8.0 * 0.05, "r={r}: {ratio}");
        assert!((ratio - 8.0).abs() <= (last - 8.0).abs() + 1e-9);
        last = ratio;
    }
    let zero = ktilde_quadrature(&build_joint_covariance(0.0).unwrap(), 1e-10).unwrap();
    assert_eq!(zero.value, 0.0);
}

#[test]
fn exponential_closed_forms() {
    let one = expectation_from_forms(
        &ComplexMatrix::from_diag(&[1.0, 0.0, 0.0]),
        &ComplexMatrix::from_diag(&[0.0, 1.0, -1.0]),
        1.0,
        1e-10,
    )
    .unwrap();
    assert!((one - 1.0).abs() < 1e-9);
    let corrected = expectation_from_forms(
        &ComplexMatrix::from_diag(&[1.0, 0.0, 0.0]),
        &ComplexMatrix::from_diag(&[0.0, 2.0, -1.0]),
        1.0,
        1e-10,
    )
    .unwrap();
    assert!((corrected - FIVE_THIRDS).abs() < 1e-9);
}

#[test]
fn swapped_integrand_gives_sixteen_ninths() {
    // |2|ξ₂|² − |ξ₁|²| against the weight |ξ₁|²: E[X |2Y − X|] = 16/9.
    let v = expectation_from_forms(
        &ComplexMatrix::from_diag(&[1.0, 0.0, 0.0]),
        &ComplexMatrix::from_diag(&[-1.0, 2.0, 0.0]),
        1.0,
        1e-10,
    )
    .unwrap();
    assert!((v - 16.0 / 9.0).abs() < 1e-9, "{v}");
}

#[test]
fn monte_carlo_agrees_with_quadrature() {
    for r in [0.1, 0.5, 1.0, 2.0, 3.0, 4.0] {
        let cov = build_joint_covariance(r).unwrap();
        let q = ktilde_quadrature(&cov, 1e-9).unwrap();
        let mc = ktilde_monte_carlo(&cov, 1_000_000, 11).unwrap();
        assert!((q.value - mc.value).abs() <= 4.0 * mc.stderr, "r={r}: {} vs {}±{}", q.value, mc.value, mc.stderr);
        assert_eq!(mc.method, Method::MonteCarlo);
    }
    let mc = ktilde_monte_carlo(&build_joint_covariance(6.0).unwrap(), 1_000_000, 5).unwrap();
    assert!((mc.value - FIVE_THIRDS).abs() <= 3.0 * mc.stderr);
}

#[test]
fn monte_carlo_null_form() {
    let base = build_joint_covariance(1.0).unwrap();
    let cov = JointCovariance {
        m_p: ComplexMatrix::zeros(3, 3),
        ..base
    };
    let mc = ktilde_monte_carlo(&cov, 10_000, 1).unwrap();
    assert_eq!(mc.value, 0.0);
    assert_eq!(mc.stderr, 0.0);
}

#[test]
fn monte_carlo_is_pool_independent() {
    let cov = build_joint_covariance(1.0).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ktilde_monte_carlo(&cov, 50_000, 9).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}

#[test]
fn wick_identity() {
    for r in [0.1, 0.5, 1.0, 2.0, 4.0] {
        let (mean, se, exact) = wick_check(&build_joint_covariance(r).unwrap(), 200_000, 2);
        assert!((mean - exact).abs() <= 4.0 * se, "r={r}: {mean}±{se} vs {exact}");
    }
}

#[test]
fn frame_invariance() {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
    for r in [0.5, 1.0, 2.0] {
        let reduced = kq(r, 1e-10);
        for _ in 0..10 {
            let (x, y, th): (f64, f64, f64) = rand::Rng::random(&mut rng);
            let u = Complex64::new(4.0 * x - 2.0, 4.0 * y - 2.0) * 0.5;
            let v = u + Complex64::from_polar(r, std::f64::consts::TAU * th);
            let cov = JointCovariance::at_points(u, v).unwrap();
            let got = ktilde_quadrature(&cov, 1e-10).unwrap().value;
            assert!((got - reduced).abs() < 1e-6, "r={r} u={u} v={v}: {got} vs {reduced}");
        }
    }
}

#[test]
fn curve_and_bins() {
    let c = ktilde_curve(&[4.0, 5.0, 6.0], 1e-8).unwrap();
    assert!(c.iter().all(|e| (e.value - FIVE_THIRDS).abs() < 0.01 && e.stderr == 0.0));
    assert!(ktilde_curve(&[0.005], 1e-8).is_err());
    assert!(ktilde_curve(&[2.0, 1.0], 1e-8).is_err());
    let bins = ktilde_bin_averages(&[4.0, 6.0], 1e-8).unwrap();
    assert!((bins[0] - FIVE_THIRDS).abs() < 1e-3);
    // The annulus average weights by r dr; check against a fine midpoint sum.
    let (a, b) = (0.8, 1.2);
    let n = 400;
    let mut s = 0.0;
    for k in 0..n {
        let r = a + (k as f64 + 0.5) * (b - a) / n as f64;
        s += 2.0 * r * kq(r, 1e-9) * (b - a) / n as f64;
    }
    let avg = ktilde_bin_averages(&[a, b], 1e-9).unwrap()[0];
    assert!((avg - s / (b * b - a * a)).abs() < 1e-5);
}

#[test]
fn c1_is_five_thirds() {
    let e = cm_estimate(1, 1_000_000, 3).unwrap();
    assert!((e.value - FIVE_THIRDS).abs() <= 3.0 * e.stderr, "{e:?}");
    let pi4 = std::f64::consts::PI.powi(5);
    assert!((e.prefactored_value / e.value - pi4).abs() < 1e-9 * pi4);
}

#[test]
fn c1_without_eta_is_two() {
    let opts = CmOptions {
        zero_eta: true,
        ..CmOptions::default()
    };
    let e = cm_estimate_with(1, 400_000, 8, &opts).unwrap();
    assert!((e.value - 2.0).abs() <= 4.0 * e.stderr, "{e:?}");
}

#[test]
fn cm_stderr_scales_with_samples() {
    let a = cm_estimate(2, 100_000, 1).unwrap();
    let b = cm_estimate(2, 400_000, 1).unwrap();
    let ratio = a.stderr / b.stderr;
    assert!((1.5..=2.5).contains(&ratio), "{ratio}");
}

/// Plain sampler written independently of the library: Box-Muller normals
/// from a xorshift generator and a closed-form 2×2 determinant.
fn c2_oracle(samples: usize, seed: u64) -> (f64, f64) {
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    let mut uniform = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    };
    let mut cn = |var: f64| {
        let (u1, u2) = (uniform(), uniform());
        let rad = (-var * u1.ln()).sqrt();
        let th = std::f64::consts::TAU * u2;
        Complex64::new(rad * th.cos(), rad * th.sin())
    };
    let (mut s, mut ss) = (0.0, 0.0);
    for _ in 0..samples {
        let xi = cn(1.0).norm_sqr() + cn(1.0).norm_sqr();
        let (h11, h12, h22) = (cn(2.0), cn(1.0), cn(2.0));
        let e2 = cn(1.0).norm_sqr();
        // G = H*H − e2 I with H symmetric.
        let g11 = h11.norm_sqr() + h12.norm_sqr() - e2;
        let g22 = h12.norm_sqr() + h22.norm_sqr() - e2;
        let g12 = h11.conj() * h12 + h12.conj() * h22;
        let v = xi * (g11 * g22 - g12.norm_sqr()).abs();
        s += v;
        ss += v * v;
    }
    let n = samples as f64;
    let mean = s / n;
    (mean, ((ss / n - mean * mean) / (n - 1.0)).sqrt())
}

#[test]
fn c2_matches_independent_sampler() {
    let lib = cm_estimate(2, 400_000, 21).unwrap();
    let (o, ose) = c2_oracle(400_000, 77);
    let combined = (lib.stderr.powi(2) + ose.powi(2)).sqrt();
    assert!((lib.value - o).abs() <= 3.0 * combined, "{} vs {o}", lib.value);
    let other = cm_estimate_with(
        2,
        400_000,
        21,
        &CmOptions {
            stream: "cm-alt".into(),
            ..CmOptions::default()
        },
    )
    .unwrap();
    assert_ne!(other.value, lib.value);
    let combined = (lib.stderr.powi(2) + other.stderr.powi(2)).sqrt();
    assert!((lib.value - other.value).abs() <= 3.0 * combined);
}

#[test]
fn cm_preconditions() {
    assert!(matches!(cm_estimate(0, 100_000, 1), Err(CorrelatorError::DimensionOutOfRange(0))));
    assert!(matches!(cm_estimate(5, 100_000, 1), Err(CorrelatorError::DimensionOutOfRange(5))));
    assert!(matches!(cm_estimate(1, 10, 1), Err(CorrelatorError::TooFewSamples { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadrature_nonnegative_and_deterministic(r in 0.0f64..6.0) {
        let a = kq(r, 1e-7);
        let b = kq(r, 1e-7);
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn moments_scale_linearly(d in prop::array::uniform3(-3.0f64..3.0), s in 0.1f64..10.0) {
        let a = exponential_abs_moments(d, 1e-11).unwrap();
        let b = exponential_abs_moments(d.map(|x| x * s), 1e-11 * s).unwrap();
        for i in 0..3 {
            prop_assert!((b[i] - s * a[i]).abs() < 1e-8 * s.max(1.0) * (1.0 + a[i].abs()));
        }
    }

    #[test]
    fn moments_dominate_linear_form(d in prop::array::uniform3(-3.0f64..3.0)) {
        // |E[X_i L]| ≤ E[X_i |L|].
        let j = exponential_abs_moments(d, 1e-11).unwrap();
        for i in 0..3 {
            let lin: f64 = (0..3).map(|k| d[k] * if k == i { 2.0 } else { 1.0 }).sum();
            prop_assert!(j[i] + 1e-9 >= lin.abs());
        }
    }
}

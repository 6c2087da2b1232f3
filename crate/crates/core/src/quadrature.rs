//! Globally adaptive 21-point Gauss-Kronrod integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature exceeded {subdivisions} subdivisions (error estimate {error:.3e}, target {target:.3e})")]
    NoConvergence {
        subdivisions: usize,
        error: f64,
        target: f64,
    },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_subdivisions: 2000,
        }
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss-Legendre 10-point nodes on `[-1, 1]` (the Gauss half of the
/// Kronrod pair), with weights.
pub fn gauss_legendre_10() -> [(f64, f64); 10] {
    let mut out = [(0.0, 0.0); 10];
    for k in 0..5 {
        let x = XGK[2 * k + 1];
        out[2 * k] = (-x, WG[k]);
        out[2 * k + 1] = (x, WG[k]);
    }
    out
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { x: center });
    }
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = fc.abs() * WGK[10];
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite { x: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite { x: x2 });
        }
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

/// Integrates `f` over `[a, b]` until the summed error estimate is below
/// `max(tol.abs, tol.rel * |value|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Integral, QuadratureError> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (value, error) = gk21(&mut f, a, b)?;
    let mut evaluations = 21;
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut subdivisions = 0;
    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if total_err <= target {
            break;
        }
        if subdivisions >= tol.max_subdivisions {
            return Err(QuadratureError::NoConvergence {
                subdivisions,
                error: total_err,
                target,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Interval exhausted at double precision; accept what we have.
            heap.push(Segment { error: 0.0, ..worst });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid)?;
        let (v2, e2) = gk21(&mut f, mid, worst.b)?;
        evaluations += 42;
        subdivisions += 1;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        if subdivisions % 64 == 0 {
            // Re-sum to stop drift from the running updates.
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// Integrates `f` over `[a, ∞)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    tol: Tolerance,
) -> Result<Integral, QuadratureError> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let fx = f(x);
            if fx == 0.0 {
                0.0
            } else {
                fx / (one_minus * one_minus)
            }
        },
        0.0,
        1.0,
        tol,
    )
}

//! Dense complex polynomials: evaluation and all-roots Aberth-Ehrlich.

use num_complex::Complex64;
use thiserror::Error;

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("root finding stalled after {iterations} iterations ({unconverged} roots unconverged)")]
    RootFindingStalled { iterations: usize, unconverged: usize },
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("non-finite coefficient")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub z: C64,
    /// Another root lies within the clustering radius.
    pub multiple: bool,
}

/// Relative radius below which two roots are reported as one cluster.
pub const CLUSTER_RADIUS: f64 = 1e-6;
pub const MAX_ABERTH_ITERATIONS: usize = 1000;

/// `(p, p')` by Horner.
pub fn horner2(c: &[C64], z: C64) -> (C64, C64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// `(p, p', p'')` by Horner.
pub fn horner3(c: &[C64], z: C64) -> (C64, C64, C64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    let mut ddp = ZERO;
    for &a in c.iter().rev() {
        ddp = ddp * z + dp;
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp, ddp * 2.0)
}

pub fn derivative(c: &[C64]) -> Vec<C64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(j, &a)| a * j as f64)
        .collect()
}

/// Newton quotient `p/p'` and whether `|p|` is at the rounding level.
/// Evaluates the reversed polynomial outside the unit disk.
fn newton_quotient(c: &[C64], z: C64) -> (C64, bool) {
    let n = c.len() - 1;
    let eps = 8.0 * f64::EPSILON;
    if z.norm() <= 1.0 {
        let (p, dp) = horner2(c, z);
        let az = z.norm();
        let bound = c.iter().rev().fold(0.0, |s, a| s * az + a.norm());
        (p / dp, p.norm() <= eps * bound)
    } else {
        let w = z.inv();
        let aw = w.norm();
        let mut r = ZERO;
        let mut dr = ZERO;
        let mut bound = 0.0;
        for &a in c.iter() {
            dr = dr * w + r;
            r = r * w + a;
            bound = bound * aw + a.norm();
        }
        (z * r / (r * n as f64 - w * dr), r.norm() <= eps * bound)
    }
}

/// Initial approximations on circles read off the upper convex hull of
/// `(j, ln|c_j|)`.
fn newton_polygon_guesses(c: &[C64]) -> Vec<C64> {
    let n = c.len() - 1;
    let pts: Vec<(f64, f64)> = c
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 0.0)
        .map(|(j, a)| (j as f64, a.norm().ln()))
        .collect();
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = Vec::with_capacity(n);
    for w in hull.windows(2) {
        let (i, k) = (w[0].0, w[1].0);
        let count = (k - i) as usize;
        let radius = ((w[0].1 - w[1].1) / (k - i)).exp();
        for m in 0..count {
            let th = std::f64::consts::TAU * (m as f64 / count as f64 + i / n as f64) + 0.4;
            out.push(C64::from_polar(radius, th));
        }
    }
    out
}

/// Roots of `Σ c_j z^j` with `c_0 ≠ 0 ≠ c_N`.
fn aberth(c: &[C64]) -> Result<Vec<C64>, PolyError> {
    let n = c.len() - 1;
    if n == 1 {
        return Ok(vec![-c[0] / c[1]]);
    }
    let mut z = newton_polygon_guesses(c);
    let mut done = vec![false; n];
    let mut last_step = vec![f64::INFINITY; n];
    let mut remaining = n;
    for _ in 0..MAX_ABERTH_ITERATIONS {
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (q, small) = newton_quotient(c, z[i]);
            if small || !q.is_finite() {
                done[i] = true;
                remaining -= 1;
                continue;
            }
            let mut s = ZERO;
            for j in 0..n {
                if j != i {
                    s += (z[i] - z[j]).inv();
                }
            }
            let step = q / (C64::new(1.0, 0.0) - q * s);
            if step.is_finite() {
                z[i] -= step;
            }
            // Rounding can leave a root cycling between neighbouring floats.
            let size = step.norm();
            let ulps = size / (f64::EPSILON * z[i].norm());
            if ulps <= 4.0 || (ulps <= 1e3 && size >= last_step[i]) {
                done[i] = true;
                remaining -= 1;
            }
            last_step[i] = size;
        }
        if remaining == 0 {
            return Ok(z);
        }
    }
    Err(PolyError::RootFindingStalled {
        iterations: MAX_ABERTH_ITERATIONS,
        unconverged: remaining,
    })
}

fn polish(c: &[C64], z: C64) -> C64 {
    let mut z = z;
    let mut best = horner2(c, z).0.norm();
    for _ in 0..3 {
        let (q, _) = newton_quotient(c, z);
        let cand = z - q;
        if !cand.is_finite() {
            break;
        }
        let val = horner2(c, cand).0.norm();
        if val < best {
            best = val;
            z = cand;
        } else {
            break;
        }
    }
    z
}

/// All roots of `Σ c_j z^j`, counted with multiplicity. Vanishing leading
/// coefficients lower the degree; vanishing trailing ones give roots at 0.
pub fn roots(c: &[C64]) -> Result<Vec<Root>, PolyError> {
    if c.iter().any(|a| !a.is_finite()) {
        return Err(PolyError::NonFinite);
    }
    let top = c.iter().rposition(|a| a.norm() > 0.0).ok_or(PolyError::ZeroPolynomial)?;
    let low = c.iter().position(|a| a.norm() > 0.0).expect("nonzero entry exists");
    let mut out: Vec<Root> = (0..low)
        .map(|_| Root {
            z: ZERO,
            multiple: low > 1,
        })
        .collect();
    let core = &c[low..=top];
    if core.len() > 1 {
        let found = aberth(core)?;
        let polished: Vec<C64> = found.iter().map(|&z| polish(core, z)).collect();
        for (i, &z) in polished.iter().enumerate() {
            let scale = z.norm().max(1.0);
            let clustered = polished
                .iter()
                .enumerate()
                .any(|(j, &w)| j != i && (z - w).norm() < CLUSTER_RADIUS * scale);
            out.push(Root {
                z: if clustered { found[i] } else { z },
                multiple: clustered || (low > 0 && z.norm() < CLUSTER_RADIUS),
            });
        }
    }
    Ok(out)
}

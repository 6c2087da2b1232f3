//! Critical points of a holomorphic section under a Chern connection:
//! solutions of `g(z) = f'(z) − φ(z) f(z) = 0`, where `φ = ∂ log h⁻¹` is the
//! connection form. `g` is not holomorphic, so roots are located by grid
//! seeding plus Newton on the real 2×2 system.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::poly::horner3;

type C64 = Complex64;

/// A holomorphic function with its first two derivatives.
pub trait Field {
    fn eval3(&self, z: C64) -> (C64, C64, C64);
}

/// Connection form `φ` with its Wirtinger derivatives `(φ, ∂φ, ∂̄φ)`.
pub trait Connection {
    fn phi(&self, z: C64) -> (C64, C64, C64);
    /// `h^{1/2}`, used only to keep `|g|` in range when comparing magnitudes.
    fn weight(&self, z: C64) -> f64;
}

/// Flat model: `φ = z̄`.
#[derive(Clone, Copy, Debug)]
pub struct BargmannFock;

impl Connection for BargmannFock {
    fn phi(&self, z: C64) -> (C64, C64, C64) {
        (z.conj(), C64::new(0.0, 0.0), C64::new(1.0, 0.0))
    }

    fn weight(&self, z: C64) -> f64 {
        (-0.5 * z.norm_sqr()).exp()
    }
}

/// Fubini-Study on `O(n)` in the affine chart: `φ = n z̄ / (1 + |z|²)`.
#[derive(Clone, Copy, Debug)]
pub struct FubiniStudy {
    pub n: f64,
}

impl Connection for FubiniStudy {
    fn phi(&self, z: C64) -> (C64, C64, C64) {
        let q = 1.0 + z.norm_sqr();
        let zb = z.conj();
        (zb * (self.n / q), -zb * zb * (self.n / (q * q)), C64::new(self.n / (q * q), 0.0))
    }

    fn weight(&self, z: C64) -> f64 {
        (1.0 + z.norm_sqr()).powf(-0.5 * self.n)
    }
}

/// Polynomial in `t = z / scale`: `f(z) = Σ c_j t^j`.
#[derive(Clone, Debug)]
pub struct ScaledPoly<'a> {
    pub coeffs: &'a [C64],
    pub scale: f64,
}

impl Field for ScaledPoly<'_> {
    fn eval3(&self, z: C64) -> (C64, C64, C64) {
        let (p, dp, ddp) = horner3(self.coeffs, z / self.scale);
        let s = self.scale;
        (p, dp / s, ddp / (s * s))
    }
}

/// `g = f' − φ f` and its Wirtinger derivatives `(g, ∂g, ∂̄g)`.
pub fn residual<F: Field + ?Sized, C: Connection + ?Sized>(field: &F, conn: &C, z: C64) -> (C64, C64, C64) {
    let (f, df, ddf) = field.eval3(z);
    let (phi, phi_z, phi_zb) = conn.phi(z);
    (df - phi * f, ddf - phi * df - phi_z * f, -phi_zb * f)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    /// Points are reported inside the disk `|z| <= radius`.
    pub radius: f64,
    /// Seeding grid spacing.
    pub spacing: f64,
    /// Extra band searched around the disk so edge points are not missed.
    pub margin: f64,
    /// Newton iterates leaving `|z| <= escape_radius` are abandoned.
    pub escape_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalPoint {
    pub z: C64,
    /// Sign of the real Jacobian `|∂g|² − |∂̄g|²`.
    pub index: i8,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CriticalSearch {
    pub points: Vec<CriticalPoint>,
    pub seeds: usize,
    pub singular_seeds: usize,
    pub escaped_seeds: usize,
    pub uncertified: usize,
    /// Cells whose winding number could not be matched by found points.
    pub unresolved_cells: usize,
    /// Every Newton attempt met a singular Jacobian and nothing was found.
    pub degenerate: bool,
}

pub const DEDUPE_TOL: f64 = 1e-6;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const CERTIFY_RADIUS: f64 = 1e-3;
const MAX_NEWTON: usize = 100;
const MAX_EDGE_DEPTH: u32 = 10;
const MAX_CELL_DEPTH: u32 = 4;

enum NewtonOutcome {
    Converged(C64, i8),
    Singular,
    Escaped,
    Stalled,
}

fn newton<F: Field + ?Sized, C: Connection + ?Sized>(
    field: &F,
    conn: &C,
    start: C64,
    max_step: f64,
    escape: f64,
) -> NewtonOutcome {
    let mut z = start;
    let mut last = f64::INFINITY;
    let mut small_steps = 0;
    for _ in 0..MAX_NEWTON {
        let (g, a, b) = residual(field, conn, z);
        let (na, nb) = (a.norm_sqr(), b.norm_sqr());
        let det = na - nb;
        if !(det.abs() > 1e-14 * (na + nb)) {
            return NewtonOutcome::Singular;
        }
        let mut step = (-g * a.conj() + b * g.conj()) / det;
        if !step.is_finite() {
            return NewtonOutcome::Singular;
        }
        let len = step.norm();
        if len > max_step {
            step *= max_step / len;
        }
        z += step;
        if z.norm() > escape {
            return NewtonOutcome::Escaped;
        }
        let tiny = 1e-14 * z.norm().max(1.0);
        if len <= tiny || (len < 1e-9 * z.norm().max(1.0) && len >= last) {
            small_steps += 1;
            if small_steps >= 2 || len <= tiny {
                let (_, a, b) = residual(field, conn, z);
                let det = a.norm_sqr() - b.norm_sqr();
                return NewtonOutcome::Converged(z, if det > 0.0 { 1 } else { -1 });
            }
        }
        last = len;
    }
    NewtonOutcome::Stalled
}

/// Residual certificate: `|g(z)|` against the largest `|g|` on a small circle.
pub fn certify<F: Field + ?Sized, C: Connection + ?Sized>(field: &F, conn: &C, z: C64) -> bool {
    let g0 = residual(field, conn, z).0.norm();
    let scale = (0..8)
        .map(|k| residual(field, conn, z + C64::from_polar(CERTIFY_RADIUS, TAU * k as f64 / 8.0)).0.norm())
        .fold(0.0, f64::max);
    g0 <= RESIDUAL_TOL * scale
}

fn wrap(a: f64) -> f64 {
    let mut a = a;
    while a > PI {
        a -= TAU;
    }
    while a <= -PI {
        a += TAU;
    }
    a
}

/// Continuous argument change of `g` along the segment `p → q`.
fn edge_turn<F: Field + ?Sized, C: Connection + ?Sized>(
    field: &F,
    conn: &C,
    p: C64,
    q: C64,
    gp: C64,
    gq: C64,
    depth: u32,
) -> f64 {
    let d = wrap(gq.arg() - gp.arg());
    if d.abs() <= 0.5 * PI || depth >= MAX_EDGE_DEPTH {
        return d;
    }
    let m = 0.5 * (p + q);
    let gm = residual(field, conn, m).0;
    edge_turn(field, conn, p, m, gp, gm, depth + 1) + edge_turn(field, conn, m, q, gm, gq, depth + 1)
}

fn winding<F: Field + ?Sized, C: Connection + ?Sized>(field: &F, conn: &C, lo: C64, h: f64) -> i32 {
    let corners = [lo, lo + C64::new(h, 0.0), lo + C64::new(h, h), lo + C64::new(0.0, h)];
    let g: Vec<C64> = corners.iter().map(|&c| residual(field, conn, c).0).collect();
    let mut total = 0.0;
    for k in 0..4 {
        let (i, j) = (k, (k + 1) % 4);
        total += edge_turn(field, conn, corners[i], corners[j], g[i], g[j], 0);
    }
    (total / TAU).round() as i32
}

fn canonical_order(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Sorts and merges points closer than [`DEDUPE_TOL`].
pub fn dedupe(points: &mut Vec<CriticalPoint>) {
    points.sort_by(|a, b| canonical_order(&a.z, &b.z));
    let mut kept: Vec<CriticalPoint> = Vec::with_capacity(points.len());
    for p in points.iter() {
        let dup = kept
            .iter()
            .rev()
            .take_while(|k| p.z.re - k.z.re <= DEDUPE_TOL)
            .any(|k| (k.z - p.z).norm() <= DEDUPE_TOL);
        if !dup {
            kept.push(*p);
        }
    }
    *points = kept;
}

struct Engine<'a, F: ?Sized, C: ?Sized> {
    field: &'a F,
    conn: &'a C,
    params: SearchParams,
    out: CriticalSearch,
    found: Vec<CriticalPoint>,
    converged_any: bool,
}

impl<F: Field + ?Sized, C: Connection + ?Sized> Engine<'_, F, C> {
    fn run_seed(&mut self, seed: C64, max_step: f64) {
        self.out.seeds += 1;
        match newton(self.field, self.conn, seed, max_step, self.params.escape_radius) {
            NewtonOutcome::Converged(z, index) => {
                self.converged_any = true;
                if certify(self.field, self.conn, z) {
                    self.found.push(CriticalPoint { z, index });
                } else {
                    self.out.uncertified += 1;
                }
            }
            NewtonOutcome::Singular => self.out.singular_seeds += 1,
            NewtonOutcome::Escaped => self.out.escaped_seeds += 1,
            NewtonOutcome::Stalled => {}
        }
    }

    fn index_sum_in(&self, lo: C64, h: f64) -> i32 {
        self.found
            .iter()
            .filter(|p| p.z.re >= lo.re && p.z.re < lo.re + h && p.z.im >= lo.im && p.z.im < lo.im + h)
            .map(|p| p.index as i32)
            .sum()
    }

    /// Splits a cell whose winding disagrees with the points found in it.
    fn refine(&mut self, lo: C64, h: f64, wind: i32, depth: u32) {
        if self.index_sum_in(lo, h) == wind {
            return;
        }
        if depth >= MAX_CELL_DEPTH {
            self.out.unresolved_cells += 1;
            return;
        }
        let half = 0.5 * h;
        for (dx, dy) in [(0.0, 0.0), (half, 0.0), (0.0, half), (half, half)] {
            let sub = lo + C64::new(dx, dy);
            let w = winding(self.field, self.conn, sub, half);
            if self.index_sum_in(sub, half) != w {
                self.run_seed(sub + C64::new(0.5 * half, 0.5 * half), half);
                dedupe(&mut self.found);
                self.refine(sub, half, w, depth + 1);
            }
        }
    }
}

/// Finds the critical points of `field` under `conn` in `|z| <= radius`.
pub fn find_critical<F: Field + ?Sized, C: Connection + ?Sized>(
    field: &F,
    conn: &C,
    params: SearchParams,
) -> CriticalSearch {
    let h = params.spacing;
    let extent = params.radius + params.margin;
    let cells = (2.0 * extent / h).ceil() as usize;
    let nodes = cells + 1;
    let origin = C64::new(-0.5 * cells as f64 * h, -0.5 * cells as f64 * h);
    let at = |i: usize, j: usize| origin + C64::new(i as f64 * h, j as f64 * h);

    let mut g = vec![C64::new(0.0, 0.0); nodes * nodes];
    let mut mag = vec![0.0; nodes * nodes];
    for j in 0..nodes {
        for i in 0..nodes {
            let z = at(i, j);
            let v = residual(field, conn, z).0;
            g[j * nodes + i] = v;
            mag[j * nodes + i] = v.norm() * conn.weight(z);
        }
    }
    let mut hturn = vec![0.0; nodes * nodes];
    let mut vturn = vec![0.0; nodes * nodes];
    for j in 0..nodes {
        for i in 0..nodes {
            let k = j * nodes + i;
            if i + 1 < nodes {
                hturn[k] = edge_turn(field, conn, at(i, j), at(i + 1, j), g[k], g[k + 1], 0);
            }
            if j + 1 < nodes {
                vturn[k] = edge_turn(field, conn, at(i, j), at(i, j + 1), g[k], g[k + nodes], 0);
            }
        }
    }

    let mut engine = Engine {
        field,
        conn,
        params,
        out: CriticalSearch::default(),
        found: Vec::new(),
        converged_any: false,
    };
    let mut winding_cells = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            let k = j * nodes + i;
            let total = hturn[k] + vturn[k + 1] - hturn[k + nodes] - vturn[k];
            let w = (total / TAU).round() as i32;
            let lo = at(i, j);
            let nearest = C64::new(
                lo.re.max(0.0f64.min(lo.re + h)),
                lo.im.max(0.0f64.min(lo.im + h)),
            );
            if w != 0 && nearest.norm() <= extent && nearest.norm() < params.escape_radius {
                winding_cells.push((i, j, w));
                engine.run_seed(at(i, j) + C64::new(0.5 * h, 0.5 * h), h);
            }
        }
    }
    // Local minima of the weighted modulus catch pairs of opposite index
    // sharing a cell.
    for j in 1..nodes - 1 {
        for i in 1..nodes - 1 {
            let k = j * nodes + i;
            let m = mag[k];
            let is_min = [
                k - 1,
                k + 1,
                k - nodes,
                k + nodes,
                k - nodes - 1,
                k - nodes + 1,
                k + nodes - 1,
                k + nodes + 1,
            ]
            .iter()
            .all(|&n| mag[n] > m);
            if is_min {
                engine.run_seed(at(i, j), h);
            }
        }
    }
    dedupe(&mut engine.found);
    // Cells holding a found point are checked too: a pair of opposite index
    // sharing a cell has winding 0, and finding only one of them shows up
    // as a mismatch there.
    let cell_winding = |i: usize, j: usize| {
        let k = j * nodes + i;
        ((hturn[k] + vturn[k + 1] - hturn[k + nodes] - vturn[k]) / TAU).round() as i32
    };
    let mut to_check: Vec<(usize, usize, i32)> = winding_cells;
    for p in &engine.found {
        let fi = ((p.z.re - origin.re) / h).floor();
        let fj = ((p.z.im - origin.im) / h).floor();
        if fi >= 0.0 && fj >= 0.0 && (fi as usize) < cells && (fj as usize) < cells {
            let (i, j) = (fi as usize, fj as usize);
            to_check.push((i, j, cell_winding(i, j)));
        }
    }
    to_check.sort_unstable();
    to_check.dedup();
    for (i, j, w) in to_check {
        engine.refine(at(i, j), h, w, 0);
    }
    dedupe(&mut engine.found);

    let mut out = engine.out;
    out.degenerate = !engine.converged_any && out.singular_seeds > 0;
    out.points = engine
        .found
        .into_iter()
        .filter(|p| p.z.norm() <= params.radius)
        .collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bf_params(radius: f64) -> SearchParams {
        SearchParams {
            radius,
            spacing: 0.25,
            margin: 0.5,
            escape_radius: radius + 1.0,
        }
    }

    #[test]
    fn constant_section_has_single_critical_point() {
        let c = [C64::new(0.7, -0.2)];
        let f = ScaledPoly { coeffs: &c, scale: 1.0 };
        let s = find_critical(&f, &BargmannFock, bf_params(3.0));
        assert_eq!(s.points.len(), 1);
        assert!(s.points[0].z.norm() < 1e-12);
        assert_eq!(s.points[0].index, -1);
    }

    #[test]
    fn identity_is_degenerate() {
        let c = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let f = ScaledPoly { coeffs: &c, scale: 1.0 };
        let s = find_critical(&f, &BargmannFock, bf_params(3.0));
        assert!(s.points.is_empty());
        assert!(s.degenerate);
    }

    #[test]
    fn fubini_study_constant() {
        let c = [C64::new(1.3, 0.4)];
        let f = ScaledPoly { coeffs: &c, scale: 1.0 };
        let params = SearchParams {
            radius: 1.0,
            spacing: 0.05,
            margin: 0.1,
            escape_radius: 2.0,
        };
        let s = find_critical(&f, &FubiniStudy { n: 5.0 }, params);
        assert_eq!(s.points.len(), 1);
        assert!(s.points[0].z.norm() < 1e-12);
    }

    #[test]
    fn fubini_study_derivatives_match_finite_differences() {
        let conn = FubiniStudy { n: 7.0 };
        let z = C64::new(0.3, -0.8);
        let (_, dz, dzb) = conn.phi(z);
        let h = 1e-6;
        let dx = (conn.phi(z + h).0 - conn.phi(z - h).0) / (2.0 * h);
        let dy = (conn.phi(z + C64::new(0.0, h)).0 - conn.phi(z - C64::new(0.0, h)).0) / (2.0 * h);
        let want_dz = (dx - C64::i() * dy) * 0.5;
        let want_dzb = (dx + C64::i() * dy) * 0.5;
        assert!((dz - want_dz).norm() < 1e-8);
        assert!((dzb - want_dzb).norm() < 1e-8);
    }

    #[test]
    fn dedupe_merges_close_points() {
        let p = |x: f64| CriticalPoint {
            z: C64::new(x, 0.0),
            index: 1,
        };
        let mut v = vec![p(1.0), p(0.0), p(1.0 + 1e-8), p(0.5)];
        dedupe(&mut v);
        assert_eq!(v.len(), 3);
    }
}

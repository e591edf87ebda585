//! Dyadic adaptive quadrature over parameter rectangles in 1-3 dimensions.
//!
//! One engine serves every integral in the crate: a cell is estimated by the
//! midpoint rule, compared against the sum over its 2^d children, refined
//! where the two levels disagree, and Richardson-extrapolated where they
//! agree. Region geometry and radial substitutions live with the callers; by
//! the time the engine sees an integrand it is a plain function on a box.

use crate::{Error, Result};

/// Controls every integral's error budget.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureConfig {
    /// Integrals over unbounded supports are truncated at this radius and the
    /// remainder is covered by an analytic tail bound where one exists.
    pub truncation_radius: f64,
    /// Cells per axis of the initial coarse pass.
    pub base_subdivision: u32,
    /// Maximum dyadic refinement depth below a coarse cell.
    pub max_depth: u32,
    /// Relative error target.
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            truncation_radius: 64.0,
            base_subdivision: 4,
            max_depth: 26,
            rel_tol: 1e-6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 0.1) {
            return Err(Error::BadInput("rel_tol must lie in (0, 0.1]".into()));
        }
        if self.truncation_radius < 1.0 {
            return Err(Error::BadInput("truncation_radius must be >= 1".into()));
        }
        if self.base_subdivision < 2 {
            return Err(Error::BadInput("base_subdivision must be >= 2".into()));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }
}

/// Quadrature value with an error estimate and a convergence flag.
#[derive(Clone, Copy, Debug, Default)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
    pub converged: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            err: 0.0,
            converged: true,
        }
    }

    pub fn merged(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            err: self.err + other.err,
            converged: self.converged && other.converged,
        }
    }
}

/// Accumulator abstraction so scalar and small-vector integrands share the
/// engine (the kernel map integrates all components in one sweep).
pub trait Accum: Copy + Send {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn abs_norm(self) -> f64;
}

impl Accum for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs_norm(self) -> f64 {
        self.abs()
    }
}

/// Fixed-width vector accumulator (components beyond the active dimension
/// stay zero and are harmless).
#[derive(Clone, Copy, Debug, Default)]
pub struct Vec3Accum(pub [f64; 3]);

impl Accum for Vec3Accum {
    fn zero() -> Self {
        Vec3Accum([0.0; 3])
    }
    fn add(self, other: Self) -> Self {
        let mut out = self.0;
        for (a, b) in out.iter_mut().zip(other.0) {
            *a += b;
        }
        Vec3Accum(out)
    }
    fn sub(self, other: Self) -> Self {
        let mut out = self.0;
        for (a, b) in out.iter_mut().zip(other.0) {
            *a -= b;
        }
        Vec3Accum(out)
    }
    fn scale(self, s: f64) -> Self {
        let mut out = self.0;
        for a in out.iter_mut() {
            *a *= s;
        }
        Vec3Accum(out)
    }
    fn abs_norm(self) -> f64 {
        self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

#[derive(Clone, Copy)]
struct Cell {
    lo: [f64; 3],
    hi: [f64; 3],
    depth: u32,
}

impl Cell {
    fn center(&self, dim: usize) -> [f64; 3] {
        let mut c = [0.0; 3];
        for i in 0..dim {
            c[i] = 0.5 * (self.lo[i] + self.hi[i]);
        }
        c
    }

    fn volume(&self, dim: usize) -> f64 {
        let mut v = 1.0;
        for i in 0..dim {
            v *= self.hi[i] - self.lo[i];
        }
        v
    }

    /// Fixed-order tensor midpoint rule: 2 nodes per axis. Also returns the
    /// node-wise absolute sum (scaled by volume) for scale estimation.
    fn rule<A: Accum>(&self, dim: usize, f: &(dyn Fn(&[f64]) -> A + Sync)) -> (A, f64) {
        let sub = 1usize << dim;
        let w = self.volume(dim) / sub as f64;
        let mut acc = A::zero();
        let mut abs = 0.0f64;
        for mask in 0..sub {
            let mut p = [0.0; 3];
            for i in 0..dim {
                let q = if mask & (1 << i) != 0 { 0.75 } else { 0.25 };
                p[i] = self.lo[i] + q * (self.hi[i] - self.lo[i]);
            }
            let v = f(&p[..dim]);
            abs += v.abs_norm() * w;
            acc = acc.add(v.scale(w));
        }
        (acc, abs)
    }

    fn children(&self, dim: usize) -> Vec<Cell> {
        let c = self.center(dim);
        let mut out = Vec::with_capacity(1 << dim);
        for mask in 0..(1usize << dim) {
            let mut lo = self.lo;
            let mut hi = self.hi;
            for i in 0..dim {
                if mask & (1 << i) != 0 {
                    lo[i] = c[i];
                } else {
                    hi[i] = c[i];
                }
            }
            out.push(Cell {
                lo,
                hi,
                depth: self.depth + 1,
            });
        }
        out
    }
}

/// Result of a generic adaptive integral.
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveResult<A> {
    pub value: A,
    pub err: f64,
    pub converged: bool,
}

/// Integrate `f` over the rectangle `[lo, hi]` in `dim` parameters.
///
/// `abs_floor` sets the scale below which relative accuracy is not chased;
/// pass a natural magnitude for the problem (total mass, 1.0, ...) or 0 to
/// let the engine find its own scale.
pub fn adaptive<A: Accum>(
    dim: usize,
    lo: &[f64],
    hi: &[f64],
    f: &(dyn Fn(&[f64]) -> A + Sync),
    cfg: &QuadratureConfig,
    abs_floor: f64,
) -> AdaptiveResult<A> {
    let (result, scale_used) = adaptive_pass(dim, lo, hi, f, cfg, abs_floor);
    // The coarse pass can grossly underestimate the scale when the integrand
    // lives in a thin window; one retry with the observed magnitude restores
    // a meaningful tolerance.
    let observed = result.value.abs_norm() + result.err;
    if observed > 10.0 * scale_used && scale_used >= 0.0 {
        let (retry, _) = adaptive_pass(dim, lo, hi, f, cfg, observed.max(abs_floor));
        return retry;
    }
    result
}

fn adaptive_pass<A: Accum>(
    dim: usize,
    lo: &[f64],
    hi: &[f64],
    f: &(dyn Fn(&[f64]) -> A + Sync),
    cfg: &QuadratureConfig,
    abs_floor: f64,
) -> (AdaptiveResult<A>, f64) {
    debug_assert!((1..=3).contains(&dim));
    let mut lo3 = [0.0; 3];
    let mut hi3 = [0.0; 3];
    lo3[..dim].copy_from_slice(lo);
    hi3[..dim].copy_from_slice(hi);
    if (0..dim).any(|i| !(hi3[i] > lo3[i])) {
        return (
            AdaptiveResult {
                value: A::zero(),
                err: 0.0,
                converged: true,
            },
            0.0,
        );
    }

    // Coarse pass: base_subdivision cells per axis give the scale estimate.
    let nsub = cfg.base_subdivision as usize;
    let mut coarse: Vec<Cell> = Vec::new();
    let mut idx = [0usize; 3];
    loop {
        let mut clo = [0.0; 3];
        let mut chi = [0.0; 3];
        for i in 0..dim {
            let w = (hi3[i] - lo3[i]) / nsub as f64;
            clo[i] = lo3[i] + idx[i] as f64 * w;
            chi[i] = clo[i] + w;
        }
        coarse.push(Cell {
            lo: clo,
            hi: chi,
            depth: 0,
        });
        // odometer increment
        let mut d = 0;
        loop {
            if d == dim {
                break;
            }
            idx[d] += 1;
            if idx[d] < nsub {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dim {
            break;
        }
    }

    let mut scale = 0.0f64;
    let mut stack: Vec<(Cell, A)> = Vec::with_capacity(coarse.len());
    for cell in &coarse {
        let (v, abs) = cell.rule(dim, f);
        scale += abs;
        stack.push((*cell, v));
    }
    // Safety factor: two-level error estimates run a small constant under
    // the truth on kink cells, and kink errors do not cancel.
    let scale_used = scale.max(abs_floor);
    let tol_total = 0.25 * cfg.rel_tol * scale_used;
    let total_volume: f64 = coarse.iter().map(|c| c.volume(dim)).sum();

    let min_depth = 1u32;
    let mut value = A::zero();
    let mut err = 0.0f64;
    let mut converged = true;
    let mut work: Vec<(Cell, A, f64)> = stack
        .into_iter()
        .map(|(c, v)| (c, v, f64::INFINITY))
        .collect();

    while let Some((cell, est1, parent_dis)) = work.pop() {
        let children = cell.children(dim);
        let mut est2 = A::zero();
        let mut child_vals: Vec<A> = Vec::with_capacity(children.len());
        for ch in &children {
            let (v, _) = ch.rule(dim, f);
            est2 = est2.add(v);
            child_vals.push(v);
        }
        let disagreement = est2.sub(est1).abs_norm();
        // The reported cell value is Richardson-extrapolated; when the
        // disagreement contracted from the parent the way a smooth cell
        // would, trust the extrapolation for an extra order. Kinks and
        // discontinuities do not contract, and get no trust.
        let smooth = disagreement * 3.0 <= parent_dis;
        let err_est = if smooth {
            disagreement / 10.0
        } else {
            disagreement / 2.0
        };
        // Absolute budget proportional to the cell's volume share, plus a
        // local relative criterion so thin-window integrands converge too.
        let tol_cell = tol_total * (cell.volume(dim) / total_volume).max(1e-300)
            + 0.0625 * cfg.rel_tol * est2.abs_norm();
        if cell.depth >= min_depth && err_est <= tol_cell {
            value = value.add(est2).add(est2.sub(est1).scale(1.0 / 3.0));
            err += err_est;
        } else if cell.depth >= cfg.max_depth {
            value = value.add(est2);
            err += disagreement;
            converged = false;
        } else {
            for (ch, v) in children.into_iter().zip(child_vals) {
                work.push((ch, v, disagreement));
            }
        }
    }

    (
        AdaptiveResult {
            value,
            err,
            converged,
        },
        scale_used,
    )
}

/// Scalar convenience wrapper returning an [`Estimate`].
pub fn integrate(
    dim: usize,
    lo: &[f64],
    hi: &[f64],
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    cfg: &QuadratureConfig,
    abs_floor: f64,
) -> Estimate {
    let r = adaptive::<f64>(dim, lo, hi, f, cfg, abs_floor);
    Estimate {
        value: r.value,
        err: r.err,
        converged: r.converged,
    }
}

/// Composite midpoint rule over [a, b] with `n` nodes (no adaptivity).
pub fn midpoint_1d(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        acc += f(a + (i as f64 + 0.5) * h);
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tol: f64) -> QuadratureConfig {
        QuadratureConfig::default().with_rel_tol(tol)
    }

    #[test]
    fn polynomial_1d() {
        let e = integrate(1, &[0.0], &[1.0], &|x| x[0] * x[0], &cfg(1e-10), 1.0);
        assert!(e.converged);
        assert!((e.value - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn oscillatory_1d() {
        let e = integrate(1, &[0.0], &[3.1], &|x| (10.0 * x[0]).sin(), &cfg(1e-9), 1.0);
        let exact = (1.0 - (31.0f64).cos()) / 10.0;
        assert!(e.converged);
        assert!((e.value - exact).abs() < 1e-7);
    }

    #[test]
    fn gaussian_2d() {
        let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp();
        let e = integrate(2, &[-6.0, -6.0], &[6.0, 6.0], &f, &cfg(1e-7), 1.0);
        assert!(e.converged);
        assert!((e.value - std::f64::consts::PI).abs() < 1e-5);
    }

    #[test]
    fn discontinuous_indicator_converges_slowly_but_surely() {
        // quarter disk indicator over the unit square = pi/4
        let f = |x: &[f64]| {
            if x[0] * x[0] + x[1] * x[1] <= 1.0 {
                1.0
            } else {
                0.0
            }
        };
        let mut c = cfg(1e-4);
        c.max_depth = 16;
        let e = integrate(2, &[0.0, 0.0], &[1.0, 1.0], &f, &c, 1.0);
        assert!((e.value - std::f64::consts::FRAC_PI_4).abs() < 2e-3);
    }

    #[test]
    fn zero_integrand_is_instant() {
        let e = integrate(2, &[0.0, 0.0], &[1.0, 1.0], &|_| 0.0, &cfg(1e-12), 1.0);
        assert!(e.converged);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn vector_accumulator_integrates_components() {
        let f = |x: &[f64]| Vec3Accum([1.0, x[0], x[0] * x[0]]);
        let r = adaptive(1, &[0.0], &[2.0], &f, &cfg(1e-9), 1.0);
        assert!((r.value.0[0] - 2.0).abs() < 1e-8);
        assert!((r.value.0[1] - 2.0).abs() < 1e-8);
        assert!((r.value.0[2] - 8.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn budget_flag_reported() {
        // oscillation far below the resolvable scale at depth 3
        let mut c = cfg(1e-12);
        c.max_depth = 3;
        let f = |x: &[f64]| (1000.0 * x[0]).sin();
        let e = integrate(1, &[0.0], &[1.0], &f, &c, 1.0);
        assert!(!e.converged);
        let full = integrate(1, &[0.0], &[1.0], &f, &cfg(1e-10), 1.0);
        assert!(full.converged);
        assert!((full.value - (1.0 - (1000.0f64).cos()) / 1000.0).abs() < 1e-8);
    }
}

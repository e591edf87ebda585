//! The kernel mapping: integration of the normalized difference kernel
//! against a measure with adequate decay.
//!
//! `apply` evaluates the map itself; `apply_diff` evaluates a difference of
//! two map values as a single integral, which is what finite-difference
//! consumers should use (quadrature noise on two separate evaluations would
//! be amplified by 1/h). The convex potential whose gradient the map is, the
//! Riesz potentials, the operator-norm finite differences, and the angle
//! condition probe all live here too.

use crate::geom;
use crate::measure::{decay_check, integrate_kernel, DecayVerdict, MeasureSpec};
use crate::quad::{Estimate, QuadratureConfig, Vec3Accum};
use crate::region::Region;
use crate::{Error, Point, Result};

/// Evaluator for the kernel map of a measure; construction verifies the
/// decay requirement once.
#[derive(Clone, Debug)]
pub struct KernelMap {
    mu: MeasureSpec,
    cfg: QuadratureConfig,
    /// Radius of a ball around the origin containing the support, if compact.
    support_radius: Option<f64>,
}

impl KernelMap {
    pub fn new(mu: MeasureSpec, cfg: QuadratureConfig) -> Result<Self> {
        mu.validate()?;
        cfg.validate()?;
        let decay = decay_check(&mu, &cfg)?;
        if decay.verdict != DecayVerdict::Finite {
            return Err(Error::DecayViolated);
        }
        let support_radius = match &mu {
            MeasureSpec::UniformBall { center, radius, .. } => Some(center.norm() + radius),
            MeasureSpec::Grid(g) => {
                let dim = g.dim();
                let mut r: f64 = 0.0;
                for d in 0..dim {
                    let lo = g.origin.get(d);
                    let hi = lo + g.shape[d] as f64 * g.cell;
                    r = r.max(lo.abs().max(hi.abs()));
                }
                Some(r * (dim as f64).sqrt())
            }
            _ => None,
        };
        Ok(KernelMap {
            mu,
            cfg,
            support_radius,
        })
    }

    pub fn measure(&self) -> &MeasureSpec {
        &self.mu
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    /// Integration region and the decay-tail factor left outside it.
    fn effective_region(&self, reach: f64) -> (Region, f64) {
        let n = self.dim();
        match self.support_radius {
            Some(s) => (
                Region::Ball {
                    center: Point::zero(n),
                    radius: s + 1.0,
                },
                0.0,
            ),
            None => {
                let radius = self.cfg.truncation_radius.max(4.0 * reach).max(4.0);
                let tail = self.mu.decay_tail_bound(radius).unwrap_or(f64::INFINITY);
                (
                    Region::Ball {
                        center: Point::zero(n),
                        radius,
                    },
                    tail,
                )
            }
        }
    }

    /// The map value: one half of the integral of the sum of the unit vector
    /// from z toward x and the unit vector from 0 toward z.
    pub fn apply(&self, x: &Point) -> Result<MapValue> {
        let n = self.dim();
        if !x.is_finite() {
            return Err(Error::BadInput("evaluation point must be finite".into()));
        }
        let (region, tail) = self.effective_region(x.norm());
        let kernel = |z: &Point| -> Vec3Accum {
            let mut out = [0.0; 3];
            let dxz = x.sub(z);
            let nxz = dxz.norm();
            let nz = z.norm();
            for (i, o) in out.iter_mut().enumerate().take(n) {
                let mut k = 0.0;
                if nxz > 1e-300 {
                    k += dxz.get(i) / nxz;
                }
                if nz > 1e-300 {
                    k += z.get(i) / nz;
                }
                *o = 0.5 * k;
            }
            Vec3Accum(out)
        };
        let r = integrate_kernel(
            &self.mu,
            &region,
            &kernel,
            None,
            &[*x, Point::zero(n)],
            &self.cfg,
        )?;
        let mut coords = [0.0; 3];
        coords[..n].copy_from_slice(&r.value.0[..n]);
        Ok(MapValue {
            value: Point::new(&coords[..n]),
            err: r.err + 2.0 * x.norm() * tail,
            converged: r.converged && tail.is_finite(),
        })
    }

    /// `f(a) - f(b)` as a single integral of the unit-vector difference.
    pub fn apply_diff(&self, a: &Point, b: &Point) -> Result<MapValue> {
        let n = self.dim();
        let (region, tail) = self.effective_region(a.norm().max(b.norm()));
        let kernel = |z: &Point| -> Vec3Accum {
            let mut out = [0.0; 3];
            let da = a.sub(z);
            let db = b.sub(z);
            let na = da.norm();
            let nb = db.norm();
            if na > 1e-300 && nb > 1e-300 {
                for (i, o) in out.iter_mut().enumerate().take(n) {
                    *o = 0.5 * (da.get(i) / na - db.get(i) / nb);
                }
            }
            Vec3Accum(out)
        };
        let r = integrate_kernel(&self.mu, &region, &kernel, None, &[*a, *b], &self.cfg)?;
        let mut coords = [0.0; 3];
        coords[..n].copy_from_slice(&r.value.0[..n]);
        Ok(MapValue {
            value: Point::new(&coords[..n]),
            err: r.err + 2.0 * a.dist(b) * tail,
            converged: r.converged && tail.is_finite(),
        })
    }

    /// The convex potential whose gradient is the map: half the integral of
    /// |x-z| - |z| + <x, z/|z|>. (The half matches the kernel's half, so the
    /// gradient identity holds exactly.)
    pub fn potential(&self, x: &Point) -> Result<Estimate> {
        let n = self.dim();
        let (region, tail) = self.effective_region(x.norm());
        let kernel = |z: &Point| -> f64 {
            let nz = z.norm();
            let mut v = x.dist(z) - nz;
            if nz > 1e-300 {
                v += x.dot(z) / nz;
            }
            0.5 * v
        };
        let r = integrate_kernel(
            &self.mu,
            &region,
            &kernel,
            None,
            &[*x, Point::zero(n)],
            &self.cfg,
        )?;
        Ok(Estimate {
            value: r.value,
            err: r.err + 2.0 * x.norm() * (x.norm() + 1.0) * tail,
            converged: r.converged && tail.is_finite(),
        })
    }

    /// `v(a) - v(b)` as a single integral (for difference quotients).
    pub fn potential_diff(&self, a: &Point, b: &Point) -> Result<Estimate> {
        let n = self.dim();
        let (region, tail) = self.effective_region(a.norm().max(b.norm()));
        let d = a.sub(b);
        let kernel = |z: &Point| -> f64 {
            let nz = z.norm();
            let mut v = a.dist(z) - b.dist(z);
            if nz > 1e-300 {
                v += d.dot(z) / nz;
            }
            0.5 * v
        };
        let r = integrate_kernel(
            &self.mu,
            &region,
            &kernel,
            None,
            &[*a, *b, Point::zero(n)],
            &self.cfg,
        )?;
        let reach = a.norm().max(b.norm()) + 1.0;
        Ok(Estimate {
            value: r.value,
            err: r.err + 2.0 * d.norm() * reach * tail,
            converged: r.converged && tail.is_finite(),
        })
    }

    /// Operator norm of the central-difference derivative matrix at `x` with
    /// step `h`.
    pub fn jacobian_norm(&self, x: &Point, h: f64) -> Result<f64> {
        let n = self.dim();
        if !(h > 0.0) {
            return Err(Error::BadInput("step must be positive".into()));
        }
        let mut cols: Vec<Point> = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = Point::zero(n);
            e.set(j, h);
            let diff = self.apply_diff(&x.add(&e), &x.sub(&e))?;
            cols.push(diff.value.scale(1.0 / (2.0 * h)));
        }
        Ok(operator_norm(&cols))
    }

    /// Jacobian estimate with the two-step stability filter: `None` when the
    /// estimates at steps h and h/2 disagree by more than 10% (the map is
    /// only almost-everywhere differentiable, so unstable points are skipped
    /// rather than reported).
    pub fn jacobian_norm_filtered(&self, x: &Point, h: f64) -> Result<Option<f64>> {
        let full = self.jacobian_norm(x, h)?;
        let half = self.jacobian_norm(x, h / 2.0)?;
        if (full - half).abs() > 0.10 * full.abs().max(half.abs()) {
            return Ok(None);
        }
        Ok(Some(half))
    }
}

/// A map evaluation together with its quadrature error bound.
#[derive(Clone, Copy, Debug)]
pub struct MapValue {
    pub value: Point,
    pub err: f64,
    pub converged: bool,
}

/// Largest singular value of the matrix with the given columns (n <= 3),
/// via the symmetric eigenproblem of the Gram matrix.
pub fn operator_norm(cols: &[Point]) -> f64 {
    let n = cols.len();
    let mut g = [[0.0f64; 3]; 3];
    for (i, ci) in cols.iter().enumerate() {
        for (j, cj) in cols.iter().enumerate() {
            g[i][j] = ci.dot(cj);
        }
    }
    match n {
        1 => g[0][0].max(0.0).sqrt(),
        2 => {
            let (a, b, c) = (g[0][0], g[0][1], g[1][1]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            (mid + rad).max(0.0).sqrt()
        }
        3 => {
            // cyclic Jacobi on the 3x3 Gram matrix
            let mut m = g;
            for _sweep in 0..20 {
                let mut off = 0.0;
                for p in 0..2 {
                    for q in (p + 1)..3 {
                        off += m[p][q] * m[p][q];
                        if m[p][q].abs() < 1e-300 {
                            continue;
                        }
                        let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for r in 0..3 {
                            let (mrp, mrq) = (m[r][p], m[r][q]);
                            m[r][p] = c * mrp - s * mrq;
                            m[r][q] = s * mrp + c * mrq;
                        }
                        for r in 0..3 {
                            let (mpr, mqr) = (m[p][r], m[q][r]);
                            m[p][r] = c * mpr - s * mqr;
                            m[q][r] = s * mpr + c * mqr;
                        }
                    }
                }
                if off < 1e-28 {
                    break;
                }
            }
            m[0][0].max(m[1][1]).max(m[2][2]).max(0.0).sqrt()
        }
        _ => unreachable!(),
    }
}

/// Riesz potential of order `gamma` at `x`, integrated over `region` only.
pub fn riesz_potential_over(
    mu: &MeasureSpec,
    region: &Region,
    gamma: f64,
    x: &Point,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    let n = mu.dim();
    if !(gamma > 0.0 && gamma < n as f64) {
        return Err(Error::BadInput("order must lie in (0, n)".into()));
    }
    let expo = gamma - n as f64;
    let kernel = |z: &Point| -> f64 {
        let d = x.dist(z);
        if d < 1e-300 {
            0.0
        } else {
            d.powf(expo)
        }
    };
    let r = integrate_kernel(mu, region, &kernel, Some((*x, expo)), &[], cfg)?;
    Ok(Estimate {
        value: r.value,
        err: r.err,
        converged: r.converged,
    })
}

/// Result of a full-space Riesz potential evaluation.
#[derive(Clone, Copy, Debug)]
pub struct RieszValue {
    pub value: f64,
    pub err: f64,
    pub converged: bool,
    /// Outward dyadic shells kept growing instead of stabilizing.
    pub diverged: bool,
}

/// Riesz potential over the whole space: a core ball around `x` plus outward
/// dyadic shells until they stabilize (or visibly diverge).
pub fn riesz_potential(
    mu: &MeasureSpec,
    gamma: f64,
    x: &Point,
    cfg: &QuadratureConfig,
) -> Result<RieszValue> {
    let r0 = cfg.truncation_radius.max(2.0 * x.norm()).max(2.0);
    let core = riesz_potential_over(
        mu,
        &Region::Ball {
            center: *x,
            radius: r0,
        },
        gamma,
        x,
        cfg,
    )?;
    let mut acc = core.value;
    let mut err = core.err;
    let mut converged = core.converged;
    let mut diverged = false;
    let mut prev = f64::INFINITY;
    let mut r_in = r0;
    for _ in 0..12 {
        let shell = Region::Shell {
            center: *x,
            r_in,
            r_out: 2.0 * r_in,
        };
        let s = riesz_potential_over(mu, &shell, gamma, x, cfg)?;
        acc += s.value;
        err += s.err;
        converged &= s.converged;
        if s.value <= cfg.rel_tol * acc.max(1e-300) {
            return Ok(RieszValue {
                value: acc,
                err,
                converged,
                diverged: false,
            });
        }
        if s.value >= prev * 0.999 && s.value > 0.0 {
            diverged = true;
        }
        prev = s.value;
        r_in *= 2.0;
    }
    Ok(RieszValue {
        value: acc,
        err: if diverged { f64::INFINITY } else { err },
        converged: false,
        diverged,
    })
}

/// Ratios controlling the monotonicity angle condition at `x` along a
/// sequence of approach points.
#[derive(Clone, Debug)]
pub struct KappaEstimate {
    /// min over the probed points of (tau^2/l integral) / (tau/l integral).
    pub kappa_hat: f64,
    /// min over the probed points of (tau^2/l integral) / (1/l integral).
    pub c_hat: f64,
    /// (distance, kappa ratio, c ratio) per probe point.
    pub rows: Vec<(f64, f64, f64)>,
}

/// Monotonicity constant predicted by the angle condition: kappa / (2 pi^2).
pub fn delta_prediction(kappa_hat: f64) -> f64 {
    kappa_hat / (2.0 * std::f64::consts::PI * std::f64::consts::PI)
}

fn comparison_region(mu: &MeasureSpec, x: &Point, cfg: &QuadratureConfig) -> Region {
    let n = mu.dim();
    let support_reach = match mu {
        MeasureSpec::UniformBall { center, radius, .. } => center.norm() + radius + 1.0,
        _ => cfg.truncation_radius,
    };
    Region::Ball {
        center: Point::zero(n),
        radius: support_reach.max(4.0 * x.norm()).max(4.0),
    }
}

/// Evaluate the three comparison integrals (tau/l, tau^2/l, 1/l against the
/// measure) for each probe point `y` and return the minima of the ratios.
pub fn kappa_condition_estimate(
    mu: &MeasureSpec,
    x: &Point,
    y_seq: &[Point],
    cfg: &QuadratureConfig,
) -> Result<KappaEstimate> {
    let region = comparison_region(mu, x, cfg);
    let mut rows = Vec::with_capacity(y_seq.len());
    let mut kappa_hat = f64::INFINITY;
    let mut c_hat = f64::INFINITY;
    for y in y_seq {
        let kernel = |z: &Point| -> Vec3Accum {
            let scale = x.norm().max(y.norm()).max(z.norm()).max(1.0);
            if z.dist(x) < 1e-13 * scale || z.dist(y) < 1e-13 * scale {
                return Vec3Accum([0.0; 3]);
            }
            match geom::triangle_stats(x, y, z) {
                Ok(st) => {
                    let inv_l = 1.0 / st.perimeter_l;
                    Vec3Accum([st.tau * inv_l, st.tau * st.tau * inv_l, inv_l])
                }
                Err(_) => Vec3Accum([0.0; 3]),
            }
        };
        let r = integrate_kernel(mu, &region, &kernel, None, &[*x, *y], cfg)?;
        let [i_tau, i_tau2, i_one] = r.value.0;
        let ratio_kappa = if i_tau > 0.0 { i_tau2 / i_tau } else { f64::NAN };
        let ratio_c = if i_one > 0.0 { i_tau2 / i_one } else { f64::NAN };
        rows.push((x.dist(y), ratio_kappa, ratio_c));
        if ratio_kappa.is_finite() {
            kappa_hat = kappa_hat.min(ratio_kappa);
        }
        if ratio_c.is_finite() {
            c_hat = c_hat.min(ratio_c);
        }
    }
    Ok(KappaEstimate {
        kappa_hat,
        c_hat,
        rows,
    })
}

/// Default probe pattern: geometric distances 2^-j for j = 3..=12 over a
/// fixed fan of directions, reporting the minimum over the stabilized tail
/// (j >= 8). A true limit inferior is not computable; the tail minimum is
/// the honest finite proxy.
pub fn kappa_default_probe(
    mu: &MeasureSpec,
    x: &Point,
    cfg: &QuadratureConfig,
) -> Result<KappaEstimate> {
    let n = mu.dim();
    let dirs = probe_directions(n);
    let mut rows_all = Vec::new();
    let mut kappa_hat = f64::INFINITY;
    let mut c_hat = f64::INFINITY;
    for dir in &dirs {
        let y_seq: Vec<Point> = (3..=12)
            .map(|j| x.add(&dir.scale((2.0f64).powi(-j))))
            .collect();
        let est = kappa_condition_estimate(mu, x, &y_seq, cfg)?;
        for (i, row) in est.rows.iter().enumerate() {
            rows_all.push(*row);
            let j = 3 + i as i32;
            if j >= 8 {
                if row.1.is_finite() {
                    kappa_hat = kappa_hat.min(row.1);
                }
                if row.2.is_finite() {
                    c_hat = c_hat.min(row.2);
                }
            }
        }
    }
    Ok(KappaEstimate {
        kappa_hat,
        c_hat,
        rows: rows_all,
    })
}

fn probe_directions(n: usize) -> Vec<Point> {
    match n {
        1 => vec![Point::new(&[1.0]), Point::new(&[-1.0])],
        2 => (0..8)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 4.0;
                Point::new(&[th.cos(), th.sin()])
            })
            .collect(),
        3 => {
            let s = 1.0 / (3.0f64).sqrt();
            vec![
                Point::new(&[1.0, 0.0, 0.0]),
                Point::new(&[-1.0, 0.0, 0.0]),
                Point::new(&[0.0, 1.0, 0.0]),
                Point::new(&[0.0, -1.0, 0.0]),
                Point::new(&[0.0, 0.0, 1.0]),
                Point::new(&[0.0, 0.0, -1.0]),
                Point::new(&[s, s, s]),
                Point::new(&[-s, -s, -s]),
            ]
        }
        _ => unreachable!(),
    }
}

/// The two comparison integrals at a fixed pair (x, y): the integral of
/// tau/l and of tau^2/l against the measure (the difference-quotient bounds
/// are stated in these units).
pub fn difference_quotient_integrals(
    mu: &MeasureSpec,
    x: &Point,
    y: &Point,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let region = comparison_region(mu, x, cfg);
    let kernel = |z: &Point| -> Vec3Accum {
        let scale = x.norm().max(y.norm()).max(z.norm()).max(1.0);
        if z.dist(x) < 1e-13 * scale || z.dist(y) < 1e-13 * scale {
            return Vec3Accum([0.0; 3]);
        }
        match geom::triangle_stats(x, y, z) {
            Ok(st) => {
                let inv_l = 1.0 / st.perimeter_l;
                Vec3Accum([st.tau * inv_l, st.tau * st.tau * inv_l, 0.0])
            }
            Err(_) => Vec3Accum([0.0; 3]),
        }
    };
    let r = integrate_kernel(mu, &region, &kernel, None, &[*x, *y], cfg)?;
    Ok((r.value.0[0], r.value.0[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpec;

    fn cfg(tol: f64) -> QuadratureConfig {
        QuadratureConfig::default().with_rel_tol(tol)
    }

    fn pt(c: &[f64]) -> Point {
        Point::new(c)
    }

    fn disk() -> MeasureSpec {
        MeasureSpec::UniformBall {
            center: pt(&[0.0, 0.0]),
            radius: 1.0,
            density: 1.0,
        }
    }

    #[test]
    fn kernel_map_vanishes_at_origin() {
        for mu in [
            disk(),
            MeasureSpec::GaussianWeight { dim: 2, sigma: 1.0 },
            MeasureSpec::PowerWeight { dim: 2, p: -1.5 },
        ] {
            let map = KernelMap::new(mu, cfg(1e-5)).unwrap();
            let v = map.apply(&pt(&[0.0, 0.0])).unwrap();
            assert!(v.value.norm() < 1e-10, "{:?}", v.value);
        }
    }

    #[test]
    fn decay_gate_rejects_lebesgue() {
        assert!(matches!(
            KernelMap::new(MeasureSpec::lebesgue(2), cfg(1e-4)),
            Err(Error::DecayViolated)
        ));
    }

    #[test]
    fn one_dimensional_map_is_cumulative_mass() {
        let mu = MeasureSpec::UniformBall {
            center: pt(&[0.0]),
            radius: 1.0,
            density: 1.0,
        };
        let map = KernelMap::new(mu, cfg(1e-7)).unwrap();
        for &(x, want) in &[(0.5, 0.5), (-0.25, -0.25), (2.0, 1.0), (-3.0, -1.0)] {
            let v = map.apply(&pt(&[x])).unwrap();
            assert!(
                (v.value.get(0) - want).abs() < 1e-6,
                "x = {x}: {} vs {want}",
                v.value.get(0)
            );
        }
    }

    #[test]
    fn disk_map_matches_polar_grid_oracle() {
        let map = KernelMap::new(disk(), cfg(1e-6)).unwrap();
        let x = pt(&[0.5, 0.0]);
        let v = map.apply(&x).unwrap();
        // dense polar midpoint grid over the disk
        let (nr, nt) = (800usize, 800usize);
        let mut acc = [0.0f64; 2];
        for i in 0..nr {
            let r = (i as f64 + 0.5) / nr as f64;
            for j in 0..nt {
                let th = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / nt as f64;
                let z = pt(&[r * th.cos(), r * th.sin()]);
                let d = x.sub(&z);
                let nd = d.norm();
                let w = r / (nr as f64 * nt as f64) * 2.0 * std::f64::consts::PI;
                for c in 0..2 {
                    acc[c] += 0.5 * (d.get(c) / nd + z.get(c) / r) * w;
                }
            }
        }
        assert!(
            (v.value.get(0) - acc[0]).abs() < 2e-3 * acc[0].abs(),
            "{} vs {}",
            v.value.get(0),
            acc[0]
        );
        // radial symmetry forces the second coordinate toward zero
        assert!(v.value.get(1).abs() < 1e-6);
    }

    #[test]
    fn rotation_equivariance_on_the_disk() {
        let map = KernelMap::new(disk(), cfg(1e-6)).unwrap();
        let x = pt(&[0.3, 0.2]);
        let rot = crate::region::Rotation::planar(0.9);
        let fx = map.apply(&x).unwrap().value;
        let frx = map.apply(&rot.apply(&x)).unwrap().value;
        let rfx = rot.apply(&fx);
        assert!(frx.dist(&rfx) < 1e-5, "{frx:?} vs {rfx:?}");
    }

    #[test]
    fn potential_vanishes_at_origin_and_is_even_for_symmetric_measures() {
        let map = KernelMap::new(disk(), cfg(1e-6)).unwrap();
        let v0 = map.potential(&pt(&[0.0, 0.0])).unwrap();
        assert!(v0.value.abs() < 1e-10);
        let vp = map.potential(&pt(&[0.4, 0.1])).unwrap();
        let vm = map.potential(&pt(&[-0.4, -0.1])).unwrap();
        assert!((vp.value - vm.value).abs() < 1e-5 * vp.value.abs().max(1e-3));
    }

    #[test]
    fn gradient_of_potential_is_the_map() {
        let map = KernelMap::new(disk(), cfg(1e-6)).unwrap();
        let x = pt(&[0.43, -0.17]);
        let f = map.apply(&x).unwrap().value;
        let h = 1e-4;
        for i in 0..2 {
            let mut e = Point::zero(2);
            e.set(i, h);
            let d = map.potential_diff(&x.add(&e), &x.sub(&e)).unwrap().value / (2.0 * h);
            assert!(
                (d - f.get(i)).abs() <= 1e-3 * f.norm().max(1e-6),
                "component {i}: {d} vs {}",
                f.get(i)
            );
        }
    }

    #[test]
    fn riesz_of_disk_at_center() {
        // order 1 at the center of the unit disk: closed form 2*pi
        let v = riesz_potential(&disk(), 1.0, &pt(&[0.0, 0.0]), &cfg(1e-8)).unwrap();
        assert!(!v.diverged);
        assert!(
            (v.value - 2.0 * std::f64::consts::PI).abs() < 1e-6,
            "{}",
            v.value
        );
    }

    #[test]
    fn riesz_far_field_bounds() {
        // mass pi at distance between 4 and 6 from x: value in [pi/6, pi/4]
        let v = riesz_potential(&disk(), 1.0, &pt(&[5.0, 0.0]), &cfg(1e-7)).unwrap();
        assert!(v.value > std::f64::consts::PI / 6.0);
        assert!(v.value < std::f64::consts::PI / 4.0);
    }

    #[test]
    fn riesz_restricted_matches_dense_grid() {
        let mu = MeasureSpec::PowerWeight { dim: 2, p: 0.5 };
        let region = Region::Ball {
            center: pt(&[0.0, 0.0]),
            radius: 1.0,
        };
        let x = pt(&[0.3, 0.1]);
        let v = riesz_potential_over(&mu, &region, 1.5, &x, &cfg(1e-6)).unwrap();
        let (nr, nt) = (1500usize, 1500usize);
        let mut acc = 0.0;
        for i in 0..nr {
            let r = (i as f64 + 0.5) / nr as f64;
            for j in 0..nt {
                let th = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / nt as f64;
                let z = pt(&[r * th.cos(), r * th.sin()]);
                let w = r / (nr as f64 * nt as f64) * 2.0 * std::f64::consts::PI;
                acc += r.sqrt() * x.dist(&z).powf(-0.5) * w;
            }
        }
        assert!(
            (v.value - acc).abs() < 1e-3 * acc,
            "{} vs oracle {acc}",
            v.value
        );
    }

    #[test]
    fn riesz_divergence_detected() {
        // Lebesgue measure in the plane: order-1 potential diverges
        let v =
            riesz_potential(&MeasureSpec::lebesgue(2), 1.0, &pt(&[0.0, 0.0]), &cfg(1e-4)).unwrap();
        assert!(v.diverged);
    }

    #[test]
    fn jacobian_of_one_dimensional_identity_region() {
        let mu = MeasureSpec::UniformBall {
            center: pt(&[0.0]),
            radius: 1.0,
            density: 1.0,
        };
        let map = KernelMap::new(mu, cfg(1e-8)).unwrap();
        let j = map.jacobian_norm(&pt(&[0.0]), 1e-3).unwrap();
        assert!((j - 1.0).abs() < 1e-6, "{j}");
    }

    #[test]
    fn jacobian_decays_far_from_support() {
        let map = KernelMap::new(disk(), cfg(1e-6)).unwrap();
        let mut prev = f64::INFINITY;
        for &d in &[10.0, 100.0, 1000.0] {
            let j = map.jacobian_norm(&pt(&[d, 0.0]), 1e-3 * d).unwrap();
            assert!(j < prev, "at {d}: {j} !< {prev}");
            prev = j;
        }
    }

    #[test]
    fn kappa_probe_on_disk_is_positive_and_stable() {
        let est = kappa_default_probe(&disk(), &pt(&[0.0, 0.0]), &cfg(1e-4)).unwrap();
        assert!(est.kappa_hat > 0.0);
        assert!(est.c_hat > 0.0);
        // by symmetry all directions agree; ratios stay within a tight band
        let finite: Vec<f64> = est
            .rows
            .iter()
            .map(|r| r.1)
            .filter(|v| v.is_finite())
            .collect();
        let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().cloned().fold(0.0f64, f64::max);
        assert!(hi / lo < 1.5, "kappa ratios spread too far: [{lo}, {hi}]");
    }

    #[test]
    fn operator_norm_matches_known_matrices() {
        // columns of diag(1, 4)
        let n = operator_norm(&[pt(&[1.0, 0.0]), pt(&[0.0, 4.0])]);
        assert!((n - 4.0).abs() < 1e-12);
        // rotation has norm 1
        let r = crate::region::Rotation::planar(0.7);
        let n = operator_norm(&[r.axis(0), r.axis(1)]);
        assert!((n - 1.0).abs() < 1e-12);
        // 3x3 diagonal
        let n = operator_norm(&[
            pt(&[2.0, 0.0, 0.0]),
            pt(&[0.0, 5.0, 0.0]),
            pt(&[0.0, 0.0, 3.0]),
        ]);
        assert!((n - 5.0).abs() < 1e-9);
    }
}

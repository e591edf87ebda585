//! Randomized verifiers for the defining inequalities: the monotonicity
//! angle bound, quasisymmetric distortion, isotropic doubling of boxes and
//! segments, face projections, and the clearance geometry of anchor sets.
//!
//! These are falsifiers and constant estimators, not proofs: each check
//! samples from a seeded generator, reports the worst ratio it saw and the
//! witness that produced it, and leaves the verdict reproducible from the
//! seed.

use std::sync::Arc;

use rayon::prelude::*;

use crate::anchor::AnchorSet;
use crate::measure::{fmt_pt, mass, MeasureSpec};
use crate::quad::{midpoint_1d, QuadratureConfig};
use crate::region::{OrientedBox, Region};
use crate::report::{fmt_g17, CheckReport, Verdict};
use crate::sample::{
    log_uniform, random_rotation, trial_rng, uniform_in, uniform_in_region, unit_direction,
};
use crate::singular::RieszProductWeight;
use crate::{Error, Point, Result};

/// A map to be probed, together with the domain on which it is defined.
#[derive(Clone)]
pub struct MapUnderTest {
    evaluator: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
    pub domain: Region,
}

impl std::fmt::Debug for MapUnderTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapUnderTest")
            .field("domain", &self.domain)
            .finish()
    }
}

impl MapUnderTest {
    pub fn new(
        evaluator: impl Fn(&Point) -> Point + Send + Sync + 'static,
        domain: Region,
    ) -> Self {
        MapUnderTest {
            evaluator: Arc::new(evaluator),
            domain,
        }
    }

    pub fn identity(domain: Region) -> Self {
        Self::new(|x: &Point| *x, domain)
    }

    /// Linear map given by the rows of its matrix.
    pub fn linear(rows: Vec<Vec<f64>>, domain: Region) -> Self {
        let dim = rows.len();
        Self::new(
            move |x: &Point| {
                let mut out = [0.0; 3];
                for (i, row) in rows.iter().enumerate() {
                    for (j, m) in row.iter().enumerate() {
                        out[i] += m * x.get(j);
                    }
                }
                Point::new(&out[..dim])
            },
            domain,
        )
    }

    pub fn diagonal(diag: &[f64], domain: Region) -> Self {
        let rows = diag
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut row = vec![0.0; diag.len()];
                row[i] = *d;
                row
            })
            .collect();
        Self::linear(rows, domain)
    }

    /// The radial power map `x -> |x|^p x` (the zero vector maps to zero).
    pub fn radial_power(p: f64, domain: Region) -> Self {
        Self::new(
            move |x: &Point| {
                let r = x.norm();
                if r == 0.0 {
                    *x
                } else {
                    x.scale(r.powf(p))
                }
            },
            domain,
        )
    }

    pub fn eval(&self, x: &Point) -> Point {
        (self.evaluator)(x)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
}

fn domain_scale(domain: &Region) -> f64 {
    let (_, r) = domain.bounding_sphere();
    r.max(1e-9)
}

/// Sample a pair (anchor, anchor + offset) with both endpoints in the domain;
/// anchors uniform, offsets log-uniform in scale and uniform in direction.
fn sample_pair(
    rng: &mut rand_chacha::ChaCha8Rng,
    domain: &Region,
    r_min: f64,
    r_max: f64,
) -> Option<(Point, Point)> {
    let dim = domain.dim();
    for _ in 0..64 {
        let a = uniform_in_region(rng, domain);
        let r = log_uniform(rng, r_min, r_max);
        let u = unit_direction(rng, dim);
        let b = a.add(&u.scale(r));
        if domain.contains(&b) {
            return Some((a, b));
        }
    }
    None
}

#[derive(Clone, Copy, Debug)]
pub struct PairSampling {
    pub trials: u64,
    pub seed: u64,
    /// Offset lengths relative to the domain scale.
    pub rel_scale_min: f64,
    pub rel_scale_max: f64,
}

impl Default for PairSampling {
    fn default() -> Self {
        PairSampling {
            trials: 2000,
            seed: 1,
            rel_scale_min: 1e-3,
            rel_scale_max: 0.5,
        }
    }
}

/// Estimate the monotonicity angle constant: the minimum over sampled pairs
/// of `<F(a) - F(b), a - b> / (|F(a) - F(b)| |a - b|)`.
pub fn delta_monotone_estimate(map: &MapUnderTest, params: &PairSampling) -> Result<CheckReport> {
    let scale = domain_scale(&map.domain);
    let r_min = params.rel_scale_min * scale;
    let r_max = params.rel_scale_max * scale;
    let results: Vec<(u64, Option<(f64, String)>)> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(params.seed, t);
            let Some((a, b)) = sample_pair(&mut rng, &map.domain, r_min, r_max) else {
                return (t, None);
            };
            let fa = map.eval(&a);
            let fb = map.eval(&b);
            let df = fa.sub(&fb);
            let dx = a.sub(&b);
            let nf = df.norm();
            if nf < 1e-12 {
                return (t, None);
            }
            let ratio = df.dot(&dx) / (nf * dx.norm());
            let witness = format!("a = ({}), b = ({})", fmt_pt(&a), fmt_pt(&b));
            (t, Some((ratio, witness)))
        })
        .collect();

    let mut report = CheckReport::new(
        "monotonicity angle: min of <dF, dx> / (|dF| |dx|) over sampled pairs",
        params.seed,
    );
    report.trials = params.trials;
    let mut best = f64::INFINITY;
    let mut any = false;
    for (t, r) in &results {
        if let Some((ratio, witness)) = r {
            any = true;
            report.rows.push((*t, *ratio));
            if *ratio < best {
                best = *ratio;
                report.worst_witness = witness.clone();
            }
        }
    }
    if !any {
        return Err(Error::AllPairsDegenerate);
    }
    report.estimated_constant = best;
    report.verdict = if best > 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// Empirical quasisymmetry modulus on a grid of distance ratios.
#[derive(Clone, Debug)]
pub struct EtaEstimate {
    pub t_grid: Vec<f64>,
    /// Isotonic envelope (nondecreasing, dominates every bin maximum).
    pub eta_values: Vec<f64>,
    /// Raw per-bin maxima before the envelope.
    pub raw_max: Vec<f64>,
    pub samples_per_bin: Vec<u64>,
    /// Witnesses where two sampled points collide in the image.
    pub violations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct EtaSampling {
    pub trials_per_bin: u64,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub rel_scale_min: f64,
    pub rel_scale_max: f64,
}

impl Default for EtaSampling {
    fn default() -> Self {
        EtaSampling {
            trials_per_bin: 400,
            seed: 1,
            t_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            rel_scale_min: 1e-3,
            rel_scale_max: 0.25,
        }
    }
}

/// For each ratio `t` in the grid, the maximum over sampled triples
/// (x, y, z) with |x-z|/|y-z| within 10% of `t` of the image ratio
/// |f(x)-f(z)| / |f(y)-f(z)|, then the monotone upper envelope.
pub fn quasisymmetry_eta_estimate(map: &MapUnderTest, params: &EtaSampling) -> Result<EtaEstimate> {
    let dim = map.dim();
    let scale = domain_scale(&map.domain);
    let bins = params.t_grid.len();
    let total = bins as u64 * params.trials_per_bin;
    let results: Vec<(usize, Option<f64>, Option<String>)> = (0..total)
        .into_par_iter()
        .map(|t| {
            let bin = (t % bins as u64) as usize;
            let target = params.t_grid[bin];
            let mut rng = trial_rng(params.seed, t);
            for _ in 0..64 {
                let z = uniform_in_region(&mut rng, &map.domain);
                let r2 = log_uniform(
                    &mut rng,
                    params.rel_scale_min * scale,
                    params.rel_scale_max * scale / target.max(1.0),
                );
                let jitter = uniform_in(&mut rng, 1.0 / 1.1, 1.1);
                let r1 = target * jitter * r2;
                let u1 = unit_direction(&mut rng, dim);
                let u2 = unit_direction(&mut rng, dim);
                let x = z.add(&u1.scale(r1));
                let y = z.add(&u2.scale(r2));
                if !map.domain.contains(&x) || !map.domain.contains(&y) {
                    continue;
                }
                let fz = map.eval(&z);
                let fx = map.eval(&x);
                let fy = map.eval(&y);
                let den = fy.dist(&fz);
                if den < 1e-14 * scale {
                    return (
                        bin,
                        None,
                        Some(format!(
                            "image collision: y = ({}), z = ({})",
                            fmt_pt(&y),
                            fmt_pt(&z)
                        )),
                    );
                }
                return (bin, Some(fx.dist(&fz) / den), None);
            }
            (bin, None, None)
        })
        .collect();

    let mut raw_max = vec![f64::NEG_INFINITY; bins];
    let mut counts = vec![0u64; bins];
    let mut violations = Vec::new();
    for (bin, ratio, violation) in results {
        if let Some(v) = violation {
            violations.push(v);
        }
        if let Some(r) = ratio {
            counts[bin] += 1;
            if r > raw_max[bin] {
                raw_max[bin] = r;
            }
        }
    }
    // The smallest nondecreasing majorant of the bin maxima: a cumulative
    // maximum. (A least-squares isotonic fit could dip below observed
    // ratios, which the estimate must dominate.)
    let mut eta_values = Vec::with_capacity(bins);
    let mut run = f64::NEG_INFINITY;
    for &m in &raw_max {
        run = run.max(m);
        eta_values.push(run);
    }
    Ok(EtaEstimate {
        t_grid: params.t_grid.clone(),
        eta_values,
        raw_max,
        samples_per_bin: counts,
        violations,
    })
}

#[derive(Clone, Debug)]
pub struct IsotropicParams {
    pub trials: u64,
    pub seed: u64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub aspect_max: f64,
    pub domain: Region,
}

/// Sample congruent box pairs with nonempty intersection and estimate the
/// isotropic doubling constant as the worst mass ratio.
pub fn isotropic_doubling_check(
    mu: &MeasureSpec,
    params: &IsotropicParams,
    cfg: &QuadratureConfig,
) -> Result<CheckReport> {
    if params.aspect_max < 1.0 {
        return Err(Error::BadInput("aspect_max must be >= 1".into()));
    }
    let n = mu.dim();
    let results: Vec<(u64, Option<(f64, String)>, bool)> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(params.seed, t);
            let center = uniform_in_region(&mut rng, &params.domain);
            let rot = random_rotation(&mut rng, n);
            let base = log_uniform(&mut rng, params.scale_min, params.scale_max);
            let mut halves = [0.0; 3];
            for h in halves.iter_mut().take(n) {
                *h = base * log_uniform(&mut rng, 1.0, params.aspect_max);
            }
            let Ok(r1) = OrientedBox::new(center, &halves[..n], rot) else {
                return (t, None, false);
            };
            // congruent partner: rotate about a uniform point of the box,
            // translate up to one diameter, resample until they intersect
            let mut partner = None;
            for _ in 0..128 {
                let mut local = [0.0; 3];
                for (i, l) in local.iter_mut().enumerate().take(n) {
                    *l = uniform_in(&mut rng, -1.0, 1.0) * halves[i];
                }
                let pivot = r1.center.add(&r1.rotation.apply(&Point::new(&local[..n])));
                let q = random_rotation(&mut rng, n);
                let shift =
                    unit_direction(&mut rng, n).scale(uniform_in(&mut rng, 0.0, r1.diameter()));
                // rigid motion: rotate about the pivot by q, then translate
                let new_center = q.apply(&r1.center.sub(&pivot)).add(&pivot).add(&shift);
                let new_rot = compose_rotations(&q, &r1.rotation);
                if let Ok(r2) = OrientedBox::new(new_center, &halves[..n], new_rot) {
                    if r1.intersects(&r2) {
                        partner = Some(r2);
                        break;
                    }
                }
            }
            let Some(r2) = partner else {
                return (t, None, false);
            };
            let m1 = mass(mu, &Region::Box(r1), cfg)
                .map(|e| e.value)
                .unwrap_or(f64::NAN);
            let m2 = mass(mu, &Region::Box(r2), cfg)
                .map(|e| e.value)
                .unwrap_or(f64::NAN);
            let zero = !(m1 > 1e-300 && m2 > 1e-300);
            let ratio = if zero {
                f64::INFINITY
            } else {
                (m1 / m2).max(m2 / m1)
            };
            let witness = format!(
                "box1 = {{ center = ({}), halves = {:?} }}, box2 = {{ center = ({}) }}, masses = ({}, {})",
                fmt_pt(&r1.center),
                &halves[..n],
                fmt_pt(&r2.center),
                fmt_g17(m1),
                fmt_g17(m2)
            );
            (t, Some((ratio, witness)), zero)
        })
        .collect();

    let mut report = CheckReport::new(
        "isotropic doubling: max mass ratio over congruent intersecting boxes",
        params.seed,
    );
    report.trials = params.trials;
    let mut worst = 0.0f64;
    let mut any_zero = false;
    for (t, r, zero) in &results {
        any_zero |= zero;
        if let Some((ratio, witness)) = r {
            report.rows.push((*t, *ratio));
            if *ratio > worst {
                worst = *ratio;
                report.worst_witness = witness.clone();
            }
        }
    }
    report.estimated_constant = worst;
    report.verdict = if any_zero || !worst.is_finite() {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    Ok(report)
}

fn compose_rotations(
    a: &crate::region::Rotation,
    b: &crate::region::Rotation,
) -> crate::region::Rotation {
    let n = a.dim();
    let cols: Vec<Point> = (0..n).map(|j| a.apply(&b.axis(j))).collect();
    crate::region::Rotation::from_columns(&cols).expect("product of rotations")
}

/// Line integral of a continuous weight along `x0 + t v`, `t` in [0,1],
/// with respect to arclength. Composite midpoint with doubling until the
/// Richardson check passes; the oscillatory product weight uses its exact
/// expansion instead (dyadic node-doubling cannot resolve its top frequency).
pub fn segment_integral(
    w: &MeasureSpec,
    x0: &Point,
    v: &Point,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let len = v.norm();
    if let MeasureSpec::RieszProduct { dim, m } = w {
        let weight = RieszProductWeight::new(*dim, *m)?;
        return Ok(weight.segment_mean(x0, v)? * len);
    }
    let f = |t: f64| w.density(&x0.add(&v.scale(t)));
    let mut nodes = 64usize;
    let mut prev = midpoint_1d(&f, 0.0, 1.0, nodes);
    for _ in 0..14 {
        nodes *= 2;
        let next = midpoint_1d(&f, 0.0, 1.0, nodes);
        if (next - prev).abs() <= cfg.rel_tol * next.abs().max(1e-300) {
            return Ok(next * len);
        }
        prev = next;
    }
    Ok(prev * len)
}

#[derive(Clone, Debug)]
pub struct SegmentParams {
    pub trials: u64,
    pub seed: u64,
    pub len_min: f64,
    pub len_max: f64,
    pub domain: Region,
}

/// Worst ratio of line integrals over same-anchor, equal-length segment
/// pairs: the segment form of the isotropic doubling condition.
pub fn segment_integral_check(
    w: &MeasureSpec,
    params: &SegmentParams,
    cfg: &QuadratureConfig,
) -> Result<CheckReport> {
    let n = w.dim();
    let results: Vec<(u64, f64, String)> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(params.seed, t);
            let x0 = uniform_in_region(&mut rng, &params.domain);
            let len = log_uniform(&mut rng, params.len_min, params.len_max);
            let v = unit_direction(&mut rng, n).scale(len);
            let vp = unit_direction(&mut rng, n).scale(len);
            let i1 = segment_integral(w, &x0, &v, cfg).unwrap_or(f64::NAN);
            let i2 = segment_integral(w, &x0, &vp, cfg).unwrap_or(f64::NAN);
            let ratio = if i1 > 0.0 && i2 > 0.0 {
                (i1 / i2).max(i2 / i1)
            } else {
                f64::INFINITY
            };
            let witness = format!(
                "x0 = ({}), v = ({}), v' = ({}), integrals = ({}, {})",
                fmt_pt(&x0),
                fmt_pt(&v),
                fmt_pt(&vp),
                fmt_g17(i1),
                fmt_g17(i2)
            );
            (t, ratio, witness)
        })
        .collect();

    let mut report = CheckReport::new(
        "segment comparability: max ratio of equal-length same-anchor line integrals",
        params.seed,
    );
    report.trials = params.trials;
    let mut worst = 0.0f64;
    for (t, ratio, witness) in &results {
        report.rows.push((*t, *ratio));
        if *ratio > worst {
            worst = *ratio;
            report.worst_witness = witness.clone();
        }
    }
    report.estimated_constant = worst;
    report.verdict = if worst.is_finite() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// Push the measure of an axis-aligned cube onto one face by column masses
/// and compare the resulting cell masses: the pushforward of an isotropic
/// doubling measure must look like Lebesgue measure on the face.
pub fn face_projection_check(
    mu: &MeasureSpec,
    cube: &OrientedBox,
    cells_per_axis: usize,
    cfg: &QuadratureConfig,
) -> Result<CheckReport> {
    let n = mu.dim();
    if n < 2 {
        return Err(Error::BadInput(
            "face projection needs dimension >= 2".into(),
        ));
    }
    if cube.rotation != crate::region::Rotation::identity(n) {
        return Err(Error::BadInput(
            "face projection expects an axis-aligned cube; rotate the measure instead".into(),
        ));
    }
    let k = cells_per_axis;
    let face_dims = n - 1;
    let total_cells = k.pow(face_dims as u32);
    let masses: Vec<f64> = (0..total_cells)
        .into_par_iter()
        .map(|idx| {
            // decompose idx in base k over the first n-1 axes
            let mut rem = idx;
            let mut center = [0.0; 3];
            let mut halves = [0.0; 3];
            for d in 0..face_dims {
                let i = rem % k;
                rem /= k;
                let h = cube.half_lengths[d];
                let w = 2.0 * h / k as f64;
                center[d] = cube.center.get(d) - h + (i as f64 + 0.5) * w;
                halves[d] = w / 2.0;
            }
            center[n - 1] = cube.center.get(n - 1);
            halves[n - 1] = cube.half_lengths[n - 1];
            let column = OrientedBox::axis_aligned(Point::new(&center[..n]), &halves[..n])
                .expect("column box");
            mass(mu, &Region::Box(column), cfg)
                .map(|e| e.value)
                .unwrap_or(f64::NAN)
        })
        .collect();

    let mut report = CheckReport::new(
        "face projection: max/min column-mass ratio over the face partition",
        0,
    );
    report.trials = total_cells as u64;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut lo_idx = 0;
    for (i, m) in masses.iter().enumerate() {
        report.rows.push((i as u64, *m));
        if *m < lo {
            lo = *m;
            lo_idx = i;
        }
        hi = hi.max(*m);
    }
    if !(lo > 1e-300) {
        report.estimated_constant = f64::INFINITY;
        report.worst_witness = format!("column {lo_idx} carries no mass");
        report.verdict = Verdict::Fail;
        return Ok(report);
    }
    report.estimated_constant = hi / lo;
    report.worst_witness = format!(
        "min column {} = {}, max column mass = {}",
        lo_idx,
        fmt_g17(lo),
        fmt_g17(hi)
    );
    report.verdict = Verdict::Pass;
    Ok(report)
}

/// Clearance geometry of a finite anchor set.
#[derive(Clone, Debug)]
pub struct UlncReport {
    /// min over anchor pairs of (max clearance along the chord)/|a-b|.
    pub tau_hat: f64,
    /// tau_hat / (2 + 2 tau_hat): the constant promised for arbitrary pairs.
    pub tau_prime: f64,
    pub worst_pair: (Point, Point),
    /// Verification on arbitrary (non-anchor) pairs: observed minimum of
    /// (max clearance)/|a-b| and the failure count against 0.99 tau_prime.
    pub arbitrary_min: f64,
    pub arbitrary_failures: u64,
    pub pairs_checked: u64,
}

/// Clearance along the segment [a, b] sampled at 1024 interior points plus
/// the endpoints (the clearance function is 1-Lipschitz along the segment,
/// so the grid error is |a-b|/1024).
pub fn max_clearance_on_segment(set: &AnchorSet, a: &Point, b: &Point) -> f64 {
    let mut best = 0.0f64;
    const STEPS: usize = 1024;
    for i in 0..=STEPS {
        let t = i as f64 / STEPS as f64;
        let c = a.add(&b.sub(a).scale(t));
        let d = set.dist(&c);
        if d > best {
            best = d;
        }
    }
    best
}

#[derive(Clone, Copy, Debug)]
pub struct UlncParams {
    pub trials: u64,
    pub seed: u64,
    /// Cap on exhaustive pair enumeration; beyond it pairs are sampled.
    pub exhaustive_limit: usize,
}

impl Default for UlncParams {
    fn default() -> Self {
        UlncParams {
            trials: 1000,
            seed: 1,
            exhaustive_limit: 100_000,
        }
    }
}

pub fn ulnc_check(set: &AnchorSet, params: &UlncParams) -> Result<UlncReport> {
    if set.len() < 2 {
        return Err(Error::SetTooSmall);
    }
    let pts = set.points();
    let n_pairs = pts.len() * (pts.len() - 1) / 2;

    let pair_list: Vec<(usize, usize)> = if n_pairs <= params.exhaustive_limit {
        (0..pts.len())
            .flat_map(|i| ((i + 1)..pts.len()).map(move |j| (i, j)))
            .collect()
    } else {
        (0..params.trials)
            .map(|t| {
                let mut rng = trial_rng(params.seed, t);
                let i = (uniform_in(&mut rng, 0.0, pts.len() as f64) as usize).min(pts.len() - 1);
                let mut j =
                    (uniform_in(&mut rng, 0.0, pts.len() as f64) as usize).min(pts.len() - 1);
                if i == j {
                    j = (j + 1) % pts.len();
                }
                (i, j)
            })
            .collect()
    };

    let evals: Vec<(f64, usize, usize)> = pair_list
        .par_iter()
        .map(|&(i, j)| {
            let d = pts[i].dist(&pts[j]);
            let c = max_clearance_on_segment(set, &pts[i], &pts[j]);
            (c / d, i, j)
        })
        .collect();
    let mut tau_hat = f64::INFINITY;
    let mut worst = (pts[0], pts[1]);
    for (ratio, i, j) in evals {
        if ratio < tau_hat {
            tau_hat = ratio;
            worst = (pts[i], pts[j]);
        }
    }
    let tau_prime = tau_hat / (2.0 + 2.0 * tau_hat);

    // Arbitrary pairs: every chord must contain a point with clearance at
    // least tau_prime times the chord length (up to grid discretization).
    let dim = set.dim();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for d in 0..dim {
            lo[d] = lo[d].min(p.get(d));
            hi[d] = hi[d].max(p.get(d));
        }
    }
    let spread = (0..dim)
        .map(|d| hi[d] - lo[d])
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let results: Vec<f64> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(params.seed ^ 0xA5A5_5A5A, t);
            let mut sample_point = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut c = [0.0; 3];
                for (d, ci) in c.iter_mut().enumerate().take(dim) {
                    *ci = uniform_in(rng, lo[d] - 0.25 * spread, hi[d] + 0.25 * spread);
                }
                Point::new(&c[..dim])
            };
            let a = sample_point(&mut rng);
            let mut b = sample_point(&mut rng);
            while a.dist(&b) < 1e-9 * spread {
                b = sample_point(&mut rng);
            }
            max_clearance_on_segment(set, &a, &b) / a.dist(&b)
        })
        .collect();
    let mut arbitrary_min = f64::INFINITY;
    let mut failures = 0u64;
    for r in results {
        arbitrary_min = arbitrary_min.min(r);
        if r < 0.99 * tau_prime {
            failures += 1;
        }
    }
    Ok(UlncReport {
        tau_hat,
        tau_prime,
        worst_pair: worst,
        arbitrary_min,
        arbitrary_failures: failures,
        pairs_checked: pair_list.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchor::four_corner_ifs;

    fn cfg(tol: f64) -> QuadratureConfig {
        QuadratureConfig::default().with_rel_tol(tol)
    }

    fn pt(c: &[f64]) -> Point {
        Point::new(c)
    }

    fn ball(r: f64) -> Region {
        Region::Ball {
            center: pt(&[0.0, 0.0]),
            radius: r,
        }
    }

    #[test]
    fn identity_has_delta_one() {
        let map = MapUnderTest::identity(ball(1.0));
        let rep = delta_monotone_estimate(
            &map,
            &PairSampling {
                trials: 200,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!((rep.estimated_constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_map_matches_directional_oracle() {
        let lambda = 4.0;
        let map = MapUnderTest::diagonal(&[1.0, lambda], ball(1.0));
        let rep = delta_monotone_estimate(
            &map,
            &PairSampling {
                trials: 4000,
                seed: 7,
                ..Default::default()
            },
        )
        .unwrap();
        // oracle: minimize (cos^2 + L sin^2)/sqrt(cos^2 + L^2 sin^2) over angles
        let mut oracle = f64::INFINITY;
        for i in 0..200_000 {
            let th = std::f64::consts::PI * i as f64 / 200_000.0;
            let (s, c) = th.sin_cos();
            let num = c * c + lambda * s * s;
            let den = (c * c + lambda * lambda * s * s).sqrt();
            oracle = oracle.min(num / den);
        }
        assert!((oracle - 0.8).abs() < 1e-9, "oracle {oracle}");
        assert!(
            (rep.estimated_constant - oracle).abs() < 1e-3,
            "sampled {} vs oracle {oracle}",
            rep.estimated_constant
        );
    }

    #[test]
    fn delta_is_conformally_invariant_on_samples() {
        // pre/post rotation by the same rotation and positive scaling leave
        // the sampled angle ratios unchanged
        let rot = crate::region::Rotation::planar(0.77);
        let base = MapUnderTest::diagonal(&[1.0, 3.0], ball(1.0));
        let conj = MapUnderTest::new(
            move |x: &Point| {
                let y = rot.apply(x);
                let fy = Point::new(&[y.get(0), 3.0 * y.get(1)]);
                rot.apply_transpose(&fy).scale(2.5)
            },
            ball(1.0),
        );
        let p = PairSampling {
            trials: 500,
            seed: 3,
            ..Default::default()
        };
        let a = delta_monotone_estimate(&base, &p).unwrap();
        let b = delta_monotone_estimate(&conj, &p).unwrap();
        assert!(
            (a.estimated_constant - b.estimated_constant).abs() < 5e-3,
            "{} vs {}",
            a.estimated_constant,
            b.estimated_constant
        );
    }

    #[test]
    fn radial_power_map_is_monotone() {
        let map = MapUnderTest::radial_power(0.5, ball(1.0));
        let rep = delta_monotone_estimate(
            &map,
            &PairSampling {
                trials: 2000,
                seed: 11,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.estimated_constant > 0.0, "{}", rep.estimated_constant);
    }

    #[test]
    fn eta_of_identity_tracks_t() {
        let map = MapUnderTest::identity(ball(1.0));
        let est = quasisymmetry_eta_estimate(
            &map,
            &EtaSampling {
                trials_per_bin: 200,
                ..Default::default()
            },
        )
        .unwrap();
        for (t, eta) in est.t_grid.iter().zip(&est.eta_values) {
            assert!(*eta <= t * 1.1 + 1e-12, "eta({t}) = {eta}");
            assert!(*eta >= t / 1.1 - 1e-12, "eta({t}) = {eta}");
        }
        // nondecreasing by construction
        for w in est.eta_values.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn eta_of_linear_stretch_is_bounded() {
        let map = MapUnderTest::diagonal(&[1.0, 2.0], ball(1.0));
        let est = quasisymmetry_eta_estimate(
            &map,
            &EtaSampling {
                trials_per_bin: 300,
                seed: 5,
                ..Default::default()
            },
        )
        .unwrap();
        for (t, eta) in est.t_grid.iter().zip(&est.eta_values) {
            assert!(*eta <= 2.0 * t * 1.1, "eta({t}) = {eta}");
            assert!(*eta >= 0.5 * t / 1.1, "eta({t}) = {eta}");
        }
        // eta(1) >= 1 for any map: extremize over equidistant pairs
        let idx = est
            .t_grid
            .iter()
            .position(|t| (*t - 1.0).abs() < 1e-12)
            .unwrap();
        assert!(est.eta_values[idx] >= 1.0 - 1e-9);
    }

    #[test]
    fn constant_weight_is_perfectly_isotropic() {
        let params = IsotropicParams {
            trials: 30,
            seed: 2,
            scale_min: 0.05,
            scale_max: 0.5,
            aspect_max: 4.0,
            domain: ball(1.0),
        };
        let rep = isotropic_doubling_check(&MeasureSpec::lebesgue(2), &params, &cfg(1e-5)).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!(
            rep.estimated_constant <= 1.0 + 2e-5,
            "{}",
            rep.estimated_constant
        );
    }

    #[test]
    fn bounded_weight_ratio_is_bounded_by_oscillation() {
        // the m = 1 cosine product lies in [1/2, 3/2]: ratios stay below 3
        let params = IsotropicParams {
            trials: 25,
            seed: 9,
            scale_min: 0.1,
            scale_max: 1.0,
            aspect_max: 3.0,
            domain: ball(2.0),
        };
        let rep = isotropic_doubling_check(
            &MeasureSpec::RieszProduct { dim: 2, m: 1 },
            &params,
            &cfg(1e-6),
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!(
            rep.estimated_constant <= 3.0 + 1e-3,
            "{}",
            rep.estimated_constant
        );
    }

    #[test]
    fn witness_boxes_show_log_divergence() {
        // thin box through the origin versus an offset congruent partner:
        // the ratio grows like log(1/eps) for the exponent -1 weight
        let mu = MeasureSpec::PowerWeight { dim: 2, p: -1.0 };
        let ratio_at = |eps: f64| -> f64 {
            let r1 = OrientedBox::axis_aligned(pt(&[0.0, 0.0]), &[1.0, eps]).unwrap();
            let r2 = OrientedBox::axis_aligned(pt(&[2.0, 1.0]), &[1.0, eps]).unwrap();
            let m1 = mass(&mu, &Region::Box(r1), &cfg(1e-6)).unwrap().value;
            let m2 = mass(&mu, &Region::Box(r2), &cfg(1e-6)).unwrap().value;
            m1 / m2
        };
        let r_coarse = ratio_at(1e-1);
        let r_fine = ratio_at(1e-3);
        assert!(
            r_fine >= 2.0 * r_coarse,
            "ratio(1e-3) = {r_fine} vs ratio(1e-1) = {r_coarse}"
        );
    }

    #[test]
    fn chained_boxes_obey_the_power_bound() {
        // congruent boxes at distance d: ratio bounded by A^m with
        // m = ceil(d / diam) + 1, using the A from intersecting pairs
        let mu = MeasureSpec::PowerWeight { dim: 2, p: 0.5 };
        let params = IsotropicParams {
            trials: 40,
            seed: 4,
            scale_min: 0.2,
            scale_max: 0.4,
            aspect_max: 2.0,
            domain: ball(1.5),
        };
        let a_hat = isotropic_doubling_check(&mu, &params, &cfg(1e-5))
            .unwrap()
            .estimated_constant;
        let b1 = OrientedBox::axis_aligned(pt(&[0.5, 0.0]), &[0.25, 0.25]).unwrap();
        let b2 = OrientedBox::axis_aligned(pt(&[1.6, 0.3]), &[0.25, 0.25]).unwrap();
        let m1 = mass(&mu, &Region::Box(b1), &cfg(1e-6)).unwrap().value;
        let m2 = mass(&mu, &Region::Box(b2), &cfg(1e-6)).unwrap().value;
        let d = pt(&[0.5, 0.0]).dist(&pt(&[1.6, 0.3])) - b1.diameter();
        let m = (d.max(0.0) / b1.diameter()).ceil() as i32 + 1;
        let bound = a_hat.powi(m) * 1.05;
        let ratio = (m1 / m2).max(m2 / m1);
        assert!(ratio <= bound, "ratio {ratio} vs bound {bound} (m = {m})");
    }

    #[test]
    fn segment_check_constant_weight() {
        let params = SegmentParams {
            trials: 50,
            seed: 3,
            len_min: 0.01,
            len_max: 1.0,
            domain: ball(1.0),
        };
        let rep = segment_integral_check(&MeasureSpec::lebesgue(2), &params, &cfg(1e-6)).unwrap();
        assert!((rep.estimated_constant - 1.0).abs() < 1e-6);
    }

    #[test]
    fn segment_check_distance_weight_matches_dense_oracle() {
        let anchors = AnchorSet::new(vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0])]).unwrap();
        let w = MeasureSpec::DistancePower {
            anchors: Arc::new(anchors.clone()),
            p: 1.0,
        };
        let x0 = pt(&[0.3, 0.4]);
        let v = pt(&[0.5, -0.2]);
        let got = segment_integral(&w, &x0, &v, &cfg(1e-7)).unwrap();
        // dense-sampling oracle
        let nodes = 100_000;
        let mut acc = 0.0;
        for i in 0..nodes {
            let t = (i as f64 + 0.5) / nodes as f64;
            acc += anchors.dist(&x0.add(&v.scale(t)));
        }
        let oracle = acc / nodes as f64 * v.norm();
        assert!((got - oracle).abs() < 1e-5 * oracle, "{got} vs {oracle}");
        // and the check itself stays finite
        let params = SegmentParams {
            trials: 60,
            seed: 6,
            len_min: 0.05,
            len_max: 1.0,
            domain: ball(2.0),
        };
        let rep = segment_integral_check(&w, &params, &cfg(1e-5)).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn segments_and_boxes_are_mutually_consistent() {
        // high-aspect box ratios stay below the chained segment constant
        // c0^(N-1) with N = ceil(2 sqrt(n-1) + 2) = 4 in the plane
        let anchors = AnchorSet::new(vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0])]).unwrap();
        let w = MeasureSpec::DistancePower {
            anchors: Arc::new(anchors),
            p: 1.0,
        };
        let seg_params = SegmentParams {
            trials: 150,
            seed: 12,
            len_min: 0.3,
            len_max: 0.6,
            domain: ball(1.5),
        };
        let c0 = segment_integral_check(&w, &seg_params, &cfg(1e-5))
            .unwrap()
            .estimated_constant;
        let box_params = IsotropicParams {
            trials: 40,
            seed: 13,
            scale_min: 0.03,
            scale_max: 0.06,
            aspect_max: 10.0,
            domain: ball(1.5),
        };
        let a_hat = isotropic_doubling_check(&w, &box_params, &cfg(1e-4))
            .unwrap()
            .estimated_constant;
        assert!(
            a_hat <= c0.powi(3) * 1.5,
            "box constant {a_hat} vs segment bound {}",
            c0.powi(3)
        );
    }

    #[test]
    fn face_projection_of_constant_weight_is_flat() {
        let cube = OrientedBox::axis_aligned(pt(&[0.5, 0.5]), &[0.5, 0.5]).unwrap();
        let rep = face_projection_check(&MeasureSpec::lebesgue(2), &cube, 8, &cfg(1e-6)).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!((rep.estimated_constant - 1.0).abs() < 1e-5);
    }

    #[test]
    fn face_projection_power_weight_matches_column_oracle() {
        let mu = MeasureSpec::PowerWeight { dim: 2, p: 0.5 };
        let cube = OrientedBox::axis_aligned(pt(&[0.5, 0.5]), &[0.5, 0.5]).unwrap();
        let k = 4usize;
        let rep = face_projection_check(&mu, &cube, k, &cfg(1e-6)).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        // dense column sums
        let mut oracle = vec![0.0f64; k];
        let nn = 600usize;
        for (i, o) in oracle.iter_mut().enumerate() {
            let x0 = i as f64 / k as f64;
            for a in 0..nn {
                for b in 0..nn {
                    let x = x0 + (a as f64 + 0.5) / (k * nn) as f64;
                    let y = (b as f64 + 0.5) / nn as f64;
                    *o += (x * x + y * y).sqrt().sqrt();
                }
            }
            *o /= (nn * nn) as f64 * k as f64;
        }
        let want = oracle.iter().cloned().fold(0.0f64, f64::max)
            / oracle.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            (rep.estimated_constant - want).abs() < 1e-3 * want,
            "{} vs {want}",
            rep.estimated_constant
        );
    }

    #[test]
    fn face_projection_fails_on_vanishing_half() {
        // weight supported on half the cube: empty columns exist
        let g = crate::measure::GridMeasure::new(
            pt(&[0.0, 0.0]),
            0.125,
            &[8, 8],
            (0..64)
                .map(|i| if (i / 8) < 4 { 1.0 } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let mu = MeasureSpec::Grid(Arc::new(g));
        let cube = OrientedBox::axis_aligned(pt(&[0.5, 0.5]), &[0.5, 0.5]).unwrap();
        let rep = face_projection_check(&mu, &cube, 4, &cfg(1e-4)).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
    }

    #[test]
    fn two_point_set_has_tau_half() {
        let set = AnchorSet::new(vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0])]).unwrap();
        let rep = ulnc_check(
            &set,
            &UlncParams {
                trials: 200,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((rep.tau_hat - 0.5).abs() < 1e-3, "{}", rep.tau_hat);
        assert!((rep.tau_prime - 0.5 / 3.0).abs() < 1e-3);
        assert_eq!(rep.arbitrary_failures, 0);
    }

    #[test]
    fn collinear_dense_cloud_is_not_ulnc() {
        let pts: Vec<Point> = (0..200).map(|i| pt(&[i as f64 / 199.0, 0.0])).collect();
        let set = AnchorSet::new(pts).unwrap();
        let rep = ulnc_check(
            &set,
            &UlncParams {
                trials: 50,
                exhaustive_limit: 100,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.tau_hat < 0.01, "{}", rep.tau_hat);
    }

    #[test]
    fn four_corner_cantor_has_positive_clearance() {
        let set = AnchorSet::from_ifs(&four_corner_ifs(0.25), 4, 2).unwrap();
        assert_eq!(set.len(), 256);
        let rep = ulnc_check(
            &set,
            &UlncParams {
                trials: 300,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.tau_hat > 0.05, "{}", rep.tau_hat);
        assert_eq!(rep.arbitrary_failures, 0, "min = {}", rep.arbitrary_min);
    }

    #[test]
    fn distance_weight_segment_bounds() {
        // (int_0^1 w dt)^(1/p) within [c |v|, 3 max(dist(x0, A), |v|)] with
        // c = (tau'/2)^(1 + 1/p)
        let set = AnchorSet::from_ifs(&four_corner_ifs(0.25), 3, 2).unwrap();
        let rep = ulnc_check(&set, &UlncParams::default()).unwrap();
        let p = 1.5f64;
        let w = MeasureSpec::DistancePower {
            anchors: Arc::new(set.clone()),
            p,
        };
        let c = (rep.tau_prime / 2.0).powf(1.0 + 1.0 / p);
        let mut rng = trial_rng(77, 0);
        for _ in 0..50 {
            let x0 = pt(&[
                uniform_in(&mut rng, -0.5, 1.5),
                uniform_in(&mut rng, -0.5, 1.5),
            ]);
            let len = log_uniform(&mut rng, 0.05, 2.0);
            let v = unit_direction(&mut rng, 2).scale(len);
            let integral = segment_integral(&w, &x0, &v, &cfg(1e-6)).unwrap() / len;
            let val = integral.powf(1.0 / p);
            let dist = set.dist(&x0);
            assert!(
                val <= 3.0 * dist.max(len) * 1.01,
                "upper: {val} vs {}",
                3.0 * dist.max(len)
            );
            assert!(val >= c * len * 0.99, "lower: {val} vs {}", c * len);
        }
    }
}

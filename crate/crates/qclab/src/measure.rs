//! Measure families and region-mass quadrature.
//!
//! All measures are realized either as densities against Lebesgue measure or
//! as finite grids of cell masses. Region masses and kernel integrals are
//! computed by the adaptive engine over charts aligned with the geometry:
//! polar coordinates centered at a singular point or a support center (with
//! rays clipped exactly against region and support), or plain box coordinates
//! when nothing is radial. A power-law radial substitution absorbs the
//! singular factor so the transformed integrand is bounded.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::anchor::AnchorSet;
use crate::quad::{adaptive, Accum, AdaptiveResult, Estimate, QuadratureConfig};
use crate::region::{subtract_span, OrientedBox, RaySpan, Region};
use crate::report::{fmt_g17, CheckReport, Verdict};
use crate::sample::{log_uniform, trial_rng, uniform_in_region, unit_direction};
use crate::singular::RieszProductWeight;
use crate::{Error, Point, Result};

/// Tagged family of Radon measures with structure the quadrature layer can
/// exploit.
#[derive(Clone, Debug)]
pub enum MeasureSpec {
    /// Constant density on a ball, zero outside.
    UniformBall {
        center: Point,
        radius: f64,
        density: f64,
    },
    /// |x|^p against Lebesgue measure; locally integrable iff p > -n.
    PowerWeight { dim: usize, p: f64 },
    /// exp(-|x|^2 / (2 sigma^2)) against Lebesgue measure.
    GaussianWeight { dim: usize, sigma: f64 },
    /// Finite lacunary cosine product (bounded between (1/2)^m and (3/2)^m).
    RieszProduct { dim: usize, m: u32 },
    /// dist(x, A)^p for a finite anchor cloud A and p > 0.
    DistancePower { anchors: Arc<AnchorSet>, p: f64 },
    /// Restriction of `inner` to the complement of the ball B(0, exclusion).
    Truncated {
        inner: Box<MeasureSpec>,
        exclusion_radius: f64,
    },
    /// Nonnegative cell masses on a regular grid.
    Grid(Arc<GridMeasure>),
}

impl MeasureSpec {
    pub fn lebesgue(dim: usize) -> Self {
        MeasureSpec::PowerWeight { dim, p: 0.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::UniformBall { center, .. } => center.dim(),
            MeasureSpec::PowerWeight { dim, .. }
            | MeasureSpec::GaussianWeight { dim, .. }
            | MeasureSpec::RieszProduct { dim, .. } => *dim,
            MeasureSpec::DistancePower { anchors, .. } => anchors.dim(),
            MeasureSpec::Truncated { inner, .. } => inner.dim(),
            MeasureSpec::Grid(g) => g.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::UniformBall { radius, density, .. } => {
                if !(*radius > 0.0 && *density > 0.0) {
                    return Err(Error::BadInput(
                        "uniform ball needs positive radius and density".into(),
                    ));
                }
            }
            MeasureSpec::PowerWeight { dim, p } => {
                if *p <= -(*dim as f64) {
                    return Err(Error::NonIntegrable { p: *p, n: *dim });
                }
            }
            MeasureSpec::GaussianWeight { sigma, .. } => {
                if !(*sigma > 0.0) {
                    return Err(Error::BadInput("sigma must be positive".into()));
                }
            }
            MeasureSpec::RieszProduct { dim, m } => {
                RieszProductWeight::new(*dim, *m)?;
            }
            MeasureSpec::DistancePower { anchors, p } => {
                if !(*p > 0.0) {
                    return Err(Error::BadInput("distance exponent must be positive".into()));
                }
                if anchors.is_empty() {
                    return Err(Error::SetTooSmall);
                }
            }
            MeasureSpec::Truncated {
                inner,
                exclusion_radius,
            } => {
                if !(*exclusion_radius > 0.0) {
                    return Err(Error::BadInput("exclusion radius must be positive".into()));
                }
                inner.validate()?;
            }
            MeasureSpec::Grid(g) => g.validate()?,
        }
        Ok(())
    }

    /// Density against Lebesgue measure (not meaningful for `Grid`).
    pub fn density(&self, z: &Point) -> f64 {
        match self {
            MeasureSpec::UniformBall {
                center,
                radius,
                density,
            } => {
                if z.dist(center) <= *radius {
                    *density
                } else {
                    0.0
                }
            }
            MeasureSpec::PowerWeight { p, .. } => {
                let r = z.norm();
                if r == 0.0 {
                    if *p > 0.0 {
                        0.0
                    } else if *p == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    r.powf(*p)
                }
            }
            MeasureSpec::GaussianWeight { sigma, .. } => {
                let r2 = z.dot(z);
                (-r2 / (2.0 * sigma * sigma)).exp()
            }
            MeasureSpec::RieszProduct { dim, m } => RieszProductWeight::new(*dim, *m)
                .and_then(|w| w.eval(z))
                .unwrap_or(f64::NAN),
            MeasureSpec::DistancePower { anchors, p } => anchors.dist(z).powf(*p),
            MeasureSpec::Truncated {
                inner,
                exclusion_radius,
            } => {
                if z.norm() > *exclusion_radius {
                    inner.density(z)
                } else {
                    0.0
                }
            }
            MeasureSpec::Grid(_) => f64::NAN,
        }
    }

    /// Exponent `a` such that the density behaves like |z|^a near the origin
    /// (0 when the density is bounded there).
    fn radial_exponent_at_origin(&self) -> f64 {
        match self {
            MeasureSpec::PowerWeight { p, .. } => *p,
            _ => 0.0,
        }
    }

    /// Can rays from `origin` be clipped exactly against the support?
    fn support_spans(&self, origin: &Point, dir: &Point, cap: f64) -> Vec<RaySpan> {
        match self {
            MeasureSpec::UniformBall { center, radius, .. } => Region::Ball {
                center: *center,
                radius: *radius,
            }
            .ray_clip(origin, dir)
            .into_iter()
            .map(|(a, b)| (a, b.min(cap)))
            .filter(|(a, b)| b > a)
            .collect(),
            MeasureSpec::Truncated {
                inner,
                exclusion_radius,
            } => {
                let hole = ray_ball_span(origin, dir, &Point::zero(origin.dim()), *exclusion_radius);
                inner
                    .support_spans(origin, dir, cap)
                    .into_iter()
                    .flat_map(|s| subtract_span(s, hole))
                    .collect()
            }
            _ => vec![(0.0, cap)],
        }
    }

    /// Analytic upper bound on the tail `\int_{|z| > R} |z|^{-1} d mu`,
    /// `None` when the tail is infinite.
    pub fn decay_tail_bound(&self, radius: f64) -> Option<f64> {
        let n = self.dim();
        let omega = sphere_area(n);
        match self {
            MeasureSpec::UniformBall { center, radius: r, .. } => {
                if center.norm() + r <= radius {
                    Some(0.0)
                } else {
                    Some(self.total_mass_hint() / radius)
                }
            }
            MeasureSpec::Grid(g) => {
                // crude but valid: everything beyond R weighted by 1/R
                let mut tail = 0.0;
                for (idx, m) in g.masses.iter().enumerate() {
                    if *m > 0.0 && g.center_of_linear(idx).norm() > radius - g.cell {
                        tail += m / radius;
                    }
                }
                Some(tail)
            }
            MeasureSpec::PowerWeight { dim, p } => {
                let expo = p + *dim as f64 - 1.0;
                if expo < 0.0 {
                    Some(omega * radius.powf(expo) / (-expo))
                } else {
                    None
                }
            }
            MeasureSpec::GaussianWeight { dim, sigma } => {
                let s2 = sigma * sigma;
                Some(
                    omega
                        * radius.powi(*dim as i32 - 3)
                        * s2
                        * (-radius * radius / (2.0 * s2)).exp(),
                )
            }
            MeasureSpec::RieszProduct { .. } => None,
            MeasureSpec::DistancePower { .. } => None,
            MeasureSpec::Truncated { inner, .. } => inner.decay_tail_bound(radius),
        }
    }

    /// Ball containing the support, when one exists.
    fn support_bounding_sphere(&self) -> Option<(Point, f64)> {
        match self {
            MeasureSpec::UniformBall { center, radius, .. } => Some((*center, *radius)),
            MeasureSpec::Grid(g) => {
                let dim = g.dim();
                let mut c = [0.0; 3];
                let mut r2 = 0.0;
                for d in 0..dim {
                    c[d] = g.origin.get(d) + 0.5 * g.shape[d] as f64 * g.cell;
                    let half = 0.5 * g.shape[d] as f64 * g.cell;
                    r2 += half * half;
                }
                Some((Point::new(&c[..dim]), r2.sqrt()))
            }
            _ => None,
        }
    }

    /// Rough total-mass scale used only to seed tolerance floors.
    pub fn total_mass_hint(&self) -> f64 {
        match self {
            MeasureSpec::UniformBall {
                radius, density, ..
            } => density * ball_volume(self.dim(), *radius),
            MeasureSpec::Grid(g) => g.total(),
            _ => 1.0,
        }
    }

    /// Parse the CLI serialization `family:param,param,...`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let (family, params) = match text.split_once(':') {
            Some((f, p)) => (f, p),
            None => (text, ""),
        };
        let nums = |s: &str| -> Result<Vec<f64>> {
            if s.is_empty() {
                return Ok(vec![]);
            }
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::BadInput(format!("bad number in measure spec: {t}")))
                })
                .collect()
        };
        let spec = match family {
            "uniform-ball" => {
                let v = nums(params)?;
                let radius = v.first().copied().unwrap_or(1.0);
                let density = v.get(1).copied().unwrap_or(1.0);
                let center = if v.len() > 2 {
                    if v.len() != 2 + dim {
                        return Err(Error::BadInput(
                            "uniform-ball center needs one coordinate per dimension".into(),
                        ));
                    }
                    Point::new(&v[2..2 + dim])
                } else {
                    Point::zero(dim)
                };
                MeasureSpec::UniformBall {
                    center,
                    radius,
                    density,
                }
            }
            "power" => {
                let v = nums(params)?;
                let p = v.first().copied().ok_or_else(|| {
                    Error::BadInput("power weight needs an exponent, e.g. power:-1".into())
                })?;
                MeasureSpec::PowerWeight { dim, p }
            }
            "lebesgue" => MeasureSpec::lebesgue(dim),
            "gaussian" => {
                let v = nums(params)?;
                MeasureSpec::GaussianWeight {
                    dim,
                    sigma: v.first().copied().unwrap_or(1.0),
                }
            }
            "riesz" => {
                let v = nums(params)?;
                let m = v.first().copied().unwrap_or(1.0) as u32;
                MeasureSpec::RieszProduct { dim, m }
            }
            "dist-power" => {
                let v = nums(params)?;
                let p = v.first().copied().unwrap_or(1.0);
                let depth = v.get(1).copied().unwrap_or(4.0) as usize;
                let ratio = v.get(2).copied().unwrap_or(0.25);
                if dim != 2 {
                    return Err(Error::BadInput(
                        "the built-in four-corner anchor set is planar; use dim 2".into(),
                    ));
                }
                let anchors =
                    AnchorSet::from_ifs(&crate::anchor::four_corner_ifs(ratio), depth, 2)?;
                MeasureSpec::DistancePower {
                    anchors: Arc::new(anchors),
                    p,
                }
            }
            "truncated" => {
                let (r, rest) = params.split_once(',').ok_or_else(|| {
                    Error::BadInput("truncated:RADIUS,inner-spec expected".into())
                })?;
                let radius: f64 = r
                    .trim()
                    .parse()
                    .map_err(|_| Error::BadInput(format!("bad exclusion radius: {r}")))?;
                MeasureSpec::Truncated {
                    inner: Box::new(MeasureSpec::parse(rest, dim)?),
                    exclusion_radius: radius,
                }
            }
            other => {
                return Err(Error::BadInput(format!("unknown measure family: {other}")));
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!(),
    }
}

pub fn ball_volume(n: usize, r: f64) -> f64 {
    match n {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        _ => unreachable!(),
    }
}

fn ray_ball_span(origin: &Point, dir: &Point, center: &Point, radius: f64) -> Option<RaySpan> {
    let spans = Region::Ball {
        center: *center,
        radius,
    }
    .ray_clip(origin, dir);
    spans.first().copied()
}

// ---------------------------------------------------------------------------
// Grid measures
// ---------------------------------------------------------------------------

/// Nonnegative masses on a regular grid of cubical cells. Cell `(i_1,...,i_n)`
/// covers `origin + [i_j h, (i_j + 1) h)` on each axis.
#[derive(Clone, Debug)]
pub struct GridMeasure {
    pub origin: Point,
    pub cell: f64,
    pub shape: [usize; 3],
    pub masses: Vec<f64>,
    dim: usize,
}

impl GridMeasure {
    pub fn new(origin: Point, cell: f64, shape: &[usize], masses: Vec<f64>) -> Result<Self> {
        let dim = origin.dim();
        if shape.len() != dim {
            return Err(Error::BadInput("grid shape/dimension mismatch".into()));
        }
        let mut s = [1usize; 3];
        s[..dim].copy_from_slice(shape);
        let count: usize = shape.iter().product();
        if masses.len() != count {
            return Err(Error::BadInput(format!(
                "grid expects {count} masses, got {}",
                masses.len()
            )));
        }
        let g = GridMeasure {
            origin,
            cell,
            shape: s,
            masses,
            dim,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell > 0.0) {
            return Err(Error::BadInput("grid cell size must be positive".into()));
        }
        if self.masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::BadInput(
                "grid masses must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    fn multi_index(&self, linear: usize) -> [usize; 3] {
        // row-major: first index slowest
        let mut idx = [0usize; 3];
        let mut rem = linear;
        for d in (0..self.dim).rev() {
            idx[d] = rem % self.shape[d];
            rem /= self.shape[d];
        }
        idx
    }

    pub fn center_of_linear(&self, linear: usize) -> Point {
        let idx = self.multi_index(linear);
        let mut c = [0.0; 3];
        for d in 0..self.dim {
            c[d] = self.origin.get(d) + (idx[d] as f64 + 0.5) * self.cell;
        }
        Point::new(&c[..self.dim])
    }

    /// Parse the plain-text format: a header line
    /// `n=<dim> origin=<floats> cell=<float> shape=<ints>`
    /// followed by whitespace-separated cell masses in row-major order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| {
            Error::BadInput("grid file is empty".into())
        })?;
        let mut dim = None;
        let mut origin = None;
        let mut cell = None;
        let mut shape: Option<Vec<usize>> = None;
        for token in header.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::BadInput(format!("bad header token: {token}")))?;
            match key {
                "n" => {
                    dim = Some(value.parse::<usize>().map_err(|_| {
                        Error::BadInput(format!("bad dimension: {value}"))
                    })?)
                }
                "origin" => {
                    let v: std::result::Result<Vec<f64>, _> =
                        value.split(',').map(|t| t.parse::<f64>()).collect();
                    origin = Some(v.map_err(|_| Error::BadInput("bad origin".into()))?);
                }
                "cell" => {
                    cell = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| Error::BadInput("bad cell size".into()))?,
                    )
                }
                "shape" => {
                    let v: std::result::Result<Vec<usize>, _> =
                        value.split(',').map(|t| t.parse::<usize>()).collect();
                    shape = Some(v.map_err(|_| Error::BadInput("bad shape".into()))?);
                }
                other => {
                    return Err(Error::BadInput(format!("unknown header key: {other}")));
                }
            }
        }
        let dim = dim.ok_or_else(|| Error::BadInput("header needs n=".into()))?;
        let origin = origin.ok_or_else(|| Error::BadInput("header needs origin=".into()))?;
        let cell = cell.ok_or_else(|| Error::BadInput("header needs cell=".into()))?;
        let shape = shape.ok_or_else(|| Error::BadInput("header needs shape=".into()))?;
        if origin.len() != dim || shape.len() != dim {
            return Err(Error::BadInput(
                "origin/shape length must match dimension".into(),
            ));
        }
        let masses: std::result::Result<Vec<f64>, _> = lines
            .flat_map(|l| l.split_whitespace())
            .map(|t| t.parse::<f64>())
            .collect();
        let masses = masses.map_err(|_| Error::BadInput("bad mass value".into()))?;
        GridMeasure::new(Point::new(&origin), cell, &shape, masses)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let origin: Vec<String> = (0..self.dim).map(|d| fmt_g17(self.origin.get(d))).collect();
        let shape: Vec<String> = (0..self.dim).map(|d| self.shape[d].to_string()).collect();
        out.push_str(&format!(
            "n={} origin={} cell={} shape={}\n",
            self.dim,
            origin.join(","),
            fmt_g17(self.cell),
            shape.join(",")
        ));
        for chunk in self.masses.chunks(16) {
            let row: Vec<String> = chunk.iter().map(|m| fmt_g17(*m)).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Mass inside `region`: cell centers decide, cells straddling the
    /// boundary get split once (error is second order in the cell size).
    pub fn mass_in(&self, region: &Region) -> f64 {
        let mut acc = 0.0;
        for (linear, &m) in self.masses.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let c = self.center_of_linear(linear);
            let h = 0.5 * self.cell;
            // classify by corners + center
            let mut inside = 0usize;
            let mut total = 1usize;
            let center_in = region.contains(&c);
            if center_in {
                inside += 1;
            }
            let dim = self.dim;
            total += 1 << dim;
            for mask in 0..(1usize << dim) {
                let mut q = c;
                for d in 0..dim {
                    let s = if mask & (1 << d) != 0 { h } else { -h };
                    q.set(d, c.get(d) + s);
                }
                if region.contains(&q) {
                    inside += 1;
                }
            }
            if inside == total {
                acc += m;
            } else if inside == 0 {
                // entirely outside (by the sampled points)
            } else {
                // boundary cell: split once, sub-centers decide
                let sub = 1usize << dim;
                let mut sub_in = 0usize;
                for mask in 0..sub {
                    let mut q = c;
                    for d in 0..dim {
                        let s = if mask & (1 << d) != 0 { h / 2.0 } else { -h / 2.0 };
                        q.set(d, c.get(d) + s);
                    }
                    if region.contains(&q) {
                        sub_in += 1;
                    }
                }
                acc += m * sub_in as f64 / sub as f64;
            }
        }
        acc
    }

    /// Kernel integral `sum_cells m * f(center)`, with cells near
    /// `split_near` split once for a better local average.
    pub fn kernel_sum<A: Accum>(&self, f: &dyn Fn(&Point) -> A, split_near: Option<&Point>) -> A {
        let mut acc = A::zero();
        let dim = self.dim;
        for (linear, &m) in self.masses.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let c = self.center_of_linear(linear);
            let near = split_near
                .map(|x| c.dist(x) < 2.0 * self.cell)
                .unwrap_or(false);
            if near {
                let sub = 1usize << dim;
                for mask in 0..sub {
                    let mut q = c;
                    for d in 0..dim {
                        let s = if mask & (1 << d) != 0 {
                            self.cell / 4.0
                        } else {
                            -self.cell / 4.0
                        };
                        q.set(d, c.get(d) + s);
                    }
                    acc = acc.add(f(&q).scale(m / sub as f64));
                }
            } else {
                acc = acc.add(f(&c).scale(m));
            }
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Kernel integration over regions
// ---------------------------------------------------------------------------

/// Integrate `kernel` against `mu` over `region`.
///
/// `kernel_singularity = Some((x, a))` marks a point where the kernel behaves
/// like `|z - x|^a`; the polar chart is centered there and a radial power
/// substitution flattens the singular factor. `feature_points` are locations
/// where the kernel has kinks or a small support (finite-difference kernels):
/// radial spans are split at those distances so a feature thinner than the
/// coarse grid cannot be missed.
pub fn integrate_kernel<A: Accum>(
    mu: &MeasureSpec,
    region: &Region,
    kernel: &(dyn Fn(&Point) -> A + Sync),
    kernel_singularity: Option<(Point, f64)>,
    feature_points: &[Point],
    cfg: &QuadratureConfig,
) -> Result<AdaptiveResult<A>> {
    let n = mu.dim();
    if region.dim() != n {
        return Err(Error::BadInput("measure/region dimension mismatch".into()));
    }
    region.validate()?;
    cfg.validate()?;

    if let MeasureSpec::Grid(g) = mu {
        let split = kernel_singularity.map(|(x, _)| x);
        let f = |z: &Point| -> A {
            if region.contains(z) {
                kernel(z)
            } else {
                A::zero()
            }
        };
        let value = g.kernel_sum(&f, split.as_ref());
        return Ok(AdaptiveResult {
            value,
            err: 0.0,
            converged: true,
        });
    }

    // Local integrability gate for power weights.
    if let MeasureSpec::PowerWeight { dim, p } = mu {
        if *p <= -(*dim as f64) {
            let origin = Point::zero(*dim);
            if region.contains(&origin) {
                return Err(Error::NonIntegrable { p: *p, n: *dim });
            }
        }
    }

    // Chart selection.
    let origin_singular = mu.radial_exponent_at_origin() != 0.0;
    let center;
    let mut radial_exponent = 0.0;
    match region {
        Region::ShellMinusCone { center: c, .. } => {
            center = *c;
        }
        _ => {
            if let Some((x, a)) = kernel_singularity {
                center = x;
                radial_exponent += a;
                if origin_singular && x.norm() < 1e-14 {
                    radial_exponent += mu.radial_exponent_at_origin();
                }
            } else if origin_singular {
                center = Point::zero(n);
                radial_exponent += mu.radial_exponent_at_origin();
            } else {
                center = region.center();
            }
        }
    }
    if radial_exponent + n as f64 <= 0.0 {
        return Err(Error::NonIntegrable {
            p: radial_exponent,
            n,
        });
    }

    // Radial breakpoints from the kernel's feature points.
    let mut radial_breaks: Vec<f64> = feature_points
        .iter()
        .map(|p| p.dist(&center))
        .filter(|d| d.is_finite())
        .collect();
    radial_breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radial_breaks.dedup();

    // Box chart: box region, full support, bounded density.
    let use_box = matches!(region, Region::Box(_))
        && !origin_singular
        && kernel_singularity.is_none()
        && matches!(
            mu,
            MeasureSpec::PowerWeight { .. }
                | MeasureSpec::GaussianWeight { .. }
                | MeasureSpec::RieszProduct { .. }
                | MeasureSpec::DistancePower { .. }
        );
    if use_box {
        if let Region::Box(b) = region {
            let vol_jac = b.volume() / (2.0f64).powi(n as i32);
            let f = |u: &[f64]| -> A {
                let z = b.local_to_world(u);
                kernel(&z).scale(mu.density(&z) * vol_jac)
            };
            let lo = [-1.0; 3];
            let hi = [1.0; 3];
            return Ok(adaptive(n, &lo[..n], &hi[..n], &f, cfg, 0.0));
        }
    }

    // Polar chart around `center`.
    let beta = radial_exponent + n as f64;
    let inner_cfg = cfg.with_rel_tol((cfg.rel_tol * 0.5).min(0.05));
    let inner_stats = Mutex::new((0.0f64, true));

    let radial = |dir: &Point| -> A {
        let mut spans = region.ray_clip(&center, dir);
        // clip against the measure's support
        let mut clipped: Vec<RaySpan> = Vec::new();
        for s in spans.drain(..) {
            for sup in mu.support_spans(&center, dir, s.1) {
                let a = s.0.max(sup.0);
                let b = s.1.min(sup.1);
                if b > a {
                    clipped.push((a, b));
                }
            }
        }
        // split spans at radial breakpoints
        if !radial_breaks.is_empty() {
            let mut split: Vec<RaySpan> = Vec::with_capacity(clipped.len() + radial_breaks.len());
            for (r0, r1) in clipped.drain(..) {
                let mut lo = r0;
                for &d in &radial_breaks {
                    if d > lo && d < r1 {
                        split.push((lo, d));
                        lo = d;
                    }
                }
                split.push((lo, r1));
            }
            clipped = split;
        }
        let mut acc = A::zero();
        for (r0, r1) in clipped {
            let u0 = r0.powf(beta) / beta;
            let u1 = r1.powf(beta) / beta;
            let f = |uu: &[f64]| -> A {
                let r = (beta * uu[0]).powf(1.0 / beta);
                let z = center.add(&dir.scale(r));
                // The kernel carries its own |z - x|^a factor and the density
                // its |z|^p factor; r^(n - beta) is what remains of the
                // volume element after the substitution u = r^beta / beta.
                kernel(&z).scale(mu.density(&z) * r.powf(n as f64 - beta))
            };
            let res = adaptive(1, &[u0], &[u1], &f, &inner_cfg, 0.0);
            let mut st = inner_stats.lock().unwrap();
            st.0 += res.err;
            st.1 &= res.converged;
            drop(st);
            acc = acc.add(res.value);
        }
        acc
    };

    // Angular window: when the chart center sees the region (or the support)
    // inside a cone, restrict the angular domain to that cap. Without this a
    // coarse angular grid can miss a thin far-away region entirely.
    let mut window: Option<(Point, f64)> = None;
    if !matches!(region, Region::ShellMinusCone { .. }) {
        let mut consider = |bs: (Point, f64)| {
            let d = bs.0.sub(&center);
            let dist = d.norm();
            if dist > bs.1 && dist > 0.0 {
                let delta = ((bs.1 / dist).asin() * (1.0 + 1e-9) + 1e-12)
                    .min(std::f64::consts::FRAC_PI_2);
                if window.map(|(_, w)| delta < w).unwrap_or(true) {
                    window = Some((d.scale(1.0 / dist), delta));
                }
            }
        };
        consider(region.bounding_sphere());
        if let Some(bs) = mu.support_bounding_sphere() {
            consider(bs);
        }
    }

    let result = match n {
        1 => {
            let plus = radial(&Point::new(&[1.0]));
            let minus = radial(&Point::new(&[-1.0]));
            let (err, converged) = *inner_stats.lock().unwrap();
            AdaptiveResult {
                value: plus.add(minus),
                err,
                converged,
            }
        }
        2 => {
            let theta_boxes: Vec<(f64, f64)> = match region {
                Region::ShellMinusCone {
                    axis_dir, alpha, ..
                } => {
                    let th = axis_dir.get(1).atan2(axis_dir.get(0));
                    vec![
                        (th + alpha, th + std::f64::consts::PI - alpha),
                        (
                            th + std::f64::consts::PI + alpha,
                            th + 2.0 * std::f64::consts::PI - alpha,
                        ),
                    ]
                }
                _ => match &window {
                    Some((dir, delta)) => {
                        let th = dir.get(1).atan2(dir.get(0));
                        vec![(th - delta, th + delta)]
                    }
                    None => vec![(0.0, 2.0 * std::f64::consts::PI)],
                },
            };
            let f = |t: &[f64]| -> A {
                let dir = Point::new(&[t[0].cos(), t[0].sin()]);
                radial(&dir)
            };
            let mut total = AdaptiveResult {
                value: A::zero(),
                err: 0.0,
                converged: true,
            };
            for (a, b) in theta_boxes {
                let r = adaptive(1, &[a], &[b], &f, cfg, 0.0);
                total.value = total.value.add(r.value);
                total.err += r.err;
                total.converged &= r.converged;
            }
            let (ierr, iconv) = *inner_stats.lock().unwrap();
            total.err += ierr;
            total.converged &= iconv;
            total
        }
        3 => {
            let (frame, c_range) = match region {
                Region::ShellMinusCone {
                    axis_dir, alpha, ..
                } => {
                    let axis = axis_dir.scale(1.0 / axis_dir.norm());
                    let ca = alpha.cos();
                    (frame_with_pole(&axis), (-ca, ca))
                }
                _ => match &window {
                    Some((dir, delta)) => (frame_with_pole(dir), (delta.cos(), 1.0)),
                    None => (crate::region::Rotation::identity(3), (-1.0, 1.0)),
                },
            };
            let f = |t: &[f64]| -> A {
                let phi = t[0];
                let c = t[1].clamp(-1.0, 1.0);
                let s = (1.0 - c * c).max(0.0).sqrt();
                let local = Point::new(&[s * phi.cos(), s * phi.sin(), c]);
                let dir = frame.apply(&local);
                radial(&dir)
            };
            let lo = [0.0, c_range.0];
            let hi = [2.0 * std::f64::consts::PI, c_range.1];
            let mut r = adaptive(2, &lo, &hi, &f, cfg, 0.0);
            let (ierr, iconv) = *inner_stats.lock().unwrap();
            r.err += ierr;
            r.converged &= iconv;
            r
        }
        _ => unreachable!(),
    };
    Ok(result)
}

/// Orthonormal frame whose third column is the given unit direction.
fn frame_with_pole(axis: &Point) -> crate::region::Rotation {
    let pick = if axis.get(0).abs() < 0.9 {
        Point::new(&[1.0, 0.0, 0.0])
    } else {
        Point::new(&[0.0, 1.0, 0.0])
    };
    let u = {
        let v = pick.sub(&axis.scale(pick.dot(axis)));
        v.scale(1.0 / v.norm())
    };
    let w = {
        let cx = u.get(1) * axis.get(2) - u.get(2) * axis.get(1);
        let cy = u.get(2) * axis.get(0) - u.get(0) * axis.get(2);
        let cz = u.get(0) * axis.get(1) - u.get(1) * axis.get(0);
        Point::new(&[cx, cy, cz]).scale(-1.0)
    };
    crate::region::Rotation::from_columns(&[u, w, *axis])
        .expect("constructed frame is orthonormal")
}

/// Mass of `region` under `mu` with relative error target `cfg.rel_tol`.
pub fn mass(mu: &MeasureSpec, region: &Region, cfg: &QuadratureConfig) -> Result<Estimate> {
    // Closed form for the oscillatory product weight on boxes: dyadic
    // refinement cannot resolve the top frequency, the expansion can.
    if let (MeasureSpec::RieszProduct { dim, m }, Region::Box(b)) = (mu, region) {
        let w = RieszProductWeight::new(*dim, *m)?;
        return Ok(Estimate::exact(w.box_mass(b)?));
    }
    let r = integrate_kernel::<f64>(mu, region, &|_| 1.0, None, &[], cfg)?;
    Ok(Estimate {
        value: r.value,
        err: r.err,
        converged: r.converged,
    })
}

// ---------------------------------------------------------------------------
// Decay condition
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayVerdict {
    Finite,
    Infinite,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    /// Estimate of the integral of |z|^-1 over 1 < |z| <= truncation radius.
    pub integral_estimate: f64,
    /// Analytic bound on the remainder beyond the truncation radius.
    pub tail_bound: f64,
    pub verdict: DecayVerdict,
    /// (outer radius, shell integral) per dyadic shell.
    pub shells: Vec<(f64, f64)>,
}

/// Check the decay requirement: the integral of |z|^-1 over |z| > 1 must be
/// finite for the kernel map to exist.
pub fn decay_check(mu: &MeasureSpec, cfg: &QuadratureConfig) -> Result<DecayReport> {
    let n = mu.dim();
    let mut shells = Vec::new();
    let mut acc = 0.0;
    let mut r0 = 1.0f64;
    while r0 < cfg.truncation_radius {
        let r1 = (2.0 * r0).min(cfg.truncation_radius);
        let shell = Region::Shell {
            center: Point::zero(n),
            r_in: r0,
            r_out: r1,
        };
        let est =
            integrate_kernel::<f64>(mu, &shell, &|z| 1.0 / z.norm().max(1e-300), None, &[], cfg)?;
        shells.push((r1, est.value));
        acc += est.value;
        r0 = r1;
    }
    let analytic = analytic_decay(mu);
    let (verdict, tail_bound) = match analytic {
        Some(true) => (
            DecayVerdict::Finite,
            mu.decay_tail_bound(cfg.truncation_radius).unwrap_or(0.0),
        ),
        Some(false) => (DecayVerdict::Infinite, f64::INFINITY),
        None => {
            // no analytic rule: fall back to shell stabilization
            let stabilized = shells
                .last()
                .map(|(_, s)| *s <= cfg.rel_tol * acc.max(1e-300))
                .unwrap_or(false);
            if stabilized {
                (DecayVerdict::Finite, shells.last().map(|s| s.1).unwrap_or(0.0))
            } else {
                (DecayVerdict::Inconclusive, f64::NAN)
            }
        }
    };
    Ok(DecayReport {
        integral_estimate: acc,
        tail_bound,
        verdict,
        shells,
    })
}

/// `Some(true)` finite, `Some(false)` infinite, `None` unknown analytically.
fn analytic_decay(mu: &MeasureSpec) -> Option<bool> {
    match mu {
        MeasureSpec::UniformBall { .. } | MeasureSpec::Grid(_) => Some(true),
        MeasureSpec::PowerWeight { dim, p } => Some(*p < 1.0 - *dim as f64),
        MeasureSpec::GaussianWeight { .. } => Some(true),
        MeasureSpec::RieszProduct { dim, .. } => Some(*dim < 1), // never: always infinite
        MeasureSpec::DistancePower { .. } => Some(false),
        MeasureSpec::Truncated { inner, .. } => analytic_decay(inner),
    }
}

// ---------------------------------------------------------------------------
// Doubling and cone-condition estimators
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct DoublingParams {
    pub trials: u64,
    pub seed: u64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for DoublingParams {
    fn default() -> Self {
        DoublingParams {
            trials: 200,
            seed: 1,
            r_min: 1e-3,
            r_max: 1e1,
        }
    }
}

/// Estimate the ball-doubling constant: the maximum of mass(2B)/mass(B) over
/// random balls with centers in `domain` and log-uniform radii.
pub fn doubling_constant_estimate(
    mu: &MeasureSpec,
    domain: &Region,
    params: &DoublingParams,
    cfg: &QuadratureConfig,
) -> Result<CheckReport> {
    mu.validate()?;
    let n = mu.dim();
    let results: Vec<(u64, f64, String)> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(params.seed, t);
            let center = uniform_in_region(&mut rng, domain);
            let radius = log_uniform(&mut rng, params.r_min, params.r_max);
            let b = Region::Ball { center, radius };
            let bb = Region::Ball {
                center,
                radius: 2.0 * radius,
            };
            let m1 = mass(mu, &b, cfg).map(|e| e.value).unwrap_or(f64::NAN);
            let m2 = mass(mu, &bb, cfg).map(|e| e.value).unwrap_or(f64::NAN);
            let ratio = if m1 <= 1e-300 || m1 <= 1e-13 * m2 {
                f64::INFINITY
            } else {
                m2 / m1
            };
            let witness = format!(
                "center = ({}), radius = {}, mass_b = {}, mass_2b = {}",
                fmt_pt(&center),
                fmt_g17(radius),
                fmt_g17(m1),
                fmt_g17(m2)
            );
            (t, ratio, witness)
        })
        .collect();

    let mut report = CheckReport::new("ball doubling ratio mass(2B)/mass(B)", params.seed);
    report.trials = params.trials;
    let mut worst = f64::NEG_INFINITY;
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
    let _ = n;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct ConeParams {
    pub alpha: f64,
    pub m_factor: f64,
    pub trials: u64,
    pub seed: u64,
    pub r_min: f64,
    pub r_max: f64,
    pub domain: Region,
}

/// Estimate the constant in the cone condition: mass of the shell A(x, r, 2r)
/// against the mass of the widened shell with a double cone removed.
pub fn cone_condition_check(
    mu: &MeasureSpec,
    params: &ConeParams,
    cfg: &QuadratureConfig,
) -> Result<CheckReport> {
    mu.validate()?;
    if !(params.alpha > 0.0 && params.alpha < std::f64::consts::FRAC_PI_2) {
        return Err(Error::BadInput("alpha must lie in (0, pi/2)".into()));
    }
    if params.m_factor < 1.0 {
        return Err(Error::BadInput("M must be >= 1".into()));
    }
    let n = mu.dim();
    let results: Vec<(u64, f64, String)> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(params.seed, t);
            let x = uniform_in_region(&mut rng, &params.domain);
            let r = log_uniform(&mut rng, params.r_min, params.r_max);
            let axis = unit_direction(&mut rng, n);
            let numer_region = Region::Shell {
                center: x,
                r_in: r,
                r_out: 2.0 * r,
            };
            let denom_region = Region::ShellMinusCone {
                center: x,
                r_in: r / params.m_factor,
                r_out: 2.0 * params.m_factor * r,
                axis_point: x,
                axis_dir: axis,
                alpha: params.alpha,
            };
            let numer = mass(mu, &numer_region, cfg).map(|e| e.value).unwrap_or(f64::NAN);
            let denom = mass(mu, &denom_region, cfg).map(|e| e.value).unwrap_or(f64::NAN);
            let ratio = if numer <= 1e-300 {
                0.0
            } else if denom <= 1e-300 {
                f64::INFINITY
            } else {
                numer / denom
            };
            let witness = format!(
                "x = ({}), r = {}, axis = ({}), shell = {}, cone_complement = {}",
                fmt_pt(&x),
                fmt_g17(r),
                fmt_pt(&axis),
                fmt_g17(numer),
                fmt_g17(denom)
            );
            (t, ratio, witness)
        })
        .collect();

    let mut report = CheckReport::new(
        "cone condition ratio mass(A(x,r,2r)) / mass(A(x,r/M,2Mr) minus cone)",
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

pub(crate) fn fmt_pt(p: &Point) -> String {
    let coords: Vec<String> = p.coords().iter().map(|c| fmt_g17(*c)).collect();
    coords.join(", ")
}

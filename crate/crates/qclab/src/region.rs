//! Integration regions: balls, shells, oriented boxes, and shells with a
//! double-sided cone removed. Regions know how to clip rays, which is what
//! lets the quadrature layer align cell boundaries with region boundaries
//! instead of integrating indicator functions.

use crate::{Error, Point, Result};

/// Rotation of R^n stored as an n x n matrix whose columns are the rotated
/// frame axes. Must satisfy R^T R = I within 1e-12.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    m: [[f64; 3]; 3], // m[r][c]
    dim: usize,
}

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Rotation { m, dim }
    }

    /// Planar rotation by `angle`, only meaningful for dim = 2.
    pub fn planar(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut r = Rotation::identity(2);
        r.m[0][0] = c;
        r.m[0][1] = -s;
        r.m[1][0] = s;
        r.m[1][1] = c;
        r
    }

    pub fn from_columns(cols: &[Point]) -> Result<Self> {
        let dim = cols.len();
        let mut m = [[0.0; 3]; 3];
        for (c, col) in cols.iter().enumerate() {
            for r in 0..dim {
                m[r][c] = col.get(r);
            }
        }
        if dim == 3 {
            m[2][2] = cols[2].get(2);
        }
        let rot = Rotation { m, dim };
        rot.validate()?;
        Ok(rot)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut dot = 0.0;
                for r in 0..self.dim {
                    dot += self.m[r][i] * self.m[r][j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-12 {
                    return Err(Error::BadInput(format!(
                        "rotation is not orthogonal: column dot ({i},{j}) = {dot}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Column `c` as a point (the image of the c-th basis vector).
    pub fn axis(&self, c: usize) -> Point {
        let mut coords = [0.0; 3];
        for (r, coord) in coords.iter_mut().enumerate().take(self.dim) {
            *coord = self.m[r][c];
        }
        Point::new(&coords[..self.dim])
    }

    pub fn apply(&self, v: &Point) -> Point {
        let mut out = [0.0; 3];
        for (r, o) in out.iter_mut().enumerate().take(self.dim) {
            for c in 0..self.dim {
                *o += self.m[r][c] * v.get(c);
            }
        }
        Point::new(&out[..self.dim])
    }

    pub fn apply_transpose(&self, v: &Point) -> Point {
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate().take(self.dim) {
            for r in 0..self.dim {
                *o += self.m[r][c] * v.get(r);
            }
        }
        Point::new(&out[..self.dim])
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.m[0][0],
            2 => self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0],
            3 => {
                let m = &self.m;
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
            _ => unreachable!(),
        }
    }
}

/// Congruence-class representative of a rectangular box: center, half-lengths
/// along its own axes, and the rotation carrying the standard frame onto them.
#[derive(Clone, Copy, Debug)]
pub struct OrientedBox {
    pub center: Point,
    pub half_lengths: [f64; 3],
    pub rotation: Rotation,
}

impl OrientedBox {
    pub fn new(center: Point, half_lengths: &[f64], rotation: Rotation) -> Result<Self> {
        let dim = center.dim();
        if half_lengths.len() != dim || rotation.dim() != dim {
            return Err(Error::BadInput("box dimension mismatch".into()));
        }
        if half_lengths.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::BadInput("box half-lengths must be positive".into()));
        }
        rotation.validate()?;
        let mut h = [0.0; 3];
        h[..dim].copy_from_slice(half_lengths);
        Ok(OrientedBox {
            center,
            half_lengths: h,
            rotation,
        })
    }

    pub fn axis_aligned(center: Point, half_lengths: &[f64]) -> Result<Self> {
        let dim = center.dim();
        OrientedBox::new(center, half_lengths, Rotation::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn halves(&self) -> &[f64] {
        &self.half_lengths[..self.dim()]
    }

    pub fn volume(&self) -> f64 {
        let mut v = 1.0;
        for h in self.halves() {
            v *= 2.0 * h;
        }
        v
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.halves().iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    /// World coordinates of the point with local coordinates `u` in [-1,1]^n.
    pub fn local_to_world(&self, u: &[f64]) -> Point {
        let dim = self.dim();
        let mut local = [0.0; 3];
        for i in 0..dim {
            local[i] = u[i] * self.half_lengths[i];
        }
        self.center
            .add(&self.rotation.apply(&Point::new(&local[..dim])))
    }

    pub fn world_to_local(&self, p: &Point) -> Point {
        self.rotation.apply_transpose(&p.sub(&self.center))
    }

    pub fn contains(&self, p: &Point) -> bool {
        let l = self.world_to_local(p);
        (0..self.dim()).all(|i| l.get(i).abs() <= self.half_lengths[i] + 1e-12)
    }

    pub fn corners(&self) -> Vec<Point> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(1 << dim);
        for mask in 0..(1usize << dim) {
            let mut u = [0.0; 3];
            for (i, ui) in u.iter_mut().enumerate().take(dim) {
                *ui = if mask & (1 << i) != 0 { 1.0 } else { -1.0 };
            }
            out.push(self.local_to_world(&u[..dim]));
        }
        out
    }

    /// Split into two half-boxes along local axis `axis`.
    pub fn split(&self, axis: usize) -> (OrientedBox, OrientedBox) {
        let dim = self.dim();
        let mut halves = self.half_lengths;
        halves[axis] *= 0.5;
        let shift = self.rotation.axis(axis).scale(halves[axis]);
        let mut lo = *self;
        let mut hi = *self;
        lo.half_lengths = halves;
        hi.half_lengths = halves;
        lo.center = self.center.sub(&shift);
        hi.center = self.center.add(&shift);
        let _ = dim;
        (lo, hi)
    }

    /// Closed-box intersection test by the separating-axis theorem.
    pub fn intersects(&self, other: &OrientedBox) -> bool {
        let dim = self.dim();
        let d = other.center.sub(&self.center);
        let mut axes: Vec<Point> = Vec::with_capacity(15);
        for i in 0..dim {
            axes.push(self.rotation.axis(i));
            axes.push(other.rotation.axis(i));
        }
        if dim == 3 {
            for i in 0..3 {
                for j in 0..3 {
                    let a = self.rotation.axis(i);
                    let b = other.rotation.axis(j);
                    let cx = a.get(1) * b.get(2) - a.get(2) * b.get(1);
                    let cy = a.get(2) * b.get(0) - a.get(0) * b.get(2);
                    let cz = a.get(0) * b.get(1) - a.get(1) * b.get(0);
                    let c = Point::new(&[cx, cy, cz]);
                    if c.norm() > 1e-9 {
                        axes.push(c.scale(1.0 / c.norm()));
                    }
                }
            }
        }
        for axis in &axes {
            let mut ra = 0.0;
            let mut rb = 0.0;
            for i in 0..dim {
                ra += self.half_lengths[i] * self.rotation.axis(i).dot(axis).abs();
                rb += other.half_lengths[i] * other.rotation.axis(i).dot(axis).abs();
            }
            if d.dot(axis).abs() > ra + rb + 1e-14 {
                return false;
            }
        }
        true
    }
}

/// Closed interval on a ray parameter.
pub type RaySpan = (f64, f64);

/// Region of integration.
#[derive(Clone, Debug)]
pub enum Region {
    Ball {
        center: Point,
        radius: f64,
    },
    Box(OrientedBox),
    Shell {
        center: Point,
        r_in: f64,
        r_out: f64,
    },
    /// Spherical shell around `center` with the double-sided cone of opening
    /// angle `alpha` removed. The cone's vertex is `center`, which must lie on
    /// the axis line through `axis_point` with direction `axis_dir`.
    ShellMinusCone {
        center: Point,
        r_in: f64,
        r_out: f64,
        axis_point: Point,
        axis_dir: Point,
        alpha: f64,
    },
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::BadInput("ball radius must be positive".into()));
                }
            }
            Region::Box(b) => {
                b.rotation.validate()?;
            }
            Region::Shell { r_in, r_out, .. } => {
                if !(*r_in >= 0.0 && r_in < r_out) {
                    return Err(Error::BadInput("shell needs 0 <= r_in < r_out".into()));
                }
            }
            Region::ShellMinusCone {
                center,
                r_in,
                r_out,
                axis_point,
                axis_dir,
                alpha,
            } => {
                if !(*r_in >= 0.0 && r_in < r_out) {
                    return Err(Error::BadInput("shell needs 0 <= r_in < r_out".into()));
                }
                if !(*alpha > 0.0 && *alpha < std::f64::consts::FRAC_PI_2) {
                    return Err(Error::BadInput("cone angle must lie in (0, pi/2)".into()));
                }
                if axis_dir.norm() < 1e-14 {
                    return Err(Error::BadInput("cone axis direction is zero".into()));
                }
                // center must lie on the axis line
                let d = axis_dir.scale(1.0 / axis_dir.norm());
                let v = center.sub(axis_point);
                let off = v.sub(&d.scale(v.dot(&d))).norm();
                if off > 1e-9 * (1.0 + v.norm()) {
                    return Err(Error::BadInput(
                        "cone vertex (shell center) must lie on the axis line".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. }
            | Region::Shell { center, .. }
            | Region::ShellMinusCone { center, .. } => center.dim(),
            Region::Box(b) => b.dim(),
        }
    }

    pub fn center(&self) -> Point {
        match self {
            Region::Ball { center, .. }
            | Region::Shell { center, .. }
            | Region::ShellMinusCone { center, .. } => *center,
            Region::Box(b) => b.center,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Region::Ball { center, radius } => p.dist(center) <= radius + 1e-12,
            Region::Box(b) => b.contains(p),
            Region::Shell { center, r_in, r_out } => {
                let r = p.dist(center);
                r > *r_in && r <= r_out + 1e-12
            }
            Region::ShellMinusCone {
                center,
                r_in,
                r_out,
                axis_dir,
                alpha,
                ..
            } => {
                let v = p.sub(center);
                let r = v.norm();
                if !(r > *r_in && r <= r_out + 1e-12) {
                    return false;
                }
                if r == 0.0 {
                    return false;
                }
                let d = axis_dir.scale(1.0 / axis_dir.norm());
                let cos_acute = (v.dot(&d) / r).abs();
                cos_acute < alpha.cos()
            }
        }
    }

    /// Center and radius of a ball containing the region.
    pub fn bounding_sphere(&self) -> (Point, f64) {
        match self {
            Region::Ball { center, radius } => (*center, *radius),
            Region::Shell { center, r_out, .. } => (*center, *r_out),
            Region::ShellMinusCone { center, r_out, .. } => (*center, *r_out),
            Region::Box(b) => (b.center, 0.5 * b.diameter()),
        }
    }

    /// Axis-aligned bounding box as (lower corner, upper corner).
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Region::Ball { center, radius } => aabb_around(center, *radius),
            Region::Shell { center, r_out, .. } => aabb_around(center, *r_out),
            Region::ShellMinusCone { center, r_out, .. } => aabb_around(center, *r_out),
            Region::Box(b) => {
                let dim = b.dim();
                let mut lo = [f64::INFINITY; 3];
                let mut hi = [f64::NEG_INFINITY; 3];
                for c in b.corners() {
                    for i in 0..dim {
                        lo[i] = lo[i].min(c.get(i));
                        hi[i] = hi[i].max(c.get(i));
                    }
                }
                (Point::new(&lo[..dim]), Point::new(&hi[..dim]))
            }
        }
    }

    /// Intersect the ray `origin + t * dir` (t >= 0, `dir` unit) with the
    /// region, returning up to two disjoint parameter spans.
    ///
    /// `ShellMinusCone` only supports rays cast from its own center (that is
    /// how the quadrature layer uses it: the angular exclusion is then exact
    /// and radial spans do not depend on the cone at all).
    pub fn ray_clip(&self, origin: &Point, dir: &Point) -> Vec<RaySpan> {
        match self {
            Region::Ball { center, radius } => ray_ball(origin, dir, center, *radius)
                .map(|s| vec![s])
                .unwrap_or_default(),
            Region::Box(b) => ray_box(origin, dir, b).map(|s| vec![s]).unwrap_or_default(),
            Region::Shell { center, r_in, r_out } => {
                let outer = ray_ball(origin, dir, center, *r_out);
                let inner = ray_ball(origin, dir, center, *r_in);
                match outer {
                    None => vec![],
                    Some(o) => subtract_span(o, inner),
                }
            }
            Region::ShellMinusCone {
                center,
                r_in,
                r_out,
                axis_dir,
                alpha,
                ..
            } => {
                debug_assert!(
                    origin.dist(center) < 1e-12 * (1.0 + center.norm()),
                    "cone shells are integrated from their own center"
                );
                let d = axis_dir.scale(1.0 / axis_dir.norm());
                let cos_acute = dir.dot(&d).abs();
                if cos_acute >= alpha.cos() {
                    return vec![];
                }
                vec![(*r_in, *r_out)]
            }
        }
    }
}

fn aabb_around(center: &Point, radius: f64) -> (Point, Point) {
    let dim = center.dim();
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for i in 0..dim {
        lo[i] = center.get(i) - radius;
        hi[i] = center.get(i) + radius;
    }
    (Point::new(&lo[..dim]), Point::new(&hi[..dim]))
}

fn ray_ball(origin: &Point, dir: &Point, center: &Point, radius: f64) -> Option<RaySpan> {
    let oc = origin.sub(center);
    let b = -oc.dot(dir);
    let c = oc.dot(&oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = (b - s).max(0.0);
    let t1 = b + s;
    if t1 <= 0.0 || t1 <= t0 {
        return None;
    }
    Some((t0, t1))
}

fn ray_box(origin: &Point, dir: &Point, b: &OrientedBox) -> Option<RaySpan> {
    let dim = b.dim();
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for i in 0..dim {
        let axis = b.rotation.axis(i);
        let p = origin.sub(&b.center).dot(&axis);
        let d = dir.dot(&axis);
        let h = b.half_lengths[i];
        if d.abs() < 1e-15 {
            if p.abs() > h {
                return None;
            }
            continue;
        }
        let (mut a, mut bb) = ((-h - p) / d, (h - p) / d);
        if a > bb {
            std::mem::swap(&mut a, &mut bb);
        }
        t0 = t0.max(a);
        t1 = t1.min(bb);
        if t0 >= t1 {
            return None;
        }
    }
    if t1 <= 0.0 || !t1.is_finite() {
        return None;
    }
    Some((t0.max(0.0), t1))
}

/// `span` minus the (optional) `hole`, as up to two spans.
pub fn subtract_span(span: RaySpan, hole: Option<RaySpan>) -> Vec<RaySpan> {
    let (a, b) = span;
    match hole {
        None => vec![span],
        Some((h0, h1)) => {
            let mut out = Vec::new();
            if h0 > a {
                out.push((a, h0.min(b)));
            }
            if h1 < b {
                out.push((h1.max(a), b));
            }
            out.retain(|(x, y)| *y > *x + 1e-300);
            out
        }
    }
}

//! Exact triangle and kernel quantities.
//!
//! These closed forms serve double duty: they are production code for the
//! kernel-map integrands, and they are the oracle that downstream quadrature
//! and randomized checks are validated against. Everything here is a pure
//! function of coordinates.

use crate::{Error, Real};

/// Point in `R^n`, `1 <= n <= 3`. Coordinates beyond `dim` are kept at zero.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point<T> {
    coords: [T; 3],
    dim: usize,
}

impl<T: Real> Point<T> {
    pub fn new(coords: &[T]) -> Self {
        assert!(
            (1..=3).contains(&coords.len()),
            "supported dimensions are 1..=3"
        );
        let mut c = [T::zero(); 3];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(&[T::zero(); 3][..dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[T] {
        &self.coords[..self.dim]
    }

    pub fn get(&self, i: usize) -> T {
        self.coords[i]
    }

    pub fn set(&mut self, i: usize, v: T) {
        assert!(i < self.dim);
        self.coords[i] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for c in out.coords.iter_mut() {
            *c = *c * s;
        }
        out
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim, other.dim);
        let mut acc = T::zero();
        for i in 0..self.dim {
            acc += self.coords[i] * other.coords[i];
        }
        acc
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn dist(&self, other: &Self) -> T {
        self.sub(other).norm()
    }

    /// Magnitude of the cross product: full cross norm for n = 3, the scalar
    /// determinant for n = 2, zero for n = 1 (collinear by definition).
    pub fn cross_mag(&self, other: &Self) -> T {
        match self.dim {
            1 => T::zero(),
            2 => (self.coords[0] * other.coords[1] - self.coords[1] * other.coords[0]).abs(),
            3 => {
                let a = self.coords;
                let b = other.coords;
                let cx = a[1] * b[2] - a[2] * b[1];
                let cy = a[2] * b[0] - a[0] * b[2];
                let cz = a[0] * b[1] - a[1] * b[0];
                (cx * cx + cy * cy + cz * cz).sqrt()
            }
            _ => unreachable!(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..3 {
            out.coords[i] = f(self.coords[i], other.coords[i]);
        }
        out
    }
}

/// Relative degeneracy threshold: below this pairwise distance a triple is
/// rejected instead of producing garbage angles.
fn degeneracy_threshold<T: Real>(scale: T) -> T {
    let base = T::from_f64(1e-14).unwrap();
    let eps_guard = T::epsilon() * T::from_f64(100.0).unwrap();
    base.max(eps_guard) * scale.max(T::one())
}

fn scale_of<T: Real>(pts: &[&Point<T>]) -> T {
    let mut s = T::zero();
    for p in pts {
        s = s.max(p.norm());
    }
    s
}

fn check_distinct<T: Real>(pairs: &[(&Point<T>, &Point<T>)], scale: T) -> Result<(), Error> {
    let thr = degeneracy_threshold(scale);
    for (a, b) in pairs {
        if a.dist(b) < thr {
            return Err(Error::DegenerateTriple {
                threshold: thr.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(())
}

/// Angle at `vertex` spanned by the directions toward `a` and `b`, in `[0, pi]`.
///
/// Computed as atan2(|cross|, dot); stable near 0 and pi where the arccos of a
/// normalized dot product loses digits.
pub fn angle_at<T: Real>(vertex: &Point<T>, a: &Point<T>, b: &Point<T>) -> T {
    let u = a.sub(vertex);
    let v = b.sub(vertex);
    u.cross_mag(&v).atan2(u.dot(&v))
}

/// Perimeter of the triangle `xyz`: |x-y| + |x-z| + |y-z|.
pub fn perimeter<T: Real>(x: &Point<T>, y: &Point<T>, z: &Point<T>) -> Result<T, Error> {
    let s = scale_of(&[x, y, z]);
    check_distinct(&[(x, y), (x, z), (y, z)], s)?;
    Ok(x.dist(y) + x.dist(z) + y.dist(z))
}

/// The non-collinearity angle of the triple: pi minus the larger of the two
/// base angles at `x` and at `y`, as seen from `z`. Lies in `(0, pi]`; it is
/// small exactly when `z` is nearly aligned with the ray extensions of `[x,y]`.
pub fn tau<T: Real>(x: &Point<T>, y: &Point<T>, z: &Point<T>) -> Result<T, Error> {
    let s = scale_of(&[x, y, z]);
    check_distinct(&[(x, y), (x, z), (y, z)], s)?;
    let at_x = angle_at(x, z, y);
    let at_y = angle_at(y, z, x);
    Ok(T::PI() - at_x.max(at_y))
}

/// All triangle quantities of a triple in one pass.
#[derive(Clone, Copy, Debug)]
pub struct TriangleStats<T = f64> {
    pub perimeter_l: T,
    pub angle_x: T,
    pub angle_y: T,
    pub angle_z: T,
    pub tau: T,
}

pub fn triangle_stats<T: Real>(
    x: &Point<T>,
    y: &Point<T>,
    z: &Point<T>,
) -> Result<TriangleStats<T>, Error> {
    let s = scale_of(&[x, y, z]);
    check_distinct(&[(x, y), (x, z), (y, z)], s)?;
    let angle_x = angle_at(x, z, y);
    let angle_y = angle_at(y, z, x);
    let angle_z = angle_at(z, x, y);
    Ok(TriangleStats {
        perimeter_l: x.dist(y) + x.dist(z) + y.dist(z),
        angle_x,
        angle_y,
        angle_z,
        tau: T::PI() - angle_x.max(angle_y),
    })
}

/// Unit vector pointing from `z` toward `x`.
pub fn unit_kernel<T: Real>(z: &Point<T>, x: &Point<T>) -> Result<Point<T>, Error> {
    let s = scale_of(&[z, x]);
    check_distinct(&[(z, x)], s)?;
    let d = x.sub(z);
    Ok(d.scale(T::one() / d.norm()))
}

/// Both sides of the exact chord identity for the unit kernel:
/// `|g_z(x) - g_z(y)| = 2|x-y| / (|x-z| + |y-z|) * cos((B - A)/2)`
/// where `A`, `B` are the base angles at `x` and `y`.
pub fn kernel_diff_exact<T: Real>(
    x: &Point<T>,
    y: &Point<T>,
    z: &Point<T>,
) -> Result<(T, T), Error> {
    let s = scale_of(&[x, y, z]);
    check_distinct(&[(x, y), (x, z), (y, z)], s)?;
    let gx = unit_kernel(z, x)?;
    let gy = unit_kernel(z, y)?;
    let lhs = gx.sub(&gy).norm();
    let at_x = angle_at(x, z, y);
    let at_y = angle_at(y, z, x);
    let two = T::from_f64(2.0).unwrap();
    let half = T::from_f64(0.5).unwrap();
    let rhs = two * x.dist(y) / (x.dist(z) + y.dist(z)) * ((at_y - at_x) * half).cos();
    Ok((lhs, rhs))
}

/// Both sides of the exact inner-product identity:
/// `<g_z(x) - g_z(y), x - y> = 2|x-y|^2 / (|x-z| + |y-z|) * cos^2((B - A)/2)`.
pub fn kernel_inner_exact<T: Real>(
    x: &Point<T>,
    y: &Point<T>,
    z: &Point<T>,
) -> Result<(T, T), Error> {
    let s = scale_of(&[x, y, z]);
    check_distinct(&[(x, y), (x, z), (y, z)], s)?;
    let gx = unit_kernel(z, x)?;
    let gy = unit_kernel(z, y)?;
    let lhs = gx.sub(&gy).dot(&x.sub(y));
    let at_x = angle_at(x, z, y);
    let at_y = angle_at(y, z, x);
    let two = T::from_f64(2.0).unwrap();
    let half = T::from_f64(0.5).unwrap();
    let c = ((at_y - at_x) * half).cos();
    let dxy = x.dist(y);
    let rhs = two * dxy * dxy / (x.dist(z) + y.dist(z)) * c * c;
    Ok((lhs, rhs))
}

/// The angle sandwich `tau/pi <= cos((B - A)/2) <= tau`, returned as
/// `(low, mid, high)`; `low <= mid <= high` holds for every valid triple.
pub fn tau_cos_sandwich<T: Real>(
    x: &Point<T>,
    y: &Point<T>,
    z: &Point<T>,
) -> Result<(T, T, T), Error> {
    let s = scale_of(&[x, y, z]);
    check_distinct(&[(x, y), (x, z), (y, z)], s)?;
    let at_x = angle_at(x, z, y);
    let at_y = angle_at(y, z, x);
    let t = T::PI() - at_x.max(at_y);
    let half = T::from_f64(0.5).unwrap();
    let mid = ((at_y - at_x) * half).cos();
    Ok((t / T::PI(), mid, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type P = Point<f64>;

    fn pt(coords: &[f64]) -> P {
        P::new(coords)
    }

    #[test]
    fn perimeter_right_isoceles() {
        let p = perimeter(&pt(&[0., 0.]), &pt(&[1., 0.]), &pt(&[0., 1.])).unwrap();
        assert!((p - (2.0 + 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn perimeter_collinear_is_defined() {
        let p = perimeter(&pt(&[0., 0.]), &pt(&[2., 0.]), &pt(&[1., 0.])).unwrap();
        assert!((p - 4.0).abs() < 1e-15);
    }

    #[test]
    fn perimeter_rejects_coincident_points() {
        let e = perimeter(&pt(&[0., 0.]), &pt(&[0., 0.]), &pt(&[1., 0.]));
        assert!(matches!(e, Err(Error::DegenerateTriple { .. })));
    }

    #[test]
    fn tau_equilateral() {
        let h = 3f64.sqrt() / 2.0;
        let t = tau(&pt(&[0., 0.]), &pt(&[1., 0.]), &pt(&[0.5, h])).unwrap();
        assert!((t - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tau_midpoint_is_pi() {
        let t = tau(&pt(&[0., 0.]), &pt(&[1., 0.]), &pt(&[0.5, 0.])).unwrap();
        assert!((t - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn tau_exterior_collinear_is_zero() {
        // z = y + (y - x): angle at y is pi, so tau = 0.
        let t = tau(&pt(&[0., 0.]), &pt(&[1., 0.]), &pt(&[2., 0.])).unwrap();
        assert!(t.abs() < 1e-12);
    }

    #[test]
    fn unit_kernel_normalizes() {
        let g = unit_kernel(&pt(&[0., 0.]), &pt(&[3., 4.])).unwrap();
        assert!((g.get(0) - 0.6).abs() < 1e-15);
        assert!((g.get(1) - 0.8).abs() < 1e-15);
        let g = unit_kernel(&pt(&[1., 1.]), &pt(&[1. + 1e-6, 1.])).unwrap();
        assert!((g.get(0) - 1.0).abs() < 1e-14);
        assert!(g.get(1).abs() < 1e-14);
    }

    #[test]
    fn kernel_diff_symmetric_right_angle() {
        let (lhs, rhs) =
            kernel_diff_exact(&pt(&[1., 0.]), &pt(&[0., 1.]), &pt(&[0., 0.])).unwrap();
        assert!((lhs - 2f64.sqrt()).abs() < 1e-14);
        assert!((rhs - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn kernel_diff_equilateral_is_one() {
        let h = 3f64.sqrt() / 2.0;
        let (lhs, rhs) =
            kernel_diff_exact(&pt(&[0., 0.]), &pt(&[1., 0.]), &pt(&[0.5, h])).unwrap();
        assert!((lhs - 1.0).abs() < 1e-14);
        assert!((rhs - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_inner_symmetric_right_angle() {
        let (lhs, rhs) =
            kernel_inner_exact(&pt(&[1., 0.]), &pt(&[0., 1.]), &pt(&[0., 0.])).unwrap();
        assert!((lhs - 2.0).abs() < 1e-14);
        assert!((rhs - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sandwich_equilateral() {
        let h = 3f64.sqrt() / 2.0;
        let (lo, mid, hi) =
            tau_cos_sandwich(&pt(&[0., 0.]), &pt(&[1., 0.]), &pt(&[0.5, h])).unwrap();
        assert!((lo - 2.0 / 3.0).abs() < 1e-12);
        assert!((mid - 1.0).abs() < 1e-12);
        assert!((hi - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn works_at_f32() {
        let x = Point::<f32>::new(&[0., 0.]);
        let y = Point::<f32>::new(&[1., 0.]);
        let z = Point::<f32>::new(&[0., 1.]);
        let (lhs, rhs) = kernel_diff_exact(&x, &y, &z).unwrap();
        assert!((lhs - rhs).abs() < 1e-6);
    }

    fn coord() -> impl Strategy<Value = f64> {
        prop_oneof![-10.0..10.0f64, -0.1..0.1f64]
    }

    fn point3() -> impl Strategy<Value = P> {
        (coord(), coord(), coord()).prop_map(|(a, b, c)| pt(&[a, b, c]))
    }

    fn triple() -> impl Strategy<Value = (P, P, P)> {
        (point3(), point3(), point3()).prop_filter("distinct", |(x, y, z)| {
            x.dist(y) > 1e-6 && x.dist(z) > 1e-6 && y.dist(z) > 1e-6
        })
    }

    proptest! {
        #[test]
        fn identities_hold_on_random_triples((x, y, z) in triple()) {
            let (l1, r1) = kernel_diff_exact(&x, &y, &z).unwrap();
            prop_assert!((l1 - r1).abs() <= 1e-12 * (1.0 + l1));
            let (l2, r2) = kernel_inner_exact(&x, &y, &z).unwrap();
            prop_assert!((l2 - r2).abs() <= 1e-12 * (1.0 + l2.abs()));
        }

        #[test]
        fn angle_sandwich_holds((x, y, z) in triple()) {
            let (lo, mid, hi) = tau_cos_sandwich(&x, &y, &z).unwrap();
            prop_assert!(lo <= mid + 1e-12);
            prop_assert!(mid <= hi + 1e-12);
        }

        #[test]
        fn chord_and_inner_bounds((x, y, z) in triple()) {
            let l = perimeter(&x, &y, &z).unwrap();
            let t = tau(&x, &y, &z).unwrap();
            let d = x.dist(&y);
            let pi = std::f64::consts::PI;

            let (chord, _) = kernel_diff_exact(&x, &y, &z).unwrap();
            prop_assert!(2.0 * d / (pi * l) * t <= chord * (1.0 + 1e-12) + 1e-12);
            prop_assert!(chord <= 4.0 * d / l * t * (1.0 + 1e-12) + 1e-12);

            let (inner, _) = kernel_inner_exact(&x, &y, &z).unwrap();
            prop_assert!(2.0 * d * d / (pi * pi * l) * t * t <= inner * (1.0 + 1e-12) + 1e-12);
            prop_assert!(inner <= 4.0 * d * d / l * t * t * (1.0 + 1e-12) + 1e-12);

            // |x-z| + |y-z| is between half the perimeter and the perimeter.
            let s = x.dist(&z) + y.dist(&z);
            prop_assert!(l / 2.0 <= s * (1.0 + 1e-12));
            prop_assert!(s <= l * (1.0 + 1e-12));
        }

        #[test]
        fn unit_kernel_has_unit_norm(z in point3(), x in point3()) {
            prop_assume!(z.dist(&x) > 1e-6);
            let g = unit_kernel(&z, &x).unwrap();
            prop_assert!((g.norm() - 1.0).abs() < 1e-14);
        }
    }
}

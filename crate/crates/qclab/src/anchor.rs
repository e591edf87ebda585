//! Finite anchor sets and iterated-function-system materialization.
//!
//! Distance weights `dist(x, A)^p` need fast nearest-neighbor queries against
//! point clouds that may come from an IFS (self-similar sets at a finite
//! iteration depth). A uniform bucket grid is plenty at desk scale.

use std::collections::HashMap;

use crate::region::Rotation;
use crate::{Error, Point, Result};

/// One similarity map `x -> scale * R x + translation`.
#[derive(Clone, Copy, Debug)]
pub struct Similarity {
    pub scale: f64,
    pub translation: Point,
    pub rotation: Rotation,
}

impl Similarity {
    pub fn apply(&self, p: &Point) -> Point {
        self.rotation.apply(p).scale(self.scale).add(&self.translation)
    }
}

/// Parse an IFS spec: one similarity per line,
/// `scale tx ty [tz] [angle]` (2-D) or `scale tx ty tz [yaw pitch roll]` (3-D).
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_ifs(text: &str, dim: usize) -> Result<Vec<Similarity>> {
    let mut maps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::BadInput(format!("ifs line {}: bad number {t}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if nums.len() < 1 + dim {
            return Err(Error::BadInput(format!(
                "ifs line {}: need scale and {dim} translation components",
                lineno + 1
            )));
        }
        let scale = nums[0];
        if !(scale > 0.0 && scale < 1.0) {
            return Err(Error::BadInput(format!(
                "ifs line {}: contraction ratio must lie in (0,1)",
                lineno + 1
            )));
        }
        let translation = Point::new(&nums[1..1 + dim]);
        let rest = &nums[1 + dim..];
        let rotation = match (dim, rest.len()) {
            (_, 0) => Rotation::identity(dim),
            (2, 1) => Rotation::planar(rest[0]),
            (3, 3) => euler_rotation(rest[0], rest[1], rest[2]),
            _ => {
                return Err(Error::BadInput(format!(
                    "ifs line {}: unexpected rotation arguments",
                    lineno + 1
                )))
            }
        };
        maps.push(Similarity {
            scale,
            translation,
            rotation,
        });
    }
    if maps.is_empty() {
        return Err(Error::BadInput("ifs spec has no similarities".into()));
    }
    Ok(maps)
}

fn euler_rotation(yaw: f64, pitch: f64, roll: f64) -> Rotation {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let cols = [
        Point::new(&[cy * cp, sy * cp, -sp]),
        Point::new(&[
            cy * sp * sr - sy * cr,
            sy * sp * sr + cy * cr,
            cp * sr,
        ]),
        Point::new(&[
            cy * sp * cr + sy * sr,
            sy * sp * cr - cy * sr,
            cp * cr,
        ]),
    ];
    Rotation::from_columns(&cols).expect("euler matrix is orthogonal")
}

/// The standard four-corner Cantor-type IFS in the plane with contraction
/// ratio `r`: four maps toward the corners of the unit square.
pub fn four_corner_ifs(r: f64) -> Vec<Similarity> {
    let id = Rotation::identity(2);
    [(0.0, 0.0), (1.0 - r, 0.0), (0.0, 1.0 - r), (1.0 - r, 1.0 - r)]
        .iter()
        .map(|&(tx, ty)| Similarity {
            scale: r,
            translation: Point::new(&[tx, ty]),
            rotation: id,
        })
        .collect()
}

/// Materialize an IFS to iteration depth `depth` as a point cloud, starting
/// from the single point 0.
pub fn materialize_ifs(maps: &[Similarity], depth: usize, dim: usize) -> Vec<Point> {
    let mut pts = vec![Point::zero(dim)];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(pts.len() * maps.len());
        for m in maps {
            for p in &pts {
                next.push(m.apply(p));
            }
        }
        pts = next;
    }
    pts
}

/// Finite point cloud with a bucket index for nearest-neighbor distance.
#[derive(Clone, Debug)]
pub struct AnchorSet {
    points: Vec<Point>,
    dim: usize,
    cell: f64,
    min: [f64; 3],
    key_max: [i64; 3],
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl AnchorSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::SetTooSmall);
        }
        let dim = points[0].dim();
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in &points {
            for i in 0..dim {
                min[i] = min[i].min(p.get(i));
                max[i] = max[i].max(p.get(i));
            }
        }
        let extent = (0..dim).map(|i| max[i] - min[i]).fold(0.0f64, f64::max);
        // Aim for O(1) points per bucket on a uniform cloud.
        let n_per_axis = (points.len() as f64).powf(1.0 / dim as f64).ceil().max(1.0);
        let cell = (extent / n_per_axis).max(1e-12);
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut key_max = [0i64; 3];
        for (idx, p) in points.iter().enumerate() {
            let k = Self::key(p, &min, cell, dim);
            for i in 0..dim {
                key_max[i] = key_max[i].max(k[i]);
            }
            buckets.entry(k).or_default().push(idx as u32);
        }
        Ok(AnchorSet {
            points,
            dim,
            cell,
            min,
            key_max,
            buckets,
        })
    }

    pub fn from_ifs(maps: &[Similarity], depth: usize, dim: usize) -> Result<Self> {
        Self::new(materialize_ifs(maps, depth, dim))
    }

    fn key(p: &Point, min: &[f64; 3], cell: f64, dim: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        for i in 0..dim {
            k[i] = ((p.get(i) - min[i]) / cell).floor() as i64;
        }
        k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Euclidean distance from `p` to the nearest anchor.
    pub fn dist(&self, p: &Point) -> f64 {
        let center = Self::key(p, &self.min, self.cell, self.dim);
        // Ring index that covers every occupied bucket from this center.
        let cover = (0..self.dim)
            .map(|i| center[i].max(self.key_max[i] - center[i]))
            .max()
            .unwrap_or(0)
            .max(0);
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            self.for_ring(center, ring, |key| {
                if let Some(ids) = self.buckets.get(&key) {
                    for &id in ids {
                        let d = self.points[id as usize].dist(p);
                        if d < best {
                            best = d;
                        }
                    }
                }
            });
            // Any unscanned point sits at Chebyshev bucket distance > ring,
            // hence at Euclidean distance >= ring * cell.
            if best.is_finite() && ring as f64 * self.cell >= best {
                return best;
            }
            if ring >= cover {
                return best;
            }
            ring += 1;
        }
    }

    fn for_ring(&self, center: [i64; 3], ring: i64, mut visit: impl FnMut([i64; 3])) {
        if self.dim == 1 {
            if ring == 0 {
                visit(center);
            } else {
                visit([center[0] - ring, 0, 0]);
                visit([center[0] + ring, 0, 0]);
            }
            return;
        }
        let lo = -ring;
        let hi = ring;
        if self.dim == 2 {
            for a in lo..=hi {
                for b in lo..=hi {
                    if a.abs().max(b.abs()) == ring {
                        visit([center[0] + a, center[1] + b, 0]);
                    }
                }
            }
        } else {
            for a in lo..=hi {
                for b in lo..=hi {
                    for c in lo..=hi {
                        if a.abs().max(b.abs()).max(c.abs()) == ring {
                            visit([center[0] + a, center[1] + b, center[2] + c]);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dist_matches_brute_force() {
        let maps = four_corner_ifs(0.25);
        let set = AnchorSet::from_ifs(&maps, 3, 2).unwrap();
        assert_eq!(set.len(), 64);
        let mut rng_state = 12345u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 11) as f64 / (1u64 << 53) as f64) * 3.0 - 1.0
        };
        for _ in 0..200 {
            let p = Point::new(&[next(), next()]);
            let fast = set.dist(&p);
            let brute = set
                .points()
                .iter()
                .map(|q| q.dist(&p))
                .fold(f64::INFINITY, f64::min);
            assert!((fast - brute).abs() < 1e-12, "p = {p:?}");
        }
    }

    #[test]
    fn ifs_point_counts_grow_geometrically() {
        let maps = four_corner_ifs(0.25);
        assert_eq!(materialize_ifs(&maps, 4, 2).len(), 256);
    }

    #[test]
    fn parse_ifs_rejects_bad_lines() {
        assert!(parse_ifs("0.5 0 0\n1.5 1 1", 2).is_err());
        let maps = parse_ifs("# comment\n0.25 0 0\n0.25 0.75 0 0.5\n", 2).unwrap();
        assert_eq!(maps.len(), 2);
    }
}

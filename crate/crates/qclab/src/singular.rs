//! Lacunary trigonometric product weights and their probes.
//!
//! The weight is a finite product of factors `1 + cos(<x, w_k>)/2` whose
//! integer frequency vectors grow doubly-geometrically, which makes them
//! mutually orthogonal on the period cube at every finite level. The module
//! provides exact pointwise evaluation (phases reduced exactly mod 2*pi),
//! closed-form box and segment integrals from the trigonometric expansion,
//! the normalization and line-comparability probes, and the exact bad-set
//! enumeration that controls how many factors can fail to oscillate along a
//! given direction.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::dd::{reduce_phase_pow2, Dd};
use crate::quad::QuadratureConfig;
use crate::region::OrientedBox;
use crate::{Error, Point, Result};

/// Hard cap on the factor index: component exponents stay within i128 so the
/// expansion frequencies remain exact integers.
fn check_caps(n: usize, k: u32) -> Result<()> {
    if !(1..=3).contains(&n) {
        return Err(Error::BadInput("dimension must be 1..=3".into()));
    }
    let e_max = n as u32 * k * k + n as u32 * k;
    if 2 * e_max > 126 {
        return Err(Error::FrequencyOverflow(format!(
            "factor {k} in dimension {n} needs 4^{e_max} > i128 range"
        )));
    }
    Ok(())
}

/// Frequency vector of factor `k` in dimension `n`: component `i` (1-based)
/// equals `4^(n k^2 + i k)`, stored as the base-4 exponent so it is always
/// exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrequencyVector {
    pub n: usize,
    pub k: u32,
    exponents: [u32; 3],
}

impl FrequencyVector {
    pub fn new(n: usize, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::BadInput("factor index starts at 1".into()));
        }
        check_caps(n, k)?;
        let mut exponents = [0u32; 3];
        for i in 1..=n {
            exponents[i - 1] = n as u32 * k * k + i as u32 * k;
        }
        Ok(FrequencyVector { n, k, exponents })
    }

    /// Base-4 exponent of component `i` (0-based).
    pub fn exponent(&self, i: usize) -> u32 {
        self.exponents[i]
    }

    /// Component as an exact integer.
    pub fn component_i128(&self, i: usize) -> i128 {
        1i128 << (2 * self.exponents[i])
    }

    /// Euclidean norm (f64; exact until ~4^500 where it saturates).
    pub fn norm(&self) -> f64 {
        let mut s = 0.0f64;
        for i in 0..self.n {
            let e = self.exponents[i] as i32;
            s += (2.0f64).powi(4 * e.min(250));
        }
        s.sqrt()
    }

    /// Phase `<x, w>` reduced exactly into [0, 2*pi).
    pub fn phase(&self, x: &Point) -> Result<Dd> {
        debug_assert_eq!(x.dim(), self.n);
        let mut terms = [(0.0f64, 0i64); 3];
        for (i, t) in terms.iter_mut().enumerate().take(self.n) {
            *t = (x.get(i), 2 * self.exponents[i] as i64);
        }
        reduce_phase_pow2(&terms[..self.n])
    }

    /// Phase at `x + 2*pi*periods*e_axis`, with the shift carried at
    /// triple-double precision so the representation error of 2*pi is not
    /// amplified by the frequency (a plain f64 shift would be: the component
    /// 4^40 of the k = 4 vector already turns one ulp of 2*pi into 1e-7).
    pub fn phase_shifted(&self, x: &Point, axis: usize, periods: i32) -> Result<Dd> {
        const TWO_PI_3: [f64; 3] = [
            6.283185307179586,
            2.4492935982947064e-16,
            -5.989539619436679e-33,
        ];
        let mut terms = [(0.0f64, 0i64); 9];
        for (i, t) in terms.iter_mut().enumerate().take(self.n) {
            *t = (x.get(i), 2 * self.exponents[i] as i64);
        }
        let p = 2 * self.exponents[axis] as i64;
        // split each product exactly: rounding in part * periods would be
        // amplified by 4^(exponent) just like the 2*pi residual itself
        for (j, part) in TWO_PI_3.iter().enumerate() {
            let prod = crate::dd::two_prod(*part, periods as f64);
            terms[self.n + 2 * j] = (prod.hi, p);
            terms[self.n + 2 * j + 1] = (prod.lo, p);
        }
        reduce_phase_pow2(&terms[..self.n + 6])
    }
}

/// One factor `1 + cos(<x, w_k>)/2`; always in [1/2, 3/2].
pub fn cosine_factor(n: usize, k: u32, x: &Point) -> Result<f64> {
    let w = FrequencyVector::new(n, k)?;
    Ok(1.0 + 0.5 * w.phase(x)?.value().cos())
}

/// Term of the trigonometric expansion of the product weight:
/// `coeff * cos(<x, w>)` with `w` an exact signed combination of frequency
/// vectors.
#[derive(Clone, Debug)]
struct ExpansionTerm {
    coeff: f64,
    /// Combined frequency vector, exact.
    w: [i128; 3],
    /// (component index, sign, base-4 exponent) triples for exact phase
    /// reduction at arbitrary points.
    phase_parts: Vec<(usize, i8, u32)>,
}

/// Finite product of cosine factors with lacunary integer frequencies.
#[derive(Clone, Debug)]
pub struct RieszProductWeight {
    pub n: usize,
    pub m: u32,
    freqs: Vec<FrequencyVector>,
    terms: Vec<ExpansionTerm>,
}

impl RieszProductWeight {
    pub fn new(n: usize, m: u32) -> Result<Self> {
        let mut freqs = Vec::new();
        for k in 1..=m {
            freqs.push(FrequencyVector::new(n, k)?);
        }
        let terms = expansion_terms(n, &freqs);
        Ok(RieszProductWeight { n, m, freqs, terms })
    }

    pub fn frequencies(&self) -> &[FrequencyVector] {
        &self.freqs
    }

    /// Factor `k` (1-based) at `x`.
    pub fn factor(&self, k: u32, x: &Point) -> Result<f64> {
        debug_assert!(k >= 1 && k <= self.m);
        Ok(1.0 + 0.5 * self.freqs[(k - 1) as usize].phase(x)?.value().cos())
    }

    /// Product over all factors; lies in [(1/2)^m, (3/2)^m].
    pub fn eval(&self, x: &Point) -> Result<f64> {
        let mut prod = 1.0;
        for w in &self.freqs {
            prod *= 1.0 + 0.5 * w.phase(x)?.value().cos();
        }
        Ok(prod)
    }

    /// log of the product (sum of factor logs).
    pub fn log_eval(&self, x: &Point) -> Result<f64> {
        let mut acc = 0.0;
        for w in &self.freqs {
            acc += (1.0 + 0.5 * w.phase(x)?.value().cos()).ln();
        }
        Ok(acc)
    }

    /// Exact mean over an axis-aligned cube/box centered at `center` with the
    /// given half-widths: each expansion term integrates to a product of
    /// cardinal sines.
    pub fn box_mean_axis(&self, center: &Point, half: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut factor = t.coeff;
            for i in 0..self.n {
                let b = (t.w[i] as f64) * half[i];
                factor *= sinc(b);
            }
            if factor != 0.0 {
                acc += factor * self.term_phase_cos(t, center)?;
            }
        }
        Ok(acc)
    }

    /// Exact mass over an arbitrary oriented box.
    pub fn box_mass(&self, b: &OrientedBox) -> Result<f64> {
        debug_assert_eq!(b.dim(), self.n);
        let mut acc = 0.0;
        for t in &self.terms {
            let mut factor = t.coeff;
            for j in 0..self.n {
                let axis = b.rotation.axis(j);
                let mut wj = 0.0;
                for i in 0..self.n {
                    wj += axis.get(i) * (t.w[i] as f64);
                }
                factor *= sinc(wj * b.half_lengths[j]);
            }
            if factor != 0.0 {
                acc += factor * self.term_phase_cos(t, &b.center)?;
            }
        }
        Ok(acc * b.volume())
    }

    /// Exact mean over the segment `t -> x0 + t v`, `t` in [0, 1].
    pub fn segment_mean(&self, x0: &Point, v: &Point) -> Result<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut b = 0.0;
            for i in 0..self.n {
                b += v.get(i) * (t.w[i] as f64);
            }
            // mean of cos(phi0 + t b) over [0,1] = cos(phi0 + b/2) sinc(b/2)
            let s = sinc(0.5 * b);
            if s != 0.0 {
                let phi0 = self.term_phase(t, x0)?;
                acc += t.coeff * (phi0.value() + 0.5 * b).cos() * s;
            }
        }
        Ok(acc)
    }

    fn term_phase(&self, t: &ExpansionTerm, x: &Point) -> Result<Dd> {
        let parts: Vec<(f64, i64)> = t
            .phase_parts
            .iter()
            .map(|&(i, s, e)| (s as f64 * x.get(i), 2 * e as i64))
            .collect();
        reduce_phase_pow2(&parts)
    }

    fn term_phase_cos(&self, t: &ExpansionTerm, x: &Point) -> Result<f64> {
        if t.phase_parts.is_empty() {
            return Ok(1.0);
        }
        Ok(self.term_phase(t, x)?.value().cos())
    }
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// Expand `prod_k (1 + cos(phi_k)/2)` into `sum coeff * cos(sum s_k phi_k)`.
fn expansion_terms(n: usize, freqs: &[FrequencyVector]) -> Vec<ExpansionTerm> {
    let m = freqs.len();
    let mut out = Vec::new();
    for subset in 0..(1u32 << m) {
        let members: Vec<usize> = (0..m).filter(|k| subset & (1 << k) != 0).collect();
        let a = members.len() as i32;
        if members.is_empty() {
            out.push(ExpansionTerm {
                coeff: 1.0,
                w: [0; 3],
                phase_parts: Vec::new(),
            });
            continue;
        }
        // prod cos(phi_k) = 2^(1-|A|) * sum over sign patterns with the first
        // sign fixed positive of cos(sum s_k phi_k); the subset itself enters
        // the product with weight 2^(-|A|).
        let coeff = (2.0f64).powi(1 - 2 * a);
        for pattern in 0..(1u32 << (members.len() - 1)) {
            let mut w = [0i128; 3];
            let mut phase_parts = Vec::new();
            for (j, &k_idx) in members.iter().enumerate() {
                let sign: i8 = if j == 0 {
                    1
                } else if pattern & (1 << (j - 1)) != 0 {
                    -1
                } else {
                    1
                };
                let f = &freqs[k_idx];
                for i in 0..n {
                    let comp = f.component_i128(i);
                    w[i] += if sign > 0 { comp } else { -comp };
                    phase_parts.push((i, sign, f.exponent(i)));
                }
            }
            out.push(ExpansionTerm {
                coeff,
                w,
                phase_parts,
            });
        }
    }
    out
}

/// Quadrature verification that the product weight integrates to (2*pi)^n
/// over the period cube, returned as the relative deviation.
///
/// Oscillations at the top frequency cannot be chased by dyadic refinement,
/// so the rule is a uniform tensor midpoint grid with an odd node count that
/// divides none of the expansion frequencies: integer-frequency cosines then
/// sum to zero exactly over the grid and the deviation measures only the
/// implementation's phase and amplitude errors.
pub fn mass_normalization_check(n: usize, m: u32, cfg: &QuadratureConfig) -> Result<f64> {
    let max_m = match n {
        1 | 2 => 2,
        _ => 1,
    };
    if m > max_m {
        return Err(Error::BadInput(format!(
            "normalization quadrature supports m <= {max_m} in dimension {n}"
        )));
    }
    let weight = RieszProductWeight::new(n, m)?;
    // Pick an odd per-axis node count free of resonance with every expansion
    // frequency component.
    let base = (cfg.base_subdivision as u64).max(match n {
        3 => 257,
        _ => 4099,
    });
    let mut nodes = base | 1;
    'outer: loop {
        for t in &weight.terms {
            for i in 0..n {
                let c = t.w[i].unsigned_abs();
                if c != 0 && c % (nodes as u128) == 0 {
                    nodes += 2;
                    continue 'outer;
                }
            }
        }
        break;
    }
    let h = 2.0 * std::f64::consts::PI / nodes as f64;
    let lo = -std::f64::consts::PI;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation
    let total = (nodes as usize).pow(n as u32);
    let mut idx = vec![0u64; n];
    for _ in 0..total {
        let mut c = [0.0; 3];
        for (d, ci) in c.iter_mut().enumerate().take(n) {
            *ci = lo + (idx[d] as f64 + 0.5) * h;
        }
        let v = weight.eval(&Point::new(&c[..n]))?;
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        // odometer
        for d in 0..n {
            idx[d] += 1;
            if idx[d] < nodes {
                break;
            }
            idx[d] = 0;
        }
    }
    let integral = sum * h.powi(n as i32);
    let expected = (2.0 * std::f64::consts::PI).powi(n as i32);
    Ok((integral - expected).abs() / expected)
}

/// Cutoff index for a segment of length `r`: the largest `k >= 1` with
/// `4^(n k^2) <= 1/r`, or 0 when none exists.
pub fn frequency_cutoff(n: usize, r: f64) -> u32 {
    debug_assert!(r > 0.0);
    let mut k = 0u32;
    loop {
        let next = k + 1;
        let e = n as f64 * (next as f64) * (next as f64);
        // 4^e <= 1/r  <=>  e * ln 4 + ln r <= 0
        if e * (4.0f64).ln() + r.ln() <= 0.0 {
            k = next;
        } else {
            return k;
        }
        if k > 64 {
            return k;
        }
    }
}

/// Line-integral comparability probe: numeric line integral of the product
/// weight along `x0 + t v` against the product of the factors at `x0` up to
/// the cutoff index, times the segment length.
#[derive(Clone, Copy, Debug)]
pub struct Comparability {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub cutoff: u32,
    pub nodes: usize,
    pub converged: bool,
}

pub fn line_integral_comparability(
    n: usize,
    m: u32,
    x0: &Point,
    v: &Point,
    cfg: &QuadratureConfig,
) -> Result<Comparability> {
    let r = v.norm();
    if !(r > 0.0) {
        return Err(Error::BadInput("segment length must be positive".into()));
    }
    let weight = RieszProductWeight::new(n, m)?;
    let cutoff = frequency_cutoff(n, r);

    // Composite midpoint with enough nodes to resolve the fastest phase along
    // the segment, plus a doubling check.
    let mut max_phase = 0.0f64;
    for f in &weight.freqs {
        let mut b = 0.0;
        for i in 0..n {
            b += v.get(i).abs() * (2.0f64).powi((2 * f.exponent(i)) as i32);
        }
        max_phase = max_phase.max(b);
    }
    let nodes = ((max_phase / std::f64::consts::TAU * 8.0).ceil() as usize).clamp(64, 4_000_000);
    let line = |t: f64| -> f64 {
        let p = x0.add(&v.scale(t));
        weight.eval(&p).unwrap_or(f64::NAN)
    };
    let coarse = crate::quad::midpoint_1d(&line, 0.0, 1.0, nodes);
    let fine = crate::quad::midpoint_1d(&line, 0.0, 1.0, 2 * nodes);
    let lhs = fine * r;
    let converged = (fine - coarse).abs() <= cfg.rel_tol.max(1e-9) * fine.abs().max(1e-12);

    let mut rhs = r;
    for k in 1..=cutoff.min(m) {
        rhs *= weight.factor(k, x0)?;
    }
    Ok(Comparability {
        lhs,
        rhs,
        ratio: lhs / rhs,
        cutoff,
        nodes,
        converged,
    })
}

/// Exact mean of the product weight over the small cube around `x` at the
/// scale where all retained factors are effectively constant; also evaluates
/// the log of the product at `x`.
#[derive(Clone, Copy, Debug)]
pub struct ProbeRow {
    pub m: u32,
    pub x: Point,
    pub r_m: f64,
    pub normalized_mass: f64,
    pub log_product: f64,
}

/// Cube half-width for level `m`: `4^(-n (m+1)^2) * pi`.
pub fn probe_radius(n: usize, m: u32) -> f64 {
    let e = -(n as i32) * ((m + 1) as i32).pow(2);
    (2.0f64).powi(2 * e) * std::f64::consts::PI
}

pub fn singularity_probe(
    n: usize,
    m_list: &[u32],
    x_samples: &[Point],
    _cfg: &QuadratureConfig,
) -> Result<Vec<ProbeRow>> {
    let mut rows = Vec::new();
    for &m in m_list {
        let weight = RieszProductWeight::new(n, m)?;
        let r_m = probe_radius(n, m);
        let half = vec![r_m; n];
        for x in x_samples {
            let normalized_mass = weight.box_mean_axis(x, &half)?;
            let log_product = weight.log_eval(x)?;
            rows.push(ProbeRow {
                m,
                x: *x,
                r_m,
                normalized_mass,
                log_product,
            });
        }
    }
    Ok(rows)
}

/// Exact signed and absolute weighted sums `sum_i q^(i k) v_i` over dyadic
/// rationals, scaled by a common positive factor (the same for both), so sign
/// comparisons between them are exact.
pub fn exact_weighted_sums(q: u64, k: i64, v: &[f64]) -> (BigInt, BigInt) {
    let n = v.len() as i64;
    // Common scaling: q^(n |k|) * 2^(-e_min) makes every term integral.
    let mut e_min = 0i64;
    let mut parts = Vec::new();
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        let (mant, e2, sign) = num_traits::Float::integer_decode(vi);
        parts.push((i as i64 + 1, sign, mant, e2 as i64));
        e_min = e_min.min(e2 as i64);
    }
    let mut signed = BigInt::zero();
    let mut abs = BigInt::zero();
    let qb = BigInt::from(q);
    for (i, sign, mant, e2) in parts {
        // exponent of q: i*k + n*|k| >= 0
        let qe = (i * k + n * k.abs()) as u64;
        let term = BigInt::from(mant) * qb.pow(qe as u32) << (e2 - e_min) as u64;
        abs += &term;
        signed += if sign >= 0 { term } else { -term };
    }
    (signed, abs)
}

/// Result of the bad-set enumeration.
#[derive(Clone, Debug, Default)]
pub struct BadSet {
    pub bad: Vec<i64>,
    /// Only populated on the float path: indices too close to the threshold
    /// to classify within the guard band.
    pub ambiguous: Vec<i64>,
}

/// Indices `k` in `k_range` where the signed sum `|sum_i q^(ik) v_i|` falls
/// below `(1-eps)/(1+eps)` times the absolute sum. Exact integer arithmetic
/// when `q` is an integer (every f64 is a dyadic rational, so `v` and `eps`
/// are handled exactly); a compensated float path with a guard band
/// otherwise.
pub fn bad_set(q: f64, epsilon: f64, v: &[f64], k_range: (i64, i64)) -> Result<BadSet> {
    if !(q > 1.0) {
        return Err(Error::BadInput("q must exceed 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadInput("epsilon must lie in (0,1)".into()));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::BadInput("v must be nonzero".into()));
    }
    let mut out = BadSet::default();
    if q.fract() == 0.0 && q <= (1u64 << 53) as f64 {
        let qi = q as u64;
        // epsilon = em * 2^ee exactly; threshold (1-eps)/(1+eps) =
        // (den - num)/(den + num) with num/den = eps.
        let (em, ee, _) = num_traits::Float::integer_decode(epsilon);
        let (num, den) = if ee >= 0 {
            (BigInt::from(em) << ee as u64, BigInt::from(1u8))
        } else {
            (BigInt::from(em), BigInt::from(1u8) << (-ee) as u64)
        };
        for k in k_range.0..=k_range.1 {
            let (signed, abs) = exact_weighted_sums(qi, k, v);
            // |signed| (den+num) < (den-num) abs
            let lhs = signed.abs() * (&den + &num);
            let rhs = (&den - &num) * &abs;
            if lhs < rhs {
                out.bad.push(k);
            }
        }
    } else {
        let thresh = (1.0 - epsilon) / (1.0 + epsilon);
        for k in k_range.0..=k_range.1 {
            let mut signed = Dd::ZERO;
            let mut abs = Dd::ZERO;
            for (i, &vi) in v.iter().enumerate() {
                if vi == 0.0 {
                    continue;
                }
                let t = q.powf((i + 1) as f64 * k as f64); // q^((i+1) k)
                let term = vi * t;
                signed = signed.add_f64(term);
                abs = abs.add_f64(term.abs());
            }
            let lhs = signed.value().abs();
            let rhs = thresh * abs.value();
            let guard = 1e-12 * abs.value().abs();
            if lhs < rhs - guard {
                out.bad.push(k);
            } else if lhs < rhs + guard {
                out.ambiguous.push(k);
            }
        }
    }
    Ok(out)
}

/// Upper bound on the bad-set cardinality: `n (n-1) log((n-1)/eps) / log q`.
pub fn bad_set_bound(q: f64, epsilon: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nn = n as f64;
    nn * (nn - 1.0) * ((nn - 1.0) / epsilon).ln() / q.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn pt(c: &[f64]) -> Point {
        Point::new(c)
    }

    #[test]
    fn factor_at_origin_is_three_halves() {
        assert!((cosine_factor(2, 1, &pt(&[0.0, 0.0])).unwrap() - 1.5).abs() < 1e-15);
        assert!((cosine_factor(2, 5, &pt(&[0.0, 0.0])).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn factor_at_constructed_half_phase() {
        // x = pi / w_1 * e1 puts the phase exactly at pi, so the factor is 1/2.
        let w = FrequencyVector::new(2, 1).unwrap();
        let x = pt(&[std::f64::consts::PI / (w.component_i128(0) as f64), 0.0]);
        let v = cosine_factor(2, 1, &x).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn periodicity_in_each_coordinate() {
        // An f64-rounded 2*pi shift would be amplified by the frequency, so
        // the shift is carried exactly through the phase reduction instead.
        let x = pt(&[0.3777, -1.211]);
        for k in 1..=4u32 {
            let w = FrequencyVector::new(2, k).unwrap();
            let base = w.phase(&x).unwrap().value();
            for axis in 0..2 {
                for periods in [1i32, -1, 3] {
                    let shifted = w.phase_shifted(&x, axis, periods).unwrap().value();
                    let mut d = (shifted - base).abs();
                    d = d.min((d - 2.0 * std::f64::consts::PI).abs());
                    assert!(d < 1e-9, "k={k} axis={axis} periods={periods}: {d}");
                }
            }
        }
    }

    #[test]
    fn product_stays_in_bounds() {
        let w = RieszProductWeight::new(2, 4).unwrap();
        let lo = (0.5f64).powi(4);
        let hi = (1.5f64).powi(4);
        let mut state = 99u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 8.0 - 4.0
        };
        for _ in 0..500 {
            let x = pt(&[next(), next()]);
            let v = w.eval(&x).unwrap();
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn product_at_origin() {
        let w = RieszProductWeight::new(2, 3).unwrap();
        assert!((w.eval(&pt(&[0.0, 0.0])).unwrap() - 3.375).abs() < 1e-12);
    }

    #[test]
    fn empty_product_is_one() {
        let w = RieszProductWeight::new(2, 0).unwrap();
        assert!((w.eval(&pt(&[1.0, 2.0])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn norm_bounds_hold() {
        for n in 1..=3usize {
            for k in 1..=3u32 {
                let w = FrequencyVector::new(n, k).unwrap();
                let bound = (2.0f64).powi((2 * n as u32 * (k * k + k)) as i32);
                assert!(w.norm() >= bound * (1.0 - 1e-12));
                assert!(w.norm() <= 2.0 * bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn box_mean_matches_brute_force_midpoint() {
        let w = RieszProductWeight::new(2, 1).unwrap();
        let center = pt(&[0.21, -0.04]);
        let half = [0.013, 0.019];
        let exact = w.box_mean_axis(&center, &half).unwrap();
        // brute-force tensor midpoint fine enough to resolve the oscillation
        let n = 2001usize;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = center.get(0) - half[0] + (i as f64 + 0.5) * 2.0 * half[0] / n as f64;
                let y = center.get(1) - half[1] + (j as f64 + 0.5) * 2.0 * half[1] / n as f64;
                acc += w.eval(&pt(&[x, y])).unwrap();
            }
        }
        let brute = acc / (n * n) as f64;
        assert!(
            (exact - brute).abs() < 1e-6,
            "exact {exact} vs brute {brute}"
        );
    }

    #[test]
    fn segment_mean_matches_brute_force() {
        let w = RieszProductWeight::new(2, 2).unwrap();
        let x0 = pt(&[0.11, 0.071]);
        let v = pt(&[3e-4, -2e-4]);
        let exact = w.segment_mean(&x0, &v).unwrap();
        let n = 2_000_00usize;
        let mut acc = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            acc += w.eval(&x0.add(&v.scale(t))).unwrap();
        }
        let brute = acc / n as f64;
        assert!(
            (exact - brute).abs() < 1e-7,
            "exact {exact} vs brute {brute}"
        );
    }

    #[test]
    fn normalization_m0_and_m1() {
        let d0 = mass_normalization_check(2, 0, &cfg()).unwrap();
        assert!(d0 < 1e-12);
        let d1 = mass_normalization_check(2, 1, &cfg()).unwrap();
        assert!(d1 < 1e-3, "deviation {d1}");
    }

    #[test]
    fn cutoff_indices() {
        // r = 1: no k with 4^(2k^2) <= 1 exists.
        assert_eq!(frequency_cutoff(2, 1.0), 0);
        // r = 4^-4 * 0.5: 4^2 = 16 <= 512, 4^8 = 65536 > 512 -> K = 1
        assert_eq!(frequency_cutoff(2, 0.5 / 256.0), 1);
        // tiny r admits both k = 1 and k = 2
        assert_eq!(frequency_cutoff(2, 4.5e-11), 2);
    }

    #[test]
    fn comparability_trivial_product() {
        let c = line_integral_comparability(2, 0, &pt(&[0.3, 0.4]), &pt(&[0.6, 0.8]), &cfg())
            .unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-9);
        assert!((c.rhs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bad_set_of_single_component_is_empty() {
        let b = bad_set(3.7, 0.5, &[2.5, 0.0], (-40, 40)).unwrap();
        assert!(b.bad.is_empty());
        assert!(b.ambiguous.is_empty());
    }

    #[test]
    fn bad_set_exact_q4() {
        // The window has log-length 2 ln(4/3)/ln 4 < 1, so it holds at most
        // one integer: cardinality <= ceil(bound) = 1. Same-sign components
        // never land in the set at all (the signed and absolute sums agree),
        // and for opposite signs the window can genuinely capture an index:
        // v = (1, -0.3) at k = 1 gives |4 - 4.8| = 0.8 < 8.8/7.
        assert!(bad_set_bound(4.0, 0.75, 2) < 1.0);
        let mixed = bad_set(4.0, 0.75, &[1.0, -0.3], (-50, 50)).unwrap();
        assert_eq!(mixed.bad, vec![1]);
        let same_sign = bad_set(4.0, 0.75, &[1.0, 0.3], (-50, 50)).unwrap();
        assert!(same_sign.bad.is_empty());
        for v in [[0.7, -2.0], [-1.3, 0.9], [5.0, -0.001], [0.25, 0.75]] {
            let b = bad_set(4.0, 0.75, &v, (-50, 50)).unwrap();
            assert!(b.bad.len() <= 1, "v = {v:?}: {:?}", b.bad);
        }
    }

    #[test]
    fn bad_set_enumeration_respects_bound() {
        let v = [1.0, -1.0, 1.0];
        let b = bad_set(2.0, 0.1, &v, (-60, 60)).unwrap();
        let bound = bad_set_bound(2.0, 0.1, 3);
        assert!(
            (b.bad.len() as f64) <= bound.ceil(),
            "{} vs {bound}",
            b.bad.len()
        );
        // k = 0 is always bad for this v: sum = 1, abs sum = 3.
        assert!(b.bad.contains(&0));
    }

    #[test]
    fn probe_mean_close_to_pointwise_value() {
        let rows = singularity_probe(2, &[0, 1, 2], &[pt(&[0.37, 0.99])], &cfg()).unwrap();
        for r in &rows {
            let w = RieszProductWeight::new(2, r.m).unwrap();
            let v = w.eval(&r.x).unwrap();
            assert!(
                (r.normalized_mass - v).abs() <= 0.02 * v + 1e-12,
                "m={} mean={} value={}",
                r.m,
                r.normalized_mass,
                v
            );
        }
        // m = 0 mean is exactly 1
        assert!((rows[0].normalized_mass - 1.0).abs() < 1e-14);
    }
}

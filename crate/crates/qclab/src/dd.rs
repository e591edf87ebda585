//! Double-double arithmetic and exact reduction of huge phases modulo 2*pi.
//!
//! The lacunary frequency vectors have integer components as large as 4^60,
//! so a phase `<x, w>` can carry ~120 significant bits before the fractional
//! part even starts. Naive f64 evaluation would destroy the phase entirely.
//! Moderate phases are handled in double-double; beyond that the phase is
//! assembled exactly as a dyadic integer and multiplied against a 2048-bit
//! table of 1/(2*pi), Payne-Hanek style, keeping only the fractional window.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Float, Zero};

use crate::{Error, Result};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let e = b - (s - a);
    Dd { hi: s, lo: e }
}

#[inline]
fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: e }
}

#[inline]
pub(crate) fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    let e = a.mul_add(b, -p);
    Dd { hi: p, lo: e }
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    /// 2*pi to ~107 bits.
    pub const TWO_PI: Dd = Dd {
        hi: 6.283185307179586,
        lo: 2.4492935982947064e-16,
    };

    #[inline]
    pub fn from(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let s = two_sum(self.hi, other.hi);
        let t = two_sum(self.lo, other.lo);
        let s2 = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(s2.hi, s2.lo + t.lo)
    }

    #[inline]
    pub fn add_f64(self, other: f64) -> Dd {
        let s = two_sum(self.hi, other);
        quick_two_sum(s.hi, s.lo + self.lo)
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let p = two_prod(self.hi, other.hi);
        let t = self.hi * other.lo + self.lo * other.hi;
        quick_two_sum(p.hi, p.lo + t)
    }

    #[inline]
    pub fn mul_f64(self, other: f64) -> Dd {
        let p = two_prod(self.hi, other);
        quick_two_sum(p.hi, p.lo + self.lo * other)
    }

    #[inline]
    pub fn scale_pow2(self, k: i32) -> Dd {
        let f = (k as f64).exp2();
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    /// Ceiling as an exact integer-valued f64 (valid while |self| < 2^52).
    pub fn ceil(self) -> f64 {
        let c = self.hi.ceil();
        // r = self - c is exact: c is integral and the subtraction cancels.
        let r = self.sub(Dd::from(c));
        if r.hi > 0.0 || (r.hi == 0.0 && r.lo > 0.0) {
            c + 1.0
        } else if r.hi < -1.0 || (r.hi == -1.0 && r.lo <= 0.0) {
            c - 1.0
        } else {
            c
        }
    }

    /// Remainder modulo 2*pi in [0, 2*pi), adequate while |self| < ~2^45.
    pub fn rem_2pi(self) -> Dd {
        let q = (self.hi / Dd::TWO_PI.hi).round();
        let mut r = self.sub(Dd::TWO_PI.mul_f64(q));
        while r.hi < 0.0 {
            r = r.add(Dd::TWO_PI);
        }
        while r.hi >= Dd::TWO_PI.hi {
            r = r.sub(Dd::TWO_PI);
        }
        r
    }
}

/// floor(2^2048 / (2*pi)) — the fractional bits of 1/(2*pi) used by the
/// exact reduction. 512 hex digits, most significant first.
const INV_2PI_HEX: &str = concat!(
    "28be60db9391054a7f09d5f47d4d377036d8a5664f10e4107f9458eaf7aef158",
    "6dc91b8e909374b801924bba827464873f877ac72c4a69cfba208d7d4baed121",
    "3a671c09ad17df904e64758e60d4ce7d272117e2ef7e4a0ec7fe25fff7816603",
    "fbcbc462d6829b47db4d9fb3c9f2c26dd3d18fd9a797fa8b5d49eeb1faf97c5e",
    "cf41ce7de294a4ba9afed7ec47e357421580cc11bf1edaeafc33ef0826bd0d87",
    "6a78e45857b986c219666157c5281a10237ff620135cc9cc41818555b29cea32",
    "58389ef0231ad1f10670d9f3773a024aa0d6711da2e58729b76bd13455c6414f",
    "a97fc1c14fdf8cfa0cb0b793e60c9f6ef0cf49bbdac797be27ce87cd72bc9fc7",
);

const INV_2PI_BITS: i64 = 2048;

fn inv_2pi_table() -> &'static BigUint {
    static TABLE: OnceLock<BigUint> = OnceLock::new();
    TABLE.get_or_init(|| BigUint::parse_bytes(INV_2PI_HEX.as_bytes(), 16).expect("valid table"))
}

/// Reduce `sum_i x[i] * 2^(p[i])` modulo 2*pi, exactly.
///
/// Every f64 is a dyadic rational, so the sum is assembled as an exact
/// integer times a power of two before the single inexact step (multiplying
/// by the 1/(2*pi) table). Result lies in [0, 2*pi); absolute error is below
/// 2^-90 provided the total magnitude stays under ~2^1900.
pub fn reduce_phase_pow2(terms: &[(f64, i64)]) -> Result<Dd> {
    // Fast path: when the full sum fits well inside double-double range,
    // power-of-two scaling is exact and the compensated sum keeps ~106 bits.
    let mut magnitude = 0.0f64;
    let mut fits = true;
    for &(x, p) in terms {
        if !x.is_finite() {
            return Err(Error::PrecisionLoss);
        }
        if p.abs() > 1000 {
            fits = false;
            break;
        }
        magnitude += x.abs() * (p as f64).exp2();
    }
    if fits && magnitude < (2.0f64).powi(45) {
        let mut acc = Dd::ZERO;
        for &(x, p) in terms {
            acc = acc.add_f64(x * (p as f64).exp2());
        }
        return Ok(acc.rem_2pi());
    }

    // Exact path.
    let mut f_min = i64::MAX;
    let mut parts: Vec<(i8, u64, i64)> = Vec::with_capacity(terms.len());
    for &(x, p) in terms {
        if x == 0.0 {
            continue;
        }
        let (m, e, s) = Float::integer_decode(x);
        let f = e as i64 + p;
        parts.push((s, m, f));
        f_min = f_min.min(f);
    }
    if parts.is_empty() {
        return Ok(Dd::ZERO);
    }
    let mut acc = BigInt::zero();
    for (s, m, f) in parts {
        let shifted = BigUint::from(m) << u64::try_from(f - f_min).expect("f >= f_min");
        let term = BigInt::from_biguint(if s >= 0 { Sign::Plus } else { Sign::Minus }, shifted);
        acc += term;
    }
    if acc.is_zero() {
        return Ok(Dd::ZERO);
    }
    let negative = acc.sign() == Sign::Minus;
    let a = acc.magnitude().clone();

    // value = a * 2^f_min; value/(2*pi) ~= a * table * 2^(f_min - 2048).
    let bits = a.bits() as i64;
    if bits + f_min + 96 > INV_2PI_BITS {
        return Err(Error::PrecisionLoss);
    }
    let m = &a * inv_2pi_table();
    // Fraction point sits at bit (2048 - f_min); keep the top 128 bits below it.
    let window = INV_2PI_BITS - f_min;
    debug_assert!(window > 0);
    let frac = m % (BigUint::from(1u8) << (window as u64));
    let eff = window.min(128);
    let top = &frac >> ((window - eff) as u64);
    // little-endian digits: value = digits[0] + digits[1] * 2^64
    let digits = top.to_u64_digits();
    let (w1, w0) = match digits.len() {
        0 => (0u64, 0u64),
        1 => (0, digits[0]),
        _ => (digits[1], digits[0]),
    };
    // top < 2^eff; fraction = top / 2^eff = w1*2^(64-eff) + w0*2^(-eff).
    let f_hi = (w1 as f64) * (2.0f64).powi(64 - eff as i32);
    let f_lo = (w0 as f64) * (2.0f64).powi(-(eff as i32));
    let frac_dd = Dd::from(f_hi).add_f64(f_lo);
    let mut angle = frac_dd.mul(Dd::TWO_PI);
    if negative {
        angle = Dd::TWO_PI.sub(angle).rem_2pi();
    }
    Ok(angle)
}

/// Reduce `sum_i x[i] * 4^(e4[i])` modulo 2*pi.
pub fn reduce_phase_pow4(x: &[f64], e4: &[u32]) -> Result<Dd> {
    debug_assert_eq!(x.len(), e4.len());
    let terms: Vec<(f64, i64)> = x
        .iter()
        .zip(e4)
        .map(|(&xi, &ei)| (xi, 2 * ei as i64))
        .collect();
    reduce_phase_pow2(&terms)
}

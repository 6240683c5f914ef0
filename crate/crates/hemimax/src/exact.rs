//! Exact arithmetic substrate: arbitrary-precision rationals, the quadratic
//! field Q(sqrt2), rational intervals, and certified rational bounds on square
//! roots. Nothing in this module ever rounds through floating point.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

/// Arbitrary-precision rational. `BigRational` keeps the invariants we need:
/// always in lowest terms, denominator positive, zero is 0/1.
pub type Rat = BigRational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("square root of negative rational")]
    NegativeRadicand,
    #[error("cannot parse rational from {0:?}")]
    BadRational(String),
}

/// Shorthand constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Lossy numeric view of a rational, for reports and oracles only.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"p/q"` or `"p"` (no decimals, by design: configuration values must
/// be exact).
pub fn parse_rat(text: &str) -> Result<Rat, ExactError> {
    let text = text.trim();
    let bad = || ExactError::BadRational(text.to_string());
    match text.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rat::new(n, d))
        }
        None => {
            let n = BigInt::from_str(text).map_err(|_| bad())?;
            Ok(Rat::from_integer(n))
        }
    }
}

/// An element `a + b*sqrt(2)` of the field Q(sqrt2). The representation is
/// unique because sqrt2 is irrational, so equality and sign are decidable by
/// integer arithmetic alone.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Q2 {
    pub rat: Rat,
    pub sqrt2: Rat,
}

impl Q2 {
    pub fn new(rat: Rat, sqrt2: Rat) -> Self {
        Q2 { rat, sqrt2 }
    }

    pub fn from_rat(r: Rat) -> Self {
        Q2 {
            rat: r,
            sqrt2: Rat::zero(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rat(rat_int(n))
    }

    /// `n/d + (sn/sd)*sqrt2`
    pub fn from_parts(n: i64, d: i64, sn: i64, sd: i64) -> Self {
        Q2 {
            rat: rat(n, d),
            sqrt2: rat(sn, sd),
        }
    }

    pub fn zero() -> Self {
        Self::from_rat(Rat::zero())
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn sqrt2() -> Self {
        Q2 {
            rat: Rat::zero(),
            sqrt2: Rat::one(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.sqrt2.is_zero()
    }

    /// Exact sign of `a + b*sqrt2`, decided by comparing `a^2` against `2 b^2`
    /// with a sign case analysis. Never consults a floating approximation.
    pub fn sign(&self) -> i32 {
        let sa = rat_sign(&self.rat);
        let sb = rat_sign(&self.sqrt2);
        match (sa, sb) {
            (0, 0) => 0,
            (s, 0) => s,
            (0, s) => s,
            (1, 1) => 1,
            (-1, -1) => -1,
            (1, -1) => {
                // a > 0, b < 0: positive iff a > |b| sqrt2 iff a^2 > 2 b^2.
                cmp_sq_2sq(&self.rat, &self.sqrt2)
            }
            (-1, 1) => -cmp_sq_2sq(&self.rat, &self.sqrt2),
            _ => unreachable!(),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign() > 0
    }

    pub fn is_negative(&self) -> bool {
        self.sign() < 0
    }

    pub fn abs(&self) -> Q2 {
        if self.sign() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn scale(&self, r: &Rat) -> Q2 {
        Q2 {
            rat: &self.rat * r,
            sqrt2: &self.sqrt2 * r,
        }
    }

    /// Multiplicative inverse; `None` for zero. `(a + b s)^-1 = (a - b s)/(a^2 - 2 b^2)`.
    pub fn inverse(&self) -> Option<Q2> {
        if self.is_zero() {
            return None;
        }
        let norm = &self.rat * &self.rat - rat_int(2) * &self.sqrt2 * &self.sqrt2;
        debug_assert!(
            !norm.is_zero(),
            "a^2 = 2 b^2 is impossible for nonzero rationals"
        );
        Some(Q2 {
            rat: &self.rat / &norm,
            sqrt2: -(&self.sqrt2 / &norm),
        })
    }

    pub fn div(&self, other: &Q2) -> Option<Q2> {
        other.inverse().map(|inv| self * &inv)
    }

    /// Exact comparison via the sign of the difference.
    pub fn cmp_exact(&self, other: &Q2) -> std::cmp::Ordering {
        match (self - other).sign() {
            s if s < 0 => std::cmp::Ordering::Less,
            0 => std::cmp::Ordering::Equal,
            _ => std::cmp::Ordering::Greater,
        }
    }

    pub fn le(&self, other: &Q2) -> bool {
        self.cmp_exact(other) != std::cmp::Ordering::Greater
    }

    pub fn lt(&self, other: &Q2) -> bool {
        self.cmp_exact(other) == std::cmp::Ordering::Less
    }

    /// Lossy numeric view, used only in reports and oracles.
    pub fn to_f64(&self) -> f64 {
        self.rat.to_f64().unwrap_or(f64::NAN)
            + self.sqrt2.to_f64().unwrap_or(f64::NAN) * std::f64::consts::SQRT_2
    }

    /// Rational upper bound obtained from `sqrt2 <= up`; sound only when the
    /// sqrt2 part is nonnegative (checked by the caller).
    pub fn rational_upper_with(&self, up: &Rat) -> Rat {
        &self.rat + &self.sqrt2 * up
    }
}

fn rat_sign(r: &Rat) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

/// Sign of `a^2 - 2 b^2` as integers: `(an*bd)^2 - 2 (bn*ad)^2`.
fn cmp_sq_2sq(a: &Rat, b: &Rat) -> i32 {
    let lhs = a.numer() * b.denom();
    let rhs = b.numer() * a.denom();
    let lhs2 = &lhs * &lhs;
    let rhs2 = BigInt::from(2) * &rhs * &rhs;
    match lhs2.cmp(&rhs2) {
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
        std::cmp::Ordering::Greater => 1,
    }
}

/// Spec-level operation: exact sign of `a + b*sqrt2` in `{-1, 0, +1}`.
pub fn q2_sign(x: &Q2) -> i32 {
    x.sign()
}

macro_rules! q2_binop {
    ($trait:ident, $method:ident, |$a:ident, $b:ident| $body:expr) => {
        impl<'a, 'b> $trait<&'b Q2> for &'a Q2 {
            type Output = Q2;
            fn $method(self, other: &'b Q2) -> Q2 {
                let $a = self;
                let $b = other;
                $body
            }
        }
        impl $trait<Q2> for Q2 {
            type Output = Q2;
            fn $method(self, other: Q2) -> Q2 {
                (&self).$method(&other)
            }
        }
    };
}

q2_binop!(Add, add, |a, b| Q2 {
    rat: &a.rat + &b.rat,
    sqrt2: &a.sqrt2 + &b.sqrt2
});
q2_binop!(Sub, sub, |a, b| Q2 {
    rat: &a.rat - &b.rat,
    sqrt2: &a.sqrt2 - &b.sqrt2
});
q2_binop!(Mul, mul, |a, b| Q2 {
    rat: &a.rat * &b.rat + rat_int(2) * &a.sqrt2 * &b.sqrt2,
    sqrt2: &a.rat * &b.sqrt2 + &a.sqrt2 * &b.rat,
});

impl Neg for &Q2 {
    type Output = Q2;
    fn neg(self) -> Q2 {
        Q2 {
            rat: -&self.rat,
            sqrt2: -&self.sqrt2,
        }
    }
}

impl Neg for Q2 {
    type Output = Q2;
    fn neg(self) -> Q2 {
        -&self
    }
}

impl fmt::Display for Q2 {
    /// Canonical form `a+b*sqrt2` with both rationals in lowest terms; pure
    /// parts drop the vanished half (`-8`, `16*sqrt2`), zero prints `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        if self.sqrt2.is_zero() {
            return write!(f, "{}", self.rat);
        }
        if self.rat.is_zero() {
            return write!(f, "{}*sqrt2", self.sqrt2);
        }
        if self.sqrt2.is_positive() {
            write!(f, "{}+{}*sqrt2", self.rat, self.sqrt2)
        } else {
            write!(f, "{}{}*sqrt2", self.rat, self.sqrt2)
        }
    }
}

impl fmt::Debug for Q2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Parses the canonical `Display` form back.
pub fn parse_q2(text: &str) -> Result<Q2, ExactError> {
    let text = text.trim();
    let bad = || ExactError::BadRational(text.to_string());
    if let Some(stripped) = text.strip_suffix("*sqrt2") {
        // split the sqrt2 coefficient off the tail: find the sign that starts it
        // (skip the leading sign of the rational part).
        let bytes = stripped.as_bytes();
        let mut split = None;
        for i in (1..bytes.len()).rev() {
            if bytes[i] == b'+' || (bytes[i] == b'-' && bytes[i - 1] != b'/') {
                // a '-' directly after '/' can't occur in lowest-terms output
                let prev = bytes[i - 1];
                if prev.is_ascii_digit() {
                    split = Some(i);
                    break;
                }
            }
        }
        match split {
            Some(i) => {
                let head = &stripped[..i];
                let tail = &stripped[i..];
                let tail = tail.strip_prefix('+').unwrap_or(tail);
                Ok(Q2::new(parse_rat(head)?, parse_rat(tail)?))
            }
            None => Ok(Q2::new(Rat::zero(), parse_rat(stripped)?)),
        }
    } else if text.contains("sqrt2") {
        Err(bad())
    } else {
        Ok(Q2::from_rat(parse_rat(text)?))
    }
}

/// Floor of the integer square root (exact).
pub fn isqrt_floor(n: &BigInt) -> BigInt {
    assert!(!n.is_negative(), "isqrt of negative integer");
    n.sqrt()
}

/// Ceiling of the integer square root (exact).
pub fn isqrt_ceil(n: &BigInt) -> BigInt {
    let s = isqrt_floor(n);
    if &(&s * &s) == n {
        s
    } else {
        s + 1
    }
}

/// Certified upper bound on sqrt(q): returns `r >= sqrt(q)` with
/// `r - sqrt(q) <= 2^-k`; exact when `q` is a perfect rational square.
/// Implemented as the ceiling integer square root of `numer*denom*4^k`
/// over `denom*2^k`.
pub fn sqrt_upper(q: &Rat, k: u32) -> Result<Rat, ExactError> {
    if q.is_negative() {
        return Err(ExactError::NegativeRadicand);
    }
    let scaled = q.numer() * q.denom() << (2 * k as usize);
    let root = isqrt_ceil(&scaled);
    Ok(Rat::new(root, q.denom() << (k as usize)))
}

/// Certified lower bound on sqrt(q): mirror of [`sqrt_upper`] with the floor
/// root, so `r <= sqrt(q)` and `sqrt(q) - r <= 2^-k`.
pub fn sqrt_lower(q: &Rat, k: u32) -> Result<Rat, ExactError> {
    if q.is_negative() {
        return Err(ExactError::NegativeRadicand);
    }
    let scaled = q.numer() * q.denom() << (2 * k as usize);
    let root = isqrt_floor(&scaled);
    Ok(Rat::new(root, q.denom() << (k as usize)))
}

/// A closed rational interval; operations produce enclosures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatInterval {
    pub lo: Rat,
    pub hi: Rat,
}

impl RatInterval {
    pub fn new(lo: Rat, hi: Rat) -> Self {
        assert!(lo <= hi, "interval bounds out of order");
        RatInterval { lo, hi }
    }

    pub fn point(v: Rat) -> Self {
        RatInterval {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn width(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn contains(&self, v: &Rat) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn add(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    pub fn neg(&self) -> RatInterval {
        RatInterval {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }

    pub fn mul(&self, other: &RatInterval) -> RatInterval {
        let corners = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let mut lo = corners[0].clone();
        let mut hi = corners[0].clone();
        for c in &corners[1..] {
            if c < &lo {
                lo = c.clone();
            }
            if c > &hi {
                hi = c.clone();
            }
        }
        RatInterval { lo, hi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_integer::Integer;
    use proptest::prelude::*;

    #[test]
    fn q2_sign_examples() {
        assert_eq!(q2_sign(&Q2::zero()), 0);
        assert_eq!(q2_sign(&Q2::from_parts(1, 1, -1, 1)), -1); // 1 - sqrt2 < 0
                                                               // 3 - 2*sqrt2 > 0 because 3^2 = 9 > 2*2^2 = 8
        assert_eq!(q2_sign(&Q2::from_parts(3, 1, -2, 1)), 1);
        assert_eq!(q2_sign(&Q2::from_parts(-3, 1, 2, 1)), -1);
        assert_eq!(q2_sign(&Q2::from_parts(0, 1, 5, 1)), 1);
        assert_eq!(q2_sign(&Q2::from_parts(-7, 1, 5, 1)), 1); // 5 sqrt2 ~ 7.07 > 7
        assert_eq!(q2_sign(&Q2::from_parts(-8, 1, 5, 1)), -1);
    }

    #[test]
    fn q2_arith_examples() {
        let one_plus = Q2::from_parts(1, 1, 1, 1);
        let sq = &one_plus * &one_plus;
        assert_eq!(sq, Q2::from_parts(3, 1, 2, 1)); // (1+sqrt2)^2 = 3+2 sqrt2
        let a = Q2::from_int(5) + Q2::from_parts(0, 1, -3, 1);
        assert_eq!(a, Q2::from_parts(5, 1, -3, 1));
        let two = &Q2::sqrt2() * &Q2::sqrt2();
        assert_eq!(two, Q2::from_int(2));
    }

    #[test]
    fn q2_inverse() {
        let x = Q2::from_parts(3, 1, -2, 1);
        let inv = x.inverse().unwrap();
        assert_eq!(&x * &inv, Q2::one());
        assert!(Q2::zero().inverse().is_none());
    }

    #[test]
    fn sqrt_bound_examples() {
        assert_eq!(sqrt_upper(&rat_int(0), 12).unwrap(), rat_int(0));
        assert_eq!(sqrt_upper(&rat_int(4), 8).unwrap(), rat_int(2));
        assert_eq!(sqrt_lower(&rat_int(0), 12).unwrap(), rat_int(0));
        assert_eq!(sqrt_lower(&rat_int(9), 5).unwrap(), rat_int(3));
        // ceil(sqrt(2*4^10)) = 1449, floor = 1448
        assert_eq!(sqrt_upper(&rat_int(2), 10).unwrap(), rat(1449, 1024));
        assert_eq!(sqrt_lower(&rat_int(2), 10).unwrap(), rat(1448, 1024));
        assert_eq!(
            sqrt_upper(&rat(-1, 2), 10),
            Err(ExactError::NegativeRadicand)
        );
    }

    #[test]
    fn parse_round_trip() {
        for text in [
            "0",
            "-8",
            "3/7",
            "16*sqrt2",
            "-1054/147*sqrt2",
            "-1115/196-1054/147*sqrt2",
            "5+1/3*sqrt2",
        ] {
            let v = parse_q2(text).unwrap();
            assert_eq!(parse_q2(&v.to_string()).unwrap(), v, "{text}");
        }
        assert!(parse_rat("1.5").is_err());
        assert!(parse_rat("1/0").is_err());
    }

    #[test]
    fn interval_encloses_products() {
        let a = RatInterval::new(rat(-1, 2), rat(1, 3));
        let b = RatInterval::new(rat(-2, 1), rat(5, 1));
        let m = a.mul(&b);
        for (x, y) in [(-1i64, 2i64), (1, 3)]
            .iter()
            .zip([(-2i64, 1i64), (5, 1)].iter())
        {
            let p = rat(x.0, x.1) * rat(y.0, y.1);
            assert!(m.contains(&p));
        }
        assert!(m.contains(&rat_int(0)));
    }

    #[test]
    fn q2_sign_matches_high_precision_bulk() {
        // 10^4 random nonzero inputs against a 200-bit integer-sqrt oracle
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let scale = BigInt::one() << 200usize;
        let s_lo = (BigInt::from(2) * &scale * &scale).sqrt();
        let s_hi = &s_lo + 1u32;
        for _ in 0..10_000 {
            let a = rat(
                rng.gen_range(-1_000_000..1_000_000),
                rng.gen_range(1..1_000_000),
            );
            let b = rat(
                rng.gen_range(-1_000_000..1_000_000),
                rng.gen_range(1..1_000_000),
            );
            let x = Q2::new(a.clone(), b.clone());
            if x.is_zero() {
                continue;
            }
            let pick = |hi: bool| {
                if hi != b.is_negative() {
                    Rat::new(s_hi.clone(), scale.clone())
                } else {
                    Rat::new(s_lo.clone(), scale.clone())
                }
            };
            let lo = &a + &b * pick(false);
            let hi = &a + &b * pick(true);
            let sg = q2_sign(&x);
            if lo.is_positive() {
                assert_eq!(sg, 1, "{x}");
            }
            if hi.is_negative() {
                assert_eq!(sg, -1, "{x}");
            }
            // the 200-bit bracket is wide enough to decide every sample here
            assert!(lo.is_positive() || hi.is_negative() || x.is_zero());
        }
    }

    fn rat_strategy() -> impl Strategy<Value = Rat> {
        (any::<i32>(), 1..100_000i32).prop_map(|(n, d)| rat(n as i64, d as i64))
    }

    proptest! {
        #[test]
        fn sqrt_sandwich(q in (0i64..=16_000_000).prop_map(|n| rat(n, 1_000_000)),
                         k in 4u32..=40) {
            let lo = sqrt_lower(&q, k).unwrap();
            let hi = sqrt_upper(&q, k).unwrap();
            prop_assert!(&lo * &lo <= q);
            prop_assert!(q <= &hi * &hi);
            let gap = rat_int(2) / Rat::from_integer(BigInt::one() << (k as usize));
            prop_assert!(&hi - &lo <= gap);
        }

        #[test]
        fn q2_sign_matches_high_precision(a in rat_strategy(), b in rat_strategy()) {
            let x = Q2::new(a.clone(), b.clone());
            // independent oracle: bound sqrt2 by integer square roots at 2^-200
            let scale = BigInt::one() << 200usize;
            let two_scaled = BigInt::from(2) * &scale * &scale;
            let s_lo = two_scaled.sqrt();
            let s_hi = &s_lo + 1u32;
            let lo = &a + &b * Rat::new(if b.is_negative() { s_hi.clone() } else { s_lo.clone() }, scale.clone());
            let hi = &a + &b * Rat::new(if b.is_negative() { s_lo } else { s_hi }, scale);
            let sg = q2_sign(&x);
            if lo.is_positive() { prop_assert_eq!(sg, 1); }
            if hi.is_negative() { prop_assert_eq!(sg, -1); }
        }

        #[test]
        fn q2_ring_axioms(a in rat_strategy(), b in rat_strategy(),
                          c in rat_strategy(), d in rat_strategy(),
                          e in rat_strategy(), f in rat_strategy()) {
            let x = Q2::new(a, b);
            let y = Q2::new(c, d);
            let z = Q2::new(e, f);
            prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
            prop_assert_eq!(&x * &y, &y * &x);
            prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
            prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
        }

        #[test]
        fn rat_canonical_after_ops(a in rat_strategy(), b in rat_strategy()) {
            let sum = &a + &b;
            let prod = &a * &b;
            for r in [&sum, &prod] {
                prop_assert!(r.denom().is_positive());
                prop_assert!(r.numer().gcd(r.denom()).is_one());
            }
        }
    }
}

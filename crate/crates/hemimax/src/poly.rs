//! Sparse multivariate polynomials in (s, t, u, v) over Q(sqrt2), homogeneous
//! decomposition, and the majorization transforms used by the local analysis:
//! coefficient absolutization and the replacement of a bounded monomial by a
//! dominating diagonal quadratic form.

use crate::exact::{parse_q2, rat_int, Rat, Q2};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

pub const VAR_NAMES: [&str; 4] = ["s", "t", "u", "v"];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("polynomial is not homogeneous")]
    NotHomogeneous,
    #[error("negative coefficient where a nonnegative one is required")]
    NegativeCoefficient,
    #[error("cannot parse polynomial from {0:?}")]
    BadPolynomial(String),
}

/// Exponent tuple for (s, t, u, v). Ordered by total degree, then
/// lexicographically, which fixes the canonical serialization order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Monomial {
    pub exps: [u8; 4],
}

impl Monomial {
    pub const ONE: Monomial = Monomial { exps: [0, 0, 0, 0] };

    pub fn new(exps: [u8; 4]) -> Self {
        Monomial { exps }
    }

    pub fn var(i: usize) -> Self {
        let mut exps = [0u8; 4];
        exps[i] = 1;
        Monomial { exps }
    }

    pub fn total_degree(&self) -> u32 {
        self.exps.iter().map(|&e| e as u32).sum()
    }

    pub fn is_all_even(&self) -> bool {
        self.exps.iter().all(|&e| e % 2 == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut exps = [0u8; 4];
        for i in 0..4 {
            exps[i] = self.exps[i] + other.exps[i];
        }
        Monomial { exps }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.total_degree(), self.exps).cmp(&(other.total_degree(), other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.total_degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "{}", VAR_NAMES[i])?;
            } else {
                write!(f, "{}^{}", VAR_NAMES[i], e)?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial: finite map from monomials to nonzero Q(sqrt2)
/// coefficients. All arithmetic is exact; zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct MultiPoly {
    terms: BTreeMap<Monomial, Q2>,
}

impl MultiPoly {
    pub fn zero() -> Self {
        MultiPoly {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: Q2) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::ONE, c);
        p
    }

    pub fn var(i: usize) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::var(i), Q2::one());
        p
    }

    pub fn term(m: Monomial, c: Q2) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of stored monomials.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Number of nonzero coordinates in the Q-basis {1, sqrt2}: a mixed
    /// coefficient a+b*sqrt2 counts twice. This is the counting convention the
    /// reference tallies use.
    pub fn component_count(&self) -> usize {
        self.terms
            .values()
            .map(|c| (!c.rat.is_zero()) as usize + (!c.sqrt2.is_zero()) as usize)
            .sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q2)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Q2 {
        self.terms.get(m).cloned().unwrap_or_else(Q2::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: Q2) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for (m, c) in other.terms.iter() {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &MultiPoly) -> MultiPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MultiPoly {
        MultiPoly {
            terms: self.terms.iter().map(|(m, c)| (*m, -c)).collect(),
        }
    }

    pub fn scale(&self, c: &Q2) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero();
        }
        MultiPoly {
            terms: self.terms.iter().map(|(m, x)| (*m, x * c)).collect(),
        }
    }

    pub fn scale_rat(&self, r: &Rat) -> MultiPoly {
        self.scale(&Q2::from_rat(r.clone()))
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        let mut out = MultiPoly::zero();
        for (m1, c1) in self.terms.iter() {
            for (m2, c2) in other.terms.iter() {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> MultiPoly {
        let mut out = MultiPoly::constant(Q2::one());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.total_degree()).min()
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.total_degree()).max()
    }

    /// The degree-d homogeneous part. Summing over all degrees reconstructs
    /// the polynomial.
    pub fn homogeneous_component(&self, d: u32) -> MultiPoly {
        MultiPoly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.total_degree() == d)
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    /// Exact evaluation at a rational point (a ring homomorphism).
    pub fn eval(&self, p: &[Rat; 4]) -> Q2 {
        let maxes = self.terms.keys().fold([0u8; 4], |mut acc, m| {
            for i in 0..4 {
                acc[i] = acc[i].max(m.exps[i]);
            }
            acc
        });
        let mut pows: [Vec<Rat>; 4] = [vec![], vec![], vec![], vec![]];
        for i in 0..4 {
            let mut cur = Rat::one();
            pows[i].push(cur.clone());
            for _ in 0..maxes[i] {
                cur = &cur * &p[i];
                pows[i].push(cur.clone());
            }
        }
        let mut rat_acc = Rat::zero();
        let mut sqrt2_acc = Rat::zero();
        for (m, c) in self.terms.iter() {
            let mono = &pows[0][m.exps[0] as usize]
                * &pows[1][m.exps[1] as usize]
                * &pows[2][m.exps[2] as usize]
                * &pows[3][m.exps[3] as usize];
            if !c.rat.is_zero() {
                rat_acc += &c.rat * &mono;
            }
            if !c.sqrt2.is_zero() {
                sqrt2_acc += &c.sqrt2 * &mono;
            }
        }
        Q2::new(rat_acc, sqrt2_acc)
    }

    /// Substitutes an exact Q(sqrt2) value for one variable.
    pub fn substitute_q2(&self, var: usize, value: &Q2) -> MultiPoly {
        let max_e = self.terms.keys().map(|m| m.exps[var]).max().unwrap_or(0);
        let mut pows = Vec::with_capacity(max_e as usize + 1);
        pows.push(Q2::one());
        for _ in 0..max_e {
            pows.push(pows.last().unwrap() * value);
        }
        let mut out = MultiPoly::zero();
        for (m, c) in self.terms.iter() {
            let mut exps = m.exps;
            let e = exps[var];
            exps[var] = 0;
            out.add_term(Monomial::new(exps), c * &pows[e as usize]);
        }
        out
    }

    pub fn substitute_rat(&self, var: usize, value: &Rat) -> MultiPoly {
        self.substitute_q2(var, &Q2::from_rat(value.clone()))
    }

    /// Exact evaluation at the dyadic point `(n0, n1, n2, n3) / 2^log2_den`
    /// for integer-coefficient polynomials: accumulates the two Q-components
    /// as big integers over the common denominator `2^(log2_den * maxdeg)`.
    /// Considerably faster than [`MultiPoly::eval`] on large polynomials. Panics if a
    /// coefficient is fractional.
    pub fn eval_dyadic(&self, nums: [i64; 4], log2_den: u32) -> Q2 {
        use num_bigint::BigInt;
        if self.terms.is_empty() {
            return Q2::zero();
        }
        let maxdeg = self.max_degree().unwrap();
        let maxes = self.terms.keys().fold([0u8; 4], |mut acc, m| {
            for i in 0..4 {
                acc[i] = acc[i].max(m.exps[i]);
            }
            acc
        });
        let mut pows: [Vec<BigInt>; 4] = [vec![], vec![], vec![], vec![]];
        for i in 0..4 {
            let mut cur = BigInt::one();
            pows[i].push(cur.clone());
            for _ in 0..maxes[i] {
                cur *= BigInt::from(nums[i]);
                pows[i].push(cur.clone());
            }
        }
        let mut acc_rat = BigInt::zero();
        let mut acc_sqrt2 = BigInt::zero();
        for (m, c) in self.terms.iter() {
            assert!(
                c.rat.denom().is_one() && c.sqrt2.denom().is_one(),
                "eval_dyadic requires integer coefficients"
            );
            let deg = m.total_degree();
            let mono = &pows[0][m.exps[0] as usize]
                * &pows[1][m.exps[1] as usize]
                * &pows[2][m.exps[2] as usize]
                * &pows[3][m.exps[3] as usize];
            let padded = mono << ((log2_den * (maxdeg - deg)) as usize);
            if !c.rat.is_zero() {
                acc_rat += c.rat.numer() * &padded;
            }
            if !c.sqrt2.is_zero() {
                acc_sqrt2 += c.sqrt2.numer() * &padded;
            }
        }
        let den = BigInt::one() << ((log2_den * maxdeg) as usize);
        Q2::new(Rat::new(acc_rat, den.clone()), Rat::new(acc_sqrt2, den))
    }

    /// Substitutes `var -> -var` (used to reorient an axis).
    pub fn flip_var(&self, var: usize) -> MultiPoly {
        MultiPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    if m.exps[var] % 2 == 1 {
                        (*m, -c)
                    } else {
                        (*m, c.clone())
                    }
                })
                .collect(),
        }
    }

    /// Coefficient absolutization: a term with all-even exponents and a
    /// negative coefficient is dropped; every other coefficient is replaced
    /// by its absolute value. The result dominates the input pointwise after
    /// substituting absolute values for the variables.
    pub fn abs_majorant(&self) -> MultiPoly {
        let mut out = MultiPoly::zero();
        for (m, c) in self.terms.iter() {
            let sign = c.sign();
            if m.is_all_even() && sign < 0 {
                continue;
            }
            out.add_term(*m, c.abs());
        }
        out
    }

    /// Extracts the coefficient polynomial of `var^power` (all terms whose
    /// exponent in `var` equals `power`, with that variable divided out).
    pub fn coeff_of_var_power(&self, var: usize, power: u8) -> MultiPoly {
        let mut out = MultiPoly::zero();
        for (m, c) in self.terms.iter() {
            if m.exps[var] == power {
                let mut exps = m.exps;
                exps[var] = 0;
                out.add_term(Monomial::new(exps), c.clone());
            }
        }
        out
    }
}

impl fmt::Display for MultiPoly {
    /// Canonical form: terms in graded-lex order, each as `(<coeff>) <mono>`,
    /// joined by ` + `. The zero polynomial prints `(0) 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "(0) 1");
        }
        let mut first = true;
        for (m, c) in self.terms.iter() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}) {}", c, m)?;
        }
        Ok(())
    }
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Parses the canonical `Display` form.
pub fn parse_poly(text: &str) -> Result<MultiPoly, PolyError> {
    let bad = || PolyError::BadPolynomial(text.to_string());
    let mut out = MultiPoly::zero();
    for chunk in text.split(" + ") {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let rest = chunk.strip_prefix('(').ok_or_else(bad)?;
        let close = rest.find(')').ok_or_else(bad)?;
        let coeff = parse_q2(&rest[..close]).map_err(|_| bad())?;
        let mono_text = rest[close + 1..].trim();
        let mut exps = [0u8; 4];
        if mono_text != "1" {
            for factor in mono_text.split('*') {
                let (name, e) = match factor.split_once('^') {
                    Some((n, e)) => (n, e.parse::<u8>().map_err(|_| bad())?),
                    None => (factor, 1),
                };
                let idx = VAR_NAMES.iter().position(|&v| v == name).ok_or_else(bad)?;
                exps[idx] += e;
            }
        }
        out.add_term(Monomial::new(exps), coeff);
    }
    Ok(out)
}

/// A quotient `scalar * numerator / ((s^2+1)^e0 (t^2+1)^e1 (u^2+1)^e2 (v^2+1)^e3)`.
/// The denominator factors are strictly positive on all of R^4, so the sign of
/// the function equals the sign of `scalar * numerator`.
#[derive(Clone, Debug)]
pub struct RationalFn {
    pub scalar: Q2,
    pub numerator: MultiPoly,
    pub denom_exps: [u32; 4],
}

impl RationalFn {
    pub fn eval(&self, p: &[Rat; 4]) -> Q2 {
        let mut den = Rat::one();
        for i in 0..4 {
            let sq1 = &p[i] * &p[i] + Rat::one();
            for _ in 0..self.denom_exps[i] {
                den = &den * &sq1;
            }
        }
        let num = self.numerator.eval(p);
        (&self.scalar * &num).scale(&den.recip())
    }

    /// Multiplies out against `(s^2+1)^t0 ... (v^2+1)^t3`; the target exponents
    /// must dominate the denominator exponents so the division is exact.
    pub fn cleared(&self, target: [u32; 4]) -> MultiPoly {
        let mut out = self.numerator.scale(&self.scalar);
        for i in 0..4 {
            assert!(
                target[i] >= self.denom_exps[i],
                "cannot clear denominator: target exponent too small"
            );
            let sq1 = MultiPoly::var(i)
                .mul(&MultiPoly::var(i))
                .add(&MultiPoly::constant(Q2::one()));
            for _ in 0..(target[i] - self.denom_exps[i]) {
                out = out.mul(&sq1);
            }
        }
        out
    }
}

/// Diagonal quadratic form `c0 s^2 + c1 t^2 + c2 u^2 + c3 v^2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiagQuadForm {
    pub coeffs: [Q2; 4],
}

impl DiagQuadForm {
    pub fn zero() -> Self {
        DiagQuadForm {
            coeffs: [Q2::zero(), Q2::zero(), Q2::zero(), Q2::zero()],
        }
    }

    pub fn add(&self, other: &DiagQuadForm) -> DiagQuadForm {
        let mut coeffs = self.coeffs.clone();
        for i in 0..4 {
            coeffs[i] = &coeffs[i] + &other.coeffs[i];
        }
        DiagQuadForm { coeffs }
    }

    pub fn eval(&self, p: &[Rat; 4]) -> Q2 {
        let mut acc = Q2::zero();
        for i in 0..4 {
            acc = &acc + &self.coeffs[i].scale(&(&p[i] * &p[i]));
        }
        acc
    }

    pub fn to_poly(&self) -> MultiPoly {
        let mut out = MultiPoly::zero();
        for i in 0..4 {
            let mut exps = [0u8; 4];
            exps[i] = 2;
            out.add_term(Monomial::new(exps), self.coeffs[i].clone());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }
}

/// Which diagonal-quadratic majorizer to apply to a monomial bounded on
/// `[0, r]^4`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QuadMajorizer {
    /// The power-mean bound `x1^d1...x4^d4 <= (r^{N-2}/N) (d1 x1^2 + ... + d4 x4^2)`,
    /// kept exact in Q(sqrt2).
    AmGm,
    /// Same weights, but each coefficient `p + q*sqrt2` with `q >= 0` is first
    /// rounded up to the rational `p + q*upper`. Reproduces the reference
    /// residual table digit for digit when `upper = 10/7`.
    AmGmRounded { sqrt2_upper: Rat },
    /// Steeper profile: weights `(4 dk^2 - dk)^2` with scale `r^{N-2}/12`.
    /// Dominates the AmGm form coefficientwise for every N >= 3, so it is
    /// sound, just far looser.
    SteepWeights,
}

/// Diagonal quadratic bound for a single monomial with nonnegative
/// coefficient on the box `[0, r]^4`, total degree N >= 2.
pub fn monomial_quad_bound(m: Monomial, coeff: &Q2, r: &Rat, kind: &QuadMajorizer) -> DiagQuadForm {
    assert!(
        coeff.sign() >= 0,
        "majorized coefficient must be nonnegative"
    );
    assert!(r.is_positive(), "box radius must be positive");
    let n = m.total_degree();
    if coeff.is_zero() {
        return DiagQuadForm::zero();
    }
    assert!(n >= 2, "majorization needs total degree >= 2");
    let mut rpow = Rat::one();
    for _ in 0..(n - 2) {
        rpow = &rpow * r;
    }
    let (scale, weights): (Rat, [i64; 4]) = match kind {
        QuadMajorizer::AmGm | QuadMajorizer::AmGmRounded { .. } => (
            rpow / rat_int(n as i64),
            [
                m.exps[0] as i64,
                m.exps[1] as i64,
                m.exps[2] as i64,
                m.exps[3] as i64,
            ],
        ),
        QuadMajorizer::SteepWeights => {
            assert!(n >= 3, "steep-weight majorization needs total degree >= 3");
            let w = |d: i64| (4 * d * d - d) * (4 * d * d - d);
            (
                rpow / rat_int(12),
                [
                    w(m.exps[0] as i64),
                    w(m.exps[1] as i64),
                    w(m.exps[2] as i64),
                    w(m.exps[3] as i64),
                ],
            )
        }
    };
    let eff_coeff = match kind {
        QuadMajorizer::AmGmRounded { sqrt2_upper } if !coeff.sqrt2.is_negative() => {
            Q2::from_rat(coeff.rational_upper_with(sqrt2_upper))
        }
        _ => coeff.clone(),
    };
    let mut coeffs = [Q2::zero(), Q2::zero(), Q2::zero(), Q2::zero()];
    for i in 0..4 {
        if weights[i] != 0 {
            coeffs[i] = eff_coeff.scale(&(&scale * rat_int(weights[i])));
        }
    }
    DiagQuadForm { coeffs }
}

/// Majorizes a homogeneous polynomial with nonnegative coefficients by a
/// diagonal quadratic form, summing the per-monomial bounds.
pub fn diag_quad_majorant(
    p: &MultiPoly,
    r: &Rat,
    kind: &QuadMajorizer,
) -> Result<DiagQuadForm, PolyError> {
    if p.is_zero() {
        return Ok(DiagQuadForm::zero());
    }
    let d = p.max_degree().unwrap();
    if p.min_degree().unwrap() != d {
        return Err(PolyError::NotHomogeneous);
    }
    let mut acc = DiagQuadForm::zero();
    for (m, c) in p.terms() {
        if c.sign() < 0 {
            return Err(PolyError::NegativeCoefficient);
        }
        acc = acc.add(&monomial_quad_bound(*m, c, r, kind));
    }
    Ok(acc)
}

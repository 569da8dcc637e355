//! Exact scalars: rationals, prime fields, extension fields, and Laurent
//! polynomials in the border-rank indeterminate λ.
//!
//! A [`Scalar`] always knows its own domain, so mixing domains is caught at
//! the operation that mixes them. The operator impls panic on a mismatch;
//! the `checked_*` methods return [`Error::DomainMismatch`] instead.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Largest finite field whose elements we are willing to enumerate.
const ENUMERATION_LIMIT: u128 = 1 << 22;

// ---------------------------------------------------------------------------
// polynomials over F_p, coefficient vectors low degree first

fn trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn powmod(mut base: u64, mut exp: u128, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, p);
        }
        base = mulmod(base, base, p);
        exp >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> Option<u64> {
    if a % p == 0 {
        None
    } else {
        Some(powmod(a, (p - 2) as u128, p))
    }
}

fn poly_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let m = trim(m.to_vec());
    let mut r = trim(a.to_vec());
    let lead_inv = inv_mod(*m.last().expect("nonzero modulus"), p).expect("unit leading coefficient");
    while r.len() >= m.len() {
        let shift = r.len() - m.len();
        let factor = mulmod(*r.last().unwrap(), lead_inv, p);
        for (i, &c) in m.iter().enumerate() {
            let sub = mulmod(factor, c, p);
            r[shift + i] = (r[shift + i] + p - sub) % p;
        }
        r = trim(r);
    }
    r
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + mulmod(x, y, p)) % p;
        }
    }
    trim(out)
}

/// Monic polynomial of the given degree whose lower coefficients are the
/// base-p digits of `index`.
fn monic_from_index(p: u64, degree: usize, mut index: u128) -> Vec<u64> {
    let mut c = Vec::with_capacity(degree + 1);
    for _ in 0..degree {
        c.push((index % p as u128) as u64);
        index /= p as u128;
    }
    c.push(1);
    c
}

fn is_irreducible(f: &[u64], p: u64) -> bool {
    let deg = f.len() - 1;
    if deg <= 1 {
        return deg == 1;
    }
    for d in 1..=deg / 2 {
        let count = (p as u128).pow(d as u32);
        for idx in 0..count {
            let g = monic_from_index(p, d, idx);
            if poly_rem(f, &g, p).is_empty() {
                return false;
            }
        }
    }
    true
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub(crate) fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn format_poly(c: &[u64]) -> String {
    let mut parts = Vec::new();
    for e in (0..c.len()).rev() {
        let k = c[e];
        if k == 0 {
            continue;
        }
        let coeff = if k == 1 && e > 0 { String::new() } else { k.to_string() };
        let var = match e {
            0 => String::new(),
            1 => "x".to_string(),
            _ => format!("x^{e}"),
        };
        parts.push(format!("{coeff}{var}"));
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join("+")
    }
}

fn parse_poly(s: &str) -> Result<Vec<u64>> {
    let mut coeffs: Vec<u64> = Vec::new();
    for term in s.split('+') {
        let term = term.trim();
        if term.is_empty() {
            return Err(Error::Parse(format!("empty term in polynomial '{s}'")));
        }
        let (coeff, exp) = match term.find('x') {
            None => (term, 0usize),
            Some(pos) => {
                let exp = match &term[pos + 1..] {
                    "" => 1,
                    rest => rest
                        .strip_prefix('^')
                        .and_then(|e| e.parse().ok())
                        .ok_or_else(|| Error::Parse(format!("bad exponent in '{term}'")))?,
                };
                (&term[..pos], exp)
            }
        };
        let coeff: u64 = if coeff.is_empty() {
            1
        } else {
            coeff.parse().map_err(|_| Error::Parse(format!("bad coefficient in '{term}'")))?
        };
        if coeffs.len() <= exp {
            coeffs.resize(exp + 1, 0);
        }
        coeffs[exp] += coeff;
    }
    Ok(trim(coeffs))
}

// ---------------------------------------------------------------------------
// fields

/// F_p[x]/(f) for a monic irreducible f.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExtensionField {
    p: u64,
    modulus: Vec<u64>,
}

impl ExtensionField {
    /// Builds F_{p^degree} using the first monic irreducible polynomial of that
    /// degree, where candidates are ordered by their lower coefficients read as
    /// a base-p number (constant term least significant).
    pub fn new(p: u64, degree: usize) -> Result<Arc<Self>> {
        if !is_prime(p) {
            return Err(Error::PreconditionViolated(format!("{p} is not prime")));
        }
        if degree == 0 {
            return Err(Error::PreconditionViolated("extension degree must be >= 1".into()));
        }
        let count = (p as u128).pow(degree as u32);
        for idx in 0..count {
            let f = monic_from_index(p, degree, idx);
            if is_irreducible(&f, p) {
                return Ok(Arc::new(ExtensionField { p, modulus: f }));
            }
        }
        Err(Error::PreconditionViolated(format!("no irreducible of degree {degree} over F_{p}")))
    }

    /// Uses an explicit modulus, which must be monic and irreducible.
    pub fn with_modulus(p: u64, modulus: Vec<u64>) -> Result<Arc<Self>> {
        if !is_prime(p) {
            return Err(Error::PreconditionViolated(format!("{p} is not prime")));
        }
        let modulus = trim(modulus.into_iter().map(|c| c % p).collect());
        if modulus.len() < 2 || *modulus.last().unwrap() != 1 {
            return Err(Error::PreconditionViolated("modulus must be monic of degree >= 1".into()));
        }
        if !is_irreducible(&modulus, p) {
            return Err(Error::PreconditionViolated(format!(
                "{} is reducible over F_{p}",
                format_poly(&modulus)
            )));
        }
        Ok(Arc::new(ExtensionField { p, modulus }))
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> usize {
        self.modulus.len() - 1
    }

    /// Coefficients of the modulus, constant term first.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn order(&self) -> u128 {
        (self.p as u128).pow(self.degree() as u32)
    }

    fn is_default_modulus(&self) -> bool {
        ExtensionField::new(self.p, self.degree())
            .map(|f| f.modulus == self.modulus)
            .unwrap_or(false)
    }

    fn reduce(&self, v: Vec<u64>) -> Vec<u64> {
        let mut r = poly_rem(&v, &self.modulus, self.p);
        r.resize(self.degree(), 0);
        r
    }
}

/// A coefficient domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Rational,
    Prime(u64),
    Extension(Arc<ExtensionField>),
}

impl Field {
    pub fn prime(p: u64) -> Result<Field> {
        if is_prime(p) {
            Ok(Field::Prime(p))
        } else {
            Err(Error::PreconditionViolated(format!("{p} is not prime")))
        }
    }

    pub fn extension(p: u64, degree: usize) -> Result<Field> {
        if degree == 1 {
            return Field::prime(p);
        }
        Ok(Field::Extension(ExtensionField::new(p, degree)?))
    }

    /// Parses `rational`, `fp:<p>`, `fpext:<p>:<deg>` or `fpext:<p>:<modulus>`.
    pub fn parse(s: &str) -> Result<Field> {
        let s = s.trim();
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["rational"] | ["Q"] => Ok(Field::Rational),
            ["fp", p] => Field::prime(parse_u64(p)?),
            ["fpext", p, rest] => {
                let p = parse_u64(p)?;
                match rest.parse::<usize>() {
                    Ok(deg) => Field::extension(p, deg),
                    Err(_) => Ok(Field::Extension(ExtensionField::with_modulus(p, parse_poly(rest)?)?)),
                }
            }
            _ => Err(Error::Parse(format!("unknown field descriptor '{s}'"))),
        }
    }

    pub fn characteristic(&self) -> u64 {
        match self {
            Field::Rational => 0,
            Field::Prime(p) => *p,
            Field::Extension(e) => e.p,
        }
    }

    /// Number of elements, `None` for the rationals.
    pub fn order(&self) -> Option<u128> {
        match self {
            Field::Rational => None,
            Field::Prime(p) => Some(*p as u128),
            Field::Extension(e) => Some(e.order()),
        }
    }

    pub fn zero(&self) -> Scalar {
        self.from_i64(0)
    }

    pub fn one(&self) -> Scalar {
        self.from_i64(1)
    }

    pub fn from_i64(&self, v: i64) -> Scalar {
        self.from_bigint(&BigInt::from(v))
    }

    pub fn from_bigint(&self, v: &BigInt) -> Scalar {
        match self {
            Field::Rational => Scalar::Rational(BigRational::from_integer(v.clone())),
            Field::Prime(p) => Scalar::Prime { value: reduce_bigint(v, *p), p: *p },
            Field::Extension(e) => {
                let mut coeffs = vec![0; e.degree()];
                coeffs[0] = reduce_bigint(v, e.p);
                Scalar::Ext { coeffs, field: e.clone() }
            }
        }
    }

    /// Maps a rational into this field; fails when the denominator vanishes.
    pub fn from_rational(&self, v: &BigRational) -> Result<Scalar> {
        match self {
            Field::Rational => Ok(Scalar::Rational(v.clone())),
            _ => {
                let num = self.from_bigint(v.numer());
                let den = self.from_bigint(v.denom());
                num.checked_div(&den)
            }
        }
    }

    /// The element whose coordinates are the base-p digits of `index`
    /// (finite fields only). Index 0 is zero, index 1 is one.
    pub fn element(&self, index: u128) -> Scalar {
        match self {
            Field::Rational => self.from_i64(index as i64),
            Field::Prime(p) => Scalar::Prime { value: (index % *p as u128) as u64, p: *p },
            Field::Extension(e) => {
                let mut idx = index;
                let mut coeffs = Vec::with_capacity(e.degree());
                for _ in 0..e.degree() {
                    coeffs.push((idx % e.p as u128) as u64);
                    idx /= e.p as u128;
                }
                Scalar::Ext { coeffs, field: e.clone() }
            }
        }
    }

    /// All elements of a (small) finite field in index order.
    pub fn elements(&self) -> Result<Vec<Scalar>> {
        let q = self
            .order()
            .ok_or_else(|| Error::PreconditionViolated("cannot enumerate the rationals".into()))?;
        if q > ENUMERATION_LIMIT {
            return Err(Error::TooLarge(format!("field of order {q}")));
        }
        Ok((0..q).map(|i| self.element(i)).collect())
    }

    /// A uniformly random element (finite fields) or a small random rational.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        match self {
            Field::Rational => {
                let num = rng.gen_range(-9i64..=9);
                let den = rng.gen_range(1i64..=4);
                Scalar::Rational(BigRational::new(num.into(), den.into()))
            }
            Field::Prime(p) => Scalar::Prime { value: rng.gen_range(0..*p), p: *p },
            Field::Extension(e) => Scalar::Ext {
                coeffs: (0..e.degree()).map(|_| rng.gen_range(0..e.p)).collect(),
                field: e.clone(),
            },
        }
    }

    /// Parses a scalar string. Self-describing forms must belong to this
    /// field; a bare rational such as `-3/4` is mapped into it.
    pub fn parse_scalar(&self, s: &str) -> Result<Scalar> {
        let s = s.trim();
        if s.contains("mod") {
            let v = Scalar::parse(s)?;
            if &v.field() != self {
                return Err(Error::DomainMismatch(v.field().to_string(), self.to_string()));
            }
            Ok(v)
        } else {
            self.from_rational(&parse_rational(s)?)
        }
    }

    /// Smallest element (in index order) of multiplicative order exactly `order`.
    pub fn primitive_root_of_unity(&self, order: u64) -> Result<Scalar> {
        let q = self.order().ok_or_else(|| Error::NoSuchRoot {
            order,
            reason: "the rationals contain no roots of unity beyond ±1".into(),
        })?;
        if order == 0 || (q - 1) % order as u128 != 0 {
            return Err(Error::NoSuchRoot {
                order,
                reason: format!("{order} does not divide {}", q - 1),
            });
        }
        if q > ENUMERATION_LIMIT {
            return Err(Error::TooLarge(format!("field of order {q}")));
        }
        let one = self.one();
        let factors = prime_factors(order);
        for idx in 1..q {
            let x = self.element(idx);
            if x.pow(order as u128) != one {
                continue;
            }
            if factors.iter().all(|r| x.pow((order / r) as u128) != one) {
                return Ok(x);
            }
        }
        Err(Error::NoSuchRoot { order, reason: "search exhausted".into() })
    }
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("expected an integer, got '{s}'")))
}

fn reduce_bigint(v: &BigInt, p: u64) -> u64 {
    let r = v.mod_floor(&BigInt::from(p));
    r.to_u64().expect("residue fits")
}

pub(crate) fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad rational '{s}'"));
    match s.split_once('/') {
        None => Ok(BigRational::from_integer(s.parse::<BigInt>().map_err(|_| bad())?)),
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::DivisionByZero);
            }
            Ok(BigRational::new(n, d))
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Rational => write!(f, "rational"),
            Field::Prime(p) => write!(f, "fp:{p}"),
            Field::Extension(e) if e.is_default_modulus() => write!(f, "fpext:{}:{}", e.p, e.degree()),
            Field::Extension(e) => write!(f, "fpext:{}:{}", e.p, format_poly(&e.modulus)),
        }
    }
}

// ---------------------------------------------------------------------------
// scalars

/// An exact field element tagged with its domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Scalar {
    /// Always in lowest terms with positive denominator.
    Rational(BigRational),
    /// `value` in `[0, p)`.
    Prime { value: u64, p: u64 },
    /// Coefficients of a polynomial of degree below the extension degree,
    /// constant term first, padded to exactly `degree` entries.
    Ext { coeffs: Vec<u64>, field: Arc<ExtensionField> },
}

impl Scalar {
    pub fn rational(num: i64, den: i64) -> Scalar {
        Scalar::Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn field(&self) -> Field {
        match self {
            Scalar::Rational(_) => Field::Rational,
            Scalar::Prime { p, .. } => Field::Prime(*p),
            Scalar::Ext { field, .. } => Field::Extension(field.clone()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Rational(r) => r.is_zero(),
            Scalar::Prime { value, .. } => *value == 0,
            Scalar::Ext { coeffs, .. } => coeffs.iter().all(|&c| c == 0),
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Rational(r) => r.is_one(),
            Scalar::Prime { value, .. } => *value == 1,
            Scalar::Ext { coeffs, .. } => coeffs[0] == 1 && coeffs[1..].iter().all(|&c| c == 0),
        }
    }

    pub fn is_minus_one(&self) -> bool {
        match self {
            Scalar::Rational(r) => (-r).is_one(),
            Scalar::Prime { value, p } => *value == p - 1,
            Scalar::Ext { coeffs, field } => coeffs[0] == field.p - 1 && coeffs[1..].iter().all(|&c| c == 0),
        }
    }

    /// True for 0, 1 and −1: the coefficients that cost no multiplication.
    pub fn is_free_coefficient(&self) -> bool {
        self.is_zero() || self.is_one() || self.is_minus_one()
    }

    fn mismatch(&self, other: &Scalar) -> Error {
        Error::DomainMismatch(self.field().to_string(), other.field().to_string())
    }

    pub fn checked_add(&self, other: &Scalar) -> Result<Scalar> {
        match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => Ok(Scalar::Rational(a + b)),
            (Scalar::Prime { value: a, p }, Scalar::Prime { value: b, p: q }) if p == q => {
                Ok(Scalar::Prime { value: ((*a as u128 + *b as u128) % *p as u128) as u64, p: *p })
            }
            (Scalar::Ext { coeffs: a, field }, Scalar::Ext { coeffs: b, field: g }) if field == g => {
                let p = field.p;
                let coeffs = a.iter().zip(b).map(|(x, y)| (x + y) % p).collect();
                Ok(Scalar::Ext { coeffs, field: field.clone() })
            }
            _ => Err(self.mismatch(other)),
        }
    }

    pub fn checked_sub(&self, other: &Scalar) -> Result<Scalar> {
        self.checked_add(&other.neg_ref())
    }

    pub fn checked_mul(&self, other: &Scalar) -> Result<Scalar> {
        match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => Ok(Scalar::Rational(a * b)),
            (Scalar::Prime { value: a, p }, Scalar::Prime { value: b, p: q }) if p == q => {
                Ok(Scalar::Prime { value: mulmod(*a, *b, *p), p: *p })
            }
            (Scalar::Ext { coeffs: a, field }, Scalar::Ext { coeffs: b, field: g }) if field == g => {
                let prod = poly_mul(&trim(a.clone()), &trim(b.clone()), field.p);
                Ok(Scalar::Ext { coeffs: field.reduce(prod), field: field.clone() })
            }
            _ => Err(self.mismatch(other)),
        }
    }

    pub fn checked_div(&self, other: &Scalar) -> Result<Scalar> {
        if self.field() != other.field() {
            return Err(self.mismatch(other));
        }
        self.checked_mul(&other.inv()?)
    }

    pub fn inv(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        match self {
            Scalar::Rational(r) => Ok(Scalar::Rational(r.recip())),
            Scalar::Prime { value, p } => Ok(Scalar::Prime { value: inv_mod(*value, *p).unwrap(), p: *p }),
            Scalar::Ext { field, .. } => Ok(self.pow(field.order() - 2)),
        }
    }

    fn neg_ref(&self) -> Scalar {
        match self {
            Scalar::Rational(r) => Scalar::Rational(-r),
            Scalar::Prime { value, p } => Scalar::Prime { value: (p - value) % p, p: *p },
            Scalar::Ext { coeffs, field } => Scalar::Ext {
                coeffs: coeffs.iter().map(|c| (field.p - c) % field.p).collect(),
                field: field.clone(),
            },
        }
    }

    /// Non-negative power by repeated squaring.
    pub fn pow(&self, mut exp: u128) -> Scalar {
        let mut acc = self.field().one();
        let mut base = self.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            exp >>= 1;
        }
        acc
    }

    /// Integer power; negative exponents require a nonzero base.
    pub fn powi(&self, exp: i64) -> Result<Scalar> {
        if exp >= 0 {
            Ok(self.pow(exp as u128))
        } else {
            Ok(self.inv()?.pow(exp.unsigned_abs() as u128))
        }
    }

    /// Parses a self-describing scalar string.
    pub fn parse(s: &str) -> Result<Scalar> {
        let s = s.trim();
        let Some((lhs, rhs)) = s.split_once(" mod ") else {
            return Ok(Scalar::Rational(parse_rational(s)?));
        };
        if let Some(body) = lhs.trim().strip_prefix('[') {
            let body = body
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse(format!("unterminated coefficient list in '{s}'")))?;
            let (p, modulus) = rhs
                .split_once('/')
                .ok_or_else(|| Error::Parse(format!("missing modulus polynomial in '{s}'")))?;
            let p = parse_u64(p)?;
            let field = ExtensionField::with_modulus(p, parse_poly(modulus.trim())?)?;
            let mut coeffs = Vec::new();
            for c in body.split(',').filter(|c| !c.trim().is_empty()) {
                coeffs.push(parse_u64(c)? % p);
            }
            if coeffs.len() > field.degree() {
                return Err(Error::Parse(format!("too many coefficients in '{s}'")));
            }
            let coeffs = field.reduce(coeffs);
            Ok(Scalar::Ext { coeffs, field })
        } else {
            let p = parse_u64(rhs)?;
            let field = Field::prime(p)?;
            let v: BigInt = lhs.trim().parse().map_err(|_| Error::Parse(format!("bad residue in '{s}'")))?;
            Ok(field.from_bigint(&v))
        }
    }

    /// The rational value, if this is a rational scalar.
    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Scalar::Rational(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Rational(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            Scalar::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Scalar::Prime { value, p } => write!(f, "{value} mod {p}"),
            Scalar::Ext { coeffs, field } => {
                let list: Vec<String> = trim(coeffs.clone()).iter().map(|c| c.to_string()).collect();
                write!(f, "[{}] mod {} / {}", list.join(","), field.p, format_poly(&field.modulus))
            }
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl<'a> $trait<&'a Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                self.$checked(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.neg_ref()
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.neg_ref()
    }
}

/// `p` pairwise-distinct nonzero scalars: the p-th roots of unity when the
/// field has them (as powers of the smallest primitive root), the integers
/// `1..=p` over the rationals. A prime field without the roots is extended
/// to the smallest F_{ℓ^e} with ℓ^e ≡ 1 (mod p).
pub fn roots_of_unity(p: u64, field: &Field) -> Result<Vec<Scalar>> {
    if p == 0 {
        return Err(Error::PreconditionViolated("order must be positive".into()));
    }
    match field {
        Field::Rational => Ok((1..=p as i64).map(|i| field.from_i64(i)).collect()),
        _ => {
            let q = field.order().unwrap();
            let target = if (q - 1) % p as u128 == 0 {
                field.clone()
            } else {
                let ell = field.characteristic();
                if p % ell == 0 {
                    return Err(Error::NoSuchRoot {
                        order: p,
                        reason: format!("characteristic {ell} divides {p}"),
                    });
                }
                let Field::Prime(_) = field else {
                    return Err(Error::NoSuchRoot {
                        order: p,
                        reason: "towers over extension fields are not supported".into(),
                    });
                };
                let mut e = 1usize;
                let mut pow = ell as u128 % p as u128;
                while pow != 1 {
                    pow = pow * ell as u128 % p as u128;
                    e += 1;
                }
                Field::extension(ell, e)?
            };
            let w = target.primitive_root_of_unity(p)?;
            let mut out = Vec::with_capacity(p as usize);
            let mut cur = target.one();
            for _ in 0..p {
                out.push(cur.clone());
                cur = &cur * &w;
            }
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// Laurent polynomials

/// Σ c_e λ^e with finitely many nonzero coefficients, e possibly negative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentPoly {
    field: Field,
    coeffs: BTreeMap<i64, Scalar>,
}

impl LaurentPoly {
    pub fn zero(field: &Field) -> Self {
        LaurentPoly { field: field.clone(), coeffs: BTreeMap::new() }
    }

    /// c·λ^e.
    pub fn monomial(c: Scalar, e: i64) -> Self {
        let mut p = LaurentPoly::zero(&c.field());
        if !c.is_zero() {
            p.coeffs.insert(e, c);
        }
        p
    }

    pub fn constant(c: Scalar) -> Self {
        Self::monomial(c, 0)
    }

    /// λ^e with unit coefficient.
    pub fn lambda_pow(field: &Field, e: i64) -> Self {
        Self::monomial(field.one(), e)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn min_degree(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    /// The λ^e coefficient, zero if absent.
    pub fn coeff(&self, e: i64) -> Scalar {
        self.coeffs.get(&e).cloned().unwrap_or_else(|| self.field.zero())
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &Scalar)> {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    fn check(&self, other: &LaurentPoly) -> Result<()> {
        if self.field != other.field {
            Err(Error::DomainMismatch(self.field.to_string(), other.field.to_string()))
        } else {
            Ok(())
        }
    }

    fn accumulate(&mut self, e: i64, c: Scalar) {
        let entry = self.coeffs.entry(e).or_insert_with(|| self.field.zero());
        *entry = &*entry + &c;
        if entry.is_zero() {
            self.coeffs.remove(&e);
        }
    }

    pub fn checked_add(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.check(other)?;
        let mut out = self.clone();
        for (e, c) in &other.coeffs {
            out.accumulate(*e, c.clone());
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.check(other)?;
        let mut out = LaurentPoly::zero(&self.field);
        for (e1, c1) in &self.coeffs {
            for (e2, c2) in &other.coeffs {
                out.accumulate(e1 + e2, c1 * c2);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: &Scalar) -> LaurentPoly {
        let mut out = LaurentPoly::zero(&self.field);
        for (e, c) in &self.coeffs {
            let v = c * s;
            if !v.is_zero() {
                out.coeffs.insert(*e, v);
            }
        }
        out
    }

    /// Value at a nonzero point λ0.
    pub fn eval(&self, lambda: &Scalar) -> Result<Scalar> {
        if lambda.is_zero() && self.min_degree().is_some_and(|d| d < 0) {
            return Err(Error::ZeroPoint);
        }
        let mut acc = self.field.zero();
        for (e, c) in &self.coeffs {
            acc = acc.checked_add(&c.checked_mul(&lambda.powi(*e)?)?)?;
        }
        Ok(acc)
    }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.checked_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        self + &rhs.scale(&-self.field.one())
    }
}

impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.checked_mul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .map(|(e, c)| match e {
                0 => c.to_string(),
                _ if c.is_one() => format!("λ^{e}"),
                _ => format!("({c})·λ^{e}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Converts a rational to f64 (reporting only).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_sum() {
        assert_eq!(Scalar::rational(1, 2) + Scalar::rational(1, 3), Scalar::rational(5, 6));
    }

    #[test]
    fn prime_product() {
        let f = Field::prime(7).unwrap();
        assert_eq!(f.from_i64(3) * f.from_i64(5), f.one());
    }

    #[test]
    fn extension_square_of_generator() {
        let f = Field::extension(5, 2).unwrap();
        let Field::Extension(e) = &f else { unreachable!() };
        assert_eq!(e.modulus(), &[2, 0, 1]);
        let x = f.element(5);
        assert_eq!(x.to_string(), "[0,1] mod 5 / x^2+2");
        assert_eq!(&x * &x, f.from_i64(3));
    }

    #[test]
    fn extension_inverse() {
        let f = Field::extension(3, 3).unwrap();
        for x in f.elements().unwrap().into_iter().skip(1) {
            assert!((&x * &x.inv().unwrap()).is_one());
        }
    }

    #[test]
    fn division_by_zero_and_mismatch() {
        let f = Field::prime(7).unwrap();
        assert_eq!(f.one().checked_div(&f.zero()), Err(Error::DivisionByZero));
        assert!(matches!(f.one().checked_add(&Scalar::rational(1, 1)), Err(Error::DomainMismatch(..))));
    }

    #[test]
    fn scalar_strings_round_trip() {
        for s in ["3/7", "-2", "12 mod 101", "[2,0,1] mod 5 / x^3+x+1"] {
            let v = Scalar::parse(s).unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert!(Scalar::parse("[1] mod 5 / x^2+4").is_err(), "x^2+4 = (x+1)(x+4) over F_5");
        assert_eq!(Scalar::parse("[2,0,1] mod 5 / x^3+x+1").unwrap().field(), Field::extension(5, 3).unwrap());
    }

    #[test]
    fn field_descriptors_round_trip() {
        for s in ["rational", "fp:101", "fpext:5:2", "fpext:5:3"] {
            assert_eq!(Field::parse(s).unwrap().to_string(), s);
        }
        assert_eq!(Field::parse("fpext:5:x^2+3").unwrap().to_string(), "fpext:5:x^2+3");
    }

    #[test]
    fn roots_examples() {
        let set = |v: Vec<Scalar>| v.into_iter().map(|s| s.to_string()).collect::<std::collections::BTreeSet<_>>();
        let f5 = Field::prime(5).unwrap();
        assert_eq!(set(roots_of_unity(2, &f5).unwrap()), set(vec![f5.from_i64(1), f5.from_i64(4)]));
        let f7 = Field::prime(7).unwrap();
        assert_eq!(roots_of_unity(3, &f7).unwrap(), vec![f7.from_i64(1), f7.from_i64(2), f7.from_i64(4)]);
        assert_eq!(
            roots_of_unity(3, &Field::Rational).unwrap(),
            vec![Scalar::rational(1, 1), Scalar::rational(2, 1), Scalar::rational(3, 1)]
        );
    }

    #[test]
    fn roots_need_extension() {
        let f5 = Field::prime(5).unwrap();
        let roots = roots_of_unity(3, &f5).unwrap();
        assert_eq!(roots[0].field().order(), Some(25));
        for r in &roots {
            assert!(r.pow(3).is_one());
        }
        assert!(matches!(roots_of_unity(5, &f5), Err(Error::NoSuchRoot { .. })));
    }

    #[test]
    fn laurent_examples() {
        let q = Field::Rational;
        let lam = |e| LaurentPoly::lambda_pow(&q, e);
        assert_eq!(&lam(-2) * &lam(3), lam(1));
        let one_plus = &lam(0) + &lam(1);
        let one_minus = &lam(0) - &lam(1);
        assert_eq!(&one_plus * &one_minus, &lam(0) - &lam(2));
        let prefactor = &lam(-3) - &lam(-2);
        assert_eq!(&prefactor * &lam(3), &lam(0) - &lam(1));
        let f = &lam(-2) + &LaurentPoly::constant(Scalar::rational(3, 1));
        assert_eq!(f.coeff(0), Scalar::rational(3, 1));
        assert_eq!(f.coeff(-2), Scalar::rational(1, 1));
        assert_eq!(f.coeff(5), Scalar::rational(0, 1));
        assert_eq!((f.min_degree(), f.max_degree()), (Some(-2), Some(0)));
    }

    #[test]
    fn laurent_eval() {
        let q = Field::Rational;
        let f = &LaurentPoly::lambda_pow(&q, -2) + &LaurentPoly::lambda_pow(&q, 1);
        assert_eq!(f.eval(&Scalar::rational(2, 1)).unwrap(), Scalar::rational(9, 4));
        assert_eq!(f.eval(&q.zero()), Err(Error::ZeroPoint));
    }

    #[test]
    fn rational_to_f64_handles_huge_values() {
        let big = BigRational::new(BigInt::from(10).pow(400), BigInt::from(3) * BigInt::from(10).pow(399));
        assert!((rational_to_f64(&big) - 10.0 / 3.0).abs() < 1e-12);
    }
}

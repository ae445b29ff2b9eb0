//! Arithmetic in F_q (q = p^k) and univariate polynomials over it.
//!
//! Elements are stored as their canonical residue modulo the defining
//! polynomial, packed as base-p digits: `c_0 + c_1 p + ... + c_{k-1} p^{k-1}`.
//! For prime fields this is just the residue mod p.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

/// Default cap on the field size accepted by [`build_field`].
pub const DEFAULT_MAX_FIELD: u64 = 1 << 20;
/// Cap on `q^d` for explicit enumeration of irreducible polynomials.
pub const MAX_ENUMERATION: u128 = 1 << 24;
/// Fields up to this size get precomputed operation tables.
const TABLE_LIMIT: u32 = 256;

/// A field element: canonical packed residue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Fe(pub u32);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone)]
struct Tables {
    add: Vec<u32>,
    mul: Vec<u32>,
    neg: Vec<u32>,
    inv: Vec<u32>,
}

/// The finite field F_q with a fixed defining polynomial.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    p: u32,
    k: u32,
    q: u32,
    /// Monic modulus over F_p, low-to-high, length k+1.
    modulus: Vec<u32>,
    tables: Option<Tables>,
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.k == other.k && self.modulus == other.modulus
    }
}

impl Eq for FieldSpec {}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Splits a prime power q into (p, k). Returns `None` if q is not a prime power.
pub fn prime_power(q: u64) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2u64;
    while p * p <= q && !q.is_multiple_of(p) {
        p += 1;
    }
    if !q.is_multiple_of(p) {
        p = q;
    }
    let (mut rest, mut k) = (q, 0u32);
    while rest % p == 0 {
        rest /= p;
        k += 1;
    }
    (rest == 1 && p <= u32::MAX as u64).then_some((p as u32, k))
}

/// Builds F_{p^k} with the default size cap.
pub fn build_field(p: u64, k: u32) -> Result<FieldSpec> {
    build_field_with_cap(p, k, DEFAULT_MAX_FIELD)
}

/// Builds F_{p^k}. The modulus is the smallest monic irreducible of degree k
/// in the enumeration order of [`enumerate_monic`].
pub fn build_field_with_cap(p: u64, k: u32, max: u64) -> Result<FieldSpec> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if k == 0 {
        return Err(Error::InvalidInput(
            "extension degree must be at least 1".into(),
        ));
    }
    let size = (p as u128).checked_pow(k).unwrap_or(u128::MAX);
    if size > max as u128 {
        return Err(Error::FieldTooLarge { size, max });
    }
    let p = p as u32;
    let mut field = FieldSpec {
        p,
        k: 1,
        q: p,
        modulus: vec![0, 1],
        tables: None,
    };
    if k > 1 {
        let prime = field.clone();
        let modulus = enumerate_monic(&prime, k as usize)
            .find(|f| f.is_irreducible(&prime))
            .ok_or_else(|| Error::InternalError("no irreducible modulus found".into()))?;
        field = FieldSpec {
            p,
            k,
            q: size as u32,
            modulus: modulus.coeffs.iter().map(|c| c.0).collect(),
            tables: None,
        };
    }
    if field.q <= TABLE_LIMIT {
        field.tables = Some(field.build_tables());
    }
    Ok(field)
}

impl FieldSpec {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Defining polynomial over F_p, low-to-high.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn elements(&self) -> impl Iterator<Item = Fe> {
        (0..self.q).map(Fe)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = Fe> {
        (1..self.q).map(Fe)
    }

    /// The class of x (a generator of F_q over F_p when k > 1).
    pub fn generator(&self) -> Fe {
        if self.k == 1 {
            // any nonzero element; x itself is 0 mod the linear modulus x
            Fe(1 % self.p)
        } else {
            Fe(self.p)
        }
    }

    /// Embeds an integer via F_p.
    pub fn from_int(&self, v: i64) -> Fe {
        Fe(v.rem_euclid(self.p as i64) as u32)
    }

    fn digits(&self, a: Fe) -> Vec<u32> {
        let mut v = a.0;
        (0..self.k)
            .map(|_| {
                let d = v % self.p;
                v /= self.p;
                d
            })
            .collect()
    }

    fn pack(&self, digits: &[u32]) -> Fe {
        Fe(digits.iter().rev().fold(0u32, |acc, &d| acc * self.p + d))
    }

    fn build_tables(&self) -> Tables {
        let q = self.q as usize;
        let mut add = vec![0; q * q];
        let mut mul = vec![0; q * q];
        let mut neg = vec![0; q];
        let mut inv = vec![0; q];
        for a in 0..q {
            neg[a] = self.neg_slow(Fe(a as u32)).0;
            for b in 0..q {
                add[a * q + b] = self.add_slow(Fe(a as u32), Fe(b as u32)).0;
                let m = self.mul_slow(Fe(a as u32), Fe(b as u32)).0;
                mul[a * q + b] = m;
                if m == 1 {
                    inv[a] = b as u32;
                }
            }
        }
        Tables { add, mul, neg, inv }
    }

    fn add_slow(&self, a: Fe, b: Fe) -> Fe {
        if self.k == 1 {
            return Fe((a.0 + b.0) % self.p);
        }
        let (x, y) = (self.digits(a), self.digits(b));
        let s: Vec<u32> = x.iter().zip(&y).map(|(u, v)| (u + v) % self.p).collect();
        self.pack(&s)
    }

    fn neg_slow(&self, a: Fe) -> Fe {
        if self.k == 1 {
            return Fe((self.p - a.0) % self.p);
        }
        let s: Vec<u32> = self
            .digits(a)
            .iter()
            .map(|u| (self.p - u) % self.p)
            .collect();
        self.pack(&s)
    }

    fn mul_slow(&self, a: Fe, b: Fe) -> Fe {
        let p = self.p as u64;
        if self.k == 1 {
            return Fe(((a.0 as u64 * b.0 as u64) % p) as u32);
        }
        let k = self.k as usize;
        let (x, y) = (self.digits(a), self.digits(b));
        let mut prod = vec![0u64; 2 * k - 1];
        for (i, &u) in x.iter().enumerate() {
            for (j, &v) in y.iter().enumerate() {
                prod[i + j] = (prod[i + j] + u as u64 * v as u64) % p;
            }
        }
        // reduce with the monic modulus: x^k = -(m_0 + ... + m_{k-1} x^{k-1})
        for top in (k..prod.len()).rev() {
            let c = prod[top];
            if c == 0 {
                continue;
            }
            prod[top] = 0;
            for (i, &m) in self.modulus[..k].iter().enumerate() {
                let idx = top - k + i;
                prod[idx] = (prod[idx] + (p - m as u64) * c) % p;
            }
        }
        let d: Vec<u32> = prod[..k].iter().map(|&c| c as u32).collect();
        self.pack(&d)
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        match &self.tables {
            Some(t) => Fe(t.add[(a.0 * self.q + b.0) as usize]),
            None => self.add_slow(a, b),
        }
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        match &self.tables {
            Some(t) => Fe(t.neg[a.0 as usize]),
            None => self.neg_slow(a),
        }
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        match &self.tables {
            Some(t) => Fe(t.mul[(a.0 * self.q + b.0) as usize]),
            None => self.mul_slow(a, b),
        }
    }

    pub fn pow(&self, a: Fe, mut e: u64) -> Fe {
        let (mut base, mut acc) = (a, Fe::ONE);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: Fe) -> Result<Fe> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(match &self.tables {
            Some(t) => Fe(t.inv[a.0 as usize]),
            None => self.pow(a, self.q as u64 - 2),
        })
    }

    pub fn div(&self, a: Fe, b: Fe) -> Result<Fe> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// JSON form of an element: an integer residue for prime fields, a
    /// low-to-high coefficient list over F_p otherwise.
    pub fn element_to_json(&self, a: Fe) -> Value {
        if self.k == 1 {
            Value::from(a.0)
        } else {
            Value::from(self.digits(a))
        }
    }

    pub fn element_from_json(&self, v: &Value) -> Result<Fe> {
        let bad = || Error::InvalidInput(format!("bad field element {v}"));
        match v {
            Value::Number(n) => {
                let x = n.as_u64().ok_or_else(bad)?;
                if x >= self.q as u64 {
                    return Err(bad());
                }
                Ok(Fe(x as u32))
            }
            Value::Array(ds) if ds.len() == self.k as usize => {
                let digits = ds
                    .iter()
                    .map(|d| d.as_u64().filter(|&x| x < self.p as u64).map(|x| x as u32))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(bad)?;
                Ok(self.pack(&digits))
            }
            _ => Err(bad()),
        }
    }
}

/// Polynomial over F_q, low-to-high, with no trailing zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PolyFq {
    coeffs: Vec<Fe>,
}

impl PolyFq {
    pub fn new(mut coeffs: Vec<Fe>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        PolyFq { coeffs }
    }

    pub fn zero() -> Self {
        PolyFq { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        PolyFq {
            coeffs: vec![Fe::ONE],
        }
    }

    /// The polynomial x.
    pub fn x() -> Self {
        PolyFq {
            coeffs: vec![Fe::ZERO, Fe::ONE],
        }
    }

    /// x - a
    pub fn linear(field: &FieldSpec, a: Fe) -> Self {
        PolyFq::new(vec![field.neg(a), Fe::ONE])
    }

    pub fn coeffs(&self) -> &[Fe] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last() == Some(&Fe::ONE)
    }

    pub fn lead(&self) -> Fe {
        self.coeffs.last().copied().unwrap_or(Fe::ZERO)
    }

    pub fn add(&self, other: &PolyFq, field: &FieldSpec) -> PolyFq {
        let n = self.coeffs.len().max(other.coeffs.len());
        let c = (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(Fe::ZERO);
                let b = other.coeffs.get(i).copied().unwrap_or(Fe::ZERO);
                field.add(a, b)
            })
            .collect();
        PolyFq::new(c)
    }

    pub fn sub(&self, other: &PolyFq, field: &FieldSpec) -> PolyFq {
        let neg = PolyFq::new(other.coeffs.iter().map(|&c| field.neg(c)).collect());
        self.add(&neg, field)
    }

    pub fn mul(&self, other: &PolyFq, field: &FieldSpec) -> PolyFq {
        if self.is_zero() || other.is_zero() {
            return PolyFq::zero();
        }
        let mut c = vec![Fe::ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                c[i + j] = field.add(c[i + j], field.mul(a, b));
            }
        }
        PolyFq::new(c)
    }

    pub fn scale(&self, s: Fe, field: &FieldSpec) -> PolyFq {
        PolyFq::new(self.coeffs.iter().map(|&c| field.mul(c, s)).collect())
    }

    /// Euclidean division: (quotient, remainder).
    pub fn divrem(&self, divisor: &PolyFq, field: &FieldSpec) -> Result<(PolyFq, PolyFq)> {
        let dd = divisor.degree().ok_or(Error::DivisionByZero)?;
        let lead_inv = field.inv(divisor.lead())?;
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((PolyFq::zero(), self.clone()));
        }
        let mut quot = vec![Fe::ZERO; rem.len() - dd];
        for top in (dd..rem.len()).rev() {
            let c = field.mul(rem[top], lead_inv);
            if c.is_zero() {
                continue;
            }
            quot[top - dd] = c;
            for (i, &dc) in divisor.coeffs.iter().enumerate() {
                let idx = top - dd + i;
                rem[idx] = field.sub(rem[idx], field.mul(c, dc));
            }
        }
        rem.truncate(dd);
        Ok((PolyFq::new(quot), PolyFq::new(rem)))
    }

    pub fn rem(&self, divisor: &PolyFq, field: &FieldSpec) -> Result<PolyFq> {
        Ok(self.divrem(divisor, field)?.1)
    }

    pub fn monic(&self, field: &FieldSpec) -> PolyFq {
        match field.inv(self.lead()) {
            Ok(l) => self.scale(l, field),
            Err(_) => PolyFq::zero(),
        }
    }

    /// Monic gcd.
    pub fn gcd(&self, other: &PolyFq, field: &FieldSpec) -> PolyFq {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b, field).expect("nonzero divisor");
            a = b;
            b = r;
        }
        a.monic(field)
    }

    /// self^e mod m.
    pub fn pow_mod(&self, mut e: u64, m: &PolyFq, field: &FieldSpec) -> Result<PolyFq> {
        let mut base = self.rem(m, field)?;
        let mut acc = PolyFq::one().rem(m, field)?;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base, field).rem(m, field)?;
            }
            base = base.mul(&base, field).rem(m, field)?;
            e >>= 1;
        }
        Ok(acc)
    }

    pub fn eval(&self, x: Fe, field: &FieldSpec) -> Fe {
        self.coeffs
            .iter()
            .rev()
            .fold(Fe::ZERO, |acc, &c| field.add(field.mul(acc, x), c))
    }

    /// Ben-Or test: f of degree d is irreducible iff gcd(f, x^{q^i} - x) = 1
    /// for all 1 <= i <= d/2.
    pub fn is_irreducible(&self, field: &FieldSpec) -> bool {
        let Some(d) = self.degree() else { return false };
        if d == 0 {
            return false;
        }
        if d == 1 {
            return true;
        }
        if self.coeffs[0].is_zero() {
            return false;
        }
        let f = self.monic(field);
        let x = PolyFq::x();
        let mut xp = x.clone();
        for _ in 0..d / 2 {
            xp = match xp.pow_mod(field.q() as u64, &f, field) {
                Ok(v) => v,
                Err(_) => return false,
            };
            if f.gcd(&xp.sub(&x, field), field).degree() != Some(0) {
                return false;
            }
        }
        true
    }

    /// Coefficient list as JSON (see [`FieldSpec::element_to_json`]).
    pub fn to_json(&self, field: &FieldSpec) -> Value {
        Value::Array(
            self.coeffs
                .iter()
                .map(|&c| field.element_to_json(c))
                .collect(),
        )
    }

    pub fn from_json(v: &Value, field: &FieldSpec) -> Result<PolyFq> {
        let arr = v
            .as_array()
            .ok_or_else(|| Error::InvalidInput(format!("expected a coefficient list, got {v}")))?;
        let coeffs = arr
            .iter()
            .map(|c| field.element_from_json(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyFq::new(coeffs))
    }

    pub fn display(&self, field: &FieldSpec) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut terms = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let coef = if field.k() == 1 {
                c.0.to_string()
            } else {
                format!("[{}]", c.0)
            };
            terms.push(match (i, c.0) {
                (0, _) => coef,
                (1, 1) => "x".into(),
                (1, _) => format!("{coef}x"),
                (_, 1) => format!("x^{i}"),
                _ => format!("{coef}x^{i}"),
            });
        }
        terms.join("+")
    }
}

/// All monic polynomials of degree d, ordered by the packed integer whose
/// most significant digit is the x^{d-1} coefficient.
pub fn enumerate_monic(field: &FieldSpec, d: usize) -> impl Iterator<Item = PolyFq> + '_ {
    let q = field.q() as u64;
    let total = q.pow(d as u32);
    (0..total).map(move |mut t| {
        let mut c = Vec::with_capacity(d + 1);
        for _ in 0..d {
            c.push(Fe((t % q) as u32));
            t /= q;
        }
        c.push(Fe::ONE);
        PolyFq { coeffs: c }
    })
}

/// All monic irreducibles of degree d over F_q. With `exclude_x`, the
/// polynomial x is omitted (orbits of units only).
pub fn enumerate_irreducibles(field: &FieldSpec, d: usize, exclude_x: bool) -> Result<Vec<PolyFq>> {
    if d == 0 {
        return Err(Error::InvalidInput("degree must be at least 1".into()));
    }
    let total = (field.q() as u128)
        .checked_pow(d as u32)
        .unwrap_or(u128::MAX);
    if total > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge(format!(
            "q^d = {total} exceeds {MAX_ENUMERATION}"
        )));
    }
    Ok(enumerate_monic(field, d)
        .filter(|f| !(exclude_x && d == 1 && f.coeffs[0].is_zero()))
        .filter(|f| f.is_irreducible(field))
        .collect())
}

pub fn mobius(n: u64) -> i32 {
    let (mut n, mut sign, mut p) = (n, 1, 2u64);
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

/// Number of monic irreducibles of degree d over F_q (necklace formula).
pub fn necklace_count(q: u64, d: u32) -> BigUint {
    let mut acc = BigInt::zero();
    let qb = BigInt::from(q);
    for e in 1..=d {
        if d.is_multiple_of(e) {
            let m = mobius(e as u64);
            if m != 0 {
                acc += BigInt::from(m) * qb.pow(d / e);
            }
        }
    }
    let n = acc / BigInt::from(d);
    n.to_biguint().unwrap_or_default()
}

/// Number of Frobenius orbits of degree d on the units of the algebraic
/// closure: the necklace count, minus the orbit {0} when d = 1.
pub fn unit_orbit_count(q: u64, d: u32) -> BigUint {
    let n = necklace_count(q, d);
    if d == 1 {
        n - BigUint::one()
    } else {
        n
    }
}

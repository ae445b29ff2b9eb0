//! Partitions, partition-valued functions on Frobenius orbits, and the
//! GL_n(F_q) bookkeeping built on them: group orders, class sizes through
//! a_mu(q), irreducible dimensions, and the q -> q^2 substitution that turns
//! GL_n class sizes into GL_2n / Sp_2n double coset sizes.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fq_arith::unit_orbit_count;

pub type BigRat = BigRational;

/// "num/den" (or just "num" for integers), the wire format for rationals.
pub fn rat_to_string(r: &BigRat) -> String {
    r.to_string()
}

pub fn rat_from_str(s: &str) -> Result<BigRat> {
    let bad = || Error::InvalidInput(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let den: num_bigint::BigInt = b.trim().parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(Error::DivisionByZero);
            }
            Ok(BigRat::new(a.trim().parse().map_err(|_| bad())?, den))
        }
        None => Ok(BigRat::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

/// An integer partition, parts weakly decreasing and positive.
///
/// Box coordinates are 1-indexed `(row, column)` throughout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition(Vec<usize>);

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(parts: Vec<usize>) -> Result<Self> {
        Partition::new(parts)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.0
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.contains(&0) || parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(format!("{parts:?} is not a partition")));
        }
        Ok(Partition(parts))
    }

    /// Sorts and drops zeros.
    pub fn from_unsorted(mut parts: Vec<usize>) -> Self {
        parts.retain(|&x| x > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition(parts)
    }

    pub fn empty() -> Self {
        Partition(Vec::new())
    }

    /// (1^m)
    pub fn column(m: usize) -> Self {
        Partition(vec![1; m])
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.iter().sum()
    }

    /// Number of nonzero parts.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Row length, 0 past the last row.
    pub fn row(&self, i: usize) -> usize {
        if i == 0 {
            return 0;
        }
        self.0.get(i - 1).copied().unwrap_or(0)
    }

    /// Column height, 0 past the first row length.
    pub fn col(&self, j: usize) -> usize {
        self.0.iter().take_while(|&&r| r >= j).count()
    }

    pub fn contains(&self, (i, j): (usize, usize)) -> bool {
        i >= 1 && j >= 1 && self.row(i) >= j
    }

    pub fn conjugate(&self) -> Partition {
        let width = self.0.first().copied().unwrap_or(0);
        Partition((1..=width).map(|j| self.col(j)).collect())
    }

    pub fn arm(&self, (i, j): (usize, usize)) -> usize {
        self.row(i) - j
    }

    pub fn leg(&self, (i, j): (usize, usize)) -> usize {
        self.col(j) - i
    }

    pub fn hook(&self, s: (usize, usize)) -> usize {
        self.arm(s) + self.leg(s) + 1
    }

    pub fn boxes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, &r)| (1..=r).map(move |j| (i + 1, j)))
    }

    pub fn hooks(&self) -> Vec<usize> {
        self.boxes().map(|s| self.hook(s)).collect()
    }

    /// n(lambda) = sum (i-1) lambda_i
    pub fn n(&self) -> usize {
        self.0.iter().enumerate().map(|(i, &r)| i * r).sum()
    }

    /// n(lambda') = sum over rows of C(lambda_i, 2)
    pub fn n_conj(&self) -> usize {
        self.0.iter().map(|&r| r * (r.saturating_sub(1)) / 2).sum()
    }

    /// m_i(lambda): number of parts equal to i.
    pub fn multiplicity(&self, i: usize) -> usize {
        self.0.iter().filter(|&&r| r == i).count()
    }

    /// Map part -> multiplicity.
    pub fn multiplicities(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for &r in &self.0 {
            *m.entry(r).or_insert(0) += 1;
        }
        m
    }

    /// Boxes (i, j) whose removal leaves a partition.
    pub fn removable_corners(&self) -> Vec<(usize, usize)> {
        (0..self.0.len())
            .filter(|&i| i + 1 == self.0.len() || self.0[i] > self.0[i + 1])
            .map(|i| (i + 1, self.0[i]))
            .collect()
    }

    pub fn remove_box(&self, (i, j): (usize, usize)) -> Result<Partition> {
        if !self.removable_corners().contains(&(i, j)) {
            return Err(Error::NotSingleBox);
        }
        let mut parts = self.0.clone();
        parts[i - 1] -= 1;
        if parts[i - 1] == 0 {
            parts.pop();
        }
        Ok(Partition(parts))
    }

    /// The partition containing every part twice.
    pub fn union_double(&self) -> Partition {
        Partition(self.0.iter().flat_map(|&r| [r, r]).collect())
    }

    /// Inverse of [`Partition::union_double`] on the level of part
    /// multiplicities; `None` if some multiplicity is odd.
    pub fn halve_multiplicities(&self) -> Option<Partition> {
        let mut parts = Vec::new();
        for (part, mult) in self.multiplicities().into_iter().rev() {
            if mult % 2 == 1 {
                return None;
            }
            parts.extend(std::iter::repeat_n(part, mult / 2));
        }
        Some(Partition(parts))
    }

    /// Single-box containment mu ⊆ self with |self/mu| = 1; returns the box.
    pub fn skew_box(&self, mu: &Partition) -> Result<(usize, usize)> {
        if self.size() != mu.size() + 1 {
            return Err(Error::NotSingleBox);
        }
        let mut diff = None;
        for i in 1..=self.len() {
            match self.row(i).checked_sub(mu.row(i)) {
                Some(0) => {}
                Some(1) if diff.is_none() => diff = Some((i, self.row(i))),
                _ => return Err(Error::NotSingleBox),
            }
        }
        let b = diff.ok_or(Error::NotSingleBox)?;
        if mu.len() > self.len() {
            return Err(Error::NotSingleBox);
        }
        Ok(b)
    }
}

/// All partitions of m, reverse lexicographic.
pub fn partitions(m: usize) -> Vec<Partition> {
    fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if rem == 0 {
            out.push(Partition(cur.clone()));
            return;
        }
        for part in (1..=rem.min(max)).rev() {
            cur.push(part);
            rec(rem - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, m, &mut Vec::new(), &mut out);
    out
}

/// Which Frobenius orbits a partition-valued function lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OrbitFamily {
    /// O(M): orbits of units, i.e. irreducible polynomials other than x.
    #[default]
    Classes,
    /// O(L): orbits of characters.
    Characters,
}

/// One orbit carrying a nonempty partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    pub degree: usize,
    pub partition: Partition,
    pub orbit: usize,
}

/// A partition-valued function on orbits, stored as its nonempty slots.
///
/// When produced by [`enumerate_typed_fns`] the orbit indices are canonical
/// placeholders (0, 1, ... per degree) and the value stands for its whole
/// type; from the classifier they are indices into the orbit list of the field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TypedPartitionFn {
    slots: Vec<Slot>,
}

impl Serialize for TypedPartitionFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.slots.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TypedPartitionFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let slots = Vec::<Slot>::deserialize(d)?;
        TypedPartitionFn::new(slots).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for TypedPartitionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self
            .slots
            .iter()
            .map(|s| format!("d{}#{}↦{}", s.degree, s.orbit, s.partition))
            .collect();
        write!(f, "{{{}}}", s.join(", "))
    }
}

impl TypedPartitionFn {
    pub fn new(mut slots: Vec<Slot>) -> Result<Self> {
        slots.retain(|s| !s.partition.is_empty());
        if slots.iter().any(|s| s.degree == 0) {
            return Err(Error::InvalidInput("orbit degree must be positive".into()));
        }
        slots.sort_by_key(|a| (a.degree, a.orbit));
        if slots
            .windows(2)
            .any(|w| (w[0].degree, w[0].orbit) == (w[1].degree, w[1].orbit))
        {
            return Err(Error::InvalidInput("orbit assigned twice".into()));
        }
        Ok(TypedPartitionFn { slots })
    }

    /// Single degree-1 orbit (index 0) carrying `partition`.
    pub fn single(degree: usize, partition: Partition) -> Self {
        TypedPartitionFn {
            slots: vec![Slot {
                degree,
                partition,
                orbit: 0,
            }],
        }
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// ||mu|| = sum d(f) |mu(f)|
    pub fn weight(&self) -> usize {
        self.slots
            .iter()
            .map(|s| s.degree * s.partition.size())
            .sum()
    }

    /// Apply lambda -> lambda ∪ lambda slotwise.
    pub fn union_double(&self) -> Self {
        TypedPartitionFn {
            slots: self
                .slots
                .iter()
                .map(|s| Slot {
                    partition: s.partition.union_double(),
                    ..s.clone()
                })
                .collect(),
        }
    }

    /// True for the functions supported on one degree-1 orbit with value
    /// (1^n): the trivial representation and its determinant twists.
    pub fn is_determinant_twist(&self) -> bool {
        matches!(self.slots.as_slice(), [s] if s.degree == 1 && s.partition.parts().iter().all(|&r| r == 1))
    }

    /// Partition at a given orbit (empty if absent).
    pub fn at(&self, degree: usize, orbit: usize) -> Partition {
        self.slots
            .iter()
            .find(|s| s.degree == degree && s.orbit == orbit)
            .map(|s| s.partition.clone())
            .unwrap_or_default()
    }

    /// Collapses orbit indices: the sorted multiset of (degree, partition).
    pub fn type_key(&self) -> Vec<(usize, Partition)> {
        let mut k: Vec<_> = self
            .slots
            .iter()
            .map(|s| (s.degree, s.partition.clone()))
            .collect();
        k.sort();
        k
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

/// Orbit counts per degree for O(M) (equivalently O(L)) over F_q.
pub fn orbit_counts(q: u64, max_degree: usize) -> Vec<BigUint> {
    let mut v = vec![BigUint::zero()];
    v.extend((1..=max_degree).map(|d| unit_orbit_count(q, d as u32)));
    v
}

fn binomial(n: &BigUint, k: usize) -> BigUint {
    if *n < BigUint::from(k) {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - BigUint::from(i)) / BigUint::from(i + 1);
    }
    acc
}

/// Enumerates all types of partition-valued functions of weight n together
/// with the number of concrete functions of each type, given the number of
/// available orbits of each degree (`counts[d]`, index 0 unused).
pub fn enumerate_types_with_counts(
    n: usize,
    counts: &[BigUint],
) -> Vec<(TypedPartitionFn, BigUint)> {
    let mut items: Vec<(usize, Partition)> = Vec::new();
    for d in 1..=n {
        if counts.get(d).is_none_or(|c| c.is_zero()) {
            continue;
        }
        for m in 1..=n / d {
            items.extend(partitions(m).into_iter().map(|p| (d, p)));
        }
    }

    struct Ctx<'a> {
        items: &'a [(usize, Partition)],
        counts: &'a [BigUint],
        out: Vec<(TypedPartitionFn, BigUint)>,
    }

    fn rec(
        ctx: &mut Ctx,
        idx: usize,
        rem: usize,
        used: &mut Vec<usize>,
        chosen: &mut Vec<Slot>,
        mult: BigUint,
    ) {
        if rem == 0 {
            ctx.out.push((
                TypedPartitionFn {
                    slots: chosen.clone(),
                },
                mult,
            ));
            return;
        }
        if idx == ctx.items.len() {
            return;
        }
        let (d, ref p) = ctx.items[idx];
        let w = d * p.size();
        let avail = &ctx.counts[d] - BigUint::from(used[d]);
        let mut r = 0;
        loop {
            if r * w > rem || BigUint::from(r) > avail {
                break;
            }
            let factor = binomial(&avail, r);
            let base = chosen.len();
            for t in 0..r {
                chosen.push(Slot {
                    degree: d,
                    partition: p.clone(),
                    orbit: used[d] + t,
                });
            }
            used[d] += r;
            rec(ctx, idx + 1, rem - r * w, used, chosen, &mult * factor);
            used[d] -= r;
            chosen.truncate(base);
            r += 1;
        }
    }

    let mut ctx = Ctx {
        items: &items,
        counts,
        out: Vec::new(),
    };
    let mut used = vec![0usize; n + 1];
    rec(&mut ctx, 0, n, &mut used, &mut Vec::new(), BigUint::one());
    let mut out = ctx.out;
    for (t, _) in &mut out {
        t.slots.sort_by_key(|a| (a.degree, a.orbit));
    }
    out
}

/// All types of weight n over F_q with their concrete counts.
pub fn enumerate_typed_fns(
    n: usize,
    q: u64,
    _family: OrbitFamily,
) -> Vec<(TypedPartitionFn, BigUint)> {
    enumerate_types_with_counts(n, &orbit_counts(q, n))
}

/// Types of weight n split by the value at one marked degree-1 orbit
/// (the orbit of x - 1 for classes). Each entry is (value at the marked
/// orbit, full function with the marked orbit at index 0, count of concrete
/// functions on the remaining orbits).
pub fn enumerate_with_marked_orbit(
    n: usize,
    q: u64,
) -> Vec<(Partition, TypedPartitionFn, BigUint)> {
    let mut counts = orbit_counts(q, n);
    counts[1] -= BigUint::one();
    let mut out = Vec::new();
    for m in 0..=n {
        let rest = enumerate_types_with_counts(n - m, &counts);
        let marked: Vec<Partition> = if m == 0 {
            vec![Partition::empty()]
        } else {
            partitions(m)
        };
        for nu in &marked {
            for (t, c) in &rest {
                let mut slots: Vec<Slot> = t
                    .slots
                    .iter()
                    .map(|s| Slot {
                        orbit: if s.degree == 1 { s.orbit + 1 } else { s.orbit },
                        ..s.clone()
                    })
                    .collect();
                if !nu.is_empty() {
                    slots.push(Slot {
                        degree: 1,
                        partition: nu.clone(),
                        orbit: 0,
                    });
                }
                let f = TypedPartitionFn::new(slots).expect("distinct orbits");
                out.push((nu.clone(), f, c.clone()));
            }
        }
    }
    out
}

fn pow(t: &BigUint, e: usize) -> BigUint {
    t.pow(e as u32)
}

/// |GL_n| at parameter t: prod_{i=0}^{n-1} (t^n - t^i).
pub fn gl_order_at(n: usize, t: &BigUint) -> BigUint {
    let tn = pow(t, n);
    (0..n).map(|i| &tn - pow(t, i)).product()
}

pub fn gl_order(n: usize, q: u64) -> BigUint {
    gl_order_at(n, &BigUint::from(q))
}

/// |Sp_2n(F_q)| = q^{n^2} prod_{i=1}^n (q^{2i} - 1).
pub fn sp_order(n: usize, q: u64) -> BigUint {
    let t = BigUint::from(q);
    pow(&t, n * n) * (1..=n).map(|i| pow(&t, 2 * i) - 1u32).product::<BigUint>()
}

/// psi_n(t) = prod_{i=1}^n (t^i - 1).
pub fn psi_at(n: usize, t: &BigUint) -> BigUint {
    (1..=n).map(|i| pow(t, i) - 1u32).product()
}

pub fn psi(n: usize, q: u64) -> BigUint {
    psi_at(n, &BigUint::from(q))
}

fn rat(x: BigUint) -> BigRat {
    BigRat::from_integer(x.into())
}

/// a_mu at parameter t, as an exact rational:
/// t^n prod_f t_f^{2 n(mu(f))} prod_i prod_{j=1}^{m_i(mu(f))} (1 - t_f^{-j}).
pub fn a_mu_at(mu: &TypedPartitionFn, t: &BigUint) -> BigRat {
    let mut acc = rat(pow(t, mu.weight()));
    for s in &mu.slots {
        let tf = pow(t, s.degree);
        acc *= rat(pow(&tf, 2 * s.partition.n()));
        for (_, m) in s.partition.multiplicities() {
            for j in 1..=m {
                let tj = rat(pow(&tf, j));
                acc *= BigRat::one() - tj.recip();
            }
        }
    }
    acc
}

pub fn a_mu(mu: &TypedPartitionFn, q: u64) -> BigRat {
    a_mu_at(mu, &BigUint::from(q))
}

/// Exact integer quotient, or `NonIntegerResult`.
pub fn integral_quotient(num: &BigRat, den: &BigRat, what: &str) -> Result<BigUint> {
    let v = num / den;
    if !v.is_integer() || v.numer().sign() == num_bigint::Sign::Minus {
        return Err(Error::NonIntegerResult(format!("{what} = {v}")));
    }
    Ok(v.to_integer().to_biguint().unwrap_or_default())
}

/// |GL_n(t)| / a_mu(t) with the integrality check; `a_mu_fn` is injectable
/// so fault-injection runs can exercise the error path.
pub fn class_size_with(
    mu: &TypedPartitionFn,
    t: &BigUint,
    a_mu_fn: impl Fn(&TypedPartitionFn, &BigUint) -> BigRat,
) -> Result<BigUint> {
    let gl = rat(gl_order_at(mu.weight(), t));
    integral_quotient(&gl, &a_mu_fn(mu, t), &format!("|C_mu| for {mu}"))
}

/// |C_mu| in GL_n(F_q).
pub fn class_size(mu: &TypedPartitionFn, q: u64) -> Result<BigUint> {
    class_size_with(mu, &BigUint::from(q), a_mu_at)
}

/// |C_mu| with q -> q^2: the formula re-evaluated at parameter q^2, with
/// orbit degrees kept from the F_q labelling.
pub fn class_size_qsq(mu: &TypedPartitionFn, q: u64) -> Result<BigUint> {
    let t = BigUint::from(q) * BigUint::from(q);
    class_size_with(mu, &t, a_mu_at)
}

/// H_lambda(t) = prod_{x in lambda} (t^{h(x)} - 1).
pub fn hook_polynomial_at(lambda: &Partition, t: &BigUint) -> BigUint {
    lambda
        .hooks()
        .into_iter()
        .map(|h| pow(t, h) - 1u32)
        .product()
}

/// d_lambda = psi_N(q) prod_phi q_phi^{n(lambda(phi)')} / H_{lambda(phi)}(q_phi).
pub fn dim_irrep(lambda: &TypedPartitionFn, q: u64) -> Result<BigUint> {
    let t = BigUint::from(q);
    dim_irrep_with_psi(lambda, q, &psi_at(lambda.weight(), &t))
}

/// As [`dim_irrep`] with psi_N(q) supplied (it is shared by every label of
/// the same weight).
pub fn dim_irrep_with_psi(lambda: &TypedPartitionFn, q: u64, psi_n: &BigUint) -> Result<BigUint> {
    let t = BigUint::from(q);
    let mut num = psi_n.clone();
    let mut den = BigUint::one();
    for s in &lambda.slots {
        let tf = pow(&t, s.degree);
        num *= pow(&tf, s.partition.n_conj());
        den *= hook_polynomial_at(&s.partition, &tf);
    }
    let (quot, r) = num.div_rem(&den);
    if !r.is_zero() {
        return Err(Error::NonIntegerResult(format!("d_lambda for {lambda}")));
    }
    Ok(quot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    fn one(d: usize, part: &[usize]) -> TypedPartitionFn {
        TypedPartitionFn::single(d, p(part))
    }

    #[test]
    fn partition_basics() {
        let l = p(&[2, 2]);
        assert_eq!(l.removable_corners(), vec![(2, 2)]);
        assert_eq!(p(&[2]).union_double(), l);
        assert_eq!(l.conjugate().n(), 2);
        assert_eq!(l.n(), 2);
        let mut h = l.hooks();
        h.sort_unstable();
        assert_eq!(h, vec![1, 2, 2, 3]);
        assert_eq!(
            p(&[4, 2, 1]).removable_corners(),
            vec![(1, 4), (2, 2), (3, 1)]
        );
        assert_eq!(p(&[3, 1]).conjugate(), p(&[2, 1, 1]));
        assert_eq!(p(&[3, 1]).n_conj(), p(&[3, 1]).conjugate().n());
        assert!(Partition::new(vec![1, 2]).is_err());
        assert_eq!(p(&[2, 2, 1, 1]).halve_multiplicities(), Some(p(&[2, 1])));
        assert_eq!(p(&[2, 1, 1]).halve_multiplicities(), None);
    }

    #[test]
    fn arm_leg_conventions() {
        let l = p(&[3, 1]);
        assert_eq!((l.arm((1, 1)), l.leg((1, 1))), (2, 1));
        assert_eq!((l.arm((1, 3)), l.leg((1, 3))), (0, 0));
        assert_eq!(l.skew_box(&p(&[2, 1])), Ok((1, 3)));
        assert_eq!(l.skew_box(&p(&[3])), Ok((2, 1)));
        assert_eq!(l.skew_box(&p(&[1, 1])), Err(Error::NotSingleBox));
    }

    #[test]
    fn partition_counts() {
        let counts: Vec<usize> = (0..=10).map(|m| partitions(m).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42]);
    }

    #[test]
    fn typed_enumeration_examples() {
        let t = enumerate_typed_fns(2, 2, OrbitFamily::Classes);
        assert_eq!(t.len(), 3);
        assert!(t.iter().all(|(_, c)| c == &BigUint::one()));
        let keys: Vec<_> = t.iter().map(|(f, _)| f.type_key()).collect();
        assert!(keys.contains(&vec![(1, p(&[2]))]));
        assert!(keys.contains(&vec![(1, p(&[1, 1]))]));
        assert!(keys.contains(&vec![(2, p(&[1]))]));

        let t3 = enumerate_typed_fns(1, 3, OrbitFamily::Classes);
        assert_eq!(t3.len(), 1);
        assert_eq!(t3[0].1, BigUint::from(2u32));
    }

    #[test]
    fn group_orders() {
        assert_eq!(gl_order(4, 2), BigUint::from(20160u32));
        assert_eq!(sp_order(2, 2), BigUint::from(720u32));
        assert_eq!(gl_order(4, 2) / sp_order(2, 2), BigUint::from(28u32));
        assert_eq!(psi(4, 2), BigUint::from(315u32));
    }

    #[test]
    fn class_size_examples() {
        assert_eq!(class_size(&one(1, &[1, 1, 1]), 3).unwrap(), BigUint::one());
        let sizes: Vec<u32> = [one(1, &[1, 1]), one(1, &[2]), one(2, &[1])]
            .iter()
            .map(|m| class_size(m, 2).unwrap().try_into().unwrap())
            .collect();
        assert_eq!(sizes, vec![1, 3, 2]);
        assert_eq!(
            class_size(&one(1, &[2, 1, 1]), 2).unwrap(),
            BigUint::from(105u32)
        );
        let qsq: Vec<u32> = [one(1, &[1, 1]), one(1, &[2]), one(2, &[1])]
            .iter()
            .map(|m| class_size_qsq(m, 2).unwrap().try_into().unwrap())
            .collect();
        assert_eq!(qsq, vec![1, 15, 12]);
    }

    #[test]
    fn perturbed_a_mu_is_caught() {
        let mu = one(1, &[2]);
        let bad = |m: &TypedPartitionFn, t: &BigUint| {
            a_mu_at(m, t) * rat(pow(t, m.weight() * m.weight()))
        };
        assert!(matches!(
            class_size_with(&mu, &BigUint::from(2u32), bad),
            Err(Error::NonIntegerResult(_))
        ));
    }

    #[test]
    fn dim_examples() {
        assert_eq!(
            dim_irrep(&one(1, &[1, 1, 1, 1]), 2).unwrap(),
            BigUint::one()
        );
        assert_eq!(
            dim_irrep(&one(1, &[2, 2]), 2).unwrap(),
            BigUint::from(20u32)
        );
        assert_eq!(dim_irrep(&one(2, &[1, 1]), 2).unwrap(), BigUint::from(7u32));
    }

    #[test]
    fn class_sizes_sum_to_group_order() {
        for q in [2u64, 3] {
            for n in 1..=5 {
                let total: BigUint = enumerate_typed_fns(n, q, OrbitFamily::Classes)
                    .iter()
                    .map(|(mu, c)| class_size(mu, q).unwrap() * c)
                    .sum();
                assert_eq!(total, gl_order(n, q), "n={n} q={q}");
            }
        }
    }

    #[test]
    fn squared_dims_sum_to_group_order() {
        for n in 1..=4 {
            let total: BigUint = enumerate_typed_fns(n, 2, OrbitFamily::Characters)
                .iter()
                .map(|(l, c)| {
                    let d = dim_irrep(l, 2).unwrap();
                    &d * &d * c
                })
                .sum();
            assert_eq!(total, gl_order(n, 2), "n={n}");
        }
    }

    #[test]
    fn spherical_dims_and_double_cosets_sum_to_coset_count() {
        for q in [2u64, 3] {
            for n in 1..=4 {
                let target = gl_order(2 * n, q) / sp_order(n, q);
                let dims: BigUint = enumerate_typed_fns(n, q, OrbitFamily::Characters)
                    .iter()
                    .map(|(l, c)| dim_irrep(&l.union_double(), q).unwrap() * c)
                    .sum();
                assert_eq!(dims, target, "dims n={n} q={q}");
                let cosets: BigUint = enumerate_typed_fns(n, q, OrbitFamily::Classes)
                    .iter()
                    .map(|(m, c)| class_size_qsq(m, q).unwrap() * c)
                    .sum();
                assert_eq!(cosets, target, "cosets n={n} q={q}");
            }
        }
    }

    #[test]
    fn marked_enumeration_matches_plain_total() {
        for q in [2u64, 3, 4] {
            for n in 1..=4 {
                let plain: BigUint = enumerate_typed_fns(n, q, OrbitFamily::Classes)
                    .iter()
                    .map(|(_, c)| c.clone())
                    .sum();
                let marked: BigUint = enumerate_with_marked_orbit(n, q)
                    .iter()
                    .map(|(_, _, c)| c.clone())
                    .sum();
                assert_eq!(plain, marked);
            }
        }
    }

    #[test]
    fn json_shape() {
        let f = one(1, &[2]);
        assert_eq!(
            f.to_json().to_string(),
            r#"[{"degree":1,"partition":[2],"orbit":0}]"#
        );
        let back: TypedPartitionFn = serde_json::from_value(f.to_json()).unwrap();
        assert_eq!(back, f);
    }
}

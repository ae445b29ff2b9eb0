//! Eigenvalues of the transvection walk on GL_2n/Sp_2n.
//!
//! phi_lambda is computed two ways from the Macdonald-type product, and a
//! third way by lifting the GL_2n character ratio at a transvection through
//! T = aS + bI. The three must agree exactly.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gl_combinat::{
    dim_irrep_with_psi, enumerate_typed_fns, hook_polynomial_at, psi, rat_to_string, BigRat,
    OrbitFamily, Partition, Slot, TypedPartitionFn,
};
use crate::par::{self, Exec};

fn int(x: u64) -> BigRat {
    BigRat::from_integer(BigInt::from(x))
}

fn qpow(q: u64, e: usize) -> BigRat {
    BigRat::from_integer(BigInt::from(q).pow(e as u32))
}

/// q^e for a possibly negative exponent.
fn qpow_signed(q: u64, e: i64) -> BigRat {
    let p = qpow(q, e.unsigned_abs() as usize);
    if e < 0 {
        p.recip()
    } else {
        p
    }
}

/// 1 - q^e
fn one_minus(q: u64, e: usize) -> BigRat {
    BigRat::one() - qpow(q, e)
}

/// (a, b) with a the proportion of non-symplectic transvections and b the
/// symplectic ones, so that T = aS + bI.
pub fn proportions_a_b(n: usize, q: u64) -> (BigRat, BigRat) {
    let den = qpow(q, 2 * n - 1) - BigRat::one();
    let a = int(q) * (qpow(q, 2 * n - 2) - BigRat::one()) / &den;
    let b = int(q - 1) / den;
    (a, b)
}

/// c_lambda(q, t) = prod_s (1 - q^{a(s)} t^{l(s)+1}) at t = q^2.
pub fn macdonald_c(lambda: &Partition, q: u64) -> BigRat {
    lambda
        .boxes()
        .map(|s| one_minus(q, lambda.arm(s) + 2 * (lambda.leg(s) + 1)))
        .product()
}

/// c'_lambda(q, t) = prod_s (1 - q^{a(s)+1} t^{l(s)}) at t = q^2.
pub fn macdonald_cprime(lambda: &Partition, q: u64) -> BigRat {
    lambda
        .boxes()
        .map(|s| one_minus(q, lambda.arm(s) + 1 + 2 * lambda.leg(s)))
        .product()
}

/// b_lambda(s; q, t) = (1 - q^{a} t^{l+1}) / (1 - q^{a+1} t^{l}) at t = q^2.
pub fn macdonald_b(lambda: &Partition, s: (usize, usize), q: u64) -> BigRat {
    let (a, l) = (lambda.arm(s), lambda.leg(s));
    one_minus(q, a + 2 * l + 2) / one_minus(q, a + 1 + 2 * l)
}

/// psi'_{lambda/mu}: product of b_lambda / b_mu over the boxes sharing a
/// column with lambda/mu but not a row.
pub fn psi_prime(lambda: &Partition, mu: &Partition, q: u64) -> Result<BigRat> {
    let (bi, bj) = lambda.skew_box(mu)?;
    Ok((1..=lambda.col(bj))
        .filter(|&i| i != bi)
        .map(|i| macdonald_b(lambda, (i, bj), q) / macdonald_b(mu, (i, bj), q))
        .product())
}

fn check_weight(lambda: &TypedPartitionFn, n: usize) -> Result<()> {
    if lambda.weight() != n {
        return Err(Error::WeightMismatch {
            expected: n,
            got: lambda.weight(),
        });
    }
    Ok(())
}

fn prefactor(n: usize, q: u64) -> BigRat {
    qpow(q, 2 * n - 2) * (qpow(q, 2) - BigRat::one())
        / ((qpow(q, 2 * n) - BigRat::one()) * (qpow(q, 2 * n - 2) - BigRat::one()))
}

fn constant_term(n: usize, q: u64) -> BigRat {
    (qpow(q, 2 * n) - BigRat::one()) / (qpow(q, 2 * n - 2) * (qpow(q, 2) - BigRat::one()))
}

/// Degree-1 slots paired with each of their removable corners.
fn degree_one_corners(
    lambda: &TypedPartitionFn,
) -> impl Iterator<Item = (&Partition, (usize, usize))> {
    lambda
        .slots()
        .iter()
        .filter(|s| s.degree == 1)
        .flat_map(|s| {
            s.partition
                .removable_corners()
                .into_iter()
                .map(move |c| (&s.partition, c))
        })
}

fn exponent_diff(lambda1: &Partition, lambda: &Partition) -> i64 {
    lambda1.n_conj() as i64 - lambda.n_conj() as i64
}

/// phi_lambda from the c' / psi' form summed over degree-1 box removals.
pub fn eigenvalue_phi(lambda: &TypedPartitionFn, n: usize, q: u64) -> Result<BigRat> {
    check_weight(lambda, n)?;
    if n < 2 {
        return Err(Error::TrivialWalk);
    }
    let mut sum = BigRat::zero();
    for (part, corner) in degree_one_corners(lambda) {
        let lambda1 = part.remove_box(corner)?;
        let term = macdonald_cprime(part, q) * psi_prime(part, &lambda1, q)?
            / (macdonald_cprime(&lambda1, q) * one_minus(q, 1))
            * qpow_signed(q, exponent_diff(&lambda1, part));
        sum += term;
    }
    Ok(prefactor(n, q) * (sum - constant_term(n, q)))
}

/// phi_lambda from the product over the removed box's row and column only.
pub fn eigenvalue_phi_localized(lambda: &TypedPartitionFn, n: usize, q: u64) -> Result<BigRat> {
    check_weight(lambda, n)?;
    if n < 2 {
        return Err(Error::TrivialWalk);
    }
    let mut sum = BigRat::zero();
    for (part, (ci, cj)) in degree_one_corners(lambda) {
        let small = part.remove_box((ci, cj))?;
        let mut term = qpow_signed(q, exponent_diff(&small, part));
        // above the removed box in its column
        for i in 1..ci {
            let s = (i, cj);
            term *= one_minus(q, part.arm(s) + 2 * part.leg(s) + 2)
                / one_minus(q, small.arm(s) + 2 * small.leg(s) + 2);
        }
        // left of the removed box in its row
        for j in 1..cj {
            let s = (ci, j);
            term *= one_minus(q, part.arm(s) + 2 * part.leg(s) + 1)
                / one_minus(q, small.arm(s) + 2 * small.leg(s) + 1);
        }
        sum += term;
    }
    Ok(prefactor(n, q) * (sum - constant_term(n, q)))
}

/// chi_lambda(transvection) / d_lambda for GL_N(F_q), ||lambda|| = N.
pub fn char_ratio_transvection(lambda: &TypedPartitionFn, big_n: usize, q: u64) -> Result<BigRat> {
    check_weight(lambda, big_n)?;
    if big_n < 2 {
        return Err(Error::InvalidInput("GL_1 has no transvections".into()));
    }
    let t = BigUint::from(q);
    let pref = qpow(q, big_n - 1) * int(q - 1)
        / ((qpow(q, big_n) - BigRat::one()) * (qpow(q, big_n - 1) - BigRat::one()));
    let constant = (qpow(q, big_n) - BigRat::one()) / (qpow(q, big_n - 1) * int(q - 1));
    let mut sum = BigRat::zero();
    for (part, corner) in degree_one_corners(lambda) {
        let small = part.remove_box(corner)?;
        // delta(S_small) / delta(S_lambda); the other slots cancel
        let h_big = BigRat::from_integer(hook_polynomial_at(part, &t).into());
        let h_small = BigRat::from_integer(hook_polynomial_at(&small, &t).into());
        let ratio = qpow_signed(q, exponent_diff(&small, part)) * h_big / h_small;
        sum += ratio / int(q - 1);
    }
    Ok(pref * (sum - constant))
}

/// phi_lambda = (r - b) / a with r the GL_2n character ratio of lambda ∪ lambda.
pub fn eigenvalue_via_lift(lambda: &TypedPartitionFn, n: usize, q: u64) -> Result<BigRat> {
    check_weight(lambda, n)?;
    let (a, b) = proportions_a_b(n, q);
    if a.is_zero() {
        return Err(Error::TrivialWalk);
    }
    let r = char_ratio_transvection(&lambda.union_double(), 2 * n, q)?;
    Ok((r - b) / a)
}

/// The lower floor -1/(q^{2n-2} - 1) on every eigenvalue.
pub fn phi_floor(n: usize, q: u64) -> BigRat {
    -(qpow(q, 2 * n - 2) - BigRat::one()).recip()
}

/// Upper bound on phi_lambda from its degree-1 removable corners (i, j):
/// prefactor * sum (q^{2i}-1)(q^j-1) / (q^{j-1}(q-1)(q^2-1)).
pub fn corner_bound(lambda: &TypedPartitionFn, n: usize, q: u64) -> Result<BigRat> {
    check_weight(lambda, n)?;
    if n < 2 {
        return Err(Error::TrivialWalk);
    }
    let sum: BigRat = degree_one_corners(lambda)
        .map(|(_, (i, j))| {
            (qpow(q, 2 * i) - BigRat::one()) * (qpow(q, j) - BigRat::one())
                / (qpow(q, j - 1) * int(q - 1) * (qpow(q, 2) - BigRat::one()))
        })
        .sum();
    Ok(prefactor(n, q) * sum)
}

/// One eigenvalue together with how often it occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralLine {
    /// Representative of the type; orbit indices are placeholders.
    pub lambda_type: TypedPartitionFn,
    pub phi: BigRat,
    /// d_{lambda ∪ lambda}, the multiplicity of phi for each concrete lambda.
    pub multiplicity: BigUint,
    /// Number of concrete lambda of this type.
    pub type_count: BigUint,
}

impl SpectralLine {
    pub fn is_trivial(&self) -> bool {
        self.lambda_type.slots()
            == [Slot {
                degree: 1,
                partition: Partition::column(self.lambda_type.weight()),
                orbit: 0,
            }]
    }

    pub fn total_multiplicity(&self) -> BigUint {
        &self.multiplicity * &self.type_count
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lambda": self.lambda_type.to_json(),
            "phi": rat_to_string(&self.phi),
            "multiplicity": self.multiplicity.to_string(),
            "type_count": big_to_json(&self.type_count),
        })
    }
}

/// Big integers go over the wire as decimal strings.
pub(crate) fn big_to_json(x: &BigUint) -> Value {
    json!(x.to_string())
}

/// Every eigenvalue line for (n, q), sorted by decreasing phi.
///
/// For n = 1 every transvection is symplectic and the walk never moves, so
/// each line carries phi = 1.
pub fn spectrum(n: usize, q: u64, exec: Exec) -> Result<Vec<SpectralLine>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let types = enumerate_typed_fns(n, q, OrbitFamily::Characters);
    let psi_2n = psi(2 * n, q);
    let lines = par::map(exec, &types, |(t, count)| -> Result<SpectralLine> {
        let phi = if n == 1 {
            BigRat::one()
        } else {
            eigenvalue_phi(t, n, q)?
        };
        Ok(SpectralLine {
            lambda_type: t.clone(),
            phi,
            multiplicity: dim_irrep_with_psi(&t.union_double(), q, &psi_2n)?,
            type_count: count.clone(),
        })
    });
    let mut lines = lines.into_iter().collect::<Result<Vec<_>>>()?;
    lines.sort_by(|a, b| {
        b.phi
            .cmp(&a.phi)
            .then_with(|| a.lambda_type.cmp(&b.lambda_type))
    });
    Ok(lines)
}

pub fn spectrum_json(n: usize, q: u64, lines: &[SpectralLine]) -> Value {
    json!({
        "n": n,
        "q": q,
        "lines": lines.iter().map(SpectralLine::to_json).collect::<Vec<_>>(),
    })
}

fn ln_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.abs().to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 60;
    (x.abs() >> shift as usize).to_f64().unwrap_or(0.0).ln() + shift as f64 * std::f64::consts::LN_2
}

/// ln|x|, accurate for rationals far outside the f64 range.
pub fn ln_abs(x: &BigRat) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_big(x.numer()) - ln_big(x.denom())
}

pub fn ln_biguint(x: &BigUint) -> f64 {
    ln_big(&BigInt::from(x.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gl_combinat::{gl_order, sp_order};

    fn p(v: &[usize]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    fn r(a: i64, b: i64) -> BigRat {
        BigRat::new(a.into(), b.into())
    }

    fn t1(v: &[usize]) -> TypedPartitionFn {
        TypedPartitionFn::single(1, p(v))
    }

    #[test]
    fn proportions() {
        assert_eq!(proportions_a_b(2, 2), (r(6, 7), r(1, 7)));
        for n in 1..6 {
            for q in [2, 3, 4, 5] {
                let (a, b) = proportions_a_b(n, q);
                assert_eq!(a + b, BigRat::one());
            }
        }
        assert_eq!(proportions_a_b(1, 3).0, BigRat::zero());
    }

    #[test]
    fn macdonald_examples() {
        assert_eq!(macdonald_cprime(&p(&[2]), 2), int(3));
        assert_eq!(psi_prime(&p(&[2]), &p(&[1]), 2).unwrap(), BigRat::one());
        // b-ratio at box (1,1): (1-q^4)/(1-q^3) * (1-q)/(1-q^2)
        assert_eq!(
            psi_prime(&p(&[1, 1]), &p(&[1]), 2).unwrap(),
            r(15, 7) * r(1, 3)
        );
        assert_eq!(
            psi_prime(&p(&[2, 1]), &p(&[1]), 2),
            Err(Error::NotSingleBox)
        );
        assert_eq!(macdonald_c(&p(&[1]), 2), r(-3, 1));
    }

    #[test]
    fn small_case_values() {
        let deg2 = TypedPartitionFn::single(2, p(&[1]));
        for f in [
            eigenvalue_phi,
            eigenvalue_phi_localized,
            eigenvalue_via_lift,
        ] {
            assert_eq!(f(&t1(&[1, 1]), 2, 2).unwrap(), BigRat::one());
            assert_eq!(f(&t1(&[2]), 2, 2).unwrap(), r(1, 15));
            assert_eq!(f(&deg2, 2, 2).unwrap(), r(-1, 3));
        }
        assert_eq!(
            eigenvalue_phi(&t1(&[1]), 2, 2),
            Err(Error::WeightMismatch {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn char_ratio_examples() {
        assert_eq!(
            char_ratio_transvection(&t1(&[1, 1, 1, 1]), 4, 2).unwrap(),
            BigRat::one()
        );
        assert_eq!(
            char_ratio_transvection(&t1(&[2, 2]), 4, 2).unwrap(),
            r(1, 5)
        );
        let deg2 = TypedPartitionFn::single(2, p(&[1, 1]));
        assert_eq!(char_ratio_transvection(&deg2, 4, 2).unwrap(), r(-1, 7));
        // trivial character at several sizes
        for big_n in 2..7 {
            assert_eq!(
                char_ratio_transvection(&t1(&vec![1; big_n]), big_n, 3).unwrap(),
                BigRat::one()
            );
        }
    }

    #[test]
    fn three_paths_agree() {
        for (n, q) in [(2, 2), (3, 2), (2, 3), (4, 2), (3, 3), (2, 4), (2, 5)] {
            for (t, _) in enumerate_typed_fns(n, q, OrbitFamily::Characters) {
                let a = eigenvalue_phi(&t, n, q).unwrap();
                assert_eq!(
                    a,
                    eigenvalue_phi_localized(&t, n, q).unwrap(),
                    "{t} at ({n},{q})"
                );
                assert_eq!(
                    a,
                    eigenvalue_via_lift(&t, n, q).unwrap(),
                    "{t} at ({n},{q})"
                );
            }
        }
    }

    #[test]
    fn spectrum_2_2() {
        let lines = spectrum(2, 2, Exec::Sequential).unwrap();
        let got: Vec<(BigRat, u64)> = lines
            .iter()
            .map(|l| (l.phi.clone(), l.multiplicity.to_u64().unwrap()))
            .collect();
        assert_eq!(got, vec![(BigRat::one(), 1), (r(1, 15), 20), (r(-1, 3), 7)]);
        assert!(lines[0].is_trivial());
        // trace of the 28-state operator is zero
        let trace: BigRat = lines
            .iter()
            .map(|l| &l.phi * BigRat::from_integer(l.total_multiplicity().into()))
            .sum();
        assert!(trace.is_zero());
        let js = spectrum_json(2, 2, &lines);
        assert_eq!(js["lines"][1]["phi"], "1/15");
        assert_eq!(js["lines"][1]["multiplicity"], "20");
        assert_eq!(js["lines"][1]["type_count"], "1");
    }

    #[test]
    fn spectrum_multiplicities_fill_coset_space() {
        for (n, q) in [(1, 2), (2, 3), (3, 2), (3, 3), (4, 2)] {
            let lines = spectrum(n, q, Exec::Parallel).unwrap();
            let total: BigUint = lines.iter().map(SpectralLine::total_multiplicity).sum();
            assert_eq!(total, gl_order(2 * n, q) / sp_order(n, q));
        }
    }

    #[test]
    fn floor_and_corner_bound() {
        for (n, q) in [(2, 2), (3, 2), (4, 2), (2, 3), (3, 3)] {
            let floor = phi_floor(n, q);
            let lines = spectrum(n, q, Exec::Parallel).unwrap();
            assert_eq!(lines.iter().filter(|l| l.phi == BigRat::one()).count(), 1);
            for l in &lines {
                assert!(l.phi >= floor);
                assert!(l.phi <= corner_bound(&l.lambda_type, n, q).unwrap());
            }
        }
        assert_eq!(
            spectrum(2, 2, Exec::Sequential)
                .unwrap()
                .last()
                .unwrap()
                .phi,
            phi_floor(2, 2)
        );
    }

    #[test]
    fn sequential_and_parallel_spectra_match() {
        assert_eq!(
            spectrum(4, 3, Exec::Sequential).unwrap(),
            spectrum(4, 3, Exec::Parallel).unwrap()
        );
    }

    #[test]
    fn n_one_is_trivial() {
        let lines = spectrum(1, 3, Exec::Sequential).unwrap();
        assert!(lines.iter().all(|l| l.phi == BigRat::one()));
        assert_eq!(eigenvalue_phi(&t1(&[1]), 1, 3), Err(Error::TrivialWalk));
        assert_eq!(
            eigenvalue_via_lift(&t1(&[1]), 1, 3),
            Err(Error::TrivialWalk)
        );
    }

    #[test]
    fn ln_abs_handles_huge_terms() {
        let x = BigRat::new(BigInt::from(3).pow(5000), BigInt::from(2).pow(8000));
        let want = 5000.0 * 3f64.ln() - 8000.0 * 2f64.ln();
        assert!((ln_abs(&x) - want).abs() / want.abs() < 1e-12);
        assert!((ln_abs(&r(-1, 3)) + 3f64.ln()).abs() < 1e-15);
    }
}

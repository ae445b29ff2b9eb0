//! Total variation bounds: the upper bound lemma over the spectrum and the
//! lower bound from the size of the support after n - c steps.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gl_combinat::{
    class_size, class_size_qsq, enumerate_with_marked_orbit, gl_order, rat_to_string, sp_order,
    BigRat,
};
use crate::par::{self, Exec};
use crate::spectral::{ln_abs, ln_biguint, spectrum, SpectralLine};

/// Largest n evaluated with exact rationals in [`BoundMode::Auto`].
pub const EXACT_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    #[default]
    Auto,
    Exact,
    LogFloat,
}

impl BoundMode {
    fn resolve(self, n: usize) -> BoundMode {
        match self {
            BoundMode::Auto if n <= EXACT_MAX_N => BoundMode::Exact,
            BoundMode::Auto => BoundMode::LogFloat,
            m => m,
        }
    }
}

/// A bound value. The upper bound is a square root, so the exact form keeps
/// its square.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundValue {
    /// value = sqrt(squared)
    ExactSquared(BigRat),
    /// value = exact rational
    Exact(BigRat),
    /// value = exp(ln_value)
    LogFloat(f64),
}

impl BoundValue {
    /// Unclamped value as f64.
    pub fn raw(&self) -> f64 {
        self.ln_raw().exp()
    }

    pub fn ln_raw(&self) -> f64 {
        match self {
            BoundValue::ExactSquared(s) => ln_abs(s) / 2.0,
            BoundValue::Exact(v) if v.is_positive() => ln_abs(v),
            BoundValue::Exact(_) => f64::NEG_INFINITY,
            BoundValue::LogFloat(l) => *l,
        }
    }

    /// Clamped to [0, 1].
    pub fn clamped(&self) -> f64 {
        self.raw().clamp(0.0, 1.0)
    }

    pub fn mode(&self) -> &'static str {
        match self {
            BoundValue::LogFloat(_) => "logfloat",
            _ => "exact",
        }
    }

    /// Exact x <= value for x >= 0, when the value is exact.
    pub fn dominates(&self, x: &BigRat) -> Option<bool> {
        match self {
            BoundValue::ExactSquared(s) => Some(x * x <= *s),
            BoundValue::Exact(v) => Some(x <= v),
            BoundValue::LogFloat(_) => None,
        }
    }

    /// Exact x >= value for x >= 0, when the value is exact.
    pub fn dominated_by(&self, x: &BigRat) -> Option<bool> {
        match self {
            BoundValue::ExactSquared(s) => Some(x * x >= *s),
            BoundValue::Exact(v) => Some(x >= v),
            BoundValue::LogFloat(_) => None,
        }
    }

    /// Exact value rendered as "num/den" when available.
    pub fn exact_string(&self) -> Option<String> {
        match self {
            BoundValue::Exact(v) => Some(rat_to_string(v)),
            _ => None,
        }
    }
}

/// Lines that enter the upper bound: everything but the trivial
/// representation and its determinant twists.
pub fn bound_lines(lines: &[SpectralLine]) -> Vec<&SpectralLine> {
    lines
        .iter()
        .filter(|l| !l.lambda_type.is_determinant_twist())
        .collect()
}

/// Spectrum held once and reused for every k.
#[derive(Debug, Clone)]
pub struct UpperBound {
    n: usize,
    lines: Vec<SpectralLine>,
    ln_terms: Vec<(f64, f64)>,
}

impl UpperBound {
    pub fn new(n: usize, q: u64, exec: Exec) -> Result<Self> {
        if n < 2 {
            return Err(Error::TrivialWalk);
        }
        let lines = spectrum(n, q, exec)?;
        let kept: Vec<SpectralLine> = bound_lines(&lines).into_iter().cloned().collect();
        let ln_terms = kept
            .iter()
            .map(|l| {
                (
                    ln_biguint(&l.multiplicity) + ln_biguint(&l.type_count),
                    ln_abs(&l.phi),
                )
            })
            .collect();
        Ok(UpperBound {
            n,
            lines: kept,
            ln_terms,
        })
    }

    pub fn lines(&self) -> &[SpectralLine] {
        &self.lines
    }

    /// sqrt((1/4) sum' d_{lambda ∪ lambda} phi^{2k} count), unclamped.
    pub fn at(&self, k: usize, mode: BoundMode) -> Result<BoundValue> {
        if k == 0 {
            return Err(Error::InvalidInput("upper bound needs k >= 1".into()));
        }
        match mode.resolve(self.n) {
            BoundMode::Exact => {
                let sum: BigRat = self
                    .lines
                    .iter()
                    .map(|l| {
                        let w = BigRat::from_integer(BigInt::from(l.total_multiplicity()));
                        w * num_traits::pow(l.phi.clone(), 2 * k)
                    })
                    .sum();
                Ok(BoundValue::ExactSquared(
                    sum / BigRat::from_integer(4.into()),
                ))
            }
            _ => {
                let terms: Vec<f64> = self
                    .ln_terms
                    .iter()
                    .filter(|(_, lp)| lp.is_finite())
                    .map(|(lw, lp)| lw + 2.0 * k as f64 * lp)
                    .collect();
                let ln_sq = log_sum_exp(&terms) - 4f64.ln();
                Ok(BoundValue::LogFloat(ln_sq / 2.0))
            }
        }
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn upper_bound_tv(n: usize, q: u64, k: usize, mode: BoundMode) -> Result<BoundValue> {
    UpperBound::new(n, q, Exec::Parallel)?.at(k, mode)
}

fn check_c(n: usize, c: usize) -> Result<()> {
    if c > n {
        return Err(Error::InvalidInput(format!("c = {c} exceeds n = {n}")));
    }
    Ok(())
}

fn big(x: BigUint) -> BigRat {
    BigRat::from_integer(x.into())
}

/// |A_c| / |GL_2n| with A_c the union of double cosets K g_mu K whose
/// label has at least c parts at x - 1.
pub fn support_fraction(n: usize, q: u64, c: usize) -> Result<BigRat> {
    check_c(n, c)?;
    let mut total = BigUint::zero();
    for (nu, mu, count) in enumerate_with_marked_orbit(n, q) {
        if nu.len() >= c {
            total += count * class_size_qsq(&mu, q)?;
        }
    }
    Ok(big(total * sp_order(n, q)) / big(gl_order(2 * n, q)))
}

/// max(0, 1 - q |A_c| / |GL_2n|): the distance from uniform after n - c steps.
pub fn lower_bound_tv(n: usize, q: u64, c: usize) -> Result<BigRat> {
    let v = BigRat::one() - BigRat::from_integer(q.into()) * support_fraction(n, q, c)?;
    Ok(if v.is_negative() { BigRat::zero() } else { v })
}

/// Exact check of sum_{dim ker(M_mu - I) >= c} |C_mu| <= 4 |GL_n| / q^c.
pub fn hildebrand_tail_check(n: usize, q: u64, c: usize) -> Result<(BigRat, BigRat, bool)> {
    check_c(n, c)?;
    let mut lhs = BigUint::zero();
    for (nu, mu, count) in enumerate_with_marked_orbit(n, q) {
        if nu.len() >= c {
            lhs += count * class_size(&mu, q)?;
        }
    }
    let lhs = big(lhs);
    let rhs = BigRat::new(
        BigInt::from(4u32) * BigInt::from(gl_order(n, q)),
        BigInt::from(q).pow(c as u32),
    );
    let ok = lhs <= rhs;
    Ok((lhs, rhs, ok))
}

/// prod_{i=1}^n (q^{2i} - 1) / (q^{2i} - q), the factor relating |A_c|
/// to the GL_n tail; and whether it is at most 4.
pub fn ratio_constant_check(n: usize, q: u64) -> (BigRat, bool) {
    let qq = BigInt::from(q);
    let v: BigRat = (1..=n)
        .map(|i| {
            let t = qq.pow(2 * i as u32);
            BigRat::new(&t - 1, &t - &qq)
        })
        .product();
    let ok = v <= BigRat::from_integer(4.into());
    (v, ok)
}

/// The crude bound q^{2n^2} (q^{2n-2} - 1)^{-2k} on the negative-eigenvalue
/// part of the sum, and the exact negative partial sum
/// sum_{phi < 0} d_{lambda ∪ lambda} phi^{2k} for comparison.
pub fn negative_mass_bound(n: usize, q: u64, k: usize) -> Result<(BigRat, BigRat)> {
    if n < 2 || k == 0 {
        return Err(Error::InvalidInput(
            "negative mass bound needs n >= 2, k >= 1".into(),
        ));
    }
    let qq = BigInt::from(q);
    let crude = BigRat::new(
        qq.pow((2 * n * n) as u32),
        (qq.pow((2 * n - 2) as u32) - BigInt::one()).pow((2 * k) as u32),
    );
    let exact = spectrum(n, q, Exec::Parallel)?
        .iter()
        .filter(|l| l.phi.is_negative())
        .map(|l| {
            BigRat::from_integer(l.total_multiplicity().into())
                * num_traits::pow(l.phi.clone(), 2 * k)
        })
        .sum();
    Ok((crude, exact))
}

/// One row of a cutoff curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPoint {
    pub k: usize,
    pub tv_exact: Option<BigRat>,
    pub tv_upper: Option<BoundValue>,
    /// Lower bound with c = n - k, for k <= n.
    pub tv_lower: Option<BigRat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub n: usize,
    pub q: u64,
    pub points: Vec<BoundPoint>,
}

impl BoundCurve {
    /// Upper bounds on `ks` and lower bounds where k <= n.
    pub fn build(
        n: usize,
        q: u64,
        ks: impl IntoIterator<Item = usize>,
        mode: BoundMode,
        exec: Exec,
    ) -> Result<Self> {
        let ub = UpperBound::new(n, q, exec)?;
        let ks: Vec<usize> = ks.into_iter().collect();
        let points = par::map(exec, &ks, |&k| -> Result<BoundPoint> {
            Ok(BoundPoint {
                k,
                tv_exact: None,
                tv_upper: if k >= 1 { Some(ub.at(k, mode)?) } else { None },
                tv_lower: if k <= n {
                    Some(lower_bound_tv(n, q, n - k)?)
                } else {
                    None
                },
            })
        });
        Ok(BoundCurve {
            n,
            q,
            points: points.into_iter().collect::<Result<_>>()?,
        })
    }

    /// Attach exact TV values indexed by k.
    pub fn with_exact(mut self, tv: &[(usize, BigRat)]) -> Self {
        for p in &mut self.points {
            p.tv_exact = tv.iter().find(|(k, _)| *k == p.k).map(|(_, v)| v.clone());
        }
        self
    }

    /// CSV with columns k, tv_exact, tv_upper, tv_lower, mode. Upper values
    /// are clamped to [0, 1].
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,tv_exact,tv_upper,tv_lower,mode\n");
        for p in &self.points {
            let exact = p.tv_exact.as_ref().map(rat_to_string).unwrap_or_default();
            let upper = p
                .tv_upper
                .as_ref()
                .map(|u| format!("{:.12e}", u.clamped()))
                .unwrap_or_default();
            let lower = p.tv_lower.as_ref().map(rat_to_string).unwrap_or_default();
            let mode = p.tv_upper.as_ref().map_or("exact", BoundValue::mode);
            s.push_str(&format!("{},{exact},{upper},{lower},{mode}\n", p.k));
        }
        s
    }
}

/// Per-unit decay factors bound(k) / bound(k+1) of the upper bound on
/// k = n + c, c in `cs`.
pub fn upper_decay_factors(
    ub: &UpperBound,
    n: usize,
    cs: std::ops::RangeInclusive<usize>,
) -> Result<Vec<(usize, f64)>> {
    cs.map(|c| {
        let a = ub.at(n + c, BoundMode::LogFloat)?.ln_raw();
        let b = ub.at(n + c + 1, BoundMode::LogFloat)?.ln_raw();
        Ok((c, (a - b).exp()))
    })
    .collect()
}

/// min(1, q |A_c| / |GL_2n|) <= 4 * ratio_constant * q^{1 - c}, exactly.
pub fn lower_window_check(n: usize, q: u64, c: usize) -> Result<(BigRat, BigRat, bool)> {
    let gap = BigRat::one() - lower_bound_tv(n, q, c)?;
    let (rc, _) = ratio_constant_check(n, q);
    let rhs = BigRat::from_integer(4.into())
        * rc
        * BigRat::new(BigInt::from(q), BigInt::from(q).pow(c as u32));
    let ok = gap <= rhs;
    Ok((gap, rhs, ok))
}

/// f64 view of an exact rational, for reporting.
pub fn rat_f64(x: &BigRat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let s = if x.is_negative() { -1.0 } else { 1.0 };
    s * ln_abs(x).exp()
}

pub fn big_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

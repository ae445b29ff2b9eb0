//! Property suites run by `symwalk verify`. Every check reports data; a
//! failure carries the first counterexample instead of panicking.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::bounds::{
    hildebrand_tail_check, lower_bound_tv, negative_mass_bound, ratio_constant_check, BoundMode,
    UpperBound,
};
use crate::error::{Error, Result};
use crate::fq_arith::{build_field, enumerate_irreducibles, necklace_count, Fe};
use crate::fq_linalg::{is_form_preserving, standard_j, transvection_pairs};
use crate::gl_combinat::{
    a_mu_at, class_size_qsq, class_size_with, dim_irrep, enumerate_typed_fns, gl_order, sp_order,
    BigRat, OrbitFamily, TypedPartitionFn,
};
use crate::par::Exec;
use crate::spectral::{
    corner_bound, eigenvalue_phi, eigenvalue_phi_localized, eigenvalue_via_lift, phi_floor,
    proportions_a_b, spectrum,
};
use crate::walk::{poly_from_roots, support_violations, ChainModel, DEFAULT_STATE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Arith,
    Linalg,
    Combinat,
    Spectral,
    Bounds,
    Walk,
    Support,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Arith,
        Suite::Linalg,
        Suite::Combinat,
        Suite::Spectral,
        Suite::Bounds,
        Suite::Walk,
        Suite::Support,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Arith => "arith",
            Suite::Linalg => "linalg",
            Suite::Combinat => "combinat",
            Suite::Spectral => "spectral",
            Suite::Bounds => "bounds",
            Suite::Walk => "walk",
            Suite::Support => "support",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub suites: Vec<Suite>,
    pub max_n: usize,
    /// Multiply a_mu by q^{n^2} so class sizes stop being integers.
    pub inject_fault: bool,
    pub samples: u64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            suites: Suite::ALL.to_vec(),
            max_n: 4,
            inject_fault: false,
            samples: 2000,
            seed: 1,
            exec: Exec::Parallel,
        }
    }
}

struct Recorder {
    suite: Suite,
    out: Vec<Check>,
}

impl Recorder {
    fn check(&mut self, name: impl Into<String>, r: Result<Option<String>>) {
        let (ok, detail) = match r {
            Ok(None) => (true, String::new()),
            Ok(Some(d)) => (false, d),
            Err(e) => (false, format!("error: {e}")),
        };
        self.out.push(Check {
            suite: self.suite,
            name: name.into(),
            ok,
            detail,
        });
    }
}

fn first_failure<T, F>(items: impl IntoIterator<Item = T>, mut f: F) -> Result<Option<String>>
where
    F: FnMut(T) -> Result<Option<String>>,
{
    for it in items {
        if let Some(d) = f(it)? {
            return Ok(Some(d));
        }
    }
    Ok(None)
}

fn big(x: BigUint) -> BigRat {
    BigRat::from_integer(x.into())
}

pub fn run(cfg: &VerifyConfig) -> Vec<Check> {
    let mut all = Vec::new();
    for &suite in &cfg.suites {
        let mut rec = Recorder {
            suite,
            out: Vec::new(),
        };
        match suite {
            Suite::Arith => arith(&mut rec),
            Suite::Linalg => linalg(&mut rec),
            Suite::Combinat => combinat(&mut rec, cfg),
            Suite::Spectral => spectral(&mut rec, cfg),
            Suite::Bounds => bounds(&mut rec, cfg),
            Suite::Walk => walk(&mut rec, cfg),
            Suite::Support => support(&mut rec, cfg),
        }
        all.extend(rec.out);
    }
    all
}

fn arith(rec: &mut Recorder) {
    for (p, k) in [(2u64, 1u32), (3, 1), (2, 2), (5, 1), (7, 1), (2, 3), (3, 2)] {
        rec.check(
            format!("inverses in F_{}", p.pow(k)),
            (|| {
                let f = build_field(p, k)?;
                first_failure(f.nonzero_elements(), |a| {
                    Ok((f.mul(a, f.inv(a)?) != Fe::ONE).then(|| format!("a = {a:?}")))
                })
            })(),
        );
        rec.check(
            format!("irreducible counts over F_{}", p.pow(k)),
            (|| {
                let f = build_field(p, k)?;
                first_failure(1..=4usize, |d| {
                    if (f.q() as u64).pow(d as u32) > 1 << 14 {
                        return Ok(None);
                    }
                    let got = enumerate_irreducibles(&f, d, false)?.len();
                    let want = necklace_count(f.q() as u64, d as u32);
                    Ok(
                        (BigUint::from(got) != want)
                            .then(|| format!("degree {d}: {got} vs {want}")),
                    )
                })
            })(),
        );
    }
}

fn linalg(rec: &mut Recorder) {
    for (n, p) in [(2usize, 2u64), (2, 3)] {
        rec.check(
            format!("transvection census n={n} q={p}"),
            (|| {
                let f = build_field(p, 1)?;
                let q = p;
                let j = standard_j(n, &f);
                let mut seen = std::collections::HashSet::new();
                let mut symp = 0u64;
                for t in transvection_pairs(2 * n, &f) {
                    let m = t.matrix(&f);
                    if seen.insert(m.clone()) && is_form_preserving(&m, &j, &f)? {
                        symp += 1;
                    }
                }
                let e = 2 * n as u32;
                let total = (q.pow(e) - 1) * (q.pow(e - 1) - 1) / (q - 1);
                if seen.len() as u64 != total || symp != q.pow(e) - 1 {
                    return Ok(Some(format!("{} total, {symp} symplectic", seen.len())));
                }
                let (a, b) = proportions_a_b(n, q);
                let want_a = BigRat::new(BigInt::from(total - symp), BigInt::from(total));
                Ok((a != want_a || b != BigRat::one() - &want_a)
                    .then(|| format!("(a, b) = ({a}, {b})")))
            })(),
        );
    }
}

/// a_mu scaled by t^{n^2}: breaks integrality of |GL_n| / a_mu.
fn perturbed_a_mu(mu: &TypedPartitionFn, t: &BigUint) -> BigRat {
    let n = mu.weight() as u32;
    a_mu_at(mu, t) * big(t.pow(n * n))
}

fn combinat(rec: &mut Recorder, cfg: &VerifyConfig) {
    let fault = cfg.inject_fault;
    for q in [2u64, 3] {
        for n in 1..=(cfg.max_n + 1).min(5) {
            rec.check(
                format!("sum of class sizes = |GL_{n}(F_{q})|"),
                (|| {
                    let t = BigUint::from(q);
                    let mut sum = BigUint::zero();
                    for (mu, count) in enumerate_typed_fns(n, q, OrbitFamily::Classes) {
                        let size = if fault {
                            class_size_with(&mu, &t, perturbed_a_mu)?
                        } else {
                            class_size_with(&mu, &t, a_mu_at)?
                        };
                        sum += count * size;
                    }
                    let want = gl_order(n, q);
                    Ok((sum != want).then(|| format!("{sum} vs {want}")))
                })(),
            );
        }
        for n in 1..=cfg.max_n.min(4) {
            rec.check(
                format!("double coset and spherical dimension sums n={n} q={q}"),
                (|| {
                    let want = gl_order(2 * n, q) / sp_order(n, q);
                    let mut cs = BigUint::zero();
                    for (mu, count) in enumerate_typed_fns(n, q, OrbitFamily::Classes) {
                        cs += count * class_size_qsq(&mu, q)?;
                    }
                    let mut ds = BigUint::zero();
                    for (lambda, count) in enumerate_typed_fns(n, q, OrbitFamily::Characters) {
                        ds += count * dim_irrep(&lambda.union_double(), q)?;
                    }
                    Ok((cs != want || ds != want).then(|| format!("{cs}, {ds} vs {want}")))
                })(),
            );
        }
    }
}

fn spectral(rec: &mut Recorder, cfg: &VerifyConfig) {
    for q in [2u64, 3] {
        for n in 2..=cfg.max_n.max(2) {
            let types = enumerate_typed_fns(n, q, OrbitFamily::Characters);
            rec.check(
                format!("eigenvalue dual path n={n} q={q}"),
                first_failure(&types, |(t, _)| {
                    let a = eigenvalue_phi(t, n, q)?;
                    let b = eigenvalue_phi_localized(t, n, q)?;
                    let c = eigenvalue_via_lift(t, n, q)?;
                    Ok((a != b || a != c).then(|| format!("{t}: {a}, {b}, {c}")))
                }),
            );
            rec.check(
                format!("eigenvalue floor and corner bound n={n} q={q}"),
                (|| {
                    let floor = phi_floor(n, q);
                    let lines = spectrum(n, q, cfg.exec)?;
                    let ones = lines.iter().filter(|l| l.phi.is_one()).count();
                    if ones != 1 {
                        return Ok(Some(format!("{ones} lines with phi = 1")));
                    }
                    first_failure(&lines, |l| {
                        let cb = corner_bound(&l.lambda_type, n, q)?;
                        Ok((l.phi < floor || l.phi > cb).then(|| {
                            format!("{}: {} outside [{floor}, {cb}]", l.lambda_type, l.phi)
                        }))
                    })
                })(),
            );
        }
    }
}

fn bounds(rec: &mut Recorder, cfg: &VerifyConfig) {
    for q in [2u64, 3, 4] {
        rec.check(
            format!("tail inequality q={q}"),
            first_failure(1..=(cfg.max_n + 2).min(6), |n| {
                first_failure(0..=n, |c| {
                    let (l, r, ok) = hildebrand_tail_check(n, q, c)?;
                    Ok((!ok).then(|| format!("n={n} c={c}: {l} > {r}")))
                })
            }),
        );
    }
    rec.check(
        "ratio constant at most 4",
        first_failure(1..=30usize, |n| {
            let (v, ok) = ratio_constant_check(n, 2);
            Ok((!ok).then(|| format!("n={n}: {v}")))
        }),
    );
    for q in [2u64, 3] {
        rec.check(
            format!("negative mass bound q={q}"),
            first_failure(2..=cfg.max_n.clamp(2, 4), |n| {
                first_failure(n..=n + 5, |k| {
                    let (crude, exact) = negative_mass_bound(n, q, k)?;
                    Ok((exact > crude).then(|| format!("n={n} k={k}: {exact} > {crude}")))
                })
            }),
        );
    }
    for (n, q) in [(2usize, 2u64), (2, 3)] {
        rec.check(
            format!("bound sandwich n={n} q={q}"),
            sandwich(n, q, 12, cfg.exec),
        );
    }
}

/// TV_exact(k) <= upper(k) for k = 1..=k_max and lower(c) <= TV_exact(n - c).
pub fn sandwich(n: usize, q: u64, k_max: usize, exec: Exec) -> Result<Option<String>> {
    let f = build_field(q, 1)?;
    let chain = ChainModel::build(n, &f, DEFAULT_STATE_CAP, exec)?;
    let tv = chain.tv_curve(k_max.max(n), exec);
    let ub = UpperBound::new(n, q, exec)?;
    for p in tv.iter().filter(|p| (1..=k_max).contains(&p.k)) {
        let u = ub.at(p.k, BoundMode::Exact)?;
        if u.dominates(&p.full) != Some(true) {
            return Ok(Some(format!(
                "k={}: TV {} above the upper bound",
                p.k, p.full
            )));
        }
    }
    for c in 0..=n {
        let lb = lower_bound_tv(n, q, c)?;
        if lb > tv[n - c].full {
            return Ok(Some(format!(
                "c={c}: lower bound {lb} above TV {}",
                tv[n - c].full
            )));
        }
    }
    Ok(None)
}

fn walk(rec: &mut Recorder, cfg: &VerifyConfig) {
    rec.check(
        "example transition matrix n=2 q=2",
        (|| {
            let f = build_field(2, 1)?;
            let chain = ChainModel::build(2, &f, DEFAULT_STATE_CAP, cfg.exec)?;
            let r = |a: i64, b: i64| BigRat::new(a.into(), b.into());
            let want = vec![
                vec![r(0, 1), r(1, 1), r(0, 1)],
                vec![r(1, 15), r(6, 15), r(8, 15)],
                vec![r(0, 1), r(2, 3), r(1, 3)],
            ];
            Ok((chain.lumped != want).then(|| format!("{:?}", chain.lumped_json()["matrix"])))
        })(),
    );
    for (n, q) in [(2usize, 2u64), (2, 3)] {
        rec.check(
            format!("lumping, stationarity and spectrum n={n} q={q}"),
            (|| {
                let f = build_field(q, 1)?;
                let chain = ChainModel::build(n, &f, DEFAULT_STATE_CAP, cfg.exec)?;
                if !chain.uniform_is_stationary() || !chain.lumped_stationary_is_fixed() {
                    return Ok(Some("stationary distribution is not fixed".into()));
                }
                if !chain.stationary_matches_formula()? {
                    return Ok(Some(
                        "lump masses differ from the class size formula".into(),
                    ));
                }
                let lines = spectrum(n, q, cfg.exec)?;
                let roots: Vec<(BigRat, usize)> = lines
                    .iter()
                    .map(|l| (l.phi.clone(), l.type_count.to_usize().unwrap_or(0)))
                    .collect();
                if chain.lumped_charpoly() != poly_from_roots(&roots) {
                    return Ok(Some(
                        "lumped characteristic polynomial differs from the spectrum".into(),
                    ));
                }
                let trace: BigRat = lines
                    .iter()
                    .map(|l| &l.phi * big(l.total_multiplicity()))
                    .sum();
                Ok((!trace.is_zero()).then(|| format!("trace {trace}")))
            })(),
        );
    }
}

fn support(rec: &mut Recorder, cfg: &VerifyConfig) {
    for q in [2u64, 3] {
        rec.check(
            format!("products of n - c transvections lie in A_c, q={q}"),
            first_failure(2..=cfg.max_n.clamp(2, 6), |n| {
                let f = build_field(q, 1)?;
                first_failure(0..=n, |c| {
                    let bad = support_violations(n, &f, c, cfg.samples, cfg.seed, cfg.exec)?;
                    Ok((bad > 0).then(|| format!("n={n} c={c}: {bad} of {} samples", cfg.samples)))
                })
            }),
        );
    }
}

pub fn checks_json(checks: &[Check]) -> Value {
    json!({
        "ok": checks.iter().all(|c| c.ok),
        "checks": checks.iter().map(|c| json!({
            "suite": c.suite.name(),
            "name": c.name,
            "ok": c.ok,
            "detail": c.detail,
        })).collect::<Vec<_>>(),
    })
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("suite,name,ok,detail\n");
    for c in checks {
        s.push_str(&format!(
            "{},{},{},{}\n",
            c.suite,
            csv_field(&c.name),
            c.ok,
            csv_field(&c.detail)
        ));
    }
    s
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

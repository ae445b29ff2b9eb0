//! The walk itself: form states and steps, the double coset classifier,
//! exact chains on the space of forms, and Monte Carlo estimates.
//!
//! Convention: a matrix g acts on forms by g.omega = omega(g^{-1}., g^{-1}.),
//! so on Gram matrices G -> g^{-T} G g^{-1}. The base form has Gram matrix J
//! and stabilizer K = Sp_2n.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fq_arith::{Fe, FieldSpec};
use crate::fq_linalg::{
    class_invariant, random_nonzero, sample_nonpreserving_transvection, sample_symplectic,
    standard_j, transvection_pairs, MatFq, OrbitIndex, Transvection,
};
use crate::gl_combinat::{
    class_size_qsq, gl_order, rat_to_string, sp_order, BigRat, Slot, TypedPartitionFn,
};
use crate::par::{self, Exec};

/// Default cap on the number of forms in an exact chain.
pub const DEFAULT_STATE_CAP: usize = 200_000;

/// Monte Carlo trials per independently seeded stream.
pub const CHUNK: u64 = 4096;

/// A symplectic form, by its Gram matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FormState {
    pub gram: MatFq,
}

impl FormState {
    pub fn new(gram: MatFq, field: &FieldSpec) -> Result<Self> {
        if !gram.is_alternating(field) || gram.rows() % 2 == 1 {
            return Err(Error::InvalidInput(
                "Gram matrix is not alternating of even size".into(),
            ));
        }
        if gram.det(field)?.is_zero() {
            return Err(Error::Singular);
        }
        Ok(FormState { gram })
    }

    pub fn n(&self) -> usize {
        self.gram.rows() / 2
    }
}

/// h_alpha = diag(alpha, 1, ..., 1).
pub fn twist_matrix(n: usize, alpha: Fe) -> MatFq {
    let mut h = MatFq::identity(2 * n);
    h.set(0, 0, alpha);
    h
}

/// h^{-T} J h^{-1} for h = diag(alpha, 1, ..., 1).
pub fn twisted_base(n: usize, alpha: Fe, field: &FieldSpec) -> MatFq {
    let hi = twist_matrix(n, alpha)
        .inverse(field)
        .expect("alpha is nonzero");
    hi.transpose()
        .mul(&standard_j(n, field), field)
        .and_then(|m| m.mul(&hi, field))
        .expect("square")
}

/// The starting form: J moved by a uniformly random twist h_alpha.
pub fn initial_state<R: Rng + ?Sized>(n: usize, field: &FieldSpec, rng: &mut R) -> FormState {
    FormState {
        gram: twisted_base(n, random_nonzero(field, rng), field),
    }
}

/// Every possible starting form, each with probability 1/(q-1).
pub fn initial_states(n: usize, field: &FieldSpec) -> Vec<FormState> {
    field
        .nonzero_elements()
        .map(|a| FormState {
            gram: twisted_base(n, a, field),
        })
        .collect()
}

/// Move by a uniform transvection that does not fix the current form.
pub fn step<R: Rng + ?Sized>(
    state: &FormState,
    field: &FieldSpec,
    rng: &mut R,
) -> Result<FormState> {
    let t = sample_nonpreserving_transvection(&state.gram, field, rng)?;
    Ok(FormState {
        gram: t.act_on_gram(&state.gram, field),
    })
}

/// A fixed transvection not in Sp_2n: I + e_1 e_2^T.
pub fn base_transvection(n: usize, field: &FieldSpec) -> Result<Transvection> {
    if n < 2 {
        return Err(Error::TrivialWalk);
    }
    let mut v = vec![Fe::ZERO; 2 * n];
    let mut f = vec![Fe::ZERO; 2 * n];
    v[0] = Fe::ONE;
    f[1] = Fe::ONE;
    Transvection::new(v, f, field)
}

/// Right walk step g -> g k_1 t k_2 with k_i uniform in Sp_2n: a uniform
/// element of the double coset of the transvection.
pub fn group_walk_step<R: Rng + ?Sized>(
    g: &MatFq,
    field: &FieldSpec,
    rng: &mut R,
) -> Result<MatFq> {
    let n = g.rows() / 2;
    let t = base_transvection(n, field)?.matrix(field);
    let k1 = sample_symplectic(n, field, rng);
    let k2 = sample_symplectic(n, field, rng);
    g.mul(&k1, field)?.mul(&t, field)?.mul(&k2, field)
}

/// Double coset labels K g K <-> mu, from the conjugacy class of
/// J^{-1} g^T J g, which is that of diag(M_mu, M_mu^T).
#[derive(Debug, Clone)]
pub struct Classifier {
    n: usize,
    field: FieldSpec,
    index: OrbitIndex,
    j: MatFq,
    j_inv: MatFq,
    one_orbit: usize,
}

impl Classifier {
    pub fn new(n: usize, field: &FieldSpec) -> Result<Self> {
        let index = OrbitIndex::new(field, n)?;
        let j = standard_j(n, field);
        let j_inv = j.inverse(field)?;
        let one_orbit = index.index_of_x_minus_one();
        Ok(Classifier {
            n,
            field: field.clone(),
            index,
            j,
            j_inv,
            one_orbit,
        })
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn orbit_index(&self) -> &OrbitIndex {
        &self.index
    }

    /// Orbit position of x - 1 among degree-1 orbits.
    pub fn one_orbit(&self) -> usize {
        self.one_orbit
    }

    fn halve(&self, x: &MatFq) -> Result<TypedPartitionFn> {
        let ci = class_invariant(x, &self.index)?;
        let mut slots = Vec::new();
        for (f, p) in &ci.factors {
            let half = p
                .halve_multiplicities()
                .ok_or_else(|| Error::OddMultiplicity(f.display(&self.field)))?;
            let (degree, orbit) = self.index.index_of(f)?;
            slots.push(Slot {
                degree,
                partition: half,
                orbit,
            });
        }
        TypedPartitionFn::new(slots)
    }

    /// Label of K g K.
    pub fn classify_group(&self, g: &MatFq) -> Result<TypedPartitionFn> {
        self.halve(&self.group_matrix(g)?)
    }

    /// Label of the form g.J, from its Gram matrix G = g^{-T} J g^{-1}:
    /// (J^{-1} G)^{-1} = G^{-1} J is conjugate to J^{-1} g^T J g.
    pub fn classify_form(&self, gram: &MatFq) -> Result<TypedPartitionFn> {
        self.halve(&gram.inverse(&self.field)?.mul(&self.j, &self.field)?)
    }

    fn group_matrix(&self, g: &MatFq) -> Result<MatFq> {
        let f = &self.field;
        self.j_inv
            .mul(&g.transpose(), f)?
            .mul(&self.j, f)?
            .mul(g, f)
    }

    /// Number of parts of mu at x - 1, i.e. dim ker(M_mu - I).
    pub fn parts_at_one(&self, mu: &TypedPartitionFn) -> usize {
        mu.at(1, self.one_orbit).len()
    }

    /// dim ker(M_mu - I) for K g K straight from a rank, without the full
    /// class computation.
    pub fn parts_at_one_group(&self, g: &MatFq) -> Result<usize> {
        let x = self.group_matrix(g)?;
        let d = x
            .sub(&MatFq::identity(2 * self.n), &self.field)?
            .kernel_dim(&self.field);
        Ok(d / 2)
    }
}

/// pi(mu) = |C_mu|(q^2) |Sp_2n| / |GL_2n|: the stationary mass of a double
/// coset, equivalently the share of forms carrying that label.
pub fn stationary_mass(mu: &TypedPartitionFn, n: usize, q: u64) -> Result<BigRat> {
    let num = class_size_qsq(mu, q)? * sp_order(n, q);
    Ok(BigRat::new(
        BigInt::from(num),
        BigInt::from(gl_order(2 * n, q)),
    ))
}

/// q^{n^2 - n} prod_{i=1}^n (q^{2i-1} - 1) = |GL_2n| / |Sp_2n|.
pub fn form_count(n: usize, q: u64) -> BigUint {
    gl_order(2 * n, q) / sp_order(n, q)
}

/// Packs the strict upper triangle of an alternating matrix into a u128.
#[derive(Debug, Clone)]
struct KeyCodec {
    dim: usize,
    bits: u32,
}

impl KeyCodec {
    fn new(dim: usize, q: u32) -> Option<Self> {
        let bits = 32 - (q - 1).leading_zeros();
        let entries = dim * (dim - 1) / 2;
        (entries as u32 * bits <= 128).then_some(KeyCodec { dim, bits })
    }

    fn encode(&self, m: &MatFq) -> u128 {
        let mut key = 0u128;
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                key = (key << self.bits) | m.get(i, j).0 as u128;
            }
        }
        key
    }

    fn decode(&self, mut key: u128, field: &FieldSpec) -> MatFq {
        let mut m = MatFq::zeros(self.dim, self.dim);
        let mask = (1u128 << self.bits) - 1;
        for i in (0..self.dim).rev() {
            for j in (i + 1..self.dim).rev() {
                let e = Fe((key & mask) as u32);
                key >>= self.bits;
                m.set(i, j, e);
                m.set(j, i, field.neg(e));
            }
        }
        m
    }
}

/// One lump of the chain: all forms sharing a double coset label.
#[derive(Debug, Clone, PartialEq)]
pub struct Lump {
    pub label: TypedPartitionFn,
    pub size: usize,
    pub parts_at_one: usize,
    pub stationary: BigRat,
}

/// The exact walk on all symplectic forms for a small (n, q).
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub n: usize,
    pub q: u64,
    field: FieldSpec,
    codec: KeyCodec,
    keys: Vec<u128>,
    /// CSR rows; entry (i, j) is counts[..] / denom.
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    counts: Vec<u32>,
    /// Number of non-preserving (v, f) pairs, the same from every form.
    pub denom: u64,
    /// State indices of the possible starting forms.
    pub initial: Vec<usize>,
    pub lump_of: Vec<usize>,
    pub lumps: Vec<Lump>,
    /// Lumped transition matrix in lump order.
    pub lumped: Vec<Vec<BigRat>>,
}

/// Non-preserving pair counts: (q^{2n} - 1)(q^{2n-1} - q).
pub fn nonpreserving_pair_count(n: usize, q: u64) -> u64 {
    (q.pow(2 * n as u32) - 1) * (q.pow(2 * n as u32 - 1) - q)
}

/// Targets of one form under every non-preserving (v, f) pair, as sorted
/// (key, count) runs.
fn successors(
    gram: &MatFq,
    by_v: &[(Vec<Fe>, Vec<Vec<Fe>>)],
    codec: &KeyCodec,
    field: &FieldSpec,
) -> Vec<(u128, u32)> {
    let dim = gram.rows();
    let mut keys = Vec::new();
    for (v, fs) in by_v {
        let u = gram.mul_vec(v, field);
        for f in fs {
            if is_parallel(&u, f, field) {
                continue;
            }
            let mut key = 0u128;
            for i in 0..dim {
                for j in i + 1..dim {
                    let d = field.sub(field.mul(f[i], u[j]), field.mul(u[i], f[j]));
                    key = (key << codec.bits) | field.add(gram.get(i, j), d).0 as u128;
                }
            }
            keys.push(key);
        }
    }
    keys.sort_unstable();
    let mut out: Vec<(u128, u32)> = Vec::new();
    for k in keys {
        match out.last_mut() {
            Some((last, c)) if *last == k => *c += 1,
            _ => out.push((k, 1)),
        }
    }
    out
}

fn is_parallel(a: &[Fe], b: &[Fe], field: &FieldSpec) -> bool {
    // b is nonzero; a is parallel to b iff a = (a_p / b_p) b at a pivot p
    let p = b.iter().position(|x| !x.is_zero()).expect("nonzero");
    let s = field.div(a[p], b[p]).expect("nonzero pivot");
    a.iter().zip(b).all(|(&x, &y)| x == field.mul(s, y))
}

impl ChainModel {
    /// Enumerates every form reachable from the starting forms (all of them)
    /// and builds the exact transition counts.
    pub fn build(n: usize, field: &FieldSpec, cap: usize, exec: Exec) -> Result<Self> {
        if n < 2 {
            return Err(Error::TrivialWalk);
        }
        let q = field.q() as u64;
        let total = form_count(n, q);
        let states = total.to_u128().unwrap_or(u128::MAX);
        if states > cap as u128 {
            return Err(Error::StateSpaceTooLarge { states, cap });
        }
        let codec =
            KeyCodec::new(2 * n, field.q()).ok_or(Error::StateSpaceTooLarge { states, cap })?;
        let mut by_v: Vec<(Vec<Fe>, Vec<Vec<Fe>>)> = Vec::new();
        for t in transvection_pairs(2 * n, field) {
            match by_v.last_mut() {
                Some((v, fs)) if *v == t.v => fs.push(t.f),
                _ => by_v.push((t.v, vec![t.f])),
            }
        }

        let mut index: HashMap<u128, usize> = HashMap::new();
        let mut keys: Vec<u128> = Vec::new();
        let mut initial = Vec::new();
        for s in initial_states(n, field) {
            let k = codec.encode(&s.gram);
            let id = *index.entry(k).or_insert_with(|| {
                keys.push(k);
                keys.len() - 1
            });
            initial.push(id);
        }
        let mut rows: Vec<Vec<(u128, u32)>> = Vec::new();
        let mut done = 0;
        while done < keys.len() {
            let frontier: Vec<u128> = keys[done..].to_vec();
            let new_rows = par::map(exec, &frontier, |&k| {
                successors(&codec.decode(k, field), &by_v, &codec, field)
            });
            for row in &new_rows {
                for &(k, _) in row {
                    if let std::collections::hash_map::Entry::Vacant(e) = index.entry(k) {
                        e.insert(keys.len());
                        keys.push(k);
                    }
                }
            }
            done += frontier.len();
            rows.extend(new_rows);
        }
        if BigUint::from(keys.len()) != total {
            return Err(Error::InternalError(format!(
                "reached {} forms, expected {total}",
                keys.len()
            )));
        }

        let denom = nonpreserving_pair_count(n, q);
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut counts = Vec::new();
        for row in &rows {
            let mut entries: Vec<(u32, u32)> =
                row.iter().map(|&(k, c)| (index[&k] as u32, c)).collect();
            entries.sort_unstable();
            let sum: u64 = entries.iter().map(|&(_, c)| c as u64).sum();
            if sum != denom {
                return Err(Error::InternalError(format!("row sums to {sum}/{denom}")));
            }
            for (j, c) in entries {
                cols.push(j);
                counts.push(c);
            }
            row_ptr.push(cols.len());
        }

        let classifier = Classifier::new(n, field)?;
        let labels = par::map(exec, &keys, |&k| {
            classifier.classify_form(&codec.decode(k, field))
        });
        let labels = labels.into_iter().collect::<Result<Vec<_>>>()?;
        let mut distinct: Vec<TypedPartitionFn> = labels
            .iter()
            .cloned()
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        distinct.sort_by(|a, b| {
            classifier
                .parts_at_one(b)
                .cmp(&classifier.parts_at_one(a))
                .then_with(|| b.cmp(a))
        });
        let lump_id: HashMap<&TypedPartitionFn, usize> =
            distinct.iter().enumerate().map(|(i, l)| (l, i)).collect();
        let lump_of: Vec<usize> = labels.iter().map(|l| lump_id[l]).collect();
        let mut sizes = vec![0usize; distinct.len()];
        for &l in &lump_of {
            sizes[l] += 1;
        }
        let lumps = distinct
            .iter()
            .zip(&sizes)
            .map(|(label, &size)| {
                Ok(Lump {
                    label: label.clone(),
                    size,
                    parts_at_one: classifier.parts_at_one(label),
                    stationary: BigRat::new(size.into(), keys.len().into()),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut chain = ChainModel {
            n,
            q,
            field: field.clone(),
            codec,
            keys,
            row_ptr,
            cols,
            counts,
            denom,
            initial,
            lump_of,
            lumps,
            lumped: Vec::new(),
        };
        chain.lumped = chain.lump_rows()?;
        Ok(chain)
    }

    pub fn num_states(&self) -> usize {
        self.keys.len()
    }

    pub fn num_lumps(&self) -> usize {
        self.lumps.len()
    }

    pub fn state(&self, i: usize) -> FormState {
        FormState {
            gram: self.codec.decode(self.keys[i], &self.field),
        }
    }

    pub fn state_index(&self, gram: &MatFq) -> Option<usize> {
        let k = self.codec.encode(gram);
        self.keys.iter().position(|&x| x == k)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |e| (self.cols[e] as usize, self.counts[e]))
    }

    pub fn transition(&self, i: usize, j: usize) -> BigRat {
        let c = self.row(i).find(|&(c, _)| c == j).map_or(0, |(_, c)| c);
        BigRat::new(c.into(), self.denom.into())
    }

    /// Lumped rows, checking that every state of a lump aggregates to the
    /// same row (Dynkin's criterion).
    fn lump_rows(&self) -> Result<Vec<Vec<BigRat>>> {
        let m = self.lumps.len();
        let mut rep: Vec<Option<Vec<u64>>> = vec![None; m];
        for i in 0..self.num_states() {
            let mut agg = vec![0u64; m];
            for (j, c) in self.row(i) {
                agg[self.lump_of[j]] += c as u64;
            }
            let l = self.lump_of[i];
            match &rep[l] {
                None => rep[l] = Some(agg),
                Some(r) if *r == agg => {}
                Some(_) => {
                    return Err(Error::InternalError(format!(
                        "lump {} is not lumpable at state {i}",
                        self.lumps[l].label
                    )))
                }
            }
        }
        Ok(rep
            .into_iter()
            .map(|r| {
                r.expect("every lump is nonempty")
                    .into_iter()
                    .map(|c| BigRat::new(c.into(), self.denom.into()))
                    .collect()
            })
            .collect())
    }

    /// Uniform measure on forms is stationary: every column sums to denom.
    pub fn uniform_is_stationary(&self) -> bool {
        let mut col = vec![0u64; self.num_states()];
        for (j, &c) in self.cols.iter().zip(&self.counts) {
            col[*j as usize] += c as u64;
        }
        col.iter().all(|&s| s == self.denom)
    }

    /// pi_lumped S = pi_lumped exactly.
    pub fn lumped_stationary_is_fixed(&self) -> bool {
        let m = self.lumps.len();
        (0..m).all(|j| {
            let s: BigRat = (0..m)
                .map(|i| &self.lumps[i].stationary * &self.lumped[i][j])
                .sum();
            s == self.lumps[j].stationary
        })
    }

    /// Lump masses against the class size formula, one flag per lump.
    pub fn stationary_matches_formula(&self) -> Result<bool> {
        for l in &self.lumps {
            if stationary_mass(&l.label, self.n, self.q)? != l.stationary {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Exact TV distance to uniform after k = 0..=k_max steps from the
    /// twisted start, on forms and on lumps.
    pub fn tv_curve(&self, k_max: usize, exec: Exec) -> Vec<TvPoint> {
        let n_states = self.num_states();
        // pull form: new[j] = sum_i old[i] P(i, j)
        let mut in_ptr = vec![0usize; n_states + 1];
        for &j in &self.cols {
            in_ptr[j as usize + 1] += 1;
        }
        for i in 0..n_states {
            in_ptr[i + 1] += in_ptr[i];
        }
        let mut fill = in_ptr.clone();
        let mut in_src = vec![0u32; self.cols.len()];
        let mut in_cnt = vec![0u32; self.cols.len()];
        for i in 0..n_states {
            for (j, c) in self.row(i) {
                in_src[fill[j]] = i as u32;
                in_cnt[fill[j]] = c;
                fill[j] += 1;
            }
        }
        let mut dist = vec![BigUint::zero(); n_states];
        for &s in &self.initial {
            dist[s] += 1u32;
        }
        let mut den = BigUint::from(self.initial.len());
        let mut out = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            out.push(TvPoint {
                k,
                full: self.tv_full(&dist, &den),
                lumped: self.tv_lumped(&dist, &den),
            });
            if k == k_max {
                break;
            }
            dist = par::map_range(exec, n_states, |j| {
                (in_ptr[j]..in_ptr[j + 1]).fold(BigUint::zero(), |acc, e| {
                    acc + &dist[in_src[e] as usize] * in_cnt[e]
                })
            });
            den *= self.denom;
        }
        out
    }

    fn tv_full(&self, dist: &[BigUint], den: &BigUint) -> BigRat {
        let n = BigInt::from(self.num_states());
        let d = BigInt::from(den.clone());
        let s: BigInt = dist
            .iter()
            .map(|a| (BigInt::from(a.clone()) * &n - &d).abs())
            .sum();
        BigRat::new(s, BigInt::from(2) * n * d)
    }

    fn tv_lumped(&self, dist: &[BigUint], den: &BigUint) -> BigRat {
        let mut agg = vec![BigUint::zero(); self.lumps.len()];
        for (i, a) in dist.iter().enumerate() {
            agg[self.lump_of[i]] += a;
        }
        let n = BigInt::from(self.num_states());
        let d = BigInt::from(den.clone());
        let s: BigInt = agg
            .iter()
            .zip(&self.lumps)
            .map(|(a, l)| (BigInt::from(a.clone()) * &n - &d * BigInt::from(l.size)).abs())
            .sum();
        BigRat::new(s, BigInt::from(2) * n * d)
    }

    /// Characteristic polynomial of the lumped matrix, coefficients from
    /// the constant term up.
    pub fn lumped_charpoly(&self) -> Vec<BigRat> {
        charpoly_rational(&self.lumped)
    }

    pub fn lumped_json(&self) -> Value {
        json!({
            "n": self.n,
            "q": self.q,
            "states": self.num_states(),
            "lumps": self.lumps.iter().map(|l| json!({
                "label": l.label.to_json(),
                "size": l.size,
                "parts_at_one": l.parts_at_one,
                "stationary": rat_to_string(&l.stationary),
            })).collect::<Vec<_>>(),
            "matrix": self.lumped.iter().map(|r| r.iter().map(rat_to_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvPoint {
    pub k: usize,
    pub full: BigRat,
    pub lumped: BigRat,
}

/// det(xI - A) over Q by Faddeev-LeVerrier; coefficients low to high.
pub fn charpoly_rational(a: &[Vec<BigRat>]) -> Vec<BigRat> {
    let m = a.len();
    let mul = |x: &[Vec<BigRat>], y: &[Vec<BigRat>]| -> Vec<Vec<BigRat>> {
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| (0..m).map(|k| &x[i][k] * &y[k][j]).sum())
                    .collect()
            })
            .collect()
    };
    let mut coeffs = vec![BigRat::zero(); m + 1];
    coeffs[m] = BigRat::one();
    // M_0 = 0, c_m = 1; M_k = A M_{k-1} + c_{m-k+1} I; c_{m-k} = -tr(A M_k)/k
    let mut mk: Vec<Vec<BigRat>> = vec![vec![BigRat::zero(); m]; m];
    for k in 1..=m {
        let mut next = mul(a, &mk);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &coeffs[m - k + 1];
        }
        mk = next;
        let am = mul(a, &mk);
        let tr: BigRat = (0..m).map(|i| am[i][i].clone()).sum();
        coeffs[m - k] = -tr / BigRat::from_integer(BigInt::from(k));
    }
    coeffs
}

/// prod (x - r_i)^{e_i}, coefficients low to high.
pub fn poly_from_roots(roots: &[(BigRat, usize)]) -> Vec<BigRat> {
    let mut p = vec![BigRat::one()];
    for (r, e) in roots {
        for _ in 0..*e {
            let mut next = vec![BigRat::zero(); p.len() + 1];
            for (i, c) in p.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * r;
            }
            p = next;
        }
    }
    p
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `trials` independent samples in seeded chunks and tallies labels.
/// The tally does not depend on the execution mode.
fn tally<F>(
    trials: u64,
    seed: u64,
    exec: Exec,
    sample: F,
) -> Result<BTreeMap<TypedPartitionFn, u64>>
where
    F: Fn(&mut ChaCha8Rng, &mut HashMap<u128, TypedPartitionFn>) -> Result<TypedPartitionFn>
        + Sync
        + Send,
{
    let chunks = trials.div_ceil(CHUNK);
    let parts = par::map_range(
        exec,
        chunks as usize,
        |c| -> Result<BTreeMap<TypedPartitionFn, u64>> {
            let mut rng = chunk_rng(seed, c as u64);
            let mut cache = HashMap::new();
            let mut counts = BTreeMap::new();
            let this = CHUNK.min(trials - c as u64 * CHUNK);
            for _ in 0..this {
                *counts.entry(sample(&mut rng, &mut cache)?).or_insert(0) += 1;
            }
            Ok(counts)
        },
    );
    let mut total = BTreeMap::new();
    for p in parts {
        for (k, v) in p? {
            *total.entry(k).or_insert(0) += v;
        }
    }
    Ok(total)
}

/// Label counts after k form-walk steps from the twisted start.
pub fn form_walk_distribution(
    n: usize,
    field: &FieldSpec,
    k: usize,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<BTreeMap<TypedPartitionFn, u64>> {
    if n < 2 {
        return Err(Error::TrivialWalk);
    }
    let classifier = Classifier::new(n, field)?;
    let codec = KeyCodec::new(2 * n, field.q());
    tally(trials, seed, exec, |rng, cache| {
        let mut s = initial_state(n, field, rng);
        for _ in 0..k {
            s = step(&s, field, rng)?;
        }
        match &codec {
            Some(codec) => {
                let key = codec.encode(&s.gram);
                if let Some(l) = cache.get(&key) {
                    return Ok(l.clone());
                }
                let l = classifier.classify_form(&s.gram)?;
                cache.insert(key, l.clone());
                Ok(l)
            }
            None => classifier.classify_form(&s.gram),
        }
    })
}

/// Label counts after k right-walk steps g -> g k_1 t k_2 from h_alpha.
pub fn group_walk_distribution(
    n: usize,
    field: &FieldSpec,
    k: usize,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<BTreeMap<TypedPartitionFn, u64>> {
    let classifier = Classifier::new(n, field)?;
    tally(trials, seed, exec, |rng, _| {
        let mut g = twist_matrix(n, random_nonzero(field, rng));
        for _ in 0..k {
            g = group_walk_step(&g, field, rng)?;
        }
        classifier.classify_group(&g)
    })
}

/// (label, observed count, stationary mass)
pub type Cell = (TypedPartitionFn, u64, BigRat);

/// Monte Carlo estimate of the lumped TV distance after k steps.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub n: usize,
    pub q: u64,
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub cells: Vec<Cell>,
    /// Stationary mass of labels never observed.
    pub unobserved_mass: f64,
}

/// TV between the empirical label distribution and the stationary one, with
/// a delta-method standard error. Lumped TV never exceeds the TV on forms.
pub fn lumped_tv_estimate(
    counts: &BTreeMap<TypedPartitionFn, u64>,
    n: usize,
    q: u64,
    trials: u64,
) -> Result<(f64, f64, Vec<Cell>, f64)> {
    let t = trials as f64;
    let mut cells = Vec::new();
    let mut observed_pi = BigRat::zero();
    let mut abs_sum = 0.0;
    let (mut g2p, mut gp) = (0.0, 0.0);
    for (label, &c) in counts {
        let pi = stationary_mass(label, n, q)?;
        let p_hat = c as f64 / t;
        let pi_f = crate::bounds::rat_f64(&pi);
        let diff = p_hat - pi_f;
        abs_sum += diff.abs();
        let g = 0.5 * diff.signum();
        g2p += g * g * p_hat;
        gp += g * p_hat;
        observed_pi += &pi;
        cells.push((label.clone(), c, pi));
    }
    let unobserved = crate::bounds::rat_f64(&(BigRat::one() - observed_pi)).max(0.0);
    let estimate = 0.5 * (abs_sum + unobserved);
    let stderr = ((g2p - gp * gp).max(0.0) / t).sqrt();
    Ok((estimate, stderr, cells, unobserved))
}

pub fn monte_carlo_tv(
    n: usize,
    field: &FieldSpec,
    k: usize,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    let q = field.q() as u64;
    let counts = form_walk_distribution(n, field, k, trials, seed, exec)?;
    let (estimate, stderr, cells, unobserved_mass) = lumped_tv_estimate(&counts, n, q, trials)?;
    Ok(McEstimate {
        n,
        q,
        k,
        trials,
        seed,
        estimate,
        stderr,
        cells,
        unobserved_mass,
    })
}

/// Samples products of n - c uniform non-symplectic transvections and counts
/// those whose double coset has fewer than c parts at x - 1.
pub fn support_violations(
    n: usize,
    field: &FieldSpec,
    c: usize,
    samples: u64,
    seed: u64,
    exec: Exec,
) -> Result<u64> {
    if c > n {
        return Err(Error::InvalidInput(format!("c = {c} exceeds n = {n}")));
    }
    let classifier = Classifier::new(n, field)?;
    let j = standard_j(n, field);
    let chunks = samples.div_ceil(CHUNK);
    let bad = par::map_range(exec, chunks as usize, |ch| -> Result<u64> {
        let mut rng = chunk_rng(seed, ch as u64);
        let mut bad = 0;
        for _ in 0..CHUNK.min(samples - ch as u64 * CHUNK) {
            let mut g = MatFq::identity(2 * n);
            for _ in 0..n - c {
                let t = sample_nonpreserving_transvection(&j, field, &mut rng)?;
                t.right_apply(&mut g, field);
            }
            if classifier.parts_at_one_group(&g)? < c {
                bad += 1;
            }
        }
        Ok(bad)
    });
    bad.into_iter().sum()
}

/// Exhaustive check that G -> t^{-T} G t^{-1} and G -> t^T G t give the same
/// distribution of targets over non-preserving transvections.
pub fn conventions_agree(gram: &MatFq, field: &FieldSpec) -> Result<bool> {
    let mut a: HashMap<MatFq, usize> = HashMap::new();
    let mut b: HashMap<MatFq, usize> = HashMap::new();
    for t in transvection_pairs(gram.rows(), field) {
        if t.preserves(gram, field) {
            continue;
        }
        *a.entry(t.act_on_gram(gram, field)).or_default() += 1;
        let m = t.matrix(field);
        *b.entry(m.transpose().mul(gram, field)?.mul(&m, field)?)
            .or_default() += 1;
    }
    Ok(a == b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fq_arith::build_field;
    use crate::gl_combinat::Partition;
    use crate::spectral::spectrum;

    fn r(a: i64, b: i64) -> BigRat {
        BigRat::new(a.into(), b.into())
    }

    #[test]
    fn initial_states_examples() {
        let f2 = build_field(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(initial_state(2, &f2, &mut rng).gram, standard_j(2, &f2));
        }
        let f3 = build_field(3, 1).unwrap();
        let starts = initial_states(2, &f3);
        assert_eq!(starts.len(), 2);
        assert_ne!(starts[0], starts[1]);
        for s in &starts {
            FormState::new(s.gram.clone(), &f3).unwrap();
        }
    }

    #[test]
    fn step_always_moves() {
        let f = build_field(3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = initial_state(3, &f, &mut rng);
        for _ in 0..100 {
            let t = step(&s, &f, &mut rng).unwrap();
            assert_ne!(t.gram, s.gram);
            s = FormState::new(t.gram, &f).unwrap();
        }
    }

    #[test]
    fn classifier_examples() {
        let f = build_field(2, 1).unwrap();
        let c = Classifier::new(2, &f).unwrap();
        let j = standard_j(2, &f);
        let id = TypedPartitionFn::single(1, Partition::column(2));
        assert_eq!(c.classify_form(&j).unwrap(), id);
        assert_eq!(c.classify_group(&MatFq::identity(4)).unwrap(), id);
        let t = base_transvection(2, &f).unwrap();
        let mu = TypedPartitionFn::single(1, Partition::new(vec![2]).unwrap());
        assert_eq!(c.classify_group(&t.matrix(&f)).unwrap(), mu);
        assert_eq!(c.classify_form(&t.act_on_gram(&j, &f)).unwrap(), mu);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = step(&FormState { gram: j.clone() }, &f, &mut rng).unwrap();
            assert_eq!(c.classify_form(&s.gram).unwrap(), mu);
        }
    }

    #[test]
    fn classifier_is_bi_invariant_and_form_group_agree() {
        for p in [2u64, 3] {
            let f = build_field(p, 1).unwrap();
            let n = 3;
            let c = Classifier::new(n, &f).unwrap();
            let j = standard_j(n, &f);
            let mut rng = ChaCha8Rng::seed_from_u64(4 + p);
            let mut g = twist_matrix(n, random_nonzero(&f, &mut rng));
            for _ in 0..30 {
                g = group_walk_step(&g, &f, &mut rng).unwrap();
                let mu = c.classify_group(&g).unwrap();
                let k1 = sample_symplectic(n, &f, &mut rng);
                let k2 = sample_symplectic(n, &f, &mut rng);
                let h = k1.mul(&g, &f).unwrap().mul(&k2, &f).unwrap();
                assert_eq!(c.classify_group(&h).unwrap(), mu);
                let gi = g.inverse(&f).unwrap();
                let gram = gi.transpose().mul(&j, &f).unwrap().mul(&gi, &f).unwrap();
                assert_eq!(c.classify_form(&gram).unwrap(), mu);
                assert_eq!(c.parts_at_one_group(&g).unwrap(), c.parts_at_one(&mu));
                assert_eq!(mu.weight(), n);
            }
        }
    }

    #[test]
    fn double_cosets_by_brute_force_2_2() {
        // orbits of Sp_4(F_2) x Sp_4(F_2) on GL_4(F_2) via union-find over
        // the 15 symplectic transvections, which generate Sp_4(F_2)
        let f = build_field(2, 1).unwrap();
        let j = standard_j(2, &f);
        let gens: Vec<MatFq> = {
            let mut seen = HashSet::new();
            transvection_pairs(4, &f)
                .into_iter()
                .map(|t| t.matrix(&f))
                .filter(|m| m.transpose().mul(&j, &f).unwrap().mul(m, &f).unwrap() == j)
                .filter(|m| seen.insert(m.clone()))
                .collect()
        };
        assert_eq!(gens.len(), 15);
        let mut elems = Vec::new();
        for bits in 0u32..1 << 16 {
            let m = MatFq::from_vec(4, 4, (0..16).map(|i| Fe((bits >> i) & 1)).collect()).unwrap();
            if !m.det(&f).unwrap().is_zero() {
                elems.push(m);
            }
        }
        assert_eq!(elems.len(), 20160);
        let pos: HashMap<MatFq, usize> = elems
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        let mut parent: Vec<usize> = (0..elems.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, g) in elems.iter().enumerate() {
            for k in &gens {
                for h in [k.mul(g, &f).unwrap(), g.mul(k, &f).unwrap()] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, pos[&h]));
                    parent[a] = b;
                }
            }
        }
        let c = Classifier::new(2, &f).unwrap();
        let mut label_of_root: HashMap<usize, TypedPartitionFn> = HashMap::new();
        let mut sizes: HashMap<TypedPartitionFn, usize> = HashMap::new();
        for (i, g) in elems.iter().enumerate() {
            let root = find(&mut parent, i);
            let l = c.classify_group(g).unwrap();
            assert_eq!(label_of_root.entry(root).or_insert_with(|| l.clone()), &l);
            *sizes.entry(l).or_default() += 1;
        }
        assert_eq!(label_of_root.len(), 3);
        assert_eq!(sizes.len(), 3);
        let mut v: Vec<usize> = sizes.values().copied().collect();
        v.sort_unstable();
        assert_eq!(v, vec![720, 8640, 10800]);
    }

    #[test]
    fn chain_2_2_matches_example() {
        let f = build_field(2, 1).unwrap();
        let chain = ChainModel::build(2, &f, DEFAULT_STATE_CAP, Exec::Sequential).unwrap();
        assert_eq!(chain.num_states(), 28);
        let want = vec![
            vec![r(0, 1), r(1, 1), r(0, 1)],
            vec![r(1, 15), r(6, 15), r(8, 15)],
            vec![r(0, 1), r(2, 3), r(1, 3)],
        ];
        assert_eq!(chain.lumped, want);
        let pis: Vec<BigRat> = chain.lumps.iter().map(|l| l.stationary.clone()).collect();
        assert_eq!(pis, vec![r(1, 28), r(15, 28), r(12, 28)]);
        assert!(chain.uniform_is_stationary());
        assert!(chain.lumped_stationary_is_fixed());
        assert!(chain.stationary_matches_formula().unwrap());
        let want_poly = poly_from_roots(&[(r(1, 1), 1), (r(1, 15), 1), (r(-1, 3), 1)]);
        assert_eq!(chain.lumped_charpoly(), want_poly);
        let tv = chain.tv_curve(3, Exec::Sequential);
        assert_eq!(tv[0].full, r(27, 28));
        assert_eq!(tv[1].full, r(13, 28));
        assert_eq!(tv[2].full, r(19, 140));
        assert!(tv.iter().all(|p| p.full == p.lumped));
        // zero diagonal of the full matrix
        assert!((0..28).all(|i| chain.transition(i, i).is_zero()));
    }

    #[test]
    fn chain_2_3_lumps_and_spectrum() {
        let f = build_field(3, 1).unwrap();
        let chain = ChainModel::build(2, &f, DEFAULT_STATE_CAP, Exec::Parallel).unwrap();
        assert_eq!(chain.num_states(), 468);
        assert!(chain.uniform_is_stationary());
        assert!(chain.lumped_stationary_is_fixed());
        assert!(chain.stationary_matches_formula().unwrap());
        let roots: Vec<(BigRat, usize)> = spectrum(2, 3, Exec::Sequential)
            .unwrap()
            .into_iter()
            .map(|l| (l.phi, l.type_count.to_usize().unwrap()))
            .collect();
        assert_eq!(chain.lumped_charpoly(), poly_from_roots(&roots));
        let tv = chain.tv_curve(4, Exec::Parallel);
        for p in &tv {
            assert!(p.lumped <= p.full);
        }
    }

    #[test]
    fn state_cap_is_enforced() {
        let f = build_field(2, 1).unwrap();
        assert!(matches!(
            ChainModel::build(3, &f, 1000, Exec::Sequential),
            Err(Error::StateSpaceTooLarge {
                states: 13888,
                cap: 1000
            })
        ));
        assert!(matches!(
            ChainModel::build(1, &f, 1000, Exec::Sequential),
            Err(Error::TrivialWalk)
        ));
    }

    #[test]
    fn update_conventions_agree() {
        for p in [2u64, 3] {
            let f = build_field(p, 1).unwrap();
            assert!(conventions_agree(&standard_j(2, &f), &f).unwrap());
            assert!(conventions_agree(&twisted_base(2, f.generator(), &f), &f).unwrap());
        }
    }

    #[test]
    fn charpoly_rational_examples() {
        let a = vec![vec![r(0, 1), r(1, 1)], vec![r(1, 1), r(0, 1)]];
        assert_eq!(charpoly_rational(&a), vec![r(-1, 1), r(0, 1), r(1, 1)]);
    }

    #[test]
    fn tallies_do_not_depend_on_exec_mode() {
        let f = build_field(3, 1).unwrap();
        let a = form_walk_distribution(2, &f, 2, 10_000, 9, Exec::Sequential).unwrap();
        let b = form_walk_distribution(2, &f, 2, 10_000, 9, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values().sum::<u64>(), 10_000);
    }

    #[test]
    fn one_step_is_point_mass() {
        let f = build_field(2, 1).unwrap();
        let est = monte_carlo_tv(4, &f, 1, 2000, 1, Exec::Parallel).unwrap();
        assert_eq!(est.cells.len(), 1);
        let pi = &est.cells[0].2;
        let exact = crate::bounds::rat_f64(&(BigRat::one() - pi));
        assert!((est.estimate - exact).abs() < 1e-12);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn two_step_return_rate() {
        let f = build_field(2, 1).unwrap();
        let trials = 60_000;
        let counts = form_walk_distribution(2, &f, 2, trials, 11, Exec::Parallel).unwrap();
        let id = TypedPartitionFn::single(1, Partition::column(2));
        let p = counts.get(&id).copied().unwrap_or(0) as f64 / trials as f64;
        let sd = (1.0 / 15.0 * 14.0 / 15.0 / trials as f64).sqrt();
        assert!((p - 1.0 / 15.0).abs() < 4.0 * sd, "p = {p}");
    }

    #[test]
    fn support_small() {
        for p in [2u64, 3] {
            let f = build_field(p, 1).unwrap();
            for n in 2..=3 {
                for c in 0..=n {
                    assert_eq!(
                        support_violations(n, &f, c, 500, 5, Exec::Parallel).unwrap(),
                        0
                    );
                }
            }
        }
    }
}

//! Dense linear algebra over F_q: Gaussian elimination, the standard
//! symplectic form, transvections and their uniform sampling, uniform
//! sampling of Sp_2n(F_q), and conjugacy-class invariants from rank
//! sequences of f(X)^j.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fq_arith::{enumerate_irreducibles, Fe, FieldSpec, PolyFq};
use crate::gl_combinat::{Partition, Slot, TypedPartitionFn};

/// Hard cap on rejection rounds when sampling a non-preserving transvection.
pub const REJECTION_CAP: usize = 1_000_000;

/// Dense row-major matrix over F_q.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatFq {
    rows: usize,
    cols: usize,
    data: Vec<Fe>,
}

impl MatFq {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatFq {
            rows,
            cols,
            data: vec![Fe::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = MatFq::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Fe::ONE);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Fe>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} from {} entries",
                data.len()
            )));
        }
        Ok(MatFq { rows, cols, data })
    }

    /// From rows of integer residues (prime-field convenience; values are
    /// taken as packed element codes).
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        MatFq::from_vec(r, c, rows.iter().flatten().map(|&v| Fe(v)).collect())
    }

    pub fn diag(entries: &[Fe]) -> Self {
        let mut m = MatFq::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.set(i, i, e);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Fe] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Fe {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Fe) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Fe] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> MatFq {
        let mut t = MatFq::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &MatFq, field: &FieldSpec) -> Result<MatFq> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = MatFq::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] = field.add(out.data[idx], field.mul(a, other.get(k, j)));
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Fe], field: &FieldSpec) -> Vec<Fe> {
        (0..self.rows).map(|i| dot(self.row(i), v, field)).collect()
    }

    fn zip_with(&self, other: &MatFq, f: impl Fn(Fe, Fe) -> Fe) -> Result<MatFq> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch("shape mismatch".into()));
        }
        Ok(MatFq {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &MatFq, field: &FieldSpec) -> Result<MatFq> {
        self.zip_with(other, |a, b| field.add(a, b))
    }

    pub fn sub(&self, other: &MatFq, field: &FieldSpec) -> Result<MatFq> {
        self.zip_with(other, |a, b| field.sub(a, b))
    }

    pub fn scale(&self, s: Fe, field: &FieldSpec) -> MatFq {
        MatFq {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| field.mul(a, s)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|a| a.is_zero())
    }

    /// Row echelon form in place; returns the pivot columns.
    fn echelon(&mut self, field: &FieldSpec) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| !self.get(i, c).is_zero()) else {
                continue;
            };
            if pr != r {
                for j in 0..self.cols {
                    self.data.swap(pr * self.cols + j, r * self.cols + j);
                }
            }
            let inv = field.inv(self.get(r, c)).expect("pivot is nonzero");
            for j in c..self.cols {
                let v = field.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let factor = self.get(i, c);
                if factor.is_zero() {
                    continue;
                }
                for j in c..self.cols {
                    let v = field.sub(self.get(i, j), field.mul(factor, self.get(r, j)));
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self, field: &FieldSpec) -> usize {
        self.clone().echelon(field).len()
    }

    pub fn kernel_dim(&self, field: &FieldSpec) -> usize {
        self.cols - self.rank(field)
    }

    /// Basis of the right kernel {x : A x = 0}.
    pub fn kernel(&self, field: &FieldSpec) -> Vec<Vec<Fe>> {
        let mut m = self.clone();
        let pivots = m.echelon(field);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&fc| {
                let mut x = vec![Fe::ZERO; self.cols];
                x[fc] = Fe::ONE;
                for (r, &pc) in pivots.iter().enumerate() {
                    x[pc] = field.neg(m.get(r, fc));
                }
                x
            })
            .collect()
    }

    pub fn inverse(&self, field: &FieldSpec) -> Result<MatFq> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(
                "inverse of a non-square matrix".into(),
            ));
        }
        let n = self.rows;
        let mut aug = MatFq::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, n + i, Fe::ONE);
        }
        let pivots = aug.echelon(field);
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(Error::Singular);
        }
        let mut inv = MatFq::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, aug.get(i, n + j));
            }
        }
        Ok(inv)
    }

    pub fn det(&self, field: &FieldSpec) -> Result<Fe> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(
                "determinant of a non-square matrix".into(),
            ));
        }
        let n = self.rows;
        let mut m = self.clone();
        let mut det = Fe::ONE;
        for c in 0..n {
            let Some(pr) = (c..n).find(|&i| !m.get(i, c).is_zero()) else {
                return Ok(Fe::ZERO);
            };
            if pr != c {
                for j in 0..n {
                    m.data.swap(pr * n + j, c * n + j);
                }
                det = field.neg(det);
            }
            let piv = m.get(c, c);
            det = field.mul(det, piv);
            let inv = field.inv(piv)?;
            for i in c + 1..n {
                let factor = field.mul(m.get(i, c), inv);
                if factor.is_zero() {
                    continue;
                }
                for j in c..n {
                    let v = field.sub(m.get(i, j), field.mul(factor, m.get(c, j)));
                    m.set(i, j, v);
                }
            }
        }
        Ok(det)
    }

    /// Characteristic polynomial det(xI - A) via reduction to upper
    /// Hessenberg form.
    pub fn charpoly(&self, field: &FieldSpec) -> Result<PolyFq> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(
                "charpoly of a non-square matrix".into(),
            ));
        }
        let n = self.rows;
        let mut h = self.clone();
        for m in 1..n.saturating_sub(1) {
            let Some(i) = (m..n).find(|&i| !h.get(i, m - 1).is_zero()) else {
                continue;
            };
            if i != m {
                for j in 0..n {
                    h.data.swap(i * n + j, m * n + j);
                }
                for r in 0..n {
                    h.data.swap(r * n + i, r * n + m);
                }
            }
            let t_inv = field.inv(h.get(m, m - 1))?;
            for i in m + 1..n {
                let u = field.mul(h.get(i, m - 1), t_inv);
                if u.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let v = field.sub(h.get(i, j), field.mul(u, h.get(m, j)));
                    h.set(i, j, v);
                }
                for r in 0..n {
                    let v = field.add(h.get(r, m), field.mul(u, h.get(r, i)));
                    h.set(r, m, v);
                }
            }
        }
        // 1-indexed recurrence on the Hessenberg entries
        let at = |i: usize, j: usize| h.get(i - 1, j - 1);
        let mut polys: Vec<PolyFq> = vec![PolyFq::one()];
        for m in 1..=n {
            let lin = PolyFq::linear(field, at(m, m));
            let mut pm = lin.mul(&polys[m - 1], field);
            let mut t = Fe::ONE;
            for i in (1..m).rev() {
                t = field.mul(t, at(i + 1, i));
                let c = field.mul(at(i, m), t);
                if !c.is_zero() {
                    pm = pm.sub(&polys[i - 1].scale(c, field), field);
                }
            }
            polys.push(pm);
        }
        Ok(polys.pop().expect("n >= 0"))
    }

    /// f(A) by Horner's rule.
    pub fn eval_poly(&self, f: &PolyFq, field: &FieldSpec) -> Result<MatFq> {
        let n = self.rows;
        let mut acc = MatFq::zeros(n, n);
        for &c in f.coeffs().iter().rev() {
            acc = acc.mul(self, field)?;
            for i in 0..n {
                let v = field.add(acc.get(i, i), c);
                acc.set(i, i, v);
            }
        }
        Ok(acc)
    }

    /// Square, zero diagonal, and A^T = -A. The zero-diagonal condition is
    /// what makes this "alternating" rather than "skew" in characteristic 2.
    pub fn is_alternating(&self, field: &FieldSpec) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                self.get(i, i).is_zero()
                    && (0..i).all(|j| self.get(i, j) == field.neg(self.get(j, i)))
            })
    }

    /// JSON array of rows; elements per [`FieldSpec::element_to_json`].
    pub fn to_json(&self, field: &FieldSpec) -> Value {
        Value::Array(
            (0..self.rows)
                .map(|i| {
                    Value::Array(
                        self.row(i)
                            .iter()
                            .map(|&a| field.element_to_json(a))
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    pub fn from_json(v: &Value, field: &FieldSpec) -> Result<MatFq> {
        let bad = || Error::InvalidInput(format!("expected an array of rows, got {v}"));
        let rows = v.as_array().ok_or_else(bad)?;
        let cols = rows
            .first()
            .and_then(|r| r.as_array())
            .map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_array().ok_or_else(bad)?;
            if r.len() != cols {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            for e in r {
                data.push(field.element_from_json(e)?);
            }
        }
        MatFq::from_vec(rows.len(), cols, data)
    }
}

pub fn dot(a: &[Fe], b: &[Fe], field: &FieldSpec) -> Fe {
    a.iter()
        .zip(b)
        .fold(Fe::ZERO, |acc, (&x, &y)| field.add(acc, field.mul(x, y)))
}

/// J = [[0, I], [-I, 0]] of size 2n.
pub fn standard_j(n: usize, field: &FieldSpec) -> MatFq {
    let mut j = MatFq::zeros(2 * n, 2 * n);
    let minus_one = field.neg(Fe::ONE);
    for i in 0..n {
        j.set(i, n + i, Fe::ONE);
        j.set(n + i, i, minus_one);
    }
    j
}

/// g^T Omega g == Omega.
pub fn is_form_preserving(g: &MatFq, omega: &MatFq, field: &FieldSpec) -> Result<bool> {
    if !g.is_square() || !omega.is_square() || g.rows() != omega.rows() {
        return Err(Error::DimensionMismatch(
            "form and matrix sizes differ".into(),
        ));
    }
    Ok(g.transpose().mul(omega, field)?.mul(g, field)? == *omega)
}

/// The transvection I + v f with f(v) = 0, v != 0, f != 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transvection {
    pub v: Vec<Fe>,
    pub f: Vec<Fe>,
}

impl Transvection {
    pub fn new(v: Vec<Fe>, f: Vec<Fe>, field: &FieldSpec) -> Result<Self> {
        if v.len() != f.len() {
            return Err(Error::DimensionMismatch("v and f lengths differ".into()));
        }
        if v.iter().all(|a| a.is_zero())
            || f.iter().all(|a| a.is_zero())
            || !dot(&f, &v, field).is_zero()
        {
            return Err(Error::InvalidInput(
                "transvection needs v != 0, f != 0, f(v) = 0".into(),
            ));
        }
        Ok(Transvection { v, f })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    fn with_sign(&self, sign: Fe, field: &FieldSpec) -> MatFq {
        let n = self.dim();
        let mut m = MatFq::identity(n);
        for i in 0..n {
            if self.v[i].is_zero() {
                continue;
            }
            let vi = field.mul(sign, self.v[i]);
            for j in 0..n {
                let e = field.add(m.get(i, j), field.mul(vi, self.f[j]));
                m.set(i, j, e);
            }
        }
        m
    }

    /// I + v f
    pub fn matrix(&self, field: &FieldSpec) -> MatFq {
        self.with_sign(Fe::ONE, field)
    }

    /// (I + v f)^{-1} = I - v f
    pub fn inverse_matrix(&self, field: &FieldSpec) -> MatFq {
        self.with_sign(field.neg(Fe::ONE), field)
    }

    /// g (I + v f) = g + (g v) f, in place.
    pub fn right_apply(&self, g: &mut MatFq, field: &FieldSpec) {
        let gv = g.mul_vec(&self.v, field);
        for (i, &a) in gv.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &fj) in self.f.iter().enumerate() {
                if !fj.is_zero() {
                    let e = field.add(g.get(i, j), field.mul(a, fj));
                    g.set(i, j, e);
                }
            }
        }
    }

    /// Whether t^T G t = G. With u = G v this holds exactly when f is a
    /// multiple of u^T.
    pub fn preserves(&self, gram: &MatFq, field: &FieldSpec) -> bool {
        let u = gram.mul_vec(&self.v, field);
        parallel(&u, &self.f, field)
    }

    /// The congruence t^{-T} G t^{-1} = G + f^T u^T - u f with u = G v.
    pub fn act_on_gram(&self, gram: &MatFq, field: &FieldSpec) -> MatFq {
        let u = gram.mul_vec(&self.v, field);
        let n = self.dim();
        let mut out = gram.clone();
        for i in 0..n {
            for j in 0..n {
                let plus = field.mul(self.f[i], u[j]);
                let minus = field.mul(u[i], self.f[j]);
                let d = field.sub(plus, minus);
                if !d.is_zero() {
                    out.set(i, j, field.add(out.get(i, j), d));
                }
            }
        }
        out
    }
}

/// True if a and b are linearly dependent.
fn parallel(a: &[Fe], b: &[Fe], field: &FieldSpec) -> bool {
    let n = a.len();
    for i in 0..n {
        for j in i + 1..n {
            if field.mul(a[i], b[j]) != field.mul(a[j], b[i]) {
                return false;
            }
        }
    }
    true
}

pub fn random_element<R: Rng + ?Sized>(field: &FieldSpec, rng: &mut R) -> Fe {
    Fe(rng.gen_range(0..field.q()))
}

pub fn random_nonzero<R: Rng + ?Sized>(field: &FieldSpec, rng: &mut R) -> Fe {
    Fe(rng.gen_range(1..field.q()))
}

pub fn random_vector<R: Rng + ?Sized>(dim: usize, field: &FieldSpec, rng: &mut R) -> Vec<Fe> {
    (0..dim).map(|_| random_element(field, rng)).collect()
}

pub fn random_nonzero_vector<R: Rng + ?Sized>(
    dim: usize,
    field: &FieldSpec,
    rng: &mut R,
) -> Vec<Fe> {
    loop {
        let v = random_vector(dim, field, rng);
        if v.iter().any(|a| !a.is_zero()) {
            return v;
        }
    }
}

/// Uniform nonzero f with f(v) = 0: solve for the coordinate at the first
/// nonzero entry of v, draw the others freely.
fn random_annihilator<R: Rng + ?Sized>(v: &[Fe], field: &FieldSpec, rng: &mut R) -> Vec<Fe> {
    let pivot = v.iter().position(|a| !a.is_zero()).expect("v is nonzero");
    let inv = field.inv(v[pivot]).expect("nonzero");
    loop {
        let mut f = random_vector(v.len(), field, rng);
        f[pivot] = Fe::ZERO;
        let s = dot(&f, v, field);
        f[pivot] = field.neg(field.mul(s, inv));
        if f.iter().any(|a| !a.is_zero()) {
            return f;
        }
    }
}

/// Uniform transvection of GL_{2n}(F_q). Each transvection comes from
/// exactly q - 1 pairs (v, f), so uniform pairs give uniform transvections.
pub fn sample_transvection<R: Rng + ?Sized>(
    n: usize,
    field: &FieldSpec,
    rng: &mut R,
) -> Transvection {
    let v = random_nonzero_vector(2 * n, field, rng);
    let f = random_annihilator(&v, field, rng);
    Transvection { v, f }
}

/// Uniform transvection t with t^T Omega t != Omega, by rejection.
pub fn sample_nonpreserving_transvection<R: Rng + ?Sized>(
    omega: &MatFq,
    field: &FieldSpec,
    rng: &mut R,
) -> Result<Transvection> {
    if omega.rows() < 4 {
        return Err(Error::TrivialWalk);
    }
    let n = omega.rows() / 2;
    for _ in 0..REJECTION_CAP {
        let t = sample_transvection(n, field, rng);
        if !t.preserves(omega, field) {
            return Ok(t);
        }
    }
    Err(Error::InternalError("rejection cap reached".into()))
}

/// Every (v, f) pair with v != 0, f != 0, f(v) = 0 in dimension `dim`.
pub fn transvection_pairs(dim: usize, field: &FieldSpec) -> Vec<Transvection> {
    let vectors = all_nonzero_vectors(dim, field);
    let mut out = Vec::new();
    for v in &vectors {
        for f in &vectors {
            if dot(f, v, field).is_zero() {
                out.push(Transvection {
                    v: v.clone(),
                    f: f.clone(),
                });
            }
        }
    }
    out
}

pub fn all_nonzero_vectors(dim: usize, field: &FieldSpec) -> Vec<Vec<Fe>> {
    let q = field.q() as u64;
    (1..q.pow(dim as u32))
        .map(|mut t| {
            (0..dim)
                .map(|_| {
                    let d = Fe((t % q) as u32);
                    t /= q;
                    d
                })
                .collect()
        })
        .collect()
}

/// Uniform element of Sp_2n(F_q) preserving J, built column by column as a
/// uniformly random symplectic basis e_1..e_n, f_1..f_n.
pub fn sample_symplectic<R: Rng + ?Sized>(n: usize, field: &FieldSpec, rng: &mut R) -> MatFq {
    let dim = 2 * n;
    let j = standard_j(n, field);
    let omega = |x: &[Fe], y: &[Fe]| dot(x, &j.mul_vec(y, field), field);
    let mut basis: Vec<Vec<Fe>> = (0..dim)
        .map(|i| {
            let mut e = vec![Fe::ZERO; dim];
            e[i] = Fe::ONE;
            e
        })
        .collect();
    let combo = |basis: &[Vec<Fe>], rng: &mut R| -> Vec<Fe> {
        let mut x = vec![Fe::ZERO; dim];
        for b in basis {
            let c = random_element(field, rng);
            if c.is_zero() {
                continue;
            }
            for (xi, &bi) in x.iter_mut().zip(b) {
                *xi = field.add(*xi, field.mul(c, bi));
            }
        }
        x
    };
    let mut g = MatFq::zeros(dim, dim);
    for i in 0..n {
        let e = loop {
            let e = combo(&basis, rng);
            if e.iter().any(|a| !a.is_zero()) {
                break e;
            }
        };
        let f = loop {
            let f = combo(&basis, rng);
            let c = omega(&e, &f);
            if !c.is_zero() {
                let inv = field.inv(c).expect("nonzero");
                break f.iter().map(|&a| field.mul(a, inv)).collect::<Vec<_>>();
            }
        };
        for r in 0..dim {
            g.set(r, i, e[r]);
            g.set(r, n + i, f[r]);
        }
        // project the rest of W onto <e, f>^perp and re-reduce to a basis
        let projected: Vec<Fe> = basis
            .iter()
            .flat_map(|b| {
                let (wf, we) = (omega(&f, b), omega(&e, b));
                (0..dim)
                    .map(|k| field.sub(field.add(b[k], field.mul(wf, e[k])), field.mul(we, f[k])))
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut m = MatFq::from_vec(basis.len(), dim, projected).expect("shape");
        let rank = m.echelon(field).len();
        basis = (0..rank).map(|r| m.row(r).to_vec()).collect();
    }
    g
}

/// Irreducible polynomials over F_q indexed by degree, used to factor
/// characteristic polynomials and to name orbits by their position in the
/// enumeration order.
#[derive(Debug, Clone)]
pub struct OrbitIndex {
    field: FieldSpec,
    by_degree: Vec<Vec<PolyFq>>,
    lookup: HashMap<PolyFq, (usize, usize)>,
}

impl OrbitIndex {
    pub fn new(field: &FieldSpec, max_degree: usize) -> Result<Self> {
        let mut by_degree = vec![Vec::new()];
        let mut lookup = HashMap::new();
        for d in 1..=max_degree.max(1) {
            let list = enumerate_irreducibles(field, d, true)?;
            for (i, f) in list.iter().enumerate() {
                lookup.insert(f.clone(), (d, i));
            }
            by_degree.push(list);
        }
        Ok(OrbitIndex {
            field: field.clone(),
            by_degree,
            lookup,
        })
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn max_degree(&self) -> usize {
        self.by_degree.len() - 1
    }

    pub fn irreducibles(&self, d: usize) -> &[PolyFq] {
        self.by_degree.get(d).map_or(&[], |v| v.as_slice())
    }

    /// (degree, position) of a monic irreducible other than x.
    pub fn index_of(&self, f: &PolyFq) -> Result<(usize, usize)> {
        if let Some(&v) = self.lookup.get(f) {
            return Ok(v);
        }
        let d = f
            .degree()
            .ok_or_else(|| Error::InvalidInput("zero polynomial".into()))?;
        let list = enumerate_irreducibles(&self.field, d, true)?;
        list.iter()
            .position(|g| g == f)
            .map(|i| (d, i))
            .ok_or_else(|| {
                Error::InvalidInput(format!("{} is not irreducible", f.display(&self.field)))
            })
    }

    /// Orbit index of x - 1 among degree-1 orbits.
    pub fn index_of_x_minus_one(&self) -> usize {
        let f = PolyFq::linear(&self.field, Fe::ONE);
        self.index_of(&f).expect("x - 1 is irreducible").1
    }

    /// Factorization of a monic polynomial with nonzero constant term into
    /// (irreducible, multiplicity).
    pub fn factor(&self, poly: &PolyFq) -> Result<Vec<(PolyFq, usize)>> {
        let field = &self.field;
        let mut rem = poly.monic(field);
        if rem.coeffs().first().is_none_or(|c| c.is_zero()) {
            return Err(Error::NotInvertible);
        }
        let mut out = Vec::new();
        for d in 1..=self.max_degree() {
            let deg = rem.degree().unwrap_or(0);
            if deg == 0 {
                break;
            }
            if 2 * d > deg {
                out.push((rem.clone(), 1));
                rem = PolyFq::one();
                break;
            }
            for f in &self.by_degree[d] {
                let mut e = 0;
                loop {
                    let (qt, r) = rem.divrem(f, field)?;
                    if !r.is_zero() {
                        break;
                    }
                    rem = qt;
                    e += 1;
                }
                if e > 0 {
                    out.push((f.clone(), e));
                }
            }
        }
        let deg = rem.degree().unwrap_or(0);
        if deg > 0 {
            if deg < 2 * (self.max_degree() + 1) {
                out.push((rem, 1));
            } else {
                return Err(Error::EnumerationTooLarge(format!(
                    "factor base up to degree {} cannot certify a degree-{deg} cofactor",
                    self.max_degree()
                )));
            }
        }
        Ok(out)
    }
}

/// For each irreducible factor f of the characteristic polynomial, the
/// partition of primary block sizes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassInvariant {
    pub factors: BTreeMap<PolyFq, Partition>,
}

impl ClassInvariant {
    /// Sum of d(f)|lambda(f)|; equals the matrix dimension.
    pub fn weight(&self) -> usize {
        self.factors
            .iter()
            .map(|(f, p)| f.degree().unwrap_or(0) * p.size())
            .sum()
    }

    /// Relabel by orbit positions.
    pub fn to_typed(&self, index: &OrbitIndex) -> Result<TypedPartitionFn> {
        let slots = self
            .factors
            .iter()
            .map(|(f, p)| {
                let (degree, orbit) = index.index_of(f)?;
                Ok(Slot {
                    degree,
                    partition: p.clone(),
                    orbit,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TypedPartitionFn::new(slots)
    }
}

/// Conjugacy class data of an invertible X from the rank sequence
/// r_j = rank f(X)^j: the number of parts >= j of lambda(f) is
/// (r_{j-1} - r_j) / d(f).
pub fn class_invariant(x: &MatFq, index: &OrbitIndex) -> Result<ClassInvariant> {
    let field = index.field();
    if !x.is_square() {
        return Err(Error::DimensionMismatch(
            "class invariant of a non-square matrix".into(),
        ));
    }
    let chi = x.charpoly(field)?;
    let mut factors = BTreeMap::new();
    for (f, mult) in index.factor(&chi)? {
        let d = f.degree().expect("nonconstant");
        let y = x.eval_poly(&f, field)?;
        let mut cur = y.clone();
        let mut prev = x.rows();
        let mut cols = Vec::new();
        loop {
            let r = cur.rank(field);
            let diff = prev - r;
            if diff == 0 {
                break;
            }
            cols.push(diff / d);
            prev = r;
            cur = cur.mul(&y, field)?;
        }
        let part = Partition::new(cols)
            .map_err(|e| Error::InternalError(format!("rank sequence is not monotone: {e}")))?
            .conjugate();
        if part.size() != mult {
            return Err(Error::InternalError(format!(
                "factor {} has multiplicity {mult} but block sizes {part}",
                f.display(field)
            )));
        }
        factors.insert(f, part);
    }
    Ok(ClassInvariant { factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fq_arith::build_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn f2() -> FieldSpec {
        build_field(2, 1).unwrap()
    }

    fn g2_example() -> MatFq {
        MatFq::from_rows(&[
            vec![1, 1, 0, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 1, 0],
            vec![0, 0, 0, 1],
        ])
        .unwrap()
    }

    #[test]
    fn mat_op_examples() {
        let f = f2();
        assert_eq!(MatFq::identity(4).rank(&f), 4);
        let km = g2_example().sub(&MatFq::identity(4), &f).unwrap();
        assert_eq!(km.kernel_dim(&f), 3);
        let f3 = build_field(3, 1).unwrap();
        let j = standard_j(2, &f3);
        assert_eq!(
            j.inverse(&f3).unwrap().mul(&j, &f3).unwrap(),
            MatFq::identity(4)
        );
        assert_eq!(MatFq::zeros(2, 2).inverse(&f3), Err(Error::Singular));
        assert!(MatFq::identity(2).mul(&MatFq::identity(3), &f3).is_err());
    }

    #[test]
    fn kernel_vectors_are_in_kernel() {
        let f = build_field(3, 1).unwrap();
        let a = MatFq::from_rows(&[vec![1, 2, 0, 1], vec![2, 1, 0, 2], vec![0, 0, 1, 1]]).unwrap();
        let ker = a.kernel(&f);
        assert_eq!(ker.len(), a.kernel_dim(&f));
        for v in ker {
            assert!(a.mul_vec(&v, &f).iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn standard_j_examples() {
        let f = f2();
        assert_eq!(
            standard_j(1, &f),
            MatFq::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap()
        );
        let f3 = build_field(3, 1).unwrap();
        let want = MatFq::from_rows(&[
            vec![0, 0, 1, 0],
            vec![0, 0, 0, 1],
            vec![2, 0, 0, 0],
            vec![0, 2, 0, 0],
        ])
        .unwrap();
        assert_eq!(standard_j(2, &f3), want);
        let j = standard_j(2, &f);
        assert_eq!(j.mul(&j, &f).unwrap(), MatFq::identity(4));
        assert!(j.is_alternating(&f));
        // symmetric with zero diagonal is fine in char 2; a nonzero diagonal is not
        let mut bad = j.clone();
        bad.set(0, 0, Fe::ONE);
        assert!(!bad.is_alternating(&f));
    }

    #[test]
    fn form_preservation_examples() {
        let f = f2();
        let j = standard_j(2, &f);
        assert!(is_form_preserving(&MatFq::identity(4), &j, &f).unwrap());
        assert!(!is_form_preserving(&g2_example(), &j, &f).unwrap());
        // I + v w(v, .) with v = e_1
        let v = vec![Fe(1), Fe(0), Fe(0), Fe(0)];
        let w: Vec<Fe> = j.transpose().mul_vec(&v, &f);
        let t = Transvection::new(v, w, &f).unwrap();
        assert!(is_form_preserving(&t.matrix(&f), &j, &f).unwrap());
        assert!(t.preserves(&j, &f));
    }

    #[test]
    fn transvection_census_small() {
        for (p, n) in [(2u64, 1usize), (3, 1), (2, 2), (3, 2)] {
            let f = build_field(p, 1).unwrap();
            let q = f.q() as u64;
            let j = standard_j(n, &f);
            let pairs = transvection_pairs(2 * n, &f);
            let mut seen: HashMap<MatFq, usize> = HashMap::new();
            for t in &pairs {
                *seen.entry(t.matrix(&f)).or_default() += 1;
            }
            assert!(seen.values().all(|&c| c as u64 == q - 1));
            let n2 = 2 * n as u32;
            let total = (q.pow(n2) - 1) * (q.pow(n2 - 1) - 1) / (q - 1);
            assert_eq!(seen.len() as u64, total);
            let symp = seen
                .keys()
                .filter(|m| is_form_preserving(m, &j, &f).unwrap())
                .count() as u64;
            assert_eq!(symp, q.pow(n2) - 1);
            // the algebraic preservation test agrees with the matrix test
            for t in &pairs {
                assert_eq!(
                    t.preserves(&j, &f),
                    is_form_preserving(&t.matrix(&f), &j, &f).unwrap()
                );
            }
        }
    }

    #[test]
    fn transvection_shape() {
        let f = build_field(3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let index = OrbitIndex::new(&f, 4).unwrap();
        for _ in 0..50 {
            let t = sample_transvection(2, &f, &mut rng);
            let m = t.matrix(&f);
            assert_eq!(m.det(&f).unwrap(), Fe::ONE);
            let d = m.sub(&MatFq::identity(4), &f).unwrap();
            assert_eq!(d.rank(&f), 1);
            assert!(d.mul(&d, &f).unwrap().is_zero());
            assert_eq!(
                m.mul(&t.inverse_matrix(&f), &f).unwrap(),
                MatFq::identity(4)
            );
            let ci = class_invariant(&m, &index).unwrap();
            let want: BTreeMap<_, _> = [(
                PolyFq::linear(&f, Fe::ONE),
                Partition::new(vec![2, 1, 1]).unwrap(),
            )]
            .into();
            assert_eq!(ci.factors, want);
        }
    }

    #[test]
    fn congruence_update_matches_matrix_product() {
        let f = build_field(3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let j = standard_j(2, &f);
        for _ in 0..50 {
            let t = sample_transvection(2, &f, &mut rng);
            let inv = t.inverse_matrix(&f);
            let want = inv.transpose().mul(&j, &f).unwrap().mul(&inv, &f).unwrap();
            assert_eq!(t.act_on_gram(&j, &f), want);
        }
    }

    #[test]
    fn nonpreserving_acceptance_rate() {
        let f = f2();
        let j = standard_j(2, &f);
        let pairs = transvection_pairs(4, &f);
        let moving = pairs.iter().filter(|t| !t.preserves(&j, &f)).count();
        assert_eq!((moving, pairs.len()), (90, 105));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = sample_nonpreserving_transvection(&j, &f, &mut rng).unwrap();
            assert!(!is_form_preserving(&t.matrix(&f), &j, &f).unwrap());
        }
        assert_eq!(
            sample_nonpreserving_transvection(&standard_j(1, &f), &f, &mut rng),
            Err(Error::TrivialWalk)
        );
    }

    #[test]
    fn symplectic_samples_preserve_j() {
        for (p, n) in [(2u64, 1usize), (2, 3), (3, 2), (5, 2)] {
            let f = build_field(p, 1).unwrap();
            let j = standard_j(n, &f);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for _ in 0..20 {
                let g = sample_symplectic(n, &f, &mut rng);
                assert!(is_form_preserving(&g, &j, &f).unwrap());
            }
        }
    }

    #[test]
    fn sp2_f2_hits_all_six_uniformly() {
        let f = f2();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts: HashMap<MatFq, u64> = HashMap::new();
        let draws = 60_000u64;
        for _ in 0..draws {
            *counts
                .entry(sample_symplectic(1, &f, &mut rng))
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let expect = draws as f64 / 6.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // 5 degrees of freedom, 99.9% quantile ~ 20.5
        assert!(chi2 < 20.5, "chi2 = {chi2}");
    }

    #[test]
    fn charpoly_cayley_hamilton_and_companion() {
        let f = build_field(5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let m = MatFq::from_vec(5, 5, random_vector(25, &f, &mut rng)).unwrap();
            let chi = m.charpoly(&f).unwrap();
            assert_eq!(chi.degree(), Some(5));
            assert!(m.eval_poly(&chi, &f).unwrap().is_zero());
            assert_eq!(chi.coeffs()[0], {
                let d = m.det(&f).unwrap();
                f.mul(d, f.neg(Fe::ONE)) // (-1)^5 det
            });
        }
        // companion matrix of x^3 + 2x + 3
        let c = MatFq::from_rows(&[vec![0, 0, 2], vec![1, 0, 3], vec![0, 1, 0]]).unwrap();
        assert_eq!(
            c.charpoly(&f).unwrap(),
            PolyFq::new(vec![Fe(3), Fe(2), Fe(0), Fe(1)])
        );
    }

    #[test]
    fn class_invariant_examples() {
        let f = f2();
        let index = OrbitIndex::new(&f, 2).unwrap();
        let x1 = PolyFq::linear(&f, Fe::ONE);
        let ci = class_invariant(&MatFq::identity(4), &index).unwrap();
        assert_eq!(ci.factors[&x1], Partition::column(4));
        let ci = class_invariant(&g2_example(), &index).unwrap();
        assert_eq!(ci.factors[&x1], Partition::new(vec![2, 1, 1]).unwrap());
        // diag(M, M^T) with M a 2x2 Jordan block at 1
        let m = MatFq::from_rows(&[
            vec![1, 1, 0, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 1, 0],
            vec![0, 0, 1, 1],
        ])
        .unwrap();
        let ci = class_invariant(&m, &index).unwrap();
        assert_eq!(ci.factors[&x1], Partition::new(vec![2, 2]).unwrap());
        assert_eq!(ci.weight(), 4);
        assert_eq!(
            class_invariant(&MatFq::zeros(2, 2), &index),
            Err(Error::NotInvertible)
        );
    }

    #[test]
    fn class_invariant_is_conjugation_invariant() {
        for p in [2u64, 3] {
            let f = build_field(p, 1).unwrap();
            let index = OrbitIndex::new(&f, 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7 + p);
            let mut done = 0;
            let mut classes = HashSet::new();
            while done < 500 {
                let x = MatFq::from_vec(4, 4, random_vector(16, &f, &mut rng)).unwrap();
                let g = MatFq::from_vec(4, 4, random_vector(16, &f, &mut rng)).unwrap();
                let (Ok(gi), Ok(ci)) = (g.inverse(&f), class_invariant(&x, &index)) else {
                    continue;
                };
                let y = g.mul(&x, &f).unwrap().mul(&gi, &f).unwrap();
                assert_eq!(class_invariant(&y, &index).unwrap(), ci);
                assert_eq!(ci.weight(), 4);
                classes.insert(ci.to_typed(&index).unwrap());
                done += 1;
            }
            assert!(classes.len() > 5);
        }
    }

    #[test]
    fn gl2_f2_classes_by_brute_force() {
        // all 6 invertible 2x2 matrices over F_2 fall into classes of size 1, 3, 2
        let f = f2();
        let index = OrbitIndex::new(&f, 2).unwrap();
        let mut sizes: HashMap<TypedPartitionFn, usize> = HashMap::new();
        for bits in 0..16u32 {
            let m = MatFq::from_vec(2, 2, (0..4).map(|i| Fe((bits >> i) & 1)).collect()).unwrap();
            if m.det(&f).unwrap().is_zero() {
                continue;
            }
            *sizes
                .entry(
                    class_invariant(&m, &index)
                        .unwrap()
                        .to_typed(&index)
                        .unwrap(),
                )
                .or_default() += 1;
        }
        let mut v: Vec<usize> = sizes.values().copied().collect();
        v.sort_unstable();
        assert_eq!(v, vec![1, 2, 3]);
    }

    #[test]
    fn json_roundtrip() {
        let f = build_field(2, 2).unwrap();
        let m = MatFq::from_vec(2, 2, vec![Fe(0), Fe(1), Fe(2), Fe(3)]).unwrap();
        let js = m.to_json(&f);
        assert_eq!(js.to_string(), "[[[0,0],[1,0]],[[0,1],[1,1]]]");
        assert_eq!(MatFq::from_json(&js, &f).unwrap(), m);
    }
}

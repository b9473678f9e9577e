//! Normal forms for the Toeplitz algebra `A(N)` and its quotient `B(N)`.
//!
//! A unilateral element is a finite sum `sum_{n>=0} U^n a_n(K) + sum_{p>0}
//! a_{-p}(K) (U*)^p`: nonnegative degrees carry the coefficient on the right
//! of the shift power, negative degrees on the left. A bilateral element is
//! `sum_n V^n b_n(L)` with periodic coefficients.
//!
//! Both are instances of [`Graded`], generic over a [`Coefficient`] type.
//! The coefficient type decides which product rule applies.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profinite::{LocallyConstantFunction, SupernaturalNumber};
use crate::scalar::Scalar;
use crate::sequences::EPSequence;

/// Diagonal coefficient ring of a graded element.
///
/// `shift(t)` is `k -> c(k + t)`. For unilateral coefficients a negative
/// shift must vanish below `-t`, which is how `U^p c(K) (U*)^p` picks up its
/// projection cutoff.
pub trait Coefficient: Clone + PartialEq + fmt::Debug {
    /// Selects the unilateral (`U*U = 1`, `UU* = 1 - P_0`) product rule
    /// instead of the bilateral one.
    const UNILATERAL: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: &Scalar) -> Self;
    fn conj(&self) -> Self;
    fn shift(&self, t: i64) -> Self;
}

impl Coefficient for EPSequence {
    const UNILATERAL: bool = true;
    fn zero() -> Self {
        EPSequence::zero()
    }
    fn one() -> Self {
        EPSequence::one()
    }
    fn is_zero(&self) -> bool {
        EPSequence::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        EPSequence::add(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        EPSequence::mul(self, o)
    }
    fn neg(&self) -> Self {
        EPSequence::neg(self)
    }
    fn scale(&self, c: &Scalar) -> Self {
        EPSequence::scale(self, c)
    }
    fn conj(&self) -> Self {
        EPSequence::conj(self)
    }
    fn shift(&self, t: i64) -> Self {
        EPSequence::shift(self, t)
    }
}

impl Coefficient for LocallyConstantFunction {
    const UNILATERAL: bool = false;
    fn zero() -> Self {
        LocallyConstantFunction::zero()
    }
    fn one() -> Self {
        LocallyConstantFunction::one()
    }
    fn is_zero(&self) -> bool {
        LocallyConstantFunction::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        LocallyConstantFunction::add(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        LocallyConstantFunction::mul(self, o)
    }
    fn neg(&self) -> Self {
        LocallyConstantFunction::neg(self)
    }
    fn scale(&self, c: &Scalar) -> Self {
        LocallyConstantFunction::scale(self, c)
    }
    fn conj(&self) -> Self {
        LocallyConstantFunction::conj(self)
    }
    fn shift(&self, t: i64) -> Self {
        LocallyConstantFunction::shift(self, t)
    }
}

/// Product of the monomials at degrees `n` and `m` in the unilateral
/// normal form.
fn unilateral_monomial_product<C: Coefficient>(n: i64, a: &C, m: i64, b: &C) -> C {
    match (n >= 0, m >= 0) {
        // U^n a U^m b = U^{n+m} a(K+m) b
        (true, true) => a.shift(m).mul(b),
        // U^n (ab) (U*)^q
        (true, false) => {
            let q = -m;
            let d = a.mul(b);
            if n >= q {
                d.shift(-q)
            } else {
                d.shift(-n)
            }
        }
        // a (U*)^p U^m b
        (false, true) => {
            let p = -n;
            if m >= p {
                a.shift(m - p).mul(b)
            } else {
                a.mul(&b.shift(p - m))
            }
        }
        // a (U*)^p b (U*)^q = a b(K+p) (U*)^{p+q}
        (false, false) => a.mul(&b.shift(-n)),
    }
}

/// `V^n a V^m b = V^{n+m} a(L+m) b`.
fn bilateral_monomial_product<C: Coefficient>(_n: i64, a: &C, m: i64, b: &C) -> C {
    a.shift(m).mul(b)
}

/// Finite sum of homogeneous terms indexed by degree.
#[derive(Clone, PartialEq)]
pub struct Graded<C: Coefficient> {
    terms: BTreeMap<i64, C>,
}

/// Element of `A(N)` in normal form.
pub type UnilateralElement = Graded<EPSequence>;
/// Element of `B(N)` in normal form.
pub type BilateralElement = Graded<LocallyConstantFunction>;

impl<C: Coefficient> fmt::Debug for Graded<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

impl<C: Coefficient> Default for Graded<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coefficient> Graded<C> {
    pub fn zero() -> Self {
        Graded { terms: BTreeMap::new() }
    }

    pub fn identity() -> Self {
        Self::monomial(0, C::one())
    }

    pub fn monomial(n: i64, c: C) -> Self {
        Self::from_terms([(n, c)])
    }

    pub fn diag(c: C) -> Self {
        Self::monomial(0, c)
    }

    pub fn from_terms<I: IntoIterator<Item = (i64, C)>>(terms: I) -> Self {
        let mut out = Self::zero();
        for (n, c) in terms {
            out.add_term(n, c);
        }
        out
    }

    fn add_term(&mut self, n: i64, c: C) {
        if c.is_zero() {
            return;
        }
        let merged = match self.terms.remove(&n) {
            Some(prev) => prev.add(&c),
            None => c,
        };
        if !merged.is_zero() {
            self.terms.insert(n, merged);
        }
    }

    pub fn terms(&self) -> &BTreeMap<i64, C> {
        &self.terms
    }

    pub fn coefficient(&self, n: i64) -> C {
        self.terms.get(&n).cloned().unwrap_or_else(C::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs_degree(&self) -> u64 {
        self.terms.keys().map(|n| n.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (n, c) in &other.terms {
            out.add_term(*n, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Graded { terms: self.terms.iter().map(|(n, c)| (*n, c.neg())).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        Self::from_terms(self.terms.iter().map(|(n, c)| (*n, c.scale(s))))
    }

    pub fn multiply(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (n, a) in &self.terms {
            for (m, b) in &other.terms {
                let c = if C::UNILATERAL {
                    unilateral_monomial_product(*n, a, *m, b)
                } else {
                    bilateral_monomial_product(*n, a, *m, b)
                };
                out.add_term(n + m, c);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::identity(), |acc, _| acc.multiply(self))
    }

    /// Unilateral: `(U^n a)^* = conj(a) (U*)^n`, so only the degree flips.
    /// Bilateral: `(V^n b(L))^* = V^{-n} conj(b)(L - n)`.
    pub fn adjoint(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(n, c)| {
            let c = if C::UNILATERAL { c.conj() } else { c.conj().shift(-n) };
            (-n, c)
        }))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.multiply(other).sub(&other.multiply(self))
    }

    pub fn spectral_component(&self, n: i64) -> Self {
        match self.terms.get(&n) {
            Some(c) => Self::monomial(n, c.clone()),
            None => Self::zero(),
        }
    }

    pub fn map_coefficients<D: Coefficient>(&self, f: impl Fn(i64, &C) -> D) -> Graded<D> {
        Graded::from_terms(self.terms.iter().map(|(n, c)| (*n, f(*n, c))))
    }
}

pub fn multiply(a: &UnilateralElement, b: &UnilateralElement) -> UnilateralElement {
    a.multiply(b)
}

pub fn adjoint(a: &UnilateralElement) -> UnilateralElement {
    a.adjoint()
}

pub fn commutator(x: &UnilateralElement, a: &UnilateralElement) -> UnilateralElement {
    x.commutator(a)
}

pub fn spectral_component(a: &UnilateralElement, n: i64) -> UnilateralElement {
    a.spectral_component(n)
}

pub fn is_compact(a: &UnilateralElement) -> bool {
    a.is_compact()
}

pub fn quotient(a: &UnilateralElement) -> BilateralElement {
    a.quotient()
}

pub fn bilateral_multiply(b1: &BilateralElement, b2: &BilateralElement) -> BilateralElement {
    b1.multiply(b2)
}

pub fn toeplitz(b: &BilateralElement) -> UnilateralElement {
    b.toeplitz()
}

/// `T(b1 b2) - T(b1) T(b2)`; always compact.
pub fn mult_defect(b1: &BilateralElement, b2: &BilateralElement) -> UnilateralElement {
    b1.multiply(b2).toeplitz().sub(&b1.toeplitz().multiply(&b2.toeplitz()))
}

impl UnilateralElement {
    pub fn u() -> Self {
        Self::monomial(1, EPSequence::one())
    }

    pub fn us() -> Self {
        Self::monomial(-1, EPSequence::one())
    }

    /// Rank-one projection onto `E_0`.
    pub fn p0() -> Self {
        Self::diag(EPSequence::spike(0, Scalar::one()))
    }

    pub fn scalar(c: Scalar) -> Self {
        Self::diag(EPSequence::constant(c))
    }

    /// `U^r P_0 (U*)^s`, the matrix unit `E_r E_s^*`.
    pub fn rank_one(r: u64, s: u64) -> Self {
        Self::u().pow(r as u32).multiply(&Self::p0()).multiply(&Self::us().pow(s as u32))
    }

    /// True iff no coefficient has a periodic part.
    pub fn is_compact(&self) -> bool {
        self.terms.values().all(EPSequence::is_finitely_supported)
    }

    pub fn check_divides(&self, n: &SupernaturalNumber) -> Result<()> {
        self.terms.values().try_for_each(|c| c.check_divides(n))
    }

    /// Image in `A(N)/K = B(N)`: corrections are dropped and negative
    /// degrees are moved to the `V^n b(L)` form via `b(L) V^{-p} =
    /// V^{-p} b(L - p)`.
    pub fn quotient(&self) -> BilateralElement {
        self.map_coefficients(|n, a| {
            let per = a.periodic_part();
            if n < 0 {
                per.shift(n)
            } else {
                per
            }
        })
    }
}

impl BilateralElement {
    pub fn v() -> Self {
        Self::monomial(1, LocallyConstantFunction::one())
    }

    pub fn vi() -> Self {
        Self::monomial(-1, LocallyConstantFunction::one())
    }

    /// `V^n` for any integer `n`.
    pub fn v_pow(n: i64) -> Self {
        Self::monomial(n, LocallyConstantFunction::one())
    }

    pub fn scalar(c: Scalar) -> Self {
        Self::diag(LocallyConstantFunction::constant(c))
    }

    pub fn check_divides(&self, n: &SupernaturalNumber) -> Result<()> {
        self.terms.values().try_for_each(|c| c.check_divides(n))
    }

    /// Toeplitz compression: `T(V^n b) = U^n b(K)` for `n >= 0` and
    /// `T(V^{-p} b) = b(K + p) (U*)^p`.
    pub fn toeplitz(&self) -> UnilateralElement {
        self.map_coefficients(|n, b| {
            let b = if n < 0 { b.shift(-n) } else { b.clone() };
            EPSequence::from_lcf(&b)
        })
    }

    pub fn expectation(&self) -> LocallyConstantFunction {
        self.coefficient(0)
    }
}

/// The matrix units `P_sr = V^s e_N(L) V^{-r}`, indexed `[s][r]`.
pub fn matrix_units(n: &SupernaturalNumber) -> Result<Vec<Vec<BilateralElement>>> {
    let nv = n.require_finite()? as i64;
    let e = BilateralElement::diag(LocallyConstantFunction::divisibility_indicator(nv as u64));
    Ok((0..nv)
        .map(|s| {
            (0..nv)
                .map(|r| BilateralElement::v_pow(s).multiply(&e).multiply(&BilateralElement::v_pow(-r)))
                .collect()
        })
        .collect())
}

// ---- Laurent polynomials and the finite-N matrix picture -------------------

/// Laurent polynomial `sum_k c_k z^k` with only nonzero coefficients stored.
pub type Laurent = BTreeMap<i64, Scalar>;

pub fn laurent_add(a: &Laurent, b: &Laurent) -> Laurent {
    let mut out = a.clone();
    for (k, v) in b {
        laurent_accumulate(&mut out, *k, v.clone());
    }
    out
}

pub fn laurent_mul(a: &Laurent, b: &Laurent) -> Laurent {
    let mut out = Laurent::new();
    for (i, x) in a {
        for (j, y) in b {
            laurent_accumulate(&mut out, i + j, x * y);
        }
    }
    out
}

pub fn laurent_scale(a: &Laurent, c: &Scalar) -> Laurent {
    a.iter().map(|(k, v)| (*k, v * c)).filter(|(_, v)| !v.is_zero()).collect()
}

pub(crate) fn laurent_accumulate(p: &mut Laurent, k: i64, v: Scalar) {
    if v.is_zero() {
        return;
    }
    let sum = match p.remove(&k) {
        Some(prev) => prev + v,
        None => v,
    };
    if !sum.is_zero() {
        p.insert(k, sum);
    }
}

fn laurent_eval(p: &Laurent, t: f64) -> Complex64 {
    p.iter().map(|(k, v)| v.to_complex() * Complex64::from_polar(1.0, *k as f64 * t)).sum()
}

/// `N x N` matrix of Laurent polynomials in `z`; `z` stands for `V^N`.
#[derive(Clone, PartialEq, Debug)]
pub struct MatrixTrigPoly {
    size: usize,
    entries: Vec<Vec<Laurent>>,
}

impl MatrixTrigPoly {
    pub fn zero(size: usize) -> Self {
        MatrixTrigPoly { size, entries: vec![vec![Laurent::new(); size]; size] }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zero(size);
        for i in 0..size {
            m.entries[i][i].insert(0, Scalar::one());
        }
        m
    }

    /// `z^k E_rs`.
    pub fn unit(size: usize, r: usize, s: usize, k: i64) -> Self {
        let mut m = Self::zero(size);
        m.entries[r][s].insert(k, Scalar::one());
        m
    }

    pub fn from_entries(entries: Vec<Vec<Laurent>>) -> Result<Self> {
        let size = entries.len();
        if entries.iter().any(|row| row.len() != size) {
            return Err(Error::SizeMismatch("matrix must be square".into()));
        }
        let entries = entries
            .into_iter()
            .map(|row| {
                row.into_iter().map(|p| p.into_iter().filter(|(_, v)| !v.is_zero()).collect()).collect()
            })
            .collect();
        Ok(MatrixTrigPoly { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, r: usize, s: usize) -> &Laurent {
        &self.entries[r][s]
    }

    pub fn entries(&self) -> &[Vec<Laurent>] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(|p| p.is_empty())
    }

    fn check_size(&self, o: &Self) -> Result<()> {
        if self.size != o.size {
            return Err(Error::SizeMismatch(format!("{} vs {}", self.size, o.size)));
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_size(o)?;
        Ok(self.zip(o, laurent_add))
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(&Scalar::from_int(-1)))
    }

    fn zip(&self, o: &Self, f: impl Fn(&Laurent, &Laurent) -> Laurent) -> Self {
        let entries = (0..self.size)
            .map(|r| (0..self.size).map(|s| f(&self.entries[r][s], &o.entries[r][s])).collect())
            .collect();
        MatrixTrigPoly { size: self.size, entries }
    }

    pub fn map_entries(&self, f: impl Fn(&Laurent) -> Laurent) -> Self {
        MatrixTrigPoly {
            size: self.size,
            entries: self.entries.iter().map(|row| row.iter().map(&f).collect()).collect(),
        }
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        self.map_entries(|p| laurent_scale(p, c))
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.check_size(o)?;
        let n = self.size;
        let mut out = Self::zero(n);
        for r in 0..n {
            for t in 0..n {
                if self.entries[r][t].is_empty() {
                    continue;
                }
                for s in 0..n {
                    if o.entries[t][s].is_empty() {
                        continue;
                    }
                    let prod = laurent_mul(&self.entries[r][t], &o.entries[t][s]);
                    out.entries[r][s] = laurent_add(&out.entries[r][s], &prod);
                }
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, o: &Self) -> Result<Self> {
        self.mul(o)?.sub(&o.mul(self)?)
    }

    /// Conjugate transpose on the circle: `z -> z^{-1}` and conjugated scalars.
    pub fn adjoint(&self) -> Self {
        let n = self.size;
        let entries = (0..n)
            .map(|r| {
                (0..n)
                    .map(|s| self.entries[s][r].iter().map(|(k, v)| (-k, v.conj())).collect())
                    .collect()
            })
            .collect();
        MatrixTrigPoly { size: n, entries }
    }

    /// Numerical value at `z = e^{it}`.
    pub fn eval(&self, t: f64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.size, self.size, |r, s| laurent_eval(&self.entries[r][s], t))
    }
}

/// Monomial `V^n b(L)` contributes `b(j) z^{(j + n - j')/N}` at entry
/// `(j', j)` with `j' = (j + n) mod N`.
pub fn to_matrix_form(b: &BilateralElement, n: &SupernaturalNumber) -> Result<MatrixTrigPoly> {
    let nv = n.require_finite()? as i64;
    b.check_divides(n)?;
    let mut m = MatrixTrigPoly::zero(nv as usize);
    for (deg, coeff) in b.terms() {
        for j in 0..nv {
            let jp = (j + deg).rem_euclid(nv);
            let k = (j + deg - jp) / nv;
            laurent_accumulate(&mut m.entries[jp as usize][j as usize], k, coeff.eval(j).clone());
        }
    }
    Ok(m)
}

pub fn from_matrix_form(m: &MatrixTrigPoly) -> BilateralElement {
    let nv = m.size as i64;
    let mut tables: BTreeMap<i64, Vec<Scalar>> = BTreeMap::new();
    for jp in 0..nv {
        for j in 0..nv {
            for (k, v) in &m.entries[jp as usize][j as usize] {
                let deg = k * nv + jp - j;
                let table = tables.entry(deg).or_insert_with(|| vec![Scalar::zero(); nv as usize]);
                table[j as usize] += v;
            }
        }
    }
    BilateralElement::from_terms(tables.into_iter().map(|(d, t)| (d, LocallyConstantFunction::new(t))))
}

// ---- JSON -----------------------------------------------------------------

impl<C: Coefficient + Serialize> Serialize for Graded<C> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: BTreeMap<String, &C> = self.terms.iter().map(|(n, c)| (n.to_string(), c)).collect();
        let mut m = s.serialize_map(Some(1))?;
        m.serialize_entry("terms", &terms)?;
        m.end()
    }
}

impl<'de, C: Coefficient + Deserialize<'de>> Deserialize<'de> for Graded<C> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(bound = "C: Deserialize<'de>")]
        struct Raw<C> {
            terms: BTreeMap<String, C>,
        }
        let raw = Raw::<C>::deserialize(d)?;
        let mut terms = Vec::new();
        for (k, c) in raw.terms {
            let n: i64 = k.parse().map_err(|_| de::Error::custom(format!("bad degree {k}")))?;
            terms.push((n, c));
        }
        Ok(Self::from_terms(terms))
    }
}

impl Serialize for MatrixTrigPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<Vec<BTreeMap<String, &Scalar>>> = self
            .entries
            .iter()
            .map(|row| row.iter().map(|p| p.iter().map(|(k, v)| (k.to_string(), v)).collect()).collect())
            .collect();
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("size", &self.size)?;
        m.serialize_entry("entries", &entries)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for MatrixTrigPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            size: usize,
            entries: Vec<Vec<BTreeMap<String, Scalar>>>,
        }
        let raw = Raw::deserialize(d)?;
        let mut entries = Vec::with_capacity(raw.entries.len());
        for row in raw.entries {
            let mut out_row = Vec::with_capacity(row.len());
            for p in row {
                let mut poly = Laurent::new();
                for (k, v) in p {
                    let k: i64 = k.parse().map_err(|_| de::Error::custom(format!("bad power {k}")))?;
                    laurent_accumulate(&mut poly, k, v);
                }
                out_row.push(poly);
            }
            entries.push(out_row);
        }
        let m = MatrixTrigPoly::from_entries(entries).map_err(de::Error::custom)?;
        if m.size != raw.size {
            return Err(de::Error::custom("size does not match entries"));
        }
        Ok(m)
    }
}

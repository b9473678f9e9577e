//! Diagonal coefficient classes.
//!
//! * [`EPSequence`]: `a(k) = a_0(k) + a_per(k)` on `k >= 0` with `a_0`
//!   finitely supported and `a_per` periodic.
//! * [`AffineSequence`]: `beta(k) = C (k + 1) + ep(k)`, the coefficient
//!   class of covariant derivations.
//! * [`BilateralEPSequence`] / [`BilateralAffineSequence`]: the same over
//!   `l in Z`, with the bilateral affine convention `eta(l) = C l + ep(l)`.
//!
//! Negative arguments of a unilateral sequence evaluate to zero
//! (`a(-1) = 0`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profinite::{lcm, minimal_period, LocallyConstantFunction, SupernaturalNumber};
use crate::scalar::Scalar;

fn rotate(table: &[Scalar], t: i64) -> Vec<Scalar> {
    let j = table.len() as i64;
    (0..j).map(|r| table[(r + t).rem_euclid(j) as usize].clone()).collect()
}

fn canonical_table(table: Vec<Scalar>) -> Vec<Scalar> {
    assert!(!table.is_empty(), "periodic table must be nonempty");
    let d = minimal_period(&table);
    let mut table = table;
    table.truncate(d);
    table
}

/// Eventually periodic sequence on `k >= 0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct EPSequence {
    correction: BTreeMap<u64, Scalar>,
    table: Vec<Scalar>,
}

impl fmt::Debug for EPSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EP{{corr: {:?}, table: {:?}}}", self.correction, self.table)
    }
}

impl EPSequence {
    pub fn new(correction: BTreeMap<u64, Scalar>, table: Vec<Scalar>) -> Self {
        let table = canonical_table(table);
        let correction = correction.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        EPSequence { correction, table }
    }

    pub fn periodic(table: Vec<Scalar>) -> Self {
        Self::new(BTreeMap::new(), table)
    }

    pub fn from_lcf(f: &LocallyConstantFunction) -> Self {
        Self::periodic(f.values().to_vec())
    }

    pub fn constant(c: Scalar) -> Self {
        Self::periodic(vec![c])
    }

    pub fn zero() -> Self {
        Self::constant(Scalar::zero())
    }

    pub fn one() -> Self {
        Self::constant(Scalar::one())
    }

    /// `v` at `k`, zero elsewhere.
    pub fn spike(k: u64, v: Scalar) -> Self {
        Self::new([(k, v)].into_iter().collect(), vec![Scalar::zero()])
    }

    /// Finitely supported sequence from its values at `0..values.len()`.
    pub fn finite(values: Vec<Scalar>) -> Self {
        Self::new(
            values.into_iter().enumerate().map(|(k, v)| (k as u64, v)).collect(),
            vec![Scalar::zero()],
        )
    }

    /// Indicator of `k >= p`.
    pub fn indicator_from(p: u64) -> Self {
        Self::new((0..p).map(|k| (k, -Scalar::one())).collect(), vec![Scalar::one()])
    }

    /// The sequence `k -> k + 1` is not eventually periodic; this builds its
    /// restriction to `k < len` as a finitely supported sequence.
    pub fn truncated_ramp(len: u64) -> Self {
        Self::new((0..len).map(|k| (k, Scalar::from_int(k as i64 + 1))).collect(), vec![Scalar::zero()])
    }

    pub fn correction(&self) -> &BTreeMap<u64, Scalar> {
        &self.correction
    }

    pub fn table(&self) -> &[Scalar] {
        &self.table
    }

    pub fn period(&self) -> u64 {
        self.table.len() as u64
    }

    pub fn periodic_part(&self) -> LocallyConstantFunction {
        LocallyConstantFunction::new(self.table.clone())
    }

    /// One past the largest corrected index (0 when there is no correction).
    pub fn support_end(&self) -> u64 {
        self.correction.keys().next_back().map(|k| k + 1).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.correction.is_empty() && self.table.len() == 1 && self.table[0].is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.correction.is_empty() && self.table.len() == 1 && self.table[0].is_one()
    }

    /// True when the periodic part vanishes, i.e. the sequence is in `c00`.
    pub fn is_finitely_supported(&self) -> bool {
        self.table.len() == 1 && self.table[0].is_zero()
    }

    pub fn table_value(&self, k: i64) -> &Scalar {
        &self.table[k.rem_euclid(self.table.len() as i64) as usize]
    }

    pub fn eval(&self, k: i64) -> Scalar {
        if k < 0 {
            return Scalar::zero();
        }
        let base = self.table_value(k).clone();
        match self.correction.get(&(k as u64)) {
            Some(c) => base + c,
            None => base,
        }
    }

    pub fn values(&self, len: usize) -> Vec<Scalar> {
        (0..len as i64).map(|k| self.eval(k)).collect()
    }

    pub fn check_divides(&self, n: &SupernaturalNumber) -> Result<()> {
        n.check_period(self.period())
    }

    fn combine(&self, other: &Self, op: impl Fn(&Scalar, &Scalar) -> Scalar) -> Self {
        let j = lcm(self.table.len(), other.table.len());
        let table: Vec<Scalar> = (0..j)
            .map(|r| op(&self.table[r % self.table.len()], &other.table[r % other.table.len()]))
            .collect();
        let keys: BTreeSet<u64> = self.correction.keys().chain(other.correction.keys()).copied().collect();
        let correction = keys
            .into_iter()
            .map(|k| {
                let v = op(&self.eval(k as i64), &other.eval(k as i64)) - &table[k as usize % j];
                (k, v)
            })
            .collect();
        Self::new(correction, table)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a * b)
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn conj(&self) -> Self {
        self.map(Scalar::conj)
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        self.map(|v| v * c)
    }

    fn map(&self, f: impl Fn(&Scalar) -> Scalar) -> Self {
        Self::new(
            self.correction.iter().map(|(k, v)| (*k, f(v))).collect(),
            self.table.iter().map(&f).collect(),
        )
    }

    /// `k -> a(k + n)`, with `a(m) = 0` for `m < 0`.
    ///
    /// For `n < 0` the first `-n` entries are forced to zero through
    /// correction entries, so `shift(-p)` realises `a(K - pI)` including the
    /// cutoff below `p`.
    pub fn shift(&self, n: i64) -> Self {
        let table = rotate(&self.table, n);
        let mut correction: BTreeMap<u64, Scalar> = self
            .correction
            .iter()
            .filter_map(|(k, v)| {
                let nk = *k as i64 - n;
                (nk >= 0).then(|| (nk as u64, v.clone()))
            })
            .collect();
        if n < 0 {
            let j = table.len() as i64;
            for k in 0..(-n) {
                correction.insert(k as u64, -table[(k % j) as usize].clone());
            }
        }
        Self::new(correction, table)
    }

    /// Exact `sup_k |a(k)|^2`.
    pub fn supnorm_sq(&self) -> BigRational {
        let end = self.support_end() + self.period();
        (0..end as i64)
            .map(|k| self.eval(k).norm_sq())
            .max()
            .unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }

    /// Split into the `c00` part and the periodic part.
    pub fn decompose(&self) -> (BTreeMap<u64, Scalar>, LocallyConstantFunction) {
        (self.correction.clone(), self.periodic_part())
    }

    /// Mean of the periodic part over one period.
    pub fn periodic_mean(&self) -> Scalar {
        self.periodic_part().haar_integral()
    }

    /// `(k + 1)^p a(k)` for a finitely supported sequence.
    pub(crate) fn times_ramp_power(&self, p: u32) -> Option<Self> {
        if p == 0 {
            return Some(self.clone());
        }
        if !self.is_finitely_supported() {
            return None;
        }
        Some(Self::new(
            self.correction
                .iter()
                .map(|(k, v)| (*k, v * &Scalar::from_int((*k as i64 + 1).pow(p))))
                .collect(),
            vec![Scalar::zero()],
        ))
    }
}

pub fn ep_add(a: &EPSequence, b: &EPSequence, n: &SupernaturalNumber) -> Result<EPSequence> {
    a.check_divides(n)?;
    b.check_divides(n)?;
    Ok(a.add(b))
}

pub fn ep_mul(a: &EPSequence, b: &EPSequence, n: &SupernaturalNumber) -> Result<EPSequence> {
    a.check_divides(n)?;
    b.check_divides(n)?;
    Ok(a.mul(b))
}

pub fn ep_shift(a: &EPSequence, n: i64) -> EPSequence {
    a.shift(n)
}

pub fn ep_decompose(a: &EPSequence) -> (BTreeMap<u64, Scalar>, LocallyConstantFunction) {
    a.decompose()
}

pub fn ep_supnorm_sq(a: &EPSequence) -> BigRational {
    a.supnorm_sq()
}

/// `beta(k) = C (k + 1) + ep(k)` on `k >= 0`; `beta(-1) = 0`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct AffineSequence {
    pub linear: Scalar,
    pub ep: EPSequence,
}

impl AffineSequence {
    pub fn new(linear: Scalar, ep: EPSequence) -> Self {
        AffineSequence { linear, ep }
    }

    pub fn bounded(ep: EPSequence) -> Self {
        AffineSequence { linear: Scalar::zero(), ep }
    }

    /// `k -> c (k + 1)`.
    pub fn ramp(c: Scalar) -> Self {
        AffineSequence { linear: c, ep: EPSequence::zero() }
    }

    pub fn zero() -> Self {
        Self::bounded(EPSequence::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.linear.is_zero() && self.ep.is_zero()
    }

    pub fn is_bounded(&self) -> bool {
        self.linear.is_zero()
    }

    pub fn eval(&self, k: i64) -> Scalar {
        if k < 0 {
            return Scalar::zero();
        }
        &self.linear * &Scalar::from_int(k + 1) + self.ep.eval(k)
    }

    pub fn add(&self, o: &Self) -> Self {
        AffineSequence { linear: &self.linear + &o.linear, ep: self.ep.add(&o.ep) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        AffineSequence { linear: &self.linear - &o.linear, ep: self.ep.sub(&o.ep) }
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        AffineSequence { linear: &self.linear * c, ep: self.ep.scale(c) }
    }

    pub fn neg(&self) -> Self {
        AffineSequence { linear: -&self.linear, ep: self.ep.neg() }
    }
}

/// `beta(k) = sum_{i=0}^{k} alpha(i)`.
pub fn partial_sums(alpha: &EPSequence) -> AffineSequence {
    let j = alpha.table.len();
    let mean = alpha.periodic_mean();
    // mean-zero periodic part: its running sums are j-periodic
    let mut running = Scalar::zero();
    let mut per_table = Vec::with_capacity(j);
    for v in &alpha.table {
        running += &(v - &mean);
        per_table.push(running.clone());
    }
    // c00 part: running sums are eventually the total
    let total: Scalar = alpha.correction.values().sum();
    let mut correction = BTreeMap::new();
    let mut acc = Scalar::zero();
    for k in 0..alpha.support_end() {
        if let Some(v) = alpha.correction.get(&k) {
            acc += v;
        }
        correction.insert(k, &acc - &total);
    }
    let table = per_table.into_iter().map(|v| v + &total).collect();
    AffineSequence { linear: mean, ep: EPSequence::new(correction, table) }
}

/// `alpha(k) = beta(k) - beta(k - 1)` with `beta(-1) = 0`.
pub fn increment(beta: &AffineSequence) -> EPSequence {
    EPSequence::constant(beta.linear.clone()).add(&beta.ep.sub(&beta.ep.shift(-1)))
}

/// `alpha = alpha_0 + C + alpha_per` with `alpha_per` mean zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanDecomposition {
    pub c00: BTreeMap<u64, Scalar>,
    pub mean: Scalar,
    pub periodic: LocallyConstantFunction,
}

impl MeanDecomposition {
    pub fn c00_sequence(&self) -> EPSequence {
        EPSequence::new(self.c00.clone(), vec![Scalar::zero()])
    }

    pub fn periodic_sequence(&self) -> EPSequence {
        EPSequence::from_lcf(&self.periodic)
    }

    pub fn reassemble(&self) -> EPSequence {
        self.c00_sequence()
            .add(&EPSequence::constant(self.mean.clone()))
            .add(&self.periodic_sequence())
    }
}

/// Mean decomposition over the sequence's own period.
pub(crate) fn split_mean(alpha: &EPSequence) -> MeanDecomposition {
    let mean = alpha.periodic_mean();
    let periodic = LocallyConstantFunction::new(alpha.table.iter().map(|v| v - &mean).collect());
    MeanDecomposition { c00: alpha.correction.clone(), mean, periodic }
}

/// Mean decomposition with the periodic part taken over period `N`.
pub fn mean_decompose(alpha: &EPSequence, n: &SupernaturalNumber) -> Result<MeanDecomposition> {
    let nv = n.require_finite()?;
    alpha.check_divides(n)?;
    let lifted: Vec<Scalar> = alpha.periodic_part().table_at(nv as usize);
    let mean = lifted.iter().sum::<Scalar>() / Scalar::from_int(nv as i64);
    let periodic = LocallyConstantFunction::new(lifted.iter().map(|v| v - &mean).collect());
    Ok(MeanDecomposition { c00: alpha.correction.clone(), mean, periodic })
}

/// Eventually periodic data over `Z`: `b(l) = correction(l) + table[l mod j]`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BilateralEPSequence {
    correction: BTreeMap<i64, Scalar>,
    table: Vec<Scalar>,
}

impl fmt::Debug for BilateralEPSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BEP{{corr: {:?}, table: {:?}}}", self.correction, self.table)
    }
}

impl BilateralEPSequence {
    pub fn new(correction: BTreeMap<i64, Scalar>, table: Vec<Scalar>) -> Self {
        let table = canonical_table(table);
        let correction = correction.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        BilateralEPSequence { correction, table }
    }

    pub fn periodic(table: Vec<Scalar>) -> Self {
        Self::new(BTreeMap::new(), table)
    }

    pub fn from_lcf(f: &LocallyConstantFunction) -> Self {
        Self::periodic(f.values().to_vec())
    }

    pub fn constant(c: Scalar) -> Self {
        Self::periodic(vec![c])
    }

    pub fn zero() -> Self {
        Self::constant(Scalar::zero())
    }

    pub fn correction(&self) -> &BTreeMap<i64, Scalar> {
        &self.correction
    }

    pub fn table(&self) -> &[Scalar] {
        &self.table
    }

    pub fn period(&self) -> u64 {
        self.table.len() as u64
    }

    pub fn is_zero(&self) -> bool {
        self.correction.is_empty() && self.table.len() == 1 && self.table[0].is_zero()
    }

    pub fn is_periodic(&self) -> bool {
        self.correction.is_empty()
    }

    pub fn periodic_part(&self) -> LocallyConstantFunction {
        LocallyConstantFunction::new(self.table.clone())
    }

    /// The periodic function, provided there is no correction.
    pub fn to_lcf(&self) -> Option<LocallyConstantFunction> {
        self.correction.is_empty().then(|| self.periodic_part())
    }

    pub fn eval(&self, l: i64) -> Scalar {
        let base = self.table[l.rem_euclid(self.table.len() as i64) as usize].clone();
        match self.correction.get(&l) {
            Some(c) => base + c,
            None => base,
        }
    }

    fn combine(&self, other: &Self, op: impl Fn(&Scalar, &Scalar) -> Scalar) -> Self {
        let j = lcm(self.table.len(), other.table.len());
        let table: Vec<Scalar> = (0..j)
            .map(|r| op(&self.table[r % self.table.len()], &other.table[r % other.table.len()]))
            .collect();
        let keys: BTreeSet<i64> = self.correction.keys().chain(other.correction.keys()).copied().collect();
        let correction = keys
            .into_iter()
            .map(|l| {
                let v = op(&self.eval(l), &other.eval(l)) - &table[l.rem_euclid(j as i64) as usize];
                (l, v)
            })
            .collect();
        Self::new(correction, table)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a * b)
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        Self::new(
            self.correction.iter().map(|(k, v)| (*k, v * c)).collect(),
            self.table.iter().map(|v| v * c).collect(),
        )
    }

    pub fn conj(&self) -> Self {
        Self::new(
            self.correction.iter().map(|(k, v)| (*k, v.conj())).collect(),
            self.table.iter().map(Scalar::conj).collect(),
        )
    }

    /// `l -> b(l + n)`.
    pub fn shift(&self, n: i64) -> Self {
        Self::new(
            self.correction.iter().map(|(k, v)| (k - n, v.clone())).collect(),
            rotate(&self.table, n),
        )
    }
}

/// `eta(l) = C l + ep(l)` for `l in Z`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BilateralAffineSequence {
    pub linear: Scalar,
    pub ep: BilateralEPSequence,
}

impl BilateralAffineSequence {
    pub fn new(linear: Scalar, ep: BilateralEPSequence) -> Self {
        BilateralAffineSequence { linear, ep }
    }

    pub fn bounded(ep: BilateralEPSequence) -> Self {
        BilateralAffineSequence { linear: Scalar::zero(), ep }
    }

    /// `l -> c l`.
    pub fn label(c: Scalar) -> Self {
        BilateralAffineSequence { linear: c, ep: BilateralEPSequence::zero() }
    }

    pub fn zero() -> Self {
        Self::bounded(BilateralEPSequence::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.linear.is_zero() && self.ep.is_zero()
    }

    pub fn eval(&self, l: i64) -> Scalar {
        &self.linear * &Scalar::from_int(l) + self.ep.eval(l)
    }

    pub fn add(&self, o: &Self) -> Self {
        BilateralAffineSequence { linear: &self.linear + &o.linear, ep: self.ep.add(&o.ep) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        BilateralAffineSequence { linear: &self.linear - &o.linear, ep: self.ep.sub(&o.ep) }
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        BilateralAffineSequence { linear: &self.linear * c, ep: self.ep.scale(c) }
    }
}

/// `gamma(l) = eta(l) - eta(l - 1)`.
pub fn bilateral_increment(eta: &BilateralAffineSequence) -> BilateralEPSequence {
    BilateralEPSequence::constant(eta.linear.clone()).add(&eta.ep.sub(&eta.ep.shift(-1)))
}

/// Solves `eta(l) - eta(l - 1) = gamma(l)` anchored at `eta(-1) = 0`.
///
/// A correction with nonzero total produces a step between the two tails,
/// which is not eventually periodic on `Z`; that case is rejected.
pub fn bilateral_partial_sums(gamma: &BilateralEPSequence) -> Result<BilateralAffineSequence> {
    let total: Scalar = gamma.correction.values().sum();
    if !total.is_zero() {
        return Err(Error::NotRepresentable(format!(
            "bilateral correction with nonzero total {total} has no eventually periodic primitive"
        )));
    }
    let mean = gamma.periodic_part().haar_integral();
    let mut running = Scalar::zero();
    let mut table = Vec::with_capacity(gamma.table.len());
    for v in &gamma.table {
        running += &(v - &mean);
        table.push(&running + &mean);
    }
    // cumulative correction sums, shifted so that the value at l = -1 is 0
    let mut correction = BTreeMap::new();
    if let (Some(&lo), Some(&hi)) = (gamma.correction.keys().next(), gamma.correction.keys().next_back()) {
        let before_minus_one: Scalar = gamma.correction.range(..=-1).map(|(_, v)| v).sum();
        let tail = -&before_minus_one;
        let mut acc = Scalar::zero();
        for l in lo..hi {
            if let Some(v) = gamma.correction.get(&l) {
                acc += v;
            }
            correction.insert(l, &acc - &before_minus_one - &tail);
        }
        table = table.into_iter().map(|v| v + &tail).collect();
    }
    Ok(BilateralAffineSequence { linear: mean, ep: BilateralEPSequence::new(correction, table) })
}

// ---- JSON -----------------------------------------------------------------

fn ser_ep<S: SerializeMap, K: Serialize + Ord + ToString>(
    m: &mut S,
    correction: &BTreeMap<K, Scalar>,
    table: &[Scalar],
) -> std::result::Result<(), S::Error> {
    let corr: BTreeMap<String, &Scalar> = correction.iter().map(|(k, v)| (k.to_string(), v)).collect();
    m.serialize_entry("correction", &corr)?;
    m.serialize_entry("period", &table.len())?;
    m.serialize_entry("table", table)
}

#[derive(Deserialize)]
struct RawEP {
    #[serde(default)]
    correction: BTreeMap<String, Scalar>,
    period: usize,
    table: Vec<Scalar>,
    #[serde(default)]
    linear: Option<Scalar>,
}

impl RawEP {
    fn check(&self) -> std::result::Result<(), String> {
        if self.period == 0 || self.table.len() != self.period {
            return Err("table must have exactly `period` entries".into());
        }
        Ok(())
    }

    fn unilateral(&self) -> std::result::Result<EPSequence, String> {
        self.check()?;
        let mut corr = BTreeMap::new();
        for (k, v) in &self.correction {
            let k: u64 = k.parse().map_err(|_| format!("bad correction index {k}"))?;
            corr.insert(k, v.clone());
        }
        Ok(EPSequence::new(corr, self.table.clone()))
    }

    fn bilateral(&self) -> std::result::Result<BilateralEPSequence, String> {
        self.check()?;
        let mut corr = BTreeMap::new();
        for (k, v) in &self.correction {
            let k: i64 = k.parse().map_err(|_| format!("bad correction index {k}"))?;
            corr.insert(k, v.clone());
        }
        Ok(BilateralEPSequence::new(corr, self.table.clone()))
    }
}

impl Serialize for EPSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(3))?;
        ser_ep(&mut m, &self.correction, &self.table)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for EPSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawEP::deserialize(d)?;
        if raw.linear.as_ref().map(|l| !l.is_zero()).unwrap_or(false) {
            return Err(de::Error::custom("an eventually periodic sequence has no linear part"));
        }
        raw.unilateral().map_err(de::Error::custom)
    }
}

impl Serialize for BilateralEPSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(3))?;
        ser_ep(&mut m, &self.correction, &self.table)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for BilateralEPSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawEP::deserialize(d)?;
        raw.bilateral().map_err(de::Error::custom)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAffine<E> {
    Nested { linear: Scalar, ep: E },
    Flat(RawEP),
}

impl Serialize for AffineSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("linear", &self.linear)?;
        m.serialize_entry("ep", &self.ep)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for AffineSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawAffine::<EPSequence>::deserialize(d)? {
            RawAffine::Nested { linear, ep } => Ok(AffineSequence { linear, ep }),
            RawAffine::Flat(raw) => Ok(AffineSequence {
                linear: raw.linear.clone().unwrap_or_else(Scalar::zero),
                ep: raw.unilateral().map_err(de::Error::custom)?,
            }),
        }
    }
}

impl Serialize for BilateralAffineSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("linear", &self.linear)?;
        m.serialize_entry("ep", &self.ep)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for BilateralAffineSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawAffine::<BilateralEPSequence>::deserialize(d)? {
            RawAffine::Nested { linear, ep } => Ok(BilateralAffineSequence { linear, ep }),
            RawAffine::Flat(raw) => Ok(BilateralAffineSequence {
                linear: raw.linear.clone().unwrap_or_else(Scalar::zero),
                ep: raw.bilateral().map_err(de::Error::custom)?,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: i64) -> Scalar {
        Scalar::from_int(v)
    }

    fn parity() -> EPSequence {
        EPSequence::periodic(vec![s(1), s(-1)])
    }

    #[test]
    fn mul_identities() {
        let a = EPSequence::new([(1, s(3))].into_iter().collect(), vec![s(2), s(5), s(7)]);
        assert!(a.mul(&EPSequence::zero()).is_zero());
        assert_eq!(a.mul(&EPSequence::one()), a);
        let spike = EPSequence::spike(0, s(1));
        assert_eq!(spike.mul(&parity()), EPSequence::spike(0, parity().table()[0].clone()));
    }

    #[test]
    fn mul_matches_pointwise_evaluation() {
        let n = SupernaturalNumber::finite(12);
        let a = EPSequence::new([(0, s(1)), (4, s(-2))].into_iter().collect(), vec![s(1), s(3)]);
        let b = EPSequence::new([(2, s(5))].into_iter().collect(), vec![s(2), s(0), s(-1)]);
        let p = ep_mul(&a, &b, &n).unwrap();
        let q = ep_add(&a, &b, &n).unwrap();
        for k in 0..24 {
            assert_eq!(p.eval(k), a.eval(k) * b.eval(k));
            assert_eq!(q.eval(k), a.eval(k) + b.eval(k));
        }
        assert!(ep_mul(&a, &b, &SupernaturalNumber::finite(4)).is_err());
    }

    #[test]
    fn shift_examples() {
        let a = EPSequence::new([(3, s(4))].into_iter().collect(), vec![s(1), s(2), s(3)]);
        assert_eq!(ep_shift(&a, 0), a);
        assert_eq!(ep_shift(&parity(), 2), parity());
        let s1 = ep_shift(&EPSequence::one(), -1);
        assert_eq!(s1, EPSequence::new([(0, s(-1))].into_iter().collect(), vec![s(1)]));
        assert_eq!(s1.values(4), vec![s(0), s(1), s(1), s(1)]);
        for n in -5i64..6 {
            let sh = a.shift(n);
            for k in 0..20 {
                let expected = if k + n < 0 { s(0) } else { a.eval(k + n) };
                assert_eq!(sh.eval(k), expected, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn decompose_examples() {
        let (c, p) = ep_decompose(&parity());
        assert!(c.is_empty());
        assert_eq!(p.values(), parity().table());
        let (c, p) = ep_decompose(&EPSequence::spike(3, s(2)));
        assert_eq!(c.len(), 1);
        assert!(p.is_zero());
        let mixed = EPSequence::new([(1, s(5)), (2, s(-1))].into_iter().collect(), vec![s(1), s(2), s(3)]);
        let (c, p) = ep_decompose(&mixed);
        let end = mixed.support_end() + 2 * mixed.period();
        for k in 0..end as i64 {
            let c_k = c.get(&(k as u64)).cloned().unwrap_or_else(Scalar::zero);
            assert_eq!(mixed.eval(k), c_k + p.eval(k));
        }
    }

    #[test]
    fn supnorm_examples() {
        let r = |n: i64| BigRational::from_integer(n.into());
        assert_eq!(ep_supnorm_sq(&EPSequence::constant(Scalar::gaussian(3, 1, 4, 1))), r(25));
        assert_eq!(ep_supnorm_sq(&parity()), r(1));
        let a = EPSequence::new([(0, s(3))].into_iter().collect(), vec![s(1)]);
        // brute force over candidate indices
        let brute = (0..10).map(|k| a.eval(k).norm_sq()).max().unwrap();
        assert_eq!(ep_supnorm_sq(&a), brute);
        assert_eq!(brute, r(16));
    }

    #[test]
    fn partial_sum_examples() {
        let b = partial_sums(&EPSequence::one());
        assert_eq!(b, AffineSequence::ramp(s(1)));
        let b = partial_sums(&parity());
        assert!(b.linear.is_zero());
        let mut acc = s(0);
        for k in 0..=10 {
            acc += &parity().eval(k);
            assert_eq!(b.eval(k), acc);
        }
        assert_eq!(b.ep, EPSequence::periodic(vec![s(1), s(0)]));
        let spike = EPSequence::spike(2, s(1));
        let b = partial_sums(&spike);
        assert!(b.linear.is_zero());
        assert_eq!(b.ep.values(6), vec![s(0), s(0), s(1), s(1), s(1), s(1)]);
        assert_eq!(b.ep.table(), &[s(1)]);
    }

    #[test]
    fn increment_examples() {
        assert_eq!(increment(&AffineSequence::ramp(s(1))), EPSequence::one());
        let c = AffineSequence::bounded(EPSequence::constant(s(7)));
        assert_eq!(increment(&c).values(4), vec![s(7), s(0), s(0), s(0)]);
        let alpha = EPSequence::new([(0, s(2)), (3, s(-5))].into_iter().collect(), vec![s(1), s(4), s(-2)]);
        assert_eq!(increment(&partial_sums(&alpha)), alpha);
    }

    #[test]
    fn mean_decompose_examples() {
        let n2 = SupernaturalNumber::finite(2);
        let d = mean_decompose(&EPSequence::constant(s(3)), &n2).unwrap();
        assert!(d.c00.is_empty() && d.mean == s(3) && d.periodic.is_zero());
        let d = mean_decompose(&parity(), &n2).unwrap();
        assert_eq!(d.mean, s(0));
        assert_eq!(d.periodic.values(), parity().table());
        let d = mean_decompose(&EPSequence::periodic(vec![s(2), s(0)]), &n2).unwrap();
        assert_eq!(d.mean, s(1));
        assert_eq!(d.periodic.values(), &[s(1), s(-1)]);
        let over_n: Scalar = d.periodic.table_at(2).iter().sum();
        assert!(over_n.is_zero());
        assert_eq!(d.reassemble(), EPSequence::periodic(vec![s(2), s(0)]));
        assert!(matches!(
            mean_decompose(&parity(), &SupernaturalNumber::prime_power_infinite(2).unwrap()),
            Err(Error::NotFinite(_))
        ));
    }

    #[test]
    fn bilateral_ops() {
        let b = BilateralEPSequence::new([(-2, s(1))].into_iter().collect(), vec![s(1), s(2), s(3)]);
        for n in -4..5 {
            let sh = b.shift(n);
            for l in -10..10 {
                assert_eq!(sh.eval(l), b.eval(l + n));
            }
        }
        let eta = BilateralAffineSequence::new(s(2), BilateralEPSequence::periodic(vec![s(1), s(-1)]));
        let gamma = bilateral_increment(&eta);
        for l in -6..6 {
            assert_eq!(gamma.eval(l), eta.eval(l) - eta.eval(l - 1));
        }
        let back = bilateral_partial_sums(&gamma).unwrap();
        for l in -6..6 {
            assert_eq!(bilateral_increment(&back).eval(l), gamma.eval(l));
        }
        assert_eq!(back.eval(-1), s(0));
    }

    #[test]
    fn bilateral_partial_sums_of_mean_zero_are_periodic() {
        let g = BilateralEPSequence::periodic(vec![s(1), s(2), s(-3)]);
        let eta = bilateral_partial_sums(&g).unwrap();
        assert!(eta.linear.is_zero());
        assert!(eta.ep.is_periodic());
        assert_eq!(eta.ep.period(), 3);
        for l in -9..9 {
            assert_eq!(eta.eval(l) - eta.eval(l - 1), g.eval(l));
        }
        let step = BilateralEPSequence::new([(0, s(1))].into_iter().collect(), vec![s(0)]);
        assert!(bilateral_partial_sums(&step).is_err());
        let dipole = BilateralEPSequence::new([(-1, s(1)), (2, s(-1))].into_iter().collect(), vec![s(0)]);
        let eta = bilateral_partial_sums(&dipole).unwrap();
        for l in -6..6 {
            assert_eq!(eta.eval(l) - eta.eval(l - 1), dipole.eval(l));
        }
        assert_eq!(eta.eval(-1), s(0));
    }

    #[test]
    fn json_forms() {
        let a = EPSequence::new([(2, s(3))].into_iter().collect(), vec![s(1), s(-1)]);
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(v["period"], 2);
        assert_eq!(v["correction"]["2"], serde_json::json!([3, 1, 0, 1]));
        assert_eq!(serde_json::from_value::<EPSequence>(v.clone()).unwrap(), a);
        let mut flat = v.clone();
        flat["linear"] = serde_json::json!([1, 1, 0, 1]);
        let beta: AffineSequence = serde_json::from_value(flat).unwrap();
        assert_eq!(beta, AffineSequence::new(s(1), a.clone()));
        let nested = serde_json::to_value(&beta).unwrap();
        assert_eq!(serde_json::from_value::<AffineSequence>(nested).unwrap(), beta);
    }
}

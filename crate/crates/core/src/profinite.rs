//! Supernatural numbers, divisor chains, truncated elements of `Z/NZ` and
//! locally constant functions on it.
//!
//! An infinite `N` is never materialised. Every computation runs on an
//! explicit [`DivisorChain`] `j_1 | j_2 | ... | j_m | N`, and a locally
//! constant function is stored as a value table on `Z/jZ` for a single
//! `j | N`, always at its minimal period.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Exponent {
    Finite(u32),
    Infinite,
}

impl Exponent {
    fn dominates(self, e: u32) -> bool {
        match self {
            Exponent::Infinite => true,
            Exponent::Finite(k) => k >= e,
        }
    }
}

/// `N = prod p^{e_p}` with finitely many primes, each exponent in `1..=inf`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SupernaturalNumber {
    factors: BTreeMap<u64, Exponent>,
}

pub(crate) fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Prime factorisation by trial division, ascending primes.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

impl SupernaturalNumber {
    /// `N = 1`.
    pub fn one() -> Self {
        SupernaturalNumber::default()
    }

    pub fn from_factors<I>(factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, Exponent)>,
    {
        let mut map = BTreeMap::new();
        for (p, e) in factors {
            if !is_prime(p) {
                return Err(Error::InvalidSupernatural(format!("{p} is not prime")));
            }
            if e == Exponent::Finite(0) {
                continue;
            }
            if map.insert(p, e).is_some() {
                return Err(Error::InvalidSupernatural(format!("prime {p} listed twice")));
            }
        }
        Ok(SupernaturalNumber { factors: map })
    }

    /// A finite supernatural number, i.e. an ordinary positive integer.
    pub fn finite(n: u64) -> Self {
        assert!(n >= 1, "supernatural numbers are positive");
        SupernaturalNumber {
            factors: factorize(n).into_iter().map(|(p, e)| (p, Exponent::Finite(e))).collect(),
        }
    }

    /// `p^inf`.
    pub fn prime_power_infinite(p: u64) -> Result<Self> {
        Self::from_factors([(p, Exponent::Infinite)])
    }

    pub fn factors(&self) -> &BTreeMap<u64, Exponent> {
        &self.factors
    }

    pub fn is_finite(&self) -> bool {
        self.factors.values().all(|e| matches!(e, Exponent::Finite(_)))
    }

    /// The integer value for finite `N`.
    pub fn value(&self) -> Option<u64> {
        let mut v: u64 = 1;
        for (p, e) in &self.factors {
            match e {
                Exponent::Finite(k) => v = v.checked_mul(p.checked_pow(*k)?)?,
                Exponent::Infinite => return None,
            }
        }
        Some(v)
    }

    pub fn require_finite(&self) -> Result<u64> {
        self.value().ok_or_else(|| Error::NotFinite(self.to_string()))
    }

    /// Whether the positive integer `j` divides `N`.
    pub fn divides(&self, j: u64) -> bool {
        assert!(j >= 1, "divisors are positive");
        factorize(j).into_iter().all(|(p, e)| {
            self.factors.get(&p).map(|x| x.dominates(e)).unwrap_or(false)
        })
    }

    /// Whether `N` divides the integer `n` (every integer is divisible by 1;
    /// 0 is divisible by every finite `N`). Infinite `N` divides only 0.
    pub fn divides_integer(&self, n: i64) -> bool {
        match self.value() {
            Some(v) => n.rem_euclid(v as i64) == 0,
            None => n == 0,
        }
    }

    pub fn check_period(&self, period: u64) -> Result<()> {
        if self.divides(period) {
            Ok(())
        } else {
            Err(Error::PeriodNotDivisor { period, n: self.to_string() })
        }
    }

    /// The prime-power factors `p^{e_p}` of a finite `N` (CRT decomposition).
    pub fn prime_power_parts(&self) -> Result<Vec<u64>> {
        self.require_finite()?;
        Ok(self
            .factors
            .iter()
            .map(|(p, e)| match e {
                Exponent::Finite(k) => p.pow(*k),
                Exponent::Infinite => unreachable!(),
            })
            .collect())
    }
}

impl fmt::Display for SupernaturalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        if let Some(v) = self.value() {
            return write!(f, "{v}");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|(p, e)| match e {
                Exponent::Finite(1) => p.to_string(),
                Exponent::Finite(k) => format!("{p}^{k}"),
                Exponent::Infinite => format!("{p}^inf"),
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl Serialize for SupernaturalNumber {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        struct Factors<'a>(&'a BTreeMap<u64, Exponent>);
        impl Serialize for Factors<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(self.0.len()))?;
                for (p, e) in self.0 {
                    match e {
                        Exponent::Finite(k) => m.serialize_entry(&p.to_string(), k)?,
                        Exponent::Infinite => m.serialize_entry(&p.to_string(), "inf")?,
                    }
                }
                m.end()
            }
        }
        let mut m = s.serialize_map(Some(1))?;
        m.serialize_entry("factors", &Factors(&self.factors))?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for SupernaturalNumber {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum RawExp {
            Int(u32),
            Word(String),
        }
        #[derive(Deserialize)]
        struct Raw {
            factors: BTreeMap<String, RawExp>,
        }
        let raw = Raw::deserialize(d)?;
        let mut out = Vec::new();
        for (k, v) in raw.factors {
            let p: u64 = k.parse().map_err(|_| de::Error::custom(format!("bad prime key {k}")))?;
            let e = match v {
                RawExp::Int(x) => Exponent::Finite(x),
                RawExp::Word(w) if w == "inf" || w == "infinity" => Exponent::Infinite,
                RawExp::Word(w) => return Err(de::Error::custom(format!("bad exponent {w}"))),
            };
            out.push((p, e));
        }
        SupernaturalNumber::from_factors(out).map_err(de::Error::custom)
    }
}

pub fn divides(j: u64, n: &SupernaturalNumber) -> bool {
    n.divides(j)
}

/// All `j <= bound` dividing `N`, ascending.
pub fn finite_divisors(n: &SupernaturalNumber, bound: u64) -> Vec<u64> {
    (1..=bound).filter(|&j| n.divides(j)).collect()
}

/// An ascending chain `j_1 | j_2 | ... | j_m` of finite divisors of `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DivisorChain {
    levels: Vec<u64>,
}

impl DivisorChain {
    pub fn new(levels: Vec<u64>, n: &SupernaturalNumber) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidChain("empty chain".into()));
        }
        for &j in &levels {
            if j == 0 {
                return Err(Error::InvalidChain("levels must be positive".into()));
            }
            if !n.divides(j) {
                return Err(Error::InvalidChain(format!("{j} does not divide N = {n}")));
            }
        }
        for w in levels.windows(2) {
            if w[1] % w[0] != 0 {
                return Err(Error::InvalidChain(format!("{} does not divide {}", w[0], w[1])));
            }
        }
        Ok(DivisorChain { levels })
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }

    pub fn top(&self) -> u64 {
        *self.levels.last().expect("chain is nonempty")
    }
}

/// A point of `Z/NZ` seen through the levels of a chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ProfiniteInteger {
    chain: DivisorChain,
    residues: Vec<u64>,
}

impl ProfiniteInteger {
    pub fn new(chain: DivisorChain, residues: Vec<u64>) -> Result<Self> {
        if residues.len() != chain.levels.len() {
            return Err(Error::InvalidChain("one residue per level required".into()));
        }
        for (x, j) in residues.iter().zip(&chain.levels) {
            if x >= j {
                return Err(Error::InvalidChain(format!("residue {x} out of range mod {j}")));
            }
        }
        for i in 1..residues.len() {
            if residues[i] % chain.levels[i - 1] != residues[i - 1] {
                return Err(Error::InvalidChain(format!(
                    "incompatible residues at levels {} and {}",
                    chain.levels[i - 1],
                    chain.levels[i]
                )));
            }
        }
        Ok(ProfiniteInteger { chain, residues })
    }

    pub fn chain(&self) -> &DivisorChain {
        &self.chain
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    fn combine(&self, other: &Self, op: impl Fn(u64, u64, u64) -> u64) -> Result<Self> {
        if self.chain != other.chain {
            return Err(Error::InvalidChain("operands live on different chains".into()));
        }
        let residues = self
            .residues
            .iter()
            .zip(&other.residues)
            .zip(&self.chain.levels)
            .map(|((a, b), j)| op(*a, *b, *j))
            .collect();
        Ok(ProfiniteInteger { chain: self.chain.clone(), residues })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b, j| ((a as u128 + b as u128) % j as u128) as u64)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b, j| ((a as u128 * b as u128) % j as u128) as u64)
    }
}

/// The diagonal embedding `Z -> Z/NZ`, truncated to `chain`.
pub fn q_map(x: i64, chain: &DivisorChain) -> ProfiniteInteger {
    let residues = chain.levels.iter().map(|&j| x.rem_euclid(j as i64) as u64).collect();
    ProfiniteInteger { chain: chain.clone(), residues }
}

/// Chinese remaindering for pairwise coprime moduli: returns `(x, prod m)`
/// with `x ≡ r_i mod m_i`, or `None` if two moduli share a factor.
pub fn crt_reconstruct(parts: &[(u64, u64)]) -> Option<(u64, u64)> {
    let mut x: u128 = 0;
    let mut m: u128 = 1;
    for &(mi, ri) in parts {
        let (mi, ri) = (mi as u128, (ri % mi) as u128);
        if m.gcd(&mi) != 1 {
            return None;
        }
        // x + m*t ≡ ri (mod mi)
        let inv = mod_inverse((m % mi) as i128, mi as i128)? as u128;
        let t = ((ri + mi - x % mi) % mi) * inv % mi;
        x += m * t;
        m *= mi;
        x %= m;
    }
    Some((x as u64, m as u64))
}

fn mod_inverse(a: i128, m: i128) -> Option<i128> {
    if m == 1 {
        return Some(0);
    }
    let g = a.extended_gcd(&m);
    if g.gcd != 1 {
        return None;
    }
    Some(g.x.rem_euclid(m))
}

/// Smallest `d | len` such that `values` is `d`-periodic.
pub(crate) fn minimal_period(values: &[Scalar]) -> usize {
    let j = values.len();
    (1..=j)
        .filter(|d| j % d == 0)
        .find(|&d| (d..j).all(|r| values[r] == values[r % d]))
        .unwrap_or(j)
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a.lcm(&b)
}

/// A locally constant function on `Z/NZ`, pulled back from `Z/jZ`.
/// `values[r]` is the value on the residue class `r mod j`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LocallyConstantFunction {
    values: Vec<Scalar>,
}

impl fmt::Debug for LocallyConstantFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lcf{:?}", self.values)
    }
}

impl LocallyConstantFunction {
    /// Canonicalising constructor; no divisibility check against any `N`.
    pub fn new(values: Vec<Scalar>) -> Self {
        assert!(!values.is_empty(), "a value table needs at least one entry");
        let d = minimal_period(&values);
        let mut values = values;
        values.truncate(d);
        LocallyConstantFunction { values }
    }

    pub fn constant(c: Scalar) -> Self {
        LocallyConstantFunction { values: vec![c] }
    }

    pub fn zero() -> Self {
        Self::constant(Scalar::zero())
    }

    pub fn one() -> Self {
        Self::constant(Scalar::one())
    }

    /// `e_j`: the indicator of `j | l`.
    pub fn divisibility_indicator(j: u64) -> Self {
        let mut v = vec![Scalar::zero(); j as usize];
        v[0] = Scalar::one();
        Self::new(v)
    }

    pub fn period(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.len() == 1 && self.values[0].is_zero()
    }

    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }

    /// Value at the residue class of the integer `k`.
    pub fn eval(&self, k: i64) -> &Scalar {
        &self.values[k.rem_euclid(self.values.len() as i64) as usize]
    }

    /// Value table lifted to period `j` (a multiple of the period).
    pub fn table_at(&self, j: usize) -> Vec<Scalar> {
        assert!(j % self.values.len() == 0, "lift period must be a multiple");
        (0..j).map(|r| self.values[r % self.values.len()].clone()).collect()
    }

    pub fn check_divides(&self, n: &SupernaturalNumber) -> Result<()> {
        n.check_period(self.period())
    }

    /// `x -> f(x + t)`.
    pub fn shift(&self, t: i64) -> Self {
        let j = self.values.len() as i64;
        LocallyConstantFunction {
            values: (0..j).map(|r| self.values[(r + t).rem_euclid(j) as usize].clone()).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        LocallyConstantFunction { values: self.values.iter().map(Scalar::conj).collect() }
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        Self::new(self.values.iter().map(|v| v * c).collect())
    }

    pub fn neg(&self) -> Self {
        LocallyConstantFunction { values: self.values.iter().map(|v| -v).collect() }
    }

    fn pointwise(&self, other: &Self, op: impl Fn(&Scalar, &Scalar) -> Scalar) -> Self {
        let j = lcm(self.values.len(), other.values.len());
        Self::new(
            (0..j)
                .map(|r| op(&self.values[r % self.values.len()], &other.values[r % other.values.len()]))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.pointwise(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.pointwise(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.pointwise(other, |a, b| a * b)
    }

    /// Normalised Haar integral: the average over one period.
    pub fn haar_integral(&self) -> Scalar {
        let s: Scalar = self.values.iter().sum();
        &s / &Scalar::from_int(self.values.len() as i64)
    }

    /// The `j`-periodic sequence `k -> f(q(k))`, first `len` terms.
    pub fn pullback_sequence(&self, len: usize) -> Vec<Scalar> {
        (0..len).map(|k| self.values[k % self.values.len()].clone()).collect()
    }
}

/// Builds the unique locally constant function whose pullback is the
/// `j`-periodic sequence with one period `values`, where `j = values.len()`.
pub fn lcf_from_periodic(values: Vec<Scalar>, n: &SupernaturalNumber) -> Result<LocallyConstantFunction> {
    if values.is_empty() {
        return Err(Error::InvalidSequence("empty value table".into()));
    }
    n.check_period(values.len() as u64)?;
    Ok(LocallyConstantFunction::new(values))
}

pub fn pullback_sequence(f: &LocallyConstantFunction, len: usize) -> Vec<Scalar> {
    f.pullback_sequence(len)
}

pub fn haar_integral(f: &LocallyConstantFunction) -> Scalar {
    f.haar_integral()
}

pub fn lcf_shift(f: &LocallyConstantFunction, t: i64) -> LocallyConstantFunction {
    f.shift(t)
}

pub fn lcf_add(
    f: &LocallyConstantFunction,
    g: &LocallyConstantFunction,
    n: &SupernaturalNumber,
) -> Result<LocallyConstantFunction> {
    n.check_period(lcm(f.values.len(), g.values.len()) as u64)?;
    Ok(f.add(g))
}

pub fn lcf_mul(
    f: &LocallyConstantFunction,
    g: &LocallyConstantFunction,
    n: &SupernaturalNumber,
) -> Result<LocallyConstantFunction> {
    n.check_period(lcm(f.values.len(), g.values.len()) as u64)?;
    Ok(f.mul(g))
}

impl Serialize for LocallyConstantFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(2))?;
        m.serialize_entry("period", &self.values.len())?;
        m.serialize_entry("values", &self.values)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for LocallyConstantFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            period: usize,
            values: Vec<Scalar>,
        }
        let raw = Raw::deserialize(d)?;
        if raw.period == 0 || raw.values.len() != raw.period {
            return Err(de::Error::custom("values must have exactly `period` entries"));
        }
        Ok(LocallyConstantFunction::new(raw.values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: i64) -> Scalar {
        Scalar::from_int(v)
    }

    fn two_inf() -> SupernaturalNumber {
        SupernaturalNumber::prime_power_infinite(2).unwrap()
    }

    #[test]
    fn divisibility() {
        let n12 = SupernaturalNumber::finite(12);
        assert!(divides(1, &two_inf()));
        assert!(divides(1, &n12));
        assert!(divides(8, &two_inf()));
        assert!(divides(6, &n12));
        assert!(!divides(8, &n12));
        assert!(!divides(3, &two_inf()));
    }

    #[test]
    fn divisor_lists() {
        assert_eq!(finite_divisors(&SupernaturalNumber::finite(12), 12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(finite_divisors(&two_inf(), 10), vec![1, 2, 4, 8]);
        assert_eq!(finite_divisors(&SupernaturalNumber::one(), 100), vec![1]);
    }

    #[test]
    fn supernatural_basics() {
        let n = SupernaturalNumber::from_factors([(2, Exponent::Infinite), (3, Exponent::Finite(1))]).unwrap();
        assert!(!n.is_finite());
        assert_eq!(n.to_string(), "2^inf*3");
        assert!(n.divides(24));
        assert!(!n.divides(9));
        assert_eq!(SupernaturalNumber::finite(12).value(), Some(12));
        assert!(SupernaturalNumber::from_factors([(4, Exponent::Finite(1))]).is_err());
        assert!(SupernaturalNumber::finite(4).divides_integer(-8));
        assert!(two_inf().divides_integer(0));
        assert!(!two_inf().divides_integer(2));
    }

    #[test]
    fn supernatural_json() {
        let n = SupernaturalNumber::from_factors([(2, Exponent::Finite(3)), (5, Exponent::Infinite)]).unwrap();
        let v = serde_json::to_value(&n).unwrap();
        assert_eq!(v, serde_json::json!({"factors": {"2": 3, "5": "inf"}}));
        let back: SupernaturalNumber = serde_json::from_value(v).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn chain_validation() {
        let n = SupernaturalNumber::finite(12);
        assert!(DivisorChain::new(vec![2, 4, 12], &n).is_ok());
        assert!(DivisorChain::new(vec![2, 3], &n).is_err());
        assert!(DivisorChain::new(vec![8], &n).is_err());
        assert!(DivisorChain::new(vec![], &n).is_err());
    }

    #[test]
    fn q_map_examples() {
        let chain = DivisorChain::new(vec![2, 4, 8], &two_inf()).unwrap();
        assert_eq!(q_map(7, &chain).residues(), &[1, 3, 7]);
        assert_eq!(q_map(0, &chain).residues(), &[0, 0, 0]);
        assert_eq!(q_map(-1, &chain).residues(), &[1, 3, 7]);
        assert!(ProfiniteInteger::new(chain.clone(), vec![1, 2, 7]).is_err());
    }

    #[test]
    fn crt_through_coprime_chains() {
        let n = SupernaturalNumber::finite(12);
        let c3 = DivisorChain::new(vec![3, 12], &n).unwrap();
        let c4 = DivisorChain::new(vec![4, 12], &n).unwrap();
        for x in -30i64..30 {
            let a = q_map(x, &c3);
            let b = q_map(x, &c4);
            assert_eq!(a.residues()[1], b.residues()[1]);
            assert_eq!(a.residues()[1] as i64, x.rem_euclid(12));
            let (y, m) = crt_reconstruct(&[(3, a.residues()[0]), (4, b.residues()[0])]).unwrap();
            assert_eq!(m, 12);
            assert_eq!(y as i64, x.rem_euclid(12));
        }
        assert!(crt_reconstruct(&[(4, 1), (6, 1)]).is_none());
        assert_eq!(n.prime_power_parts().unwrap(), vec![4, 3]);
    }

    #[test]
    fn lcf_examples() {
        let c = LocallyConstantFunction::constant(s(5));
        assert_eq!(c.pullback_sequence(4), vec![s(5); 4]);
        let parity = lcf_from_periodic(vec![s(1), s(-1)], &two_inf()).unwrap();
        assert_eq!(parity.pullback_sequence(4), vec![s(1), s(-1), s(1), s(-1)]);
        let flat = lcf_from_periodic(vec![s(1); 4], &SupernaturalNumber::finite(4)).unwrap();
        assert_eq!(flat.period(), 1);
        assert!(matches!(
            lcf_from_periodic(vec![s(1), s(2), s(3)], &two_inf()),
            Err(Error::PeriodNotDivisor { .. })
        ));
    }

    #[test]
    fn haar_examples() {
        assert_eq!(LocallyConstantFunction::one().haar_integral(), s(1));
        let parity = LocallyConstantFunction::new(vec![s(1), s(-1)]);
        assert_eq!(parity.haar_integral(), s(0));
        for j in 1..=8u64 {
            let e = LocallyConstantFunction::divisibility_indicator(j);
            // brute-force average over one period of Z/jZ
            let avg: Scalar = (0..j as i64).map(|r| e.eval(r).clone()).sum::<Scalar>() / Scalar::from_int(j as i64);
            assert_eq!(e.haar_integral(), avg);
            assert_eq!(e.haar_integral(), Scalar::ratio(1, j as i64));
        }
    }

    #[test]
    fn shift_examples() {
        let f = LocallyConstantFunction::new(vec![s(1), s(2), s(3)]);
        assert_eq!(f.shift(3), f);
        assert_eq!(f.shift(-2), f.shift(1));
        let ab = LocallyConstantFunction::new(vec![s(7), s(9)]);
        assert_eq!(ab.shift(1).values(), &[s(9), s(7)]);
        assert_eq!(LocallyConstantFunction::constant(s(4)).shift(17), LocallyConstantFunction::constant(s(4)));
    }

    #[test]
    fn ring_ops() {
        let n = SupernaturalNumber::finite(12);
        let parity = LocallyConstantFunction::new(vec![s(1), s(-1)]);
        assert_eq!(lcf_mul(&parity, &LocallyConstantFunction::one(), &n).unwrap(), parity);
        assert_eq!(lcf_mul(&parity, &parity, &n).unwrap(), LocallyConstantFunction::one());
        let f = LocallyConstantFunction::new(vec![s(1), s(2)]);
        let g = LocallyConstantFunction::new(vec![s(3), s(5), s(7)]);
        let p = lcf_mul(&f, &g, &n).unwrap();
        let q = lcf_add(&f, &g, &n).unwrap();
        assert_eq!(p.period(), 6);
        for r in 0..6 {
            assert_eq!(p.eval(r), &(f.eval(r) * g.eval(r)));
            assert_eq!(q.eval(r), &(f.eval(r) + g.eval(r)));
        }
        assert!(lcf_mul(&f, &g, &SupernaturalNumber::finite(4)).is_err());
    }

    #[test]
    fn lcf_json() {
        let f = LocallyConstantFunction::new(vec![s(1), Scalar::gaussian(1, 2, 1, 3)]);
        let v = serde_json::to_value(&f).unwrap();
        assert_eq!(v["period"], 2);
        let back: LocallyConstantFunction = serde_json::from_value(v).unwrap();
        assert_eq!(back, f);
        let padded = serde_json::json!({"period": 2, "values": [[1,1,0,1],[1,1,0,1]]});
        assert_eq!(serde_json::from_value::<LocallyConstantFunction>(padded).unwrap().period(), 1);
    }
}

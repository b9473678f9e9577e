//! Covariant derivations of `A(N)` and `B(N)` in terms of their Fourier
//! components.
//!
//! A component of degree `n` is `a -> [U^n beta(K), a]` for `n >= 0` and
//! `a -> [beta(K) (U*)^{-n}, a]` for `n < 0`, where `beta(k) = C (k + 1) +
//! ep(k)`. The linear coefficient `C` may only be nonzero when `n` lies in
//! the increment regime (`N | n`; for infinite `N` only `n = 0`).
//!
//! Application is exact: coefficients are lifted to polynomials in `(k+1)`
//! with eventually periodic coefficients, the commutator is formed, and the
//! polynomial part must cancel.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::algebra::{
    laurent_accumulate, laurent_mul, BilateralElement, Coefficient, Graded, Laurent, MatrixTrigPoly,
    UnilateralElement,
};
use crate::error::{Error, Result};
use crate::profinite::{LocallyConstantFunction, SupernaturalNumber};
use crate::scalar::Scalar;
use crate::sequences::{
    increment, mean_decompose, partial_sums, split_mean, AffineSequence, BilateralAffineSequence,
    BilateralEPSequence, EPSequence, MeanDecomposition,
};

fn binomial(n: u32, k: u32) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

fn power_scalar(t: i64, e: u32) -> Scalar {
    Scalar::from_real(BigRational::from_integer(BigInt::from(t).pow(e)))
}

/// `sum_i c_i(k) (k + 1)^i`, canonical when every `c_i` with `i >= 1` is
/// purely periodic (corrections are folded into `c_0`) and the top
/// coefficient is nonzero.
#[derive(Clone, PartialEq, Debug)]
struct PolyEP(Vec<EPSequence>);

impl PolyEP {
    fn canonical(mut c: Vec<EPSequence>) -> Self {
        if c.is_empty() {
            return PolyEP(c);
        }
        for i in 1..c.len() {
            if !c[i].correction().is_empty() {
                let (corr, per) = c[i].decompose();
                let finite = EPSequence::new(corr, vec![Scalar::zero()]);
                let folded = finite.times_ramp_power(i as u32).expect("finitely supported");
                c[0] = c[0].add(&folded);
                c[i] = EPSequence::from_lcf(&per);
            }
        }
        while c.last().map(|x| x.is_zero()).unwrap_or(false) {
            c.pop();
        }
        PolyEP(c)
    }

    fn from_affine(beta: &AffineSequence) -> Self {
        Self::canonical(vec![beta.ep.clone(), EPSequence::constant(beta.linear.clone())])
    }

    fn from_ep(a: &EPSequence) -> Self {
        Self::canonical(vec![a.clone()])
    }

    fn into_ep(self) -> Result<EPSequence> {
        match self.0.len() {
            0 => Ok(EPSequence::zero()),
            1 => Ok(self.0.into_iter().next().unwrap()),
            d => Err(Error::Invariant(format!(
                "unbounded residue of degree {} in (k+1) did not cancel",
                d - 1
            ))),
        }
    }
}

impl Coefficient for PolyEP {
    const UNILATERAL: bool = true;
    fn zero() -> Self {
        PolyEP(Vec::new())
    }
    fn one() -> Self {
        PolyEP(vec![EPSequence::one()])
    }
    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
    fn add(&self, o: &Self) -> Self {
        let len = self.0.len().max(o.0.len());
        Self::canonical(
            (0..len)
                .map(|i| match (self.0.get(i), o.0.get(i)) {
                    (Some(a), Some(b)) => a.add(b),
                    (Some(a), None) | (None, Some(a)) => a.clone(),
                    (None, None) => unreachable!(),
                })
                .collect(),
        )
    }
    fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut out = vec![EPSequence::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Self::canonical(out)
    }
    fn neg(&self) -> Self {
        PolyEP(self.0.iter().map(EPSequence::neg).collect())
    }
    fn scale(&self, c: &Scalar) -> Self {
        Self::canonical(self.0.iter().map(|x| x.scale(c)).collect())
    }
    fn conj(&self) -> Self {
        PolyEP(self.0.iter().map(EPSequence::conj).collect())
    }
    /// `(k + 1 + t)^i` expanded binomially; every term inherits the zero
    /// cutoff of the shifted coefficient.
    fn shift(&self, t: i64) -> Self {
        let mut out = vec![EPSequence::zero(); self.0.len()];
        for (i, c) in self.0.iter().enumerate() {
            let sc = c.shift(t);
            for r in 0..=i {
                let w = power_scalar(t, (i - r) as u32).scale_int(binomial(i as u32, r as u32));
                out[r] = out[r].add(&sc.scale(&w));
            }
        }
        Self::canonical(out)
    }
}

/// `sum_i c_i(l) l^i` with periodic coefficients.
#[derive(Clone, PartialEq, Debug)]
struct BiPoly(Vec<LocallyConstantFunction>);

impl BiPoly {
    fn canonical(mut c: Vec<LocallyConstantFunction>) -> Self {
        while c.last().map(|x| x.is_zero()).unwrap_or(false) {
            c.pop();
        }
        BiPoly(c)
    }

    fn into_lcf(self) -> Result<LocallyConstantFunction> {
        match self.0.len() {
            0 => Ok(LocallyConstantFunction::zero()),
            1 => Ok(self.0.into_iter().next().unwrap()),
            d => Err(Error::Invariant(format!("unbounded residue of degree {} in l did not cancel", d - 1))),
        }
    }
}

impl Coefficient for BiPoly {
    const UNILATERAL: bool = false;
    fn zero() -> Self {
        BiPoly(Vec::new())
    }
    fn one() -> Self {
        BiPoly(vec![LocallyConstantFunction::one()])
    }
    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
    fn add(&self, o: &Self) -> Self {
        let len = self.0.len().max(o.0.len());
        Self::canonical(
            (0..len)
                .map(|i| match (self.0.get(i), o.0.get(i)) {
                    (Some(a), Some(b)) => a.add(b),
                    (Some(a), None) | (None, Some(a)) => a.clone(),
                    (None, None) => unreachable!(),
                })
                .collect(),
        )
    }
    fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut out = vec![LocallyConstantFunction::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Self::canonical(out)
    }
    fn neg(&self) -> Self {
        BiPoly(self.0.iter().map(LocallyConstantFunction::neg).collect())
    }
    fn scale(&self, c: &Scalar) -> Self {
        Self::canonical(self.0.iter().map(|x| x.scale(c)).collect())
    }
    fn conj(&self) -> Self {
        BiPoly(self.0.iter().map(LocallyConstantFunction::conj).collect())
    }
    fn shift(&self, t: i64) -> Self {
        let mut out = vec![LocallyConstantFunction::zero(); self.0.len()];
        for (i, c) in self.0.iter().enumerate() {
            let sc = c.shift(t);
            for r in 0..=i {
                let w = power_scalar(t, (i - r) as u32).scale_int(binomial(i as u32, r as u32));
                out[r] = out[r].add(&sc.scale(&w));
            }
        }
        Self::canonical(out)
    }
}

/// Which clause of the covariant classification applies to degree `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `beta` must be bounded; the component is inner.
    Bounded,
    /// Only the increment of `beta` must be bounded.
    Increment,
}

pub fn regime(n: i64, big_n: &SupernaturalNumber) -> Regime {
    if big_n.divides_integer(n) {
        Regime::Increment
    } else {
        Regime::Bounded
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovariantDerivationData {
    pub n: i64,
    pub beta: AffineSequence,
    pub big_n: SupernaturalNumber,
}

/// Validates a covariant component.
pub fn covariant(n: i64, beta: AffineSequence, big_n: &SupernaturalNumber) -> Result<CovariantDerivationData> {
    beta.ep.check_divides(big_n)?;
    if regime(n, big_n) == Regime::Bounded && !beta.linear.is_zero() {
        return Err(Error::UnboundedCoefficient { n, linear: beta.linear.to_string(), big_n: big_n.to_string() });
    }
    Ok(CovariantDerivationData { n, beta, big_n: big_n.clone() })
}

/// `d_{n,K} = [U^n (K + I), .]`.
pub fn d_nk(n: i64, big_n: &SupernaturalNumber) -> Result<CovariantDerivationData> {
    covariant(n, AffineSequence::ramp(Scalar::one()), big_n)
}

impl CovariantDerivationData {
    pub fn regime(&self) -> Regime {
        regime(self.n, &self.big_n)
    }

    pub fn increment(&self) -> EPSequence {
        increment(&self.beta)
    }

    pub fn to_sum(&self) -> DerivationSum {
        DerivationSum { components: [(self.n, self.beta.clone())].into_iter().collect(), big_n: self.big_n.clone() }
            .pruned()
    }

    pub fn apply(&self, a: &UnilateralElement) -> Result<UnilateralElement> {
        self.to_sum().apply(a)
    }
}

/// Finite sum of covariant components, keyed by degree.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivationSum {
    components: BTreeMap<i64, AffineSequence>,
    big_n: SupernaturalNumber,
}

impl DerivationSum {
    pub fn zero(big_n: &SupernaturalNumber) -> Self {
        DerivationSum { components: BTreeMap::new(), big_n: big_n.clone() }
    }

    pub fn new(components: BTreeMap<i64, AffineSequence>, big_n: &SupernaturalNumber) -> Result<Self> {
        for (n, beta) in &components {
            covariant(*n, beta.clone(), big_n)?;
        }
        Ok(DerivationSum { components, big_n: big_n.clone() }.pruned())
    }

    pub fn from_components(parts: &[CovariantDerivationData], big_n: &SupernaturalNumber) -> Result<Self> {
        let mut out = Self::zero(big_n);
        for p in parts {
            out = out.add(&p.to_sum())?;
        }
        Ok(out)
    }

    fn pruned(mut self) -> Self {
        self.components.retain(|_, b| !b.is_zero());
        self
    }

    pub fn big_n(&self) -> &SupernaturalNumber {
        &self.big_n
    }

    pub fn components(&self) -> &BTreeMap<i64, AffineSequence> {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn max_abs_degree(&self) -> u64 {
        self.components.keys().map(|n| n.unsigned_abs()).max().unwrap_or(0)
    }

    fn check_same_n(&self, o: &Self) -> Result<()> {
        if self.big_n != o.big_n {
            return Err(Error::InvalidSupernatural(format!("{} vs {}", self.big_n, o.big_n)));
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_same_n(o)?;
        let mut c = self.components.clone();
        for (n, b) in &o.components {
            let merged = match c.remove(n) {
                Some(prev) => prev.add(b),
                None => b.clone(),
            };
            c.insert(*n, merged);
        }
        Ok(DerivationSum { components: c, big_n: self.big_n.clone() }.pruned())
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(&Scalar::from_int(-1)))
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        DerivationSum {
            components: self.components.iter().map(|(n, b)| (*n, b.scale(s))).collect(),
            big_n: self.big_n.clone(),
        }
        .pruned()
    }

    /// The implementing (formal, possibly unbounded) element `sum U^n beta_n`.
    fn implementer(&self) -> Graded<PolyEP> {
        Graded::from_terms(self.components.iter().map(|(n, b)| (*n, PolyEP::from_affine(b))))
    }

    pub fn apply(&self, a: &UnilateralElement) -> Result<UnilateralElement> {
        let lifted: Graded<PolyEP> = a.map_coefficients(|_, c| PolyEP::from_ep(c));
        let image = self.implementer().commutator(&lifted);
        let mut terms = Vec::new();
        for (n, c) in image.terms() {
            terms.push((*n, c.clone().into_ep()?));
        }
        Ok(UnilateralElement::from_terms(terms))
    }

    pub fn component(&self, n: i64) -> CovariantDerivationData {
        CovariantDerivationData {
            n,
            beta: self.components.get(&n).cloned().unwrap_or_else(AffineSequence::zero),
            big_n: self.big_n.clone(),
        }
    }
}

pub fn from_inner(x: &UnilateralElement, big_n: &SupernaturalNumber) -> Result<DerivationSum> {
    x.check_divides(big_n)?;
    DerivationSum::new(x.terms().iter().map(|(n, c)| (*n, AffineSequence::bounded(c.clone()))).collect(), big_n)
}

pub fn apply(d: &DerivationSum, a: &UnilateralElement) -> Result<UnilateralElement> {
    d.apply(a)
}

pub fn fourier_component(d: &DerivationSum, n: i64) -> CovariantDerivationData {
    d.component(n)
}

/// Degree selection on images: for each term `a_m` of `a`, the degree
/// `m + n` part of `d(a_m)`.
pub fn fourier_of_image(d: &DerivationSum, a: &UnilateralElement, n: i64) -> Result<UnilateralElement> {
    let mut out = UnilateralElement::zero();
    for (m, c) in a.terms() {
        let img = d.apply(&UnilateralElement::monomial(*m, c.clone()))?;
        out = out.add(&img.spectral_component(m + n));
    }
    Ok(out)
}

/// Weight `max(0, 1 - |n|/(M+1))` of the Fejér kernel.
pub fn fejer_weight(n: i64, m: u64) -> Scalar {
    let a = n.unsigned_abs();
    if a > m {
        return Scalar::zero();
    }
    Scalar::ratio((m + 1 - a) as i64, (m + 1) as i64)
}

pub fn fejer_mean(d: &DerivationSum, m: u64) -> DerivationSum {
    DerivationSum {
        components: d.components.iter().map(|(n, b)| (*n, b.scale(&fejer_weight(*n, m)))).collect(),
        big_n: d.big_n.clone(),
    }
    .pruned()
}

/// `d_n = C d_{n,K} + inner_per + approx_c00`.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub c: Scalar,
    pub inner_per: CovariantDerivationData,
    pub approx_c00: CovariantDerivationData,
}

impl Classification {
    pub fn reassemble(&self) -> CovariantDerivationData {
        let beta = AffineSequence::ramp(self.c.clone())
            .add(&self.inner_per.beta)
            .add(&self.approx_c00.beta);
        CovariantDerivationData { n: self.inner_per.n, beta, big_n: self.inner_per.big_n.clone() }
    }
}

fn increment_split(d: &CovariantDerivationData) -> Result<MeanDecomposition> {
    let alpha = d.increment();
    if d.big_n.is_finite() {
        mean_decompose(&alpha, &d.big_n)
    } else {
        Ok(split_mean(&alpha))
    }
}

pub fn classify(d: &CovariantDerivationData) -> Result<Classification> {
    if d.regime() == Regime::Bounded {
        return Err(Error::RegimeMismatch(format!(
            "degree {} is in the bounded regime for N = {}; the component is inner and C = 0",
            d.n, d.big_n
        )));
    }
    let split = increment_split(d)?;
    let beta0 = partial_sums(&split.c00_sequence());
    let beta_per = partial_sums(&split.periodic_sequence());
    debug_assert!(beta0.linear.is_zero() && beta_per.linear.is_zero());
    Ok(Classification {
        c: split.mean,
        inner_per: CovariantDerivationData { n: d.n, beta: beta_per, big_n: d.big_n.clone() },
        approx_c00: CovariantDerivationData { n: d.n, beta: beta0, big_n: d.big_n.clone() },
    })
}

/// `sup_k |1 - (beta(k+1) - beta(k))|^2` for a bounded candidate `beta`.
pub fn obstruction_gap(_n: i64, big_n: &SupernaturalNumber, beta: &EPSequence) -> Result<BigRational> {
    beta.check_divides(big_n)?;
    let gap = EPSequence::one().sub(&beta.shift(1).sub(beta));
    Ok(gap.supnorm_sq())
}

/// Finitely supported Fourier series `f(t) = sum_j f_j e^{ijt}`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LaurentFunction {
    coeffs: Laurent,
}

impl LaurentFunction {
    pub fn new(coeffs: Laurent) -> Self {
        LaurentFunction { coeffs: coeffs.into_iter().filter(|(_, v)| !v.is_zero()).collect() }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(j: i64, c: Scalar) -> Self {
        Self::new([(j, c)].into_iter().collect())
    }

    pub fn coeffs(&self) -> &Laurent {
        &self.coeffs
    }

    pub fn coeff(&self, j: i64) -> Scalar {
        self.coeffs.get(&j).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, t: f64) -> num_complex::Complex64 {
        self.coeffs
            .iter()
            .map(|(j, v)| v.to_complex() * num_complex::Complex64::from_polar(1.0, *j as f64 * t))
            .sum()
    }

    /// `f(V^N) = sum_j f_j V^{jN}`.
    pub fn of_v_power(&self, nv: i64) -> BilateralElement {
        BilateralElement::from_terms(
            self.coeffs.iter().map(|(j, v)| (j * nv, LocallyConstantFunction::constant(v.clone()))),
        )
    }
}

/// Images of the generators under `d_f`, computed without the component
/// expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct DfImages {
    pub d_u: UnilateralElement,
    pub d_us: UnilateralElement,
}

/// `d_f` as the component sum with `beta_{jN} = (f_j / N)(k + 1)`.
pub fn d_f_build(f: &LaurentFunction, big_n: &SupernaturalNumber) -> Result<DerivationSum> {
    let nv = big_n.require_finite()? as i64;
    let inv_n = Scalar::ratio(1, nv);
    DerivationSum::new(
        f.coeffs.iter().map(|(j, fj)| (j * nv, AffineSequence::ramp(fj * &inv_n))).collect(),
        big_n,
    )
}

/// `d_f(U) = (1/N) T(f(V^N)) U` and `d_f(U*) = -(1/N) U* T(f(V^N))`.
pub fn d_f_images(f: &LaurentFunction, big_n: &SupernaturalNumber) -> Result<DfImages> {
    let nv = big_n.require_finite()? as i64;
    let t = f.of_v_power(nv).toeplitz();
    let inv_n = Scalar::ratio(1, nv);
    Ok(DfImages {
        d_u: t.multiply(&UnilateralElement::u()).scale(&inv_n),
        d_us: UnilateralElement::us().multiply(&t).scale(&-inv_n),
    })
}

/// `f_j = N C_{jN}`, reading `C` off each increment-regime component.
pub fn extract_f(d: &DerivationSum) -> Result<LaurentFunction> {
    let nv = d.big_n.require_finite()? as i64;
    let mut coeffs = Laurent::new();
    for n in d.components.keys() {
        if n % nv != 0 {
            continue;
        }
        let cls = classify(&d.component(*n))?;
        laurent_accumulate(&mut coeffs, n / nv, cls.c.scale_int(nv));
    }
    Ok(LaurentFunction::new(coeffs))
}

/// `delta_f(F) = f (1/i) dF/dt`: `z^k` picks up the factor `k`.
pub fn delta_f_apply(f: &LaurentFunction, m: &MatrixTrigPoly) -> MatrixTrigPoly {
    m.map_entries(|p| {
        let deriv: Laurent =
            p.iter().filter(|(k, _)| **k != 0).map(|(k, v)| (*k, v.scale_int(*k))).collect();
        laurent_mul(&f.coeffs, &deriv)
    })
}

/// `H = (1/N) sum_{r,s} delta(E_rs) E_sr`, so that `delta(A) = [H, A]` on
/// constant matrices. `images[(r, s)]` is `delta(E_rs)`.
pub fn inner_part_h(images: &BTreeMap<(usize, usize), MatrixTrigPoly>, size: usize) -> Result<MatrixTrigPoly> {
    let img = |r: usize, s: usize| -> Result<MatrixTrigPoly> {
        match images.get(&(r, s)) {
            Some(m) if m.size() == size => Ok(m.clone()),
            Some(m) => Err(Error::SizeMismatch(format!("image of E_{r}{s} has size {}", m.size()))),
            None => Ok(MatrixTrigPoly::zero(size)),
        }
    };
    let e = |r: usize, s: usize| MatrixTrigPoly::unit(size, r, s, 0);
    for s in 0..size {
        for r in 0..size {
            for t in 0..size {
                for q in 0..size {
                    let lhs = img(s, r)?.mul(&e(t, q))?.add(&e(s, r).mul(&img(t, q)?)?)?;
                    let rhs = if t == r { img(s, q)? } else { MatrixTrigPoly::zero(size) };
                    if lhs != rhs {
                        return Err(Error::NotDerivation(format!(
                            "Leibniz rule fails on E_{s}{r} E_{t}{q}"
                        )));
                    }
                }
            }
        }
    }
    let mut h = MatrixTrigPoly::zero(size);
    for r in 0..size {
        for s in 0..size {
            h = h.add(&img(r, s)?.mul(&e(s, r))?)?;
        }
    }
    Ok(h.scale(&Scalar::ratio(1, size as i64)))
}

// ---- bilateral side ---------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct BilateralCovariantData {
    pub n: i64,
    pub eta: BilateralAffineSequence,
    pub big_n: SupernaturalNumber,
}

pub fn bilateral_covariant(
    n: i64,
    eta: BilateralAffineSequence,
    big_n: &SupernaturalNumber,
) -> Result<BilateralCovariantData> {
    if !eta.ep.is_periodic() {
        return Err(Error::InvalidSequence("bilateral coefficient must be periodic".into()));
    }
    big_n.check_period(eta.ep.period())?;
    if regime(n, big_n) == Regime::Bounded && !eta.linear.is_zero() {
        return Err(Error::UnboundedCoefficient { n, linear: eta.linear.to_string(), big_n: big_n.to_string() });
    }
    Ok(BilateralCovariantData { n, eta, big_n: big_n.clone() })
}

/// Finite sum of bilateral components `[V^n eta_n(L), .]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilateralDerivationSum {
    components: BTreeMap<i64, BilateralAffineSequence>,
    big_n: SupernaturalNumber,
}

impl BilateralDerivationSum {
    pub fn new(components: BTreeMap<i64, BilateralAffineSequence>, big_n: &SupernaturalNumber) -> Result<Self> {
        for (n, eta) in &components {
            bilateral_covariant(*n, eta.clone(), big_n)?;
        }
        let mut components = components;
        components.retain(|_, e| !e.is_zero());
        Ok(BilateralDerivationSum { components, big_n: big_n.clone() })
    }

    pub fn components(&self) -> &BTreeMap<i64, BilateralAffineSequence> {
        &self.components
    }

    pub fn big_n(&self) -> &SupernaturalNumber {
        &self.big_n
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, n: i64) -> BilateralCovariantData {
        BilateralCovariantData {
            n,
            eta: self.components.get(&n).cloned().unwrap_or_else(BilateralAffineSequence::zero),
            big_n: self.big_n.clone(),
        }
    }

    fn implementer(&self) -> Result<Graded<BiPoly>> {
        let mut terms = Vec::new();
        for (n, eta) in &self.components {
            let per = eta.ep.to_lcf().ok_or_else(|| Error::InvalidSequence("bilateral coefficient must be periodic".into()))?;
            terms.push((*n, BiPoly::canonical(vec![per, LocallyConstantFunction::constant(eta.linear.clone())])));
        }
        Ok(Graded::from_terms(terms))
    }

    pub fn apply(&self, b: &BilateralElement) -> Result<BilateralElement> {
        let lifted: Graded<BiPoly> = b.map_coefficients(|_, c| BiPoly(vec![c.clone()]));
        let image = self.implementer()?.commutator(&lifted);
        let mut terms = Vec::new();
        for (n, c) in image.terms() {
            terms.push((*n, c.clone().into_lcf()?));
        }
        Ok(BilateralElement::from_terms(terms))
    }
}

pub fn bilateral_apply(delta: &BilateralDerivationSum, b: &BilateralElement) -> Result<BilateralElement> {
    delta.apply(b)
}

/// The induced derivation `[d]` of `B(N)`. A unilateral `beta` extended to
/// `Z` is `C (l + 1) + beta_per(l)`; negative degrees move the coefficient
/// through `V^{-p}`, which translates it by `n`.
pub fn quotient_derivation(d: &DerivationSum) -> Result<BilateralDerivationSum> {
    let mut components = BTreeMap::new();
    for (n, beta) in &d.components {
        let per = beta.ep.periodic_part();
        let ep = per.add(&LocallyConstantFunction::constant(beta.linear.clone()));
        let ep = if *n < 0 {
            ep.shift(*n).add(&LocallyConstantFunction::constant(beta.linear.scale_int(*n)))
        } else {
            ep
        };
        components.insert(*n, BilateralAffineSequence::new(beta.linear.clone(), BilateralEPSequence::from_lcf(&ep)));
    }
    BilateralDerivationSum::new(components, &d.big_n)
}

// ---- approximation constructors -------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct C00Approximation {
    /// Inner component with the truncated, eventually constant `beta^M`.
    pub approx: CovariantDerivationData,
    /// `sup_{k > M} |alpha(k)|^2`, the squared norm of `(d - approx)(U)`.
    pub residual_sq: BigRational,
}

/// Truncates the increment at `M`: `alpha^M(k) = alpha(k)` for `k <= M`.
pub fn approx_c00(d: &CovariantDerivationData, m: u64) -> Result<C00Approximation> {
    let alpha = d.increment();
    if !alpha.is_finitely_supported() {
        return Err(Error::RegimeMismatch("increment has a periodic part".into()));
    }
    let kept: BTreeMap<u64, Scalar> = alpha.correction().range(..=m).map(|(k, v)| (*k, v.clone())).collect();
    let beta_m = partial_sums(&EPSequence::new(kept, vec![Scalar::zero()]));
    let residual_sq = alpha
        .correction()
        .range(m + 1..)
        .map(|(_, v)| v.norm_sq())
        .max()
        .unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)));
    Ok(C00Approximation {
        approx: CovariantDerivationData { n: d.n, beta: beta_m, big_n: d.big_n.clone() },
        residual_sq,
    })
}

/// Inner component whose increment is the mean-zero periodic `f`.
pub fn approx_per(
    n: i64,
    f: &LocallyConstantFunction,
    big_n: &SupernaturalNumber,
) -> Result<CovariantDerivationData> {
    let mean = f.haar_integral();
    if !mean.is_zero() {
        return Err(Error::NonzeroMean(mean.to_string()));
    }
    f.check_divides(big_n)?;
    let beta = partial_sums(&EPSequence::from_lcf(f));
    Ok(CovariantDerivationData { n, beta, big_n: big_n.clone() })
}

// ---- JSON -------------------------------------------------------------------

fn ser_components<S: Serializer, T: Serialize>(
    s: S,
    components: &BTreeMap<i64, T>,
    big_n: &SupernaturalNumber,
) -> std::result::Result<S::Ok, S::Error> {
    let c: BTreeMap<String, &T> = components.iter().map(|(n, v)| (n.to_string(), v)).collect();
    let mut m = s.serialize_map(Some(2))?;
    m.serialize_entry("components", &c)?;
    m.serialize_entry("N", big_n)?;
    m.end()
}

fn parse_components<E: de::Error, T>(raw: BTreeMap<String, T>) -> std::result::Result<BTreeMap<i64, T>, E> {
    raw.into_iter()
        .map(|(k, v)| k.parse::<i64>().map(|n| (n, v)).map_err(|_| E::custom(format!("bad degree {k}"))))
        .collect()
}

impl Serialize for DerivationSum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ser_components(s, &self.components, &self.big_n)
    }
}

impl<'de> Deserialize<'de> for DerivationSum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            components: BTreeMap<String, AffineSequence>,
            #[serde(rename = "N")]
            big_n: SupernaturalNumber,
        }
        let raw = Raw::deserialize(d)?;
        let components = parse_components::<D::Error, _>(raw.components)?;
        DerivationSum::new(components, &raw.big_n).map_err(de::Error::custom)
    }
}

impl Serialize for BilateralDerivationSum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ser_components(s, &self.components, &self.big_n)
    }
}

impl<'de> Deserialize<'de> for BilateralDerivationSum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            components: BTreeMap<String, BilateralAffineSequence>,
            #[serde(rename = "N")]
            big_n: SupernaturalNumber,
        }
        let raw = Raw::deserialize(d)?;
        let components = parse_components::<D::Error, _>(raw.components)?;
        BilateralDerivationSum::new(components, &raw.big_n).map_err(de::Error::custom)
    }
}

impl Serialize for CovariantDerivationData {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("n", &self.n)?;
        m.serialize_entry("beta", &self.beta)?;
        m.serialize_entry("N", &self.big_n)?;
        m.end()
    }
}

impl Serialize for Classification {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("C", &self.c)?;
        m.serialize_entry("inner_per", &self.inner_per.beta)?;
        m.serialize_entry("approx_c00", &self.approx_c00.beta)?;
        m.end()
    }
}

impl Serialize for LaurentFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let c: BTreeMap<String, &Scalar> = self.coeffs.iter().map(|(j, v)| (j.to_string(), v)).collect();
        c.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaurentFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, Scalar>::deserialize(d)?;
        Ok(LaurentFunction::new(parse_components::<D::Error, _>(raw)?))
    }
}

//! The invariant states `tau_0` and `tau_Haar` on `B(N)`, their GNS
//! representations, covariant implementations `D` of covariant derivations
//! and the compact-parametrix indicator.
//!
//! `H_0 = l^2(Z)` with `[I] = E_0`. `H_Haar = L^2(Z x Z/jZ)` at a chain level
//! `j` with normalised counting measure; `[b](m, x) = b_m(x)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::BilateralElement;
use crate::derivations::{bilateral_covariant, regime, BilateralCovariantData, BilateralDerivationSum, Regime};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, ExactMatrix};
use crate::profinite::{lcm, Exponent, LocallyConstantFunction, SupernaturalNumber};
use crate::scalar::Scalar;
use crate::sequences::{BilateralAffineSequence, BilateralEPSequence};

// ---- states -----------------------------------------------------------------

/// `E(b)`, the average of `rho_theta(b)` over the circle: the degree-0 part.
pub fn expectation(b: &BilateralElement) -> LocallyConstantFunction {
    b.expectation()
}

pub fn tau0(b: &BilateralElement) -> Scalar {
    b.expectation().eval(0).clone()
}

pub fn tau_haar(b: &BilateralElement) -> Scalar {
    b.expectation().haar_integral()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GnsState {
    Tau0,
    Haar,
}

// ---- GNS vectors ----------------------------------------------------------------

/// Finitely supported vector in `l^2(Z)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GNSVector0 {
    coords: BTreeMap<i64, Scalar>,
}

impl GNSVector0 {
    pub fn new(coords: BTreeMap<i64, Scalar>) -> Self {
        let mut coords = coords;
        coords.retain(|_, v| !v.is_zero());
        GNSVector0 { coords }
    }

    pub fn basis(l: i64) -> Self {
        GNSVector0::new(BTreeMap::from([(l, Scalar::one())]))
    }

    /// `[b] = (b_n(0))_n`.
    pub fn of_element(b: &BilateralElement) -> Self {
        GNSVector0::new(b.terms().iter().map(|(n, c)| (*n, c.eval(0).clone())).collect())
    }

    pub fn coords(&self) -> &BTreeMap<i64, Scalar> {
        &self.coords
    }

    pub fn get(&self, l: i64) -> Scalar {
        self.coords.get(&l).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn inner(&self, o: &Self) -> Scalar {
        self.coords.iter().filter_map(|(l, v)| o.coords.get(l).map(|w| v.conj() * w)).sum()
    }
}

/// `pi_0(V^k a(L)) E_l = a(l) E_{l+k}`.
pub fn pi0_apply(b: &BilateralElement, v: &GNSVector0) -> GNSVector0 {
    let mut out: BTreeMap<i64, Scalar> = BTreeMap::new();
    for (k, a) in b.terms() {
        for (l, x) in &v.coords {
            let e = out.entry(l + k).or_insert_with(Scalar::zero);
            *e = &*e + &(a.eval(*l) * x);
        }
    }
    GNSVector0::new(out)
}

/// Finitely supported function on `Z x Z/jZ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GNSVectorHaar {
    level: u64,
    coords: BTreeMap<(i64, u64), Scalar>,
}

impl GNSVectorHaar {
    pub fn new(level: u64, coords: BTreeMap<(i64, u64), Scalar>) -> Result<Self> {
        if level == 0 || coords.keys().any(|(_, x)| *x >= level) {
            return Err(Error::LevelMismatch(format!("residue outside Z/{level}Z")));
        }
        let mut coords = coords;
        coords.retain(|_, v| !v.is_zero());
        Ok(GNSVectorHaar { level, coords })
    }

    /// `chi_0`: the class of the identity, `1` on the fiber `m = 0`.
    pub fn chi0(level: u64) -> Self {
        GNSVectorHaar { level, coords: (0..level).map(|x| ((0, x), Scalar::one())).collect() }
    }

    /// `[b](m, x) = b_m(x)`.
    pub fn of_element(b: &BilateralElement, level: u64) -> Result<Self> {
        check_level(b, level)?;
        let mut coords = BTreeMap::new();
        for (m, c) in b.terms() {
            for x in 0..level {
                coords.insert((*m, x), c.eval(x as i64).clone());
            }
        }
        GNSVectorHaar::new(level, coords)
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn coords(&self) -> &BTreeMap<(i64, u64), Scalar> {
        &self.coords
    }

    pub fn get(&self, m: i64, x: u64) -> Scalar {
        self.coords.get(&(m, x)).cloned().unwrap_or_else(Scalar::zero)
    }

    /// `sum_m (1/j) sum_x conj(f) g`.
    pub fn inner(&self, o: &Self) -> Result<Scalar> {
        if self.level != o.level {
            return Err(Error::LevelMismatch(format!("levels {} and {}", self.level, o.level)));
        }
        let s: Scalar = self.coords.iter().filter_map(|(k, v)| o.coords.get(k).map(|w| v.conj() * w)).sum();
        Ok(s * Scalar::ratio(1, self.level as i64))
    }
}

fn check_level(b: &BilateralElement, level: u64) -> Result<()> {
    for c in b.terms().values() {
        if level % c.period() != 0 {
            return Err(Error::LevelMismatch(format!("period {} does not divide level {level}", c.period())));
        }
    }
    Ok(())
}

/// `(pi_Haar(V^k a) f)(m, x) = a(x + m - k) f(m - k, x)`.
pub fn pi_haar_apply(b: &BilateralElement, v: &GNSVectorHaar) -> Result<GNSVectorHaar> {
    check_level(b, v.level)?;
    let mut out: BTreeMap<(i64, u64), Scalar> = BTreeMap::new();
    for (k, a) in b.terms() {
        for ((m, x), f) in &v.coords {
            let e = out.entry((m + k, *x)).or_insert_with(Scalar::zero);
            *e = &*e + &(a.eval(*x as i64 + m) * f);
        }
    }
    GNSVectorHaar::new(v.level, out)
}

// ---- implementation data -------------------------------------------------------

/// Shape of `eta_n` in the three regimes.
#[derive(Clone, Debug, PartialEq)]
pub enum ImplementationCase {
    /// `eta_n = h_n(q(L))`: infinite `N` with `n != 0`, or `N` finite with `N` not dividing `n`.
    Bounded { h: LocallyConstantFunction },
    /// Infinite `N`, `n = 0`: `eta_0 = C_0 L + eta~(L)`.
    InfiniteZero { c: Scalar, eta_tilde: LocallyConstantFunction },
    /// Finite `N` dividing `n`: `eta_n = C_n L + h~_n(q(L))`.
    FiniteDivisible { c: Scalar, h_tilde: LocallyConstantFunction },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImplementationData {
    pub n: i64,
    pub case: ImplementationCase,
    /// `D [I] = psi(x) pi(V^n) [I]` in the Haar space.
    pub psi: LocallyConstantFunction,
    /// Free additive constant of `D_tau0` for `n = 0`.
    pub c: Scalar,
    pub big_n: SupernaturalNumber,
    /// Chain level `j` of the Haar fibers `Z/jZ`.
    pub level: u64,
}

fn default_level(big_n: &SupernaturalNumber, periods: &[u64]) -> u64 {
    match big_n.value() {
        Some(v) => v,
        None => periods.iter().fold(1, |a, p| lcm(a as usize, *p as usize) as u64),
    }
}

impl ImplementationData {
    pub fn new(
        n: i64,
        case: ImplementationCase,
        psi: LocallyConstantFunction,
        c: Scalar,
        big_n: &SupernaturalNumber,
    ) -> Result<Self> {
        let expected = match (regime(n, big_n), big_n.is_finite()) {
            (Regime::Bounded, _) => matches!(case, ImplementationCase::Bounded { .. }),
            (Regime::Increment, true) => matches!(case, ImplementationCase::FiniteDivisible { .. }),
            (Regime::Increment, false) => matches!(case, ImplementationCase::InfiniteZero { .. }),
        };
        if !expected {
            return Err(Error::RegimeMismatch(format!("case tag does not match n = {n}, N = {big_n}")));
        }
        if n != 0 && !c.is_zero() {
            return Err(Error::RegimeMismatch("the additive constant exists only for n = 0".into()));
        }
        let eta_per = match &case {
            ImplementationCase::Bounded { h } => h,
            ImplementationCase::InfiniteZero { eta_tilde, .. } => eta_tilde,
            ImplementationCase::FiniteDivisible { h_tilde, .. } => h_tilde,
        };
        eta_per.check_divides(big_n)?;
        psi.check_divides(big_n)?;
        let level = default_level(big_n, &[eta_per.period(), psi.period()]);
        Ok(ImplementationData { n, case, psi, c, big_n: big_n.clone(), level })
    }

    /// Reads the case off a bilateral component `[V^n eta(L), .]`; `psi = 0`, `c = 0`.
    pub fn from_covariant(d: &BilateralCovariantData) -> Result<Self> {
        let per = d
            .eta
            .ep
            .to_lcf()
            .ok_or_else(|| Error::InvalidSequence("bilateral coefficient must be periodic".into()))?;
        let case = match (regime(d.n, &d.big_n), d.big_n.is_finite()) {
            (Regime::Bounded, _) => ImplementationCase::Bounded { h: per },
            (Regime::Increment, true) => ImplementationCase::FiniteDivisible { c: d.eta.linear.clone(), h_tilde: per },
            (Regime::Increment, false) => ImplementationCase::InfiniteZero { c: d.eta.linear.clone(), eta_tilde: per },
        };
        ImplementationData::new(d.n, case, LocallyConstantFunction::zero(), Scalar::zero(), &d.big_n)
    }

    pub fn with_psi(mut self, psi: LocallyConstantFunction) -> Result<Self> {
        psi.check_divides(&self.big_n)?;
        self.level = default_level(&self.big_n, &[self.level, psi.period()]);
        self.psi = psi;
        Ok(self)
    }

    pub fn with_constant(mut self, c: Scalar) -> Result<Self> {
        if self.n != 0 && !c.is_zero() {
            return Err(Error::RegimeMismatch("the additive constant exists only for n = 0".into()));
        }
        self.c = c;
        Ok(self)
    }

    /// Sets the Haar level; it must divide `N`, and equal `N` when `N` is finite.
    pub fn with_level(mut self, level: u64) -> Result<Self> {
        if !self.big_n.divides(level) || (self.big_n.is_finite() && self.big_n.value() != Some(level)) {
            return Err(Error::LevelMismatch(format!("level {level} for N = {}", self.big_n)));
        }
        if level % self.eta_periodic().period() != 0 || level % self.psi.period() != 0 {
            return Err(Error::LevelMismatch(format!("level {level} too coarse for the data")));
        }
        self.level = level;
        Ok(self)
    }

    /// `C_n`, zero in the bounded case.
    pub fn linear(&self) -> Scalar {
        match &self.case {
            ImplementationCase::Bounded { .. } => Scalar::zero(),
            ImplementationCase::InfiniteZero { c, .. } | ImplementationCase::FiniteDivisible { c, .. } => c.clone(),
        }
    }

    fn eta_periodic(&self) -> &LocallyConstantFunction {
        match &self.case {
            ImplementationCase::Bounded { h } => h,
            ImplementationCase::InfiniteZero { eta_tilde, .. } => eta_tilde,
            ImplementationCase::FiniteDivisible { h_tilde, .. } => h_tilde,
        }
    }

    /// `eta_n(l)` on `Z`.
    pub fn eta(&self) -> BilateralAffineSequence {
        BilateralAffineSequence::new(self.linear(), BilateralEPSequence::from_lcf(self.eta_periodic()))
    }

    /// Mean-zero part `g~` of the increment `eta(l) - eta(l - 1) = C + g~(q(l))`.
    pub fn g_tilde(&self) -> Option<LocallyConstantFunction> {
        match &self.case {
            ImplementationCase::Bounded { .. } => None,
            _ => {
                let e = self.eta_periodic();
                Some(e.sub(&e.shift(-1)))
            }
        }
    }

    pub fn to_covariant(&self) -> Result<BilateralCovariantData> {
        bilateral_covariant(self.n, self.eta(), &self.big_n)
    }

    /// The derivation `[V^n eta(L), .]` that `D` implements.
    pub fn derivation(&self) -> Result<BilateralDerivationSum> {
        BilateralDerivationSum::new(BTreeMap::from([(self.n, self.eta())]), &self.big_n)
    }

    /// `eta -> infinity`: linear regime with `C_n != 0`.
    pub fn tau0_predicate(&self) -> bool {
        !self.linear().is_zero()
    }

    /// `N` finite, `N | n` and `C_n != 0`.
    pub fn haar_predicate(&self) -> bool {
        matches!(self.case, ImplementationCase::FiniteDivisible { .. }) && !self.linear().is_zero()
    }

    pub fn predicate(&self, state: GnsState) -> bool {
        match state {
            GnsState::Tau0 => self.tau0_predicate(),
            GnsState::Haar => self.haar_predicate(),
        }
    }
}

// ---- truncated operators --------------------------------------------------------

/// An operator compressed to the fibers `m = -M..=M`, each of size `level`;
/// basis index `(m + M) * level + x`.
#[derive(Clone, Debug, PartialEq)]
pub struct GnsMatrix {
    pub window: usize,
    pub level: u64,
    pub exact: ExactMatrix,
}

impl GnsMatrix {
    fn zeros(window: usize, level: u64) -> Self {
        let dim = (2 * window + 1) * level as usize;
        GnsMatrix { window, level, exact: ExactMatrix::zeros(dim, dim) }
    }

    fn index(&self, m: i64, x: u64) -> Option<usize> {
        let w = self.window as i64;
        (-w..=w).contains(&m).then(|| (m + w) as usize * self.level as usize + x as usize)
    }

    fn add(&mut self, row: (i64, u64), col: (i64, u64), v: &Scalar) {
        if v.is_zero() {
            return;
        }
        if let (Some(i), Some(j)) = (self.index(row.0, row.1), self.index(col.0, col.1)) {
            self.exact.add_to(i, j, v);
        }
    }

    pub fn dim(&self) -> usize {
        self.exact.rows()
    }

    /// The `m` coordinate of every basis index.
    pub fn coordinates(&self) -> Vec<i64> {
        let l = self.level as usize;
        (0..self.dim()).map(|i| (i / l) as i64 - self.window as i64).collect()
    }

    pub fn dense(&self) -> DenseMatrix {
        self.exact.to_dense()
    }
}

fn tau0_matrix(data: &ImplementationData, window: usize) -> GnsMatrix {
    let eta = data.eta();
    let w = window as i64;
    let mut out = GnsMatrix::zeros(window, 1);
    for l in -w..=w {
        let mut v = eta.eval(l);
        if data.n == 0 {
            v = v + &data.c;
        }
        out.add((l + data.n, 0), (l, 0), &v);
    }
    out
}

/// `V^n eta_n(L)` (plus `c I` when `n = 0`) on `E_{-M}..E_M`.
pub fn build_d_tau0_exact(data: &ImplementationData, window: usize) -> GnsMatrix {
    tau0_matrix(data, window)
}

pub fn build_d_tau0(data: &ImplementationData, window: usize) -> DenseMatrix {
    tau0_matrix(data, window).dense()
}

/// `D_Haar` on `m = -M..=M`, `x in Z/jZ` with `j = data.level`.
pub fn build_d_haar_exact(data: &ImplementationData, window: usize) -> Result<GnsMatrix> {
    let j = data.level;
    if !data.big_n.divides(j) || j % data.eta_periodic().period() != 0 || j % data.psi.period() != 0 {
        return Err(Error::LevelMismatch(format!("level {j} for N = {}", data.big_n)));
    }
    let n = data.n;
    let w = window as i64;
    let mut out = GnsMatrix::zeros(window, j);
    for m in -w..=w {
        for x in 0..j {
            let xi = x as i64;
            let psi = data.psi.eval(xi);
            match &data.case {
                ImplementationCase::Bounded { h } => {
                    out.add((m, x), (m - n, x), h.eval(xi + m - n));
                    let xn = (xi + n).rem_euclid(j as i64) as u64;
                    out.add((m, x), (m - n, xn), &(psi - h.eval(xi)));
                }
                ImplementationCase::InfiniteZero { c, eta_tilde: t } | ImplementationCase::FiniteDivisible { c, h_tilde: t } => {
                    let v = c.scale_int(m - n) + t.eval(xi + m - n) - t.eval(xi) + psi;
                    out.add((m, x), (m - n, x), &v);
                }
            }
        }
    }
    Ok(out)
}

pub fn build_d_haar(data: &ImplementationData, window: usize) -> Result<DenseMatrix> {
    Ok(build_d_haar_exact(data, window)?.dense())
}

/// `pi_0(b)` compressed to `E_{-M}..E_M`.
pub fn pi0_matrix(b: &BilateralElement, window: usize) -> GnsMatrix {
    let w = window as i64;
    let mut out = GnsMatrix::zeros(window, 1);
    for (k, a) in b.terms() {
        for l in -w..=w {
            out.add((l + k, 0), (l, 0), a.eval(l));
        }
    }
    out
}

/// `pi_Haar(b)` compressed to the fibers `-M..=M` at the given level.
pub fn pi_haar_matrix(b: &BilateralElement, window: usize, level: u64) -> Result<GnsMatrix> {
    check_level(b, level)?;
    let w = window as i64;
    let mut out = GnsMatrix::zeros(window, level);
    for (k, a) in b.terms() {
        for m in -w..=w {
            for x in 0..level {
                out.add((m + k, x), (m, x), a.eval(x as i64 + m));
            }
        }
    }
    Ok(out)
}

pub fn pi_matrix(state: GnsState, b: &BilateralElement, window: usize, level: u64) -> Result<GnsMatrix> {
    match state {
        GnsState::Tau0 => Ok(pi0_matrix(b, window)),
        GnsState::Haar => pi_haar_matrix(b, window, level),
    }
}

pub fn build_d(state: GnsState, data: &ImplementationData, window: usize) -> Result<GnsMatrix> {
    match state {
        GnsState::Tau0 => Ok(build_d_tau0_exact(data, window)),
        GnsState::Haar => build_d_haar_exact(data, window),
    }
}

// ---- checks -------------------------------------------------------------------------

/// `theta_k = 2 pi k / count`.
pub fn theta_grid(count: usize) -> Vec<f64> {
    (0..count).map(|k| 2.0 * PI * k as f64 / count as f64).collect()
}

/// `max_theta max_ij |(Phi D Phi^{-1} - e^{i n theta} D)_ij|` with
/// `Phi = diag(e^{i theta m})` over the given coordinates.
pub fn check_covariance(d: &DenseMatrix, coords: &[i64], n: i64, thetas: &[f64]) -> f64 {
    let mut entries = Vec::new();
    for j in 0..d.ncols() {
        for i in 0..d.nrows() {
            let z = d[(i, j)];
            if z != Complex64::new(0.0, 0.0) {
                entries.push((coords[i] - coords[j], z));
            }
        }
    }
    let mut worst = 0.0f64;
    for &t in thetas {
        let target = Complex64::from_polar(1.0, n as f64 * t);
        for &(dm, z) in &entries {
            let r = (z * Complex64::from_polar(1.0, dm as f64 * t) - z * target).norm();
            worst = worst.max(r);
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImplementationResidual {
    /// Interior entries of `[D, pi(b)]` differing from `pi(delta(b))`.
    pub mismatches: usize,
    pub max_deviation: f64,
}

impl ImplementationResidual {
    pub fn exact(&self) -> bool {
        self.mismatches == 0
    }
}

/// Compares `[D, pi(b)]` with `pi(delta(b))` on the fibers `|m| <= M - margin`,
/// `margin = |n| + deg b`.
pub fn check_implementation(
    state: GnsState,
    d: &GnsMatrix,
    delta: &BilateralDerivationSum,
    b: &BilateralElement,
) -> Result<ImplementationResidual> {
    let n_max = delta.components().keys().map(|n| n.unsigned_abs()).max().unwrap_or(0);
    let margin = (n_max + b.max_abs_degree()) as usize;
    if d.window <= margin {
        return Err(Error::WindowTooSmall { m: d.window, margin });
    }
    let pb = pi_matrix(state, b, d.window, d.level)?;
    let image = delta.apply(b)?;
    let target = pi_matrix(state, &image, d.window, d.level)?;
    let comm = d.exact.commutator(&pb.exact)?;
    let l = d.level as usize;
    let range = margin * l..(2 * d.window + 1 - margin) * l;
    Ok(ImplementationResidual {
        mismatches: comm.window_mismatches(&target.exact, range.clone()),
        max_deviation: comm.window_max_deviation(&target.exact, range),
    })
}

// ---- parametrix indicator --------------------------------------------------------

pub const POSITIVE: &str = "compact-parametrix-consistent";
pub const NEGATIVE: &str = "no-compact-parametrix";
/// Required growth of the annulus minimum per window doubling.
pub const GROWTH_FACTOR: f64 = 1.5;
/// Threshold for the count of small eigenvalues of `(I + D*D)^{1/2}`.
pub const SMALL_THRESHOLD: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParametrixReport {
    #[serde(rename = "M")]
    pub windows: Vec<usize>,
    pub levels: Vec<u64>,
    /// Smallest eigenvalue of `(I + D*D)^{1/2}` on the annulus `M/2 < |m| <= M`.
    pub min_sv: Vec<f64>,
    /// Eigenvalues below [`SMALL_THRESHOLD`] on the whole window.
    pub small_counts: Vec<usize>,
    pub growth: Vec<f64>,
    pub verdict: String,
    pub predicate: String,
    pub state: GnsState,
}

impl ParametrixReport {
    pub fn agrees(&self) -> bool {
        self.verdict == self.predicate
    }
}

/// Levels `j, j p, j p^2, ...` for infinite `N`, `p` the least prime with infinite exponent.
fn growing_levels(data: &ImplementationData, count: usize) -> Vec<u64> {
    let p = data
        .big_n
        .factors()
        .iter()
        .find(|(_, e)| **e == Exponent::Infinite)
        .map(|(p, _)| *p);
    match p {
        None => vec![data.level; count],
        Some(p) => (0..count as u32).map(|i| data.level * p.pow(i)).collect(),
    }
}

fn to_c(s: &Scalar) -> Complex64 {
    s.to_complex()
}

/// Eigenvalues of `(I + D*D)^{1/2}` per fiber `m` of the window. `D*D` is
/// block diagonal: on fiber `m` it is `A_{m+n}^* A_{m+n}` where
/// `(D f)(m) = A_m f(m - n)`.
fn fiber_spectra(state: GnsState, data: &ImplementationData, window: usize, level: u64) -> Vec<(i64, Vec<f64>)> {
    let w = window as i64;
    let n = data.n;
    let j = level as usize;
    let mut out = Vec::new();
    for m in -w..=w {
        let target = m + n;
        let svs: Vec<f64> = match state {
            GnsState::Tau0 => {
                let mut v = data.eta().eval(m);
                if n == 0 {
                    v = v + &data.c;
                }
                vec![to_c(&v).norm()]
            }
            GnsState::Haar => {
                let mut a = DenseMatrix::zeros(j, j);
                for x in 0..j {
                    let xi = x as i64;
                    let psi = data.psi.eval(xi);
                    match &data.case {
                        ImplementationCase::Bounded { h } => {
                            a[(x, x)] += to_c(h.eval(xi + target - n));
                            let xn = (xi + n).rem_euclid(j as i64) as usize;
                            a[(x, xn)] += to_c(&(psi - h.eval(xi)));
                        }
                        ImplementationCase::InfiniteZero { c, eta_tilde: t }
                        | ImplementationCase::FiniteDivisible { c, h_tilde: t } => {
                            let v = c.scale_int(target - n) + t.eval(xi + target - n) - t.eval(xi) + psi;
                            a[(x, x)] += to_c(&v);
                        }
                    }
                }
                a.singular_values().iter().copied().collect()
            }
        };
        out.push((m, svs.into_iter().map(|s| (1.0 + s * s).sqrt()).collect()));
    }
    out
}

/// Doubling test on `(I + D*D)^{1/2}`: the annulus minimum must grow by
/// [`GROWTH_FACTOR`] per doubling and the count below [`SMALL_THRESHOLD`]
/// must stay fixed. The predicate is read off the data.
pub fn parametrix_report(state: GnsState, data: &ImplementationData, windows: &[usize]) -> ParametrixReport {
    let levels = match state {
        GnsState::Tau0 => vec![1; windows.len()],
        GnsState::Haar => growing_levels(data, windows.len()),
    };
    let mut min_sv = Vec::new();
    let mut small_counts = Vec::new();
    for (&w, &level) in windows.iter().zip(&levels) {
        let spectra = fiber_spectra(state, data, w, level);
        let half = w as i64 / 2;
        let annulus_min = spectra
            .iter()
            .filter(|(m, _)| m.abs() > half)
            .flat_map(|(_, s)| s.iter().copied())
            .fold(f64::INFINITY, f64::min);
        let small = spectra.iter().flat_map(|(_, s)| s.iter()).filter(|&&s| s < SMALL_THRESHOLD).count();
        min_sv.push(annulus_min);
        small_counts.push(small);
    }
    let growth: Vec<f64> = min_sv.windows(2).map(|p| p[1] / p[0]).collect();
    let grows = !growth.is_empty() && growth.iter().all(|&g| g >= GROWTH_FACTOR);
    let stable = small_counts.windows(2).all(|p| p[0] == p[1]);
    let verdict = if grows && stable { POSITIVE } else { NEGATIVE };
    let predicate = if data.predicate(state) { POSITIVE } else { NEGATIVE };
    ParametrixReport {
        windows: windows.to_vec(),
        levels,
        min_sv,
        small_counts,
        growth,
        verdict: verdict.into(),
        predicate: predicate.into(),
        state,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Scalar {
        Scalar::from_int(n)
    }

    fn lcf(v: &[i64]) -> LocallyConstantFunction {
        LocallyConstantFunction::new(v.iter().map(|x| q(*x)).collect())
    }

    fn fin(n: u64) -> SupernaturalNumber {
        SupernaturalNumber::finite(n)
    }

    fn linear_data(n: i64, c: i64, per: &[i64], big_n: &SupernaturalNumber) -> ImplementationData {
        let eta = BilateralAffineSequence::new(q(c), BilateralEPSequence::from_lcf(&lcf(per)));
        ImplementationData::from_covariant(&bilateral_covariant(n, eta, big_n).unwrap()).unwrap()
    }

    fn sample() -> BilateralElement {
        BilateralElement::from_terms([
            (1, lcf(&[1, 2])),
            (0, LocallyConstantFunction::constant(Scalar::gaussian(1, 2, 1, 3))),
            (-2, lcf(&[0, 1, 0, 3])),
        ])
    }

    #[test]
    fn states() {
        let e2 = BilateralElement::diag(LocallyConstantFunction::divisibility_indicator(2));
        assert_eq!(tau_haar(&e2), Scalar::ratio(1, 2));
        assert_eq!(tau0(&BilateralElement::diag(lcf(&[5, 7]))), q(5));
        assert!(tau0(&BilateralElement::v()).is_zero());
        assert!(expectation(&BilateralElement::v()).is_zero());
        let b = BilateralElement::v().multiply(&BilateralElement::diag(lcf(&[1, 2, 3]))).multiply(&BilateralElement::vi());
        assert_eq!(expectation(&b), lcf(&[3, 1, 2]));
    }

    #[test]
    fn reproducing_identities() {
        let b = sample();
        let e0 = GNSVector0::basis(0);
        assert_eq!(e0.inner(&pi0_apply(&b, &e0)), tau0(&b));
        let chi = GNSVectorHaar::chi0(4);
        assert_eq!(chi.inner(&pi_haar_apply(&b, &chi).unwrap()).unwrap(), tau_haar(&b));
        assert_eq!(pi_haar_apply(&b, &chi).unwrap(), GNSVectorHaar::of_element(&b, 4).unwrap());
        assert_eq!(pi0_apply(&b, &e0), GNSVector0::of_element(&b));
        assert_eq!(pi0_apply(&BilateralElement::v(), &e0), GNSVector0::basis(1));
    }

    #[test]
    fn haar_generators() {
        let f = GNSVectorHaar::new(2, BTreeMap::from([((3, 1), q(1))])).unwrap();
        let vf = pi_haar_apply(&BilateralElement::v(), &f).unwrap();
        assert_eq!(vf.get(4, 1), q(1));
        let a = BilateralElement::diag(lcf(&[2, 9]));
        assert_eq!(pi_haar_apply(&a, &f).unwrap().get(3, 1), q(2));
        assert!(matches!(pi_haar_apply(&sample(), &f), Err(Error::LevelMismatch(_))));
    }

    #[test]
    fn tau0_examples() {
        let ramp = linear_data(0, 1, &[0], &SupernaturalNumber::prime_power_infinite(2).unwrap());
        let d = build_d_tau0(&ramp, 3);
        for l in -3i64..=3 {
            assert_eq!(d[((l + 3) as usize, (l + 3) as usize)].re, l as f64);
        }
        let shift = linear_data(1, 0, &[1], &fin(2));
        let d = build_d_tau0(&shift, 3);
        assert_eq!(d[(1, 0)].re, 1.0);
        assert_eq!(d.iter().filter(|z| z.norm() > 0.0).count(), 6);
        let coords: Vec<i64> = (-3..=3).collect();
        assert_eq!(check_covariance(&build_d_tau0(&ramp, 3), &coords, 0, &theta_grid(16)), 0.0);
        assert!(check_covariance(&d, &coords, 1, &theta_grid(16)) < 1e-12);
        assert!(check_covariance(&d, &coords, 2, &theta_grid(16)) > 0.5);
    }

    #[test]
    fn haar_examples() {
        let n2 = fin(2);
        let bounded = linear_data(1, 0, &[1, 3], &n2);
        let with_psi = bounded.clone().with_psi(lcf(&[1, 3])).unwrap();
        let d = build_d_haar_exact(&with_psi, 2).unwrap();
        // second term vanishes: one entry per column
        assert_eq!(d.exact.to_dense().iter().filter(|z| z.norm() > 0.0).count(), 4 * 2);
        let lin = linear_data(2, 3, &[0], &n2);
        let d = build_d_haar_exact(&lin, 4).unwrap();
        let idx = |m: i64, x: u64| ((m + 4) * 2) as usize + x as usize;
        assert_eq!(d.exact.get(idx(1, 1), idx(-1, 1)), q(3 * (1 - 2)));
    }

    #[test]
    fn implementations_commute_correctly() {
        let cases = [
            linear_data(1, 0, &[1, 3], &fin(2)),
            linear_data(2, 3, &[0, 5], &fin(2)),
            linear_data(0, 2, &[1, -1], &SupernaturalNumber::prime_power_infinite(2).unwrap()),
            linear_data(-1, 0, &[2, 0, 1, 1], &SupernaturalNumber::prime_power_infinite(2).unwrap()),
        ];
        for data in cases {
            let data = data.with_psi(lcf(&[1, 0])).unwrap();
            let delta = data.derivation().unwrap();
            let b = BilateralElement::from_terms([(1, lcf(&[1, 2])), (-1, lcf(&[3, 0]))]);
            for state in [GnsState::Tau0, GnsState::Haar] {
                let d = build_d(state, &data, 12).unwrap();
                let r = check_implementation(state, &d, &delta, &b).unwrap();
                assert!(r.exact(), "{state:?} {data:?} {r:?}");
                let cov = check_covariance(&d.dense(), &d.coordinates(), data.n, &theta_grid(16));
                assert!(cov < 1e-12);
            }
        }
    }

    #[test]
    fn wrong_regime_rejected() {
        let case = ImplementationCase::Bounded { h: lcf(&[1]) };
        assert!(ImplementationData::new(2, case, LocallyConstantFunction::zero(), q(0), &fin(2)).is_err());
    }

    #[test]
    fn parametrix_examples() {
        let ramp = linear_data(0, 1, &[0], &SupernaturalNumber::prime_power_infinite(2).unwrap());
        let r = parametrix_report(GnsState::Tau0, &ramp, &[64, 128, 256]);
        assert_eq!(r.verdict, POSITIVE);
        assert!(r.agrees());
        let bounded = linear_data(1, 0, &[1, 3], &fin(2));
        let r = parametrix_report(GnsState::Tau0, &bounded, &[64, 128, 256]);
        assert_eq!(r.verdict, NEGATIVE);
        assert!(r.agrees());
        let haar = linear_data(2, 1, &[0, 1], &fin(2));
        let r = parametrix_report(GnsState::Haar, &haar, &[64, 128, 256]);
        assert_eq!(r.verdict, POSITIVE);
        assert!(r.growth.iter().all(|g| *g >= GROWTH_FACTOR));
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("M").is_some() && json.get("min_sv").is_some());
        let inf = linear_data(0, 1, &[0], &SupernaturalNumber::prime_power_infinite(2).unwrap());
        let r = parametrix_report(GnsState::Haar, &inf, &[64, 128, 256]);
        assert_eq!(r.levels, vec![1, 2, 4]);
        assert_eq!(r.verdict, NEGATIVE);
    }
}

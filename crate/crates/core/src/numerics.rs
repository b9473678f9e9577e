//! Finite sections and floating-point diagnostics.
//!
//! The exact path ([`ExactMatrix`]) verifies symbolic identities entrywise.
//! The float path ([`DenseMatrix`]) measures norms and spectra.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{to_matrix_form, BilateralElement, UnilateralElement};
use crate::error::{Error, Result};
use crate::profinite::SupernaturalNumber;
use crate::scalar::Scalar;

pub type DenseMatrix = DMatrix<Complex64>;

const POWER_TOL: f64 = 1e-10;
const POWER_CAP: usize = 10_000;
const POWER_SEED: u64 = 0x5eed_0b5e;

/// Row-sparse exact matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BTreeMap<usize, Scalar>>,
}

impl ExactMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ExactMatrix { rows, cols, data: vec![BTreeMap::new(); rows] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Scalar {
        self.data[i].get(&j).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        if v.is_zero() {
            self.data[i].remove(&j);
        } else {
            self.data[i].insert(j, v);
        }
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: &Scalar) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn row(&self, i: usize) -> &BTreeMap<usize, Scalar> {
        &self.data[i]
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        if self.cols != o.rows {
            return Err(Error::SizeMismatch(format!("{}x{} * {}x{}", self.rows, self.cols, o.rows, o.cols)));
        }
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            let mut acc: BTreeMap<usize, Scalar> = BTreeMap::new();
            for (t, a) in &self.data[i] {
                for (j, b) in &o.data[*t] {
                    *acc.entry(*j).or_insert_with(Scalar::zero) += &(a * b);
                }
            }
            acc.retain(|_, v| !v.is_zero());
            out.data[i] = acc;
        }
        Ok(out)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        if (self.rows, self.cols) != (o.rows, o.cols) {
            return Err(Error::SizeMismatch("shape".into()));
        }
        let mut out = self.clone();
        for i in 0..o.rows {
            for (j, v) in &o.data[i] {
                out.add_to(i, *j, &-v);
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, o: &Self) -> Result<Self> {
        self.mul(o)?.sub(&o.mul(self)?)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for (j, v) in &self.data[i] {
                out.set(*j, i, v.conj());
            }
        }
        out
    }

    /// Entries `(i, j)` with both indices in `range` that differ.
    pub fn window_mismatches(&self, o: &Self, range: std::ops::Range<usize>) -> usize {
        range
            .clone()
            .flat_map(|i| range.clone().map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j) != o.get(i, j))
            .count()
    }

    /// Largest `|a_ij - b_ij|^2` over the window, as a float.
    pub fn window_max_deviation(&self, o: &Self, range: std::ops::Range<usize>) -> f64 {
        let mut worst = 0.0f64;
        for i in range.clone() {
            for j in range.clone() {
                let d = (self.get(i, j) - o.get(i, j)).to_complex().norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in &self.data[i] {
                m[(i, *j)] = v.to_complex();
            }
        }
        m
    }
}

/// Entries `(row, col, value)` of the compression of `a` to `E_0..E_{m-1}`.
fn unilateral_entries(a: &UnilateralElement, m: usize) -> Vec<(usize, usize, Scalar)> {
    let mut out = Vec::new();
    for (n, c) in a.terms() {
        let p = n.unsigned_abs() as usize;
        for k in 0..m {
            // U^n a(K): E_k -> a(k) E_{k+n}; a(K)(U*)^p: E_{k+p} -> a(k) E_k
            let (row, col) = if *n >= 0 { (k + p, k) } else { (k, k + p) };
            if row < m && col < m {
                out.push((row, col, c.eval(k as i64)));
            }
        }
    }
    out
}

pub fn truncate_unilateral_exact(a: &UnilateralElement, m: usize) -> ExactMatrix {
    let mut out = ExactMatrix::zeros(m, m);
    for (i, j, v) in unilateral_entries(a, m) {
        out.add_to(i, j, &v);
    }
    out
}

pub fn truncate_unilateral(a: &UnilateralElement, m: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m, m);
    for (i, j, v) in unilateral_entries(a, m) {
        out[(i, j)] += v.to_complex();
    }
    out
}

/// Entries of the compression of `b` to `E_{-m}..E_m`; index `l + m`.
fn bilateral_entries(b: &BilateralElement, m: usize) -> Vec<(usize, usize, Scalar)> {
    let mi = m as i64;
    let mut out = Vec::new();
    for (n, c) in b.terms() {
        for l in -mi..=mi {
            let row = l + n;
            if (-mi..=mi).contains(&row) {
                out.push(((row + mi) as usize, (l + mi) as usize, c.eval(l).clone()));
            }
        }
    }
    out
}

pub fn truncate_bilateral_exact(b: &BilateralElement, m: usize) -> ExactMatrix {
    let mut out = ExactMatrix::zeros(2 * m + 1, 2 * m + 1);
    for (i, j, v) in bilateral_entries(b, m) {
        out.add_to(i, j, &v);
    }
    out
}

pub fn truncate_bilateral(b: &BilateralElement, m: usize) -> DenseMatrix {
    truncate_bilateral_exact(b, m).to_dense()
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TruncationReport {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "D")]
    pub margin: usize,
    /// Number of interior entries where the exact product differs.
    pub exact_mismatches: usize,
    /// Largest interior deviation on the float path, relative to the
    /// largest interior entry.
    pub max_interior_deviation: f64,
    pub verdict: String,
}

impl TruncationReport {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}

/// Compares `trunc(ab)` with `trunc(a) trunc(b)` on the interior window
/// `0..M-D`, `D` the sum of the operands' largest absolute degrees.
pub fn oracle_product_check(a: &UnilateralElement, b: &UnilateralElement, m: usize) -> Result<TruncationReport> {
    let d = (a.max_abs_degree() + b.max_abs_degree()) as usize;
    if m <= 2 * d {
        return Err(Error::WindowTooSmall { m, margin: d });
    }
    let window = 0..m - d;
    let sym = truncate_unilateral_exact(&a.multiply(b), m);
    let prod = truncate_unilateral_exact(a, m).mul(&truncate_unilateral_exact(b, m))?;
    let exact_mismatches = sym.window_mismatches(&prod, window.clone());

    let fsym = truncate_unilateral(&a.multiply(b), m);
    let fprod = truncate_unilateral(a, m) * truncate_unilateral(b, m);
    let mut dev = 0.0f64;
    let mut scale = 0.0f64;
    for i in window.clone() {
        for j in window.clone() {
            dev = dev.max((fsym[(i, j)] - fprod[(i, j)]).norm());
            scale = scale.max(fsym[(i, j)].norm());
        }
    }
    let rel = if scale > 0.0 { dev / scale } else { dev };
    let verdict = if exact_mismatches == 0 && rel <= 1e-12 { "pass" } else { "fail" };
    Ok(TruncationReport { m, margin: d, exact_mismatches, max_interior_deviation: rel, verdict: verdict.into() })
}

/// Power iteration for the top eigenvalue of `A^* A`, with `A` given by
/// its action and the action of its adjoint.
fn power_iteration(
    n: usize,
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    apply_adj: impl Fn(&[Complex64]) -> Vec<Complex64>,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let v0 = norm(&v);
    v.iter_mut().for_each(|z| *z /= v0);
    let mut lambda = 0.0f64;
    for it in 1..=POWER_CAP {
        let av = apply(&v);
        let next = av.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let w = apply_adj(&av);
        let wn = norm(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|z| z / wn).collect();
        if it > 1 && (next - lambda).abs() <= POWER_TOL * next.max(f64::MIN_POSITIVE) {
            return Ok(next.sqrt());
        }
        lambda = next;
    }
    Err(Error::NoConvergence { iterations: POWER_CAP, estimate: lambda.sqrt() })
}

/// Largest singular value of a dense matrix by power iteration.
pub fn largest_singular_value(a: &DenseMatrix) -> Result<f64> {
    let ah = a.adjoint();
    power_iteration(
        a.ncols(),
        |v| (a * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec(),
        |v| (&ah * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec(),
    )
}

/// Largest singular value of a sparse `rows x cols` matrix.
pub fn sparse_largest_singular_value(rows: usize, cols: usize, entries: &[(usize, usize, Complex64)]) -> Result<f64> {
    power_iteration(
        cols,
        |v| {
            let mut out = vec![Complex64::new(0.0, 0.0); rows];
            for &(i, j, z) in entries {
                out[i] += z * v[j];
            }
            out
        },
        |v| {
            let mut out = vec![Complex64::new(0.0, 0.0); cols];
            for &(i, j, z) in entries {
                out[j] += z.conj() * v[i];
            }
            out
        },
    )
}

/// `||P_M a P_M||`, a lower bound for the operator norm of `a`.
pub fn norm_lower(a: &UnilateralElement, m: usize) -> Result<f64> {
    let entries: Vec<_> = unilateral_entries(a, m)
        .into_iter()
        .filter(|(_, _, v)| !v.is_zero())
        .map(|(i, j, v)| (i, j, v.to_complex()))
        .collect();
    sparse_largest_singular_value(m, m, &entries)
}

/// `diag(e^{ik theta}) A diag(e^{-ik theta})` on the truncation.
pub fn rho_theta(a: &UnilateralElement, theta: f64, m: usize) -> DenseMatrix {
    let mut t = truncate_unilateral(a, m);
    for i in 0..m {
        for j in 0..m {
            t[(i, j)] *= Complex64::from_polar(1.0, (i as f64 - j as f64) * theta);
        }
    }
    t
}

/// `(1/2pi) int e^{-in theta} rho_theta(a) d theta` by the trapezoid rule.
pub fn numeric_spectral_component(a: &UnilateralElement, n: i64, m: usize, nodes: usize) -> DenseMatrix {
    let mut acc = DenseMatrix::zeros(m, m);
    for q in 0..nodes {
        let theta = 2.0 * PI * q as f64 / nodes as f64;
        acc += rho_theta(a, theta, m) * Complex64::from_polar(1.0, -(n as f64) * theta);
    }
    acc / Complex64::new(nodes as f64, 0.0)
}

pub fn max_abs_entry(a: &DenseMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct QuotientNormReport {
    pub estimate: f64,
    /// `(grid size, max norm on that grid)` for each refinement.
    pub refinements: Vec<(usize, f64)>,
}

fn spectral_norm(m: &DenseMatrix) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Max over a uniform grid of `||F(e^{it})||` where `F` is the matrix form
/// of `b`; refinements at `G/4`, `G/2`, `G` are logged.
pub fn quotient_norm_estimate(b: &BilateralElement, big_n: &SupernaturalNumber, grid: usize) -> Result<QuotientNormReport> {
    let f = to_matrix_form(b, big_n)?;
    let grid = grid.max(1);
    let mut refinements = Vec::new();
    for g in [grid / 4, grid / 2, grid] {
        if g == 0 || refinements.iter().any(|(x, _)| *x == g) {
            continue;
        }
        let best = (0..g)
            .map(|q| spectral_norm(&f.eval(2.0 * PI * q as f64 / g as f64)))
            .fold(0.0, f64::max);
        refinements.push((g, best));
    }
    let estimate = refinements.last().map(|x| x.1).unwrap_or(0.0);
    Ok(QuotientNormReport { estimate, refinements })
}

/// `row,col,re,im` lines, nonzero entries only.
pub fn dump_csv(a: &DenseMatrix) -> String {
    let mut s = String::from("row,col,re,im\n");
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let z = a[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                let _ = writeln!(s, "{i},{j},{:e},{:e}", z.re, z.im);
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profinite::LocallyConstantFunction;
    use crate::sequences::EPSequence;

    type U = UnilateralElement;
    type B = BilateralElement;

    fn s(v: i64) -> Scalar {
        Scalar::from_int(v)
    }

    #[test]
    fn truncation_examples() {
        let t = truncate_unilateral_exact(&U::u(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j + 1 { s(1) } else { s(0) };
                assert_eq!(t.get(i, j), expected);
            }
        }
        let p = truncate_unilateral_exact(&U::p0(), 5);
        assert_eq!(p.get(0, 0), s(1));
        assert_eq!(p.row(0).len() + (1..5).map(|i| p.row(i).len()).sum::<usize>(), 1);
        let a = EPSequence::new([(1, s(7))].into_iter().collect(), vec![s(1), s(2)]);
        let d = truncate_unilateral_exact(&U::diag(a.clone()), 6);
        for k in 0..6 {
            assert_eq!(d.get(k, k), a.eval(k as i64));
        }
        let us = truncate_unilateral_exact(&U::us(), 4);
        assert_eq!(us, truncate_unilateral_exact(&U::u(), 4).adjoint());
    }

    #[test]
    fn oracle_examples() {
        let r = oracle_product_check(&U::u(), &U::us(), 16).unwrap();
        assert!(r.passed());
        assert_eq!(r.margin, 2);
        let x = U::u().pow(7).add(&U::us());
        assert!(matches!(oracle_product_check(&x, &x, 16), Err(Error::WindowTooSmall { .. })));
        // the full window is not exact: the last diagonal entry of UU* differs
        let full = truncate_unilateral_exact(&U::u(), 16).mul(&truncate_unilateral_exact(&U::us(), 16)).unwrap();
        let sym = truncate_unilateral_exact(&U::u().multiply(&U::us()), 16);
        assert_eq!(sym.window_mismatches(&full, 0..16), 0);
        let rev = truncate_unilateral_exact(&U::us(), 16).mul(&truncate_unilateral_exact(&U::u(), 16)).unwrap();
        let sym = truncate_unilateral_exact(&U::us().multiply(&U::u()), 16);
        assert_eq!(sym.window_mismatches(&rev, 0..16), 1);
        assert_eq!(sym.window_mismatches(&rev, 0..15), 0);
    }

    #[test]
    fn norm_examples() {
        assert!((norm_lower(&U::identity(), 10).unwrap() - 1.0).abs() < 1e-9);
        assert!((norm_lower(&U::u(), 10).unwrap() - 1.0).abs() < 1e-9);
        let ramp = EPSequence::truncated_ramp(64);
        for m in [8usize, 16, 32] {
            assert!((norm_lower(&U::diag(ramp.clone()), m).unwrap() - m as f64).abs() < 1e-6);
        }
        let x = U::u().add(&U::us()).add(&U::diag(EPSequence::periodic(vec![s(1), s(-1)])));
        let mut prev = 0.0;
        for m in [16usize, 32, 64, 128] {
            let v = norm_lower(&x, m).unwrap();
            assert!(v + 1e-9 >= prev);
            prev = v;
        }
    }

    #[test]
    fn rho_examples() {
        let x = U::u().add(&U::diag(EPSequence::spike(2, s(3))));
        assert_eq!(rho_theta(&x, 0.0, 8), truncate_unilateral(&x, 8));
        let d = U::diag(EPSequence::periodic(vec![s(1), s(2), s(3)]));
        assert!(max_abs_entry(&(rho_theta(&d, 1.3, 8) - truncate_unilateral(&d, 8))) < 1e-15);
        let y = x.add(&U::us().pow(2).scale(&Scalar::i()));
        for n in -2..=2 {
            let num = numeric_spectral_component(&y, n, 16, 256);
            let exact = truncate_unilateral(&y.spectral_component(n), 16);
            assert!(max_abs_entry(&(num - exact)) < 1e-10);
        }
    }

    #[test]
    fn quotient_norm_examples() {
        let n1 = SupernaturalNumber::finite(1);
        assert!((quotient_norm_estimate(&B::v(), &n1, 64).unwrap().estimate - 1.0).abs() < 1e-12);
        let e = B::diag(LocallyConstantFunction::divisibility_indicator(2));
        assert!((quotient_norm_estimate(&e, &SupernaturalNumber::finite(2), 64).unwrap().estimate - 1.0).abs() < 1e-12);
        let r = quotient_norm_estimate(&B::v().add(&B::vi()), &n1, 64).unwrap();
        assert!((r.estimate - 2.0).abs() < 1e-12);
        assert_eq!(r.refinements.len(), 3);
    }

    #[test]
    fn bilateral_truncation() {
        let b = B::v().multiply(&B::diag(LocallyConstantFunction::new(vec![s(1), s(2)])));
        let t = truncate_bilateral_exact(&b, 3);
        // V b(L) E_l = b(l) E_{l+1}
        assert_eq!(t.get(4, 3), s(1));
        assert_eq!(t.get(5, 4), s(2));
        assert_eq!(t.get(3, 2), s(2));
    }

    #[test]
    fn csv_dump() {
        let csv = dump_csv(&truncate_unilateral(&U::u(), 2));
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("row,col,re,im"));
    }
}

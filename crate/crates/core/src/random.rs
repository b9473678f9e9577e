//! Seeded generators of small random algebra data, shared by tests and the
//! command line.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{BilateralElement, Laurent, MatrixTrigPoly, UnilateralElement};
use crate::derivations::{regime, DerivationSum, LaurentFunction, Regime};
use crate::profinite::{finite_divisors, LocallyConstantFunction, SupernaturalNumber};
use crate::scalar::Scalar;
use crate::sequences::{AffineSequence, EPSequence};

/// Shape bounds for generated data.
#[derive(Clone, Debug)]
pub struct Shape {
    pub max_degree: u64,
    /// Admissible periods; all must divide the `N` in use.
    pub periods: Vec<u64>,
    /// Largest index of a finite correction.
    pub max_support: u64,
    /// Number of nonzero degrees, at most.
    pub max_terms: usize,
}

impl Shape {
    /// Periods `<= 12` dividing `N`.
    pub fn for_n(big_n: &SupernaturalNumber, max_degree: u64) -> Self {
        Shape { max_degree, periods: finite_divisors(big_n, 12), max_support: 8, max_terms: 3 }
    }
}

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Gaussian rational with small numerators and denominators, often real.
    pub fn scalar(&mut self) -> Scalar {
        let re = Scalar::ratio(self.rng.gen_range(-4..=4), self.rng.gen_range(1..=3));
        if self.rng.gen_bool(0.6) {
            return re;
        }
        re + Scalar::gaussian(0, 1, self.rng.gen_range(-3..=3), self.rng.gen_range(1..=2))
    }

    pub fn nonzero_scalar(&mut self) -> Scalar {
        loop {
            let s = self.scalar();
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn period(&mut self, shape: &Shape) -> u64 {
        *shape.periods.choose(&mut self.rng).unwrap_or(&1)
    }

    pub fn lcf(&mut self, shape: &Shape) -> LocallyConstantFunction {
        let p = self.period(shape);
        LocallyConstantFunction::new((0..p).map(|_| self.scalar()).collect())
    }

    /// Periodic table of mean zero.
    pub fn mean_zero_lcf(&mut self, shape: &Shape) -> LocallyConstantFunction {
        let f = self.lcf(shape);
        f.sub(&LocallyConstantFunction::constant(f.haar_integral()))
    }

    pub fn c00(&mut self, shape: &Shape) -> BTreeMap<u64, Scalar> {
        let count = self.rng.gen_range(0..=3);
        (0..count).map(|_| (self.rng.gen_range(0..=shape.max_support), self.scalar())).collect()
    }

    pub fn ep(&mut self, shape: &Shape) -> EPSequence {
        let table = self.lcf(shape).values().to_vec();
        let c = self.c00(shape);
        EPSequence::new(c, table)
    }

    fn degrees(&mut self, shape: &Shape) -> Vec<i64> {
        let d = shape.max_degree as i64;
        let count = self.rng.gen_range(1..=shape.max_terms.max(1));
        (0..count).map(|_| self.rng.gen_range(-d..=d)).collect()
    }

    pub fn unilateral(&mut self, shape: &Shape) -> UnilateralElement {
        let degs = self.degrees(shape);
        let terms: Vec<(i64, EPSequence)> = degs.into_iter().map(|n| (n, self.ep(shape))).collect();
        UnilateralElement::from_terms(terms)
    }

    pub fn bilateral(&mut self, shape: &Shape) -> BilateralElement {
        let degs = self.degrees(shape);
        let terms: Vec<(i64, LocallyConstantFunction)> = degs.into_iter().map(|n| (n, self.lcf(shape))).collect();
        BilateralElement::from_terms(terms)
    }

    /// A valid `beta_n`: bounded in the bounded regime, affine otherwise.
    pub fn beta(&mut self, n: i64, big_n: &SupernaturalNumber, shape: &Shape) -> AffineSequence {
        let ep = self.ep(shape);
        match regime(n, big_n) {
            Regime::Bounded => AffineSequence::bounded(ep),
            Regime::Increment => AffineSequence::new(self.scalar(), ep),
        }
    }

    pub fn derivation(&mut self, big_n: &SupernaturalNumber, shape: &Shape) -> DerivationSum {
        let degs = self.degrees(shape);
        let comps: BTreeMap<i64, AffineSequence> = degs.into_iter().map(|n| (n, self.beta(n, big_n, shape))).collect();
        DerivationSum::new(comps, big_n).expect("generated components are valid")
    }

    pub fn laurent(&mut self, max_degree: u64) -> Laurent {
        let d = max_degree as i64;
        let mut out = Laurent::new();
        for _ in 0..self.rng.gen_range(1..=3) {
            let s = self.nonzero_scalar();
            out.insert(self.rng.gen_range(-d..=d), s);
        }
        out
    }

    pub fn laurent_function(&mut self, max_degree: u64) -> LaurentFunction {
        LaurentFunction::new(self.laurent(max_degree))
    }

    pub fn matrix_trig_poly(&mut self, size: usize, max_degree: u64) -> MatrixTrigPoly {
        let entries = (0..size)
            .map(|_| {
                (0..size)
                    .map(|_| if self.rng.gen_bool(0.5) { self.laurent(max_degree) } else { Laurent::new() })
                    .collect()
            })
            .collect();
        MatrixTrigPoly::from_entries(entries).expect("square by construction")
    }
}

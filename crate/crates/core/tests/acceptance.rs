//! The ten acceptance criteria. Each prints one PASS/FAIL line; the binary
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bdshift_core::algebra::{matrix_units, mult_defect, BilateralElement, MatrixTrigPoly, UnilateralElement};
use bdshift_core::derivations::{
    classify, covariant, d_f_build, delta_f_apply, extract_f, fejer_mean, fejer_weight, from_inner, inner_part_h,
    obstruction_gap, quotient_derivation, regime, DerivationSum, Regime,
};
use bdshift_core::gns::{
    build_d, check_covariance, check_implementation, parametrix_report, pi0_apply, pi_haar_apply, tau0, tau_haar,
    theta_grid, GNSVector0, GNSVectorHaar, GnsState, ImplementationCase, ImplementationData, GROWTH_FACTOR, POSITIVE,
};
use bdshift_core::numerics::{norm_lower, oracle_product_check};
use bdshift_core::profinite::{finite_divisors, LocallyConstantFunction, SupernaturalNumber};
use bdshift_core::random::{Sampler, Shape};
use bdshift_core::sequences::{AffineSequence, EPSequence};
use bdshift_core::{Error, Scalar};

type Outcome = std::result::Result<String, String>;

fn fin(n: u64) -> SupernaturalNumber {
    SupernaturalNumber::finite(n)
}

fn two_inf() -> SupernaturalNumber {
    SupernaturalNumber::prime_power_infinite(2).unwrap()
}

fn q(n: i64) -> Scalar {
    Scalar::from_int(n)
}

fn lcf(v: &[i64]) -> LocallyConstantFunction {
    LocallyConstantFunction::new(v.iter().map(|x| q(*x)).collect())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<T>(r: bdshift_core::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|err| err.to_string())
}

const SMALL_N: [u64; 6] = [1, 2, 3, 4, 6, 12];

fn rewrite_soundness() -> Outcome {
    let mut s = Sampler::new(1);
    for i in 0..200 {
        let big_n = fin(SMALL_N[i % SMALL_N.len()]);
        let shape = Shape { max_degree: 4, periods: finite_divisors(&big_n, 12), max_support: 8, max_terms: 3 };
        let a = s.unilateral(&shape);
        let b = s.unilateral(&shape);
        let report = e(oracle_product_check(&a, &b, 64))?;
        ensure(report.passed(), || format!("pair {i}: {} interior mismatches", report.exact_mismatches))?;
    }
    Ok("200 pairs exact at M = 64".into())
}

fn matrix_unit_suite() -> Outcome {
    for nv in [2u64, 3, 4, 6] {
        let p = e(matrix_units(&fin(nv)))?;
        let n = nv as usize;
        for s in 0..n {
            for r in 0..n {
                ensure(p[s][r].adjoint() == p[r][s], || format!("N={nv}: P_{s}{r}* != P_{r}{s}"))?;
                for t in 0..n {
                    for qq in 0..n {
                        let lhs = p[s][r].multiply(&p[t][qq]);
                        let rhs = if t == r { p[s][qq].clone() } else { BilateralElement::zero() };
                        ensure(lhs == rhs, || format!("N={nv}: P_{s}{r} P_{t}{qq}"))?;
                    }
                }
            }
        }
        let mut v = BilateralElement::v_pow(nv as i64).multiply(&p[0][n - 1]);
        for s in 0..n - 1 {
            v = v.add(&p[s + 1][s]);
        }
        ensure(v == BilateralElement::v(), || format!("N={nv}: V decomposition"))?;
    }
    Ok("N = 2, 3, 4, 6 exact".into())
}

fn toeplitz_defect() -> Outcome {
    let mut s = Sampler::new(3);
    for i in 0..100 {
        let big_n = fin(SMALL_N[i % SMALL_N.len()]);
        let shape = Shape::for_n(&big_n, 4);
        let b1 = s.bilateral(&shape);
        let b2 = s.bilateral(&shape);
        ensure(mult_defect(&b1, &b2).is_compact(), || format!("pair {i}: defect not compact"))?;
    }
    let p0 = mult_defect(&BilateralElement::v(), &BilateralElement::vi());
    ensure(p0 == UnilateralElement::p0(), || "defect(V, V^-1) != P_0".into())?;
    Ok("100 compact defects; defect(V, V^-1) = P_0".into())
}

fn compacts_preserved() -> Outcome {
    let mut s = Sampler::new(4);
    let ns = [fin(2), fin(3), fin(6), two_inf(), fin(12)];
    for i in 0..50 {
        let big_n = &ns[i % ns.len()];
        let d = s.derivation(big_n, &Shape::for_n(big_n, 4));
        for r in 0..=3 {
            for t in 0..=3 {
                let img = e(d.apply(&UnilateralElement::rank_one(r, t)))?;
                ensure(img.is_compact(), || format!("derivation {i}: image of U^{r} P_0 U*^{t} not compact"))?;
            }
        }
    }
    Ok("50 derivations x 16 basis compacts".into())
}

fn classification_round_trips() -> Outcome {
    let mut s = Sampler::new(5);
    // (N, n) in each linear regime
    let regimes = [(fin(2), 2i64), (fin(3), -3), (fin(6), 0), (two_inf(), 0)];
    for (big_n, n) in &regimes {
        let shape = Shape::for_n(big_n, 4);
        for i in 0..100 {
            let beta = AffineSequence::new(s.scalar(), s.ep(&shape));
            let d = e(covariant(*n, beta, big_n))?;
            let alpha = d.increment();
            let cls = e(classify(&d))?;
            let back = cls.reassemble();
            ensure(back == d, || format!("N={big_n}, n={n}, sample {i}: reassembly differs"))?;
            ensure(back.increment() == alpha, || format!("N={big_n}, n={n}, sample {i}: increment differs"))?;
            ensure(cls.c == d.beta.linear, || format!("N={big_n}, n={n}, sample {i}: C differs"))?;
        }
    }
    let bounded = [(fin(2), 1i64), (fin(6), 4), (two_inf(), 3)];
    for (big_n, n) in &bounded {
        let shape = Shape::for_n(big_n, 4);
        let err = covariant(*n, AffineSequence::new(s.nonzero_scalar(), s.ep(&shape)), big_n);
        ensure(matches!(err, Err(Error::UnboundedCoefficient { .. })), || {
            format!("N={big_n}, n={n}: C != 0 accepted")
        })?;
        let d = e(covariant(*n, AffineSequence::bounded(s.ep(&shape)), big_n))?;
        ensure(matches!(classify(&d), Err(Error::RegimeMismatch(_))), || format!("N={big_n}, n={n}: classified"))?;
    }
    let one = Scalar::one();
    let mut s = Sampler::new(55);
    for i in 0..100 {
        let big_n = fin(SMALL_N[i % SMALL_N.len()]);
        let beta = s.ep(&Shape::for_n(&big_n, 0));
        let gap = e(obstruction_gap(0, &big_n, &beta))?;
        ensure(gap >= one.re, || format!("candidate {i}: gap {gap} < 1"))?;
    }
    Ok("4 x 100 round trips; bounded C != 0 rejected; 100 gaps >= 1".into())
}

fn fejer_convergence() -> Outcome {
    let big_n = two_inf();
    let units = [q(1), q(-1), Scalar::i(), -Scalar::i()];
    let mut comps = BTreeMap::new();
    for n in -8i64..=8 {
        let k = n.rem_euclid(4) as usize;
        let table: Vec<Scalar> = (0..4).map(|j| units[(k + j) % 4].clone()).collect();
        comps.insert(n, AffineSequence::bounded(EPSequence::periodic(table)));
    }
    let d = e(DerivationSum::new(comps, &big_n))?;
    let u = UnilateralElement::u();
    let window = 128;
    let mut norms = Vec::new();
    for n in -8i64..=8 {
        norms.push(e(norm_lower(&e(d.component(n).apply(&u))?, window))?);
    }
    let total: f64 = norms.iter().sum();
    let mut prev = f64::INFINITY;
    let mut scaled = Vec::new();
    for m in [8u64, 16, 32, 64] {
        let rest = e(d.sub(&fejer_mean(&d, m)))?;
        let mut expected = DerivationSum::zero(&big_n);
        for n in -8i64..=8 {
            let w = Scalar::one() - fejer_weight(n, m);
            ensure(w == Scalar::ratio(n.abs(), m as i64 + 1), || format!("weight n={n}, M={m}"))?;
            expected = e(expected.add(&d.component(n).to_sum().scale(&w)))?;
        }
        ensure(rest == expected, || format!("M={m}: d - Fejer_M d is not sum |n|/(M+1) d_n"))?;
        let r = e(norm_lower(&e(rest.apply(&u))?, window))?;
        let bound = 8.0 / (m as f64 + 1.0) * total;
        ensure(r < prev, || format!("M={m}: residual {r} not decreasing"))?;
        ensure(r <= bound * (1.0 + 1e-9), || format!("M={m}: residual {r} above bound {bound}"))?;
        prev = r;
        scaled.push(r * (m as f64 + 1.0));
    }
    let spread = scaled.iter().fold(0.0f64, |a, x| a.max((x - scaled[0]).abs()));
    ensure(spread <= 1e-8 * scaled[0], || format!("(M+1) residual not constant: {scaled:?}"))?;
    Ok(format!("(M+1) * residual = {:.6}", scaled[0]))
}

fn finite_n_classification() -> Outcome {
    let mut s = Sampler::new(7);
    for nv in [2u64, 3, 4] {
        let big_n = fin(nv);
        let shape = Shape::for_n(&big_n, 3);
        for i in 0..50 {
            let f = s.laurent_function(3);
            let d = e(d_f_build(&f, &big_n))?;
            ensure(e(extract_f(&d))? == f, || format!("N={nv}, f {i}: round trip"))?;
            let x = s.unilateral(&shape);
            let mixed = e(d.add(&e(from_inner(&x, &big_n))?))?;
            let got = e(extract_f(&mixed))?;
            ensure(got == f, || format!("N={nv}, f {i}: mixed recovery"))?;
            let rem = e(mixed.sub(&e(d_f_build(&got, &big_n))?))?;
            for n in rem.components().keys() {
                if regime(*n, &big_n) == Regime::Increment {
                    let c = e(classify(&rem.component(*n)))?.c;
                    ensure(c.is_zero(), || format!("N={nv}, f {i}: remainder C_{n} = {c}"))?;
                }
            }
        }
        let vn = BilateralElement::v_pow(nv as i64);
        for j in -2i64..=2 {
            let n = j * nv as i64;
            let beta = AffineSequence::new(s.scalar(), s.ep(&shape));
            let d = e(covariant(n, beta, &big_n))?;
            let c = e(classify(&d))?.c;
            let qd = e(quotient_derivation(&d.to_sum()))?;
            let lhs = e(qd.apply(&vn))?;
            let rhs = BilateralElement::v_pow(n + nv as i64).scale(&c.scale_int(nv as i64));
            ensure(lhs == rhs, || format!("N={nv}, n={n}: [d_n](V^N) != N C_n V^(n+N)"))?;
        }
    }
    Ok("3 x 50 round trips, mixed recovery, [d_n](V^N) identity".into())
}

fn delta_f_and_h() -> Outcome {
    let mut s = Sampler::new(8);
    for i in 0..50 {
        let size = 2 + i % 2;
        let f = s.laurent_function(2);
        let a = s.matrix_trig_poly(size, 2);
        let b = s.matrix_trig_poly(size, 2);
        let lhs = delta_f_apply(&f, &e(a.mul(&b))?);
        let rhs = e(e(delta_f_apply(&f, &a).mul(&b))?.add(&e(a.mul(&delta_f_apply(&f, &b)))?))?;
        ensure(lhs == rhs, || format!("pair {i}: Leibniz fails"))?;
    }
    for size in [2usize, 3] {
        for trial in 0..10 {
            let x = s.matrix_trig_poly(size, 2);
            let f = s.laurent_function(2);
            let mut images = BTreeMap::new();
            for r in 0..size {
                for t in 0..size {
                    let unit = MatrixTrigPoly::unit(size, r, t, 0);
                    let img = e(x.commutator(&unit))?;
                    // delta_f kills constants, so delta = delta_f + [X, .] on units
                    let img = e(img.add(&delta_f_apply(&f, &unit)))?;
                    images.insert((r, t), img);
                }
            }
            let h = e(inner_part_h(&images, size))?;
            for ((r, t), img) in &images {
                let unit = MatrixTrigPoly::unit(size, *r, *t, 0);
                ensure(&e(h.commutator(&unit))? == img, || format!("N={size}, trial {trial}: [H, E_{r}{t}]"))?;
            }
        }
    }
    Ok("50 Leibniz pairs; H reproduces 20 derivations on all units".into())
}

struct GnsCase {
    label: &'static str,
    data: ImplementationData,
}

fn linear_case(label: &'static str, n: i64, c: i64, per: &[i64], big_n: &SupernaturalNumber) -> GnsCase {
    let case = match (regime(n, big_n), big_n.is_finite()) {
        (Regime::Bounded, _) => ImplementationCase::Bounded { h: lcf(per) },
        (Regime::Increment, true) => ImplementationCase::FiniteDivisible { c: q(c), h_tilde: lcf(per) },
        (Regime::Increment, false) => ImplementationCase::InfiniteZero { c: q(c), eta_tilde: lcf(per) },
    };
    let data = ImplementationData::new(n, case, LocallyConstantFunction::zero(), Scalar::zero(), big_n).unwrap();
    GnsCase { label, data }
}

fn gns_suite() -> Outcome {
    let mut s = Sampler::new(9);
    let one = BilateralElement::identity();
    for i in 0..100 {
        let big_n = if i % 5 == 4 { two_inf() } else { fin(SMALL_N[i % SMALL_N.len()]) };
        let shape = Shape::for_n(&big_n, 4);
        let b = s.bilateral(&shape);
        let bb = b.adjoint().multiply(&b);
        for (name, t) in [("tau_0", tau0(&bb)), ("tau_Haar", tau_haar(&bb))] {
            ensure(t.is_real() && t.re >= Scalar::zero().re, || format!("b {i}: {name}(b*b) = {t}"))?;
        }
        let e0 = GNSVector0::basis(0);
        ensure(e0.inner(&pi0_apply(&b, &e0)) == tau0(&b), || format!("b {i}: tau_0 reproducing identity"))?;
        let level = b.terms().values().map(|c| c.period()).fold(1, num_lcm);
        let chi = GNSVectorHaar::chi0(level);
        let got = e(chi.inner(&e(pi_haar_apply(&b, &chi))?))?;
        ensure(got == tau_haar(&b), || format!("b {i}: tau_Haar reproducing identity"))?;
    }
    ensure(tau0(&one) == q(1) && tau_haar(&one) == q(1), || "tau(1) != 1".into())?;

    let n2 = fin(2);
    let inf = two_inf();
    let cases = [
        linear_case("bounded, N=2, n=1", 1, 0, &[1, 3], &n2),
        linear_case("bounded, N=2^inf, n=1", 1, 0, &[1, 0, 2, 1], &inf),
        linear_case("linear, N=2, n=2, C=0", 2, 0, &[0, 1], &n2),
        linear_case("linear, N=2, n=2, C=1", 2, 1, &[0, 1], &n2),
        linear_case("linear, N=2^inf, n=0, C=0", 0, 0, &[1, -1], &inf),
        linear_case("linear, N=2^inf, n=0, C=1", 0, 1, &[0, 1], &inf),
    ];
    let thetas = theta_grid(16);
    let windows = [64usize, 128, 256];
    let mut positives = 0;
    let mut total = 0;
    for case in &cases {
        let delta = e(case.data.derivation())?;
        let variants = [case.data.clone(), e(case.data.clone().with_psi(lcf(&[2, -1])))?];
        for state in [GnsState::Tau0, GnsState::Haar] {
            for data in &variants {
                let d = e(build_d(state, data, 64))?;
                let cov = check_covariance(&d.dense(), &d.coordinates(), data.n, &thetas);
                ensure(cov < 1e-12, || format!("{} {state:?}: covariance residual {cov:e}", case.label))?;
                let level_shape = Shape { max_degree: 3, periods: finite_divisors(&fin(data.level), 12), max_support: 0, max_terms: 3 };
                for _ in 0..3 {
                    let b = s.bilateral(&level_shape);
                    let r = e(check_implementation(state, &d, &delta, &b))?;
                    ensure(r.exact(), || format!("{} {state:?}: {} interior mismatches", case.label, r.mismatches))?;
                }
            }
            let report = parametrix_report(state, &case.data, &windows);
            total += 1;
            ensure(report.agrees(), || {
                format!("{} {state:?}: verdict {} vs predicate {} ({:?})", case.label, report.verdict, report.predicate, report)
            })?;
            if report.predicate == POSITIVE {
                positives += 1;
                ensure(report.growth.iter().all(|g| *g >= GROWTH_FACTOR), || {
                    format!("{} {state:?}: growth {:?}", case.label, report.growth)
                })?;
            }
        }
    }
    Ok(format!("positivity, reproducing identities, {total} parametrix cases ({positives} positive) agree"))
}

fn num_lcm(a: u64, b: u64) -> u64 {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

fn quotient_naturality() -> Outcome {
    let mut s = Sampler::new(10);
    let ns = [fin(2), fin(3), fin(4), fin(6), two_inf()];
    for i in 0..100 {
        let big_n = &ns[i % ns.len()];
        let shape = Shape::for_n(big_n, 3);
        let d = s.derivation(big_n, &shape);
        let a = s.unilateral(&shape);
        let lhs = e(d.apply(&a))?.quotient();
        let rhs = e(e(quotient_derivation(&d))?.apply(&a.quotient()))?;
        ensure(lhs == rhs, || format!("sample {i}: quotient(d(a)) != [d](quotient(a))"))?;
    }
    Ok("100 samples exact".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("rewrite-system soundness", rewrite_soundness, Duration::from_secs(60)),
        ("matrix-unit suite", matrix_unit_suite, Duration::from_secs(5)),
        ("Toeplitz defect", toeplitz_defect, Duration::MAX),
        ("compacts preserved", compacts_preserved, Duration::MAX),
        ("classification round trips", classification_round_trips, Duration::MAX),
        ("Fejer convergence", fejer_convergence, Duration::from_secs(30)),
        ("finite-N classification", finite_n_classification, Duration::MAX),
        ("delta_f and H(t)", delta_f_and_h, Duration::MAX),
        ("GNS suite", gns_suite, Duration::from_secs(300)),
        ("quotient naturality", quotient_naturality, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > *limit => Err(format!("{msg}; took {elapsed:?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {:>2} {name}: PASS ({msg}; {:.2?})", i + 1, elapsed),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({msg}; {:.2?})", i + 1, elapsed);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Library results checked against independent reference computations.

use nalgebra::DMatrix;
use ndarray::Array1;
use num_bigint::BigUint;
use rand::Rng;

use squats::baselines::{sensing_matrix, Sensing};
use squats::codebook::{
    bernoulli_mean, level_budget, log2_binomial, noisy_length_factor, sufficient_rate_ml, Codebook, CodebookParams,
};
use squats::quantizer::{
    empirical_avg_mse, gaussian_centroid, panter_dite_mse, std_normal_pdf, IntegrationGrid, Reproduction,
};
use squats::signal::{mse, GaussianSparse, SignalSampler};
use squats::{rng, ScalarQuantizer};

fn binomial(n: u64, r: u64) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 60 {
        return (x.to_u64_digits().first().copied().unwrap_or(0) as f64).log2();
    }
    let shift = bits - 60;
    let top = (x >> shift).to_u64_digits()[0];
    (top as f64).log2() + shift as f64
}

#[test]
fn log2_binomial_matches_exact_integers() {
    for n in [1u64, 2, 7, 30, 97, 250, 1000] {
        for r in [0, 1, 2, 3, 5, 10, 40] {
            if r > n {
                assert_eq!(log2_binomial(n as usize, r as usize), None);
                continue;
            }
            let exact = log2_big(&binomial(n, r));
            let got = log2_binomial(n as usize, r as usize).unwrap();
            assert!(
                (got - exact).abs() <= 1e-9 * exact.max(1.0),
                "C({n},{r}): {got} vs {exact}"
            );
        }
    }
}

#[test]
fn ml_rate_matches_exact_enumeration() {
    for (t, k, l, eps) in [
        (100usize, 3usize, 4usize, 1.0),
        (50, 2, 16, 0.5),
        (8, 2, 2, 1.0),
        (200, 5, 64, 0.3),
    ] {
        let exact = (1..=k)
            .map(|i| {
                let bits = log2_big(&binomial((t - k) as u64, i as u64)) + i as f64 * (l as f64).log2();
                (1.0 + eps) * k as f64 / (i * t) as f64 * bits
            })
            .fold(0.0, f64::max);
        let got = sufficient_rate_ml(t, k, l, eps).unwrap();
        assert!((got - exact).abs() < 1e-9, "T={t} k={k} l={l}: {got} vs {exact}");
    }
}

#[test]
fn level_budget_is_largest_admissible_integer() {
    for (t, k, r, eps) in [
        (100usize, 3usize, 1.0, 1.0),
        (100, 3, 0.5, 0.8),
        (50, 2, 0.9, 1.3),
        (30, 1, 0.5, 1.0),
    ] {
        let exponent = t as f64 * r / (k as f64 * (1.0 + eps));
        let mut l = 1usize;
        while ((l + 1) as f64 * t as f64).log2() <= exponent {
            l += 1;
        }
        assert_eq!(level_budget(t, k, r, eps), l.max(2), "T={t} k={k} R={r} eps={eps}");
    }
}

#[test]
fn closed_form_constants() {
    for (q, u) in [(0.0, 0.0), (0.1, 0.1), (0.4, 0.1), (0.2, 0.5)] {
        let expect = 1.0 / ((1.0 - q) * (1.0 - u) * (1.0 - u));
        assert!((noisy_length_factor(q, u).unwrap() - expect).abs() < 1e-12);
    }
    for k in 1..10 {
        assert!((bernoulli_mean(k) - std::f64::consts::LN_2 / k as f64).abs() < 1e-15);
    }
}

fn to_nalgebra(a: &ndarray::Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn largest_singular_sq(m: &DMatrix<f64>) -> f64 {
    let s = m.clone().svd(false, false).singular_values;
    s.iter().fold(0.0f64, |a, &b| a.max(b)).powi(2)
}

#[test]
fn spectral_norm_agrees_with_svd() {
    let dense = sensing_matrix(18, 40, 3);
    let expect = largest_singular_sq(&to_nalgebra(&dense));
    let got = Sensing::Dense(dense).spectral_norm_sq();
    assert!((got / expect - 1.0).abs() < 1e-4, "{got} vs {expect}");

    let blocks: Vec<_> = (0..3).map(|i| sensing_matrix(6, 10, 10 + i)).collect();
    let expect = blocks
        .iter()
        .map(|b| largest_singular_sq(&to_nalgebra(b)))
        .fold(0.0, f64::max);
    let got = Sensing::BlockDiagonal(blocks).spectral_norm_sq();
    assert!((got / expect - 1.0).abs() < 1e-4, "{got} vs {expect}");
}

#[test]
fn sensing_adjoint_identity() {
    let mut r = rng::stream(11, &[]);
    let ops = [
        Sensing::Dense(sensing_matrix(7, 12, 1)),
        Sensing::BlockDiagonal(vec![
            sensing_matrix(3, 4, 2),
            sensing_matrix(3, 4, 3),
            sensing_matrix(3, 4, 4),
        ]),
    ];
    for a in &ops {
        let x: Array1<f64> = (0..a.cols()).map(|_| r.random_range(-1.0..1.0)).collect();
        let y: Array1<f64> = (0..a.rows()).map(|_| r.random_range(-1.0..1.0)).collect();
        let lhs = a.apply(x.view()).dot(&y);
        let rhs = x.dot(&a.adjoint(y.view()));
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f(a + i as f64 * h)
        })
        .sum::<f64>()
        * h
}

#[test]
fn gaussian_centroid_matches_quadrature() {
    for (a, b) in [(-1.0, 0.5), (0.0, 2.0), (1.5, 3.0), (-0.2, 0.2)] {
        let mass = trapezoid(std_normal_pdf, a, b, 20_000);
        let first = trapezoid(|x| x * std_normal_pdf(x), a, b, 20_000);
        assert!((gaussian_centroid(a, b) - first / mass).abs() < 1e-7);
    }
    let tail = trapezoid(|x| x * std_normal_pdf(x), 2.0, 12.0, 200_000) / trapezoid(std_normal_pdf, 2.0, 12.0, 200_000);
    assert!((gaussian_centroid(2.0, f64::INFINITY) - tail).abs() < 1e-6);
}

#[test]
fn gaussian_distortion_matches_quadrature() {
    for (l, repro) in [
        (4, Reproduction::Midpoint),
        (7, Reproduction::Midpoint),
        (8, Reproduction::GaussianCentroid),
    ] {
        let q = ScalarQuantizer::with_support(l, -2.0, 2.0, repro).unwrap();
        let w = 4.0 / l as f64;
        let oracle: f64 = (0..l)
            .map(|c| {
                let lo = if c == 0 { -12.0 } else { -2.0 + c as f64 * w };
                let hi = if c + 1 == l { 12.0 } else { -2.0 + (c + 1) as f64 * w };
                let v = q.quantize(-2.0 + (c as f64 + 0.5) * w).1;
                trapezoid(|x| (x - v).powi(2) * std_normal_pdf(x), lo, hi, 100_000)
            })
            .sum();
        let got = q.gaussian_distortion();
        assert!(
            (got - oracle).abs() < 1e-5 * oracle.max(1e-3),
            "l={l}: {got} vs {oracle}"
        );
    }
}

#[test]
fn empirical_mse_matches_per_sample_averaging() {
    let q = ScalarQuantizer::new(64).unwrap();
    let sampler = GaussianSparse::new(100, 3);
    let trials = 10_000;
    let est = empirical_avg_mse(&sampler, &q, trials, 5).unwrap();

    let mut per_sample = Vec::with_capacity(trials);
    for t in 0..trials {
        let s = sampler.sample(&mut rng::stream(5, &[t as u64]));
        let mut sq = 0.0;
        for &x in s.values() {
            let e = x - q.quantize(x).1;
            sq += e * e;
        }
        per_sample.push(sq / 100.0);
    }
    let oracle = per_sample.iter().sum::<f64>() / trials as f64;
    assert!((est.mean - oracle).abs() <= 3.0 * est.stderr.max(1e-15));
    let limit = 0.03 * q.gaussian_distortion();
    assert!((est.mean - limit).abs() <= 3.0 * est.stderr, "{} vs {limit}", est.mean);
}

#[test]
fn panter_dite_reference_values() {
    let g = IntegrationGrid::default();
    let at_16 = panter_dite_mse(std_normal_pdf, 15, g).unwrap();
    let c = std::f64::consts::PI * 3f64.sqrt() / 2.0;
    assert!((at_16 - c / 256.0).abs() < 1e-5, "{at_16}");
    let uniform = |x: f64| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 };
    let grid = IntegrationGrid {
        lo: 0.0,
        hi: 1.0,
        points: 1 << 12,
    };
    for l in [0usize, 3, 9] {
        let got = panter_dite_mse(uniform, l, grid).unwrap();
        let expect = 1.0 / (12.0 * ((l + 1) as f64).powi(2));
        assert!((got - expect).abs() < 1e-9, "l={l}: {got} vs {expect}");
    }
}

#[test]
fn mse_matches_loop_and_codebook_density() {
    let mut r = rng::stream(21, &[]);
    let s: Vec<f64> = (0..57).map(|_| r.random_range(-3.0..3.0)).collect();
    let t: Vec<f64> = (0..57).map(|_| r.random_range(-3.0..3.0)).collect();
    let mut acc = 0.0;
    for i in 0..57 {
        acc += (s[i] - t[i]) * (s[i] - t[i]);
    }
    assert!((mse(&s, &t) - acc / 57.0).abs() < 1e-12);
    assert_eq!(mse(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4]), 0.25);

    let cb = Codebook::generate(CodebookParams::new(150, 12, 5, 300, 4)).unwrap();
    let mut ones = 0usize;
    for bin in 0..150 {
        for level in 1..=12 {
            ones += cb
                .codeword(bin, level)
                .iter()
                .map(|w| w.count_ones() as usize)
                .sum::<usize>();
        }
    }
    assert_eq!(ones, cb.count_ones());
    let n = (150 * 12 * 300) as f64;
    let p = bernoulli_mean(5);
    assert!((ones as f64 / n - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt());
}

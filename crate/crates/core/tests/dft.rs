mod common;

use common::*;
use fdas_core::dft::{DftPlan, Direction};
use fdas_core::{Complex32, ComplexSeries};
use proptest::prelude::*;

fn max_err(a: &[Complex32], b: &[num_complex::Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x.re as f64 - y.re).powi(2) + (x.im as f64 - y.im).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

#[test]
fn matches_direct_dft_both_directions() {
    let mut r = rng(1);
    for log in 1..=10 {
        let n = 1 << log;
        let x = random_series(&mut r, n);
        for (dir, inverse) in [(Direction::Forward, false), (Direction::Inverse, true)] {
            let got = DftPlan::new(n, dir).unwrap().dft(&ComplexSeries(x.clone())).unwrap();
            let want = direct_dft(&x, inverse);
            let scale = if inverse { 1.0 } else { (n as f64).sqrt() };
            assert!(max_err(&got.0, &want) < 1e-5 * scale * log as f64, "n={n} {dir:?}");
        }
    }
}

#[test]
fn parseval() {
    let mut r = rng(2);
    let n = 4096;
    let x = random_series(&mut r, n);
    let y = DftPlan::new(n, Direction::Forward).unwrap().dft(&ComplexSeries(x.clone())).unwrap();
    let ex: f64 = x.iter().map(|c| c.norm_sqr() as f64).sum();
    let ey: f64 = y.0.iter().map(|c| c.norm_sqr() as f64).sum::<f64>() / n as f64;
    assert!((ex - ey).abs() < 1e-5 * ex);
}

#[test]
fn single_tone_lands_in_one_bin() {
    let n = 256;
    let k = 37;
    let x: Vec<Complex32> = (0..n)
        .map(|t| {
            let a = 2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            Complex32::new(a.cos() as f32, a.sin() as f32)
        })
        .collect();
    let y = DftPlan::new(n, Direction::Forward).unwrap().dft(&ComplexSeries(x)).unwrap();
    for (b, v) in y.0.iter().enumerate() {
        let want = if b == k { n as f32 } else { 0.0 };
        assert!((v.norm() - want).abs() < 1e-3, "bin {b}: {v}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip(log in 1u32..12, seed in any::<u64>()) {
        let n = 1usize << log;
        let x = random_series(&mut rng(seed), n);
        let fwd = DftPlan::new(n, Direction::Forward).unwrap();
        let inv = DftPlan::new(n, Direction::Inverse).unwrap();
        let back = inv.dft(&fwd.dft(&ComplexSeries(x.clone())).unwrap()).unwrap();
        for (a, b) in back.0.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-5 * log as f32);
        }
    }

    #[test]
    fn linearity(log in 1u32..10, seed in any::<u64>(), alpha in -4.0f32..4.0) {
        let n = 1usize << log;
        let mut r = rng(seed);
        let x = random_series(&mut r, n);
        let y = random_series(&mut r, n);
        let plan = DftPlan::new(n, Direction::Forward).unwrap();
        let combo: Vec<Complex32> = x.iter().zip(&y).map(|(a, b)| a * alpha + b).collect();
        let lhs = plan.dft(&ComplexSeries(combo)).unwrap();
        let fx = plan.dft(&ComplexSeries(x)).unwrap();
        let fy = plan.dft(&ComplexSeries(y)).unwrap();
        for ((l, a), b) in lhs.0.iter().zip(&fx.0).zip(&fy.0) {
            prop_assert!((l - (a * alpha + b)).norm() < 1e-4 * (n as f32).sqrt() * (1.0 + alpha.abs()));
        }
    }
}

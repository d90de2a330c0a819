#![allow(dead_code)]

use num_complex::Complex64 as C64;
use pointer_limit::state::{ProductFactors, StateVector};
use proptest::prelude::*;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn normalize(v: Vec<(f64, f64)>) -> Vec<C64> {
    let v: Vec<C64> = v.into_iter().map(|(a, b)| C64::new(a, b)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn component() -> impl Strategy<Value = (f64, f64)> {
    (-1.0f64..1.0, -1.0f64..1.0)
}

/// Random unit vector for n units.
pub fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(component(), 2usize << n)
        .prop_filter("nonzero", |v| v.iter().any(|&(a, b)| a * a + b * b > 1e-6))
        .prop_map(move |v| StateVector::from_amplitudes(n, normalize(v)).unwrap())
}

pub fn pair() -> impl Strategy<Value = [C64; 2]> {
    (component(), component())
        .prop_filter("nonzero", |(a, b)| a.0 * a.0 + a.1 * a.1 + b.0 * b.0 + b.1 * b.1 > 1e-6)
        .prop_map(|(a, b)| {
            let v = normalize(vec![a, b]);
            [v[0], v[1]]
        })
}

pub fn factors(n: usize) -> impl Strategy<Value = ProductFactors> {
    (pair(), prop::collection::vec(pair(), n))
        .prop_map(|(p, u)| ProductFactors::new(p, u).unwrap())
}

#![allow(dead_code)]

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// J0 and Y0 by their ascending series; adequate for 0 < x <= 20.
pub fn bessel_j0_y0(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let mut term = 1.0;
    let mut j0 = 1.0;
    let mut harmonic = 0.0;
    let mut ysum = 0.0;
    for k in 1..200 {
        term *= -t / (k * k) as f64;
        harmonic += 1.0 / k as f64;
        j0 += term;
        // (-1)^{k+1} H_k t^k / (k!)^2 = -H_k * term
        ysum -= harmonic * term;
        if term.abs() < 1e-22 {
            break;
        }
    }
    let y0 = 2.0 / std::f64::consts::PI * (((0.5 * x).ln() + EULER_GAMMA) * j0 + ysum);
    (j0, y0)
}

/// Outgoing free-space kernel -(i/4) H0^(1)(k r) of Δu + k²u = δ.
pub fn free_space_kernel(k: f64, r: f64) -> Complex64 {
    let (j0, y0) = bessel_j0_y0(k * r);
    -Complex64::i() * 0.25 * Complex64::new(j0, y0)
}

//! Complex exponential integrals and the exponential "phi" functions used by
//! the convolution sweeps.

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// E1(z) for Re z >= 0, z != 0.
pub fn exp_integral_e1(z: Complex64) -> Complex64 {
    if z.norm() < 2.0 {
        // -gamma - ln z - sum (-z)^n / (n n!)
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for n in 1..200 {
            term *= -z / n as f64;
            let add = term / n as f64;
            sum += add;
            if add.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - z.ln() - sum
    } else {
        // Continued fraction e^{-z} / (z + 1 - 1^2/(z + 3 - 2^2/(z + 5 - ...))) via modified Lentz.
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = Complex64::new(1.0, 0.0) / b;
        let mut h = d;
        for i in 1..10_000 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = Complex64::new(1.0, 0.0) / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

/// E2(z) = e^{-z} - z E1(z).
pub fn exp_integral_e2(z: Complex64) -> Complex64 {
    (-z).exp() - z * exp_integral_e1(z)
}

/// (e^z - 1) / z, stable near zero.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.25 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 2..20 {
            term *= z / n as f64;
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// (e^z - 1 - z) / z^2, stable near zero.
pub fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < 0.25 {
        let mut term = Complex64::new(0.5, 0.0);
        let mut sum = term;
        for n in 3..22 {
            term *= z / n as f64;
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

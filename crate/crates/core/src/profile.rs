//! Refractive-index profile of a symmetric slab and the derived spectral constants.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Core refractive index as a function of the transverse coordinate.
///
/// Profiles are even in `x`: every variant is evaluated at `|x|`.
#[derive(Clone)]
pub enum CoreIndex {
    Constant(f64),
    /// n(x)^2 = center^2 - (center^2 - edge^2) (x/h)^2
    Parabolic {
        center: f64,
        edge: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for CoreIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreIndex::Constant(n) => write!(f, "Constant({n})"),
            CoreIndex::Parabolic { center, edge } => {
                write!(f, "Parabolic {{ center: {center}, edge: {edge} }}")
            }
            CoreIndex::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Wavenumber, core half-width and index data of a rectilinear open slab.
#[derive(Debug, Clone)]
pub struct WaveguideProfile {
    k: f64,
    h: f64,
    core: CoreIndex,
    n_cl: f64,
    n_star: f64,
}

const CUSTOM_SAMPLES: usize = 4096;

impl WaveguideProfile {
    pub fn new(k: f64, h: f64, core: CoreIndex, n_cl: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::domain(format!("wavenumber k must be positive, got {k}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::domain(format!("core half-width h must be positive, got {h}")));
        }
        if !(n_cl.is_finite() && n_cl > 0.0) {
            return Err(Error::domain(format!("cladding index must be positive, got {n_cl}")));
        }
        let sup_core = match &core {
            CoreIndex::Constant(n) => *n,
            CoreIndex::Parabolic { center, edge } => center.max(*edge),
            CoreIndex::Custom(f) => (0..=CUSTOM_SAMPLES)
                .map(|i| f(h * i as f64 / CUSTOM_SAMPLES as f64))
                .fold(f64::NEG_INFINITY, f64::max),
        };
        let positive = match &core {
            CoreIndex::Constant(n) => *n > 0.0,
            CoreIndex::Parabolic { center, edge } => *center > 0.0 && *edge > 0.0,
            CoreIndex::Custom(f) => (0..=CUSTOM_SAMPLES).all(|i| {
                let v = f(h * i as f64 / CUSTOM_SAMPLES as f64);
                v.is_finite() && v > 0.0
            }),
        };
        if !(sup_core.is_finite() && positive) {
            return Err(Error::domain("core index must be positive and bounded"));
        }
        Ok(WaveguideProfile {
            k,
            h,
            core,
            n_cl,
            n_star: sup_core.max(n_cl),
        })
    }

    /// Step-index slab with constant core index.
    pub fn step(k: f64, h: f64, n_co: f64, n_cl: f64) -> Result<Self> {
        Self::new(k, h, CoreIndex::Constant(n_co), n_cl)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_cl(&self) -> f64 {
        self.n_cl
    }

    pub fn core(&self) -> &CoreIndex {
        &self.core
    }

    /// Maximum of the index over the whole line.
    pub fn n_star(&self) -> f64 {
        self.n_star
    }

    /// d^2 = k^2 (n*^2 - n_cl^2), the guided/radiation threshold.
    pub fn d2(&self) -> f64 {
        let v = self.k * self.k * (self.n_star * self.n_star - self.n_cl * self.n_cl);
        v.max(0.0)
    }

    /// k^2 n*^2, the radiation/evanescent threshold.
    pub fn k2n2(&self) -> f64 {
        self.k * self.k * self.n_star * self.n_star
    }

    pub fn index(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax > self.h {
            return self.n_cl;
        }
        match &self.core {
            CoreIndex::Constant(n) => *n,
            CoreIndex::Parabolic { center, edge } => {
                let t = ax / self.h;
                (center * center - (center * center - edge * edge) * t * t).sqrt()
            }
            CoreIndex::Custom(f) => f(ax),
        }
    }

    /// q(x) = k^2 (n*^2 - n(x)^2) >= 0.
    pub fn q(&self, x: f64) -> f64 {
        if x.abs() > self.h {
            return self.d2();
        }
        let n = self.index(x);
        (self.k * self.k * (self.n_star * self.n_star - n * n)).max(0.0)
    }

    /// Value of q on the core when it is constant there.
    pub fn q_core_constant(&self) -> Option<f64> {
        match &self.core {
            CoreIndex::Constant(n) => Some((self.k * self.k * (self.n_star * self.n_star - n * n)).max(0.0)),
            _ => None,
        }
    }

    /// Bounds of q on the core.
    pub fn q_core_range(&self) -> (f64, f64) {
        if let Some(q) = self.q_core_constant() {
            return (q, q);
        }
        let n = 512;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=n {
            let q = self.q(self.h * i as f64 / n as f64);
            lo = lo.min(q);
            hi = hi.max(q);
        }
        (lo, hi)
    }

    /// Integral of |q| over the core [-h, h].
    pub fn q_abs_integral(&self) -> f64 {
        if let Some(q) = self.q_core_constant() {
            return 2.0 * self.h * q;
        }
        2.0 * crate::quadrature::composite(crate::quadrature::GaussLegendre::sixteen(), 0.0, self.h, 32)
            .iter()
            .map(|(x, w)| w * self.q(*x).abs())
            .sum::<f64>()
    }

    /// Odd phase function Θ(x) = sign(x) · ½ ∫_0^{|x|} q, the leading
    /// large-λ phase correction of the transverse solutions.
    pub fn wkb_phase(&self, x: f64) -> f64 {
        let ax = x.abs();
        let inner = self.q_abs_integral() * 0.5;
        let core_part = if ax >= self.h {
            inner
        } else if let Some(q) = self.q_core_constant() {
            q * ax
        } else {
            crate::quadrature::composite(crate::quadrature::GaussLegendre::sixteen(), 0.0, ax, 8)
                .iter()
                .map(|(t, w)| w * self.q(*t))
                .sum::<f64>()
        };
        let clad = if ax > self.h { self.d2() * (ax - self.h) } else { 0.0 };
        0.5 * x.signum() * (core_part + clad)
    }

    /// Derivative of n(x)^2 inside the core.
    pub fn dn2_dx(&self, x: f64) -> f64 {
        if x.abs() >= self.h {
            return 0.0;
        }
        match &self.core {
            CoreIndex::Constant(_) => 0.0,
            CoreIndex::Parabolic { center, edge } => -2.0 * (center * center - edge * edge) * x / (self.h * self.h),
            CoreIndex::Custom(_) => {
                let e = 1e-6 * self.h;
                let a = (x - e).max(-self.h);
                let b = (x + e).min(self.h);
                let na = self.index(a);
                let nb = self.index(b);
                (nb * nb - na * na) / (b - a)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_profile_constants() {
        let p = WaveguideProfile::step(5.0, 0.2, 2.0, 1.0).unwrap();
        assert_eq!(p.n_star(), 2.0);
        assert!((p.d2() - 75.0).abs() < 1e-12);
        assert!((p.k2n2() - 100.0).abs() < 1e-12);
        assert_eq!(p.q(0.1), 0.0);
        assert!((p.q(0.3) - 75.0).abs() < 1e-12);
        assert!((p.q(-0.3) - 75.0).abs() < 1e-12);
        assert_eq!(p.q_abs_integral(), 0.0);
    }

    #[test]
    fn q_is_nonnegative_and_equals_d2_outside() {
        let p = WaveguideProfile::new(4.0, 0.5, CoreIndex::Parabolic { center: 1.6, edge: 1.3 }, 1.2).unwrap();
        for i in -100..=100 {
            let x = i as f64 * 0.02;
            assert!(p.q(x) >= 0.0);
            if x.abs() > 0.5 {
                assert!((p.q(x) - p.d2()).abs() < 1e-12);
            }
        }
        assert_eq!(p.n_star(), 1.6);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(WaveguideProfile::step(0.0, 0.2, 2.0, 1.0).is_err());
        assert!(WaveguideProfile::step(1.0, -0.2, 2.0, 1.0).is_err());
        assert!(WaveguideProfile::step(1.0, 0.2, 2.0, 0.0).is_err());
    }

    #[test]
    fn antiguide_core_still_has_nonnegative_q() {
        let p = WaveguideProfile::step(3.0, 0.4, 1.0, 1.5).unwrap();
        assert_eq!(p.n_star(), 1.5);
        assert_eq!(p.d2(), 0.0);
        assert!(p.q(0.0) > 0.0);
    }

    #[test]
    fn wkb_phase_is_odd_and_matches_cladding_slope() {
        let p = WaveguideProfile::step(5.0, 0.2, 2.0, 1.0).unwrap();
        assert_eq!(p.wkb_phase(0.1), 0.0);
        assert!((p.wkb_phase(0.5) - 0.5 * 75.0 * 0.3).abs() < 1e-12);
        assert!((p.wkb_phase(-0.5) + p.wkb_phase(0.5)).abs() < 1e-12);
    }
}

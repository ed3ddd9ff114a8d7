//! Transverse eigenvalue problem v'' + (λ - q(x)) v = 0: core solutions,
//! guided modes, spectral density and the mode functions v_j.

use log::warn;

use crate::error::{Error, Result};
use crate::profile::WaveguideProfile;
use crate::quadrature::{composite, GaussLegendre};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Symmetric,
    Antisymmetric,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Symmetric, Parity::Antisymmetric];

    /// +1 for even solutions, -1 for odd ones.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Symmetric => 1.0,
            Parity::Antisymmetric => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Parity::Symmetric => "s",
            Parity::Antisymmetric => "a",
        }
    }
}

/// Core solution φ_j(·, λ) summarized by its boundary data at x = h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseSolution {
    pub parity: Parity,
    pub lambda: f64,
    pub phi_h: f64,
    pub dphi_h: f64,
}

impl TransverseSolution {
    /// φ_j(x, λ) and φ_j'(x, λ) for x in [-h, h], recomputed on demand.
    pub fn core_value(&self, profile: &WaveguideProfile, x: f64) -> Result<(f64, f64)> {
        if x.abs() > profile.h() * (1.0 + 1e-12) {
            return Err(Error::domain(format!("x = {x} lies outside the core")));
        }
        Ok(core_values(profile, self.parity, self.lambda, &[x])[0])
    }
}

/// A guided eigenpair of the transverse problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedMode {
    pub parity: Parity,
    pub lambda: f64,
    /// Normalization r = [∫ v^2 dx]^{-1}.
    pub r: f64,
    /// Axial propagation constant √(k^2 n*^2 - λ).
    pub beta: f64,
    /// |√(d^2-λ) φ(h) + φ'(h)| at the refined root.
    pub residual: f64,
    pub phi_h: f64,
    pub dphi_h: f64,
}

/// Integrate the core problem for `lambda`, returning φ(h), φ'(h).
pub fn solve_transverse(profile: &WaveguideProfile, parity: Parity, lambda: f64) -> Result<TransverseSolution> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain(format!("spectral parameter must be positive, got {lambda}")));
    }
    let (phi_h, dphi_h) = if profile.q_core_constant().is_some() {
        boundary_values(profile, parity, lambda)
    } else {
        let steps = rk4_steps(profile, lambda, profile.h());
        if steps > 50_000_000 {
            return Err(Error::Numerical {
                what: format!("ODE step size underflow at lambda = {lambda}"),
                achieved: profile.h() / steps as f64,
            });
        }
        let fine = rk4_core(profile, parity, lambda, &[profile.h()], 1)[0];
        let coarse = rk4_core(profile, parity, lambda, &[profile.h()], 2)[0];
        let scale = fine.0.abs() + fine.1.abs() / lambda.sqrt().max(1.0);
        let diff = (fine.0 - coarse.0).abs() + (fine.1 - coarse.1).abs() / lambda.sqrt().max(1.0);
        // RK4: fine-step error is about diff/15.
        if diff / 15.0 > 1e-8 * scale.max(1.0) {
            warn!("core ODE at lambda = {lambda}: Richardson error estimate {:.2e}", diff / 15.0);
        }
        fine
    };
    Ok(TransverseSolution {
        parity,
        lambda,
        phi_h,
        dphi_h,
    })
}

/// φ(h), φ'(h) without validation (λ > 0 assumed).
pub(crate) fn boundary_values(profile: &WaveguideProfile, parity: Parity, lambda: f64) -> (f64, f64) {
    core_values(profile, parity, lambda, &[profile.h()])[0]
}

/// φ_j and φ_j' at the given points of [-h, h].
pub(crate) fn core_values(profile: &WaveguideProfile, parity: Parity, lambda: f64, xs: &[f64]) -> Vec<(f64, f64)> {
    if let Some(q0) = profile.q_core_constant() {
        return xs.iter().map(|&x| closed_form(parity, lambda, q0, x)).collect();
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].abs().total_cmp(&xs[b].abs()));
    let targets: Vec<f64> = order.iter().map(|&i| xs[i].abs()).collect();
    let vals = rk4_core(profile, parity, lambda, &targets, 1);
    let mut out = vec![(0.0, 0.0); xs.len()];
    for (slot, &i) in order.iter().enumerate() {
        let (p, dp) = vals[slot];
        out[i] = reflect(parity, xs[i], p, dp);
    }
    out
}

/// Values at -|x| from values at |x| using parity.
fn reflect(parity: Parity, x: f64, p: f64, dp: f64) -> (f64, f64) {
    if x >= 0.0 {
        (p, dp)
    } else {
        match parity {
            Parity::Symmetric => (p, -dp),
            Parity::Antisymmetric => (-p, dp),
        }
    }
}

fn closed_form(parity: Parity, lambda: f64, q0: f64, x: f64) -> (f64, f64) {
    // φ'' = -(λ - q0) φ with (c, s) the even/odd fundamental pair.
    let mu = lambda - q0;
    let (c, s, dc) = if mu > 1e-14 * lambda.max(1.0) {
        let w = mu.sqrt();
        ((w * x).cos(), (w * x).sin() / w, -w * (w * x).sin())
    } else if mu < -1e-14 * lambda.max(1.0) {
        let w = (-mu).sqrt();
        ((w * x).cosh(), (w * x).sinh() / w, w * (w * x).sinh())
    } else {
        (1.0, x, 0.0)
    };
    match parity {
        Parity::Symmetric => (c, dc),
        Parity::Antisymmetric => {
            let sl = lambda.sqrt();
            (sl * s, sl * c)
        }
    }
}

fn rk4_steps(profile: &WaveguideProfile, lambda: f64, x_end: f64) -> usize {
    let (qlo, qhi) = profile.q_core_range();
    let wmax = (lambda - qlo).abs().max((lambda - qhi).abs()).sqrt();
    let base = (512.0 * x_end / profile.h()).ceil();
    let by_freq = (32.0 * wmax * x_end).ceil();
    base.max(by_freq).max(1.0) as usize
}

/// Classical RK4 from x = 0 through ascending nonnegative `targets`.
/// `coarsen` multiplies the step size (used for the Richardson check).
fn rk4_core(profile: &WaveguideProfile, parity: Parity, lambda: f64, targets: &[f64], coarsen: usize) -> Vec<(f64, f64)> {
    let x_end = targets.iter().cloned().fold(0.0, f64::max);
    let n = rk4_steps(profile, lambda, x_end.max(1e-300)) / coarsen;
    let dx_max = if n == 0 { x_end } else { x_end / n as f64 };
    let (mut y, mut dy) = match parity {
        Parity::Symmetric => (1.0, 0.0),
        Parity::Antisymmetric => (0.0, lambda.sqrt()),
    };
    let f = |x: f64| profile.q(x) - lambda;
    let mut x = 0.0;
    let mut out = Vec::with_capacity(targets.len());
    for &t in targets {
        while t - x > 1e-15 * profile.h() {
            let dx = dx_max.min(t - x);
            let k1y = dy;
            let k1d = f(x) * y;
            let fm = f(x + 0.5 * dx);
            let k2y = dy + 0.5 * dx * k1d;
            let k2d = fm * (y + 0.5 * dx * k1y);
            let k3y = dy + 0.5 * dx * k2d;
            let k3d = fm * (y + 0.5 * dx * k2y);
            let k4y = dy + dx * k3d;
            let k4d = f(x + dx) * (y + dx * k3y);
            y += dx / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            dy += dx / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            x += dx;
        }
        out.push((y, dy));
    }
    out
}

/// √(d²-λ) φ_j(h,λ) + φ_j'(h,λ) for 0 < λ < d².
pub fn dispersion(profile: &WaveguideProfile, parity: Parity, lambda: f64) -> f64 {
    let (p, dp) = boundary_values(profile, parity, lambda);
    (profile.d2() - lambda).max(0.0).sqrt() * p + dp
}

/// Number of uniform scan cells over (0, d²).
pub const MODE_SCAN_POINTS: usize = 10_000;

/// All guided modes of both parities, ascending in λ.
pub fn find_guided_modes(profile: &WaveguideProfile) -> Result<Vec<GuidedMode>> {
    let d2 = profile.d2();
    let mut modes = Vec::new();
    if d2 <= 0.0 {
        return Ok(modes);
    }
    for parity in Parity::BOTH {
        for (lo, hi) in scan_brackets(profile, parity, MODE_SCAN_POINTS) {
            let lambda = refine_root(profile, parity, lo, hi);
            let residual = dispersion(profile, parity, lambda).abs();
            if residual > 1e-9 * (1.0 + lambda) {
                warn!(
                    "dispersion root near {lambda} ({}) refined only to residual {residual:.2e} (scan cell {:.3e})",
                    parity.label(),
                    d2 / MODE_SCAN_POINTS as f64
                );
            }
            modes.push(guided_mode(profile, parity, lambda, residual)?);
        }
    }
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(modes)
}

/// Sign-change cells of the dispersion function on a uniform scan.
pub fn scan_brackets(profile: &WaveguideProfile, parity: Parity, n: usize) -> Vec<(f64, f64)> {
    let d2 = profile.d2();
    let mut pts: Vec<f64> = Vec::with_capacity(n + 2);
    pts.push(d2 * 1e-10);
    pts.extend((1..n).map(|i| d2 * i as f64 / n as f64));
    pts.push(d2 * (1.0 - 1e-10));
    let vals: Vec<f64> = pts.iter().map(|&l| dispersion(profile, parity, l)).collect();
    let mut out = Vec::new();
    for i in 0..pts.len() - 1 {
        if vals[i] == 0.0 {
            out.push((pts[i], pts[i]));
        } else if vals[i] * vals[i + 1] < 0.0 {
            out.push((pts[i], pts[i + 1]));
        }
    }
    out
}

/// Bisection safeguarded by secant steps.
fn refine_root(profile: &WaveguideProfile, parity: Parity, mut lo: f64, mut hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let f = |l: f64| dispersion(profile, parity, l);
    let mut flo = f(lo);
    let mut fhi = f(hi);
    for _ in 0..200 {
        let tol = 1e-12 * (1.0 + lo.abs());
        let mut x = lo - flo * (hi - lo) / (fhi - flo);
        if !(x.is_finite() && x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx.abs() < tol || hi - lo < 1e-15 * hi {
            return x;
        }
        if fx * flo < 0.0 {
            hi = x;
            fhi = fx;
        } else {
            lo = x;
            flo = fx;
        }
        // keep the bracket shrinking even when secant stalls at one end
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < tol {
            return mid;
        }
        if fm * flo < 0.0 {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

fn guided_mode(profile: &WaveguideProfile, parity: Parity, lambda: f64, residual: f64) -> Result<GuidedMode> {
    let sol = solve_transverse(profile, parity, lambda)?;
    let kappa = (profile.d2() - lambda).sqrt();
    let core_int = core_square_integral(profile, parity, lambda);
    let r = kappa / (kappa * core_int + sol.phi_h * sol.phi_h);
    Ok(GuidedMode {
        parity,
        lambda,
        r,
        beta: (profile.k2n2() - lambda).sqrt(),
        residual,
        phi_h: sol.phi_h,
        dphi_h: sol.dphi_h,
    })
}

/// ∫_{-h}^{h} φ_j(x,λ)^2 dx by composite Gauss–Legendre.
pub fn core_square_integral(profile: &WaveguideProfile, parity: Parity, lambda: f64) -> f64 {
    let panels = 4 + (lambda.sqrt() * profile.h()).ceil() as usize;
    let rule = composite(GaussLegendre::sixteen(), 0.0, profile.h(), panels);
    let xs: Vec<f64> = rule.iter().map(|(x, _)| *x).collect();
    let vals = core_values(profile, parity, lambda, &xs);
    2.0 * rule.iter().zip(vals).map(|((_, w), (p, _))| w * p * p).sum::<f64>()
}

/// σ_j(λ) = √(λ-d²) / ((λ-d²) φ(h)² + φ'(h)²) for λ > d².
pub fn spectral_density(profile: &WaveguideProfile, parity: Parity, lambda: f64) -> Result<f64> {
    let d2 = profile.d2();
    if !(lambda > d2) || lambda <= 0.0 {
        return Err(Error::domain(format!(
            "spectral density needs lambda > d^2 = {d2}, got {lambda}"
        )));
    }
    let (p, dp) = boundary_values(profile, parity, lambda);
    Ok(sigma_from_boundary(lambda - d2, p, dp))
}

pub(crate) fn sigma_from_boundary(q2: f64, p: f64, dp: f64) -> f64 {
    q2.sqrt() / (q2 * p * p + dp * dp)
}

/// Evaluates v_j(·, λ) at arbitrary x from cached boundary data.
#[derive(Debug, Clone)]
pub struct ModeFunction<'a> {
    profile: &'a WaveguideProfile,
    pub parity: Parity,
    pub lambda: f64,
    pub phi_h: f64,
    pub dphi_h: f64,
}

impl<'a> ModeFunction<'a> {
    pub fn new(profile: &'a WaveguideProfile, parity: Parity, lambda: f64) -> Result<Self> {
        if lambda == profile.d2() {
            return Err(Error::domain("mode function undefined at lambda = d^2"));
        }
        let sol = solve_transverse(profile, parity, lambda)?;
        Ok(Self::from_boundary(profile, parity, lambda, sol.phi_h, sol.dphi_h))
    }

    pub(crate) fn from_boundary(profile: &'a WaveguideProfile, parity: Parity, lambda: f64, phi_h: f64, dphi_h: f64) -> Self {
        ModeFunction {
            profile,
            parity,
            lambda,
            phi_h,
            dphi_h,
        }
    }

    pub fn for_mode(profile: &'a WaveguideProfile, mode: &GuidedMode) -> Self {
        Self::from_boundary(profile, mode.parity, mode.lambda, mode.phi_h, mode.dphi_h)
    }

    /// (v, v') in the cladding, |x| >= h.
    pub fn cladding(&self, x: f64) -> (f64, f64) {
        let h = self.profile.h();
        let dist = x.abs() - h;
        let q2 = self.lambda - self.profile.d2();
        let (v, dv) = if q2 > 0.0 {
            let q = q2.sqrt();
            let (s, c) = (q * dist).sin_cos();
            (self.phi_h * c + self.dphi_h / q * s, -q * self.phi_h * s + self.dphi_h * c)
        } else {
            let kappa = (-q2).sqrt();
            let e = (-kappa * dist).exp();
            (self.phi_h * e, -kappa * self.phi_h * e)
        };
        reflect(self.parity, x, v, dv)
    }

    /// (v, v') at any x.
    pub fn value_and_slope(&self, x: f64) -> (f64, f64) {
        if x.abs() >= self.profile.h() {
            self.cladding(x)
        } else {
            core_values(self.profile, self.parity, self.lambda, &[x])[0]
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.value_and_slope(x).0
    }

    /// (v, v', v'') at each x, batching the core integration.
    pub fn sample(&self, xs: &[f64]) -> Vec<[f64; 3]> {
        let h = self.profile.h();
        let core_idx: Vec<usize> = (0..xs.len()).filter(|&i| xs[i].abs() < h).collect();
        let core_x: Vec<f64> = core_idx.iter().map(|&i| xs[i]).collect();
        let core_v = core_values(self.profile, self.parity, self.lambda, &core_x);
        let mut out = vec![[0.0; 3]; xs.len()];
        for (i, &x) in xs.iter().enumerate() {
            if x.abs() >= h {
                let (v, dv) = self.cladding(x);
                out[i] = [v, dv, (self.profile.q(x) - self.lambda) * v];
            }
        }
        for (slot, &i) in core_idx.iter().enumerate() {
            let (v, dv) = core_v[slot];
            out[i] = [v, dv, (self.profile.q(xs[i]) - self.lambda) * v];
        }
        out
    }
}

/// v_j(x, λ) for λ ≠ d².  For λ < d² the cladding branch is the decaying
/// exponential, which is the C¹ continuation only at guided eigenvalues.
pub fn mode_function(profile: &WaveguideProfile, parity: Parity, lambda: f64, x: f64) -> Result<f64> {
    Ok(ModeFunction::new(profile, parity, lambda)?.value(x))
}

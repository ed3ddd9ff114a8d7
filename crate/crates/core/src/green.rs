//! Spectral representation G = G^g + G^r + G^e of the slab Green's function.
//!
//! Every part is a sum over spectral nodes of `coef · v(x) v(ξ) · e^{iγ|z-ζ|}`:
//! guided modes carry `r/(2iβ)`, radiation nodes come from λ = d² + (K²-d²) sin²θ
//! and evanescent nodes from λ = K² + s², where γ = i s.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modal::{boundary_values, find_guided_modes, sigma_from_boundary, GuidedMode, ModeFunction, Parity};
use crate::profile::WaveguideProfile;
use crate::quadrature::{composite, composite_graded, GaussLegendre};
use crate::special::{exp_integral_e1, exp_integral_e2};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub x: f64,
    pub z: f64,
}

impl FieldPoint {
    pub fn new(x: f64, z: f64) -> Self {
        FieldPoint { x, z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Guided,
    Radiation,
    Evanescent,
}

/// One term of the discretized spectral sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNode {
    pub kind: NodeKind,
    pub parity: Parity,
    pub lambda: f64,
    /// Axial wavenumber √(K² - λ); purely imaginary above K².
    pub gamma: Complex64,
    pub coef: Complex64,
    pub phi_h: f64,
    pub dphi_h: f64,
}

impl SpectralNode {
    pub fn mode_function<'a>(&self, profile: &'a WaveguideProfile) -> ModeFunction<'a> {
        ModeFunction::from_boundary(profile, self.parity, self.lambda, self.phi_h, self.dphi_h)
    }

    pub fn kernel(&self, a: f64) -> Complex64 {
        (Complex64::i() * self.gamma * a).exp()
    }
}

/// Value of each part at one point pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenParts {
    pub guided: Complex64,
    pub radiation: Complex64,
    pub evanescent: f64,
}

impl GreenParts {
    pub fn total(&self) -> Complex64 {
        self.guided + self.radiation + self.evanescent
    }
}

/// Immutable evaluator: profile, guided modes and quadrature parameters.
#[derive(Debug, Clone)]
pub struct GreenEvaluator {
    profile: WaveguideProfile,
    modes: Vec<GuidedMode>,
    tol: f64,
    s_cap: f64,
}

/// Prepares an evaluator with target relative accuracy `tol`.
pub fn build_evaluator(profile: &WaveguideProfile, tol: f64) -> Result<GreenEvaluator> {
    if !(tol > 1e-12 && tol < 1e-2) {
        return Err(Error::domain(format!("tol must lie in (1e-12, 1e-2), got {tol}")));
    }
    let modes = find_guided_modes(profile)?;
    let scale = profile.k2n2().sqrt().max(1.0 / profile.h());
    Ok(GreenEvaluator {
        profile: profile.clone(),
        modes,
        tol,
        s_cap: 2.0 * scale * tol.powf(-1.0 / 3.0),
    })
}

impl GreenEvaluator {
    pub fn profile(&self) -> &WaveguideProfile {
        &self.profile
    }

    pub fn modes(&self) -> &[GuidedMode] {
        &self.modes
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Largest evanescent abscissa s used before the analytic tail.
    pub fn s_cap(&self) -> f64 {
        self.s_cap
    }

    pub fn guided_nodes(&self) -> Vec<SpectralNode> {
        self.modes
            .iter()
            .map(|m| SpectralNode {
                kind: NodeKind::Guided,
                parity: m.parity,
                lambda: m.lambda,
                gamma: Complex64::new(m.beta, 0.0),
                coef: Complex64::new(0.0, -m.r / (2.0 * m.beta)),
                phi_h: m.phi_h,
                dphi_h: m.dphi_h,
            })
            .collect()
    }

    /// Radiation nodes resolving a total transverse-plus-axial phase `span`
    /// (|x| + |ξ| + |z-ζ| for point evaluation).
    pub fn radiation_nodes(&self, span: f64) -> Vec<SpectralNode> {
        let d2 = self.profile.d2();
        let k2 = self.profile.k2n2();
        let width = (k2 - d2).sqrt();
        let b = width * span + 1.0;
        let mut panels = (b / 4.0).ceil().max(2.0) as usize;
        if self.tol < 1e-8 {
            panels *= 2;
        }
        let rule = composite_graded(GaussLegendre::sixteen(), 0.0, 0.5 * std::f64::consts::PI, panels, 6);
        let mut out = Vec::with_capacity(2 * rule.len());
        for parity in Parity::BOTH {
            for &(theta, w) in &rule {
                let (st, ct) = theta.sin_cos();
                let q = width * st;
                let lambda = d2 + q * q;
                let gamma = width * ct;
                let (p, dp) = boundary_values(&self.profile, parity, lambda);
                let sigma = sigma_from_boundary(q * q, p, dp);
                // (1/2π) σ Q w / i
                out.push(SpectralNode {
                    kind: NodeKind::Radiation,
                    parity,
                    lambda,
                    gamma: Complex64::new(gamma, 0.0),
                    coef: Complex64::new(0.0, -sigma * q * w / TWO_PI),
                    phi_h: p,
                    dphi_h: dp,
                });
            }
        }
        out
    }

    /// Evanescent nodes on s ∈ (0, s_max).  `extent` is the transverse
    /// oscillation rate max(|x|,h) + max(|ξ|,h); `a` the axial separation
    /// (0 for convolution use).
    pub fn evanescent_nodes(&self, extent: f64, a: f64, s_max: f64) -> Vec<SpectralNode> {
        let k2 = self.profile.k2n2();
        let mut width = TWO_PI / extent.max(1e-300);
        if a > 0.0 {
            width = width.min(4.0 / a);
        }
        width = width.min(k2.sqrt().max(1.0));
        let panels = (s_max / width).ceil().max(1.0) as usize;
        let rule = composite(GaussLegendre::sixteen(), 0.0, s_max, panels);
        let mut out = Vec::with_capacity(2 * rule.len());
        for parity in Parity::BOTH {
            for &(s, w) in &rule {
                let lambda = k2 + s * s;
                let (p, dp) = boundary_values(&self.profile, parity, lambda);
                let sigma = sigma_from_boundary(lambda - self.profile.d2(), p, dp);
                out.push(SpectralNode {
                    kind: NodeKind::Evanescent,
                    parity,
                    lambda,
                    gamma: Complex64::new(0.0, s),
                    coef: Complex64::new(-sigma * w / TWO_PI, 0.0),
                    phi_h: p,
                    dphi_h: dp,
                });
            }
        }
        out
    }

    /// Truncation point of the evanescent quadrature for separation `a`.
    pub fn evanescent_cutoff(&self, a: f64) -> f64 {
        if a > 0.0 {
            ((1.0 / self.tol).ln() / a).min(self.s_cap)
        } else {
            self.s_cap
        }
    }

    /// Large-s model of the evanescent integral over (s_max, ∞).
    pub fn evanescent_tail(&self, p: FieldPoint, q: FieldPoint, s_max: f64) -> f64 {
        let a = (p.z - q.z).abs();
        let b = p.x - q.x;
        let c = 0.5 * self.profile.k2n2() * b - (self.profile.wkb_phase(p.x) - self.profile.wkb_phase(q.x));
        let ws = Complex64::new(a, -b) * s_max;
        if ws.norm() > 700.0 && a * s_max > 700.0 {
            return 0.0;
        }
        let e1 = exp_integral_e1(ws);
        let e2 = exp_integral_e2(ws);
        -(e1.re - c / s_max * e2.im) / TWO_PI
    }
}

fn node_sum(profile: &WaveguideProfile, nodes: &[SpectralNode], p: FieldPoint, q: FieldPoint) -> Complex64 {
    let a = (p.z - q.z).abs();
    let mut acc = Complex64::new(0.0, 0.0);
    for n in nodes {
        let mf = n.mode_function(profile);
        let prod = mf.value(p.x) * mf.value(q.x);
        acc += n.coef * prod * n.kernel(a);
    }
    acc
}

fn check_point(p: FieldPoint) -> Result<()> {
    if p.x.is_finite() && p.z.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("non-finite field point ({}, {})", p.x, p.z)))
    }
}

/// Guided part, a finite modal sum.
pub fn eval_guided(ev: &GreenEvaluator, p: FieldPoint, q: FieldPoint) -> Complex64 {
    node_sum(&ev.profile, &ev.guided_nodes(), p, q)
}

/// Radiation part over (d², K²).
pub fn eval_radiation(ev: &GreenEvaluator, p: FieldPoint, q: FieldPoint) -> Result<Complex64> {
    check_point(p)?;
    check_point(q)?;
    let span = p.x.abs() + q.x.abs() + (p.z - q.z).abs();
    let g = node_sum(&ev.profile, &ev.radiation_nodes(span), p, q);
    if !(g.re.is_finite() && g.im.is_finite()) {
        return Err(Error::Numerical {
            what: "radiation quadrature".into(),
            achieved: f64::NAN,
        });
    }
    Ok(g)
}

/// Evanescent part over (K², ∞); real valued.
pub fn eval_evanescent(ev: &GreenEvaluator, p: FieldPoint, q: FieldPoint) -> Result<f64> {
    check_point(p)?;
    check_point(q)?;
    if p == q {
        return Err(Error::domain("evanescent part is singular at coincident points"));
    }
    let h = ev.profile.h();
    let a = (p.z - q.z).abs();
    let s_max = ev.evanescent_cutoff(a);
    let extent = p.x.abs().max(h) + q.x.abs().max(h);
    let nodes = ev.evanescent_nodes(extent, a, s_max);
    let g = node_sum(&ev.profile, &nodes, p, q).re + ev.evanescent_tail(p, q, s_max);
    if !g.is_finite() {
        return Err(Error::Numerical {
            what: "evanescent quadrature".into(),
            achieved: f64::NAN,
        });
    }
    Ok(g)
}

pub fn eval_parts(ev: &GreenEvaluator, p: FieldPoint, q: FieldPoint) -> Result<GreenParts> {
    let evanescent = eval_evanescent(ev, p, q)?;
    Ok(GreenParts {
        guided: eval_guided(ev, p, q),
        radiation: eval_radiation(ev, p, q)?,
        evanescent,
    })
}

/// G(x,z; ξ,ζ) for p ≠ q.
pub fn eval_full(ev: &GreenEvaluator, p: FieldPoint, q: FieldPoint) -> Result<Complex64> {
    Ok(eval_parts(ev, p, q)?.total())
}

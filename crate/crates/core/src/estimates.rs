//! Constants of the existence theory: Φ*, Υ_j, bounds on |G^g|, |G^r| and
//! ‖G‖_{L²(μ×μ)}, the weight constants C₁, C₂, the stability constant C, and
//! the contraction threshold ε₀ = 1/(CK).  Also weighted Sobolev norms.

use log::warn;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::field::{ComplexField, FieldJet};
use crate::green::GreenEvaluator;
use crate::modal::{boundary_values, sigma_from_boundary, GuidedMode, Parity};
use crate::perturb::{stencil_jet, PerturbationMap};
use crate::profile::WaveguideProfile;
use crate::quadrature::{composite_graded, trapezoid_weights, GaussLegendre};

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// μ = (1 + x² + z²)^{-a}, a > 1.
    PowerLaw { a: f64 },
    /// μ = (1 + x²)^{-a1/2} (1 + z²)^{-a2/2}, a1, a2 > 1.
    Separable { a1: f64, a2: f64 },
}

/// A weight μ, multiplied by `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub scale: f64,
}

/// L¹ norm of (1 + x²)^{-b}, b > 1/2.
fn algebraic_l1(b: f64) -> f64 {
    (PI.sqrt().ln() + ln_gamma(b - 0.5) - ln_gamma(b)).exp()
}

impl WeightSpec {
    pub fn power_law(a: f64) -> Result<Self> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::domain(format!("weight exponent must exceed 1, got {a}")));
        }
        Ok(WeightSpec {
            kind: WeightKind::PowerLaw { a },
            scale: 1.0,
        })
    }

    pub fn separable(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 1.0 && a2 > 1.0 && a1.is_finite() && a2.is_finite()) {
            return Err(Error::domain(format!(
                "separable weight exponents must exceed 1, got {a1}, {a2}"
            )));
        }
        Ok(WeightSpec {
            kind: WeightKind::Separable { a1, a2 },
            scale: 1.0,
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!("weight scale must be positive, got {scale}")));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn value(&self, x: f64, z: f64) -> f64 {
        self.scale
            * match self.kind {
                WeightKind::PowerLaw { a } => (1.0 + x * x + z * z).powf(-a),
                WeightKind::Separable { a1, a2 } => (1.0 + x * x).powf(-0.5 * a1) * (1.0 + z * z).powf(-0.5 * a2),
            }
    }

    /// (∇μ/μ, ∇²μ/μ) at (x, z).
    pub fn log_derivatives(&self, x: f64, z: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        match self.kind {
            WeightKind::PowerLaw { a } => {
                let w = 1.0 + x * x + z * z;
                let g = [-2.0 * a * x / w, -2.0 * a * z / w];
                let c = 4.0 * a * (a + 1.0) / (w * w);
                let d = -2.0 * a / w;
                (g, [[d + c * x * x, c * x * z], [c * x * z, d + c * z * z]])
            }
            WeightKind::Separable { a1, a2 } => {
                let one = |b: f64, x: f64| {
                    let w = 1.0 + x * x;
                    (-2.0 * b * x / w, -2.0 * b / w + 4.0 * b * (b + 1.0) * x * x / (w * w))
                };
                let (gx, hx) = one(0.5 * a1, x);
                let (gz, hz) = one(0.5 * a2, z);
                ([gx, gz], [[hx, gx * gz], [gx * gz, hz]])
            }
        }
    }

    /// ∫ μ over the plane.
    pub fn l1_norm(&self) -> f64 {
        self.scale
            * match self.kind {
                WeightKind::PowerLaw { a } => PI / (a - 1.0),
                WeightKind::Separable { a1, a2 } => algebraic_l1(0.5 * a1) * algebraic_l1(0.5 * a2),
            }
    }

    /// Exponents b1, b2 of the dominating pair μ₁ = scale (1+x²)^{-b1},
    /// μ₂ = (1+z²)^{-b2} with μ ≤ μ₁ μ₂.
    fn dominating_exponents(&self) -> (f64, f64) {
        match self.kind {
            WeightKind::PowerLaw { a } => (0.5 * a, 0.5 * a),
            WeightKind::Separable { a1, a2 } => (0.5 * a1, 0.5 * a2),
        }
    }

    /// (‖μ₁‖₁, ‖μ₂‖₁, ‖μ₂‖₂²) of the dominating pair.
    pub fn dominating_norms(&self) -> (f64, f64, f64) {
        let (b1, b2) = self.dominating_exponents();
        (self.scale * algebraic_l1(b1), algebraic_l1(b2), algebraic_l1(2.0 * b2))
    }

    pub fn mu1(&self, x: f64) -> f64 {
        self.scale * (1.0 + x * x).powf(-self.dominating_exponents().0)
    }

    pub fn mu2(&self, z: f64) -> f64 {
        (1.0 + z * z).powf(-self.dominating_exponents().1)
    }
}

/// sup |∇μ|/μ and sup |∇²μ|_F/μ with the log-radial grid size they settled at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightConstants {
    pub c1: f64,
    pub c2: f64,
    pub radial_points: usize,
}

pub fn weight_constants(weight: &WeightSpec) -> WeightConstants {
    let sweep = |n: usize| {
        let (mut c1, mut c2): (f64, f64) = (0.0, 0.0);
        let angles = n / 4;
        for i in 0..=n {
            let r = if i == 0 {
                0.0
            } else {
                10f64.powf(-3.0 + 6.0 * (i - 1) as f64 / (n - 1) as f64)
            };
            for m in 0..=angles {
                let th = 0.5 * PI * m as f64 / angles as f64;
                let (g, h) = weight.log_derivatives(r * th.cos(), r * th.sin());
                c1 = c1.max(g[0].hypot(g[1]));
                c2 = c2.max((h[0][0] * h[0][0] + 2.0 * h[0][1] * h[0][1] + h[1][1] * h[1][1]).sqrt());
            }
        }
        (c1, c2)
    };
    let mut n = 256;
    let (mut c1, mut c2) = sweep(n);
    while n < 1 << 15 {
        let (d1, d2) = sweep(2 * n);
        n *= 2;
        let stable = (d1 - c1).abs() <= 1e-3 * d1 && (d2 - c2).abs() <= 1e-3 * d2;
        c1 = d1;
        c2 = d2;
        if stable {
            break;
        }
    }
    WeightConstants {
        c1,
        c2,
        radial_points: n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiStar {
    pub lambda_0: f64,
    pub value: f64,
    /// λ₀ had to be taken from a single parity.
    pub fallback: bool,
}

/// Φ* = exp(∫|q| / (2√λ₀)), λ₀ = min(λ₁ˢ, λ₁ᵃ).
pub fn phi_star(profile: &WaveguideProfile, modes: &[GuidedMode]) -> Result<PhiStar> {
    let first = |p: Parity| modes.iter().filter(|m| m.parity == p).map(|m| m.lambda).reduce(f64::min);
    let (ls, la) = (first(Parity::Symmetric), first(Parity::Antisymmetric));
    let (lambda_0, fallback) = match (ls, la) {
        (Some(s), Some(a)) => (s.min(a), false),
        (Some(v), None) | (None, Some(v)) => (v, true),
        (None, None) => return Err(Error::domain("no guided modes: lambda_0 is undefined")),
    };
    if fallback {
        warn!("only one parity has a guided mode; lambda_0 = {lambda_0} from that parity");
    }
    let value = (profile.q_abs_integral() / (2.0 * lambda_0.sqrt())).exp();
    Ok(PhiStar {
        lambda_0,
        value,
        fallback,
    })
}

/// Υ_j² on a fixed number of θ panels.
pub fn upsilon_sq_with(profile: &WaveguideProfile, parity: Parity, panels: usize) -> f64 {
    let d2 = profile.d2();
    let width = (profile.k2n2() - d2).sqrt();
    composite_graded(GaussLegendre::sixteen(), 0.0, 0.5 * PI, panels, 6)
        .into_iter()
        .map(|(theta, w)| {
            let q = width * theta.sin();
            let (p, dp) = boundary_values(profile, parity, d2 + q * q);
            w * sigma_from_boundary(q * q, p, dp) * q
        })
        .sum()
}

/// Υ_j = (∫_{d²}^{K²} σ_j(λ) / (2√(K²-λ)) dλ)^{1/2}.
pub fn upsilon(profile: &WaveguideProfile, parity: Parity) -> Result<f64> {
    let mut panels = 4;
    let mut prev = upsilon_sq_with(profile, parity, panels);
    while panels < 4096 {
        panels *= 2;
        let next = upsilon_sq_with(profile, parity, panels);
        if (next - prev).abs() <= 1e-12 * next {
            return Ok(next.sqrt());
        }
        prev = next;
    }
    Err(Error::Numerical {
        what: format!("upsilon_{} quadrature", parity.label()),
        achieved: 0.0,
    })
}

/// (gg_bound, gr_bound).
pub fn green_part_bounds(modes: &[GuidedMode], phi_star: f64, upsilons: [f64; 2]) -> (f64, f64) {
    let p2 = phi_star * phi_star;
    let gg = p2 * modes.iter().map(|m| m.r / (2.0 * m.beta)).sum::<f64>();
    let su = upsilons[0] + upsilons[1];
    let su2 = upsilons[0] * upsilons[0] + upsilons[1] * upsilons[1];
    let gr = 0.5f64.max(phi_star * su / (4.0 * PI.sqrt())).max(p2 * su2 / (2.0 * PI));
    (gg, gr)
}

/// Assembled bound on ‖G‖_{L²(μ×μ)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenNormBound {
    /// (gg + gr) ‖μ‖₁.
    pub guided_radiation: f64,
    /// Bound on ‖G^e‖².
    pub evanescent_sq: f64,
    pub total: f64,
}

/// Default log-step of the evanescent double integral.
pub const NORM_BOUND_STEP: f64 = 0.05;

pub fn green_norm_bound(profile: &WaveguideProfile, weight: &WeightSpec, modes: &[GuidedMode]) -> Result<GreenNormBound> {
    green_norm_bound_with_step(profile, weight, modes, NORM_BOUND_STEP)
}

/// As [`green_norm_bound`] with the log-step of the (s, r) quadrature given.
pub fn green_norm_bound_with_step(
    profile: &WaveguideProfile,
    weight: &WeightSpec,
    modes: &[GuidedMode],
    step: f64,
) -> Result<GreenNormBound> {
    let ps = phi_star(profile, modes)?;
    let ups = [upsilon(profile, Parity::Symmetric)?, upsilon(profile, Parity::Antisymmetric)?];
    let (gg, gr) = green_part_bounds(modes, ps.value, ups);
    let guided_radiation = (gg + gr) * weight.l1_norm();

    let (m1, m2_l1, m2_l2sq) = weight.dominating_norms();
    let a = m2_l1 * m2_l1;
    let k2 = profile.k2n2();
    let d2 = profile.d2();
    let p2 = ps.value * ps.value;
    let (y0, y1) = (1e-8f64.ln(), 1e12f64.ln());
    let n = ((y1 - y0) / step).ceil() as usize;
    let h = (y1 - y0) / n as f64;
    let ss: Vec<f64> = (0..=n).map(|i| (y0 + h * i as f64).exp()).collect();
    let tw = trapezoid_weights(n + 1, h);
    let mut total = 0.0;
    for parity in Parity::BOTH {
        // g(s) s dy
        let g: Vec<f64> = ss
            .iter()
            .zip(&tw)
            .map(|(&s, &w)| {
                let lambda = k2 + s * s;
                let (p, dp) = boundary_values(profile, parity, lambda);
                let sigma = sigma_from_boundary(lambda - d2, p, dp);
                (p2 * sigma + 1.0 / (lambda - d2).sqrt()) * s * w
            })
            .collect();
        let inv_sqrt: Vec<f64> = ss.iter().map(|s| 1.0 / s.sqrt()).collect();
        for i in 0..=n {
            let mut row = 0.0;
            for j in 0..=n {
                row += g[j] * a.min(m2_l2sq * inv_sqrt[i] * inv_sqrt[j]);
            }
            total += g[i] * row;
        }
    }
    let evanescent_sq = m1 * m1 / (PI * PI) * total;
    if !evanescent_sq.is_finite() {
        return Err(Error::Numerical {
            what: "evanescent norm double integral diverged".into(),
            achieved: evanescent_sq,
        });
    }
    Ok(GreenNormBound {
        guided_radiation,
        evanescent_sq,
        total: guided_radiation + evanescent_sq.sqrt(),
    })
}

/// C from C² = 5/2 + 2C₂ + [3/2 + 4C₂ + 8C₂² + (1+4C₂)K² + 2K⁴]‖G‖², K² = k²n*².
pub fn constant_c(c2: f64, green_norm: f64, k2n2: f64) -> f64 {
    let bracket = 1.5 + 4.0 * c2 + 8.0 * c2 * c2 + (1.0 + 4.0 * c2) * k2n2 + 2.0 * k2n2 * k2n2;
    (2.5 + 2.0 * c2 + bracket * green_norm * green_norm).sqrt()
}

/// ε₀ = 1/(CK); +∞ for K = 0.
pub fn epsilon_threshold(c: f64, k: f64) -> Result<f64> {
    if !(c > 0.0) || k < 0.0 || !k.is_finite() {
        return Err(Error::domain(format!(
            "epsilon threshold needs C > 0 and K >= 0, got C = {c}, K = {k}"
        )));
    }
    Ok(if k == 0.0 { f64::INFINITY } else { 1.0 / (c * k) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormOrder {
    L2,
    H1,
    H2,
}

/// Weighted norm from a jet (analytic derivatives).  `inverse` uses μ⁻¹.
pub fn weighted_norm_jet(jet: &FieldJet, weight: &WeightSpec, order: NormOrder, inverse: bool) -> f64 {
    let g = jet.grid();
    let wx = trapezoid_weights(g.nx, g.dx());
    let wz = trapezoid_weights(g.nz, g.dz());
    let mut acc = 0.0;
    for j in 0..g.nz {
        let z = g.z(j);
        for i in 0..g.nx {
            let k = g.index(i, j);
            let mut d = jet.value.values[k].norm_sqr();
            if order != NormOrder::L2 {
                d += jet.dx.values[k].norm_sqr() + jet.dz.values[k].norm_sqr();
            }
            if order == NormOrder::H2 {
                d += jet.dxx.values[k].norm_sqr() + 2.0 * jet.dxz.values[k].norm_sqr() + jet.dzz.values[k].norm_sqr();
            }
            if d == 0.0 {
                continue;
            }
            let mu = weight.value(g.x(i), z);
            acc += wx[i] * wz[j] * d * if inverse { 1.0 / mu } else { mu };
        }
    }
    acc.sqrt()
}

/// Weighted L², H¹ or H² norm of a sampled field, derivatives by stencils.
pub fn weighted_norm(field: &ComplexField, weight: &WeightSpec, order: NormOrder, inverse: bool) -> f64 {
    let g = field.grid;
    let mut edge: f64 = 0.0;
    let mut interior: f64 = 0.0;
    for j in 0..g.nz {
        for i in 0..g.nx {
            let m = field.get(i, j).norm_sqr() * weight.value(g.x(i), g.z(j));
            if i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.nz {
                edge = edge.max(m);
            } else {
                interior = interior.max(m);
            }
        }
    }
    if !inverse && edge > 1e-6 * interior && edge > 0.0 {
        warn!(
            "weighted field has not decayed at the grid boundary (boundary/interior density {:.2e})",
            edge / interior
        );
    }
    let jet = if order == NormOrder::L2 {
        let mut j = FieldJet::zeros(g);
        j.value = field.clone();
        j
    } else {
        stencil_jet(field, None)
    };
    weighted_norm_jet(&jet, weight, order, inverse)
}

/// Every constant of the existence argument for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub phi_star: f64,
    pub lambda_0: f64,
    pub lambda_0_fallback: bool,
    pub upsilon_s: f64,
    pub upsilon_a: f64,
    pub gg_bound: f64,
    pub gr_bound: f64,
    pub green_norm_bound: f64,
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    pub k: f64,
    pub eps0: f64,
    /// (entry, how it was obtained).
    pub notes: Vec<(String, String)>,
}

pub fn estimate_report(ev: &GreenEvaluator, weight: &WeightSpec, pmap: &PerturbationMap) -> Result<EstimateReport> {
    let profile = ev.profile();
    let modes = ev.modes();
    let ps = phi_star(profile, modes)?;
    let ups = [upsilon(profile, Parity::Symmetric)?, upsilon(profile, Parity::Antisymmetric)?];
    let (gg, gr) = green_part_bounds(modes, ps.value, ups);
    let norm = green_norm_bound(profile, weight, modes)?;
    let wc = weight_constants(weight);
    let c = constant_c(wc.c2, norm.total, profile.k2n2());
    let eps0 = epsilon_threshold(c, pmap.k_bound)?;
    let mut notes = vec![
        (
            "phi_star".to_string(),
            format!("exp(int|q| / (2 sqrt(lambda_0))), int|q| = {:.6e}", profile.q_abs_integral()),
        ),
        (
            "upsilon".to_string(),
            "Gauss-Legendre in theta, lambda = d^2 + (K^2 - d^2) sin^2 theta, doubled to 1e-12".to_string(),
        ),
        (
            "green_norm_bound".to_string(),
            format!(
                "(gg + gr) |mu|_1 = {:.6e} plus sqrt of evanescent double integral {:.6e} (log step {NORM_BOUND_STEP})",
                norm.guided_radiation, norm.evanescent_sq
            ),
        ),
        (
            "c1_c2".to_string(),
            format!("log-radial grid maximization, {} radial points", wc.radial_points),
        ),
        (
            "k".to_string(),
            format!("dense sampling of the support, {} points per axis", pmap.k_resolution),
        ),
    ];
    if ps.fallback {
        notes.push(("lambda_0".to_string(), "single-parity fallback".to_string()));
    }
    Ok(EstimateReport {
        phi_star: ps.value,
        lambda_0: ps.lambda_0,
        lambda_0_fallback: ps.fallback,
        upsilon_s: ups[0],
        upsilon_a: ups[1],
        gg_bound: gg,
        gr_bound: gr,
        green_norm_bound: norm.total,
        c1: wc.c1,
        c2: wc.c2,
        c,
        k: pmap.k_bound,
        eps0,
        notes,
    })
}

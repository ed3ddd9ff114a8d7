//! Near-identity coordinate maps Γ(s,t) = (s + εφ, t + εψ), the coefficients of
//! the transformed operator, and the zeroth/first-order fields.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{apply_green, apply_green_jet, same_grid, ComplexField, FieldJet, Grid2D};
use crate::green::GreenEvaluator;
use crate::modal::{GuidedMode, ModeFunction};
use crate::profile::WaveguideProfile;
use crate::quadrature::trapezoid_weights;

/// A·(1 - P(|x-c|/w)) with the quintic smoothstep P(u) = 10u³ - 15u⁴ + 6u⁵,
/// zero for |x-c| >= w.  C² everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpFunction {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
}

impl BumpFunction {
    pub fn new(amplitude: f64, center: f64, half_width: f64) -> Result<Self> {
        if !(amplitude.is_finite() && center.is_finite()) {
            return Err(Error::domain("bump amplitude and center must be finite"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::domain(format!("bump half-width must be positive, got {half_width}")));
        }
        Ok(BumpFunction {
            amplitude,
            center,
            half_width,
        })
    }

    pub fn zero() -> Self {
        BumpFunction {
            amplitude: 0.0,
            center: 0.0,
            half_width: 1.0,
        }
    }

    /// (S, S', S'').
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let w = self.half_width;
        let d = x - self.center;
        let u = d.abs() / w;
        if u >= 1.0 || self.amplitude == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let sg = d.signum();
        let p = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        let dp = 30.0 * u * u * (1.0 - u) * (1.0 - u);
        let ddp = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
        let a = self.amplitude;
        (a * (1.0 - p), -a * dp * sg / w, -a * ddp / (w * w))
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }
}

/// Separable displacement S(s)·T(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub s: BumpFunction,
    pub t: BumpFunction,
}

/// Value and derivatives of a displacement at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Jet2 {
    v: f64,
    ds: f64,
    dt: f64,
    dss: f64,
    dst: f64,
    dtt: f64,
}

impl Displacement {
    pub fn zero() -> Self {
        Displacement {
            s: BumpFunction::zero(),
            t: BumpFunction::zero(),
        }
    }

    fn jet(&self, s: f64, t: f64) -> Jet2 {
        let (a, a1, a2) = self.s.eval(s);
        let (b, b1, b2) = self.t.eval(t);
        Jet2 {
            v: a * b,
            ds: a1 * b,
            dt: a * b1,
            dss: a2 * b,
            dst: a1 * b1,
            dtt: a * b2,
        }
    }

    fn is_zero(&self) -> bool {
        self.s.is_zero() || self.t.is_zero()
    }
}

/// How the map is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapSpec {
    /// Γ(s,t) = (s, t + ε S(s) T(t)).
    Product { s: BumpFunction, t: BumpFunction },
    /// Γ(s,t) = (s + ε φ, t + ε ψ) with separable φ, ψ.
    General { phi: Displacement, psi: Displacement },
}

impl MapSpec {
    fn displacements(&self) -> (Displacement, Displacement) {
        match *self {
            MapSpec::Product { s, t } => (Displacement::zero(), Displacement { s, t }),
            MapSpec::General { phi, psi } => (phi, psi),
        }
    }
}

/// Coefficients of a w_ss + 2 a12 w_st + a22 w_tt + b1 w_s + b2 w_t + c w.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coefficients {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
}

impl Coefficients {
    /// Frobenius norm of the symmetric matrix (a_ij).
    pub fn a_norm(&self) -> f64 {
        (self.a11 * self.a11 + 2.0 * self.a12 * self.a12 + self.a22 * self.a22).sqrt()
    }

    pub fn b_norm(&self) -> f64 {
        self.b1.hypot(self.b2)
    }

    fn apply(&self, w: [Complex64; 6]) -> Complex64 {
        let [u, us, ut, uss, ust, utt] = w;
        self.a11 * uss + 2.0 * self.a12 * ust + self.a22 * utt + self.b1 * us + self.b2 * ut + self.c * u
    }
}

/// Which first-order right-hand side to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhsVariant {
    /// -L̃ w⁽⁰⁾ with the coefficients obtained by expanding the inverse map.
    #[default]
    Derived,
    /// The alternative assignment -2S'T w_ss - 2ST' w_st - (S''T + ST'') w_t.
    Swapped,
}

#[derive(Debug, Clone)]
pub struct PerturbationMap {
    pub spec: MapSpec,
    phi: Displacement,
    psi: Displacement,
    /// sup of the first-order coefficient norms divided by μ.
    pub k_bound: f64,
    /// Sampling resolution (points per axis over the support) K converged at.
    pub k_resolution: usize,
}

impl PerturbationMap {
    /// Builds the map and computes K against the weight `mu`.
    pub fn new<W: Fn(f64, f64) -> f64>(spec: MapSpec, mu: W) -> Result<Self> {
        let (phi, psi) = spec.displacements();
        let mut map = PerturbationMap {
            spec,
            phi,
            psi,
            k_bound: 0.0,
            k_resolution: 0,
        };
        let (k, n) = map.compute_k(&mu);
        map.k_bound = k;
        map.k_resolution = n;
        Ok(map)
    }

    pub fn is_identity(&self) -> bool {
        self.phi.is_zero() && self.psi.is_zero()
    }

    /// Bounding box [s0,s1]×[t0,t1] of the coefficient support, or None.
    pub fn support(&self) -> Option<[f64; 4]> {
        let mut boxes = Vec::new();
        for d in [self.phi, self.psi] {
            if !d.is_zero() {
                let (s0, s1) = d.s.support();
                let (t0, t1) = d.t.support();
                boxes.push([s0, s1, t0, t1]);
            }
        }
        boxes
            .into_iter()
            .reduce(|a, b| [a[0].min(b[0]), a[1].max(b[1]), a[2].min(b[2]), a[3].max(b[3])])
    }

    /// First-order coefficients ã, b̃, c̃ at (s, t).
    pub fn first_order(&self, s: f64, t: f64) -> Coefficients {
        let p = self.phi.jet(s, t);
        let q = self.psi.jet(s, t);
        Coefficients {
            a11: -2.0 * p.ds,
            a12: -(p.dt + q.ds),
            a22: -2.0 * q.dt,
            b1: -(p.dss + p.dtt),
            b2: -(q.dss + q.dtt),
            c: 0.0,
        }
    }

    /// Principal and first-order coefficients of L_ε in (s,t), without the
    /// k² n0(s)² term.
    pub fn exact(&self, eps: f64, s: f64, t: f64) -> Result<Coefficients> {
        let p = self.phi.jet(s, t);
        let q = self.psi.jet(s, t);
        // A = DΓ, rows (x, z), columns (s, t)
        let a = [[1.0 + eps * p.ds, eps * p.dt], [eps * q.ds, 1.0 + eps * q.dt]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if !(det > 0.0) {
            return Err(Error::domain(format!("map is not invertible at ({s}, {t}) for eps = {eps}")));
        }
        let b = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
        let da_s = [[eps * p.dss, eps * p.dst], [eps * q.dss, eps * q.dst]];
        let da_t = [[eps * p.dst, eps * p.dtt], [eps * q.dst, eps * q.dtt]];
        let db_s = neg_bab(&b, &da_s);
        let db_t = neg_bab(&b, &da_t);
        // ∂/∂x = B11 ∂s + B21 ∂t, ∂/∂z = B12 ∂s + B22 ∂t
        let lap = |r: usize| b[0][0] * db_s[r][0] + b[1][0] * db_t[r][0] + b[0][1] * db_s[r][1] + b[1][1] * db_t[r][1];
        Ok(Coefficients {
            a11: b[0][0] * b[0][0] + b[0][1] * b[0][1],
            a12: b[0][0] * b[1][0] + b[0][1] * b[1][1],
            a22: b[1][0] * b[1][0] + b[1][1] * b[1][1],
            b1: lap(0),
            b2: lap(1),
            c: 0.0,
        })
    }

    /// Coefficients of L̃_ε = (L_ε - L0)/ε; the first-order ones at ε = 0.
    pub fn tilde(&self, eps: f64, s: f64, t: f64) -> Result<Coefficients> {
        if eps == 0.0 {
            return Ok(self.first_order(s, t));
        }
        let e = self.exact(eps, s, t)?;
        Ok(Coefficients {
            a11: (e.a11 - 1.0) / eps,
            a12: e.a12 / eps,
            a22: (e.a22 - 1.0) / eps,
            b1: e.b1 / eps,
            b2: e.b2 / eps,
            c: 0.0,
        })
    }

    /// Largest ε·‖DΦ‖_F over the support; the map is invertible when < 1.
    pub fn invertibility_margin(&self, eps: f64) -> f64 {
        let Some([s0, s1, t0, t1]) = self.support() else { return 0.0 };
        let n = 200;
        let mut worst: f64 = 0.0;
        for i in 0..=n {
            let s = s0 + (s1 - s0) * i as f64 / n as f64;
            for j in 0..=n {
                let t = t0 + (t1 - t0) * j as f64 / n as f64;
                let p = self.phi.jet(s, t);
                let q = self.psi.jet(s, t);
                let f = (p.ds * p.ds + p.dt * p.dt + q.ds * q.ds + q.dt * q.dt).sqrt();
                worst = worst.max(eps.abs() * f);
            }
        }
        worst
    }

    pub fn check_invertible(&self, eps: f64) -> Result<()> {
        let m = self.invertibility_margin(eps);
        if m < 1.0 {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "map not invertible for eps = {eps}: eps*|D(displacement)| reaches {m:.3}"
            )))
        }
    }

    /// Γ(s, t).
    pub fn forward(&self, eps: f64, s: f64, t: f64) -> (f64, f64) {
        (s + eps * self.phi.jet(s, t).v, t + eps * self.psi.jet(s, t).v)
    }

    /// Γ⁻¹(x, z) by Newton iteration.
    pub fn inverse(&self, eps: f64, x: f64, z: f64) -> Result<(f64, f64)> {
        let (mut s, mut t) = (x, z);
        for _ in 0..100 {
            let (fx, fz) = self.forward(eps, s, t);
            let (rx, rz) = (fx - x, fz - z);
            if rx.abs() + rz.abs() < 1e-15 * (1.0 + x.abs() + z.abs()) {
                return Ok((s, t));
            }
            let p = self.phi.jet(s, t);
            let q = self.psi.jet(s, t);
            let a = [[1.0 + eps * p.ds, eps * p.dt], [eps * q.ds, 1.0 + eps * q.dt]];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            s -= (a[1][1] * rx - a[0][1] * rz) / det;
            t -= (-a[1][0] * rx + a[0][0] * rz) / det;
        }
        Err(Error::Numerical {
            what: "map inversion did not converge".into(),
            achieved: f64::NAN,
        })
    }

    fn compute_k<W: Fn(f64, f64) -> f64>(&self, mu: &W) -> (f64, usize) {
        let Some([s0, s1, t0, t1]) = self.support() else {
            return (0.0, 0);
        };
        let sample = |n: usize| {
            let mut best: f64 = 0.0;
            for i in 0..=n {
                let s = s0 + (s1 - s0) * i as f64 / n as f64;
                for j in 0..=n {
                    let t = t0 + (t1 - t0) * j as f64 / n as f64;
                    let c = self.first_order(s, t);
                    let m = mu(s, t);
                    best = best.max(c.a_norm() / m).max(c.b_norm() / m).max(c.c.abs() / m);
                }
            }
            best
        };
        let mut n = 32;
        let mut k = sample(n);
        while n < 4096 {
            let k2 = sample(2 * n);
            n *= 2;
            let done = (k2 - k).abs() <= 0.01 * k2;
            k = k2;
            if done {
                break;
            }
        }
        (k, n)
    }

    /// (L̃_ε w)(s,t) on the jet's grid.
    pub fn tilde_apply(&self, profile: &WaveguideProfile, eps: f64, w: &FieldJet) -> Result<ComplexField> {
        let _ = profile;
        self.apply_with(w, |s, t| self.tilde(eps, s, t))
    }

    /// (L_ε w)(s,t) including k² n0(s)² w.
    pub fn apply_exact(&self, profile: &WaveguideProfile, eps: f64, w: &FieldJet) -> Result<ComplexField> {
        let k2 = profile.k() * profile.k();
        self.apply_with(w, |s, t| {
            let mut c = if eps == 0.0 || self.is_identity() {
                Coefficients {
                    a11: 1.0,
                    a22: 1.0,
                    ..Default::default()
                }
            } else {
                self.exact(eps, s, t)?
            };
            let n = profile.index(s);
            c.c = k2 * n * n;
            Ok(c)
        })
    }

    fn apply_with<F: Fn(f64, f64) -> Result<Coefficients>>(&self, w: &FieldJet, coef: F) -> Result<ComplexField> {
        let g = w.grid();
        let mut values = Vec::with_capacity(g.len());
        for j in 0..g.nz {
            let t = g.z(j);
            for i in 0..g.nx {
                let s = g.x(i);
                let k = g.index(i, j);
                let c = coef(s, t)?;
                values.push(c.apply([
                    w.value.values[k],
                    w.dx.values[k],
                    w.dz.values[k],
                    w.dxx.values[k],
                    w.dxz.values[k],
                    w.dzz.values[k],
                ]));
            }
        }
        Ok(ComplexField { grid: g, values })
    }

    /// Right-hand side F⁽¹⁾ with L0 w⁽¹⁾ = F⁽¹⁾ from a w⁽⁰⁾ jet.
    pub fn first_order_rhs_jet(&self, w0: &FieldJet, variant: RhsVariant) -> Result<ComplexField> {
        match variant {
            RhsVariant::Derived => Ok(self
                .apply_with(w0, |s, t| Ok(self.first_order(s, t)))?
                .scaled(Complex64::new(-1.0, 0.0))),
            RhsVariant::Swapped => {
                let (s_b, t_b) = match self.spec {
                    MapSpec::Product { s, t } => (s, t),
                    MapSpec::General { .. } => {
                        return Err(Error::domain("the swapped right-hand side is defined for product maps only"))
                    }
                };
                self.apply_with(w0, |s, t| {
                    let (a, a1, a2) = s_b.eval(s);
                    let (b, b1, b2) = t_b.eval(t);
                    Ok(Coefficients {
                        a11: -2.0 * a1 * b,
                        a12: -a * b1,
                        b2: -(a2 * b + a * b2),
                        ..Default::default()
                    })
                })
            }
        }
    }

    /// Right-hand side from a sampled w⁽⁰⁾, derivatives by stencils.
    pub fn first_order_rhs(&self, w0: &ComplexField, profile: &WaveguideProfile, variant: RhsVariant) -> Result<ComplexField> {
        let jet = stencil_jet(w0, Some(profile.h()));
        self.first_order_rhs_jet(&jet, variant)
    }
}

fn neg_bab(b: &[[f64; 2]; 2], da: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut t = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            t[i][j] = b[i][0] * da[0][j] + b[i][1] * da[1][j];
        }
    }
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = -(t[i][0] * b[0][j] + t[i][1] * b[1][j]);
        }
    }
    out
}

/// Derivatives by second-order finite differences.  Central where possible,
/// one-sided at the grid edges and, when `interface` is given, on the side
/// of x = ±interface the node lies on.
pub fn stencil_jet(u: &ComplexField, interface: Option<f64>) -> FieldJet {
    let g = u.grid;
    let (dx, dz) = (g.dx(), g.dz());
    let xs = g.xs();
    // Allowed x-stencil direction per column: 0 central, -1 left, +1 right.
    let dir: Vec<i32> = (0..g.nx)
        .map(|i| {
            if i == 0 {
                return 1;
            }
            if i + 1 == g.nx {
                return -1;
            }
            if let Some(h) = interface {
                for c in [-h, h] {
                    let (l, m, r) = (xs[i - 1], xs[i], xs[i + 1]);
                    if l < c && c < m {
                        return if i + 3 < g.nx { 1 } else { 0 };
                    }
                    if m < c && c < r {
                        return if i >= 3 { -1 } else { 0 };
                    }
                }
            }
            0
        })
        .collect();
    let d1 = |f: &dyn Fn(isize) -> Complex64, d: i32, step: f64| -> Complex64 {
        match d {
            0 => (f(1) - f(-1)) / (2.0 * step),
            1 => (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * step),
            _ => (3.0 * f(0) - 4.0 * f(-1) + f(-2)) / (2.0 * step),
        }
    };
    let d2 = |f: &dyn Fn(isize) -> Complex64, d: i32, step: f64| -> Complex64 {
        match d {
            0 => (f(1) - 2.0 * f(0) + f(-1)) / (step * step),
            1 => (2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)) / (step * step),
            _ => (2.0 * f(0) - 5.0 * f(-1) + 4.0 * f(-2) - f(-3)) / (step * step),
        }
    };
    let zdir = |j: usize| {
        if j == 0 {
            1
        } else if j + 1 == g.nz {
            -1
        } else {
            0
        }
    };
    let at = |i: usize, j: usize| u.values[g.index(i, j)];
    let mut out = FieldJet::zeros(g);
    out.value = u.clone();
    // u_x at every node, reused for u_xz
    let mut ux = vec![Complex64::new(0.0, 0.0); g.len()];
    for j in 0..g.nz {
        for i in 0..g.nx {
            let k = g.index(i, j);
            let fx = |o: isize| at((i as isize + o) as usize, j);
            let fz = |o: isize| at(i, (j as isize + o) as usize);
            ux[k] = d1(&fx, dir[i], dx);
            out.dx.values[k] = ux[k];
            out.dxx.values[k] = d2(&fx, dir[i], dx);
            out.dz.values[k] = d1(&fz, zdir(j), dz);
            out.dzz.values[k] = d2(&fz, zdir(j), dz);
        }
    }
    for j in 0..g.nz {
        for i in 0..g.nx {
            let fz = |o: isize| ux[g.index(i, (j as isize + o) as usize)];
            out.dxz.values[g.index(i, j)] = d1(&fz, zdir(j), dz);
        }
    }
    out
}

/// w⁽⁰⁾(s,t) = v(s) e^{iβt} for a guided mode.
pub fn zeroth_order_field(profile: &WaveguideProfile, mode: &GuidedMode, grid: &Grid2D) -> ComplexField {
    zeroth_order_jet(profile, mode, grid).value
}

/// w⁽⁰⁾ with analytic derivatives.
pub fn zeroth_order_jet(profile: &WaveguideProfile, mode: &GuidedMode, grid: &Grid2D) -> FieldJet {
    let mf = ModeFunction::for_mode(profile, mode);
    let vs = mf.sample(&grid.xs());
    let beta = mode.beta;
    let ib = Complex64::new(0.0, beta);
    let mut jet = FieldJet::zeros(*grid);
    for j in 0..grid.nz {
        let e = (ib * grid.z(j)).exp();
        for (i, &[v, dv, ddv]) in vs.iter().enumerate() {
            let k = grid.index(i, j);
            jet.value.values[k] = v * e;
            jet.dx.values[k] = dv * e;
            jet.dz.values[k] = ib * v * e;
            jet.dxx.values[k] = ddv * e;
            jet.dxz.values[k] = ib * dv * e;
            jet.dzz.values[k] = -beta * beta * v * e;
        }
    }
    jet
}

/// w⁽¹⁾ = L0⁻¹ F⁽¹⁾.
pub fn first_order_field(ev: &GreenEvaluator, rhs: &ComplexField, out_grid: &Grid2D) -> Result<ComplexField> {
    apply_green(ev, rhs, out_grid)
}

pub fn first_order_jet(ev: &GreenEvaluator, rhs: &ComplexField, out_grid: &Grid2D) -> Result<FieldJet> {
    apply_green_jet(ev, rhs, out_grid)
}

/// r ∫ w(x, z_j) v(x) dx over the grid row j (trapezoid rule).
pub fn mode_overlap(field: &ComplexField, profile: &WaveguideProfile, mode: &GuidedMode, j: usize) -> Complex64 {
    let g = field.grid;
    let mf = ModeFunction::for_mode(profile, mode);
    let w = trapezoid_weights(g.nx, g.dx());
    (0..g.nx)
        .map(|i| field.get(i, j) * (w[i] * mf.value(g.x(i))))
        .sum::<Complex64>()
        * mode.r
}

/// w⁽⁰⁾ + ε w⁽¹⁾.
pub fn composite_field(w0: &ComplexField, w1: &ComplexField, eps: f64) -> Result<ComplexField> {
    same_grid(&w0.grid, &w1.grid)?;
    w0.axpy(Complex64::new(eps, 0.0), w1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product(amp: f64) -> PerturbationMap {
        let s = BumpFunction::new(amp, 0.1, 0.3).unwrap();
        let t = BumpFunction::new(1.0, 0.0, 0.5).unwrap();
        PerturbationMap::new(MapSpec::Product { s, t }, |x, z| (1.0 + x * x + z * z).powi(-2)).unwrap()
    }

    #[test]
    fn bump_is_c2_at_edges_and_center() {
        let b = BumpFunction::new(1.3, 0.2, 0.4).unwrap();
        for x in [-0.2, 0.2, 0.6] {
            let lo = b.eval(x - 1e-9);
            let hi = b.eval(x + 1e-9);
            assert!((lo.0 - hi.0).abs() < 1e-8);
            assert!((lo.1 - hi.1).abs() < 1e-7);
            assert!((lo.2 - hi.2).abs() < 1e-5);
        }
        assert_eq!(b.eval(0.7), (0.0, 0.0, 0.0));
        assert_eq!(b.eval(0.2).0, 1.3);
        let h = 1e-5;
        for x in [0.0, 0.33, 0.51] {
            let (_, d1, d2) = b.eval(x);
            let fd1 = (b.eval(x + h).0 - b.eval(x - h).0) / (2.0 * h);
            let fd2 = (b.eval(x + h).1 - b.eval(x - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6 && (d2 - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn identity_map_has_no_coefficients() {
        let m = product(0.0);
        assert!(m.is_identity());
        assert_eq!(m.k_bound, 0.0);
        assert_eq!(m.first_order(0.1, 0.0), Coefficients::default());
    }

    #[test]
    fn product_map_first_order_terms() {
        let m = product(0.7);
        let s_b = BumpFunction::new(0.7, 0.1, 0.3).unwrap();
        let t_b = BumpFunction::new(1.0, 0.0, 0.5).unwrap();
        for (s, t) in [(0.05, 0.1), (0.3, -0.2), (-0.1, 0.4)] {
            let c = m.first_order(s, t);
            let (a, a1, a2) = s_b.eval(s);
            let (b, b1, b2) = t_b.eval(t);
            assert_eq!(c.a11, 0.0);
            assert_eq!(c.b1, 0.0);
            assert!((c.a22 + 2.0 * a * b1).abs() < 1e-15);
            assert!((c.a12 + a1 * b).abs() < 1e-15);
            assert!((c.b2 + (a2 * b + a * b2)).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_coefficients_approach_first_order() {
        let m = product(0.7);
        for (s, t) in [(0.05, 0.1), (0.3, -0.2)] {
            let f = m.first_order(s, t);
            let e1 = m.tilde(1e-3, s, t).unwrap();
            let e2 = m.tilde(5e-4, s, t).unwrap();
            let err1 = (e1.a22 - f.a22).abs() + (e1.a12 - f.a12).abs() + (e1.b2 - f.b2).abs();
            let err2 = (e2.a22 - f.a22).abs() + (e2.a12 - f.a12).abs() + (e2.b2 - f.b2).abs();
            assert!(err1 < 1e-1 && err2 < 0.6 * err1);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let m = product(0.7);
        let (x, z) = m.forward(0.2, 0.15, 0.05);
        let (s, t) = m.inverse(0.2, x, z).unwrap();
        assert!((s - 0.15).abs() < 1e-13 && (t - 0.05).abs() < 1e-13);
    }

    #[test]
    fn k_grows_with_amplitude() {
        let k1 = product(0.5).k_bound;
        let k2 = product(1.0).k_bound;
        assert!(k1 > 0.0);
        assert!((k2 / k1 - 2.0).abs() < 1e-9);
    }
}

//! Field synthesis u = L0⁻¹ f on rectangular grids, stencil residuals and the
//! Picard iteration for the perturbed operator.
//!
//! `apply_green` projects f onto every spectral node in x (trapezoid rule),
//! convolves the projections with e^{iγ|z-ζ|} exactly for a piecewise-linear
//! profile in ζ, and resynthesizes with v_n(x).  Derivatives come from the
//! same sums, using v'' = (q - λ) v and H'' = -γ² H + 2iγ F.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimates::{weighted_norm_jet, NormOrder, WeightSpec};
use crate::green::{GreenEvaluator, SpectralNode};
use crate::par;
use crate::perturb::{stencil_jet, PerturbationMap};
use crate::profile::WaveguideProfile;
use crate::quadrature::trapezoid_weights;
use crate::special::{phi1, phi2};

/// Uniform tensor grid; samples are stored z-row by z-row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub nz: usize,
}

impl Grid2D {
    pub fn new(x_min: f64, x_max: f64, nx: usize, z_min: f64, z_max: f64, nz: usize) -> Result<Self> {
        if nx < 2 || nz < 2 {
            return Err(Error::domain(format!("grid needs at least 2 nodes per axis, got {nx}x{nz}")));
        }
        if !(x_min.is_finite() && x_max.is_finite() && z_min.is_finite() && z_max.is_finite()) {
            return Err(Error::domain("grid bounds must be finite"));
        }
        if !(x_max > x_min && z_max > z_min) {
            return Err(Error::domain("grid coordinates must be strictly increasing"));
        }
        Ok(Grid2D {
            x_min,
            x_max,
            nx,
            z_min,
            z_max,
            nz,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dz(&self) -> f64 {
        (self.z_max - self.z_min) / (self.nz - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + self.dx() * i as f64
        }
    }

    pub fn z(&self, j: usize) -> f64 {
        if j + 1 == self.nz {
            self.z_max
        } else {
            self.z_min + self.dz() * j as f64
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn zs(&self) -> Vec<f64> {
        (0..self.nz).map(|j| self.z(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid2D,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.nz
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::domain("field values must be finite"));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        ComplexField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(grid: Grid2D, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.nz {
            let z = grid.z(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), z));
            }
        }
        ComplexField { grid, values }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    /// self + a·other on a common grid.
    pub fn axpy(&self, a: Complex64, other: &ComplexField) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(ComplexField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(u, v)| u + a * v).collect(),
        })
    }
}

pub(crate) fn same_grid(a: &Grid2D, b: &Grid2D) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{a:?} vs {b:?}")))
    }
}

/// A field with its first and second partial derivatives on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldJet {
    pub value: ComplexField,
    pub dx: ComplexField,
    pub dz: ComplexField,
    pub dxx: ComplexField,
    pub dxz: ComplexField,
    pub dzz: ComplexField,
}

impl FieldJet {
    pub fn zeros(grid: Grid2D) -> Self {
        let z = ComplexField::zeros(grid);
        FieldJet {
            value: z.clone(),
            dx: z.clone(),
            dz: z.clone(),
            dxx: z.clone(),
            dxz: z.clone(),
            dzz: z,
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.value.grid
    }

    /// Samples an analytic jet: `f(x, z)` returns [u, u_x, u_z, u_xx, u_xz, u_zz].
    pub fn from_fn<F: Fn(f64, f64) -> [Complex64; 6]>(grid: Grid2D, f: F) -> Self {
        let mut parts: [Vec<Complex64>; 6] = Default::default();
        for j in 0..grid.nz {
            let z = grid.z(j);
            for i in 0..grid.nx {
                let v = f(grid.x(i), z);
                for (p, c) in parts.iter_mut().zip(v) {
                    p.push(c);
                }
            }
        }
        let [value, dx, dz, dxx, dxz, dzz] = parts.map(|values| ComplexField { grid, values });
        FieldJet {
            value,
            dx,
            dz,
            dxx,
            dxz,
            dzz,
        }
    }

    /// self + a·other, componentwise.
    pub fn axpy(&self, a: Complex64, other: &FieldJet) -> Result<Self> {
        Ok(FieldJet {
            value: self.value.axpy(a, &other.value)?,
            dx: self.dx.axpy(a, &other.dx)?,
            dz: self.dz.axpy(a, &other.dz)?,
            dxx: self.dxx.axpy(a, &other.dxx)?,
            dxz: self.dxz.axpy(a, &other.dxz)?,
            dzz: self.dzz.axpy(a, &other.dzz)?,
        })
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        FieldJet {
            value: self.value.scaled(a),
            dx: self.dx.scaled(a),
            dz: self.dz.scaled(a),
            dxx: self.dxx.scaled(a),
            dxz: self.dxz.scaled(a),
            dzz: self.dzz.scaled(a),
        }
    }
}

/// Spectral nodes adequate for sources on `src` observed on `out`.
pub fn synthesis_nodes(ev: &GreenEvaluator, src: &Grid2D, out: &Grid2D) -> Vec<SpectralNode> {
    let h = ev.profile().h();
    let xs_src = src.x_min.abs().max(src.x_max.abs());
    let xs_out = out.x_min.abs().max(out.x_max.abs());
    let z_span = out.z_max.max(src.z_max) - out.z_min.min(src.z_min);
    let mut nodes = ev.guided_nodes();
    nodes.extend(ev.radiation_nodes(xs_src + xs_out + z_span));
    let s_grid = std::f64::consts::PI / src.dx();
    nodes.extend(ev.evanescent_nodes(xs_src.max(h) + xs_out.max(h), 0.0, s_grid));
    nodes
}

/// Per-node axial data at the output z nodes: H, H' and F.
struct AxialProfile {
    h: Vec<Complex64>,
    dh: Vec<Complex64>,
    f: Vec<Complex64>,
}

/// Exact ∫ e^{κ|z-ζ|} F(ζ) dζ for F piecewise linear on `zeta` (zero outside).
fn axial_convolution(kappa: Complex64, zeta: &[f64], fz: &[Complex64], zout: &[f64]) -> AxialProfile {
    let m = zeta.len();
    // Cell weights for the end far from / near to the evaluation side.
    let cell = |tau: f64| {
        let zt = kappa * tau;
        let p1 = phi1(zt);
        let p2 = phi2(zt);
        (tau * (p1 - p2), tau * p2, (zt).exp())
    };
    let mut left = vec![Complex64::new(0.0, 0.0); m];
    let mut right = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m - 1 {
        let (far, near, e) = cell(zeta[j + 1] - zeta[j]);
        left[j + 1] = e * left[j] + far * fz[j] + near * fz[j + 1];
    }
    for j in (0..m - 1).rev() {
        let (far, near, e) = cell(zeta[j + 1] - zeta[j]);
        right[j] = e * right[j + 1] + far * fz[j + 1] + near * fz[j];
    }
    let scale = (zeta[m - 1] - zeta[0]).abs();
    let mut out = AxialProfile {
        h: Vec::with_capacity(zout.len()),
        dh: Vec::with_capacity(zout.len()),
        f: Vec::with_capacity(zout.len()),
    };
    for &z in zout {
        let (l, r, fv) = if z <= zeta[0] {
            (
                Complex64::new(0.0, 0.0),
                (kappa * (zeta[0] - z)).exp() * right[0],
                if z == zeta[0] { fz[0] } else { Complex64::new(0.0, 0.0) },
            )
        } else if z >= zeta[m - 1] {
            (
                (kappa * (z - zeta[m - 1])).exp() * left[m - 1],
                Complex64::new(0.0, 0.0),
                if z == zeta[m - 1] {
                    fz[m - 1]
                } else {
                    Complex64::new(0.0, 0.0)
                },
            )
        } else {
            let j = match zeta.binary_search_by(|p| p.total_cmp(&z)) {
                Ok(j) => j,
                Err(j) => j - 1,
            };
            let t0 = z - zeta[j];
            if t0.abs() <= 1e-13 * scale {
                (left[j], right[j], fz[j])
            } else if (zeta[j + 1] - z).abs() <= 1e-13 * scale {
                (left[j + 1], right[j + 1], fz[j + 1])
            } else {
                let t1 = zeta[j + 1] - z;
                let frac = t0 / (zeta[j + 1] - zeta[j]);
                let fv = fz[j] * (1.0 - frac) + fz[j + 1] * frac;
                let (far0, near0, e0) = cell(t0);
                let (far1, near1, e1) = cell(t1);
                (
                    e0 * left[j] + far0 * fz[j] + near0 * fv,
                    e1 * right[j + 1] + far1 * fz[j + 1] + near1 * fv,
                    fv,
                )
            }
        };
        out.h.push(l + r);
        out.dh.push(kappa * (l - r));
        out.f.push(fv);
    }
    out
}

struct NodeData {
    coef: Complex64,
    gamma: Complex64,
    /// v, v', v'' at output x nodes.
    v: Vec<[f64; 3]>,
    axial: AxialProfile,
}

fn node_data(
    profile: &WaveguideProfile,
    node: &SpectralNode,
    f: &ComplexField,
    wx: &[f64],
    xs_src: &[f64],
    xs_out: &[f64],
    zs_src: &[f64],
    zs_out: &[f64],
) -> NodeData {
    let mf = node.mode_function(profile);
    let v_src = mf.sample(xs_src);
    let g = f.grid;
    let mut fz = vec![Complex64::new(0.0, 0.0); g.nz];
    for (j, slot) in fz.iter_mut().enumerate() {
        let row = &f.values[j * g.nx..(j + 1) * g.nx];
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..g.nx {
            acc += row[i] * (wx[i] * v_src[i][0]);
        }
        *slot = acc;
    }
    let kappa = Complex64::i() * node.gamma;
    NodeData {
        coef: node.coef,
        gamma: node.gamma,
        v: mf.sample(xs_out),
        axial: axial_convolution(kappa, zs_src, &fz, zs_out),
    }
}

fn synthesize(ev: &GreenEvaluator, f: &ComplexField, out: &Grid2D, jet: bool) -> Result<FieldJet> {
    let profile = ev.profile();
    let src = f.grid;
    let nodes = synthesis_nodes(ev, &src, out);
    let wx = trapezoid_weights(src.nx, src.dx());
    let xs_src = src.xs();
    let zs_src = src.zs();
    let xs_out = out.xs();
    let zs_out = out.zs();
    let data: Vec<NodeData> = par::map_slice(&nodes, |n| node_data(profile, n, f, &wx, &xs_src, &xs_out, &zs_src, &zs_out));
    let ncomp = if jet { 6 } else { 1 };
    let rows: Vec<Vec<[Complex64; 6]>> = par::map_indices(out.nz, |j| {
        let mut row = vec![[Complex64::new(0.0, 0.0); 6]; out.nx];
        for d in &data {
            let h = d.coef * d.axial.h[j];
            if !jet {
                for (i, cell) in row.iter_mut().enumerate() {
                    cell[0] += h * d.v[i][0];
                }
                continue;
            }
            let kappa = Complex64::i() * d.gamma;
            let dh = d.coef * d.axial.dh[j];
            let ddh = d.coef * (kappa * kappa * d.axial.h[j] + 2.0 * kappa * d.axial.f[j]);
            for (i, cell) in row.iter_mut().enumerate() {
                let [v, dv, ddv] = d.v[i];
                cell[0] += h * v;
                cell[1] += h * dv;
                cell[2] += dh * v;
                cell[3] += h * ddv;
                cell[4] += dh * dv;
                cell[5] += ddh * v;
            }
        }
        row
    });
    let mut parts: [Vec<Complex64>; 6] = Default::default();
    for p in parts.iter_mut().take(ncomp) {
        p.reserve(out.len());
    }
    for row in &rows {
        for cell in row {
            for (c, p) in parts.iter_mut().enumerate().take(ncomp) {
                p.push(cell[c]);
            }
        }
    }
    let grid = *out;
    let mk = |values: Vec<Complex64>| {
        if values.is_empty() {
            ComplexField::zeros(grid)
        } else {
            ComplexField { grid, values }
        }
    };
    let [value, dx, dz, dxx, dxz, dzz] = parts.map(mk);
    if value.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Numerical {
            what: "field synthesis produced non-finite values".into(),
            achieved: f64::NAN,
        });
    }
    Ok(FieldJet {
        value,
        dx,
        dz,
        dxx,
        dxz,
        dzz,
    })
}

/// u = ∫ G(·; ξ,ζ) f(ξ,ζ) dξ dζ sampled on `out_grid`.
pub fn apply_green(ev: &GreenEvaluator, f: &ComplexField, out_grid: &Grid2D) -> Result<ComplexField> {
    Ok(synthesize(ev, f, out_grid, false)?.value)
}

/// As [`apply_green`], with first and second derivatives.
pub fn apply_green_jet(ev: &GreenEvaluator, f: &ComplexField, out_grid: &Grid2D) -> Result<FieldJet> {
    synthesize(ev, f, out_grid, true)
}

/// Which nodes a residual report ignores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    /// Cells within this many spacings of x = ±h are masked.
    pub interface_cells: usize,
    /// Cells within this many spacings of the source support are masked.
    pub support_cells: Option<usize>,
    /// |f| above `support_threshold · max|f|` counts as support.
    pub support_threshold: f64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        MaskSpec {
            interface_cells: 2,
            support_cells: None,
            support_threshold: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    /// true where the value is reported.
    pub active: Vec<bool>,
}

impl Residual {
    pub fn masked_max(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .map(|(v, _)| *v)
            .fold(0.0, f64::max)
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }
}

/// Interior nodes away from the interfaces and (optionally) from supp f.
pub fn residual_mask(grid: &Grid2D, h: f64, f: Option<&ComplexField>, spec: &MaskSpec) -> Vec<bool> {
    let dx = grid.dx();
    let dz = grid.dz();
    let mut active = vec![false; grid.len()];
    for j in 1..grid.nz - 1 {
        for i in 1..grid.nx - 1 {
            let x = grid.x(i);
            let near_iface = (x.abs() - h).abs() <= spec.interface_cells as f64 * dx + 1e-12 * dx;
            active[grid.index(i, j)] = !near_iface;
        }
    }
    if let (Some(f), Some(cells)) = (f, spec.support_cells) {
        let thr = spec.support_threshold * f.max_abs();
        let g = f.grid;
        for jj in 0..g.nz {
            for ii in 0..g.nx {
                if f.get(ii, jj).norm() <= thr {
                    continue;
                }
                let (x, z) = (g.x(ii), g.z(jj));
                for j in 0..grid.nz {
                    if (grid.z(j) - z).abs() > cells as f64 * dz + 1e-12 * dz {
                        continue;
                    }
                    for i in 0..grid.nx {
                        if (grid.x(i) - x).abs() <= cells as f64 * dx + 1e-12 * dx {
                            active[grid.index(i, j)] = false;
                        }
                    }
                }
            }
        }
    }
    active
}

/// |Δ_h u + k² n² u - f| with the 5-point stencil.
pub fn helmholtz_residual(u: &ComplexField, profile: &WaveguideProfile, f: &ComplexField, mask: &MaskSpec) -> Result<Residual> {
    same_grid(&u.grid, &f.grid)?;
    let g = u.grid;
    let (dx, dz) = (g.dx(), g.dz());
    let k2 = profile.k() * profile.k();
    let mut values = vec![0.0; g.len()];
    for j in 1..g.nz - 1 {
        for i in 1..g.nx - 1 {
            let c = u.get(i, j);
            let lap = (u.get(i + 1, j) - 2.0 * c + u.get(i - 1, j)) / (dx * dx)
                + (u.get(i, j + 1) - 2.0 * c + u.get(i, j - 1)) / (dz * dz);
            let n = profile.index(g.x(i));
            values[g.index(i, j)] = (lap + k2 * n * n * c - f.get(i, j)).norm();
        }
    }
    let active = residual_mask(&g, profile.h(), Some(f), mask);
    Ok(Residual { grid: g, values, active })
}

/// |L_ε u - f| with stencil derivatives of u, masked like [`helmholtz_residual`].
pub fn operator_residual(
    u: &ComplexField,
    pert: &PerturbationMap,
    eps: f64,
    profile: &WaveguideProfile,
    f: &ComplexField,
    mask: &MaskSpec,
) -> Result<Residual> {
    same_grid(&u.grid, &f.grid)?;
    let g = u.grid;
    let jet = stencil_jet(u, Some(profile.h()));
    let lu = pert.apply_exact(profile, eps, &jet)?;
    let values = lu.values.iter().zip(&f.values).map(|(a, b)| (a - b).norm()).collect();
    let active = residual_mask(&g, profile.h(), Some(f), mask);
    Ok(Residual { grid: g, values, active })
}

/// Options for [`picard_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub eps: f64,
    pub max_iter: usize,
    /// Iterations performed even after the stopping test passes.
    pub min_iter: usize,
    /// Stop when the weighted H² norm of the latest increment drops below this.
    pub tol: f64,
    pub weight: WeightSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardTrace {
    /// Weighted H² norms of the increments δ_0, δ_1, ...
    pub norms: Vec<f64>,
    /// ‖δ_{n+1}‖ / ‖δ_n‖.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

/// Fixed-point iteration u = L0⁻¹F - ε L0⁻¹ L̃_ε u on f's grid.
pub fn picard_solve(
    ev: &GreenEvaluator,
    pert: &PerturbationMap,
    f: &ComplexField,
    opts: &PicardOptions,
) -> Result<(FieldJet, PicardTrace)> {
    let u0 = apply_green_jet(ev, f, &f.grid)?;
    picard_solve_from(ev, pert, u0, opts)
}

/// Picard iteration whose first increment is the given jet (u0 = L0⁻¹F).
pub fn picard_solve_from(
    ev: &GreenEvaluator,
    pert: &PerturbationMap,
    u0: FieldJet,
    opts: &PicardOptions,
) -> Result<(FieldJet, PicardTrace)> {
    if !(opts.eps >= 0.0 && opts.eps.is_finite()) {
        return Err(Error::domain(format!("eps must be finite and nonnegative, got {}", opts.eps)));
    }
    let grid = u0.grid();
    let mut trace = PicardTrace {
        norms: vec![weighted_norm_jet(&u0, &opts.weight, NormOrder::H2, false)],
        ratios: vec![],
        converged: false,
    };
    if opts.eps == 0.0 {
        trace.converged = true;
        return Ok((u0, trace));
    }
    let mut u = u0.clone();
    let mut delta = u0;
    let mut streak = 0;
    for n in 1..=opts.max_iter {
        let g = pert.tilde_apply(ev.profile(), opts.eps, &delta)?;
        delta = apply_green_jet(ev, &g, &grid)?.scaled(Complex64::new(-opts.eps, 0.0));
        u = u.axpy(Complex64::new(1.0, 0.0), &delta)?;
        let norm = weighted_norm_jet(&delta, &opts.weight, NormOrder::H2, false);
        let prev = *trace.norms.last().unwrap();
        let ratio = if prev > 0.0 { norm / prev } else { 0.0 };
        trace.norms.push(norm);
        trace.ratios.push(ratio);
        streak = if ratio >= 1.0 { streak + 1 } else { 0 };
        if streak >= 3 {
            return Err(Error::Divergence {
                ratios: trace.ratios,
                norms: trace.norms,
            });
        }
        if norm < opts.tol && n >= opts.min_iter {
            trace.converged = true;
            break;
        }
    }
    Ok((u, trace))
}

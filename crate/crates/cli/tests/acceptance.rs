//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slabguide::estimates::{
    constant_c, green_norm_bound, green_part_bounds, phi_star, upsilon, weight_constants, weighted_norm, weighted_norm_jet,
};
use slabguide::field::{MaskSpec, PicardOptions};
use slabguide::modal::ModeFunction;
use slabguide::perturb::zeroth_order_jet;
use slabguide::{
    apply_green, apply_green_jet, build_evaluator, estimate_report, eval_full, eval_guided, eval_radiation, find_guided_modes,
    helmholtz_residual, operator_residual, picard_solve, solve_transverse, spectral_density, ComplexField, FieldPoint, Grid2D,
    NormOrder, Parity, RhsVariant, WaveguideProfile,
};
use slabguide_cli::{run_modes, run_perturb, Scenario};

const SCENARIO: &str = include_str!("../scenarios/slab.toml");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn scenario() -> Scenario {
    Scenario::parse(SCENARIO).unwrap()
}

fn slab() -> WaveguideProfile {
    scenario().profile().unwrap()
}

fn gaussian(g: Grid2D, x0: f64, z0: f64, width: f64) -> ComplexField {
    ComplexField::from_fn(g, |x, z| {
        Complex64::new((-((x - x0).powi(2) + (z - z0).powi(2)) / (2.0 * width * width)).exp(), 0.0)
    })
}

/// Least-squares slope of log y against log x.
fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn c1_modes() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let (modes, _) = run_modes(&scenario(), dir.path()).unwrap();
    let elapsed = t.elapsed();
    let lam = |p: Parity| modes.iter().filter(|m| m.parity == p).map(|m| m.lambda).collect::<Vec<_>>();
    let (s, a) = (lam(Parity::Symmetric), lam(Parity::Antisymmetric));
    let pass = modes.len() == 2
        && s.len() == 1
        && a.len() == 1
        && (s[0] - 23.7).abs() <= 0.1
        && (a[0] - 73.5).abs() <= 0.1
        && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "modes {}, lambda_s {:?}, lambda_a {:?}, {:.3}s",
            modes.len(),
            s,
            a,
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_uniform_medium() -> Outcome {
    let t = Instant::now();
    let p = WaveguideProfile::step(5.0, 0.2, 1.0, 1.0).unwrap();
    let ev = build_evaluator(&p, 1e-6).unwrap();
    let k = p.k() * p.n_star();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let n = 60;
    for _ in 0..n {
        let kr: f64 = rng.gen_range(1.0..20.0);
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let a = FieldPoint::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let r = kr / k;
        let b = FieldPoint::new(a.x + r * th.cos(), a.z + r * th.sin());
        let g = eval_full(&ev, a, b).unwrap();
        let exact = common::free_space_kernel(k, r);
        worst = worst.max((g - exact).norm() / exact.norm());
    }
    let elapsed = t.elapsed();
    outcome(
        worst < 1e-3 && elapsed < Duration::from_secs(30),
        format!("{n} pairs, max rel err {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn c3_residual() -> (Outcome, f64) {
    let t = Instant::now();
    let sc = scenario();
    let ev = build_evaluator(&sc.profile().unwrap(), sc.tol).unwrap();
    let g = sc.grid().unwrap();
    let f = gaussian(g, sc.source.x0, sc.source.z0, sc.source.width);
    let u = apply_green(&ev, &f, &g).unwrap();
    let res = helmholtz_residual(&u, ev.profile(), &f, &MaskSpec::default()).unwrap();
    let rel = res.masked_max() / f.max_abs();
    let elapsed = t.elapsed();
    let pass = g.nx == 201 && g.nz == 201 && rel < 1e-2 && elapsed < Duration::from_secs(300);
    (
        outcome(
            pass,
            format!(
                "{}x{} grid, masked residual / max|f| = {rel:.3e}, {:.1}s",
                g.nx,
                g.nz,
                elapsed.as_secs_f64()
            ),
        ),
        rel,
    )
}

fn c4_symmetry() -> Outcome {
    let p = slab();
    let ev = build_evaluator(&p, 1e-6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut swap, mut mirror): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let a = FieldPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let b = FieldPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let g = eval_full(&ev, a, b).unwrap();
        let gs = eval_full(&ev, b, a).unwrap();
        let gm = eval_full(&ev, FieldPoint::new(-a.x, a.z), FieldPoint::new(-b.x, b.z)).unwrap();
        swap = swap.max((g - gs).norm() / g.norm());
        mirror = mirror.max((g - gm).norm() / g.norm());
    }
    outcome(
        swap < 1e-10 && mirror < 1e-10,
        format!("50 pairs, swap {swap:.1e}, mirror {mirror:.1e}"),
    )
}

fn c5_asymptotics() -> Outcome {
    let p = slab();
    let (k2, d2) = (p.k2n2(), p.d2());
    // envelope of the oscillating error: maximum over log-spaced windows
    let windows = 8;
    let per = 200;
    let mut env = [vec![], vec![]];
    for wdx in 0..windows {
        let mut worst = [0.0f64; 2];
        for i in 0..per {
            let u = (wdx as f64 + i as f64 / per as f64) / windows as f64;
            let lam = 1e2 * k2 * 1e4f64.powf(u);
            let ss = spectral_density(&p, Parity::Symmetric, lam).unwrap();
            let sa = spectral_density(&p, Parity::Antisymmetric, lam).unwrap();
            worst[0] = worst[0].max((ss * (lam - d2).sqrt() - 1.0).abs());
            worst[1] = worst[1].max((sa * lam.sqrt() - 1.0).abs());
        }
        let center = 1e2 * k2 * 1e4f64.powf((wdx as f64 + 0.5) / windows as f64);
        env[0].push((center, worst[0]));
        env[1].push((center, worst[1]));
    }
    let slopes = [loglog_slope(&env[0]), loglog_slope(&env[1])];
    // near d²: σ_j ∝ (λ - d²)^{1/2}
    let near: Vec<f64> = Parity::BOTH
        .iter()
        .map(|&par| {
            let pts: Vec<(f64, f64)> = (0..9)
                .map(|i| {
                    let delta = d2 * 1e-8 * 1e4f64.powf(i as f64 / 8.0);
                    (delta, spectral_density(&p, par, d2 + delta).unwrap())
                })
                .collect();
            loglog_slope(&pts)
        })
        .collect();
    let dphi: Vec<f64> = Parity::BOTH
        .iter()
        .map(|&par| solve_transverse(&p, par, d2).unwrap().dphi_h)
        .collect();
    let pass =
        slopes.iter().all(|&s| s <= -0.45) && near.iter().all(|&e| (e - 0.5).abs() <= 0.05) && dphi.iter().all(|d| d.abs() > 0.0);
    outcome(
        pass,
        format!(
            "large-lambda slopes s {:.3}, a {:.3}; near-d2 exponents s {:.4}, a {:.4}",
            slopes[0], slopes[1], near[0], near[1]
        ),
    )
}

fn c6_bounds() -> Outcome {
    let p = slab();
    let ev = build_evaluator(&p, 1e-6).unwrap();
    let modes = find_guided_modes(&p).unwrap();
    // normalization: Simpson on the core, exact exponential tails
    let mut norm_err: f64 = 0.0;
    for m in &modes {
        let n = 20_000;
        let hx = 2.0 * p.h() / n as f64;
        let mf = ModeFunction::for_mode(&p, m);
        let mut core = 0.0;
        for i in 0..=n {
            let x = -p.h() + hx * i as f64;
            let wgt = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            core += wgt * mf.value(x).powi(2);
        }
        core *= hx / 3.0;
        let kappa = (p.d2() - m.lambda).sqrt();
        norm_err = norm_err.max((m.r * (core + m.phi_h * m.phi_h / kappa) - 1.0).abs());
    }
    let ps = phi_star(&p, &modes).unwrap();
    let mut phi_violations = 0;
    for i in 0..60 {
        let lambda = ps.lambda_0 * (100.0 * p.k2n2() / ps.lambda_0).powf(i as f64 / 59.0);
        for parity in Parity::BOTH {
            let sol = solve_transverse(&p, parity, lambda).unwrap();
            for j in 0..=40 {
                let x = -p.h() + 2.0 * p.h() * j as f64 / 40.0;
                if sol.core_value(&p, x).unwrap().0.abs() > ps.value {
                    phi_violations += 1;
                }
            }
        }
    }
    let (gg, gr) = green_part_bounds(
        &modes,
        ps.value,
        [
            upsilon(&p, Parity::Symmetric).unwrap(),
            upsilon(&p, Parity::Antisymmetric).unwrap(),
        ],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut vg, mut vr, mut mg, mut mr) = (0, 0, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let a = FieldPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let b = FieldPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let g = eval_guided(&ev, a, b).norm();
        let r = eval_radiation(&ev, a, b).unwrap().norm();
        vg += (g > gg) as usize;
        vr += (r > gr) as usize;
        mg = mg.max(g);
        mr = mr.max(r);
    }
    let pass = norm_err < 1e-6 && phi_violations == 0 && vg == 0 && vr == 0;
    outcome(
        pass,
        format!(
            "|r int v^2 - 1| <= {norm_err:.1e}; Phi* = {} ({phi_violations} violations); 1000 pairs: max|Gg| {mg:.4} <= {gg:.4} ({vg}), max|Gr| {mr:.4} <= {gr:.4} ({vr})",
            ps.value
        ),
    )
}

fn c7_a_priori() -> Outcome {
    let p = slab();
    let ev = build_evaluator(&p, 1e-6).unwrap();
    let w = scenario().weight().unwrap();
    let c = constant_c(
        weight_constants(&w).c2,
        green_norm_bound(&p, &w, ev.modes()).unwrap().total,
        p.k2n2(),
    );
    let g = Grid2D::new(-2.0, 2.0, 121, -2.0, 2.0, 121).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut ratios = vec![];
    for _ in 0..5 {
        let (x0, z0, width) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(0.08..0.2));
        let f = gaussian(g, x0, z0, width);
        let u = apply_green_jet(&ev, &f, &g).unwrap();
        ratios.push(weighted_norm_jet(&u, &w, NormOrder::H2, false) / weighted_norm(&f, &w, NormOrder::L2, true));
    }
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    outcome(
        ratios.iter().all(|&r| r <= c),
        format!(
            "5 sources, max measured ratio {worst:.3} vs C = {c:.1} (ratio/C = {:.2e})",
            worst / c
        ),
    )
}

fn c8_contraction(reference: f64) -> Outcome {
    let sc = scenario();
    let p = sc.profile().unwrap();
    let ev = build_evaluator(&p, sc.tol).unwrap();
    let w = sc.weight().unwrap();
    let pm = sc.perturbation_map().unwrap();
    let eps = estimate_report(&ev, &w, &pm).unwrap().eps0 / 2.0;
    let g = sc.grid().unwrap();
    let f = gaussian(g, sc.source.x0, sc.source.z0, sc.source.width);
    let opts = PicardOptions {
        eps,
        max_iter: 50,
        min_iter: 5,
        tol: 1e-10,
        weight: w,
    };
    let (u, trace) = picard_solve(&ev, &pm, &f, &opts).unwrap();
    let res = operator_residual(&u.value, &pm, eps, &p, &f, &MaskSpec::default())
        .unwrap()
        .masked_max()
        / f.max_abs();
    let max_ratio = trace.ratios.iter().cloned().fold(0.0, f64::max);
    let pass = trace.ratios.len() >= 5 && max_ratio < 1.0 && trace.converged && res < 2.0 * reference;
    outcome(
        pass,
        format!(
            "eps = {eps:.3e}, {} iterations, max ratio {max_ratio:.2e}, L_eps residual {res:.3e} vs 2 x {reference:.3e}",
            trace.ratios.len()
        ),
    )
}

fn c9_first_order() -> Outcome {
    let mut sc = scenario();
    // a bend of unit height; ε ≤ 0.1 keeps the map invertible
    sc.map.as_mut().unwrap().s.amplitude = 1.0;
    let p = sc.profile().unwrap();
    let ev = build_evaluator(&p, sc.tol).unwrap();
    let pm = sc.perturbation_map().unwrap();
    let g = sc.grid().unwrap();
    let mode = *ev.modes().iter().find(|m| m.parity == Parity::Symmetric).unwrap();
    let w0 = zeroth_order_jet(&p, &mode, &g);
    let w1 = apply_green_jet(&ev, &pm.first_order_rhs_jet(&w0, RhsVariant::Derived).unwrap(), &g).unwrap();
    let active = slabguide::field::residual_mask(&g, p.h(), None, &MaskSpec::default());
    let mut pts = vec![];
    for eps in [1e-1, 1e-2, 1e-3] {
        let lw = pm
            .apply_exact(&p, eps, &w0.axpy(Complex64::new(eps, 0.0), &w1).unwrap())
            .unwrap();
        let r = lw
            .values
            .iter()
            .zip(&active)
            .filter(|(_, a)| **a)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max);
        pts.push((eps, r));
    }
    let slope = loglog_slope(&pts);
    outcome(
        (slope - 2.0).abs() <= 0.3,
        format!(
            "residuals {:.3e}, {:.3e}, {:.3e}; slope {slope:.3}",
            pts[0].1, pts[1].1, pts[2].1
        ),
    )
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn c10_determinism() -> Outcome {
    let sc = scenario();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    slabguide::par::with_threads(1, || run_perturb(&sc, a.path())).unwrap();
    slabguide::par::with_threads(3, || run_perturb(&sc, b.path())).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    let bytes: usize = fa.iter().map(|(_, d)| d.len()).sum();
    outcome(
        !fa.is_empty() && fa == fb,
        format!("{} files, {bytes} bytes, 1 vs 3 threads", fa.len()),
    )
}

fn guarded<F: FnOnce() -> Outcome>(f: F) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![];
    results.push(("guided modes of the reference slab", guarded(c1_modes)));
    results.push(("uniform medium against the free-space kernel", guarded(c2_uniform_medium)));
    let mut reference = f64::NAN;
    results.push((
        "Helmholtz residual of the synthesized field",
        guarded(|| {
            let (o, r) = c3_residual();
            reference = r;
            o
        }),
    ));
    results.push(("reciprocity and parity", guarded(c4_symmetry)));
    results.push(("spectral density asymptotics", guarded(c5_asymptotics)));
    results.push(("normalization and part bounds", guarded(c6_bounds)));
    results.push(("a priori H2 estimate", guarded(c7_a_priori)));
    results.push(("contraction at eps0/2", guarded(|| c8_contraction(reference))));
    results.push(("first-order consistency", guarded(c9_first_order)));
    results.push(("determinism of perturb runs", guarded(c10_determinism)));
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
        failed += (!o.pass) as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

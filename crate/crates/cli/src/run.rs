//! One function per subcommand.  Each validates the scenario, computes, and
//! writes its files into the output directory from this thread only.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use slabguide::field::{residual_mask, MaskSpec, PicardOptions};
use slabguide::green::eval_parts;
use slabguide::perturb::{composite_field, zeroth_order_jet};
use slabguide::{
    apply_green, apply_green_jet, build_evaluator, estimate_report, find_guided_modes, helmholtz_residual, operator_residual,
    picard_solve, ComplexField, EstimateReport, FieldPoint, GreenEvaluator, GuidedMode, PerturbationMap,
};

use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, field_table, num, Table};
use crate::scenario::{RunKind, Scenario};

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

/// Validates and dispatches on `kind`.
pub fn run(kind: RunKind, sc: &Scenario, out: &Path) -> CliResult<RunOutput> {
    match kind {
        RunKind::Modes => run_modes(sc, out).map(|(_, o)| o),
        RunKind::Green => run_green(sc, out),
        RunKind::Field => run_field(sc, out),
        RunKind::Perturb => run_perturb(sc, out),
        RunKind::Picard => run_picard(sc, out),
        RunKind::Estimates => run_estimates(sc, out),
    }
}

fn prepare(kind: RunKind, sc: &Scenario, out: &Path) -> CliResult<(String, RunOutput)> {
    sc.validate(kind)?;
    ensure_dir(out)?;
    let path = out.join("scenario.toml");
    std::fs::write(&path, sc.emit()).map_err(|e| CliError::io(&path, e))?;
    Ok((
        sc.hash(),
        RunOutput {
            files: vec![path],
            summary: vec![],
        },
    ))
}

fn evaluator(sc: &Scenario) -> CliResult<GreenEvaluator> {
    Ok(build_evaluator(&sc.profile()?, sc.tol)?)
}

fn gaussian_source(sc: &Scenario) -> CliResult<ComplexField> {
    let s = &sc.source;
    let two_w2 = 2.0 * s.width * s.width;
    Ok(ComplexField::from_fn(sc.source_grid()?, |x, z| {
        Complex64::new(s.amplitude * (-((x - s.x0).powi(2) + (z - s.z0).powi(2)) / two_w2).exp(), 0.0)
    }))
}

/// ε from the map section, resolving `eps0_fraction` through the estimate report.
fn resolve_eps(sc: &Scenario, ev: &GreenEvaluator, pm: &PerturbationMap) -> CliResult<(f64, Option<EstimateReport>)> {
    let m = sc.map.as_ref().expect("validated");
    let (eps, report) = match (m.eps, m.eps0_fraction) {
        (Some(e), _) => (e, None),
        (None, Some(frac)) => {
            let rep = estimate_report(ev, &sc.weight()?, pm)?;
            if !rep.eps0.is_finite() {
                return Err(CliError::validation(
                    "map.eps0_fraction",
                    "ε₀ is unbounded for an identity map; give `eps`",
                ));
            }
            (frac * rep.eps0, Some(rep))
        }
        (None, None) => unreachable!("validated"),
    };
    pm.check_invertible(eps)?;
    Ok((eps, report))
}

fn select_mode(sc: &Scenario, modes: &[GuidedMode]) -> CliResult<GuidedMode> {
    let parity = sc.parity()?;
    let idx = sc.map.as_ref().map_or(0, |m| m.mode_index);
    let same: Vec<&GuidedMode> = modes.iter().filter(|m| m.parity == parity).collect();
    same.get(idx).map(|m| **m).ok_or_else(|| {
        CliError::validation(
            "map.mode_index",
            format!("the profile has {} guided mode(s) of parity {}", same.len(), parity.label()),
        )
    })
}

fn estimates_table(rep: &EstimateReport, hash: &str) -> Table {
    let mut t = Table::new(&["quantity", "value"], hash);
    let rows = [
        ("phi_star", rep.phi_star),
        ("lambda_0", rep.lambda_0),
        ("upsilon_s", rep.upsilon_s),
        ("upsilon_a", rep.upsilon_a),
        ("gg_bound", rep.gg_bound),
        ("gr_bound", rep.gr_bound),
        ("green_norm_bound", rep.green_norm_bound),
        ("c1", rep.c1),
        ("c2", rep.c2),
        ("c", rep.c),
        ("k", rep.k),
        ("eps0", rep.eps0),
    ];
    for (name, v) in rows {
        t.row(&[name.to_string(), num(v)]);
    }
    t.row(&["lambda_0_fallback".into(), rep.lambda_0_fallback.to_string()]);
    for (key, how) in &rep.notes {
        t.row(&[format!("# {key}:"), how.clone()]);
    }
    t
}

pub fn run_modes(sc: &Scenario, out: &Path) -> CliResult<(Vec<GuidedMode>, RunOutput)> {
    let (hash, mut o) = prepare(RunKind::Modes, sc, out)?;
    let modes = find_guided_modes(&sc.profile()?)?;
    let mut t = Table::new(&["parity", "index", "lambda", "beta", "r", "residual"], &hash);
    o.summary.push(format!("{} guided mode(s)", modes.len()));
    for parity in slabguide::Parity::BOTH {
        for (i, m) in modes.iter().filter(|m| m.parity == parity).enumerate() {
            t.row(&[
                parity.label().into(),
                i.to_string(),
                num(m.lambda),
                num(m.beta),
                num(m.r),
                num(m.residual),
            ]);
            o.summary.push(format!(
                "{} {i}: lambda = {:.6}, beta = {:.6}, r = {:.6}, residual = {:.2e}",
                parity.label(),
                m.lambda,
                m.beta,
                m.r,
                m.residual
            ));
        }
    }
    o.files.push(t.write(out, "modes.txt")?);
    Ok((modes, o))
}

pub fn run_green(sc: &Scenario, out: &Path) -> CliResult<RunOutput> {
    let (hash, mut o) = prepare(RunKind::Green, sc, out)?;
    let ev = evaluator(sc)?;
    let pairs = &sc.green.as_ref().expect("validated").pairs;
    let mut t = Table::new(
        &[
            "x",
            "z",
            "xi",
            "zeta",
            "re",
            "im",
            "abs",
            "guided_re",
            "guided_im",
            "radiation_re",
            "radiation_im",
            "evanescent",
        ],
        &hash,
    );
    let parts = slabguide::par::map_slice(pairs, |p| {
        eval_parts(&ev, FieldPoint::new(p[0], p[1]), FieldPoint::new(p[2], p[3]))
    });
    for (p, r) in pairs.iter().zip(parts) {
        let g = r?;
        let v = g.total();
        t.numeric_row(&[
            p[0],
            p[1],
            p[2],
            p[3],
            v.re,
            v.im,
            v.norm(),
            g.guided.re,
            g.guided.im,
            g.radiation.re,
            g.radiation.im,
            g.evanescent,
        ]);
    }
    o.summary.push(format!("{} point pair(s) evaluated", pairs.len()));
    o.files.push(t.write(out, "green.txt")?);
    Ok(o)
}

pub fn run_field(sc: &Scenario, out: &Path) -> CliResult<RunOutput> {
    let (hash, mut o) = prepare(RunKind::Field, sc, out)?;
    let ev = evaluator(sc)?;
    let f = gaussian_source(sc)?;
    let grid = sc.grid()?;
    let u = apply_green(&ev, &f, &grid)?;
    o.files.push(field_table(&u, &hash).write(out, "u.txt")?);
    if f.grid == grid {
        let res = helmholtz_residual(&u, ev.profile(), &f, &MaskSpec::default())?;
        let mut t = Table::new(&["x", "z", "residual", "active"], &hash);
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                let k = grid.index(i, j);
                t.row(&[
                    num(grid.x(i)),
                    num(grid.z(j)),
                    num(res.values[k]),
                    (res.active[k] as u8).to_string(),
                ]);
            }
        }
        o.files.push(t.write(out, "residual.txt")?);
        o.summary
            .push(format!("masked residual / max|f| = {:.3e}", res.masked_max() / f.max_abs()));
    }
    o.summary.push(format!("max|u| = {:.6e}", u.max_abs()));
    Ok(o)
}

pub fn run_perturb(sc: &Scenario, out: &Path) -> CliResult<RunOutput> {
    let (hash, mut o) = prepare(RunKind::Perturb, sc, out)?;
    let ev = evaluator(sc)?;
    let pm = sc.perturbation_map()?;
    let (eps, report) = resolve_eps(sc, &ev, &pm)?;
    let mode = select_mode(sc, ev.modes())?;
    let grid = sc.grid()?;
    let w0 = zeroth_order_jet(ev.profile(), &mode, &grid);
    let rhs = pm.first_order_rhs_jet(&w0, sc.rhs_variant()?)?;
    let w1 = apply_green_jet(&ev, &rhs, &grid)?;
    let w = composite_field(&w0.value, &w1.value, eps)?;
    let lw = pm.apply_exact(ev.profile(), eps, &w0.axpy(Complex64::new(eps, 0.0), &w1)?)?;
    let active = residual_mask(&grid, ev.profile().h(), None, &MaskSpec::default());
    let consistency = lw
        .values
        .iter()
        .zip(&active)
        .filter(|(_, a)| **a)
        .map(|(v, _)| v.norm())
        .fold(0.0, f64::max);
    o.files.push(field_table(&w0.value, &hash).write(out, "w0.txt")?);
    o.files.push(field_table(&w1.value, &hash).write(out, "w1.txt")?);
    o.files.push(field_table(&w, &hash).write(out, "w.txt")?);
    if let Some(rep) = &report {
        o.files.push(estimates_table(rep, &hash).write(out, "estimates.txt")?);
    }
    o.summary.push(format!(
        "eps = {eps:.6e}, mode {} lambda = {:.6}",
        mode.parity.label(),
        mode.lambda
    ));
    o.summary.push(format!(
        "max|w1| = {:.6e}, masked max|L_eps(w0 + eps w1)| = {consistency:.3e}",
        w1.value.max_abs()
    ));
    Ok(o)
}

pub fn run_picard(sc: &Scenario, out: &Path) -> CliResult<RunOutput> {
    let (hash, mut o) = prepare(RunKind::Picard, sc, out)?;
    let ev = evaluator(sc)?;
    let pm = sc.perturbation_map()?;
    let (eps, report) = resolve_eps(sc, &ev, &pm)?;
    if let Some(rep) = &report {
        o.files.push(estimates_table(rep, &hash).write(out, "estimates.txt")?);
    }
    let f = gaussian_source(sc)?;
    let opts = PicardOptions {
        eps,
        max_iter: sc.picard.max_iter,
        min_iter: sc.picard.min_iter,
        tol: sc.picard.tol,
        weight: sc.weight()?,
    };
    let trace_table = |norms: &[f64], ratios: &[f64]| {
        let mut t = Table::new(&["iteration", "increment_norm", "ratio"], &hash);
        for (n, v) in norms.iter().enumerate() {
            let ratio = if n == 0 { String::from("nan") } else { num(ratios[n - 1]) };
            t.row(&[n.to_string(), num(*v), ratio]);
        }
        t
    };
    match picard_solve(&ev, &pm, &f, &opts) {
        Ok((u, trace)) => {
            o.files
                .push(trace_table(&trace.norms, &trace.ratios).write(out, "trace.txt")?);
            o.files.push(field_table(&u.value, &hash).write(out, "u.txt")?);
            let res = operator_residual(&u.value, &pm, eps, ev.profile(), &f, &MaskSpec::default())?;
            o.summary.push(format!(
                "eps = {eps:.6e}, {} iteration(s), converged = {}",
                trace.ratios.len(),
                trace.converged
            ));
            if let Some(r) = trace.ratios.iter().cloned().reduce(f64::max) {
                o.summary.push(format!("largest contraction ratio = {r:.3e}"));
            }
            o.summary.push(format!(
                "masked L_eps residual / max|f| = {:.3e}",
                res.masked_max() / f.max_abs()
            ));
            if !trace.converged {
                return Err(CliError::Numerical(format!(
                    "Picard iteration did not reach tol {:.1e} in {} iterations (trace in {})",
                    opts.tol,
                    opts.max_iter,
                    out.join("trace.txt").display()
                )));
            }
            Ok(o)
        }
        Err(slabguide::Error::Divergence { ratios, norms }) => {
            let path = trace_table(&norms, &ratios).write(out, "trace.txt")?;
            Err(CliError::Divergence {
                iterations: ratios.len(),
                trace: path,
            })
        }
        Err(e) => Err(e.into()),
    }
}

pub fn run_estimates(sc: &Scenario, out: &Path) -> CliResult<RunOutput> {
    let (hash, mut o) = prepare(RunKind::Estimates, sc, out)?;
    let ev = evaluator(sc)?;
    let rep = estimate_report(&ev, &sc.weight()?, &sc.perturbation_map()?)?;
    o.files.push(estimates_table(&rep, &hash).write(out, "estimates.txt")?);
    o.summary.push(format!(
        "Phi* = {:.6}, |G| bound = {:.6}, C = {:.6}, K = {:.6}, eps0 = {:.6e}",
        rep.phi_star, rep.green_norm_bound, rep.c, rep.k, rep.eps0
    ));
    Ok(o)
}

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slabguide::green::{eval_parts, GreenEvaluator};
use slabguide::modal::ModeFunction;
use slabguide::quadrature::{composite, GaussLegendre};
use slabguide::{build_evaluator, eval_evanescent, eval_full, eval_guided, FieldPoint, Parity, WaveguideProfile};
use std::sync::OnceLock;

fn slab() -> WaveguideProfile {
    WaveguideProfile::step(5.0, 0.2, 2.0, 1.0).unwrap()
}

fn evaluator() -> &'static GreenEvaluator {
    static EV: OnceLock<GreenEvaluator> = OnceLock::new();
    EV.get_or_init(|| build_evaluator(&slab(), 1e-6).unwrap())
}

fn random_pair(rng: &mut ChaCha8Rng) -> (FieldPoint, FieldPoint) {
    loop {
        let p = FieldPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let q = FieldPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if (p.x - q.x).hypot(p.z - q.z) > 0.05 {
            return (p, q);
        }
    }
}

#[test]
fn reciprocity_and_parity_of_every_part() {
    let ev = evaluator();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (p, q) = random_pair(&mut rng);
        let a = eval_parts(ev, p, q).unwrap();
        let b = eval_parts(ev, q, p).unwrap();
        let c = eval_parts(ev, FieldPoint::new(-p.x, p.z), FieldPoint::new(-q.x, q.z)).unwrap();
        let scale = a.total().norm();
        for (u, v) in [
            (a.guided, b.guided),
            (a.radiation, b.radiation),
            (a.guided, c.guided),
            (a.radiation, c.radiation),
        ] {
            assert!((u - v).norm() <= 1e-10 * scale);
        }
        assert!((a.evanescent - b.evanescent).abs() <= 1e-10 * scale);
        assert!((a.evanescent - c.evanescent).abs() <= 1e-10 * scale);
    }
}

#[test]
fn halving_tol_stays_within_old_tol() {
    let coarse = build_evaluator(&slab(), 1e-4).unwrap();
    let fine = build_evaluator(&slab(), 5e-5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let (p, q) = random_pair(&mut rng);
        let a = eval_full(&coarse, p, q).unwrap();
        let b = eval_full(&fine, p, q).unwrap();
        assert!((a - b).norm() <= 1e-4 * b.norm().max(1e-3), "{a} {b}");
    }
}

#[test]
fn evanescent_part_matches_oversampled_quadrature() {
    let ev = evaluator();
    let p = slab();
    let k2 = p.k2n2();
    for (x, xi, a) in [(0.1, -0.15, 1.0), (0.5, 0.3, 2.0), (-0.7, 0.1, 1.5)] {
        let got = eval_evanescent(ev, FieldPoint::new(x, 0.0), FieldPoint::new(xi, a)).unwrap();
        // direct λ-integral with a dense uniform-in-s rule, truncated where e^{-as} < 1e-16
        let s_max = 37.0 / a;
        let rule = composite(&GaussLegendre::new(20), 0.0, s_max, 2000);
        let mut acc = 0.0;
        for parity in Parity::BOTH {
            for &(s, w) in &rule {
                let lam = k2 + s * s;
                let mf = ModeFunction::new(&p, parity, lam).unwrap();
                let sigma = slabguide::spectral_density(&p, parity, lam).unwrap();
                acc += w * (-a * s).exp() * mf.value(x) * mf.value(xi) * sigma;
            }
        }
        let expect = -acc / (2.0 * std::f64::consts::PI);
        assert!((got - expect).abs() < 1e-7 * (1.0 + expect.abs()), "{got} {expect}");
    }
}

#[test]
fn guided_part_dominates_far_downstream() {
    let ev = evaluator();
    let p = FieldPoint::new(0.05, 0.0);
    let mut last = f64::INFINITY;
    for a in [1.0, 2.0, 4.0, 8.0] {
        let q = FieldPoint::new(-0.1, a);
        let g = eval_full(ev, p, q).unwrap();
        let diff = (g - eval_guided(ev, p, q)).norm();
        assert!(diff < last);
        last = diff;
    }
}

#[test]
fn green_function_satisfies_helmholtz_away_from_source() {
    let ev = evaluator();
    let prof = slab();
    let src = FieldPoint::new(0.05, 0.0);
    let hstep = 1e-2;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut tested = 0;
    while tested < 10 {
        let x: f64 = rng.gen_range(-0.8..0.8);
        let z: f64 = rng.gen_range(-0.8..0.8);
        if (x.abs() - prof.h()).abs() < 3.0 * hstep || (x - src.x).hypot(z - src.z) < 3.0 * hstep {
            continue;
        }
        tested += 1;
        let g = |dx: f64, dz: f64| eval_full(ev, FieldPoint::new(x + dx, z + dz), src).unwrap();
        let c = g(0.0, 0.0);
        let lap = (g(hstep, 0.0) + g(-hstep, 0.0) + g(0.0, hstep) + g(0.0, -hstep) - 4.0 * c) / (hstep * hstep);
        let n = prof.index(x);
        let res: Complex64 = lap + 25.0 * n * n * c;
        worst = worst.max(res.norm());
        scale = scale.max(25.0 * n * n * c.norm());
    }
    assert!(worst < 1e-2 * scale, "{worst} vs {scale}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn swap_symmetry(x in -1.0f64..1.0, z in -1.0f64..1.0, xi in -1.0f64..1.0, zeta in -1.0f64..1.0) {
        prop_assume!((x - xi).hypot(z - zeta) > 1e-3);
        let ev = evaluator();
        let a = eval_full(ev, FieldPoint::new(x, z), FieldPoint::new(xi, zeta)).unwrap();
        let b = eval_full(ev, FieldPoint::new(xi, zeta), FieldPoint::new(x, z)).unwrap();
        prop_assert!((a - b).norm() <= 1e-10 * a.norm());
    }
}

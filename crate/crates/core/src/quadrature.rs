//! Gauss–Legendre rules and composite panel constructions.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared 16-point rule used by the spectral integrals.
    pub fn sixteen() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(16))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Appends the mapped nodes/weights for [a, b] to `out`.
    pub fn push_panel(&self, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out.push((mid + half * x, w * half));
        }
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Composite rule on [a, b] split into `panels` equal panels.
pub fn composite(rule: &GaussLegendre, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let mut out = Vec::with_capacity(panels * rule.nodes.len());
    let w = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + w * p as f64;
        rule.push_panel(lo, lo + w, &mut out);
    }
    out
}

/// Composite rule whose first panel is further split geometrically towards `a`,
/// for integrands with a sharp but integrable feature at the left endpoint.
pub fn composite_graded(rule: &GaussLegendre, a: f64, b: f64, panels: usize, levels: usize) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    let mut out = Vec::new();
    let mut edges = vec![a];
    let mut e = w;
    let mut inner = Vec::new();
    for _ in 0..levels {
        e *= 0.25;
        inner.push(a + e);
    }
    inner.reverse();
    edges.extend(inner);
    edges.push(a + w);
    for pair in edges.windows(2) {
        rule.push_panel(pair[0], pair[1], &mut out);
    }
    for p in 1..panels {
        let lo = a + w * p as f64;
        rule.push_panel(lo, lo + w, &mut out);
    }
    out
}

/// Trapezoid weights for `n` uniformly spaced samples with spacing `dx`.
pub fn trapezoid_weights(n: usize, dx: f64) -> Vec<f64> {
    let mut w = vec![dx; n];
    if n >= 1 {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1, 2, 5, 8, 16, 31] {
            let gl = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let got = gl.integrate(-1.0, 2.0, |x| x.powi(deg as i32));
            let exact = (2f64.powi(deg as i32 + 1) - (-1f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
            assert!((got - exact).abs() < 1e-12 * exact.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn weights_sum_to_two() {
        let gl = GaussLegendre::new(16);
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_rule_handles_sqrt_endpoint() {
        let rule = composite_graded(GaussLegendre::sixteen(), 0.0, 1.0, 2, 6);
        let got: f64 = rule.iter().map(|(x, w)| w * x.sqrt()).sum();
        assert!((got - 2.0 / 3.0).abs() < 1e-8);
    }
}

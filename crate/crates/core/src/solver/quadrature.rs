//! Gauss-Legendre rules and oscillatory (Filon-type) cell weights.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Interpolation nodes per cell.
pub const CELL_NODES: usize = 16;
/// Size of each Gauss-Legendre panel used to integrate against the basis.
const PANEL_NODES: usize = 24;
/// Largest phase change `|theta|` allowed across one panel.
const PANEL_PHASE: f64 = 4.0;

/// Interpolation nodes on the unit cell `[0, 1]` and oscillatory weights
/// `w_q(theta) = int_0^1 e^{i theta x} l_q(x) dx`, with `l_q` the Lagrange
/// basis on the nodes. The weights integrate `e^{i theta x} p(x)` exactly
/// (up to rounding) for polynomials `p` of degree below [`CELL_NODES`].
#[derive(Debug)]
pub struct CellRule {
    /// Gauss-Legendre nodes in `[0, 1]`.
    pub nodes: Vec<f64>,
    bary: Vec<f64>,
    panel_nodes: Vec<f64>,
    panel_weights: Vec<f64>,
}

impl CellRule {
    pub fn shared() -> &'static CellRule {
        static RULE: OnceLock<CellRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let (x, _) = gauss_legendre(CELL_NODES);
            let nodes: Vec<f64> = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
            let bary = (0..CELL_NODES)
                .map(|q| 1.0 / (0..CELL_NODES).filter(|&p| p != q).map(|p| nodes[q] - nodes[p]).product::<f64>())
                .collect();
            let (px, pw) = gauss_legendre(PANEL_NODES);
            CellRule {
                nodes,
                bary,
                panel_nodes: px.iter().map(|v| 0.5 * (v + 1.0)).collect(),
                panel_weights: pw.iter().map(|w| 0.5 * w).collect(),
            }
        })
    }

    /// Basis values `l_q(x)` by the barycentric formula.
    fn basis(&self, x: f64, out: &mut [f64]) {
        if let Some(p) = self.nodes.iter().position(|&n| n == x) {
            out.iter_mut().enumerate().for_each(|(q, o)| *o = if q == p { 1.0 } else { 0.0 });
            return;
        }
        let mut den = 0.0;
        for (q, o) in out.iter_mut().enumerate() {
            *o = self.bary[q] / (x - self.nodes[q]);
            den += *o;
        }
        out.iter_mut().for_each(|o| *o /= den);
    }

    pub fn weights(&self, theta: Complex64) -> Vec<Complex64> {
        let panels = 1 + (theta.norm() / PANEL_PHASE).ceil() as usize;
        let width = 1.0 / panels as f64;
        let mut w = vec![Complex64::new(0.0, 0.0); CELL_NODES];
        let mut l = [0.0; CELL_NODES];
        for p in 0..panels {
            for (x0, w0) in self.panel_nodes.iter().zip(&self.panel_weights) {
                let x = (p as f64 + x0) * width;
                let phase = (Complex64::i() * theta * x).exp() * (w0 * width);
                self.basis(x, &mut l);
                for (wq, lq) in w.iter_mut().zip(&l) {
                    *wq += phase * lq;
                }
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for k in 0..24u32 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            assert!((got - exact).abs() < 1e-14, "degree {k}");
        }
    }

    /// `int_0^1 e^{i theta x} x dx` in closed form.
    fn first_moment(theta: Complex64) -> Complex64 {
        let i = Complex64::i();
        let e = (i * theta).exp();
        e / (i * theta) + (e - 1.0) / (theta * theta)
    }

    #[test]
    fn cell_weights_integrate_oscillatory_moments() {
        let rule = CellRule::shared();
        for theta in [Complex64::new(0.3, 0.0), Complex64::new(12.0, -0.6), Complex64::new(-2500.0, 3.0)] {
            let w = rule.weights(theta);
            let got: Complex64 = w.iter().zip(&rule.nodes).map(|(w, x)| w * x).sum();
            let exact = first_moment(theta);
            assert!((got - exact).norm() < 1e-14 * (1.0 + exact.norm()), "theta {theta}: {got} vs {exact}");
            let zeroth: Complex64 = w.iter().sum();
            let exact0 = ((Complex64::i() * theta).exp() - 1.0) / (Complex64::i() * theta);
            assert!((zeroth - exact0).norm() < 1e-14, "theta {theta}");
        }
    }
}

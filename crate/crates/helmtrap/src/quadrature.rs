//! Gauss-Legendre rules, Lagrange interpolation on panels, and product
//! integration weights for `log|t - s|` on `[-1, 1]`.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes in increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `P_n(z)` and `P_n'(z)`.
pub fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// `P_0(z), ..., P_{n}(z)`.
pub fn legendre_all(n: usize, z: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(z);
    }
    for k in 2..=n {
        let kf = k as f64;
        let v = ((2.0 * kf - 1.0) * z * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
        p.push(v);
    }
    p
}

/// A Gauss-Legendre panel rule with precomputed interpolation data.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    bary: Vec<f64>,
    /// `log_weights[i][j]`: weight of node `j` in `int log|t_i - s| f(s) ds`.
    pub log_weights: Vec<Vec<f64>>,
}

impl PanelRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        let bary = (0..order)
            .map(|j| {
                let mut prod = 1.0;
                for m in 0..order {
                    if m != j {
                        prod *= nodes[j] - nodes[m];
                    }
                }
                1.0 / prod
            })
            .collect();
        let log_weights = nodes
            .iter()
            .map(|&t| log_product_weights(t, &nodes, &weights))
            .collect();
        PanelRule {
            nodes,
            weights,
            bary,
            log_weights,
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Values of all Lagrange basis polynomials at `s`.
    pub fn lagrange(&self, s: f64, out: &mut [f64]) {
        let n = self.order();
        for j in 0..n {
            if s == self.nodes[j] {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[j] = 1.0;
                return;
            }
        }
        let mut denom = 0.0;
        for j in 0..n {
            let t = self.bary[j] / (s - self.nodes[j]);
            out[j] = t;
            denom += t;
        }
        for v in out.iter_mut().take(n) {
            *v /= denom;
        }
    }
}

/// Ferrers functions of the second kind `Q_0..Q_n` on `(-1, 1)`.
fn ferrers_q(n: usize, t: f64) -> Vec<f64> {
    let mut q = Vec::with_capacity(n + 1);
    q.push(0.5 * ((1.0 + t) / (1.0 - t)).ln());
    if n >= 1 {
        q.push(t * q[0] - 1.0);
    }
    for m in 1..n {
        let mf = m as f64;
        let v = ((2.0 * mf + 1.0) * t * q[m] - mf * q[m - 1]) / (mf + 1.0);
        q.push(v);
    }
    q
}

/// `int_{-1}^{1} log|t - s| P_m(s) ds` for `m = 0..=n`, `t` in `(-1, 1)`.
pub fn log_legendre_moments(n: usize, t: f64) -> Vec<f64> {
    let q = ferrers_q(n + 1, t);
    let mut out = Vec::with_capacity(n + 1);
    out.push((1.0 + t) * (1.0 + t).ln() + (1.0 - t) * (1.0 - t).ln() - 2.0);
    for m in 1..=n {
        out.push(2.0 * (q[m + 1] - q[m - 1]) / (2.0 * m as f64 + 1.0));
    }
    out
}

/// Weights `w_j` with `int log|t - s| f(s) ds = sum_j w_j f(s_j)` exact for
/// polynomials `f` of degree below the number of nodes.
pub fn log_product_weights(t: f64, nodes: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mom = log_legendre_moments(n - 1, t);
    let mut w = vec![0.0; n];
    for j in 0..n {
        let p = legendre_all(n - 1, nodes[j]);
        let mut acc = 0.0;
        for m in 0..n {
            acc += mom[m] * (2.0 * m as f64 + 1.0) * 0.5 * p[m];
        }
        w[j] = acc * weights[j];
    }
    w
}

/// Adaptive Gauss-Legendre integration of a real function.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    let rule = |lo: f64, hi: f64| -> f64 {
        let h = 0.5 * (hi - lo);
        let c = 0.5 * (hi + lo);
        x.iter().zip(&w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>() * h
    };
    fn rec<G: Fn(f64, f64) -> f64>(g: &G, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (lo + hi);
        let l = g(lo, mid);
        let r = g(mid, hi);
        let floor = 64.0 * f64::EPSILON * (l.abs() + r.abs());
        if (l + r - whole).abs() <= tol.max(floor) || depth > 60 {
            return l + r;
        }
        rec(g, lo, mid, l, tol, depth + 1) + rec(g, mid, hi, r, tol, depth + 1)
    }
    let whole = rule(a, b);
    let tol = 0.1 * rel_tol * whole.abs().max(1e-300);
    rec(&rule, a, b, whole, tol, 0)
}

/// Integral of `f(u)` over `u` in `[0, len]` where `f` may have an
/// integrable singularity at `u = 0`: geometrically graded Gauss panels.
/// The argument is the offset from the singular point so that no precision
/// is lost near it.
pub fn graded_integrate<F: Fn(f64) -> f64>(f: &F, len: f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    let mut total = 0.0;
    let mut hi = len;
    for _ in 0..120 {
        let lo = 0.5 * hi;
        let h = 0.5 * (hi - lo);
        let c = 0.5 * (hi + lo);
        total += x.iter().zip(&w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>() * h;
        hi = lo;
    }
    total
}

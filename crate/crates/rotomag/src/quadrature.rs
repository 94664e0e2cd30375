//! Gauss-Legendre quadrature rules.
//!
//! Nodes and weights are computed on demand by Newton iteration on the
//! Legendre polynomials (machine-precision accurate and deterministic) and
//! cached per point count.

use std::sync::OnceLock;

/// Maximum supported point count per direction.
pub const MAX_POINTS: usize = 16;

/// A one-dimensional Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Maps the rule to the interval [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

/// Legendre polynomial value and derivative at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_rule(n: usize) -> GaussRule {
    assert!(n >= 1 && n <= MAX_POINTS);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Symmetrize to kill the last-bit asymmetry of the Newton solves.
    for i in 0..n / 2 {
        let xm = 0.5 * (nodes[i] - nodes[n - 1 - i]);
        nodes[i] = xm;
        nodes[n - 1 - i] = -xm;
        let wm = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = wm;
        weights[n - 1 - i] = wm;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Returns the cached `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss(n: usize) -> &'static GaussRule {
    static CACHE: OnceLock<Vec<OnceLock<GaussRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..=MAX_POINTS).map(|_| OnceLock::new()).collect());
    cache[n].get_or_init(|| compute_rule(n))
}

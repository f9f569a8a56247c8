//! Gauss-type quadrature rules and Legendre–Gauss–Lobatto differentiation.

use std::f64::consts::PI;

/// Nodes and weights of a quadrature rule, nodes ascending.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Affine map of a rule on `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Rule {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| half * w).collect(),
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-14 {
        // endpoint limit of n(n+1)/2 * x^(n+1)
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// `n`-point Legendre–Gauss–Lobatto rule on `[-1, 1]` (`n >= 2`), exact for
/// polynomials of degree `2n - 3`.
pub fn gauss_lobatto(n: usize) -> Rule {
    assert!(n >= 2, "gauss_lobatto needs at least two nodes");
    let m = n - 1;
    let mf = m as f64;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[m] = 1.0;
    // interior nodes: roots of P'_m, seeded with Chebyshev–Gauss–Lobatto points
    for i in 1..m {
        let mut x = -(PI * i as f64 / mf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            // (1 - x²) P'' = 2x P' - m(m+1) P
            let d2p = (2.0 * x * dp - mf * (mf + 1.0) * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre(m, x);
            2.0 / (mf * (mf + 1.0) * p * p)
        })
        .collect();
    Rule { nodes, weights }
}

/// Collocation differentiation matrix on the LGL nodes of [`gauss_lobatto`],
/// row-major `n × n`. Satisfies `W D + Dᵀ W = diag(-1, 0, …, 0, 1)`.
pub fn lobatto_derivative(n: usize) -> Vec<Vec<f64>> {
    let rule = gauss_lobatto(n);
    let m = n - 1;
    let p: Vec<f64> = rule.nodes.iter().map(|&x| legendre(m, x).0).collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = p[i] / (p[j] * (rule.nodes[i] - rule.nodes[j]));
                d[i][j] = v;
                row_sum += v;
            }
        }
        d[i][i] = -row_sum;
    }
    d
}

//! Adaptive Gauss–Legendre quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

const ORDER: usize = 15;
const MAX_DEPTH: u32 = 48;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

/// Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        Rule { nodes, weights }
    })
}

fn fixed<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let r = rule();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    r.nodes
        .iter()
        .zip(r.weights.iter())
        .map(|(&z, &w)| w * f(mid + half * z))
        .sum::<f64>()
        * half
}

fn refine<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (lo + hi);
    let left = fixed(f, lo, mid);
    let right = fixed(f, mid, hi);
    let split = left + right;
    if depth >= MAX_DEPTH || (split - whole).abs() <= tol {
        return split;
    }
    refine(f, lo, mid, left, 0.5 * tol, depth + 1) + refine(f, mid, hi, right, 0.5 * tol, depth + 1)
}

/// Integrates `f` over `[lo, hi]` to absolute tolerance `tol` by recursive
/// bisection. Nodes are interior, so integrable endpoint singularities are fine.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    if hi == lo {
        return 0.0;
    }
    let whole = fixed(&f, lo, hi);
    refine(&f, lo, hi, whole, tol, 0)
}

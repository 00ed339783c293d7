use nalgebra::{DMatrix, SymmetricEigen};

use super::NumericsError;

pub const MAX_GAUSS_NODES: usize = 256;

/// Nodes and weights of a Gauss rule: `∫ f(x) w(x) dx ≈ Σ wᵢ f(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Recurrence coefficients of an orthonormal family:
/// `√b_{k+1} p_{k+1} = (x - a_k) p_k - √b_k p_{k-1}`.
trait Recurrence {
    fn diag(&self, k: usize) -> f64;
    fn off(&self, k: usize) -> f64; // √b_k, k ≥ 1
    fn mass(&self) -> f64;
}

struct Laguerre;
struct Hermite;
struct Legendre;

impl Recurrence for Laguerre {
    fn diag(&self, k: usize) -> f64 {
        2.0 * k as f64 + 1.0
    }
    fn off(&self, k: usize) -> f64 {
        k as f64
    }
    fn mass(&self) -> f64 {
        1.0
    }
}

impl Recurrence for Hermite {
    fn diag(&self, _k: usize) -> f64 {
        0.0
    }
    fn off(&self, k: usize) -> f64 {
        (k as f64 / 2.0).sqrt()
    }
    fn mass(&self) -> f64 {
        std::f64::consts::PI.sqrt()
    }
}

impl Recurrence for Legendre {
    fn diag(&self, _k: usize) -> f64 {
        0.0
    }
    fn off(&self, k: usize) -> f64 {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    }
    fn mass(&self) -> f64 {
        2.0
    }
}

const RESCALE: f64 = 1e100;

/// Evaluates `p_n(x)`, `p_n'(x)` (up to a common positive factor) and
/// `ln Σ_{k<n} p_k(x)²` with overflow-safe rescaling.
fn evaluate<R: Recurrence>(rec: &R, n: usize, x: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0 / rec.mass().sqrt();
    let mut d_prev = 0.0;
    let mut d = 0.0;
    let mut sum_sq = 0.0;
    let mut log_scale = 0.0; // ln of the factor divided out of p, d
    for k in 0..n {
        sum_sq += p * p;
        let off_next = rec.off(k + 1);
        let off_k = if k == 0 { 0.0 } else { rec.off(k) };
        let p_next = ((x - rec.diag(k)) * p - off_k * p_prev) / off_next;
        let d_next = ((x - rec.diag(k)) * d + p - off_k * d_prev) / off_next;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
        let m = p.abs().max(p_prev.abs()).max(d.abs());
        if m > RESCALE {
            p /= m;
            p_prev /= m;
            d /= m;
            d_prev /= m;
            sum_sq /= m * m;
            log_scale += m.ln();
        }
    }
    (p, d, sum_sq.ln() + 2.0 * log_scale)
}

fn golub_welsch<R: Recurrence>(rec: &R, n: usize) -> Result<GaussRule, NumericsError> {
    if n == 0 || n > MAX_GAUSS_NODES {
        return Err(NumericsError::NodeCount {
            n,
            max: MAX_GAUSS_NODES,
        });
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = rec.diag(k);
        if k + 1 < n {
            let b = rec.off(k + 1);
            jacobi[(k, k + 1)] = b;
            jacobi[(k + 1, k)] = b;
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        // Newton polish on p_n.
        for _ in 0..8 {
            let (p, d, _) = evaluate(rec, n, *x);
            if d == 0.0 {
                break;
            }
            let step = p / d;
            *x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
        let (_, _, log_christoffel) = evaluate(rec, n, *x);
        weights.push((-log_christoffel).exp());
    }
    Ok(GaussRule { nodes, weights })
}

/// Gauss–Laguerre rule for `∫_0^∞ f(x) e^{-s x} dx`, exact for polynomials
/// of degree `2n - 1`.
pub fn gauss_laguerre(n: usize, exponent_scale: f64) -> Result<GaussRule, NumericsError> {
    if !(exponent_scale.is_finite() && exponent_scale > 0.0) {
        return Err(NumericsError::InvalidParameter(format!(
            "exponent scale must be finite and > 0, got {exponent_scale}"
        )));
    }
    let mut rule = golub_welsch(&Laguerre, n)?;
    for (x, w) in rule.nodes.iter_mut().zip(rule.weights.iter_mut()) {
        *x /= exponent_scale;
        *w /= exponent_scale;
    }
    Ok(rule)
}

/// Gauss–Hermite rule for `∫_{-∞}^{∞} f(x) e^{-x²} dx`.
pub fn gauss_hermite(n: usize) -> Result<GaussRule, NumericsError> {
    golub_welsch(&Hermite, n)
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<GaussRule, NumericsError> {
    golub_welsch(&Legendre, n)
}

//! Gauss-Jacobi quadrature on [-1, 1] for the weight (1-x)^alpha (1+x)^beta.
//!
//! Nodes come from the eigenvalues of the symmetric Jacobi matrix
//! (Golub-Welsch); weights are recovered from the Christoffel function
//! 1 / sum_k p_k(x_i)^2 with the orthonormal recurrence, which avoids
//! computing eigenvectors. Rules are cached per (n, alpha, beta).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::linalg::sym_tridiag_eigenvalues;
use crate::special::ln_gamma;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature rule needs at least 1 node, got {0}")]
    DegreeTooSmall(usize),
    #[error("Jacobi weight exponents must be > -1, got alpha={0}, beta={1}")]
    BadExponent(f64, f64),
    #[error("node computation failed: {0}")]
    Eigen(#[from] crate::linalg::LinalgError),
}

/// A Gauss-Jacobi rule: integrates f against (1-x)^alpha (1+x)^beta on [-1,1].
#[derive(Debug, Clone)]
pub struct GaussJacobi {
    pub alpha: f64,
    pub beta: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Recurrence coefficients of the orthonormal Jacobi polynomials:
/// x p_k = b_{k+1} p_{k+1} + a_k p_k + b_k p_{k-1}.
fn jacobi_recurrence(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n.saturating_sub(1)];
    let symmetric = alpha == beta;
    a[0] = if symmetric {
        0.0
    } else {
        (beta - alpha) / (alpha + beta + 2.0)
    };
    for k in 1..n {
        a[k] = if symmetric {
            0.0
        } else {
            let s = 2.0 * k as f64 + alpha + beta;
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
    }
    for k in 1..n {
        let kf = k as f64;
        let b2 = if k == 1 {
            // k = 1 simplifies exactly; the general formula is 0/0 when
            // alpha + beta = -1.
            4.0 * (1.0 + alpha) * (1.0 + beta)
                / ((2.0 + alpha + beta).powi(2) * (3.0 + alpha + beta))
        } else {
            let s = 2.0 * kf + alpha + beta;
            4.0 * kf * (kf + alpha) * (kf + beta) * (kf + alpha + beta) / (s * s * (s * s - 1.0))
        };
        b[k - 1] = b2.sqrt();
    }
    (a, b)
}

/// Total mass of the Jacobi weight: 2^(a+b+1) B(a+1, b+1).
pub fn jacobi_weight_mass(alpha: f64, beta: f64) -> f64 {
    ((alpha + beta + 1.0) * 2.0_f64.ln() + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(alpha + beta + 2.0))
    .exp()
}

impl GaussJacobi {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self, QuadError> {
        if n == 0 {
            return Err(QuadError::DegreeTooSmall(n));
        }
        if !(alpha > -1.0) || !(beta > -1.0) {
            return Err(QuadError::BadExponent(alpha, beta));
        }
        let (a, b) = jacobi_recurrence(n, alpha, beta);
        let nodes = sym_tridiag_eigenvalues(&a, &b)?;
        let mu0 = jacobi_weight_mass(alpha, beta);
        // Recurrence coefficients up to degree n are enough for the
        // Christoffel sums (p_0 .. p_{n-1}).
        let mut weights = Vec::with_capacity(n);
        for &x in &nodes {
            let mut sum;
            let p0 = 1.0 / mu0.sqrt();
            sum = p0 * p0;
            if n > 1 {
                let mut pm1 = p0;
                let mut p = (x - a[0]) * p0 / b[0];
                sum += p * p;
                for k in 1..(n - 1) {
                    let pn = ((x - a[k]) * p - b[k - 1] * pm1) / b[k];
                    pm1 = p;
                    p = pn;
                    sum += p * p;
                }
            }
            weights.push(1.0 / sum);
        }
        Ok(GaussJacobi {
            alpha,
            beta,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of f against the Jacobi weight over [-1, 1].
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<GaussJacobi>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussJacobi>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached rule lookup. Rules are immutable and shared.
pub fn jacobi_rule(n: usize, alpha: f64, beta: f64) -> Result<Arc<GaussJacobi>, QuadError> {
    let key = (n, alpha.to_bits(), beta.to_bits());
    if let Some(rule) = rule_cache().lock().unwrap().get(&key) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(GaussJacobi::new(n, alpha, beta)?);
    rule_cache().lock().unwrap().insert(key, Arc::clone(&rule));
    Ok(rule)
}

/// Cached Gauss-Legendre rule (alpha = beta = 0).
pub fn legendre_rule(n: usize) -> Result<Arc<GaussJacobi>, QuadError> {
    jacobi_rule(n, 0.0, 0.0)
}

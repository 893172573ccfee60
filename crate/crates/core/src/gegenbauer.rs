//! Fourier-Gegenbauer analysis of zonal kernels.
//!
//! Everything here works against the orthonormal Gegenbauer system for the
//! weight `(1-t^2)^(lambda-1/2)` on (-1, 1). The polynomials come from the
//! orthonormal three-term recurrence, which stays regular at `lambda = 0`
//! where the classical normalization degenerates. Coefficients of the zonal
//! power family `F_beta = (2-2t)^beta` and its log companion
//! `G_beta = (1/2)(2-2t)^beta log(2-2t)` have closed forms assembled from
//! log-gamma values; `G` additionally carries the digamma combination `tau`,
//! which is an exact rational for integer parameters and decides the
//! degenerate sphere radii `rho = exp(-tau/2)` of the rescaled kernels.
//!
//! An independent quadrature path (Gauss-Jacobi away from the right
//! endpoint, geometrically graded panels against it) cross-checks every
//! closed form and covers the cases the closed forms do not reach.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelError, KernelSpec};
use crate::quad::{jacobi_rule, legendre_rule, QuadError};
use crate::special::{digamma, ln_gamma, ln_gamma_signed};

#[derive(Debug, Error)]
pub enum GegenbauerError {
    #[error("weight parameter must satisfy lambda > -1/2, got {0}")]
    InvalidLambda(f64),
    #[error("digamma argument {arg} is not positive (beta={beta}, j={j}, lambda={lambda}); the closed form does not apply here")]
    NonpositiveDigamma {
        arg: f64,
        beta: f64,
        j: u32,
        lambda: f64,
    },
    #[error("integrand returned a non-finite value at t = {t}; take the endpoint limit in the profile (see f_profile / g_profile)")]
    NonFiniteIntegrand { t: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Index of one orthonormal Gegenbauer polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GegenbauerIndex {
    lambda: f64,
    j: u32,
}

impl GegenbauerIndex {
    pub fn new(lambda: f64, j: u32) -> Result<Self, GegenbauerError> {
        if !(lambda > -0.5) {
            return Err(GegenbauerError::InvalidLambda(lambda));
        }
        Ok(GegenbauerIndex { lambda, j })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn j(&self) -> u32 {
        self.j
    }
}

/// Orthonormal recurrence coefficient: x p_{n-1} = b_n p_n + b_{n-1} p_{n-2}
/// (the diagonal term vanishes by symmetry of the weight).
fn recurrence_b(lambda: f64, n: u32) -> f64 {
    debug_assert!(n >= 1);
    if n == 1 {
        // The general formula is 0/0 here when lambda = 0; the cancelled
        // form is exact for every lambda.
        (1.0 / (2.0 * lambda + 2.0)).sqrt()
    } else {
        let nf = n as f64;
        (nf * (nf + 2.0 * lambda - 1.0)
            / ((2.0 * nf + 2.0 * lambda - 2.0) * (2.0 * nf + 2.0 * lambda)))
            .sqrt()
    }
}

/// Mass of the ultraspherical weight: 2^(2 lambda) B(lambda+1/2, lambda+1/2).
pub fn weight_mass(lambda: f64) -> f64 {
    crate::quad::jacobi_weight_mass(lambda - 0.5, lambda - 0.5)
}

/// Value of the orthonormal Gegenbauer polynomial P_j at t.
pub fn gegenbauer_poly(idx: GegenbauerIndex, t: f64) -> f64 {
    let lambda = idx.lambda;
    let p0 = 1.0 / weight_mass(lambda).sqrt();
    if idx.j == 0 {
        return p0;
    }
    let mut pm1 = p0;
    let mut p = t * p0 / recurrence_b(lambda, 1);
    for n in 2..=idx.j {
        let b_n = recurrence_b(lambda, n);
        let b_nm1 = recurrence_b(lambda, n - 1);
        let next = (t * p - b_nm1 * pm1) / b_n;
        pm1 = p;
        p = next;
    }
    p
}

/// The Rodrigues normalization constant c_{j,lambda} of the orthonormal
/// system; the pair (0, 0) is the special case 1/sqrt(pi).
pub fn c_const(j: u32, lambda: f64) -> f64 {
    if j == 0 && lambda == 0.0 {
        return 1.0 / std::f64::consts::PI.sqrt();
    }
    let jf = j as f64;
    let ln_mag = (jf + lambda) * 2.0_f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
        + 0.5 * (jf + lambda).ln()
        + ln_gamma(jf + lambda)
        + 0.5 * ln_gamma(jf + 2.0 * lambda)
        - ln_gamma(2.0 * jf + 2.0 * lambda)
        - 0.5 * ln_gamma(jf + 1.0);
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    sign * ln_mag.exp()
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

/// The power profile `F_beta(t) = (2-2t)^beta`, with its limit 0 at t = 1.
pub fn f_profile(beta: f64, t: f64) -> f64 {
    let u = (2.0 - 2.0 * t).max(0.0);
    u.powf(beta)
}

/// The log profile `G_beta(t) = (1/2)(2-2t)^beta log(2-2t)`, with its limit
/// 0 at t = 1 (beta > 0), where the naive expression is 0 * -inf.
pub fn g_profile(beta: f64, t: f64) -> f64 {
    let u = (2.0 - 2.0 * t).max(0.0);
    if u == 0.0 {
        0.0
    } else {
        0.5 * u.powf(beta) * u.ln()
    }
}

/// Closed-form coefficient of `F_beta = (2-2t)^beta` against P_j:
///
/// `c_{j,lambda} 2^(2 beta + j + 2 lambda) Gamma(beta+1)
///  B(beta+lambda+1/2, j+lambda+1/2) / Gamma(beta-j+1)`.
///
/// The `2^(2 lambda)` factor comes from the change of variables
/// `T = (t+1)/2` in the beta-function reduction; it is forced by the
/// quadrature cross-check (compare `coeff_numeric` for lambda = 1/2).
///
/// Exactly zero when beta is a nonnegative integer and j >= beta + 1: the
/// profile is then a polynomial of degree beta.
pub fn coeff_f(beta: f64, j: u32, lambda: f64) -> f64 {
    assert!(beta > 0.0, "coeff_f requires beta > 0, got {beta}");
    let jf = j as f64;
    if is_integral(beta) && jf >= beta.round() + 0.5 {
        return 0.0;
    }
    let c = c_const(j, lambda);
    let ln_num = (jf + 2.0 * lambda) * 2.0_f64.ln()
        + ln_gamma(jf + lambda + 0.5)
        + 2.0 * beta * 2.0_f64.ln()
        + ln_gamma(beta + 1.0)
        + ln_gamma(beta + lambda + 0.5);
    let (ln_d1, s1) = ln_gamma_signed(beta - jf + 1.0)
        .expect("pole only at integer beta with j > beta, handled above");
    let (ln_d2, s2) = ln_gamma_signed(beta + jf + 2.0 * lambda + 1.0)
        .expect("argument positive for valid beta, lambda");
    c * s1 * s2 * (ln_num - ln_d1 - ln_d2).exp()
}

/// The digamma combination attached to the log family:
/// `tau = log 4 + Psi(b+1) + Psi(b+l+1/2) - Psi(b-j+1) - Psi(b+j+2l+1)`.
#[derive(Debug, Clone)]
pub struct Tau {
    pub value: f64,
    /// Exact value when beta and lambda are integers and j <= beta: the
    /// Euler-gamma and log-2 contributions cancel, leaving harmonic sums.
    pub exact: Option<BigRational>,
}

fn harmonic(n: i64) -> BigRational {
    let mut acc = BigRational::zero();
    for i in 1..=n {
        acc += BigRational::new(BigInt::from(1), BigInt::from(i));
    }
    acc
}

/// sum_{i=1}^n 1/(i - 1/2) = sum_{i=1}^n 2/(2i - 1)
fn odd_harmonic(n: i64) -> BigRational {
    let mut acc = BigRational::zero();
    for i in 1..=n {
        acc += BigRational::new(BigInt::from(2), BigInt::from(2 * i - 1));
    }
    acc
}

/// Exact tau for integer beta >= 1, integer lambda >= 0, j <= beta.
pub fn tau_exact_integer(beta: u32, j: u32, lambda: u32) -> BigRational {
    assert!(j <= beta, "exact tau needs j <= beta");
    harmonic(beta as i64) + odd_harmonic((beta + lambda) as i64)
        - harmonic((beta - j) as i64)
        - harmonic((beta + j + 2 * lambda) as i64)
}

pub fn tau(beta: f64, j: u32, lambda: f64) -> Result<Tau, GegenbauerError> {
    let jf = j as f64;
    let args = [
        beta + 1.0,
        beta + lambda + 0.5,
        beta - jf + 1.0,
        beta + jf + 2.0 * lambda + 1.0,
    ];
    for &arg in &args {
        if !(arg > 0.0) {
            return Err(GegenbauerError::NonpositiveDigamma {
                arg,
                beta,
                j,
                lambda,
            });
        }
    }
    let value =
        4.0_f64.ln() + digamma(args[0]) + digamma(args[1]) - digamma(args[2]) - digamma(args[3]);
    let exact = if is_integral(beta) && is_integral(lambda) && beta >= 1.0 && jf <= beta {
        Some(tau_exact_integer(
            beta.round() as u32,
            j,
            lambda.round() as u32,
        ))
    } else {
        None
    };
    Ok(Tau { value, exact })
}

/// Closed-form coefficient of `G_beta = (1/2)(2-2t)^beta log(2-2t)`:
/// half the beta-derivative of the F coefficient, i.e. `coeff_f * tau / 2`.
///
/// Fails where tau hits a digamma pole (integer beta with j > beta); those
/// coefficients are computed by [`coeff_numeric`] instead — no limiting
/// formula is guessed here.
pub fn coeff_g(beta: f64, j: u32, lambda: f64) -> Result<f64, GegenbauerError> {
    let t = tau(beta, j, lambda)?;
    Ok(0.5 * coeff_f(beta, j, lambda) * t.value)
}

/// Controls for the numerical coefficient integral.
#[derive(Debug, Clone)]
pub struct QuadratureOptions {
    /// Initial node count of the main Gauss-Jacobi rule.
    pub n_init: usize,
    /// Doubling cap.
    pub n_max: usize,
    /// Agreement target between successive doublings.
    pub tol: f64,
    /// The graded endpoint treatment covers [1 - endpoint_width, 1].
    pub endpoint_width: f64,
    /// Number of geometric panels toward t = 1 and nodes per panel.
    pub panels: usize,
    pub panel_nodes: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            n_init: 200,
            n_max: 3200,
            tol: 1e-10,
            endpoint_width: 1e-3,
            panels: 160,
            panel_nodes: 16,
        }
    }
}

/// Result of the numerical coefficient integral with its convergence record.
#[derive(Debug, Clone, Copy)]
pub struct QuadCoeff {
    pub value: f64,
    /// Last observed doubling difference.
    pub est_error: f64,
    pub n_used: usize,
    /// False if the doubling cap was reached before two successive results
    /// agreed to tolerance; the value is still the best available.
    pub converged: bool,
}

/// Fourier-Gegenbauer coefficient of an arbitrary zonal profile by
/// quadrature.
///
/// The weight's left endpoint factor `(1+t)^(lambda-1/2)` is handled exactly
/// by a Gauss-Jacobi rule on [-1, 1-w]; on [1-w, 1] geometrically graded
/// panels absorb the right endpoint factor together with any `log(2-2t)` or
/// fractional-power behavior of the integrand itself. The main rule doubles
/// until two successive results agree.
pub fn coeff_numeric<F: Fn(f64) -> f64>(
    psi: F,
    j: u32,
    lambda: f64,
    opts: &QuadratureOptions,
) -> Result<QuadCoeff, GegenbauerError> {
    let idx = GegenbauerIndex::new(lambda, j)?;
    let alpha = lambda - 0.5;
    let split = 1.0 - opts.endpoint_width;

    // Endpoint part: t = 1 - s over geometric panels [w 2^-(m+1), w 2^-m].
    // Each panel sees an analytic integrand whose nearest singularity sits
    // at s = 0, a fixed relative distance away, so a small fixed rule is
    // spectrally accurate; the leftover stub below the last panel is
    // O(s_min^(lambda+1/2) log s_min) and vanishes at this depth.
    let panel_rule = legendre_rule(opts.panel_nodes)?;
    let mut right = crate::bspline::KahanSum::default();
    let mut s_hi = opts.endpoint_width;
    for _ in 0..opts.panels {
        let s_lo = 0.5 * s_hi;
        let mid = 0.5 * (s_hi + s_lo);
        let half = 0.5 * (s_hi - s_lo);
        for (&u, &w) in panel_rule.nodes().iter().zip(panel_rule.weights()) {
            let s = mid + half * u;
            let t = 1.0 - s;
            let pv = psi(t);
            if !pv.is_finite() {
                return Err(GegenbauerError::NonFiniteIntegrand { t });
            }
            let v = pv * gegenbauer_poly(idx, t) * s.powf(alpha) * (2.0 - s).powf(alpha);
            right.add(w * half * v);
        }
        s_hi = s_lo;
    }
    let right = right.value();

    // Main part on [-1, split]: exact (1+t)^alpha factor via the rule, the
    // smooth remainder (including the now-regular (1-t)^alpha) folded in.
    let scale = 0.5 * (split + 1.0);
    let prefactor = scale.powf(alpha + 1.0);
    let eval_left = |n: usize| -> Result<f64, GegenbauerError> {
        let rule = jacobi_rule(n, 0.0, alpha)?;
        let mut acc = crate::bspline::KahanSum::default();
        for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
            let t = -1.0 + scale * (u + 1.0);
            let pv = psi(t);
            if !pv.is_finite() {
                return Err(GegenbauerError::NonFiniteIntegrand { t });
            }
            acc.add(w * pv * gegenbauer_poly(idx, t) * (1.0 - t).powf(alpha));
        }
        Ok(prefactor * acc.value())
    };

    let mut n = opts.n_init;
    let mut prev = eval_left(n)?;
    loop {
        let next_n = 2 * n;
        if next_n > opts.n_max {
            return Ok(QuadCoeff {
                value: prev + right,
                est_error: f64::INFINITY,
                n_used: n,
                converged: false,
            });
        }
        let cur = eval_left(next_n)?;
        let diff = (cur - prev).abs();
        if diff <= opts.tol * cur.abs().max(1.0) {
            return Ok(QuadCoeff {
                value: cur + right,
                est_error: diff,
                n_used: next_n,
                converged: true,
            });
        }
        prev = cur;
        n = next_n;
    }
}

/// How a report entry was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffMethod {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub j: u32,
    pub value: f64,
    pub method: CoeffMethod,
    pub zero: bool,
}

/// Coefficient table of the (rescaled) zonal kernel with zero flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffReport {
    pub spec: KernelSpec,
    pub lambda: f64,
    pub zero_threshold: f64,
    pub entries: Vec<CoeffEntry>,
}

impl CoeffReport {
    /// Translates of the kernel are fundamental on the sphere iff no
    /// coefficient in range is flagged zero.
    pub fn is_fundamental(&self) -> bool {
        self.entries.iter().all(|e| !e.zero)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.value.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Entries with |a_j| below threshold * max_j |a_j| are flagged zero.
    pub zero_threshold: f64,
    pub quadrature: QuadratureOptions,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            zero_threshold: 1e-10,
            quadrature: QuadratureOptions::default(),
        }
    }
}

/// Coefficient table of the rescaled zonal kernel up to degree `j_max`.
///
/// Even dimension: degrees up to `beta = k - d/2` combine the closed forms
/// of the log family and the scale term (`a_j = a_j(G) + log(rho) a_j(F)`);
/// beyond `beta` the scale term drops out (a degree-beta polynomial) and the
/// value comes from quadrature, where the log-family closed form has its
/// digamma pole. Odd dimension: the profile is the pure power family, closed
/// form throughout and independent of the scale.
pub fn fundamentality_report(
    spec: &KernelSpec,
    j_max: u32,
    opts: &ReportOptions,
) -> Result<CoeffReport, GegenbauerError> {
    let lambda = spec.lambda();
    let beta = spec.beta();
    let mut entries = Vec::with_capacity(j_max as usize + 1);
    if spec.is_even_dim() {
        let beta_int = beta.round() as u32;
        let log_rho = spec.rho().ln();
        for j in 0..=j_max {
            if j <= beta_int {
                let value = coeff_g(beta, j, lambda)? + log_rho * coeff_f(beta, j, lambda);
                entries.push(CoeffEntry {
                    j,
                    value,
                    method: CoeffMethod::ClosedForm,
                    zero: false,
                });
            } else {
                let q = coeff_numeric(
                    |t| spec.eval_psi_scaled(t).expect("quadrature node in range"),
                    j,
                    lambda,
                    &opts.quadrature,
                )?;
                if !q.converged {
                    log::warn!(
                        "coefficient quadrature did not converge for j={j} (d={}, k={})",
                        spec.d(),
                        spec.k()
                    );
                }
                entries.push(CoeffEntry {
                    j,
                    value: q.value,
                    method: CoeffMethod::Quadrature,
                    zero: false,
                });
            }
        }
    } else {
        for j in 0..=j_max {
            entries.push(CoeffEntry {
                j,
                value: coeff_f(beta, j, lambda),
                method: CoeffMethod::ClosedForm,
                zero: false,
            });
        }
    }
    let max_abs = entries.iter().fold(0.0_f64, |m, e| m.max(e.value.abs()));
    for e in entries.iter_mut() {
        e.zero = e.value.abs() < opts.zero_threshold * max_abs;
    }
    Ok(CoeffReport {
        spec: *spec,
        lambda,
        zero_threshold: opts.zero_threshold,
        entries,
    })
}

/// One degenerate radius: at `rho = exp(-tau/2)` the degree-j coefficient of
/// the rescaled kernel vanishes, so its translates are not fundamental on
/// the sphere of radius rho.
#[derive(Debug, Clone)]
pub struct DegenerateRadius {
    pub j: u32,
    pub tau: BigRational,
    pub rho: f64,
}

impl DegenerateRadius {
    /// Exact tau rendered as a fraction, e.g. "3/2".
    pub fn tau_string(&self) -> String {
        self.tau.to_string()
    }

    pub fn tau_f64(&self) -> f64 {
        self.tau.to_f64().expect("small rational fits in f64")
    }
}

/// Degenerate radii of the (d, k) family: one per degree j <= k - d/2, with
/// the exact rational tau inside the exponent. Odd dimensions are
/// homogeneous and have none.
pub fn degenerate_radii(d: u32, k: u32) -> Result<Vec<DegenerateRadius>, GegenbauerError> {
    let spec = KernelSpec::new(d, k)?;
    if !spec.is_even_dim() {
        return Ok(Vec::new());
    }
    let beta = spec.beta().round() as u32;
    let lambda = spec.lambda().round() as u32;
    let mut out = Vec::with_capacity(beta as usize + 1);
    for j in 0..=beta {
        let tau = tau_exact_integer(beta, j, lambda);
        let rho = (-tau.to_f64().expect("small rational") / 2.0).exp();
        out.push(DegenerateRadius { j, tau, rho });
    }
    Ok(out)
}

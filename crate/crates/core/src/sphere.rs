//! Least-squares fits of zonal kernel translates on the unit sphere.
//!
//! The dictionary is `x -> psi~(x . y)` with centers y on S^(d-1). Nodes are
//! equispaced angles on the circle and a Fibonacci lattice on S^2; the
//! collocation system is solved by Householder least squares with optional
//! Tikhonov damping, and the reported residual is measured on a validation
//! node set disjoint from (and 4x denser than) the fitting nodes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gegenbauer::{fundamentality_report, GegenbauerError, ReportOptions};
use crate::kernels::{KernelError, KernelSpec};
use crate::linalg::{lstsq_tikhonov, LinalgError, Matrix};

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("node generation is implemented for d = 2 and d = 3, got d = {0}")]
    UnsupportedDimension(u32),
    #[error(
        "need at least as many samples as centers, got {samples} samples for {centers} centers"
    )]
    TooFewSamples { samples: usize, centers: usize },
    #[error(
        "collocation system is numerically rank deficient; pass a positive regularization ({0})"
    )]
    IllConditioned(LinalgError),
    #[error("point is not on the unit sphere: |x| = {0}")]
    NotUnit(f64),
    #[error("kernel translates are not fundamental on the sphere: coefficient at degree {j} is flagged zero")]
    NotFundamental { j: u32 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Gegenbauer(#[from] GegenbauerError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Quasi-uniform nodes on S^(d-1): equispaced angles (d=2) or a Fibonacci
/// lattice (d=3). `offset` shifts the whole family, so distinct offsets give
/// disjoint node sets.
pub fn sphere_nodes(d: u32, n: usize, offset: f64) -> Result<Vec<Vec<f64>>, SphereError> {
    match d {
        2 => {
            let mut nodes = Vec::with_capacity(n);
            for i in 0..n {
                let theta = 2.0 * std::f64::consts::PI * (i as f64 + offset) / n as f64;
                nodes.push(vec![theta.cos(), theta.sin()]);
            }
            Ok(nodes)
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            let mut nodes = Vec::with_capacity(n);
            for i in 0..n {
                let z = 1.0 - 2.0 * (i as f64 + 0.5 + offset) / n as f64;
                let z = z.clamp(-1.0, 1.0);
                let r = (1.0 - z * z).sqrt();
                let phi = golden * (i as f64 + offset);
                let mut p = vec![r * phi.cos(), r * phi.sin(), z];
                let len = norm(&p);
                for c in p.iter_mut() {
                    *c /= len;
                }
                nodes.push(p);
            }
            Ok(nodes)
        }
        other => Err(SphereError::UnsupportedDimension(other)),
    }
}

/// A fitted combination of zonal translates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereFit {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub regularization: f64,
    /// Sup-norm residual on the validation node set.
    pub residual_sup: f64,
}

impl SphereFit {
    pub fn empty() -> Self {
        SphereFit {
            centers: Vec::new(),
            weights: Vec::new(),
            regularization: 0.0,
            residual_sup: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `sum_y alpha_y phi~(|x - y|)` at an arbitrary ambient point; agrees
    /// with [`eval_sphere_fit`] on the sphere itself.
    pub fn eval_ambient(&self, spec: &KernelSpec, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (y, &w) in self.centers.iter().zip(&self.weights) {
            let mut r2 = 0.0;
            for j in 0..x.len() {
                let t = x[j] - y[j];
                r2 += t * t;
            }
            acc += w * spec.phi_scaled_from_sq(r2);
        }
        acc
    }
}

/// Default Tikhonov damping: 1e-10 times the largest possible collocation
/// entry (the sup of |psi~| over [-1, 1]).
pub fn default_regularization(spec: &KernelSpec) -> f64 {
    let mut max_abs = 0.0_f64;
    for i in 0..=1000 {
        let t = -1.0 + 2.0 * i as f64 / 1000.0;
        max_abs = max_abs.max(spec.eval_psi_scaled(t).unwrap_or(0.0).abs());
    }
    1e-10 * max_abs.max(1.0)
}

/// Errors if any Fourier-Gegenbauer coefficient of the (rescaled) kernel up
/// to degree `j_max` is flagged zero, i.e. if zonal translates cannot be
/// dense on the sphere.
pub fn check_fundamental(spec: &KernelSpec, j_max: u32) -> Result<(), SphereError> {
    let report = fundamentality_report(spec, j_max, &ReportOptions::default())?;
    if let Some(entry) = report.entries.iter().find(|e| e.zero) {
        return Err(SphereError::NotFundamental { j: entry.j });
    }
    Ok(())
}

/// Least-squares fit of `f` on S^(d-1) by `n_centers` zonal translates,
/// collocated at `n_samples >= n_centers` nodes with Tikhonov damping
/// `regularization` (0 for plain least squares).
pub fn fit_sphere<F: Fn(&[f64]) -> f64>(
    f: F,
    spec: &KernelSpec,
    n_centers: usize,
    n_samples: usize,
    regularization: f64,
) -> Result<SphereFit, SphereError> {
    if n_samples < n_centers {
        return Err(SphereError::TooFewSamples {
            samples: n_samples,
            centers: n_centers,
        });
    }
    let d = spec.d();
    let centers = sphere_nodes(d, n_centers, 0.0)?;
    // Samples sit a quarter step off the center family: disjoint from the
    // centers even at equal counts, and without the reflection symmetry of a
    // half-step offset, which makes the square circulant system exactly
    // singular at the Nyquist mode on the circle.
    let samples = sphere_nodes(d, n_samples, 0.25)?;

    let mut a = Matrix::zeros(n_samples, n_centers);
    let mut rhs = Vec::with_capacity(n_samples);
    for (i, x) in samples.iter().enumerate() {
        for (j, y) in centers.iter().enumerate() {
            let t = dot(x, y);
            a.set(i, j, spec.eval_psi_scaled(t)?);
        }
        rhs.push(f(x));
    }
    let weights = lstsq_tikhonov(&a, &rhs, regularization).map_err(|e| match e {
        LinalgError::RankDeficient { .. } => SphereError::IllConditioned(e),
        other => SphereError::Linalg(other),
    })?;

    let fit = SphereFit {
        centers,
        weights,
        regularization,
        residual_sup: 0.0,
    };
    debug_assert!(fit.centers.iter().all(|y| (norm(y) - 1.0).abs() <= 1e-12));

    // Validation on a denser, disjoint node family.
    let validation = sphere_nodes(d, 4 * n_samples, 0.5)?;
    let mut residual_sup = 0.0_f64;
    for x in &validation {
        let v = eval_sphere_fit(&fit, spec, x)?;
        residual_sup = residual_sup.max((f(x) - v).abs());
    }
    Ok(SphereFit {
        residual_sup,
        ..fit
    })
}

/// Value of the fitted zonal combination at a unit vector x.
pub fn eval_sphere_fit(fit: &SphereFit, spec: &KernelSpec, x: &[f64]) -> Result<f64, SphereError> {
    let n = norm(x);
    if (n - 1.0).abs() > 1e-9 {
        return Err(SphereError::NotUnit(n));
    }
    let mut acc = 0.0;
    for (y, &w) in fit.centers.iter().zip(&fit.weights) {
        acc += w * spec.eval_psi_scaled(dot(x, y))?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_families_are_unit_and_sized() {
        for &(d, n) in &[(2u32, 16usize), (3, 100)] {
            let nodes = sphere_nodes(d, n, 0.0).unwrap();
            assert_eq!(nodes.len(), n);
            for y in &nodes {
                assert!((norm(y) - 1.0).abs() < 1e-12);
            }
        }
        assert!(matches!(
            sphere_nodes(4, 8, 0.0),
            Err(SphereError::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn too_few_samples_rejected() {
        let spec = KernelSpec::new(2, 2).unwrap();
        let err = fit_sphere(|_| 1.0, &spec, 16, 8, 0.0).unwrap_err();
        assert!(matches!(err, SphereError::TooFewSamples { .. }));
    }

    #[test]
    fn zero_function_gives_zero_weights() {
        let spec = KernelSpec::new(2, 2).unwrap();
        let fit = fit_sphere(|_| 0.0, &spec, 12, 48, 1e-8).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-12));
        assert!(fit.residual_sup < 1e-12);
    }

    #[test]
    fn in_span_function_is_recovered() {
        // f = psi(x . y0) for a center of the set: exact collocation with no
        // damping puts all the weight on y0.
        let spec = KernelSpec::new(2, 2).unwrap();
        let n = 16;
        let centers = sphere_nodes(2, n, 0.0).unwrap();
        let y0 = centers[3].clone();
        let f = move |x: &[f64]| spec.eval_psi_scaled(dot(x, &y0)).unwrap();
        let fit = fit_sphere(f, &spec, n, n, 0.0).unwrap();
        assert!(fit.residual_sup <= 1e-8, "residual {}", fit.residual_sup);
        for (j, w) in fit.weights.iter().enumerate() {
            let expect = if j == 3 { 1.0 } else { 0.0 };
            assert!((w - expect).abs() < 1e-6, "weight {j} = {w}");
        }
    }

    #[test]
    fn empty_and_single_center_eval() {
        let spec = KernelSpec::new(2, 2).unwrap();
        let fit = SphereFit::empty();
        assert_eq!(eval_sphere_fit(&fit, &spec, &[1.0, 0.0]).unwrap(), 0.0);
        let single = SphereFit {
            centers: vec![vec![0.0, 1.0]],
            weights: vec![1.0],
            regularization: 0.0,
            residual_sup: 0.0,
        };
        let x = [0.6, 0.8];
        let expect = spec.eval_psi_scaled(0.8).unwrap();
        assert!((eval_sphere_fit(&single, &spec, &x).unwrap() - expect).abs() < 1e-14);
        assert!(matches!(
            eval_sphere_fit(&single, &spec, &[0.5, 0.5]),
            Err(SphereError::NotUnit(_))
        ));
    }

    #[test]
    fn circle_harmonic_residual_decreases() {
        let spec = KernelSpec::new(2, 2).unwrap();
        let f = |x: &[f64]| (3.0 * x[1].atan2(x[0])).cos();
        let r16 = fit_sphere(f, &spec, 16, 64, 1e-12).unwrap().residual_sup;
        let r32 = fit_sphere(f, &spec, 32, 128, 1e-12).unwrap().residual_sup;
        let r64 = fit_sphere(f, &spec, 64, 256, 1e-12).unwrap().residual_sup;
        assert!(r32 < r16, "r16={r16} r32={r32}");
        assert!(r64 < r32, "r32={r32} r64={r64}");
        assert!(r64 < 1e-3, "r64={r64}");
    }

    #[test]
    fn nested_centers_monotone_improvement() {
        // Equispaced families are nested when the count doubles; allow 5%
        // slack on the monotonicity.
        let spec = KernelSpec::new(2, 2).unwrap();
        for f in [
            (|x: &[f64]| 1.0 + x[0] + x[1] * x[1]) as fn(&[f64]) -> f64,
            |x: &[f64]| (std::f64::consts::PI * x[1]).cos(),
        ] {
            let mut prev = f64::INFINITY;
            for n in [16usize, 32, 64] {
                let r = fit_sphere(f, &spec, n, 4 * n, 1e-12).unwrap().residual_sup;
                assert!(r <= prev * 1.05, "n={n}: {r} vs prev {prev}");
                prev = r;
            }
        }
    }

    #[test]
    fn rotational_equivariance_on_the_circle() {
        // Rotating f and the node families by one center spacing permutes
        // the weights and leaves the residual unchanged.
        let spec = KernelSpec::new(2, 2).unwrap();
        let n = 24;
        let gamma = 2.0 * std::f64::consts::PI / n as f64;
        let f = |x: &[f64]| (2.0 * x[1].atan2(x[0])).cos() + 0.3 * x[0];
        let rotated = move |x: &[f64]| {
            let (c, s) = (gamma.cos(), gamma.sin());
            // Apply the inverse rotation to the argument.
            let p = [c * x[0] + s * x[1], -s * x[0] + c * x[1]];
            f(&p)
        };
        let base = fit_sphere(f, &spec, n, 4 * n, 1e-10).unwrap();
        let rot = fit_sphere(rotated, &spec, n, 4 * n, 1e-10).unwrap();
        assert!((base.residual_sup - rot.residual_sup).abs() < 1e-10);
        for j in 0..n {
            let shifted = base.weights[j];
            let got = rot.weights[(j + 1) % n];
            assert!(
                (shifted - got).abs() < 1e-10,
                "weight {j}: {shifted} vs {got}"
            );
        }
    }

    #[test]
    fn fibonacci_fit_on_s2() {
        let spec = KernelSpec::new(3, 2).unwrap();
        let f = |x: &[f64]| x[2] * x[2] + 0.5 * x[0];
        let coarse = fit_sphere(f, &spec, 36, 144, 1e-12).unwrap().residual_sup;
        let fine = fit_sphere(f, &spec, 144, 576, 1e-12).unwrap().residual_sup;
        // The d=3 profile is the cone |x - y|, so convergence is slow in the
        // sup norm; check improvement and a coarse absolute level.
        assert!(fine < 0.8 * coarse, "coarse={coarse} fine={fine}");
        assert!(fine < 2e-2, "fine={fine}");
    }

    #[test]
    fn fundamentality_gate() {
        let good = KernelSpec::new(2, 2).unwrap();
        assert!(check_fundamental(&good, 8).is_ok());
        let bad = KernelSpec::with_rho(2, 2, (-0.5_f64).exp()).unwrap();
        assert!(matches!(
            check_fundamental(&bad, 8),
            Err(SphereError::NotFundamental { j: 0 })
        ));
    }

    #[test]
    fn ambient_eval_matches_on_sphere() {
        let spec = KernelSpec::with_rho(2, 2, 0.8).unwrap();
        let fit = fit_sphere(|x: &[f64]| x[0], &spec, 16, 48, 1e-10).unwrap();
        for &theta in &[0.3f64, 1.7, 4.4] {
            let x = [theta.cos(), theta.sin()];
            let on = eval_sphere_fit(&fit, &spec, &x).unwrap();
            let ambient = fit.eval_ambient(&spec, &x);
            assert!((on - ambient).abs() < 1e-11, "{on} vs {ambient}");
        }
    }
}

//! Two-stage approximation on the closed unit ball with every kernel
//! translate kept inside the ball.
//!
//! The pipeline follows the constructive argument: a boundary stage fits
//! zonal translates centered on the sphere, the residual is extended,
//! cut off outside a collar of width `delta`, and quasi-interpolated on the
//! interior lattice `h Z^d` restricted to depth >= delta. Requiring
//! `h < delta / k` keeps every kernel translate produced by expanding the
//! B-splines inside the ball, which is the point of the construction.
//!
//! The boundary fit collocates on the sphere *and* on a few nearby shells
//! (centers stay on the sphere). Plain boundary-only fitting leaves the
//! residual's normal derivative uncontrolled, which forces `delta` — and
//! with it the interior lattice size — to impractical extremes; the shell
//! rows tame that derivative at no cost to the boundary contract.
//!
//! Masks and cutoffs only consume a signed boundary distance, so the
//! quasi-interpolation stage works for any domain that provides one; node
//! generation for the boundary stage is what ties the assembled pipeline to
//! balls (and rescaled balls via the kernel's `rho`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bspline::{Bspline, BsplineError, CalibrationStore, KahanSum};
use crate::kernels::{KernelError, KernelSpec};
use crate::linalg::{lstsq_tikhonov, LinalgError, Matrix};
use crate::quasi::{GridFunction, QuasiError, QuasiInterpolant};
use crate::sphere::{sphere_nodes, SphereError, SphereFit};
use crate::stencil::build_stencil;

#[derive(Debug, Error)]
pub enum BallError {
    #[error("boundary stage cannot reach its residual target: best {achieved:.3e} vs target {target:.3e}; more centers or a larger tolerance are needed")]
    RefitRequired { achieved: f64, target: f64 },
    #[error("no collar width from the candidate list keeps the cut residual below {target:.3e} (best annulus sup {achieved:.3e} at delta {best_delta})")]
    NoFeasibleDelta {
        achieved: f64,
        target: f64,
        best_delta: f64,
    },
    #[error("interior stage cannot reach its budget {target:.3e} within the grid limits (best {achieved:.3e} at h = {h})")]
    BudgetUnreachable { achieved: f64, target: f64, h: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Bspline(#[from] BsplineError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error(transparent)]
    Quasi(#[from] QuasiError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A compact domain described by its signed boundary distance
/// (positive inside, negative outside).
pub trait Domain: Sync {
    fn signed_boundary_distance(&self, x: &[f64]) -> f64;
}

/// The closed unit ball.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitBall;

impl Domain for UnitBall {
    fn signed_boundary_distance(&self, x: &[f64]) -> f64 {
        1.0 - x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Continuous extension of a function on the closed unit ball to all of
/// space by radial projection: values outside are frozen along rays.
pub fn radial_extension<F: Fn(&[f64]) -> f64>(f: F) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| {
        let n = norm(x);
        if n <= 1.0 {
            f(x)
        } else {
            let proj: Vec<f64> = x.iter().map(|v| v / n).collect();
            f(&proj)
        }
    }
}

/// The collar ramp: 1 on the domain, linear down to 0 at exterior distance
/// `delta`, 0 beyond.
pub fn cutoff(domain: &impl Domain, x: &[f64], delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    let sbd = domain.signed_boundary_distance(x);
    if sbd >= 0.0 {
        1.0
    } else {
        (1.0 + sbd / delta).max(0.0)
    }
}

/// Tuning knobs of the ball construction. Everything is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallControls {
    /// Boundary-stage center counts to try, in order.
    pub center_schedule: Vec<usize>,
    /// Shell-collocation widths for the boundary stage, in order.
    pub collar_widths: Vec<f64>,
    /// Tikhonov damping relative to the largest collocation entry.
    pub regularization_rel: f64,
    /// Dyadic collar candidates stop at this width.
    pub min_delta: f64,
    /// Lower bound on annulus sample count for the collar search.
    pub annulus_min_samples: usize,
    /// Boundary nodes for the residual precondition check.
    pub boundary_check_nodes: usize,
    /// Per-axis resolution of the interior pilot grid (budget measurement).
    pub pilot_axis: usize,
    /// Per-axis resolution of the builder's own final error measurement.
    pub final_axis: usize,
    /// Interior grid halvings to attempt beyond the containment bound.
    pub max_h_halvings: u32,
    /// Refuse interior grids larger than this many sites.
    pub max_sites: usize,
}

impl Default for BallControls {
    fn default() -> Self {
        BallControls {
            center_schedule: vec![24, 48, 96, 192, 384],
            collar_widths: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            regularization_rel: 1e-10,
            min_delta: 1.0 / 256.0,
            annulus_min_samples: 20_000,
            boundary_check_nodes: 4096,
            pilot_axis: 41,
            final_axis: 101,
            max_h_halvings: 3,
            max_sites: 400_000,
        }
    }
}

/// Measured budgets and bookkeeping of one build.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallDiagnostics {
    pub eps_target: f64,
    pub m_hat: f64,
    /// Boundary-stage residual on validation nodes.
    pub sphere_residual_sup: f64,
    /// Measured sup of the cut residual over the collar.
    pub annulus_bound: f64,
    /// Measured sup of |rbar - s_h(rbar)| over the pilot grid.
    pub interior_error: f64,
    /// Builder's own sup error of the assembled approximant against f.
    pub measured_sup_error: f64,
    pub center_count: usize,
    pub max_center_norm: f64,
}

/// The assembled approximant: a plain combination of kernel translates,
/// all inside the closed ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainApproximant {
    pub spec: KernelSpec,
    /// The boundary stage in its own terms (centers, weights, residual).
    pub sphere_fit: SphereFit,
    pub h: f64,
    pub delta: f64,
    /// Interior lattice sites (multi-integers) and residual samples there.
    pub interior_sites: Vec<(Vec<i64>, f64)>,
    /// Full center list: boundary centers first, then the lattice points of
    /// the expanded B-splines, each with its kernel coefficient.
    pub expanded: Vec<(Vec<f64>, f64)>,
    pub diagnostics: BallDiagnostics,
}

impl DomainApproximant {
    pub fn center_count(&self) -> usize {
        self.expanded.len()
    }

    pub fn max_center_norm(&self) -> f64 {
        self.expanded.iter().fold(0.0, |m, (y, _)| m.max(norm(y)))
    }
}

/// `sum_y alpha_y phi~(|x - y|)` over the expanded center list.
pub fn eval_approximant(appr: &DomainApproximant, x: &[f64]) -> f64 {
    let spec = &appr.spec;
    let d = x.len();
    let mut acc = KahanSum::default();
    for (y, a) in &appr.expanded {
        let mut r2 = 0.0;
        for j in 0..d {
            let t = x[j] - y[j];
            r2 += t * t;
        }
        acc.add(a * spec.phi_scaled_from_sq(r2));
    }
    acc.value()
}

/// Interior part evaluated in B-spline form (literal restricted
/// quasi-interpolant over the stored sites); with the boundary stage added
/// this equals [`eval_approximant`] up to rounding — the expansion identity.
pub fn eval_interior_bspline_form(appr: &DomainApproximant, bspline: &Bspline, x: &[f64]) -> f64 {
    let h = appr.h;
    let d = x.len();
    let mut acc = KahanSum::default();
    let mut pt = vec![0.0; d];
    for (z, v) in &appr.interior_sites {
        for j in 0..d {
            pt[j] = x[j] / h - z[j] as f64;
        }
        acc.add(v * bspline.eval(&pt));
    }
    acc.value()
}

/// Points of the annulus `|1 - |x|| <= delta`, dense enough for the sup
/// surrogate: radial levels times sphere node families.
fn annulus_points(d: u32, delta: f64, min_samples: usize) -> Result<Vec<Vec<f64>>, SphereError> {
    let n_r = 17;
    let per_shell = (min_samples / n_r + 1).max(512);
    let mut pts = Vec::with_capacity(n_r * per_shell);
    for i in 0..n_r {
        let radius = 1.0 - delta + 2.0 * delta * i as f64 / (n_r - 1) as f64;
        let nodes = sphere_nodes(d, per_shell, 0.37 * i as f64)?;
        for node in nodes {
            pts.push(node.iter().map(|v| v * radius).collect());
        }
    }
    Ok(pts)
}

/// Largest dyadic collar width such that the cut residual stays below
/// `eps / (2 M_hat)` on the annulus; requires the boundary residual itself
/// to be below `eps / (4 M_hat)` first.
pub fn find_delta<F: Fn(&[f64]) -> f64 + Sync>(
    r: F,
    d: u32,
    eps: f64,
    m_hat: f64,
    controls: &BallControls,
) -> Result<f64, BallError> {
    if !(eps > 0.0) {
        return Err(BallError::InvalidTolerance(eps));
    }
    let boundary_target = eps / (4.0 * m_hat);
    let annulus_target = eps / (2.0 * m_hat);

    let boundary = sphere_nodes(d, controls.boundary_check_nodes, 0.11)?;
    let boundary_resid = boundary
        .par_iter()
        .map(|x| r(x).abs())
        .reduce(|| 0.0, f64::max);
    if boundary_resid > boundary_target {
        return Err(BallError::RefitRequired {
            achieved: boundary_resid,
            target: boundary_target,
        });
    }

    let domain = UnitBall;
    let mut best = (f64::INFINITY, 0.0);
    let mut delta = 0.5;
    while delta >= controls.min_delta * (1.0 - 1e-12) {
        let pts = annulus_points(d, delta, controls.annulus_min_samples)?;
        let sup = pts
            .par_iter()
            .map(|x| (cutoff(&domain, x, delta) * r(x)).abs())
            .reduce(|| 0.0, f64::max);
        if sup <= annulus_target {
            return Ok(delta);
        }
        if sup < best.0 {
            best = (sup, delta);
        }
        delta *= 0.5;
    }
    Err(BallError::NoFeasibleDelta {
        achieved: best.0,
        target: annulus_target,
        best_delta: best.1,
    })
}

/// Boundary stage: least squares over sphere nodes plus shell rows at
/// `1 +- collar_width {1/2, 1}`; centers stay on the sphere. Returns the fit
/// with its boundary validation residual.
fn collar_fit<F: Fn(&[f64]) -> f64>(
    f_ext: &F,
    spec: &KernelSpec,
    n_centers: usize,
    collar_width: f64,
    regularization_rel: f64,
) -> Result<SphereFit, BallError> {
    let d = spec.d();
    let centers = sphere_nodes(d, n_centers, 0.0)?;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for x in sphere_nodes(d, 4 * n_centers, 0.25)? {
        rows.push((x, 1.0));
    }
    let shells = [
        (1.0 - collar_width, 0.8),
        (1.0 - 0.5 * collar_width, 0.8),
        (1.0 + 0.5 * collar_width, 0.5),
        (1.0 + collar_width, 0.5),
    ];
    for (s, (radius, weight)) in shells.iter().enumerate() {
        for node in sphere_nodes(d, 2 * n_centers, 0.1 + 0.2 * s as f64)? {
            rows.push((node.iter().map(|v| v * radius).collect(), *weight));
        }
    }

    let mut a = Matrix::zeros(rows.len(), n_centers);
    let mut b = Vec::with_capacity(rows.len());
    for (i, (x, w)) in rows.iter().enumerate() {
        for (j, y) in centers.iter().enumerate() {
            let mut r2 = 0.0;
            for c in 0..d as usize {
                let t = x[c] - y[c];
                r2 += t * t;
            }
            a.set(i, j, w * spec.phi_scaled_from_sq(r2));
        }
        b.push(w * f_ext(x));
    }
    let lambda = regularization_rel * a.max_abs();
    let weights = lstsq_tikhonov(&a, &b, lambda)?;

    let fit = SphereFit {
        centers,
        weights,
        regularization: lambda,
        residual_sup: 0.0,
    };
    let validation = sphere_nodes(d, 8 * n_centers, 0.5)?;
    let mut residual_sup = 0.0_f64;
    for x in &validation {
        residual_sup = residual_sup.max((f_ext(x) - fit.eval_ambient(spec, x)).abs());
    }
    Ok(SphereFit {
        residual_sup,
        ..fit
    })
}

fn ball_grid(d: u32, n_axis: usize, radius: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..n_axis)
        .map(|i| -1.0 + 2.0 * i as f64 / (n_axis - 1) as f64)
        .collect();
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..d {
        let mut next = Vec::with_capacity(pts.len() * n_axis);
        for p in &pts {
            for &a in &axis {
                let mut q = p.clone();
                q.push(a);
                next.push(q);
            }
        }
        pts = next;
    }
    pts.retain(|p| norm(p) <= radius);
    pts
}

/// Assemble the two-stage approximant of `f` on the closed unit ball to
/// sup-error target `eps`.
pub fn build_ball_approximant<F: Fn(&[f64]) -> f64 + Sync>(
    f: F,
    spec: &KernelSpec,
    eps: f64,
    store: &CalibrationStore,
    controls: &BallControls,
) -> Result<DomainApproximant, BallError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(BallError::InvalidTolerance(eps));
    }
    let d = spec.d();
    let k = spec.k();
    let bspline = store.bspline(d, k)?;
    let m_hat = bspline.calibration().m_hat;
    let boundary_target = eps / (4.0 * m_hat);
    let f_ext = radial_extension(&f);

    // Boundary stage: grow the center count, shrink the shell width, accept
    // the first fit whose residual meets the budget and admits a collar.
    let mut accepted: Option<(SphereFit, f64)> = None;
    let mut best_boundary = f64::INFINITY;
    'search: for &n in &controls.center_schedule {
        for &w in &controls.collar_widths {
            let fit = collar_fit(&f_ext, spec, n, w, controls.regularization_rel)?;
            best_boundary = best_boundary.min(fit.residual_sup);
            if fit.residual_sup > boundary_target {
                continue;
            }
            let r = |x: &[f64]| f_ext(x) - fit.eval_ambient(spec, x);
            match find_delta(r, d, eps, m_hat, controls) {
                Ok(delta) => {
                    // Containment forces h < delta/k; refuse lattices that
                    // would blow past the site budget.
                    let h = 0.98 * delta / k as f64;
                    let est_sites = (2.0 / h).powi(d as i32);
                    if est_sites > controls.max_sites as f64 {
                        continue;
                    }
                    accepted = Some((fit, delta));
                    break 'search;
                }
                Err(BallError::RefitRequired { .. }) | Err(BallError::NoFeasibleDelta { .. }) => {
                    continue
                }
                Err(other) => return Err(other),
            }
        }
    }
    let Some((fit, delta)) = accepted else {
        return Err(BallError::RefitRequired {
            achieved: best_boundary,
            target: boundary_target,
        });
    };

    let r = |x: &[f64]| f_ext(x) - fit.eval_ambient(spec, x);
    let domain = UnitBall;

    // Measured collar bound (enters the composition diagnostics).
    let annulus_bound = {
        let pts = annulus_points(d, delta, controls.annulus_min_samples)?;
        pts.par_iter()
            .map(|x| (cutoff(&domain, x, delta) * r(x)).abs())
            .reduce(|| 0.0, f64::max)
    };

    // Interior stage: start just under the containment bound and halve h
    // until the pilot error meets eps/2.
    let pilot: Vec<Vec<f64>> = ball_grid(d, controls.pilot_axis, 1.0);
    let interior_target = 0.5 * eps;
    let mut h = 0.98 * delta / k as f64;
    let mut halvings = 0;
    let (interior_error, h_final) = loop {
        let reach = ((1.0 + delta) / h).ceil() as i64;
        let lo = vec![-reach; d as usize];
        let hi = vec![reach; d as usize];
        // Cut residual over the collar-extended box; the restricted operator
        // uses the mask.
        let gf_full = GridFunction::sample(h, &lo, &hi, |x| {
            let c = cutoff(&domain, x, delta);
            if c == 0.0 {
                0.0
            } else {
                c * r(x)
            }
        })?
        .with_domain_mask(|x| domain.signed_boundary_distance(x) >= -delta);
        let op = QuasiInterpolant::new(&gf_full, &bspline);
        let err = pilot
            .par_iter()
            .map(|x| {
                let c = cutoff(&domain, x, delta);
                (c * r(x) - op.eval_domain(x)).abs()
            })
            .reduce(|| 0.0, f64::max);
        if err <= interior_target {
            break (err, h);
        }
        let next_h = 0.5 * h;
        let next_sites = (2.0 / next_h).powi(d as i32);
        if halvings >= controls.max_h_halvings || next_sites > controls.max_sites as f64 {
            return Err(BallError::BudgetUnreachable {
                achieved: err,
                target: interior_target,
                h,
            });
        }
        h = next_h;
        halvings += 1;
    };
    let h = h_final;

    // Expansion: each B((x - hz)/h) becomes h^(d-2k)/kappa times
    // stencil-weighted kernel translates at the neighboring lattice points.
    let kappa = bspline.calibration().kappa;
    let stencil = build_stencil(d as usize, k);
    let scale = h.powi(d as i32 - 2 * k as i32) / kappa;
    let reach = ((1.0 - delta) / h).ceil() as i64 + k as i64 + 1;
    let dims = (2 * reach + 1) as usize;
    let total = dims.pow(d);
    let mut coeffs = vec![0.0; total];
    let mut interior_sites: Vec<(Vec<i64>, f64)> = Vec::new();
    {
        let lo = vec![-reach; d as usize];
        let hi = vec![reach; d as usize];
        let mut z = lo.clone();
        let mut pos = vec![0.0; d as usize];
        loop {
            for j in 0..d as usize {
                pos[j] = h * z[j] as f64;
            }
            // Sites at depth >= delta; the cutoff is 1 there, so the sample
            // is the raw residual.
            if domain.signed_boundary_distance(&pos) >= delta {
                let v = r(&pos);
                if v != 0.0 {
                    interior_sites.push((z.clone(), v));
                    for (w, &c) in stencil.iter() {
                        let mut idx = 0usize;
                        for j in 0..d as usize {
                            let u = z[j] + w[j] as i64 + reach;
                            idx = idx * dims + u as usize;
                        }
                        coeffs[idx] += scale * c as f64 * v;
                    }
                }
            }
            let mut done = true;
            for j in (0..d as usize).rev() {
                z[j] += 1;
                if z[j] <= hi[j] {
                    done = false;
                    break;
                }
                z[j] = lo[j];
            }
            if done {
                break;
            }
        }
    }

    let mut expanded: Vec<(Vec<f64>, f64)> = fit
        .centers
        .iter()
        .zip(&fit.weights)
        .map(|(y, &wgt)| (y.clone(), wgt))
        .collect();
    for (flat, &c) in coeffs.iter().enumerate() {
        if c != 0.0 {
            let mut idx = flat;
            let mut u = vec![0i64; d as usize];
            for j in (0..d as usize).rev() {
                u[j] = (idx % dims) as i64 - reach;
                idx /= dims;
            }
            let point: Vec<f64> = u.iter().map(|&v| h * v as f64).collect();
            expanded.push((point, c));
        }
    }

    let max_center_norm = expanded.iter().fold(0.0_f64, |m, (y, _)| m.max(norm(y)));
    assert!(
        max_center_norm <= 1.0 + 1e-12,
        "center containment violated: {max_center_norm} (h = {h}, delta = {delta})"
    );

    let mut appr = DomainApproximant {
        spec: *spec,
        sphere_fit: fit,
        h,
        delta,
        interior_sites,
        expanded,
        diagnostics: BallDiagnostics {
            eps_target: eps,
            m_hat,
            sphere_residual_sup: 0.0,
            annulus_bound,
            interior_error,
            measured_sup_error: 0.0,
            center_count: 0,
            max_center_norm,
        },
    };
    appr.diagnostics.sphere_residual_sup = appr.sphere_fit.residual_sup;
    appr.diagnostics.center_count = appr.expanded.len();

    // Builder's own error measurement on a moderate ball grid.
    let grid = ball_grid(d, controls.final_axis, 1.0);
    let measured = grid
        .par_iter()
        .map(|x| (f(x) - eval_approximant(&appr, x)).abs())
        .reduce(|| 0.0, f64::max);
    appr.diagnostics.measured_sup_error = measured;
    Ok(appr)
}

/// Sup error of the assembled approximant against `f` over the tensor grid
/// of `n_axis` points per axis intersected with the ball.
pub fn sup_error_on_ball_grid<F: Fn(&[f64]) -> f64 + Sync>(
    appr: &DomainApproximant,
    f: F,
    n_axis: usize,
) -> f64 {
    let grid = ball_grid(appr.spec.d(), n_axis, 1.0);
    grid.par_iter()
        .map(|x| (f(x) - eval_approximant(appr, x)).abs())
        .reduce(|| 0.0, f64::max)
}

//! The polyharmonic kernel family and its zonal restrictions.
//!
//! `phi(r)` is `r^(2k-d)` for odd dimension and `r^(2k-d) log r` for even
//! dimension, continuous at the origin because `2k > d`. On the unit sphere
//! `phi(|x-y|)` depends only on `t = x.y`, giving the zonal profile `psi`.
//! The `*_scaled` variants carry the extra `log rho` term produced by
//! rescaling an even-dimension kernel to a ball of radius `rho`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel requires 2k > d for continuity at the origin, got d={d}, k={k}")]
    InvalidOrder { d: u32, k: u32 },
    #[error("dimension and order must be positive, got d={d}, k={k}")]
    ZeroParameter { d: u32, k: u32 },
    #[error("scale radius must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("zonal argument must lie in [-1, 1], got {0}")]
    ZonalArgumentOutOfRange(f64),
}

/// Tolerance for accepting zonal arguments just outside [-1, 1]; dot products
/// of unit vectors routinely land within a few ulps past the endpoints.
const ZONAL_SLACK: f64 = 1e-9;

/// One member of the kernel family: dimension `d`, order `k`, scale `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    d: u32,
    k: u32,
    rho: f64,
}

impl KernelSpec {
    /// Kernel with the default scale `rho = 1`.
    pub fn new(d: u32, k: u32) -> Result<Self, KernelError> {
        Self::with_rho(d, k, 1.0)
    }

    pub fn with_rho(d: u32, k: u32, rho: f64) -> Result<Self, KernelError> {
        if d == 0 || k == 0 {
            return Err(KernelError::ZeroParameter { d, k });
        }
        if 2 * k <= d {
            return Err(KernelError::InvalidOrder { d, k });
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(KernelError::InvalidScale(rho));
        }
        Ok(KernelSpec { d, k, rho })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn is_even_dim(&self) -> bool {
        self.d % 2 == 0
    }

    /// Homogeneity exponent `2k - d` (always positive).
    pub fn exponent(&self) -> i32 {
        2 * self.k as i32 - self.d as i32
    }

    /// Gegenbauer weight parameter `lambda = (d-2)/2` for the sphere S^(d-1).
    pub fn lambda(&self) -> f64 {
        (self.d as f64 - 2.0) / 2.0
    }

    /// Zonal power `beta = k - d/2`; integer for even d, half-integer for odd.
    pub fn beta(&self) -> f64 {
        self.k as f64 - self.d as f64 / 2.0
    }

    /// Kernel value at radius `r >= 0`. The origin takes its limit value 0.
    pub fn eval_phi(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0, "radius must be nonnegative, got {r}");
        self.phi_from_sq(r * r)
    }

    /// Kernel value from the squared radius; avoids the square root for even
    /// dimensions where the exponent is even.
    #[inline]
    pub fn phi_from_sq(&self, r2: f64) -> f64 {
        let e = self.exponent();
        if self.is_even_dim() {
            if r2 == 0.0 {
                return 0.0;
            }
            // r^e log r = (r^2)^(e/2) * log(r^2) / 2
            r2.powi(e / 2) * 0.5 * r2.ln()
        } else {
            r2.sqrt().powi(e)
        }
    }

    /// The rescaled kernel `phi~ = phi + (log rho) r^(2k-d)` (even d).
    /// For odd d the family is homogeneous and `phi~ = phi`.
    pub fn eval_phi_scaled(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0, "radius must be nonnegative, got {r}");
        self.phi_scaled_from_sq(r * r)
    }

    #[inline]
    pub fn phi_scaled_from_sq(&self, r2: f64) -> f64 {
        let base = self.phi_from_sq(r2);
        if self.is_even_dim() && self.rho != 1.0 {
            base + self.rho.ln() * r2.powi(self.exponent() / 2)
        } else {
            base
        }
    }

    fn check_zonal(&self, t: f64) -> Result<f64, KernelError> {
        if !(t >= -1.0 - ZONAL_SLACK && t <= 1.0 + ZONAL_SLACK) {
            return Err(KernelError::ZonalArgumentOutOfRange(t));
        }
        Ok(t.clamp(-1.0, 1.0))
    }

    /// Zonal profile on the unit sphere: `phi(|x-y|)` with `t = x.y`.
    pub fn eval_psi(&self, t: f64) -> Result<f64, KernelError> {
        let t = self.check_zonal(t)?;
        let u = 2.0 - 2.0 * t;
        let e = self.exponent();
        if self.is_even_dim() {
            if u == 0.0 {
                return Ok(0.0);
            }
            Ok(0.5 * u.powi(e / 2) * u.ln())
        } else {
            Ok(u.sqrt().powi(e))
        }
    }

    /// Zonal profile of the rescaled kernel:
    /// `psi~ = psi + (log rho)(2-2t)^(k-d/2)` for even d, `psi` for odd d.
    pub fn eval_psi_scaled(&self, t: f64) -> Result<f64, KernelError> {
        let base = self.eval_psi(t)?;
        if self.is_even_dim() && self.rho != 1.0 {
            let t = self.check_zonal(t)?;
            let u = 2.0 - 2.0 * t;
            Ok(base + self.rho.ln() * u.powi(self.exponent() / 2))
        } else {
            Ok(base)
        }
    }
}

//! Exact coefficients of the k-fold discrete Laplacian on the unit grid.
//!
//! The one-step operator carries `2d` at the origin and `-1` at the 2d axis
//! neighbors; composing it k times by discrete convolution gives an integer
//! sequence supported in the l1-ball of radius k whose moments vanish for
//! every monomial of total degree <= 2k-1. Coefficients and moments are kept
//! in exact integer arithmetic: the moment annihilation is what lets the
//! B-spline dilation argument and the center-containment bound go through,
//! and rounding would silently blur it.

use std::collections::BTreeMap;

/// Signed integer coefficient sequence on Z^d.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stencil {
    d: usize,
    k: u32,
    coeffs: BTreeMap<Vec<i32>, i64>,
}

impl Stencil {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Iterate over (offset, coefficient) pairs in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i32>, &i64)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, z: &[i32]) -> i64 {
        self.coeffs.get(z).copied().unwrap_or(0)
    }

    /// Largest l1 norm present in the support.
    pub fn support_radius_l1(&self) -> u32 {
        self.coeffs
            .keys()
            .map(|z| z.iter().map(|c| c.unsigned_abs()).sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Exact moment sum_z c_z z^alpha.
    pub fn moment(&self, alpha: &[u32]) -> i128 {
        assert_eq!(alpha.len(), self.d, "multi-index dimension mismatch");
        let mut total: i128 = 0;
        for (z, &c) in &self.coeffs {
            let mut term: i128 = c as i128;
            for (zi, &ai) in z.iter().zip(alpha) {
                term *= (*zi as i128).pow(ai);
            }
            total += term;
        }
        total
    }

    /// Discrete convolution of two coefficient sequences of equal dimension.
    pub fn convolve(&self, other: &Stencil) -> Stencil {
        assert_eq!(self.d, other.d, "convolution dimension mismatch");
        let mut coeffs: BTreeMap<Vec<i32>, i64> = BTreeMap::new();
        for (za, &ca) in &self.coeffs {
            for (zb, &cb) in &other.coeffs {
                let z: Vec<i32> = za.iter().zip(zb).map(|(a, b)| a + b).collect();
                let entry = coeffs.entry(z).or_insert(0);
                *entry = entry
                    .checked_add(ca.checked_mul(cb).expect("stencil coefficient overflow"))
                    .expect("stencil coefficient overflow");
            }
        }
        coeffs.retain(|_, c| *c != 0);
        Stencil {
            d: self.d,
            k: self.k + other.k,
            coeffs,
        }
    }

    /// JSON-friendly map with comma-joined offsets as keys, e.g. `"-1,0": 2`.
    pub fn to_key_map(&self) -> BTreeMap<String, i64> {
        self.coeffs
            .iter()
            .map(|(z, c)| {
                let key = z
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                (key, *c)
            })
            .collect()
    }
}

/// Coefficients of the one-step discrete Laplacian at unit spacing:
/// `2d` at the origin, `-1` at each +-e_j.
fn one_step(d: usize) -> Stencil {
    let mut coeffs = BTreeMap::new();
    coeffs.insert(vec![0; d], 2 * d as i64);
    for j in 0..d {
        for sign in [-1, 1] {
            let mut z = vec![0; d];
            z[j] = sign;
            coeffs.insert(z, -1);
        }
    }
    Stencil { d, k: 1, coeffs }
}

/// Coefficient sequence of the k-fold discrete Laplacian on Z^d.
pub fn build_stencil(d: usize, k: u32) -> Stencil {
    assert!(d >= 1 && k >= 1, "stencil requires d >= 1 and k >= 1");
    let base = one_step(d);
    let mut result = base.clone();
    for _ in 1..k {
        result = result.convolve(&base);
    }
    result
}

/// All multi-indices alpha in d variables with |alpha| <= cap.
pub fn multi_indices_up_to(d: usize, cap: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; d];
    fn rec(pos: usize, remaining: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for v in 0..=remaining {
            current[pos] = v;
            rec(pos + 1, remaining - v, current, out);
        }
        current[pos] = 0;
    }
    rec(0, cap, &mut current, &mut out);
    out
}

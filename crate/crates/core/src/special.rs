//! Log-gamma and digamma evaluation in double precision.
//!
//! Gamma ratios in this crate are always assembled from `ln_gamma` to avoid
//! overflow at moderate arguments; `ln_gamma_signed` additionally tracks the
//! sign through the reflection formula so ratios like `1/Γ(β-j+1)` stay
//! meaningful for negative non-integer arguments.

use std::f64::consts::PI;

/// Lanczos coefficients for g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Natural log of the gamma function for `x > 0`.
///
/// Accuracy is about 1e-14 relative over the ranges used here. Panics in
/// debug builds on a nonpositive argument; use [`ln_gamma_signed`] when the
/// argument may be negative.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx); safe here since 0 < x < 1/2.
        return PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let base = z + LANCZOS_G + 0.5;
    LN_SQRT_TWO_PI + (z + 0.5) * base.ln() - base + sum.ln()
}

/// `(ln|Γ(x)|, sign Γ(x))` for any non-pole argument.
///
/// Returns `None` at the poles (x = 0, -1, -2, ...).
pub fn ln_gamma_signed(x: f64) -> Option<(f64, f64)> {
    if x > 0.0 {
        return Some((ln_gamma(x), 1.0));
    }
    if x == x.floor() {
        return None;
    }
    // Γ(x) = π / (sin(πx) Γ(1-x)) for x < 0 non-integer.
    let s = (PI * x).sin();
    let value = PI.ln() - s.abs().ln() - ln_gamma(1.0 - x);
    Some((value, s.signum()))
}

/// Γ(x) for `x > 0`, via the log form.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Asymptotic tail coefficients: Bernoulli numbers B_2n / 2n.
const DIGAMMA_TAIL: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// Digamma function Ψ(x) = Γ'(x)/Γ(x) for `x > 0`.
///
/// Uses the ascending recurrence Ψ(x) = Ψ(x+1) - 1/x up to x >= 10, then the
/// standard asymptotic series. Accuracy ~1e-14.
pub fn digamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "digamma requires a positive argument, got {x}");
    let mut result = 0.0;
    let mut z = x;
    while z < 10.0 {
        result -= 1.0 / z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    result += z.ln() - 0.5 * inv;
    // Horner over inv2.
    let mut tail = 0.0;
    for c in DIGAMMA_TAIL.iter().rev() {
        tail = tail * inv2 + c;
    }
    result - tail * inv2
}

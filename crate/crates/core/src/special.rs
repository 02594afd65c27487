//! Error-function pieces in the convention erfc(z) = ∫_z^∞ e^{−t²} dt.

use std::f64::consts::PI;

/// √π / 2.
pub const HALF_SQRT_PI: f64 = 0.886_226_925_452_758;

/// ∫_z^∞ e^{−t²} dt (no 2/√π prefactor).
pub fn erfc_unnorm(z: f64) -> f64 {
    HALF_SQRT_PI * libm::erfc(z)
}

/// ∫₀^z e^{−t²} dt.
pub fn erf_unnorm(z: f64) -> f64 {
    HALF_SQRT_PI * libm::erf(z)
}

/// Terms of the backward ratio recurrence; ample for u ≥ 2.
const TAIL_TERMS: usize = 80;

/// J(u) = ∫_u^∞ erfc_unnorm(t) dt = e^{−u²}/2 − u·erfc_unnorm(u).
///
/// For u ≥ 2 the closed form cancels badly, so the ratios of repeated
/// erfc integrals are obtained from their downward recurrence instead.
pub fn erfc_unnorm_tail(u: f64) -> f64 {
    if u < 2.0 {
        return 0.5 * (-u * u).exp() - u * erfc_unnorm(u);
    }
    let (r0, r1) = erfc_ratios(u);
    (-u * u).exp() * r0 * r1
}

/// (r₀, r₁) with erfc_unnorm(u) = e^{−u²} r₀ and J(u) = e^{−u²} r₀ r₁.
fn erfc_ratios(u: f64) -> (f64, f64) {
    let mut r = 0.0;
    let mut r1 = 0.0;
    for n in (1..=TAIL_TERMS).rev() {
        if n == 1 {
            r1 = r;
        }
        r = 1.0 / (2.0 * u + 2.0 * n as f64 * r);
    }
    (r, r1)
}

/// Normal density with standard deviation `eta`.
pub fn normal_pdf(eta: f64, x: f64) -> f64 {
    let s = x / eta;
    (-0.5 * s * s).exp() / (eta * (2.0 * PI).sqrt())
}

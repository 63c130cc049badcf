//! The smooth radial cutoff shared by the Littlewood-Paley profile `φ` and
//! the kernel cutoff `χ`.
//!
//! `bump(r) = 1` for `r ≤ 1/2`, `0` for `r ≥ 1`, and in between a C^∞
//! normalized smoothstep of `ρ = 2r − 1` built from `g(t) = exp(−1/t)`:
//!
//! ```text
//! bump(r) = g(1 − ρ) / (g(1 − ρ) + g(ρ))
//! ```

fn flat_exp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C^∞ monotone step from 0 (at `t ≤ 0`) to 1 (at `t ≥ 1`).
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = flat_exp(t);
        a / (a + flat_exp(1.0 - t))
    }
}

/// Radial bump profile evaluated at radius `r`.
pub fn bump(r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        smooth_step(2.0 - 2.0 * r)
    }
}

//! Phase wrapping helpers.
//!
//! Two principal intervals are used throughout: `(-π, π]` for differences and
//! absolute line-of-sight phases, `(0, 2π]` for phase differences `Δ`.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else if r == TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(0, 2π]`; multiples of 2π map to 2π.
pub fn wrap_two_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r == 0.0 {
        TAU
    } else {
        r
    }
}

/// Smallest absolute distance between two angles modulo 2π.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

/// Index of the largest entry; the smallest index wins ties.
///
/// Panics on an empty slice.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

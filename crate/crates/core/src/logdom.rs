//! Log-domain scalars for constants that overflow `f64`.
//!
//! Quantities like `D_B = e^{2R_3 π}(1 + …)` exceed `e^{150}` already in one
//! dimension, and certificates for κ ≈ 50 reach `e^{7000}`. All such constants
//! are carried as natural logarithms and rendered in the linear domain only
//! when representable.

use serde::{Deserialize, Serialize};

/// A non-negative scalar stored as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogVal {
    /// ln of the value; `-inf` encodes zero.
    pub ln: f64,
}

impl LogVal {
    pub const ZERO: LogVal = LogVal { ln: f64::NEG_INFINITY };
    pub const ONE: LogVal = LogVal { ln: 0.0 };

    pub fn from_ln(ln: f64) -> Self {
        LogVal { ln }
    }

    /// From a linear-domain value; negative inputs are rejected by debug
    /// assertion (all constants handled here are non-negative).
    pub fn from_value(v: f64) -> Self {
        debug_assert!(v >= 0.0, "LogVal::from_value on negative {v}");
        LogVal { ln: v.ln() }
    }

    /// Linear-domain rendering; `+inf` when the value exceeds f64 range.
    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    /// Whether `value()` is finite (ln below ~709.78).
    pub fn representable(self) -> bool {
        self.ln.exp().is_finite()
    }

    pub fn mul(self, rhs: LogVal) -> LogVal {
        LogVal { ln: self.ln + rhs.ln }
    }

    pub fn div(self, rhs: LogVal) -> LogVal {
        LogVal { ln: self.ln - rhs.ln }
    }

    pub fn powf(self, p: f64) -> LogVal {
        LogVal { ln: self.ln * p }
    }

    /// Stable log-domain addition: ln(e^a + e^b).
    pub fn add(self, rhs: LogVal) -> LogVal {
        LogVal { ln: log_add_exp(self.ln, rhs.ln) }
    }

    pub fn max(self, rhs: LogVal) -> LogVal {
        LogVal { ln: self.ln.max(rhs.ln) }
    }
}

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln(Σ e^{x_i}) over a slice, skipping `-inf` entries; `-inf` for an all-zero
/// (or empty) sum. Fixed left-to-right accumulation for reproducibility.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for &x in xs {
        if x != f64::NEG_INFINITY {
            acc += (x - hi).exp();
        }
    }
    hi + acc.ln()
}

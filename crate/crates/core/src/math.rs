//! Scalar helpers shared by the numeric modules.
//!
//! `core` has no floating point transcendental functions, so everything goes
//! through `libm`.

use alloc::vec::Vec;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(exp(-z))
    } else {
        libm::log1p(exp(z))
    }
}

/// Binary cross-entropy of probability `p` against label `y`, clamped away
/// from log(0).
#[inline]
pub fn bce(p: f64, y: f64) -> f64 {
    const EPS: f64 = 1e-12;
    let p = p.clamp(EPS, 1.0 - EPS);
    -(y * ln(p) + (1.0 - y) * ln(1.0 - p))
}

/// Order-independent sum: the terms are sorted before a compensated
/// (Neumaier) accumulation, so any permutation of `terms` gives the same bits.
pub fn invariant_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &t in terms.iter() {
        let s = sum + t;
        if libm::fabs(sum) >= libm::fabs(t) {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Mean computed with [`invariant_sum`].
pub fn invariant_mean(values: &[f64]) -> f64 {
    let mut buf: Vec<f64> = values.to_vec();
    invariant_sum(&mut buf) / values.len() as f64
}

/// Plain arithmetic mean.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (1/(n-1)); zero for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

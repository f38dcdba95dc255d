//! Walsh-Hadamard transform over the Boolean cube.

use crate::error::{Error, Result};
use crate::numeric::parity_sign;
use crate::space::{BaseDistribution, BoundedFn};

/// In-place unnormalized butterfly: `v[a] <- sum_x v[x] chi_a(x)`.
pub fn wht_in_place(v: &mut [f64]) {
    let n = v.len();
    assert!(n.is_power_of_two(), "length must be a power of two");
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*a + *b, *a - *b);
                *a = s;
                *b = d;
            }
        }
        h *= 2;
    }
}

/// Fourier coefficients `hat f(a) = E_U[f chi_a]`.
pub fn coefficients(f: &BoundedFn) -> Vec<f64> {
    let mut v = f.values().into_owned();
    wht_in_place(&mut v);
    let scale = 1.0 / v.len() as f64;
    v.iter_mut().for_each(|c| *c *= scale);
    v
}

/// Correlations `<f, chi_a>_D` for every mask `a`, for any marginal `D`.
pub fn correlations(d: &BaseDistribution, f: &BoundedFn) -> Result<Vec<f64>> {
    if d.domain() != f.domain() {
        return Err(Error::DomainMismatch {
            expected: d.domain().bits(),
            found: f.domain().bits(),
        });
    }
    let fv = f.values();
    let probs = d.probs();
    let mut v: Vec<f64> = fv.iter().zip(probs.iter()).map(|(a, p)| a * p).collect();
    wht_in_place(&mut v);
    Ok(v)
}

/// Direct `O(4^n)` coefficient sum, used as an independent check.
pub fn naive_coefficient(f: &BoundedFn, mask: u64) -> f64 {
    let d = f.domain();
    crate::numeric::csum(d.points().map(|x| f.value(x) * parity_sign(mask, x))) / d.size() as f64
}

/// Index of the entry with the largest magnitude among the first `limit`
/// entries; ties go to the lowest index.
pub fn argmax_abs(v: &[f64], limit: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in v.iter().take(limit).enumerate() {
        if best.is_none_or(|(_, b)| c.abs() > b) {
            best = Some((i, c.abs()));
        }
    }
    best.map(|(i, _)| i)
}

//! Small dense-vector helpers shared by the per-agent hot path.
//!
//! Agent variables are plain `Vec<f64>` of length `p`; stacked quantities are
//! concatenations in agent order.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `y += s * x`
#[inline]
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(s: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

/// Concatenate per-agent blocks into one stacked vector.
pub fn stack(blocks: &[Vec<f64>]) -> Vec<f64> {
    blocks.iter().flat_map(|b| b.iter().copied()).collect()
}

/// Split a stacked vector back into blocks of length `p`.
pub fn unstack(v: &[f64], p: usize) -> Vec<Vec<f64>> {
    v.chunks(p).map(|c| c.to_vec()).collect()
}

pub fn mean_of(blocks: &[Vec<f64>]) -> Vec<f64> {
    let p = blocks.first().map_or(0, Vec::len);
    let mut out = vec![0.0; p];
    for b in blocks {
        axpy(1.0, b, &mut out);
    }
    let n = blocks.len().max(1) as f64;
    out.iter_mut().for_each(|x| *x /= n);
    out
}

/// Largest absolute entry; NaN propagates as infinity.
pub fn max_abs_slice(v: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &x in v {
        if x.is_nan() {
            return f64::INFINITY;
        }
        m = m.max(x.abs());
    }
    m
}

/// Largest absolute entry across all blocks; NaN propagates as infinity.
pub fn max_abs(blocks: &[Vec<f64>]) -> f64 {
    blocks.iter().map(|b| max_abs_slice(b)).fold(0.0, f64::max)
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stack_roundtrip() {
        let blocks = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let s = stack(&blocks);
        assert_eq!(s, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unstack(&s, 2), blocks);
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.3, 1.0), 0.0);
    }

    #[test]
    fn max_abs_flags_nan() {
        assert!(max_abs(&[vec![1.0, f64::NAN]]).is_infinite());
        assert_eq!(max_abs(&[vec![1.0, -3.0]]), 3.0);
    }
}

//! Small numeric helpers shared by the estimators.

/// Linear-interpolation percentile (Hyndman-Fan type 7) of an ascending slice.
///
/// `p` is clamped to `[0, 1]`. Panics on an empty slice.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sorts a copy of `xs` ascending; NaN sorts last.
pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Least-squares projection onto non-increasing sequences (pool adjacent
/// violators, unit weights).
pub fn isotonic_non_increasing(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count); merged while a later block mean exceeds an earlier one
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s1 / n1 as f64 > s0 / n0 as f64 {
                blocks.pop();
                let last = blocks.last_mut().unwrap();
                *last = (s0 + s1, n0 + n1);
            } else {
                break;
            }
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, n)| std::iter::repeat_n(s / n as f64, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_matches_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_sorted(&v, 0.5), 2.5);
        assert_eq!(percentile_sorted(&v, 0.0), 1.0);
        assert_eq!(percentile_sorted(&v, 1.0), 4.0);
        assert!((percentile_sorted(&v, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn pava_repairs_upward_jump() {
        let out = isotonic_non_increasing(&[1.0, 0.8, 0.805, 0.6]);
        assert_eq!(out[0], 1.0);
        assert!((out[1] - 0.8025).abs() < 1e-12);
        assert!((out[2] - 0.8025).abs() < 1e-12);
        assert_eq!(out[3], 0.6);
    }

    #[test]
    fn pava_keeps_monotone_input() {
        let v = [1.0, 0.9, 0.9, 0.5, 0.1];
        assert_eq!(isotonic_non_increasing(&v), v.to_vec());
    }
}

//! Order-fixed pairwise summation.
//!
//! The split points depend only on the slice length, so the result is a
//! pure function of the input sequence regardless of how the terms were
//! produced.

const LEAF: usize = 8;

/// Pairwise (cascade) sum; rounding error grows like `O(log n)`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sum of absolute values, used to bound rounding error.
pub fn pairwise_abs_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v.abs());
    }
    let mid = values.len() / 2;
    pairwise_abs_sum(&values[..mid]) + pairwise_abs_sum(&values[mid..])
}

/// A-priori rounding bound for a sum of `n` products of a few rounded factors.
pub fn roundoff_bound(n: usize, abs_sum: f64) -> f64 {
    let depth = (n.max(1) as f64).log2().ceil();
    (depth + 8.0) * f64::EPSILON * abs_sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_and_empty() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(pairwise_abs_sum(&[-1.0, 2.0, -3.0]), 6.0);
    }

    #[test]
    fn beats_naive_on_many_small_terms() {
        let v = vec![0.1; 1 << 20];
        let exact = 0.1 * (1u64 << 20) as f64;
        let naive: f64 = v.iter().sum();
        let pw = pairwise_sum(&v);
        assert!((pw - exact).abs() < (naive - exact).abs());
        assert!((pw - exact).abs() <= roundoff_bound(v.len(), exact));
    }

    #[test]
    fn ones_sum_exactly() {
        let v = vec![1.0; 1_000_003];
        assert_eq!(pairwise_sum(&v), 1_000_003.0);
    }
}

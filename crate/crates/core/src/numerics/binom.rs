//! Exact binomial coefficients for the AR(2) combinatorial sums.

use std::sync::OnceLock;

use super::dd::DoubleDouble;

/// Largest `n` for which the table is built. C(128, 64) < 2^125 fits in u128.
pub const MAX_BINOMIAL_N: usize = 128;

fn table() -> &'static Vec<Vec<u128>> {
    static TABLE: OnceLock<Vec<Vec<u128>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(MAX_BINOMIAL_N + 1);
        for n in 0..=MAX_BINOMIAL_N {
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        rows
    })
}

/// C(n, k) as an exact integer; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> u128 {
    assert!(n <= MAX_BINOMIAL_N, "binomial table limited to n <= {MAX_BINOMIAL_N}");
    if k > n {
        0
    } else {
        table()[n][k]
    }
}

/// C(n, k) in double-double. Exact for n <= 104 (C(104, 52) < 2^106).
pub fn binomial_dd(n: usize, k: usize) -> DoubleDouble {
    DoubleDouble::from_u128(binomial(n, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(4, 5), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn rows_sum_to_powers_of_two() {
        for n in [10usize, 40, 100] {
            let s: u128 = (0..=n).map(|k| binomial(n, k)).sum();
            assert_eq!(s, 1u128 << n);
        }
    }
}

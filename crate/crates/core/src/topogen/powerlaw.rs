//! Target degree and link-length distributions for topology growth.

use crate::error::{invalid, Result};
use crate::num::Scalar;

/// Largest actual maximum degree `m_a <= m` for which every degree frequency
/// of the truncated power law stays positive.
///
/// Starting from `m`, `m_a` is decremented until
/// `2k * sum(j^-gamma) >= sum(j^(1-gamma))` over `j in [k, m_a)`.
pub fn compute_ma<S: Scalar>(m: usize, k: usize, gamma: S) -> Result<usize> {
    if k < 2 {
        return Err(invalid(format!("initial degree k must be >= 2, got {k}")));
    }
    if m <= 2 * k {
        return Err(invalid(format!("switch size m={m} must exceed 2k={}", 2 * k)));
    }
    if !(gamma > S::zero()) {
        return Err(invalid("degree exponent gamma must be positive"));
    }
    let two_k = S::from_usize_lossy(2 * k);
    let mut ma = m;
    while ma > 2 * k {
        let (lhs, rhs) = (k..ma).fold((S::zero(), S::zero()), |(a, b), j| {
            let j = S::from_usize_lossy(j);
            (a + j.powf(-gamma), b + j.powf(S::one() - gamma))
        });
        if two_k * lhs >= rhs {
            return Ok(ma);
        }
        ma -= 1;
    }
    Err(invalid(format!(
        "no actual maximum degree above 2k={} satisfies the positivity condition for gamma={gamma}",
        2 * k
    )))
}

/// Expected frequency of each degree in `[k, m_a]`; index `i - k` holds `f_i`.
pub fn degree_frequencies<S: Scalar>(m_a: usize, k: usize, gamma: S) -> Result<Vec<S>> {
    if m_a <= 2 * k {
        return Err(invalid(format!("m_a={m_a} must exceed 2k={}", 2 * k)));
    }
    let ma_s = S::from_usize_lossy(m_a);
    let norm: S = (k..m_a)
        .map(|j| {
            let js = S::from_usize_lossy(j);
            (ma_s - js) / js.powf(gamma)
        })
        .sum();
    let numer = S::from_usize_lossy(m_a - 2 * k);
    let mut f: Vec<S> = (k..m_a)
        .map(|i| numer / (S::from_usize_lossy(i).powf(gamma) * norm))
        .collect();
    let rest = S::one() - f.iter().copied().sum::<S>();
    f.push(rest);
    if let Some(pos) = f.iter().position(|&x| !(x > S::zero())) {
        return Err(invalid(format!(
            "degree {} gets non-positive frequency; m_a={m_a} is inconsistent with gamma={gamma}",
            k + pos
        )));
    }
    Ok(f)
}

/// Expected probability of each link length; index `l` holds `P(l)` for
/// `l in [1, l_a]` and index 0 is zero. The last length absorbs the tail
/// mass of all lengths `>= l_a` on a `t x t` grid.
pub fn link_length_distribution<S: Scalar>(beta: S, l_a: usize, t: usize) -> Result<Vec<S>> {
    if t < 2 {
        return Err(invalid("grid side must be at least 2"));
    }
    let max_len = 2 * (t - 1);
    if l_a == 0 || l_a > max_len {
        return Err(invalid(format!("maximal link length {l_a} outside [1, {max_len}]")));
    }
    if !(beta > S::zero()) {
        return Err(invalid("length exponent beta must be positive"));
    }
    let z: S = (1..=max_len).map(|l| S::from_usize_lossy(l).powf(-beta)).sum();
    let mut p = vec![S::zero(); l_a + 1];
    let mut acc = S::zero();
    for (l, slot) in p.iter_mut().enumerate().take(l_a).skip(1) {
        *slot = S::from_usize_lossy(l).powf(-beta) / z;
        acc = acc + *slot;
    }
    p[l_a] = S::one() - acc;
    Ok(p)
}

/// `P(l)` for a single length.
pub fn expected_link_prob<S: Scalar>(l: usize, beta: S, l_a: usize, t: usize) -> Result<S> {
    if l == 0 || l > l_a {
        return Err(invalid(format!("length {l} outside [1, {l_a}]")));
    }
    Ok(link_length_distribution(beta, l_a, t)?[l])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ma_table_points() {
        assert_eq!(compute_ma(15, 2, 2.0f64).unwrap(), 15);
        assert_eq!(compute_ma(15, 2, 0.5f64).unwrap(), 7);
        assert_eq!(compute_ma(15, 2, 1.1f64).unwrap(), 9);
    }

    #[test]
    fn ma_rejects_bad_parameters() {
        assert!(compute_ma(4, 2, 1.0f64).is_err());
        assert!(compute_ma(15, 1, 1.0f64).is_err());
        assert!(compute_ma(15, 2, 0.0f64).is_err());
    }

    #[test]
    fn frequencies_sum_to_one_and_decrease() {
        for g10 in 5..=25 {
            let gamma = g10 as f64 / 10.0;
            let ma = compute_ma(15, 2, gamma).unwrap();
            let f = degree_frequencies(ma, 2, gamma).unwrap();
            let total: f64 = f.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for w in f[..f.len() - 1].windows(2) {
                assert!(w[0] >= w[1], "gamma={gamma}: {f:?}");
            }
        }
    }

    #[test]
    fn frequencies_reject_small_ma() {
        assert!(degree_frequencies(4, 2, 1.0f64).is_err());
    }

    #[test]
    fn length_distribution_sums_to_one() {
        let p = link_length_distribution(1.4f64, 15, 32).unwrap();
        assert_eq!(p.len(), 16);
        assert_eq!(p[0], 0.0);
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(expected_link_prob(16, 1.4f64, 15, 32).is_err());
    }

    #[test]
    fn steep_length_law_concentrates_on_unit_links() {
        let p = link_length_distribution(40.0f64, 15, 32).unwrap();
        assert!(p[1] > 0.999_999);
    }

    #[test]
    fn generic_over_f32() {
        assert_eq!(compute_ma(15, 2, 0.7f32).unwrap(), 8);
        let f = degree_frequencies(8, 2, 0.7f32).unwrap();
        assert!((f.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    }
}

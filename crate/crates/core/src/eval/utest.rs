//! Two-sided Mann–Whitney U test with midranks for ties.
//!
//! Small samples (`n1 + n2 <= EXACT_LIMIT`) use the exact permutation
//! distribution of the rank sum, computed by dynamic programming over doubled
//! midranks; larger samples use the normal approximation with tie and
//! continuity corrections.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UTestMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// U of the first sample: its rank sum minus `n1(n1 + 1)/2`.
    pub u_statistic: f64,
    pub p_value_two_sided: f64,
    pub n1: usize,
    pub n2: usize,
    pub method: UTestMethod,
}

/// Doubled midranks of the pooled sample, plus the tie group sizes.
fn doubled_ranks(a: &[f64], b: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the midrank (i + j + 2) / 2
        for item in &pooled[i..=j] {
            ranks[item.1] = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of `n1`-subsets of `ranks` with each doubled rank sum.
fn rank_sum_counts(ranks: &[u64], n1: usize) -> Vec<f64> {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // dp[j][s]: subsets of size j with sum s
    let mut dp = vec![vec![0.0f64; width]; n1 + 1];
    dp[0][0] = 1.0;
    for &r in ranks {
        let r = r as usize;
        for j in (1..=n1).rev() {
            let (lo, hi) = dp.split_at_mut(j);
            let (prev, cur) = (&lo[j - 1], &mut hi[0]);
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    dp.swap_remove(n1)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::NonFinite);
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let (ranks, ties) = doubled_ranks(a, b);
    let r1_doubled: u64 = ranks[..n1].iter().sum();
    let u = r1_doubled as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;

    if n <= EXACT_LIMIT {
        let counts = rank_sum_counts(&ranks, n1);
        let center = (n1 * (n + 1)) as i64;
        let dev = (r1_doubled as i64 - center).abs();
        let total: f64 = counts.iter().sum();
        let extreme: f64 = counts
            .iter()
            .enumerate()
            .filter(|(s, _)| (*s as i64 - center).abs() >= dev)
            .map(|(_, c)| c)
            .sum();
        let p = (extreme / total).min(1.0);
        return Ok(UTestResult {
            u_statistic: u,
            p_value_two_sided: p,
            n1,
            n2,
            method: UTestMethod::Exact,
        });
    }
    let p = normal_p_value(u, n1, n2, &ties);
    Ok(UTestResult {
        u_statistic: u,
        p_value_two_sided: p,
        n1,
        n2,
        method: UTestMethod::Normal,
    })
}

/// Normal approximation to the two-sided p-value of `u`.
pub fn normal_p_value(u: f64, n1: usize, n2: usize, ties: &[usize]) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let nf = n1f + n2f;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = (((u - n1f * n2f / 2.0).abs() - 0.5) / var.sqrt()).max(0.0);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - std.cdf(z))).min(1.0)
}

/// Same test forced onto the normal approximation.
pub fn mann_whitney_u_normal(a: &[f64], b: &[f64]) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (ranks, ties) = doubled_ranks(a, b);
    let n1 = a.len();
    let u = ranks[..n1].iter().sum::<u64>() as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(UTestResult {
        u_statistic: u,
        p_value_two_sided: normal_p_value(u, n1, b.len(), &ties),
        n1,
        n2: b.len(),
        method: UTestMethod::Normal,
    })
}

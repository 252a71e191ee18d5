//! Wilcoxon rank-sum (Mann-Whitney U) test, two-sided.
//!
//! Small tie-free samples (`n1 + n2 <= EXACT_MAX_TOTAL`) use the exact null
//! distribution of U. Otherwise the normal approximation is used, with the
//! tie-corrected variance and a 0.5 continuity correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const EXACT_MAX_TOTAL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSumMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// U statistic of the first sample: its rank sum minus n1(n1+1)/2.
    pub u: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("rank-sum test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::validation("rank-sum test sample contains NaN"));
    }
    Ok(())
}

/// Mid-ranks (1-based) of the pooled sample and the tie groups' sizes.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a
        .iter()
        .chain(b)
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        for item in &pooled[i..j] {
            ranks[item.1] = mid;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn u_statistic(ranks: &[f64], n1: usize) -> f64 {
    let r1: f64 = ranks[..n1].iter().sum();
    r1 - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Number of ways each U value arises when n1 ranks are drawn from
/// 1..=n1+n2, via the subset-sum recurrence over ranks.
fn u_distribution(n1: usize, n2: usize) -> Vec<f64> {
    let n = n1 + n2;
    let max_sum = (n * (n + 1)) / 2;
    // ways[k][s]: k-subsets of the ranks seen so far summing to s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for rank in 1..=n {
        for k in (1..=n1.min(rank)).rev() {
            for s in (rank..=max_sum).rev() {
                ways[k][s] += ways[k - 1][s - rank];
            }
        }
    }
    let offset = n1 * (n1 + 1) / 2;
    (0..=n1 * n2).map(|u| ways[n1][u + offset]).collect()
}

/// Exact two-sided test. Fails when the pooled sample has ties.
pub fn rank_sum_exact(a: &[f64], b: &[f64]) -> Result<RankSum> {
    check(a, b)?;
    let (ranks, ties) = pooled_ranks(a, b);
    if !ties.is_empty() {
        return Err(Error::validation("exact rank-sum test requires tie-free samples"));
    }
    let u = u_statistic(&ranks, a.len());
    let dist = u_distribution(a.len(), b.len());
    let total: f64 = dist.iter().sum();
    let k = u.round() as usize;
    let lower: f64 = dist[..=k].iter().sum::<f64>() / total;
    let upper: f64 = dist[k..].iter().sum::<f64>() / total;
    Ok(RankSum {
        u,
        p_value: (2.0 * lower.min(upper)).min(1.0),
        method: RankSumMethod::Exact,
    })
}

/// Normal approximation with tie correction and continuity correction.
/// A fully tied pooled sample gives p = 1.
pub fn rank_sum_normal(a: &[f64], b: &[f64]) -> Result<RankSum> {
    check(a, b)?;
    let (ranks, ties) = pooled_ranks(a, b);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let u = u_statistic(&ranks, a.len());
    let mean = n1 * n2 / 2.0;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = if n > 1.0 {
        n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    let p_value = if variance <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(RankSum {
        u,
        p_value,
        method: RankSumMethod::Normal,
    })
}

/// Two-sided rank-sum test choosing the exact path for small tie-free samples.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSum> {
    check(a, b)?;
    let (_, ties) = pooled_ranks(a, b);
    if a.len() + b.len() <= EXACT_MAX_TOTAL && ties.is_empty() {
        rank_sum_exact(a, b)
    } else {
        rank_sum_normal(a, b)
    }
}

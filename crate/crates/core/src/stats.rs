//! Wilcoxon signed-rank test for paired samples.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
/// Largest effective sample size handled by the exact distribution in
/// [`WilcoxonMethod::Auto`].
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Auto,
    Exact,
    Normal,
}

impl WilcoxonMethod {
    pub fn name(self) -> &'static str {
        match self {
            WilcoxonMethod::Auto => "auto",
            WilcoxonMethod::Exact => "exact",
            WilcoxonMethod::Normal => "normal-approximation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W⁺, W⁻)`
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    /// `Exact` or `Normal`, never `Auto`.
    pub method: WilcoxonMethod,
    pub alpha: f64,
    pub significant: bool,
}

/// Signed ranks of the nonzero differences, doubled so that average ranks
/// of ties stay integral. Returns `(doubled ranks, signs)`.
fn doubled_ranks(diffs: &[f64]) -> (Vec<u64>, Vec<bool>) {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = vec![0u64; diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // ranks i+1 ..= j+1, averaged and doubled
        let doubled = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    (ranks, diffs.iter().map(|&d| d > 0.0).collect())
}

/// Number of sign assignments giving each doubled positive-rank sum.
fn exact_counts(ranks: &[u64]) -> Vec<u64> {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Two-sided exact p-value for doubled ranks with doubled statistic `w2`
/// (the smaller signed-rank sum).
fn exact_p(ranks: &[u64], w2: u64) -> f64 {
    let counts = exact_counts(ranks);
    let tail: u64 = counts[..=w2 as usize].iter().sum();
    let total = 2f64.powi(ranks.len() as i32);
    (2.0 * tail as f64 / total).min(1.0)
}

fn normal_p(ranks: &[u64], w: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let ties: f64 = sorted
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    // continuity correction towards the mean; w ≤ mean always
    let z = ((w - mean + 0.5).min(0.0)) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * std.cdf(z)).min(1.0)
}

/// Two-sided test of `a − b` with [`WilcoxonMethod::Auto`] and α = 0.05.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, WilcoxonMethod::Auto, DEFAULT_ALPHA)
}

pub fn wilcoxon_signed_rank_with(
    a: &[f64],
    b: &[f64],
    method: WilcoxonMethod,
    alpha: f64,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired series differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("paired series are empty"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired differences"));
    }
    if diffs.is_empty() {
        return Err(Error::Degenerate);
    }
    let (ranks, positive) = doubled_ranks(&diffs);
    let w2_plus: u64 = ranks.iter().zip(&positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let w2_minus: u64 = ranks.iter().sum::<u64>() - w2_plus;
    let w2 = w2_plus.min(w2_minus);
    let n = ranks.len();
    let method = match method {
        WilcoxonMethod::Auto if n <= EXACT_MAX_N => WilcoxonMethod::Exact,
        WilcoxonMethod::Auto => WilcoxonMethod::Normal,
        m => m,
    };
    let statistic = w2 as f64 / 2.0;
    let p_value = match method {
        WilcoxonMethod::Exact => {
            if n > 60 {
                return Err(Error::invalid(format!("exact test limited to 60 pairs, got {n}")));
            }
            exact_p(&ranks, w2)
        }
        _ => normal_p(&ranks, statistic),
    };
    Ok(WilcoxonResult {
        n_effective: n,
        w_plus: w2_plus as f64 / 2.0,
        w_minus: w2_minus as f64 / 2.0,
        statistic,
        p_value,
        method,
        alpha,
        significant: p_value < alpha,
    })
}

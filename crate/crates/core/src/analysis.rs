// SPDX-License-Identifier: Apache-2.0

//! Statistics over aggregated tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::aggregate::{AggregatedTable, TableRow};

/// Largest effective sample size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no input values")]
    EmptyInput,
    #[error("no rows could be paired by design_id")]
    NoPairs,
    #[error("ground truth has zero variance")]
    DegenerateTruth,
    #[error("histogram needs at least one bin")]
    InvalidBins,
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub w_statistic: f64,
    pub p_two_tailed: f64,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Paired two-tailed Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped and tied magnitudes get average ranks. The
/// exact null distribution is used up to [`EXACT_LIMIT`] effective pairs,
/// the tie-corrected normal approximation with continuity correction above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, None)
}

/// As [`wilcoxon_signed_rank`], optionally forcing the method.
pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], method: Option<WilcoxonMethod>) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w_statistic: 0.0,
            p_two_tailed: 1.0,
            n_effective: 0,
            method: WilcoxonMethod::Exact,
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);
    let method = method.unwrap_or(if n <= EXACT_LIMIT {
        WilcoxonMethod::Exact
    } else {
        WilcoxonMethod::NormalApprox
    });
    let p = match method {
        WilcoxonMethod::Exact => exact_p(&ranks, w),
        WilcoxonMethod::NormalApprox => normal_p(&magnitudes, n, w),
    };
    Ok(WilcoxonResult {
        w_statistic: w,
        p_two_tailed: p.clamp(0.0, 1.0),
        n_effective: n,
        method,
    })
}

/// Fraction of the 2^n sign patterns whose statistic is at most `w`.
///
/// Average ranks are multiples of 1/2, so doubled ranks are integers and the
/// distribution of the positive-rank sum is a subset-sum count.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w2 = (w * 2.0).round() as usize;
    let extreme: f64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| *s <= w2 || *s >= total.saturating_sub(w2))
        .map(|(_, c)| c)
        .sum();
    extreme / 2f64.powi(ranks.len() as i32)
}

fn normal_p(magnitudes: &[f64], n: usize, w: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear-interpolation quantile over sorted data, inclusive of the endpoints.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub n_pairs: usize,
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub median_a: Option<f64>,
    pub median_b: Option<f64>,
    pub wilcoxon: Option<WilcoxonResult>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub alpha: f64,
    pub n_paired: usize,
    pub unpaired_a: usize,
    pub unpaired_b: usize,
    pub metrics: Vec<MetricComparison>,
}

impl RegressionReport {
    /// Plain-text table; significant metrics carry a trailing `*`.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:>6} {:>14} {:>14} {:>14} {:>14} {:>10}",
            "metric", "pairs", "mean_a", "mean_b", "median_a", "median_b", "p"
        );
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        for m in &self.metrics {
            let name = if m.significant { format!("{}*", m.metric) } else { m.metric.clone() };
            let p = m.wilcoxon.map_or("-".to_string(), |w| format!("{:.4e}", w.p_two_tailed));
            let _ = writeln!(
                out,
                "{:<28} {:>6} {:>14} {:>14} {:>14} {:>14} {:>10}",
                name,
                m.n_pairs,
                fmt(m.mean_a),
                fmt(m.mean_b),
                fmt(m.median_a),
                fmt(m.median_b),
                p
            );
        }
        let _ = writeln!(
            out,
            "paired {} designs ({} only in A, {} only in B); * marks p < {}",
            self.n_paired, self.unpaired_a, self.unpaired_b, self.alpha
        );
        out
    }
}

/// Pairs rows by `design_id` and runs the signed-rank test per metric.
pub fn compare_tool_versions(
    rows_a: &[TableRow],
    rows_b: &[TableRow],
    metrics: &[&str],
    alpha: f64,
) -> Result<RegressionReport> {
    let index_b: HashMap<&str, &TableRow> = rows_b.iter().map(|r| (r.design_id.as_str(), r)).collect();
    let pairs: Vec<(&TableRow, &TableRow)> = rows_a
        .iter()
        .filter_map(|a| index_b.get(a.design_id.as_str()).map(|b| (a, *b)))
        .collect();
    if pairs.is_empty() {
        return Err(AnalysisError::NoPairs);
    }
    let mut comparisons = Vec::with_capacity(metrics.len());
    for metric in metrics {
        let (va, vb): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .filter_map(|(a, b)| Some((a.metric(metric)?, b.metric(metric)?)))
            .unzip();
        let wilcoxon = if va.is_empty() { None } else { Some(wilcoxon_signed_rank(&va, &vb)?) };
        let stat = |xs: &[f64], f: fn(&[f64]) -> f64| (!xs.is_empty()).then(|| f(xs));
        comparisons.push(MetricComparison {
            metric: metric.to_string(),
            n_pairs: va.len(),
            mean_a: stat(&va, mean),
            mean_b: stat(&vb, mean),
            median_a: stat(&va, median),
            median_b: stat(&vb, median),
            significant: wilcoxon.is_some_and(|w| w.p_two_tailed < alpha),
            wilcoxon,
        });
    }
    Ok(RegressionReport {
        alpha,
        n_paired: pairs.len(),
        unpaired_a: rows_a.len() - pairs.len(),
        unpaired_b: rows_b.len() - pairs.len(),
        metrics: comparisons,
    })
}

fn check_prediction(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(AnalysisError::LengthMismatch(pred.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    Ok(mean(truth))
}

/// Relative absolute error: `sum |pred - truth| / sum |truth - mean(truth)|`.
pub fn compute_rae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let m = check_prediction(pred, truth)?;
    let denom: f64 = truth.iter().map(|t| (t - m).abs()).sum();
    if denom == 0.0 {
        return Err(AnalysisError::DegenerateTruth);
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / denom)
}

/// Coefficient of determination.
pub fn compute_r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let m = check_prediction(pred, truth)?;
    let denom: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    if denom == 0.0 {
        return Err(AnalysisError::DegenerateTruth);
    }
    Ok(1.0 - pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    BaseDesign,
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub count: usize,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Self {
            min: s[0],
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
            count: s.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub group: String,
    pub metric: String,
    #[serde(flatten)]
    pub spread: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub group_by: GroupBy,
    pub entries: Vec<CoverageEntry>,
}

impl CoverageSummary {
    pub fn get(&self, group: &str, metric: &str) -> Option<&Spread> {
        self.entries
            .iter()
            .find(|e| e.group == group && e.metric == metric)
            .map(|e| &e.spread)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:<26} {:>6} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "group", "metric", "count", "min", "q1", "median", "q3", "max"
        );
        for e in &self.entries {
            let s = &e.spread;
            let _ = writeln!(
                out,
                "{:<24} {:<26} {:>6} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>12.3}",
                e.group, e.metric, s.count, s.min, s.q1, s.median, s.q3, s.max
            );
        }
        out
    }
}

/// Per-group spread of each metric. Null values are skipped, and a group with
/// no values for a metric gets no entry for it.
pub fn coverage_summary(table: &AggregatedTable, group_by: GroupBy, metrics: &[&str]) -> CoverageSummary {
    let mut groups: BTreeMap<&str, Vec<&TableRow>> = BTreeMap::new();
    for row in &table.rows {
        let key = match group_by {
            GroupBy::BaseDesign => row.base_name.as_str(),
            GroupBy::Dataset => row.dataset.as_str(),
        };
        groups.entry(key).or_default().push(row);
    }
    let mut entries = Vec::new();
    for (group, rows) in groups {
        for metric in metrics {
            let values: Vec<f64> = rows.iter().filter_map(|r| r.metric(metric)).collect();
            if let Some(spread) = Spread::of(&values) {
                entries.push(CoverageEntry {
                    group: group.to_string(),
                    metric: metric.to_string(),
                    spread,
                });
            }
        }
    }
    CoverageSummary { group_by, entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over `[min, max]`; the maximum lands in the last bin.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Vec<Bin>> {
    if n_bins == 0 {
        return Err(AnalysisError::InvalidBins);
    }
    if values.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<Bin> = (0..n_bins)
        .map(|i| Bin {
            lo: lo + width * i as f64,
            hi: if i + 1 == n_bins { hi } else { lo + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for v in values {
        let idx = if width > 0.0 {
            (((v - lo) / width).floor() as usize).min(n_bins - 1)
        } else {
            n_bins - 1
        };
        bins[idx].count += 1;
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Counts sign patterns directly; independent of the subset-sum DP.
    fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
        // Rank of |x|: values strictly below it, plus the midpoint of its tie run.
        let ranks: Vec<f64> = d
            .iter()
            .map(|x| {
                let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
                let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect();
        let plus: f64 = ranks.iter().zip(&d).filter(|(_, x)| **x > 0.0).map(|(r, _)| r).sum();
        let total: f64 = ranks.iter().sum();
        let observed = plus.min(total - plus);
        let n = d.len();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s.min(total - s) <= observed + 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn identical_samples() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((r.n_effective, r.p_two_tailed, r.method), (0, 1.0, WilcoxonMethod::Exact));
    }

    #[test]
    fn constant_shift_of_six() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.w_statistic, 0.0);
        assert_eq!(r.p_two_tailed, 0.03125);
    }

    #[test]
    fn input_errors() {
        assert_eq!(wilcoxon_signed_rank(&[1.0], &[]), Err(AnalysisError::LengthMismatch(1, 0)));
        assert_eq!(wilcoxon_signed_rank(&[], &[]), Err(AnalysisError::EmptyInput));
    }

    #[test]
    fn rae_and_r2_hand_values() {
        assert_eq!(compute_rae(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 1.5);
        assert_eq!(compute_r2(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), -1.5);
        assert_eq!(compute_rae(&[3.0, 3.0], &[2.0, 4.0]).unwrap(), 1.0);
        assert_eq!(compute_r2(&[3.0, 3.0], &[2.0, 4.0]).unwrap(), 0.0);
        assert_eq!(compute_rae(&[2.0, 4.0], &[2.0, 4.0]).unwrap(), 0.0);
        assert_eq!(compute_r2(&[2.0, 4.0], &[2.0, 4.0]).unwrap(), 1.0);
        assert_eq!(compute_r2(&[1.0, 1.0], &[3.0, 3.0]), Err(AnalysisError::DegenerateTruth));
    }

    #[test]
    fn histogram_cases() {
        let bins = histogram(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(
            bins,
            [Bin { lo: 0.0, hi: 1.5, count: 2 }, Bin { lo: 1.5, hi: 3.0, count: 2 }]
        );
        let c = histogram(&[2.0; 5], 3).unwrap();
        assert_eq!(c.iter().map(|b| b.count).collect::<Vec<_>>(), [0, 0, 5]);
        assert_eq!(histogram(&[1.0, 9.0], 1).unwrap()[0].count, 2);
        assert_eq!(histogram(&[], 2), Err(AnalysisError::EmptyInput));
    }

    #[test]
    fn quartiles_inclusive() {
        let s = Spread::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        let one = Spread::of(&[7.0]).unwrap();
        assert_eq!((one.min, one.q1, one.median, one.q3, one.max), (7.0, 7.0, 7.0, 7.0, 7.0));
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(pairs in proptest::collection::vec((0i32..8, 0i32..8), 1..=12)) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let r = wilcoxon_signed_rank(&a, &b).unwrap();
            prop_assert!((r.p_two_tailed - brute_force_p(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn symmetric_and_shift_invariant(
            pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..30),
            shift in -100.0f64..100.0,
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0.round()).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1.round()).collect();
            let ab = wilcoxon_signed_rank(&a, &b).unwrap();
            let ba = wilcoxon_signed_rank(&b, &a).unwrap();
            prop_assert_eq!(ab.p_two_tailed, ba.p_two_tailed);
            prop_assert_eq!(ab.w_statistic, ba.w_statistic);
            let s = shift.round();
            let a2: Vec<f64> = a.iter().map(|x| x + s).collect();
            let b2: Vec<f64> = b.iter().map(|x| x + s).collect();
            prop_assert_eq!(wilcoxon_signed_rank(&a2, &b2).unwrap(), ab);
        }

        #[test]
        fn histogram_counts_sum(values in proptest::collection::vec(-1e3f64..1e3, 1..50), bins in 1usize..20) {
            let h = histogram(&values, bins).unwrap();
            prop_assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), values.len());
        }

        #[test]
        fn spread_is_ordered(values in proptest::collection::vec(-1e3f64..1e3, 1..50)) {
            let s = Spread::of(&values).unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        }
    }

    #[test]
    fn exact_and_normal_agree_at_twenty() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256StarStar::seed_from_u64(9);
        for _ in 0..50 {
            // Distinct magnitudes so the data are tie-free.
            let mut mags: Vec<f64> = (1..=20).map(|i| i as f64 + rng.random::<f64>() * 0.5).collect();
            mags.sort_by(f64::total_cmp);
            let d: Vec<f64> = mags.iter().map(|m| if rng.random_bool(0.5) { *m } else { -*m }).collect();
            let zeros = vec![0.0; d.len()];
            let e = wilcoxon_signed_rank_with(&d, &zeros, Some(WilcoxonMethod::Exact)).unwrap();
            let n = wilcoxon_signed_rank_with(&d, &zeros, Some(WilcoxonMethod::NormalApprox)).unwrap();
            assert!((e.p_two_tailed - n.p_two_tailed).abs() < 0.02, "{} vs {}", e.p_two_tailed, n.p_two_tailed);
        }
    }
}

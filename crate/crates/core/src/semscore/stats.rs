use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SemscoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub percentiles: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxWhisker {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
    pub below_range: usize,
    pub above_range: usize,
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>, SemscoreError> {
    if values.is_empty() {
        return Err(SemscoreError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SemscoreError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Linear interpolation between closest ranks over sorted data (Hyndman-Fan
/// type 7, the NumPy default). `p` is in percent.
pub fn percentile_type7(sorted: &[f64], p: f64) -> Result<f64, SemscoreError> {
    if sorted.is_empty() {
        return Err(SemscoreError::EmptyInput);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(SemscoreError::InvalidPercentile(p));
    }
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn summarize(values: &[f64], percentiles: &[u32]) -> Result<SummaryStats, SemscoreError> {
    let sorted = sorted_finite(values)?;
    let n = sorted.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let mut pct = BTreeMap::new();
    for &p in percentiles {
        pct.insert(p, percentile_type7(&sorted, p as f64)?);
    }
    Ok(SummaryStats {
        n,
        mean,
        sd: var.sqrt(),
        min: sorted[0],
        max: sorted[n - 1],
        percentiles: pct,
    })
}

/// Equal-width bins over `[lo, hi]`; bin `i` is `[e_i, e_{i+1})` except the
/// last, which also takes `hi`. Out-of-range values are counted separately.
pub fn histogram(
    values: &[f64],
    bin_count: usize,
    range: (f64, f64),
) -> Result<Histogram, SemscoreError> {
    let (lo, hi) = range;
    if bin_count == 0 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(SemscoreError::InvalidRange {
            lo,
            hi,
            bins: bin_count,
        });
    }
    let edges: Vec<f64> = (0..=bin_count)
        .map(|i| {
            if i == bin_count {
                hi
            } else {
                lo + (hi - lo) * i as f64 / bin_count as f64
            }
        })
        .collect();
    let mut bins: Vec<HistogramBin> = edges
        .windows(2)
        .map(|w| HistogramBin {
            bin_lo: w[0],
            bin_hi: w[1],
            count: 0,
        })
        .collect();
    let (mut below, mut above) = (0, 0);
    for &v in values {
        if v.is_nan() || v < lo {
            below += 1;
            continue;
        }
        if v > hi {
            above += 1;
            continue;
        }
        let mut idx = (((v - lo) / (hi - lo)) * bin_count as f64).floor() as usize;
        idx = idx.min(bin_count - 1);
        // The arithmetic guess can be off by one near an edge; settle it
        // against the stored edges.
        while idx > 0 && v < edges[idx] {
            idx -= 1;
        }
        while idx + 1 < bin_count && v >= edges[idx + 1] {
            idx += 1;
        }
        bins[idx].count += 1;
    }
    Ok(Histogram {
        bins,
        below_range: below,
        above_range: above,
    })
}

/// Type-7 quartiles with whiskers at the most extreme points inside
/// 1.5·IQR of the box.
pub fn box_whisker(values: &[f64]) -> Result<BoxWhisker, SemscoreError> {
    let sorted = sorted_finite(values)?;
    let q1 = percentile_type7(&sorted, 25.0)?;
    let median = percentile_type7(&sorted, 50.0)?;
    let q3 = percentile_type7(&sorted, 75.0)?;
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|v| (fence_lo..=fence_hi).contains(v))
        .collect();
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| !(fence_lo..=fence_hi).contains(v))
        .collect();
    let whisker_low = inside.first().copied().unwrap_or(q1).min(q1);
    let whisker_high = inside.last().copied().unwrap_or(q3).max(q3);
    Ok(BoxWhisker {
        q1,
        median,
        q3,
        whisker_low,
        whisker_high,
        outliers,
    })
}

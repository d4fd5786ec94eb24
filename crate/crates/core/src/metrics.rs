//! Per-chunk QoE scoring, viewport hit ratio, dominant-tier statistics, and
//! Monte Carlo aggregation.

use crate::scalar::Scalar;
use crate::sphere::{tile_set_iou, TileSet};

/// QoE weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QoeParams<T> {
    /// Stall penalty per second.
    pub mu: T,
    /// Smoothness penalty per unit of rate change.
    pub lambda: T,
    /// Viewport-error penalty.
    pub nu: T,
    /// Utility floor rate in Mbps.
    pub r_min: T,
    pub smoothness: SmoothnessMode,
}

/// What the smoothness penalty differences: aggregate delivered rate in Mbps
/// (default) or the dominant tier index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessMode {
    RateMbps,
    TierIndex,
}

impl<T: Scalar> Default for QoeParams<T> {
    fn default() -> Self {
        Self {
            mu: T::from_f64_lossy(10.0),
            lambda: T::from_f64_lossy(0.5),
            nu: T::from_f64_lossy(5.0),
            r_min: T::from_f64_lossy(1.2),
            smoothness: SmoothnessMode::RateMbps,
        }
    }
}

impl<T: Scalar> QoeParams<T> {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let ok = self.mu >= T::zero()
            && self.lambda >= T::zero()
            && self.nu >= T::zero()
            && self.r_min > T::zero();
        if ok {
            Ok(())
        } else {
            Err(MetricsError::InvalidParams)
        }
    }
}

/// One chunk's (or one run's summed) QoE components. Penalties are stored
/// positive; `total` subtracts them from the utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QoeBreakdown<T> {
    pub utility: T,
    pub stall_penalty: T,
    pub smoothness_penalty: T,
    pub viewport_penalty: T,
    pub total: T,
}

impl<T: Scalar> QoeBreakdown<T> {
    pub fn zero() -> Self {
        Self {
            utility: T::zero(),
            stall_penalty: T::zero(),
            smoothness_penalty: T::zero(),
            viewport_penalty: T::zero(),
            total: T::zero(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            utility: self.utility + other.utility,
            stall_penalty: self.stall_penalty + other.stall_penalty,
            smoothness_penalty: self.smoothness_penalty + other.smoothness_penalty,
            viewport_penalty: self.viewport_penalty + other.viewport_penalty,
            total: self.total + other.total,
        }
    }
}

/// Scores one chunk.
///
/// `viewport_tiers` holds the delivered tier of every tile in the rendered
/// viewport; `q_max` is the top ladder tier index. The first chunk of a run
/// passes `r_prev = r_t` and `tier_prev = tier` so no smoothness penalty
/// applies.
#[allow(clippy::too_many_arguments)]
pub fn qoe_chunk<T: Scalar>(
    r_t: T,
    r_prev: T,
    tier: usize,
    tier_prev: usize,
    stall_s: T,
    viewport_tiers: &[usize],
    q_max: usize,
    params: &QoeParams<T>,
) -> Result<QoeBreakdown<T>, MetricsError> {
    if viewport_tiers.is_empty() {
        return Err(MetricsError::EmptyViewport);
    }
    let r = r_t.max(params.r_min);
    let r_prev = r_prev.max(params.r_min);
    let utility = (r / params.r_min).ln();
    let stall_penalty = params.mu * stall_s;
    let delta = match params.smoothness {
        SmoothnessMode::RateMbps => (r - r_prev).abs(),
        SmoothnessMode::TierIndex => {
            T::from_f64_lossy(tier.abs_diff(tier_prev) as f64)
        }
    };
    let smoothness_penalty = params.lambda * delta;
    let viewport_penalty = params.nu * viewport_error(viewport_tiers, q_max)?;
    Ok(QoeBreakdown {
        utility,
        stall_penalty,
        smoothness_penalty,
        viewport_penalty,
        total: utility - stall_penalty - smoothness_penalty - viewport_penalty,
    })
}

/// Normalized quality deprivation over the rendered viewport:
/// `1 - mean(tier / q_max)`, in `[0, 1]`, zero only when every viewport tile
/// sits at the top tier.
pub fn viewport_error<T: Scalar>(
    viewport_tiers: &[usize],
    q_max: usize,
) -> Result<T, MetricsError> {
    if viewport_tiers.is_empty() {
        return Err(MetricsError::EmptyViewport);
    }
    let q_max = q_max.max(1);
    let mean: T = viewport_tiers
        .iter()
        .map(|&q| {
            debug_assert!(q <= q_max);
            T::from_f64_lossy(q as f64 / q_max as f64)
        })
        .sum::<T>()
        / T::from_f64_lossy(viewport_tiers.len() as f64);
    Ok(T::one() - mean)
}

/// Percentage of prediction intervals whose predicted tile set overlaps the
/// truth at IoU >= 0.5.
pub fn hit_ratio<T: Scalar>(
    predicted: &[TileSet],
    truth: &[TileSet],
) -> Result<T, MetricsError> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| tile_set_iou(p, t) >= 0.5)
        .count();
    Ok(T::from_f64_lossy(100.0 * hits as f64 / predicted.len() as f64))
}

/// Tier holding the largest tile share; ties break toward the lower tier.
pub fn dominant_tier(tiers: &[usize]) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for &q in tiers {
        *counts.entry(q).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(q, _)| q)
        .unwrap_or(0)
}

/// Number of adjacent chunk pairs whose dominant tier differs.
pub fn count_switches(dominant: &[usize]) -> usize {
    dominant.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Mean of a non-empty slice.
pub fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_f64_lossy(values.len() as f64)
}

/// Population standard deviation (divide by n).
pub fn population_std<T: Scalar>(values: &[T]) -> T {
    let m = mean(values);
    (values.iter().map(|&v| (v - m) * (v - m)).sum::<T>()
        / T::from_f64_lossy(values.len() as f64))
    .sqrt()
}

/// Scalar aggregates of a single run, the unit the Monte Carlo layer
/// averages over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats<T> {
    /// Per-chunk mean QoE.
    pub qoe_mean: T,
    /// Summed per-chunk QoE components.
    pub qoe: QoeBreakdown<T>,
    pub buffer_mean_s: T,
    pub buffer_std_s: T,
    pub buffer_min_s: T,
    pub switches: usize,
    pub stall_events: usize,
    pub stall_s: T,
    pub hit_ratio_pct: T,
    pub eqv_bitrate_mbps: T,
    pub decision_ms: T,
}

/// Cross-run aggregates for one algorithm. All statistics average per-run
/// values; standard deviations use the population convention.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary<T> {
    pub runs: usize,
    pub qoe_mean: T,
    pub qoe_std: T,
    pub eqv_bitrate_mbps: T,
    pub buffer_mean_s: T,
    pub buffer_std_s: T,
    pub buffer_min_s: T,
    pub switches: T,
    pub stalls: T,
    pub stall_s: T,
    pub hit_ratio_pct: T,
    pub decision_ms: T,
    /// 100 rows of (per-run mean QoE quantile, cumulative probability).
    pub cdf: Vec<(T, T)>,
}

/// Number of CDF quantile rows emitted per algorithm.
pub const CDF_POINTS: usize = 100;

pub fn aggregate_metrics<T: Scalar>(runs: &[RunStats<T>]) -> Result<McSummary<T>, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let qoe: Vec<T> = runs.iter().map(|r| r.qoe_mean).collect();
    let take = |f: fn(&RunStats<T>) -> T| -> T {
        mean(&runs.iter().map(f).collect::<Vec<_>>())
    };
    let mut sorted = qoe.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("QoE values are ordered"));
    let n = sorted.len();
    let cdf = (1..=CDF_POINTS)
        .map(|i| {
            let p = i as f64 / CDF_POINTS as f64;
            let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
            (sorted[idx], T::from_f64_lossy(p))
        })
        .collect();
    Ok(McSummary {
        runs: n,
        qoe_mean: mean(&qoe),
        qoe_std: population_std(&qoe),
        eqv_bitrate_mbps: take(|r| r.eqv_bitrate_mbps),
        buffer_mean_s: take(|r| r.buffer_mean_s),
        buffer_std_s: take(|r| r.buffer_std_s),
        buffer_min_s: take(|r| r.buffer_min_s),
        switches: take(|r| T::from_f64_lossy(r.switches as f64)),
        stalls: take(|r| T::from_f64_lossy(r.stall_events as f64)),
        stall_s: take(|r| r.stall_s),
        hit_ratio_pct: take(|r| r.hit_ratio_pct),
        decision_ms: take(|r| r.decision_ms),
        cdf,
    })
}

/// Metrics-layer failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("QoE parameters out of range")]
    InvalidParams,
    #[error("viewport tile set is empty")]
    EmptyViewport,
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
}

//! Buffer-tracking PD controller, tanh rate saturation, the quality ladder,
//! and probability-weighted tile allocation.

use crate::field::ProbabilityMap;
use crate::scalar::Scalar;

/// Relative tolerance for budget-boundary comparisons. Uniform probability
/// maps put each tile's budget exactly on a ladder boundary; without a tie
/// tolerance, float rounding would demote individual tiles arbitrarily.
const FIT_TIE_REL: f64 = 1e-9;

/// PD controller parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams<T> {
    pub kp: T,
    pub kd: T,
    /// Buffer set point in seconds.
    pub b_ref: T,
    /// Safety margin applied to the tanh-mapped rate.
    pub rho: T,
    /// Concentration exponent for tile allocation shares.
    pub alpha: T,
    /// Control period in seconds.
    pub dt: T,
}

impl<T: Scalar> Default for ControllerParams<T> {
    fn default() -> Self {
        Self {
            kp: T::from_f64_lossy(0.5),
            kd: T::from_f64_lossy(0.2),
            b_ref: T::from_f64_lossy(4.0),
            rho: T::from_f64_lossy(0.9),
            alpha: T::from_f64_lossy(1.2),
            dt: T::from_f64_lossy(2.0),
        }
    }
}

impl<T: Scalar> ControllerParams<T> {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let ok = self.kp >= T::zero()
            && self.kd >= T::zero()
            && self.b_ref > T::zero()
            && self.rho > T::zero()
            && self.rho <= T::one()
            && self.alpha > T::zero()
            && self.dt > T::zero();
        if ok {
            Ok(())
        } else {
            Err(ControllerError::InvalidParams)
        }
    }
}

/// Derivative memory for the PD law.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ControllerState<T> {
    prev_error: Option<T>,
}

impl<T: Scalar> ControllerState<T> {
    pub fn new() -> Self {
        Self { prev_error: None }
    }

    pub fn reset(&mut self) {
        self.prev_error = None;
    }
}

/// PD control signal `u = kp e + kd (e - e_prev) / dt` with `e = B - b_ref`.
/// The derivative term is zero on the first call.
pub fn pd_signal<T: Scalar>(
    state: &mut ControllerState<T>,
    buffer: T,
    params: &ControllerParams<T>,
) -> T {
    let error = buffer - params.b_ref;
    let derivative = match state.prev_error {
        Some(prev) => (error - prev) / params.dt,
        None => T::zero(),
    };
    state.prev_error = Some(error);
    params.kp * error + params.kd * derivative
}

/// Saturated target rate `R = min(c_hat (1 + tanh u) rho, c_hat)`.
///
/// Returns the pre-saturation target alongside the saturated rate.
pub fn target_rate<T: Scalar>(
    u: T,
    c_hat: T,
    rho: T,
) -> Result<RateTarget<T>, ControllerError> {
    if !(c_hat > T::zero()) || !c_hat.is_finite() {
        return Err(ControllerError::InvalidCapacity(c_hat.to_f64_lossy()));
    }
    let r_star = c_hat * (T::one() + u.tanh()) * rho;
    Ok(RateTarget { r_star, r: r_star.min(c_hat) })
}

/// Pre- and post-saturation aggregate rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTarget<T> {
    pub r_star: T,
    pub r: T,
}

/// Encoding ladder plus the per-tile split rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityLadder<T> {
    rates: Vec<T>,
    weights: TileWeights<T>,
}

/// How a tier's aggregate rate divides across tiles.
#[derive(Debug, Clone, PartialEq)]
pub enum TileWeights<T> {
    /// Every tile gets `rate / tiles`.
    Uniform { tiles: usize },
    /// Explicit weights, normalized to sum to one at construction.
    Weighted(Vec<T>),
}

impl<T: Scalar> QualityLadder<T> {
    /// Ladder with a uniform per-tile split.
    pub fn uniform(rates: Vec<T>, tiles: usize) -> Result<Self, ControllerError> {
        Self::build(rates, TileWeights::Uniform { tiles })
    }

    /// Ladder that splits tiers by the given weights (for example solid
    /// angles).
    pub fn weighted(rates: Vec<T>, weights: Vec<T>) -> Result<Self, ControllerError> {
        let total: T = weights.iter().copied().sum();
        if weights.is_empty() || !(total > T::zero()) {
            return Err(ControllerError::InvalidLadder(
                "tile weights must be non-empty with positive sum".into(),
            ));
        }
        let normalized = weights.into_iter().map(|w| w / total).collect();
        Self::build(rates, TileWeights::Weighted(normalized))
    }

    fn build(rates: Vec<T>, weights: TileWeights<T>) -> Result<Self, ControllerError> {
        if rates.is_empty() {
            return Err(ControllerError::InvalidLadder("empty ladder".into()));
        }
        if rates.iter().any(|r| !(*r > T::zero()) || !r.is_finite()) {
            return Err(ControllerError::InvalidLadder(
                "ladder rates must be positive and finite".into(),
            ));
        }
        if rates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ControllerError::InvalidLadder(
                "ladder rates must be strictly ascending".into(),
            ));
        }
        let tiles = match &weights {
            TileWeights::Uniform { tiles } => *tiles,
            TileWeights::Weighted(w) => w.len(),
        };
        if tiles == 0 {
            return Err(ControllerError::InvalidLadder("zero tiles".into()));
        }
        Ok(Self { rates, weights })
    }

    /// Paper-default ladder over the default 32-tile grid.
    pub fn default_tiers(tiles: usize) -> Self {
        Self::uniform(
            [1.2, 2.5, 5.0, 10.0, 20.0, 40.1]
                .iter()
                .map(|&r| T::from_f64_lossy(r))
                .collect(),
            tiles,
        )
        .expect("default ladder is valid")
    }

    pub fn tier_count(&self) -> usize {
        self.rates.len()
    }

    pub fn tiles(&self) -> usize {
        match &self.weights {
            TileWeights::Uniform { tiles } => *tiles,
            TileWeights::Weighted(w) => w.len(),
        }
    }

    pub fn rate(&self, tier: usize) -> T {
        self.rates[tier]
    }

    pub fn rates(&self) -> &[T] {
        &self.rates
    }

    pub fn top_tier(&self) -> usize {
        self.rates.len() - 1
    }

    /// Per-tile share of a tier's aggregate rate.
    pub fn per_tile(&self, tier: usize, tile: usize) -> T {
        debug_assert!(tile < self.tiles());
        match &self.weights {
            TileWeights::Uniform { tiles } => {
                self.rates[tier] / T::from_f64_lossy(*tiles as f64)
            }
            TileWeights::Weighted(w) => self.rates[tier] * w[tile],
        }
    }

    /// Largest tier whose global rate fits under `budget` (tie-tolerant);
    /// `None` when even the base tier exceeds it.
    pub fn fit_global(&self, budget: T) -> Option<usize> {
        let slack = T::one() + T::from_f64_lossy(FIT_TIE_REL);
        (0..self.rates.len())
            .rev()
            .find(|&q| self.rates[q] <= budget * slack)
    }

    /// Largest tier whose per-tile share fits under `budget`; base tier when
    /// none fits (the base tier is always granted).
    pub fn fit_tile(&self, tile: usize, budget: T) -> usize {
        let slack = T::one() + T::from_f64_lossy(FIT_TIE_REL);
        (0..self.rates.len())
            .rev()
            .find(|&q| self.per_tile(q, tile) <= budget * slack)
            .unwrap_or(0)
    }
}

/// Tile quality assignment for one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct TileAllocation<T> {
    /// Ladder tier per tile.
    pub tiers: Vec<usize>,
    /// Delivered rate per tile, `per_tile(tier, tile)`.
    pub rates: Vec<T>,
}

impl<T: Scalar> TileAllocation<T> {
    /// Aggregate delivered rate.
    pub fn delivered(&self) -> T {
        self.rates.iter().copied().sum()
    }
}

/// Splits the aggregate budget across tiles by sharpened probability shares
/// `w_k = p_k^alpha / sum_j p_j^alpha`, quantizing each tile budget down to
/// the ladder. Every tile receives at least the base tier.
pub fn allocate_tiles<T: Scalar>(
    r: T,
    probs: &ProbabilityMap<T>,
    alpha: T,
    ladder: &QualityLadder<T>,
) -> Result<TileAllocation<T>, ControllerError> {
    if probs.len() != ladder.tiles() {
        return Err(ControllerError::InvalidLadder(format!(
            "probability map covers {} tiles, ladder {}",
            probs.len(),
            ladder.tiles()
        )));
    }
    if !(r >= T::zero()) {
        return Err(ControllerError::InvalidCapacity(r.to_f64_lossy()));
    }
    let sharpened: Vec<T> = probs
        .as_slice()
        .iter()
        .map(|&p| if p > T::zero() { p.powf(alpha) } else { T::zero() })
        .collect();
    let total: T = sharpened.iter().copied().sum();
    let n = ladder.tiles();
    let mut tiers = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    for k in 0..n {
        let share = if total > T::zero() {
            sharpened[k] / total
        } else {
            T::one() / T::from_f64_lossy(n as f64)
        };
        let tier = ladder.fit_tile(k, r * share);
        tiers.push(tier);
        rates.push(ladder.per_tile(tier, k));
    }
    Ok(TileAllocation { tiers, rates })
}

/// One full controller decision: signal, rates, and the tile assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RateDecision<T> {
    pub u: T,
    pub r_star: T,
    pub r: T,
    pub allocation: TileAllocation<T>,
}

/// Chains the PD signal, the saturated rate map, and tile allocation.
pub fn decide<T: Scalar>(
    state: &mut ControllerState<T>,
    buffer: T,
    c_hat: T,
    probs: &ProbabilityMap<T>,
    ladder: &QualityLadder<T>,
    params: &ControllerParams<T>,
) -> Result<RateDecision<T>, ControllerError> {
    let u = pd_signal(state, buffer, params);
    let target = target_rate(u, c_hat, params.rho)?;
    let allocation = allocate_tiles(target.r, probs, params.alpha, ladder)?;
    Ok(RateDecision { u, r_star: target.r_star, r: target.r, allocation })
}

/// Sharpened allocation shares without quantization; exposed for tests and
/// diagnostics.
pub fn allocation_shares<T: Scalar>(probs: &[T], alpha: T) -> Vec<T> {
    let sharpened: Vec<T> = probs
        .iter()
        .map(|&p| if p > T::zero() { p.powf(alpha) } else { T::zero() })
        .collect();
    let total: T = sharpened.iter().copied().sum();
    if total > T::zero() {
        sharpened.into_iter().map(|w| w / total).collect()
    } else {
        let n = sharpened.len();
        vec![T::one() / T::from_f64_lossy(n as f64); n]
    }
}

/// Critical-gain tuning result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedGains<T> {
    pub kp: T,
    pub kd: T,
    /// Smallest sweep gain that produced sustained oscillation.
    pub k_critical: T,
    /// Oscillation period at the critical gain, seconds.
    pub t_critical: T,
}

/// Ziegler-Nichols style tuning: sweeps proportional gains through the plant
/// closure until the buffer trajectory shows sustained oscillation, then
/// returns `kp = 0.6 K_cr` and `kd = kp T_cr / 8`.
///
/// The plant closure maps a candidate `kp` to a `(t, buffer)` trajectory of a
/// derivative-free closed loop; sweep gains must be ascending.
pub fn tune_gains<T, F>(mut plant: F, sweep: &[T]) -> Result<TunedGains<T>, ControllerError>
where
    T: Scalar,
    F: FnMut(T) -> Vec<(T, T)>,
{
    if sweep.is_empty() {
        return Err(ControllerError::TuningFailed("empty gain sweep".into()));
    }
    if sweep.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ControllerError::TuningFailed("sweep gains must ascend".into()));
    }
    for &k in sweep {
        let series = plant(k);
        if let Some(period) = sustained_oscillation_period(&series) {
            let kp = T::from_f64_lossy(0.6) * k;
            let kd = kp * period / T::from_f64_lossy(8.0);
            return Ok(TunedGains { kp, kd, k_critical: k, t_critical: period });
        }
    }
    Err(ControllerError::TuningFailed(
        "no sweep gain produced sustained oscillation".into(),
    ))
}

/// Oscillation window length in seconds.
const OSC_WINDOW_S: f64 = 30.0;
/// Peak-to-peak amplitudes closer than this relative gap count as sustained.
const OSC_MATCH_REL: f64 = 0.10;
/// Amplitude floor below which a trajectory counts as settled, in buffer
/// seconds; keeps flat signals from registering as oscillation.
const OSC_AMPLITUDE_FLOOR: f64 = 0.05;

/// Detects sustained oscillation: the peak-to-peak amplitude over the last
/// 30 s window stays within 10% of the preceding 30 s window and above the
/// amplitude floor. Returns the period estimated from mean up-crossings of
/// the last window.
pub fn sustained_oscillation_period<T: Scalar>(series: &[(T, T)]) -> Option<T> {
    let t_end = series.last()?.0;
    let window = T::from_f64_lossy(OSC_WINDOW_S);
    let split = t_end - window;
    let start = t_end - window - window;
    let last: Vec<(T, T)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= split)
        .collect();
    let prev: Vec<(T, T)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= start && t < split)
        .collect();
    if last.len() < 4 || prev.len() < 4 {
        return None;
    }
    let p2p = |w: &[(T, T)]| {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &(_, x) in w {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        hi - lo
    };
    let amp_last = p2p(&last);
    let amp_prev = p2p(&prev);
    let floor = T::from_f64_lossy(OSC_AMPLITUDE_FLOOR);
    if amp_prev < floor || amp_last < floor {
        return None;
    }
    if (amp_last - amp_prev).abs() > T::from_f64_lossy(OSC_MATCH_REL) * amp_prev {
        return None;
    }
    // Period from mean up-crossings of the window mean.
    let mean = last.iter().fold(T::zero(), |a, &(_, x)| a + x)
        / T::from_f64_lossy(last.len() as f64);
    let mut crossings: Vec<T> = Vec::new();
    for w in last.windows(2) {
        let (t0, x0) = w[0];
        let (t1, x1) = w[1];
        if x0 < mean && x1 >= mean {
            let frac = if x1 == x0 { T::zero() } else { (mean - x0) / (x1 - x0) };
            crossings.push(t0 + frac * (t1 - t0));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let span = *crossings.last().unwrap() - crossings[0];
    Some(span / T::from_f64_lossy((crossings.len() - 1) as f64))
}

/// Controller-layer failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("controller parameters out of range")]
    InvalidParams,
    #[error("capacity estimate {0} must be positive")]
    InvalidCapacity(f64),
    #[error("invalid quality ladder: {0}")]
    InvalidLadder(String),
    #[error("gain tuning failed: {0}")]
    TuningFailed(String),
}

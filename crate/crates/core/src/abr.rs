//! Baseline rate-adaptation policies behind one decision interface:
//! buffer-based, rate-based, BOLA, finite-horizon MPC, and linear viewport
//! extrapolation.

use crate::channel::harmonic_mean;
use crate::controller::QualityLadder;
use crate::field::ProbabilityMap;
use crate::metrics::QoeParams;
use crate::scalar::Scalar;
use crate::sphere::{viewport_tiles, wrap_theta, SphericalCoord, TileGrid, TileSet, Viewport};

/// Relative tolerance for objective-score ties.
const SCORE_TIE_REL: f64 = 1e-9;

/// What every policy sees when deciding a chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct AbrObservation<T> {
    pub buffer_s: T,
    pub last_tier: usize,
    /// Measured per-chunk throughputs in Mbps, oldest first.
    pub throughput_history: Vec<T>,
    pub chunk_index: usize,
}

/// A policy's output: one global tier, plus a spatial probability map for
/// viewport-aware policies.
#[derive(Debug, Clone, PartialEq)]
pub struct AbrDecision<T> {
    pub tier: usize,
    pub probs: Option<ProbabilityMap<T>>,
}

impl<T> AbrDecision<T> {
    pub fn uniform(tier: usize) -> Self {
        Self { tier, probs: None }
    }
}

/// Buffer-occupancy policy: tier 0 below the reservoir, top tier above
/// reservoir + cushion, a linear rate map snapped down to the ladder in
/// between.
pub fn buffer_based_decide<T: Scalar>(
    obs: &AbrObservation<T>,
    reservoir_s: T,
    cushion_s: T,
    ladder: &QualityLadder<T>,
) -> AbrDecision<T> {
    assert!(
        T::zero() < reservoir_s && reservoir_s < cushion_s,
        "buffer policy needs 0 < reservoir < cushion"
    );
    let top = ladder.top_tier();
    if obs.buffer_s <= reservoir_s {
        return AbrDecision::uniform(0);
    }
    if obs.buffer_s >= reservoir_s + cushion_s {
        return AbrDecision::uniform(top);
    }
    let r_lo = ladder.rate(0);
    let r_hi = ladder.rate(top);
    let rate = r_lo + (obs.buffer_s - reservoir_s) / cushion_s * (r_hi - r_lo);
    AbrDecision::uniform(ladder.fit_global(rate).unwrap_or(0))
}

/// Throughput policy: largest tier at or below the harmonic mean of the last
/// `window` throughput samples; tier 0 with no history.
pub fn rate_based_decide<T: Scalar>(
    obs: &AbrObservation<T>,
    window: usize,
    ladder: &QualityLadder<T>,
) -> AbrDecision<T> {
    assert!(window >= 1, "rate policy needs a positive window");
    let start = obs.throughput_history.len().saturating_sub(window);
    let recent = &obs.throughput_history[start..];
    match harmonic_mean(recent) {
        Some(hm) => AbrDecision::uniform(ladder.fit_global(hm).unwrap_or(0)),
        None => AbrDecision::uniform(0),
    }
}

/// BOLA control parameters, derived from the ladder and buffer geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BolaParams<T> {
    /// Buffer-to-utility exchange rate V, seconds per utility unit.
    pub v: T,
    /// Utility offset gamma_p.
    pub gamma_p: T,
}

impl<T: Scalar> BolaParams<T> {
    /// Standard threshold construction: the bottom tier pair switches at
    /// `b_low` and the top pair at `b_max`, so the policy spans the whole
    /// ladder across the buffer range.
    pub fn derive(
        ladder: &QualityLadder<T>,
        b_low: T,
        b_max: T,
    ) -> Result<Self, PolicyError> {
        let k = ladder.tier_count();
        if k < 2 {
            return Err(PolicyError::InvalidParams(
                "BOLA derivation needs at least 2 tiers".into(),
            ));
        }
        if !(b_low > T::zero()) || !(b_max > b_low) {
            return Err(PolicyError::InvalidParams(
                "BOLA derivation needs 0 < b_low < b_max".into(),
            ));
        }
        let u = |q: usize| (ladder.rate(q) / ladder.rate(0)).ln();
        let threshold = |i: usize, j: usize| {
            (u(i) * ladder.rate(j) - u(j) * ladder.rate(i))
                / (ladder.rate(j) - ladder.rate(i))
        };
        let t_low = threshold(0, 1);
        let t_high = threshold(k - 2, k - 1);
        let v = (b_max - b_low) / (t_high - t_low);
        let gamma_p = b_low / v - t_low;
        Ok(Self { v, gamma_p })
    }
}

/// BOLA: maximize `(V (u_q + gamma_p) - B) / r_q`; ties go to the higher
/// tier. Depends on the observation only through the buffer level.
pub fn bola_decide<T: Scalar>(
    obs: &AbrObservation<T>,
    params: &BolaParams<T>,
    ladder: &QualityLadder<T>,
) -> AbrDecision<T> {
    let mut best = 0usize;
    let mut best_score = T::neg_infinity();
    for q in 0..ladder.tier_count() {
        let utility = (ladder.rate(q) / ladder.rate(0)).ln();
        let score =
            (params.v * (utility + params.gamma_p) - obs.buffer_s) / ladder.rate(q);
        let tie = T::from_f64_lossy(SCORE_TIE_REL) * (T::one() + best_score.abs());
        if score >= best_score - tie {
            best = q;
            best_score = best_score.max(score);
        }
    }
    AbrDecision::uniform(best)
}

/// MPC prediction flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpcVariant {
    /// Harmonic mean of the recent window.
    Fast,
    /// Harmonic mean discounted by the window's worst relative error.
    Robust,
}

/// Finite-horizon MPC configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcParams<T> {
    /// Look-ahead depth in chunks; enumeration is exhaustive, so bounded.
    pub horizon: usize,
    pub variant: MpcVariant,
    /// Throughput samples feeding the predictor.
    pub window: usize,
    pub qoe: QoeParams<T>,
    pub segment_s: T,
    pub b_max: T,
}

/// Exhaustive-enumeration bound on the horizon.
pub const MPC_MAX_HORIZON: usize = 8;

impl<T: Scalar> Default for MpcParams<T> {
    fn default() -> Self {
        Self {
            horizon: 5,
            variant: MpcVariant::Fast,
            window: 5,
            qoe: QoeParams::default(),
            segment_s: T::from_f64_lossy(2.0),
            b_max: T::from_f64_lossy(10.0),
        }
    }
}

/// Throughput forecast for the MPC internal model. With no history the base
/// ladder rate stands in as a conservative prior.
pub fn mpc_predict_throughput<T: Scalar>(
    history: &[T],
    window: usize,
    variant: MpcVariant,
    ladder: &QualityLadder<T>,
) -> T {
    let start = history.len().saturating_sub(window);
    let recent = &history[start..];
    match harmonic_mean(recent) {
        Some(hm) => match variant {
            MpcVariant::Fast => hm,
            MpcVariant::Robust => {
                let worst = recent
                    .iter()
                    .map(|&c| ((c - hm) / hm).abs())
                    .fold(T::zero(), T::max);
                hm / (T::one() + worst)
            }
        },
        None => ladder.rate(0),
    }
}

/// Exhaustive finite-horizon search maximizing the QoE of the simulated
/// trajectory (utility, stall, and smoothness terms; no viewport term).
/// Returns the first tier of the best sequence; ties resolve to the lowest
/// first tier.
pub fn mpc_decide<T: Scalar>(
    obs: &AbrObservation<T>,
    params: &MpcParams<T>,
    ladder: &QualityLadder<T>,
) -> Result<AbrDecision<T>, PolicyError> {
    if params.horizon == 0 || params.horizon > MPC_MAX_HORIZON {
        return Err(PolicyError::InvalidParams(format!(
            "MPC horizon {} outside [1, {MPC_MAX_HORIZON}]",
            params.horizon
        )));
    }
    let predicted = mpc_predict_throughput(
        &obs.throughput_history,
        params.window,
        params.variant,
        ladder,
    );
    let k = ladder.tier_count();
    let mut sequence = vec![0usize; params.horizon];
    let mut best_first = 0usize;
    let mut best_score = T::neg_infinity();
    loop {
        let score = score_sequence(&sequence, obs, predicted, params, ladder);
        if score > best_score {
            best_score = score;
            best_first = sequence[0];
        }
        // Odometer increment with the first chunk as the most significant
        // digit, so lower first tiers are visited first and strict
        // improvement keeps the conservative choice on ties.
        let mut pos = sequence.len();
        loop {
            if pos == 0 {
                return Ok(AbrDecision::uniform(best_first));
            }
            pos -= 1;
            sequence[pos] += 1;
            if sequence[pos] < k {
                break;
            }
            sequence[pos] = 0;
        }
    }
}

fn score_sequence<T: Scalar>(
    sequence: &[usize],
    obs: &AbrObservation<T>,
    predicted: T,
    params: &MpcParams<T>,
    ladder: &QualityLadder<T>,
) -> T {
    let qoe = &params.qoe;
    let mut buffer = obs.buffer_s;
    let mut r_prev = ladder.rate(obs.last_tier.min(ladder.top_tier()));
    let mut score = T::zero();
    for &q in sequence {
        let r = ladder.rate(q);
        let download = r * params.segment_s / predicted;
        let stall = (download - buffer).max(T::zero());
        buffer = (buffer - download).max(T::zero()) + params.segment_s;
        buffer = buffer.min(params.b_max);
        score = score + (r / qoe.r_min).ln()
            - qoe.mu * stall
            - qoe.lambda * (r - r_prev).abs();
        r_prev = r;
    }
    score
}

/// Linear gaze forecast: least-squares fit on unwrapped yaw and pitch over
/// the trailing `fit_window_s`, extrapolated `lookahead_s` ahead. Fewer than
/// two usable samples hold the last position. The returned map is an
/// indicator over the predicted viewport.
pub fn extrapolate_viewport<T: Scalar>(
    gaze_history: &[(T, SphericalCoord<T>)],
    lookahead_s: T,
    fit_window_s: T,
    grid: TileGrid,
    fov_deg: T,
) -> Result<(SphericalCoord<T>, ProbabilityMap<T>, TileSet), PolicyError> {
    let (_, last) = *gaze_history.last().ok_or_else(|| {
        PolicyError::InvalidParams("extrapolation needs at least one gaze sample".into())
    })?;
    let t_end = gaze_history.last().unwrap().0;
    let start_idx = gaze_history.partition_point(|&(t, _)| t < t_end - fit_window_s);
    let window = &gaze_history[start_idx..];
    let center = if window.len() < 2 {
        last
    } else {
        // Unwrap yaw so fits cross the antimeridian without a 2*pi jump.
        let mut theta_unwrapped = Vec::with_capacity(window.len());
        let mut prev = window[0].1.theta;
        let mut acc = prev;
        theta_unwrapped.push(acc);
        for &(_, p) in &window[1..] {
            acc = acc + wrap_theta(p.theta - prev);
            prev = p.theta;
            theta_unwrapped.push(acc);
        }
        let times: Vec<T> = window.iter().map(|&(t, _)| t).collect();
        let phis: Vec<T> = window.iter().map(|&(_, p)| p.phi).collect();
        let t_target = t_end + lookahead_s;
        let theta = linear_fit_at(&times, &theta_unwrapped, t_target);
        let phi = linear_fit_at(&times, &phis, t_target)
            .max(-T::FRAC_PI_2())
            .min(T::FRAC_PI_2());
        SphericalCoord::new(wrap_theta(theta), phi)
    };
    let tiles = viewport_tiles(Viewport::new(center, fov_deg), grid);
    let probs = ProbabilityMap::indicator(&tiles, grid.len());
    Ok((center, probs, tiles))
}

/// Least-squares line through (x, y), evaluated at `x_at`. Degenerate spreads
/// fall back to the mean.
fn linear_fit_at<T: Scalar>(x: &[T], y: &[T], x_at: T) -> T {
    let n = T::from_f64_lossy(x.len() as f64);
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxx: T = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    if !(sxx > T::zero()) {
        return my;
    }
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    my + slope * (x_at - mx)
}

/// Policy-layer failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("invalid policy parameters: {0}")]
    InvalidParams(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn ladder() -> QualityLadder<f64> {
        QualityLadder::default_tiers(32)
    }

    fn obs(buffer: f64, history: &[f64]) -> AbrObservation<f64> {
        AbrObservation {
            buffer_s: buffer,
            last_tier: 0,
            throughput_history: history.to_vec(),
            chunk_index: history.len(),
        }
    }

    #[test]
    fn buffer_policy_endpoints_and_midpoint() {
        let l = ladder();
        assert_eq!(buffer_based_decide(&obs(0.0, &[]), 2.0, 6.0, &l).tier, 0);
        assert_eq!(buffer_based_decide(&obs(2.0, &[]), 2.0, 6.0, &l).tier, 0);
        assert_eq!(buffer_based_decide(&obs(8.0, &[]), 2.0, 6.0, &l).tier, 5);
        assert_eq!(buffer_based_decide(&obs(10.0, &[]), 2.0, 6.0, &l).tier, 5);
        // Midpoint maps to (1.2 + 40.1) / 2 = 20.65, snapping to 20.0.
        assert_eq!(buffer_based_decide(&obs(5.0, &[]), 2.0, 6.0, &l).tier, 4);
    }

    #[test]
    fn buffer_policy_is_monotone() {
        let l = ladder();
        let mut rng = crate::rng::stream(13);
        for _ in 0..500 {
            let a = rng.random_range(0.0..10.0);
            let b = rng.random_range(0.0..10.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let t_lo = buffer_based_decide(&obs(lo, &[]), 2.0, 6.0, &l).tier;
            let t_hi = buffer_based_decide(&obs(hi, &[]), 2.0, 6.0, &l).tier;
            assert!(t_lo <= t_hi, "buffer {lo}->{t_lo}, {hi}->{t_hi}");
        }
    }

    #[test]
    fn rate_policy_examples() {
        let l = ladder();
        assert_eq!(rate_based_decide(&obs(5.0, &[]), 5, &l).tier, 0);
        assert_eq!(rate_based_decide(&obs(5.0, &[10.0, 10.0]), 5, &l).tier, 3);
        // Harmonic mean of (4, 12) is 6.0, fitting the 5.0 Mbps tier.
        assert_eq!(rate_based_decide(&obs(5.0, &[4.0, 12.0]), 5, &l).tier, 2);
        // Window limits how far back the mean looks.
        assert_eq!(rate_based_decide(&obs(5.0, &[0.1, 21.0]), 1, &l).tier, 4);
    }

    #[test]
    fn rate_policy_is_monotone_in_history() {
        let l = ladder();
        let mut rng = crate::rng::stream(17);
        for _ in 0..300 {
            let history: Vec<f64> = (0..5).map(|_| rng.random_range(0.5..45.0)).collect();
            let base = rate_based_decide(&obs(5.0, &history), 5, &l).tier;
            let idx = rng.random_range(0..history.len());
            let mut bumped = history.clone();
            bumped[idx] += rng.random_range(0.0..10.0);
            let better = rate_based_decide(&obs(5.0, &bumped), 5, &l).tier;
            assert!(better >= base);
        }
    }

    #[test]
    fn bola_derivation_matches_hand_arithmetic() {
        let p = BolaParams::derive(&ladder(), 4.0, 10.0).unwrap();
        assert!((p.v - 2.1439).abs() < 1e-3, "V {}", p.v);
        assert!((p.gamma_p - 2.5433).abs() < 1e-3, "gamma_p {}", p.gamma_p);
    }

    #[test]
    fn bola_spans_the_ladder_across_the_buffer_range() {
        let l = ladder();
        let p = BolaParams::derive(&l, 4.0, 10.0).unwrap();
        assert_eq!(bola_decide(&obs(0.0, &[]), &p, &l).tier, 0);
        assert_eq!(bola_decide(&obs(10.0, &[]), &p, &l).tier, 5, "top pair ties at b_max");
        let mut prev = 0;
        for i in 0..=100 {
            let t = bola_decide(&obs(0.1 * i as f64, &[]), &p, &l).tier;
            assert!(t >= prev, "BOLA must be monotone in buffer");
            prev = t;
        }
        assert_eq!(prev, 5);
    }

    #[test]
    fn bola_ignores_throughput_history() {
        let l = ladder();
        let p = BolaParams::derive(&l, 4.0, 10.0).unwrap();
        let mut rng = crate::rng::stream(19);
        for _ in 0..300 {
            let buffer = rng.random_range(0.0..10.0);
            let history: Vec<f64> =
                (0..rng.random_range(0..8)).map(|_| rng.random_range(0.1..50.0)).collect();
            let with = bola_decide(&obs(buffer, &history), &p, &l).tier;
            let without = bola_decide(&obs(buffer, &[]), &p, &l).tier;
            assert_eq!(with, without);
        }
    }

    #[test]
    fn bola_argmax_is_scale_invariant() {
        let l = ladder();
        let scaled = QualityLadder::uniform(
            l.rates().iter().map(|r| r * 3.0).collect(),
            32,
        )
        .unwrap();
        let p = BolaParams::derive(&l, 4.0, 10.0).unwrap();
        for i in 0..=20 {
            let b = 0.5 * i as f64;
            assert_eq!(
                bola_decide(&obs(b, &[]), &p, &l).tier,
                bola_decide(&obs(b, &[]), &p, &scaled).tier
            );
        }
    }

    #[test]
    fn mpc_limit_cases() {
        let l = ladder();
        let rich = MpcParams { horizon: 1, ..MpcParams::default() };
        let mut o = obs(10.0, &[1000.0; 5]);
        o.last_tier = 5;
        let d = mpc_decide(&o, &rich, &l).unwrap();
        assert_eq!(d.tier, 5, "no reason to leave the top tier");
        let d = mpc_decide(&obs(10.0, &[1000.0; 5]), &rich, &l).unwrap();
        assert_eq!(d.tier, 1, "switch penalty tempers the first step up");
        let starved = MpcParams::default();
        let d = mpc_decide(&obs(0.01, &[0.5; 5]), &starved, &l).unwrap();
        assert_eq!(d.tier, 0, "stall domination forces the base tier");
    }

    #[test]
    fn mpc_rejects_horizon_out_of_bounds() {
        let l = ladder();
        let bad = MpcParams { horizon: 0, ..MpcParams::default() };
        assert!(mpc_decide(&obs(5.0, &[]), &bad, &l).is_err());
        let bad = MpcParams { horizon: 9, ..MpcParams::default() };
        assert!(mpc_decide(&obs(5.0, &[]), &bad, &l).is_err());
    }

    #[test]
    fn robust_prediction_never_exceeds_fast() {
        let l = ladder();
        let mut rng = crate::rng::stream(23);
        for _ in 0..500 {
            let history: Vec<f64> = (0..5).map(|_| rng.random_range(0.5..40.0)).collect();
            let fast = mpc_predict_throughput(&history, 5, MpcVariant::Fast, &l);
            let robust = mpc_predict_throughput(&history, 5, MpcVariant::Robust, &l);
            assert!(robust <= fast + 1e-12);
        }
        assert_eq!(mpc_predict_throughput(&[], 5, MpcVariant::Fast, &l), 1.2);
    }

    #[test]
    fn mpc_fast_at_least_as_aggressive_as_robust() {
        let l = ladder();
        let mut rng = crate::rng::stream(29);
        for _ in 0..200 {
            let o = obs(
                rng.random_range(0.0..10.0),
                &(0..5).map(|_| rng.random_range(0.5..40.0)).collect::<Vec<_>>(),
            );
            let fast = mpc_decide(&o, &MpcParams::default(), &l).unwrap().tier;
            let robust_params =
                MpcParams { variant: MpcVariant::Robust, ..MpcParams::default() };
            let robust = mpc_decide(&o, &robust_params, &l).unwrap().tier;
            assert!(fast >= robust, "fast {fast} robust {robust}");
        }
    }

    /// Independent recursive oracle for the exhaustive search.
    fn mpc_oracle(
        buffer: f64,
        r_prev: f64,
        depth: usize,
        predicted: f64,
        params: &MpcParams<f64>,
        ladder: &QualityLadder<f64>,
    ) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for q in 0..ladder.tier_count() {
            let r = ladder.rate(q);
            let download = r * params.segment_s / predicted;
            let stall = (download - buffer).max(0.0);
            let next = ((buffer - download).max(0.0) + params.segment_s).min(params.b_max);
            let step = (r / params.qoe.r_min).ln()
                - params.qoe.mu * stall
                - params.qoe.lambda * (r - r_prev).abs();
            let total = if depth == 1 {
                step
            } else {
                step + mpc_oracle(next, r, depth - 1, predicted, params, ladder).0
            };
            if total > best.0 {
                best = (total, q);
            }
        }
        best
    }

    #[test]
    fn mpc_matches_the_recursive_oracle() {
        let small = QualityLadder::uniform(vec![1.2, 5.0, 20.0], 32).unwrap();
        let mut rng = crate::rng::stream(31);
        for _ in 0..200 {
            let horizon = rng.random_range(1..=3);
            let o = obs(
                rng.random_range(0.0..10.0),
                &(0..rng.random_range(0..6))
                    .map(|_| rng.random_range(0.5..40.0))
                    .collect::<Vec<_>>(),
            );
            let params = MpcParams { horizon, ..MpcParams::default() };
            let got = mpc_decide(&o, &params, &small).unwrap().tier;
            let predicted =
                mpc_predict_throughput(&o.throughput_history, 5, MpcVariant::Fast, &small);
            let last_rate = small.rate(o.last_tier);
            let want = mpc_oracle(o.buffer_s, last_rate, horizon, predicted, &params, &small).1;
            assert_eq!(got, want);
        }
    }

    #[test]
    fn all_policies_stay_inside_the_ladder() {
        let l = ladder();
        let bola = BolaParams::derive(&l, 4.0, 10.0).unwrap();
        let mut rng = crate::rng::stream(37);
        for _ in 0..300 {
            let o = obs(
                rng.random_range(0.0..10.0),
                &(0..rng.random_range(0..10))
                    .map(|_| rng.random_range(0.05..80.0))
                    .collect::<Vec<_>>(),
            );
            let tiers = [
                buffer_based_decide(&o, 2.0, 6.0, &l).tier,
                rate_based_decide(&o, 5, &l).tier,
                bola_decide(&o, &bola, &l).tier,
                mpc_decide(&o, &MpcParams::default(), &l).unwrap().tier,
            ];
            assert!(tiers.iter().all(|&t| t < l.tier_count()), "{tiers:?}");
        }
    }

    fn pan_history(rate: f64, n: usize, dt: f64) -> Vec<(f64, SphericalCoord<f64>)> {
        (0..n)
            .map(|i| {
                let t = dt * i as f64;
                (t, SphericalCoord::new(wrap_theta(rate * t), 0.0))
            })
            .collect()
    }

    #[test]
    fn extrapolation_is_exact_on_linear_pans() {
        let grid = TileGrid::default();
        let history = pan_history(0.5, 11, 0.1);
        let t_end = 1.0;
        let (center, probs, tiles) =
            extrapolate_viewport(&history, 2.0, 1.0, grid, 80.0).unwrap();
        assert!((center.theta - (0.5 * t_end + 1.0)).abs() < 1e-9, "{}", center.theta);
        assert!(center.phi.abs() < 1e-12);
        assert!(!tiles.is_empty());
        let inside = *tiles.iter().next().unwrap();
        assert!(probs.as_slice()[inside] > 0.0);
        let outside = (0..32).find(|i| !tiles.contains(i)).unwrap();
        assert_eq!(probs.as_slice()[outside], 0.0);
    }

    #[test]
    fn extrapolation_holds_with_sparse_history() {
        let grid = TileGrid::default();
        let history = vec![(0.0, SphericalCoord::new(1.0, 0.3))];
        let (center, _, _) = extrapolate_viewport(&history, 2.0, 1.0, grid, 80.0).unwrap();
        assert_eq!(center.theta, 1.0);
        assert_eq!(center.phi, 0.3);
        assert!(extrapolate_viewport::<f64>(&[], 2.0, 1.0, grid, 80.0).is_err());
    }

    #[test]
    fn extrapolation_crosses_the_seam_smoothly() {
        let grid = TileGrid::default();
        // Yaw ramps through pi; wrapped samples jump, the fit must not.
        let history: Vec<(f64, SphericalCoord<f64>)> = (0..11)
            .map(|i| {
                let t = 0.1 * i as f64;
                (t, SphericalCoord::new(wrap_theta(3.0 + 0.5 * t), 0.0))
            })
            .collect();
        let (center, _, _) = extrapolate_viewport(&history, 2.0, 1.0, grid, 80.0).unwrap();
        let expect = wrap_theta(3.0 + 0.5 * 3.0);
        assert!((center.theta - expect).abs() < 1e-9, "{} vs {expect}", center.theta);
    }

    #[test]
    fn extrapolation_clamps_pitch() {
        let grid = TileGrid::default();
        let history: Vec<(f64, SphericalCoord<f64>)> = (0..11)
            .map(|i| {
                let t = 0.1 * i as f64;
                (t, SphericalCoord::new(0.0, 1.2 * t))
            })
            .collect();
        let (center, _, _) = extrapolate_viewport(&history, 2.0, 1.0, grid, 80.0).unwrap();
        assert_eq!(center.phi, std::f64::consts::FRAC_PI_2);
    }
}

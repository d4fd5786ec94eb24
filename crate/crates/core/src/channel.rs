//! Piecewise-constant capacity traces, wall-clock delivery integration, the
//! windowed throughput estimator, and synthetic trace generators.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::scalar::Scalar;

/// Smallest admissible capacity; non-positive trace samples are raised here.
pub const CAPACITY_FLOOR: f64 = 0.01;

/// Per-run trace scaling: a global derating times one clipped Gaussian draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams<T> {
    pub global_scale: T,
    pub per_run_mean: T,
    pub per_run_std: T,
    pub clip_min: T,
    pub clip_max: T,
}

impl<T: Scalar> Default for ScalingParams<T> {
    fn default() -> Self {
        Self {
            global_scale: T::from_f64_lossy(0.6),
            per_run_mean: T::one(),
            per_run_std: T::from_f64_lossy(0.15),
            clip_min: T::from_f64_lossy(0.5),
            clip_max: T::from_f64_lossy(2.0),
        }
    }
}

/// Broad category of a bundled trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Mobile,
    Broadband,
    Synthetic,
}

/// A capacity trace with its catalog identity.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTrace<T> {
    pub name: String,
    pub kind: TraceKind,
    pub trace: CapacityTrace<T>,
}

/// Piecewise-constant capacity over time, repeating with a fixed period.
///
/// Points are `(t_sec, capacity_mbps)` with the first timestamp at zero and
/// strictly ascending times. The period extends the last point by the gap
/// between the final two timestamps, so evenly spaced traces loop seamlessly.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityTrace<T> {
    points: Vec<(T, T)>,
    span: T,
}

impl<T: Scalar> CapacityTrace<T> {
    pub fn new(points: Vec<(T, T)>) -> Result<Self, ChannelError> {
        let span = if points.len() >= 2 {
            let last = points[points.len() - 1].0;
            let prev = points[points.len() - 2].0;
            last + (last - prev)
        } else {
            T::one()
        };
        Self::with_span(points, span)
    }

    /// Like [`CapacityTrace::new`] but with an explicit repetition period,
    /// for irregularly sampled traces.
    pub fn with_span(points: Vec<(T, T)>, span: T) -> Result<Self, ChannelError> {
        if points.is_empty() {
            return Err(ChannelError::InvalidTrace("empty trace".into()));
        }
        if points[0].0 != T::zero() {
            return Err(ChannelError::InvalidTrace(format!(
                "first timestamp must be 0, got {}",
                points[0].0
            )));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ChannelError::InvalidTrace(
                "timestamps must strictly ascend".into(),
            ));
        }
        for &(t, c) in &points {
            if !t.is_finite() || !c.is_finite() || !(c > T::zero()) {
                return Err(ChannelError::InvalidTrace(format!(
                    "capacity must be positive and finite, got {c} at t={t}"
                )));
            }
        }
        if !(span > points[points.len() - 1].0) || !span.is_finite() {
            return Err(ChannelError::InvalidTrace(format!(
                "span {span} must exceed the last timestamp"
            )));
        }
        Ok(Self { points, span })
    }

    /// Constant-capacity trace.
    pub fn constant(capacity: T) -> Result<Self, ChannelError> {
        Self::new(vec![(T::zero(), capacity)])
    }

    /// Repetition period in seconds.
    pub fn span(&self) -> T {
        self.span
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    /// Capacity at wall time `t`, wrapping past the span.
    pub fn capacity_at(&self, t: T) -> T {
        let local = self.wrap(t);
        let idx = self.points.partition_point(|&(pt, _)| pt <= local);
        self.points[idx.saturating_sub(1)].1
    }

    fn wrap(&self, t: T) -> T {
        let mut local = t % self.span;
        if local < T::zero() {
            local = local + self.span;
        }
        local
    }

    /// Megabits deliverable over the wall-clock window `[t0, t1)`.
    pub fn integrate(&self, t0: T, t1: T) -> T {
        if t1 <= t0 {
            return T::zero();
        }
        let mut acc = T::zero();
        let mut t = t0;
        while t < t1 {
            let (seg_end, c) = self.segment_at(t);
            let step = seg_end.min(t1);
            acc = acc + c * (step - t);
            t = step;
        }
        acc
    }

    /// Wall-clock seconds to deliver `megabits` starting at `t0`.
    pub fn time_to_deliver(&self, megabits: T, t0: T) -> T {
        if megabits <= T::zero() {
            return T::zero();
        }
        let mut remaining = megabits;
        let mut t = t0;
        loop {
            let (seg_end, c) = self.segment_at(t);
            let seg_bits = c * (seg_end - t);
            if seg_bits >= remaining {
                return t + remaining / c - t0;
            }
            remaining = remaining - seg_bits;
            t = seg_end;
        }
    }

    /// Returns the absolute end time of the constant segment containing `t`
    /// and its capacity.
    fn segment_at(&self, t: T) -> (T, T) {
        let local = self.wrap(t);
        let idx = self
            .points
            .partition_point(|&(pt, _)| pt <= local)
            .saturating_sub(1);
        let c = self.points[idx].1;
        let local_end = if idx + 1 < self.points.len() {
            self.points[idx + 1].0
        } else {
            self.span
        };
        (t + (local_end - local), c)
    }

    /// New trace with every capacity multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self, ChannelError> {
        if !(factor > T::zero()) || !factor.is_finite() {
            return Err(ChannelError::InvalidTrace(format!(
                "scale factor must be positive and finite, got {factor}"
            )));
        }
        Self::new(self.points.iter().map(|&(t, c)| (t, c * factor)).collect())
    }

    /// Parses `t_sec,mbps` CSV. A header on the first line, blank lines, and
    /// `#` comments are skipped; non-positive capacities are floored to
    /// 0.01 Mbps with a warning.
    pub fn parse_csv(input: &str) -> Result<Self, ChannelError> {
        let mut points = Vec::new();
        for (line_no, raw) in input.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line_no == 0 && line.chars().any(|c| c.is_ascii_alphabetic()) {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |field: Option<&str>, name: &str| -> Result<f64, ChannelError> {
                let text = field
                    .ok_or_else(|| ChannelError::Parse {
                        line: line_no + 1,
                        message: format!("missing {name}"),
                    })?
                    .trim();
                text.parse().map_err(|_| ChannelError::Parse {
                    line: line_no + 1,
                    message: format!("bad {name} value {text:?}"),
                })
            };
            let t = parse(fields.next(), "t_sec")?;
            let mut c = parse(fields.next(), "mbps")?;
            if fields.next().is_some() {
                return Err(ChannelError::Parse {
                    line: line_no + 1,
                    message: "expected 2 fields".into(),
                });
            }
            if c <= 0.0 {
                log::warn!("line {}: capacity {c} floored to {CAPACITY_FLOOR}", line_no + 1);
                c = CAPACITY_FLOOR;
            }
            points.push((T::from_f64_lossy(t), T::from_f64_lossy(c)));
        }
        Self::new(points)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_sec,mbps\n");
        for &(t, c) in &self.points {
            out.push_str(&format!("{},{}\n", t.to_f64_lossy(), c.to_f64_lossy()));
        }
        out
    }

    /// Mean and population standard deviation of the sample capacities.
    pub fn stats(&self) -> (T, T) {
        let n = T::from_f64_lossy(self.points.len() as f64);
        let mean: T = self.points.iter().map(|&(_, c)| c).sum::<T>() / n;
        let var: T = self
            .points
            .iter()
            .map(|&(_, c)| (c - mean) * (c - mean))
            .sum::<T>()
            / n;
        (mean, var.sqrt())
    }
}

/// A trace bound to its per-run scale; what the engine and estimator see.
#[derive(Debug, Clone)]
pub struct Channel<T> {
    trace: CapacityTrace<T>,
    scale: T,
}

impl<T: Scalar> Channel<T> {
    pub fn new(trace: CapacityTrace<T>, scale: T) -> Result<Self, ChannelError> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(ChannelError::InvalidTrace(format!(
                "channel scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self { trace, scale })
    }

    pub fn capacity_at(&self, t: T) -> T {
        self.trace.capacity_at(t) * self.scale
    }

    pub fn integrate(&self, t0: T, t1: T) -> T {
        self.trace.integrate(t0, t1) * self.scale
    }

    pub fn time_to_deliver(&self, megabits: T, t0: T) -> T {
        self.trace.time_to_deliver(megabits / self.scale, t0)
    }

    pub fn scale(&self) -> T {
        self.scale
    }
}

/// Draws the per-run capacity scale: one clipped Gaussian sample times the
/// global derating.
pub fn draw_run_scale<T: Scalar, R: Rng + ?Sized>(
    params: &ScalingParams<T>,
    rng: &mut R,
) -> T {
    let s = params.per_run_mean + params.per_run_std * T::sample_std_normal(rng);
    s.max(params.clip_min).min(params.clip_max) * params.global_scale
}

/// Throughput estimator: harmonic mean of recent fixed-width slots plus
/// bounded uniform noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorParams<T> {
    /// Lookback window in seconds.
    pub window_s: T,
    /// Slot width in seconds.
    pub slot_s: T,
    /// Noise half-width as a fraction of the harmonic base.
    pub noise_frac: T,
    /// Absolute cap on the noise half-width, Mbps.
    pub noise_cap: T,
    /// Lower bound on the returned estimate, Mbps.
    pub floor: T,
}

impl<T: Scalar> Default for EstimatorParams<T> {
    fn default() -> Self {
        Self {
            window_s: T::from_f64_lossy(6.0),
            slot_s: T::from_f64_lossy(2.0),
            noise_frac: T::from_f64_lossy(0.2),
            noise_cap: T::from_f64_lossy(2.0),
            floor: T::from_f64_lossy(0.01),
        }
    }
}

/// Noise-free harmonic base: slots are aligned to end at `t` and clipped to
/// `[0, t)`; each slot contributes its mean delivered capacity. Before any
/// history exists the instantaneous capacity at zero stands in.
pub fn estimate_base<T: Scalar>(
    channel: &Channel<T>,
    t: T,
    params: &EstimatorParams<T>,
) -> T {
    if t <= T::zero() {
        return channel.capacity_at(T::zero());
    }
    let window_start = (t - params.window_s).max(T::zero());
    let mut slot_means = Vec::new();
    let mut slot_end = t;
    while slot_end > window_start {
        let slot_start = (slot_end - params.slot_s).max(window_start);
        let width = slot_end - slot_start;
        if width > T::zero() {
            slot_means.push(channel.integrate(slot_start, slot_end) / width);
        }
        slot_end = slot_start;
    }
    harmonic_mean(&slot_means).unwrap_or_else(|| channel.capacity_at(T::zero()))
}

/// Full estimate: harmonic base plus uniform noise in `[-e, e]` with
/// `e = min(noise_cap, noise_frac * base)`, floored at `params.floor`.
/// Consumes exactly one uniform draw per call.
pub fn estimate_capacity<T: Scalar, R: Rng + ?Sized>(
    channel: &Channel<T>,
    t: T,
    params: &EstimatorParams<T>,
    rng: &mut R,
) -> T {
    let base = estimate_base(channel, t, params);
    let half_width = params.noise_cap.min(params.noise_frac * base);
    let two = T::from_f64_lossy(2.0);
    let noise = (T::sample_unit(rng) * two - T::one()) * half_width;
    (base + noise).max(params.floor)
}

/// Harmonic mean; `None` for an empty slice or any non-positive entry.
pub fn harmonic_mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() || values.iter().any(|&v| !(v > T::zero())) {
        return None;
    }
    let inv_sum: T = values.iter().map(|&v| T::one() / v).sum();
    Some(T::from_f64_lossy(values.len() as f64) / inv_sum)
}

/// First-order autoregressive trace renormalized to the target mean and
/// standard deviation, then floored.
pub fn ar1_trace<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    dt: T,
    a: T,
    mean: T,
    std: T,
    floor: T,
    rng: &mut R,
) -> Result<CapacityTrace<T>, ChannelError> {
    if n < 2 {
        return Err(ChannelError::InvalidTrace(
            "generated traces need at least 2 points".into(),
        ));
    }
    let mut raw = Vec::with_capacity(n);
    let mut x = T::zero();
    for _ in 0..n {
        x = a * x + T::sample_std_normal(rng);
        raw.push(x);
    }
    let series = renormalize(&raw, mean, std, floor);
    CapacityTrace::new(
        series
            .into_iter()
            .enumerate()
            .map(|(i, c)| (dt * T::from_f64_lossy(i as f64), c))
            .collect(),
    )
}

/// Independent Gaussian trace around `mean` with the given spread, floored.
pub fn normal_trace<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    dt: T,
    mean: T,
    std: T,
    floor: T,
    rng: &mut R,
) -> Result<CapacityTrace<T>, ChannelError> {
    if n < 2 {
        return Err(ChannelError::InvalidTrace(
            "generated traces need at least 2 points".into(),
        ));
    }
    let dist = Normal::new(mean.to_f64_lossy(), std.to_f64_lossy())
        .map_err(|e| ChannelError::InvalidTrace(e.to_string()))?;
    CapacityTrace::new(
        (0..n)
            .map(|i| {
                let c = T::from_f64_lossy(dist.sample(rng)).max(floor);
                (dt * T::from_f64_lossy(i as f64), c)
            })
            .collect(),
    )
}

/// Two-level trace switching from `high` to `low` at `t_switch`, repeating
/// every `duration` seconds.
pub fn stress_step<T: Scalar>(
    high: T,
    low: T,
    t_switch: T,
    duration: T,
) -> Result<CapacityTrace<T>, ChannelError> {
    CapacityTrace::with_span(vec![(T::zero(), high), (t_switch, low)], duration)
}

/// Linear capacity ramp from `start` to `end` across `duration`, sampled
/// every `dt` seconds. Equal endpoints degenerate to a constant trace.
pub fn stress_fade<T: Scalar>(
    start: T,
    end: T,
    duration: T,
    dt: T,
) -> Result<CapacityTrace<T>, ChannelError> {
    if !(dt > T::zero()) || !(duration > dt) {
        return Err(ChannelError::InvalidTrace(
            "fade needs 0 < dt < duration".into(),
        ));
    }
    let mut points = Vec::new();
    let mut t = T::zero();
    while t < duration {
        points.push((t, start + (end - start) * (t / duration)));
        t = t + dt;
    }
    CapacityTrace::with_span(points, duration)
}

/// Capacity drop to `low` over `[t0, t1)`, back to `normal` elsewhere,
/// repeating every `duration` seconds.
pub fn stress_collapse<T: Scalar>(
    normal: T,
    low: T,
    t0: T,
    t1: T,
    duration: T,
) -> Result<CapacityTrace<T>, ChannelError> {
    if !(T::zero() < t0 && t0 < t1 && t1 < duration) {
        return Err(ChannelError::InvalidTrace(
            "collapse needs 0 < t0 < t1 < duration".into(),
        ));
    }
    CapacityTrace::with_span(
        vec![(T::zero(), normal), (t0, low), (t1, normal)],
        duration,
    )
}

fn renormalize<T: Scalar>(raw: &[T], mean: T, std: T, floor: T) -> Vec<T> {
    let n = T::from_f64_lossy(raw.len() as f64);
    let m: T = raw.iter().copied().sum::<T>() / n;
    let var: T = raw.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n;
    let s = var.sqrt();
    raw.iter()
        .map(|&x| {
            let z = if s > T::zero() { (x - m) / s } else { T::zero() };
            (mean + std * z).max(floor)
        })
        .collect()
}

/// Channel-layer failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("invalid capacity trace: {0}")]
    InvalidTrace(String),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn two_step() -> CapacityTrace<f64> {
        // 4 Mbps on [0, 2), 2 Mbps on [2, 4); span 4.
        CapacityTrace::new(vec![(0.0, 4.0), (2.0, 2.0)]).unwrap()
    }

    #[test]
    fn constant_trace_basics() {
        let tr = CapacityTrace::constant(5.0f64).unwrap();
        assert_eq!(tr.capacity_at(0.0), 5.0);
        assert_eq!(tr.capacity_at(123.4), 5.0);
        assert!((tr.integrate(1.0, 4.0) - 15.0).abs() < 1e-12);
        assert!((tr.time_to_deliver(10.0, 7.0) - 2.0).abs() < 1e-12);
        assert_eq!(tr.time_to_deliver(0.0, 0.0), 0.0);
    }

    #[test]
    fn trace_validation() {
        assert!(CapacityTrace::<f64>::new(vec![]).is_err());
        assert!(CapacityTrace::new(vec![(1.0, 5.0)]).is_err());
        assert!(CapacityTrace::new(vec![(0.0, 5.0), (0.0, 4.0)]).is_err());
        assert!(CapacityTrace::new(vec![(0.0, 5.0), (2.0, 0.0)]).is_err());
        assert!(CapacityTrace::new(vec![(0.0, -1.0)]).is_err());
    }

    #[test]
    fn span_extends_the_last_gap() {
        let tr = CapacityTrace::new(vec![(0.0, 1.0), (4.0, 2.0)]).unwrap();
        assert_eq!(tr.span(), 8.0);
        assert_eq!(tr.capacity_at(7.9), 2.0);
        assert_eq!(tr.capacity_at(8.0), 1.0, "wraps at the span");
        assert_eq!(tr.capacity_at(12.0), 2.0);
    }

    #[test]
    fn lookup_is_left_inclusive() {
        let tr = two_step();
        assert_eq!(tr.capacity_at(0.0), 4.0);
        assert_eq!(tr.capacity_at(1.999), 4.0);
        assert_eq!(tr.capacity_at(2.0), 2.0);
        assert_eq!(tr.capacity_at(3.999), 2.0);
        assert_eq!(tr.capacity_at(4.0), 4.0);
    }

    #[test]
    fn integration_crosses_segments_and_wraps() {
        let tr = two_step();
        assert!((tr.integrate(0.0, 4.0) - 12.0).abs() < 1e-12);
        assert!((tr.integrate(1.0, 3.0) - 6.0).abs() < 1e-12);
        assert!((tr.integrate(3.0, 5.0) - 6.0).abs() < 1e-12, "wrap boundary");
        assert!((tr.integrate(0.0, 8.0) - 24.0).abs() < 1e-12, "full double span");
        assert_eq!(tr.integrate(3.0, 3.0), 0.0);
    }

    #[test]
    fn delivery_time_inverts_integration() {
        let tr = two_step();
        // 12 Mb from t=0: 8 Mb in the first 2 s, then 4 Mb at 2 Mbps.
        assert!((tr.time_to_deliver(12.0, 0.0) - 4.0).abs() < 1e-12);
        let mut rng = stream(11);
        use rand::Rng;
        for _ in 0..300 {
            let t0 = rng.random_range(0.0..20.0);
            let bits = rng.random_range(0.01..100.0);
            let d = tr.time_to_deliver(bits, t0);
            let back = tr.integrate(t0, t0 + d);
            assert!(
                (back - bits).abs() < 1e-9,
                "integrate(t0, t0+d) = {back}, wanted {bits}"
            );
        }
    }

    #[test]
    fn scaling_multiplies_capacity() {
        let tr = two_step().scaled(0.5).unwrap();
        assert_eq!(tr.capacity_at(0.0), 2.0);
        assert!(two_step().scaled(0.0).is_err());
    }

    #[test]
    fn channel_applies_its_scale_consistently() {
        let ch = Channel::new(two_step(), 0.5).unwrap();
        assert_eq!(ch.capacity_at(0.0), 2.0);
        assert!((ch.integrate(0.0, 4.0) - 6.0).abs() < 1e-12);
        // 6 Mb at half scale is the same wall time as 12 Mb unscaled.
        assert!((ch.time_to_deliver(6.0, 0.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let tr = two_step();
        let parsed = CapacityTrace::parse_csv(&tr.to_csv()).unwrap();
        assert_eq!(parsed, tr);
        assert!(CapacityTrace::<f64>::parse_csv("t_sec,mbps\n").is_err());
        let bad = CapacityTrace::<f64>::parse_csv("t_sec,mbps\n0.0,abc\n");
        match bad {
            Err(ChannelError::Parse { line: 2, .. }) => {}
            other => panic!("expected parse error on line 2, got {other:?}"),
        }
    }

    #[test]
    fn run_scale_stays_clipped() {
        let params = ScalingParams::<f64>::default();
        let mut rng = stream(21);
        let mut sum = 0.0;
        let n = 4000;
        for _ in 0..n {
            let s: f64 = draw_run_scale(&params, &mut rng);
            let unscaled = s / params.global_scale;
            assert!(
                (params.clip_min..=params.clip_max).contains(&unscaled),
                "{unscaled}"
            );
            sum += unscaled;
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean scale {mean}");
    }

    #[test]
    fn csv_floors_non_positive_capacity() {
        let tr = CapacityTrace::<f64>::parse_csv("t_sec,mbps\n0,10\n5,0\n").unwrap();
        assert_eq!(tr.capacity_at(5.0), CAPACITY_FLOOR);
        assert_eq!(tr.capacity_at(0.0), 10.0);
    }

    #[test]
    fn stress_traces_have_the_documented_shape() {
        let step = stress_step(20.0, 5.0, 50.0, 100.0).unwrap();
        assert_eq!(step.span(), 100.0);
        assert_eq!(step.capacity_at(49.9), 20.0);
        assert_eq!(step.capacity_at(50.0), 5.0);
        assert_eq!(step.capacity_at(100.0), 20.0);

        let collapse = stress_collapse(20.0, 0.5, 40.0, 50.0, 100.0).unwrap();
        let min = (0..200)
            .map(|i| collapse.capacity_at(0.5 * i as f64))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, 0.5);

        let flat = stress_fade(20.0, 20.0, 100.0, 2.0).unwrap();
        assert!((0..100).all(|i| flat.capacity_at(i as f64) == 20.0));
        let fade = stress_fade(20.0, 4.0, 100.0, 2.0).unwrap();
        assert!(fade.capacity_at(2.0) > fade.capacity_at(96.0));
        assert!(stress_fade(1.0, 2.0, 1.0, 2.0).is_err());
        assert!(stress_collapse(1.0, 0.5, 60.0, 50.0, 100.0).is_err());
    }

    #[test]
    fn stats_match_hand_computation() {
        let tr = CapacityTrace::new(vec![(0.0f64, 2.0), (1.0, 4.0), (2.0, 6.0)]).unwrap();
        let (mean, std) = tr.stats();
        assert!((mean - 4.0).abs() < 1e-12);
        assert!((std - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_mean_matches_hand_values() {
        assert_eq!(harmonic_mean(&[4.0_f64, 4.0, 1.0]), Some(2.0));
        assert_eq!(harmonic_mean(&[7.0_f64]), Some(7.0));
        assert_eq!(harmonic_mean::<f64>(&[]), None);
        assert_eq!(harmonic_mean(&[1.0_f64, 0.0]), None);
    }

    #[test]
    fn base_estimate_is_the_slot_harmonic_mean() {
        // Slots ending at t=6 see means 4, 2, 4 (wrapped); harmonic 3.
        let ch = Channel::new(two_step(), 1.0).unwrap();
        let params = EstimatorParams::default();
        let base = estimate_base(&ch, 6.0, &params);
        let expect = harmonic_mean(&[4.0, 2.0, 4.0]).unwrap();
        assert!((base - expect).abs() < 1e-12, "base {base}");
    }

    #[test]
    fn base_estimate_handles_short_history() {
        let ch = Channel::new(two_step(), 1.0).unwrap();
        let params = EstimatorParams::default();
        assert_eq!(estimate_base(&ch, 0.0, &params), 4.0);
        assert!((estimate_base(&ch, 2.0, &params) - 4.0).abs() < 1e-12);
        // [0,3) splits into [1,3) mean 3 and [0,1) mean 4.
        let expect = harmonic_mean(&[3.0, 4.0]).unwrap();
        assert!((estimate_base(&ch, 3.0, &params) - expect).abs() < 1e-12);
    }

    #[test]
    fn estimate_noise_stays_bounded() {
        let ch = Channel::new(CapacityTrace::constant(6.0f64).unwrap(), 1.0).unwrap();
        let params = EstimatorParams::default();
        let mut rng = stream(31);
        let base = estimate_base(&ch, 50.0, &params);
        let bound = params.noise_cap.min(params.noise_frac * base);
        for _ in 0..10_000 {
            let est = estimate_capacity(&ch, 50.0, &params, &mut rng);
            assert!((est - base).abs() <= bound + 1e-12, "est {est} base {base}");
            assert!(est >= params.floor);
        }
    }

    #[test]
    fn estimate_floor_holds_for_tiny_channels() {
        let ch = Channel::new(CapacityTrace::constant(0.02).unwrap(), 1.0).unwrap();
        let params = EstimatorParams::default();
        let mut rng = stream(41);
        for _ in 0..2000 {
            let est = estimate_capacity(&ch, 10.0, &params, &mut rng);
            assert!(est >= params.floor, "est {est}");
        }
    }

    #[test]
    fn ar1_trace_matches_target_statistics() {
        let mut rng = stream(51);
        let tr = ar1_trace(1000, 2.0, 0.95, 6.8, 3.2, 0.3, &mut rng).unwrap();
        let caps: Vec<f64> = tr.points().iter().map(|&(_, c)| c).collect();
        let n = caps.len() as f64;
        let mean = caps.iter().sum::<f64>() / n;
        let std = (caps.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(caps.iter().all(|&c| c >= 0.3));
        assert!((mean - 6.8).abs() < 0.5, "mean {mean}");
        assert!((std - 3.2).abs() < 0.6, "std {std}");
    }

    #[test]
    fn generated_traces_are_seed_deterministic() {
        let a = ar1_trace::<f64, _>(60, 2.0, 0.95, 6.8, 3.2, 0.3, &mut stream(7)).unwrap();
        let b = ar1_trace::<f64, _>(60, 2.0, 0.95, 6.8, 3.2, 0.3, &mut stream(7)).unwrap();
        assert_eq!(a, b);
        let c = ar1_trace::<f64, _>(60, 2.0, 0.95, 6.8, 3.2, 0.3, &mut stream(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn normal_trace_centers_on_its_mean() {
        let mut rng = stream(61);
        let tr = normal_trace(1000, 2.0, 25.0, 1.2, 0.3, &mut rng).unwrap();
        let caps: Vec<f64> = tr.points().iter().map(|&(_, c)| c).collect();
        let mean = caps.iter().sum::<f64>() / caps.len() as f64;
        assert!((mean - 25.0).abs() < 0.2, "mean {mean}");
    }
}

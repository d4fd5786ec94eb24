//! Chunk-level streaming loop and Monte Carlo harness: download timing,
//! buffer fluid dynamics, stall accounting, viewport prediction plumbing,
//! and per-run record keeping.

use std::time::Instant;

use rayon::prelude::*;

use crate::abr::{
    bola_decide, buffer_based_decide, extrapolate_viewport, mpc_decide, rate_based_decide,
    AbrObservation, BolaParams, MpcParams, MpcVariant, PolicyError,
};
use crate::channel::{
    draw_run_scale, estimate_capacity, CapacityTrace, Channel, ChannelError, EstimatorParams,
    NamedTrace, ScalingParams,
};
use crate::controller::{
    allocate_tiles, decide, ControllerError, ControllerParams, ControllerState, QualityLadder,
    TileAllocation,
};
use crate::field::{
    predict_viewport, step_gaze, FieldError, FieldParams, GazeState, Prediction, ProbabilityMap,
};
use crate::metrics::{
    aggregate_metrics, count_switches, dominant_tier, hit_ratio, mean, population_std, qoe_chunk,
    McSummary, MetricsError, QoeBreakdown, QoeParams, RunStats,
};
use crate::rng::{child_seed, stream};
use crate::scalar::Scalar;
use crate::scene::{
    dropout_state, MassTable, PathSpec, SceneError, SceneScript, SceneState,
};
use crate::sphere::{tile_set_iou, viewport_tiles, SphericalCoord, TileGrid, TileSet, Viewport};

/// Player and content parameters shared by every run.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoConfig<T> {
    /// Segment duration in seconds.
    pub segment_s: T,
    pub grid: TileGrid,
    pub ladder: QualityLadder<T>,
    pub fps: u32,
    /// Total playback duration in seconds; must be a whole number of segments.
    pub duration_s: T,
    /// Viewport field of view in degrees.
    pub fov_deg: T,
    /// Playback buffer capacity in seconds.
    pub b_max_s: T,
}

impl<T: Scalar> Default for VideoConfig<T> {
    fn default() -> Self {
        let grid = TileGrid::default();
        Self {
            segment_s: T::from_f64_lossy(2.0),
            grid,
            ladder: QualityLadder::default_tiers(grid.len()),
            fps: 30,
            duration_s: T::from_f64_lossy(100.0),
            fov_deg: T::from_f64_lossy(80.0),
            b_max_s: T::from_f64_lossy(10.0),
        }
    }
}

impl<T: Scalar> VideoConfig<T> {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.segment_s > T::zero()) {
            return Err(EngineError::InvalidConfig("segment must be positive".into()));
        }
        if self.duration_s < T::zero() {
            return Err(EngineError::InvalidConfig("duration must be non-negative".into()));
        }
        let ratio = (self.duration_s / self.segment_s).to_f64_lossy();
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(EngineError::InvalidConfig(format!(
                "duration {} is not a whole number of {}s segments",
                self.duration_s, self.segment_s
            )));
        }
        if self.grid.len() != self.ladder.tiles() {
            return Err(EngineError::InvalidConfig(format!(
                "grid has {} tiles, ladder expects {}",
                self.grid.len(),
                self.ladder.tiles()
            )));
        }
        if self.fps == 0 {
            return Err(EngineError::InvalidConfig("fps must be positive".into()));
        }
        if !(self.b_max_s > self.segment_s) {
            return Err(EngineError::InvalidConfig(
                "buffer capacity must exceed one segment".into(),
            ));
        }
        Ok(())
    }

    pub fn chunk_count(&self) -> usize {
        (self.duration_s / self.segment_s).to_f64_lossy().round() as usize
    }
}

/// Playback buffer with stall accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferState<T> {
    /// Seconds of video buffered, in `[0, b_max]`.
    pub level_s: T,
    pub b_max_s: T,
    pub total_stall_s: T,
    pub stall_events: usize,
}

impl<T: Scalar> BufferState<T> {
    pub fn new(level_s: T, b_max_s: T) -> Self {
        Self {
            level_s: level_s.max(T::zero()).min(b_max_s),
            b_max_s,
            total_stall_s: T::zero(),
            stall_events: 0,
        }
    }
}

/// Timing outcome of one chunk download.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvanceOutcome<T> {
    /// Seconds spent waiting for buffer headroom before the download.
    pub idle_s: T,
    pub download_s: T,
    /// Stall added by this chunk.
    pub stall_s: T,
    pub t_end: T,
}

/// Downloads one chunk starting at `t_start` and advances the buffer.
///
/// The player idles first if a finished segment would overflow the buffer,
/// then downloads for as long as the channel needs to deliver the bits.
/// Playback drains one second per second while the buffer is non-empty;
/// download time beyond the available buffer is a stall, counted as one
/// event. The finished segment is appended afterwards.
pub fn advance_buffer<T: Scalar>(
    buffer: &mut BufferState<T>,
    chunk_megabits: T,
    channel: &Channel<T>,
    segment_s: T,
    t_start: T,
) -> AdvanceOutcome<T> {
    assert!(chunk_megabits > T::zero(), "chunks carry positive payload");
    let headroom = buffer.b_max_s - segment_s;
    let idle_s = (buffer.level_s - headroom).max(T::zero());
    buffer.level_s = buffer.level_s - idle_s;
    let download_s = channel.time_to_deliver(chunk_megabits, t_start + idle_s);
    let stall_s = (download_s - buffer.level_s).max(T::zero());
    if stall_s > T::zero() {
        buffer.total_stall_s = buffer.total_stall_s + stall_s;
        buffer.stall_events += 1;
    }
    buffer.level_s = (buffer.level_s - download_s).max(T::zero()) + segment_s;
    buffer.level_s = buffer.level_s.min(buffer.b_max_s);
    AdvanceOutcome { idle_s, download_s, stall_s, t_end: t_start + idle_s + download_s }
}

/// The algorithm roster. Names double as CLI identifiers and seed tags.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Potential-field viewport prediction with the PD rate controller.
    #[serde(rename = "orbitstream")]
    OrbitStream,
    Bola,
    Buffer,
    Rate,
    MpcFast,
    MpcRobust,
    /// Trajectory-extrapolation viewport with throughput-driven rate control.
    FlareApprox,
    PanoApprox,
    /// Harmonic-mean MPC; identical mechanics to `MpcFast`, kept as its own
    /// reporting label.
    MpcHm,
    /// MPC with last-sample throughput prediction.
    Mpc,
    /// PD controller with a uniform tile map; isolates the controller from
    /// the predictor.
    PdUniform,
    /// PD controller fed by trajectory extrapolation instead of the field.
    ExtrapPd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 12] = [
        Algorithm::OrbitStream,
        Algorithm::Bola,
        Algorithm::Buffer,
        Algorithm::Rate,
        Algorithm::MpcFast,
        Algorithm::MpcRobust,
        Algorithm::FlareApprox,
        Algorithm::PanoApprox,
        Algorithm::MpcHm,
        Algorithm::Mpc,
        Algorithm::PdUniform,
        Algorithm::ExtrapPd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::OrbitStream => "orbitstream",
            Algorithm::Bola => "bola",
            Algorithm::Buffer => "buffer",
            Algorithm::Rate => "rate",
            Algorithm::MpcFast => "mpc-fast",
            Algorithm::MpcRobust => "mpc-robust",
            Algorithm::FlareApprox => "flare-approx",
            Algorithm::PanoApprox => "pano-approx",
            Algorithm::MpcHm => "mpc-hm",
            Algorithm::Mpc => "mpc",
            Algorithm::PdUniform => "pd-uniform",
            Algorithm::ExtrapPd => "extrap-pd",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| EngineError::InvalidConfig(format!("unknown algorithm {s:?}")))
    }
}

/// Ground-truth gaze model for a scenario.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GazeSource {
    /// Gaze follows the potential-field dynamics on the true scene.
    Field,
    /// Gaze follows a scripted path, independent of the scene.
    Scripted { path: PathSpec },
}

/// One evaluation scenario: a scene script plus the truth-gaze model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scenario {
    pub name: String,
    pub script: SceneScript,
    pub gaze: GazeSource,
}

/// Complete description of a single run; equal configs produce identical
/// results.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub algorithm: Algorithm,
    pub run_index: usize,
    pub seed: u64,
    pub video: VideoConfig<T>,
    /// Unscaled capacity trace; the per-run scale is drawn from `scaling`.
    pub network: CapacityTrace<T>,
    pub scenario: Scenario,
    pub controller: ControllerParams<T>,
    /// Predictor-side field parameters; ablations override these while the
    /// truth gaze always runs the baseline dynamics.
    pub field: FieldParams<T>,
    pub qoe: QoeParams<T>,
    pub estimator: EstimatorParams<T>,
    pub scaling: ScalingParams<T>,
    pub mpc_horizon: usize,
    /// Predictor sees all-equal masses when set; the truth scene keeps its own.
    pub predictor_flat_mass: bool,
    /// Per-object detection dropout probability on the predictor's scene view.
    pub dropout_p: f64,
}

/// Everything recorded about one chunk. Decision latency lives on the run,
/// not here, so records stay bit-identical across machines.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkRecord<T> {
    pub index: usize,
    /// Wall-clock time when the chunk's decision was made.
    pub t_start_s: T,
    /// Dominant tier of the allocation.
    pub tier: usize,
    pub tile_tiers: Vec<usize>,
    /// Aggregate delivered rate in Mbps.
    pub rate_mbps: T,
    /// Capacity estimate used by the decision; zero for policies that use none.
    pub c_hat_mbps: T,
    pub buffer_before_s: T,
    pub buffer_after_s: T,
    pub idle_s: T,
    pub download_s: T,
    pub stall_s: T,
    pub predicted_tiles: TileSet,
    pub truth_tiles: TileSet,
    pub iou: T,
    pub qoe: QoeBreakdown<T>,
}

/// Full output of one run.
#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub algorithm: Algorithm,
    pub run_index: usize,
    pub seed: u64,
    /// Channel scale drawn for this run.
    pub scale: T,
    pub initial_buffer_s: T,
    pub records: Vec<ChunkRecord<T>>,
    pub stats: RunStats<T>,
    /// Wall-clock decision latency per chunk in milliseconds. Measured, not
    /// simulated: excluded from determinism comparisons.
    pub latency_ms: Vec<f64>,
    /// Prediction incidents (for example field singularities) with the
    /// fallback taken.
    pub incidents: Vec<String>,
}

impl<T: Scalar> RunResult<T> {
    /// Equality over the deterministic portion of the result.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.algorithm == other.algorithm
            && self.run_index == other.run_index
            && self.seed == other.seed
            && self.scale == other.scale
            && self.initial_buffer_s == other.initial_buffer_s
            && self.records == other.records
            && self.stats_eq(other)
            && self.incidents == other.incidents
    }

    fn stats_eq(&self, other: &Self) -> bool {
        let a = &self.stats;
        let b = &other.stats;
        a.qoe_mean == b.qoe_mean
            && a.qoe == b.qoe
            && a.buffer_mean_s == b.buffer_mean_s
            && a.buffer_std_s == b.buffer_std_s
            && a.buffer_min_s == b.buffer_min_s
            && a.switches == b.switches
            && a.stall_events == b.stall_events
            && a.stall_s == b.stall_s
            && a.hit_ratio_pct == b.hit_ratio_pct
            && a.eqv_bitrate_mbps == b.eqv_bitrate_mbps
    }
}

/// Ground-truth gaze integrator: either the field dynamics on the true scene
/// or a scripted path, sampled at every dynamics sub-step.
struct TruthGaze<T: Scalar> {
    scripted: Option<PathSpec>,
    state: GazeState<T>,
    params: FieldParams<T>,
    samples: Vec<(T, SphericalCoord<T>)>,
}

impl<T: Scalar> TruthGaze<T> {
    fn new(source: &GazeSource, segment_s: T) -> Self {
        let mut params = FieldParams::default();
        params.dt = segment_s / T::from_f64_lossy(f64::from(params.steps_per_chunk));
        let (scripted, state) = match source {
            GazeSource::Field => (None, GazeState::default()),
            GazeSource::Scripted { path } => {
                let p = path.position_at(0.0, 0.0).normalized();
                let coord = SphericalCoord::new(
                    T::from_f64_lossy(p.theta),
                    T::from_f64_lossy(p.phi),
                );
                (Some(path.clone()), GazeState::at(coord))
            }
        };
        let samples = vec![(T::zero(), state.coord())];
        Self { scripted, state, params, samples }
    }

    fn coord(&self) -> SphericalCoord<T> {
        self.state.coord()
    }

    /// Sensor snapshot at the last sample: exact position, velocity from the
    /// dynamics state or a finite difference of the scripted path.
    fn anchor(&self) -> GazeState<T> {
        match &self.scripted {
            None => self.state,
            Some(_) => {
                let n = self.samples.len();
                if n < 2 {
                    return GazeState::at(self.samples[0].1);
                }
                let (t_prev, prev) = self.samples[n - 2];
                let (t_now, now) = self.samples[n - 1];
                let g_now = now.to_unit();
                let g_prev = prev.to_unit();
                let dt = t_now - t_prev;
                let v = ((g_now - g_prev) * (T::one() / dt)).reject_from_unit(g_now);
                GazeState { g: g_now, v }
            }
        }
    }

    /// Advances truth across one chunk interval and appends sub-step samples.
    fn advance_chunk<R: rand::Rng + ?Sized>(
        &mut self,
        t_start: T,
        script: &SceneScript,
        table: &MassTable<T>,
        rng: &mut R,
    ) -> Result<(), FieldError> {
        let steps = self.params.steps_per_chunk;
        for k in 0..steps {
            let t0 = t_start + self.params.dt * T::from_f64_lossy(f64::from(k));
            let t1 = t0 + self.params.dt;
            match &self.scripted {
                None => {
                    let scene = script.state_at(t0.to_f64_lossy(), table);
                    self.state = step_gaze(&self.state, &scene.objects, &self.params, rng)?;
                }
                Some(path) => {
                    let p = path.position_at(t1.to_f64_lossy(), 0.0).normalized();
                    let coord = SphericalCoord::new(
                        T::from_f64_lossy(p.theta),
                        T::from_f64_lossy(p.phi),
                    );
                    self.state = GazeState::at(coord);
                }
            }
            self.samples.push((t1, self.state.coord()));
        }
        Ok(())
    }
}

/// Runs one complete streaming session.
pub fn simulate_run<T: Scalar>(config: &RunConfig<T>) -> Result<RunResult<T>, EngineError> {
    config.video.validate()?;
    config.controller.validate()?;
    config.field.validate()?;
    config.qoe.validate()?;
    if !(0.0..=1.0).contains(&config.dropout_p) {
        return Err(EngineError::InvalidConfig(format!(
            "dropout probability {} outside [0, 1]",
            config.dropout_p
        )));
    }

    let video = &config.video;
    let ladder = &video.ladder;
    let grid = video.grid;
    let tiles_n = grid.len();
    let q_max = ladder.top_tier();
    let chunks = video.chunk_count();

    let mut scale_rng = stream(child_seed(config.seed, "scale", 0));
    let mut init_rng = stream(child_seed(config.seed, "init", 0));
    let mut truth_rng = stream(child_seed(config.seed, "truth", 0));
    let mut noise_rng = stream(child_seed(config.seed, "noise", 0));
    let mut est_rng = stream(child_seed(config.seed, "estimator", 0));
    let mut drop_rng = stream(child_seed(config.seed, "dropout", 0));

    let scale = draw_run_scale(&config.scaling, &mut scale_rng);
    let channel = Channel::new(config.network.clone(), scale)?;
    let initial_buffer =
        T::from_f64_lossy(2.0) + T::from_f64_lossy(4.0) * T::sample_unit(&mut init_rng);
    let mut buffer = BufferState::new(initial_buffer, video.b_max_s);

    let script = config.scenario.script.resolve(child_seed(config.seed, "scene", 0));
    let true_masses = MassTable::<T>::default();
    let flat_masses = MassTable::<T>::flat();
    let mut truth = TruthGaze::new(&config.scenario.gaze, video.segment_s);

    let bola_params = BolaParams::derive(ladder, config.controller.b_ref, video.b_max_s)?;
    let mpc_params = |variant: MpcVariant, window: usize| MpcParams {
        horizon: config.mpc_horizon,
        variant,
        window,
        qoe: config.qoe,
        segment_s: video.segment_s,
        b_max: video.b_max_s,
    };

    let mut ctrl_state = ControllerState::new();
    let mut history: Vec<T> = Vec::with_capacity(chunks);
    let mut last_tier = 0usize;
    let mut last_pred: Option<(ProbabilityMap<T>, TileSet)> = None;
    let mut t_wall = T::zero();
    let mut r_prev = T::zero();
    let mut tier_prev = 0usize;

    let mut records: Vec<ChunkRecord<T>> = Vec::with_capacity(chunks);
    let mut latency_ms: Vec<f64> = Vec::with_capacity(chunks);
    let mut incidents: Vec<String> = Vec::new();
    let mut qoe_sum = QoeBreakdown::zero();
    let mut qoe_totals: Vec<T> = Vec::with_capacity(chunks);
    let mut buffers: Vec<T> = Vec::with_capacity(chunks);
    let mut dominants: Vec<usize> = Vec::with_capacity(chunks);
    let mut pred_sets: Vec<TileSet> = Vec::with_capacity(chunks);
    let mut truth_sets: Vec<TileSet> = Vec::with_capacity(chunks);
    let mut eqv_rates: Vec<T> = Vec::with_capacity(chunks);

    for n in 0..chunks {
        let t_media = video.segment_s * T::from_f64_lossy(n as f64);
        let buffer_before = buffer.level_s;

        // Perception: the predictor sees the true scene filtered through its
        // mass model and detection dropout.
        let truth_scene = script.state_at(t_media.to_f64_lossy(), &true_masses);
        let perceived_base = if config.predictor_flat_mass {
            truth_scene.with_masses(&flat_masses)
        } else {
            truth_scene.clone()
        };
        let perceived: SceneState<T> =
            dropout_state(&perceived_base, config.dropout_p, &mut drop_rng)?;
        let anchor = truth.anchor();

        // Prediction and rate control, timed together as the decision.
        let t_start = t_wall;
        let clock = Instant::now();
        let (_probs, predicted_tiles, c_hat, allocation) = decide_chunk(
            config,
            n,
            &anchor,
            &perceived,
            &truth.samples,
            &channel,
            t_wall,
            buffer.level_s,
            last_tier,
            &history,
            &bola_params,
            &mpc_params,
            &mut ctrl_state,
            &mut noise_rng,
            &mut est_rng,
            &mut last_pred,
            &mut incidents,
        )?;
        latency_ms.push(clock.elapsed().as_secs_f64() * 1e3);

        let delivered = allocation.delivered();
        let chunk_megabits = delivered * video.segment_s;
        let outcome = advance_buffer(&mut buffer, chunk_megabits, &channel, video.segment_s, t_wall);
        t_wall = outcome.t_end;
        history.push(chunk_megabits / outcome.download_s);

        truth
            .advance_chunk(t_media, &script, &true_masses, &mut truth_rng)
            .map_err(|e| EngineError::TruthGaze(format!("chunk {n}: {e}")))?;
        let truth_tiles = viewport_tiles(Viewport::new(truth.coord(), video.fov_deg), grid);
        let iou = T::from_f64_lossy(tile_set_iou(&predicted_tiles, &truth_tiles));

        let tier = dominant_tier(&allocation.tiers);
        if n == 0 {
            r_prev = delivered;
            tier_prev = tier;
        }
        let truth_tiers: Vec<usize> =
            truth_tiles.iter().map(|&k| allocation.tiers[k]).collect();
        let qoe = qoe_chunk(
            delivered,
            r_prev,
            tier,
            tier_prev,
            outcome.stall_s,
            &truth_tiers,
            q_max,
            &config.qoe,
        )?;

        let eqv = T::from_f64_lossy(tiles_n as f64)
            * mean(&truth_tiles.iter().map(|&k| allocation.rates[k]).collect::<Vec<_>>());

        qoe_sum = qoe_sum.add(&qoe);
        qoe_totals.push(qoe.total);
        buffers.push(buffer.level_s);
        dominants.push(tier);
        pred_sets.push(predicted_tiles.clone());
        truth_sets.push(truth_tiles.clone());
        eqv_rates.push(eqv);

        records.push(ChunkRecord {
            index: n,
            t_start_s: t_start,
            tier,
            tile_tiers: allocation.tiers,
            rate_mbps: delivered,
            c_hat_mbps: c_hat,
            buffer_before_s: buffer_before,
            buffer_after_s: buffer.level_s,
            idle_s: outcome.idle_s,
            download_s: outcome.download_s,
            stall_s: outcome.stall_s,
            predicted_tiles,
            truth_tiles,
            iou,
            qoe,
        });

        r_prev = delivered;
        tier_prev = tier;
        last_tier = tier;
    }

    let stats = if chunks == 0 {
        empty_stats()
    } else {
        RunStats {
            qoe_mean: mean(&qoe_totals),
            qoe: qoe_sum,
            buffer_mean_s: mean(&buffers),
            buffer_std_s: population_std(&buffers),
            buffer_min_s: buffers.iter().copied().fold(T::infinity(), T::min),
            switches: count_switches(&dominants),
            stall_events: buffer.stall_events,
            stall_s: buffer.total_stall_s,
            hit_ratio_pct: hit_ratio(&pred_sets, &truth_sets)?,
            eqv_bitrate_mbps: mean(&eqv_rates),
            decision_ms: T::from_f64_lossy(
                latency_ms.iter().sum::<f64>() / latency_ms.len() as f64,
            ),
        }
    };

    Ok(RunResult {
        algorithm: config.algorithm,
        run_index: config.run_index,
        seed: config.seed,
        scale,
        initial_buffer_s: initial_buffer,
        records,
        stats,
        latency_ms,
        incidents,
    })
}

fn empty_stats<T: Scalar>() -> RunStats<T> {
    RunStats {
        qoe_mean: T::zero(),
        qoe: QoeBreakdown::zero(),
        buffer_mean_s: T::zero(),
        buffer_std_s: T::zero(),
        buffer_min_s: T::zero(),
        switches: 0,
        stall_events: 0,
        stall_s: T::zero(),
        hit_ratio_pct: T::zero(),
        eqv_bitrate_mbps: T::zero(),
        decision_ms: T::zero(),
    }
}

/// Viewport prediction plus rate decision for one chunk.
#[allow(clippy::too_many_arguments)]
fn decide_chunk<T: Scalar>(
    config: &RunConfig<T>,
    n: usize,
    anchor: &GazeState<T>,
    perceived: &SceneState<T>,
    gaze_samples: &[(T, SphericalCoord<T>)],
    channel: &Channel<T>,
    t_wall: T,
    buffer_s: T,
    last_tier: usize,
    history: &[T],
    bola_params: &BolaParams<T>,
    mpc_params: &dyn Fn(MpcVariant, usize) -> MpcParams<T>,
    ctrl_state: &mut ControllerState<T>,
    noise_rng: &mut rand_chacha::ChaCha8Rng,
    est_rng: &mut rand_chacha::ChaCha8Rng,
    last_pred: &mut Option<(ProbabilityMap<T>, TileSet)>,
    incidents: &mut Vec<String>,
) -> Result<(Option<ProbabilityMap<T>>, TileSet, T, TileAllocation<T>), EngineError> {
    let video = &config.video;
    let ladder = &video.ladder;
    let grid = video.grid;
    let tiles_n = grid.len();
    let fit_window = T::one();

    let obs = || AbrObservation {
        buffer_s,
        last_tier,
        throughput_history: history.to_vec(),
        chunk_index: n,
    };
    let uniform_alloc = |tier: usize| TileAllocation {
        tiers: vec![tier; tiles_n],
        rates: (0..tiles_n).map(|k| ladder.per_tile(tier, k)).collect(),
    };
    let anchor_tiles =
        || viewport_tiles(Viewport::new(anchor.coord(), video.fov_deg), grid);

    match config.algorithm {
        Algorithm::OrbitStream => {
            let forecast = [perceived.clone()];
            let (probs, tiles) = match predict_viewport(
                anchor,
                &forecast,
                grid,
                video.fov_deg,
                &config.field,
                noise_rng,
            ) {
                Ok(Prediction { probs, tiles, .. }) => {
                    *last_pred = Some((probs.clone(), tiles.clone()));
                    (probs, tiles)
                }
                Err(e) => {
                    incidents.push(format!("chunk {n}: {e}; holding previous prediction"));
                    match last_pred.clone() {
                        Some(p) => p,
                        None => (ProbabilityMap::uniform(tiles_n), anchor_tiles()),
                    }
                }
            };
            let c_hat = estimate_capacity(channel, t_wall, &config.estimator, est_rng);
            let d = decide(ctrl_state, buffer_s, c_hat, &probs, ladder, &config.controller)?;
            Ok((Some(probs), tiles, c_hat, d.allocation))
        }
        Algorithm::PdUniform => {
            let probs = ProbabilityMap::uniform(tiles_n);
            let c_hat = estimate_capacity(channel, t_wall, &config.estimator, est_rng);
            let d = decide(ctrl_state, buffer_s, c_hat, &probs, ladder, &config.controller)?;
            Ok((Some(probs), anchor_tiles(), c_hat, d.allocation))
        }
        Algorithm::ExtrapPd => {
            let (_, probs, tiles) = extrapolate_viewport(
                gaze_samples,
                video.segment_s,
                fit_window,
                grid,
                video.fov_deg,
            )?;
            let c_hat = estimate_capacity(channel, t_wall, &config.estimator, est_rng);
            let d = decide(ctrl_state, buffer_s, c_hat, &probs, ladder, &config.controller)?;
            Ok((Some(probs), tiles, c_hat, d.allocation))
        }
        Algorithm::FlareApprox | Algorithm::PanoApprox => {
            let (_, probs, tiles) = extrapolate_viewport(
                gaze_samples,
                video.segment_s,
                fit_window,
                grid,
                video.fov_deg,
            )?;
            let tier = rate_based_decide(&obs(), 5, ladder).tier;
            let allocation =
                allocate_tiles(ladder.rate(tier), &probs, config.controller.alpha, ladder)?;
            Ok((Some(probs), tiles, T::zero(), allocation))
        }
        Algorithm::Bola => {
            let tier = bola_decide(&obs(), bola_params, ladder).tier;
            Ok((None, anchor_tiles(), T::zero(), uniform_alloc(tier)))
        }
        Algorithm::Buffer => {
            let tier = buffer_based_decide(
                &obs(),
                T::from_f64_lossy(2.0),
                T::from_f64_lossy(6.0),
                ladder,
            )
            .tier;
            Ok((None, anchor_tiles(), T::zero(), uniform_alloc(tier)))
        }
        Algorithm::Rate => {
            let tier = rate_based_decide(&obs(), 5, ladder).tier;
            Ok((None, anchor_tiles(), T::zero(), uniform_alloc(tier)))
        }
        Algorithm::MpcFast | Algorithm::MpcHm => {
            let tier = mpc_decide(&obs(), &mpc_params(MpcVariant::Fast, 5), ladder)?.tier;
            Ok((None, anchor_tiles(), T::zero(), uniform_alloc(tier)))
        }
        Algorithm::MpcRobust => {
            let tier = mpc_decide(&obs(), &mpc_params(MpcVariant::Robust, 5), ladder)?.tier;
            Ok((None, anchor_tiles(), T::zero(), uniform_alloc(tier)))
        }
        Algorithm::Mpc => {
            let tier = mpc_decide(&obs(), &mpc_params(MpcVariant::Fast, 1), ladder)?.tier;
            Ok((None, anchor_tiles(), T::zero(), uniform_alloc(tier)))
        }
    }
}

/// Recomputes run aggregates from the records alone; `simulate_run` keeps its
/// own running totals, so agreement between the two is a real check.
pub fn recompute_stats<T: Scalar>(
    records: &[ChunkRecord<T>],
    ladder: &QualityLadder<T>,
    qoe_params: &QoeParams<T>,
    decision_ms: T,
) -> Result<RunStats<T>, EngineError> {
    if records.is_empty() {
        return Ok(empty_stats());
    }
    let q_max = ladder.top_tier();
    let mut qoe_sum = QoeBreakdown::zero();
    let mut totals = Vec::with_capacity(records.len());
    let mut eqv = Vec::with_capacity(records.len());
    let mut r_prev = T::zero();
    let mut tier_prev = 0usize;
    let dominants: Vec<usize> =
        records.iter().map(|r| dominant_tier(&r.tile_tiers)).collect();
    for (i, r) in records.iter().enumerate() {
        let rate: T = (0..r.tile_tiers.len())
            .map(|k| ladder.per_tile(r.tile_tiers[k], k))
            .sum();
        if i == 0 {
            r_prev = rate;
            tier_prev = dominants[0];
        }
        let truth_tiers: Vec<usize> =
            r.truth_tiles.iter().map(|&k| r.tile_tiers[k]).collect();
        let q = qoe_chunk(
            rate,
            r_prev,
            dominants[i],
            tier_prev,
            r.stall_s,
            &truth_tiers,
            q_max,
            qoe_params,
        )?;
        qoe_sum = qoe_sum.add(&q);
        totals.push(q.total);
        let per_tile: Vec<T> = r
            .truth_tiles
            .iter()
            .map(|&k| ladder.per_tile(r.tile_tiers[k], k))
            .collect();
        eqv.push(T::from_f64_lossy(r.tile_tiers.len() as f64) * mean(&per_tile));
        r_prev = rate;
        tier_prev = dominants[i];
    }
    let buffers: Vec<T> = records.iter().map(|r| r.buffer_after_s).collect();
    let stall_s = records.iter().map(|r| r.stall_s).fold(T::zero(), |a, b| a + b);
    let pred: Vec<TileSet> = records.iter().map(|r| r.predicted_tiles.clone()).collect();
    let truth: Vec<TileSet> = records.iter().map(|r| r.truth_tiles.clone()).collect();
    Ok(RunStats {
        qoe_mean: mean(&totals),
        qoe: qoe_sum,
        buffer_mean_s: mean(&buffers),
        buffer_std_s: population_std(&buffers),
        buffer_min_s: buffers.iter().copied().fold(T::infinity(), T::min),
        switches: count_switches(&dominants),
        stall_events: records.iter().filter(|r| r.stall_s > T::zero()).count(),
        stall_s,
        hit_ratio_pct: hit_ratio(&pred, &truth)?,
        eqv_bitrate_mbps: mean(&eqv),
        decision_ms,
    })
}

/// A full experiment: the run matrix crossed over traces and scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment<T> {
    pub video: VideoConfig<T>,
    pub traces: Vec<NamedTrace<T>>,
    pub scenarios: Vec<Scenario>,
    pub algorithms: Vec<Algorithm>,
    pub runs_per_algorithm: usize,
    pub base_seed: u64,
    pub controller: ControllerParams<T>,
    pub field: FieldParams<T>,
    pub qoe: QoeParams<T>,
    pub estimator: EstimatorParams<T>,
    pub scaling: ScalingParams<T>,
    pub mpc_horizon: usize,
    pub predictor_flat_mass: bool,
    pub dropout_p: f64,
}

impl<T: Scalar> Experiment<T> {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.video.validate()?;
        if self.traces.is_empty() {
            return Err(EngineError::InvalidConfig("experiment needs traces".into()));
        }
        if self.scenarios.is_empty() {
            return Err(EngineError::InvalidConfig("experiment needs scenarios".into()));
        }
        if self.algorithms.is_empty() {
            return Err(EngineError::InvalidConfig("experiment needs algorithms".into()));
        }
        if self.runs_per_algorithm == 0 {
            return Err(EngineError::InvalidConfig("experiment needs at least one run".into()));
        }
        Ok(())
    }

    /// Run `index` of `algorithm`: trace and scenario rotate through the
    /// matrix, the seed derives from (base seed, algorithm name, index).
    pub fn run_config(&self, algorithm: Algorithm, index: usize) -> RunConfig<T> {
        let trace = &self.traces[index % self.traces.len()];
        let scenario =
            &self.scenarios[(index / self.traces.len()) % self.scenarios.len()];
        RunConfig {
            algorithm,
            run_index: index,
            seed: child_seed(self.base_seed, algorithm.name(), index as u64),
            video: self.video.clone(),
            network: trace.trace.clone(),
            scenario: scenario.clone(),
            controller: self.controller,
            field: self.field,
            qoe: self.qoe,
            estimator: self.estimator,
            scaling: self.scaling,
            mpc_horizon: self.mpc_horizon,
            predictor_flat_mass: self.predictor_flat_mass,
            dropout_p: self.dropout_p,
        }
    }
}

/// Per-algorithm Monte Carlo outcome.
#[derive(Debug, Clone)]
pub struct AlgorithmOutcome<T> {
    pub algorithm: Algorithm,
    /// Successful runs in run-index order.
    pub results: Vec<RunResult<T>>,
    /// Failed runs as (run index, reason).
    pub failures: Vec<(usize, String)>,
    /// Aggregates over successful runs; absent when every run failed.
    pub summary: Option<McSummary<T>>,
}

/// Runs the whole experiment, possibly across threads. Results are grouped
/// and ordered canonically, so the outcome does not depend on worker count.
pub fn run_monte_carlo<T: Scalar>(
    experiment: &Experiment<T>,
) -> Result<Vec<AlgorithmOutcome<T>>, EngineError> {
    experiment.validate()?;
    let jobs: Vec<(Algorithm, usize)> = experiment
        .algorithms
        .iter()
        .flat_map(|&a| (0..experiment.runs_per_algorithm).map(move |i| (a, i)))
        .collect();
    let outcomes: Vec<(Algorithm, usize, Result<RunResult<T>, EngineError>)> = jobs
        .par_iter()
        .map(|&(a, i)| (a, i, simulate_run(&experiment.run_config(a, i))))
        .collect();

    let mut grouped = Vec::with_capacity(experiment.algorithms.len());
    for &algorithm in &experiment.algorithms {
        let mut results = Vec::new();
        let mut failures = Vec::new();
        for (a, i, r) in &outcomes {
            if *a != algorithm {
                continue;
            }
            match r {
                Ok(run) => results.push(run.clone()),
                Err(e) => failures.push((*i, e.to_string())),
            }
        }
        let stats: Vec<_> = results.iter().map(|r| r.stats).collect();
        let summary = aggregate_metrics(&stats).ok();
        grouped.push(AlgorithmOutcome { algorithm, results, failures, summary });
    }
    Ok(grouped)
}

/// Engine-layer failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("truth gaze integration failed: {0}")]
    TruthGaze(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

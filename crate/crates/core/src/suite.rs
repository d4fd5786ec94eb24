//! Bundled evaluation suite: the reference channel traces, scene scripts,
//! scenario matrix, and ready-made experiment builders used by the harness.

use crate::channel::{
    ar1_trace, normal_trace, stress_collapse, stress_fade, stress_step, ChannelError,
    EstimatorParams, NamedTrace, ScalingParams, TraceKind,
};
use crate::controller::ControllerParams;
use crate::engine::{Algorithm, Experiment, GazeSource, Scenario, VideoConfig};
use crate::field::FieldParams;
use crate::metrics::QoeParams;
use crate::rng::{child_seed, stream};
use crate::scene::{ObjectClass, PathSpec, SceneScript, ScriptObject};
use crate::sphere::wrap_theta;

/// Seed the bundled experiments use unless the caller overrides it.
pub const DEFAULT_BASE_SEED: u64 = 424242;

/// Monte Carlo runs per algorithm in the full protocol.
pub const FULL_RUNS_PER_ALGORITHM: usize = 300;

/// Ten reference traces: four choppy mobile links, three stable broadband
/// links, and three synthetic stress shapes. Deterministic in the seed.
pub fn bundled_traces(seed: u64) -> Result<Vec<NamedTrace<f64>>, ChannelError> {
    let mut traces = Vec::with_capacity(10);
    for i in 0..4u64 {
        let mut rng = stream(child_seed(seed, "trace-mobile", i));
        traces.push(NamedTrace {
            name: format!("mobile-ar1-{i}"),
            kind: TraceKind::Mobile,
            trace: ar1_trace(600, 1.0, 0.95, 6.8, 3.2, 0.3, &mut rng)?,
        });
    }
    for i in 0..3u64 {
        let mut rng = stream(child_seed(seed, "trace-broadband", i));
        traces.push(NamedTrace {
            name: format!("broadband-{i}"),
            kind: TraceKind::Broadband,
            trace: normal_trace(600, 1.0, 60.0, 2.0, 0.01, &mut rng)?,
        });
    }
    traces.push(NamedTrace {
        name: "stress-step".into(),
        kind: TraceKind::Synthetic,
        trace: stress_step(18.0, 2.5, 50.0, 100.0)?,
    });
    traces.push(NamedTrace {
        name: "stress-fade".into(),
        kind: TraceKind::Synthetic,
        trace: stress_fade(22.0, 1.5, 100.0, 1.0)?,
    });
    traces.push(NamedTrace {
        name: "stress-collapse".into(),
        kind: TraceKind::Synthetic,
        trace: stress_collapse(18.0, 0.5, 40.0, 60.0, 100.0)?,
    });
    Ok(traces)
}

/// Stable subset of [`bundled_traces`], used where channel chaos would
/// confound a viewport measurement.
pub fn broadband_traces(seed: u64) -> Result<Vec<NamedTrace<f64>>, ChannelError> {
    Ok(bundled_traces(seed)?
        .into_iter()
        .filter(|t| t.kind == TraceKind::Broadband)
        .collect())
}

fn object(
    id: &str,
    class: ObjectClass,
    enter: f64,
    mass: Option<f64>,
    path: PathSpec,
) -> ScriptObject {
    ScriptObject {
        id: id.into(),
        class,
        enter,
        exit: f64::INFINITY,
        enter_jitter: 0.0,
        mass,
        path,
    }
}

/// Close-approach script: a vehicle parked exactly on the initial gaze
/// direction, plus a pedestrian sweeping past. The parked object sits at zero
/// angular distance from the gaze at the first prediction, which is what the
/// delta = 0 ablation needs to trip.
pub fn close_approach_scenario() -> Scenario {
    let script = SceneScript {
        name: "close-approach".into(),
        objects: vec![
            object(
                "parked",
                ObjectClass::Vehicle,
                0.0,
                None,
                PathSpec::Static { position: [0.0, 0.0] },
            ),
            object(
                "crosser",
                ObjectClass::Pedestrian,
                0.0,
                None,
                PathSpec::Linear { start: [2.0, 0.3], rate: [-0.05, -0.006] },
            ),
        ],
    };
    Scenario { name: "close-approach".into(), script, gaze: GazeSource::Field }
}

/// Twenty hazard-tracking scripts: one heavy pedestrian entering near the
/// initial gaze with a slow crossing path, a light far-side distractor, and
/// an occasional mid-scene traffic sign.
pub fn hazard_scenarios() -> Vec<Scenario> {
    (0..20)
        .map(|i| {
            let fi = i as f64;
            let theta0 = -0.9 + 0.09 * fi;
            let phi0 = [-0.35, -0.15, 0.05, 0.25, 0.45][i % 5];
            let enter = 1.5 * (i % 4) as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut objects = vec![
                object(
                    "hazard",
                    ObjectClass::Pedestrian,
                    enter,
                    None,
                    PathSpec::Linear {
                        start: [theta0, phi0],
                        rate: [0.04 * sign, -0.015 * sign],
                    },
                ),
                object(
                    "distractor",
                    ObjectClass::Other,
                    0.0,
                    None,
                    PathSpec::Static {
                        position: [wrap_theta(theta0 + 2.6), -0.5 * phi0],
                    },
                ),
            ];
            if i % 3 == 0 {
                objects.push(object(
                    "sign",
                    ObjectClass::TrafficSign,
                    0.0,
                    None,
                    PathSpec::Linear {
                        start: [wrap_theta(theta0 - 1.4), 0.1],
                        rate: [0.01 * sign, 0.0],
                    },
                ));
            }
            let script = SceneScript { name: format!("hazard-{i:02}"), objects };
            Scenario { name: format!("hazard-{i:02}"), script, gaze: GazeSource::Field }
        })
        .collect()
}

/// Five smooth-panning scripts with scripted ground-truth gaze: three pure
/// linear pans and two waypoint pans with one shallow rate change.
pub fn smooth_pan_scenarios() -> Vec<Scenario> {
    let linear = [
        ([0.0, 0.0], [0.12, 0.0]),
        ([-1.2, 0.1], [0.2, 0.004]),
        ([1.5, -0.1], [-0.16, -0.004]),
    ];
    let mut scenarios: Vec<Scenario> = linear
        .iter()
        .enumerate()
        .map(|(i, &(start, rate))| {
            pan_scenario(
                format!("pan-linear-{i}"),
                PathSpec::Linear { start, rate },
                start,
            )
        })
        .collect();
    scenarios.push(pan_scenario(
        "pan-turn-0".into(),
        PathSpec::Waypoints {
            points: vec![[0.0, -0.8, 0.0], [50.0, -0.8 + 0.15 * 50.0, 0.1], [
                100.0,
                -0.8 + 0.15 * 50.0 + 0.2 * 50.0,
                0.1,
            ]],
        },
        [-0.8, 0.0],
    ));
    scenarios.push(pan_scenario(
        "pan-turn-1".into(),
        PathSpec::Waypoints {
            points: vec![[0.0, 2.0, 0.2], [40.0, 2.0 - 0.18 * 40.0, 0.0], [
                100.0,
                2.0 - 0.18 * 40.0 - 0.12 * 60.0,
                -0.1,
            ]],
        },
        [2.0, 0.2],
    ));
    scenarios
}

fn pan_scenario(name: String, path: PathSpec, start: [f64; 2]) -> Scenario {
    // A lone slow-moving sign keeps the field well-defined for algorithms
    // that consult the scene; the scripted gaze ignores it.
    let script = SceneScript {
        name: name.clone(),
        objects: vec![object(
            "sign",
            ObjectClass::TrafficSign,
            0.0,
            None,
            PathSpec::Static { position: [wrap_theta(start[0] + 0.8), 0.0] },
        )],
    };
    Scenario { name, script, gaze: GazeSource::Scripted { path } }
}

/// Five erratic-motion scripts: three comparable attractors far apart whose
/// waypoint paths trade places mid-run, so the truth gaze hops between wells.
pub fn erratic_scenarios() -> Vec<Scenario> {
    (0..5)
        .map(|i| {
            let fi = i as f64;
            let spread = 1.7 + 0.1 * fi;
            let a0 = -spread + 0.2 * fi;
            let a1 = wrap_theta(a0 + spread);
            let a2 = wrap_theta(a0 + 2.0 * spread);
            let objects = vec![
                object(
                    "walker",
                    ObjectClass::Pedestrian,
                    0.0,
                    None,
                    PathSpec::Waypoints {
                        points: vec![
                            [0.0, a0, 0.2],
                            [30.0, a1, -0.1],
                            [60.0, a0, 0.3],
                            [100.0, a1, 0.0],
                        ],
                    },
                ),
                object(
                    "car-a",
                    ObjectClass::Vehicle,
                    0.0,
                    None,
                    PathSpec::Waypoints {
                        points: vec![
                            [0.0, a1, -0.2],
                            [35.0, a2, 0.15],
                            [70.0, a1, -0.25],
                            [100.0, a2, 0.1],
                        ],
                    },
                ),
                object(
                    "car-b",
                    ObjectClass::Vehicle,
                    2.0,
                    None,
                    PathSpec::Waypoints {
                        points: vec![
                            [0.0, a2, 0.35],
                            [40.0, a0, -0.3],
                            [80.0, a2, 0.2],
                            [100.0, a0, -0.1],
                        ],
                    },
                ),
            ];
            let script = SceneScript { name: format!("erratic-{i}"), objects };
            Scenario { name: format!("erratic-{i}"), script, gaze: GazeSource::Field }
        })
        .collect()
}

/// The default 31-scenario matrix. The close-approach script sits first so
/// every algorithm meets it within the first trace rotation.
pub fn default_scenarios() -> Vec<Scenario> {
    let mut scenarios = vec![close_approach_scenario()];
    scenarios.extend(hazard_scenarios());
    scenarios.extend(smooth_pan_scenarios());
    scenarios.extend(erratic_scenarios());
    scenarios
}

fn experiment_base(
    seed: u64,
    traces: Vec<NamedTrace<f64>>,
    scenarios: Vec<Scenario>,
    algorithms: Vec<Algorithm>,
    runs: usize,
) -> Experiment<f64> {
    Experiment {
        video: VideoConfig::default(),
        traces,
        scenarios,
        algorithms,
        runs_per_algorithm: runs,
        base_seed: seed,
        controller: ControllerParams::default(),
        field: FieldParams::default(),
        qoe: QoeParams::default(),
        estimator: EstimatorParams::default(),
        scaling: ScalingParams::default(),
        mpc_horizon: 5,
        predictor_flat_mass: false,
        dropout_p: 0.0,
    }
}

/// The full protocol: every algorithm, 300 runs each, the complete trace and
/// scenario matrix.
pub fn default_experiment(seed: u64) -> Result<Experiment<f64>, ChannelError> {
    Ok(experiment_base(
        seed,
        bundled_traces(seed)?,
        default_scenarios(),
        Algorithm::ALL.to_vec(),
        FULL_RUNS_PER_ALGORITHM,
    ))
}

/// A quick-turnaround variant of the full protocol: same matrix, 30 runs per
/// algorithm.
pub fn desk_experiment(seed: u64) -> Result<Experiment<f64>, ChannelError> {
    Ok(experiment_base(
        seed,
        bundled_traces(seed)?,
        default_scenarios(),
        Algorithm::ALL.to_vec(),
        30,
    ))
}

/// Predictor ablations. Each degrades only what the predictor sees; the
/// ground-truth gaze always runs the baseline dynamics.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum AblationVariant {
    FlatMass,
    BetaSweep,
    DeltaZero,
    Dropout,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::FlatMass,
        AblationVariant::BetaSweep,
        AblationVariant::DeltaZero,
        AblationVariant::Dropout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::FlatMass => "flat-mass",
            AblationVariant::BetaSweep => "beta-sweep",
            AblationVariant::DeltaZero => "delta-zero",
            AblationVariant::Dropout => "dropout",
        }
    }
}

impl std::fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AblationVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown ablation variant {s:?}"))
    }
}

/// One matched comparison: baseline and variant share every seed, so per-run
/// deltas are paired.
#[derive(Debug, Clone)]
pub struct AblationPair {
    pub label: String,
    pub baseline: Experiment<f64>,
    pub variant: Experiment<f64>,
}

/// Runs per matched arm in the bundled ablation studies.
pub const ABLATION_RUNS: usize = 60;

/// Builds the matched experiment pairs for one ablation variant. All pairs
/// run OrbitStream only, on stable broadband channels, over the scene family
/// the effect concerns.
pub fn ablation_pairs(
    variant: AblationVariant,
    seed: u64,
) -> Result<Vec<AblationPair>, ChannelError> {
    let traces = broadband_traces(seed)?;
    let orbitstream = vec![Algorithm::OrbitStream];
    let tracking: Vec<Scenario> = hazard_scenarios()
        .into_iter()
        .chain(erratic_scenarios())
        .collect();
    let make = |scenarios: &[Scenario]| {
        experiment_base(
            seed,
            traces.clone(),
            scenarios.to_vec(),
            orbitstream.clone(),
            ABLATION_RUNS,
        )
    };
    Ok(match variant {
        AblationVariant::FlatMass => {
            let baseline = make(&tracking);
            let mut flat = baseline.clone();
            flat.predictor_flat_mass = true;
            vec![AblationPair { label: "flat-mass".into(), baseline, variant: flat }]
        }
        AblationVariant::Dropout => {
            let baseline = make(&tracking);
            let mut dropped = baseline.clone();
            dropped.dropout_p = 0.3;
            vec![AblationPair { label: "dropout-0.3".into(), baseline, variant: dropped }]
        }
        AblationVariant::DeltaZero => {
            let baseline = make(&[close_approach_scenario()]);
            let mut singular = baseline.clone();
            singular.field.delta = 0.0;
            vec![AblationPair { label: "delta-zero".into(), baseline, variant: singular }]
        }
        AblationVariant::BetaSweep => {
            let erratic = erratic_scenarios();
            let baseline = make(&erratic);
            [0.25, 0.5, 1.0, 1.5]
                .into_iter()
                .map(|beta| {
                    let mut swept = baseline.clone();
                    swept.field.beta = beta;
                    AblationPair {
                        label: format!("beta-{beta}"),
                        baseline: baseline.clone(),
                        variant: swept,
                    }
                })
                .collect()
        }
    })
}

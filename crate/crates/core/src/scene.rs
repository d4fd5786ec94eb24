//! Scene semantics: object classes, mass assignment, detection traces, and
//! scripted scenes.
//!
//! A scene is a set of detected objects on the sphere at a point in time.
//! Detection traces sample the scene every control period; scripts describe
//! object motion parametrically and can be evaluated at any instant, which the
//! predictor uses to sub-sample the field between control decisions.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::sphere::{wrap_theta, SphericalCoord};

/// Semantic class of a detected object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Pedestrian,
    Vehicle,
    TrafficSign,
    Background,
    Other,
}

impl FromStr for ObjectClass {
    type Err = std::convert::Infallible;

    /// The class set is closed; unrecognized labels fold into `Other`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pedestrian" => Self::Pedestrian,
            "vehicle" => Self::Vehicle,
            "traffic_sign" => Self::TrafficSign,
            "background" => Self::Background,
            _ => Self::Other,
        })
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Pedestrian => "pedestrian",
            Self::Vehicle => "vehicle",
            Self::TrafficSign => "traffic_sign",
            Self::Background => "background",
            Self::Other => "other",
        };
        f.write_str(s)
    }
}

/// Attention mass per object class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassTable<T> {
    pub pedestrian: T,
    pub vehicle: T,
    pub traffic_sign: T,
    pub background: T,
    pub other: T,
}

impl<T: Scalar> Default for MassTable<T> {
    fn default() -> Self {
        Self {
            pedestrian: T::from_f64_lossy(1.0),
            vehicle: T::from_f64_lossy(0.8),
            traffic_sign: T::from_f64_lossy(0.75),
            background: T::from_f64_lossy(0.1),
            other: T::from_f64_lossy(0.1),
        }
    }
}

impl<T: Scalar> MassTable<T> {
    /// Uniform table used by the flat-mass ablation.
    pub fn flat() -> Self {
        let one = T::one();
        Self {
            pedestrian: one,
            vehicle: one,
            traffic_sign: one,
            background: one,
            other: one,
        }
    }

    pub fn mass_for(&self, class: ObjectClass) -> T {
        match class {
            ObjectClass::Pedestrian => self.pedestrian,
            ObjectClass::Vehicle => self.vehicle,
            ObjectClass::TrafficSign => self.traffic_sign,
            ObjectClass::Background => self.background,
            ObjectClass::Other => self.other,
        }
    }

    /// All masses must lie in (0, 1]. The default table additionally keeps
    /// background mass below 0.2 so clutter cannot dominate the field; the
    /// flat ablation table is exempt by design.
    pub fn validate(&self) -> Result<(), SceneError> {
        let all = [
            self.pedestrian,
            self.vehicle,
            self.traffic_sign,
            self.background,
            self.other,
        ];
        if all.iter().any(|m| !(*m > T::zero()) || !(*m <= T::one())) {
            return Err(SceneError::InvalidMass("masses must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Looks up the attention mass for a detection.
pub fn assign_mass<T: Scalar>(class: ObjectClass, table: &MassTable<T>) -> T {
    table.mass_for(class)
}

/// One detected object.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject<T> {
    pub id: String,
    pub class: ObjectClass,
    pub position: SphericalCoord<T>,
    pub mass: T,
}

/// All detections at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState<T> {
    pub t: T,
    pub objects: Vec<SceneObject<T>>,
}

impl<T: Scalar> SceneState<T> {
    pub fn empty(t: T) -> Self {
        Self { t, objects: Vec::new() }
    }

    /// Copy with every mass replaced from the given table.
    pub fn with_masses(&self, table: &MassTable<T>) -> Self {
        let objects = self
            .objects
            .iter()
            .map(|o| SceneObject {
                mass: table.mass_for(o.class),
                ..o.clone()
            })
            .collect();
        Self { t: self.t, objects }
    }
}

/// Removes each object of each state independently with probability `p`,
/// modeling detector false negatives. Deterministic given the seed.
pub fn apply_detection_dropout<T: Scalar>(
    states: &[SceneState<T>],
    p: f64,
    seed: u64,
) -> Result<Vec<SceneState<T>>, SceneError> {
    let mut rng = crate::rng::stream(seed);
    states
        .iter()
        .map(|state| dropout_state(state, p, &mut rng))
        .collect()
}

/// Single-state dropout against a caller-owned noise stream.
///
/// `p = 0` returns the state unchanged without consuming randomness, so
/// dropout-free runs share RNG streams with their ablated pairs.
pub fn dropout_state<T: Scalar, R: Rng + ?Sized>(
    state: &SceneState<T>,
    p: f64,
    rng: &mut R,
) -> Result<SceneState<T>, SceneError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SceneError::InvalidDropout(p));
    }
    if p == 0.0 {
        return Ok(state.clone());
    }
    let objects = state
        .objects
        .iter()
        .filter(|_| rng.random::<f64>() >= p)
        .cloned()
        .collect();
    Ok(SceneState { t: state.t, objects })
}

/// Detection trace: scene states sampled at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTrace<T> {
    pub states: Vec<SceneState<T>>,
}

impl<T: Scalar> SceneTrace<T> {
    /// Scene at time `t`, linearly interpolating object positions between
    /// samples. Yaw interpolates along the shorter arc. Objects present only
    /// in the earlier sample hold their position until the next sample;
    /// objects present only in the later sample appear at that sample. Before
    /// the first and after the last sample the boundary state is held.
    pub fn state_at(&self, t: T) -> SceneState<T> {
        assert!(!self.states.is_empty(), "trace must hold at least one state");
        let first = &self.states[0];
        if t <= first.t {
            return SceneState { t, ..first.clone() };
        }
        let last = self.states.last().unwrap();
        if t >= last.t {
            return SceneState { t, ..last.clone() };
        }
        let idx = self
            .states
            .partition_point(|s| s.t <= t)
            .saturating_sub(1);
        let (a, b) = (&self.states[idx], &self.states[idx + 1]);
        let frac = (t - a.t) / (b.t - a.t);
        let mut objects = Vec::with_capacity(a.objects.len());
        for oa in &a.objects {
            match b.objects.iter().find(|ob| ob.id == oa.id) {
                Some(ob) => {
                    let dtheta = wrap_theta(ob.position.theta - oa.position.theta);
                    let position = SphericalCoord::new(
                        wrap_theta(oa.position.theta + frac * dtheta),
                        oa.position.phi + frac * (ob.position.phi - oa.position.phi),
                    );
                    objects.push(SceneObject { position, ..oa.clone() });
                }
                None => objects.push(oa.clone()),
            }
        }
        SceneState { t, objects }
    }
}

/// Most objects a single state may hold.
pub const MAX_OBJECTS: usize = 32;

/// Parses a detection trace in `t_sec,obj_id,class,theta_rad,phi_rad,mass`
/// form; the mass column is optional and empty entries fall back to the mass
/// table. Rows with equal timestamps form one state; timestamps must not
/// decrease.
pub fn parse_detection_trace<T: Scalar>(
    text: &str,
    table: &MassTable<T>,
) -> Result<SceneTrace<T>, SceneError> {
    let mut states: Vec<SceneState<T>> = Vec::new();
    let mut ids: BTreeSet<String> = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 1 && line.starts_with("t_sec") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(5..=6).contains(&fields.len()) {
            return Err(SceneError::Parse {
                line: lineno,
                message: format!("expected 5 or 6 fields, found {}", fields.len()),
            });
        }
        let t: f64 = fields[0].parse().map_err(|_| SceneError::Parse {
            line: lineno,
            message: format!("bad timestamp {:?}", fields[0]),
        })?;
        let class = ObjectClass::from_str(fields[2]).expect("class parsing is total");
        let theta: f64 = fields[3].parse().map_err(|_| SceneError::Parse {
            line: lineno,
            message: format!("bad yaw {:?}", fields[3]),
        })?;
        let phi: f64 = fields[4].parse().map_err(|_| SceneError::Parse {
            line: lineno,
            message: format!("bad pitch {:?}", fields[4]),
        })?;
        if !(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2).contains(&phi) {
            return Err(SceneError::Parse {
                line: lineno,
                message: format!("pitch {phi} outside [-pi/2, pi/2]"),
            });
        }
        let mass = match fields.get(5).copied().filter(|f| !f.is_empty()) {
            Some(text) => {
                let m: f64 = text.parse().map_err(|_| SceneError::Parse {
                    line: lineno,
                    message: format!("bad mass {text:?}"),
                })?;
                if !(0.0..=1.0).contains(&m) {
                    return Err(SceneError::Parse {
                        line: lineno,
                        message: format!("mass {m} outside [0, 1]"),
                    });
                }
                T::from_f64_lossy(m)
            }
            None => table.mass_for(class),
        };
        let object = SceneObject {
            id: fields[1].to_string(),
            class,
            position: SphericalCoord::new(
                T::from_f64_lossy(theta),
                T::from_f64_lossy(phi),
            )
            .normalized(),
            mass,
        };
        let t_scaled = T::from_f64_lossy(t);
        match states.last_mut() {
            Some(state) if state.t == t_scaled => {
                if !ids.insert(object.id.clone()) {
                    return Err(SceneError::Parse {
                        line: lineno,
                        message: format!("duplicate object id {:?} at t={t}", object.id),
                    });
                }
                if state.objects.len() >= MAX_OBJECTS {
                    return Err(SceneError::Parse {
                        line: lineno,
                        message: format!("more than {MAX_OBJECTS} objects in one state"),
                    });
                }
                state.objects.push(object);
            }
            Some(state) if state.t > t_scaled => {
                return Err(SceneError::Parse {
                    line: lineno,
                    message: format!("timestamps must not decrease (saw {t})"),
                });
            }
            _ => {
                ids.clear();
                ids.insert(object.id.clone());
                states.push(SceneState { t: t_scaled, objects: vec![object] });
            }
        }
    }
    if states.is_empty() {
        return Err(SceneError::Empty);
    }
    Ok(SceneTrace { states })
}

/// Loads a detection trace from a CSV file.
pub fn load_detection_trace<T: Scalar>(
    path: &Path,
    table: &MassTable<T>,
) -> Result<SceneTrace<T>, SceneError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SceneError::Io(format!("{}: {e}", path.display())))?;
    parse_detection_trace(&text, table)
}

/// Parametric object path inside a script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathSpec {
    /// Fixed position `[theta, phi]`.
    Static { position: [f64; 2] },
    /// Start position plus constant angular rate `[d_theta, d_phi]` per second.
    Linear { start: [f64; 2], rate: [f64; 2] },
    /// Piecewise-linear waypoints `[t, theta, phi]`, times ascending.
    Waypoints { points: Vec<[f64; 3]> },
}

impl PathSpec {
    /// Position at time `t`; `enter` anchors linear paths.
    pub fn position_at(&self, t: f64, enter: f64) -> SphericalCoord<f64> {
        match self {
            Self::Static { position } => SphericalCoord::new(position[0], position[1]),
            Self::Linear { start, rate } => {
                let dt = t - enter;
                SphericalCoord::new(start[0] + rate[0] * dt, start[1] + rate[1] * dt)
            }
            Self::Waypoints { points } => {
                if t <= points[0][0] {
                    return SphericalCoord::new(points[0][1], points[0][2]);
                }
                let last = points.last().unwrap();
                if t >= last[0] {
                    return SphericalCoord::new(last[1], last[2]);
                }
                let idx = points.partition_point(|p| p[0] <= t).saturating_sub(1);
                let (a, b) = (points[idx], points[idx + 1]);
                let frac = (t - a[0]) / (b[0] - a[0]);
                let dtheta = wrap_theta(b[1] - a[1]);
                SphericalCoord::new(a[1] + frac * dtheta, a[2] + frac * (b[2] - a[2]))
            }
        }
    }

    fn validate(&self) -> Result<(), SceneError> {
        if let Self::Waypoints { points } = self {
            if points.len() < 2 {
                return Err(SceneError::Script("waypoint paths need at least 2 points".into()));
            }
            if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return Err(SceneError::Script("waypoint times must be ascending".into()));
            }
        }
        Ok(())
    }
}

/// One scripted object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptObject {
    pub id: String,
    pub class: ObjectClass,
    /// Entry time in seconds.
    #[serde(default)]
    pub enter: f64,
    /// Exit time in seconds; `f64::INFINITY` when absent.
    #[serde(default = "default_exit")]
    pub exit: f64,
    /// Uniform jitter half-width applied to `enter` when the script is
    /// resolved against a seed.
    #[serde(default)]
    pub enter_jitter: f64,
    /// Mass override; the class table applies when absent.
    #[serde(default)]
    pub mass: Option<f64>,
    pub path: PathSpec,
}

fn default_exit() -> f64 {
    f64::INFINITY
}

/// Parametric scene description, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub name: String,
    #[serde(default)]
    pub objects: Vec<ScriptObject>,
}

impl SceneScript {
    pub fn from_toml(text: &str) -> Result<Self, SceneError> {
        let script: Self =
            toml::from_str(text).map_err(|e| SceneError::Script(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SceneError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("script serializes")
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        for o in &self.objects {
            if o.exit <= o.enter {
                return Err(SceneError::Script(format!(
                    "object {:?}: exit {} precedes enter {}",
                    o.id, o.exit, o.enter
                )));
            }
            if o.enter_jitter < 0.0 {
                return Err(SceneError::Script(format!(
                    "object {:?}: negative enter_jitter",
                    o.id
                )));
            }
            o.path.validate()?;
        }
        Ok(())
    }

    /// Applies entry jitter deterministically from the seed, producing a
    /// script whose evaluation is a pure function of time.
    pub fn resolve(&self, seed: u64) -> SceneScript {
        let mut rng = crate::rng::stream(seed);
        let objects = self
            .objects
            .iter()
            .map(|o| {
                let shift = if o.enter_jitter > 0.0 {
                    (rng.random::<f64>() * 2.0 - 1.0) * o.enter_jitter
                } else {
                    0.0
                };
                ScriptObject {
                    enter: (o.enter + shift).max(0.0),
                    enter_jitter: 0.0,
                    ..o.clone()
                }
            })
            .collect();
        SceneScript { name: self.name.clone(), objects }
    }

    /// Scene at time `t`, evaluated exactly from the parametric paths.
    pub fn state_at<T: Scalar>(&self, t: f64, table: &MassTable<T>) -> SceneState<T> {
        let objects = self
            .objects
            .iter()
            .filter(|o| t >= o.enter && t < o.exit)
            .map(|o| {
                let p = o.path.position_at(t, o.enter).normalized();
                SceneObject {
                    id: o.id.clone(),
                    class: o.class,
                    position: SphericalCoord::new(
                        T::from_f64_lossy(p.theta),
                        T::from_f64_lossy(p.phi),
                    ),
                    mass: o
                        .mass
                        .map(T::from_f64_lossy)
                        .unwrap_or_else(|| table.mass_for(o.class)),
                }
            })
            .collect();
        SceneState { t: T::from_f64_lossy(t), objects }
    }

    /// Samples the script into a detection trace.
    pub fn sample<T: Scalar>(
        &self,
        duration: f64,
        interval: f64,
        table: &MassTable<T>,
    ) -> SceneTrace<T> {
        assert!(interval > 0.0 && duration >= 0.0);
        let steps = (duration / interval).round() as usize;
        let states = (0..=steps)
            .map(|k| self.state_at(k as f64 * interval, table))
            .collect();
        SceneTrace { states }
    }
}

/// Scene-layer failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("detection trace holds no states")]
    Empty,
    #[error("invalid scene script: {0}")]
    Script(String),
    #[error("invalid mass table: {0}")]
    InvalidMass(String),
    #[error("dropout probability {0} outside [0, 1]")]
    InvalidDropout(f64),
    #[error("io error: {0}")]
    Io(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::sphere::haversine_distance;

    #[test]
    fn default_masses() {
        let table = MassTable::<f64>::default();
        assert_eq!(assign_mass(ObjectClass::Pedestrian, &table), 1.0);
        assert_eq!(assign_mass(ObjectClass::Vehicle, &table), 0.8);
        assert_eq!(assign_mass(ObjectClass::TrafficSign, &table), 0.75);
        assert_eq!(assign_mass(ObjectClass::Background, &table), 0.1);
        assert_eq!(assign_mass(ObjectClass::Other, &table), 0.1);
        table.validate().unwrap();
        assert!(table.background < 0.2);
    }

    #[test]
    fn flat_table_is_uniform() {
        let table = MassTable::<f64>::flat();
        for class in [
            ObjectClass::Pedestrian,
            ObjectClass::Vehicle,
            ObjectClass::TrafficSign,
            ObjectClass::Background,
            ObjectClass::Other,
        ] {
            assert_eq!(table.mass_for(class), 1.0);
        }
        table.validate().unwrap();
    }

    #[test]
    fn negative_mass_rejected() {
        let table = MassTable { pedestrian: -1.0, ..MassTable::<f64>::default() };
        assert!(table.validate().is_err());
    }

    fn one_object_state(n: usize) -> SceneState<f64> {
        let objects = (0..n)
            .map(|i| SceneObject {
                id: format!("o{i}"),
                class: ObjectClass::Vehicle,
                position: SphericalCoord::new(0.1 * i as f64, 0.0),
                mass: 0.8,
            })
            .collect();
        SceneState { t: 0.0, objects }
    }

    #[test]
    fn dropout_zero_is_identity() {
        let state = one_object_state(5);
        let mut rng = rng::stream(1);
        let out = dropout_state(&state, 0.0, &mut rng).unwrap();
        assert_eq!(out, state);
    }

    #[test]
    fn dropout_rejects_bad_probability() {
        let state = one_object_state(1);
        let mut r = rng::stream(1);
        assert!(dropout_state(&state, -0.1, &mut r).is_err());
        assert!(dropout_state(&state, 1.5, &mut r).is_err());
        assert!(apply_detection_dropout(&[state], 1.5, 1).is_err());
    }

    #[test]
    fn dropout_rate_matches_probability() {
        let state = one_object_state(10);
        let mut r = rng::stream(7);
        let mut kept = 0usize;
        let trials = 1000;
        for _ in 0..trials {
            kept += dropout_state(&state, 0.3, &mut r).unwrap().objects.len();
        }
        let drop_rate = 1.0 - kept as f64 / (trials * 10) as f64;
        assert!(
            (drop_rate - 0.3).abs() < 0.02,
            "observed dropout {drop_rate}"
        );
    }

    #[test]
    fn sequence_dropout_is_seed_deterministic() {
        let states: Vec<SceneState<f64>> = (0..20).map(|_| one_object_state(8)).collect();
        let a = apply_detection_dropout(&states, 0.4, 99).unwrap();
        let b = apply_detection_dropout(&states, 0.4, 99).unwrap();
        assert_eq!(a, b);
        let all_gone = apply_detection_dropout(&states, 1.0, 99).unwrap();
        assert!(all_gone.iter().all(|s| s.objects.is_empty()));
    }

    const TRACE: &str = "t_sec,obj_id,class,theta_rad,phi_rad,mass\n\
        0.0,ped1,pedestrian,0.5,0.1,\n\
        0.0,car1,vehicle,-1.0,0.0,0.65\n\
        2.0,ped1,pedestrian,0.7,0.1,\n";

    #[test]
    fn parses_detection_trace() {
        let trace = parse_detection_trace::<f64>(TRACE, &MassTable::default()).unwrap();
        assert_eq!(trace.states.len(), 2);
        assert_eq!(trace.states[0].objects.len(), 2);
        assert_eq!(trace.states[0].objects[0].mass, 1.0, "empty mass uses the table");
        assert_eq!(trace.states[0].objects[1].mass, 0.65, "explicit mass wins");
        assert_eq!(trace.states[1].objects[0].position.theta, 0.7);
    }

    #[test]
    fn unknown_class_folds_into_other() {
        let text = "0.0,x,dragon,0.0,0.0\n";
        let trace = parse_detection_trace::<f64>(text, &MassTable::default()).unwrap();
        assert_eq!(trace.states[0].objects[0].class, ObjectClass::Other);
        assert_eq!(trace.states[0].objects[0].mass, 0.1);
    }

    #[test]
    fn parse_errors_name_lines() {
        let bad_theta = "0.0,x,pedestrian,sideways,0.0\n";
        match parse_detection_trace::<f64>(bad_theta, &MassTable::default()) {
            Err(SceneError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_fields = "0.0,x,pedestrian,0.0,0.0\n1.0,y,vehicle,0.2\n";
        match parse_detection_trace::<f64>(bad_fields, &MassTable::default()) {
            Err(SceneError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_mass = "0.0,x,pedestrian,0.0,0.0,1.5\n";
        assert!(parse_detection_trace::<f64>(bad_mass, &MassTable::default()).is_err());
        let decreasing = "2.0,x,pedestrian,0.0,0.0\n1.0,x,pedestrian,0.0,0.0\n";
        assert!(parse_detection_trace::<f64>(decreasing, &MassTable::default()).is_err());
    }

    #[test]
    fn interpolation_is_linear_and_held() {
        let trace = parse_detection_trace::<f64>(TRACE, &MassTable::default()).unwrap();
        let mid = trace.state_at(1.0);
        let ped = mid.objects.iter().find(|o| o.id == "ped1").unwrap();
        assert!((ped.position.theta - 0.6).abs() < 1e-12);
        // car1 is absent from the later sample: held at its last position.
        let car = mid.objects.iter().find(|o| o.id == "car1").unwrap();
        assert_eq!(car.position.theta, -1.0);
        // Beyond the last sample the final state is held.
        let late = trace.state_at(10.0);
        assert_eq!(late.objects.len(), 1);
    }

    #[test]
    fn interpolation_wraps_across_the_seam() {
        let text = "0.0,a,vehicle,3.0,0.0\n2.0,a,vehicle,-3.0,0.0\n";
        let trace = parse_detection_trace::<f64>(text, &MassTable::default()).unwrap();
        let mut prev = trace.state_at(0.0).objects[0].position;
        for k in 1..=20 {
            let cur = trace.state_at(0.1 * k as f64).objects[0].position;
            let step = haversine_distance(prev, cur);
            assert!(step < 0.05, "jump of {step} rad at k={k}");
            prev = cur;
        }
    }

    #[test]
    fn script_roundtrip_and_evaluation() {
        let script = SceneScript {
            name: "crossing".into(),
            objects: vec![
                ScriptObject {
                    id: "ped".into(),
                    class: ObjectClass::Pedestrian,
                    enter: 0.0,
                    exit: 50.0,
                    enter_jitter: 0.0,
                    mass: None,
                    path: PathSpec::Linear { start: [0.5, 0.0], rate: [-0.02, 0.0] },
                },
                ScriptObject {
                    id: "sign".into(),
                    class: ObjectClass::TrafficSign,
                    enter: 10.0,
                    exit: f64::INFINITY,
                    enter_jitter: 0.0,
                    mass: Some(0.5),
                    path: PathSpec::Static { position: [-1.0, 0.2] },
                },
            ],
        };
        let text = script.to_toml();
        let back = SceneScript::from_toml(&text).unwrap();
        assert_eq!(back, script);

        let table = MassTable::<f64>::default();
        let s0 = script.state_at(0.0, &table);
        assert_eq!(s0.objects.len(), 1);
        let s20 = script.state_at(20.0, &table);
        assert_eq!(s20.objects.len(), 2);
        let ped = &s20.objects[0];
        assert!((ped.position.theta - (0.5 - 0.02 * 20.0)).abs() < 1e-12);
        assert_eq!(s20.objects[1].mass, 0.5);
        let s60 = script.state_at(60.0, &table);
        assert_eq!(s60.objects.len(), 1, "ped exits at 50 s");
    }

    #[test]
    fn script_resolution_is_deterministic() {
        let script = SceneScript {
            name: "jittered".into(),
            objects: vec![ScriptObject {
                id: "v".into(),
                class: ObjectClass::Vehicle,
                enter: 5.0,
                exit: 20.0,
                enter_jitter: 2.0,
                mass: None,
                path: PathSpec::Static { position: [0.0, 0.0] },
            }],
        };
        let a = script.resolve(3);
        let b = script.resolve(3);
        let c = script.resolve(4);
        assert_eq!(a, b);
        assert!((a.objects[0].enter - 5.0).abs() <= 2.0);
        assert!(a.objects[0].enter != c.objects[0].enter);
    }

    #[test]
    fn script_validation_catches_bad_paths() {
        let bad = SceneScript {
            name: "bad".into(),
            objects: vec![ScriptObject {
                id: "w".into(),
                class: ObjectClass::Other,
                enter: 0.0,
                exit: 10.0,
                enter_jitter: 0.0,
                mass: None,
                path: PathSpec::Waypoints { points: vec![[0.0, 0.0, 0.0]] },
            }],
        };
        assert!(bad.validate().is_err());
    }
}

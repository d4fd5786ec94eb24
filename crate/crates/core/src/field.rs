//! Semantic potential field and momentum gaze dynamics.
//!
//! Detected objects act as attention attractors: each contributes
//! `-G * m / (d + delta)` to the potential at a point, with `d` the
//! great-circle distance. Tile probabilities follow a Boltzmann distribution
//! over the potential at tile centers, and the simulated gaze integrates a
//! damped momentum step driven by the negative field gradient plus isotropic
//! noise, re-normalized onto the sphere after each update (Euler-Maruyama
//! style; the step length absorbs the integration interval).

use rand::Rng;

use crate::scalar::Scalar;
use crate::scene::{SceneObject, SceneState};
use crate::sphere::{
    viewport_tiles, SphericalCoord, TileGrid, TileSet, Vector3, Viewport,
};

/// Field and gaze-dynamics parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams<T> {
    /// Field strength.
    pub g_const: T,
    /// Distance softening; zero exposes singularities at object positions.
    pub delta: T,
    /// Boltzmann inverse temperature for tile probabilities.
    pub beta: T,
    /// Momentum retention per step.
    pub gamma: T,
    /// Gradient step gain.
    pub eta: T,
    /// Noise temperature; the velocity noise scale is `sqrt(2 * eta * sigma)`.
    pub sigma: T,
    /// Gaze position step, seconds of simulated time per dynamics step.
    pub dt: T,
    /// Dynamics steps per control period.
    pub steps_per_chunk: u32,
}

impl<T: Scalar> Default for FieldParams<T> {
    fn default() -> Self {
        Self {
            g_const: T::from_f64_lossy(1.0),
            delta: T::from_f64_lossy(1.0),
            beta: T::from_f64_lossy(0.5),
            gamma: T::from_f64_lossy(0.8),
            eta: T::from_f64_lossy(0.1),
            sigma: T::from_f64_lossy(0.05),
            dt: T::from_f64_lossy(0.1),
            steps_per_chunk: 20,
        }
    }
}

impl<T: Scalar> FieldParams<T> {
    pub fn validate(&self) -> Result<(), FieldError> {
        let ok = self.g_const > T::zero()
            && self.delta >= T::zero()
            && self.beta > T::zero()
            && self.gamma >= T::zero()
            && self.gamma < T::one()
            && self.eta > T::zero()
            && self.sigma >= T::zero()
            && self.dt > T::zero()
            && self.steps_per_chunk >= 1;
        if ok {
            Ok(())
        } else {
            Err(FieldError::InvalidParams)
        }
    }
}

/// Gaze direction and tangent velocity on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeState<T> {
    /// Unit gaze direction.
    pub g: Vector3<T>,
    /// Velocity in the tangent plane at `g`.
    pub v: Vector3<T>,
}

impl<T: Scalar> Default for GazeState<T> {
    /// Rest state looking at yaw 0, pitch 0.
    fn default() -> Self {
        Self {
            g: Vector3::new(T::one(), T::zero(), T::zero()),
            v: Vector3::zero(),
        }
    }
}

impl<T: Scalar> GazeState<T> {
    pub fn at(coord: SphericalCoord<T>) -> Self {
        Self { g: coord.to_unit(), v: Vector3::zero() }
    }

    pub fn coord(&self) -> SphericalCoord<T> {
        SphericalCoord::from_unit(self.g)
    }
}

/// Normalized probability distribution over grid tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap<T> {
    probs: Vec<T>,
}

impl<T: Scalar> ProbabilityMap<T> {
    /// Uniform distribution over `n` tiles.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        let p = T::one() / T::from_f64_lossy(n as f64);
        Self { probs: vec![p; n] }
    }

    /// Indicator distribution over a tile subset, uniformly normalized; an
    /// empty subset falls back to uniform over the grid.
    pub fn indicator(tiles: &TileSet, n: usize) -> Self {
        if tiles.is_empty() {
            return Self::uniform(n);
        }
        let p = T::one() / T::from_f64_lossy(tiles.len() as f64);
        let mut probs = vec![T::zero(); n];
        for &i in tiles {
            probs[i] = p;
        }
        Self { probs }
    }

    /// Boltzmann distribution `p_k = exp(-beta * u_k) / sum_j exp(-beta * u_j)`
    /// with a max-shift before exponentiation for overflow safety.
    pub fn from_potentials(potentials: &[T], beta: T) -> Self {
        assert!(!potentials.is_empty());
        let exponents: Vec<T> = potentials.iter().map(|&u| -beta * u).collect();
        let m = exponents
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        let weights: Vec<T> = exponents.iter().map(|&e| (e - m).exp()).collect();
        let total: T = weights.iter().copied().sum();
        Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> T {
        self.probs.iter().fold(T::zero(), |acc, &p| {
            if p > T::zero() {
                acc - p * p.ln()
            } else {
                acc
            }
        })
    }
}

/// Potential at a point: `-G * sum_l m_l / (d(p, pos_l) + delta)`.
///
/// With `delta = 0` an object exactly at `p` makes the term singular and the
/// call fails; the delta-zero ablation counts those incidents.
pub fn potential_at<T: Scalar>(
    p: SphericalCoord<T>,
    objects: &[SceneObject<T>],
    params: &FieldParams<T>,
) -> Result<T, FieldError> {
    let mut sum = T::zero();
    for (index, o) in objects.iter().enumerate() {
        let d = crate::sphere::haversine_distance(p, o.position);
        let denom = d + params.delta;
        if denom.is_zero() {
            return Err(FieldError::Singularity { index });
        }
        sum = sum + o.mass / denom;
    }
    Ok(-params.g_const * sum)
}

/// Riemannian gradient of the potential at the unit direction `g`, expressed
/// in the tangent plane.
///
/// For one object at unit direction `x` with `s = <g, x>` and `d = acos(s)`,
/// the chain rule through the embedding gives
/// `grad d = -(x - s g) / |x - s g|`, so each object contributes
/// `-G m / (d + delta)^2` along the unit tangent toward it. A term whose
/// direction is undefined (object at `g` or antipodal) contributes the zero
/// vector by convention, unless `delta = 0` makes it singular.
pub fn potential_gradient<T: Scalar>(
    g: Vector3<T>,
    objects: &[SceneObject<T>],
    params: &FieldParams<T>,
) -> Result<Vector3<T>, FieldError> {
    let mut grad = Vector3::zero();
    for (index, o) in objects.iter().enumerate() {
        let x = o.position.to_unit();
        let s = g.dot(x).max(-T::one()).min(T::one());
        if s == T::one() && params.delta.is_zero() {
            return Err(FieldError::Singularity { index });
        }
        let toward = x - g * s;
        let norm = toward.norm();
        if norm.is_zero() {
            continue;
        }
        let d = s.acos();
        let denom = d + params.delta;
        let scale = params.g_const * o.mass / (denom * denom);
        grad = grad - toward * (scale / norm);
    }
    Ok(grad)
}

/// Tile probabilities from the potential at tile centers.
pub fn boltzmann_probs<T: Scalar>(
    grid: TileGrid,
    objects: &[SceneObject<T>],
    params: &FieldParams<T>,
) -> Result<ProbabilityMap<T>, FieldError> {
    let mut potentials = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        potentials.push(potential_at(grid.center(i), objects, params)?);
    }
    Ok(ProbabilityMap::from_potentials(&potentials, params.beta))
}

/// One momentum step of the gaze dynamics.
///
/// `v' = gamma v - eta grad U(g) + sqrt(2 eta sigma) xi`, with `xi` a fresh
/// standard-normal 3-vector projected onto the tangent plane; then
/// `g' = normalize(g + dt v')` and `v'` is re-projected onto the tangent
/// plane at `g'`. Three normal draws are consumed even when `sigma = 0`, so
/// matched-seed runs stay aligned across ablations.
pub fn step_gaze<T: Scalar, R: Rng + ?Sized>(
    state: &GazeState<T>,
    objects: &[SceneObject<T>],
    params: &FieldParams<T>,
    rng: &mut R,
) -> Result<GazeState<T>, FieldError> {
    let grad = potential_gradient(state.g, objects, params)?;
    let xi = Vector3::new(
        T::sample_std_normal(rng),
        T::sample_std_normal(rng),
        T::sample_std_normal(rng),
    )
    .reject_from_unit(state.g);
    let two = T::from_f64_lossy(2.0);
    let noise_scale = (two * params.eta * params.sigma).sqrt();
    let v_next = state.v * params.gamma - grad * params.eta + xi * noise_scale;
    let raw = state.g + v_next * params.dt;
    let g_next = if raw.norm() > T::from_f64_lossy(1e-9) {
        raw.normalized()
    } else {
        state.g
    };
    Ok(GazeState {
        g: g_next,
        v: v_next.reject_from_unit(g_next),
    })
}

/// Prediction for one control period.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    /// Gaze state after rolling the dynamics across the period.
    pub gaze: GazeState<T>,
    /// Tile probabilities at the end-of-period scene.
    pub probs: ProbabilityMap<T>,
    /// Tiles of the predicted viewport.
    pub tiles: TileSet,
}

/// Rolls the gaze dynamics across one control period and derives the
/// predicted viewport and tile probabilities.
///
/// `forecast` supplies scene states per dynamics step; a shorter slice is
/// held at its last element (zero-order hold), and an empty slice means an
/// empty scene. The input state is untouched on error so the caller can
/// record the incident and retry next period.
pub fn predict_viewport<T: Scalar, R: Rng + ?Sized>(
    state: &GazeState<T>,
    forecast: &[SceneState<T>],
    grid: TileGrid,
    fov_deg: T,
    params: &FieldParams<T>,
    rng: &mut R,
) -> Result<Prediction<T>, FieldError> {
    let empty: Vec<SceneObject<T>> = Vec::new();
    let objects_at = |k: usize| -> &[SceneObject<T>] {
        if forecast.is_empty() {
            &empty
        } else {
            &forecast[k.min(forecast.len() - 1)].objects
        }
    };
    let mut current = *state;
    for k in 0..params.steps_per_chunk as usize {
        current = step_gaze(&current, objects_at(k), params, rng)?;
    }
    let final_objects = objects_at(params.steps_per_chunk.saturating_sub(1) as usize);
    let probs = boltzmann_probs(grid, final_objects, params)?;
    let tiles = viewport_tiles(Viewport::new(current.coord(), fov_deg), grid);
    Ok(Prediction { gaze: current, probs, tiles })
}

/// Field-layer failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FieldError {
    #[error("object {index} coincides with the query point while delta is zero")]
    Singularity { index: usize },
    #[error("field parameters out of range")]
    InvalidParams,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::scene::{MassTable, ObjectClass, SceneObject};
    use std::f64::consts::FRAC_PI_2;

    fn object(id: &str, theta: f64, phi: f64, mass: f64) -> SceneObject<f64> {
        SceneObject {
            id: id.into(),
            class: ObjectClass::Pedestrian,
            position: SphericalCoord::new(theta, phi),
            mass,
        }
    }

    fn params() -> FieldParams<f64> {
        FieldParams::default()
    }

    #[test]
    fn default_params_validate() {
        params().validate().unwrap();
        let bad = FieldParams { beta: 0.0, ..params() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_scene_has_zero_potential() {
        let u = potential_at(SphericalCoord::new(0.3, 0.2), &[], &params()).unwrap();
        assert_eq!(u, 0.0);
        let g = potential_gradient(Vector3::new(1.0, 0.0, 0.0), &[], &params()).unwrap();
        assert_eq!(g, Vector3::zero());
    }

    #[test]
    fn two_unit_masses_at_quarter_turn() {
        // Both objects a quarter turn away: U = -2 / (pi/2 + 1).
        let p = SphericalCoord::new(0.0, 0.0);
        let objects = vec![
            object("a", FRAC_PI_2, 0.0, 1.0),
            object("b", 0.0, FRAC_PI_2, 1.0),
        ];
        let u = potential_at(p, &objects, &params()).unwrap();
        let expected = -2.0 / (FRAC_PI_2 + 1.0);
        assert!((u - expected).abs() < 1e-12, "{u} vs {expected}");
        assert!((u - (-0.77797)).abs() < 1e-5);
    }

    #[test]
    fn potential_is_monotone_in_distance() {
        let objects = vec![object("a", 0.0, 0.0, 1.0)];
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=10 {
            let p = SphericalCoord::new(0.3 * k as f64, 0.0);
            let u = potential_at(p, &objects, &params()).unwrap();
            assert!(u > prev, "potential must relax away from the object");
            prev = u;
        }
    }

    #[test]
    fn gradient_magnitude_at_unit_distance() {
        // Single unit mass one radian away: |grad U| = 1 / (1 + 1)^2 = 0.25,
        // pointing away from the object (descent heads toward it).
        let g = SphericalCoord::new(0.0, 0.0).to_unit();
        let objects = vec![object("a", 1.0, 0.0, 1.0)];
        let grad = potential_gradient(g, &objects, &params()).unwrap();
        assert!((grad.norm() - 0.25).abs() < 1e-12, "norm {}", grad.norm());
        let toward = (objects[0].position.to_unit() - g * g.dot(objects[0].position.to_unit()))
            .normalized();
        let along = grad.dot(toward);
        assert!((along + 0.25).abs() < 1e-12, "gradient points away: {along}");
        assert!(grad.dot(g).abs() < 1e-12, "gradient stays tangent");
    }

    #[test]
    fn gradient_at_object_is_stationary() {
        let g = SphericalCoord::new(0.4, 0.1).to_unit();
        let objects = vec![object("a", 0.4, 0.1, 1.0)];
        let grad = potential_gradient(g, &objects, &params()).unwrap();
        assert_eq!(grad, Vector3::zero());
    }

    #[test]
    fn delta_zero_at_object_is_singular() {
        let p = SphericalCoord::new(0.4, 0.1);
        let objects = vec![object("a", 0.4, 0.1, 1.0)];
        let zero_delta = FieldParams { delta: 0.0, ..params() };
        assert_eq!(
            potential_at(p, &objects, &zero_delta),
            Err(FieldError::Singularity { index: 0 })
        );
        assert_eq!(
            potential_gradient(p.to_unit(), &objects, &zero_delta),
            Err(FieldError::Singularity { index: 0 })
        );
        // The softened field is fine at the same point.
        assert!(potential_at(p, &objects, &params()).is_ok());
    }

    #[test]
    fn boltzmann_two_tile_example() {
        // Potentials (0, 2 ln 2) at beta = 0.5 give probabilities (2/3, 1/3).
        let probs = ProbabilityMap::from_potentials(&[0.0, 2.0 * 2.0f64.ln()], 0.5);
        assert!((probs.as_slice()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((probs.as_slice()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_is_shift_invariant_and_normalized() {
        let base = [0.0, -1.5, 2.0, 0.25];
        let shifted: Vec<f64> = base.iter().map(|u| u + 123.0).collect();
        let a = ProbabilityMap::from_potentials(&base, 0.5);
        let b = ProbabilityMap::from_potentials(&shifted, 0.5);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let sum: f64 = a.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        // Extreme potentials survive the max-shift.
        let extreme = ProbabilityMap::from_potentials(&[-4000.0f64, 0.0], 0.5);
        assert!(extreme.as_slice()[0].is_finite());
        assert!((extreme.as_slice()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_uniform_and_point_mass() {
        let uniform = ProbabilityMap::<f64>::uniform(32);
        assert!((uniform.entropy() - 32.0f64.ln()).abs() < 1e-12);
        let point = ProbabilityMap::from_potentials(&[0.0, 1e6], 1.0);
        assert!(point.entropy() < 1e-6);
    }

    #[test]
    fn stationary_without_forces_and_noise() {
        let frozen = FieldParams { gamma: 0.0, sigma: 0.0, ..params() };
        let state = GazeState::<f64>::default();
        let mut r = rng::stream(5);
        let next = step_gaze(&state, &[], &frozen, &mut r).unwrap();
        assert_eq!(next.g, state.g);
        assert_eq!(next.v, Vector3::zero());
    }

    #[test]
    fn step_preserves_unit_norm_and_tangency() {
        let objects = vec![object("a", 1.2, 0.3, 1.0), object("b", -0.5, -0.4, 0.8)];
        let mut state = GazeState::<f64>::default();
        let mut r = rng::stream(11);
        for _ in 0..500 {
            state = step_gaze(&state, &objects, &params(), &mut r).unwrap();
            assert!((state.g.norm() - 1.0).abs() < 1e-12);
            assert!(state.v.dot(state.g).abs() < 1e-12);
            assert!(state.g.is_finite() && state.v.is_finite());
        }
    }

    #[test]
    fn step_is_robust_at_the_pole() {
        let near_pole = SphericalCoord::new(0.7, FRAC_PI_2 - 1.0f64.to_radians());
        let mut state = GazeState::at(near_pole);
        let objects = vec![object("a", 0.7, FRAC_PI_2 - 0.1, 1.0)];
        let mut r = rng::stream(13);
        for _ in 0..200 {
            state = step_gaze(&state, &objects, &params(), &mut r).unwrap();
            assert!(state.g.is_finite(), "pole step produced non-finite gaze");
            assert!((state.g.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn heavier_attractor_wins_from_the_midpoint() {
        let heavy = object("heavy", 0.8, 0.0, 1.0);
        let light = object("light", -0.8, 0.0, 0.5);
        let objects = vec![heavy.clone(), light.clone()];
        let quiet = FieldParams { sigma: 0.0, ..params() };
        let mut state = GazeState::<f64>::default();
        let mut r = rng::stream(17);
        for _ in 0..400 {
            state = step_gaze(&state, &objects, &quiet, &mut r).unwrap();
        }
        let c = state.coord();
        let d_heavy = crate::sphere::haversine_distance(c, heavy.position);
        let d_light = crate::sphere::haversine_distance(c, light.position);
        assert!(
            d_heavy < d_light && d_heavy < 0.3,
            "gaze ended {d_heavy} rad from the heavy mass, {d_light} from the light one"
        );
    }

    #[test]
    fn prediction_returns_consistent_shapes() {
        let grid = TileGrid::default();
        let table = MassTable::<f64>::default();
        let script = crate::scene::SceneScript {
            name: "single".into(),
            objects: vec![crate::scene::ScriptObject {
                id: "p".into(),
                class: ObjectClass::Pedestrian,
                enter: 0.0,
                exit: f64::INFINITY,
                enter_jitter: 0.0,
                mass: None,
                path: crate::scene::PathSpec::Static { position: [0.6, 0.1] },
            }],
        };
        let forecast: Vec<_> = (0..20)
            .map(|k| script.state_at(k as f64 * 0.1, &table))
            .collect();
        let mut r = rng::stream(23);
        let state = GazeState::<f64>::default();
        let pred =
            predict_viewport(&state, &forecast, grid, 80.0, &params(), &mut r).unwrap();
        assert_eq!(pred.probs.len(), grid.len());
        let sum: f64 = pred.probs.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(!pred.tiles.is_empty());
        assert!((pred.gaze.g.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_with_empty_forecast_uses_empty_scene() {
        let grid = TileGrid::default();
        let quiet = FieldParams { gamma: 0.0, sigma: 0.0, ..params() };
        let mut r = rng::stream(29);
        let state = GazeState::<f64>::default();
        let pred = predict_viewport(&state, &[], grid, 80.0, &quiet, &mut r).unwrap();
        assert_eq!(pred.gaze.g, state.g);
        for &p in pred.probs.as_slice() {
            assert!((p - 1.0 / 32.0).abs() < 1e-12, "uniform over an empty scene");
        }
    }
}

//! Trace-driven simulator for tile-based 360-degree adaptive streaming.
//!
//! The crate models a teleoperation-style viewing session: a spherical video
//! is split into an equirectangular tile grid, a semantic potential field
//! predicts where the operator will look, a saturated PD controller picks the
//! aggregate bitrate, and a probability-weighted allocator spreads it across
//! tiles. Classical ABR policies (buffer-based, rate-based, BOLA, MPC) and
//! extrapolation-based viewport baselines run in the same engine for
//! comparison, driven by capacity traces and scripted scenes under a
//! deterministic Monte Carlo harness.
//!
//! The geometry, field, controller, and policy math is generic over
//! [`Scalar`] (f32 or f64); the simulation engine and trace plumbing are
//! concrete f64, re-exported through the aliases below.

pub mod abr;
pub mod channel;
pub mod controller;
pub mod engine;
pub mod field;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod scene;
pub mod sphere;
pub mod suite;

pub use scalar::Scalar;

/// Scalar type used by the concrete simulation stack.
pub type Real = f64;
/// Spherical coordinate on the f64 stack.
pub type Coord = sphere::SphericalCoord<Real>;
/// Cartesian vector on the f64 stack.
pub type Vec3 = sphere::Vector3<Real>;
/// Field parameters on the f64 stack.
pub type FieldParams = field::FieldParams<Real>;
/// Gaze state on the f64 stack.
pub type GazeState = field::GazeState<Real>;
/// Tile probability map on the f64 stack.
pub type ProbabilityMap = field::ProbabilityMap<Real>;
/// Controller parameters on the f64 stack.
pub type ControllerParams = controller::ControllerParams<Real>;
/// Quality ladder on the f64 stack.
pub type QualityLadder = controller::QualityLadder<Real>;
/// QoE parameters on the f64 stack.
pub type QoeParams = metrics::QoeParams<Real>;
/// Semantic mass table on the f64 stack.
pub type MassTable = scene::MassTable<Real>;

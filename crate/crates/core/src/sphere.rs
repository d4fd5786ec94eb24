//! Spherical geometry: coordinates, great-circle distance, the
//! equirectangular tile grid, and viewport tile membership.
//!
//! Conventions: `theta` is yaw in `[-pi, pi)`, `phi` is pitch in
//! `[-pi/2, pi/2]`, positive toward the north pole. The Cartesian embedding is
//! `x = cos(phi) cos(theta)`, `y = cos(phi) sin(theta)`, `z = sin(phi)`.

use std::collections::BTreeSet;
use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;

/// Set of tile indices; ordered so iteration and serialization are stable.
pub type TileSet = BTreeSet<usize>;

/// Direction on the unit sphere in yaw/pitch form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord<T> {
    /// Yaw in radians, `[-pi, pi)`.
    pub theta: T,
    /// Pitch in radians, `[-pi/2, pi/2]`.
    pub phi: T,
}

impl<T: Scalar> SphericalCoord<T> {
    pub fn new(theta: T, phi: T) -> Self {
        Self { theta, phi }
    }

    /// Wraps yaw and clamps pitch into the canonical ranges.
    pub fn normalized(self) -> Self {
        let half_pi = T::FRAC_PI_2();
        Self {
            theta: wrap_theta(self.theta),
            phi: self.phi.max(-half_pi).min(half_pi),
        }
    }

    /// Cartesian embedding on the unit sphere.
    pub fn to_unit(self) -> Vector3<T> {
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        Vector3::new(cp * ct, cp * st, sp)
    }

    /// Inverse of [`Self::to_unit`]. At a pole yaw is zero by convention.
    pub fn from_unit(v: Vector3<T>) -> Self {
        let z = v.z.max(-T::one()).min(T::one());
        let phi = z.asin();
        let theta = if v.x.is_zero() && v.y.is_zero() {
            T::zero()
        } else {
            v.y.atan2(v.x)
        };
        Self { theta, phi }
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_theta<T: Scalar>(theta: T) -> T {
    let pi = T::PI();
    // Exact passthrough in range keeps wrapping idempotent bit-for-bit.
    if theta >= -pi && theta < pi {
        return theta;
    }
    let two_pi = pi + pi;
    let mut x = (theta + pi) % two_pi;
    if x < T::zero() {
        x = x + two_pi;
    }
    x - pi
}

/// Great-circle distance via the haversine formula, in `[0, pi]`.
pub fn haversine_distance<T: Scalar>(a: SphericalCoord<T>, b: SphericalCoord<T>) -> T {
    let half = T::from_f64_lossy(0.5);
    let two = T::from_f64_lossy(2.0);
    let sp = ((a.phi - b.phi) * half).sin();
    let st = ((a.theta - b.theta) * half).sin();
    let h = sp * sp + a.phi.cos() * b.phi.cos() * st * st;
    two * h.max(T::zero()).sqrt().min(T::one()).asin()
}

/// Plain 3-vector used for the Cartesian sphere math.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vector3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    /// Unit-length copy; the zero vector is returned unchanged.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n.is_zero() {
            self
        } else {
            self * (T::one() / n)
        }
    }

    /// Component of `self` orthogonal to the unit vector `g`.
    pub fn reject_from_unit(self, g: Self) -> Self {
        self - g * self.dot(g)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Scalar> Add for Vector3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> Sub for Vector3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> Mul<T> for Vector3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Scalar> Neg for Vector3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Equirectangular tile grid; tiles are indexed row-major from the top
/// (north) row, west to east.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TileGrid {
    pub cols: usize,
    pub rows: usize,
}

impl TileGrid {
    pub fn new(cols: usize, rows: usize) -> Self {
        Self { cols, rows }
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center direction of the given tile.
    pub fn center<T: Scalar>(&self, index: usize) -> SphericalCoord<T> {
        debug_assert!(index < self.len());
        let col = index % self.cols;
        let row = index / self.cols;
        let half = T::from_f64_lossy(0.5);
        let pi = T::PI();
        let theta = -pi + (T::from_f64_lossy(col as f64) + half) * (pi + pi)
            / T::from_f64_lossy(self.cols as f64);
        let phi = T::FRAC_PI_2()
            - (T::from_f64_lossy(row as f64) + half) * pi / T::from_f64_lossy(self.rows as f64);
        SphericalCoord::new(theta, phi)
    }

    /// All tile centers, row-major.
    pub fn centers<T: Scalar>(&self) -> Vec<SphericalCoord<T>> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Solid angle subtended by the given tile, in steradians.
    pub fn solid_angle<T: Scalar>(&self, index: usize) -> T {
        debug_assert!(index < self.len());
        let row = index / self.cols;
        let pi = T::PI();
        let half_pi = T::FRAC_PI_2();
        let band = pi / T::from_f64_lossy(self.rows as f64);
        let top = half_pi - T::from_f64_lossy(row as f64) * band;
        let bottom = top - band;
        (pi + pi) / T::from_f64_lossy(self.cols as f64) * (top.sin() - bottom.sin())
    }

    /// Per-tile solid angles normalized to sum to one.
    pub fn solid_angle_weights<T: Scalar>(&self) -> Vec<T> {
        let raw: Vec<T> = (0..self.len()).map(|i| self.solid_angle(i)).collect();
        let total: T = raw.iter().copied().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

impl Default for TileGrid {
    fn default() -> Self {
        Self::new(8, 4)
    }
}

/// Viewing region: a center direction plus a circular field of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport<T> {
    pub center: SphericalCoord<T>,
    /// Full field-of-view angle in degrees, matching configuration files.
    pub fov_deg: T,
}

impl<T: Scalar> Viewport<T> {
    pub fn new(center: SphericalCoord<T>, fov_deg: T) -> Self {
        Self { center, fov_deg }
    }

    /// Angular radius of the viewport in radians.
    pub fn half_angle(&self) -> T {
        self.fov_deg.to_radians() * T::from_f64_lossy(0.5)
    }
}

/// Tiles whose centers lie within the viewport's angular radius.
pub fn viewport_tiles<T: Scalar>(viewport: Viewport<T>, grid: TileGrid) -> TileSet {
    let radius = viewport.half_angle();
    (0..grid.len())
        .filter(|&i| haversine_distance(viewport.center, grid.center(i)) <= radius)
        .collect()
}

/// Intersection-over-union of two tile sets; two empty sets have IoU 1.
pub fn tile_set_iou(a: &TileSet, b: &TileSet) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const EPS: f64 = 1e-12;

    #[test]
    fn distance_examples() {
        let pole = SphericalCoord::new(0.0, FRAC_PI_2);
        let equator = SphericalCoord::new(0.0, 0.0);
        assert!((haversine_distance(pole, equator) - FRAC_PI_2).abs() < EPS);
        assert!(haversine_distance(equator, equator).abs() < EPS);
        let anti = SphericalCoord::new(PI - 1e-15, 0.0);
        let west = SphericalCoord::new(-1e-15, 0.0);
        assert!((haversine_distance(anti, west) - PI).abs() < 1e-9);
    }

    #[test]
    fn distance_is_symmetric() {
        let a = SphericalCoord::new(1.1, 0.4);
        let b = SphericalCoord::new(-2.0, -0.9);
        assert_eq!(haversine_distance(a, b), haversine_distance(b, a));
    }

    #[test]
    fn cartesian_roundtrip() {
        for &(theta, phi) in &[(0.0f64, 0.0f64), (1.0, 0.5), (-2.5, -1.2), (3.0, 1.5)] {
            let c = SphericalCoord::new(theta, phi);
            let back = SphericalCoord::from_unit(c.to_unit());
            assert!((back.theta - theta).abs() < 1e-12, "theta {theta}");
            assert!((back.phi - phi).abs() < 1e-12, "phi {phi}");
        }
    }

    #[test]
    fn pole_inverse_uses_zero_yaw() {
        let north = SphericalCoord::from_unit(Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(north.theta, 0.0);
        assert!((north.phi - FRAC_PI_2).abs() < EPS);
        let south = SphericalCoord::from_unit(Vector3::new(0.0, 0.0, -1.0));
        assert_eq!(south.theta, 0.0);
    }

    #[test]
    fn wrap_theta_range() {
        assert!((wrap_theta(3.0 * PI) - (-PI)).abs() < 1e-12 || wrap_theta(3.0 * PI) < PI);
        for &t in &[-10.0, -PI, -0.5, 0.0, 0.5, PI, 10.0, 123.456] {
            let w: f64 = wrap_theta(t);
            assert!((-PI..PI).contains(&w), "wrap({t}) = {w}");
            // Same direction modulo 2*pi.
            assert!(((w - t) / (2.0 * PI)).fract().abs() < 1e-9 || ((w - t) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn default_grid_centers() {
        let grid = TileGrid::default();
        assert_eq!(grid.len(), 32);
        let c0: SphericalCoord<f64> = grid.center(0);
        assert!((c0.theta - (-PI + PI / 8.0)).abs() < EPS);
        assert!((c0.phi - 3.0 * PI / 8.0).abs() < EPS);
        // Top-row centers sit 22.5 degrees from the pole.
        let pole = SphericalCoord::new(0.0, FRAC_PI_2);
        for i in 0..8 {
            let d = haversine_distance(pole, grid.center(i));
            assert!((d - 22.5f64.to_radians()).abs() < 1e-12, "tile {i}: {d}");
        }
    }

    #[test]
    fn solid_angles_cover_the_sphere() {
        for grid in [TileGrid::default(), TileGrid::new(5, 3), TileGrid::new(16, 8)] {
            let total: f64 = (0..grid.len()).map(|i| grid.solid_angle::<f64>(i)).sum();
            assert!(
                (total - 4.0 * PI).abs() < 1e-6,
                "grid {grid:?} covers {total}"
            );
            let weights = grid.solid_angle_weights::<f64>();
            let wsum: f64 = weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pole_viewport_is_the_top_row() {
        let grid = TileGrid::default();
        let vp = Viewport::new(SphericalCoord::new(0.0, FRAC_PI_2), 80.0);
        let tiles = viewport_tiles(vp, grid);
        let expected: TileSet = (0..8).collect();
        assert_eq!(tiles, expected);
    }

    #[test]
    fn viewport_grows_with_fov() {
        let grid = TileGrid::default();
        let center = SphericalCoord::new(0.3, 0.1);
        let mut prev = 0usize;
        for fov in [40.0, 80.0, 120.0, 200.0, 360.0] {
            let n = viewport_tiles(Viewport::new(center, fov), grid).len();
            assert!(n >= prev, "fov {fov} shrank the viewport");
            prev = n;
        }
        assert_eq!(prev, 32, "360-degree viewport must cover every tile");
    }

    #[test]
    fn iou_cases() {
        let a: TileSet = [0, 1].into_iter().collect();
        let b: TileSet = [1, 2].into_iter().collect();
        let empty = TileSet::new();
        assert_eq!(tile_set_iou(&a, &a), 1.0);
        assert!((tile_set_iou(&a, &b) - 1.0 / 3.0).abs() < EPS);
        assert_eq!(tile_set_iou(&a, &empty), 0.0);
        assert_eq!(tile_set_iou(&empty, &empty), 1.0);
    }

    #[test]
    fn generic_math_works_in_f32() {
        let a = SphericalCoord::new(0.0f32, FRAC_PI_2 as f32);
        let b = SphericalCoord::new(0.0f32, 0.0f32);
        assert!((haversine_distance(a, b) - FRAC_PI_2 as f32).abs() < 1e-6);
        let grid = TileGrid::default();
        let c: SphericalCoord<f32> = grid.center(0);
        assert!(c.phi > 0.0);
    }
}

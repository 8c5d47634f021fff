//! Encoder-free odometry: an extended Kalman filter over `[x, y, heading, speed]`
//! that propagates with IMU yaw rate and forward acceleration and corrects
//! with GNSS position fixes.
//!
//! The motion model is a unicycle integrated with one forward-Euler step per
//! call, using the heading and speed at the start of the interval:
//!
//! ```text
//! x' = x + v cos(h) dt      h' = h + yaw_rate dt
//! y' = y + v sin(h) dt      v' = v + accel dt
//! ```
//!
//! Callers are expected to predict at IMU rate (dt around 0.02 s).

use nalgebra::{Matrix2, Matrix4, Matrix4x2, RowVector4, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::geometry::normalize_angle as normalize_heading;
use crate::geometry::normalize_angle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("non-finite input to filter")]
    NonFiniteInput,
    #[error("sample interval must be positive, got {0}")]
    BadInterval(f64),
    #[error("innovation covariance is singular")]
    SingularInnovation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    /// `[x (m), y (m), heading (rad), speed (m/s)]`
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl StateEstimate {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64, cov: Matrix4<f64>) -> Self {
        Self {
            mean: Vector4::new(x, y, normalize_angle(heading), speed),
            cov,
        }
    }

    pub fn x(&self) -> f64 {
        self.mean[0]
    }

    pub fn y(&self) -> f64 {
        self.mean[1]
    }

    pub fn heading(&self) -> f64 {
        self.mean[2]
    }

    pub fn speed(&self) -> f64 {
        self.mean[3]
    }

    pub fn pose(&self) -> crate::geometry::Pose2 {
        crate::geometry::Pose2::new(self.x(), self.y(), self.heading())
    }

    /// Trace of the (x, y) block of the covariance.
    pub fn position_variance(&self) -> f64 {
        self.cov[(0, 0)] + self.cov[(1, 1)]
    }

    fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && self.cov.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// rad/s
    pub yaw_rate: f64,
    /// m/s^2 along the hull axis
    pub forward_accel: f64,
    /// s
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssFix {
    pub z: Vector2<f64>,
    pub r: Matrix2<f64>,
}

impl GnssFix {
    pub fn isotropic(x: f64, y: f64, sigma: f64) -> Self {
        Self {
            z: Vector2::new(x, y),
            r: Matrix2::identity() * sigma * sigma,
        }
    }
}

/// Continuous-time process noise density; multiplied by `dt` at each predict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoise {
    pub q: Matrix4<f64>,
}

impl ProcessNoise {
    pub fn diagonal(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self {
            q: Matrix4::from_diagonal(&Vector4::new(x, y, heading, speed)),
        }
    }

    pub fn zero() -> Self {
        Self { q: Matrix4::zeros() }
    }
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self::diagonal(1e-4, 1e-4, 1e-5, 1e-3)
    }
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Time update.
pub fn predict(
    est: &StateEstimate,
    u: &ImuSample,
    noise: &ProcessNoise,
) -> Result<StateEstimate, LocalizationError> {
    if !(u.dt.is_finite() && u.yaw_rate.is_finite() && u.forward_accel.is_finite()) || !est.is_finite() {
        return Err(LocalizationError::NonFiniteInput);
    }
    if u.dt <= 0.0 {
        return Err(LocalizationError::BadInterval(u.dt));
    }
    let dt = u.dt;
    let (s, c) = est.heading().sin_cos();
    let v = est.speed();

    let mean = Vector4::new(
        est.x() + v * c * dt,
        est.y() + v * s * dt,
        normalize_angle(est.heading() + u.yaw_rate * dt),
        v + u.forward_accel * dt,
    );

    let mut f = Matrix4::identity();
    f[(0, 2)] = -v * s * dt;
    f[(0, 3)] = c * dt;
    f[(1, 2)] = v * c * dt;
    f[(1, 3)] = s * dt;

    let cov = symmetrize(&(f * est.cov * f.transpose() + noise.q * dt));
    Ok(StateEstimate { mean, cov })
}

/// Measurement update with a GNSS position fix; `h(x) = (x, y)`.
pub fn update_gnss(est: &StateEstimate, fix: &GnssFix) -> Result<StateEstimate, LocalizationError> {
    if !est.is_finite() || !fix.z.iter().chain(fix.r.iter()).all(|v| v.is_finite()) {
        return Err(LocalizationError::NonFiniteInput);
    }
    let h = nalgebra::Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let innovation = fix.z - Vector2::new(est.x(), est.y());
    let s = h * est.cov * h.transpose() + fix.r;
    let s_inv = invert_2x2(&s).ok_or(LocalizationError::SingularInnovation)?;
    let k: Matrix4x2<f64> = est.cov * h.transpose() * s_inv;

    let mut mean = est.mean + k * innovation;
    mean[2] = normalize_angle(mean[2]);
    let cov = symmetrize(&((Matrix4::identity() - k * h) * est.cov));
    Ok(StateEstimate { mean, cov })
}

/// Optional absolute heading correction (AHRS yaw), innovation wrapped to `(-pi, pi]`.
pub fn update_heading(
    est: &StateEstimate,
    heading: f64,
    variance: f64,
) -> Result<StateEstimate, LocalizationError> {
    if !est.is_finite() || !heading.is_finite() || !variance.is_finite() {
        return Err(LocalizationError::NonFiniteInput);
    }
    let h = RowVector4::new(0.0, 0.0, 1.0, 0.0);
    let s = est.cov[(2, 2)] + variance;
    if s.abs() < 1e-15 {
        return Err(LocalizationError::SingularInnovation);
    }
    let innovation = normalize_angle(heading - est.heading());
    let k: Vector4<f64> = est.cov * h.transpose() / s;
    let mut mean = est.mean + k * innovation;
    mean[2] = normalize_angle(mean[2]);
    let cov = symmetrize(&((Matrix4::identity() - k * h) * est.cov));
    Ok(StateEstimate { mean, cov })
}

fn invert_2x2(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !det.is_finite() || det.abs() <= 1e-300 || det.abs() <= f64::EPSILON * scale * scale * 1e-6 {
        return None;
    }
    Some(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn diag(a: f64, b: f64, c: f64, d: f64) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(a, b, c, d))
    }

    #[test]
    fn stationary_predict_adds_exactly_q() {
        let est = StateEstimate::new(3.0, -1.0, 0.4, 0.0, Matrix4::zeros());
        let q = ProcessNoise::default();
        let u = ImuSample { yaw_rate: 0.0, forward_accel: 0.0, dt: 1.0 };
        let out = predict(&est, &u, &q).unwrap();
        assert_eq!(out.mean, est.mean);
        assert_eq!(out.cov, q.q);
    }

    #[test]
    fn straight_line_advance() {
        let est = StateEstimate::new(0.0, 0.0, 0.0, 1.0, Matrix4::identity());
        let u = ImuSample { yaw_rate: 0.0, forward_accel: 0.0, dt: 2.0 };
        let out = predict(&est, &u, &ProcessNoise::zero()).unwrap();
        assert_eq!(out.x(), 2.0);
        assert_eq!(out.y(), 0.0);
    }

    #[test]
    fn turning_euler_matches_fine_integration() {
        // one second of a pi/2 rad/s turn, split into 50 Euler steps at IMU rate
        let mut est = StateEstimate::new(0.0, 0.0, 0.0, 1.0, Matrix4::zeros());
        for _ in 0..50 {
            let u = ImuSample { yaw_rate: FRAC_PI_2, forward_accel: 0.0, dt: 0.02 };
            est = predict(&est, &u, &ProcessNoise::zero()).unwrap();
        }
        // reference: 1000 midpoint sub-steps of the same unicycle
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
        let h = 1.0 / 1000.0;
        for _ in 0..1000 {
            let mid = th + FRAC_PI_2 * h / 2.0;
            x += mid.cos() * h;
            y += mid.sin() * h;
            th += FRAC_PI_2 * h;
        }
        assert!((est.heading() - FRAC_PI_2).abs() < 1e-12);
        assert!((est.x() - x).hypot(est.y() - y) < 0.05);
        // and the closed-form arc, as a second check on the reference
        assert!((x - 2.0 / PI).abs() < 1e-6 && (y - 2.0 / PI).abs() < 1e-6);
    }

    #[test]
    fn perfect_measurement_snaps_position() {
        let est = StateEstimate::new(1.0, 1.0, 0.2, 0.5, diag(4.0, 4.0, 0.1, 0.1));
        let fix = GnssFix { z: Vector2::new(5.0, 7.0), r: Matrix2::identity() * 1e-12 };
        let out = update_gnss(&est, &fix).unwrap();
        assert!((out.x() - 5.0).abs() < 1e-6);
        assert!((out.y() - 7.0).abs() < 1e-6);
    }

    #[test]
    fn scalar_gain_is_half_for_equal_variances() {
        let est = StateEstimate::new(2.0, -4.0, 0.0, 0.0, diag(1.0, 1.0, 0.3, 0.3));
        let fix = GnssFix { z: Vector2::new(6.0, 0.0), r: Matrix2::identity() };
        let out = update_gnss(&est, &fix).unwrap();
        // K = P / (P + R) = 0.5; posterior mean is the midpoint, variance halves
        assert!((out.x() - 4.0).abs() < 1e-12);
        assert!((out.y() + 2.0).abs() < 1e-12);
        assert!((out.cov[(0, 0)] - 0.5).abs() < 1e-12);
        assert_eq!(out.heading(), 0.0);
    }

    #[test]
    fn zero_innovation_keeps_mean_and_shrinks_cov() {
        let est = StateEstimate::new(2.0, 3.0, 0.1, 0.2, diag(2.0, 2.0, 0.1, 0.1));
        let out = update_gnss(&est, &GnssFix::isotropic(2.0, 3.0, 0.5)).unwrap();
        assert_eq!(out.mean, est.mean);
        assert!(out.position_variance() < est.position_variance());
    }

    #[test]
    fn singular_innovation_is_reported() {
        let est = StateEstimate::new(0.0, 0.0, 0.0, 0.0, Matrix4::zeros());
        let fix = GnssFix { z: Vector2::new(1.0, 1.0), r: Matrix2::zeros() };
        assert_eq!(update_gnss(&est, &fix), Err(LocalizationError::SingularInnovation));
    }

    #[test]
    fn rejects_bad_inputs() {
        let est = StateEstimate::new(0.0, 0.0, 0.0, 0.0, Matrix4::identity());
        let bad = ImuSample { yaw_rate: f64::NAN, forward_accel: 0.0, dt: 0.1 };
        assert_eq!(predict(&est, &bad, &ProcessNoise::zero()), Err(LocalizationError::NonFiniteInput));
        let zero_dt = ImuSample { yaw_rate: 0.0, forward_accel: 0.0, dt: 0.0 };
        assert!(matches!(predict(&est, &zero_dt, &ProcessNoise::zero()), Err(LocalizationError::BadInterval(_))));
    }

    #[test]
    fn heading_update_wraps_innovation() {
        let est = StateEstimate::new(0.0, 0.0, PI - 0.05, 0.0, diag(1.0, 1.0, 0.1, 0.1));
        let out = update_heading(&est, -PI + 0.05, 0.1).unwrap();
        // midpoint across the seam, not through zero
        assert!((out.heading().abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn deterministic_without_noise() {
        let run = || {
            let mut e = StateEstimate::new(0.0, 0.0, 0.3, 0.7, diag(0.1, 0.1, 0.01, 0.01));
            for i in 0..500 {
                let u = ImuSample { yaw_rate: (i as f64 * 0.01).sin(), forward_accel: 0.01, dt: 0.02 };
                e = predict(&e, &u, &ProcessNoise::zero()).unwrap();
            }
            e
        };
        let (a, b) = (run(), run());
        assert!(a.mean.iter().zip(b.mean.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(a.cov.iter().zip(b.cov.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

//! Constant-velocity Kalman filter over `[x, y, a, h, dx, dy, da, dh]`.
//!
//! Noise magnitudes follow the usual height-proportional convention so the
//! filter is independent of image resolution. On top of the standard update
//! the filter can scale the measurement noise by detection confidence
//! (`R * (1 - score^2)`) and blend the post-update velocity with the
//! pre-update one using the same confidence.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundingBox, Detection, GeometryError};

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
pub type MeasurementVector = SVector<f64, 4>;
pub type MeasurementCovariance = SMatrix<f64, 4, 4>;

type ObservationMatrix = SMatrix<f64, 4, 8>;

// Aspect ratio is dimensionless, so its noise is a fixed magnitude rather
// than proportional to height.
const ASPECT_STD_INIT: f64 = 1e-2;
const ASPECT_VEL_STD_INIT: f64 = 1e-5;
const ASPECT_STD_PROCESS: f64 = 1e-2;
const ASPECT_VEL_STD_PROCESS: f64 = 1e-5;
const ASPECT_STD_MEASUREMENT: f64 = 1e-1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KalmanError {
    #[error("detection score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("invalid measurement")]
    InvalidMeasurement(#[from] GeometryError),
    #[error("projected state is not a valid box (a = {a}, h = {h})")]
    InvalidState { a: f64, h: f64 },
    #[error("innovation covariance is not finite")]
    SingularInnovation,
}

/// Noise weights and the confidence-aware update toggles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
    pub use_confidence_noise: bool,
    pub use_velocity_blend: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            use_confidence_noise: true,
            use_velocity_blend: true,
        }
    }
}

impl NoiseConfig {
    /// Plain Kalman update with no confidence weighting.
    pub fn standard() -> Self {
        Self {
            use_confidence_noise: false,
            use_velocity_blend: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.std_weight_position) || !ok(self.std_weight_velocity) {
            return Err(format!(
                "noise weights must be positive (position {}, velocity {})",
                self.std_weight_position, self.std_weight_velocity
            ));
        }
        Ok(())
    }
}

/// Gaussian track state.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    pub fn position(&self) -> MeasurementVector {
        self.mean.fixed_rows::<4>(0).into_owned()
    }

    pub fn velocity(&self) -> MeasurementVector {
        self.mean.fixed_rows::<4>(4).into_owned()
    }

    /// Box from the first four state components.
    pub fn project(&self) -> Result<BoundingBox, KalmanError> {
        let (a, h) = (self.mean[2], self.mean[3]);
        BoundingBox::new(self.mean[0], self.mean[1], a, h)
            .map_err(|_| KalmanError::InvalidState { a, h })
    }
}

#[derive(Debug, Clone)]
pub struct KalmanFilter {
    config: NoiseConfig,
    motion: StateCovariance,
    observation: ObservationMatrix,
}

impl Default for KalmanFilter {
    fn default() -> Self {
        Self::new(NoiseConfig::default())
    }
}

impl KalmanFilter {
    pub fn new(config: NoiseConfig) -> Self {
        let mut motion = StateCovariance::identity();
        for i in 0..4 {
            motion[(i, i + 4)] = 1.0;
        }
        let observation = ObservationMatrix::identity();
        Self {
            config,
            motion,
            observation,
        }
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    /// New state at the measured box with zero velocity.
    pub fn initiate(&self, measurement: &BoundingBox) -> Result<KalmanState, KalmanError> {
        measurement.validate()?;
        let h = measurement.h;
        let wp = self.config.std_weight_position;
        let wv = self.config.std_weight_velocity;

        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<4>(0)
            .copy_from(&MeasurementVector::from(measurement.to_xyah()));

        let std = StateVector::from([
            2.0 * wp * h,
            2.0 * wp * h,
            ASPECT_STD_INIT,
            2.0 * wp * h,
            10.0 * wv * h,
            10.0 * wv * h,
            ASPECT_VEL_STD_INIT,
            10.0 * wv * h,
        ]);
        let covariance = StateCovariance::from_diagonal(&std.component_mul(&std));
        Ok(KalmanState { mean, covariance })
    }

    /// Process noise for a state whose current height is `h`.
    pub fn process_noise(&self, h: f64) -> StateCovariance {
        let wp = self.config.std_weight_position;
        let wv = self.config.std_weight_velocity;
        let std = StateVector::from([
            wp * h,
            wp * h,
            ASPECT_STD_PROCESS,
            wp * h,
            wv * h,
            wv * h,
            ASPECT_VEL_STD_PROCESS,
            wv * h,
        ]);
        StateCovariance::from_diagonal(&std.component_mul(&std))
    }

    /// Measurement noise `R` before any confidence weighting.
    pub fn measurement_noise(&self, h: f64) -> MeasurementCovariance {
        let wp = self.config.std_weight_position;
        let std = MeasurementVector::from([wp * h, wp * h, ASPECT_STD_MEASUREMENT, wp * h]);
        MeasurementCovariance::from_diagonal(&std.component_mul(&std))
    }

    /// Measurement noise actually used for a detection with `score`.
    pub fn effective_measurement_noise(&self, h: f64, score: f64) -> MeasurementCovariance {
        let r = self.measurement_noise(h);
        if self.config.use_confidence_noise {
            r * (1.0 - score * score)
        } else {
            r
        }
    }

    /// One frame ahead.
    pub fn predict(&self, state: &KalmanState) -> KalmanState {
        let q = self.process_noise(state.mean[3]);
        let mean = self.motion * state.mean;
        let covariance = self.motion * state.covariance * self.motion.transpose() + q;
        KalmanState {
            mean,
            covariance: symmetrize(&covariance),
        }
    }

    /// Measurement update with the detection's box and score.
    pub fn update(
        &self,
        state: &KalmanState,
        detection: &Detection,
    ) -> Result<KalmanState, KalmanError> {
        let score = detection.score;
        if !(0.0..=1.0).contains(&score) {
            return Err(KalmanError::InvalidScore(score));
        }
        detection.bbox.validate()?;

        let h = &self.observation;
        let r = self.effective_measurement_noise(state.mean[3], score);
        let z = MeasurementVector::from(detection.bbox.to_xyah());

        let projected_cov = h * state.covariance * h.transpose();
        let innovation_cov = symmetrize4(&(projected_cov + r));
        if !innovation_cov.iter().all(|v| v.is_finite()) {
            return Err(KalmanError::SingularInnovation);
        }

        // K^T = S^-1 H P, since both S and P are symmetric.
        let hp = h * state.covariance;
        let gain_t = match innovation_cov.cholesky() {
            Some(chol) => chol.solve(&hp),
            // S loses rank when a score-1 update (R_c = 0) follows another
            // without a predict in between. The pseudo-inverse gives zero gain
            // along directions the state already pins down exactly.
            None => {
                let tol = innovation_cov.amax() * 1e-12;
                innovation_cov
                    .pseudo_inverse(tol)
                    .map_err(|_| KalmanError::SingularInnovation)?
                    * hp
            }
        };
        let gain = gain_t.transpose();

        let innovation = z - h * state.mean;
        let mut mean = state.mean + gain * innovation;

        // Joseph form keeps the posterior PSD even when R_c vanishes.
        let i_kh = StateCovariance::identity() - gain * h;
        let covariance = i_kh * state.covariance * i_kh.transpose() + gain * r * gain.transpose();

        if self.config.use_velocity_blend {
            for i in 4..8 {
                mean[i] = score * mean[i] + (1.0 - score) * state.mean[i];
            }
        }

        Ok(KalmanState {
            mean,
            covariance: symmetrize(&covariance),
        })
    }
}

fn symmetrize(m: &StateCovariance) -> StateCovariance {
    (m + m.transpose()) * 0.5
}

fn symmetrize4(m: &MeasurementCovariance) -> MeasurementCovariance {
    (m + m.transpose()) * 0.5
}

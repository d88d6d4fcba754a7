//! Seeded corruption of reference annotations into synthetic predictions.
//!
//! Random numbers come from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha
//! 0.3). Draw order, for reproduction elsewhere:
//!
//! 1. For every reference event in canonical `(frame, class, source)` order:
//!    one `f64` in `[0, 1)` for deletion (deleted when below `deletion_prob`),
//!    one `f64` in `[0, 1)` scaled to the rotation-axis angle in `[0, 2π)`,
//!    and, in Gaussian mode only, one standard normal sample.
//! 2. Then for every frame `0..frame_count`, when `insertion_rate > 0`: a
//!    Poisson count with mean `insertion_rate`, and per inserted event a class
//!    index (uniform), `z` uniform in `[-1, 1)` and an azimuth uniform in
//!    `[-π, π)`.
//!
//! A surviving event is rotated about an axis orthogonal to its DOA, so its
//! angular displacement equals the rotation magnitude: exactly
//! `angular_noise_deg`, or `|N(0, angular_noise_deg²)|` in Gaussian mode.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::annotation::{ClassId, ClipAnnotation, EventRecord, FrameIndex};
use crate::error::{Error, Result};
use crate::{CartesianDoa, SphericalDoa};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    #[default]
    ExactRotation,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    pub angular_noise_deg: f64,
    pub deletion_prob: f64,
    /// Expected spurious events per frame.
    pub insertion_rate: f64,
    pub seed: u64,
    pub noise_model: NoiseModel,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            angular_noise_deg: 0.0,
            deletion_prob: 0.0,
            insertion_rate: 0.0,
            seed: 0,
            noise_model: NoiseModel::ExactRotation,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.angular_noise_deg >= 0.0 && self.angular_noise_deg.is_finite()) {
            return Err(Error::Config(format!(
                "angular noise must be non-negative, got {}",
                self.angular_noise_deg
            )));
        }
        if !(0.0..=1.0).contains(&self.deletion_prob) {
            return Err(Error::Config(format!(
                "deletion probability must lie in [0, 1], got {}",
                self.deletion_prob
            )));
        }
        if !(self.insertion_rate >= 0.0 && self.insertion_rate.is_finite()) {
            return Err(Error::Config(format!(
                "insertion rate must be non-negative, got {}",
                self.insertion_rate
            )));
        }
        Ok(())
    }
}

fn rotate(doa: SphericalDoa, axis_angle: f64, magnitude_deg: f64) -> Result<SphericalDoa> {
    let d = doa.to_cartesian();
    let e1 = d.orthogonal();
    let c = d.cross(&e1);
    let e2 = CartesianDoa::new_unchecked(c[0], c[1], c[2]);
    let (s, co) = axis_angle.sin_cos();
    let axis = CartesianDoa::new(
        co * e1.x + s * e2.x,
        co * e1.y + s * e2.y,
        co * e1.z + s * e2.z,
    )?;
    d.rotated_about(&axis, magnitude_deg.to_radians())
        .to_spherical()
}

pub fn perturb(reference: &ClipAnnotation, cfg: &PerturbationConfig) -> Result<ClipAnnotation> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut events = Vec::with_capacity(reference.len());
    for event in reference.events() {
        let delete_draw: f64 = rng.gen();
        let axis_angle = rng.gen::<f64>() * TAU;
        let magnitude = match cfg.noise_model {
            NoiseModel::ExactRotation => cfg.angular_noise_deg,
            NoiseModel::Gaussian => {
                let z: f64 = StandardNormal.sample(&mut rng);
                (z * cfg.angular_noise_deg).abs()
            }
        };
        if delete_draw < cfg.deletion_prob {
            continue;
        }
        let doa = if magnitude == 0.0 {
            event.doa
        } else {
            rotate(event.doa, axis_angle, magnitude)?
        };
        events.push(EventRecord { doa, ..*event });
    }

    if cfg.insertion_rate > 0.0 && reference.class_count() > 0 {
        let poisson = Poisson::new(cfg.insertion_rate)
            .map_err(|e| Error::Config(format!("insertion rate: {e}")))?;
        for frame in 0..reference.frame_count() {
            let count = poisson.sample(&mut rng) as u64;
            for _ in 0..count {
                let class = rng.gen_range(0..reference.class_count());
                let z: f64 = rng.gen_range(-1.0..1.0);
                let phi: f64 = rng.gen_range(-PI..PI);
                let horizontal = (1.0 - z * z).sqrt();
                let doa = CartesianDoa::new(horizontal * phi.cos(), horizontal * phi.sin(), z)?
                    .to_spherical()?;
                let frame = FrameIndex(frame);
                let class = ClassId::new(class, reference.class_count())?;
                let source = (0..)
                    .find(|s| !events.iter().any(|e| e.key() == (frame, class, *s)))
                    .expect("some source index is free");
                events.push(EventRecord {
                    frame,
                    class,
                    source,
                    doa,
                    distance_cm: None,
                });
            }
        }
    }
    ClipAnnotation::new(events, reference.class_count())?.with_frame_count(reference.frame_count())
}

//! Bounding boxes to Gaussian profiles along the image axes.
//!
//! A box `(u, v, w, h)` with top-left corner `(u, v)` becomes two profiles
//! `ρ(x) = exp(-|x - μ|² / σ²)` sampled at `L` evenly spaced grid points
//! spanning the full image width (azimuth) and height (elevation), with
//! `μ` the box centre and `σ = κ · w` (or `κ · h`).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_BOXES: usize = 6;
pub const GRID_LENGTH: usize = 37;
pub const DEFAULT_SIGMA_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox<T> {
    pub u: T,
    pub v: T,
    pub width: T,
    pub height: T,
    pub image_width: T,
    pub image_height: T,
}

impl<T: Scalar> BoundingBox<T> {
    pub fn new(u: T, v: T, width: T, height: T, image_width: T, image_height: T) -> Result<Self> {
        let b = Self {
            u,
            v,
            width,
            height,
            image_width,
            image_height,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.u,
            self.v,
            self.width,
            self.height,
            self.image_width,
            self.image_height,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::MalformedBox(format!(
                "non-finite coordinate in {self:?}"
            )));
        }
        if self.width <= T::zero() || self.height <= T::zero() {
            return Err(Error::MalformedBox(format!(
                "size must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.u < T::zero()
            || self.v < T::zero()
            || self.u + self.width > self.image_width
            || self.v + self.height > self.image_height
        {
            return Err(Error::MalformedBox(format!(
                "box at ({}, {}) size {}x{} leaves the {}x{} image",
                self.u, self.v, self.width, self.height, self.image_width, self.image_height
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> T {
        self.width * self.height
    }

    pub fn center(&self) -> (T, T) {
        let half = T::lit(0.5);
        (self.u + half * self.width, self.v + half * self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualConfig {
    /// `σ` as a fraction of the box width/height.
    pub sigma_scale: f64,
    pub max_boxes: usize,
    pub grid_length: usize,
}

impl Default for VisualConfig {
    fn default() -> Self {
        Self {
            sigma_scale: DEFAULT_SIGMA_SCALE,
            max_boxes: MAX_BOXES,
            grid_length: GRID_LENGTH,
        }
    }
}

/// Shape `[2, B, L]`: plane 0 holds azimuth profiles, plane 1 elevation.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualFeature<T> {
    values: Vec<T>,
    boxes: usize,
    grid: usize,
}

impl<T: Scalar> VisualFeature<T> {
    pub fn zeros(boxes: usize, grid: usize) -> Self {
        Self {
            values: vec![T::zero(); 2 * boxes * grid],
            boxes,
            grid,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [2, self.boxes, self.grid]
    }

    pub fn get(&self, plane: usize, slot: usize, point: usize) -> T {
        self.values[(plane * self.boxes + slot) * self.grid + point]
    }

    fn set(&mut self, plane: usize, slot: usize, point: usize, value: T) {
        self.values[(plane * self.boxes + slot) * self.grid + point] = value;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

pub fn gaussian_profile<T: Scalar>(x: T, mu: T, sigma: T) -> T {
    let d = x - mu;
    (-(d * d) / (sigma * sigma)).exp()
}

/// Grid point `ℓ` of `L` points spanning `[0, extent]`.
pub fn grid_point<T: Scalar>(index: usize, grid_length: usize, extent: T) -> T {
    T::from_usize_lossy(index) * extent / T::from_usize_lossy(grid_length - 1)
}

/// Encodes up to `max_boxes` boxes, largest area first; extra boxes are dropped
/// with a warning. Unused slots stay zero.
pub fn encode_boxes<T: Scalar>(
    boxes: &[BoundingBox<T>],
    cfg: &VisualConfig,
) -> Result<VisualFeature<T>> {
    if cfg.grid_length < 2 || cfg.sigma_scale.is_nan() || cfg.sigma_scale <= 0.0 {
        return Err(Error::Config(format!(
            "grid length must be at least 2 and sigma scale positive, got {} and {}",
            cfg.grid_length, cfg.sigma_scale
        )));
    }
    for b in boxes {
        b.validate()?;
    }
    let mut ordered: Vec<&BoundingBox<T>> = boxes.iter().collect();
    ordered.sort_by(|a, b| {
        b.area()
            .partial_cmp(&a.area())
            .expect("validated boxes are finite")
            .then_with(|| a.u.partial_cmp(&b.u).expect("finite"))
            .then_with(|| a.v.partial_cmp(&b.v).expect("finite"))
            .then_with(|| a.width.partial_cmp(&b.width).expect("finite"))
    });
    if ordered.len() > cfg.max_boxes {
        log::warn!(
            "{} bounding boxes exceed the limit of {}; keeping the largest",
            ordered.len(),
            cfg.max_boxes
        );
        ordered.truncate(cfg.max_boxes);
    }
    let kappa = T::lit(cfg.sigma_scale);
    let mut feature = VisualFeature::zeros(cfg.max_boxes, cfg.grid_length);
    for (slot, b) in ordered.into_iter().enumerate() {
        let (mu_u, mu_v) = b.center();
        for point in 0..cfg.grid_length {
            let u = grid_point(point, cfg.grid_length, b.image_width);
            let v = grid_point(point, cfg.grid_length, b.image_height);
            feature.set(0, slot, point, gaussian_profile(u, mu_u, kappa * b.width));
            feature.set(1, slot, point, gaussian_profile(v, mu_v, kappa * b.height));
        }
    }
    Ok(feature)
}

/// Parses a box sidecar: rows `frame, u, v, width, height` in integer pixels,
/// several rows per frame allowed. Boxes are grouped by frame.
pub fn parse_box_file<T: Scalar>(
    text: &str,
    image_width: T,
    image_height: T,
) -> Result<BTreeMap<u32, Vec<BoundingBox<T>>>> {
    let mut frames: BTreeMap<u32, Vec<BoundingBox<T>>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                row,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let mut numbers = [0i64; 5];
        for (slot, field) in numbers.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| Error::Parse {
                row,
                message: format!("not an integer: {field:?}"),
            })?;
        }
        let frame = u32::try_from(numbers[0]).map_err(|_| Error::Parse {
            row,
            message: format!("frame out of range: {}", numbers[0]),
        })?;
        let coord = |x: i64| T::lit(x as f64);
        let b = BoundingBox::new(
            coord(numbers[1]),
            coord(numbers[2]),
            coord(numbers[3]),
            coord(numbers[4]),
            image_width,
            image_height,
        )
        .map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        frames.entry(frame).or_default().push(b);
    }
    Ok(frames)
}

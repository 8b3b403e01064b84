//! Vision capabilities exposed to generated programs.
//!
//! [`VisionProvider`] is the only channel through which a running program can
//! observe anything outside its own environment. Two implementations ship:
//! [`FixtureProvider`] reads declarative scene files, [`RemoteVisionProvider`]
//! talks to detection and captioning services over HTTP.

mod fixture;
mod remote;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixture::{FixtureObject, FixtureProvider, SceneFixture};
pub use remote::{RemoteVisionConfig, RemoteVisionProvider};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApiError {
    #[error("unknown image `{0}`")]
    UnknownImage(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub label: String,
    pub score: f64,
}

impl BoundingBox {
    pub fn new(coords: [f64; 4], label: impl Into<String>, score: f64) -> Result<Self, ApiError> {
        let b = Self {
            x0: coords[0],
            y0: coords[1],
            x1: coords[2],
            y1: coords[3],
            label: label.into(),
            score,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ApiError> {
        let coords = self.coords();
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(ApiError::InvalidBox("non-finite coordinate".into()));
        }
        if self.x1 < self.x0 || self.y1 < self.y0 {
            return Err(ApiError::InvalidBox(format!(
                "inverted box [{}, {}, {}, {}]",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(ApiError::InvalidBox(format!("score {} outside [0, 1]", self.score)));
        }
        Ok(())
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

/// Axis-aligned rectangle in absolute image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Region {
    fn contains(&self, b: &BoundingBox) -> bool {
        b.x0 >= self.x0 && b.y0 >= self.y0 && b.x1 <= self.x1 && b.y1 <= self.y1
    }

    fn intersect(&self, other: &Region) -> Region {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        Region { x0, y0, x1: self.x1.min(other.x1).max(x0), y1: self.y1.min(other.y1).max(y0) }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

/// Opaque image reference handed to programs. A crop is a base image plus a
/// region; pixel data never enters the interpreter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageHandle {
    base: String,
    region: Option<Region>,
}

impl ImageHandle {
    pub fn new(base: impl Into<String>) -> Self {
        Self { base: base.into(), region: None }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn region(&self) -> Option<Region> {
        self.region
    }

    /// Derives the handle for `bbox`, given in this view's local coordinates.
    pub fn crop(&self, bbox: &BoundingBox) -> Result<ImageHandle, ApiError> {
        bbox.validate()?;
        let region = match self.region {
            None => Region { x0: bbox.x0, y0: bbox.y0, x1: bbox.x1, y1: bbox.y1 },
            Some(r) => {
                let shifted = Region {
                    x0: r.x0 + bbox.x0,
                    y0: r.y0 + bbox.y0,
                    x1: r.x0 + bbox.x1,
                    y1: r.y0 + bbox.y1,
                };
                r.intersect(&shifted)
            }
        };
        Ok(ImageHandle { base: self.base.clone(), region: Some(region) })
    }

    /// Maps absolute-coordinate detections into this view: keeps boxes fully
    /// inside the region and translates them to the region's origin.
    pub fn localize(&self, boxes: impl IntoIterator<Item = BoundingBox>) -> Vec<BoundingBox> {
        match self.region {
            None => boxes.into_iter().collect(),
            Some(r) => boxes
                .into_iter()
                .filter(|b| r.contains(b))
                .map(|b| BoundingBox {
                    x0: b.x0 - r.x0,
                    y0: b.y0 - r.y0,
                    x1: b.x1 - r.x0,
                    y1: b.y1 - r.y0,
                    ..b
                })
                .collect(),
        }
    }
}

impl fmt::Display for ImageHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.region {
            None => write!(f, "{}", self.base),
            Some(r) => write!(f, "{}[{}, {}, {}, {}]", self.base, r.x0, r.y0, r.x1, r.y1),
        }
    }
}

/// Vision API backing `get_object_boxes`, `query`, `exists`, `count` and `crop`.
///
/// `exists` and `count` derive from `get_object_boxes`; implementations should
/// only override them when the derivation laws still hold.
pub trait VisionProvider: Send + Sync {
    fn get_object_boxes(&self, image: &ImageHandle, object_name: &str) -> Result<Vec<BoundingBox>, ApiError>;

    fn query(&self, image: &ImageHandle, question: &str) -> Result<String, ApiError>;

    fn exists(&self, image: &ImageHandle, object_name: &str) -> Result<bool, ApiError> {
        Ok(!self.get_object_boxes(image, object_name)?.is_empty())
    }

    fn count(&self, image: &ImageHandle, object_name: &str) -> Result<usize, ApiError> {
        Ok(self.get_object_boxes(image, object_name)?.len())
    }

    fn crop(&self, image: &ImageHandle, bbox: &BoundingBox) -> Result<ImageHandle, ApiError> {
        image.crop(bbox)
    }
}

impl<P: VisionProvider + ?Sized> VisionProvider for &P {
    fn get_object_boxes(&self, image: &ImageHandle, object_name: &str) -> Result<Vec<BoundingBox>, ApiError> {
        (**self).get_object_boxes(image, object_name)
    }
    fn query(&self, image: &ImageHandle, question: &str) -> Result<String, ApiError> {
        (**self).query(image, question)
    }
    fn exists(&self, image: &ImageHandle, object_name: &str) -> Result<bool, ApiError> {
        (**self).exists(image, object_name)
    }
    fn count(&self, image: &ImageHandle, object_name: &str) -> Result<usize, ApiError> {
        (**self).count(image, object_name)
    }
    fn crop(&self, image: &ImageHandle, bbox: &BoundingBox) -> Result<ImageHandle, ApiError> {
        (**self).crop(image, bbox)
    }
}

impl<P: VisionProvider + ?Sized> VisionProvider for std::sync::Arc<P> {
    fn get_object_boxes(&self, image: &ImageHandle, object_name: &str) -> Result<Vec<BoundingBox>, ApiError> {
        (**self).get_object_boxes(image, object_name)
    }
    fn query(&self, image: &ImageHandle, question: &str) -> Result<String, ApiError> {
        (**self).query(image, question)
    }
    fn exists(&self, image: &ImageHandle, object_name: &str) -> Result<bool, ApiError> {
        (**self).exists(image, object_name)
    }
    fn count(&self, image: &ImageHandle, object_name: &str) -> Result<usize, ApiError> {
        (**self).count(image, object_name)
    }
    fn crop(&self, image: &ImageHandle, bbox: &BoundingBox) -> Result<ImageHandle, ApiError> {
        (**self).crop(image, bbox)
    }
}

//! Model inputs: audio features from 4-channel recordings and visual
//! features from detector bounding boxes.

pub mod audio;
pub mod visual;

pub use audio::{extract_audio_features, AudioClip, AudioFeature, FeatureExtractor};
pub use visual::{encode_boxes, parse_box_file, BoundingBox, VisualConfig, VisualFeature};

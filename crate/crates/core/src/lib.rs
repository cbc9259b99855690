//! Multi-modal lighting representation: equirectangular panorama geometry,
//! tone mapping, light detection, spherical-harmonic fitting, a query-token
//! fusion encoder with contrastive and SH objectives, and the evaluation
//! harness (cross-modal retrieval, rotation similarity, image metrics).

pub mod dataset;
pub mod encoder;
pub mod envmap;
pub mod error;
pub mod evalkit;
pub mod image;
pub mod io;
pub mod learn;
pub mod lights;
pub mod rng;
pub mod sh;
pub mod synth;
pub mod tonemap;

pub use encoder::{EncoderConfig, EncoderParams, Embedding, ImagePayload, Modality, Payload};
pub use envmap::{CropSpec, DirectionMap, EquirectMap, Vec3};
pub use error::{Error, Result};
pub use evalkit::{ImageMetrics, RetrievalMetrics, RetrievalReport, SiRmseMode, SimilarityMatrix};
pub use image::{LdrImage, RgbImage};
pub use io::{EmbeddingStore, PipelineConfig};
pub use learn::{LearnConfig, LossRecord, Model, Sample};
pub use lights::{LightDetectConfig, LightSource};
pub use sh::ShCoefficients;
pub use tonemap::LogImage;

//! Adaptive Quadtree Matching Pursuit (AQMP) image codec.
//!
//! Image channels are tiled into square blocks which are sparse-coded by
//! orthogonal matching pursuit against overcomplete DCT + Haar dictionaries.
//! A block whose code cannot meet the error tolerance within its atom budget
//! is split into four quadrants, recursively, down to a minimum block size.
//! The resulting quadtrees are serialized and DEFLATE-compressed into the
//! `.aqmp` container.
//!
//! The [`hpo`] module searches the five codec hyperparameters with a
//! multi-objective Tree-structured Parzen Estimator (or a random baseline)
//! and reports the compression-rate / SSIM Pareto front.

pub mod bitstream;
pub mod codec;
pub mod color;
pub mod dictionary;
pub mod error;
pub mod hpo;
pub mod io;
pub mod metrics;
pub mod plane;
pub mod sparse;

pub use bitstream::{deserialize, serialize, AqmpFile};
pub use codec::{
    decode_channel, decode_image, encode_channel, encode_image, CodecParams, EncoderOptions, Node, QuadtreeChannel,
    SplitRule,
};
pub use color::{merge_channels, split_channels, ColorMode, ImageBuffer, PixelFormat};
pub use dictionary::{Dictionary, DictionaryBank, DictionaryCache};
pub use error::{Error, Result, StreamRegion};
pub use metrics::{compression_rate, ssim, Evaluation};
pub use plane::Plane;
pub use sparse::{omp, SparseCode};

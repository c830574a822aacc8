//! Dense numeric kernels and a small hand-rolled feed-forward scorer.
//!
//! Everything here is plain `f64` on row-major storage: a minimal dense
//! matrix, a five-layer feed-forward network with manual forward/backward
//! passes (including batch normalization), the Adam optimizer, and a plain
//! text checkpoint format that round-trips parameters bit-for-bit.
//!
//! The network maps a batch of feature rows to one scalar score per row.
//! Training mode normalizes each hidden pre-activation over the batch
//! (one query group per batch); evaluation mode uses running statistics,
//! so scoring one document gives the same result alone or in a batch.

mod adam;
mod checkpoint;
mod matrix;
mod network;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use matrix::DenseMatrix;
pub use network::{
    Activation, ArchCode, ForwardCache, LayerGrads, LayerSpec, Network, NetworkGrads,
    HIDDEN_WIDTH,
};

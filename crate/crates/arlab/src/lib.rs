//! Training-and-evaluation laboratory for attractive-repulsive loss functions.
//!
//! The crate trains small feed-forward classifiers under four interchangeable
//! losses (categorical cross-entropy, center loss, Cosine-COREL,
//! Gaussian-COREL) and measures how naturally clusterable the resulting latent
//! spaces are with a built-in clustering and metrics suite.
//!
//! Everything is `f64`, deterministic under an explicit [`linalg::Rng`] seed,
//! and built from scratch: dense linear algebra, manual backpropagation, Adam,
//! k-means, a diagonal-covariance Gaussian mixture, Hungarian alignment, and
//! the ARI / V-measure / silhouette metrics.

pub mod cluster;
pub mod data;
mod error;
pub mod linalg;
pub mod losses;
pub mod network;
pub mod optim;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// FNV-1a over a byte slice, hex-encoded. Used to fingerprint configs in
/// run metadata.
pub fn digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Formats an `f64` with 17 significant digits so that parsing the text back
/// recovers the exact same bits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

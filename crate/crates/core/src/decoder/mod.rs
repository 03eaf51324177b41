//! Generators `p(x | z)`: a pose-conditioned volume decoder for
//! tomographic data and a plain image decoder for pixel data.
//!
//! The tomographic decoder maps `z` to a real-space voxel grid `V̂(z)` and
//! renders it through the same imaging operators that produced the data, so
//! the pose enters only after decoding and `V̂` never depends on it.

mod dump;
mod pixel;
mod tomographic;

pub use dump::{read_volume_f32, write_pgm, write_volume_f32};
pub use pixel::PixelDecoder;
pub use tomographic::TomographicDecoder;

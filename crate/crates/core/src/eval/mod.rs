//! Evaluation harness: matching, I/O formats, sweeps, image compression and
//! end-to-end learning.

pub mod factors;
pub mod image;
pub mod learn;
pub mod matching;
pub mod sweep;

pub use factors::*;
pub use image::*;
pub use learn::*;
pub use matching::*;
pub use sweep::*;

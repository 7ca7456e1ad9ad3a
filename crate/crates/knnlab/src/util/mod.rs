pub(crate) mod binio;
pub mod mat;
pub mod rng;

pub(crate) use mat::squared_l2_bounded;
pub use mat::{squared_l2, Matrix};
pub use rng::{mix64, SplitMix64};

//! Reduction from standard LPN to batch LPN with Santha-Vazirani noise,
//! together with exact and statistical checks of its output law.

pub mod dist;
pub mod entlpn;
pub mod error;
pub mod gf2;
pub mod linearize;
pub mod lpn;
pub mod matrix;
pub mod rational;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::Error;
pub use gf2::BitVector;
pub use rational::Rational;
pub use rng::RandomStream;

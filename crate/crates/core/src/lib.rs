//! A small laboratory for GAN training dynamics.
//!
//! The crate bundles a double-backprop capable autodiff tape, dense networks
//! with Adam, the discriminator gradient-gap regularizer and its comparison
//! penalties, and the two-point attractor experiments built on top of them.

pub mod autodiff;
pub mod nn;
pub mod ganreg;
pub mod dynamics;

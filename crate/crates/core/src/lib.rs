pub mod brdf;
pub mod compare;
pub mod composite;
pub mod error;
pub mod imaging;
pub mod lbfgs;
pub mod lighting;
pub mod math;
pub mod matmap;
pub mod objective;
pub mod renderlayer;
pub mod sgfit;
pub mod texsynth;

pub use error::{Error, Result};

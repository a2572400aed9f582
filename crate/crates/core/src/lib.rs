pub mod descent;
pub mod energy;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod nonlocal;
pub mod parabolic;
pub mod scalar;
pub mod speed;
pub mod verification;

pub use error::{Error, Result};
pub use grid::{Grid, Profile};
pub use model::{EigenPair, ModelParams};
pub use scalar::Real;

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Profile64 = Profile<f64>;
pub type Profile32 = Profile<f32>;
pub type ModelParams64 = ModelParams<f64>;
pub type ModelParams32 = ModelParams<f32>;
pub type DescentConfig64 = descent::DescentConfig<f64>;
pub type DescentConfig32 = descent::DescentConfig<f32>;
pub type SpeedScan64 = speed::SpeedScan<f64>;
pub type SpeedScan32 = speed::SpeedScan<f32>;

//! Achievable rates of MIMO receivers that combine nonlinear analog
//! front-ends with one-bit threshold ADCs.
//!
//! The crate covers the real Gaussian channel and its SVD ([`channel`]), the
//! analog function families and quantization ([`frontend`]), region counting
//! and high-SNR code constructions ([`geometry`]), induced-channel rates and
//! allocation ([`rates`]) and Monte Carlo validation ([`simulator`]).

pub mod channel;
pub mod error;
pub mod exec;
pub mod frontend;
pub mod geometry;
pub mod rates;
pub mod simulator;

pub use channel::{apply_channel, svd_decompose, validate_power, ChannelModel, SubchannelSet};
pub use error::{Error, Result};
pub use exec::Exec;
pub use frontend::{FrontendSpec, MultivariatePolynomial, Partition1D, Scenario};
pub use geometry::{Arrangement, Hyperplane, RegionCode};
pub use rates::{Family, InducedDMC, InputDistribution};
pub use simulator::{SweepTarget, TrialReport};

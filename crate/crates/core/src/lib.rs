//! Multi-function over-the-air computation: channel models, Grassmannian
//! subspace tools, receive/transmit beamforming, the multicast dual problem,
//! the denoising-factor feedback protocol and nomographic function pipelines.

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod feedback;
pub mod grassmann;
pub mod linalg;
pub mod multicast;
pub mod nomographic;
pub mod random;

pub use beamforming::{design, design_full, AircompDesign, MseReport, ReceiveMethod};
pub use channel::{generate_channels, ChannelSet, RicianParams};
pub use error::{Error, Result};
pub use feedback::FeedbackReport;
pub use grassmann::Subspace;
pub use linalg::ComplexMatrix;
pub use multicast::{MulticastInstance, MulticastSolution, SdrConfig};
pub use nomographic::{NomographicFunction, SensorData};

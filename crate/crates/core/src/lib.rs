//! Quantile-based mean value theorems, distortion bridges and verification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod distortion;
pub mod error;
pub mod order;
pub mod quadrature;
pub mod quantile;
pub mod root;
pub mod scenario;
pub mod suite;
pub mod testfn;
pub mod verify;

pub use bridge::{bridge, distorted_bridge, lorenz, nbu_bridge, BridgeDistribution};
pub use distortion::{distort, distorted_mean, DistortedDistribution, DistortionFunction};
pub use error::{Error, Result};
pub use order::{is_nbu, st_dominates, OrderCheckResult};
pub use quadrature::{Integral, Quadrature};
pub use quantile::QuantileDistribution;
pub use scenario::{Scenario, Status};
pub use suite::{run_suite, SuiteReport};
pub use testfn::{TestFunction, TestFunctionSpec};
pub use verify::{
    verify_mvt, verify_taylor, verify_theorem1, verify_theorem2, HypothesisCheck, Identity, VerificationReport,
    VerifyConfig,
};

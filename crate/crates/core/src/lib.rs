//! Rényi group privacy accounting for subsampled noise mechanisms.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below fix the scalar.

pub mod baseline;
pub mod calibration;
pub mod error;
pub mod lower_bounds;
pub mod mechanisms;
pub mod numerics;
pub mod rgp;
pub mod scalar;
pub mod sweep;

pub use calibration::{assess, calibrate, Accountant, Assessment, Calibration, OrderChoice, Target};
pub use error::{Error, Result};
pub use mechanisms::{MechanismKind, MechanismSpec, RenyiOrder};
pub use rgp::{
    account_mechanism, best_gp, compose, composed_rgp, minimize_epsilon, rgp_to_gp,
    subsampled_rgp_bound, AccountingQuery, GpGuarantee, Neighboring, RgpGuarantee,
};
pub use scalar::Real;

pub type MechanismSpec64 = MechanismSpec<f64>;
pub type MechanismSpec32 = MechanismSpec<f32>;
pub type RenyiOrder64 = RenyiOrder<f64>;
pub type RenyiOrder32 = RenyiOrder<f32>;
pub type RgpGuarantee64 = RgpGuarantee<f64>;
pub type RgpGuarantee32 = RgpGuarantee<f32>;
pub type GpGuarantee64 = GpGuarantee<f64>;
pub type GpGuarantee32 = GpGuarantee<f32>;
pub type AccountingQuery64 = AccountingQuery<f64>;
pub type AccountingQuery32 = AccountingQuery<f32>;

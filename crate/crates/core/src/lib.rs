//! Periodicity (SNR) estimation for quasi-periodic signals from the way
//! filter centre frequency maps onto output instantaneous frequency.

pub mod calibration;
pub mod error;
pub mod ifgram;
pub mod io;
pub mod snr_index;
pub mod speech;
pub mod windows;

pub use error::{Error, Result};

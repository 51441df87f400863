//! Data acquisition toolkit for a 1/8-scale RC off-road vehicle: the onboard
//! record format and sensor models, the packet radio link, a scenario
//! simulator and offline run analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod encoder;
pub mod geo;
pub mod link;
pub mod orientation;
pub mod power_thermal;
pub mod record;
pub mod session_log;
pub mod sim;

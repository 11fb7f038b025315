//! Baseband and passband simulation of a two-hop amplify-and-forward link
//! whose source and relay form a distributed Alamouti pair over OFDM.

pub mod alamouti;
pub mod channel;
pub mod error;
pub mod link;
pub mod ofdm;
pub mod rf;
pub mod signal;

pub use error::{Error, Result};

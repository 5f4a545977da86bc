//! Dual-radio (BLE discovery + UWB ranging) contact detection: protocol
//! logic, a deterministic discrete-event simulator, an energy model and
//! contact analytics.

pub mod analysis;
pub mod cli;
pub mod codec;
pub mod config;
pub mod discovery;
pub mod energy;
pub mod engine;
pub mod ranging;
pub mod sim;
pub mod time;

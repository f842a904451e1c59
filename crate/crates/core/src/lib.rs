//! Exact simulation of finite-state and pushdown machines that receive one
//! bit from a closed timelike curve, under Deutsch's consistency condition.

pub mod cli;
pub mod consistency;
pub mod ctc1;
pub mod dpda;
pub mod enumerate;
pub mod error;
pub mod format;
pub mod hopchain;
pub mod machines;
pub mod matrix;
pub mod postselect;
pub mod rational;
pub mod zoo;

pub use error::{Error, Result};

// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

pub mod ballstat;
pub mod bootstrap;
pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod io;
pub mod metric;
pub mod population;
pub mod simgen;

pub use error::{CpdError, Result};

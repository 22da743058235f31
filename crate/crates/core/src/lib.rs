// SPDX-License-Identifier: Apache-2.0

//! Behavioral model of a cryogenic SerDes-style arbitrary waveform
//! generator: pattern memory and serializer, segmented DAC, clock tree,
//! pulse compiler, FFE equalizer and the measurement suite.

pub mod analysis;
pub mod bench;
pub mod clocktree;
pub mod dacmodel;
pub mod equalizer;
pub mod error;
pub mod patgen;
pub mod wavec;

pub use error::{Error, Result};

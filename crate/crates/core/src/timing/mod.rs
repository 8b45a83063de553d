// SPDX-License-Identifier: Apache-2.0
//! Cell delays under aging and process variation, and path timing.

mod aging;
mod delay;
mod sta;

use thiserror::Error;

use crate::netlist::CellKind;

pub use aging::{aging_factor, AgingError, AgingParams, AgingState, ShiftModel};
pub use delay::{annotate, base_delays, BaseDelayLib, CellDelay, DelayAnnotation, VariationSpec};
pub use sta::{critical_path, k_longest_paths, output_arrivals, RankedPaths, TimingPath};

#[derive(Debug, Error)]
pub enum TimingError {
    #[error(transparent)]
    Aging(#[from] AgingError),
    #[error("delay library has no entry for {0}")]
    MissingLibEntry(CellKind),
    #[error("delay library entry for {0} must be positive")]
    BadLibEntry(CellKind),
    #[error("variation spec out of range: {0:?}")]
    BadVariation(VariationSpec),
    #[error("annotation does not cover the netlist: {0}")]
    Coverage(String),
    #[error("{0}")]
    Cycle(String),
    #[error("path count must be at least 1")]
    ZeroK,
}

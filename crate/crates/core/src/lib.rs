// SPDX-License-Identifier: Apache-2.0
//! Hardware-Trojan detection by bit-error fingerprints under combined
//! transistor aging and over-clocking.

pub mod bench;
pub mod detector;
pub mod experiment;
pub mod bits;
pub mod features;
pub mod netlist;
pub mod sim;
pub mod timing;
pub mod trojan;

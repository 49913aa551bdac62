// SPDX-License-Identifier: Apache-2.0

//! Expand HLS designs into directive design spaces, run synthesis flows over
//! the resulting concrete designs in parallel, and aggregate the reports into
//! analyzable datasets.

pub mod aggregate;
pub mod analysis;
pub mod cli;
pub mod design;
pub mod executor;
pub mod fixtures;
pub mod frontends;
pub mod optdsl;
pub mod toolflows;

//! Geographic attribution of citation data and gravity-model estimation of
//! how knowledge flows decay with distance.
//!
//! The pipeline runs in stages that each have a module:
//!
//! 1. [`ingest`] loads publication records and reduces affiliation lines to
//!    (city, country) pairs;
//! 2. [`assignment`] attributes each publication to one prevalent territory;
//! 3. [`flows`] aggregates citations into territory-pair edges with
//!    great-circle distances ([`geodesy`]) and publication masses;
//! 4. [`gravity`] fits the log-linear gravity model by least squares with
//!    HC1 standard errors.
//!
//! [`synth`] generates worlds with known parameters for recovery testing.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod data;
pub mod flows;
pub mod geodesy;
pub mod gravity;
pub mod ingest;
pub mod synth;

pub use assignment::{Attribution, Basis, Unassigned};
pub use flows::{AnalysisLevel, FlowEdge, MassTable, Partition};
pub use geodesy::{great_circle_distance, Gazetteer, GeoPoint, Territory};
pub use gravity::{GravityFit, OlsFit};
pub use ingest::{AddressParser, CitedRecord, CitingRecord, RawAddress};

//! Resource allocation toolkit for the edge cloud.
//!
//! The crate covers four coupled problems: joint radio/compute allocation for
//! computation offloading ([`offloading`]), time-slotted dynamic caching
//! ([`caching`]), radio-map reconstruction from sparse measurements
//! ([`rem`]), and link-failure robust power allocation ([`reliability`]).
//! They share a dense graph/spectral layer ([`graph`]) and a small solver kit
//! ([`solver`]): a bounded revised simplex and a projected-gradient method.
//! [`experiments`] turns JSON scenarios into CSV sweeps for the CLI.

pub mod caching;
pub mod experiments;
pub mod graph;
pub mod offloading;
pub mod reliability;
pub mod rem;
pub mod solver;

//! Stateless Bloom-filter multicast switching for SDN switches.
//!
//! Links get fixed-width identifiers ([`bfcore::Lid`]); a packet carries the OR
//! of the identifiers on its path or tree ([`bfcore::Fid`]); every switch holds a
//! small, path-independent set of ternary match rules ([`flowcomp`]) that forward
//! on each port whose identifier is contained in the packet's filter. The crate
//! also simulates forwarding over whole topologies ([`dataplane`]) and models the
//! TCAM state of this scheme against per-path and label-merging baselines
//! ([`stateanal`]).

pub mod bfcore;
pub mod bits;
pub mod dataplane;
pub mod flowcomp;
pub mod stateanal;
pub mod topology;

pub use bits::Bits;

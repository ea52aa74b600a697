//! Command line front end for `lassocd-core`: CSV and TSV formats,
//! all-or-nothing output files, wall-clock timing and the `lassocd` binary.

pub mod app;
pub mod atomic;
pub mod clock;
pub mod config;
pub mod formats;

pub use app::run;
pub use clock::WallClock;

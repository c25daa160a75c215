//! Event-driven simulation of the Glauber+Zero-range Markov process with
//! generator `N^2 L_ZR + K L_G` on the discrete torus, plus the empirical
//! observables used to compare against the hydrodynamic description.
//!
//! A single replica is strictly sequential; independent replicas with
//! distinct seeds may run in parallel, and snapshots are immutable values.

mod event_tree;
mod gillespie;
mod io;
mod observables;
mod torus;

pub use event_tree::EventTree;
pub use gillespie::{
    total_rate, Configuration, Event, SimError, SimParams, SimSnapshot, SimTrajectory, Simulator,
    OCCUPANCY_CAP,
};
pub use io::{write_snapshot_binary, write_trajectory_csv};
pub(crate) use io::{write_csv_header as io_csv_header, write_site_row as io_site_row};
pub use observables::{block_average, empirical_pairing, init_product};
pub use torus::LatticeTorus;

//! Shared fixtures for the criterion benches.

use resonances_core::dynamics::{sample_mu, PhasePoint};
use resonances_core::geometry::{reference_table, Table};
use resonances_core::rng;
use resonances_core::ulam::{build_transition, Partition, TransitionData};

pub fn table() -> Table {
    reference_table()
}

/// Reference table with an `n × n` partition per obstacle.
pub fn transition(n: usize, samples_per_cell: u32) -> TransitionData {
    let t = reference_table();
    let p = Partition::new(&t, n, n).expect("valid partition");
    build_transition(&t, &p, samples_per_cell, 42).expect("reference table builds")
}

pub fn points(table: &Table, n: usize) -> Vec<PhasePoint> {
    let mut r = rng::stream(42, rng::TAG_TEST, 99);
    (0..n).map(|_| sample_mu(table, &mut r)).collect()
}

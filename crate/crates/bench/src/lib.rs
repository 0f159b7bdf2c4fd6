//! Shared fixtures for the benchmarks in `benches/`.

use vacuum_ns::{GridState, InitialData, PhysicalParameters, VelocityProfile};

/// Compliant power-law data: n = 2, gamma = 2, theta = 1, alpha = 0.4,
/// with a small outward velocity so every term of the scheme is active.
pub fn fixture(cells: usize) -> (PhysicalParameters, InitialData, GridState) {
    let params =
        PhysicalParameters::new(2, 1.0, 2.0, 1.0, 1.0, 0.0).expect("admissible parameters");
    let init = InitialData::power_law(
        &params,
        0.4,
        1.0,
        VelocityProfile::Polynomial(vec![0.0, 0.1]),
    )
    .expect("admissible profile");
    let state = GridState::initial(&params, &init, cells).expect("initial grid");
    (params, init, state)
}

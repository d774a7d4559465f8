//! Fixtures shared by the benchmarks.

/// Fuel-optimal halo transfer extremal with two switches.
pub const HALO_GAMMA: [f64; 7] = [
    -0.021952329147255287,
    0.0065876370529868635,
    0.074896120381469,
    -0.04314024879392201,
    0.0361453659370948,
    0.038417360647328175,
    0.03479929054171177,
];

/// The same family at the minimum-energy end of the homotopy.
pub const HALO_GAMMA_ENERGY: [f64; 7] = [
    -0.04415536904778433,
    0.00928261386837625,
    0.09542016104876101,
    -0.05778567799504423,
    0.04774611167788365,
    0.0669521422622747,
    0.049829345596109756,
];

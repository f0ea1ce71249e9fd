//! Upper bounds on device-independent QKD key rates from the
//! convex-combination attack.
//!
//! Eve splits the observed correlation into a local part, whose outcomes she
//! knows once the settings are announced, and a nonlocal part she knows
//! nothing about. The intrinsic information of the resulting tripartite
//! distribution upper-bounds the key rate of any protocol that announces
//! both parties' settings, and for noisy Werner correlations it vanishes
//! strictly inside the nonlocal region.
//!
//! Modules:
//! * [`correlation`]: Bell correlations, Werner-state tables, correlator form.
//! * [`local`]: local polytope, CHSH facets, LP membership and local weights.
//! * [`info`]: entropies, (conditional) mutual information, intrinsic
//!   information search.
//! * [`attack`]: the attack itself, relabelling maps, key-rate bounds and
//!   critical visibilities.
//! * [`region`]: the `(s, t)` slice classification.
//! * [`lp`]: the dense simplex solver behind [`local`].

pub mod attack;
pub mod correlation;
pub mod error;
pub mod info;
pub mod local;
pub mod lp;
pub mod region;

pub use attack::{
    chsh_keyrate_bound, critical_visibility_theta, critical_visibility_werner, keyrate_bound,
    AttackModel, CcDecomposition, KeyRateBound, LambdaChoice, ThetaConstants, WernerConstants,
};
pub use correlation::{
    chsh_protocol_correlation, slice_correlation, werner_correlation, BlochVector, Correlation,
    CorrelatorForm, MeasurementArrangement, Scenario,
};
pub use error::{Error, Result};
pub use info::{JointDistribution, StochasticMap};
pub use local::{is_local_lp, local_visibility_theta, LocalityVerdict};
pub use region::{classify, region_grid, RegionLabel, RegionPoint};

//! Possibilistic supervision toolkit: admissible probability sets induced by
//! a possibility distribution, exact Kullback-Leibler projections onto them
//! via Dykstra's algorithm with closed-form Bregman projections, and training
//! of probabilistic classifiers against the projected targets.
//!
//! The pipeline, bottom to top:
//!
//! - [`simplex`]: probability/weight vector types, KL and Bregman distances;
//! - [`antipignistic`]: the probability-possibility bijection and the induced
//!   possibility/necessity measures;
//! - [`feasible`]: the admissible convex set (dominance plus shape gaps), its
//!   linear system and violation metric;
//! - [`projection`]: closed-form single-constraint Bregman projections;
//! - [`dykstra`]: the cyclic projection engine with log-space stabilization;
//! - [`oracle`]: independent brute-force verifiers;
//! - [`synth`]: seeded synthetic dataset generation;
//! - [`train`]: linear softmax training under possibilistic supervision;
//! - [`bench`]: the randomized projection benchmark harness.

pub mod antipignistic;
pub mod bench;
pub mod dykstra;
pub mod error;
pub mod feasible;
pub mod oracle;
pub mod projection;
pub mod simplex;
pub mod synth;
pub mod train;

pub use antipignistic::{
    necessity_of_event, poss_to_prob, possibility_of_event, prob_to_poss, PossVec,
};
pub use dykstra::{kl_project, stabilized_u, ProjectionReport};
pub use error::{Error, Result};
pub use feasible::{
    build_feasible_set, build_feasible_set_custom, build_generic_set, ConstraintAtom, FeasibleSet,
    GapPolicy, LinearSystem, FEASIBILITY_TOL,
};
pub use projection::{gap_root, project_atom, project_gap, project_subset};
pub use simplex::{
    bregman_distance, embed_on_support, kl_divergence, normalize, restrict_to_support,
    CorrectionVec, PosVec, ProbVec, CLIP_FLOOR,
};

//! Maximum-entropy reconstruction of long-context joint distributions from
//! short-context marginals.
//!
//! A model that only knows conditionals over a short window can still
//! describe a longer window: fix the joint marginals it does know and pick
//! the joint of largest entropy among all that reproduce them. The crate
//! provides
//!
//! * dense joint tables over finite alphabets ([`table`]) and seeded
//!   sampling ([`sample`]);
//! * order-`n` Markov chain fits ([`chains`]);
//! * the MEP\[T\], GMEP and SMEP constraint systems with consistency checks
//!   and redundancy reduction ([`constraints`]);
//! * a dual Newton solver and a proportional-fitting solver ([`solver`]);
//! * exhaustive checks that conditioning widens probability bounds and
//!   lowers entropy ([`inequalities`]);
//! * the closed-form geometric model used as an analytic cross-check
//!   ([`geometric`]).
//!
//! ```
//! use mepkit::{fit_chain, solve_system, Alphabet, ConstraintSystem, JointTable, Method, SolverConfig};
//!
//! // A two-state Markov chain over three steps.
//! let step = [[0.9, 0.1], [0.2, 0.8]];
//! let truth = JointTable::from_fn(vec![1, 2, 3], Alphabet::new(2)?, |x| {
//!     0.5 * step[x[0]][x[1]] * step[x[1]][x[2]]
//! })?;
//!
//! // Keep only the pair marginals and rebuild the joint.
//! let system = ConstraintSystem::from_truth(Method::MepT, 1, &truth)?;
//! let result = solve_system(&system, &SolverConfig::newton())?;
//! assert!(result.converged);
//! assert!(result.joint.max_abs_diff(&fit_chain(&truth, 1)?.joint())? < 1e-8);
//! # Ok::<(), mepkit::Error>(())
//! ```

pub mod chains;
pub mod constraints;
pub mod error;
pub mod geometric;
pub mod inequalities;
pub mod io;
pub mod sample;
pub mod solver;
pub mod table;

pub use chains::{fit_chain, ChainFactor, ChainModel, LogProb};
pub use constraints::{
    build_gmep, build_mep_t, build_smep, check_consistency, reduce_redundancy, ConsistencyReport, ConstraintSystem,
    MarginalConstraint, Method, ReductionPlan,
};
pub use error::{Error, Result};
pub use geometric::GeometricModel;
pub use inequalities::{verify_entropy_chain, verify_nested_spread, verify_pairwise_spread, SpreadReport};
pub use sample::{sample, seeded_rng};
pub use solver::{residuals, solve, solve_system, SolveResult, SolverConfig, Strategy};
pub use table::{Alphabet, Assignment, ConditionalSlice, JointTable, VarId};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tables.md")]
    mod tables {}
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/constraints.md")]
    mod constraints {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/inequalities.md")]
    mod inequalities {}
    #[doc = include_str!("../../../book/src/geometric.md")]
    mod geometric {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

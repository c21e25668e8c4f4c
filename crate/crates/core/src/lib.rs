//! Entangled two-register variational solver for the travelling salesman
//! problem.
//!
//! Two registers of `n = ⌈log₂N⌉` qubits start in a maximally entangled state
//! and each is rotated by its own mesh. The joint computational-basis
//! statistics form a doubly stochastic matrix `X` that plays the role of the
//! route adjacency matrix; the angles are tuned by gradient descent on a
//! route-length cost with a subtour-elimination reward.

pub mod cost;
pub mod error;
pub mod fourcity;
pub mod linalg;
pub mod measurement;
pub mod optimizer;
pub mod oracle;
pub mod rng;
pub mod state;

pub use cost::{CitySubset, CostConfig, DistanceMatrix, SubtourMode};
pub use error::{Error, Result};
pub use fourcity::FourCityParams;
pub use linalg::{ComplexMatrix, MeshSpec, Su2Block};
pub use measurement::{CorrelationMatrix, ReadoutMode};
pub use optimizer::{optimize, OptimizerConfig, Protocol, RunTrace};
pub use oracle::{BirkhoffDecomposition, RoutePermutation};
pub use state::{Statevector, VariationalParams};

//! Physics-informed neural networks for thermally coupled, steady,
//! incompressible Navier–Stokes flow under the Boussinesq approximation.
//!
//! A single fully connected network maps `(x, y)` to `(u, v, p, θ)`. Spatial
//! derivatives up to second order are carried through the network as
//! truncated Taylor jets, and parameter gradients of the residual loss are
//! obtained by reverse accumulation over that jet computation. The crate
//! ships the Beltrami manufactured solution, hierarchical Latin-hypercube
//! collocation sets, Adam and L-BFGS training, Sobolev-norm error reports,
//! log-log convergence fits and a CLI that runs the study families.

pub mod autodiff;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod net;
pub mod physics;
pub mod sampling;
pub mod training;

pub use autodiff::{evaluate_jet, loss_gradient, FieldJet2, FieldState, Jet, Point2};
pub use error::{PinnError, Result};
pub use evaluation::{ConvergenceFit, ErrorReport};
pub use net::{forward, init_parameters, parameter_count, Activation, Architecture, ParameterVector};
pub use physics::{DomainSpec, FlowParameters, LossSpec, ResidualBreakdown};
pub use sampling::CollocationSet;
pub use training::{TrainConfig, TrainStatus, TrainingHistory};

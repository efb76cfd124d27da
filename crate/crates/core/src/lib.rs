//! Data-driven stabilization of positive linear systems.
//!
//! Noisy state/input samples define a polytope of plants consistent with
//! the data. A state-feedback gain `K` together with a linear copositive
//! Lyapunov certificate `v` is found by one linear program that certifies
//! the whole consistency polytope at once, using Farkas containment. The same
//! construction covers peak-to-peak gain minimization, switched plants
//! (common or mode-dependent gains) and plants affine in a measured parameter
//! (gain scheduling).
//!
//! Everything numeric is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the scalar for convenience.
//!
//! ```
//! use posdd::benchmarks::three_state;
//! use posdd::{build_consistency, generate_dataset, synthesize_stabilizing};
//! use posdd::{GenerationPolicy, PlantModel, Prior, SynthesisOptions, SynthesisStatus, TimeKind};
//!
//! let (a, b) = three_state();
//! let plant = PlantModel::Single { a, b };
//! let data = generate_dataset(&plant, TimeKind::Continuous, 10, 0.1, 1, &GenerationPolicy::iid())?;
//! let set = build_consistency(&data, Prior::metzler())?;
//! let opts = SynthesisOptions { normalize_v: true, ..Default::default() };
//! let result = synthesize_stabilizing(&set, &opts)?;
//! assert_eq!(result.status, SynthesisStatus::Feasible);
//! # Ok::<(), posdd::Error>(())
//! ```

pub mod benchmarks;
pub mod consistency;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod polytope;
pub mod scalar;
pub mod simulate;
pub mod synthesis;

pub use consistency::{
    build_consistency, build_lpva_consistency, build_switched_consistency, generate_dataset, GenerationPolicy,
    PlantModel, Prior,
};
pub use linalg::TimeKind;
pub use scalar::Scalar;
pub use synthesis::{
    nominal_p2p, nominal_stabilize, synthesize_lpva, synthesize_p2p, synthesize_stabilizing,
    synthesize_switched_common, synthesize_switched_per_mode, verify_controller, SignPattern, SynthesisOptions,
    SynthesisStatus,
};

pub type Matrix = linalg::Matrix<f64>;
pub type Vector = linalg::Vector<f64>;
pub type Polytope = polytope::Polytope<f64>;
pub type Dataset = consistency::Dataset<f64>;
pub type ConsistencySet = consistency::ConsistencySet<f64>;
pub type ControllerResult = synthesis::ControllerResult<f64>;
pub type ExtendedPlant = synthesis::ExtendedPlant<f64>;
pub type Trajectory = simulate::Trajectory<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type Vector32 = linalg::Vector<f32>;
pub type Polytope32 = polytope::Polytope<f32>;
pub type Dataset32 = consistency::Dataset<f32>;
pub type ConsistencySet32 = consistency::ConsistencySet<f32>;
pub type ControllerResult32 = synthesis::ControllerResult<f32>;
pub type Trajectory32 = simulate::Trajectory<f32>;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error(transparent)]
    Lp(#[from] lp::LpError),
    #[error(transparent)]
    Polytope(#[from] polytope::PolytopeError),
    #[error(transparent)]
    Consistency(#[from] consistency::ConsistencyError),
    #[error(transparent)]
    Synthesis(#[from] synthesis::SynthesisError),
    #[error(transparent)]
    Simulation(#[from] simulate::SimulationError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

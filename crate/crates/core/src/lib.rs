//! Minimal multi-layer weight modification for feed-forward ReLU networks.
//!
//! A network that misbehaves on a finite set of inputs is split along
//! separation layers; a heuristic search proposes new seam assignments and
//! each sub-network receives a minimal final-layer change, found by linear
//! programming, that realizes them.

pub mod constraints;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod lp;
pub mod matrix;
pub mod network;
pub mod report;
pub mod search;
pub mod single_layer;

pub use constraints::{
    check_satisfied, encode_classification, encode_exact_output, ExactOutputGoal, LinearSystem,
    OutputGoal, PointSpec,
};
pub use error::{Error, Result};
pub use io::{
    load_job, load_model, measure_accuracy, model_to_string, parse_job, parse_model, save_model, Job,
    JobFile, LabeledSet,
};
pub use lp::{solve_min_norm, LinearProgram, LpSolution, LpStatus, Norm};
pub use matrix::Matrix;
pub use network::{ActivationTrace, Network, SubnetworkChain};
pub use report::{compare, format_compare_table, CompareRow, RepairReport};
pub use search::{
    repair, ChangeProposal, Grid, Heuristic, MctsConfig, RepairResult, RepairStatus, SearchConfig,
    SearchTrace,
};
pub use single_layer::{
    backend_dispatch, modify_final_layer, BackendRegistry, RepairBackend, SingleLayerAnswer,
    SingleLayerQuery, SubnetGoal,
};

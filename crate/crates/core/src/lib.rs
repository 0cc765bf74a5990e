//! Budgeted kernel SVM training: Pegasos-style SGD under a hard bound on the
//! number of support vectors, enforced by merging two same-sign vectors.
//! The merge blend is found either by golden section search or by bilinear
//! interpolation in a precomputed (m, kappa) table, and the harness modules
//! measure what the table trades away in decision quality and wins in speed.

pub mod error;
pub mod harness;
pub mod kernel;
pub mod lookup;
pub mod merge;
pub mod solver;
pub mod sparse;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use harness::{
    microbench_solver, run_bench, run_compare, BenchReport, CompareEvent, CompareReport,
    SolverBench,
};
pub use kernel::{kappa_power, Kernel};
pub use lookup::{solve_merge_lookup_h, solve_merge_lookup_wd, LookupGrid};
pub use merge::{
    gss_maximize, merged_alpha, objective_s, solve_merge_gss, wd_direct_oracle, wd_normalized,
    MergeInstance, MergeSolution,
};
pub use solver::{CandidateScore, MergeSolver, SolverKind};
pub use sparse::{
    blend, load_libsvm, parse_libsvm_record, squared_distance, Dataset, Example, SparseVector,
};
pub use synth::generate_synthetic;
pub use trainer::{
    budget_maintain, build_solver, evaluate, sgd_step, train, train_with_solver, BudgetModel,
    Entry, Hyperparams, MergeAction, MergeCandidate, MergeOutcome, TrainStats,
};

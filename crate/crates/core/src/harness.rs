//! Solver comparison and timing harnesses: one training run drives the
//! updates while other solvers are replayed on the identical candidate sets.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lookup::LookupGrid;
use crate::merge::{wd_normalized, MergeInstance};
use crate::solver::{MergeSolver, SolverKind};
use crate::sparse::Dataset;
use crate::trainer::{
    build_solver, train_with_solver, Hyperparams, MergeAction, MergeOutcome, TrainStats,
};

/// One merge event as seen by both compared solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareEvent {
    pub candidates: usize,
    pub partner_a: usize,
    pub partner_b: usize,
    pub factor_a: f64,
    pub factor_b: f64,
}

/// Decision-level comparison of two solvers over one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub solver_a: SolverKind,
    pub solver_b: SolverKind,
    pub merge_events: u64,
    /// Fraction of merge events where both solvers picked the same partner;
    /// 1 when there were no events.
    pub agreement_rate: f64,
    /// Arithmetic mean over events of achieved WD / precise WD (the factor
    /// aggregation is labeled because other conventions exist).
    pub mean_factor_solver_a: f64,
    pub mean_factor_solver_b: f64,
    pub factor_aggregation: String,
    pub stats: TrainStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<CompareEvent>>,
}

fn pick_best(
    solver: &MergeSolver,
    outcome: &MergeOutcome,
) -> (usize, crate::solver::CandidateScore, MergeInstance) {
    let mut best: Option<(usize, f64, crate::solver::CandidateScore, MergeInstance)> = None;
    for (pos, c) in outcome.candidates.iter().enumerate() {
        let inst = MergeInstance::new(c.m, c.kappa);
        let score = solver.candidate_score(inst);
        let wd = c.denom_sq * score.wd_norm;
        if best.is_none() || wd < best.as_ref().unwrap().1 {
            best = Some((pos, wd, score, inst));
        }
    }
    let (pos, _, score, inst) = best.expect("merge outcome with no candidates");
    (pos, score, inst)
}

/// Achieved degradation of `solver`'s choice: closed-form WD at the h it
/// would commit to.
fn achieved_wd(
    solver: &MergeSolver,
    outcome: &MergeOutcome,
    pos: usize,
    score: crate::solver::CandidateScore,
    inst: MergeInstance,
) -> f64 {
    let h = solver.winner_h(inst, score);
    outcome.candidates[pos].denom_sq * wd_normalized(inst.m, inst.kappa, h)
}

/// Trains with `hp`'s solver (solver A) and, at every merge event, replays
/// solver B and a precise-GSS baseline on the identical candidate set.
/// Factors are achieved WD over the baseline's best WD; an event whose
/// baseline WD is zero contributes factor 1. A pre-built `grid` is used as
/// is; otherwise one is built when either solver needs it.
pub fn run_compare(
    data: &Dataset,
    hp: &Hyperparams,
    solver_b_kind: SolverKind,
    record_events: bool,
    grid: Option<Arc<LookupGrid>>,
) -> Result<CompareReport> {
    let grid = match grid {
        Some(grid) => Some(grid),
        None if hp.solver_kind.needs_grid() || solver_b_kind.needs_grid() => {
            Some(Arc::new(LookupGrid::build(hp.grid_size, hp.precise_eps)))
        }
        None => None,
    };
    let solver_a = build_solver(hp, grid.clone())?;
    let solver_b = MergeSolver::for_kind(solver_b_kind, hp.gss_eps, hp.precise_eps, grid)?;
    let precise = MergeSolver::gss_precise(hp.precise_eps);

    let mut events: u64 = 0;
    let mut matches: u64 = 0;
    let mut factor_sum_a = 0.0;
    let mut factor_sum_b = 0.0;
    let mut recorded = Vec::new();
    let mut observe = |outcome: &MergeOutcome| {
        let (pos_a, wd_a) = match outcome.action {
            MergeAction::Merged {
                candidate_pos, wd, ..
            } => (candidate_pos, wd),
            MergeAction::Removed => return,
        };
        let (pos_b, score_b, inst_b) = pick_best(&solver_b, outcome);
        let (pos_p, score_p, inst_p) = pick_best(&precise, outcome);
        let wd_b = achieved_wd(&solver_b, outcome, pos_b, score_b, inst_b);
        let wd_p = achieved_wd(&precise, outcome, pos_p, score_p, inst_p);
        let factor = |wd: f64| if wd_p > 0.0 { wd / wd_p } else { 1.0 };
        events += 1;
        if outcome.candidates[pos_a].entry_index == outcome.candidates[pos_b].entry_index {
            matches += 1;
        }
        factor_sum_a += factor(wd_a);
        factor_sum_b += factor(wd_b);
        if record_events {
            recorded.push(CompareEvent {
                candidates: outcome.candidates.len(),
                partner_a: outcome.candidates[pos_a].entry_index,
                partner_b: outcome.candidates[pos_b].entry_index,
                factor_a: factor(wd_a),
                factor_b: factor(wd_b),
            });
        }
    };
    let (_, mut stats) = train_with_solver(data, hp, &solver_a, &mut observe)?;

    stats.agreement_events = events;
    stats.agreement_matches = matches;
    stats.wd_factor_sum_solver = factor_sum_a;
    stats.wd_factor_sum_precise_baseline = events as f64; // baseline factor is 1 per event
    let mean = |sum: f64| if events == 0 { 1.0 } else { sum / events as f64 };
    Ok(CompareReport {
        solver_a: hp.solver_kind,
        solver_b: solver_b_kind,
        merge_events: events,
        agreement_rate: if events == 0 {
            1.0
        } else {
            matches as f64 / events as f64
        },
        mean_factor_solver_a: mean(factor_sum_a),
        mean_factor_solver_b: mean(factor_sum_b),
        factor_aggregation: "arithmetic mean of per-event achieved/precise WD".into(),
        stats,
        events: if record_events { Some(recorded) } else { None },
    })
}

/// Timing summary for one solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverBench {
    pub solver: SolverKind,
    /// Per-run means over the repeats, in seconds.
    pub time_total: f64,
    pub time_merge_total: f64,
    pub time_section_a: f64,
    pub time_section_b: f64,
    pub merge_events: u64,
    pub merging_frequency: f64,
    /// Isolated per-call cost of solve_merge on random instances.
    pub solve_ns_per_call: f64,
}

/// Training-time and per-call timings across solvers on one dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub repeats: usize,
    pub microbench_solves: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_build_seconds: Option<f64>,
    pub solvers: Vec<SolverBench>,
}

/// Uniform random instances shared by every solver's microbenchmark;
/// kappa is drawn in (0, 1].
fn random_instances(count: usize, seed: u64) -> Vec<MergeInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| MergeInstance::new(rng.random::<f64>(), 1.0 - rng.random::<f64>()))
        .collect()
}

/// Mean nanoseconds per solve over the given instances.
pub fn microbench_solver(solver: &MergeSolver, instances: &[MergeInstance]) -> f64 {
    let started = Instant::now();
    let mut acc = 0.0;
    for inst in instances {
        let sol = solver.solve(*inst);
        acc += sol.h + sol.wd_norm;
    }
    let nanos = started.elapsed().as_nanos() as f64;
    std::hint::black_box(acc);
    nanos / instances.len() as f64
}

/// Runs full training `repeats` times per solver (averaging the wall-clock
/// sections) plus an isolated microbenchmark of `microbench_solves` solver
/// calls on shared random instances. A pre-built `grid` is used as is (and
/// `grid_build_seconds` stays `None`); otherwise one is built and timed when
/// any requested solver needs it.
pub fn run_bench(
    data: &Dataset,
    base: &Hyperparams,
    kinds: &[SolverKind],
    repeats: usize,
    microbench_solves: usize,
    grid: Option<Arc<LookupGrid>>,
) -> Result<BenchReport> {
    let need_grid = grid.is_none() && kinds.iter().any(|k| k.needs_grid());
    let grid_started = Instant::now();
    let grid = match grid {
        Some(grid) => Some(grid),
        None if need_grid => Some(Arc::new(LookupGrid::build(base.grid_size, base.precise_eps))),
        None => None,
    };
    let grid_build_seconds = need_grid.then(|| grid_started.elapsed().as_secs_f64());

    let instances = random_instances(microbench_solves, base.seed ^ 0x5eed);
    let repeats = repeats.max(1);
    let mut solvers = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let hp = Hyperparams {
            solver_kind: kind,
            ..base.clone()
        };
        let solver = MergeSolver::for_kind(kind, hp.gss_eps, hp.precise_eps, grid.clone())?;
        let mut acc = TrainStats::default();
        let mut last_stats = TrainStats::default();
        for _ in 0..repeats {
            let (_, stats) = train_with_solver(data, &hp, &solver, &mut |_| {})?;
            acc.time_total += stats.time_total;
            acc.time_merge_total += stats.time_merge_total;
            acc.time_section_a += stats.time_section_a;
            acc.time_section_b += stats.time_section_b;
            last_stats = stats;
        }
        let per_run = repeats as f64;
        solvers.push(SolverBench {
            solver: kind,
            time_total: acc.time_total / per_run,
            time_merge_total: acc.time_merge_total / per_run,
            time_section_a: acc.time_section_a / per_run,
            time_section_b: acc.time_section_b / per_run,
            merge_events: last_stats.merge_events,
            merging_frequency: last_stats.merging_frequency(),
            solve_ns_per_call: microbench_solver(&solver, &instances),
        });
    }
    Ok(BenchReport {
        repeats,
        microbench_solves,
        grid_build_seconds,
        solvers,
    })
}

//! Budgeted Pegasos-style SGD training of a kernel SVM: the budget is
//! enforced by merging two same-sign support vectors whenever the model
//! grows past it.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lookup::LookupGrid;
use crate::merge::{merged_alpha, wd_normalized, MergeInstance};
use crate::solver::{MergeSolver, SolverKind};
use crate::sparse::{blend, Dataset, Example, SparseVector};

/// Threshold below which the global scale is folded into the stored alphas.
const SCALE_FOLD_THRESHOLD: f64 = 1e-8;

/// Training configuration. `lambda` is derived from `c` and the dataset size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hyperparams {
    pub c: f64,
    pub gamma: f64,
    pub budget: usize,
    pub epochs: usize,
    pub solver_kind: SolverKind,
    pub gss_eps: f64,
    pub precise_eps: f64,
    pub grid_size: usize,
    pub use_bias: bool,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            c: 1.0,
            gamma: 1.0,
            budget: 100,
            epochs: 20,
            solver_kind: SolverKind::Gss,
            gss_eps: 0.01,
            precise_eps: 1e-10,
            grid_size: 400,
            use_bias: false,
            seed: 0,
        }
    }
}

impl Hyperparams {
    /// Regularization strength for an `n`-example dataset: 1 / (n * C).
    pub fn lambda(&self, n: usize) -> f64 {
        1.0 / (n as f64 * self.c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Invalid(msg.to_string()));
        if !(self.c > 0.0) {
            return bad("c must be positive");
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if self.budget < 2 {
            return bad("budget must be at least 2");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if !(self.gss_eps > 0.0) {
            return bad("gss-eps must be positive");
        }
        if !(self.precise_eps > 0.0) {
            return bad("precise-eps must be positive");
        }
        if self.grid_size < 2 {
            return bad("grid-size must be at least 2");
        }
        Ok(())
    }
}

/// One support vector with its stored coefficient (effective coefficient is
/// `scale * alpha`).
#[derive(Debug, Clone)]
pub struct Entry {
    pub alpha: f64,
    pub sv: SparseVector,
}

/// Kernel expansion `f(x) = scale * sum alpha_e k(sv_e, x) + bias` with at
/// most B entries outside of budget maintenance.
#[derive(Debug, Clone)]
pub struct BudgetModel {
    pub kernel: Kernel,
    pub scale: f64,
    pub bias: f64,
    pub entries: Vec<Entry>,
}

impl BudgetModel {
    pub fn new(gamma: f64) -> BudgetModel {
        BudgetModel {
            kernel: Kernel::new(gamma),
            scale: 1.0,
            bias: 0.0,
            entries: Vec::new(),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.kernel.gamma
    }

    pub fn decision_function(&self, x: &SparseVector) -> f64 {
        let sum: f64 = self
            .entries
            .iter()
            .map(|e| e.alpha * self.kernel.eval(&e.sv, x))
            .sum();
        self.scale * sum + self.bias
    }

    /// Predicted label in {-1, +1}; a decision value of exactly 0 maps to +1.
    pub fn predict(&self, x: &SparseVector) -> f64 {
        if self.decision_function(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Squared RKHS norm of the weight vector (excludes the bias), by full
    /// Gram expansion. O(B^2); intended for tests and diagnostics.
    pub fn norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for a in &self.entries {
            for b in &self.entries {
                acc += a.alpha * b.alpha * self.kernel.eval(&a.sv, &b.sv);
            }
        }
        self.scale * self.scale * acc
    }

    /// Multiplies every stored alpha by the current scale and resets it to 1.
    pub fn fold_scale(&mut self) {
        for e in &mut self.entries {
            e.alpha *= self.scale;
        }
        self.scale = 1.0;
    }

    /// Writes the model as text: a `bsvm 1 <gamma> <bias> <scale>` header
    /// (scale pre-folded into the coefficients, so always 1), then one
    /// `<alpha> <index>:<value> ...` line per entry with 1-based indices.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("bsvm 1 {} {} 1\n", self.kernel.gamma, self.bias));
        for e in &self.entries {
            out.push_str(&format!("{}", e.alpha * self.scale));
            for (i, v) in e.sv.iter() {
                out.push_str(&format!(" {}:{}", i + 1, v));
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<BudgetModel> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |msg: String| Error::Model(msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "bsvm" {
            return Err(bad(format!("bad header {header:?}")));
        }
        if fields[1] != "1" {
            return Err(bad(format!("unsupported version {:?}", fields[1])));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| bad(format!("bad {what} value {s:?}")))
        };
        let gamma = num(fields[2], "gamma")?;
        let bias = num(fields[3], "bias")?;
        let scale = num(fields[4], "scale")?;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(bad(format!("gamma must be positive, got {gamma}")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(bad(format!("scale must be positive, got {scale}")));
        }
        let mut entries = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let alpha = num(toks.next().unwrap(), "alpha")?;
            let mut pairs: Vec<(usize, f64)> = Vec::new();
            for tok in toks {
                let (is, vs) = tok
                    .split_once(':')
                    .ok_or_else(|| bad(format!("bad feature {tok:?}")))?;
                let idx: usize = is
                    .parse()
                    .ok()
                    .filter(|&i| i >= 1)
                    .ok_or_else(|| bad(format!("bad feature index {is:?}")))?;
                pairs.push((idx - 1, num(vs, "feature")?));
            }
            pairs.sort_by_key(|&(i, _)| i);
            if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(bad(format!("duplicate feature index in {line:?}")));
            }
            entries.push(Entry {
                alpha,
                sv: SparseVector::from_pairs(pairs),
            });
        }
        Ok(BudgetModel {
            kernel: Kernel::new(gamma),
            scale,
            bias,
            entries,
        })
    }
}

/// Counters and wall-clock sections for one training run. Times are seconds.
/// Section A is the time spent inside merge-solver queries; section B is the
/// rest of budget maintenance. The agreement/factor fields stay zero unless a
/// comparison harness fills them in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub sgd_iterations: u64,
    pub margin_violations: u64,
    pub merge_events: u64,
    pub removal_fallbacks: u64,
    pub time_total: f64,
    pub time_merge_total: f64,
    pub time_section_a: f64,
    pub time_section_b: f64,
    pub agreement_events: u64,
    pub agreement_matches: u64,
    pub wd_factor_sum_solver: f64,
    pub wd_factor_sum_precise_baseline: f64,
}

impl TrainStats {
    /// Fraction of SGD iterations that triggered a merge.
    pub fn merging_frequency(&self) -> f64 {
        if self.sgd_iterations == 0 {
            0.0
        } else {
            self.merge_events as f64 / self.sgd_iterations as f64
        }
    }
}

/// One scored merge candidate: the minimal-coefficient entry paired with
/// `entry_index`.
#[derive(Debug, Clone, Copy)]
pub struct MergeCandidate {
    pub entry_index: usize,
    pub m: f64,
    pub kappa: f64,
    /// (|alpha_min| + |alpha_partner|)^2 over effective coefficients; the
    /// factor that denormalizes wd_norm.
    pub denom_sq: f64,
}

/// What budget maintenance did to the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MergeAction {
    Merged {
        /// Position of the winner in `candidates`.
        candidate_pos: usize,
        /// Entry index of the winning partner before mutation.
        partner_index: usize,
        h: f64,
        /// Achieved weight degradation: denom_sq * wd_norm at the final h.
        wd: f64,
    },
    Removed,
}

/// Record of one budget-maintenance event; entry indices refer to the model
/// state before the event.
#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub min_index: usize,
    pub candidates: Vec<MergeCandidate>,
    pub action: MergeAction,
}

/// One SGD step at global step counter `t` (1-based). Returns whether the
/// margin was violated. The scale-down happens before the margin test; at
/// t = 1 the factor is 0, which is realized by clearing the entries.
pub fn sgd_step(
    model: &mut BudgetModel,
    example: &Example,
    t: u64,
    lambda: f64,
    use_bias: bool,
) -> bool {
    debug_assert!(t >= 1);
    if t == 1 {
        model.entries.clear();
        model.scale = 1.0;
    } else {
        model.scale *= 1.0 - 1.0 / t as f64;
    }
    let eta = 1.0 / (lambda * t as f64);
    let violated = example.label * model.decision_function(&example.features) < 1.0;
    if violated {
        model.entries.push(Entry {
            alpha: eta * example.label / model.scale,
            sv: example.features.clone(),
        });
        if use_bias {
            model.bias += eta * example.label;
        }
    }
    if model.scale < SCALE_FOLD_THRESHOLD {
        model.fold_scale();
    }
    violated
}

/// Restores the budget after an insertion has pushed the model to B + 1
/// entries: merges the minimal-|coefficient| entry with the same-sign partner
/// of least weight degradation, or removes it outright when it is the only
/// entry of its sign. Ties break toward the lowest entry index.
pub fn budget_maintain(
    model: &mut BudgetModel,
    solver: &MergeSolver,
    stats: &mut TrainStats,
) -> MergeOutcome {
    let started = Instant::now();
    let mut section_a = Duration::ZERO;
    let n = model.entries.len();
    debug_assert!(n >= 2, "budget maintenance needs at least two entries");

    let mut min_index = 0;
    for i in 1..n {
        if (model.scale * model.entries[i].alpha).abs()
            < (model.scale * model.entries[min_index].alpha).abs()
        {
            min_index = i;
        }
    }
    let alpha_min_eff = model.scale * model.entries[min_index].alpha;

    let mut candidates = Vec::with_capacity(n - 1);
    let mut best: Option<(usize, f64, crate::solver::CandidateScore, MergeInstance)> = None;
    for j in 0..n {
        if j == min_index {
            continue;
        }
        let alpha_j_eff = model.scale * model.entries[j].alpha;
        if (alpha_j_eff > 0.0) != (alpha_min_eff > 0.0) {
            continue;
        }
        let kappa = model
            .kernel
            .eval(&model.entries[min_index].sv, &model.entries[j].sv);
        let sum = alpha_min_eff.abs() + alpha_j_eff.abs();
        let inst = MergeInstance::new(alpha_min_eff.abs() / sum, kappa);
        let clock = Instant::now();
        let score = solver.candidate_score(inst);
        section_a += clock.elapsed();
        let wd = sum * sum * score.wd_norm;
        let pos = candidates.len();
        candidates.push(MergeCandidate {
            entry_index: j,
            m: inst.m,
            kappa,
            denom_sq: sum * sum,
        });
        if best.is_none() || wd < best.as_ref().unwrap().1 {
            best = Some((pos, wd, score, inst));
        }
    }

    let action = match best {
        Some((pos, _, score, inst)) => {
            let partner_index = candidates[pos].entry_index;
            let clock = Instant::now();
            let h = solver.winner_h(inst, score);
            section_a += clock.elapsed();
            // The model actually changes by the blend at h, so the achieved
            // degradation is always the closed form at h, even when the
            // candidate ranking used interpolated values.
            let wd = candidates[pos].denom_sq * wd_normalized(inst.m, inst.kappa, h);
            let alpha_partner_eff = model.scale * model.entries[partner_index].alpha;
            let alpha_z_eff = merged_alpha(alpha_min_eff, alpha_partner_eff, inst.kappa, h);
            let z = blend(
                h,
                &model.entries[min_index].sv,
                1.0 - h,
                &model.entries[partner_index].sv,
            );
            let (hi, lo) = if partner_index > min_index {
                (partner_index, min_index)
            } else {
                (min_index, partner_index)
            };
            model.entries.remove(hi);
            model.entries.remove(lo);
            model.entries.push(Entry {
                alpha: alpha_z_eff / model.scale,
                sv: z,
            });
            stats.merge_events += 1;
            MergeAction::Merged {
                candidate_pos: pos,
                partner_index,
                h,
                wd,
            }
        }
        None => {
            model.entries.remove(min_index);
            stats.removal_fallbacks += 1;
            MergeAction::Removed
        }
    };

    let total = started.elapsed();
    stats.time_merge_total += total.as_secs_f64();
    stats.time_section_a += section_a.as_secs_f64();
    stats.time_section_b += total.saturating_sub(section_a).as_secs_f64();
    MergeOutcome {
        min_index,
        candidates,
        action,
    }
}

/// Builds the merge solver configured by `hp`, constructing the lookup grid
/// at `precise_eps` when one is needed and not supplied.
pub fn build_solver(hp: &Hyperparams, grid: Option<Arc<LookupGrid>>) -> Result<MergeSolver> {
    let grid = match (hp.solver_kind.needs_grid(), grid) {
        (true, None) => Some(Arc::new(LookupGrid::build(hp.grid_size, hp.precise_eps))),
        (_, grid) => grid,
    };
    MergeSolver::for_kind(hp.solver_kind, hp.gss_eps, hp.precise_eps, grid)
}

/// Trains on `data` with the solver configured by `hp`.
pub fn train(data: &Dataset, hp: &Hyperparams) -> Result<(BudgetModel, TrainStats)> {
    let solver = build_solver(hp, None)?;
    train_with_solver(data, hp, &solver, &mut |_| {})
}

/// Training loop with an explicit solver and a per-merge-event observer
/// (used by the comparison harness). Visits each epoch in a fresh seeded
/// shuffle; the step counter t runs across epochs. Deterministic given
/// (data, hp, seed).
pub fn train_with_solver(
    data: &Dataset,
    hp: &Hyperparams,
    solver: &MergeSolver,
    observe: &mut dyn FnMut(&MergeOutcome),
) -> Result<(BudgetModel, TrainStats)> {
    hp.validate()?;
    if data.is_empty() {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    let started = Instant::now();
    let lambda = hp.lambda(data.len());
    let mut model = BudgetModel::new(hp.gamma);
    let mut stats = TrainStats::default();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut t: u64 = 0;
    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            stats.sgd_iterations += 1;
            if sgd_step(&mut model, &data.examples[i], t, lambda, hp.use_bias) {
                stats.margin_violations += 1;
            }
            if model.entries.len() == hp.budget + 1 {
                let outcome = budget_maintain(&mut model, solver, &mut stats);
                observe(&outcome);
            }
        }
    }
    stats.time_total = started.elapsed().as_secs_f64();
    Ok((model, stats))
}

/// Fraction of examples whose predicted label matches; a decision value of
/// exactly 0 counts as +1.
pub fn evaluate(model: &BudgetModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Invalid("cannot evaluate on an empty dataset".into()));
    }
    let correct = data
        .examples
        .iter()
        .filter(|ex| model.predict(&ex.features) == ex.label)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

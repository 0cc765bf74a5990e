//! Merge-solver strategies shared by the trainer, harness, and CLI.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lookup::{solve_merge_lookup_h, solve_merge_lookup_wd, LookupGrid};
use crate::merge::{gss_maximize, solve_merge_gss, wd_normalized, MergeInstance, MergeSolution};

/// The four ways of solving merge problems during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Gss,
    GssPrecise,
    LookupH,
    LookupWd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Gss,
        SolverKind::GssPrecise,
        SolverKind::LookupH,
        SolverKind::LookupWd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Gss => "gss",
            SolverKind::GssPrecise => "gss-precise",
            SolverKind::LookupH => "lookup-h",
            SolverKind::LookupWd => "lookup-wd",
        }
    }

    pub fn needs_grid(self) -> bool {
        matches!(self, SolverKind::LookupH | SolverKind::LookupWd)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gss" => Ok(SolverKind::Gss),
            "gss-precise" => Ok(SolverKind::GssPrecise),
            "lookup-h" => Ok(SolverKind::LookupH),
            "lookup-wd" => Ok(SolverKind::LookupWd),
            other => Err(Error::Invalid(format!(
                "unknown solver {other:?} (expected gss, gss-precise, lookup-h or lookup-wd)"
            ))),
        }
    }
}

/// Ranking score for one merge candidate. `h` is filled in eagerly by the
/// solvers that compute it anyway; the WD-lookup solver defers it until the
/// winner is known.
#[derive(Debug, Clone, Copy)]
pub struct CandidateScore {
    pub wd_norm: f64,
    pub h: Option<f64>,
}

/// A concrete merge solver: golden section search at some tolerance, or one
/// of the two grid-backed lookups.
#[derive(Debug, Clone)]
pub struct MergeSolver {
    kind: SolverKind,
    eps: f64,
    grid: Option<Arc<LookupGrid>>,
}

impl MergeSolver {
    pub fn gss(eps: f64) -> MergeSolver {
        MergeSolver {
            kind: SolverKind::Gss,
            eps,
            grid: None,
        }
    }

    pub fn gss_precise(eps: f64) -> MergeSolver {
        MergeSolver {
            kind: SolverKind::GssPrecise,
            eps,
            grid: None,
        }
    }

    pub fn lookup_h(grid: Arc<LookupGrid>) -> MergeSolver {
        MergeSolver {
            kind: SolverKind::LookupH,
            eps: 0.0,
            grid: Some(grid),
        }
    }

    pub fn lookup_wd(grid: Arc<LookupGrid>) -> MergeSolver {
        MergeSolver {
            kind: SolverKind::LookupWd,
            eps: 0.0,
            grid: Some(grid),
        }
    }

    /// Builds the solver for `kind`; lookup kinds require a grid.
    pub fn for_kind(
        kind: SolverKind,
        gss_eps: f64,
        precise_eps: f64,
        grid: Option<Arc<LookupGrid>>,
    ) -> Result<MergeSolver> {
        match kind {
            SolverKind::Gss => Ok(MergeSolver::gss(gss_eps)),
            SolverKind::GssPrecise => Ok(MergeSolver::gss_precise(precise_eps)),
            SolverKind::LookupH | SolverKind::LookupWd => {
                let grid = grid.ok_or_else(|| {
                    Error::Invalid(format!("solver {} requires a lookup grid", kind.name()))
                })?;
                Ok(if kind == SolverKind::LookupH {
                    MergeSolver::lookup_h(grid)
                } else {
                    MergeSolver::lookup_wd(grid)
                })
            }
        }
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    /// Full (h, wd) solution for one instance.
    pub fn solve(&self, inst: MergeInstance) -> MergeSolution {
        match self.kind {
            SolverKind::Gss | SolverKind::GssPrecise => solve_merge_gss(inst, self.eps),
            SolverKind::LookupH => solve_merge_lookup_h(self.grid.as_ref().unwrap(), inst),
            SolverKind::LookupWd => solve_merge_lookup_wd(self.grid.as_ref().unwrap(), inst),
        }
    }

    /// Score used to rank candidates in the selection loop. For the WD-lookup
    /// solver this touches only the WD matrix.
    pub fn candidate_score(&self, inst: MergeInstance) -> CandidateScore {
        match self.kind {
            SolverKind::Gss | SolverKind::GssPrecise => {
                let h = gss_maximize(inst, self.eps);
                CandidateScore {
                    wd_norm: wd_normalized(inst.m, inst.kappa, h),
                    h: Some(h),
                }
            }
            SolverKind::LookupH => {
                let grid = self.grid.as_ref().unwrap();
                let h = grid.interp_h(inst);
                CandidateScore {
                    wd_norm: wd_normalized(inst.m, inst.kappa, h),
                    h: Some(h),
                }
            }
            SolverKind::LookupWd => CandidateScore {
                wd_norm: self.grid.as_ref().unwrap().interp_wd(inst),
                h: None,
            },
        }
    }

    /// Blend weight for the winning candidate; consults the h matrix exactly
    /// once when the score did not already fix it.
    pub fn winner_h(&self, inst: MergeInstance, score: CandidateScore) -> f64 {
        score
            .h
            .unwrap_or_else(|| self.grid.as_ref().unwrap().interp_h(inst))
    }
}

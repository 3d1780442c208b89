//! Budgeted editors of a sign matrix, applied before the noise (pre phase) or
//! after it (post phase).
//!
//! Budgets count ordered entries, so changing the pair `{i, j}` costs 2. A
//! strategy first plans all of its changes, then the plan is charged against
//! the budget as a whole.

mod ledger;
mod poison;

use std::fmt;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

pub use ledger::{Edit, EditLedger, PoisonInfo, StrategyInfo};

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::model::ClusterPartition;
use crate::rng::{bernoulli, probability_threshold, random_sign, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Post,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
        })
    }
}

/// What an adversary may look at.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryContext<'a> {
    pub ground_truth: &'a ClusterPartition,
    /// The zero-error matrix `M`.
    pub original: &'a RealMatrix,
    /// The noisy matrix `M'`; present exactly in the post phase.
    pub noisy: Option<&'a RealMatrix>,
    pub epsilon: f64,
}

impl AdversaryContext<'_> {
    pub fn phase(&self) -> Phase {
        if self.noisy.is_some() {
            Phase::Post
        } else {
            Phase::Pre
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Strategy {
    Null,
    PreRandomFlip { pair_count: usize },
    PostRandomFlip { pair_count: usize },
    PreRowRandomizer { m_vertices: usize },
    PostInfoEraser { m_vertices: usize },
    PostSpectralPoison,
}

pub const STRATEGY_NAMES: [&str; 6] = [
    "null",
    "pre_random_flip",
    "post_random_flip",
    "pre_row_randomizer",
    "post_info_eraser",
    "post_spectral_poison",
];

impl Strategy {
    /// Looks a strategy up by name. `param` is the pair count or vertex
    /// count for the strategies that take one.
    pub fn from_name(name: &str, param: Option<usize>) -> Result<Self> {
        let need = |what: &str| {
            param.ok_or_else(|| Error::Config(format!("strategy `{name}` needs `{what}`")))
        };
        Ok(match name {
            "null" => Strategy::Null,
            "pre_random_flip" => Strategy::PreRandomFlip {
                pair_count: need("pair_count")?,
            },
            "post_random_flip" => Strategy::PostRandomFlip {
                pair_count: need("pair_count")?,
            },
            "pre_row_randomizer" => Strategy::PreRowRandomizer {
                m_vertices: need("m_vertices")?,
            },
            "post_info_eraser" => Strategy::PostInfoEraser {
                m_vertices: need("m_vertices")?,
            },
            "post_spectral_poison" => Strategy::PostSpectralPoison,
            other => return Err(Error::UnknownStrategy(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Null => "null",
            Strategy::PreRandomFlip { .. } => "pre_random_flip",
            Strategy::PostRandomFlip { .. } => "post_random_flip",
            Strategy::PreRowRandomizer { .. } => "pre_row_randomizer",
            Strategy::PostInfoEraser { .. } => "post_info_eraser",
            Strategy::PostSpectralPoison => "post_spectral_poison",
        }
    }

    /// Phase the strategy belongs to; `None` for the null adversary.
    pub fn phase(&self) -> Option<Phase> {
        match self {
            Strategy::Null => None,
            Strategy::PreRandomFlip { .. } | Strategy::PreRowRandomizer { .. } => Some(Phase::Pre),
            _ => Some(Phase::Post),
        }
    }
}

pub(crate) struct PairChange {
    i: usize,
    j: usize,
    new: f64,
}

pub(crate) struct Plan {
    changes: Vec<PairChange>,
    info: StrategyInfo,
    notes: Vec<String>,
}

impl Plan {
    fn empty() -> Self {
        Self {
            changes: Vec::new(),
            info: StrategyInfo::None,
            notes: Vec::new(),
        }
    }
}

/// Runs `strategy` on `input` and returns the edited matrix with its ledger.
pub fn perturb(
    strategy: &Strategy,
    input: &RealMatrix,
    budget: usize,
    ctx: &AdversaryContext<'_>,
    rng: &mut SimRng,
) -> Result<(RealMatrix, EditLedger)> {
    input.check_sign_matrix()?;
    let n = input.n();
    if ctx.original.n() != n || ctx.ground_truth.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ctx.original.n(),
        });
    }
    if budget > n * n {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} exceeds n^2 = {}",
            n * n
        )));
    }
    if let Some(phase) = strategy.phase() {
        if phase != ctx.phase() {
            return Err(Error::WrongPhase {
                strategy: strategy.name().to_string(),
                phase: ctx.phase().to_string(),
            });
        }
    }
    let plan = match *strategy {
        Strategy::Null => Plan::empty(),
        Strategy::PreRandomFlip { pair_count } | Strategy::PostRandomFlip { pair_count } => {
            random_flip(input, pair_count, rng)?
        }
        Strategy::PreRowRandomizer { m_vertices } => row_randomizer(input, m_vertices, rng)?,
        Strategy::PostInfoEraser { m_vertices } => {
            let noisy = ctx.noisy.expect("post phase has the noisy matrix");
            info_eraser(input, ctx.original, noisy, ctx.epsilon, m_vertices, rng)?
        }
        Strategy::PostSpectralPoison => poison::plan(input, ctx.ground_truth, ctx.epsilon, rng)?,
    };
    let needed = 2 * plan.changes.len();
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut ledger = EditLedger::new(budget);
    let mut out = input.clone();
    for c in &plan.changes {
        ledger.push_pair(c.i, c.j, input.get(c.i, c.j), c.new);
        out.set_sym(c.i, c.j, c.new);
    }
    ledger.info = plan.info;
    ledger.notes = plan.notes;
    Ok((out, ledger))
}

/// `(i, j)`, `i < j`, of the `t`-th off-diagonal pair in row-major order.
fn pair_from_index(t: usize, n: usize) -> (usize, usize) {
    let offset = |i: usize| i * n - i * (i + 1) / 2;
    // Largest i with offset(i) <= t.
    let (mut lo, mut hi) = (0, n - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if offset(mid) <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, lo + 1 + t - offset(lo))
}

fn random_flip(input: &RealMatrix, pair_count: usize, rng: &mut SimRng) -> Result<Plan> {
    let n = input.n();
    let total = n * (n - 1) / 2;
    if pair_count > total {
        return Err(Error::InvalidArgument(format!(
            "cannot flip {pair_count} of {total} pairs"
        )));
    }
    let mut pairs: Vec<(usize, usize)> = sample(rng, total, pair_count)
        .into_iter()
        .map(|t| pair_from_index(t, n))
        .collect();
    pairs.sort_unstable();
    Ok(Plan {
        changes: pairs
            .into_iter()
            .map(|(i, j)| PairChange {
                i,
                j,
                new: -input.get(i, j),
            })
            .collect(),
        ..Plan::empty()
    })
}

fn pick_vertices(n: usize, m: usize, rng: &mut SimRng) -> Result<(Vec<usize>, Vec<bool>)> {
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {m} of {n} items"
        )));
    }
    let mut vertices = sample(rng, n, m).into_vec();
    vertices.sort_unstable();
    let mut chosen = vec![false; n];
    for &v in &vertices {
        chosen[v] = true;
    }
    Ok((vertices, chosen))
}

/// Every pair touching a chosen item gets a fresh uniform sign.
fn row_randomizer(input: &RealMatrix, m: usize, rng: &mut SimRng) -> Result<Plan> {
    let n = input.n();
    let (vertices, chosen) = pick_vertices(n, m, rng)?;
    let mut changes = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if chosen[i] || chosen[j] {
                let new = random_sign(rng);
                if new != input.get(i, j) {
                    changes.push(PairChange { i, j, new });
                }
            }
        }
    }
    Ok(Plan {
        changes,
        info: StrategyInfo::Vertices { vertices },
        notes: Vec::new(),
    })
}

/// Re-randomises the surviving signal around chosen items.
///
/// An entry of `M'` equals `M` with probability `1/2 + eps`; of those, a
/// fraction `q = 2 eps / (1/2 + eps)` are the ones the noise kept and the rest
/// agree by chance. Each agreeing entry is marked as preserved with
/// probability `q` and marked entries receive a fresh uniform sign. Entries
/// around a chosen item are then independent of `M`.
fn info_eraser(
    input: &RealMatrix,
    original: &RealMatrix,
    noisy: &RealMatrix,
    epsilon: f64,
    m: usize,
    rng: &mut SimRng,
) -> Result<Plan> {
    let n = input.n();
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1/2], got {epsilon}"
        )));
    }
    let (vertices, chosen) = pick_vertices(n, m, rng)?;
    let mark = probability_threshold(2.0 * epsilon / (0.5 + epsilon));
    let mut preserved_by_item = vec![0usize; n];
    let mut changes = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !(chosen[i] || chosen[j]) || noisy.get(i, j) != original.get(i, j) {
                continue;
            }
            if !bernoulli(rng, mark) {
                continue;
            }
            preserved_by_item[i] += 1;
            preserved_by_item[j] += 1;
            let new = random_sign(rng);
            if new != input.get(i, j) {
                changes.push(PairChange { i, j, new });
            }
        }
    }
    let preserved = vertices.iter().map(|&v| preserved_by_item[v]).collect();
    Ok(Plan {
        changes,
        info: StrategyInfo::Eraser {
            vertices,
            preserved,
        },
        notes: Vec::new(),
    })
}

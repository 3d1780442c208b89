use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::adversary::{Phase, Strategy};
use crate::error::{Error, Result};
use crate::model::{default_slack, PartitionMode};
use crate::recursive::{SdpReconstructOptions, SdpVariant};
use crate::spectral::SpectralConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub name: String,
    /// Must agree with the strategy's own phase when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    /// Pairs flipped by the random-flip strategies; defaults to half the
    /// budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_count: Option<Expr>,
    /// Items touched by the row strategies, rounded up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_vertices: Option<Expr>,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            name: "null".into(),
            phase: None,
            pair_count: None,
            m_vertices: None,
        }
    }
}

impl AdversaryConfig {
    pub fn strategy(&self, n: usize, eps: f64, budget: usize) -> Result<Strategy> {
        let param = match self.name.as_str() {
            "pre_random_flip" | "post_random_flip" => Some(match &self.pair_count {
                Some(e) => e.eval_floor(n, eps)?,
                None => budget / 2,
            }),
            "pre_row_randomizer" | "post_info_eraser" => self
                .m_vertices
                .as_ref()
                .map(|e| e.eval_ceil(n, eps))
                .transpose()?,
            _ => None,
        };
        let strategy = Strategy::from_name(&self.name, param)?;
        if let (Some(want), Some(have)) = (self.phase, strategy.phase()) {
            if want != have {
                return Err(Error::Config(format!(
                    "adversary `{}` belongs to the {have} phase, config says {want}",
                    self.name
                )));
            }
        }
        Ok(strategy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Spectral,
    Sdp,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Spectral => "spectral",
            AlgorithmKind::Sdp => "sdp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    #[serde(default = "default_variant")]
    pub variant: SdpVariant,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub sdp: SdpReconstructOptions,
    /// Starting distance bound; `None` means `16 n sqrt(n) + 2 B_used`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<Expr>,
}

fn default_variant() -> SdpVariant {
    SdpVariant::Eps
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            kind: AlgorithmKind::Spectral,
            variant: SdpVariant::Eps,
            spectral: SpectralConfig::default(),
            sdp: SdpReconstructOptions::default(),
            f0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PartitionConfig {
    #[default]
    Equal,
    /// `slack` defaults to `ceil(n^0.6) / k`.
    NearEqual { slack: Option<usize> },
}

impl PartitionConfig {
    pub fn mode(self, n: usize, k: usize) -> PartitionMode {
        match self {
            PartitionConfig::Equal => PartitionMode::Equal,
            PartitionConfig::NearEqual { slack } => PartitionMode::NearEqual {
                slack: slack.unwrap_or_else(|| default_slack(n, k)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub epsilon: Vec<f64>,
    #[serde(default = "zero_budget")]
    pub budget: Vec<Expr>,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn zero_budget() -> Vec<Expr> {
    vec![Expr::constant(0)]
}

fn one() -> usize {
    1
}

/// One element of the Cartesian product of the value lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingPoint {
    pub setting_id: usize,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub budget_expr: Expr,
    pub budget: usize,
    pub strategy: Strategy,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks every point of the product, so that configuration mistakes
    /// surface before any trial runs.
    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("n", self.n.is_empty()),
            ("k", self.k.is_empty()),
            ("epsilon", self.epsilon.is_empty()),
            ("budget", self.budget.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!(
                    "`{name}` must list at least one value"
                )));
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("`trials` must be at least 1".into()));
        }
        self.points().map(|_| ()).map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    pub fn points(&self) -> Result<Vec<SettingPoint>> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &k in &self.k {
                for &epsilon in &self.epsilon {
                    for budget_expr in &self.budget {
                        out.push(self.point(out.len(), n, k, epsilon, budget_expr)?);
                    }
                }
            }
        }
        Ok(out)
    }

    fn point(
        &self,
        setting_id: usize,
        n: usize,
        k: usize,
        epsilon: f64,
        budget_expr: &Expr,
    ) -> Result<SettingPoint> {
        let here = || format!("(n = {n}, k = {k}, eps = {epsilon})");
        if k < 2 || k > n {
            return Err(Error::Config(format!("need 2 <= k <= n at {}", here())));
        }
        if !(epsilon > 0.0 && epsilon <= 0.5) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1/2] at {}",
                here()
            )));
        }
        let needs_divisible =
            self.partition == PartitionConfig::Equal || self.algorithm.kind == AlgorithmKind::Sdp;
        if needs_divisible && !n.is_multiple_of(k) {
            return Err(Error::Config(format!("k must divide n at {}", here())));
        }
        let budget = budget_expr.eval_floor(n, epsilon)?;
        if budget > n * n {
            return Err(Error::Config(format!(
                "budget {budget} exceeds n^2 at {}",
                here()
            )));
        }
        let strategy = self.adversary.strategy(n, epsilon, budget)?;
        if let Strategy::PreRowRandomizer { m_vertices } | Strategy::PostInfoEraser { m_vertices } =
            strategy
        {
            if m_vertices > n {
                return Err(Error::Config(format!(
                    "m_vertices {m_vertices} exceeds n at {}",
                    here()
                )));
            }
        }
        if strategy == Strategy::PostSpectralPoison && k != 2 {
            return Err(Error::Config(format!(
                "post_spectral_poison needs k = 2 at {}",
                here()
            )));
        }
        Ok(SettingPoint {
            setting_id,
            n,
            k,
            epsilon,
            budget_expr: budget_expr.clone(),
            budget,
            strategy,
        })
    }
}

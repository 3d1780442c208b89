use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{AlgorithmConfig, AlgorithmKind, ExperimentConfig, SettingPoint};
use crate::adversary::{perturb, AdversaryContext, EditLedger, Phase, Strategy};
use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::metrics::misclassified_count;
use crate::model::{
    apply_noise, make_partition, zero_error_matrix, ClusterPartition, ModelParams, PartitionMode,
};
use crate::recursive::{default_f0, sdp_reconstruct, TraceEntry};
use crate::rng::{derive_seed, substream, SimRng};
use crate::spectral::spectral_cluster;

// Substream labels under a trial seed.
const PARTITION_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const ADVERSARY_STREAM: u64 = 2;
const ALGORITHM_STREAM: u64 = 3;

/// One row of a sweep. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub setting_id: usize,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub b_requested: usize,
    pub b_used: usize,
    pub adversary: String,
    pub algorithm: String,
    pub variant: Option<String>,
    pub seed: u64,
    pub detected_k: Option<usize>,
    pub misclassified: Option<usize>,
    pub misclassified_fraction: Option<f64>,
    pub runtime_ms: u64,
    pub status: String,
}

pub const CSV_COLUMNS: [&str; 15] = [
    "setting_id",
    "n",
    "k",
    "epsilon",
    "b_requested",
    "b_used",
    "adversary",
    "algorithm",
    "variant",
    "seed",
    "detected_k",
    "misclassified",
    "misclassified_fraction",
    "runtime_ms",
    "status",
];

/// A generated instance: `m_prime` is the matrix between the two corruption
/// steps (adversary output in the pre phase, noisy matrix in the post phase).
#[derive(Debug, Clone)]
pub struct Instance {
    pub params: ModelParams,
    pub strategy: Strategy,
    pub phase: Phase,
    pub partition: ClusterPartition,
    pub m: RealMatrix,
    pub m_prime: RealMatrix,
    pub m_double_prime: RealMatrix,
    pub ledger: EditLedger,
}

pub fn trial_seed(base_seed: u64, setting_id: usize, trial_index: usize) -> u64 {
    derive_seed(base_seed, &[setting_id as u64, trial_index as u64])
}

/// Partition, then noise and adversary in the order of the strategy's phase.
/// The null adversary runs after the noise.
pub fn generate_instance(point: &SettingPoint, mode: PartitionMode, seed: u64) -> Result<Instance> {
    let params = ModelParams {
        n: point.n,
        k: point.k,
        epsilon: point.epsilon,
        budget: point.budget,
        seed,
    };
    params.validate()?;
    let partition = make_partition(
        point.n,
        point.k,
        mode,
        &mut substream(seed, &[PARTITION_STREAM]),
    )?;
    let m = zero_error_matrix(&partition);
    let mut noise_rng = substream(seed, &[NOISE_STREAM]);
    let mut adv_rng = substream(seed, &[ADVERSARY_STREAM]);
    let phase = point.strategy.phase().unwrap_or(Phase::Post);
    let (m_prime, m_double_prime, ledger) = match phase {
        Phase::Pre => {
            let ctx = AdversaryContext {
                ground_truth: &partition,
                original: &m,
                noisy: None,
                epsilon: point.epsilon,
            };
            let (edited, ledger) = perturb(&point.strategy, &m, point.budget, &ctx, &mut adv_rng)?;
            let noisy = apply_noise(&edited, point.epsilon, &mut noise_rng)?;
            (edited, noisy, ledger)
        }
        Phase::Post => {
            let noisy = apply_noise(&m, point.epsilon, &mut noise_rng)?;
            let ctx = AdversaryContext {
                ground_truth: &partition,
                original: &m,
                noisy: Some(&noisy),
                epsilon: point.epsilon,
            };
            let (edited, ledger) =
                perturb(&point.strategy, &noisy, point.budget, &ctx, &mut adv_rng)?;
            (noisy, edited, ledger)
        }
    };
    Ok(Instance {
        params,
        strategy: point.strategy.clone(),
        phase,
        partition,
        m,
        m_prime,
        m_double_prime,
        ledger,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmOutput {
    pub partition: ClusterPartition,
    pub detected_k: Option<usize>,
    pub attempts: usize,
    pub trace: Vec<TraceEntry>,
}

pub fn run_algorithm(
    cfg: &AlgorithmConfig,
    inst: &Instance,
    rng: &mut SimRng,
) -> Result<AlgorithmOutput> {
    let p = &inst.params;
    match cfg.kind {
        AlgorithmKind::Spectral => {
            let r = spectral_cluster(&inst.m_double_prime, &cfg.spectral, rng)?;
            Ok(AlgorithmOutput {
                partition: r.partition,
                detected_k: Some(r.detected_k),
                attempts: 1,
                trace: Vec::new(),
            })
        }
        AlgorithmKind::Sdp => {
            let f0 = match &cfg.f0 {
                Some(e) => e.eval(p.n, p.epsilon),
                None => default_f0(p.n, inst.ledger.entries_used),
            };
            let out = sdp_reconstruct(
                &inst.m_double_prime,
                p.k,
                p.epsilon,
                f0,
                cfg.variant,
                &cfg.sdp,
                rng,
            )?;
            Ok(AlgorithmOutput {
                partition: out.partition,
                detected_k: None,
                attempts: out.attempts,
                trace: out.trace,
            })
        }
    }
}

/// Everything produced by one trial; `instance` is absent when generation
/// failed and `output` when the algorithm did.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub instance: Option<Instance>,
    pub output: Option<AlgorithmOutput>,
}

fn status_of(err: &Error) -> String {
    match err {
        Error::RecursionFailed { .. } | Error::DegenerateThreshold { .. } => "aborted".into(),
        e => format!("error:{}", e.code()),
    }
}

pub fn run_trial_detailed(
    cfg: &ExperimentConfig,
    point: &SettingPoint,
    trial_index: usize,
) -> TrialOutcome {
    let seed = trial_seed(cfg.base_seed, point.setting_id, trial_index);
    let algo = &cfg.algorithm;
    let mut record = TrialRecord {
        setting_id: point.setting_id,
        n: point.n,
        k: point.k,
        epsilon: point.epsilon,
        b_requested: point.budget,
        b_used: 0,
        adversary: point.strategy.name().to_string(),
        algorithm: algo.kind.name().to_string(),
        variant: (algo.kind == AlgorithmKind::Sdp).then(|| algo.variant.name().to_string()),
        seed,
        detected_k: None,
        misclassified: None,
        misclassified_fraction: None,
        runtime_ms: 0,
        status: "ok".into(),
    };
    let instance = match generate_instance(point, cfg.partition.mode(point.n, point.k), seed) {
        Ok(inst) => inst,
        Err(e) => {
            record.status = status_of(&e);
            return TrialOutcome {
                record,
                instance: None,
                output: None,
            };
        }
    };
    record.b_used = instance.ledger.entries_used;
    let start = Instant::now();
    let result = run_algorithm(algo, &instance, &mut substream(seed, &[ALGORITHM_STREAM]))
        .and_then(|out| misclassified_count(&out.partition, &instance.partition).map(|m| (out, m)));
    record.runtime_ms = start.elapsed().as_millis() as u64;
    let output = match result {
        Ok((out, matched)) => {
            record.detected_k = out.detected_k;
            record.misclassified = Some(matched.misclassified);
            record.misclassified_fraction = Some(matched.misclassified as f64 / point.n as f64);
            Some(out)
        }
        Err(e) => {
            record.status = status_of(&e);
            None
        }
    };
    TrialOutcome {
        record,
        instance: Some(instance),
        output,
    }
}

pub fn run_trial(cfg: &ExperimentConfig, point: &SettingPoint, trial_index: usize) -> TrialRecord {
    run_trial_detailed(cfg, point, trial_index).record
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn noiseless_spectral_trial() {
        let cfg = config(r#"{"n": [12], "k": [3], "epsilon": [0.5], "base_seed": 4}"#);
        let pts = cfg.points().unwrap();
        let r = run_trial(&cfg, &pts[0], 0);
        assert_eq!(r.status, "ok");
        assert_eq!(r.misclassified, Some(0));
        assert_eq!(r.detected_k, Some(3));
        assert_eq!(r.variant, None);
        let again = run_trial(&cfg, &pts[0], 0);
        assert_eq!(
            TrialRecord { runtime_ms: 0, ..r },
            TrialRecord {
                runtime_ms: 0,
                ..again
            }
        );
    }

    #[test]
    fn post_ledger_matches_noisy_matrix() {
        let cfg = config(
            r#"{"n": [30], "k": [3], "epsilon": [0.3], "budget": [60],
                "adversary": {"name": "post_random_flip"}}"#,
        );
        let pts = cfg.points().unwrap();
        let out = run_trial_detailed(&cfg, &pts[0], 2);
        let inst = out.instance.unwrap();
        assert_eq!(inst.phase, Phase::Post);
        assert_eq!(inst.ledger.entries_used, 60);
        for e in &inst.ledger.edits {
            assert_eq!(e.old, inst.m_prime.get(e.i, e.j));
            assert_eq!(e.new, inst.m_double_prime.get(e.i, e.j));
        }
        assert_eq!(out.record.b_used, 60);
    }

    #[test]
    fn pre_phase_edits_before_noise() {
        let cfg = config(
            r#"{"n": [20], "k": [2], "epsilon": [0.5], "budget": ["n^2"],
                "adversary": {"name": "pre_row_randomizer", "m_vertices": 3}}"#,
        );
        let pts = cfg.points().unwrap();
        let inst = run_trial_detailed(&cfg, &pts[0], 0).instance.unwrap();
        assert_eq!(inst.phase, Phase::Pre);
        for e in &inst.ledger.edits {
            assert_eq!(e.old, inst.m.get(e.i, e.j));
        }
        // Noise at epsilon = 1/2 is the identity.
        assert_eq!(inst.m_prime.max_abs_diff(&inst.m_double_prime), 0.0);
    }

    #[test]
    fn failures_become_status() {
        let cfg = config(
            r#"{"n": [20], "k": [2], "epsilon": [0.2], "budget": [4],
                "adversary": {"name": "post_random_flip", "pair_count": 10}}"#,
        );
        let pts = cfg.points().unwrap();
        let r = run_trial(&cfg, &pts[0], 0);
        assert_eq!(r.status, "error:budget_exceeded");
        assert_eq!(r.misclassified, None);
    }

    #[test]
    fn sdp_trial_reports_variant() {
        let cfg = config(
            r#"{"n": [12], "k": [3], "epsilon": [0.5],
                "algorithm": {"kind": "sdp", "variant": "eps-free"}}"#,
        );
        let pts = cfg.points().unwrap();
        let r = run_trial(&cfg, &pts[0], 1);
        assert_eq!(r.variant.as_deref(), Some("eps-free"));
        assert_eq!(r.status, "ok");
        assert_eq!(r.misclassified, Some(0));
    }
}

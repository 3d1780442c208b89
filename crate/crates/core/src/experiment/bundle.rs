//! Instance bundles: a directory holding the partition, the three matrices,
//! the edit ledger and a metadata file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trial::Instance;
use crate::adversary::Phase;
use crate::error::Result;
use crate::matrix::RealMatrix;
use crate::model::{ClusterPartition, ModelParams};

pub const PARTITION_FILE: &str = "partition.txt";
pub const M_FILE: &str = "M.txt";
pub const M_PRIME_FILE: &str = "M_prime.txt";
pub const M_DOUBLE_PRIME_FILE: &str = "M_double_prime.txt";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub params: ModelParams,
    pub adversary: String,
    pub phase: Phase,
    pub entries_used: usize,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub meta: BundleMeta,
    pub partition: ClusterPartition,
    pub m: RealMatrix,
    pub m_prime: RealMatrix,
    pub m_double_prime: RealMatrix,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(dir.join(name))?))
}

pub fn write_bundle(dir: &Path, inst: &Instance) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    inst.partition.write_text(create(dir, PARTITION_FILE)?)?;
    for (name, m) in [
        (M_FILE, &inst.m),
        (M_PRIME_FILE, &inst.m_prime),
        (M_DOUBLE_PRIME_FILE, &inst.m_double_prime),
    ] {
        let mut w = create(dir, name)?;
        m.write_text(&mut w)?;
        w.flush()?;
    }
    inst.ledger.write_csv(create(dir, LEDGER_FILE)?)?;
    let meta = BundleMeta {
        params: inst.params.clone(),
        adversary: inst.strategy.name().to_string(),
        phase: inst.phase,
        entries_used: inst.ledger.entries_used,
    };
    let mut w = create(dir, META_FILE)?;
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    Ok(Bundle {
        meta: serde_json::from_reader(open(dir, META_FILE)?)?,
        partition: ClusterPartition::read_text(open(dir, PARTITION_FILE)?)?,
        m: RealMatrix::read_text(open(dir, M_FILE)?)?,
        m_prime: RealMatrix::read_text(open(dir, M_PRIME_FILE)?)?,
        m_double_prime: RealMatrix::read_text(open(dir, M_DOUBLE_PRIME_FILE)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::ExperimentConfig;
    use crate::experiment::trial::{generate_instance, trial_seed};

    #[test]
    fn write_then_read() {
        let cfg = ExperimentConfig::from_json(
            r#"{"n": [10], "k": [2], "epsilon": [0.3], "budget": [8],
                "adversary": {"name": "post_random_flip"}}"#,
        )
        .unwrap();
        let pt = &cfg.points().unwrap()[0];
        let inst = generate_instance(pt, cfg.partition.mode(10, 2), trial_seed(0, 0, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), &inst).unwrap();
        let b = read_bundle(dir.path()).unwrap();
        assert_eq!(b.partition, inst.partition);
        assert_eq!(b.m_double_prime, inst.m_double_prime);
        assert_eq!(b.m_prime, inst.m_prime);
        assert_eq!(b.meta.entries_used, 8);
        assert_eq!(b.meta.adversary, "post_random_flip");
        let ledger = std::fs::read_to_string(dir.path().join(LEDGER_FILE)).unwrap();
        assert_eq!(ledger.lines().count(), 1 + 8);
    }
}

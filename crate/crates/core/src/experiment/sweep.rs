use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::trial::{run_trial, TrialRecord};
use crate::error::{Error, Result};

/// All (setting, trial) pairs, evaluated on `workers` threads and returned in
/// (setting_id, trial_index) order.
pub fn run_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let points = cfg.points()?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| run_trial(cfg, &points[p], t))
            .collect()
    }))
}

pub fn write_csv<W: Write>(records: &[TrialRecord], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(super::trial::CSV_COLUMNS)?;
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[TrialRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(records, std::io::BufWriter::new(file))
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    let records = reader
        .deserialize()
        .collect::<std::result::Result<Vec<TrialRecord>, _>>()?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_count_and_order() {
        let cfg = ExperimentConfig::from_json(
            r#"{"n": [8, 12], "k": [2], "epsilon": [0.4, 0.5], "trials": 3, "base_seed": 11}"#,
        )
        .unwrap();
        let rows = run_sweep(&cfg, 2).unwrap();
        assert_eq!(rows.len(), 12);
        let keys: Vec<usize> = rows.iter().map(|r| r.setting_id).collect();
        assert_eq!(keys, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn csv_header_and_round_trip() {
        let cfg =
            ExperimentConfig::from_json(r#"{"n": [8], "k": [2], "epsilon": [0.5], "trials": 2}"#)
                .unwrap();
        let rows = run_sweep(&cfg, 1).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            super::super::trial::CSV_COLUMNS.join(",")
        );
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
        let mut empty = Vec::new();
        write_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
    }
}

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::RealMatrix;

/// One ordered entry change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub i: usize,
    pub j: usize,
    pub old: f64,
    pub new: f64,
}

/// Planted set and eigenvector left behind by the poisoning attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonInfo {
    /// Sorted indices of the planted set `S`.
    pub set: Vec<usize>,
    /// `1/sqrt(|S|)` on `S`, zero elsewhere.
    pub vector: Vec<f64>,
    /// Ordered entries changed inside the `S x S` minor.
    pub minor_edits: usize,
    /// Ordered entries changed to balance the outside columns.
    pub balance_edits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyInfo {
    None,
    /// Items whose incident entries were touched.
    Vertices {
        vertices: Vec<usize>,
    },
    /// Chosen items and, per item, how many incident entries were treated as
    /// preserved.
    Eraser {
        vertices: Vec<usize>,
        preserved: Vec<usize>,
    },
    Poison(PoisonInfo),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditLedger {
    pub edits: Vec<Edit>,
    pub entry_budget: usize,
    pub entries_used: usize,
    pub info: StrategyInfo,
    pub notes: Vec<String>,
}

impl EditLedger {
    pub(crate) fn new(entry_budget: usize) -> Self {
        Self {
            edits: Vec::new(),
            entry_budget,
            entries_used: 0,
            info: StrategyInfo::None,
            notes: Vec::new(),
        }
    }

    /// Records both mirror entries of an off-diagonal pair change.
    pub(crate) fn push_pair(&mut self, i: usize, j: usize, old: f64, new: f64) {
        self.edits.push(Edit { i, j, old, new });
        self.edits.push(Edit {
            i: j,
            j: i,
            old,
            new,
        });
        self.entries_used += 2;
    }

    pub fn poison(&self) -> Option<&PoisonInfo> {
        match &self.info {
            StrategyInfo::Poison(p) => Some(p),
            _ => None,
        }
    }

    /// Writes every edit's new value into a copy of `m`.
    pub fn apply(&self, m: &RealMatrix) -> RealMatrix {
        let mut out = m.clone();
        for e in &self.edits {
            out.set_sym(e.i, e.j, e.new);
        }
        out
    }

    /// Restores every edit's old value.
    pub fn revert(&self, m: &RealMatrix) -> RealMatrix {
        let mut out = m.clone();
        for e in self.edits.iter().rev() {
            out.set_sym(e.i, e.j, e.old);
        }
        out
    }

    /// CSV with columns `i, j, old, new`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "old", "new"])?;
        for e in &self.edits {
            wr.write_record([
                e.i.to_string(),
                e.j.to_string(),
                e.old.to_string(),
                e.new.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

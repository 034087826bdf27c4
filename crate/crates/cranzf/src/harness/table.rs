//! Result tables: one row per (sweep point, scheme), plus an audit table
//! recording every candidate evaluation behind each maximized row.

use serde::{Deserialize, Serialize};
use std::io;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// One reported point: the maximized rate for a scheme at one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// Name of the swept variable (`bits`, `pmax_db`, `pmax_dbm`).
    pub sweep_var: String,
    pub value: f64,
    /// `standard` or `paq`.
    pub scheme: String,
    pub chosen_nt: Option<usize>,
    pub chosen_qbar: Option<usize>,
    pub rate_mean: f64,
    pub rate_se: f64,
    /// Best closed-form lower bound over the candidate set (symmetric setups
    /// only).
    pub bound: Option<f64>,
    /// Best perfect-CSI closed form over the candidate set (symmetric only).
    pub phi: Option<f64>,
}

/// One candidate evaluation (audit trail for the maximization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub sweep_var: String,
    pub value: f64,
    pub scheme: String,
    /// Placement index for random-placement runs; empty for symmetric.
    pub placement: Option<usize>,
    pub nt: Option<usize>,
    pub qbar: Option<usize>,
    pub rate_mean: f64,
    pub rate_se: f64,
    pub bound: Option<f64>,
    pub phi: Option<f64>,
    /// Whether this candidate won the rate maximization at its point.
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), TableError> {
        let mut wtr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self, TableError> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows = rdr.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn write_file(&self, path: &Path) -> Result<(), TableError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_file(path: &Path) -> Result<Self, TableError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Rows of one scheme, in sweep order.
    pub fn series(&self, scheme: &str) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.scheme == scheme).collect()
    }
}

pub fn write_candidates_csv<W: io::Write>(rows: &[CandidateRow], w: W) -> Result<(), TableError> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_candidates_csv<R: io::Read>(r: R) -> Result<Vec<CandidateRow>, TableError> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr
        .deserialize()
        .collect::<Result<Vec<CandidateRow>, _>>()?)
}

//! CSV encoding of run records.
//!
//! Columns are fixed; floats are written with 17 significant digits so a
//! re-parse returns the same bits. Absent values are empty cells.

use std::path::Path;

use avgq_core::{MetricRow, RunRecord};

use crate::error::{HarnessError, Result};

pub const COLUMNS: [&str; 8] = [
    "epoch",
    "iterations",
    "samples_per_agent",
    "comm_rounds_cum",
    "err_inf",
    "gamma_k",
    "eta_last",
    "m_agents",
];

fn float_cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

pub fn write_csv<W: std::io::Write>(out: W, record: &RunRecord) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in &record.rows {
        w.write_record([
            r.epoch.to_string(),
            r.iterations.to_string(),
            r.samples_per_agent.to_string(),
            r.comm_rounds_cum.to_string(),
            float_cell(r.err_inf),
            float_cell(r.gamma_k),
            float_cell(r.eta_last),
            r.m_agents.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<RunRecord> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(COLUMNS) {
        return Err(HarnessError::Config(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |col: &str| HarnessError::Config(format!("row {}: bad `{col}`", line + 1));
        let int = |i: usize| rec[i].parse::<u64>().map_err(|_| bad(COLUMNS[i]));
        let float = |i: usize| -> Result<Option<f64>> {
            match &rec[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(COLUMNS[i])),
            }
        };
        rows.push(MetricRow {
            epoch: int(0)? as usize,
            iterations: int(1)?,
            samples_per_agent: int(2)?,
            comm_rounds_cum: int(3)?,
            err_inf: float(4)?,
            gamma_k: float(5)?,
            eta_last: float(6)?,
            m_agents: int(7)? as usize,
        });
    }
    Ok(RunRecord { rows })
}

pub fn write_csv_file(path: &Path, record: &RunRecord) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), record)
}

pub fn read_csv_file(path: &Path) -> Result<RunRecord> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_csv(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let record = RunRecord {
            rows: vec![
                MetricRow {
                    epoch: 0,
                    iterations: 0,
                    samples_per_agent: 0,
                    comm_rounds_cum: 0,
                    err_inf: Some(0.5),
                    gamma_k: None,
                    eta_last: None,
                    m_agents: 4,
                },
                MetricRow {
                    epoch: 1,
                    iterations: 10_000,
                    samples_per_agent: 60_000,
                    comm_rounds_cum: 17,
                    err_inf: Some(0.1 + 0.2),
                    gamma_k: Some(1.0 / 3.0),
                    eta_last: Some(1e-300),
                    m_agents: 4,
                },
            ],
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &record).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,iterations,samples_per_agent,comm_rounds_cum,err_inf"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), record);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}

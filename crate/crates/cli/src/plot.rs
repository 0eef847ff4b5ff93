//! Long-format series behind the reputation and price panels.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::trace::TraceTable;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotFiles {
    pub reputation: PathBuf,
    pub price: PathBuf,
}

/// Reputation series including the state after the last slot.
pub fn reputation_series(table: &TraceTable) -> Vec<(u64, usize, f64)> {
    let mut rows: Vec<(u64, usize, f64)> = table
        .records
        .iter()
        .flat_map(|r| r.reputations.iter().enumerate().map(move |(s, &v)| (r.t, s + 1, v)))
        .collect();
    if !table.records.is_empty() {
        rows.extend(
            table
                .final_reputations
                .iter()
                .enumerate()
                .map(|(s, &v)| (table.final_slot, s + 1, v)),
        );
    }
    rows
}

pub fn price_series(table: &TraceTable) -> Vec<(u64, usize, f64)> {
    table
        .records
        .iter()
        .flat_map(|r| r.prices.iter().enumerate().map(move |(s, &v)| (r.t, s + 1, v)))
        .collect()
}

fn write_series(path: &Path, rows: &[(u64, usize, f64)]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(["t", "seller_id", "value"]).map_err(wrap)?;
    for &(t, s, v) in rows {
        w.write_record([t.to_string(), s.to_string(), v.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_plot_data(table: &TraceTable, out: &Path) -> Result<PlotFiles> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let files = PlotFiles {
        reputation: out.join("reputation.csv"),
        price: out.join("price.csv"),
    };
    write_series(&files.reputation, &reputation_series(table))?;
    write_series(&files.price, &price_series(table))?;
    Ok(files)
}

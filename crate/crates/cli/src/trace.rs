//! Flat CSV form of a simulation trace.
//!
//! One row per seller per slot, then one row per seller with regime
//! `final` holding the reputations after the last slot (the other numeric
//! fields are left empty there). Sellers are numbered from 1.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use repmarket_core::{Regime, SimulationTrace, SlotRecord};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FINAL_LABEL: &str = "final";
pub const HEADER: [&str; 8] = [
    "t",
    "seller",
    "reputation",
    "price",
    "transactions_slot",
    "profit",
    "regime",
    "arrivals",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: u64,
    seller: usize,
    reputation: f64,
    price: Option<f64>,
    transactions_slot: Option<f64>,
    profit: Option<f64>,
    regime: String,
    arrivals: Option<f64>,
}

/// What a trace file holds.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub records: Vec<SlotRecord>,
    /// Slot index of the final rows.
    pub final_slot: u64,
    /// Empty for a header-only file.
    pub final_reputations: Vec<f64>,
}

impl From<&SimulationTrace> for TraceTable {
    fn from(trace: &SimulationTrace) -> Self {
        TraceTable {
            records: trace.records.clone(),
            final_slot: trace.final_state.slot,
            final_reputations: trace.final_state.reputations.clone(),
        }
    }
}

pub fn write_trace<W: Write>(table: &TraceTable, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for rec in &table.records {
        for s in 0..rec.prices.len() {
            w.serialize(Row {
                t: rec.t,
                seller: s + 1,
                reputation: rec.reputations[s],
                price: Some(rec.prices[s]),
                transactions_slot: Some(rec.transactions[s]),
                profit: Some(rec.profits[s]),
                regime: rec.regime.as_str().to_string(),
                arrivals: Some(rec.arrivals),
            })?;
        }
    }
    for (s, &r) in table.final_reputations.iter().enumerate() {
        w.serialize(Row {
            t: table.final_slot,
            seller: s + 1,
            reputation: r,
            price: None,
            transactions_slot: None,
            profit: None,
            regime: FINAL_LABEL.to_string(),
            arrivals: None,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(table: &TraceTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_trace(table, BufWriter::new(file)).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse failure with the byte offset of the offending record.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceError {
    pub offset: u64,
    pub reason: String,
}

fn fail<T>(offset: u64, reason: impl Into<String>) -> std::result::Result<T, TraceError> {
    Err(TraceError {
        offset,
        reason: reason.into(),
    })
}

fn need(v: Option<f64>, field: &str, offset: u64) -> std::result::Result<f64, TraceError> {
    match v {
        Some(x) => Ok(x),
        None => fail(offset, format!("missing {field}")),
    }
}

pub fn read_trace<R: Read>(input: R) -> std::result::Result<TraceTable, TraceError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(|e| csv_error(&e))?.clone();
    if headers.iter().ne(HEADER) {
        return fail(0, format!("expected header {}", HEADER.join(",")));
    }
    let mut table = TraceTable {
        records: Vec::new(),
        final_slot: 0,
        final_reputations: Vec::new(),
    };
    let mut sellers: Option<usize> = None;
    let mut current: Option<SlotRecord> = None;
    let mut raw = csv::StringRecord::new();
    loop {
        let offset = reader.position().byte();
        match reader.read_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(&e)),
        }
        let row: Row = raw.deserialize(Some(&headers)).map_err(|e| TraceError {
            offset,
            reason: e.to_string(),
        })?;
        if row.seller == 0 {
            return fail(offset, "seller numbers start at 1");
        }
        if row.regime == FINAL_LABEL {
            if let Some(rec) = current.take() {
                close_slot(&mut table, &mut sellers, rec, offset)?;
            }
            if row.seller != table.final_reputations.len() + 1 {
                return fail(offset, format!("expected seller {}", table.final_reputations.len() + 1));
            }
            let expected_t = table.records.last().map_or(row.t, |r| r.t + 1);
            if row.t != expected_t || (row.seller > 1 && row.t != table.final_slot) {
                return fail(
                    offset,
                    format!("final rows must follow the last slot at t = {expected_t}"),
                );
            }
            table.final_slot = row.t;
            table.final_reputations.push(row.reputation);
            continue;
        }
        if !table.final_reputations.is_empty() {
            return fail(offset, "slot row after final rows");
        }
        let regime: Regime = row
            .regime
            .parse()
            .map_err(|e: repmarket_core::MarketError| TraceError {
                offset,
                reason: e.to_string(),
            })?;
        let starts_new = current.as_ref().is_none_or(|rec| rec.t != row.t);
        if starts_new {
            if let Some(rec) = current.take() {
                close_slot(&mut table, &mut sellers, rec, offset)?;
            }
            let expected_t = table.records.last().map(|r| r.t + 1);
            if expected_t.is_some_and(|t| t != row.t) {
                return fail(offset, format!("expected slot {}", expected_t.unwrap_or(0)));
            }
            current = Some(SlotRecord {
                t: row.t,
                reputations: Vec::new(),
                prices: Vec::new(),
                transactions: Vec::new(),
                profits: Vec::new(),
                regime,
                arrivals: need(row.arrivals, "arrivals", offset)?,
            });
        }
        let rec = current.as_mut().expect("slot open");
        if row.seller != rec.prices.len() + 1 {
            return fail(offset, format!("expected seller {}", rec.prices.len() + 1));
        }
        if rec.regime != regime || Some(rec.arrivals) != row.arrivals {
            return fail(offset, "regime and arrivals must agree within a slot");
        }
        rec.reputations.push(row.reputation);
        rec.prices.push(need(row.price, "price", offset)?);
        rec.transactions
            .push(need(row.transactions_slot, "transactions_slot", offset)?);
        rec.profits.push(need(row.profit, "profit", offset)?);
    }
    let end = reader.position().byte();
    if let Some(rec) = current.take() {
        close_slot(&mut table, &mut sellers, rec, end)?;
    }
    if !table.records.is_empty() && table.final_reputations.is_empty() {
        return fail(end, "missing final rows");
    }
    if sellers.is_some_and(|n| n != table.final_reputations.len()) {
        return fail(end, "final rows do not cover every seller");
    }
    Ok(table)
}

fn close_slot(
    table: &mut TraceTable,
    sellers: &mut Option<usize>,
    rec: SlotRecord,
    offset: u64,
) -> std::result::Result<(), TraceError> {
    let n = rec.prices.len();
    match *sellers {
        Some(m) if m != n => return fail(offset, format!("slot {} has {n} sellers, earlier slots {m}", rec.t)),
        _ => *sellers = Some(n),
    }
    table.records.push(rec);
    Ok(())
}

fn csv_error(e: &csv::Error) -> TraceError {
    TraceError {
        offset: e.position().map_or(0, |p| p.byte()),
        reason: e.to_string(),
    }
}

pub fn read_trace_file(path: &Path) -> Result<TraceTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_trace(BufReader::new(file)).map_err(|e| CliError::Trace {
        path: path.to_path_buf(),
        offset: e.offset,
        reason: e.reason,
    })
}

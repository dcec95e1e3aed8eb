use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Start,
    /// Step accepted by the line search or trust-region test.
    Accepted,
    /// Trust-region step rejected; the iterate is unchanged.
    Rejected,
    /// Line search stopped at the feasibility cap.
    Capped,
    /// Line search failed; the quasi-Newton memory was cleared.
    Restart,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::Start => "start",
            StepKind::Accepted => "accepted",
            StepKind::Rejected => "rejected",
            StepKind::Capped => "capped",
            StepKind::Restart => "restart",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub f: f64,
    pub pg_norm: f64,
    pub cg_cum: usize,
    pub time_s: f64,
    pub step_kind: StepKind,
}

#[derive(Debug, Clone, Default)]
pub struct SolverTrace {
    records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: [&str; 6] = ["iter", "f", "pg_norm", "cg_cum", "time_s", "step_kind"];

impl SolverTrace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }
    pub fn first(&self) -> Option<&TraceRecord> {
        self.records.first()
    }
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Write the trace as CSV. With a label, a leading `label` column is added.
    pub fn write_csv(&self, w: impl Write, label: Option<&str>) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Format(e.to_string());
        if label.is_some() {
            wr.write_field("label").map_err(io)?;
        }
        wr.write_record(TRACE_HEADER).map_err(io)?;
        self.write_rows(&mut wr, label)?;
        wr.flush()?;
        Ok(())
    }

    /// Append rows (no header) to an existing CSV writer.
    pub fn write_rows<W: Write>(&self, wr: &mut csv::Writer<W>, label: Option<&str>) -> Result<()> {
        let io = |e: csv::Error| Error::Format(e.to_string());
        for r in &self.records {
            if let Some(l) = label {
                wr.write_field(l).map_err(io)?;
            }
            wr.write_record([
                r.iter.to_string(),
                format!("{:e}", r.f),
                format!("{:e}", r.pg_norm),
                r.cg_cum.to_string(),
                format!("{:.6}", r.time_s),
                r.step_kind.as_str().to_string(),
            ])
            .map_err(io)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Stalled,
    MaxIter,
    TimeLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, SolveStatus::Converged)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub cg_total: usize,
    pub trace: SolverTrace,
}

impl SolveResult {
    /// Final projected-gradient norm relative to the initial one.
    pub fn pg_ratio(&self) -> f64 {
        match (self.trace.first(), self.trace.last()) {
            (Some(a), Some(b)) if a.pg_norm > 0.0 => b.pg_norm / a.pg_norm,
            _ => 0.0,
        }
    }
}

/// Shared bookkeeping for the solver loops.
pub(crate) struct Recorder {
    start: Instant,
    pub trace: SolverTrace,
    pub cg_cum: usize,
    max_time: Option<f64>,
}

impl Recorder {
    pub fn new(max_time: Option<f64>) -> Self {
        Self {
            start: Instant::now(),
            trace: SolverTrace::default(),
            cg_cum: 0,
            max_time,
        }
    }

    pub fn record(&mut self, iter: usize, f: f64, pg_norm: f64, step_kind: StepKind) {
        let time_s = self.start.elapsed().as_secs_f64();
        self.trace.push(TraceRecord {
            iter,
            f,
            pg_norm,
            cg_cum: self.cg_cum,
            time_s,
            step_kind,
        });
    }

    pub fn out_of_time(&self) -> bool {
        self.max_time
            .is_some_and(|t| self.start.elapsed().as_secs_f64() >= t)
    }

    pub fn finish(self, x: Vec<f64>, f: f64, status: SolveStatus, iterations: usize) -> SolveResult {
        SolveResult {
            x,
            f,
            status,
            iterations,
            cg_total: self.cg_cum,
            trace: self.trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_label_column() {
        let mut t = SolverTrace::default();
        t.push(TraceRecord {
            iter: 0,
            f: 1.5,
            pg_norm: 2.0,
            cg_cum: 0,
            time_s: 0.0,
            step_kind: StepKind::Start,
        });
        let mut buf = Vec::new();
        t.write_csv(&mut buf, None).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next(), Some("iter,f,pg_norm,cg_cum,time_s,step_kind"));
        let mut buf = Vec::new();
        t.write_csv(&mut buf, Some("tron")).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.lines().nth(1).unwrap().starts_with("tron,0,"));
    }
}

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::spectra::SpectrumMetrics;

/// CSV column order.
pub const CSV_HEADER: [&str; 13] = [
    "experiment",
    "seed",
    "step",
    "eta",
    "loss",
    "delta",
    "min_prob",
    "max_prob",
    "rho",
    "h_norm",
    "erank",
    "top10e",
    "q_ratio",
];

/// One measurement. Absent values become empty CSV cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub step: usize,
    pub eta: Option<f64>,
    pub loss: Option<f64>,
    pub delta: Option<f64>,
    pub min_prob: Option<f64>,
    pub max_prob: Option<f64>,
    pub rho: Option<f64>,
    pub h_norm: Option<f64>,
    pub erank: Option<f64>,
    pub top10e: Option<f64>,
    pub q_ratio: Option<f64>,
}

impl ResultRow {
    pub fn set_metrics(&mut self, m: &SpectrumMetrics) {
        self.h_norm = Some(m.h_norm);
        self.erank = Some(m.erank);
        self.top10e = m.top_e.get(&10).copied();
        self.q_ratio = m.q_ratio;
    }

    fn cells(&self) -> [String; 13] {
        let num = |x: Option<f64>| x.map(|v| format!("{v:.16e}")).unwrap_or_default();
        [
            self.experiment.clone(),
            self.seed.to_string(),
            self.step.to_string(),
            num(self.eta),
            num(self.loss),
            num(self.delta),
            num(self.min_prob),
            num(self.max_prob),
            num(self.rho),
            num(self.h_norm),
            num(self.erank),
            num(self.top10e),
            num(self.q_ratio),
        ]
    }
}

/// Output order: experiment, seed, step, then η.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.experiment
            .cmp(&b.experiment)
            .then(a.seed.cmp(&b.seed))
            .then(a.step.cmp(&b.step))
            .then(cmp_opt(a.eta, b.eta))
    });
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.cells())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[ResultRow], out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, rows)
}

/// Orders two optional floats with `None` first.
fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (x, y) => x.is_some().cmp(&y.is_some()),
    }
}

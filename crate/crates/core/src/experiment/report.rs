use std::path::{Path, PathBuf};

use super::output::flush;
use super::run::{RunResult, RESULT_FILE};
use crate::error::{Error, Result};

pub fn read_result(run_dir: &Path) -> Result<RunResult> {
    let p = run_dir.join(RESULT_FILE);
    let f = std::fs::File::open(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

/// Mean and extremes of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        Some(Spread {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// `mean ± half-range`.
    pub fn cell(&self, precision: usize) -> String {
        format!(
            "{:.p$} ± {:.p$}",
            self.mean,
            (self.max - self.min) / 2.0,
            p = precision
        )
    }
}

/// Aggregated runs of one strategy and position.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub strategy: String,
    pub position: String,
    pub n_runs: usize,
    pub token_acc: Spread,
    pub seq_acc: Spread,
    pub bleu: Spread,
    pub tokens_per_sec: Option<Spread>,
    pub ratio_vs_baseline: Option<f64>,
}

/// Groups runs by strategy and position in first-seen order. Speed ratios
/// are filled only when a baseline run is given.
pub fn aggregate(runs: &[RunResult], baseline: Option<&RunResult>) -> Vec<ReportRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in runs {
        let k = (r.strategy.clone(), r.position.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let base_tps = baseline.and_then(|b| b.tokens_per_sec);
    keys.into_iter()
        .map(|(strategy, position)| {
            let group: Vec<&RunResult> = runs
                .iter()
                .filter(|r| r.strategy == strategy && r.position == position)
                .collect();
            let col = |f: fn(&RunResult) -> f64| {
                Spread::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
                    .expect("group is non-empty")
            };
            let tps: Vec<f64> = group.iter().filter_map(|r| r.tokens_per_sec).collect();
            let tokens_per_sec = Spread::of(&tps);
            ReportRow {
                n_runs: group.len(),
                token_acc: col(|r| r.test.token_accuracy),
                seq_acc: col(|r| r.test.sequence_accuracy),
                bleu: col(|r| r.test.bleu),
                ratio_vs_baseline: base_tps.zip(tokens_per_sec).map(|(b, s)| s.mean / b),
                tokens_per_sec,
                strategy,
                position,
            }
        })
        .collect()
}

/// `report`: aggregates run directories into one comparison CSV.
pub fn report_run(runs: &[PathBuf], baseline: Option<&Path>, out: &Path) -> Result<Vec<ReportRow>> {
    if runs.is_empty() {
        return Err(Error::Config(
            "report needs at least one run directory".into(),
        ));
    }
    let results = runs
        .iter()
        .map(|d| read_result(d))
        .collect::<Result<Vec<_>>>()?;
    let base = baseline.map(read_result).transpose()?;
    let rows = aggregate(&results, base.as_ref());
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let f = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
    w.write_record([
        "strategy",
        "position",
        "n_runs",
        "token_acc",
        "seq_acc",
        "bleu",
        "tokens_per_sec",
        "ratio_vs_baseline",
    ])?;
    for r in &rows {
        w.write_record([
            r.strategy.clone(),
            r.position.clone(),
            r.n_runs.to_string(),
            r.token_acc.cell(4),
            r.seq_acc.cell(4),
            r.bleu.cell(4),
            r.tokens_per_sec.map(|s| s.cell(0)).unwrap_or_default(),
            r.ratio_vs_baseline
                .map(|x| format!("{x:.2}"))
                .unwrap_or_default(),
        ])?;
    }
    flush(
        w.into_inner().map_err(|e| Error::io(out, e.into_error()))?,
        out,
    )?;
    Ok(rows)
}

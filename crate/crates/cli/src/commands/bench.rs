use std::io;
use std::path::Path;

use idtrace_bench::runner::BenchMeta;
use idtrace_bench::{run_bench, BenchConfig, EfficiencyReport};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{emit, fmt_bits, text_table, Format, Render};

#[derive(Debug, Serialize)]
pub struct BenchSummary {
    pub out: String,
    pub meta: BenchMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q4: Option<EfficiencyReportSummary>,
}

#[derive(Debug, Serialize)]
pub struct EfficiencyReportSummary {
    pub rates: Vec<RateLine>,
    pub aggregate_reduction: f64,
    pub pooled_reduction: f64,
}

#[derive(Debug, Serialize)]
pub struct RateLine {
    pub missing_rate: f64,
    pub titf_mean_acquisitions: f64,
    pub random_mean_acquisitions: f64,
    pub reduction: f64,
}

impl EfficiencyReportSummary {
    fn new(report: &EfficiencyReport) -> Self {
        EfficiencyReportSummary {
            rates: report
                .summary
                .iter()
                .map(|s| RateLine {
                    missing_rate: s.rate,
                    titf_mean_acquisitions: s.titf_mean_acquisitions,
                    random_mean_acquisitions: s.random_mean_acquisitions,
                    reduction: s.reduction,
                })
                .collect(),
            aggregate_reduction: report.aggregate_reduction(),
            pooled_reduction: report.pooled_reduction(),
        }
    }
}

impl Render for BenchSummary {
    fn csv(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = ["file"].map(String::from).to_vec();
        (
            header,
            self.meta.files.iter().map(|f| vec![f.clone()]).collect(),
        )
    }

    fn text(&self) -> String {
        let mut out = format!(
            "wrote {} files to {} in {:.1}s (seed {})\n",
            self.meta.files.len(),
            self.out,
            self.meta.elapsed_seconds,
            self.meta.seed
        );
        if let Some(q4) = &self.q4 {
            let rows: Vec<Vec<String>> = q4
                .rates
                .iter()
                .map(|r| {
                    vec![
                        format!("{:.2}", r.missing_rate),
                        fmt_bits(r.titf_mean_acquisitions),
                        fmt_bits(r.random_mean_acquisitions),
                        format!("{:.1}%", 100.0 * r.reduction),
                    ]
                })
                .collect();
            out.push('\n');
            out.push_str(&text_table(
                &["missing", "titf", "random", "reduction"],
                &rows,
            ));
            out.push_str(&format!(
                "aggregate reduction {:.1}%\n",
                100.0 * q4.aggregate_reduction
            ));
        }
        out
    }
}

pub fn run(
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    format: Format,
) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::from_json("{}")?,
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    eprintln!("seed: {}", cfg.seed);
    let outcome = run_bench(&cfg)?;
    outcome.write(out)?;
    let summary = BenchSummary {
        out: out.display().to_string(),
        q4: outcome.q4.as_ref().map(EfficiencyReportSummary::new),
        meta: outcome.meta,
    };
    emit(format, &summary, &mut io::stdout().lock())
}

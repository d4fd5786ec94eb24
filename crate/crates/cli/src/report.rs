//! Result emission: summary/CDF/per-run CSVs plus a JSON mirror, every file
//! carrying a provenance header and written atomically (temp then rename).

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use orbitstream::engine::{AlgorithmOutcome, RunResult};
use serde::Serialize;

/// Identifies what produced a bundle; embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub base_seed: u64,
    pub runs_per_algorithm: usize,
    pub algorithms: Vec<String>,
    pub version: String,
    /// Unix seconds; the one header field reruns are allowed to differ in.
    pub timestamp: u64,
}

impl Provenance {
    pub fn new(
        config_hash: String,
        base_seed: u64,
        runs_per_algorithm: usize,
        algorithms: Vec<String>,
    ) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            config_hash,
            base_seed,
            runs_per_algorithm,
            algorithms,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        }
    }

    fn header(&self) -> String {
        format!(
            "# config_hash={}\n# base_seed={}\n# runs_per_algorithm={}\n# algorithms={}\n# version={}\n# timestamp={}\n",
            self.config_hash,
            self.base_seed,
            self.runs_per_algorithm,
            self.algorithms.join(";"),
            self.version,
            self.timestamp,
        )
    }
}

/// One summary table row; the column set covers both the performance and the
/// buffer-stability tables.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub runs: usize,
    pub failures: usize,
    pub qoe_mean: f64,
    pub qoe_std: f64,
    pub eqv_bitrate_mbps: f64,
    pub buffer_mean_s: f64,
    pub buffer_std_s: f64,
    pub buffer_min_s: f64,
    pub switches: f64,
    pub stalls: f64,
    pub stall_s: f64,
    pub hit_ratio_pct: f64,
    pub decision_ms: f64,
    pub incidents: usize,
}

#[derive(Debug)]
pub struct ReportBundle {
    pub provenance: Provenance,
    pub outcomes: Vec<AlgorithmOutcome<f64>>,
}

pub const SUMMARY_COLUMNS: &str = "algorithm,qoe_mean,qoe_std,eqv_bitrate_mbps,buffer_mean_s,buffer_std_s,buffer_min_s,switches,stalls,decision_ms";

impl ReportBundle {
    /// Rows for algorithms with at least one successful run, sorted by mean
    /// QoE descending.
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = self
            .outcomes
            .iter()
            .filter_map(|o| {
                let s = o.summary.as_ref()?;
                Some(SummaryRow {
                    algorithm: o.algorithm.name().to_string(),
                    runs: s.runs,
                    failures: o.failures.len(),
                    qoe_mean: s.qoe_mean,
                    qoe_std: s.qoe_std,
                    eqv_bitrate_mbps: s.eqv_bitrate_mbps,
                    buffer_mean_s: s.buffer_mean_s,
                    buffer_std_s: s.buffer_std_s,
                    buffer_min_s: s.buffer_min_s,
                    switches: s.switches,
                    stalls: s.stalls,
                    stall_s: s.stall_s,
                    hit_ratio_pct: s.hit_ratio_pct,
                    decision_ms: s.decision_ms,
                    incidents: o.results.iter().map(|r| r.incidents.len()).sum(),
                })
            })
            .collect();
        rows.sort_by(|a, b| {
            b.qoe_mean
                .partial_cmp(&a.qoe_mean)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.algorithm.cmp(&b.algorithm))
        });
        rows
    }

    pub fn total_failures(&self) -> usize {
        self.outcomes.iter().map(|o| o.failures.len()).sum()
    }

    pub fn summary_csv(&self) -> String {
        let mut out = self.provenance.header();
        out.push_str(SUMMARY_COLUMNS);
        out.push('\n');
        for r in self.summary_rows() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.algorithm,
                r.qoe_mean,
                r.qoe_std,
                r.eqv_bitrate_mbps,
                r.buffer_mean_s,
                r.buffer_std_s,
                r.buffer_min_s,
                r.switches,
                r.stalls,
                r.decision_ms,
            );
        }
        out
    }

    pub fn cdf_csv(&self) -> String {
        let mut out = self.provenance.header();
        out.push_str("algorithm,qoe,cum_prob\n");
        for o in &self.outcomes {
            if let Some(s) = &o.summary {
                for &(q, p) in &s.cdf {
                    let _ = writeln!(out, "{},{},{}", o.algorithm.name(), q, p);
                }
            }
        }
        out
    }

    pub fn runs_csv(&self) -> String {
        let mut out = self.provenance.header();
        out.push_str(
            "algorithm,run_index,seed,scale,initial_buffer_s,chunk,t_start_s,tier,\
             rate_mbps,c_hat_mbps,buffer_before_s,buffer_after_s,idle_s,download_s,\
             stall_s,iou,qoe_utility,qoe_stall,qoe_smoothness,qoe_viewport,qoe_total,\
             tile_tiers,predicted_tiles,truth_tiles\n",
        );
        for o in &self.outcomes {
            for run in &o.results {
                append_run_rows(&mut out, run);
            }
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Failure<'a> {
            run_index: usize,
            error: &'a str,
        }
        #[derive(Serialize)]
        struct AlgorithmReport<'a> {
            #[serde(flatten)]
            row: &'a SummaryRow,
            cdf: Vec<(f64, f64)>,
            failed: Vec<Failure<'a>>,
        }
        #[derive(Serialize)]
        struct Document<'a> {
            provenance: &'a Provenance,
            algorithms: Vec<AlgorithmReport<'a>>,
        }
        let rows = self.summary_rows();
        let algorithms = rows
            .iter()
            .map(|row| {
                let o = self
                    .outcomes
                    .iter()
                    .find(|o| o.algorithm.name() == row.algorithm)
                    .expect("row came from outcomes");
                AlgorithmReport {
                    row,
                    cdf: o.summary.as_ref().map(|s| s.cdf.clone()).unwrap_or_default(),
                    failed: o
                        .failures
                        .iter()
                        .map(|(i, e)| Failure { run_index: *i, error: e })
                        .collect(),
                }
            })
            .collect();
        let doc = Document { provenance: &self.provenance, algorithms };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Writes summary.csv, cdf.csv, runs.csv, and summary.json into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
        write_atomic(&dir.join("summary.csv"), &self.summary_csv())?;
        write_atomic(&dir.join("cdf.csv"), &self.cdf_csv())?;
        write_atomic(&dir.join("runs.csv"), &self.runs_csv())?;
        write_atomic(&dir.join("summary.json"), &self.summary_json()?)?;
        Ok(())
    }
}

fn append_run_rows(out: &mut String, run: &RunResult<f64>) {
    let join = |it: &mut dyn Iterator<Item = usize>| {
        it.map(|v| v.to_string()).collect::<Vec<_>>().join(";")
    };
    for rec in &run.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            run.algorithm.name(),
            run.run_index,
            run.seed,
            run.scale,
            run.initial_buffer_s,
            rec.index,
            rec.t_start_s,
            rec.tier,
            rec.rate_mbps,
            rec.c_hat_mbps,
            rec.buffer_before_s,
            rec.buffer_after_s,
            rec.idle_s,
            rec.download_s,
            rec.stall_s,
            rec.iou,
            rec.qoe.utility,
            rec.qoe.stall_penalty,
            rec.qoe.smoothness_penalty,
            rec.qoe.viewport_penalty,
            rec.qoe.total,
            join(&mut rec.tile_tiers.iter().copied()),
            join(&mut rec.predicted_tiles.iter().copied()),
            join(&mut rec.truth_tiles.iter().copied()),
        );
    }
}

/// Paired ablation outcome for one label.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub baseline_hit_pct: f64,
    pub variant_hit_pct: f64,
    pub hit_delta_pct: f64,
    pub baseline_qoe: f64,
    pub variant_qoe: f64,
    pub qoe_delta: f64,
    pub baseline_viewport_penalty: f64,
    pub variant_viewport_penalty: f64,
    pub baseline_incidents: usize,
    pub variant_incidents: usize,
}

/// Mean per-run summed viewport penalty across an outcome's runs.
pub fn mean_viewport_penalty(outcome: &AlgorithmOutcome<f64>) -> f64 {
    let n = outcome.results.len();
    if n == 0 {
        return 0.0;
    }
    outcome.results.iter().map(|r| r.stats.qoe.viewport_penalty).sum::<f64>() / n as f64
}

pub fn incident_count(outcome: &AlgorithmOutcome<f64>) -> usize {
    outcome.results.iter().map(|r| r.incidents.len()).sum()
}

pub fn ablation_row(
    label: &str,
    baseline: &AlgorithmOutcome<f64>,
    variant: &AlgorithmOutcome<f64>,
) -> AblationRow {
    let hit = |o: &AlgorithmOutcome<f64>| {
        o.summary.as_ref().map(|s| s.hit_ratio_pct).unwrap_or(f64::NAN)
    };
    let qoe = |o: &AlgorithmOutcome<f64>| {
        o.summary.as_ref().map(|s| s.qoe_mean).unwrap_or(f64::NAN)
    };
    AblationRow {
        label: label.to_string(),
        baseline_hit_pct: hit(baseline),
        variant_hit_pct: hit(variant),
        hit_delta_pct: hit(variant) - hit(baseline),
        baseline_qoe: qoe(baseline),
        variant_qoe: qoe(variant),
        qoe_delta: qoe(variant) - qoe(baseline),
        baseline_viewport_penalty: mean_viewport_penalty(baseline),
        variant_viewport_penalty: mean_viewport_penalty(variant),
        baseline_incidents: incident_count(baseline),
        variant_incidents: incident_count(variant),
    }
}

pub fn ablation_csv(provenance: &Provenance, rows: &[AblationRow]) -> String {
    let mut out = provenance.header();
    out.push_str(
        "label,baseline_hit_pct,variant_hit_pct,hit_delta_pct,baseline_qoe,variant_qoe,\
         qoe_delta,baseline_viewport_penalty,variant_viewport_penalty,\
         baseline_incidents,variant_incidents\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.label,
            r.baseline_hit_pct,
            r.variant_hit_pct,
            r.hit_delta_pct,
            r.baseline_qoe,
            r.variant_qoe,
            r.qoe_delta,
            r.baseline_viewport_penalty,
            r.variant_viewport_penalty,
            r.baseline_incidents,
            r.variant_incidents,
        );
    }
    out
}

/// Writes via a temp file in the same directory so readers never observe a
/// truncated file.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

//! Subcommand implementations. Each returns the process exit code: 0 for
//! full success, 1 when some runs failed; argument and IO errors bubble up
//! as `Err` and the binary maps them to exit code 2.

use std::path::Path;

use anyhow::{bail, Context, Result};
use orbitstream::engine::run_monte_carlo;
use orbitstream::suite::{ablation_pairs, bundled_traces, AblationVariant, DEFAULT_BASE_SEED};

use crate::config::ExperimentConfig;
use crate::report::{
    ablation_csv, ablation_row, write_atomic, AblationRow, Provenance, ReportBundle,
};

/// Worker-count override shared by the run-executing subcommands. `None`
/// leaves the pool at the machine's parallelism.
pub fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    builder.build().context("building worker pool")
}

pub struct SimulateArgs<'a> {
    pub config: &'a Path,
    pub out: &'a Path,
    pub algos: Option<Vec<String>>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

pub fn simulate(args: SimulateArgs<'_>) -> Result<i32> {
    let cfg = ExperimentConfig::load(args.config)?.with_overrides(
        args.algos.as_deref(),
        args.runs,
        args.seed,
    );
    let exp = cfg.build()?;
    let pool = thread_pool(args.workers)?;
    let outcomes = pool
        .install(|| run_monte_carlo(&exp))
        .map_err(|e| anyhow::anyhow!("running experiment: {e}"))?;
    let provenance = Provenance::new(
        cfg.sha256_hex(),
        exp.base_seed,
        exp.runs_per_algorithm,
        exp.algorithms.iter().map(|a| a.name().to_string()).collect(),
    );
    let bundle = ReportBundle { provenance, outcomes };
    bundle.write(args.out)?;
    let failures = bundle.total_failures();
    for row in bundle.summary_rows() {
        println!(
            "{:<14} qoe {:>8.3}  buffer {:>6.2} s  stalls {:>6.2}  hit {:>6.1}%  {:>6.3} ms",
            row.algorithm,
            row.qoe_mean,
            row.buffer_mean_s,
            row.stalls,
            row.hit_ratio_pct,
            row.decision_ms,
        );
    }
    if failures > 0 {
        eprintln!("{failures} run(s) failed; see summary.json");
        return Ok(1);
    }
    Ok(0)
}

pub struct AblateArgs<'a> {
    pub config: &'a Path,
    pub variant: &'a str,
    pub out: &'a Path,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// Runs the matched baseline/variant pair(s) for one ablation. The config
/// contributes the seed and video shape (duration, segment); predictor
/// parameters stay owned by the ablation arms so the comparison is what the
/// variant defines.
pub fn ablate(args: AblateArgs<'_>) -> Result<i32> {
    let variant: AblationVariant = args
        .variant
        .parse()
        .map_err(|e: String| anyhow::anyhow!("{e}; valid: flat-mass, beta-sweep, delta-zero, dropout"))?;
    let cfg = ExperimentConfig::load(args.config)?.with_overrides(None, args.runs, args.seed);
    let seed = cfg.seed();
    let mut pairs = ablation_pairs(variant, seed)
        .map_err(|e| anyhow::anyhow!("building ablation arms: {e}"))?;
    for pair in &mut pairs {
        for exp in [&mut pair.baseline, &mut pair.variant] {
            if let Some(r) = cfg.runs_per_algorithm {
                exp.runs_per_algorithm = r;
            }
            if let Some(d) = cfg.video.duration_s {
                exp.video.duration_s = d;
            }
            if let Some(s) = cfg.video.segment_s {
                exp.video.segment_s = s;
            }
            exp.validate().map_err(|e| anyhow::anyhow!("invalid ablation arm: {e}"))?;
        }
    }
    let pool = thread_pool(args.workers)?;
    let mut rows: Vec<AblationRow> = Vec::with_capacity(pairs.len());
    let mut failures = 0usize;
    let runs_per = pairs.first().map(|p| p.baseline.runs_per_algorithm).unwrap_or(0);
    let provenance = Provenance::new(
        cfg.sha256_hex(),
        seed,
        runs_per,
        vec![format!("orbitstream/{}", variant.name())],
    );
    for pair in &pairs {
        let base = pool
            .install(|| run_monte_carlo(&pair.baseline))
            .map_err(|e| anyhow::anyhow!("baseline {}: {e}", pair.label))?;
        let var = pool
            .install(|| run_monte_carlo(&pair.variant))
            .map_err(|e| anyhow::anyhow!("variant {}: {e}", pair.label))?;
        failures += base.iter().chain(&var).map(|o| o.failures.len()).sum::<usize>();
        rows.push(ablation_row(&pair.label, &base[0], &var[0]));
        for (arm, outcomes) in [("baseline", base), ("variant", var)] {
            let bundle = ReportBundle { provenance: provenance.clone(), outcomes };
            bundle.write(&args.out.join(&pair.label).join(arm))?;
        }
    }
    std::fs::create_dir_all(args.out)?;
    write_atomic(&args.out.join("ablation.csv"), &ablation_csv(&provenance, &rows))?;
    write_atomic(
        &args.out.join("ablation.json"),
        &serde_json::to_string_pretty(&rows)?,
    )?;
    for r in &rows {
        println!(
            "{:<12} hit {:>6.2}% -> {:>6.2}%  qoe {:>7.3} -> {:>7.3}  incidents {} -> {}",
            r.label,
            r.baseline_hit_pct,
            r.variant_hit_pct,
            r.baseline_qoe,
            r.variant_qoe,
            r.baseline_incidents,
            r.variant_incidents,
        );
    }
    Ok(if failures > 0 { 1 } else { 0 })
}

/// Writes the bundled trace suite as CSV files plus a manifest.
pub fn gen_traces(out: &Path, seed: Option<u64>) -> Result<()> {
    let seed = seed.unwrap_or(DEFAULT_BASE_SEED);
    let traces =
        bundled_traces(seed).map_err(|e| anyhow::anyhow!("generating traces: {e}"))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    #[derive(serde::Serialize)]
    struct Entry {
        name: String,
        kind: String,
        span_s: f64,
        mean_mbps: f64,
        std_mbps: f64,
    }
    let mut manifest = Vec::with_capacity(traces.len());
    for t in &traces {
        let body = format!("# kind={:?}\n# seed={seed}\n{}", t.kind, t.trace.to_csv());
        write_atomic(&out.join(format!("{}.csv", t.name)), &body)?;
        let (mean, std) = t.trace.stats();
        manifest.push(Entry {
            name: t.name.clone(),
            kind: format!("{:?}", t.kind).to_lowercase(),
            span_s: t.trace.span(),
            mean_mbps: mean,
            std_mbps: std,
        });
    }
    write_atomic(
        &out.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    println!("wrote {} traces to {}", traces.len(), out.display());
    Ok(())
}

/// Parses and validates a config without running anything.
pub fn validate(config: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let exp = cfg.build()?;
    let chunks = exp.video.chunk_count();
    println!(
        "ok: {} algorithm(s) x {} run(s), {} trace(s), {} scenario(s), {} chunk(s)/run, seed {}",
        exp.algorithms.len(),
        exp.runs_per_algorithm,
        exp.traces.len(),
        exp.scenarios.len(),
        chunks,
        exp.base_seed,
    );
    if exp.runs_per_algorithm == 0 {
        bail!("runs_per_algorithm is zero");
    }
    Ok(())
}

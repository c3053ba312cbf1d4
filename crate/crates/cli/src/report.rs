//! Subcommand bodies and their output files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pass_core::data::write_dataset_csv;
use pass_core::selectors::write_records;
use pass_core::stats::{friedman, nemenyi_pairwise, rank_rows, read_score_table, Alpha};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiment::{
    ablate_seed, mean_std, prepare_data, run_seed, AblationRow, Arm, ArmSummary, MeanStd, SeedRun,
    ABLATION_HEADER,
};
use crate::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::validation(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn say(stdout: &mut (dyn Write + Send), line: String) -> Result<(), CliError> {
    writeln!(stdout, "{line}").map_err(|e| CliError::validation(format!("stdout: {e}")))
}

/// Runs `f` for every seed on the current pool; results stay in seed order.
fn per_seed<T: Send>(
    seeds: &[u64],
    f: impl Fn(u64) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    seeds.par_iter().map(|&s| f(s)).collect::<Vec<_>>().into_iter().collect()
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn cmd_generate(cfg: &ExperimentConfig, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let prepared = per_seed(&cfg.seeds, |seed| prepare_data(cfg, seed))?;
    for (seed, data) in cfg.seeds.iter().zip(&prepared) {
        let path = cfg.output_dir.join(format!("dataset-seed-{seed}.csv"));
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        write_dataset_csv(&data.dataset, &path)?;
        say(
            stdout,
            format!(
                "seed={seed} realized_noise_rate={:.4} path={}",
                data.realized_noise_rate(),
                path.display()
            ),
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SeedSummary<'a> {
    seed: u64,
    realized_noise_rate: f64,
    arms: Vec<&'a ArmSummary>,
}

#[derive(Debug, Serialize)]
struct ArmAggregate {
    f1: MeanStd,
    precision: MeanStd,
    recall: MeanStd,
    clean_ratio: MeanStd,
    test_acc: MeanStd,
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    seeds: Vec<SeedSummary<'a>>,
    aggregate: BTreeMap<&'static str, ArmAggregate>,
}

#[derive(Debug, Serialize)]
struct Timing {
    threads: usize,
    total_seconds: f64,
    per_seed_seconds: BTreeMap<u64, f64>,
}

fn aggregate(runs: &[SeedRun], arm: Arm) -> ArmAggregate {
    let rows: Vec<&ArmSummary> = runs
        .iter()
        .flat_map(|r| r.arms.iter().map(|a| &a.summary))
        .filter(|s| s.arm == arm)
        .collect();
    let col = |f: fn(&ArmSummary) -> f64| mean_std(&rows.iter().map(|s| f(s)).collect::<Vec<_>>());
    ArmAggregate {
        f1: col(|s| s.selection.f1),
        precision: col(|s| s.selection.precision),
        recall: col(|s| s.selection.recall),
        clean_ratio: col(|s| s.selection.clean_ratio),
        test_acc: col(|s| s.test_acc),
    }
}

fn write_seed_outputs(out: &Path, run: &SeedRun) -> Result<(), CliError> {
    for arm in &run.arms {
        let dir = seed_dir(out, run.seed).join(arm.summary.arm.name());
        write_with(&dir.join("records.csv"), |w| write_records(&arm.records, w))?;
        write_with(&dir.join("accuracy.csv"), |w| {
            writeln!(w, "epoch,test_acc")?;
            for (e, acc) in arm.epoch_accuracy.iter().enumerate() {
                writeln!(w, "{},{acc}", e + 1)?;
            }
            Ok(())
        })?;
        write_json(&dir.join("summary.json"), &arm.summary)?;
    }
    Ok(())
}

pub fn cmd_run(cfg: &ExperimentConfig, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let start = std::time::Instant::now();
    let runs = per_seed(&cfg.seeds, |seed| run_seed(cfg, seed))?;
    let out = &cfg.output_dir;
    for run in &runs {
        write_seed_outputs(out, run)?;
        for arm in &run.arms {
            let s = &arm.summary;
            say(
                stdout,
                format!(
                    "seed={} arm={} f1={:.4} precision={:.4} clean_ratio={:.4} test_acc={:.4}",
                    s.seed, s.arm, s.selection.f1, s.selection.precision, s.selection.clean_ratio, s.test_acc
                ),
            )?;
        }
    }
    let summary = RunSummary {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        seeds: runs
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                realized_noise_rate: r.realized_noise_rate,
                arms: r.arms.iter().map(|a| &a.summary).collect(),
            })
            .collect(),
        aggregate: Arm::ALL.iter().map(|&a| (a.name(), aggregate(&runs, a))).collect(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_json(
        &out.join("timing.json"),
        &Timing {
            threads: rayon::current_num_threads(),
            total_seconds: start.elapsed().as_secs_f64(),
            per_seed_seconds: runs.iter().map(|r| (r.seed, r.seconds)).collect(),
        },
    )?;
    say(stdout, format!("wrote {}", out.join("summary.json").display()))
}

pub fn write_ablation<W: Write>(rows: &[AblationRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{ABLATION_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.seed, r.method, r.f1, r.precision, r.clean_ratio, r.test_acc
        )?;
    }
    Ok(())
}

pub fn cmd_ablate(cfg: &ExperimentConfig, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let rows: Vec<AblationRow> = per_seed(&cfg.seeds, |seed| ablate_seed(cfg, seed))?
        .into_iter()
        .flatten()
        .collect();
    let path = cfg.output_dir.join("ablation.csv");
    write_with(&path, |w| write_ablation(&rows, w))?;
    for r in &rows {
        say(
            stdout,
            format!(
                "seed={} method={} f1={:.4} precision={:.4} clean_ratio={:.4} test_acc={:.4}",
                r.seed, r.method, r.f1, r.precision, r.clean_ratio, r.test_acc
            ),
        )?;
    }
    say(stdout, format!("wrote {}", path.display()))
}

#[derive(Debug, Serialize)]
struct StatsReport {
    methods: Vec<String>,
    datasets: usize,
    statistic: f64,
    degrees_of_freedom: usize,
    p_value: f64,
    small_sample: bool,
    alpha: f64,
    mean_ranks: Vec<f64>,
    cd: f64,
    pairs: Vec<pass_core::stats::PairComparison>,
}

pub const SMALL_SAMPLE_WARNING: &str = "χ² approximation unreliable for small N";

pub fn cmd_stats(
    scores: &Path,
    alpha: f64,
    higher_is_better: bool,
    out: &Path,
    stdout: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let alpha = Alpha::from_f64(alpha)?;
    let file = File::open(scores).map_err(|e| io_err(scores, e))?;
    let table = read_score_table(BufReader::new(file))
        .map_err(|e| CliError::validation(format!("{}: {e}", scores.display())))?;
    let ranks = rank_rows(
        table.methods.clone(),
        table.datasets.clone(),
        &table.scores,
        higher_is_better,
    )?;
    let fr = friedman(&ranks)?;
    let nem = nemenyi_pairwise(&ranks, alpha)?;
    if fr.small_sample {
        eprintln!(
            "warning: {SMALL_SAMPLE_WARNING} (N = {}, k = {})",
            ranks.dataset_count(),
            ranks.method_count()
        );
    }
    let report = StatsReport {
        methods: table.methods.clone(),
        datasets: ranks.dataset_count(),
        statistic: fr.statistic,
        degrees_of_freedom: fr.degrees_of_freedom,
        p_value: fr.p_value,
        small_sample: fr.small_sample,
        alpha: alpha.value(),
        mean_ranks: nem.mean_ranks.clone(),
        cd: nem.cd,
        pairs: nem.pairs,
    };
    write_json(&out.join("stats.json"), &report)?;
    write_with(&out.join("cd_diagram.csv"), |w| {
        writeln!(w, "method,mean_rank,cd")?;
        for (m, r) in table.methods.iter().zip(&nem.mean_ranks) {
            writeln!(w, "{m},{r},{}", nem.cd)?;
        }
        Ok(())
    })?;
    say(
        stdout,
        format!(
            "statistic={:.4} df={} p_value={:.6e} cd={:.4}",
            fr.statistic, fr.degrees_of_freedom, fr.p_value, nem.cd
        ),
    )?;
    for p in report.pairs.iter().filter(|p| p.significant) {
        say(stdout, format!("significant: {} vs {} (gap {:.4})", p.a, p.b, p.rank_gap))?;
    }
    Ok(())
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use imuqp::bench::{summarize, write_csv, BenchConfig, BenchSetup, RunSummary, SimRecord, CSV_SCHEMA_VERSION};
use imuqp::qp::memory_footprint;
use rayon::prelude::*;

use crate::{read_file, Report};

/// `a..b` (inclusive) or a single value.
pub fn parse_range(text: &str) -> Result<RangeInclusive<usize>, String> {
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(text)?;
            (v, v)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("range {text:?} must satisfy 1 <= a <= b"));
    }
    Ok(lo..=hi)
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// TOML file with benchmark settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub masses: Option<usize>,
    /// Prediction horizon.
    #[arg(long = "N", conflicts_with = "sweep")]
    pub horizon: Option<usize>,
    /// Run every horizon in `a..b` (inclusive).
    #[arg(long = "sweep-N", id = "sweep", value_parser = parse_range)]
    pub sweep: Option<RangeInclusive<usize>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Comma-separated seeds; the summary also averages over them.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub eps_q: Option<f64>,
    /// Iteration cap per solve; unbounded by default.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// First sample of the summary window (clamped to 1 for short runs).
    #[arg(long, default_value_t = 33)]
    pub k_a: usize,
    /// Write one CSV per run plus summary.csv here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Report::Summary)]
    pub report: Report,
}

impl BenchArgs {
    fn base_config(&self) -> anyhow::Result<BenchConfig> {
        let mut cfg = match &self.config {
            Some(path) => BenchConfig::from_toml_str(&read_file(path)?)
                .with_context(|| format!("in {}", path.display()))?,
            None => BenchConfig::default(),
        };
        if let Some(m) = self.masses {
            cfg.masses = m;
        }
        if let Some(n) = self.horizon {
            cfg.horizon = n;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.eps_q {
            cfg.eps_q = e;
        }
        if self.max_iter.is_some() {
            cfg.max_iter = self.max_iter;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// One config per (N, seed), in that order.
    pub fn jobs(&self) -> anyhow::Result<Vec<BenchConfig>> {
        let base = self.base_config()?;
        let horizons: Vec<usize> = match &self.sweep {
            Some(r) => r.clone().collect(),
            None => vec![base.horizon],
        };
        let seeds = self.seeds.clone().unwrap_or_else(|| vec![base.seed]);
        let mut jobs = Vec::new();
        for &horizon in &horizons {
            for &seed in &seeds {
                let cfg = BenchConfig {
                    horizon,
                    seed,
                    ..base.clone()
                };
                cfg.validate()?;
                jobs.push(cfg);
            }
        }
        Ok(jobs)
    }
}

struct JobResult {
    cfg: BenchConfig,
    p: usize,
    n_inputs: usize,
    n_outputs: usize,
    records: Vec<SimRecord>,
    summary: RunSummary,
}

fn run_job(cfg: BenchConfig, k_a: usize) -> anyhow::Result<JobResult> {
    let setup = BenchSetup::new(&cfg)?;
    let records = setup.run()?;
    let k_b = records.len();
    let k_a = if k_a < k_b { k_a.max(1) } else { 1 };
    let summary = summarize(&records, k_a, k_b)?;
    Ok(JobResult {
        p: setup.plan.p(),
        n_inputs: setup.plan.n_inputs(),
        n_outputs: setup.plan.n_outputs(),
        cfg,
        records,
        summary,
    })
}

const SUMMARY_COLUMNS: [&str; 15] = [
    "N",
    "seed",
    "p",
    "k_a",
    "k_b",
    "solve_ns_avg",
    "solve_ns_max",
    "solve_ns_min",
    "total_solve_ns",
    "avg_c_star",
    "avg_m_star",
    "stationarity_avg",
    "primal_feas_avg",
    "dual_feas_avg",
    "comp_slack_avg",
];

fn summary_values(s: &RunSummary) -> [f64; 10] {
    [
        s.solve_ns.avg,
        s.solve_ns.max,
        s.solve_ns.min,
        s.total_solve_ns as f64,
        s.avg_c_star,
        s.avg_m_star,
        s.stationarity.avg,
        s.primal_feasibility.avg,
        s.dual_feasibility.avg,
        s.complementary_slackness.avg,
    ]
}

/// Timings as integer nanoseconds, everything else in full precision.
fn summary_row(horizon: usize, seed: &str, p: usize, k: (usize, usize), v: &[f64; 10]) -> String {
    let mut row = vec![horizon.to_string(), seed.to_string(), p.to_string(), k.0.to_string(), k.1.to_string()];
    row.extend(v[..4].iter().map(|x| format!("{}", x.round() as u128)));
    row.extend(v[4..].iter().map(|x| format!("{x:.16e}")));
    row.join(",")
}

/// Summary CSV; with several seeds each horizon gets an extra `mean` row.
fn write_summary<W: Write>(mut out: W, results: &[JobResult], seeds: usize) -> io::Result<()> {
    writeln!(out, "# schema_version={CSV_SCHEMA_VERSION}")?;
    writeln!(out, "{}", SUMMARY_COLUMNS.join(","))?;
    for group in results.chunk_by(|a, b| a.cfg.horizon == b.cfg.horizon) {
        for r in group {
            let s = &r.summary;
            let row = summary_row(r.cfg.horizon, &r.cfg.seed.to_string(), r.p, (s.k_a, s.k_b), &summary_values(s));
            writeln!(out, "{row}")?;
        }
        if seeds > 1 {
            let mut mean = [0.0; 10];
            for r in group {
                for (m, v) in mean.iter_mut().zip(summary_values(&r.summary)) {
                    *m += v / group.len() as f64;
                }
            }
            let first = &group[0];
            let k = (first.summary.k_a, first.summary.k_b);
            writeln!(out, "{}", summary_row(first.cfg.horizon, "mean", first.p, k, &mean))?;
        }
    }
    Ok(())
}

fn write_run<W: Write>(out: W, r: &JobResult) -> io::Result<()> {
    let mut meta = r.cfg.describe();
    meta.push(("p", r.p.to_string()));
    write_csv(out, &meta, &r.records, r.n_outputs, r.n_inputs)
}

fn print_kkt(r: &JobResult) {
    let s = &r.summary;
    eprintln!(
        "N={} seed={}: stationarity max {:e}, primal max {:e}, dual max {:e}, slackness max {:e}",
        r.cfg.horizon,
        r.cfg.seed,
        s.stationarity.max,
        s.primal_feasibility.max,
        s.dual_feasibility.max,
        s.complementary_slackness.max
    );
}

pub fn bench(args: &BenchArgs) -> anyhow::Result<u8> {
    let jobs = args.jobs()?;
    let seeds = args.seeds.as_ref().map_or(1, Vec::len);
    let results: Vec<JobResult> = if args.out.is_some() {
        jobs.into_par_iter()
            .map(|cfg| run_job(cfg, args.k_a))
            .collect::<anyhow::Result<_>>()?
    } else {
        // stdout mode runs sequentially
        jobs.into_iter()
            .map(|cfg| run_job(cfg, args.k_a))
            .collect::<anyhow::Result<_>>()?
    };
    if args.report == Report::Kkt {
        results.iter().for_each(print_kkt);
    }

    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for r in &results {
                let path = dir.join(format!("run_N{}_seed{}.csv", r.cfg.horizon, r.cfg.seed));
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_run(BufWriter::new(file), r)?;
            }
            let path = dir.join("summary.csv");
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_summary(BufWriter::new(file), &results, seeds)?;
        }
        None => {
            let stdout = io::stdout().lock();
            if let [single] = results.as_slice() {
                write_run(stdout, single)?;
            } else {
                write_summary(stdout, &results, seeds)?;
            }
        }
    }
    Ok(0)
}

#[derive(Args, Debug)]
pub struct FootprintArgs {
    /// Horizon or inclusive range `a..b`.
    #[arg(long = "N", value_parser = parse_range, default_value = "1..40")]
    pub horizons: RangeInclusive<usize>,
}

/// Footprint table for one input and one output, where `p = 6N + 2` and the
/// active-set capacity is `w = 3N + 1`.
pub fn footprint_table(horizons: RangeInclusive<usize>) -> String {
    let mut s = format!("{:>6} {:>14} {:>14} {:>8} {:>8}\n", "N", "imuqp", "qpoases", "p", "w");
    for n in horizons {
        let row = memory_footprint(n as u64);
        s.push_str(&format!(
            "{:>6} {:>14} {:>14} {:>8} {:>8}\n",
            n,
            row.imuqp,
            row.qpoases,
            6 * n + 2,
            3 * n + 1
        ));
    }
    s
}

pub fn footprint(args: &FootprintArgs) -> anyhow::Result<u8> {
    print!("{}", footprint_table(args.horizons.clone()));
    Ok(0)
}

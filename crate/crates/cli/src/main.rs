use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use ssv_cli::bench::{run_bench, write_reports, BenchOptions};
use ssv_cli::commands::{
    generate, index, ingest, load_dataset, load_spec, synthetic_spec, validate_spec, write_json, write_output_dataset,
    IndexOptions,
};
use ssv_cli::{CmdResult, Failure};
use ssv_core::data::synth::{parse_gen_arg, Distribution};
use ssv_core::partition::{DistOptions, DEFAULT_CAPACITY};
use ssv_core::pipeline::LayoutMode;
use ssv_core::Store;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "ssv", version, about = "Build and serve multi-level scatterplot layouts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Read a CSV/NDJSON file into a binary dataset.
    Ingest {
        input: PathBuf,
        /// Spec whose data.columns give the schema.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `<out>.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compile, lay out and index a dataset.
    Index {
        /// Defaults to a built-in circle spec over x/y/z.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// `.ssvd` dataset, or a raw file ingested per the spec.
        #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
        data: Option<PathBuf>,
        /// Synthetic input `<dist>:<n>`, e.g. `skew:100000`.
        #[arg(long)]
        gen: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        layout: LayoutArgs,
        /// Levels stored as a single table; defaults to the spec's value.
        #[arg(long)]
        merged_levels: Option<u32>,
        /// Check every layout invariant after the build.
        #[arg(long)]
        verify: bool,
        /// Defaults to `<out>/build_report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Serve /meta, /fetch and an optional static viewer.
    Serve {
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Index synthetic datasets of several sizes and replay a pan/zoom trace.
    Bench {
        /// Comma-separated sizes; empty for none.
        #[arg(long, default_value = "32768,65536,131072,262144,524288,1048576")]
        sizes: String,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = DistArg::Skew)]
        dist: DistArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        layout: LayoutArgs,
        /// Trace replays per size.
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Builds per size; the fastest is reported.
        #[arg(long, default_value_t = 3)]
        index_repeats: usize,
        #[arg(long, default_value_t = 8)]
        pan_steps: usize,
        /// Receives bench.json, bench.csv and the temporary builds.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        keep_builds: bool,
    },
    /// Check a spec against the grammar rules.
    ValidateSpec { spec: PathBuf },
    /// Write a seeded synthetic dataset (`.ssvd`, or `.csv` by extension).
    Gen {
        #[arg(long, value_enum, default_value_t = DistArg::Skew)]
        dist: DistArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LayoutArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Dist)]
    mode: ModeArg,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// KD-tree leaf capacity.
    #[arg(long = "M", default_value_t = DEFAULT_CAPACITY)]
    capacity: u64,
}

impl LayoutArgs {
    fn mode(&self) -> LayoutMode {
        match self.mode {
            ModeArg::Seq => LayoutMode::Sequential,
            ModeArg::Dist => {
                let workers = self
                    .workers
                    .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
                LayoutMode::Distributed(DistOptions { capacity: self.capacity, workers })
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Seq,
    Dist,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Uniform,
    Skew,
    Coincident,
    Collinear,
}

impl From<DistArg> for Distribution {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Uniform => Distribution::Uniform,
            DistArg::Skew => Distribution::Skew,
            DistArg::Coincident => Distribution::Coincident,
            DistArg::Collinear => Distribution::Collinear,
        }
    }
}

fn emit<T: Serialize>(v: &T, path: Option<&Path>) -> CmdResult<()> {
    println!("{}", serde_json::to_string_pretty(v).map_err(Failure::internal)?);
    match path {
        Some(p) => write_json(p, v),
        None => Ok(()),
    }
}

fn spec_or_default(spec: Option<&Path>) -> CmdResult<ssv_core::SsvSpec> {
    spec.map_or_else(|| Ok(synthetic_spec()), load_spec)
}

fn parse_sizes(s: &str) -> CmdResult<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|e| Failure::user(anyhow!("bad size '{t}': {e}"))))
        .collect()
}

fn run(cli: Cli) -> CmdResult<()> {
    match cli.cmd {
        Cmd::Ingest { input, spec, out, report } => {
            let spec = load_spec(&spec)?;
            let (ds, summary) = ingest(&input, &spec)?;
            write_output_dataset(&out, &ds)?;
            let report = report.unwrap_or_else(|| PathBuf::from(format!("{}.report.json", out.display())));
            emit(&summary, Some(&report))
        }
        Cmd::Index { spec, data, gen, seed, out, layout, merged_levels, verify, report } => {
            let spec = spec_or_default(spec.as_deref())?;
            let ds = match (data, gen) {
                (Some(path), _) => load_dataset(&path, &spec)?.0,
                (None, Some(g)) => {
                    let (dist, n) = parse_gen_arg(&g).map_err(|e| Failure::user(anyhow!(e)))?;
                    generate(dist, n, seed).0
                }
                (None, None) => unreachable!("clap requires --data or --gen"),
            };
            let r = index(&spec, &ds, &out, IndexOptions { mode: layout.mode(), merged_levels, verify })?;
            let report = report.unwrap_or_else(|| out.join("build_report.json"));
            emit(&r, Some(&report))?;
            match &r.verify {
                Some(v) if !v.passed() => {
                    let failed: Vec<_> = v.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
                    Err(Failure::internal(anyhow!("invariant checks failed: {}", failed.join(", "))))
                }
                _ => Ok(()),
            }
        }
        Cmd::Serve { data_dir, port, host, ui_dir } => {
            let store = match data_dir {
                Some(d) => Some(Arc::new(Store::open(&d).map_err(Failure::user)?)),
                None => None,
            };
            let rt = tokio::runtime::Runtime::new().map_err(Failure::internal)?;
            rt.block_on(async move {
                let addr = format!("{host}:{port}");
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .with_context(|| format!("binding {addr}"))
                    .map_err(Failure::user)?;
                let local = listener.local_addr().map_err(Failure::internal)?;
                eprintln!("{}", serde_json::json!({ "listening": local.to_string(), "loaded": store.is_some() }));
                ssv_server::serve(listener, ssv_server::router(store, ui_dir)).await.map_err(Failure::internal)
            })
        }
        Cmd::Bench { sizes, spec, dist, seed, layout, repeats, index_repeats, pan_steps, out_dir, keep_builds } => {
            let opts = BenchOptions {
                sizes: parse_sizes(&sizes)?,
                dist: dist.into(),
                seed,
                mode: layout.mode(),
                spec: spec_or_default(spec.as_deref())?,
                work_dir: out_dir.clone(),
                repeats,
                pan_steps,
                index_repeats,
                keep_builds,
            };
            let reports = run_bench(&opts)?;
            write_reports(&out_dir, &reports)?;
            emit(&reports, None)
        }
        Cmd::ValidateSpec { spec } => {
            let check = validate_spec(&spec)?;
            emit(&check, None)?;
            if check.valid {
                Ok(())
            } else {
                Err(Failure::user(anyhow!("{}: {} rule violation(s)", spec.display(), check.violations.len())))
            }
        }
        Cmd::Gen { dist, n, seed, out } => {
            let (ds, stats) = generate(dist.into(), n, seed);
            write_output_dataset(&out, &ds)?;
            emit(&stats, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use agboost_core::boost::Mode;
use agboost_core::oracles::exact_opt;
use agboost_harness::families::{generate, FamilySpec, InstanceFile};
use agboost_harness::runner::{run_batch, run_to_dir};
use agboost_harness::spec::{ClassSpec, ExperimentSpec};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "agboost", version, about = "Agnostic boosting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Sampled => Mode::Sampled,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file from a family spec.
    Gen {
        /// Family spec JSON, e.g. {"family": "noisy-parity", "n": 10, "eta": 0.1}.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment spec.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Output directory; defaults to the spec's `outputs.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the best-in-class error of an instance by full scan.
    Opt {
        /// Instance file.
        #[arg(long)]
        spec: PathBuf,
        /// Class JSON, e.g. "parities" or {"trees": {"size": 4}}.
        #[arg(long, default_value = "\"parities\"")]
        class: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run many specs (files or directories of *.json).
    Bench {
        #[arg(long, required = true, num_args = 1..)]
        spec: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        mode: Option<ModeArg>,
    },
}

#[derive(Serialize)]
struct OptReport {
    delta: f64,
    argmin: String,
    class_size: u64,
    runtime: f64,
}

fn write_or_print(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn collect_specs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { spec, seed, out } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let family: FamilySpec = serde_json::from_str(&text)?;
            let file = generate(&family, seed)?;
            std::fs::write(&out, file.to_json()?)?;
            Ok(true)
        }
        Command::Run {
            spec,
            seed,
            mode,
            out,
        } => {
            let mut s = ExperimentSpec::read(&spec)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(m) = mode {
                s.mode = Some(m.into());
            }
            let Some(dir) = out.or_else(|| s.outputs.dir.clone()) else {
                bail!("no output directory: pass --out or set outputs.dir");
            };
            let report = run_to_dir(&s, &dir)?;
            println!(
                "{} error={:.6} bound={} passed={}",
                dir.display(),
                report.final_error,
                report.bound.map_or("n/a".into(), |b| format!("{b:.6}")),
                report.passed
            );
            Ok(report.passed)
        }
        Command::Opt { spec, class, out } => {
            let file = InstanceFile::read(&spec)?;
            let a = file.distribution()?;
            let class: ClassSpec = serde_json::from_str(&class).context("parsing --class")?;
            let class = class.build(a.domain())?;
            let start = Instant::now();
            let opt = exact_opt(&a, &class)?;
            let report = OptReport {
                delta: opt.delta,
                argmin: class.describe(opt.index, opt.negated),
                class_size: opt.class_size,
                runtime: start.elapsed().as_secs_f64(),
            };
            write_or_print(
                out.as_deref(),
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?;
            Ok(true)
        }
        Command::Bench {
            spec,
            out,
            jobs,
            mode,
        } => {
            let mut specs = Vec::new();
            for path in collect_specs(&spec)? {
                let mut s = ExperimentSpec::read(&path)?;
                if let Some(m) = mode {
                    s.mode = Some(m.into());
                }
                let stem = path
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                specs.push((s, out.join(stem)));
            }
            let mut all = true;
            for ((_, dir), r) in specs.iter().zip(run_batch(&specs, jobs)) {
                match r {
                    Ok(r) => {
                        all &= r.passed;
                        println!(
                            "{} {} error={:.6}",
                            if r.passed { "PASS" } else { "FAIL" },
                            dir.display(),
                            r.final_error
                        );
                    }
                    Err(e) => {
                        all = false;
                        println!("ERROR {} {e}", dir.display());
                    }
                }
            }
            Ok(all)
        }
    }
}

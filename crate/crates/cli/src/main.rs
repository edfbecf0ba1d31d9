use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use xtalk_core::runner::{self, Pipeline, RunConfig};
use xtalk_core::Error;

#[derive(Parser)]
#[command(name = "xtalk", version, about = "Crosstalk-aware randomized compiling and noise-estimation mitigation on simulated BCS circuits")]
struct Cli {
    /// Worker threads; affects speed only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; the reference configuration when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::reference(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured experiment and write series, manifest and fit files.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the Pauli and crosstalk twirl identities on random channels.
    TwirlCheck {
        #[arg(long, default_value_t = 20)]
        channels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Fit chain noise rates to the RC-averaged series of one experiment.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Read series from a finished run directory instead of simulating.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Directory for fit.json; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean relative error per pipeline variant over series JSON files.
    Summarize {
        /// Series JSON files or run directories.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Readout-unfolding Monte Carlo on the noiseless outcome distributions of the configured circuits.
    UnfoldDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.02)]
        flip: f64,
        #[arg(long, default_value_t = 32000)]
        shots: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Json(_) | Error::Parse { .. } => 2,
        Error::NotHermitian(_)
        | Error::InvalidState(_)
        | Error::ComplexExpectation(_)
        | Error::NotCptp(_)
        | Error::IllConditioned(_)
        | Error::Invariant(_) => 3,
        _ => 1,
    }
}

fn print_json(v: &impl Serialize) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn series_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Error> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension().is_some_and(|x| x == "json")
                        && f.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("series_"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn fit_cmd(common: &Common, from: Option<&Path>, out: Option<&Path>) -> Result<(), Error> {
    let cfg = common.load()?;
    let pipeline = Pipeline::new(cfg.clone())?;
    let name = cfg.fit.experiment.clone().unwrap_or_else(|| cfg.experiments[0].name.clone());
    let series = match from {
        Some(dir) => runner::load_series(dir, &name)?,
        None => {
            let exp = pipeline
                .experiments
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::Config {
                    path: "fit.experiment".into(),
                    msg: format!("no experiment named {name}"),
                })?;
            pipeline.run_experiment(exp)?
        }
    };
    let result = runner::fit_series(&pipeline, &name, &series, cfg.seed)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("fit.json"), serde_json::to_string_pretty(&result)?)?;
            info!("wrote {}", dir.join("fit.json").display());
        }
        None => print_json(&result)?,
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { common, out } => {
            let cfg = common.load()?;
            let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("run"));
            let manifest = runner::run(&cfg, &dir)?;
            let files: Vec<PathBuf> = manifest
                .outputs
                .iter()
                .filter(|f| f.starts_with("series_") && f.ends_with(".json"))
                .map(|f| dir.join(f))
                .collect();
            print_json(&runner::summarize(&files)?)?;
            info!("outputs in {}", dir.display());
            Ok(true)
        }
        Command::TwirlCheck { channels, seed, tol } => {
            let report = runner::twirl_check(channels, seed)?;
            print_json(&report)?;
            Ok(report.passes(tol))
        }
        Command::Fit { common, from, out } => {
            fit_cmd(&common, from.as_deref(), out.as_deref())?;
            Ok(true)
        }
        Command::Summarize { paths } => {
            print_json(&runner::summarize(&series_files(&paths)?)?)?;
            Ok(true)
        }
        Command::UnfoldDemo {
            common,
            flip,
            shots,
            trials,
        } => {
            let cfg = common.load()?;
            let pipeline = Pipeline::new(cfg.clone())?;
            let mut truths = Vec::new();
            for e in &pipeline.experiments {
                truths.extend(pipeline.ideal_distributions(e)?);
            }
            let demo = runner::unfold_demo(&truths, flip, shots, trials, cfg.seed)?;
            print_json(&serde_json::json!({ "demo": demo, "improvement": demo.improvement() }))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: numerical check failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

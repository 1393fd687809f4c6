use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use magep_cli::commands::{self, BenchArgs, CliError, FitArgs, GenArgs, Target};
use magep_cli::{run_check, Fault, Grid, Options, Suite};
use magep_core::netfunc::NetActivation;
use magep_core::{Distribution, Variant};

/// Weight-space symmetry toolkit: generate data, check properties, fit, time.
#[derive(Parser)]
#[command(name = "magep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random weight objects as .mgw.json files.
    Gen {
        /// Number of layers; must equal the number of widths minus one.
        #[arg(long = "L")]
        layers: Option<usize>,
        /// Comma-separated widths n_0,...,n_L.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Leading batch axis of this size.
        #[arg(long)]
        batch: Option<usize>,
        /// uniform:LO,HI or gaussian:MEAN,STD.
        #[arg(long, default_value = "uniform:-1,1", value_parser = commands::parse_distribution)]
        dist: Distribution,
    },
    /// Run property suites and print a JSON report.
    Check {
        #[arg(long, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Layer counts to draw from.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        layers: Vec<usize>,
        /// Widths are drawn from 1..=max-width.
        #[arg(long, default_value_t = 4)]
        max_width: usize,
        /// Input channel counts d to draw from.
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        channels: Vec<usize>,
        /// Output channel counts e to draw from.
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        out_channels: Vec<usize>,
        /// Tolerance override, SUITE=VALUE or SUITE.CHECK=VALUE; repeatable.
        #[arg(long = "tol", value_parser = parse_tolerance)]
        tolerances: Vec<(String, f64)>,
        /// Positive-scaling range LO,HI.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.25, 4.0])]
        scale_range: Vec<f64>,
        /// Rank suite: set every Ψ to 1 on all-ones widths.
        #[arg(long)]
        collapse_psi: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Fit the invariant layer by ridge regression and write a .mgfit.json file.
    Fit {
        #[arg(long = "L")]
        layers: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,3,2")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value = "probe")]
        target: TargetArg,
        /// Training rows (default 4F planted, 10F probe).
        #[arg(long)]
        train: Option<usize>,
        /// Test rows (default 2F).
        #[arg(long)]
        test: Option<usize>,
        #[arg(long, default_value_t = magep_core::fitting::DEFAULT_LAMBDA, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 4)]
        probes: usize,
        /// relu, leaky_relu[:ALPHA], tanh or sin.
        #[arg(long, default_value = "relu")]
        activation: String,
        /// Group for the invariance residual (default: the activation's).
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "fit.mgfit.json")]
        out: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Time the contraction forward against the naive loops.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        layers: Vec<usize>,
        /// Uniform widths to try at each layer count.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        e: usize,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    All,
    Group,
    Stability,
    Chains,
    Netinv,
    Equiv,
    Inv,
    Stack,
    Oracle,
    Rank,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        let one = match self {
            SuiteArg::All => return Suite::ALL.to_vec(),
            SuiteArg::Group => Suite::Group,
            SuiteArg::Stability => Suite::Stability,
            SuiteArg::Chains => Suite::Chains,
            SuiteArg::Netinv => Suite::Netinv,
            SuiteArg::Equiv => Suite::Equiv,
            SuiteArg::Inv => Suite::Inv,
            SuiteArg::Stack => Suite::Stack,
            SuiteArg::Oracle => Suite::Oracle,
            SuiteArg::Rank => Suite::Rank,
        };
        vec![one]
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Sharing,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Planted,
    Probe,
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let suite = name.split('.').next().unwrap_or_default();
    suite.parse::<Suite>()?;
    let value: f64 = value.parse().map_err(|_| format!("bad tolerance `{value}`"))?;
    if value.is_nan() || value < 0.0 {
        return Err(format!("tolerance must be >= 0, got {value}"));
    }
    Ok((name.to_string(), value))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MAGEP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("MAGEP_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failed(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Gen {
            layers,
            n,
            d,
            count,
            seed,
            out_dir,
            batch,
            dist,
        } => {
            let spec = commands::spec_from_flags(layers, &n, d)?;
            let paths = commands::gen(&GenArgs {
                spec,
                count,
                seed,
                out_dir,
                batch,
                dist,
            })?;
            for p in paths {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Check {
            suite,
            trials,
            seed,
            layers,
            max_width,
            channels,
            out_channels,
            tolerances,
            scale_range,
            collapse_psi,
            out,
            inject_fault,
        } => {
            let grid = Grid {
                layers,
                max_width,
                channels,
                out_channels,
            };
            grid.validate().map_err(CliError::Usage)?;
            let (lo, hi) = (scale_range[0], scale_range[1]);
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--scale-range needs 0 < LO <= HI, got {lo},{hi}"
                )));
            }
            let opts = Options {
                grid,
                trials,
                seed,
                tolerances,
                fault: inject_fault.map(|FaultArg::Sharing| Fault::Sharing),
                collapse_psi,
                scale_range: (lo, hi),
            };
            let (passed, report) = run_check(&suite.suites(), &opts);
            for s in report["suites"].as_array().into_iter().flatten() {
                eprintln!(
                    "{:<10} {} trials={} max_residual={}",
                    s["suite"].as_str().unwrap_or(""),
                    if s["passed"] == true { "PASS" } else { "FAIL" },
                    s["trials"],
                    s["max_residual"],
                );
            }
            let text = serde_json::to_string_pretty(&report).expect("reports serialize");
            match out {
                Some(path) => commands::write_file(&path, &text)?,
                None => println!("{text}"),
            }
            if passed {
                Ok(())
            } else {
                Err(CliError::Failed("one or more suites failed".into()))
            }
        }
        Command::Fit {
            layers,
            n,
            d,
            target,
            train,
            test,
            lambda,
            probes,
            activation,
            variant,
            seed,
            out,
            report,
        } => {
            let spec = commands::spec_from_flags(layers, &n, d)?;
            let activation: NetActivation = activation
                .parse()
                .map_err(|e: magep_core::Error| CliError::Usage(e.to_string()))?;
            let variant = variant
                .map(|v| v.parse::<Variant>())
                .transpose()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let target = match target {
                TargetArg::Planted => Target::Planted,
                TargetArg::Probe => Target::Probe,
            };
            let outcome = commands::fit(&FitArgs {
                spec,
                target,
                train,
                test,
                lambda,
                probes,
                activation,
                variant,
                seed,
            })?;
            commands::save_fit_file(&outcome, &out)?;
            if let Some(path) = report {
                let text = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
                commands::write_file(&path, &text)?;
            }
            println!("{}", outcome.summary());
            Ok(())
        }
        Command::Bench {
            layers,
            widths,
            d,
            e,
            batch,
            reps,
            seed,
            json,
        } => {
            let report = commands::bench(&BenchArgs {
                layers,
                widths,
                d,
                e,
                batch,
                reps,
                seed,
            })?;
            print!("{}", commands::bench_table(&report));
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&report).expect("reports serialize");
                commands::write_file(&path, &text)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

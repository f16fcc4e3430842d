use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsac_core::io::output::fmt_f64;
use nsac_core::io::{parse_config, prepare, recompute_repr, run_refinement, run_single, run_sweep, RunConfig, RunStatus};
use nsac_core::NsacError;

#[derive(Parser, Debug)]
#[command(name = "nsac", version, about = "1D Navier-Stokes/Allen-Cahn solver and identity checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// key=value config file; omitted means all defaults
    config: Option<PathBuf>,
    /// Extra `key=value` lines applied after the file (repeatable)
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output_dir`)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one configuration and write series, snapshot, comparison and summary
    Run(ConfigArgs),
    /// Repeat the configuration on successively halved grids and report orders
    Refine {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Number of grid levels (2-5)
        #[arg(short, long, default_value_t = 3)]
        levels: usize,
    },
    /// Run the alpha x beta (x n_cells) product given by the sweep keys
    Sweep(ConfigArgs),
    /// Build, normalize and check the initial data without integrating
    Validate(ConfigArgs),
    /// Recompute the volume reconstruction from a stored history.json
    Repr {
        history: PathBuf,
        /// Comparison times (comma separated); default t_end/2 and t_end
        #[arg(short, long, value_delimiter = ',')]
        times: Vec<f64>,
        /// Output CSV
        #[arg(short, long, default_value = "repr.csv")]
        out: PathBuf,
    },
}

fn load(args: &ConfigArgs) -> Result<RunConfig, NsacError> {
    let mut text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| NsacError::Io { path: p.clone(), source: e })?,
        None => String::new(),
    };
    for kv in &args.set {
        text.push('\n');
        text.push_str(kv);
    }
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), NsacError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| NsacError::Io { path: dir.into(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| NsacError::Io { path: path.into(), source: e })
}

fn execute(cli: Cli) -> Result<ExitCode, NsacError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let summary = run_single(&cfg)?;
            for (k, v) in summary.to_pairs() {
                println!("{k}={v}");
            }
            Ok(match summary.status {
                RunStatus::Completed if summary.passed() => ExitCode::SUCCESS,
                RunStatus::Completed | RunStatus::Failed => ExitCode::from(1),
                RunStatus::Refused => ExitCode::from(2),
            })
        }
        Command::Refine { cfg, levels } => {
            let config = load(&cfg)?;
            let table = run_refinement(&config, levels)?;
            let csv = table.to_csv();
            print!("{csv}");
            if let Some(dir) = &config.output_dir {
                write(&dir.join("refine.csv"), &csv)?;
            }
            match &table.failure {
                Some(f) => {
                    eprintln!("stopped early: {f}");
                    Ok(ExitCode::from(1))
                }
                None => Ok(ExitCode::SUCCESS),
            }
        }
        Command::Sweep(args) => {
            let cfg = load(&args)?;
            let rows = run_sweep(&cfg)?;
            println!("{}", nsac_core::io::run::SWEEP_HEADER);
            let mut all = true;
            for r in &rows {
                all &= r.passed;
                let s = r.smallness;
                println!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    fmt_f64(r.alpha),
                    fmt_f64(r.beta),
                    r.n_cells,
                    r.status,
                    r.passed,
                    fmt_f64(r.min_v),
                    fmt_f64(r.min_theta),
                    s.map_or("n/a".into(), |s| fmt_f64(s.alpha_h)),
                    s.map_or("n/a".into(), |s| s.cond1.to_string()),
                    s.map_or("n/a".into(), |s| s.cond2.to_string()),
                );
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Validate(args) => {
            let cfg = load(&args)?;
            let p = prepare(&cfg)?;
            let r = &p.report;
            println!("normalized={}", p.normalized);
            println!("theta_shift={}", fmt_f64(p.theta_shift));
            if let Some(note) = &p.note {
                println!("note={note}");
            }
            println!("mass0={}", fmt_f64(r.mass0));
            println!("energy0={}", fmt_f64(r.energy0));
            println!("v0_estimate={}", fmt_f64(r.v0_estimate));
            println!("m0_estimate={}", fmt_f64(r.m0_estimate));
            println!("e0={}", fmt_f64(r.e0));
            println!("gamma1={}", fmt_f64(r.gamma1));
            println!("compliant={}", r.compliant);
            Ok(if r.compliant { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Repr { history, times, out } => {
            let results = recompute_repr(&history, &times, &out)?;
            for r in &results {
                println!(
                    "t={} residual_max={} residual_l2={} alpha0={}",
                    fmt_f64(r.t),
                    fmt_f64(r.residual_max),
                    fmt_f64(r.residual_l2),
                    fmt_f64(r.alpha0)
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

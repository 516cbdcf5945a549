use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lpic::filters::{FilterKind, FilterSpec};
use lpic::model::equicorrelated_matrix;
use lpic::sim::{self, ExperimentConfig};
use lpic::sinr::equicorr_sir_report;
use lpic::{Error, Result};

#[derive(Parser)]
#[command(name = "lpic", version, about = "Linear parallel interference cancellation for DS-CDMA")]
struct Cli {
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true, env = "LPIC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo bit error rates for the detectors in a config file.
    Ber {
        config: PathBuf,
        /// Write CSV here instead of the config's `output` (or stdout).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Average SINR against the stage weight of the weighted proposed filter.
    SinrSweep {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a filter matrix for an equicorrelated system.
    FilterDump {
        /// MF, G, Gp, Gmu, Gpmu, Gpw, DC or MMSE.
        #[arg(long)]
        kind: String,
        #[arg(long = "K")]
        users: usize,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long, default_value_t = 1)]
        stage: usize,
        /// Noise variance; required by Gmu, Gpmu, Gpw and MMSE.
        #[arg(long)]
        sigma2: Option<f64>,
    },
    /// Closed-form third-stage SIR comparison for equicorrelated users.
    AnalyzeEquicorr {
        #[arg(long = "K")]
        users: usize,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    sim::parse_config(&text)
}

/// Opens the requested output file, or stdout.
fn sink(path: Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    match cli.command {
        Command::Ber { config, output } => {
            let cfg = load_config(&config)?;
            let run = sim::run_ber_experiment(&cfg)?;
            for f in &run.failures {
                eprintln!("warning: {}:{} not evaluated: {}", f.detector.label(), f.stage, f.reason);
            }
            sim::write_csv(&run.records, sink(output.or(cfg.output.clone()))?)
        }
        Command::SinrSweep { config, output } => {
            let cfg = load_config(&config)?;
            let res = sim::run_sinr_experiment(&cfg)?;
            for o in &res.optima {
                match o.w_opt {
                    Some(w) => eprintln!("stage {}: w_opt = {w:.6}, SINR = {:.4} dB", o.stage, o.sinr_db),
                    None => eprintln!("stage {}: SINR does not depend on the weight (degenerate)", o.stage),
                }
            }
            sim::write_sweep_csv(&res, sink(output.or(cfg.output.clone()))?)
        }
        Command::FilterDump {
            kind,
            users,
            rho,
            stage,
            sigma2,
        } => {
            let kind = FilterKind::from_label(&kind)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown filter kind `{kind}`")))?;
            let needs_noise = matches!(
                kind,
                FilterKind::MmseConverging | FilterKind::ModifiedMmse | FilterKind::WeightedProposed | FilterKind::Mmse
            );
            let sigma2 = match sigma2 {
                Some(s) if !(s >= 0.0 && s.is_finite()) => {
                    return Err(Error::InvalidParameter(format!("sigma2 {s}")))
                }
                Some(s) => s,
                None if needs_noise => {
                    return Err(Error::InvalidParameter(format!("{} needs --sigma2", kind.label())))
                }
                None => 0.0,
            };
            let r = equicorrelated_matrix(users, rho)?;
            let g = FilterSpec::new(kind, stage).with_noise(sigma2).build(&r)?;
            let mut out = sink(None)?;
            for row in g.matrix().row_iter() {
                let cells: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
            out.flush()?;
            Ok(())
        }
        Command::AnalyzeEquicorr { users, rho } => {
            let rep = equicorr_sir_report(users, rho)?;
            let mut out = sink(None)?;
            writeln!(out, "K,rho,sir_g3,sir_gp3,beta,converges")?;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                rep.users,
                fmt(rep.rho),
                fmt(rep.sir_g3),
                fmt(rep.sir_gp3),
                fmt(rep.beta),
                rep.converges
            )?;
            out.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

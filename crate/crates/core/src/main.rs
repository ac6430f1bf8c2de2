use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qdsim::scenario::{
    run_and_emit, Format, OutputConfig, ScenarioConfig, ScenarioOutput, SolverSelection,
};
use qdsim::{Error, Result};

/// Simulates single-electron transfer in 1D quantum dot chains.
#[derive(Parser)]
#[command(name = "qdsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound spectrum only.
    Eig(Common),
    /// Split-operator evolution.
    Evolve(Common),
    /// Tight-binding evolution.
    Tb(Common),
    /// Telegraph-noise ensemble.
    Decohere(Common),
    /// Split-operator and tight-binding side by side.
    Compare(Common),
    /// Run a scenario file as written.
    Run {
        /// Scenario file.
        #[arg(value_name = "CONFIG")]
        file: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overrides the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overrides the file.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Option<Vec<Format>>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn load(&self, positional: Option<&Path>) -> Result<ScenarioConfig> {
        let path = positional
            .or(self.config.as_deref())
            .ok_or_else(|| Error::InvalidInput("a scenario file is required".into()))?;
        let mut cfg = ScenarioConfig::from_path(path)?;
        if let Some(seed) = self.seed {
            cfg.seed = Some(seed);
        }
        if self.out_dir.is_some() || self.format.is_some() {
            let out = cfg.output.get_or_insert_with(OutputConfig::default);
            if let Some(dir) = &self.out_dir {
                out.dir = Some(dir.clone());
            }
            if let Some(f) = &self.format {
                out.formats = Some(f.clone());
            }
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<(ScenarioOutput, bool)> {
    let (mut cfg, quiet) = match &cli.command {
        Command::Run { file, common } => (common.load(file.as_deref())?, common.quiet),
        Command::Eig(c)
        | Command::Evolve(c)
        | Command::Tb(c)
        | Command::Decohere(c)
        | Command::Compare(c) => (c.load(None)?, c.quiet),
    };
    match cli.command {
        Command::Eig(_) => {
            cfg.solver = Some(SolverSelection::Eigen);
            cfg.noise = None;
        }
        Command::Evolve(_) => {
            cfg.solver = Some(SolverSelection::Som);
            cfg.noise = None;
        }
        Command::Tb(_) => {
            cfg.solver = Some(SolverSelection::Tb);
            cfg.noise = None;
        }
        Command::Decohere(_) => {
            if cfg.noise.is_none() {
                return Err(Error::Config {
                    field: "noise".into(),
                    message: "decohere needs a noise block".into(),
                });
            }
        }
        Command::Compare(_) => cfg.solver = Some(SolverSelection::Both),
        Command::Run { .. } => {}
    }
    Ok((run_and_emit(&cfg)?, quiet))
}

fn summarize(out: &ScenarioOutput) {
    let r = &out.report;
    println!("scenario {}", r.name);
    if let Some(e) = &r.eigen {
        println!("  bound states: {}", e.n_bound);
        let lowest: Vec<String> = e.lowest.iter().take(6).map(|v| format!("{v:.6}")).collect();
        println!("  lowest levels (E0): {}", lowest.join(" "));
    }
    for h in &r.histograms {
        let cells: Vec<String> = h
            .dots
            .iter()
            .zip(&h.probabilities)
            .map(|(d, p)| format!("dot {d} {p:.4}"))
            .collect();
        println!(
            "  {} final: {}, residual {:.4}",
            h.solver,
            cells.join(", "),
            h.residual
        );
    }
    if let Some(d) = &r.comparison {
        let max: Vec<String> = d.max.iter().map(|v| format!("{v:.4}")).collect();
        println!("  som vs tb max deviation per dot: {}", max.join(" "));
    }
    if let Some(e) = &r.ensemble {
        println!(
            "  ensemble of {} runs, dot {} amplitude {:.4} -> {:.4}, decayed: {}",
            e.n_runs, e.dot, e.decay.first_amplitude, e.decay.last_amplitude, e.decayed
        );
    }
    for a in &r.approximations {
        println!(
            "  {} approximation: {} segments, max deviation {:.3e}",
            a.label, a.n_segments, a.max_deviation
        );
    }
    println!(
        "  wrote {} files to {}",
        r.files.len() + usize::from(out.scenario.output.json),
        out.scenario.output.dir.display()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok((out, quiet)) => {
            if !quiet {
                summarize(&out);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

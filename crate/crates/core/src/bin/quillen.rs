use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quillen::cli::{output_dir, run, CliError, Command, FieldSource, RunConfig};
use quillen::flow_engine::FlowKind;

#[derive(Parser)]
#[command(name = "quillen", version, about = "Determinants, torsion, flows and K-energy on conformal tori")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tau_re: Option<f64>,
    #[arg(long)]
    tau_im: Option<f64>,
    /// Grid resolution N (power of two).
    #[arg(long = "grid")]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Conformal factor from a field file (.bin or .csv).
    #[arg(long, conflicts_with_all = ["max_frequency", "amplitude", "flat"])]
    field: Option<PathBuf>,
    /// Random band-limited conformal factor: maximal frequency.
    #[arg(long, requires = "amplitude")]
    max_frequency: Option<usize>,
    /// Random band-limited conformal factor: sup norm.
    #[arg(long, requires = "max_frequency")]
    amplitude: Option<f64>,
    /// Flat metric.
    #[arg(long)]
    flat: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Zeta-regularized log det of the Laplacian.
    Det(Common),
    /// Ricci or Q_L gradient flow.
    Flow {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_kind)]
        kind: Option<FlowKind>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        record_interval: Option<f64>,
        #[arg(long)]
        track_k_energy: bool,
    },
    /// K-energy between two conformal factors.
    Kenergy {
        #[command(flatten)]
        common: Common,
        /// Second endpoint as a field file.
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Randomized Chern/Todd identity suites.
    VerifyChern {
        #[command(flatten)]
        common: Common,
        /// Complex dimension.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Finite-difference torsion variation against its quadrature.
    TorsionVariation {
        #[command(flatten)]
        common: Common,
        /// Potential direction as a field file.
        #[arg(long)]
        direction: Option<PathBuf>,
        #[arg(long)]
        h: Option<f64>,
    },
}

fn parse_kind(s: &str) -> Result<FlowKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown flow kind {s} (ricci_conformal, ricci_potential, qL_gradient)"))
}

fn apply_common(c: &Common, command: Command) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if cfg.command.is_some_and(|k| k != command) {
        return Err(CliError::Config("config names a different command".into()));
    }
    cfg.command = Some(command);
    if let Some(v) = c.tau_re {
        cfg.torus.tau_re = v;
    }
    if let Some(v) = c.tau_im {
        cfg.torus.tau_im = v;
    }
    if let Some(v) = c.grid {
        cfg.torus.n = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(p) = &c.field {
        cfg.field_source = FieldSource::File { path: p.clone() };
    }
    if let (Some(max_frequency), Some(amplitude)) = (c.max_frequency, c.amplitude) {
        cfg.field_source = FieldSource::Random {
            max_frequency,
            amplitude,
        };
    }
    if c.flat {
        cfg.field_source = FieldSource::Flat;
    }
    if let Some(o) = &c.output {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

fn build(cmd: Cmd) -> Result<RunConfig, CliError> {
    Ok(match cmd {
        Cmd::Det(c) => apply_common(&c, Command::Det)?,
        Cmd::Flow {
            common,
            kind,
            t_end,
            record_interval,
            track_k_energy,
        } => {
            let mut cfg = apply_common(&common, Command::Flow)?;
            if let Some(k) = kind {
                cfg.flow.kind = k;
            }
            if let Some(t) = t_end {
                cfg.flow.t_end = t;
            }
            if let Some(r) = record_interval {
                cfg.flow.record_interval = r;
            }
            cfg.flow.track_k_energy |= track_k_energy;
            cfg
        }
        Cmd::Kenergy { common, target } => {
            let mut cfg = apply_common(&common, Command::Kenergy)?;
            if let Some(p) = target {
                cfg.kenergy.target = FieldSource::File { path: p };
            }
            cfg
        }
        Cmd::VerifyChern { common, n, trials } => {
            let mut cfg = apply_common(&common, Command::VerifyChern)?;
            if let Some(n) = n {
                cfg.chern.n = n;
            }
            if let Some(t) = trials {
                cfg.chern.trials = t;
            }
            cfg
        }
        Cmd::TorsionVariation { common, direction, h } => {
            let mut cfg = apply_common(&common, Command::TorsionVariation)?;
            if let Some(p) = direction {
                cfg.torsion.direction = FieldSource::File { path: p };
            }
            if let Some(h) = h {
                cfg.torsion.h = h;
            }
            cfg
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build(cli.command).and_then(|cfg| {
        let out = output_dir(&cfg);
        run(&cfg, &out).map(|o| (o, out))
    });
    match result {
        Ok((output, out)) => {
            println!("{}", serde_json::to_string_pretty(&output.summary["summary"]).unwrap_or_default());
            eprintln!("wrote {} artifacts to {}", output.artifacts.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("quillen: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

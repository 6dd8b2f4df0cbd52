use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emergelex::pipeline::{cmd_eval, cmd_gen_data, cmd_train};
use emergelex::report::cmd_report;
use emergelex::{parse_seed_set, CliError, ExperimentConfig};
use emergelex_core::game::Variant;

#[derive(Parser)]
#[command(name = "emergelex", version, about = "Two-agent naming-game experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate per-seed scene files.
    GenData(Common),
    /// Play the naming game (or fit the baseline) on each seed.
    Train(Common),
    /// Compute metrics for trained runs.
    Eval(Common),
    /// Write tables and plot data from evaluations.
    Report(Common),
}

#[derive(clap::Args)]
struct Common {
    /// TOML config; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict to one variant: proposed, no-mec, no-comm or h2h-g.
    #[arg(long)]
    variant: Option<String>,
    /// Seeds such as `0-9` or `1,3,5`.
    #[arg(long)]
    seed_set: Option<String>,
    /// Output directory (default `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.variant {
            let v = Variant::parse(v).ok_or_else(|| CliError::Input(format!("unknown variant {v:?}")))?;
            cfg.variants = vec![v.name().to_string()];
        }
        if let Some(s) = &self.seed_set {
            cfg.seeds = parse_seed_set(s)?;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::GenData(c) => {
            let cfg = c.config()?;
            for s in cmd_gen_data(&cfg)? {
                println!(
                    "seed {}: {} scenes ({} train, {} test), {} objects",
                    s.seed, s.scenes, s.train, s.test, s.objects
                );
            }
        }
        Cmd::Train(c) => {
            let cfg = c.config()?;
            for s in cmd_train(&cfg)? {
                println!(
                    "{} seed {}: final acceptance {:.3}, log joint {:.1} / {:.1}",
                    s.variant, s.seed, s.final_acceptance, s.final_log_joint[0], s.final_log_joint[1]
                );
            }
        }
        Cmd::Eval(c) => {
            let cfg = c.config()?;
            for r in cmd_eval(&cfg)? {
                let show = |k: &str| r.mean(k).map_or("-".to_string(), |x| format!("{x:.3}"));
                println!(
                    "{}: nmi {} / {}, ear {}, test mse {} {} {} {}",
                    r.variant,
                    show("nmi_a"),
                    show("nmi_b"),
                    show("ear"),
                    show("mse_test_a"),
                    show("mse_test_p"),
                    show("mse_test_o"),
                    show("mse_test_c")
                );
            }
        }
        Cmd::Report(c) => {
            let cfg = c.config()?;
            cmd_report(&cfg)?;
            println!("wrote {}", cfg.out.join("report").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("emergelex: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

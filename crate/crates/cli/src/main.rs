mod bench;
mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Config, CONFIG_ENV};
use crate::error::{CliError, Exit};
use crate::output::Out;

/// Privacy-preserving insurance claim scoring: homomorphically encrypted
/// logistic regression with a hash-chained attestation ledger.
#[derive(Debug, Parser)]
#[command(name = "medclaim", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Seed for every random choice (keys, claim ids, encryption noise,
    /// data split). Omit for fresh OS entropy.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Emit one JSON object per line instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the HE key pair, evaluation keys and the transport key.
    Keygen {
        /// Overwrite existing key files.
        #[arg(long)]
        force: bool,
    },
    /// Train the scoring model and write its client and server forms.
    Train(TrainArgs),
    /// Encrypt a claim record and hand it to the insurer.
    Submit(SubmitArgs),
    /// Score every pending claim (insurer side).
    Process {
        /// Only process this claim.
        #[arg(long)]
        claim_id: Option<String>,
    },
    /// Verify a processed claim against the ledger and decrypt the verdict.
    Retrieve {
        /// Defaults to the most recently submitted claim.
        #[arg(long)]
        claim_id: Option<String>,
    },
    /// Inspect the attestation ledger.
    #[command(subcommand)]
    Ledger(LedgerCommand),
    /// Time full claim lifecycles and report system metrics.
    Bench {
        #[arg(long, default_value_t = 20)]
        records: usize,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct DataSource {
    /// CSV with header age,sex,bmi,children,smoker,region,charges[,label].
    #[arg(long)]
    data: Option<PathBuf>,
    /// Train on this many generated records instead.
    #[arg(long)]
    synthetic: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    source: DataSource,
    /// ct-ct (encrypted weights) or ct-pt (encoded weights).
    #[arg(long)]
    weight_mode: Option<String>,
}

/// Give all seven fields for scripted use, or none to be prompted.
#[derive(Debug, Args)]
struct SubmitArgs {
    #[arg(long)]
    age: Option<u32>,
    /// 0 = female, 1 = male.
    #[arg(long)]
    sex: Option<u8>,
    #[arg(long)]
    bmi: Option<f64>,
    #[arg(long)]
    children: Option<u32>,
    /// 0 = no, 1 = yes.
    #[arg(long)]
    smoker: Option<u8>,
    /// 0 = southwest, 1 = southeast, 2 = northwest, 3 = northeast.
    #[arg(long)]
    region: Option<u8>,
    /// Recent medical charges.
    #[arg(long)]
    charges: Option<f64>,
    #[arg(long)]
    claim_id: Option<String>,
    #[arg(long)]
    policy_id: Option<String>,
}

#[derive(Debug, Subcommand)]
enum LedgerCommand {
    /// List every block.
    Show,
    /// Recompute hashes and links; exit 1 at the first bad block.
    Verify,
}

fn run(cli: Cli) -> Result<Exit, CliError> {
    let cfg = Config::load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed);
    let out = Out::new(cli.json);
    match cli.command {
        Command::Keygen { force } => commands::keygen(&cfg, seed, force, &out),
        Command::Train(args) => {
            let mode = match args.weight_mode {
                Some(m) => m.parse().map_err(CliError::usage)?,
                None => cfg.weight_mode()?,
            };
            commands::train(&cfg, seed, args.source.data.as_deref(), args.source.synthetic, mode, &out)
        }
        Command::Submit(args) => commands::submit(&cfg, seed, args.into_record_fields()?, &out),
        Command::Process { claim_id } => commands::process(&cfg, claim_id.as_deref(), &out),
        Command::Retrieve { claim_id } => commands::retrieve(&cfg, claim_id.as_deref(), &out),
        Command::Ledger(LedgerCommand::Show) => commands::ledger_show(&cfg, &out),
        Command::Ledger(LedgerCommand::Verify) => commands::ledger_verify(&cfg, &out),
        Command::Bench { records } => bench::run(&cfg, seed, records, &out),
    }
}

impl SubmitArgs {
    fn into_record_fields(self) -> Result<commands::SubmitInput, CliError> {
        let given = [
            self.age.is_some(),
            self.sex.is_some(),
            self.bmi.is_some(),
            self.children.is_some(),
            self.smoker.is_some(),
            self.region.is_some(),
            self.charges.is_some(),
        ];
        let record = if given.iter().all(|&g| g) {
            Some(medclaim_core::RawRecord::new(
                self.age.unwrap(),
                self.sex.unwrap(),
                self.bmi.unwrap(),
                self.children.unwrap(),
                self.smoker.unwrap(),
                self.region.unwrap(),
                self.charges.unwrap(),
            ))
        } else if given.iter().any(|&g| g) {
            let missing: Vec<&str> = medclaim_core::FEATURE_NAMES
                .iter()
                .zip(given)
                .filter(|(_, g)| !g)
                .map(|(n, _)| *n)
                .collect();
            return Err(CliError::usage(format!(
                "missing --{} (give all seven fields or none)",
                missing.join(", --")
            )));
        } else {
            None
        };
        Ok(commands::SubmitInput {
            record,
            claim_id: self.claim_id,
            policy_id: self.policy_id,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if json {
                Out::new(true).emit(&serde_json::json!({
                    "action": "error",
                    "kind": e.kind,
                    "message": e.message,
                    "exit_code": e.exit as u8,
                }));
            }
            ExitCode::from(e.exit as u8)
        }
    }
}

//! `newform-lab`: tables, verifications and classifications for the
//! exact-arithmetic theory implemented in `newform-core`.
//!
//! Exit codes: 0 on success, 1 on usage or specification errors, 2 when a
//! verification property fails.

mod charspec;
mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::RunConfig;
use report::Format;

#[derive(Parser, Debug)]
#[command(
    name = "newform-lab",
    version,
    about = "Exact newform computations on the unramified unitary group in three variables"
)]
struct Cli {
    /// Odd prime residue characteristic.
    #[arg(long, global = true, default_value_t = 3)]
    p: u64,

    /// Relative precision in pi-digits (defaults to the word-size cap).
    #[arg(long, global = true)]
    rel_prec: Option<u32>,

    /// RNG seed for all randomized checks.
    #[arg(long, global = true, env = "NEWFORM_LAB_SEED", default_value_t = 0)]
    seed: u64,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Md)]
    format: FormatArg,

    /// Output path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Sample count for randomized checks.
    #[arg(long, global = true, default_value_t = 50)]
    samples: u32,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FormatArg {
    Json,
    Md,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Md => Format::Md,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Conductor and dimension table over a character-conductor grid.
    Tables {
        /// Range of mu1 conductors, inclusive, e.g. 0..2.
        #[arg(long, default_value = "0..2")]
        c1: String,
        /// Range of mu2 conductors, inclusive.
        #[arg(long, default_value = "0..2")]
        c2: String,
        #[arg(long, default_value_t = 8)]
        n_max: u32,
    },
    /// Randomized and structural verification suites.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Classify a character pair and report its constituents.
    Classify {
        /// mu1: "triv", "|.|_E", "|.|_E^-1", "omega*|.|^-1", or
        /// "c1=<int>,idx=<int>,pi=<rational>[*z^<k>[/<order>]]".
        #[arg(long)]
        mu1: String,
        /// mu2: "triv" or "c2=<int>,idx=<int>".
        #[arg(long)]
        mu2: String,
        #[arg(long, default_value_t = 8)]
        n_max: u32,
    },
    /// Classification of the Steinberg pair with delta-kernel detail.
    Steinberg {
        #[arg(long, default_value_t = 8)]
        n_max: u32,
    },
}

#[derive(Subcommand, Debug)]
enum Suite {
    /// Synthesized double-coset reductions with certificate checks.
    Cosets {
        /// Maximum level.
        #[arg(long, default_value_t = 4)]
        n: u32,
    },
    /// Formula-vs-sampled stabilizer triviality over the conductor grid.
    Intertwine {
        #[arg(long, default_value_t = 6)]
        n_max: u32,
    },
    /// The theta' scalar table on the newform line.
    Theta,
    /// Oldform tower ranks and operator commutation.
    Oldforms {
        /// Levels above the conductor to check.
        #[arg(long, default_value_t = 4)]
        n_extra: u32,
    },
    /// Cayley generation of E^1 at finite level.
    E1 {
        #[arg(long, default_value_t = 3)]
        m: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful exits; everything else is usage.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = RunConfig {
        p: cli.p,
        rel_prec: cli.rel_prec,
        seed: cli.seed,
        samples: cli.samples,
    };
    let format: Format = cli.format.into();
    let (text, all_ok) = match &cli.cmd {
        Cmd::Tables { c1, c2, n_max } => {
            let rep = commands::cmd_tables(&cfg, c1, c2, *n_max)?;
            (render_tables(&rep, format)?, rep.all_ok)
        }
        Cmd::Verify { suite } => {
            let rep = match suite {
                Suite::Cosets { n } => commands::cmd_verify_cosets(&cfg, *n)?,
                Suite::Intertwine { n_max } => commands::cmd_verify_intertwine(&cfg, *n_max)?,
                Suite::Theta => commands::cmd_verify_theta(&cfg)?,
                Suite::Oldforms { n_extra } => commands::cmd_verify_oldforms(&cfg, *n_extra)?,
                Suite::E1 { m } => commands::cmd_verify_e1(&cfg, *m)?,
            };
            (render_verify(&rep, format)?, rep.all_ok)
        }
        Cmd::Classify { mu1, mu2, n_max } => {
            let mu1 = charspec::parse_mu1(mu1)?;
            let mu2 = charspec::parse_mu2(mu2)?;
            let (rep, ok) = commands::cmd_classify(&cfg, &mu1, &mu2, *n_max, false)?;
            (render_classify(&rep, format)?, ok)
        }
        Cmd::Steinberg { n_max } => {
            let mu1 = charspec::Mu1Spec::Symbolic(charspec::SymbolicMu1::AbsE { sign: 1 });
            let mu2 = charspec::Mu2Spec::Trivial;
            let (rep, ok) = commands::cmd_classify(&cfg, &mu1, &mu2, *n_max, true)?;
            (render_classify(&rep, format)?, ok)
        }
    };
    match &cli.out {
        None => {
            print!("{}", text);
            std::io::stdout().flush()?;
        }
        Some(path) => std::fs::write(path, text)?,
    }
    Ok(all_ok)
}

fn render_tables(rep: &report::TablesReport, format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(rep)? + "\n",
        Format::Md => report::tables_to_md(rep),
        Format::Csv => report::tables_to_csv(rep),
    })
}

fn render_verify(rep: &report::VerifyReport, format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(rep)? + "\n",
        Format::Md => report::verify_to_md(rep),
        Format::Csv => report::verify_to_csv(rep),
    })
}

fn render_classify(rep: &report::ClassifyReport, format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(rep)? + "\n",
        Format::Md => report::classify_to_md(rep),
        Format::Csv => report::classify_to_csv(rep),
    })
}

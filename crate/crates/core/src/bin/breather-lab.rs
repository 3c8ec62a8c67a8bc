use std::path::PathBuf;
use std::process::ExitCode;

use breather_lab::cli;
use breather_lab::config::{self, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "breather-lab", version, about = "mKdV breather experiments on the left half-line")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file.
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set n=8001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the command named in the config file.
    Run {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    VerifyIdentities(RunArgs),
    Traces(RunArgs),
    Functionals(RunArgs),
    Simulate(RunArgs),
    Fit(RunArgs),
    Stability(RunArgs),
    Coercivity(RunArgs),
    Plot(RunArgs),
    /// Print the config schema with defaults.
    Keys,
}

fn named(command: &str, args: RunArgs) -> u8 {
    let mut set = vec![format!("command={command}")];
    set.extend(args.set);
    let code = match args.config {
        Some(path) => cli::run(&path, &set),
        None => match RunConfig::from_text("", &set).and_then(|c| cli::execute(&c)) {
            Ok(o) => {
                if let Some(f) = o.failures.first() {
                    eprintln!("{f}");
                }
                o.exit_code()
            }
            Err(e) => {
                eprintln!("{}", cli::reason(&e));
                cli::error_exit_code(&e)
            }
        },
    };
    code as u8
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Cmd::Run { config, set } => cli::run(&config, &set) as u8,
        Cmd::VerifyIdentities(a) => named("verify-identities", a),
        Cmd::Traces(a) => named("traces", a),
        Cmd::Functionals(a) => named("functionals", a),
        Cmd::Simulate(a) => named("simulate", a),
        Cmd::Fit(a) => named("fit", a),
        Cmd::Stability(a) => named("stability", a),
        Cmd::Coercivity(a) => named("coercivity", a),
        Cmd::Plot(a) => named("plot", a),
        Cmd::Keys => {
            print!("{}", config::schema_text());
            0
        }
    };
    ExitCode::from(code)
}

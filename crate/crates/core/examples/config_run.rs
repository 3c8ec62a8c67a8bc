//! Drives a command through the key-value config layer, as the binary does.

use breather_lab::cli;
use breather_lab::config::RunConfig;

const CONFIG: &str = "
# boundary traces of a breather 30 units from the boundary
command = traces
alpha = 3
beta = 1
L = 30
output = traces-out
";

fn main() {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    match RunConfig::from_text(CONFIG, &overrides).and_then(|c| cli::execute(&c)) {
        Ok(o) => {
            println!("exit {} → {}", o.exit_code(), o.report.display());
            for f in &o.failures {
                println!("  {f}");
            }
        }
        Err(e) => println!("exit {}: {}", cli::error_exit_code(&e), cli::reason(&e)),
    }
}

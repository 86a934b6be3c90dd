use clap::Parser;
use lipkit_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            if let Some(path) = &cli.output {
                if let Err(e) = std::fs::write(path, format!("{}\n", outcome.report)) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    std::process::exit(2);
                }
            } else {
                println!("{}", outcome.report);
            }
            std::process::exit(outcome.exit_code);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}

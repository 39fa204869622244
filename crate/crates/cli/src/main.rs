use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use supersol_cli::{config::parse_real, run, Mode, Overrides};

#[derive(Debug, Parser)]
#[command(name = "supersol", version, about = "Certified supersolutions and monotone solves for degenerate logistic problems")]
struct Args {
    /// validate, certify, solve, mms or eigenbench
    #[arg(value_parser = |s: &str| s.parse::<Mode>())]
    mode: Mode,

    /// INI run configuration
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides [run] out)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Grid spacing, e.g. 0.01 or 1/128 (overrides [grid] h)
    #[arg(long, value_parser = parse_real)]
    h: Option<f64>,

    /// Overrides [problem] lambda
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    lambda: Option<f64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(4);
        }
    };
    let overrides = Overrides {
        out: args.out,
        h: args.h,
        lambda: args.lambda,
    };
    match run(Some(args.mode), &args.config, &overrides) {
        Ok(outcome) => {
            println!("{}", outcome.line);
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("supersol: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fraclayer_cli::config::parse_config;
use fraclayer_cli::run::{run, write_error, ErrorReport, EXIT_FAILED};

/// Run one fraclayer computation described by a configuration file.
#[derive(Parser)]
#[command(name = "fraclayer", version)]
struct Args {
    /// Configuration file: a `[subcommand]` header and `key = value` lines.
    config: PathBuf,
    /// Override a configuration value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

fn fail(out: &str, subcommand: &str, kind: &str, message: String) -> ExitCode {
    eprintln!("error: {message}");
    let err = ErrorReport {
        subcommand: subcommand.to_string(),
        kind: kind.to_string(),
        message,
        exit_code: EXIT_FAILED,
    };
    if let Err(e) = write_error(out.as_ref(), &err) {
        eprintln!("error: cannot write error.json: {e}");
    }
    ExitCode::from(EXIT_FAILED as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut overrides = args.set.clone();
    if let Ok(w) = std::env::var("FRACLAYER_WORKERS") {
        overrides.push(format!("workers={w}"));
    }
    // error.json goes to the requested output directory when it can be found
    let out_hint = overrides
        .iter()
        .rev()
        .find_map(|o| o.strip_prefix("out=").map(|v| v.trim().trim_matches('"').to_string()))
        .unwrap_or_else(|| "out".to_string());

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            let msg = format!("cannot read {}: {e}", args.config.display());
            return fail(&out_hint, "", "IoError", msg);
        }
    };
    let cfg = match parse_config(&text, &overrides) {
        Ok(c) => c,
        Err(e) => return fail(&out_hint, "", e.kind(), e.to_string()),
    };
    print!("{}", cfg.echo());
    if args.dry_run {
        return ExitCode::SUCCESS;
    }
    let workers = cfg.usize("workers");
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .expect("thread pool is configured once");
    }
    match run(&cfg) {
        Ok(outcome) => {
            if let Some(e) = &outcome.error {
                eprintln!("{}: {}", e.kind, e.message);
            }
            println!(
                "# wrote {} to {}",
                outcome.files.join(", "),
                outcome.out_dir.display()
            );
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => fail(cfg.text("out"), cfg.subcommand.name(), "IoError", e.to_string()),
    }
}

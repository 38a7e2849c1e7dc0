mod cli;
mod commands;
mod manifest;

use std::env;
use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use clap::error::ErrorKind;
use serde_json::json;

use cli::{Cli, Command, ReplayArgs};
use commands::{CliError, CliResult, Run};
use manifest::RunManifest;

fn main() -> ExitCode {
    let argv: Vec<String> = env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_string()), 2),
    };
    match run(cli, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, 1),
    }
}

fn fail(e: &CliError, code: u8) -> ExitCode {
    let record = json!({ "error": { "kind": e.kind(), "message": e.message() } });
    let _ = writeln!(io::stderr(), "{record}");
    ExitCode::from(code)
}

fn run(cli: Cli, args: &[String]) -> CliResult<()> {
    if let Command::Replay(r) = cli.command {
        return replay(r);
    }
    let Run {
        manifest,
        manifest_path,
    } = commands::execute(cli.command, args)?;
    match cli.manifest.or(manifest_path) {
        Some(path) => fs::write(&path, manifest.to_json())?,
        None => io::stderr().write_all(manifest.to_json().as_bytes())?,
    }
    Ok(())
}

fn replay(r: ReplayArgs) -> CliResult<()> {
    let text = fs::read_to_string(&r.manifest_file)?;
    let recorded: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad manifest: {e}")))?;
    if commands::uses_stdin(&recorded) {
        return Err(CliError::Usage("cannot replay a run that read standard input".into()));
    }
    let argv = std::iter::once(manifest::TOOL.to_string()).chain(recorded.args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    if commands::command_name(&cli.command) != recorded.command {
        return Err(CliError::Usage(format!(
            "manifest command {:?} does not match its arguments",
            recorded.command
        )));
    }
    // The recorded manifest is left untouched; only the outputs are rewritten.
    let replayed = commands::execute(cli.command, &recorded.args)?.manifest;
    if r.check {
        commands::compare(&recorded, &replayed)?;
    }
    let summary = json!({
        "replay": {
            "command": recorded.command,
            "outputs": replayed.outputs.len(),
            "checked": r.check,
        }
    });
    writeln!(io::stderr(), "{summary}")?;
    Ok(())
}

//! `gatebench`: characterize two-qubit gates from the command line.

mod channel_spec;
mod characterize;
mod error;
mod indicators;
mod output;
mod plane;
mod state_report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gatebench::exec::Exec;
use serde::Serialize;

use crate::characterize::{RunConfig, Tier};
use crate::error::{CliError, CliResult, ErrorKind};
use crate::output::{ensure_dir, read_text, write_json, write_text};
use crate::state_report::Method;

#[derive(Parser)]
#[command(
    name = "gatebench",
    version,
    about = "Characterize two-qubit gates modeled as quantum channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a measurement tier on a channel and write report.json and report.txt.
    Characterize(CharacterizeArgs),
    /// Reconstruct a state from a tomography record.
    StateTomo(StateTomoArgs),
    /// Standard process tomography: chi matrix, Kraus operators and gate metrics.
    ProcessTomo(ProcessTomoArgs),
    /// Tangle versus linear entropy samples with the Werner curve and the numerical boundary, as CSV.
    Plane(PlaneArgs),
}

#[derive(Args)]
struct ChannelArgs {
    /// Built-in channel name or path to a {label, kraus} JSON file.
    #[arg(long)]
    channel: String,
    /// Channel parameter as k=v; repeatable or comma separated.
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
    /// Shots per setting; exact probabilities when omitted.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ideal gate the channel is compared against.
    #[arg(long, default_value = "cnot")]
    target: String,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CharacterizeArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, value_enum)]
    tier: Tier,
}

#[derive(Args)]
struct ProcessTomoArgs {
    #[command(flatten)]
    channel: ChannelArgs,
}

#[derive(Args)]
struct StateTomoArgs {
    /// TomographyRecord JSON file.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "mle")]
    method: Method,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlaneArgs {
    /// Comma-separated families: werner, random_mixed (random), random_pure (pure), mems_probe (mems).
    #[arg(long, value_delimiter = ',', default_value = "werner,random_mixed")]
    families: Vec<String>,
    /// Samples per family.
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points on each overlay series.
    #[arg(long, default_value_t = 101)]
    curve_points: usize,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: PathBuf,
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn shots_of(args: &ChannelArgs) -> CliResult<Option<u64>> {
    match args.shots {
        Some(0) => Err(CliError::schema("--shots must be positive")),
        s => Ok(s),
    }
}

fn run_config(args: &ChannelArgs, tier: Tier) -> CliResult<RunConfig> {
    Ok(RunConfig {
        tier,
        shots: shots_of(args)?,
        seed: args.seed,
        target: args.target.clone(),
        exec: exec(args.sequential),
    })
}

fn cmd_characterize(args: CharacterizeArgs) -> CliResult<()> {
    let params = channel_spec::parse_params(&args.channel.params)?;
    let (ch, info) = channel_spec::resolve_channel(&args.channel.channel, &params)?;
    let cfg = run_config(&args.channel, args.tier)?;
    let out = &args.channel.out;
    ensure_dir(out)?;
    let report = characterize::characterize(&ch, info, &cfg, out)?;
    write_json(out, "report.json", &report)?;
    write_text(out, "report.txt", &characterize::render(&report))?;
    Ok(())
}

#[derive(Serialize)]
struct ProcessReport {
    channel: channel_spec::ChannelInfo,
    shots: Option<u64>,
    seed: u64,
    process_tomography: characterize::ProcessSection,
    gate_metrics: characterize::MetricsSection,
}

fn cmd_process_tomo(args: ProcessTomoArgs) -> CliResult<()> {
    let params = channel_spec::parse_params(&args.channel.params)?;
    let (ch, info) = channel_spec::resolve_channel(&args.channel.channel, &params)?;
    let cfg = run_config(&args.channel, Tier::Proctomo)?;
    let out = &args.channel.out;
    ensure_dir(out)?;
    let (process, reconstructed) = characterize::process_section(&ch, &cfg, out)?;
    let gate_metrics = characterize::metrics_section(&reconstructed, "reconstructed channel", &cfg, out)?;
    let report = ProcessReport {
        channel: info,
        shots: cfg.shots,
        seed: cfg.seed,
        process_tomography: process,
        gate_metrics,
    };
    write_json(out, "report.json", &report)?;
    let text = format!(
        "channel {} ({})\n\n[process tomography]\n{}\n[gate metrics]\n{}",
        report.channel.spec,
        report.channel.label,
        characterize::render_process(&report.process_tomography),
        characterize::render_metrics(&report.gate_metrics)
    );
    write_text(out, "report.txt", &text)?;
    Ok(())
}

fn cmd_state_tomo(args: StateTomoArgs) -> CliResult<()> {
    let text = read_text(&args.input)?;
    let record = state_report::parse_record(&text)?;
    ensure_dir(&args.out)?;
    let (report, state) = state_report::state_report(&record, args.method)?;
    write_json(&args.out, "state.json", &state)?;
    write_json(&args.out, "report.json", &report)?;
    write_text(&args.out, "report.txt", &state_report::render(&report))?;
    Ok(())
}

fn cmd_plane(args: PlaneArgs) -> CliResult<()> {
    let families = args
        .families
        .iter()
        .map(|f| {
            f.trim()
                .parse()
                .map_err(|e: gatebench::Error| CliError::schema(e.to_string()))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if args.curve_points < 2 {
        return Err(CliError::schema("--curve-points must be at least 2"));
    }
    let csv = plane::plane_csv(
        &families,
        args.n,
        args.seed,
        args.curve_points,
        exec(args.sequential),
    )?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    std::fs::write(&args.out, csv).map_err(|e| CliError::io(&args.out, e))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Characterize(a) => cmd_characterize(a),
        Command::StateTomo(a) => cmd_state_tomo(a),
        Command::ProcessTomo(a) => cmd_process_tomo(a),
        Command::Plane(a) => cmd_plane(a),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.kind.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::new(ErrorKind::Usage, e.to_string().trim().to_string())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

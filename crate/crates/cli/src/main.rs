use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use gridshare::scenario::{
    analyze, parse_scenario, write_analysis, write_ft, write_messages, SimOptions, Simulator,
    TelemetryWriter, FT_HEADER, MESSAGE_HEADER,
};

#[derive(Parser)]
#[command(
    name = "gridshare",
    version,
    about = "Distributed proportional power sharing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write per-step telemetry as CSV.
    Simulate {
        scenario: PathBuf,
        /// Telemetry destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every exchanged message to `<out>.messages.csv`.
        #[arg(long)]
        dump_messages: bool,
        /// Also write each agent's finite-time result to `<out>.ft.csv`.
        #[arg(long)]
        dump_ft: bool,
    },
    /// Print the spectral report, admissible capacity change and gain sweep.
    Analyze { scenario: PathBuf },
}

fn sidecar(out: Option<&Path>, suffix: &str) -> PathBuf {
    match out {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(format!(".{suffix}.csv"));
            PathBuf::from(name)
        }
        None => PathBuf::from(format!("{suffix}.csv")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn load(path: &Path) -> Result<gridshare::scenario::Scenario> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("invalid scenario {}", path.display()))
}

fn simulate(path: &Path, out: Option<&Path>, dump_messages: bool, dump_ft: bool) -> Result<()> {
    let sc = load(path)?;
    let options = SimOptions {
        record_messages: dump_messages,
        record_ft: dump_ft,
    };
    let mut sim = Simulator::new(&sc, options)?;

    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut telemetry = TelemetryWriter::new(sink, sc.n())?;
    let mut messages = if dump_messages {
        let mut f = create(&sidecar(out, "messages"))?;
        writeln!(f, "{MESSAGE_HEADER}")?;
        Some(f)
    } else {
        None
    };
    let mut ft = if dump_ft {
        let mut f = create(&sidecar(out, "ft"))?;
        writeln!(f, "{FT_HEADER}")?;
        Some(f)
    } else {
        None
    };

    while let Some(record) = sim.next() {
        let record = record?;
        telemetry.write(&record)?;
        if let Some(f) = messages.as_mut() {
            write_messages(&sim.drain_messages(), f)?;
        }
        if let Some(f) = ft.as_mut() {
            write_ft(&sim.drain_ft(), f)?;
        }
    }
    telemetry.into_inner().flush()?;
    for f in [messages, ft].into_iter().flatten() {
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            dump_messages,
            dump_ft,
        } => simulate(&scenario, out.as_deref(), dump_messages, dump_ft),
        Command::Analyze { scenario } => {
            let sc = load(&scenario)?;
            let report = analyze(&sc)?;
            let mut stdout = io::stdout().lock();
            write_analysis(&report, &mut stdout)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

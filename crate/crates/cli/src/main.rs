use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chebvol::builder::{build_surface_with, AccuracyPreset};
use chebvol::domain::BoundaryCurves;
use chebvol::experiments::{decay_csv, decay_laplace, decay_simple, rank_table, strictly_decreasing, validate, TestDomain};
use chebvol::io::{
    count_ok, invert_records, load_laplace, load_model, read_quotes, save_laplace, save_model, write_atomic,
    write_inversions,
};
use chebvol::laplace::build_laplace_surface;
use chebvol::Error;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "chebvol", version, about = "Implied volatility from precomputed Chebyshev surfaces")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a surface model and print its rank/order table.
    Build {
        #[arg(long, value_enum, default_value = "medium")]
        preset: Preset,
        /// Override the low-volatility map parameter.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert a quote file (`spot,strike,maturity,rate,premium[,type]`).
    Invert {
        model: PathBuf,
        quotes: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Round-trip errors of a model on a test domain.
    Validate {
        model: PathBuf,
        /// Points per axis.
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long, value_enum, default_value = "D2")]
        domain: Domain,
        /// Sample `grid * grid` uniform random points with this seed instead.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error decay of a single-rectangle surface with the order.
    Decay {
        #[arg(value_enum)]
        mode: DecayMode,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
        orders: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the Laplace-model surface.
    LaplaceBuild {
        #[arg(long, default_value_t = 50)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert Laplace-model prices from a CSV with header `x,c`.
    LaplaceInvert {
        model: PathBuf,
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Low,
    Medium,
    High,
}

impl From<Preset> for AccuracyPreset {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Low => AccuracyPreset::Low,
            Preset::Medium => AccuracyPreset::Medium,
            Preset::High => AccuracyPreset::High,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Domain {
    #[value(name = "D1", alias = "d1")]
    D1,
    #[value(name = "D2", alias = "d2")]
    D2,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecayMode {
    Simple,
    Laplace,
}

/// Exit code classes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Build(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Build(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Build(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Argument(_) => Failure::Usage(msg),
            Error::Build { .. } | Error::FitFailure { .. } | Error::NoConvergence { .. } => Failure::Build(msg),
            _ => Failure::Data(msg),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

type CmdResult = Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => Ok(write_atomic(p, text.as_bytes())?),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Data(e.to_string())),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| io_failure(path, e))
}

fn build(preset: Preset, delta: Option<f64>, out: &Path) -> CmdResult {
    let curves = match delta {
        Some(d) => BoundaryCurves::with_delta(d)?,
        None => BoundaryCurves::default(),
    };
    let model = build_surface_with(preset.into(), curves)?;
    let created = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    save_model(out, &model, Some(&created))?;
    print!("{}", rank_table(&model));
    Ok(())
}

fn invert(model: &Path, quotes: &Path, out: Option<&Path>) -> CmdResult {
    let model = load_model(model)?.model;
    let (headers, records) = read_quotes(open(quotes)?)?;
    let rows = invert_records(&model, records);
    for r in &rows {
        if let Err(msg) = &r.inversion {
            eprintln!("line {}: {msg}", r.record.line);
        }
    }
    let mut buf = Vec::new();
    write_inversions(&mut buf, &headers, &rows)?;
    match out {
        Some(p) => write_atomic(p, &buf)?,
        None => io::stdout().write_all(&buf).map_err(|e| Failure::Data(e.to_string()))?,
    }
    eprintln!("{} of {} rows inverted", count_ok(&rows), rows.len());
    Ok(())
}

fn run_validate(model: &Path, grid: usize, domain: Domain, seed: Option<u64>, out: Option<&Path>) -> CmdResult {
    let model = load_model(model)?.model;
    let domain = match domain {
        Domain::D1 => TestDomain::D1,
        Domain::D2 => TestDomain::D2,
    };
    let report = validate(&model, grid, domain, seed)?;
    emit(out, &report.csv())
}

fn decay(mode: DecayMode, orders: &[usize], out: Option<&Path>) -> CmdResult {
    if orders.is_empty() {
        return Err(Failure::Usage("no orders given".into()));
    }
    let rows = match mode {
        DecayMode::Simple => decay_simple(orders)?,
        DecayMode::Laplace => decay_laplace(orders)?,
    };
    if !strictly_decreasing(&rows) {
        eprintln!("note: maximal error does not decrease strictly with the order");
    }
    emit(out, &decay_csv(&rows))
}

fn laplace_build(order: usize, out: &Path) -> CmdResult {
    let s = build_laplace_surface(order, 1e-15)?;
    save_laplace(out, &s)?;
    println!("laplace surface: order {order}, rank {}, residual {:e}", s.interp.rank(), s.residual);
    Ok(())
}

fn laplace_invert(model: &Path, input: &Path, out: Option<&Path>) -> CmdResult {
    let s = load_laplace(model)?;
    let mut text = String::new();
    open(input)?
        .read_to_string(&mut text)
        .map_err(|e| io_failure(input, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Failure::Data(e.to_string()))?;
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "c" {
        return Err(Failure::Data(format!("line 1: header must be `x,c`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut report = String::from("x,c,v,status\n");
    for rec in rdr.records() {
        let parsed = rec.map_err(|e| e.to_string()).and_then(|r| {
            let line = r.position().map(|p| p.line()).unwrap_or(0);
            if r.len() != 2 {
                return Err(format!("line {line}: expected 2 fields, found {}", r.len()));
            }
            let x: f64 = r[0].parse().map_err(|_| format!("line {line}: invalid x `{}`", &r[0]))?;
            let c: f64 = r[1].parse().map_err(|_| format!("line {line}: invalid c `{}`", &r[1]))?;
            Ok((x, c))
        });
        let (x, c) = match parsed {
            Ok(q) => q,
            Err(msg) => {
                eprintln!("{msg}");
                report.push_str(",,,malformed\n");
                continue;
            }
        };
        let (v, status) = match s.invert(x, c) {
            Ok(v) => (v.to_string(), "ok"),
            Err(Error::BelowDomain { .. }) => (String::new(), "out-of-domain-low"),
            Err(Error::AboveDomain { .. }) => (String::new(), "out-of-domain-high"),
            Err(_) => (String::new(), "invalid"),
        };
        let _ = writeln!(report, "{x},{c},{v},{status}");
    }
    emit(out, &report)
}

fn run(cli: Cli) -> CmdResult {
    match cli.cmd {
        Command::Build { preset, delta, out } => build(preset, delta, &out),
        Command::Invert { model, quotes, out } => invert(&model, &quotes, out.as_deref()),
        Command::Validate {
            model,
            grid,
            domain,
            seed,
            out,
        } => run_validate(&model, grid, domain, seed, out.as_deref()),
        Command::Decay { mode, orders, out } => decay(mode, &orders, out.as_deref()),
        Command::LaplaceBuild { order, out } => laplace_build(order, &out),
        Command::LaplaceInvert { model, input, out } => laplace_invert(&model, &input, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

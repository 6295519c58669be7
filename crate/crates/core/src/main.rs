use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use projphase::experiments::{self, CheckOptions, SweepConfig};
use projphase::injectivity::{collision_from_witness, find_witness, CertGrid, Status, Tolerances, WitnessBudget};
use projphase::reconstruction::{reconstruct, recovery_error, MeasurementVector, ReconstructBudget};
use projphase::{Error, ProjectionCollection};

#[derive(Parser)]
#[command(name = "projphase", version, about = "Phase retrieval by orthogonal projections")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; equal seeds give byte-identical output.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    tol_witness: Option<f64>,
    #[arg(long, global = true)]
    tol_cert: Option<f64>,
    /// Witness-search (or reconstruction) restarts.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Initial covering radius of the certification grid.
    #[arg(long, global = true)]
    grid: Option<f64>,
    /// Write the main artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 3 when the result is inconclusive.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random collection of projections.
    Sample {
        #[arg(short = 'M', long = "ambient-dim")]
        m: usize,
        #[arg(short = 'N', long = "count")]
        n: usize,
        /// Comma-separated ranks, one per projection; a single value is repeated.
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
    },
    /// Certify injectivity or find a collision witness.
    Check { collection: PathBuf },
    /// Search for a witness only.
    Witness { collection: PathBuf },
    /// Recover x up to sign from projection magnitudes.
    Reconstruct {
        collection: PathBuf,
        /// Measurement file: `{"values": [...]}` or a bare array.
        #[arg(long, conflicts_with = "from_x", required_unless_present = "from_x")]
        measurements: Option<PathBuf>,
        /// Ground truth; measurements are synthesized from it.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from_x: Option<Vec<f64>>,
        /// Append a summary row to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a parameter sweep described by a JSON config.
    Sweep { config: PathBuf },
    /// Two full-spark bases in R³: one collection injective, its complements not.
    DemoCcpw,
    /// Tabulate the counting bounds.
    Bounds {
        /// `a..b` (inclusive) or a comma list.
        #[arg(short = 'M', long = "ambient-dim")]
        m: String,
        #[arg(short = 'N', long = "count")]
        n: String,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

enum Failure {
    Lib(Error),
    Inconclusive(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("PROJPHASE_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: PROJPHASE_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Inconclusive(msg)) => {
            eprintln!("strict: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => 1,
        Error::BudgetExceeded { .. } => 3,
        _ => 2,
    }
}

fn run(cli: &Cli) -> CmdResult {
    let c = &cli.common;
    match &cli.command {
        Command::Sample { m, n, ranks } => cmd_sample(c, *m, *n, ranks),
        Command::Check { collection } => cmd_check(c, collection),
        Command::Witness { collection } => cmd_witness(c, collection),
        Command::Reconstruct {
            collection,
            measurements,
            from_x,
            csv,
        } => cmd_reconstruct(c, collection, measurements.as_deref(), from_x.as_deref(), csv.as_deref()),
        Command::Sweep { config } => cmd_sweep(c, config),
        Command::DemoCcpw => cmd_demo(c),
        Command::Bounds { m, n, format } => cmd_bounds(c, m, n, *format),
    }
}

fn emit(common: &Common, text: &str) -> io::Result<()> {
    match &common.out {
        Some(p) => fs::write(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn check_options(common: &Common, default: CheckOptions) -> CheckOptions {
    let mut o = default;
    if let Some(t) = common.tol_witness {
        o.tolerances.witness = t;
    }
    if let Some(t) = common.tol_cert {
        o.tolerances.cert = t;
    }
    if let Some(r) = common.restarts {
        o.witness.restarts = r;
    }
    if let Some(d) = common.grid {
        o.grid = CertGrid { delta: d, ..o.grid };
    }
    o.with_seed(common.seed)
}

fn validate_options(o: &CheckOptions) -> Result<(), Error> {
    let positive = |name: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
        }
    };
    positive("--tol-witness", o.tolerances.witness)?;
    positive("--tol-cert", o.tolerances.cert)?;
    positive("--grid", o.grid.delta)?;
    if o.witness.restarts == 0 {
        return Err(Error::InvalidInput("--restarts must be at least 1".into()));
    }
    Ok(())
}

fn cmd_sample(common: &Common, m: usize, n: usize, ranks: &[usize]) -> CmdResult {
    let ranks = match ranks.len() {
        1 => vec![ranks[0]; n],
        k if k == n => ranks.to_vec(),
        k => {
            return Err(Error::InvalidInput(format!("{k} ranks given for N = {n}")).into());
        }
    };
    if m < 2 {
        return Err(Error::InvalidInput(format!("M must be at least 2, got {m}")).into());
    }
    let c = ProjectionCollection::sample(m, &ranks, common.seed)?;
    let worst = c
        .iter()
        .flat_map(|p| p.validate(projphase::projection::TOL_STRUCT))
        .count();
    emit(common, &format!("{}\n", c.to_json()?))?;
    eprintln!(
        "sampled {} projections in R^{} (ranks {:?}); {} invariant violations",
        c.len(),
        m,
        ranks,
        worst
    );
    Ok(())
}

fn cmd_check(common: &Common, path: &Path) -> CmdResult {
    let collection = experiments::load_collection(path)?;
    let opts = check_options(common, CheckOptions::default());
    validate_options(&opts)?;
    let report = experiments::check(&collection, &opts)?;
    emit(common, &to_json(&report)?)?;
    let v = &report.verdict;
    eprintln!(
        "M={} N={} status={:?} min_defect={:.3e}",
        collection.ambient_dim(),
        collection.len(),
        v.status,
        v.min_defect
    );
    if let Some(w) = &v.witness {
        eprintln!("witness residual {:.3e}", w.residual);
    }
    if let Some(cp) = report.complement_property {
        let agree = if report.oracle_disagrees() { "DISAGREES" } else { "agrees" };
        eprintln!("complement property holds={cp}; oracle {agree}");
    }
    strict_gate(common, v.status)
}

fn strict_gate(common: &Common, status: Status) -> CmdResult {
    if common.strict && status == Status::Inconclusive {
        return Err(Failure::Inconclusive("verdict is inconclusive".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct WitnessReport {
    found: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<projphase::Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collision: Option<projphase::CollisionPair>,
    budget: WitnessBudget,
    tol_witness: f64,
}

fn cmd_witness(common: &Common, path: &Path) -> CmdResult {
    let collection = experiments::load_collection(path)?;
    let opts = check_options(common, CheckOptions::default());
    validate_options(&opts)?;
    let witness = find_witness(&collection, &opts.witness, opts.tolerances.witness);
    let collision = match &witness {
        Some(w) => Some(collision_from_witness(&collection, w)?),
        None => None,
    };
    let report = WitnessReport {
        found: witness.is_some(),
        witness,
        collision,
        budget: opts.witness,
        tol_witness: opts.tolerances.witness,
    };
    emit(common, &to_json(&report)?)?;
    match &report.witness {
        Some(w) => eprintln!("witness found, residual {:.3e}", w.residual),
        None => eprintln!("no witness within budget"),
    }
    let status = if report.found {
        Status::WitnessFound
    } else {
        Status::Inconclusive
    };
    strict_gate(common, status)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MeasurementFile {
    Record(MeasurementVector),
    Bare(Vec<f64>),
}

fn read_measurements(path: &Path) -> Result<MeasurementVector, Error> {
    let text = fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let parsed: MeasurementFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    match parsed {
        MeasurementFile::Record(m) => m.checked(),
        MeasurementFile::Bare(v) => MeasurementVector::new(v, path.display().to_string()),
    }
}

#[derive(Serialize)]
struct ReconstructReport {
    #[serde(flatten)]
    result: projphase::ReconstructionResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery_error: Option<f64>,
}

fn cmd_reconstruct(
    common: &Common,
    path: &Path,
    measurements: Option<&Path>,
    from_x: Option<&[f64]>,
    csv_path: Option<&Path>,
) -> CmdResult {
    let collection = experiments::load_collection(path)?;
    let reference = path.display().to_string();
    let (b, truth) = match (measurements, from_x) {
        (Some(p), _) => (read_measurements(p)?, None),
        (None, Some(x)) => {
            if x.len() != collection.ambient_dim() {
                return Err(Error::DimensionMismatch {
                    expected: collection.ambient_dim(),
                    found: x.len(),
                }
                .into());
            }
            let x = DVector::from_column_slice(x);
            (MeasurementVector::of(&collection, &x, reference), Some(x))
        }
        (None, None) => unreachable!("clap requires one measurement source"),
    };
    let mut budget = ReconstructBudget {
        seed: common.seed,
        ..ReconstructBudget::default()
    };
    if let Some(r) = common.restarts {
        if r == 0 {
            return Err(Error::InvalidInput("--restarts must be at least 1".into()).into());
        }
        budget.restarts = r;
    }
    let result = reconstruct(&collection, &b, &budget)?;
    let err = match &truth {
        Some(x) => Some(recovery_error(&result.x_hat, x)?),
        None => None,
    };
    if let Some(p) = csv_path {
        append_csv_row(p, common.seed, &collection, &result, err)?;
    }
    eprintln!(
        "residual {:.3e}, converged={}, {} alternative solution(s){}",
        result.residual,
        result.converged,
        result.alternatives.len(),
        err.map(|e| format!(", recovery error {e:.3e}")).unwrap_or_default()
    );
    let converged = result.converged;
    emit(
        common,
        &to_json(&ReconstructReport {
            result,
            recovery_error: err,
        })?,
    )?;
    if common.strict && !converged {
        return Err(Failure::Inconclusive("reconstruction did not converge".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct CsvRow {
    seed: u64,
    m: usize,
    n: usize,
    rank_profile: String,
    residual: f64,
    recovery_error: Option<f64>,
    restarts_used: usize,
    converged: bool,
}

fn append_csv_row(
    path: &Path,
    seed: u64,
    collection: &ProjectionCollection,
    result: &projphase::ReconstructionResult,
    err: Option<f64>,
) -> Result<(), Error> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(CsvRow {
        seed,
        m: collection.ambient_dim(),
        n: collection.len(),
        rank_profile: collection
            .ranks()
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(" "),
        residual: result.residual,
        recovery_error: err,
        restarts_used: result.restarts_used,
        converged: result.converged,
    })?;
    w.flush()?;
    Ok(())
}

fn cmd_sweep(common: &Common, path: &Path) -> CmdResult {
    let mut cfg = SweepConfig::from_json(&fs::read_to_string(path)?)?;
    // Command-line flags override the config file.
    if common.seed != 0 {
        cfg.seed = common.seed;
    }
    if let Some(t) = common.tol_witness {
        cfg.tolerances.witness = t;
    }
    if let Some(t) = common.tol_cert {
        cfg.tolerances = Tolerances { cert: t, ..cfg.tolerances };
    }
    if let Some(r) = common.restarts {
        cfg.restarts = Some(r);
    }
    if let Some(g) = common.grid {
        cfg.grid = g;
    }
    let cells = experiments::run_sweep(&cfg)?;
    let mut buf = Vec::new();
    experiments::write_sweep_csv(&cells, &mut buf)?;
    match (&common.out, &cfg.output) {
        (Some(p), _) => fs::write(p, &buf)?,
        (None, Some(p)) => fs::write(p, &buf)?,
        (None, None) => io::stdout().lock().write_all(&buf)?,
    }
    if let Some(p) = &cfg.plot {
        experiments::write_sweep_plot(&cells, fs::File::create(p)?)?;
    }
    let mut inconclusive = 0;
    for c in &cells {
        inconclusive += c.inconclusive_count;
        eprintln!(
            "M={} N={}: injective {} witness {} inconclusive {} ({:.1}s)",
            c.m, c.n, c.injective_count, c.witness_count, c.inconclusive_count, c.wall_time_s
        );
    }
    if common.strict && inconclusive > 0 {
        return Err(Failure::Inconclusive(format!("{inconclusive} inconclusive trial(s)")));
    }
    Ok(())
}

fn cmd_demo(common: &Common) -> CmdResult {
    let opts = check_options(common, experiments::demo_options());
    validate_options(&opts)?;
    let report = experiments::demo_ccpw(common.seed, &opts)?;
    emit(common, &to_json(&report)?)?;
    eprintln!(
        "spark margin {:.3e} after {} attempt(s)",
        report.spark_margin, report.attempts
    );
    eprintln!(
        "{{W_i}}:      {:?} (min defect {:.3e})",
        report.subspaces.verdict.status, report.subspaces.verdict.min_defect
    );
    eprintln!(
        "{{W_i^perp}}: {:?}{}",
        report.complements.verdict.status,
        report
            .witness_angle_to_phi3
            .map(|a| format!(", witness at angle {a:.3e} from phi_3"))
            .unwrap_or_default()
    );
    if common.strict
        && (report.subspaces.verdict.status == Status::Inconclusive
            || report.complements.verdict.status == Status::Inconclusive)
    {
        return Err(Failure::Inconclusive("demo verdict is inconclusive".into()));
    }
    Ok(())
}

fn parse_range(text: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::InvalidInput(format!("cannot parse range {text:?}"));
    let values: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(Error::InvalidInput(format!("range {text:?} is empty")));
    }
    Ok(values)
}

fn cmd_bounds(common: &Common, m: &str, n: &str, format: Format) -> CmdResult {
    let rows = experiments::bounds_table(&parse_range(m)?, &parse_range(n)?)?;
    let text = match format {
        Format::Table => experiments::format_bounds_table(&rows),
        Format::Json => to_json(&rows)?,
    };
    emit(common, &text)?;
    Ok(())
}

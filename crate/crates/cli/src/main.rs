use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pitman_core::asymptotics::{diversity_moment, DiversityDensity, GAlphaSeries, DEFAULT_MAX_TERMS, DEFAULT_SERIES_TOL};
use pitman_core::distribution::{exact_moment, length_pmf, moment_report};
use pitman_core::harness::{
    default_precision_bits, default_verify_config, result_json, run_study, write_csv, GridSpec, PathSpec,
    StudyConfig, StudyKind,
};
use pitman_core::sampler::{sample_k_with, RunningStats};
use pitman_core::scalar::format_f64;
use pitman_core::{CNumberTable, Error, ExactScalar, Mode, Number, PitmanParams, SeedSpec};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pitman", version, about = "Exact and asymptotic laws of the number of blocks of a Pitman partition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distribution of the number of blocks K.
    Pmf(PmfArgs),
    /// Moments E[K^r].
    Moments(MomentArgs),
    /// Density and moments of the limit of K / n^alpha.
    Diversity(DiversityArgs),
    /// Exact normalized moments next to their asymptotic approximations.
    Approx(ApproxArgs),
    /// Draws of K from the seating process.
    Sample(SampleArgs),
    /// Runs a convergence study.
    Study(StudyArgs),
    /// Checks the closed forms against exhaustive enumeration.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    n: u64,
    /// Discount parameter in (0, 1), as "p/q" or a decimal.
    #[arg(long)]
    alpha: ExactScalar,
    /// Concentration parameter, greater than -alpha.
    #[arg(long, allow_hyphen_values = true)]
    theta: ExactScalar,
}

impl ModelArgs {
    fn params(&self) -> Result<PitmanParams, Error> {
        PitmanParams::exact(self.n, self.alpha.clone(), self.theta.clone())
    }
}

#[derive(Args)]
struct PrecisionArgs {
    /// Rational arithmetic instead of floating point.
    #[arg(long)]
    exact: bool,
    /// Working precision in bits (defaults to $PITMAN_PRECISION_BITS or 128).
    #[arg(long)]
    precision: Option<u32>,
}

impl PrecisionArgs {
    fn bits(&self) -> u32 {
        self.precision.unwrap_or_else(default_precision_bits)
    }

    fn mode(&self) -> Mode {
        if self.exact {
            Mode::Exact
        } else {
            Mode::approx(self.bits())
        }
    }
}

#[derive(Args)]
struct PmfArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    precision: PrecisionArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Also write the table of generalized Stirling numbers c(n, k, alpha) as CSV.
    #[arg(long)]
    dump_table: Option<PathBuf>,
}

#[derive(Args)]
struct MomentArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Moment orders, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    r: Vec<u32>,
    #[command(flatten)]
    precision: PrecisionArgs,
    /// Without a format, prints one value per line.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct DiversityArgs {
    #[arg(long)]
    alpha: ExactScalar,
    /// Without theta the series g_alpha itself is evaluated.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<ExactScalar>,
    /// Points at which to evaluate the density, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    /// One-column CSV of evaluation points (a non-numeric header line is skipped).
    #[arg(long)]
    x_file: Option<PathBuf>,
    /// Moment orders of the limit law, comma separated; needs theta.
    #[arg(long, value_delimiter = ',')]
    moment: Vec<u32>,
    /// Relative truncation tolerance of the series.
    #[arg(long, default_value_t = DEFAULT_SERIES_TOL)]
    tol: f64,
    /// Term cap of the series.
    #[arg(long, default_value_t = DEFAULT_MAX_TERMS)]
    max_terms: usize,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ApproxArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    r: Vec<u32>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    replicates: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Root stream index.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Number of child streams the replicates are split across.
    #[arg(long, default_value_t = 1)]
    streams: u64,
    /// Moment order summarized in JSON output.
    #[arg(long, default_value_t = 1)]
    r: u32,
    /// CSV lists every draw; JSON summarizes them.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct StudyArgs {
    /// JSON configuration; when given, the other study flags are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    /// thm31, corrected, kle, mthA, corollary34, z_moments, lemma_expansions or verify.
    #[arg(long)]
    name: Option<StudyKind>,
    #[arg(long)]
    alpha: Option<ExactScalar>,
    /// Fixed theta.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<ExactScalar>,
    /// Joint path theta = n^beta.
    #[arg(long)]
    beta: Option<ExactScalar>,
    /// Require the strengthened joint regime.
    #[arg(long)]
    cr: bool,
    #[arg(long, value_delimiter = ',')]
    r: Vec<u32>,
    /// "2^8..2^16", "1..10" or a comma list.
    #[arg(long)]
    grid: Option<GridSpec>,
    #[arg(long)]
    tail: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output base path; writes <base>.csv and <base>.json.
    #[arg(long)]
    output: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Sample sizes to check, up to the enumeration cap.
    #[arg(long, default_value = "1..10")]
    grid: GridSpec,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let status = run(cli.command, &mut out).and_then(|code| {
        out.flush()?;
        Ok(code)
    });
    match status {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(command: Command, out: &mut impl Write) -> Result<ExitCode, Error> {
    match command {
        Command::Pmf(a) => pmf(a, out),
        Command::Moments(a) => moments(a, out),
        Command::Diversity(a) => diversity(a, out),
        Command::Approx(a) => approx(a, out),
        Command::Sample(a) => sample(a, out),
        Command::Study(a) => study(a, out),
        Command::Verify(a) => return verify(a, out),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn mode_name(mode: Mode) -> String {
    match mode {
        Mode::Exact => "exact".into(),
        Mode::Approx { precision_bits } => format!("float{precision_bits}"),
    }
}

fn print_json(out: &mut impl Write, value: &serde_json::Value) -> Result<(), Error> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("json values serialize"))?;
    Ok(())
}

fn pmf(a: PmfArgs, out: &mut impl Write) -> Result<(), Error> {
    let params = a.model.params()?;
    let mode = a.precision.mode();
    let probs = length_pmf(&params, mode)?;
    if let Some(path) = &a.dump_table {
        let table = if a.precision.exact {
            CNumberTable::exact(a.model.alpha.as_rational(), params.n())?
        } else {
            CNumberTable::log_scaled(&a.model.alpha.to_float(a.precision.bits()), params.n())?
        };
        let mut file = BufWriter::new(fs::File::create(path)?);
        table.write_csv(&mut file)?;
        file.flush()?;
    }
    match a.format {
        Format::Csv => {
            writeln!(out, "k,p")?;
            for (k, p) in probs.iter().enumerate() {
                writeln!(out, "{},{p}", k + 1)?;
            }
        }
        Format::Json => {
            let rows: Vec<_> = probs
                .iter()
                .enumerate()
                .map(|(k, p)| json!({"k": k + 1, "p": p.to_string()}))
                .collect();
            print_json(
                out,
                &json!({
                    "n": params.n(),
                    "alpha": a.model.alpha.to_string(),
                    "theta": a.model.theta.to_string(),
                    "mode": mode_name(mode),
                    "pmf": rows,
                }),
            )?;
        }
    }
    Ok(())
}

fn moments(a: MomentArgs, out: &mut impl Write) -> Result<(), Error> {
    let params = a.model.params()?;
    let mode = a.precision.mode();
    let values = a
        .r
        .iter()
        .map(|&r| exact_moment(&params, r, mode).map(|m| (r, m)))
        .collect::<Result<Vec<_>, _>>()?;
    match a.format {
        None => {
            for (_, m) in &values {
                writeln!(out, "{m}")?;
            }
        }
        Some(Format::Csv) => {
            writeln!(out, "r,moment")?;
            for (r, m) in &values {
                writeln!(out, "{r},{m}")?;
            }
        }
        Some(Format::Json) => {
            let rows: Vec<_> = values
                .iter()
                .map(|(r, m)| json!({"r": r, "moment": m.to_string()}))
                .collect();
            print_json(
                out,
                &json!({
                    "n": params.n(),
                    "alpha": a.model.alpha.to_string(),
                    "theta": a.model.theta.to_string(),
                    "mode": mode_name(mode),
                    "moments": rows,
                }),
            )?;
        }
    }
    Ok(())
}

fn read_points(path: &PathBuf) -> Result<Vec<f64>, Error> {
    let text = fs::read_to_string(path)?;
    let mut xs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(x) => xs.push(x),
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(Error::Parse {
                    what: "evaluation point",
                    input: field.to_string(),
                })
            }
        }
    }
    Ok(xs)
}

fn diversity(a: DiversityArgs, out: &mut impl Write) -> Result<(), Error> {
    let alpha = Number::Exact(a.alpha.clone());
    let mut xs = a.x.clone();
    if let Some(path) = &a.x_file {
        xs.extend(read_points(path)?);
    }
    let bits = a.precision.unwrap_or_else(default_precision_bits);
    let theta = a.theta.clone().map(Number::Exact);
    let mut densities = Vec::with_capacity(xs.len());
    match &theta {
        Some(t) => {
            let density = DiversityDensity::new(&alpha, t)?;
            for &x in &xs {
                densities.push((x, density.eval_f64(x, a.tol, a.max_terms)?));
            }
        }
        None => {
            let series = GAlphaSeries::new(&alpha)?;
            for &x in &xs {
                densities.push((x, series.eval_f64(x, a.tol, a.max_terms)?));
            }
        }
    }
    let mut moments = Vec::new();
    if !a.moment.is_empty() {
        let t = theta.as_ref().ok_or_else(|| Error::Parse {
            what: "moment request without --theta",
            input: String::new(),
        })?;
        for &r in &a.moment {
            moments.push((r, diversity_moment(&alpha, t, r, bits)?));
        }
    }
    match a.format {
        Format::Csv => {
            if !densities.is_empty() {
                writeln!(out, "x,density")?;
                for (x, d) in &densities {
                    writeln!(out, "{},{}", format_f64(*x), format_f64(*d))?;
                }
            }
            if !moments.is_empty() {
                writeln!(out, "r,moment")?;
                for (r, m) in &moments {
                    writeln!(out, "{r},{m}")?;
                }
            }
        }
        Format::Json => {
            let d: Vec<_> = densities
                .iter()
                .map(|(x, v)| json!({"x": x, "density": v}))
                .collect();
            let m: Vec<_> = moments
                .iter()
                .map(|(r, v)| json!({"r": r, "moment": v.to_string()}))
                .collect();
            print_json(
                out,
                &json!({
                    "alpha": a.alpha.to_string(),
                    "theta": a.theta.as_ref().map(|t| t.to_string()),
                    "density": d,
                    "moments": m,
                }),
            )?;
        }
    }
    Ok(())
}

fn approx(a: ApproxArgs, out: &mut impl Write) -> Result<(), Error> {
    let params = a.model.params()?;
    let mode = Mode::approx(a.precision.unwrap_or_else(default_precision_bits));
    let mut rows = Vec::new();
    for &r in &a.r {
        let report = moment_report(&params, r, mode)?;
        for ap in &report.approximations {
            rows.push((r, report.exact.to_string(), ap.clone()));
        }
    }
    match a.format {
        Format::Csv => {
            writeln!(out, "r,label,scaling,exact_moment,normalized,approx,residual")?;
            for (r, exact, ap) in &rows {
                writeln!(
                    out,
                    "{r},{},{},{exact},{},{},{}",
                    ap.label.as_str(),
                    ap.scaling.label(),
                    ap.normalized,
                    ap.approx,
                    ap.residual
                )?;
            }
        }
        Format::Json => {
            let items: Vec<_> = rows
                .iter()
                .map(|(r, exact, ap)| {
                    json!({
                        "r": r,
                        "label": ap.label.as_str(),
                        "scaling": ap.scaling.label(),
                        "exact_moment": exact,
                        "normalized": ap.normalized.to_string(),
                        "approx": ap.approx.to_string(),
                        "residual": ap.residual.to_string(),
                    })
                })
                .collect();
            print_json(out, &json!({"n": params.n(), "approximations": items}))?;
        }
    }
    Ok(())
}

fn sample(a: SampleArgs, out: &mut impl Write) -> Result<(), Error> {
    let params = a.model.params()?;
    if a.streams == 0 || a.streams > a.replicates.max(1) {
        return Err(Error::Parse {
            what: "stream count (1 to replicates)",
            input: a.streams.to_string(),
        });
    }
    if a.r == 0 {
        return Err(Error::Parse {
            what: "moment order (at least 1)",
            input: "0".into(),
        });
    }
    let root = SeedSpec::new(a.seed, a.stream);
    let (base, extra) = (a.replicates / a.streams, a.replicates % a.streams);
    let mut draws = Vec::with_capacity(a.replicates as usize);
    for j in 0..a.streams {
        let mut rng = root.child(j).rng();
        let len = base + u64::from(j < extra);
        draws.extend((0..len).map(|_| sample_k_with(&params, &mut rng)));
    }
    match a.format {
        Format::Csv => {
            writeln!(out, "replicate,K")?;
            for (i, k) in draws.iter().enumerate() {
                writeln!(out, "{},{k}", i + 1)?;
            }
        }
        Format::Json => {
            let mut acc = RunningStats::default();
            for &k in &draws {
                acc.push((k as f64).powi(a.r as i32));
            }
            let stats = acc.finish(a.r)?;
            print_json(
                out,
                &json!({
                    "n": params.n(),
                    "alpha": a.model.alpha.to_string(),
                    "theta": a.model.theta.to_string(),
                    "seed": a.seed,
                    "stream": a.stream,
                    "streams": a.streams,
                    "stats": stats,
                }),
            )?;
        }
    }
    Ok(())
}

fn study_config(a: &StudyArgs) -> Result<StudyConfig, Error> {
    if let Some(path) = &a.config {
        let mut cfg = StudyConfig::from_json(&fs::read_to_string(path)?)?;
        if a.output.is_some() {
            cfg.output_path = a.output.clone();
        }
        return Ok(cfg);
    }
    let missing = |what: &'static str| Error::Parse {
        what,
        input: String::new(),
    };
    let kind = a.name.ok_or_else(|| missing("--name (or --config)"))?;
    let alpha = a.alpha.clone().ok_or_else(|| missing("--alpha"))?;
    let grid = a.grid.clone().ok_or_else(|| missing("--grid"))?;
    let path = match (&a.theta, &a.beta) {
        (Some(_), Some(_)) => {
            return Err(Error::Parse {
                what: "path (give --theta or --beta, not both)",
                input: String::new(),
            })
        }
        (_, Some(beta)) => PathSpec::joint(beta.clone(), a.cr),
        (Some(theta), None) => PathSpec {
            cr: a.cr,
            ..PathSpec::fixed(theta.clone())
        },
        (None, None) => PathSpec {
            theta: None,
            ..PathSpec::joint(ExactScalar::from(0), a.cr)
        },
    };
    let mut cfg = StudyConfig::new(kind, alpha, path, grid);
    if !a.r.is_empty() {
        cfg.r_values = a.r.clone();
    }
    if let Some(v) = a.tail {
        cfg.tail = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = a.precision {
        cfg.precision_bits = v;
    }
    cfg.tol = a.tol;
    cfg.output_path = a.output.clone();
    Ok(cfg)
}

fn study(a: StudyArgs, out: &mut impl Write) -> Result<(), Error> {
    let cfg = study_config(&a)?;
    let result = run_study(&cfg)?;
    match a.format {
        Format::Csv => write_csv(&result, &mut *out)?,
        Format::Json => write!(out, "{}", result_json(&result))?,
    }
    Ok(())
}

/// Exits with 2 when any check fails.
fn verify(a: VerifyArgs, out: &mut impl Write) -> Result<ExitCode, Error> {
    let mut cfg = default_verify_config();
    cfg.grid = a.grid;
    let result = run_study(&cfg)?;
    match a.format {
        Format::Csv => {
            writeln!(out, "check,pass")?;
            for (name, ok) in &result.pass_flags {
                writeln!(out, "{name},{ok}")?;
            }
        }
        Format::Json => write!(out, "{}", result_json(&result))?,
    }
    if result.all_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: verification found a mismatch");
        Ok(ExitCode::from(2))
    }
}

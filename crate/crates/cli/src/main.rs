use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use weakbell::closedform::{self, Fig2Point, Fig3Point};
use weakbell::estimator::{self, corr_est, corr_est_strong, theorem1_trial, LgForm};
use weakbell::lhv::{self, HiddenStrategy, DEFAULT_Z_REJECT};
use weakbell::schedule::{self, cycle_rng, Pair, RecordSet};
use weakbell::StateVector;

mod grid;

use grid::{parse_count, Grid};

#[derive(Parser, Debug)]
#[command(name = "weakbell", version, about = "Sequential weak-measurement Bell and Leggett-Garg simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Sequential CHSH ensemble on the EPR state.
    Chsh(ChshArgs),
    /// Closed-form curve tables (B_S and N_3 versus sigma, or versus prior sequences).
    Curve(CurveArgs),
    /// Local-hidden-variable adversary runs.
    Lhv(LhvArgs),
    /// Leggett-Garg correlators from one weakly measured qubit.
    Lg(LgArgs),
    /// Random checks of weak-limit sequential correlations against Re<O_i O_j>.
    Theorem1(Theorem1Args),
}

#[derive(Args, Debug, Serialize)]
struct ChshArgs {
    /// Pointer spread sigma (> 0).
    #[arg(long)]
    sigma: f64,
    /// Number of cycles (accepts 1e6 style).
    #[arg(long, value_parser = parse_count)]
    ensemble: u64,
    /// Complete CHSH sequences measured before the scored one.
    #[arg(long, default_value_t = 0)]
    n_prior: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Append one randomly chosen strong measurement per party and run the certificate test.
    #[arg(long)]
    certify: bool,
    #[arg(long, default_value_t = DEFAULT_Z_REJECT)]
    z_reject: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
struct CurveArgs {
    /// 2: rows over sigma; 3: rows over the number of prior sequences n.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    figure: u8,
    /// `start:stop:step` or a comma-separated list. Defaults to 1:6:0.01 for
    /// figure 2 and 1:100:1 for figure 3.
    #[arg(long)]
    grid: Option<String>,
    /// Significance level in standard errors.
    #[arg(long, default_value_t = 3.0)]
    z: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum Model {
    Additive,
    Malicious,
}

#[derive(Args, Debug, Serialize)]
struct LhvArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Noise-correlation strength of the malicious model.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Noise spread of the additive model.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, value_parser = parse_count)]
    ensemble: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run the certificate test on the strong readings.
    #[arg(long)]
    certify: bool,
    #[arg(long, default_value_t = DEFAULT_Z_REJECT)]
    z_reject: f64,
}

#[derive(Args, Debug, Serialize)]
struct LgArgs {
    /// Comma-separated measurement angles in degrees, in time order (at least 3).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    angles: Vec<f64>,
    #[arg(long)]
    sigma: f64,
    #[arg(long, value_parser = parse_count)]
    ensemble: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct Theorem1Args {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 20)]
    trials: u64,
    /// Cycles per trial.
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    ensemble: u64,
}

enum Failure {
    Invalid(String),
    Internal(String),
    Unwritable(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Internal(_) => 3,
            Failure::Unwritable(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Internal(m) | Failure::Unwritable(m) => m,
        }
    }
}

impl From<weakbell::Error> for Failure {
    fn from(e: weakbell::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn require(ok: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Invalid(msg()))
    }
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    require(v.is_finite() && v > 0.0, || format!("--{name} must be positive and finite, got {v}"))
}

fn non_negative(name: &str, v: f64) -> CliResult<()> {
    require(v.is_finite() && v >= 0.0, || format!("--{name} must be non-negative and finite, got {v}"))
}

fn ensemble_size(n: u64) -> CliResult<usize> {
    require(n >= 1, || "--ensemble must be at least 1".into())?;
    usize::try_from(n).map_err(|_| Failure::Invalid(format!("--ensemble {n} is too large")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Chsh(a) => cmd_chsh(a),
        Command::Curve(a) => cmd_curve(a, &cli.command),
        Command::Lhv(a) => cmd_lhv(a),
        Command::Lg(a) => cmd_lg(a),
        Command::Theorem1(a) => cmd_theorem1(a),
    };
    match result.and_then(emit) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn emit(text: String) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Unwritable(format!("stdout: {e}")))
}

fn pair_line(out: &mut String, kind: &str, e: &estimator::CorrelationEstimate, expected: Option<f64>) {
    let _ = write!(out, "{kind} {}: mean={} se={} n={}", e.pair, e.mean, e.se, e.n_used);
    if let Some(x) = expected {
        let _ = write!(out, " closed_form={x}");
    }
    out.push('\n');
}

fn bs_lines(out: &mut String, records: &RecordSet) -> CliResult<()> {
    let bs = estimator::bs_est(records)?;
    let _ = writeln!(out, "bs_hat: {}", bs.bs_hat);
    let _ = writeln!(out, "bs_signed: {}", bs.signed);
    let _ = writeln!(out, "se: {}", bs.se);
    let _ = writeln!(out, "sample_var: {}", bs.sample_var);
    match bs.z() {
        Ok(z) => {
            let _ = writeln!(out, "z: {z}");
        }
        Err(_) => out.push_str("z: undefined (zero standard error)\n"),
    }
    Ok(())
}

fn certificate_lines(out: &mut String, records: &RecordSet, z_reject: f64) -> CliResult<()> {
    for p in Pair::CHSH {
        pair_line(out, "strong", &corr_est_strong(records, p)?, None);
    }
    let report = lhv::certify(records, z_reject)?;
    for (p, z) in &report.z {
        let _ = writeln!(out, "certificate_z {p}: {z}");
    }
    let _ = writeln!(out, "strong_chsh: {}", report.strong_chsh);
    let _ = writeln!(out, "strong_se: {}", report.strong_se);
    let _ = writeln!(out, "strong_within_lhv_bound: {}", report.strong_within_bound);
    let _ = writeln!(out, "verdict: {}", report.verdict);
    Ok(())
}

fn cmd_chsh(a: &ChshArgs) -> CliResult<String> {
    positive("sigma", a.sigma)?;
    positive("z-reject", a.z_reject)?;
    let n = ensemble_size(a.ensemble)?;
    require(!(a.certify && a.n_prior > 0), || "--certify is only defined for --n-prior 0".into())?;
    let plan = if a.certify {
        schedule::certified_plan(a.sigma)?
    } else {
        schedule::chsh_sequential_plan(a.sigma, a.n_prior as usize)?
    };
    let records = schedule::run_ensemble(&plan, n, a.seed)?;

    let mut out = String::new();
    let _ = writeln!(out, "command: chsh");
    let _ = writeln!(out, "sigma: {}", a.sigma);
    let _ = writeln!(out, "ensemble: {n}");
    let _ = writeln!(out, "n_prior: {}", a.n_prior);
    let _ = writeln!(out, "seed: {}", a.seed);
    let _ = writeln!(out, "closed_form_bs: {}", closedform::bs_n(a.n_prior, a.sigma)?);
    let _ = writeln!(out, "closed_form_var: {}", closedform::var_bs_n(a.n_prior, a.sigma)?);
    bs_lines(&mut out, &records)?;
    let y2n = closedform::damping(a.sigma).powi(2 * a.n_prior as i32);
    let expected = closedform::signed_correlations(a.sigma)?;
    for (k, p) in Pair::CHSH.into_iter().enumerate() {
        pair_line(&mut out, "weak", &corr_est(&records, p)?, Some(y2n * expected[k]));
    }
    if a.certify {
        certificate_lines(&mut out, &records, a.z_reject)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct Meta<'a> {
    seed: Option<u64>,
    version: &'static str,
    config_hash: String,
    command: &'a Command,
}

#[derive(Serialize)]
struct JsonTable<'a, T> {
    rows: &'a [T],
    meta: Meta<'a>,
}

fn config_hash(command: &Command) -> String {
    let canonical = serde_json::to_string(command).expect("config serializes");
    Sha256::digest(canonical.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fig2_csv(rows: &[Fig2Point]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| vec![r.sigma.to_string(), r.bs.to_string(), r.var_bs.to_string(), opt(r.n3)])
        .collect()
}

fn fig3_csv(rows: &[Fig3Point]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.sigma_min.to_string(),
                r.sigma3.to_string(),
                r.n3.to_string(),
                r.bs_at_sigma3.to_string(),
            ]
        })
        .collect()
}

fn write_csv(header: &[&str], rows: Vec<Vec<String>>) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let internal = |e: csv::Error| Failure::Internal(e.to_string());
    w.write_record(header).map_err(internal)?;
    for r in rows {
        w.write_record(&r).map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Internal(e.to_string()))
}

fn table_json<T: Serialize>(rows: &[T], command: &Command) -> CliResult<String> {
    let doc = JsonTable {
        rows,
        meta: Meta { seed: None, version: env!("CARGO_PKG_VERSION"), config_hash: config_hash(command), command },
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn cmd_curve(a: &CurveArgs, command: &Command) -> CliResult<String> {
    positive("z", a.z)?;
    let text = match a.figure {
        2 => {
            let grid = Grid::parse(a.grid.as_deref().unwrap_or("1:6:0.01")).map_err(Failure::Invalid)?;
            let sigmas = grid.values();
            require(sigmas.iter().all(|s| s.is_finite() && *s > 0.0), || "sigma grid values must be positive".into())?;
            let rows = closedform::fig2_table(&sigmas, a.z)?;
            match a.format {
                Format::Csv => write_csv(&["sigma", "bs", "var_bs", "n3"], fig2_csv(&rows))?,
                Format::Json => table_json(&rows, command)?,
            }
        }
        _ => {
            let grid = Grid::parse(a.grid.as_deref().unwrap_or("1:100:1")).map_err(Failure::Invalid)?;
            let ns = grid.integers().map_err(Failure::Invalid)?;
            let rows = closedform::fig3_table(&ns, a.z)?;
            match a.format {
                Format::Csv => write_csv(&["n", "sigma_min", "sigma3", "n3", "bs_at_sigma3"], fig3_csv(&rows))?,
                Format::Json => table_json(&rows, command)?,
            }
        }
    };
    match &a.out {
        None => Ok(text),
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::Unwritable(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
    }
}

fn cmd_lhv(a: &LhvArgs) -> CliResult<String> {
    let n = ensemble_size(a.ensemble)?;
    positive("z-reject", a.z_reject)?;
    let mut out = String::new();
    let _ = writeln!(out, "command: lhv");
    let records = match a.model {
        Model::Additive => {
            non_negative("sigma", a.sigma)?;
            let strategy = HiddenStrategy::random(&mut cycle_rng(a.seed, u64::MAX));
            let e = strategy.correlations();
            let _ = writeln!(out, "model: additive");
            let _ = writeln!(out, "sigma: {}", a.sigma);
            let _ = writeln!(out, "hidden_correlations: {} {} {} {}", e[0], e[1], e[2], e[3]);
            let _ = writeln!(out, "hidden_chsh: {}", e[0] + e[1] + e[2] - e[3]);
            lhv::run_additive_lhv(&strategy, a.sigma, n, a.seed)?
        }
        Model::Malicious => {
            non_negative("c", a.c)?;
            let _ = writeln!(out, "model: malicious");
            let _ = writeln!(out, "c: {}", a.c);
            let _ = writeln!(out, "expected_bs: {}", 2.0 + 2.0 * a.c * a.c);
            lhv::run_malicious_lhv(a.c, n, a.seed)?
        }
    };
    let _ = writeln!(out, "ensemble: {n}");
    let _ = writeln!(out, "seed: {}", a.seed);
    bs_lines(&mut out, &records)?;
    for p in Pair::CHSH {
        pair_line(&mut out, "weak", &corr_est(&records, p)?, None);
    }
    if a.certify {
        certificate_lines(&mut out, &records, a.z_reject)?;
    }
    Ok(out)
}

fn cmd_lg(a: &LgArgs) -> CliResult<String> {
    positive("sigma", a.sigma)?;
    let n = ensemble_size(a.ensemble)?;
    require(a.angles.len() >= 3, || format!("--angles needs at least 3 values, got {}", a.angles.len()))?;
    require(a.angles.iter().all(|t| t.is_finite()), || "--angles must be finite".into())?;
    let radians: Vec<f64> = a.angles.iter().map(|d| d.to_radians()).collect();
    let psi0 = StateVector::basis(1, 0)?;
    let plan = schedule::lg_plan(&radians, a.sigma, psi0)?;
    let records = schedule::run_ensemble(&plan, n, a.seed)?;

    let mut out = String::new();
    let _ = writeln!(out, "command: lg");
    let angles: Vec<String> = a.angles.iter().map(|x| x.to_string()).collect();
    let _ = writeln!(out, "angles_deg: {}", angles.join(","));
    let _ = writeln!(out, "sigma: {}", a.sigma);
    let _ = writeln!(out, "ensemble: {n}");
    let _ = writeln!(out, "seed: {}", a.seed);
    let c = |i: usize, j: usize| (radians[i] - radians[j]).cos();
    let mut forms = vec![(LgForm::K3, c(0, 1) + c(1, 2) - c(0, 2))];
    if radians.len() >= 4 {
        forms.push((LgForm::K4, c(0, 1) + c(1, 2) + c(2, 3) - c(0, 3)));
    }
    for (form, predicted) in forms {
        let k = estimator::lg_est(&records, form)?;
        let _ = writeln!(out, "{form:?}: k_hat={} se={} weak_limit={predicted}", k.k_hat, k.se);
    }
    Ok(out)
}

fn cmd_theorem1(a: &Theorem1Args) -> CliResult<String> {
    positive("sigma", a.sigma)?;
    let n = ensemble_size(a.ensemble)?;
    require(a.trials >= 1, || "--trials must be at least 1".into())?;
    let bias = 2.0 / (a.sigma * a.sigma);
    let mut out = String::new();
    let _ = writeln!(out, "command: theorem1");
    let _ = writeln!(out, "sigma: {}", a.sigma);
    let _ = writeln!(out, "ensemble: {n}");
    let _ = writeln!(out, "trials: {}", a.trials);
    let _ = writeln!(out, "seed: {}", a.seed);
    let _ = writeln!(out, "bias_budget: {bias}");
    let mut passed = 0;
    for t in 0..a.trials {
        let trial = theorem1_trial(a.seed, t, a.sigma, n)?;
        let ok = trial.within(bias, 4.0);
        passed += usize::from(ok);
        let worst = trial
            .checks
            .iter()
            .max_by(|x, y| x.deviation().total_cmp(&y.deviation()))
            .expect("checks are non-empty");
        let _ = writeln!(
            out,
            "trial {t}: max_abs_dev={} worst={}*{} se={} within_budget={ok}",
            trial.max_deviation(),
            worst.first,
            worst.second,
            worst.se
        );
    }
    let _ = writeln!(out, "within_budget: {passed}/{}", a.trials);
    Ok(out)
}

//! Command-line front end: argument parsing, coefficient loading and the
//! table writers behind the `quasispec` binary.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::{predict_beta, predict_lambda, predict_rho3, remainder_analysis, AsymptoticConstants};
use crate::coefficients::{CoefficientFile, CoefficientSet, Preset, Primitives, Shape};
use crate::error::{Error, Result};
use crate::integrator::integrate_fundamental;
use crate::spectral::{
    beta_direct, char_fn_tol, count_zeros_with_tol, find_eigenvalues_with, fourth_root, residue_beta,
    weight_numbers_with, ProblemKind, SolverOptions, SpectralDatum, Spectrum,
};

/// Grid used for the named presets.
pub const PRESET_GRID: usize = 1025;

pub const EXIT_OK: i32 = 0;
/// A selfcheck criterion failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Eigenvalues `lambda_1..lambda_nmax`.
    Spectrum,
    /// Eigenvalues with weight numbers.
    Weights,
    /// Asymptotic formulas only.
    Predict,
    /// Numeric against predicted values, with remainder diagnostics.
    Verify,
    /// Zero-coefficient acceptance checks.
    Selfcheck,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "quasispec", version, about = "Spectral data of fourth-order operators with distribution coefficients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Boundary value problem, 1, 2 or 3.
    #[arg(long, global = true)]
    pub problem: Option<usize>,
    /// Coefficient file, or one of the presets zero, const, linear, dirac.
    #[arg(long, global = true, default_value = "zero")]
    pub coeffs: String,
    #[arg(long, global = true, default_value_t = 10)]
    pub nmax: usize,
    /// Relative integration tolerance in (0, 1e-4].
    #[arg(long, global = true, default_value_t = crate::integrator::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// First index entering the remainder statistics of `verify`.
    #[arg(long, global = true, default_value_t = 1)]
    pub from: usize,
}

/// Validated run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: ProblemKind,
    pub nmax: usize,
    pub coeffs: String,
    pub tol: f64,
    pub format: OutputFormat,
    pub from: usize,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let problem = match (cli.problem, cli.command) {
            (Some(k), _) => ProblemKind::new(k)?,
            (None, Command::Selfcheck) => ProblemKind::L3,
            (None, _) => return Err(Error::Input("--problem is required".into())),
        };
        if cli.nmax == 0 {
            return Err(Error::Input("--nmax must be at least 1".into()));
        }
        if !(cli.tol > 0.0 && cli.tol <= 1e-4) {
            return Err(Error::Input(format!("--tol must lie in (0, 1e-4], got {}", cli.tol)));
        }
        if cli.command == Command::Verify {
            if cli.from == 0 || cli.from > cli.nmax {
                return Err(Error::Input("--from must lie in 1..=nmax".into()));
            }
            if cli.nmax + 1 - cli.from < 5 {
                return Err(Error::Input("verify needs at least 5 indices from --from to --nmax".into()));
            }
        }
        Ok(Self {
            command: cli.command,
            problem,
            nmax: cli.nmax,
            coeffs: cli.coeffs.clone(),
            tol: cli.tol,
            format: cli.format,
            from: cli.from,
        })
    }
}

/// Named coefficient triple `(tau2, tau1, r0)`.
pub fn preset(name: &str) -> Option<[Preset; 3]> {
    Some(match name {
        "zero" => [Preset::Zero, Preset::Zero, Preset::Zero],
        "const" => [Preset::Const(1.0), Preset::Const(0.5), Preset::Zero],
        "linear" => [Preset::Linear(1.0, 1.0), Preset::Const(1.0), Preset::Zero],
        "dirac" => [
            Preset::Linear(1.0, 1.0),
            Preset::Const(1.0),
            Preset::Step { x0: 0.5, height: 1.0 },
        ],
        _ => return None,
    })
}

pub const PRESET_NAMES: [&str; 4] = ["zero", "const", "linear", "dirac"];

/// Resolve `--coeffs`: an existing file wins over a preset of the same name.
pub fn load_coefficients(source: &str) -> Result<CoefficientSet> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{source}: {e}")))?;
        return CoefficientFile::parse(&text)?.to_coefficients();
    }
    match preset(source) {
        Some([a, b, c]) => CoefficientSet::from_shapes(PRESET_GRID, &Shape::Preset(a), &Shape::Preset(b), &Shape::Preset(c)),
        None => Err(Error::Input(format!(
            "--coeffs {source:?} is neither a file nor one of {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::Domain { .. } => EXIT_INPUT,
        _ => EXIT_NONCONVERGENCE,
    }
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    n: usize,
    k: usize,
    re_lambda: f64,
    im_lambda: f64,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct WeightRow {
    n: usize,
    k: usize,
    re_lambda: f64,
    im_lambda: f64,
    residual: f64,
    re_beta: f64,
    im_beta: f64,
    method: String,
}

#[derive(Debug, Serialize)]
struct PredictRow {
    n: usize,
    k: usize,
    re_lambda: f64,
    im_lambda: f64,
    re_beta: f64,
    im_beta: f64,
}

#[derive(Debug, Serialize)]
struct VerifyRow {
    n: usize,
    k: usize,
    re_lambda: f64,
    im_lambda: f64,
    re_lambda_pred: f64,
    im_lambda_pred: f64,
    re_kappa: f64,
    im_kappa: f64,
    abs_kappa: f64,
    re_beta: f64,
    im_beta: f64,
    re_beta_pred: f64,
    im_beta_pred: f64,
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    from: usize,
    first_half: f64,
    second_half: f64,
    tail_max: f64,
    l2_consistent: bool,
}

/// One selfcheck line.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Output of one run: the document to write, the exit code and messages
/// for standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output: String,
    pub code: i32,
    pub messages: Vec<String>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[derive(Serialize)]
struct Document<'a, T: Serialize, S: Serialize> {
    command: Command,
    problem: usize,
    coeffs: &'a str,
    nmax: usize,
    tol: f64,
    rows: &'a [T],
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<S>,
    failures: Vec<usize>,
}

fn render<T: Serialize, S: Serialize>(
    cfg: &RunConfig,
    rows: &[T],
    header: &[&str],
    summary: Option<S>,
    failures: &[usize],
) -> String {
    match cfg.format {
        OutputFormat::Json => to_json(&Document {
            command: cfg.command,
            problem: cfg.problem.index(),
            coeffs: &cfg.coeffs,
            nmax: cfg.nmax,
            tol: cfg.tol,
            rows,
            summary,
            failures: failures.to_vec(),
        }),
        OutputFormat::Csv => {
            let mut out = to_csv(rows, header);
            if let Some(s) = summary {
                if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(&s) {
                    for (k, v) in map {
                        let _ = writeln!(out, "# {k}={v}");
                    }
                }
            }
            out
        }
    }
}

fn failure_messages(s: &Spectrum) -> (Vec<usize>, Vec<String>) {
    let idx = s.failures.iter().map(|f| f.n).collect();
    let msgs = s.failures.iter().map(|f| format!("n={}: {}", f.n, f.error)).collect();
    (idx, msgs)
}

fn options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        tol: cfg.tol,
        ..SolverOptions::default()
    }
}

/// Merge two partial spectra into one failure list, sorted by index.
fn merge_failures(a: &Spectrum, b: &Spectrum) -> (Vec<usize>, Vec<String>) {
    let (mut idx, mut msgs) = failure_messages(a);
    let (i2, m2) = failure_messages(b);
    idx.extend(i2);
    msgs.extend(m2);
    let mut pairs: Vec<(usize, String)> = idx.into_iter().zip(msgs).collect();
    pairs.sort_by_key(|p| p.0);
    pairs.into_iter().unzip()
}

/// Execute a validated configuration.
pub fn run(cfg: &RunConfig) -> Outcome {
    match run_inner(cfg) {
        Ok(o) => o,
        Err(e) => Outcome {
            output: String::new(),
            code: exit_code(&e),
            messages: vec![e.to_string()],
        },
    }
}

fn run_inner(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.command == Command::Selfcheck {
        let checks = selfcheck(cfg.tol);
        let pass = checks.iter().all(|c| c.pass);
        let output = match cfg.format {
            OutputFormat::Json => to_json(&checks),
            OutputFormat::Csv => to_csv(&checks, &["name", "pass", "detail"]),
        };
        let messages = checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect();
        return Ok(Outcome {
            output,
            code: if pass { EXIT_OK } else { EXIT_CHECK_FAILED },
            messages,
        });
    }

    let cs = load_coefficients(&cfg.coeffs)?;
    let p = Primitives::new(&cs)?;
    let k = cfg.problem;
    let ac = AsymptoticConstants::from_primitives(&p);
    let opts = options(cfg);
    let code_for = |failures: &[usize]| if failures.is_empty() { EXIT_OK } else { EXIT_NONCONVERGENCE };

    match cfg.command {
        Command::Spectrum => {
            let s = find_eigenvalues_with(&p, k, cfg.nmax, &opts)?;
            let rows: Vec<SpectrumRow> = s.data.iter().map(spectrum_row).collect();
            let (failures, messages) = failure_messages(&s);
            Ok(Outcome {
                output: render::<_, ()>(cfg, &rows, &["n", "k", "re_lambda", "im_lambda", "residual"], None, &failures),
                code: code_for(&failures),
                messages,
            })
        }
        Command::Weights => {
            let s = find_eigenvalues_with(&p, k, cfg.nmax, &opts)?;
            let w = weight_numbers_with(&p, k, &s.data, &opts)?;
            let rows: Vec<WeightRow> = w.data.iter().map(weight_row).collect();
            let (failures, messages) = merge_failures(&s, &w);
            let header = ["n", "k", "re_lambda", "im_lambda", "residual", "re_beta", "im_beta", "method"];
            Ok(Outcome {
                output: render::<_, ()>(cfg, &rows, &header, None, &failures),
                code: code_for(&failures),
                messages,
            })
        }
        Command::Predict => {
            let rows: Vec<PredictRow> = (1..=cfg.nmax)
                .map(|n| {
                    let lam = predict_lambda(k, n, &ac);
                    let beta = predict_beta(k, n, lam, &ac);
                    PredictRow {
                        n,
                        k: k.index(),
                        re_lambda: z(lam.re),
                        im_lambda: z(lam.im),
                        re_beta: z(beta.re),
                        im_beta: z(beta.im),
                    }
                })
                .collect();
            let header = ["n", "k", "re_lambda", "im_lambda", "re_beta", "im_beta"];
            Ok(Outcome {
                output: render::<_, ()>(cfg, &rows, &header, None, &[]),
                code: EXIT_OK,
                messages: Vec::new(),
            })
        }
        Command::Verify => {
            let s = find_eigenvalues_with(&p, k, cfg.nmax, &opts)?;
            let w = weight_numbers_with(&p, k, &s.data, &opts)?;
            let (failures, messages) = merge_failures(&s, &w);
            if !failures.is_empty() {
                return Ok(Outcome {
                    output: String::new(),
                    code: EXIT_NONCONVERGENCE,
                    messages,
                });
            }
            let used: Vec<&SpectralDatum> = w.data.iter().filter(|d| d.n >= cfg.from).collect();
            let numeric: Vec<Complex64> = used.iter().map(|d| d.lambda).collect();
            let predicted: Vec<Complex64> = used.iter().map(|d| predict_lambda(k, d.n, &ac)).collect();
            let report = remainder_analysis(cfg.from, &numeric, &predicted, 1)?;
            let rows: Vec<VerifyRow> = used
                .iter()
                .zip(&predicted)
                .zip(&report.kappa_hat)
                .map(|((d, pl), kap)| {
                    let beta = d.beta.unwrap_or_default();
                    let bp = predict_beta(k, d.n, d.lambda, &ac);
                    VerifyRow {
                        n: d.n,
                        k: k.index(),
                        re_lambda: z(d.lambda.re),
                        im_lambda: z(d.lambda.im),
                        re_lambda_pred: z(pl.re),
                        im_lambda_pred: z(pl.im),
                        re_kappa: z(kap.re),
                        im_kappa: z(kap.im),
                        abs_kappa: kap.norm(),
                        re_beta: z(beta.re),
                        im_beta: z(beta.im),
                        re_beta_pred: z(bp.re),
                        im_beta_pred: z(bp.im),
                    }
                })
                .collect();
            let summary = VerifySummary {
                from: cfg.from,
                first_half: report.first_half,
                second_half: report.second_half,
                tail_max: report.tail_max,
                l2_consistent: report.l2_consistent,
            };
            let header = [
                "n",
                "k",
                "re_lambda",
                "im_lambda",
                "re_lambda_pred",
                "im_lambda_pred",
                "re_kappa",
                "im_kappa",
                "abs_kappa",
                "re_beta",
                "im_beta",
                "re_beta_pred",
                "im_beta_pred",
            ];
            Ok(Outcome {
                output: render(cfg, &rows, &header, Some(summary), &[]),
                code: EXIT_OK,
                messages: Vec::new(),
            })
        }
        Command::Selfcheck => unreachable!("handled above"),
    }
}

/// Drops the sign of negative zero.
fn z(x: f64) -> f64 {
    x + 0.0
}

fn spectrum_row(d: &SpectralDatum) -> SpectrumRow {
    SpectrumRow {
        n: d.n,
        k: d.k.index(),
        re_lambda: z(d.lambda.re),
        im_lambda: z(d.lambda.im),
        residual: d.residual,
    }
}

fn weight_row(d: &SpectralDatum) -> WeightRow {
    let beta = d.beta.unwrap_or_default();
    WeightRow {
        n: d.n,
        k: d.k.index(),
        re_lambda: z(d.lambda.re),
        im_lambda: z(d.lambda.im),
        residual: d.residual,
        re_beta: z(beta.re),
        im_beta: z(beta.im),
        method: d.method.to_string(),
    }
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((pass, detail)) => CheckResult {
            name: name.into(),
            pass,
            detail,
        },
        Err(e) => CheckResult {
            name: name.into(),
            pass: false,
            detail: e.to_string(),
        },
    }
}

/// Smallest positive root of `cos r cosh r = 1` by bisection.
fn clamped_beam_root() -> f64 {
    let g = |r: f64| r.cos() * r.cosh() - 1.0;
    let (mut a, mut b) = (4.0, 5.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(a) * g(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Acceptance checks that need only the zero coefficient set.
pub fn selfcheck(tol: f64) -> Vec<CheckResult> {
    let zero = match CoefficientSet::zero(PRESET_GRID).and_then(|c| Primitives::new(&c)) {
        Ok(p) => p,
        Err(e) => {
            return vec![CheckResult {
                name: "setup".into(),
                pass: false,
                detail: e.to_string(),
            }]
        }
    };
    let p = &zero;
    let ac = AsymptoticConstants::zero();
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    let mut out = Vec::new();

    out.push(check("localization", || {
        let t = Instant::now();
        let s = find_eigenvalues_with(p, ProblemKind::L3, 20, &opts)?;
        let secs = t.elapsed().as_secs_f64();
        let data = s.into_result()?;
        let worst = data
            .iter()
            .map(|d| (d.rho - predict_rho3(d.n, &ac)).norm())
            .fold(0.0, f64::max);
        Ok((
            worst < 0.1 && secs < 60.0 && data.len() == 20,
            format!("max |rho_n - rho_n*| = {worst:.3e} over n = 1..20 in {secs:.2} s"),
        ))
    }));

    out.push(check("exact-values", || {
        let d0 = char_fn_tol(p, ProblemKind::L3, Complex64::new(0.0, 0.0), tol)?.unscaled();
        let d2 = char_fn_tol(p, ProblemKind::L3, Complex64::new(16.0, 0.0), tol)?.unscaled();
        let e0 = (d0 - 1.0 / 6.0).norm();
        let e2 = (d2 - (2f64.sinh() - 2f64.sin()) / 16.0).norm();
        Ok((e0 <= 1e-9 && e2 <= 1e-8, format!("errors {e0:.2e} at 0, {e2:.2e} at 16")))
    }));

    out.push(check("clamped-beam", || {
        let s = find_eigenvalues_with(p, ProblemKind::L2, 1, &opts)?;
        let rho = fourth_root(s.into_result()?[0].lambda).re;
        let want = clamped_beam_root();
        let rel = (rho - want).abs() / want;
        Ok((rel <= 1e-8, format!("rho_1 = {rho:.12}, bisection {want:.12}, rel {rel:.2e}")))
    }));

    out.push(check("liouville", || {
        let mut worst = 0.0f64;
        for i in 0..50 {
            let mag = if i == 0 { 0.0 } else { 10f64.powf(6.0 * i as f64 / 49.0) };
            let lam = Complex64::from_polar(mag, 2.399963 * i as f64);
            worst = worst.max(integrate_fundamental(p, lam, tol)?.liouville_defect().abs());
        }
        Ok((worst <= 1e-7, format!("max defect {worst:.2e} over 50 points")))
    }));

    out.push(check("weights", || {
        let mut worst = 0.0f64;
        for k in ProblemKind::ALL {
            let s = find_eigenvalues_with(p, k, 30, &opts)?;
            let w = weight_numbers_with(p, k, &s.into_result()?, &opts)?.into_result()?;
            for d in w.iter().filter(|d| d.n >= 5) {
                let b = d.beta.unwrap_or_default();
                worst = worst.max((b / (-4.0 * d.lambda) - 1.0).norm() * (d.n * d.n) as f64);
            }
        }
        let s = find_eigenvalues_with(p, ProblemKind::L3, 2, &opts)?.into_result()?;
        let lam = s[0].lambda;
        let direct = beta_direct(p, ProblemKind::L3, lam, tol)?;
        let radius = 0.5 * (s[1].lambda - lam).norm();
        let residue = residue_beta(p, ProblemKind::L3, lam, radius, tol)?;
        let rel = (direct - residue).norm() / direct.norm();
        Ok((
            worst <= 5.0 && rel <= 1e-7,
            format!("max n^2 |beta/(-4 lambda) - 1| = {worst:.3e}; direct vs residue {rel:.2e}"),
        ))
    }));

    out.push(check("completeness", || {
        let mut counts = Vec::new();
        for k in ProblemKind::ALL {
            let r = 0.5 * (predict_lambda(k, 10, &ac).norm().sqrt().sqrt() + predict_lambda(k, 11, &ac).norm().sqrt().sqrt());
            counts.push(count_zeros_with_tol(p, k, Complex64::new(0.0, 0.0), r.powi(4), 256, tol)?);
        }
        Ok((counts.iter().all(|&c| c == 10), format!("counts {counts:?}")))
    }));

    out
}

/// Parse `args`, run, write the result and report the exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    let cfg = match RunConfig::from_cli(&cli) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    let outcome = run(&cfg);
    for m in &outcome.messages {
        let _ = writeln!(stderr, "{m}");
    }
    if outcome.code == EXIT_NONCONVERGENCE {
        let _ = writeln!(stderr, "error: numerical non-convergence");
    }
    if !outcome.output.is_empty() {
        let written = match &cli.out {
            Some(path) => std::fs::write(path, &outcome.output).map_err(|e| format!("{}: {e}", path.display())),
            None => stdout.write_all(outcome.output.as_bytes()).map_err(|e| e.to_string()),
        };
        if let Err(e) = written {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INPUT;
        }
    }
    outcome.code
}

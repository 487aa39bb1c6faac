use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qcomb::causal::{self, Axis, Family, GammaAxis, Grid};
use qcomb::format::{fmt12, to_json};
use qcomb::majorization::{lub, ProbVector};
use qcomb::measurement::{cc_indicator, dc_indicator};
use qcomb::roulette::{uncertainty_bound, verify_relation};
use qcomb::spec::{FragmentSpec, LoadedFragment, TesterSpec};
use qcomb::{Error, Matrix, Tester};

const EXIT_FAIL: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "qcomb", version, about = "Quantum comb validation, uncertainty bounds and causal inference")]
struct Cli {
    /// Worker threads (COMB_THREADS overrides)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Recorded for reproducibility; no command currently draws random numbers
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the result here instead of stdout
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a fragment is a valid comb and print per-condition residuals
    Validate {
        fragment: PathBuf,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Majorization and entropic bounds for a set of testers
    Bound(BoundArgs),
    /// Joint causal uncertainty over a parameter grid, as CSV
    Scan(ScanArgs),
    /// Classify a fragment (or a pair of entropies) as common/direct cause
    Infer(InferArgs),
    /// Least upper bound of probability vectors read from a JSON list
    Lub { vectors: PathBuf },
}

#[derive(Args)]
struct BoundArgs {
    /// Tester spec files
    testers: Vec<PathBuf>,
    /// Built-in tester set; `cc_dc_qubit` is the pair of qubit causal indicators
    #[arg(long)]
    preset: Option<String>,
    /// Also check the relation on this fragment
    #[arg(long)]
    check: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// `ab` (U(α,β)) or `abg` (U(α,β,γ))
    #[arg(long)]
    family: String,
    /// Points per ranged axis
    #[arg(long, default_value_t = 41)]
    n: usize,
    /// A fixed value or a `lo:hi` range; defaults to [−π, π]
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// As for alpha, or `beta` to tie γ to β (the default for abg)
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
}

#[derive(Args)]
struct InferArgs {
    fragment: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["H_CC", "H_DC"], allow_hyphen_values = true, conflicts_with = "fragment")]
    entropies: Option<Vec<f64>>,
    /// Dimension of the causal map when only entropies are given
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Declare the system–environment state maximally entangled
    #[arg(long)]
    max_entangled_init: bool,
    /// Search the indicator unitaries for a zero-entropy witness
    #[arg(long)]
    search: bool,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Semantic(String),
}

impl Failure {
    /// Bad or unreadable input exits 3; everything else the library rejects exits 2.
    fn from_lib(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) => Failure::Input(e.to_string()),
            _ => Failure::Semantic(e.to_string()),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_fragment(path: &Path) -> Result<LoadedFragment, Failure> {
    let text = read(path)?;
    let spec = FragmentSpec::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    spec.build().map_err(Failure::from_lib)
}

fn load_tester(path: &Path) -> Result<Tester, Failure> {
    let text = read(path)?;
    let spec = TesterSpec::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    spec.build().map_err(Failure::from_lib)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Input(e.to_string())),
    }
}

fn emit_json(out: &Option<PathBuf>, text: serde_json::Result<String>) -> Result<(), Failure> {
    emit(out, &text.map_err(|e| Failure::Semantic(e.to_string()))?)
}

fn cmd_validate(cli: &Cli, path: &Path, tol: f64) -> CmdResult {
    let loaded = load_fragment(path)?;
    let report = loaded.fragment.validate(tol);
    let mut text = String::new();
    for c in &report.checks {
        let verdict = if c.passed { "ok" } else { "FAIL" };
        text.push_str(&format!("{:<16} {:<32} {verdict}\n", c.name, fmt12(c.residual)));
    }
    text.push_str(&format!("tol {} — {}\n", fmt12(tol), if report.passed() { "valid" } else { "INVALID" }));
    emit(&cli.output, &text)?;
    Ok(if report.passed() { 0 } else { EXIT_FAIL })
}

fn cmd_bound(cli: &Cli, args: &BoundArgs) -> CmdResult {
    let mut ms: Vec<Tester> = vec![];
    match args.preset.as_deref() {
        None => {}
        Some("cc_dc_qubit") => {
            let id = Matrix::identity(2);
            ms.push(cc_indicator(&id, &id).map_err(Failure::from_lib)?);
            ms.push(dc_indicator(&id, &id).map_err(Failure::from_lib)?);
        }
        Some(other) => return Err(Failure::Input(format!("unknown preset `{other}`"))),
    }
    for p in &args.testers {
        ms.push(load_tester(p)?);
    }
    if ms.is_empty() {
        return Err(Failure::Input("give tester files or --preset".into()));
    }
    let shape = ms[0].shape().clone();
    let report = uncertainty_bound(&ms, &shape).map_err(Failure::from_lib)?;
    match &args.check {
        None => {
            emit_json(&cli.output, to_json(&report))?;
            Ok(0)
        }
        Some(path) => {
            let loaded = load_fragment(path)?;
            let check = verify_relation(&loaded.fragment, &report);
            let passed = check.passed();
            emit_json(&cli.output, to_json(&json!({ "report": report, "check": check, "passed": passed })))?;
            Ok(if passed { 0 } else { EXIT_FAIL })
        }
    }
}

fn parse_axis(flag: &str, raw: Option<&str>, n: usize) -> Result<Axis, Failure> {
    let bad = |s: &str| Failure::Input(format!("--{flag}: cannot parse `{s}` (expect a number or lo:hi)"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(s));
    match raw {
        None => Ok(Axis::full(n)),
        Some(s) => match s.split_once(':') {
            Some((lo, hi)) => Ok(Axis::Range { lo: num(lo)?, hi: num(hi)?, n }),
            None => Ok(Axis::Fixed(num(s)?)),
        },
    }
}

fn cmd_scan(cli: &Cli, args: &ScanArgs) -> CmdResult {
    let family: Family = args.family.parse().map_err(|e: Error| Failure::Input(e.to_string()))?;
    let gamma = match args.gamma.as_deref() {
        None => None,
        Some("beta") => Some(GammaAxis::TieBeta),
        Some(g) => Some(GammaAxis::Axis(parse_axis("gamma", Some(g), args.n)?)),
    };
    let grid = Grid {
        alpha: parse_axis("alpha", args.alpha.as_deref(), args.n)?,
        beta: parse_axis("beta", args.beta.as_deref(), args.n)?,
        gamma,
    };
    let id = Matrix::identity(2);
    // grid problems (empty axes, non-finite ends, γ on the αβ family) are input errors
    let rows = causal::scan_landscape(family, &grid, [&id, &id, &id, &id]).map_err(|e| match e {
        Error::InvalidInput(_) | Error::DomainError(_) => Failure::Input(e.to_string()),
        e => Failure::Semantic(e.to_string()),
    })?;

    let names: &[&str] = match family {
        Family::AlphaBeta => &["alpha", "beta"],
        Family::AlphaBetaGamma => &["alpha", "beta", "gamma"],
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    let header: Vec<&str> = names.iter().copied().chain(["h_cc", "h_dc", "sum"]).collect();
    let csv_err = |e: csv::Error| Failure::Semantic(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for r in &rows {
        let fields: Vec<String> = r.params.iter().chain([&r.h_cc, &r.h_dc, &r.sum]).map(|x| fmt12(*x)).collect();
        w.write_record(&fields).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Semantic(e.to_string()))?;
    emit(&cli.output, &String::from_utf8(bytes).expect("ascii csv"))?;

    let min = rows.iter().min_by(|a, b| a.sum.total_cmp(&b.sum)).expect("grid is nonempty");
    let at: Vec<String> = names.iter().zip(&min.params).map(|(n, v)| format!("{n}={}", fmt12(*v))).collect();
    let summary = format!("# {} points, min sum {} at {}", rows.len(), fmt12(min.sum), at.join(" "));
    if cli.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(0)
}

fn cmd_infer(cli: &Cli, args: &InferArgs) -> CmdResult {
    let verdict = match (&args.entropies, &args.fragment) {
        (Some(h), None) => causal::infer_causal_structure(h[0], h[1], args.d, args.max_entangled_init),
        (None, Some(path)) => {
            let loaded = load_fragment(path)?;
            causal::infer_fragment(&loaded.fragment, loaded.max_entangled_init || args.max_entangled_init, args.search)
        }
        _ => return Err(Failure::Input("give a fragment file or --entropies H_CC H_DC".into())),
    }
    .map_err(|e| Failure::Semantic(e.to_string()))?;
    emit_json(&cli.output, to_json(&verdict))?;
    Ok(0)
}

fn cmd_lub(cli: &Cli, path: &Path) -> CmdResult {
    let text = read(path)?;
    let raw: Vec<Vec<f64>> =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let set = raw.into_iter().map(ProbVector::new).collect::<Result<Vec<_>, _>>().map_err(|e| Failure::Input(e.to_string()))?;
    let l = lub(&set).map_err(Failure::from_lib)?;
    emit_json(&cli.output, to_json(&json!({ "lub": l.entries() })))?;
    Ok(0)
}

fn threads(cli: &Cli) -> Result<Option<usize>, Failure> {
    match std::env::var("COMB_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Failure::Input(format!("COMB_THREADS must be a positive integer, got `{s}`"))),
        Err(_) => Ok(cli.threads),
    }
}

fn run(cli: &Cli) -> CmdResult {
    if let Some(n) = threads(cli)? {
        // a second build in one process is harmless; the first pool wins
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Validate { fragment, tol } => cmd_validate(cli, fragment, *tol),
        Command::Bound(a) => cmd_bound(cli, a),
        Command::Scan(a) => cmd_scan(cli, a),
        Command::Infer(a) => cmd_infer(cli, a),
        Command::Lub { vectors } => cmd_lub(cli, vectors),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("qcomb: input error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Semantic(msg)) => {
            eprintln!("qcomb: {msg}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}

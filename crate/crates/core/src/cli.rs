//! Batch front end: `torus-psido <command> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]`.
//!
//! Exit codes: 0 pass, 1 usage or I/O error, 2 failed mathematical check.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::evolution::{
    self, CauchyProblem, EvolutionError, Forcing, Method, SolverConfig, TimeSymbol,
};
use crate::io;
use crate::kernel::{self, KernelError, KernelRegularizer, Sign};
use crate::lattice::TruncationBox;
use crate::linalg::{self, CVector};
use crate::spaces::{self, DyadicDecomposition};
use crate::symbol::{class_norm, parabolicity_estimate, ComplexEntry, LambdaPlan, Symbol, SymbolError, SymbolSpec};
use crate::transform::{analyze, GridFunction, SpectralFunction};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MATH: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    CheckSymbol,
    BesovNorm,
    KernelSweep,
    Solve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckSymbol => "check-symbol",
            Command::BesovNorm => "besov-norm",
            Command::KernelSweep => "kernel-sweep",
            Command::Solve => "solve",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "torus-psido", version, about = "Toroidal pseudodifferential operators: symbol checks, norms, kernel sweeps and Cauchy solves")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the configuration seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

/// A Lebesgue exponent: a number >= 1 or "inf".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Exponent(pub f64);

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) if p >= 1.0 => Ok(Exponent(p)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity") => Ok(Exponent(f64::INFINITY)),
            _ => Err(serde::de::Error::custom("exponent must be a number >= 1 or \"inf\"")),
        }
    }
}

fn exponent_label(p: f64) -> Value {
    if p.is_infinite() {
        json!("inf")
    } else {
        json!(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Box radius for the class seminorms.
    pub radius: u32,
    pub plan: LambdaPlan,
    /// Fail when the kappa estimate exceeds this.
    pub kappa_max: Option<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            radius: 32,
            plan: LambdaPlan::default(),
            kappa_max: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormRequest {
    Lp { p: Exponent },
    Sobolev { k: u32, p: Exponent },
    Besov { s: f64, p: Exponent, q: Exponent },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsConfig {
    /// Grid function file (`.csv` or JSON), relative to the configuration file.
    pub input: Option<PathBuf>,
    pub norms: Vec<NormRequest>,
    /// Dyadic levels; by default enough to cover the grid band.
    pub levels: Option<usize>,
}

impl Default for NormsConfig {
    fn default() -> Self {
        NormsConfig {
            input: None,
            norms: vec![NormRequest::Lp { p: Exponent(2.0) }],
            levels: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Explicit lambda list; replaces the ray x moduli grid when present.
    pub lambdas: Option<Vec<ComplexEntry>>,
    pub rays: Vec<f64>,
    pub moduli: Vec<f64>,
    pub eps: f64,
    pub sign: Sign,
    /// Fixed truncation radius; adaptive when omitted.
    pub radius: Option<u32>,
    pub max_radius: u32,
    /// Nodes per axis of the eta-grid (even); at least 2K + 2.
    pub grid: Option<usize>,
    pub spread_max: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            lambdas: None,
            rays: vec![0.0, std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2],
            moduli: vec![1.0, 10.0, 100.0, 1000.0],
            eps: 0.01,
            sign: Sign::Plus,
            radius: None,
            max_radius: 2048,
            grid: None,
            spread_max: 4.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitialSpec {
    Mode {
        mode: Vec<i64>,
        #[serde(default)]
        amplitude: Option<Vec<ComplexEntry>>,
    },
    File {
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// a(t, k) = a(k)
    Constant,
    /// a(t, k) = (1 + rate t) a(k)
    Linear { rate: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    Zero,
    Constant { value: Vec<ComplexEntry> },
    /// f = du/dt + A(t)u for u(t) = e^{-t} u0.
    Manufactured,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_size")]
    pub size: usize,
    pub radius: Option<u32>,
    pub horizon: f64,
    pub method: Method,
    pub steps: usize,
    pub initial: InitialSpec,
    #[serde(default = "default_profile")]
    pub profile: ProfileSpec,
    #[serde(default = "default_forcing")]
    pub forcing: ForcingSpec,
    #[serde(default)]
    pub sobolev_order: u32,
    #[serde(default = "default_p")]
    pub p: Exponent,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_linear_tol")]
    pub linear_tol: f64,
    /// Step counts for a convergence study against the exact solution.
    #[serde(default)]
    pub study: Option<Vec<usize>>,
}

fn default_size() -> usize {
    16
}
fn default_profile() -> ProfileSpec {
    ProfileSpec::Constant
}
fn default_forcing() -> ForcingSpec {
    ForcingSpec::Zero
}
fn default_p() -> Exponent {
    Exponent(2.0)
}
fn default_residual_tol() -> f64 {
    1e-3
}
fn default_linear_tol() -> f64 {
    1e-10
}

/// One JSON document per run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub symbol: Option<SymbolSpec>,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub besov: NormsConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub solve: Option<SolveConfig>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Math(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Math(_) => EXIT_MATH,
        }
    }
}

impl From<io::IoError> for Failure {
    fn from(e: io::IoError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn math(e: impl std::fmt::Display) -> Failure {
    Failure::Math(e.to_string())
}

fn symbol_failure(e: SymbolError) -> Failure {
    match e {
        SymbolError::Spec { .. } | SymbolError::Dimension { .. } => Failure::Usage(e.to_string()),
        other => math(other),
    }
}

fn evolution_failure(e: EvolutionError) -> Failure {
    match e {
        EvolutionError::Config(_) | EvolutionError::NegativeTime(_) => Failure::Usage(e.to_string()),
        EvolutionError::Transform(_) => Failure::Usage(e.to_string()),
        other => math(other),
    }
}

/// Result of a command: report payload, pass verdict and extra files.
struct Outcome {
    report: Value,
    pass: bool,
    csv: Option<(&'static str, Vec<u8>)>,
}

struct Context<'a> {
    config: &'a RunConfig,
    base: PathBuf,
}

impl Context<'_> {
    fn symbol(&self) -> Result<Symbol, Failure> {
        let spec = self
            .config
            .symbol
            .as_ref()
            .ok_or_else(|| Failure::Usage("configuration has no \"symbol\" section".into()))?;
        spec.build("symbol").map_err(symbol_failure)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match run_args(&args) {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            eprintln!("{}: check failed, see {}", args.command.name(), args.out.join("report.json").display());
            EXIT_MATH
        }
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Math(m) => eprintln!("check failed: {m}"),
            }
            f.code()
        }
    }
}

pub fn run_args(args: &Args) -> Result<bool, Failure> {
    let bytes = fs::read(&args.config).map_err(|e| Failure::Usage(format!("{}: {e}", args.config.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Failure::Usage(format!("{}: {e}", args.config.display())))?;
    let mut config: RunConfig =
        serde_json::from_str(text).map_err(|e| Failure::Usage(format!("{}: {e}", args.config.display())))?;
    if let Some(cmd) = &config.command {
        if cmd != args.command.name() {
            return Err(Failure::Usage(format!(
                "configuration is for \"{cmd}\", not \"{}\"",
                args.command.name()
            )));
        }
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.threads == Some(0) {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    let ctx = Context {
        config: &config,
        base: args.config.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let command = args.command;
    let outcome = crate::par::with_threads(args.threads, || match command {
        Command::CheckSymbol => check_symbol(&ctx),
        Command::BesovNorm => besov_norm(&ctx),
        Command::KernelSweep => kernel_sweep(&ctx),
        Command::Solve => solve(&ctx),
    });

    fs::create_dir_all(&args.out).map_err(|e| Failure::Usage(format!("{}: {e}", args.out.display())))?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "command": command.name(),
        "timestamp_unix": timestamp,
        "threads": args.threads.unwrap_or_else(crate::par::threads),
        "parallel": cfg!(feature = "parallel"),
        "version": env!("CARGO_PKG_VERSION"),
    });
    io::write_json(&args.out.join("meta.json"), &meta)?;

    let (mut report, pass, csv) = match outcome {
        Ok(o) => (o.report, o.pass, o.csv),
        Err(Failure::Math(message)) => (json!({ "error": message }), false, None),
        Err(usage) => return Err(usage),
    };
    let header = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_hash(&bytes),
        "seed": config.seed,
        "pass": pass,
    });
    if let (Value::Object(body), Value::Object(head)) = (&mut report, header) {
        for (k, v) in head {
            body.insert(k, v);
        }
    }
    io::write_json(&args.out.join("report.json"), &report)?;
    if let Some((name, data)) = csv {
        io::write_atomic(&args.out.join(name), &data)?;
    }
    if let Some(err) = report.get("error").and_then(Value::as_str) {
        eprintln!("check failed: {err}");
    }
    Ok(pass)
}

fn check_symbol(ctx: &Context) -> Result<Outcome, Failure> {
    let a = ctx.symbol()?;
    let cfg = &ctx.config.check;
    let class = class_norm(&a, TruncationBox::new(a.n, cfg.radius)).map_err(symbol_failure)?;
    let parab = parabolicity_estimate(&a, &cfg.plan);
    let kappa_ok = cfg.kappa_max.is_none_or(|k| parab.kappa_estimate <= k);
    let pass = class.bounded && parab.parabolic && kappa_ok;
    let report = json!({
        "symbol": { "label": a.label, "n": a.n, "d": a.d, "m": a.order, "rho": a.regularity },
        "class": class,
        "parabolicity": parab,
        "kappa_max": cfg.kappa_max,
    });
    Ok(Outcome { report, pass, csv: None })
}

fn besov_norm(ctx: &Context) -> Result<Outcome, Failure> {
    let cfg = &ctx.config.besov;
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Failure::Usage("besov.input is required".into()))?;
    let u = io::read_grid(&ctx.resolve(input))?;
    let dec = match cfg.levels {
        Some(l) if l >= 1 => DyadicDecomposition::new(l),
        Some(_) => return Err(Failure::Usage("besov.levels must be >= 1".into())),
        None => DyadicDecomposition::for_band(u.band_radius()),
    };
    let usage = |e: spaces::SpacesError| Failure::Usage(e.to_string());
    let mut norms = Vec::new();
    for req in &cfg.norms {
        let entry = match *req {
            NormRequest::Lp { p } => json!({
                "kind": "lp", "p": exponent_label(p.0),
                "value": spaces::lp_norm(&u, p.0).map_err(usage)?,
            }),
            NormRequest::Sobolev { k, p } => json!({
                "kind": "sobolev", "k": k, "p": exponent_label(p.0),
                "value": spaces::sobolev_norm(&u, k, p.0).map_err(usage)?,
            }),
            NormRequest::Besov { s, p, q } => json!({
                "kind": "besov", "s": s, "p": exponent_label(p.0), "q": exponent_label(q.0),
                "value": spaces::besov_norm(&u, s, p.0, q.0, &dec).map_err(usage)?,
            }),
        };
        norms.push(entry);
    }
    let report = json!({
        "parameters": { "n": u.n, "d": u.d, "size": u.size, "levels": dec.levels },
        "norms": norms,
    });
    Ok(Outcome { report, pass: true, csv: None })
}

fn kernel_sweep(ctx: &Context) -> Result<Outcome, Failure> {
    let a = ctx.symbol()?;
    let cfg = &ctx.config.kernel;
    let reg = KernelRegularizer::new(cfg.eps).map_err(|e| Failure::Usage(e.to_string()))?;
    let groups: Vec<(String, Vec<Complex64>)> = match &cfg.lambdas {
        Some(list) => vec![("list".into(), list.iter().map(|&e| e.into()).collect())],
        None => cfg
            .rays
            .iter()
            .map(|&theta| {
                let lams = cfg.moduli.iter().map(|&r| linalg::polar(r, theta)).collect();
                (format!("{theta}"), lams)
            })
            .collect(),
    };
    if groups.iter().all(|(_, l)| l.is_empty()) {
        return Err(Failure::Usage("kernel sweep has no lambda values".into()));
    }
    if cfg.grid.is_some_and(|g| g % 2 != 0 || g < 2) {
        return Err(Failure::Usage("kernel.grid must be an even number >= 2".into()));
    }
    let kernel_failure = |e: KernelError| match e {
        KernelError::OddGrid(_) | KernelError::Epsilon(_) => Failure::Usage(e.to_string()),
        other => math(other),
    };
    let mut rows = Vec::new();
    let mut spreads = BTreeMap::new();
    let mut pass = true;
    for (name, lams) in &groups {
        let mut group_rows = Vec::new();
        for &lambda in lams {
            let ev = match cfg.radius {
                Some(radius) => {
                    let size = cfg.grid.unwrap_or(0).max(2 * radius as usize + 2);
                    kernel::kernel_sum(&a, lambda, reg, cfg.sign, TruncationBox::new(a.n, radius), size + size % 2)
                }
                None => kernel::kernel_sum_adaptive(&a, lambda, reg, cfg.sign, cfg.max_radius, cfg.grid.unwrap_or(0)),
            }
            .map_err(kernel_failure)?;
            group_rows.push(kernel::sweep_row(&ev));
        }
        if group_rows.is_empty() {
            continue;
        }
        let l1: Vec<f64> = group_rows.iter().map(|r| r.scaled_l1).collect();
        let ratio: Vec<f64> = group_rows.iter().map(|r| r.max_ratio).collect();
        let (s1, s2) = (kernel::spread(&l1), kernel::spread(&ratio));
        pass &= s1 < cfg.spread_max && s2 < cfg.spread_max;
        spreads.insert(name.clone(), json!({ "scaled_l1": s1, "max_ratio": s2 }));
        rows.extend(group_rows);
    }
    let csv = io::csv_bytes(&rows).map_err(|e| Failure::Usage(e.to_string()))?;
    let report = json!({
        "symbol": a.label,
        "eps": cfg.eps,
        "sign": cfg.sign,
        "spread_max": cfg.spread_max,
        "spreads": spreads,
        "rows": rows,
    });
    Ok(Outcome {
        report,
        pass,
        csv: Some(("sweep.csv", csv)),
    })
}

fn solve(ctx: &Context) -> Result<Outcome, Failure> {
    let a = ctx.symbol()?;
    let cfg = ctx
        .config
        .solve
        .as_ref()
        .ok_or_else(|| Failure::Usage("configuration has no \"solve\" section".into()))?;
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(Failure::Usage(format!("solve.horizon must be positive, got {}", cfg.horizon)));
    }
    if cfg.steps == 0 {
        return Err(Failure::Usage("solve.steps must be >= 1".into()));
    }
    let (n, d) = (a.n, a.d);
    let u0 = match &cfg.initial {
        InitialSpec::Mode { mode, amplitude } => {
            if mode.len() != n {
                return Err(Failure::Usage(format!("initial mode must have {n} entries")));
            }
            let z: Vec<Complex64> = match amplitude {
                Some(v) if v.len() == d => v.iter().map(|&e| e.into()).collect(),
                Some(_) => return Err(Failure::Usage(format!("initial amplitude must have {d} entries"))),
                None => vec![Complex64::new(1.0, 0.0); d],
            };
            if n == 1 {
                GridFunction::plane_wave(cfg.size, mode, &z)
            } else {
                let k = mode.clone();
                GridFunction::from_fn(n, d, cfg.size, move |x| {
                    let phase: f64 = k.iter().zip(x).map(|(&kj, &xj)| kj as f64 * xj).sum();
                    z.iter().map(|&c| c * Complex64::from_polar(1.0, phase)).collect()
                })
            }
        }
        InitialSpec::File { input } => io::read_grid(&ctx.resolve(input))?,
    };
    if u0.n != n || u0.d != d {
        return Err(Failure::Usage(format!("initial datum has (n, d) = ({}, {}), symbol has ({n}, {d})", u0.n, u0.d)));
    }
    let radius = cfg.radius.unwrap_or(((u0.size - 1) / 2) as u32);
    let bx = TruncationBox::new(n, radius);
    let u0_hat = analyze(&u0, bx).map_err(|e| Failure::Usage(e.to_string()))?;

    let rate = match cfg.profile {
        ProfileSpec::Constant => 0.0,
        ProfileSpec::Linear { rate } => rate,
    };
    let symbol = if rate == 0.0 {
        TimeSymbol::constant(&a)
    } else {
        TimeSymbol::modulated(&a, move |t| 1.0 + rate * t)
    };
    let forcing = match &cfg.forcing {
        ForcingSpec::Zero => Forcing::Zero,
        ForcingSpec::Constant { value } => {
            if value.len() != d {
                return Err(Failure::Usage(format!("forcing value must have {d} entries")));
            }
            let z: Vec<Complex64> = value.iter().map(|&e| e.into()).collect();
            Forcing::modes(move |_, k| {
                if k.iter().all(|&x| x == 0) {
                    z.clone()
                } else {
                    vec![Complex64::new(0.0, 0.0); z.len()]
                }
            })
        }
        ForcingSpec::Manufactured => {
            let (sym, base) = (symbol.clone(), u0_hat.clone());
            Forcing::modes(move |t, k| {
                let idx = base.bx.index_of(k).expect("forcing requested on the solver band");
                let z = CVector::from_column_slice(base.mode(idx));
                let v = (sym.eval(t, k) * &z - &z) * Complex64::from((-t).exp());
                v.as_slice().to_vec()
            })
        }
    };
    let horizon = cfg.horizon;
    let exact: Option<SpectralFunction> = match (&cfg.forcing, rate == 0.0) {
        (ForcingSpec::Zero, _) => {
            let g = horizon + 0.5 * rate * horizon * horizon;
            Some(evolution::semigroup_apply_spectral(&a, g, &u0_hat).map_err(evolution_failure)?)
        }
        (ForcingSpec::Manufactured, _) => Some(u0_hat.map_modes(d, |_, z| {
            z.iter().map(|c| c * (-horizon).exp()).collect()
        })),
        (ForcingSpec::Constant { value }, true) => {
            let f: Vec<Complex64> = value.iter().map(|&e| e.into()).collect();
            Some(u0_hat.map_modes(d, |k, z| {
                let ak = a.eval(k);
                let mut v = linalg::expm(&(&ak * Complex64::from(-horizon))) * CVector::from_column_slice(z);
                if k.iter().all(|&x| x == 0) {
                    v += linalg::phi1(&(&ak * Complex64::from(-horizon))) * CVector::from_column_slice(&f) * Complex64::from(horizon);
                }
                v.as_slice().to_vec()
            }))
        }
        _ => None,
    };
    let problem = CauchyProblem {
        symbol,
        forcing,
        u0,
        horizon,
        sobolev_order: cfg.sobolev_order,
        p: cfg.p.0,
    };
    let solver = SolverConfig {
        method: cfg.method,
        steps: cfg.steps,
        radius,
        tol: cfg.linear_tol,
    };
    let size = problem.u0.size;
    let error_of = |state: &SpectralFunction| -> Result<Option<f64>, Failure> {
        exact
            .as_ref()
            .map(|ex| {
                let diff = SpectralFunction {
                    d: state.d,
                    bx: state.bx,
                    coeffs: state.coeffs.iter().zip(&ex.coeffs).map(|(x, y)| x - y).collect(),
                };
                spaces::sobolev_norm_spectral(&diff, size, cfg.sobolev_order, cfg.p.0).map_err(math)
            })
            .transpose()
    };

    let trace = evolution::solve_cauchy(&problem, &solver).map_err(evolution_failure)?;
    let rows = evolution::trace_rows(&problem, &trace).map_err(evolution_failure)?;
    let max_residual = rows.iter().filter_map(|r| r.residual).fold(0.0, f64::max);
    let final_error = error_of(trace.final_state())?;

    let mut study = Vec::new();
    let mut orders = Vec::new();
    if let Some(steps) = &cfg.study {
        if exact.is_none() {
            return Err(Failure::Usage("a convergence study needs a problem with a known exact solution".into()));
        }
        if steps.contains(&0) {
            return Err(Failure::Usage("study step counts must be >= 1".into()));
        }
        let mut errors = Vec::new();
        for &m in steps {
            let run = evolution::solve_cauchy(&problem, &SolverConfig { steps: m, ..solver.clone() })
                .map_err(evolution_failure)?;
            let e = error_of(run.final_state())?.expect("exact solution present");
            study.push(json!({ "steps": m, "error": e }));
            errors.push((m, e));
        }
        for w in errors.windows(2) {
            let ((m0, e0), (m1, e1)) = (w[0], w[1]);
            orders.push((e0 / e1).ln() / (m1 as f64 / m0 as f64).ln());
        }
    }

    let pass = max_residual <= cfg.residual_tol;
    let csv = io::csv_bytes(&rows).map_err(|e| Failure::Usage(e.to_string()))?;
    let report = json!({
        "symbol": a.label,
        "method": cfg.method,
        "steps": cfg.steps,
        "radius": radius,
        "size": size,
        "horizon": horizon,
        "sobolev_order": cfg.sobolev_order,
        "p": exponent_label(cfg.p.0),
        "final_error": final_error,
        "max_residual": max_residual,
        "residual_tol": cfg.residual_tol,
        "max_solve_residual": trace.solve_residuals.iter().cloned().fold(0.0, f64::max),
        "study": study,
        "orders": orders,
    });
    Ok(Outcome {
        report,
        pass,
        csv: Some(("trace.csv", csv)),
    })
}

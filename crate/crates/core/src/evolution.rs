//! Resolvents, the semigroup e^{-tA} and time stepping for
//! du/dt + A(t)u = f, u(0) = u0, one Fourier mode at a time.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::TruncationBox;
use crate::linalg::{self, CMatrix, CVector};
use crate::par;
use crate::spaces::{sobolev_norm_spectral, SpacesError};
use crate::symbol::{class_norm_with_order, ParabolicityReport, Symbol, SymbolError, GROWTH_TOLERANCE};
use crate::transform::{analyze, synthesize, GridFunction, SpectralFunction, TransformError};

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Singular(#[from] SymbolError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Spaces(#[from] SpacesError),
    #[error("semigroup is only defined for t >= 0, got t = {0}")]
    NegativeTime(f64),
    #[error("lambda = {lambda} lies outside the estimated resolvent region (|lambda| must be >= {bound})")]
    OutsideRegion { lambda: Complex64, bound: f64 },
    #[error("implicit step {step} is singular at k = {k:?}")]
    StepSingular { step: usize, k: Vec<i64> },
    #[error("linear solve at step {step}, k = {k:?} missed tolerance (relative residual {residual:e})")]
    LinearSolve { step: usize, k: Vec<i64>, residual: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Rejects lambda outside {Re lambda >= 0, |lambda| >= (1.1 omega)^m}.
pub fn check_resolvent_region(report: &ParabolicityReport, lambda: Complex64) -> Result<(), EvolutionError> {
    let bound = (1.1 * report.omega_estimate).powf(report.order);
    if lambda.re < 0.0 || lambda.norm() < bound || !report.parabolic {
        return Err(EvolutionError::OutsideRegion { lambda, bound });
    }
    Ok(())
}

pub fn resolvent_apply_spectral(
    a: &Symbol,
    lambda: Complex64,
    v: &SpectralFunction,
) -> Result<SpectralFunction, EvolutionError> {
    let bx = v.bx;
    let d = v.d;
    let modes = par::map_range(bx.len(), |idx| {
        let k = bx.point(idx);
        let (inv, _) = linalg::shifted_inverse(&a.eval(&k), lambda).map_err(|e| SymbolError::SingularResolvent {
            k,
            lambda,
            condition: e.condition,
        })?;
        Ok::<_, SymbolError>(inv * CVector::from_column_slice(v.mode(idx)))
    });
    let mut out = SpectralFunction::zeros(bx, d);
    for (idx, m) in modes.into_iter().enumerate() {
        out.mode_mut(idx).copy_from_slice(m?.as_slice());
    }
    Ok(out)
}

/// (a(k) + lambda)^{-1} u^(k) on the full band of the grid.
pub fn resolvent_apply(a: &Symbol, lambda: Complex64, u: &GridFunction) -> Result<GridFunction, EvolutionError> {
    let v = analyze(u, u.full_band())?;
    Ok(synthesize(&resolvent_apply_spectral(a, lambda, &v)?, u.size)?)
}

fn exp_mode(m: &CMatrix, t: f64) -> CMatrix {
    if m.nrows() == 1 {
        return CMatrix::from_element(1, 1, (-t * m[(0, 0)]).exp());
    }
    linalg::expm(&(m * Complex64::from(-t)))
}

pub fn semigroup_apply_spectral(a: &Symbol, t: f64, v: &SpectralFunction) -> Result<SpectralFunction, EvolutionError> {
    if t < 0.0 || t.is_nan() {
        return Err(EvolutionError::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(v.clone());
    }
    Ok(v.map_modes(v.d, |k, z| {
        let e = exp_mode(&a.eval(k), t);
        (e * CVector::from_column_slice(z)).as_slice().to_vec()
    }))
}

/// exp(-t a(k)) u^(k) on the full band of the grid.
pub fn semigroup_apply(a: &Symbol, t: f64, u: &GridFunction) -> Result<GridFunction, EvolutionError> {
    if t < 0.0 || t.is_nan() {
        return Err(EvolutionError::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    let v = analyze(u, u.full_band())?;
    Ok(synthesize(&semigroup_apply_spectral(a, t, &v)?, u.size)?)
}

type TimeEval = dyn Fn(f64, &[i64]) -> CMatrix + Send + Sync;

/// A time-dependent symbol (t, k) -> a(t, k).
#[derive(Clone)]
pub struct TimeSymbol {
    pub n: usize,
    pub d: usize,
    pub order: f64,
    pub regularity: u32,
    pub holder: f64,
    pub label: String,
    eval: Arc<TimeEval>,
}

impl fmt::Debug for TimeSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeSymbol")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("order", &self.order)
            .field("regularity", &self.regularity)
            .field("holder", &self.holder)
            .field("label", &self.label)
            .finish()
    }
}

impl TimeSymbol {
    pub fn new<F>(n: usize, d: usize, order: f64, regularity: u32, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, &[i64]) -> CMatrix + Send + Sync + 'static,
    {
        TimeSymbol {
            n,
            d,
            order,
            regularity,
            holder: 1.0,
            label: label.into(),
            eval: Arc::new(f),
        }
    }

    pub fn with_holder(mut self, alpha: f64) -> Self {
        self.holder = alpha;
        self
    }

    /// A time-independent symbol.
    pub fn constant(a: &Symbol) -> Self {
        let s = a.clone();
        TimeSymbol::new(a.n, a.d, a.order, a.regularity, a.label.clone(), move |_, k| s.eval(k))
    }

    /// g(t) a(k) for a scalar time profile g.
    pub fn modulated(a: &Symbol, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let s = a.clone();
        TimeSymbol::new(a.n, a.d, a.order, a.regularity, format!("g(t) {}", a.label), move |t, k| {
            s.eval(k) * Complex64::from(g(t))
        })
    }

    pub fn eval(&self, t: f64, k: &[i64]) -> CMatrix {
        (self.eval)(t, k)
    }

    /// Frozen symbol k -> a(t, k).
    pub fn at(&self, t: f64) -> Symbol {
        let f = self.eval.clone();
        Symbol::new(self.n, self.d, self.order, self.regularity, format!("{}@{t}", self.label), move |k| f(t, k))
    }
}

type ModeForcing = dyn Fn(f64, &[i64]) -> Vec<Complex64> + Send + Sync;
type GridForcing = dyn Fn(f64) -> GridFunction + Send + Sync;

/// Right-hand side f(t).
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    Zero,
    /// Fourier coefficients f^(t, k) given directly.
    Modes(Arc<ModeForcing>),
    /// Grid samples, analyzed on the solver band.
    Grid(Arc<GridForcing>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Forcing::Zero => "Zero",
            Forcing::Modes(_) => "Modes",
            Forcing::Grid(_) => "Grid",
        })
    }
}

impl Forcing {
    pub fn modes(f: impl Fn(f64, &[i64]) -> Vec<Complex64> + Send + Sync + 'static) -> Self {
        Forcing::Modes(Arc::new(f))
    }

    pub fn grid(f: impl Fn(f64) -> GridFunction + Send + Sync + 'static) -> Self {
        Forcing::Grid(Arc::new(f))
    }

    pub fn spectral(&self, t: f64, bx: TruncationBox, d: usize) -> Result<SpectralFunction, EvolutionError> {
        Ok(match self {
            Forcing::Zero => SpectralFunction::zeros(bx, d),
            Forcing::Modes(f) => {
                let mut v = SpectralFunction::zeros(bx, d);
                for idx in 0..bx.len() {
                    v.mode_mut(idx).copy_from_slice(&f(t, &bx.point(idx)));
                }
                v
            }
            Forcing::Grid(f) => analyze(&f(t), bx)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CauchyProblem {
    pub symbol: TimeSymbol,
    pub forcing: Forcing,
    pub u0: GridFunction,
    pub horizon: f64,
    pub sobolev_order: u32,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ImplicitEuler,
    ExponentialMidpoint,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ImplicitEuler => "implicit_euler",
            Method::ExponentialMidpoint => "exponential_midpoint",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub steps: usize,
    pub radius: u32,
    /// Relative residual allowed in each implicit linear solve.
    pub tol: f64,
}

impl SolverConfig {
    pub fn new(method: Method, steps: usize, radius: u32) -> Self {
        SolverConfig {
            method,
            steps,
            radius,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionTrace {
    pub method: Method,
    pub steps: usize,
    pub size: usize,
    pub times: Vec<f64>,
    pub snapshots: Vec<SpectralFunction>,
    /// Largest relative linear-solve residual per step (0 for explicit steps).
    pub solve_residuals: Vec<f64>,
}

impl SolutionTrace {
    pub fn final_state(&self) -> &SpectralFunction {
        self.snapshots.last().expect("trace holds u(0)")
    }
}

struct ModeRun {
    values: Vec<Complex64>,
    residuals: Vec<f64>,
}

pub fn solve_cauchy(pb: &CauchyProblem, cfg: &SolverConfig) -> Result<SolutionTrace, EvolutionError> {
    if cfg.steps == 0 {
        return Err(EvolutionError::Config("steps must be >= 1".into()));
    }
    if pb.horizon.is_nan() || pb.horizon <= 0.0 {
        return Err(EvolutionError::Config(format!("horizon must be positive, got {}", pb.horizon)));
    }
    let (n, d) = (pb.symbol.n, pb.symbol.d);
    if pb.u0.n != n || pb.u0.d != d {
        return Err(EvolutionError::Config(format!(
            "u0 has (n, d) = ({}, {}), symbol has ({n}, {d})",
            pb.u0.n, pb.u0.d
        )));
    }
    let bx = TruncationBox::new(n, cfg.radius);
    let steps = cfg.steps;
    let dt = pb.horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let u0 = analyze(&pb.u0, bx)?;

    // forcing samples: step ends for implicit Euler, midpoints for the exponential scheme
    let force_times: Vec<f64> = match cfg.method {
        Method::ImplicitEuler => times[1..].to_vec(),
        Method::ExponentialMidpoint => (0..steps).map(|i| (i as f64 + 0.5) * dt).collect(),
    };
    let zero_forcing = matches!(pb.forcing, Forcing::Zero);
    let forces: Vec<SpectralFunction> = if zero_forcing {
        Vec::new()
    } else {
        force_times
            .iter()
            .map(|&t| pb.forcing.spectral(t, bx, d))
            .collect::<Result<_, _>>()?
    };

    let runs = par::map_range(bx.len(), |idx| -> Result<ModeRun, EvolutionError> {
        let k = bx.point(idx);
        let mut u = CVector::from_column_slice(u0.mode(idx));
        let mut values = Vec::with_capacity((steps + 1) * d);
        values.extend_from_slice(u.as_slice());
        let mut residuals = vec![0.0; steps];
        for i in 0..steps {
            let f = (!zero_forcing).then(|| CVector::from_column_slice(forces[i].mode(idx)));
            match cfg.method {
                Method::ImplicitEuler => {
                    let a = pb.symbol.eval(times[i + 1], &k);
                    let m = linalg::identity(d) + a * Complex64::from(dt);
                    let mut rhs = u.clone();
                    if let Some(f) = &f {
                        rhs += f * Complex64::from(dt);
                    }
                    let next = m.clone().lu().solve(&rhs).ok_or_else(|| EvolutionError::StepSingular {
                        step: i,
                        k: k.clone(),
                    })?;
                    let scale = rhs.norm();
                    let res = if scale == 0.0 { (&m * &next).norm() } else { (&m * &next - &rhs).norm() / scale };
                    if res.is_nan() || res > cfg.tol {
                        return Err(EvolutionError::LinearSolve {
                            step: i,
                            k: k.clone(),
                            residual: res,
                        });
                    }
                    residuals[i] = res;
                    u = next;
                }
                Method::ExponentialMidpoint => {
                    let a = pb.symbol.eval(times[i] + 0.5 * dt, &k);
                    let mut next = exp_mode(&a, dt) * &u;
                    if let Some(f) = &f {
                        let z = a * Complex64::from(-dt);
                        next += linalg::phi1(&z) * f * Complex64::from(dt);
                    }
                    u = next;
                }
            }
            values.extend_from_slice(u.as_slice());
        }
        Ok(ModeRun { values, residuals })
    });

    let mut snapshots = vec![SpectralFunction::zeros(bx, d); steps + 1];
    let mut solve_residuals = vec![0.0f64; steps];
    for (idx, run) in runs.into_iter().enumerate() {
        let run = run?;
        for (i, snap) in snapshots.iter_mut().enumerate() {
            snap.mode_mut(idx).copy_from_slice(&run.values[i * d..(i + 1) * d]);
        }
        for (acc, r) in solve_residuals.iter_mut().zip(run.residuals) {
            *acc = acc.max(r);
        }
    }
    Ok(SolutionTrace {
        method: cfg.method,
        steps,
        size: pb.u0.size,
        times,
        snapshots,
        solve_residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ResidualSeries {
    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Central-difference defect du/dt + a u - f at interior trace times, in the
/// problem's Sobolev norm.
pub fn residual(pb: &CauchyProblem, trace: &SolutionTrace) -> Result<ResidualSeries, EvolutionError> {
    let steps = trace.times.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for i in 1..steps {
        let t = trace.times[i];
        let h = trace.times[i + 1] - trace.times[i - 1];
        let (prev, cur, next) = (&trace.snapshots[i - 1], &trace.snapshots[i], &trace.snapshots[i + 1]);
        let f = pb.forcing.spectral(t, cur.bx, cur.d)?;
        let defect = cur.map_modes(cur.d, |k, z| {
            let idx = cur.bx.index_of(k).expect("mode inside band");
            let au = pb.symbol.eval(t, k) * CVector::from_column_slice(z);
            (0..cur.d)
                .map(|c| (next.mode(idx)[c] - prev.mode(idx)[c]) / h + au[c] - f.mode(idx)[c])
                .collect()
        });
        times.push(t);
        values.push(sobolev_norm_spectral(&defect, trace.size, pb.sobolev_order, pb.p)?);
    }
    Ok(ResidualSeries { times, values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub alpha: f64,
    pub constant: f64,
    pub argmax: (f64, f64),
    /// Constant over every other sample time.
    pub coarse_constant: f64,
    /// The constant grew by more than the growth tolerance under refinement.
    pub flagged: bool,
}

/// max_{s != t} ||a(t) - a(s)||_{S^m} / |t - s|^alpha over the sample times.
pub fn holder_constant(a: &TimeSymbol, alpha: f64, times: &[f64], radius: u32) -> Result<HolderReport, EvolutionError> {
    if times.len() < 2 {
        return Err(EvolutionError::Config("holder_constant needs at least two sample times".into()));
    }
    let bx = TruncationBox::new(a.n, radius);
    let frozen: Vec<Symbol> = times.iter().map(|&t| a.at(t)).collect();
    let mut pairs = Vec::new();
    for i in 0..times.len() {
        for j in i + 1..times.len() {
            if times[i] != times[j] {
                pairs.push((i, j));
            }
        }
    }
    let quotients = par::map_slice(&pairs, |&(i, j)| -> Result<f64, EvolutionError> {
        let diff = Symbol::difference(&frozen[j], &frozen[i])?;
        let norm = class_norm_with_order(&diff, bx, a.order)?.norm;
        Ok(norm / (times[j] - times[i]).abs().powf(alpha))
    });
    let mut constant = 0.0f64;
    let mut coarse_constant = 0.0f64;
    let mut argmax = (times[0], times[1]);
    for (&(i, j), q) in pairs.iter().zip(quotients) {
        let q = q?;
        if q > constant {
            constant = q;
            argmax = (times[i], times[j]);
        }
        if i % 2 == 0 && j % 2 == 0 {
            coarse_constant = coarse_constant.max(q);
        }
    }
    let flagged = if coarse_constant > 0.0 {
        constant / coarse_constant > GROWTH_TOLERANCE
    } else {
        constant > 0.0
    };
    Ok(HolderReport {
        alpha,
        constant,
        argmax,
        coarse_constant,
        flagged,
    })
}

/// One row of the exported trace time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub sobolev_norm: f64,
    /// Central-difference residual; empty at the two end points.
    pub residual: Option<f64>,
}

pub fn trace_rows(pb: &CauchyProblem, trace: &SolutionTrace) -> Result<Vec<TraceRow>, EvolutionError> {
    let res = residual(pb, trace)?;
    trace
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, snap)| {
            Ok(TraceRow {
                step: i,
                t: trace.times[i],
                sobolev_norm: sobolev_norm_spectral(snap, trace.size, pb.sobolev_order, pb.p)?,
                residual: (i >= 1 && i < trace.steps).then(|| res.values[i - 1]),
            })
        })
        .collect()
}

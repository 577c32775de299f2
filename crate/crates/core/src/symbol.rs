//! Operator-valued toroidal symbols a: Z^n -> L(C^d).
//!
//! Besides construction and parsing this module estimates the symbol-class
//! seminorms C_alpha = sup <k>^{|alpha|-m} |Delta^alpha a(k)| on a truncation
//! box and probes parabolicity of a(k) + lambda on the closed right half-plane.
//! Both are finite-sample estimates, never certificates.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{
    self, aniso_bracket, aniso_length, bracket, multi_indices_up_to, LatticeError, LatticeFunction,
    MultiIndex, TruncationBox,
};
use crate::linalg::{self, identity, nilpotent_shift, scalar, CMatrix, MatrixNorm};
use crate::par;

/// Ratio C_alpha(K) / C_alpha(K/2) above which an order declaration is rejected.
pub const GROWTH_TOLERANCE: f64 = 1.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("a(k) + lambda is singular at k = {k:?}, lambda = {lambda} (condition {condition:e})")]
    SingularResolvent {
        k: Vec<i64>,
        lambda: Complex64,
        condition: f64,
    },
    #[error("symbol dimension mismatch: (n, d) = {left:?} vs {right:?}")]
    Dimension {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("invalid symbol specification at {location}: {message}")]
    Spec { location: String, message: String },
}

pub type SymbolFn = Arc<dyn Fn(&[i64]) -> CMatrix + Send + Sync>;

/// An x-independent symbol with declared order m and difference regularity rho.
#[derive(Clone)]
pub struct Symbol {
    pub n: usize,
    pub d: usize,
    pub order: f64,
    pub regularity: u32,
    pub matrix_norm: MatrixNorm,
    pub label: String,
    domain: Option<TruncationBox>,
    eval: SymbolFn,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("d", &self.d)
            .field("order", &self.order)
            .field("regularity", &self.regularity)
            .field("matrix_norm", &self.matrix_norm)
            .field("domain", &self.domain)
            .finish()
    }
}

impl LatticeFunction for Symbol {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, k: &[i64]) -> CMatrix {
        (self.eval)(k)
    }
    fn contains(&self, k: &[i64]) -> bool {
        self.domain.map_or(k.len() == self.n, |b| b.contains(k))
    }
}

impl Symbol {
    pub fn new<F>(n: usize, d: usize, order: f64, regularity: u32, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[i64]) -> CMatrix + Send + Sync + 'static,
    {
        Symbol {
            n,
            d,
            order,
            regularity,
            matrix_norm: MatrixNorm::Spectral,
            label: label.into(),
            domain: None,
            eval: Arc::new(f),
        }
    }

    pub fn eval(&self, k: &[i64]) -> CMatrix {
        (self.eval)(k)
    }

    pub fn domain(&self) -> Option<TruncationBox> {
        self.domain
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.order = order;
        self
    }

    pub fn with_regularity(mut self, regularity: u32) -> Self {
        self.regularity = regularity;
        self
    }

    pub fn with_norm(mut self, norm: MatrixNorm) -> Self {
        self.matrix_norm = norm;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn identity(n: usize, d: usize) -> Self {
        Symbol::new(n, d, 0.0, n as u32 + 1, "identity", move |_| identity(d))
    }

    /// <k>^s I
    pub fn bracket_power(n: usize, d: usize, s: f64) -> Self {
        Symbol::new(n, d, s, n as u32 + 1, format!("bracket_power({s})"), move |k| {
            scalar(d, Complex64::from(bracket(k).powf(s)))
        })
    }

    /// |k|^2 I
    pub fn laplacian(n: usize, d: usize) -> Self {
        Symbol::new(n, d, 2.0, n as u32 + 1, "laplacian", move |k| {
            scalar(d, Complex64::from(lattice::norm_sqr(k)))
        })
    }

    /// (1 + |k|^2) I
    pub fn shifted_laplacian(n: usize, d: usize) -> Self {
        Symbol::new(n, d, 2.0, n as u32 + 1, "shifted_laplacian", move |k| {
            scalar(d, Complex64::from(1.0 + lattice::norm_sqr(k)))
        })
    }

    /// <k>^s (I + N) with N the nilpotent shift.
    pub fn jordan(n: usize, d: usize, s: f64) -> Self {
        let base = identity(d) + nilpotent_shift(d);
        Symbol::new(n, d, s, n as u32 + 1, format!("jordan({s})"), move |k| {
            &base * Complex64::from(bracket(k).powf(s))
        })
    }

    /// <k>^s sum_alpha M_alpha k^alpha.
    pub fn polynomial(n: usize, spec: PolynomialSymbolSpec) -> Result<Self, SymbolError> {
        let d = spec
            .terms
            .first()
            .map(|(_, m)| m.nrows())
            .ok_or_else(|| SymbolError::Spec {
                location: "terms".into(),
                message: "polynomial symbol needs at least one term".into(),
            })?;
        for (i, (alpha, m)) in spec.terms.iter().enumerate() {
            if alpha.dim() != n {
                return Err(SymbolError::Spec {
                    location: format!("terms[{i}].alpha"),
                    message: format!("multi-index has {} components, expected {n}", alpha.dim()),
                });
            }
            if m.nrows() != d || m.ncols() != d {
                return Err(SymbolError::Spec {
                    location: format!("terms[{i}].matrix"),
                    message: format!("expected {d}x{d} matrix, got {}x{}", m.nrows(), m.ncols()),
                });
            }
        }
        let degree = spec.terms.iter().map(|(a, _)| a.order()).max().unwrap_or(0) as f64;
        let s = spec.bracket_power.unwrap_or(0.0);
        Ok(Symbol::new(n, d, degree + s, n as u32 + 1, "polynomial", move |k| {
            let mut acc = CMatrix::zeros(d, d);
            for (alpha, m) in &spec.terms {
                acc += m * Complex64::from(alpha.monomial(k));
            }
            if s != 0.0 {
                acc *= Complex64::from(bracket(k).powf(s));
            }
            acc
        }))
    }

    /// k -> a(k) - b(k), order max(m_a, m_b).
    pub fn difference(a: &Symbol, b: &Symbol) -> Result<Symbol, SymbolError> {
        check_compatible(a, b)?;
        let (fa, fb) = (a.eval.clone(), b.eval.clone());
        let mut out = Symbol::new(
            a.n,
            a.d,
            a.order.max(b.order),
            a.regularity.min(b.regularity),
            format!("({}) - ({})", a.label, b.label),
            move |k| fa(k) - fb(k),
        );
        out.domain = intersect(a.domain, b.domain);
        out.matrix_norm = a.matrix_norm;
        Ok(out)
    }

    /// k -> c a(k)
    pub fn scaled(&self, c: Complex64) -> Symbol {
        let f = self.eval.clone();
        let mut out = self.clone();
        out.eval = Arc::new(move |k| f(k) * c);
        out.label = format!("{c}*({})", self.label);
        out
    }
}

fn intersect(a: Option<TruncationBox>, b: Option<TruncationBox>) -> Option<TruncationBox> {
    match (a, b) {
        (Some(x), Some(y)) => Some(TruncationBox::new(x.n, x.radius.min(y.radius))),
        (x, None) => x,
        (None, y) => y,
    }
}

fn check_compatible(a: &Symbol, b: &Symbol) -> Result<(), SymbolError> {
    if a.n != b.n || a.d != b.d {
        return Err(SymbolError::Dimension {
            left: (a.n, a.d),
            right: (b.n, b.d),
        });
    }
    Ok(())
}

/// Finite list of (alpha, M_alpha) with an optional <k>^s factor.
#[derive(Debug, Clone)]
pub struct PolynomialSymbolSpec {
    pub terms: Vec<(MultiIndex, CMatrix)>,
    pub bracket_power: Option<f64>,
}

// ---------------------------------------------------------------------------
// Specification documents

/// A complex number written either as a bare real or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexEntry> for Complex64 {
    fn from(e: ComplexEntry) -> Self {
        match e {
            ComplexEntry::Real(x) => Complex64::new(x, 0.0),
            ComplexEntry::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TermSpec {
    Named {
        alpha: Vec<u32>,
        matrix: Vec<Vec<ComplexEntry>>,
    },
    Pair(Vec<u32>, Vec<Vec<ComplexEntry>>),
}

/// Symbol sub-document of a run configuration.
///
/// Omitted fields: `d` = 1, `m` = the family's natural order, `rho` = n + 1,
/// `matrix_norm` = spectral, `s` = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub family: String,
    pub n: usize,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub rho: Option<i64>,
    #[serde(default)]
    pub matrix_norm: MatrixNorm,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub terms: Option<Vec<TermSpec>>,
}

fn one() -> usize {
    1
}

impl SymbolSpec {
    /// Builds the symbol; `location` prefixes error paths.
    pub fn build(&self, location: &str) -> Result<Symbol, SymbolError> {
        let err = |field: &str, message: String| SymbolError::Spec {
            location: format!("{location}.{field}"),
            message,
        };
        if self.n == 0 {
            return Err(err("n", "dimension must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(err("d", "fiber dimension must be at least 1".into()));
        }
        let rho = match self.rho {
            Some(r) if r < 0 => return Err(err("rho", format!("regularity must be non-negative, got {r}"))),
            Some(r) => r as u32,
            None => self.n as u32 + 1,
        };
        let s = self.s.unwrap_or(0.0);
        let (n, d) = (self.n, self.d);
        let sym = match self.family.as_str() {
            "identity" => Symbol::identity(n, d),
            "bracket_power" => Symbol::bracket_power(n, d, s),
            "laplacian" => Symbol::laplacian(n, d),
            "shifted_laplacian" => Symbol::shifted_laplacian(n, d),
            "jordan" => Symbol::jordan(n, d, s),
            "polynomial" => {
                let terms = self
                    .terms
                    .as_ref()
                    .ok_or_else(|| err("terms", "polynomial family requires terms".into()))?;
                let mut parsed = Vec::with_capacity(terms.len());
                for (i, t) in terms.iter().enumerate() {
                    let (alpha, rows) = match t {
                        TermSpec::Named { alpha, matrix } => (alpha, matrix),
                        TermSpec::Pair(alpha, matrix) => (alpha, matrix),
                    };
                    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                        return Err(err(
                            &format!("terms[{i}].matrix"),
                            format!("expected a square {d}x{d} matrix"),
                        ));
                    }
                    if alpha.len() != n {
                        return Err(err(
                            &format!("terms[{i}].alpha"),
                            format!("multi-index has {} components, expected {n}", alpha.len()),
                        ));
                    }
                    let m = CMatrix::from_fn(d, d, |r, c| rows[r][c].into());
                    parsed.push((MultiIndex(alpha.clone()), m));
                }
                Symbol::polynomial(
                    n,
                    PolynomialSymbolSpec {
                        terms: parsed,
                        bracket_power: self.s,
                    },
                )
                .map_err(|e| match e {
                    SymbolError::Spec { location: l, message } => err(&l, message),
                    other => other,
                })?
            }
            other => return Err(err("family", format!("unknown symbol family `{other}`"))),
        };
        let sym = sym.with_regularity(rho).with_norm(self.matrix_norm);
        Ok(match self.m {
            Some(m) => sym.with_order(m),
            None => sym,
        })
    }
}

/// Parses a JSON symbol document.
pub fn parse_symbol_spec(document: &str) -> Result<Symbol, SymbolError> {
    let spec: SymbolSpec = serde_json::from_str(document).map_err(|e| SymbolError::Spec {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    spec.build("symbol")
}

// ---------------------------------------------------------------------------
// Symbol-class seminorms

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassConstant {
    pub alpha: Vec<u32>,
    /// max over the box of <k>^{|alpha|-m} |Delta^alpha a(k)|
    pub constant: f64,
    pub argmax: Vec<i64>,
    /// Same maximum restricted to the outer shell |k|_inf = K.
    pub shell_constant: f64,
    /// shell_constant / constant (0 when the constant vanishes).
    pub tail_ratio: f64,
    /// Maximum over the half box |k|_inf <= K/2.
    pub inner_constant: f64,
    /// constant / inner_constant; stays near 1 when the declared order is right.
    pub growth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolClassReport {
    pub order: f64,
    pub regularity: u32,
    pub radius: u32,
    pub constants: Vec<ClassConstant>,
    pub norm: f64,
    pub norm_alpha: Vec<u32>,
    pub norm_argmax: Vec<i64>,
    /// Every growth ratio is at most [`GROWTH_TOLERANCE`].
    pub bounded: bool,
}

impl SymbolClassReport {
    pub fn constant(&self, alpha: &[u32]) -> Option<f64> {
        self.constants.iter().find(|c| c.alpha == alpha).map(|c| c.constant)
    }
}

/// Estimates the S^{m,rho} seminorms of `a` over `bx`, using the declared order.
pub fn class_norm(a: &Symbol, bx: TruncationBox) -> Result<SymbolClassReport, SymbolError> {
    class_norm_with_order(a, bx, a.order)
}

pub fn class_norm_with_order(
    a: &Symbol,
    bx: TruncationBox,
    m: f64,
) -> Result<SymbolClassReport, SymbolError> {
    let rho = a.regularity;
    let ext = TruncationBox::new(bx.n, bx.radius + rho);
    if let Some(dom) = a.domain {
        if dom.radius < ext.radius {
            let mut point = vec![0i64; bx.n];
            point[0] = dom.radius as i64 + 1;
            return Err(LatticeError::OutsideDomain { point }.into());
        }
    }
    let table = lattice::Tabulated::from_fn(ext, a);
    let half = bx.radius / 2;
    let constants: Vec<ClassConstant> = multi_indices_up_to(bx.n, rho)
        .into_iter()
        .map(|alpha| {
            let weighted = par::map_range(bx.len(), |i| {
                let k = bx.point(i);
                let diff = lattice::forward_difference(&table, &alpha, &k).expect("extended table covers stencil");
                bracket(&k).powf(alpha.order() as f64 - m) * a.matrix_norm.of(&diff)
            });
            let mut best = (0.0f64, 0usize);
            let mut shell = 0.0f64;
            let mut inner = 0.0f64;
            for (i, &w) in weighted.iter().enumerate() {
                if w > best.0 {
                    best = (w, i);
                }
                let k = bx.point(i);
                if bx.on_shell(&k) {
                    shell = shell.max(w);
                }
                if k.iter().all(|&x| x.unsigned_abs() <= half as u64) {
                    inner = inner.max(w);
                }
            }
            let constant = best.0;
            let growth = if constant == 0.0 {
                1.0
            } else if inner == 0.0 {
                f64::INFINITY
            } else {
                constant / inner
            };
            ClassConstant {
                alpha: alpha.0,
                constant,
                argmax: bx.point(best.1),
                shell_constant: shell,
                tail_ratio: if constant == 0.0 { 0.0 } else { shell / constant },
                inner_constant: inner,
                growth,
            }
        })
        .collect();
    let top = constants
        .iter()
        .fold(None::<&ClassConstant>, |acc, c| match acc {
            Some(b) if b.constant >= c.constant => Some(b),
            _ => Some(c),
        })
        .expect("alpha = 0 is always present");
    Ok(SymbolClassReport {
        order: m,
        regularity: rho,
        radius: bx.radius,
        norm: top.constant,
        norm_alpha: top.alpha.clone(),
        norm_argmax: top.argmax.clone(),
        bounded: constants.iter().all(|c| c.growth <= GROWTH_TOLERANCE),
        constants,
    })
}

// ---------------------------------------------------------------------------
// Parabolicity

/// Sampling plan for lambda in the closed right half-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaPlan {
    /// Lattice box radius.
    pub radius: u32,
    /// Ray angles arg(lambda), radians, within [-pi/2, pi/2].
    pub rays: Vec<f64>,
    pub min_modulus: f64,
    pub decades: u32,
    pub per_decade: u32,
    /// Also sample lambda = 0.
    pub include_zero: bool,
    /// Requested threshold: samples with |(k, lambda)| < omega are skipped.
    pub omega: f64,
}

impl Default for LambdaPlan {
    fn default() -> Self {
        LambdaPlan {
            radius: 32,
            rays: vec![0.0, FRAC_PI_2, -FRAC_PI_2],
            min_modulus: 1.0,
            decades: 4,
            per_decade: 16,
            include_zero: true,
            omega: 0.0,
        }
    }
}

impl LambdaPlan {
    /// Log-spaced moduli min * 10^{i / per_decade}, i = 0..=decades * per_decade.
    pub fn moduli(&self) -> Vec<f64> {
        let count = self.decades * self.per_decade.max(1);
        (0..=count)
            .map(|i| self.min_modulus * 10f64.powf(i as f64 / self.per_decade.max(1) as f64))
            .collect()
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        if self.include_zero {
            out.push(Complex64::new(0.0, 0.0));
        }
        let moduli = self.moduli();
        for &theta in &self.rays {
            for &r in &moduli {
                out.push(linalg::polar(r, theta));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventSample {
    pub k: Vec<i64>,
    pub lambda: Complex64,
    /// |(k, lambda)|
    pub length: f64,
    /// <k, lambda>^m |(a(k) + lambda)^{-1}|, or the condition number for failures.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParabolicityReport {
    pub order: f64,
    pub omega_requested: f64,
    /// Every sampled invertibility failure has |(k, lambda)| <= omega_estimate (0 if none).
    pub omega_estimate: f64,
    pub kappa_estimate: f64,
    pub worst: Option<ResolventSample>,
    pub samples: usize,
    pub skipped: usize,
    /// Failures at |(k, lambda)| >= omega_requested, first 64 in sampling order.
    pub failures: Vec<ResolventSample>,
    pub failure_count: usize,
    pub parabolic: bool,
    pub plan: LambdaPlan,
}

/// Estimates the parabolicity constants of `a` over the sampling plan.
pub fn parabolicity_estimate(a: &Symbol, plan: &LambdaPlan) -> ParabolicityReport {
    let bx = TruncationBox::new(a.n, plan.radius);
    let lambdas = plan.lambdas();
    let m = a.order;
    struct Local {
        best: Option<ResolventSample>,
        failures: Vec<ResolventSample>,
        all_failure_max: f64,
        samples: usize,
        skipped: usize,
    }
    let per_k = par::map_range(bx.len(), |i| {
        let k = bx.point(i);
        let ak = a.eval(&k);
        let mut local = Local {
            best: None,
            failures: Vec::new(),
            all_failure_max: 0.0,
            samples: 0,
            skipped: 0,
        };
        for &lambda in &lambdas {
            let length = aniso_length(&k, lambda, m);
            match linalg::shifted_inverse(&ak, lambda) {
                Err(e) => {
                    local.all_failure_max = local.all_failure_max.max(length);
                    if length >= plan.omega {
                        local.samples += 1;
                        local.failures.push(ResolventSample {
                            k: k.clone(),
                            lambda,
                            length,
                            value: e.condition,
                        });
                    } else {
                        local.skipped += 1;
                    }
                }
                Ok((inv, _)) => {
                    if length < plan.omega {
                        local.skipped += 1;
                        continue;
                    }
                    local.samples += 1;
                    let value = aniso_bracket(&k, lambda, m).powf(m) * a.matrix_norm.of(&inv);
                    if local.best.as_ref().is_none_or(|b| value > b.value) {
                        local.best = Some(ResolventSample {
                            k: k.clone(),
                            lambda,
                            length,
                            value,
                        });
                    }
                }
            }
        }
        local
    });

    let mut worst: Option<ResolventSample> = None;
    let mut failures = Vec::new();
    let mut failure_count = 0;
    let mut omega_estimate = 0.0f64;
    let (mut samples, mut skipped) = (0, 0);
    for local in per_k {
        samples += local.samples;
        skipped += local.skipped;
        omega_estimate = omega_estimate.max(local.all_failure_max);
        failure_count += local.failures.len();
        for f in local.failures {
            if failures.len() < 64 {
                failures.push(f);
            }
        }
        if let Some(b) = local.best {
            if worst.as_ref().is_none_or(|w| b.value > w.value) {
                worst = Some(b);
            }
        }
    }
    ParabolicityReport {
        order: m,
        omega_requested: plan.omega,
        omega_estimate,
        kappa_estimate: worst.as_ref().map_or(0.0, |w| w.value),
        worst,
        samples,
        skipped,
        failures,
        failure_count,
        parabolic: failure_count == 0,
        plan: plan.clone(),
    }
}

// ---------------------------------------------------------------------------
// Resolvent, product, extension

/// The resolvent symbol k -> (a(k) + lambda)^{-1} on the box `bx`, order -m.
///
/// Inverses are computed eagerly, so the returned symbol is only defined on `bx`.
pub fn resolvent_symbol(a: &Symbol, lambda: Complex64, bx: TruncationBox) -> Result<(Symbol, f64), SymbolError> {
    let d = a.d;
    let inverses = par::map_range(bx.len(), |i| {
        let k = bx.point(i);
        linalg::shifted_inverse(&a.eval(&k), lambda).map_err(|e| {
            SymbolError::SingularResolvent {
                k,
                lambda,
                condition: e.condition,
            }
        })
    });
    let mut values = Vec::with_capacity(inverses.len());
    let mut max_condition = 0.0f64;
    for r in inverses {
        let (inv, cond) = r?;
        max_condition = max_condition.max(cond);
        values.push(inv);
    }
    let table = Arc::new(values);
    let mut sym = Symbol::new(
        a.n,
        d,
        -a.order,
        a.regularity,
        format!("({} + {lambda})^-1", a.label),
        move |k| {
            let idx = bx.index_of(k).unwrap_or_else(|| panic!("resolvent symbol evaluated outside its box at {k:?}"));
            table[idx].clone()
        },
    );
    sym.domain = Some(bx);
    sym.matrix_norm = a.matrix_norm;
    Ok((sym, max_condition))
}

/// Pointwise product (a1 a2)(k) = a1(k) a2(k).
pub fn symbol_product(a1: &Symbol, a2: &Symbol) -> Result<Symbol, SymbolError> {
    check_compatible(a1, a2)?;
    let (f1, f2) = (a1.eval.clone(), a2.eval.clone());
    let mut out = Symbol::new(
        a1.n,
        a1.d,
        a1.order + a2.order,
        a1.regularity.min(a2.regularity),
        format!("({})({})", a1.label, a2.label),
        move |k| f1(k) * f2(k),
    );
    out.domain = intersect(a1.domain, a2.domain);
    out.matrix_norm = a1.matrix_norm;
    Ok(out)
}

/// Smooth even profile with psi(0) = 1 and support in (-1, 1).
#[derive(Clone)]
pub struct ExtensionKernel {
    profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Default for ExtensionKernel {
    fn default() -> Self {
        ExtensionKernel {
            profile: Arc::new(bump),
        }
    }
}

impl ExtensionKernel {
    pub fn new(profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ExtensionKernel {
            profile: Arc::new(profile),
        }
    }

    pub fn psi(&self, x: f64) -> f64 {
        (self.profile)(x)
    }
}

/// exp(1 - 1/(1 - x^2)) on |x| < 1, zero elsewhere.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// Extension of `a` to real covariables: sum over the cell corners k around
/// xi of prod_j psi(xi_j - k_j) a(k).
pub fn extend(a: &Symbol, kern: &ExtensionKernel, xi: &[f64]) -> CMatrix {
    assert_eq!(xi.len(), a.n, "covariable dimension");
    let floors: Vec<i64> = xi.iter().map(|x| x.floor() as i64).collect();
    let mut acc = CMatrix::zeros(a.d, a.d);
    for corner in 0..(1usize << a.n) {
        let k: Vec<i64> = floors
            .iter()
            .enumerate()
            .map(|(j, &f)| f + ((corner >> j) & 1) as i64)
            .collect();
        let w: f64 = xi.iter().zip(&k).map(|(&x, &kj)| kern.psi(x - kj as f64)).product();
        if w != 0.0 {
            acc += a.eval(&k) * Complex64::from(w);
        }
    }
    acc
}

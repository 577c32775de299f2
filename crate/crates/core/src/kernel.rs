//! The regularized resolvent kernel K_eps(eta, lambda) and the lattice sums
//! that control it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::TruncationBox;
use crate::linalg::{self, CMatrix};
use crate::par;
use crate::symbol::{Symbol, SymbolError};
use crate::transform::{grid_coordinate, synthesize_matrix, MatrixGrid, TransformError};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Singular(#[from] SymbolError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("kernel grids need an even number of nodes per axis so that eta = 0 is a node, got {0}")]
    OddGrid(usize),
    #[error("regularization parameter must lie in [0, 1], got {0}")]
    Epsilon(f64),
    #[error("adaptive truncation did not settle below radius {0}")]
    NotConverged(u32),
}

/// Which resolvent the kernel is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    /// (a(k) + lambda)^{-1}
    #[default]
    Plus,
    /// (a(k) - lambda)^{-1}
    Minus,
}

impl Sign {
    pub fn apply(self, lambda: Complex64) -> Complex64 {
        match self {
            Sign::Plus => lambda,
            Sign::Minus => -lambda,
        }
    }
}

/// Gaussian cutoff chi_eps(k, lambda) = exp(-eps^2 (|k|^2 + |lambda|^{2/m})).
///
/// `eps = 0` gives chi = 1, i.e. the plain truncated sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRegularizer {
    pub eps: f64,
}

impl KernelRegularizer {
    pub fn new(eps: f64) -> Result<Self, KernelError> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(KernelError::Epsilon(eps));
        }
        Ok(KernelRegularizer { eps })
    }

    pub fn none() -> Self {
        KernelRegularizer { eps: 0.0 }
    }

    pub fn profile(x: f64) -> f64 {
        (-x * x).exp()
    }

    pub fn chi(&self, k: &[i64], lambda: Complex64, m: f64) -> f64 {
        if self.eps == 0.0 {
            return 1.0;
        }
        let r2 = crate::lattice::norm_sqr(k) + lambda.norm().powf(2.0 / m);
        Self::profile(self.eps * r2.sqrt())
    }
}

pub fn theta0(m: f64) -> f64 {
    0.5 * m.min(1.0)
}

pub fn theta1(m: f64) -> f64 {
    1.0 - theta0(m)
}

/// Kernel samples on the uniform eta-grid of [-pi, pi)^n.
#[derive(Debug, Clone)]
pub struct KernelEvaluation {
    pub lambda: Complex64,
    pub eps: f64,
    pub sign: Sign,
    pub radius: u32,
    pub order: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub matrix_norm: linalg::MatrixNorm,
    pub values: MatrixGrid,
}

impl KernelEvaluation {
    pub fn n(&self) -> usize {
        self.values.n
    }

    pub fn size(&self) -> usize {
        self.values.size
    }

    pub fn origin_node(&self) -> usize {
        origin_node(self.n(), self.size())
    }

    pub fn at_origin(&self) -> CMatrix {
        self.values.at(self.origin_node())
    }

    pub fn eta(&self, node: usize) -> Vec<f64> {
        let size = self.size();
        let mut rest = node;
        let mut out = vec![0.0; self.n()];
        for j in (0..self.n()).rev() {
            out[j] = grid_coordinate(rest % size, size);
            rest /= size;
        }
        out
    }
}

fn origin_node(n: usize, size: usize) -> usize {
    (0..n).fold(0, |acc, _| acc * size + size / 2)
}

fn mode_values(
    a: &Symbol,
    lambda: Complex64,
    reg: KernelRegularizer,
    sign: Sign,
    bx: TruncationBox,
) -> Result<Vec<CMatrix>, KernelError> {
    let shift = sign.apply(lambda);
    let m = a.order;
    let modes = par::map_range(bx.len(), |i| {
        let k = bx.point(i);
        let chi = reg.chi(&k, lambda, m);
        linalg::shifted_inverse(&a.eval(&k), shift)
            .map(|(inv, _)| inv * Complex64::from(chi))
            .map_err(|e| SymbolError::SingularResolvent {
                k,
                lambda: shift,
                condition: e.condition,
            })
    });
    modes.into_iter().map(|r| r.map_err(KernelError::from)).collect()
}

/// K_eps(eta, lambda) = sum_{k in box} e^{ik.eta} chi_eps(k, lambda) (a(k) +- lambda)^{-1}.
pub fn kernel_sum(
    a: &Symbol,
    lambda: Complex64,
    reg: KernelRegularizer,
    sign: Sign,
    bx: TruncationBox,
    size: usize,
) -> Result<KernelEvaluation, KernelError> {
    if !size.is_multiple_of(2) {
        return Err(KernelError::OddGrid(size));
    }
    let modes = mode_values(a, lambda, reg, sign, bx)?;
    let values = synthesize_matrix(bx, &modes, size)?;
    Ok(KernelEvaluation {
        lambda,
        eps: reg.eps,
        sign,
        radius: bx.radius,
        order: a.order,
        theta0: theta0(a.order),
        theta1: theta1(a.order),
        matrix_norm: a.matrix_norm,
        values,
    })
}

/// Truncation radius and eta = 0 value after doubling from `start` until the
/// relative change drops below `rel_tol`.
pub fn adaptive_radius(
    a: &Symbol,
    lambda: Complex64,
    reg: KernelRegularizer,
    sign: Sign,
    start: u32,
    max_radius: u32,
    rel_tol: f64,
) -> Result<(u32, CMatrix), KernelError> {
    let origin = |radius: u32| -> Result<CMatrix, KernelError> {
        let modes = mode_values(a, lambda, reg, sign, TruncationBox::new(a.n, radius))?;
        Ok(modes.into_iter().fold(CMatrix::zeros(a.d, a.d), |acc, m| acc + m))
    };
    let mut radius = start.max(1);
    let mut prev = origin(radius)?;
    while radius < max_radius {
        radius = (radius * 2).min(max_radius);
        let next = origin(radius)?;
        let change = a.matrix_norm.of(&(&next - &prev));
        let scale = a.matrix_norm.of(&next);
        if change <= rel_tol * scale {
            return Ok((radius, next));
        }
        prev = next;
    }
    Err(KernelError::NotConverged(max_radius))
}

/// Kernel on a grid large enough for the adaptively chosen radius.
pub fn kernel_sum_adaptive(
    a: &Symbol,
    lambda: Complex64,
    reg: KernelRegularizer,
    sign: Sign,
    max_radius: u32,
    min_size: usize,
) -> Result<KernelEvaluation, KernelError> {
    let (radius, _) = adaptive_radius(a, lambda, reg, sign, 8, max_radius, 1e-3)?;
    let size = min_size.max(2 * radius as usize + 2);
    let size = size + size % 2;
    kernel_sum(a, lambda, reg, sign, TruncationBox::new(a.n, radius), size)
}

/// Grid quadrature of ||K(eta)|| against the normalized measure.
pub fn kernel_l1_norm(ev: &KernelEvaluation) -> f64 {
    let nodes = ev.values.nodes();
    let norms = par::map_range(nodes, |node| ev.matrix_norm.of(&ev.values.at(node)));
    norms.iter().sum::<f64>() / nodes as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseReport {
    pub max_ratio: f64,
    pub argmax: Vec<f64>,
    pub mu: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub nodes: usize,
}

/// r(eta) = |lambda| ||K(eta)|| |eta|^n (1 + mu|eta|) / (mu^th0 |eta|^th0 + mu^th1 |eta|^th1),
/// mu = |lambda|^{1/m}, maximized over the grid with eta = 0 left out.
pub fn pointwise_bound_check(ev: &KernelEvaluation) -> PointwiseReport {
    let n = ev.n() as i32;
    let modulus = ev.lambda.norm();
    let mu = modulus.powf(1.0 / ev.order);
    let (t0, t1) = (ev.theta0, ev.theta1);
    let origin = ev.origin_node();
    let ratios = par::map_range(ev.values.nodes(), |node| {
        if node == origin {
            return 0.0;
        }
        let e = ev.eta(node).iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm = ev.matrix_norm.of(&ev.values.at(node));
        modulus * norm * e.powi(n) * (1.0 + mu * e) / ((mu * e).powf(t0) + (mu * e).powf(t1))
    });
    let (best, max_ratio) = ratios
        .iter()
        .enumerate()
        .fold((origin, 0.0), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
    PointwiseReport {
        max_ratio,
        argmax: ev.eta(best),
        mu,
        theta0: t0,
        theta1: t1,
        nodes: ev.values.nodes() - 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SumVariant {
    /// sum |l|^th0 (1 + mu^2 + |mu l|^2)^{-m} <mu l>^{m-n}
    First,
    /// sum |l|^th1 (1 + mu^2 + |mu l|^2)^{-m} <mu l>^{m-n-1}
    Second,
}

/// Truncated lattice sum over l in mu^{-1} Z^n, l = k / mu with k in the box.
pub fn lattice_sum_lhs(mu: f64, m: f64, n: usize, variant: SumVariant, radius: u32) -> f64 {
    let (theta, shift) = match variant {
        SumVariant::First => (theta0(m), 0.0),
        SumVariant::Second => (theta1(m), 1.0),
    };
    let side = 2 * radius as usize + 1;
    let inner = (n > 1).then(|| TruncationBox::new(n - 1, radius));
    let inner_len = inner.map_or(1, |b| b.len());
    let rows = par::map_range(side, |i| {
        let k0 = i as i64 - radius as i64;
        let mut acc = 0.0;
        for idx in 0..inner_len {
            let mut k = inner.map_or_else(Vec::new, |b| b.point(idx));
            k.push(k0);
            let k2 = crate::lattice::norm_sqr(&k);
            let l = k2.sqrt() / mu;
            acc += l.powf(theta) * (1.0 + mu * mu + k2).powf(-m) * (1.0 + k2).powf(0.5 * (m - n as f64 - shift));
        }
        acc
    });
    rows.iter().sum()
}

/// |eta|^N / sum_{|gamma| = N} prod_j |e^{-i eta_j} - 1|^{gamma_j}.
pub fn char_inequality_check(eta: &[f64], power: u32) -> f64 {
    let norm = eta.iter().map(|x| x * x).sum::<f64>().sqrt();
    let factors: Vec<f64> = eta
        .iter()
        .map(|&x| (Complex64::from_polar(1.0, -x) - 1.0).norm())
        .collect();
    let den: f64 = crate::lattice::multi_indices_of_order(eta.len(), power)
        .iter()
        .map(|g| factors.iter().zip(&g.0).map(|(f, &e)| f.powi(e as i32)).product::<f64>())
        .sum();
    norm.powi(power as i32) / den
}

/// Maximum of the character ratio over the uniform grid of [-pi, pi)^n, origin excluded.
pub fn char_inequality_grid_max(n: usize, power: u32, per_axis: usize) -> f64 {
    let total = per_axis.pow(n as u32);
    par::map_range(total, |node| {
        let mut rest = node;
        let mut eta = vec![0.0; n];
        for j in (0..n).rev() {
            eta[j] = grid_coordinate(rest % per_axis, per_axis);
            rest /= per_axis;
        }
        if eta.iter().all(|&x| x == 0.0) {
            0.0
        } else {
            char_inequality_check(&eta, power)
        }
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// One row of a lambda sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub modulus: f64,
    pub eps: f64,
    pub radius: u32,
    pub scaled_l1: f64,
    pub max_ratio: f64,
}

pub fn sweep_row(ev: &KernelEvaluation) -> SweepRow {
    SweepRow {
        lambda_re: ev.lambda.re,
        lambda_im: ev.lambda.im,
        modulus: ev.lambda.norm(),
        eps: ev.eps,
        radius: ev.radius,
        scaled_l1: ev.lambda.norm() * kernel_l1_norm(ev),
        max_ratio: pointwise_bound_check(ev).max_ratio,
    }
}

/// max / min of a set of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

//! Lattice points, multi-indices, truncation boxes and the discrete
//! difference calculus on Z^n.

use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::CMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("difference stencil leaves the admissible domain at {point:?}")]
    OutsideDomain { point: Vec<i64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Covariable k in Z^n.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn zero(n: usize) -> Self {
        LatticePoint(vec![0; n])
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }
}

impl Deref for LatticePoint {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

/// Multi-index alpha in N_0^n.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, j: usize) -> Self {
        let mut v = vec![0; n];
        v[j] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// |alpha|
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// All beta <= alpha componentwise, lexicographic.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(Vec::with_capacity(self.dim()))];
        for &a in &self.0 {
            out = out
                .into_iter()
                .flat_map(|b| {
                    (0..=a).map(move |x| {
                        let mut v = b.0.clone();
                        v.push(x);
                        MultiIndex(v)
                    })
                })
                .collect();
        }
        out
    }

    /// binom(alpha, beta) = prod_j binom(alpha_j, beta_j).
    pub fn binomial(&self, beta: &MultiIndex) -> f64 {
        self.0
            .iter()
            .zip(&beta.0)
            .map(|(&a, &b)| binomial(a, b))
            .product()
    }

    pub fn checked_sub(&self, beta: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&beta.0)
            .map(|(&a, &b)| a.checked_sub(b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// k^alpha
    pub fn monomial(&self, k: &[i64]) -> f64 {
        self.0
            .iter()
            .zip(k)
            .map(|(&a, &kj)| (kj as f64).powi(a as i32))
            .product()
    }
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All multi-indices in dimension `n` with |alpha| <= `max_order`, sorted by
/// order then lexicographically.
pub fn multi_indices_up_to(n: usize, max_order: u32) -> Vec<MultiIndex> {
    let mut out: Vec<MultiIndex> = MultiIndex(vec![max_order; n])
        .below()
        .into_iter()
        .filter(|a| a.order() <= max_order)
        .collect();
    out.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| b.0.cmp(&a.0)));
    out
}

/// All multi-indices with |alpha| == `order`.
pub fn multi_indices_of_order(n: usize, order: u32) -> Vec<MultiIndex> {
    multi_indices_up_to(n, order)
        .into_iter()
        .filter(|a| a.order() == order)
        .collect()
}

/// The cube |k|_inf <= K in Z^n, enumerated lexicographically (axis 0 slowest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationBox {
    pub n: usize,
    pub radius: u32,
}

impl TruncationBox {
    pub fn new(n: usize, radius: u32) -> Self {
        assert!(n >= 1, "lattice dimension must be at least 1");
        TruncationBox { n, radius }
    }

    pub fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        k.len() == self.n && k.iter().all(|&x| x.unsigned_abs() <= self.radius as u64)
    }

    pub fn point(&self, mut idx: usize) -> Vec<i64> {
        let side = self.side();
        let mut k = vec![0i64; self.n];
        for j in (0..self.n).rev() {
            k[j] = (idx % side) as i64 - self.radius as i64;
            idx /= side;
        }
        k
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let side = self.side();
        Some(
            k.iter()
                .fold(0usize, |acc, &x| acc * side + (x + self.radius as i64) as usize),
        )
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Is `k` on the outermost shell |k|_inf == K?
    pub fn on_shell(&self, k: &[i64]) -> bool {
        k.iter().any(|&x| x.unsigned_abs() == self.radius as u64)
    }
}

pub fn norm_sqr(k: &[i64]) -> f64 {
    k.iter().map(|&x| (x as f64) * (x as f64)).sum()
}

/// Japanese bracket (1 + |k|^2)^{1/2}.
pub fn bracket(k: &[i64]) -> f64 {
    (1.0 + norm_sqr(k)).sqrt()
}

/// Anisotropic bracket (1 + |k|^2 + |lambda|^{2/m})^{1/2}.
pub fn aniso_bracket(k: &[i64], lambda: Complex64, m: f64) -> f64 {
    (1.0 + norm_sqr(k) + lambda.norm().powf(2.0 / m)).sqrt()
}

/// Quasi-homogeneous length (|k|^2 + |lambda|^{2/m})^{1/2}.
pub fn aniso_length(k: &[i64], lambda: Complex64, m: f64) -> f64 {
    (norm_sqr(k) + lambda.norm().powf(2.0 / m)).sqrt()
}

/// A function Z^n -> L(C^d), possibly defined only on part of the lattice.
pub trait LatticeFunction: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, k: &[i64]) -> CMatrix;
    fn contains(&self, k: &[i64]) -> bool {
        let _ = k;
        true
    }
}

impl<T: LatticeFunction + ?Sized> LatticeFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, k: &[i64]) -> CMatrix {
        (**self).eval(k)
    }
    fn contains(&self, k: &[i64]) -> bool {
        (**self).contains(k)
    }
}

/// Closure-backed lattice function defined everywhere.
pub struct FnLattice<F> {
    n: usize,
    f: F,
}

pub fn lattice_fn<F>(n: usize, f: F) -> FnLattice<F>
where
    F: Fn(&[i64]) -> CMatrix + Sync,
{
    FnLattice { n, f }
}

impl<F: Fn(&[i64]) -> CMatrix + Sync> LatticeFunction for FnLattice<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, k: &[i64]) -> CMatrix {
        (self.f)(k)
    }
}

/// Values stored on a truncation box; undefined outside it.
#[derive(Debug, Clone)]
pub struct Tabulated {
    pub domain: TruncationBox,
    pub values: Vec<CMatrix>,
}

impl Tabulated {
    pub fn from_fn<F: LatticeFunction + ?Sized>(domain: TruncationBox, f: &F) -> Self {
        let values = crate::par::map_range(domain.len(), |i| f.eval(&domain.point(i)));
        Tabulated { domain, values }
    }
}

impl LatticeFunction for Tabulated {
    fn dim(&self) -> usize {
        self.domain.n
    }
    fn eval(&self, k: &[i64]) -> CMatrix {
        let idx = self
            .domain
            .index_of(k)
            .unwrap_or_else(|| panic!("lattice point {k:?} outside tabulated domain"));
        self.values[idx].clone()
    }
    fn contains(&self, k: &[i64]) -> bool {
        self.domain.contains(k)
    }
}

/// Pointwise product k -> f(k) g(k).
pub struct Product<F, G>(pub F, pub G);

impl<F: LatticeFunction, G: LatticeFunction> LatticeFunction for Product<F, G> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, k: &[i64]) -> CMatrix {
        self.0.eval(k) * self.1.eval(k)
    }
    fn contains(&self, k: &[i64]) -> bool {
        self.0.contains(k) && self.1.contains(k)
    }
}

fn check_dim(n: usize, alpha: &MultiIndex, k: &[i64]) -> Result<(), LatticeError> {
    if alpha.dim() != n {
        return Err(LatticeError::Dimension { expected: n, got: alpha.dim() });
    }
    if k.len() != n {
        return Err(LatticeError::Dimension { expected: n, got: k.len() });
    }
    Ok(())
}

/// Samples `f` on the stencil {base + beta : beta <= alpha}, row-major.
fn sample_stencil<F: LatticeFunction + ?Sized>(
    f: &F,
    alpha: &MultiIndex,
    base: &[i64],
) -> Result<Vec<CMatrix>, LatticeError> {
    alpha
        .below()
        .iter()
        .map(|beta| {
            let p: Vec<i64> = base.iter().zip(&beta.0).map(|(&k, &b)| k + b as i64).collect();
            if f.contains(&p) {
                Ok(f.eval(&p))
            } else {
                Err(LatticeError::OutsideDomain { point: p })
            }
        })
        .collect()
}

/// Applies alpha_j first differences along every axis of a row-major table
/// of shape (alpha_j + 1)_j, leaving a single entry.
pub(crate) fn difference_table(mut table: Vec<CMatrix>, alpha: &MultiIndex) -> CMatrix {
    let mut shape: Vec<usize> = alpha.0.iter().map(|&a| a as usize + 1).collect();
    for axis in 0..shape.len() {
        for _ in 0..alpha.0[axis] {
            let stride: usize = shape[axis + 1..].iter().product();
            let mut new_shape = shape.clone();
            new_shape[axis] -= 1;
            let total: usize = new_shape.iter().product();
            let mut next = Vec::with_capacity(total);
            for flat in 0..total {
                // decompose flat over new_shape, recompose over shape
                let mut rem = flat;
                let mut src = 0usize;
                let mut mul = 1usize;
                let mut idx = vec![0usize; shape.len()];
                for j in (0..shape.len()).rev() {
                    idx[j] = rem % new_shape[j];
                    rem /= new_shape[j];
                }
                for j in (0..shape.len()).rev() {
                    src += idx[j] * mul;
                    mul *= shape[j];
                }
                next.push(&table[src + stride] - &table[src]);
            }
            table = next;
            shape = new_shape;
        }
    }
    debug_assert_eq!(table.len(), 1);
    table.pop().expect("non-empty difference table")
}

/// Forward difference Delta^alpha f(k), by repeated first differences.
pub fn forward_difference<F: LatticeFunction + ?Sized>(
    f: &F,
    alpha: &MultiIndex,
    k: &[i64],
) -> Result<CMatrix, LatticeError> {
    check_dim(f.dim(), alpha, k)?;
    let table = sample_stencil(f, alpha, k)?;
    Ok(difference_table(table, alpha))
}

/// Backward difference with stencil {k - alpha, ..., k}.
pub fn backward_difference<F: LatticeFunction + ?Sized>(
    f: &F,
    alpha: &MultiIndex,
    k: &[i64],
) -> Result<CMatrix, LatticeError> {
    check_dim(f.dim(), alpha, k)?;
    let base: Vec<i64> = k.iter().zip(&alpha.0).map(|(&x, &a)| x - a as i64).collect();
    let table = sample_stencil(f, alpha, &base)?;
    Ok(difference_table(table, alpha))
}

/// Right-hand side of the discrete Leibniz rule,
/// sum_{beta <= alpha} binom(alpha, beta) [Delta^beta f](k) [Delta^{alpha-beta} g](k + beta).
pub fn leibniz_rhs<F, G>(f: &F, g: &G, alpha: &MultiIndex, k: &[i64]) -> Result<CMatrix, LatticeError>
where
    F: LatticeFunction + ?Sized,
    G: LatticeFunction + ?Sized,
{
    check_dim(f.dim(), alpha, k)?;
    let mut acc: Option<CMatrix> = None;
    for beta in alpha.below() {
        let rest = alpha.checked_sub(&beta).expect("beta <= alpha");
        let shifted: Vec<i64> = k.iter().zip(&beta.0).map(|(&x, &b)| x + b as i64).collect();
        let term = forward_difference(f, &beta, k)? * forward_difference(g, &rest, &shifted)?
            * Complex64::from(alpha.binomial(&beta));
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    Ok(acc.expect("alpha.below() contains zero"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, scalar};

    fn scalar_fn(f: impl Fn(i64) -> f64 + Sync) -> FnLattice<impl Fn(&[i64]) -> CMatrix + Sync> {
        lattice_fn(1, move |k: &[i64]| scalar(1, Complex64::from(f(k[0]))))
    }

    fn re(m: &CMatrix) -> f64 {
        m[(0, 0)].re
    }

    #[test]
    fn brackets() {
        assert_eq!(bracket(&[0, 0]), 1.0);
        assert!((bracket(&[1, 2]) - 6f64.sqrt()).abs() < 1e-15);
        assert!((bracket(&[3, 4]) - 26f64.sqrt()).abs() < 1e-15);
        assert_eq!(aniso_bracket(&[0], Complex64::new(0.0, 0.0), 2.0), 1.0);
        assert!((aniso_bracket(&[0], Complex64::new(4.0, 0.0), 2.0) - 5f64.sqrt()).abs() < 1e-15);
        assert!((aniso_bracket(&[1, 0], Complex64::new(0.0, 8.0), 3.0) - 6f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn first_and_second_differences() {
        let sq = scalar_fn(|k| (k * k) as f64);
        assert_eq!(re(&forward_difference(&sq, &MultiIndex(vec![1]), &[3]).unwrap()), 7.0);
        for k in -4..5 {
            assert_eq!(re(&forward_difference(&sq, &MultiIndex(vec![2]), &[k]).unwrap()), 2.0);
        }
        assert_eq!(re(&backward_difference(&sq, &MultiIndex(vec![1]), &[3]).unwrap()), 5.0);
        let lin = scalar_fn(|k| k as f64);
        assert_eq!(re(&backward_difference(&lin, &MultiIndex(vec![1]), &[5]).unwrap()), 1.0);
        let c = scalar_fn(|_| 4.5);
        for a in 1..4 {
            assert_eq!(re(&backward_difference(&c, &MultiIndex(vec![a]), &[0]).unwrap()), 0.0);
        }
        assert_eq!(re(&forward_difference(&sq, &MultiIndex(vec![0]), &[3]).unwrap()), 9.0);
    }

    #[test]
    fn matrix_valued_difference() {
        let f = lattice_fn(1, |k: &[i64]| identity(2) * Complex64::from(1.0 + (k[0] * k[0]) as f64));
        let d = forward_difference(&f, &MultiIndex(vec![1]), &[2]).unwrap();
        assert_eq!(d, identity(2) * Complex64::from(5.0));
    }

    #[test]
    fn stencil_outside_domain_is_an_error() {
        let sq = scalar_fn(|k| (k * k) as f64);
        let tab = Tabulated::from_fn(TruncationBox::new(1, 3), &sq);
        assert!(forward_difference(&tab, &MultiIndex(vec![1]), &[2]).is_ok());
        assert_eq!(
            forward_difference(&tab, &MultiIndex(vec![1]), &[3]),
            Err(LatticeError::OutsideDomain { point: vec![4] })
        );
        assert!(backward_difference(&tab, &MultiIndex(vec![2]), &[-2]).is_err());
    }

    #[test]
    fn leibniz_scalar_examples() {
        let lin = scalar_fn(|k| k as f64);
        let v = leibniz_rhs(&lin, &lin, &MultiIndex(vec![1]), &[3]).unwrap();
        assert_eq!(re(&v), 7.0);
        let c = scalar_fn(|_| 2.0);
        let g = scalar_fn(|k| (k * k * k) as f64);
        let alpha = MultiIndex(vec![2]);
        let lhs = leibniz_rhs(&c, &g, &alpha, &[1]).unwrap();
        let rhs = forward_difference(&g, &alpha, &[1]).unwrap() * Complex64::from(2.0);
        assert!((re(&lhs) - re(&rhs)).abs() < 1e-12);
    }

    #[test]
    fn box_enumeration() {
        let b = TruncationBox::new(2, 2);
        assert_eq!(b.len(), 25);
        assert_eq!(b.point(0), vec![-2, -2]);
        assert_eq!(b.point(1), vec![-2, -1]);
        assert_eq!(b.point(24), vec![2, 2]);
        for i in 0..b.len() {
            assert_eq!(b.index_of(&b.point(i)), Some(i));
        }
        assert_eq!(b.index_of(&[3, 0]), None);
        assert!(b.on_shell(&[0, -2]));
        assert!(!b.on_shell(&[1, 1]));
    }

    #[test]
    fn multi_index_enumeration() {
        let all = multi_indices_up_to(2, 2);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], MultiIndex(vec![0, 0]));
        assert_eq!(multi_indices_of_order(2, 3).len(), 4);
        assert_eq!(multi_indices_of_order(3, 2).len(), 6);
        assert_eq!(MultiIndex(vec![2, 1]).binomial(&MultiIndex(vec![1, 1])), 2.0);
    }
}

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use torus_psido::lattice::{lattice_fn, LatticeFunction, MultiIndex, Tabulated, TruncationBox};
use torus_psido::linalg::CMatrix;
use torus_psido::symbol::{PolynomialSymbolSpec, Symbol};
use torus_psido::transform::SpectralFunction;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| normal(rng))
}

pub fn random_spectral(bx: TruncationBox, d: usize, rng: &mut ChaCha8Rng) -> SpectralFunction {
    let mut v = SpectralFunction::zeros(bx, d);
    for z in v.coeffs.iter_mut() {
        *z = normal(rng);
    }
    v
}

pub fn random_table(domain: TruncationBox, d: usize, rng: &mut ChaCha8Rng) -> Tabulated {
    Tabulated {
        domain,
        values: (0..domain.len()).map(|_| random_matrix(d, rng)).collect(),
    }
}

/// Random values on `support`, zero elsewhere on the lattice.
pub fn compactly_supported(table: Tabulated) -> impl LatticeFunction {
    let n = table.domain.n;
    let d = table.values[0].nrows();
    lattice_fn(n, move |k: &[i64]| {
        if table.contains(k) {
            table.eval(k)
        } else {
            CMatrix::zeros(d, d)
        }
    })
}

/// sum over |alpha| <= max_order of M_alpha k^alpha with entries in [-1, 1]^2.
pub fn random_polynomial(n: usize, d: usize, max_order: u32, rng: &mut ChaCha8Rng) -> Symbol {
    let terms = torus_psido::lattice::multi_indices_up_to(n, max_order)
        .into_iter()
        .map(|alpha: MultiIndex| {
            let m = CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            (alpha, m)
        })
        .collect();
    Symbol::polynomial(
        n,
        PolynomialSymbolSpec {
            terms,
            bracket_power: None,
        },
    )
    .expect("valid polynomial")
}

pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

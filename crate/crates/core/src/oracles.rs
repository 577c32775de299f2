//! Naive reference implementations.
//!
//! Nothing here shares code with the fast paths in `transform` and `spaces`:
//! sums are written out literally with their quadratic (or worse) cost.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::lattice::{LatticeError, LatticeFunction, MultiIndex, TruncationBox};
use crate::linalg::{identity, nilpotent_shift, CMatrix};
use crate::transform::{GridFunction, MatrixGrid, SpectralFunction};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("c + lambda = 0: nilpotent resolvent undefined")]
pub struct DegenerateShift;

/// Literal quadrature u^(k) = N^{-n} sum_x e^{-ik.x} u(x).
pub fn dft_direct(u: &GridFunction, bx: TruncationBox) -> SpectralFunction {
    let nodes = u.nodes();
    let coords: Vec<Vec<f64>> = (0..nodes).map(|node| u.coords(node)).collect();
    let mut out = SpectralFunction::zeros(bx, u.d);
    for idx in 0..bx.len() {
        let k = bx.point(idx);
        for c in 0..u.d {
            let mut acc = Complex64::new(0.0, 0.0);
            for (node, x) in coords.iter().enumerate() {
                let phase: f64 = k.iter().zip(x).map(|(&kj, &xj)| kj as f64 * xj).sum();
                acc += Complex64::from_polar(1.0, -phase) * u.values[c * nodes + node];
            }
            out.coeffs[idx * u.d + c] = acc / nodes as f64;
        }
    }
    out
}

/// Literal circular convolution N^{-n} sum_y f(x - y) g(y) on an even grid.
pub fn convolve_direct(f: &MatrixGrid, g: &GridFunction) -> GridFunction {
    assert_eq!(g.size % 2, 0, "x - y must be a node");
    let (n, size) = (g.n, g.size);
    let nodes = g.nodes();
    let scalar_kernel = f.rows == 1 && f.cols == 1;
    let rows = if scalar_kernel { g.d } else { f.rows };
    let mut out = GridFunction::zeros(n, rows, size);
    let index = |node: usize| g.node_index(node);
    for xi in 0..nodes {
        let ix = index(xi);
        for yi in 0..nodes {
            let iy = index(yi);
            // coordinate x - y = 2 pi (ix - iy) / N sits at index ix - iy + N/2
            let diff = ix
                .iter()
                .zip(&iy)
                .fold(0usize, |acc, (&a, &b)| acc * size + (a + size + size / 2 - b) % size);
            let kernel = f.at(diff);
            let gy = g.at(yi);
            for r in 0..rows {
                let v = if scalar_kernel {
                    kernel[(0, 0)] * gy[r]
                } else {
                    (0..f.cols).map(|c| kernel[(r, c)] * gy[c]).sum()
                };
                out.values[r * nodes + xi] += v / nodes as f64;
            }
        }
    }
    out
}

/// (c(I + N) + lambda)^{-1} = sum_{j<d} (-c)^j N^j / (c + lambda)^{j+1}.
pub fn nilpotent_resolvent(c: Complex64, lambda: Complex64, d: usize) -> Result<CMatrix, DegenerateShift> {
    let s = c + lambda;
    if s.norm() == 0.0 {
        return Err(DegenerateShift);
    }
    let shift = nilpotent_shift(d);
    let mut power = identity(d);
    let mut acc = CMatrix::zeros(d, d);
    let mut coeff = s.inv();
    for _ in 0..d {
        acc += &power * coeff;
        power = &power * &shift;
        coeff *= -c / s;
    }
    Ok(acc)
}

/// exp(-t c (I + N)) = e^{-tc} sum_{j<d} (-tc)^j N^j / j!.
pub fn nilpotent_exponential(c: Complex64, t: f64, d: usize) -> CMatrix {
    let shift = nilpotent_shift(d);
    let mut power = identity(d);
    let mut acc = CMatrix::zeros(d, d);
    let mut coeff = Complex64::new(1.0, 0.0);
    for j in 0..d {
        acc += &power * coeff;
        power = &power * &shift;
        coeff *= -t * c / (j + 1) as f64;
    }
    acc * (-t * c).exp()
}

/// Delta^alpha f(k) as the signed binomial sum over f(k + beta).
pub fn difference_by_expansion<F: LatticeFunction + ?Sized>(
    f: &F,
    alpha: &MultiIndex,
    k: &[i64],
) -> Result<CMatrix, LatticeError> {
    let mut acc: Option<CMatrix> = None;
    for beta in alpha.below() {
        let p: Vec<i64> = k.iter().zip(&beta.0).map(|(&x, &b)| x + b as i64).collect();
        if !f.contains(&p) {
            return Err(LatticeError::OutsideDomain { point: p });
        }
        let sign = if (alpha.order() - beta.order()).is_multiple_of(2) { 1.0 } else { -1.0 };
        let term = f.eval(&p) * Complex64::from(sign * alpha.binomial(&beta));
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    Ok(acc.expect("beta = 0 always present"))
}

/// Shape of random band-limited probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    pub n: usize,
    pub d: usize,
    pub size: usize,
    pub radius: u32,
}

impl ProbeSpec {
    pub fn band(&self) -> TruncationBox {
        TruncationBox::new(self.n, self.radius)
    }
}

fn normal_pair(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Seeded band-limited probes in spectral form.
///
/// Probe i cycles through five families: i.i.d. full band, a single random
/// mode, a Gaussian wave packet, a single mode on the outer shell, and a
/// single low mode with |k|_inf <= 2.
pub fn random_spectral_probes(spec: ProbeSpec, count: usize, seed: u64) -> Vec<SpectralFunction> {
    let bx = spec.band();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = spec.radius as i64;
    (0..count)
        .map(|i| {
            let mut v = SpectralFunction::zeros(bx, spec.d);
            let single = |v: &mut SpectralFunction, k: Vec<i64>, rng: &mut ChaCha8Rng| {
                let idx = bx.index_of(&k).expect("probe mode inside band");
                for z in v.mode_mut(idx) {
                    *z = normal_pair(rng);
                }
            };
            match i % 5 {
                0 => {
                    for z in v.coeffs.iter_mut() {
                        *z = normal_pair(&mut rng);
                    }
                }
                1 => {
                    let k = (0..spec.n).map(|_| rng.gen_range(-radius..=radius)).collect();
                    single(&mut v, k, &mut rng);
                }
                2 => {
                    let center: Vec<f64> = (0..spec.n).map(|_| rng.gen_range(-radius..=radius) as f64).collect();
                    let width = rng.gen_range(0.5..=(radius as f64 / 2.0).max(1.0));
                    for idx in 0..bx.len() {
                        let k = bx.point(idx);
                        let r2: f64 = k.iter().zip(&center).map(|(&a, &b)| (a as f64 - b).powi(2)).sum();
                        let env = (-r2 / (2.0 * width * width)).exp();
                        for z in v.mode_mut(idx) {
                            *z = normal_pair(&mut rng) * env;
                        }
                    }
                }
                3 => {
                    let mut k: Vec<i64> = (0..spec.n).map(|_| rng.gen_range(-radius..=radius)).collect();
                    let axis = rng.gen_range(0..spec.n);
                    k[axis] = if rng.gen_bool(0.5) { radius } else { -radius };
                    single(&mut v, k, &mut rng);
                }
                _ => {
                    let low = radius.min(2);
                    let k = (0..spec.n).map(|_| rng.gen_range(-low..=low)).collect();
                    single(&mut v, k, &mut rng);
                }
            }
            v
        })
        .collect()
}

/// Seeded band-limited probes on the grid.
pub fn random_probes(spec: ProbeSpec, count: usize, seed: u64) -> Vec<GridFunction> {
    random_spectral_probes(spec, count, seed)
        .iter()
        .map(|v| crate::transform::synthesize(v, spec.size).expect("probe band fits the grid"))
        .collect()
}

/// max over probes of norm_out(T u) / norm_in(u); zero probes are skipped.
pub fn empirical_operator_norm_on<I, O, T, NI, NO>(op: T, norm_in: NI, norm_out: NO, probes: &[I]) -> f64
where
    I: Sync,
    O: Send,
    T: Fn(&I) -> O + Sync + Send,
    NI: Fn(&I) -> f64 + Sync + Send,
    NO: Fn(&O) -> f64 + Sync + Send,
{
    crate::par::map_slice(probes, |u| {
        let den = norm_in(u);
        if den == 0.0 {
            0.0
        } else {
            norm_out(&op(u)) / den
        }
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Probe-based lower estimate of an operator norm on band-limited grid functions.
pub fn empirical_operator_norm<T, NI, NO>(
    op: T,
    norm_in: NI,
    norm_out: NO,
    spec: ProbeSpec,
    batch: usize,
    seed: u64,
) -> f64
where
    T: Fn(&GridFunction) -> GridFunction + Sync + Send,
    NI: Fn(&GridFunction) -> f64 + Sync + Send,
    NO: Fn(&GridFunction) -> f64 + Sync + Send,
{
    let probes = random_probes(spec, batch, seed);
    empirical_operator_norm_on(op, norm_in, norm_out, &probes)
}

/// (2 pi)^{-1/2} (F_R^{-1} M) * u for a one-dimensional periodic u, as a
/// continuous convolution over R truncated to `periods` periods on each side.
///
/// The kernel w(y) = (2 pi)^{-1} int M(xi) e^{iy xi} dxi is integrated by the
/// trapezoidal rule with `xi_nodes` nodes on [-support, support]; the
/// y-integral uses the grid spacing 2 pi / N.
pub fn transference_convolution(
    profile: impl Fn(f64) -> f64,
    support: f64,
    u: &GridFunction,
    periods: usize,
    xi_nodes: usize,
) -> GridFunction {
    assert_eq!(u.n, 1, "transference oracle is one-dimensional");
    let size = u.size;
    let h = 2.0 * PI / size as f64;
    let dxi = 2.0 * support / (xi_nodes - 1) as f64;
    let xis: Vec<(f64, f64)> = (0..xi_nodes)
        .map(|q| {
            let xi = -support + q as f64 * dxi;
            let w = if q == 0 || q == xi_nodes - 1 { 0.5 } else { 1.0 };
            (xi, w * dxi * profile(xi))
        })
        .collect();
    let span = (periods * size) as i64;
    let kernel: Vec<Complex64> = (-span..=span)
        .map(|j| {
            let y = j as f64 * h;
            let acc: Complex64 = xis.iter().map(|&(xi, w)| Complex64::from_polar(w, y * xi)).sum();
            acc / (2.0 * PI)
        })
        .collect();
    let mut out = GridFunction::zeros(1, u.d, size);
    for i in 0..size {
        for (off, &w) in kernel.iter().enumerate() {
            let j = off as i64 - span;
            let src = (i as i64 - j).rem_euclid(size as i64) as usize;
            for c in 0..u.d {
                out.values[c * size + i] += w * u.values[c * size + src] * h;
            }
        }
    }
    out
}

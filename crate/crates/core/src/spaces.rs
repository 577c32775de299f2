//! Littlewood-Paley decomposition and the L^p, W^k_p and B^s_pq norms on the
//! torus, plus toroidal convolution.
//!
//! All integrals use the normalized measure (2 pi)^{-n} dx, realized on the
//! grid as the plain node average.

use num_complex::Complex64;
use rustfft::FftDirection;
use thiserror::Error;

use crate::lattice::{multi_indices_up_to, TruncationBox};
use crate::linalg::FiberNorm;
use crate::par;
use crate::transform::{self, analyze, synthesize, GridFunction, MatrixGrid, SpectralFunction, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpacesError {
    #[error("exponent {name} = {value} must lie in [1, inf]")]
    Exponent { name: &'static str, value: f64 },
    #[error("dyadic level {j} outside 0..={levels}")]
    Level { j: usize, levels: usize },
    #[error("dyadic decomposition with {levels} levels covers |xi| <= {cover}, band needs {needed}")]
    Coverage { levels: usize, cover: f64, needed: f64 },
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

fn check_exponent(name: &'static str, value: f64) -> Result<(), SpacesError> {
    if value >= 1.0 && !value.is_nan() {
        Ok(())
    } else {
        Err(SpacesError::Exponent { name, value })
    }
}

/// C-infinity step: 0 for t <= 0, 1 for t >= 1.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = |s: f64| (-1.0 / s).exp();
    f(t) / (f(t) + f(1.0 - t))
}

/// Dyadic family phi_0, ..., phi_J with phi_j(xi) = phi_0(2^{-j} xi) - phi_0(2^{1-j} xi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicDecomposition {
    pub levels: usize,
}

impl DyadicDecomposition {
    /// Levels 0..=J, J >= 1.
    pub fn new(levels: usize) -> Self {
        assert!(levels >= 1, "a dyadic decomposition needs J >= 1");
        DyadicDecomposition { levels }
    }

    /// J = ceil(log2 K) + 1, enough to cover a band of radius K.
    pub fn for_band(radius: u32) -> Self {
        let j = if radius <= 1 {
            0
        } else {
            (radius as f64).log2().ceil() as usize
        };
        DyadicDecomposition::new(j + 1)
    }

    /// phi_0(|xi|) = S((3/2 - |xi|) / (1/2))
    pub fn base(r: f64) -> f64 {
        smoothstep((1.5 - r) / 0.5)
    }

    pub fn phi(&self, j: usize, r: f64) -> f64 {
        if j == 0 {
            Self::base(r)
        } else {
            let scale = 2f64.powi(j as i32);
            Self::base(r / scale) - Self::base(2.0 * r / scale)
        }
    }

    /// Radius up to which the levels sum to one.
    pub fn cover(&self) -> f64 {
        2f64.powi(self.levels as i32)
    }
}

/// Builds the standard family with levels 0..=J.
pub fn build_dyadic(levels: usize) -> DyadicDecomposition {
    DyadicDecomposition::new(levels)
}

/// (N^{-n} sum_x |u(x)|^p)^{1/p}, max over nodes for p = inf.
pub fn lp_norm(u: &GridFunction, p: f64) -> Result<f64, SpacesError> {
    lp_norm_with(u, p, FiberNorm::Euclidean)
}

pub fn lp_norm_with(u: &GridFunction, p: f64, fiber: FiberNorm) -> Result<f64, SpacesError> {
    check_exponent("p", p)?;
    let nodes = u.nodes();
    let pointwise = (0..nodes).map(|node| fiber.of(&u.at(node)));
    Ok(if p.is_infinite() {
        pointwise.fold(0.0, f64::max)
    } else {
        (pointwise.map(|v| v.powf(p)).sum::<f64>() / nodes as f64).powf(1.0 / p)
    })
}

/// (sum_{|alpha| <= order} |D^alpha u|_p^p)^{1/p}; max over alpha for p = inf.
pub fn sobolev_norm(u: &GridFunction, order: u32, p: f64) -> Result<f64, SpacesError> {
    check_exponent("p", p)?;
    let spec = analyze(u, u.full_band())?;
    sobolev_norm_spectral(&spec, u.size, order, p)
}

/// Sobolev norm of band-limited spectral data sampled on an N-grid.
pub fn sobolev_norm_spectral(v: &SpectralFunction, size: usize, order: u32, p: f64) -> Result<f64, SpacesError> {
    check_exponent("p", p)?;
    let alphas = multi_indices_up_to(v.n(), order);
    let parts = par::map_slice(&alphas, |alpha| -> Result<f64, SpacesError> {
        let dv = v.map_modes(v.d, |k, z| {
            let f = alpha.monomial(k);
            z.iter().map(|w| w * f).collect()
        });
        lp_norm(&synthesize(&dv, size)?, p)
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(if p.is_infinite() {
        parts.into_iter().fold(0.0, f64::max)
    } else {
        parts.into_iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
    })
}

fn check_cover(dec: &DyadicDecomposition, bx: TruncationBox) -> Result<(), SpacesError> {
    let needed = bx.radius as f64 * (bx.n as f64).sqrt();
    if needed > dec.cover() {
        return Err(SpacesError::Coverage {
            levels: dec.levels,
            cover: dec.cover(),
            needed,
        });
    }
    Ok(())
}

fn block_spectral(v: &SpectralFunction, j: usize, dec: &DyadicDecomposition) -> SpectralFunction {
    v.map_modes(v.d, |k, z| {
        let w = dec.phi(j, crate::lattice::norm_sqr(k).sqrt());
        z.iter().map(|x| x * w).collect()
    })
}

/// op[phi_j] u
pub fn lp_block(u: &GridFunction, j: usize, dec: &DyadicDecomposition) -> Result<GridFunction, SpacesError> {
    if j > dec.levels {
        return Err(SpacesError::Level { j, levels: dec.levels });
    }
    let v = analyze(u, u.full_band())?;
    Ok(synthesize(&block_spectral(&v, j, dec), u.size)?)
}

/// |op[phi_j] u|_{L^p} for j = 0..=J.
pub fn block_norms(u: &GridFunction, p: f64, dec: &DyadicDecomposition) -> Result<Vec<f64>, SpacesError> {
    let v = analyze(u, u.full_band())?;
    block_norms_spectral(&v, u.size, p, dec)
}

pub fn block_norms_spectral(
    v: &SpectralFunction,
    size: usize,
    p: f64,
    dec: &DyadicDecomposition,
) -> Result<Vec<f64>, SpacesError> {
    check_exponent("p", p)?;
    check_cover(dec, v.bx)?;
    par::map_range(dec.levels + 1, |j| -> Result<f64, SpacesError> {
        lp_norm(&synthesize(&block_spectral(v, j, dec), size)?, p)
    })
    .into_iter()
    .collect()
}

/// |(2^{js} b_j)_j|_{l^q} from precomputed block norms b_j.
pub fn besov_from_blocks(blocks: &[f64], s: f64, q: f64) -> Result<f64, SpacesError> {
    check_exponent("q", q)?;
    let weighted: Vec<f64> = blocks.iter().enumerate().map(|(j, b)| 2f64.powf(j as f64 * s) * b).collect();
    let max = weighted.iter().cloned().fold(0.0, f64::max);
    if q.is_infinite() || max == 0.0 {
        return Ok(max);
    }
    Ok(max * weighted.iter().map(|x| (x / max).powf(q)).sum::<f64>().powf(1.0 / q))
}

pub fn besov_norm(u: &GridFunction, s: f64, p: f64, q: f64, dec: &DyadicDecomposition) -> Result<f64, SpacesError> {
    check_exponent("q", q)?;
    besov_from_blocks(&block_norms(u, p, dec)?, s, q)
}

/// (f * g)(x) = N^{-n} sum_y f(x - y) g(y), computed spectrally.
///
/// Needs an even grid size so that x - y is again a node. A 1x1 kernel acts
/// as a scalar on every component of g.
pub fn convolve_torus(f: &MatrixGrid, g: &GridFunction) -> Result<GridFunction, SpacesError> {
    if f.n != g.n || f.size != g.size {
        return Err(SpacesError::Grid(format!(
            "kernel on (n, N) = ({}, {}), function on ({}, {})",
            f.n, f.size, g.n, g.size
        )));
    }
    if !g.size.is_multiple_of(2) {
        return Err(SpacesError::Grid(format!("convolution needs an even grid size, got {}", g.size)));
    }
    let scalar_kernel = f.rows == 1 && f.cols == 1;
    if !scalar_kernel && f.cols != g.d {
        return Err(SpacesError::Grid(format!("{}x{} kernel cannot act on d = {}", f.rows, f.cols, g.d)));
    }
    let (n, size) = (g.n, g.size);
    let nodes = g.nodes();
    let fft_planes = |data: &[Complex64], count: usize| -> Vec<Vec<Complex64>> {
        par::map_range(count, |e| {
            let mut plane = data[e * nodes..(e + 1) * nodes].to_vec();
            transform::fft_nd(&mut plane, n, size, FftDirection::Forward);
            plane
        })
    };
    let fh = fft_planes(&f.values, f.rows * f.cols);
    let gh = fft_planes(&g.values, g.d);
    // (-1)^{m_1 + ... + m_n} realizes the half-period shift putting x = 0 at index N/2
    let sign: Vec<f64> = (0..nodes)
        .map(|flat| {
            let mut rem = flat;
            let mut s = 0usize;
            for _ in 0..n {
                s += rem % size;
                rem /= size;
            }
            if s.is_multiple_of(2) { 1.0 } else { -1.0 }
        })
        .collect();
    let rows = if scalar_kernel { g.d } else { f.rows };
    let norm = 1.0 / (nodes as f64 * nodes as f64);
    let out_planes = par::map_range(rows, |r| {
        let mut plane = vec![Complex64::new(0.0, 0.0); nodes];
        for (m, slot) in plane.iter_mut().enumerate() {
            let acc = if scalar_kernel {
                fh[0][m] * gh[r][m]
            } else {
                (0..f.cols).map(|c| fh[r * f.cols + c][m] * gh[c][m]).sum()
            };
            *slot = acc * sign[m];
        }
        transform::fft_nd(&mut plane, n, size, FftDirection::Inverse);
        for z in plane.iter_mut() {
            *z *= norm;
        }
        plane
    });
    Ok(GridFunction {
        n,
        d: rows,
        size,
        values: out_planes.into_iter().flatten().collect(),
    })
}

//! Toroidal Fourier analysis and synthesis on uniform grids, and the
//! quantization op[a] of a symbol acting on vector-valued functions.
//!
//! Grid nodes are x_i = -pi + 2 pi i / N per axis. Coefficients use the
//! normalized measure, u^(k) = N^{-n} sum_x e^{-ik.x} u(x), which is exact
//! for functions band-limited to |k|_inf <= K whenever N >= 2K + 1.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use thiserror::Error;

use crate::lattice::{MultiIndex, TruncationBox};
use crate::linalg::{CMatrix, CVector};
use crate::par;
use crate::symbol::{Symbol, SymbolError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("grid size {size} cannot resolve band radius {radius} (need N >= 2K + 1)")]
    Aliasing { size: usize, radius: u32 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// Vector-valued samples on the uniform grid of T^n.
///
/// Values are stored component-major: `values[c * N^n + node]`, nodes
/// row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub n: usize,
    pub d: usize,
    pub size: usize,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(n: usize, d: usize, size: usize) -> Self {
        GridFunction {
            n,
            d,
            size,
            values: vec![Complex64::new(0.0, 0.0); d * size.pow(n as u32)],
        }
    }

    pub fn from_fn(n: usize, d: usize, size: usize, f: impl Fn(&[f64]) -> Vec<Complex64>) -> Self {
        let mut u = GridFunction::zeros(n, d, size);
        let nodes = u.nodes();
        for node in 0..nodes {
            let x = u.coords(node);
            let v = f(&x);
            assert_eq!(v.len(), d, "fiber dimension");
            for (c, z) in v.into_iter().enumerate() {
                u.values[c * nodes + node] = z;
            }
        }
        u
    }

    /// e^{ik0.x} z sampled on the grid.
    pub fn plane_wave(size: usize, k0: &[i64], z: &[Complex64]) -> Self {
        let k0 = k0.to_vec();
        let z = z.to_vec();
        GridFunction::from_fn(k0.len(), z.len(), size, move |x| {
            let phase: f64 = k0.iter().zip(x).map(|(&k, &xj)| k as f64 * xj).sum();
            let e = Complex64::from_polar(1.0, phase);
            z.iter().map(|&zc| e * zc).collect()
        })
    }

    pub fn constant(n: usize, size: usize, z: &[Complex64]) -> Self {
        let z = z.to_vec();
        GridFunction::from_fn(n, z.len(), size, move |_| z.clone())
    }

    /// N^n
    pub fn nodes(&self) -> usize {
        self.size.pow(self.n as u32)
    }

    /// Multi-index of a flat node number.
    pub fn node_index(&self, mut node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for j in (0..self.n).rev() {
            idx[j] = node % self.size;
            node /= self.size;
        }
        idx
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.node_index(node)
            .into_iter()
            .map(|i| grid_coordinate(i, self.size))
            .collect()
    }

    /// Fiber vector at a node.
    pub fn at(&self, node: usize) -> Vec<Complex64> {
        let nodes = self.nodes();
        (0..self.d).map(|c| self.values[c * nodes + node]).collect()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let nodes = self.nodes();
        &self.values[c * nodes..(c + 1) * nodes]
    }

    /// Largest band radius this grid resolves, floor((N - 1) / 2).
    pub fn band_radius(&self) -> u32 {
        ((self.size - 1) / 2) as u32
    }

    pub fn full_band(&self) -> TruncationBox {
        TruncationBox::new(self.n, self.band_radius())
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &GridFunction) -> bool {
        self.n == other.n && self.d == other.d && self.size == other.size
    }

    /// a u + b v
    pub fn axpby(&self, a: Complex64, b: Complex64, other: &GridFunction) -> GridFunction {
        assert!(self.same_shape(other));
        GridFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
            ..*self
        }
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|&x| x * c).collect(),
            ..*self
        }
    }
}

/// x_i = -pi + 2 pi i / N
pub fn grid_coordinate(i: usize, size: usize) -> f64 {
    -PI + 2.0 * PI * i as f64 / size as f64
}

/// Truncated Fourier coefficients, stored point-major: `coeffs[idx * d + c]`
/// with `idx` the box enumeration index.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    pub d: usize,
    pub bx: TruncationBox,
    pub coeffs: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn zeros(bx: TruncationBox, d: usize) -> Self {
        SpectralFunction {
            d,
            bx,
            coeffs: vec![Complex64::new(0.0, 0.0); bx.len() * d],
        }
    }

    /// delta_{k0} z
    pub fn delta(bx: TruncationBox, k0: &[i64], z: &[Complex64]) -> Self {
        let mut v = SpectralFunction::zeros(bx, z.len());
        let idx = bx.index_of(k0).expect("k0 inside the box");
        v.coeffs[idx * z.len()..(idx + 1) * z.len()].copy_from_slice(z);
        v
    }

    pub fn n(&self) -> usize {
        self.bx.n
    }

    pub fn coefficient(&self, k: &[i64]) -> Option<&[Complex64]> {
        self.bx.index_of(k).map(|i| &self.coeffs[i * self.d..(i + 1) * self.d])
    }

    pub fn mode(&self, idx: usize) -> &[Complex64] {
        &self.coeffs[idx * self.d..(idx + 1) * self.d]
    }

    pub fn mode_mut(&mut self, idx: usize) -> &mut [Complex64] {
        &mut self.coeffs[idx * self.d..(idx + 1) * self.d]
    }

    /// Applies `f(k, v)` to every mode, possibly in parallel.
    pub fn map_modes<F>(&self, d_out: usize, f: F) -> SpectralFunction
    where
        F: Fn(&[i64], &[Complex64]) -> Vec<Complex64> + Sync + Send,
    {
        let per_mode = par::map_range(self.bx.len(), |i| {
            let v = f(&self.bx.point(i), self.mode(i));
            debug_assert_eq!(v.len(), d_out);
            v
        });
        SpectralFunction {
            d: d_out,
            bx: self.bx,
            coeffs: per_mode.into_iter().flatten().collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &SpectralFunction) -> f64 {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// sum_k |v(k)|^2
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// In-place unnormalized n-dimensional FFT of one component plane.
pub(crate) fn fft_nd(plane: &mut [Complex64], n: usize, size: usize, direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft(size, direction);
    let total = plane.len();
    let mut lane = vec![Complex64::new(0.0, 0.0); size];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..n {
        let stride = size.pow((n - 1 - axis) as u32);
        let block = stride * size;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (t, slot) in lane.iter_mut().enumerate() {
                    *slot = plane[base + t * stride];
                }
                fft.process_with_scratch(&mut lane, &mut scratch);
                for (t, &val) in lane.iter().enumerate() {
                    plane[base + t * stride] = val;
                }
            }
        }
    }
}

/// Flat FFT-array index of lattice point k on an N-grid.
pub(crate) fn wrapped_index(k: &[i64], size: usize) -> usize {
    let s = size as i64;
    k.iter().fold(0usize, |acc, &kj| acc * size + kj.rem_euclid(s) as usize)
}

/// (-1)^{k_1 + ... + k_n}
pub(crate) fn parity(k: &[i64]) -> f64 {
    if k.iter().sum::<i64>().rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_band(size: usize, bx: TruncationBox) -> Result<(), TransformError> {
    if size < 2 * bx.radius as usize + 1 {
        return Err(TransformError::Aliasing {
            size,
            radius: bx.radius,
        });
    }
    Ok(())
}

/// Fourier coefficients of `u` on the box.
pub fn analyze(u: &GridFunction, bx: TruncationBox) -> Result<SpectralFunction, TransformError> {
    check_band(u.size, bx)?;
    if bx.n != u.n {
        return Err(TransformError::Dimension(format!("box has n = {}, function has n = {}", bx.n, u.n)));
    }
    let nodes = u.nodes();
    let scale = 1.0 / nodes as f64;
    let planes: Vec<Vec<Complex64>> = par::map_range(u.d, |c| {
        let mut plane = u.component(c).to_vec();
        fft_nd(&mut plane, u.n, u.size, FftDirection::Forward);
        plane
    });
    let mut out = SpectralFunction::zeros(bx, u.d);
    for idx in 0..bx.len() {
        let k = bx.point(idx);
        let w = wrapped_index(&k, u.size);
        let sign = parity(&k) * scale;
        for (c, plane) in planes.iter().enumerate() {
            out.coeffs[idx * u.d + c] = plane[w] * sign;
        }
    }
    Ok(out)
}

/// Grid samples of sum_{k in box} e^{ik.x} v(k).
pub fn synthesize(v: &SpectralFunction, size: usize) -> Result<GridFunction, TransformError> {
    check_band(size, v.bx)?;
    let n = v.n();
    let planes: Vec<Vec<Complex64>> = par::map_range(v.d, |c| {
        let mut plane = vec![Complex64::new(0.0, 0.0); size.pow(n as u32)];
        for idx in 0..v.bx.len() {
            let k = v.bx.point(idx);
            plane[wrapped_index(&k, size)] += v.coeffs[idx * v.d + c] * parity(&k);
        }
        fft_nd(&mut plane, n, size, FftDirection::Inverse);
        plane
    });
    Ok(GridFunction {
        n,
        d: v.d,
        size,
        values: planes.into_iter().flatten().collect(),
    })
}

/// D^alpha u = (-i)^{|alpha|} d^alpha u, by spectral multiplication with k^alpha.
pub fn derivative(u: &GridFunction, alpha: &MultiIndex) -> Result<GridFunction, TransformError> {
    if alpha.dim() != u.n {
        return Err(TransformError::Dimension(format!(
            "multi-index has {} components, function has n = {}",
            alpha.dim(),
            u.n
        )));
    }
    let mut spec = analyze(u, u.full_band())?;
    for idx in 0..spec.bx.len() {
        let factor = alpha.monomial(&spec.bx.point(idx));
        for z in spec.mode_mut(idx) {
            *z *= factor;
        }
    }
    synthesize(&spec, u.size)
}

fn check_symbol(a: &Symbol, n: usize, d: usize) -> Result<(), TransformError> {
    if a.n != n || a.d != d {
        return Err(TransformError::Dimension(format!(
            "symbol acts on (n, d) = ({}, {}), function has ({n}, {d})",
            a.n, a.d
        )));
    }
    Ok(())
}

/// op[a] on spectral data: coefficients a(k) v(k).
pub fn quantize_apply_spectral(a: &Symbol, v: &SpectralFunction) -> Result<SpectralFunction, TransformError> {
    check_symbol(a, v.n(), v.d)?;
    Ok(v.map_modes(v.d, |k, z| {
        let out = a.eval(k) * CVector::from_column_slice(z);
        out.iter().copied().collect()
    }))
}

/// op[a] on grid samples, exact on the represented band.
pub fn quantize_apply(a: &Symbol, u: &GridFunction) -> Result<GridFunction, TransformError> {
    check_symbol(a, u.n, u.d)?;
    let spec = analyze(u, u.full_band())?;
    synthesize(&quantize_apply_spectral(a, &spec)?, u.size)
}

/// Matrix-valued samples on the grid (kernels, convolution factors).
///
/// Stored entry-major: `values[(r * cols + c) * N^n + node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGrid {
    pub n: usize,
    pub size: usize,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Complex64>,
}

impl MatrixGrid {
    pub fn nodes(&self) -> usize {
        self.size.pow(self.n as u32)
    }

    pub fn at(&self, node: usize) -> CMatrix {
        let nodes = self.nodes();
        CMatrix::from_fn(self.rows, self.cols, |r, c| self.values[(r * self.cols + c) * nodes + node])
    }

    /// A scalar grid function viewed as a 1x1 matrix field.
    pub fn scalar(f: &GridFunction) -> Self {
        assert_eq!(f.d, 1, "scalar kernel must have d = 1");
        MatrixGrid {
            n: f.n,
            size: f.size,
            rows: 1,
            cols: 1,
            values: f.values.clone(),
        }
    }

    pub fn from_fn(n: usize, size: usize, rows: usize, cols: usize, f: impl Fn(&[f64]) -> CMatrix) -> Self {
        let probe = GridFunction::zeros(n, 1, size);
        let nodes = probe.nodes();
        let mut values = vec![Complex64::new(0.0, 0.0); rows * cols * nodes];
        for node in 0..nodes {
            let m = f(&probe.coords(node));
            for r in 0..rows {
                for c in 0..cols {
                    values[(r * cols + c) * nodes + node] = m[(r, c)];
                }
            }
        }
        MatrixGrid { n, size, rows, cols, values }
    }
}

/// Synthesizes matrix-valued spectral data entry by entry.
pub fn synthesize_matrix(bx: TruncationBox, coeffs: &[CMatrix], size: usize) -> Result<MatrixGrid, TransformError> {
    check_band(size, bx)?;
    let (rows, cols) = coeffs.first().map_or((0, 0), |m| m.shape());
    let n = bx.n;
    let planes = par::map_range(rows * cols, |e| {
        let (r, c) = (e / cols, e % cols);
        let mut plane = vec![Complex64::new(0.0, 0.0); size.pow(n as u32)];
        for (idx, m) in coeffs.iter().enumerate() {
            let k = bx.point(idx);
            plane[wrapped_index(&k, size)] += m[(r, c)] * parity(&k);
        }
        fft_nd(&mut plane, n, size, FftDirection::Inverse);
        plane
    });
    Ok(MatrixGrid {
        n,
        size,
        rows,
        cols,
        values: planes.into_iter().flatten().collect(),
    })
}

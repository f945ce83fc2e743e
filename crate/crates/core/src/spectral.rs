//! Fourier-space representation of doubly periodic fields on `[0, L]^2`.
//!
//! Coefficients are Fourier-series coefficients, `f(x) = Σ f̂_k exp(i 2π k·x / L)`,
//! stored for the full `n × n` FFT layout. Index `idx = i1 * n + i2` holds the mode
//! `k = (k(i1), k(i2))`; physical sample `j2 * n + j1` sits at `(j1 L/n, j2 L/n)`.
//! The spectral layout is the transpose of the physical one, which saves a transpose
//! per 2-D transform.
//! Integer wavenumbers are stored, the physical factor `2π/L` is applied by the
//! differential operators.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

thread_local! {
    static SCRATCH: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Collocation grid, wavenumber tables and FFT plans for one resolution.
pub struct SpectralGrid {
    n: usize,
    length: f64,
    kmax: i64,
    wave: Vec<i64>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    mask: Vec<bool>,
    neg: Vec<usize>,
    retained: Vec<usize>,
    spans: Vec<(usize, usize)>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("kmax", &self.kmax)
            .finish()
    }
}

impl SpectralGrid {
    /// Builds a grid with `n` points per side (power of two, at least 8) on a box of
    /// side `length`. The 2/3 rule keeps modes with `max(|k1|, |k2|) <= floor(n/3)`.
    pub fn new(n: usize, length: f64) -> Result<Arc<Self>> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n must be a power of two >= 8, got {n}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        let kmax = (n / 3) as i64;
        let wave: Vec<i64> = (0..n)
            .map(|i| {
                if i < n / 2 {
                    i as i64
                } else {
                    i as i64 - n as i64
                }
            })
            .collect();
        let mut mask = vec![false; n * n];
        let mut neg = vec![0; n * n];
        let mut retained = Vec::new();
        for i1 in 0..n {
            for i2 in 0..n {
                let idx = i1 * n + i2;
                let (k1, k2) = (wave[i1], wave[i2]);
                mask[idx] = k1.abs().max(k2.abs()) <= kmax;
                neg[idx] = ((n - i1) % n) * n + (n - i2) % n;
                if mask[idx] && idx != 0 {
                    retained.push(idx);
                }
            }
        }
        let mut spans = Vec::new();
        for i1 in (0..n).filter(|&i| i <= kmax as usize || i >= n - kmax as usize) {
            let start = if i1 == 0 { 1 } else { 0 };
            spans.push((i1 * n + start, i1 * n + kmax as usize + 1));
            spans.push((i1 * n + n - kmax as usize, i1 * n + n));
        }
        let kx = (0..n * n).map(|idx| wave[idx / n] as f64).collect();
        let ky = (0..n * n).map(|idx| wave[idx % n] as f64).collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Arc::new(SpectralGrid {
            n,
            length,
            kmax,
            wave,
            kx,
            ky,
            mask,
            neg,
            retained,
            spans,
            forward,
            inverse,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn kmax(&self) -> i64 {
        self.kmax
    }

    /// Number of coefficients (and physical samples), `n²`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical wavenumber factor `2π/L`.
    pub fn scale(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn wavenumber(&self, idx: usize) -> (i64, i64) {
        (self.wave[idx / self.n], self.wave[idx % self.n])
    }

    /// Integer wavenumber components of every index, as floats.
    pub fn k_tables(&self) -> (&[f64], &[f64]) {
        (&self.kx, &self.ky)
    }

    /// Integer `|k|²` of the mode at `idx`.
    pub fn k_sq(&self, idx: usize) -> i64 {
        let (k1, k2) = self.wavenumber(idx);
        k1 * k1 + k2 * k2
    }

    /// Storage index of mode `(k1, k2)`, if representable on this grid.
    pub fn index_of(&self, k1: i64, k2: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k1 < -half || k1 >= half || k2 < -half || k2 >= half {
            return None;
        }
        let n = self.n as i64;
        let i1 = k1.rem_euclid(n) as usize;
        let i2 = k2.rem_euclid(n) as usize;
        Some(i1 * self.n + i2)
    }

    /// Dealias mask: true iff `max(|k1|, |k2|) <= kmax` (the origin included).
    pub fn in_mask(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub(crate) fn neg_table(&self) -> &[usize] {
        &self.neg
    }

    /// Index of `-k`.
    pub fn neg_index(&self, idx: usize) -> usize {
        self.neg[idx]
    }

    /// Indices of the dynamical modes: inside the mask, origin excluded.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    /// The retained indices as contiguous half-open ranges, in increasing order.
    pub fn retained_spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    /// Collocation coordinate `j L / n`.
    pub fn coordinate(&self, j: usize) -> f64 {
        j as f64 * self.length / self.n as f64
    }

    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        self.n == other.n && self.length == other.length
    }

    /// Transforms along rows, transposes, transforms along rows again. Maps the
    /// spectral layout to the physical one and back. With `dealiased_rows`, rows of
    /// the spectral layout with `|k1| > kmax` are taken to be zero on input
    /// (inverse) or are not computed on output (forward).
    fn fft2(&self, buf: &mut Vec<Complex64>, inverse: bool, dealiased_rows: bool) {
        let n = self.n;
        let plan = if inverse {
            &self.inverse
        } else {
            &self.forward
        };
        let kmax = self.kmax as usize;
        let active = |row: usize| !dealiased_rows || row <= kmax || row >= n - kmax;
        SCRATCH.with(|cell| {
            let mut guard = cell.borrow_mut();
            let (scratch, tmp) = &mut *guard;
            scratch.resize(plan.get_outofplace_scratch_len(), ZERO);
            tmp.resize(buf.len(), ZERO);
            if inverse {
                for (row, (src, dst)) in buf
                    .chunks_exact_mut(n)
                    .zip(tmp.chunks_exact_mut(n))
                    .enumerate()
                {
                    if active(row) {
                        plan.process_outofplace_with_scratch(src, dst, scratch);
                    } else {
                        dst.fill(ZERO);
                    }
                }
                transpose::transpose(tmp, buf, n, n);
                plan.process_outofplace_with_scratch(buf, tmp, scratch);
            } else {
                plan.process_outofplace_with_scratch(buf, tmp, scratch);
                transpose::transpose(tmp, buf, n, n);
                for (row, (src, dst)) in buf
                    .chunks_exact_mut(n)
                    .zip(tmp.chunks_exact_mut(n))
                    .enumerate()
                {
                    if active(row) {
                        plan.process_outofplace_with_scratch(src, dst, scratch);
                    } else {
                        dst.fill(ZERO);
                    }
                }
            }
            std::mem::swap(buf, tmp);
        });
    }

    /// Evaluates `Σ ĉ_k exp(i 2π k·x / L)` at every collocation point, in place.
    pub(crate) fn inverse_in_place(&self, buf: &mut Vec<Complex64>) {
        self.fft2(buf, true, false);
    }

    /// Inverse transform of coefficients known to vanish outside the dealias mask.
    pub(crate) fn inverse_dealiased(&self, buf: &mut Vec<Complex64>) {
        self.fft2(buf, true, true);
    }

    /// Fourier-series coefficients of physical samples, in place, unmasked.
    pub(crate) fn forward_in_place(&self, buf: &mut Vec<Complex64>) {
        self.fft2(buf, false, false);
        let norm = 1.0 / (self.n * self.n) as f64;
        for c in buf.iter_mut() {
            *c *= norm;
        }
    }

    /// Forward transform that computes only the rows `|k1| <= kmax` (others zeroed),
    /// without normalization.
    pub(crate) fn forward_dealiased_unnormalized(&self, buf: &mut Vec<Complex64>) {
        self.fft2(buf, false, true);
    }

    /// Complex physical samples of a coefficient array.
    pub fn transform_to_physical(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(coeffs.len())?;
        let mut buf = coeffs.to_vec();
        self.inverse_in_place(&mut buf);
        Ok(buf)
    }

    /// Fourier-series coefficients of complex physical samples (no mask applied).
    pub fn transform_to_spectral(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(samples.len())?;
        let mut buf = samples.to_vec();
        self.forward_in_place(&mut buf);
        Ok(buf)
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    /// Zeroes the mean mode and everything outside the dealias mask.
    pub(crate) fn project_dynamical(&self, coeffs: &mut [Complex64]) {
        for (idx, c) in coeffs.iter_mut().enumerate() {
            if idx == 0 || !self.mask[idx] {
                *c = ZERO;
            }
        }
    }
}

fn check_same(a: &SpectralGrid, b: &SpectralGrid) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Coefficients of a real zero-mean scalar field: the stream function, or any
/// scalar produced by the spectral operators (vorticity, Jacobian, feedback).
#[derive(Clone, Debug)]
pub struct StreamField {
    grid: Arc<SpectralGrid>,
    coeffs: Vec<Complex64>,
}

impl StreamField {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        StreamField {
            grid: grid.clone(),
            coeffs: vec![ZERO; grid.len()],
        }
    }

    /// Wraps a full `n × n` coefficient array as is (no masking).
    pub fn from_coeffs(grid: &Arc<SpectralGrid>, coeffs: Vec<Complex64>) -> Result<Self> {
        grid.check_len(coeffs.len())?;
        Ok(StreamField {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Sets the listed modes and their conjugate partners. Every mode must be a
    /// retained dynamical mode.
    pub fn from_modes(grid: &Arc<SpectralGrid>, modes: &[((i64, i64), Complex64)]) -> Result<Self> {
        let mut field = StreamField::zeros(grid);
        for &((k1, k2), c) in modes {
            let idx = grid
                .index_of(k1, k2)
                .filter(|&i| i != 0 && grid.in_mask(i))
                .ok_or_else(|| {
                    Error::InvalidGrid(format!("mode ({k1},{k2}) is not a retained mode"))
                })?;
            field.coeffs[idx] = c;
            field.coeffs[grid.neg_index(idx)] = c.conj();
        }
        Ok(field)
    }

    /// Real samples to coefficients, masked and mean-free.
    pub fn from_physical(grid: &Arc<SpectralGrid>, samples: &[f64]) -> Result<Self> {
        grid.check_len(samples.len())?;
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.forward_in_place(&mut buf);
        grid.project_dynamical(&mut buf);
        Ok(StreamField {
            grid: grid.clone(),
            coeffs: buf,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn coeff(&self, k1: i64, k2: i64) -> Complex64 {
        self.grid.index_of(k1, k2).map_or(ZERO, |i| self.coeffs[i])
    }

    /// Real part of the physical samples.
    pub fn to_physical(&self) -> Vec<f64> {
        self.to_physical_complex()
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    pub fn to_physical_complex(&self) -> Vec<Complex64> {
        let mut buf = self.coeffs.clone();
        self.grid.inverse_in_place(&mut buf);
        buf
    }

    pub fn add(&self, other: &StreamField) -> Result<StreamField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &StreamField) -> Result<StreamField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, factor: f64) -> StreamField {
        StreamField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * factor).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &StreamField,
        op: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<StreamField> {
        check_same(&self.grid, &other.grid)?;
        Ok(StreamField {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    /// L² pairing `∫ f ḡ dx = L² Σ f̂_k conj(ĝ_k)`.
    pub fn inner(&self, other: &StreamField) -> Result<Complex64> {
        check_same(&self.grid, &other.grid)?;
        let l2 = self.grid.length * self.grid.length;
        let sum: Complex64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(sum * l2)
    }

    /// Squared L² norm.
    pub fn norm_sq(&self) -> f64 {
        let l2 = self.grid.length * self.grid.length;
        l2 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Coefficients of a two-component real vector field.
#[derive(Clone, Debug)]
pub struct VectorFieldHat {
    grid: Arc<SpectralGrid>,
    u1: Vec<Complex64>,
    u2: Vec<Complex64>,
    divergence_free: bool,
}

impl VectorFieldHat {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        VectorFieldHat {
            grid: grid.clone(),
            u1: vec![ZERO; grid.len()],
            u2: vec![ZERO; grid.len()],
            divergence_free: true,
        }
    }

    pub fn from_components(
        grid: &Arc<SpectralGrid>,
        u1: Vec<Complex64>,
        u2: Vec<Complex64>,
    ) -> Result<Self> {
        grid.check_len(u1.len())?;
        grid.check_len(u2.len())?;
        Ok(VectorFieldHat {
            grid: grid.clone(),
            u1,
            u2,
            divergence_free: false,
        })
    }

    /// Real component samples to coefficients, masked and mean-free.
    pub fn from_physical(grid: &Arc<SpectralGrid>, u1: &[f64], u2: &[f64]) -> Result<Self> {
        grid.check_len(u1.len())?;
        grid.check_len(u2.len())?;
        let mut buf: Vec<Complex64> = u1
            .iter()
            .zip(u2)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        grid.forward_in_place(&mut buf);
        let (mut c1, mut c2) = split_packed(grid, &buf);
        grid.project_dynamical(&mut c1);
        grid.project_dynamical(&mut c2);
        Ok(VectorFieldHat {
            grid: grid.clone(),
            u1: c1,
            u2: c2,
            divergence_free: false,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn u1(&self) -> &[Complex64] {
        &self.u1
    }

    pub fn u2(&self) -> &[Complex64] {
        &self.u2
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    /// Physical samples of both components (real parts).
    pub fn to_physical(&self) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.to_physical_complex();
        (
            a.into_iter().map(|c| c.re).collect(),
            b.into_iter().map(|c| c.re).collect(),
        )
    }

    pub fn to_physical_complex(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut a = self.u1.clone();
        let mut b = self.u2.clone();
        self.grid.inverse_in_place(&mut a);
        self.grid.inverse_in_place(&mut b);
        (a, b)
    }

    pub fn sub(&self, other: &VectorFieldHat) -> Result<VectorFieldHat> {
        check_same(&self.grid, &other.grid)?;
        Ok(VectorFieldHat {
            grid: self.grid.clone(),
            u1: self.u1.iter().zip(&other.u1).map(|(a, b)| a - b).collect(),
            u2: self.u2.iter().zip(&other.u2).map(|(a, b)| a - b).collect(),
            divergence_free: self.divergence_free && other.divergence_free,
        })
    }

    /// Largest coefficient magnitude over both components.
    pub fn max_abs(&self) -> f64 {
        self.u1
            .iter()
            .chain(&self.u2)
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|k·û_k|` over all modes (integer wavenumbers).
    pub fn max_divergence(&self) -> f64 {
        (0..self.grid.len())
            .map(|idx| {
                let (k1, k2) = self.grid.wavenumber(idx);
                (self.u1[idx] * k1 as f64 + self.u2[idx] * k2 as f64).norm()
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn with_flag(mut self, divergence_free: bool) -> Self {
        self.divergence_free = divergence_free;
        self
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [Complex64], &mut [Complex64]) {
        (&mut self.u1, &mut self.u2)
    }
}

/// Separates the transforms of two real signals packed as `a + i b`.
pub(crate) fn split_packed(
    grid: &SpectralGrid,
    packed: &[Complex64],
) -> (Vec<Complex64>, Vec<Complex64>) {
    let half = Complex64::new(0.5, 0.0);
    let minus_half_i = Complex64::new(0.0, -0.5);
    let mut a = vec![ZERO; packed.len()];
    let mut b = vec![ZERO; packed.len()];
    for idx in 0..packed.len() {
        let f = packed[idx];
        let g = packed[grid.neg_index(idx)].conj();
        a[idx] = (f + g) * half;
        b[idx] = (f - g) * minus_half_i;
    }
    (a, b)
}

/// Leray–Helmholtz projection: removes the component of each mode parallel to `k`.
pub fn leray_project(u: &VectorFieldHat) -> VectorFieldHat {
    let grid = &u.grid;
    let mut u1 = u.u1.clone();
    let mut u2 = u.u2.clone();
    for idx in 0..grid.len() {
        let (k1, k2) = grid.wavenumber(idx);
        let ksq = (k1 * k1 + k2 * k2) as f64;
        if ksq == 0.0 {
            u1[idx] = ZERO;
            u2[idx] = ZERO;
            continue;
        }
        let (k1, k2) = (k1 as f64, k2 as f64);
        let along = (u.u1[idx] * k1 + u.u2[idx] * k2) / ksq;
        u1[idx] = u.u1[idx] - along * k1;
        u2[idx] = u.u2[idx] - along * k2;
    }
    VectorFieldHat {
        grid: grid.clone(),
        u1,
        u2,
        divergence_free: true,
    }
}

/// Squared `V^α` norm, `L² Σ_{k≠0} |k|^{2α} |û_k|²`, with integer `|k|`.
pub fn v_alpha_norm_sq(u: &VectorFieldHat, alpha: f64) -> f64 {
    let grid = &u.grid;
    let mut sum = 0.0;
    for idx in 1..grid.len() {
        let mag = u.u1[idx].norm_sqr() + u.u2[idx].norm_sqr();
        if mag == 0.0 {
            continue;
        }
        let weight = if alpha == 0.0 {
            1.0
        } else {
            (grid.k_sq(idx) as f64).powf(alpha)
        };
        sum += weight * mag;
    }
    grid.length * grid.length * sum
}

/// Velocity `u = (-∂ψ/∂y, ∂ψ/∂x)`, so that `curl u = Δψ`.
pub fn velocity_from_stream(psi: &StreamField) -> VectorFieldHat {
    let grid = &psi.grid;
    let s = grid.scale();
    let mut u1 = vec![ZERO; grid.len()];
    let mut u2 = vec![ZERO; grid.len()];
    for idx in 1..grid.len() {
        let c = psi.coeffs[idx];
        if c == ZERO {
            continue;
        }
        let (k1, k2) = grid.wavenumber(idx);
        let ic = Complex64::new(-c.im, c.re);
        u1[idx] = ic * (-(k2 as f64) * s);
        u2[idx] = ic * (k1 as f64 * s);
    }
    VectorFieldHat {
        grid: grid.clone(),
        u1,
        u2,
        divergence_free: true,
    }
}

/// Scalar curl `∂u₂/∂x − ∂u₁/∂y`.
pub fn curl_scalar(u: &VectorFieldHat) -> StreamField {
    let grid = &u.grid;
    let s = grid.scale();
    let mut out = vec![ZERO; grid.len()];
    for (idx, c) in out.iter_mut().enumerate().skip(1) {
        let (k1, k2) = grid.wavenumber(idx);
        let w = u.u2[idx] * (k1 as f64 * s) - u.u1[idx] * (k2 as f64 * s);
        *c = Complex64::new(-w.im, w.re);
    }
    StreamField {
        grid: grid.clone(),
        coeffs: out,
    }
}

pub fn laplacian(psi: &StreamField) -> StreamField {
    let grid = &psi.grid;
    let s2 = grid.scale() * grid.scale();
    let coeffs = psi
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, &c)| c * (-(grid.k_sq(idx) as f64) * s2))
        .collect();
    StreamField {
        grid: grid.clone(),
        coeffs,
    }
}

/// Inverse of [`laplacian`] on mean-free scalars.
pub fn inverse_laplacian(w: &StreamField) -> Result<StreamField> {
    if w.coeffs[0] != ZERO {
        return Err(Error::NonzeroMean);
    }
    let grid = &w.grid;
    let s2 = grid.scale() * grid.scale();
    let coeffs = w
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, &c)| {
            if idx == 0 {
                ZERO
            } else {
                c / (-(grid.k_sq(idx) as f64) * s2)
            }
        })
        .collect();
    Ok(StreamField {
        grid: grid.clone(),
        coeffs,
    })
}

/// Seeded random stream function on the modes `0 < |k| <= radius`, with amplitudes
/// decaying like `|k|^{-decay}`. Conjugate symmetric and dealiased.
pub fn random_stream(grid: &Arc<SpectralGrid>, seed: u64, radius: f64, decay: f64) -> StreamField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = StreamField::zeros(grid);
    for &idx in grid.retained() {
        let (k1, k2) = grid.wavenumber(idx);
        let upper = k2 > 0 || (k2 == 0 && k1 > 0);
        let kk = ((k1 * k1 + k2 * k2) as f64).sqrt();
        if !upper || kk > radius {
            continue;
        }
        let amp = kk.powf(-decay);
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
        field.coeffs[idx] = c;
        field.coeffs[grid.neg_index(idx)] = c.conj();
    }
    field
}

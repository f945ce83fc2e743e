//! Coarse observations of the velocity field and the interpolants built on them.
//!
//! The box is split into `K × K` squares `Q_(a,b)` of side `h = L/K` with centres
//! `((a+½)h, (b+½)h)`. Nodal values are exact Fourier sums at the centres. The
//! interpolant `I_h` paints each square with its nodal value and removes the mean;
//! `Ĩ_h` additionally convolves with a mollifier of width `ε = ηh`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;

use crate::dynamics::PhysicalVelocity;
use crate::error::{Error, Result};
use crate::spectral::{
    curl_scalar, leray_project, split_packed, velocity_from_stream, SpectralGrid, StreamField,
    VectorFieldHat,
};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservationKind {
    /// Piecewise-constant interpolation of nodal values.
    Nodal,
    /// Mollified piecewise-constant interpolation.
    NodalSmoothed,
    /// Orthogonal projection onto the modes `|k| <= modal_radius`.
    Modal,
}

impl ObservationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObservationKind::Nodal => "nodal",
            ObservationKind::NodalSmoothed => "nodal_smoothed",
            ObservationKind::Modal => "modal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nodal" => Ok(ObservationKind::Nodal),
            "nodal_smoothed" => Ok(ObservationKind::NodalSmoothed),
            "modal" => Ok(ObservationKind::Modal),
            other => Err(Error::InvalidObservation(format!("unknown kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSpec {
    pub kind: ObservationKind,
    /// Nodes per dimension.
    pub k: usize,
    /// Smoothing ratio, `ε = η h`.
    pub eta: f64,
    pub modal_radius: f64,
}

impl ObservationSpec {
    pub fn nodal(k: usize) -> Self {
        ObservationSpec {
            kind: ObservationKind::Nodal,
            k,
            eta: 0.0,
            modal_radius: 0.0,
        }
    }

    pub fn smoothed(k: usize, eta: f64) -> Self {
        ObservationSpec {
            kind: ObservationKind::NodalSmoothed,
            k,
            eta,
            modal_radius: 0.0,
        }
    }

    pub fn modal(radius: f64) -> Self {
        ObservationSpec {
            kind: ObservationKind::Modal,
            k: 1,
            eta: 0.0,
            modal_radius: radius,
        }
    }

    /// Nodal for `η = 0`, smoothed otherwise.
    pub fn from_eta(k: usize, eta: f64) -> Self {
        if eta == 0.0 {
            Self::nodal(k)
        } else {
            Self::smoothed(k, eta)
        }
    }

    pub fn validate(&self, grid: &SpectralGrid) -> Result<()> {
        match self.kind {
            ObservationKind::Modal => {
                if !(self.modal_radius > 0.0) || self.modal_radius > grid.kmax() as f64 {
                    return Err(Error::InvalidObservation(format!(
                        "modal radius {} outside (0, {}]",
                        self.modal_radius,
                        grid.kmax()
                    )));
                }
            }
            ObservationKind::Nodal | ObservationKind::NodalSmoothed => {
                if self.k < 1 || self.k as i64 > grid.kmax() {
                    return Err(Error::InvalidObservation(format!(
                        "K={} must lie in [1, kmax={}]",
                        self.k,
                        grid.kmax()
                    )));
                }
                if self.kind == ObservationKind::NodalSmoothed
                    && !(self.eta > 0.0 && self.eta.is_finite())
                {
                    return Err(Error::InvalidObservation(format!(
                        "smoothed interpolant needs eta > 0, got {}",
                        self.eta
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Velocity values at the `K²` node centres, row-major by square index `b*K + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSamples {
    k: usize,
    values: Vec<[f64; 2]>,
}

impl NodeSamples {
    pub fn new(k: usize, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                got: values.len(),
            });
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservation("non-finite node value".into()));
        }
        Ok(NodeSamples { k, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn difference(&self, other: &NodeSamples) -> Result<NodeSamples> {
        if self.k != other.k {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(NodeSamples {
            k: self.k,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
                .collect(),
        })
    }
}

/// Node centres `((a+½)h, (b+½)h)`, `a` fastest.
pub fn node_centers(k: usize, length: f64) -> Vec<(f64, f64)> {
    let h = length / k as f64;
    (0..k)
        .flat_map(|b| (0..k).map(move |a| ((a as f64 + 0.5) * h, (b as f64 + 0.5) * h)))
        .collect()
}

/// Exact evaluation of a spectral vector field at the node centres.
#[derive(Clone, Debug)]
pub struct NodeSampler {
    grid: Arc<SpectralGrid>,
    k: usize,
    /// Collocation index of each node coordinate, when the centres are grid points.
    on_grid: Option<Vec<usize>>,
    /// `exp(i 2π k (a+½)/K)` for `k ∈ [-kmax, kmax]`, laid out `[(k + kmax) * K + a]`.
    phases: Vec<Complex64>,
}

impl NodeSampler {
    pub fn new(grid: &Arc<SpectralGrid>, k: usize) -> Result<Self> {
        if k < 1 || k as i64 > grid.kmax() {
            return Err(Error::InvalidObservation(format!(
                "K={k} must lie in [1, kmax={}]",
                grid.kmax()
            )));
        }
        let n = grid.n();
        // centre (a+½) n/K is a grid index iff n/K is an even integer
        let on_grid = (n.is_multiple_of(k) && (n / k).is_multiple_of(2))
            .then(|| (0..k).map(|a| a * (n / k) + n / (2 * k)).collect());
        let kmax = grid.kmax();
        let mut phases = Vec::with_capacity((2 * kmax as usize + 1) * k);
        for kk in -kmax..=kmax {
            for a in 0..k {
                // angle = π kk (2a+1) / K, reduced mod 2π exactly in integers
                let m = (kk * (2 * a as i64 + 1)).rem_euclid(2 * k as i64);
                let angle = PI * m as f64 / k as f64;
                phases.push(Complex64::new(angle.cos(), angle.sin()));
            }
        }
        Ok(NodeSampler {
            grid: grid.clone(),
            k,
            on_grid,
            phases,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Whether node centres coincide with collocation points.
    pub fn centers_on_grid(&self) -> bool {
        self.on_grid.is_some()
    }

    /// Direct separable Fourier summation at the centres.
    pub fn sample(&self, u: &VectorFieldHat) -> Result<NodeSamples> {
        if !u.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let c1 = self.sum_component(u.u1());
        let c2 = self.sum_component(u.u2());
        let values = c1.into_iter().zip(c2).map(|(a, b)| [a, b]).collect();
        Ok(NodeSamples { k: self.k, values })
    }

    /// Picks values off a physical velocity when the centres are grid points.
    pub fn sample_physical(&self, vel: &PhysicalVelocity) -> Option<NodeSamples> {
        let idx = self.on_grid.as_ref()?;
        let n = self.grid.n();
        let mut values = Vec::with_capacity(self.k * self.k);
        for &j2 in idx {
            for &j1 in idx {
                let p = j2 * n + j1;
                values.push([vel.u1[p], vel.u2[p]]);
            }
        }
        Some(NodeSamples { k: self.k, values })
    }

    fn sum_component(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let grid = &self.grid;
        let kmax = grid.kmax();
        let k = self.k;
        let m = (2 * kmax + 1) as usize;
        // partial[(k2 + kmax) * K + a] = Σ_k1 ĉ(k1, k2) e^{i k1 x_a}
        let mut partial = vec![ZERO; m * k];
        for (r2, k2) in (-kmax..=kmax).enumerate() {
            let row = &mut partial[r2 * k..(r2 + 1) * k];
            for k1 in -kmax..=kmax {
                let idx = grid.index_of(k1, k2).expect("inside mask");
                let c = coeffs[idx];
                if c == ZERO {
                    continue;
                }
                let ph = &self.phases[(k1 + kmax) as usize * k..(k1 + kmax + 1) as usize * k];
                for (acc, p) in row.iter_mut().zip(ph) {
                    *acc += c * p;
                }
            }
        }
        let mut out = vec![0.0; k * k];
        for b in 0..k {
            for a in 0..k {
                let mut acc = 0.0;
                for r2 in 0..m {
                    let p = self.phases[r2 * k + b];
                    let s = partial[r2 * k + a];
                    acc += s.re * p.re - s.im * p.im;
                }
                out[b * k + a] = acc;
            }
        }
        out
    }
}

/// Velocity of `psi` at the `K²` node centres.
pub fn sample_velocity(psi: &StreamField, k: usize) -> Result<NodeSamples> {
    NodeSampler::new(psi.grid(), k)?.sample(&velocity_from_stream(psi))
}

/// One-dimensional bump `exp(-1/(1-s²))` on `|s| < 1`.
fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn bump_integral() -> f64 {
    static INTEGRAL: OnceLock<f64> = OnceLock::new();
    *INTEGRAL.get_or_init(|| {
        // the integrand vanishes to all orders at ±1, so the trapezoid rule converges fast
        let m = 4096;
        let h = 2.0 / m as f64;
        (1..m).map(|i| bump(-1.0 + i as f64 * h)).sum::<f64>() * h
    })
}

/// Normalisation constant `K₀` of the unit-mass mollifier on `[-1, 1]²`.
pub fn mollifier_k0() -> f64 {
    let i = bump_integral();
    1.0 / (i * i)
}

/// `ρ(ξ) = K₀ exp(-1/(1-ξ₁²) - 1/(1-ξ₂²))` on the open unit square, zero outside.
pub fn mollifier_density(xi1: f64, xi2: f64) -> f64 {
    mollifier_k0() * bump(xi1) * bump(xi2)
}

/// Spectral multiplier of convolution with `ρ_ε`, sampled on the collocation grid
/// (periodised) and normalised to unit discrete mass.
#[derive(Clone, Debug)]
pub struct Mollifier {
    epsilon: f64,
    /// Normalised 1-D weights on the grid, `Δx Σ w_j = 1`.
    weights: Vec<f64>,
    multiplier: Vec<f64>,
}

impl Mollifier {
    pub fn new(grid: &SpectralGrid, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidObservation(format!(
                "mollifier width must be positive, got {epsilon}"
            )));
        }
        let n = grid.n();
        let length = grid.length();
        let dx = length / n as f64;
        let images = (epsilon / length).ceil() as i64 + 1;
        let mut weights: Vec<f64> = (0..n)
            .map(|j| {
                let d = if j <= n / 2 {
                    j as f64 * dx
                } else {
                    (j as f64 - n as f64) * dx
                };
                (-images..=images)
                    .map(|m| bump((d + m as f64 * length) / epsilon))
                    .sum()
            })
            .collect();
        let mass: f64 = weights.iter().sum::<f64>() * dx;
        for w in &mut weights {
            *w /= mass;
        }
        let wave: Vec<f64> = (0..n)
            .map(|i| {
                let k1 = if i < n / 2 {
                    i as i64
                } else {
                    i as i64 - n as i64
                };
                (0..n)
                    .map(|j| {
                        let m = (k1 * j as i64).rem_euclid(n as i64);
                        weights[j] * (2.0 * PI * m as f64 / n as f64).cos()
                    })
                    .sum::<f64>()
                    * dx
            })
            .collect();
        let multiplier = (0..grid.len())
            .map(|idx| wave[idx % n] * wave[idx / n])
            .collect();
        Ok(Mollifier {
            epsilon,
            weights,
            multiplier,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Discrete integral of the sampled 2-D mollifier.
    pub fn discrete_mass(&self, grid: &SpectralGrid) -> f64 {
        let dx = grid.length() / grid.n() as f64;
        let s: f64 = self.weights.iter().sum::<f64>() * dx;
        s * s
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }
}

/// Nodal interpolant with its rasterisation table and optional mollifier.
#[derive(Clone, Debug)]
pub struct Interpolant {
    grid: Arc<SpectralGrid>,
    k: usize,
    /// Square index along one axis for each collocation index.
    cell: Vec<usize>,
    mollifier: Option<Mollifier>,
    /// 1-D storage indices with `|k| <= kmax`.
    active: Vec<usize>,
    /// `(1/n) Σ_{j ∈ Q_a} exp(-2πi k j / n)` at `[a * active.len() + p]`.
    basis: Vec<Complex64>,
    /// When `K` divides `n`, squares are translates of `Q_0` and the basis factors as
    /// `exp(-2πi k a / K) D(k)`: holds `D(k)` and `k mod K` per active index.
    periodic: Option<(Vec<Complex64>, Vec<usize>)>,
}

impl Interpolant {
    pub fn nodal(grid: &Arc<SpectralGrid>, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidObservation("K must be >= 1".into()));
        }
        let n = grid.n();
        // x_j ∈ Q_a iff a h <= j L/n < (a+1) h
        let cell: Vec<usize> = (0..n).map(|j| j * k / n).collect();
        let kmax = grid.kmax() as usize;
        let active: Vec<usize> = (0..n).filter(|&i| i <= kmax || i >= n - kmax).collect();
        let m = active.len();
        let mut basis = vec![ZERO; k * m];
        for (p, &i) in active.iter().enumerate() {
            let kw = if i < n / 2 {
                i as i64
            } else {
                i as i64 - n as i64
            };
            for (j, &a) in cell.iter().enumerate() {
                // reduce k j mod n so the phase argument stays small
                let r = (kw * j as i64).rem_euclid(n as i64) as f64;
                basis[a * m + p] += Complex64::from_polar(1.0 / n as f64, -2.0 * PI * r / n as f64);
            }
        }
        let periodic = n.is_multiple_of(k).then(|| {
            let d = (0..m).map(|p| basis[p]).collect();
            let q = active
                .iter()
                .map(|&i| {
                    (if i < n / 2 {
                        i as i64
                    } else {
                        i as i64 - n as i64
                    })
                    .rem_euclid(k as i64) as usize
                })
                .collect();
            (d, q)
        });
        Ok(Interpolant {
            grid: grid.clone(),
            k,
            cell,
            mollifier: None,
            active,
            basis,
            periodic,
        })
    }

    pub fn smoothed(grid: &Arc<SpectralGrid>, k: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidObservation(format!(
                "smoothed interpolant needs eta > 0, got {eta}"
            )));
        }
        let mut it = Self::nodal(grid, k)?;
        let h = grid.length() / k as f64;
        it.mollifier = Some(Mollifier::new(grid, eta * h)?);
        Ok(it)
    }

    pub fn mollifier(&self) -> Option<&Mollifier> {
        self.mollifier.as_ref()
    }

    /// Physical samples of `Σ u(x_i) χ_{Q_i}` on the collocation grid.
    pub fn rasterize(&self, s: &NodeSamples) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(s)?;
        let n = self.grid.n();
        let mut u1 = vec![0.0; n * n];
        let mut u2 = vec![0.0; n * n];
        for j2 in 0..n {
            for j1 in 0..n {
                let v = s.values[self.cell[j2] * self.k + self.cell[j1]];
                u1[j2 * n + j1] = v[0];
                u2[j2 * n + j1] = v[1];
            }
        }
        Ok((u1, u2))
    }

    /// The interpolated field, mean-free and truncated to the retained modes.
    pub fn apply(&self, s: &NodeSamples) -> Result<VectorFieldHat> {
        self.check(s)?;
        let grid = &self.grid;
        let n = grid.n();
        let mut buf = vec![ZERO; grid.len()];
        for j2 in 0..n {
            let row = self.cell[j2] * self.k;
            for j1 in 0..n {
                let v = s.values[row + self.cell[j1]];
                buf[j2 * n + j1] = Complex64::new(v[0], v[1]);
            }
        }
        grid.forward_in_place(&mut buf);
        let (mut c1, mut c2) = split_packed(grid, &buf);
        if let Some(m) = &self.mollifier {
            for (idx, w) in m.multiplier.iter().enumerate() {
                c1[idx] *= *w;
                c2[idx] *= *w;
            }
        }
        grid.project_dynamical(&mut c1);
        grid.project_dynamical(&mut c2);
        VectorFieldHat::from_components(grid, c1, c2)
    }

    /// `curl` of the interpolated field on the retained modes. The Leray projection
    /// is omitted since gradients have no curl, so this equals `curl P_σ` of
    /// [`Interpolant::apply`]. Evaluated as separable sums over the squares.
    pub fn curl_of(&self, s: &NodeSamples) -> Result<StreamField> {
        let mut out = StreamField::zeros(&self.grid);
        self.curl_add(s, 1.0, out.coeffs_mut())?;
        Ok(out)
    }

    /// Adds `factor` times [`Interpolant::curl_of`] to the retained modes of `out`.
    pub fn curl_add(&self, s: &NodeSamples, factor: f64, out: &mut [Complex64]) -> Result<()> {
        self.check(s)?;
        self.grid.check_len(out.len())?;
        let grid = &self.grid;
        let (n, k, m) = (grid.n(), self.k, self.active.len());
        if let Some((d, q)) = &self.periodic {
            self.curl_periodic(s, d, q, factor, out);
            return Ok(());
        }
        let basis = &self.basis;
        let mut t1 = vec![ZERO; k * m];
        let mut t2 = vec![ZERO; k * m];
        for b in 0..k {
            for a in 0..k {
                let v = s.values[b * k + a];
                let row = &basis[a * m..(a + 1) * m];
                for p in 0..m {
                    t1[b * m + p] += row[p] * v[0];
                    t2[b * m + p] += row[p] * v[1];
                }
            }
        }
        let (kx, ky) = grid.k_tables();
        let sc = grid.scale() * factor;
        let mut acc1 = vec![ZERO; m];
        let mut acc2 = vec![ZERO; m];
        for (p1, &i1) in self.active.iter().enumerate() {
            acc1.fill(ZERO);
            acc2.fill(ZERO);
            for b in 0..k {
                let (x1, x2) = (t1[b * m + p1], t2[b * m + p1]);
                let row = &basis[b * m..(b + 1) * m];
                for p2 in 0..m {
                    acc1[p2] += x1 * row[p2];
                    acc2[p2] += x2 * row[p2];
                }
            }
            for (p2, &i2) in self.active.iter().enumerate() {
                let idx = i1 * n + i2;
                // i s (k1 v̂₂ − k2 v̂₁)
                let w = acc2[p2] * kx[idx] - acc1[p2] * ky[idx];
                let mut c = Complex64::new(-w.im, w.re) * sc;
                if let Some(moll) = &self.mollifier {
                    c *= moll.multiplier[idx];
                }
                if idx != 0 {
                    out[idx] += c;
                }
            }
        }
        Ok(())
    }

    /// [`Interpolant::curl_of`] through a `K × K` DFT of the samples.
    fn curl_periodic(
        &self,
        s: &NodeSamples,
        d: &[Complex64],
        q: &[usize],
        factor: f64,
        out: &mut [Complex64],
    ) {
        let grid = &self.grid;
        let (n, k) = (grid.n(), self.k);
        let roots: Vec<Complex64> = (0..k)
            .map(|r| Complex64::from_polar(1.0, -2.0 * PI * r as f64 / k as f64))
            .collect();
        // t[b][q1] = Σ_a S[b][a] ω^{q1 a}
        let mut t1 = vec![ZERO; k * k];
        let mut t2 = vec![ZERO; k * k];
        for b in 0..k {
            for q1 in 0..k {
                let (mut x1, mut x2) = (ZERO, ZERO);
                for a in 0..k {
                    let w = roots[(q1 * a) % k];
                    let v = s.values[b * k + a];
                    x1 += w * v[0];
                    x2 += w * v[1];
                }
                t1[b * k + q1] = x1;
                t2[b * k + q1] = x2;
            }
        }
        // h[q2][q1] = Σ_b t[b][q1] ω^{q2 b}
        let mut h1 = vec![ZERO; k * k];
        let mut h2 = vec![ZERO; k * k];
        for q2 in 0..k {
            for b in 0..k {
                let w = roots[(q2 * b) % k];
                for q1 in 0..k {
                    h1[q2 * k + q1] += t1[b * k + q1] * w;
                    h2[q2 * k + q1] += t2[b * k + q1] * w;
                }
            }
        }
        let (kx, ky) = grid.k_tables();
        let sc = grid.scale() * factor;
        for (p1, &i1) in self.active.iter().enumerate() {
            for (p2, &i2) in self.active.iter().enumerate() {
                let idx = i1 * n + i2;
                let j = q[p2] * k + q[p1];
                let dd = d[p1] * d[p2];
                let w = (h2[j] * kx[idx] - h1[j] * ky[idx]) * dd;
                let mut c = Complex64::new(-w.im, w.re) * sc;
                if let Some(moll) = &self.mollifier {
                    c *= moll.multiplier[idx];
                }
                if idx != 0 {
                    out[idx] += c;
                }
            }
        }
    }

    fn check(&self, s: &NodeSamples) -> Result<()> {
        if s.k != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k * self.k,
                got: s.values.len(),
            });
        }
        Ok(())
    }
}

/// `I_h`: piecewise-constant interpolation with the mean removed.
pub fn interp_nodal(s: &NodeSamples, grid: &Arc<SpectralGrid>) -> Result<VectorFieldHat> {
    Interpolant::nodal(grid, s.k)?.apply(s)
}

/// `Ĩ_h`: mollified piecewise-constant interpolation with the mean removed.
pub fn interp_smoothed(
    s: &NodeSamples,
    grid: &Arc<SpectralGrid>,
    eta: f64,
) -> Result<VectorFieldHat> {
    Interpolant::smoothed(grid, s.k, eta)?.apply(s)
}

/// Zeroes every mode with `|k| > radius`.
pub fn modal_project(u: &VectorFieldHat, radius: f64) -> VectorFieldHat {
    let grid = u.grid().clone();
    let r2 = radius * radius;
    let mut out = u.clone();
    let (u1, u2) = out.parts_mut();
    for idx in 0..grid.len() {
        if grid.k_sq(idx) as f64 > r2 {
            u1[idx] = ZERO;
            u2[idx] = ZERO;
        }
    }
    let flag = u.is_divergence_free();
    out.with_flag(flag)
}

/// `R_h(δ) = curl P_σ I_h(u_δ)` with `u_δ` the velocity of stream function `delta`.
pub fn feedback_rh(
    delta: &StreamField,
    spec: &ObservationSpec,
    grid: &Arc<SpectralGrid>,
) -> Result<StreamField> {
    if spec.kind == ObservationKind::Modal {
        return Err(Error::InvalidObservation(
            "modal observations use modal_project, not R_h".into(),
        ));
    }
    if !delta.grid().same_as(grid) {
        return Err(Error::GridMismatch);
    }
    let op = ObservationOperator::new(spec.clone(), grid)?;
    let samples = sample_velocity(delta, spec.k)?;
    op.feedback(&Observation::Nodes(samples))
}

/// What the assimilated solver is allowed to see of the reference at one instant.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    Nodes(NodeSamples),
    /// Low Fourier modes of the stream function (modal comparison runs).
    Modes(Vec<Complex64>),
}

impl Observation {
    pub fn difference(&self, other: &Observation) -> Result<Observation> {
        match (self, other) {
            (Observation::Nodes(a), Observation::Nodes(b)) => {
                Ok(Observation::Nodes(a.difference(b)?))
            }
            (Observation::Modes(a), Observation::Modes(b)) if a.len() == b.len() => Ok(
                Observation::Modes(a.iter().zip(b).map(|(x, y)| x - y).collect()),
            ),
            _ => Err(Error::InvalidObservation("mismatched observations".into())),
        }
    }
}

/// Observation and feedback machinery for one [`ObservationSpec`] on one grid.
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct ObservationOperator {
    spec: ObservationSpec,
    grid: Arc<SpectralGrid>,
    sampler: Option<NodeSampler>,
    interpolant: Option<Interpolant>,
    /// Retained indices for the modal kind.
    modes: Vec<usize>,
}

impl ObservationOperator {
    pub fn new(spec: ObservationSpec, grid: &Arc<SpectralGrid>) -> Result<Self> {
        spec.validate(grid)?;
        let (sampler, interpolant, modes) = match spec.kind {
            ObservationKind::Nodal => (
                Some(NodeSampler::new(grid, spec.k)?),
                Some(Interpolant::nodal(grid, spec.k)?),
                Vec::new(),
            ),
            ObservationKind::NodalSmoothed => (
                Some(NodeSampler::new(grid, spec.k)?),
                Some(Interpolant::smoothed(grid, spec.k, spec.eta)?),
                Vec::new(),
            ),
            ObservationKind::Modal => {
                let r2 = spec.modal_radius * spec.modal_radius;
                let modes = grid
                    .retained()
                    .iter()
                    .copied()
                    .filter(|&i| grid.k_sq(i) as f64 <= r2)
                    .collect();
                (None, None, modes)
            }
        };
        Ok(ObservationOperator {
            spec,
            grid: grid.clone(),
            sampler,
            interpolant,
            modes,
        })
    }

    pub fn spec(&self) -> &ObservationSpec {
        &self.spec
    }

    /// Observes the velocity of `psi`. A physical velocity of `psi` on the grid may
    /// be passed to avoid a Fourier summation when node centres are grid points.
    pub fn observe(
        &self,
        psi: &StreamField,
        vel: Option<&PhysicalVelocity>,
    ) -> Result<Observation> {
        match &self.sampler {
            Some(sampler) => {
                if let Some(s) = vel.and_then(|v| sampler.sample_physical(v)) {
                    return Ok(Observation::Nodes(s));
                }
                Ok(Observation::Nodes(
                    sampler.sample(&velocity_from_stream(psi))?,
                ))
            }
            None => Ok(Observation::Modes(
                self.modes.iter().map(|&i| psi.coeffs()[i]).collect(),
            )),
        }
    }

    /// Adds `factor` times [`ObservationOperator::feedback`] to `out`.
    pub fn feedback_add(
        &self,
        obs: &Observation,
        factor: f64,
        out: &mut [Complex64],
    ) -> Result<()> {
        if let (Observation::Nodes(s), Some(it)) = (obs, &self.interpolant) {
            return it.curl_add(s, factor, out);
        }
        let r = self.feedback(obs)?;
        self.grid.check_len(out.len())?;
        for (o, c) in out.iter_mut().zip(r.coeffs()) {
            *o += c * factor;
        }
        Ok(())
    }

    /// Scalar feedback `curl P_σ I(·)` of an observation (typically a difference).
    pub fn feedback(&self, obs: &Observation) -> Result<StreamField> {
        let interpolated = match (obs, &self.interpolant) {
            (Observation::Nodes(s), Some(it)) => return it.curl_of(s),
            (Observation::Modes(m), None) if m.len() == self.modes.len() => {
                let mut delta = StreamField::zeros(&self.grid);
                for (&i, &c) in self.modes.iter().zip(m) {
                    delta.coeffs_mut()[i] = c;
                }
                modal_project(&velocity_from_stream(&delta), self.spec.modal_radius)
            }
            _ => {
                return Err(Error::InvalidObservation(
                    "observation does not match spec".into(),
                ))
            }
        };
        Ok(curl_scalar(&leray_project(&interpolated)))
    }
}

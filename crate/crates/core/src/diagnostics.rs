//! Measured quantities: synchronization error, convergence times, energy spectrum,
//! eddy turnover time and interpolation-error constants.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::observables::{Interpolant, NodeSampler};
use crate::spectral::{
    v_alpha_norm_sq, velocity_from_stream, SpectralGrid, StreamField, VectorFieldHat,
};

/// `‖u − v‖_V` for the velocities of two stream functions.
pub fn error_v(psi: &StreamField, phi: &StreamField) -> Result<f64> {
    let diff = psi.sub(phi)?;
    Ok(v_alpha_norm_sq(&velocity_from_stream(&diff), 1.0).sqrt())
}

/// `‖u‖_V` of the velocity of a stream function.
pub fn norm_v(psi: &StreamField) -> f64 {
    v_alpha_norm_sq(&velocity_from_stream(psi), 1.0).sqrt()
}

/// Kinetic energy `½ ∫ |u|² dx` of the velocity of a stream function.
pub fn energy(psi: &StreamField) -> f64 {
    0.5 * v_alpha_norm_sq(&velocity_from_stream(psi), 0.0)
}

/// Sampled `‖u(t) − v(t)‖_V`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ErrorSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut s = Self::new();
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        for (t, v) in times.into_iter().zip(values) {
            s.push(t, v)?;
        }
        Ok(s)
    }

    /// Appends a sample; times must increase strictly and values be nonnegative.
    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::InvalidMetric(format!(
                    "sample time {t} does not follow {last}"
                )));
            }
        }
        if !(value >= 0.0) {
            return Err(Error::InvalidMetric(format!("invalid error value {value}")));
        }
        self.times.push(t);
        self.values.push(value);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Piecewise-linear interpolant, held constant outside the sampled range.
    fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Trapezoid integral of the interpolant over `[a, b]`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        let mut knots = vec![a];
        knots.extend(self.times.iter().copied().filter(|&t| t > a && t < b));
        knots.push(b);
        knots
            .windows(2)
            .map(|w| 0.5 * (self.value_at(w[0]) + self.value_at(w[1])) * (w[1] - w[0]))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingStats {
    pub t_min: f64,
    pub t_max: f64,
    pub eps_avg: f64,
}

/// `T_max = sup{t <= T : e(t) >= ε}` (0 if empty, ∞ if `e(T) >= ε`),
/// `T_min = inf{t <= T : e(t) <= ε}` (∞ if empty), and the time average of `e`
/// over `[T0, T]`, all taken on the piecewise-linear interpolant of the samples
/// (constant beyond the last one). On this interpolant `T_min <= T_max` always.
pub fn crossing_stats(
    series: &ErrorSeries,
    eps: f64,
    t_end: f64,
    t0: f64,
) -> Result<CrossingStats> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidMetric(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !(t0 >= 0.0 && t0 < t_end) {
        return Err(Error::InvalidMetric(format!(
            "need 0 <= T0 < T, got T0={t0}, T={t_end}"
        )));
    }
    if series.times[0] > t_end {
        return Err(Error::EmptySeries);
    }
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(series.len() + 2);
    if series.times[0] > 0.0 {
        knots.push((0.0, series.values[0]));
    }
    knots.extend(
        series
            .times
            .iter()
            .copied()
            .zip(series.values.iter().copied())
            .take_while(|&(t, _)| t < t_end),
    );
    knots.push((t_end, series.value_at(t_end)));

    // crossing of the segment between two knots with the level ε
    let cross = |(ta, va): (f64, f64), (tb, vb): (f64, f64)| {
        if va == vb {
            ta
        } else {
            ta + (va - eps) / (va - vb) * (tb - ta)
        }
    };
    let t_min = if knots[0].1 <= eps {
        knots[0].0
    } else {
        knots
            .windows(2)
            .find(|w| w[1].1 <= eps)
            .map_or(f64::INFINITY, |w| cross(w[0], w[1]))
    };
    let t_max = if knots.last().expect("nonempty").1 >= eps {
        f64::INFINITY
    } else {
        match knots.iter().rposition(|&(_, v)| v >= eps) {
            Some(j) => cross(knots[j], knots[j + 1]),
            None => 0.0,
        }
    };
    let eps_avg = series.integral(t0, t_end) / (t_end - t0);
    Ok(CrossingStats {
        t_min,
        t_max,
        eps_avg,
    })
}

/// Shell of a wavenumber: `r` with `r − ½ < |k| <= r + ½`.
pub fn shell_of(k_sq: i64) -> usize {
    ((k_sq as f64).sqrt() - 0.5).ceil().max(0.0) as usize
}

/// Time integral of shell-summed `|û_k|²`, trapezoid rule over sample times.
#[derive(Clone, Debug, Default)]
pub struct SpectrumAccumulator {
    integral: Vec<f64>,
    duration: f64,
    samples: usize,
    last: Option<(f64, Vec<f64>)>,
}

impl SpectrumAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Shell sums `Σ_{k∈J_r} |û_k|²` of a velocity field, indexed by `r`.
    pub fn shell_sums(u: &VectorFieldHat) -> Vec<f64> {
        let grid = u.grid();
        let mut shells = Vec::new();
        for idx in 1..grid.len() {
            let mag = u.u1()[idx].norm_sqr() + u.u2()[idx].norm_sqr();
            if mag == 0.0 {
                continue;
            }
            let r = shell_of(grid.k_sq(idx));
            if shells.len() <= r {
                shells.resize(r + 1, 0.0);
            }
            shells[r] += mag;
        }
        shells
    }

    pub fn add_sample(&mut self, t: f64, u: &VectorFieldHat) -> Result<()> {
        let shells = Self::shell_sums(u);
        if let Some((t_prev, prev)) = &self.last {
            let dt = t - t_prev;
            if !(dt > 0.0) {
                return Err(Error::InvalidMetric(format!(
                    "spectrum sample time {t} does not follow {t_prev}"
                )));
            }
            let len = prev.len().max(shells.len());
            if self.integral.len() < len {
                self.integral.resize(len, 0.0);
            }
            for r in 0..len {
                let a = prev.get(r).copied().unwrap_or(0.0);
                let b = shells.get(r).copied().unwrap_or(0.0);
                self.integral[r] += 0.5 * (a + b) * dt;
            }
            self.duration += dt;
        }
        self.samples += 1;
        self.last = Some((t, shells));
        Ok(())
    }

    pub fn add_stream(&mut self, t: f64, psi: &StreamField) -> Result<()> {
        self.add_sample(t, &velocity_from_stream(psi))
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Combines accumulators over disjoint time windows. Integrals and durations add.
    pub fn merge(&mut self, other: &SpectrumAccumulator) {
        if self.integral.len() < other.integral.len() {
            self.integral.resize(other.integral.len(), 0.0);
        }
        for (a, b) in self.integral.iter_mut().zip(&other.integral) {
            *a += b;
        }
        self.duration += other.duration;
        self.samples += other.samples;
        let later = match (&self.last, &other.last) {
            (Some((a, _)), Some((b, _))) => b > a,
            (None, Some(_)) => true,
            _ => false,
        };
        if later {
            self.last = other.last.clone();
        }
    }

    /// `E(r) = (4π²/T) ∫ Σ_{k∈J_r} |û_k|² dt`. A single sample yields the
    /// instantaneous spectrum.
    pub fn finalize(&self) -> Result<EnergySpectrum> {
        if self.samples == 0 {
            return Err(Error::NoSamples);
        }
        let c = 4.0 * PI * PI;
        let e = if self.duration > 0.0 {
            self.integral
                .iter()
                .map(|v| c * v / self.duration)
                .collect()
        } else {
            let (_, shells) = self.last.as_ref().expect("one sample");
            shells.iter().map(|v| c * v).collect()
        };
        Ok(EnergySpectrum { e })
    }
}

/// Time-averaged shell energy `E(r)`, indexed by `r` (index 0 unused).
#[derive(Clone, Debug, PartialEq)]
pub struct EnergySpectrum {
    pub e: Vec<f64>,
}

impl EnergySpectrum {
    pub fn get(&self, r: usize) -> f64 {
        self.e.get(r).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.e.iter().skip(1).sum()
    }
}

/// `τ = 4π² Σ r⁻¹ E(r) / (Σ E(r))^{3/2}`, both sums over `1 <= r <= rmax`.
pub fn eddy_turnover(spectrum: &EnergySpectrum, rmax: usize) -> Result<f64> {
    let top = rmax.min(spectrum.e.len().saturating_sub(1));
    let (mut weighted, mut total) = (0.0, 0.0);
    for r in 1..=top {
        weighted += spectrum.e[r] / r as f64;
        total += spectrum.e[r];
    }
    if !(total > 0.0) {
        return Err(Error::NoSamples);
    }
    Ok(4.0 * PI * PI * weighted / total.powf(1.5))
}

/// One observation of the approximation inequality: `‖u − I_h u‖²`,
/// `h² ‖u‖²_{V¹}`, `h⁴ ‖u‖²_{V²}`.
#[derive(Clone, Copy, Debug)]
pub struct ApproximationSample {
    pub k: usize,
    pub lhs: f64,
    pub h1_term: f64,
    pub h2_term: f64,
}

impl ApproximationSample {
    pub fn ratio(&self) -> f64 {
        self.lhs / (self.h1_term + self.h2_term)
    }
}

pub fn approximation_samples(
    grid: &Arc<SpectralGrid>,
    fields: &[VectorFieldHat],
    k_list: &[usize],
) -> Result<Vec<ApproximationSample>> {
    let mut out = Vec::with_capacity(fields.len() * k_list.len());
    for &k in k_list {
        let sampler = NodeSampler::new(grid, k)?;
        let interp = Interpolant::nodal(grid, k)?;
        let h = grid.length() / k as f64;
        for u in fields {
            let approx = interp.apply(&sampler.sample(u)?)?;
            let lhs = v_alpha_norm_sq(&u.sub(&approx)?, 0.0);
            out.push(ApproximationSample {
                k,
                lhs,
                h1_term: h * h * v_alpha_norm_sq(u, 1.0),
                h2_term: h.powi(4) * v_alpha_norm_sq(u, 2.0),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct GammaFit {
    pub gamma1: f64,
    pub gamma2: f64,
    /// `max lhs / (γ₁ h²‖u‖²_{H¹} + γ₂ h⁴‖u‖²_{H²})` over all samples.
    pub worst_ratio: f64,
    /// Largest plain ratio `lhs / (h²‖u‖²_{H¹} + h⁴‖u‖²_{H²})` per K.
    pub ratio_by_k: Vec<(usize, f64)>,
}

/// Nonnegative relative least-squares fit of
/// `‖u − I_h u‖² ≈ γ₁ h²‖u‖²_{H¹} + γ₂ h⁴‖u‖²_{H²}`.
pub fn measure_gamma(
    grid: &Arc<SpectralGrid>,
    fields: &[VectorFieldHat],
    k_list: &[usize],
) -> Result<GammaFit> {
    if fields.is_empty() || k_list.is_empty() {
        return Err(Error::DegenerateFit("no fields or no K values".into()));
    }
    let samples = approximation_samples(grid, fields, k_list)?;
    fit_gamma(&samples, k_list)
}

pub fn fit_gamma(samples: &[ApproximationSample], k_list: &[usize]) -> Result<GammaFit> {
    let rows: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.lhs > 0.0)
        .map(|s| (s.h1_term / s.lhs, s.h2_term / s.lhs))
        .collect();
    if rows.is_empty() || rows.iter().all(|&(a, b)| a == 0.0 && b == 0.0) {
        return Err(Error::DegenerateFit("all-zero fields".into()));
    }
    // minimise Σ (1 − γ₁ a − γ₂ b)² subject to γ ≥ 0
    let (mut saa, mut sab, mut sbb, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(a, b) in &rows {
        saa += a * a;
        sab += a * b;
        sbb += b * b;
        sa += a;
        sb += b;
    }
    let residual = |g1: f64, g2: f64| -> f64 {
        rows.iter()
            .map(|&(a, b)| (1.0 - g1 * a - g2 * b).powi(2))
            .sum()
    };
    let mut candidates = Vec::new();
    let det = saa * sbb - sab * sab;
    if det.abs() > 1e-300 {
        let g1 = (sa * sbb - sb * sab) / det;
        let g2 = (sb * saa - sa * sab) / det;
        if g1 >= 0.0 && g2 >= 0.0 {
            candidates.push((g1, g2));
        }
    }
    if saa > 0.0 {
        candidates.push(((sa / saa).max(0.0), 0.0));
    }
    if sbb > 0.0 {
        candidates.push((0.0, (sb / sbb).max(0.0)));
    }
    let (gamma1, gamma2) = candidates
        .into_iter()
        .min_by(|x, y| residual(x.0, x.1).total_cmp(&residual(y.0, y.1)))
        .ok_or_else(|| Error::DegenerateFit("no admissible fit".into()))?;
    let worst_ratio = samples
        .iter()
        .map(|s| s.lhs / (gamma1 * s.h1_term + gamma2 * s.h2_term))
        .fold(0.0, f64::max);
    let ratio_by_k = k_list
        .iter()
        .map(|&k| {
            let r = samples
                .iter()
                .filter(|s| s.k == k)
                .map(ApproximationSample::ratio)
                .fold(0.0, f64::max);
            (k, r)
        })
        .collect();
    Ok(GammaFit {
        gamma1,
        gamma2,
        worst_ratio,
        ratio_by_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex64;

    #[test]
    fn error_v_basics() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let psi = crate::spectral::random_stream(&g, 1, 8.0, 1.0);
        let phi = crate::spectral::random_stream(&g, 2, 8.0, 1.0);
        assert_eq!(error_v(&psi, &psi).unwrap(), 0.0);
        assert_eq!(
            error_v(&psi, &StreamField::zeros(&g)).unwrap(),
            norm_v(&psi)
        );
        assert_eq!(error_v(&psi, &phi).unwrap(), error_v(&phi, &psi).unwrap());
        let other = SpectralGrid::new(16, 2.0 * PI).unwrap();
        assert!(error_v(&psi, &StreamField::zeros(&other)).is_err());
    }

    #[test]
    fn crossing_conventions() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let above = ErrorSeries::from_parts(times.clone(), vec![1.0; 11]).unwrap();
        let s = crossing_stats(&above, 0.5, 10.0, 0.0).unwrap();
        assert!(s.t_min.is_infinite() && s.t_max.is_infinite());
        assert!((s.eps_avg - 1.0).abs() < 1e-15);

        let below = ErrorSeries::from_parts(times, vec![0.1; 11]).unwrap();
        let s = crossing_stats(&below, 0.5, 10.0, 0.0).unwrap();
        assert_eq!((s.t_min, s.t_max), (0.0, 0.0));
        assert!(crossing_stats(&ErrorSeries::new(), 0.5, 1.0, 0.0).is_err());
        assert!(crossing_stats(&below, 0.5, 1.0, 2.0).is_err());

        let ramp = ErrorSeries::from_parts(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 0.0]).unwrap();
        let s = crossing_stats(&ramp, 0.25, 2.0, 0.0).unwrap();
        assert_eq!((s.t_min, s.t_max), (0.75, 0.75));
    }

    #[test]
    fn shell_membership() {
        assert_eq!(shell_of(25), 5);
        assert_eq!(shell_of(1), 1);
        assert_eq!(shell_of(2), 1); // |k| = 1.414
        assert_eq!(shell_of(5), 2); // |k| = 2.236
        assert_eq!(shell_of(8), 3); // |k| = 2.83
    }

    #[test]
    fn single_pair_spectrum() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let c: f64 = 0.3;
        let mut u1 = vec![Complex64::new(0.0, 0.0); g.len()];
        let u2 = u1.clone();
        u1[g.index_of(3, 4).unwrap()] = Complex64::new(c.sqrt(), 0.0);
        u1[g.index_of(-3, -4).unwrap()] = Complex64::new(c.sqrt(), 0.0);
        let u = VectorFieldHat::from_components(&g, u1, u2).unwrap();
        let mut acc = SpectrumAccumulator::new();
        for t in 0..5 {
            acc.add_sample(t as f64, &u).unwrap();
        }
        let e = acc.finalize().unwrap();
        let expect = 4.0 * PI * PI * 2.0 * c;
        assert!((e.get(5) - expect).abs() < 1e-12 * expect);
        assert!((e.total() - expect).abs() < 1e-12 * expect);
        let tau = eddy_turnover(&e, 10).unwrap();
        assert!((tau - 4.0 * PI * PI / (5.0 * expect.sqrt())).abs() < 1e-12 * tau);
        assert!(SpectrumAccumulator::new().finalize().is_err());
    }

    #[test]
    fn degenerate_gamma_fit() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let zero = VectorFieldHat::zeros(&g);
        assert!(measure_gamma(&g, &[zero], &[4]).is_err());
        assert!(measure_gamma(&g, &[], &[4]).is_err());
    }
}

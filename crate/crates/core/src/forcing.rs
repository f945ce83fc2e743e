//! Annulus-band body force, Grashof scaling and spin-up of the reference flow.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::dynamics::{Stepper, StepperState};
use crate::error::{Error, Result};
use crate::spectral::{curl_scalar, SpectralGrid, StreamField, VectorFieldHat};

#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSpec {
    /// Inclusive bounds on integer `|k|²`.
    pub band_lo: i64,
    pub band_hi: i64,
    pub grashof: f64,
    pub seed: u64,
    pub nu: f64,
    pub length: f64,
}

/// A time-independent force and its curl `ĝ`.
#[derive(Clone, Debug)]
pub struct Forcing {
    pub f: VectorFieldHat,
    pub ghat: StreamField,
}

/// Builds a divergence-free force supported on `band_lo <= |k|² <= band_hi`, with
/// unit-magnitude coefficients, seeded random phases and amplitude scaled to the
/// requested Grashof number.
pub fn make_forcing(spec: &ForcingSpec, grid: &Arc<SpectralGrid>) -> Result<Forcing> {
    if spec.band_lo <= 0 || spec.band_lo > spec.band_hi {
        return Err(Error::InvalidForcing(format!(
            "band [{}, {}] must satisfy 0 < lo <= hi",
            spec.band_lo, spec.band_hi
        )));
    }
    let kmax = grid.kmax();
    if spec.band_hi > kmax * kmax {
        return Err(Error::InvalidForcing(format!(
            "band upper bound {} exceeds kmax² = {}",
            spec.band_hi,
            kmax * kmax
        )));
    }
    if !(spec.grashof > 0.0) || !(spec.nu > 0.0) {
        return Err(Error::InvalidForcing(
            "grashof and nu must be positive".into(),
        ));
    }
    if spec.length != grid.length() {
        return Err(Error::InvalidForcing(format!(
            "forcing box {} differs from grid box {}",
            spec.length,
            grid.length()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut u1 = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut u2 = u1.clone();
    let mut count = 0;
    for &idx in grid.retained() {
        let (k1, k2) = grid.wavenumber(idx);
        let ksq = k1 * k1 + k2 * k2;
        let upper = k2 > 0 || (k2 == 0 && k1 > 0);
        if !upper || ksq < spec.band_lo || ksq > spec.band_hi {
            continue;
        }
        let phase = rng.gen_range(0.0..2.0 * PI);
        let c = Complex64::from_polar(1.0 / (ksq as f64).sqrt(), phase);
        // unit vector perpendicular to k
        let a = c * -(k2 as f64);
        let b = c * k1 as f64;
        let neg = grid.neg_index(idx);
        u1[idx] = a;
        u2[idx] = b;
        u1[neg] = a.conj();
        u2[neg] = b.conj();
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidForcing(format!(
            "no grid modes with {} <= |k|² <= {}",
            spec.band_lo, spec.band_hi
        )));
    }
    let raw = VectorFieldHat::from_components(grid, u1, u2)?;
    let g0 = grashof_of(&raw, spec.nu, spec.length);
    let factor = spec.grashof / g0;
    let (a, b) = (raw.u1(), raw.u2());
    let f = VectorFieldHat::from_components(
        grid,
        a.iter().map(|c| c * factor).collect(),
        b.iter().map(|c| c * factor).collect(),
    )?;
    let ghat = curl_scalar(&f);
    Ok(Forcing { f, ghat })
}

/// `G = (L / 2πν)² ‖f‖_{L²}`.
pub fn grashof_of(f: &VectorFieldHat, nu: f64, length: f64) -> f64 {
    let sum: f64 = f.u1().iter().chain(f.u2()).map(|c| c.norm_sqr()).sum();
    let norm = (length * length * sum).sqrt();
    (length / (2.0 * PI * nu)).powi(2) * norm
}

/// Result of integrating the reference flow from rest.
#[derive(Clone, Debug)]
pub struct SpinUp {
    pub psi: StreamField,
    pub steps: u64,
    pub cfl_max: f64,
}

/// Integrates the reference scheme from the zero field for `duration` time units.
/// Aborts if the CFL number exceeds one.
pub fn spin_up(
    ghat: &StreamField,
    nu: f64,
    grid: &Arc<SpectralGrid>,
    dt: f64,
    duration: f64,
) -> Result<SpinUp> {
    spin_up_from(StreamField::zeros(grid), ghat, nu, dt, duration, |_, _| {})
}

/// Spin-up from an arbitrary start, calling `observe(step, psi)` after each step.
pub fn spin_up_from(
    start: StreamField,
    ghat: &StreamField,
    nu: f64,
    dt: f64,
    duration: f64,
    mut observe: impl FnMut(u64, &StreamField),
) -> Result<SpinUp> {
    if !(duration >= 0.0) {
        return Err(Error::InvalidForcing(format!(
            "spin-up duration must be >= 0, got {duration}"
        )));
    }
    let steps = (duration / dt).round() as u64;
    let mut state = StepperState::new(start, ghat.clone(), nu, dt)?;
    let stepper = Stepper::new(&state)?;
    let mut cfl_max: f64 = 0.0;
    for step in 1..=steps {
        let info = stepper.step_reference(&mut state);
        cfl_max = cfl_max.max(info.cfl);
        if info.cfl > 1.0 {
            return Err(Error::CflExceeded {
                cfl: info.cfl,
                t: (step - 1) as f64 * dt,
            });
        }
        if !state.psi.is_finite() {
            return Err(Error::NonFinite {
                t: step as f64 * dt,
            });
        }
        observe(step, &state.psi);
        if step % 10_000 == 0 {
            log::info!("spin-up t={:.1} cfl_max={:.4}", step as f64 * dt, cfl_max);
        }
    }
    log::info!("spin-up done: {steps} steps, max CFL {cfl_max:.4}");
    Ok(SpinUp {
        psi: state.psi,
        steps,
        cfl_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(lo: i64, hi: i64) -> ForcingSpec {
        ForcingSpec {
            band_lo: lo,
            band_hi: hi,
            grashof: 2.5e6,
            seed: 7,
            nu: 1e-4,
            length: 2.0 * PI,
        }
    }

    #[test]
    fn band_support_and_divergence() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let f = make_forcing(&spec(110, 132), &g).unwrap();
        let max = f.f.max_abs();
        for idx in 0..g.len() {
            let ksq = g.k_sq(idx);
            let mag = f.f.u1()[idx].norm() + f.f.u2()[idx].norm();
            if !(110..=132).contains(&ksq) {
                assert_eq!(mag, 0.0);
            } else {
                assert!(mag > 0.0);
            }
        }
        assert!(f.f.max_divergence() <= 1e-15 * max * 12.0);
        assert!((grashof_of(&f.f, 1e-4, 2.0 * PI) / 2.5e6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn required_norm_for_full_scale_grashof() {
        // (L/2πν)² = 1e8 at ν = 1e-4, L = 2π
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let f = make_forcing(&spec(110, 132), &g).unwrap();
        let sum: f64 = f.f.u1().iter().chain(f.f.u2()).map(|c| c.norm_sqr()).sum();
        let norm = (4.0 * PI * PI * sum).sqrt();
        assert!((norm - 0.025).abs() < 1e-14);
    }

    #[test]
    fn deterministic_in_seed() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let a = make_forcing(&spec(10, 12), &g).unwrap();
        let b = make_forcing(&spec(10, 12), &g).unwrap();
        let bits = |f: &Forcing| -> Vec<u64> {
            f.ghat
                .coeffs()
                .iter()
                .flat_map(|c| [c.re.to_bits(), c.im.to_bits()])
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn rejects_bad_bands() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        assert!(make_forcing(&spec(11, 11), &g).is_err()); // no lattice point with |k|² = 11
        assert!(make_forcing(&spec(0, 4), &g).is_err());
        assert!(make_forcing(&spec(10, 1000), &g).is_err());
    }

    #[test]
    fn zero_duration_is_zero_field() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let f = make_forcing(&spec(10, 12), &g).unwrap();
        let s = spin_up(&f.ghat, 1e-3, &g, 0.01, 0.0).unwrap();
        assert_eq!(s.psi.max_abs(), 0.0);
        assert_eq!(s.steps, 0);
    }
}

//! Nonlinear term and the exponential split-Euler steppers.
//!
//! Per retained mode, with `κ² = (2π/L)² |k|²` and `E = exp(-ν κ² Δt)`:
//!
//! ```text
//! Ψ̂ ← E (Ψ̂ + Δt/κ² β̂(Ψ)) − ĝ/(ν κ⁴) (1 − E)
//! Φ̂ ← E (Φ̂ + Δt/κ² (β̂(Φ) + μ R̂_h(Φ − Ψ))) − ĝ/(ν κ⁴) (1 − E)
//! ```
//!
//! The assimilated update sees the reference only through an [`Observation`].

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::observables::{Observation, ObservationOperator, ObservationSpec};
use crate::spectral::{SpectralGrid, StreamField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Physical velocity samples on the collocation grid, produced as a by-product of
/// the nonlinear term.
#[derive(Clone, Debug)]
pub struct PhysicalVelocity {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl PhysicalVelocity {
    /// `max_x |u₁| + |u₂|`.
    pub fn max_speed_sum(&self) -> f64 {
        self.u1
            .iter()
            .zip(&self.u2)
            .map(|(a, b)| a.abs() + b.abs())
            .fold(0.0, f64::max)
    }
}

/// `β(ψ) = J(ψ, Δψ)` in the form `((ψ_x)² − (ψ_y)²)_{xy} − (ψ_x ψ_y)_{xx} + (ψ_x ψ_y)_{yy}`,
/// Galerkin-projected onto the retained modes.
pub fn jacobian_beta(psi: &StreamField) -> StreamField {
    jacobian_with_velocity(psi).0
}

/// Same as [`jacobian_beta`], also returning the physical velocity.
pub fn jacobian_with_velocity(psi: &StreamField) -> (StreamField, PhysicalVelocity) {
    let mut ws = Workspace::new(psi.grid());
    ws.jacobian(psi);
    let beta = StreamField::from_coeffs(psi.grid(), ws.beta).expect("grid-sized buffer");
    (beta, ws.vel)
}

/// Reusable buffers for the nonlinear term.
#[derive(Clone, Debug)]
pub struct Workspace {
    buf: Vec<Complex64>,
    beta: Vec<Complex64>,
    vel: PhysicalVelocity,
    /// `max_x |u₁| + |u₂|` of the last field.
    speed: f64,
}

impl Workspace {
    pub fn new(grid: &Arc<SpectralGrid>) -> Self {
        Workspace {
            buf: vec![ZERO; grid.len()],
            beta: vec![ZERO; grid.len()],
            vel: PhysicalVelocity {
                u1: vec![0.0; grid.len()],
                u2: vec![0.0; grid.len()],
            },
            speed: 0.0,
        }
    }

    /// Fills `beta` with β̂(ψ) and `vel` with the physical velocity of `ψ`.
    ///
    /// Four real transforms, packed pairwise into two complex ones: `ψ_x + i ψ_y` goes
    /// to physical space, `(ψ_x)² − (ψ_y)² + i ψ_x ψ_y` comes back.
    fn jacobian(&mut self, psi: &StreamField) {
        let grid = psi.grid();
        let n = grid.n();
        let s = grid.scale();
        let (kx, ky) = grid.k_tables();
        let coeffs = psi.coeffs();
        let buf = &mut self.buf;
        // rows outside the mask are never read by the dealiased inverse
        for &(a, _) in grid.retained_spans().iter().step_by(2) {
            let row = a - a % n;
            buf[row..row + n].fill(ZERO);
        }
        for &(a, b) in grid.retained_spans() {
            // ψ_x + i ψ_y = i s (k1 + i k2) ψ̂ = s (-k2 + i k1) ψ̂
            for (((z, c), k1), k2) in buf[a..b]
                .iter_mut()
                .zip(&coeffs[a..b])
                .zip(&kx[a..b])
                .zip(&ky[a..b])
            {
                *z = c * Complex64::new(-k2 * s, k1 * s);
            }
        }
        grid.inverse_dealiased(buf);

        let mut speed: f64 = 0.0;
        for ((z, v1), v2) in buf.iter_mut().zip(&mut self.vel.u1).zip(&mut self.vel.u2) {
            let (a, b) = (z.re, z.im);
            *v1 = -b;
            *v2 = a;
            speed = speed.max(a.abs() + b.abs());
            *z = Complex64::new(a * a - b * b, a * b);
        }
        self.speed = speed;
        grid.forward_dealiased_unnormalized(buf);

        // P̂ = (f + conj f₋)/2, Q̂ = (f − conj f₋)/(2i), with the 1/n² normalization folded in
        let c = s * s / grid.len() as f64 * 0.5;
        let neg = grid.neg_table();
        for &(a, b) in grid.retained_spans() {
            for ((((out, &f), k1), k2), &m) in self.beta[a..b]
                .iter_mut()
                .zip(&buf[a..b])
                .zip(&kx[a..b])
                .zip(&ky[a..b])
                .zip(&neg[a..b])
            {
                let g = buf[m].conj();
                let p = f + g;
                let d = f - g;
                let q = Complex64::new(d.im, -d.re);
                *out = (p * (-k1 * k2) + q * (k1 * k1 - k2 * k2)) * c;
            }
        }
    }
}

/// `(n Δt / 2L) max_x (|u₁| + |u₂|)` with `n` points per dimension.
pub fn cfl_number(psi: &StreamField, dt: f64, n: usize) -> f64 {
    let (_, vel) = jacobian_with_velocity(psi);
    cfl_from_speed(vel.max_speed_sum(), dt, n, psi.grid().length())
}

pub(crate) fn cfl_from_speed(speed: f64, dt: f64, n: usize, length: f64) -> f64 {
    n as f64 * dt / (2.0 * length) * speed
}

/// Reference field, optional assimilated field and the parameters of the scheme.
#[derive(Clone, Debug)]
pub struct StepperState {
    pub psi: StreamField,
    pub phi: Option<StreamField>,
    /// Number of steps taken; the time is `t0 + step * dt`.
    pub step: u64,
    pub t0: f64,
    pub dt: f64,
    pub ghat: StreamField,
    pub nu: f64,
    pub mu: f64,
    pub obs: Option<ObservationSpec>,
}

impl StepperState {
    pub fn new(psi: StreamField, ghat: StreamField, nu: f64, dt: f64) -> Result<Self> {
        if !psi.grid().same_as(ghat.grid()) {
            return Err(Error::GridMismatch);
        }
        if !(dt > 0.0) || !(nu > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "dt and nu must be positive (dt={dt}, nu={nu})"
            )));
        }
        Ok(StepperState {
            psi,
            phi: None,
            step: 0,
            t0: 0.0,
            dt,
            ghat,
            nu,
            mu: 0.0,
            obs: None,
        })
    }

    /// Attaches an assimilated field with nudging strength `mu`.
    pub fn with_assimilation(
        mut self,
        phi: StreamField,
        mu: f64,
        obs: ObservationSpec,
    ) -> Result<Self> {
        if !phi.grid().same_as(self.psi.grid()) {
            return Err(Error::GridMismatch);
        }
        if !(mu >= 0.0) {
            return Err(Error::InvalidObservation(format!(
                "mu must be >= 0, got {mu}"
            )));
        }
        self.phi = Some(phi);
        self.mu = mu;
        self.obs = Some(obs);
        Ok(self)
    }

    pub fn t(&self) -> f64 {
        self.t0 + self.step as f64 * self.dt
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        self.psi.grid()
    }
}

/// Precomputed per-mode factors of the exponential split-Euler scheme.
#[derive(Debug)]
pub struct Stepper {
    grid: Arc<SpectralGrid>,
    decay: Vec<f64>,
    nl_factor: Vec<f64>,
    forcing: Vec<Complex64>,
    observer: Option<ObservationOperator>,
    mu: f64,
    dt: f64,
    work: RefCell<(Workspace, Workspace)>,
}

/// Outcome of one step: the reference CFL number measured on the pre-step field.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub cfl: f64,
}

impl Stepper {
    pub fn new(state: &StepperState) -> Result<Self> {
        let grid = state.grid().clone();
        if !grid.same_as(state.ghat.grid()) {
            return Err(Error::GridMismatch);
        }
        let s2 = grid.scale() * grid.scale();
        let (nu, dt) = (state.nu, state.dt);
        let mut decay = vec![0.0; grid.len()];
        let mut nl_factor = vec![0.0; grid.len()];
        let mut forcing = vec![ZERO; grid.len()];
        let ghat = state.ghat.coeffs();
        for &idx in grid.retained() {
            let kappa2 = grid.k_sq(idx) as f64 * s2;
            let e = (-nu * kappa2 * dt).exp();
            decay[idx] = e;
            nl_factor[idx] = dt / kappa2;
            forcing[idx] = ghat[idx] / (nu * kappa2 * kappa2) * (1.0 - e);
        }
        let observer = match &state.obs {
            Some(spec) => Some(ObservationOperator::new(spec.clone(), &grid)?),
            None => None,
        };
        let work = RefCell::new((Workspace::new(&grid), Workspace::new(&grid)));
        Ok(Stepper {
            grid,
            decay,
            nl_factor,
            forcing,
            observer,
            mu: state.mu,
            dt,
            work,
        })
    }

    pub fn observer(&self) -> Option<&ObservationOperator> {
        self.observer.as_ref()
    }

    /// Applies the exponential update to `field` given its forcing-free tendency
    /// (β̂, or β̂ + μR̂).
    fn update(&self, field: &mut StreamField, tendency: &[Complex64]) {
        let c = field.coeffs_mut();
        for &(a, b) in self.grid.retained_spans() {
            for ((((c, t), nl), e), f) in c[a..b]
                .iter_mut()
                .zip(&tendency[a..b])
                .zip(&self.nl_factor[a..b])
                .zip(&self.decay[a..b])
                .zip(&self.forcing[a..b])
            {
                *c = (*c + t * nl) * e - f;
            }
        }
    }

    /// Advances the reference field alone.
    pub fn step_reference(&self, state: &mut StepperState) -> StepInfo {
        self.step_reference_with(state, |_, _| ()).0
    }

    /// Advances the reference field, first handing the pre-step field and its
    /// physical velocity to `observe`.
    pub fn step_reference_with<R>(
        &self,
        state: &mut StepperState,
        observe: impl FnOnce(&StreamField, &PhysicalVelocity) -> R,
    ) -> (StepInfo, R) {
        let mut work = self.work.borrow_mut();
        let ws = &mut work.0;
        ws.jacobian(&state.psi);
        let info = self.info(ws.speed);
        let r = observe(&state.psi, &ws.vel);
        self.update(&mut state.psi, &ws.beta);
        state.step += 1;
        (info, r)
    }

    /// Advances reference and assimilated fields together. The observation of `Ψ`
    /// is taken from its pre-step value. The returned CFL is the larger of the two.
    pub fn step_assimilated(&self, state: &mut StepperState) -> Result<StepInfo> {
        let observer = self.observer.as_ref().ok_or(Error::MissingObservation)?;
        let phi = state.phi.as_mut().ok_or(Error::MissingObservation)?;
        let mut work = self.work.borrow_mut();
        let (ws, ws_phi) = &mut *work;
        ws.jacobian(&state.psi);
        let info = self.info(ws.speed);
        let observation = observer.observe(&state.psi, Some(&ws.vel))?;
        let own = self.advance_with(phi, &observation, ws_phi)?;
        self.update(&mut state.psi, &ws.beta);
        state.step += 1;
        Ok(StepInfo {
            cfl: info.cfl.max(own.cfl),
        })
    }

    /// One assimilated step of `phi` against an observation of the reference. Nothing
    /// about the reference other than `observation` is available here. Returns the
    /// CFL number of `phi` before the step.
    pub fn advance_assimilated(
        &self,
        phi: &mut StreamField,
        observation: &Observation,
    ) -> Result<StepInfo> {
        let mut work = self.work.borrow_mut();
        self.advance_with(phi, observation, &mut work.1)
    }

    fn advance_with(
        &self,
        phi: &mut StreamField,
        observation: &Observation,
        ws: &mut Workspace,
    ) -> Result<StepInfo> {
        let observer = self.observer.as_ref().ok_or(Error::MissingObservation)?;
        if !phi.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        ws.jacobian(phi);
        if self.mu != 0.0 {
            let own = observer.observe(phi, Some(&ws.vel))?;
            observer.feedback_add(&own.difference(observation)?, self.mu, &mut ws.beta)?;
        }
        let info = self.info(ws.speed);
        self.update(phi, &ws.beta);
        Ok(info)
    }

    fn info(&self, speed: f64) -> StepInfo {
        StepInfo {
            cfl: cfl_from_speed(speed, self.dt, self.grid.n(), self.grid.length()),
        }
    }
}

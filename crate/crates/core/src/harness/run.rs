//! Spin-up, coupled reference/assimilated runs, sweeps and spectrum measurement.
//!
//! Every run in a sweep shares the same reference trajectory, so the runs handled by
//! one worker advance together against a single reference. Each assimilated field
//! receives the reference only as an [`Observation`] through
//! [`Stepper::advance_assimilated`].

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::diagnostics::{
    crossing_stats, eddy_turnover, energy, error_v, EnergySpectrum, ErrorSeries,
    SpectrumAccumulator,
};
use crate::dynamics::{cfl_number, Stepper, StepperState};
use crate::error::{Error, Result};
use crate::forcing::{make_forcing, spin_up_from, Forcing, SpinUp};
use crate::harness::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use crate::harness::config::RunConfig;
use crate::observables::{Observation, ObservationKind, ObservationOperator, ObservationSpec};
use crate::spectral::{SpectralGrid, StreamField};

/// Grid and forcing built from a config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub grid: Arc<SpectralGrid>,
    pub forcing: Forcing,
}

impl Setup {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let grid = SpectralGrid::new(config.n, config.length)?;
        let forcing = make_forcing(&config.forcing_spec(), &grid)?;
        Ok(Setup { grid, forcing })
    }
}

/// Spins the reference up from rest for `spinup.duration`.
pub fn spin_up(config: &RunConfig, setup: &Setup) -> Result<SpinUp> {
    spin_up_from(
        StreamField::zeros(&setup.grid),
        &setup.forcing.ghat,
        config.nu,
        config.dt,
        config.spinup_duration,
        |_, _| {},
    )
}

/// `u₀`: read from `assimilation.initial` when set, spun up from rest otherwise.
pub fn initial_field(
    config: &RunConfig,
    setup: &Setup,
    allow_hash_mismatch: bool,
) -> Result<StreamField> {
    match &config.initial {
        Some(path) => {
            let ckpt = read_checkpoint(path)?;
            ckpt.check_config(config, allow_hash_mismatch)?;
            if ckpt.n != config.n {
                return Err(Error::Checkpoint(format!(
                    "checkpoint grid n={} differs from config n={}",
                    ckpt.n, config.n
                )));
            }
            ckpt.psi_field(&setup.grid)
        }
        None => Ok(spin_up(config, setup)?.psi),
    }
}

/// One recorded sample of a coupled run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesSample {
    pub t: f64,
    pub err_v: f64,
    pub energy_u: f64,
    pub energy_v: f64,
    /// Largest CFL number of either field since the previous sample.
    pub cfl: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RowStats {
    pub t_min: f64,
    pub t_max: f64,
    pub eps_avg: f64,
    pub wall_s: f64,
    pub cfl_max: f64,
}

/// One `(μ, K, η)` point of a sweep. A failed run carries `kind: message`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub k: usize,
    pub eta: f64,
    pub outcome: std::result::Result<RowStats, String>,
}

#[derive(Clone, Debug)]
pub struct PairRun {
    pub series: Vec<SeriesSample>,
    pub row: SweepRow,
    pub psi: StreamField,
    pub phi: StreamField,
}

/// Coupled run of `u₀` and `v₀ = 0` over `[0, T]`.
pub fn run_pair(
    config: &RunConfig,
    setup: &Setup,
    u0: &StreamField,
    mu: f64,
    spec: &ObservationSpec,
) -> Result<PairRun> {
    let start = Start {
        psi: u0.clone(),
        phi: StreamField::zeros(&setup.grid),
        step: 0,
        prior: Vec::new(),
    };
    run_ensemble(config, setup, start, &[(mu, spec.clone())], true)
        .pop()
        .expect("one member")
}

/// Continues a coupled run from a checkpoint holding both fields. `prior` is the
/// series recorded before the checkpoint (samples after its time are dropped).
pub fn resume_pair(
    config: &RunConfig,
    setup: &Setup,
    ckpt: &Checkpoint,
    mu: f64,
    spec: &ObservationSpec,
    mut prior: Vec<SeriesSample>,
) -> Result<PairRun> {
    let phi = ckpt
        .phi_field(&setup.grid)?
        .ok_or_else(|| Error::Checkpoint("checkpoint has no assimilated field".into()))?;
    if ckpt.t0 != 0.0 || ckpt.dt != config.dt {
        return Err(Error::Checkpoint(
            "checkpoint was not written by a coupled run of this config".into(),
        ));
    }
    let t = ckpt.time();
    prior.retain(|s| s.t <= t);
    let start = Start {
        psi: ckpt.psi_field(&setup.grid)?,
        phi,
        step: ckpt.step,
        prior,
    };
    run_ensemble(config, setup, start, &[(mu, spec.clone())], true)
        .pop()
        .expect("one member")
}

/// Rows of the configured sweep, sorted by `(K, η, μ)`. Modal sweeps vary `μ` only
/// and report `K = 0`, `η = 0`.
pub fn sweep_points(config: &RunConfig) -> Vec<(f64, usize, f64)> {
    let mut points = Vec::new();
    if config.kind == ObservationKind::Modal {
        points.extend(config.mu_list.iter().map(|&mu| (mu, 0, 0.0)));
    } else {
        for &k in &config.k_list {
            for &eta in &config.eta_list {
                points.extend(config.mu_list.iter().map(|&mu| (mu, k, eta)));
            }
        }
    }
    points.sort_by(|a, b| {
        (a.1, a.2, a.0)
            .partial_cmp(&(b.1, b.2, b.0))
            .expect("finite sweep values")
    });
    points.dedup();
    points
}

/// Runs every sweep point. Points are dealt round-robin to `output.workers` workers;
/// each worker advances one reference and its share of assimilated fields. The rows
/// do not depend on the number of workers.
pub fn sweep(config: &RunConfig, setup: &Setup, u0: &StreamField) -> Result<Vec<SweepRow>> {
    run_points(config, setup, u0, &sweep_points(config))
}

/// Like [`sweep`] for an explicit list of `(μ, K, η)` points, returned in the given
/// order.
pub fn run_points(
    config: &RunConfig,
    setup: &Setup,
    u0: &StreamField,
    points: &[(f64, usize, f64)],
) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one mu (and K for nodal kinds)".into(),
        ));
    }
    let workers = config.workers.min(points.len());
    let groups: Vec<Vec<usize>> = (0..workers)
        .map(|w| (w..points.len()).step_by(workers).collect())
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Vec<Result<PairRun>>> = pool.install(|| {
        groups
            .par_iter()
            .map(|group| {
                let members: Vec<(f64, ObservationSpec)> = group
                    .iter()
                    .map(|&i| {
                        let (mu, k, eta) = points[i];
                        (mu, config.observation(k, eta))
                    })
                    .collect();
                let start = Start {
                    psi: u0.clone(),
                    phi: StreamField::zeros(&setup.grid),
                    step: 0,
                    prior: Vec::new(),
                };
                run_ensemble(config, setup, start, &members, false)
            })
            .collect()
    });
    let mut rows: Vec<Option<SweepRow>> = vec![None; points.len()];
    for (group, runs) in groups.iter().zip(results) {
        for (&i, run) in group.iter().zip(runs) {
            let (mu, k, eta) = points[i];
            rows[i] = Some(match run {
                Ok(r) => SweepRow { k, eta, ..r.row },
                Err(e) => {
                    log::error!("sweep point mu={mu} K={k} eta={eta} failed: {e}");
                    SweepRow {
                        mu,
                        k,
                        eta,
                        outcome: Err(format!("{}: {e}", e.kind())),
                    }
                }
            });
        }
    }
    Ok(rows
        .into_iter()
        .map(|r| r.expect("every point ran"))
        .collect())
}

struct Start {
    psi: StreamField,
    phi: StreamField,
    step: u64,
    prior: Vec<SeriesSample>,
}

/// One assimilated trajectory shared by all members with the same `(μ, spec)`;
/// every `μ = 0` member shares one.
struct Track {
    stepper: Stepper,
    phi: StreamField,
    key: usize,
    series: Vec<SeriesSample>,
    cfl_since: f64,
    cfl_max: f64,
    seconds: f64,
    failed: Option<Error>,
}

fn run_ensemble(
    config: &RunConfig,
    setup: &Setup,
    start: Start,
    members: &[(f64, ObservationSpec)],
    write_checkpoints: bool,
) -> Vec<Result<PairRun>> {
    match ensemble_inner(config, setup, start, members, write_checkpoints) {
        Ok(runs) => runs,
        Err(e) => members.iter().map(|_| Err(clone_error(&e))).collect(),
    }
}

fn ensemble_inner(
    config: &RunConfig,
    setup: &Setup,
    start: Start,
    members: &[(f64, ObservationSpec)],
    write_checkpoints: bool,
) -> Result<Vec<Result<PairRun>>> {
    let grid = &setup.grid;
    let dt = config.dt;
    let steps = config.steps();
    if steps == 0 {
        return Err(Error::Config(
            "assimilation.T must span at least one step".into(),
        ));
    }
    if start.step > steps {
        return Err(Error::Checkpoint(format!(
            "start step {} lies beyond the window of {steps} steps",
            start.step
        )));
    }
    let ghat = setup.forcing.ghat.clone();
    let mut reference = StepperState::new(start.psi, ghat.clone(), config.nu, dt)?;
    reference.step = start.step;
    let ref_stepper = Stepper::new(&reference)?;

    // distinct reference observations, by sampling pattern
    let mut observers: Vec<ObservationOperator> = Vec::new();
    let mut track_of_member = Vec::with_capacity(members.len());
    let mut tracks: Vec<Track> = Vec::new();
    let mut track_keys: Vec<(f64, ObservationSpec)> = Vec::new();
    for (mu, spec) in members {
        spec.validate(grid)?;
        let key = if *mu == 0.0 {
            let shared = track_keys.iter().find(|k| k.0 == 0.0).map(|k| k.1.clone());
            (0.0, shared.unwrap_or_else(|| spec.clone()))
        } else {
            (*mu, spec.clone())
        };
        if let Some(t) = track_keys.iter().position(|k| *k == key) {
            track_of_member.push(t);
            continue;
        }
        let obs_spec = key.1.clone();
        let sampling = |o: &ObservationOperator| {
            let s = o.spec();
            s.k == obs_spec.k
                && (s.kind == ObservationKind::Modal) == (obs_spec.kind == ObservationKind::Modal)
                && s.modal_radius == obs_spec.modal_radius
        };
        let obs_key = match observers.iter().position(sampling) {
            Some(i) => i,
            None => {
                observers.push(ObservationOperator::new(obs_spec.clone(), grid)?);
                observers.len() - 1
            }
        };
        let state = StepperState::new(StreamField::zeros(grid), ghat.clone(), config.nu, dt)?
            .with_assimilation(start.phi.clone(), key.0, obs_spec)?;
        let mut series = start.prior.clone();
        let cfl0 =
            cfl_number(&start.phi, dt, grid.n()).max(cfl_number(&reference.psi, dt, grid.n()));
        if series.is_empty() {
            series.push(sample(reference.t(), &reference.psi, &start.phi, cfl0)?);
        }
        tracks.push(Track {
            stepper: Stepper::new(&state)?,
            phi: start.phi.clone(),
            key: obs_key,
            series,
            cfl_since: 0.0,
            cfl_max: start.prior.iter().map(|s| s.cfl).fold(cfl0, f64::max),
            seconds: 0.0,
            failed: None,
        });
        track_keys.push(key);
        track_of_member.push(tracks.len() - 1);
    }

    let stride = config.sample_stride;
    let mut ref_seconds = 0.0;
    let mut ref_cfl_max: f64 = 0.0;
    let mut ref_cfl_since: f64 = 0.0;
    for step in start.step + 1..=steps {
        let clock = Instant::now();
        let t_pre = reference.t();
        let (info, observations) = ref_stepper.step_reference_with(&mut reference, |psi, vel| {
            observers
                .iter()
                .map(|o| o.observe(psi, Some(vel)))
                .collect::<Result<Vec<Observation>>>()
        });
        let observations = observations?;
        check_cfl(info.cfl, t_pre)?;
        ref_cfl_max = ref_cfl_max.max(info.cfl);
        ref_cfl_since = ref_cfl_since.max(info.cfl);
        ref_seconds += clock.elapsed().as_secs_f64();

        for track in tracks.iter_mut().filter(|t| t.failed.is_none()) {
            let clock = Instant::now();
            let outcome = track
                .stepper
                .advance_assimilated(&mut track.phi, &observations[track.key])
                .and_then(|i| check_cfl(i.cfl, t_pre).map(|_| i.cfl));
            match outcome {
                Ok(cfl) => {
                    track.cfl_since = track.cfl_since.max(cfl);
                    track.cfl_max = track.cfl_max.max(cfl);
                }
                Err(e) => track.failed = Some(e),
            }
            track.seconds += clock.elapsed().as_secs_f64();
        }

        if step % stride == 0 || step == steps {
            if !reference.psi.is_finite() {
                return Err(Error::NonFinite { t: reference.t() });
            }
            for track in tracks.iter_mut().filter(|t| t.failed.is_none()) {
                if !track.phi.is_finite() {
                    track.failed = Some(Error::NonFinite { t: reference.t() });
                    continue;
                }
                let cfl = track.cfl_since.max(ref_cfl_since);
                match sample(reference.t(), &reference.psi, &track.phi, cfl) {
                    Ok(s) => track.series.push(s),
                    Err(e) => track.failed = Some(e),
                }
                track.cfl_since = 0.0;
            }
            ref_cfl_since = 0.0;
        }
        if write_checkpoints
            && config.checkpoint_interval > 0
            && step % config.checkpoint_interval == 0
        {
            if let Some(track) = tracks.first().filter(|t| t.failed.is_none()) {
                let path = config.output_dir.join("pair.ckpt");
                let ckpt = Checkpoint::new(config, 0.0, step, &reference.psi, Some(&track.phi));
                write_checkpoint(&path, &ckpt)?;
            }
        }
        if step % 100_000 == 0 {
            log::info!(
                "t={:.1} reference CFL max {:.4}",
                reference.t(),
                ref_cfl_max
            );
        }
    }

    let shared = tracks.len().max(1) as f64;
    let t_end = steps as f64 * dt;
    let runs = members
        .iter()
        .zip(&track_of_member)
        .map(|((mu, spec), &t)| {
            let track = &tracks[t];
            if let Some(e) = &track.failed {
                return Err(clone_error(e));
            }
            let series = ErrorSeries::from_parts(
                track.series.iter().map(|s| s.t).collect(),
                track.series.iter().map(|s| s.err_v).collect(),
            )?;
            let stats = crossing_stats(&series, config.eps, t_end, config.t0())?;
            Ok(PairRun {
                series: track.series.clone(),
                row: SweepRow {
                    mu: *mu,
                    k: if spec.kind == ObservationKind::Modal {
                        0
                    } else {
                        spec.k
                    },
                    eta: spec.eta,
                    outcome: Ok(RowStats {
                        t_min: stats.t_min,
                        t_max: stats.t_max,
                        eps_avg: stats.eps_avg,
                        wall_s: track.seconds + ref_seconds / shared,
                        cfl_max: track.cfl_max.max(ref_cfl_max),
                    }),
                },
                psi: reference.psi.clone(),
                phi: track.phi.clone(),
            })
        })
        .collect();
    Ok(runs)
}

fn sample(t: f64, psi: &StreamField, phi: &StreamField, cfl: f64) -> Result<SeriesSample> {
    Ok(SeriesSample {
        t,
        err_v: error_v(psi, phi)?,
        energy_u: energy(psi),
        energy_v: energy(phi),
        cfl,
    })
}

fn check_cfl(cfl: f64, t: f64) -> Result<()> {
    if !cfl.is_finite() {
        return Err(Error::NonFinite { t });
    }
    if cfl > 1.0 {
        return Err(Error::CflExceeded { cfl, t });
    }
    Ok(())
}

/// Errors are not `Clone` (they may hold an `io::Error`); shared failures are
/// re-created from their message.
fn clone_error(e: &Error) -> Error {
    match e {
        Error::CflExceeded { cfl, t } => Error::CflExceeded { cfl: *cfl, t: *t },
        Error::NonFinite { t } => Error::NonFinite { t: *t },
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), io.to_string())),
        other => Error::Config(other.to_string()),
    }
}

/// Time-averaged energy spectrum of the reference over `duration`, sampled every
/// `output.sample_stride` steps, with its eddy-turnover time and the final field.
pub fn measure_spectrum(
    config: &RunConfig,
    setup: &Setup,
    u0: &StreamField,
    duration: f64,
) -> Result<(EnergySpectrum, f64, StreamField)> {
    let mut acc = SpectrumAccumulator::new();
    acc.add_stream(0.0, u0)?;
    let stride = config.sample_stride;
    let mut failure = None;
    let spun = spin_up_from(
        u0.clone(),
        &setup.forcing.ghat,
        config.nu,
        config.dt,
        duration,
        |step, psi| {
            if step % stride == 0 && failure.is_none() {
                if let Err(e) = acc.add_stream(step as f64 * config.dt, psi) {
                    failure = Some(e);
                }
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let spectrum = acc.finalize()?;
    let tau = eddy_turnover(&spectrum, setup.grid.kmax() as usize)?;
    Ok((spectrum, tau, spun.psi))
}

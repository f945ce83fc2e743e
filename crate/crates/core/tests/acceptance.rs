//! Acceptance criteria 1–10. One PASS/FAIL line per criterion.
//!
//! Criteria 6–8 spin up and sweep the desk configuration in `manifests/desk.cfg`;
//! on one core that takes a few hours.

mod common;

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use nudge2d::diagnostics::{
    approximation_samples, crossing_stats, error_v, fit_gamma, measure_gamma, ErrorSeries,
};
use nudge2d::dynamics::{jacobian_beta, Stepper, StepperState};
use nudge2d::harness::checkpoint::read_checkpoint;
use nudge2d::harness::config::RunConfig;
use nudge2d::harness::output::{format_series, format_sweep, parse_series};
use nudge2d::harness::run::{
    measure_spectrum, resume_pair, run_pair, run_points, spin_up, sweep, sweep_points, Setup,
    SweepRow,
};
use nudge2d::observables::{Interpolant, NodeSamples, ObservationSpec};
use nudge2d::spectral::{laplacian, leray_project, v_alpha_norm_sq, StreamField, VectorFieldHat};

use common::{field, grid, manifest, rel, small_config, vector};

/// Converging μ values at K=16 on the desk configuration, fixed after the first run.
const PINNED_SMOOTHED: [f64; 6] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
const PINNED_PLAIN: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
/// μ with the earliest convergence among the smoothed rows.
const PINNED_BEST_MU: f64 = 4.0;

/// Straight to stderr, past the test harness's output capture.
macro_rules! say {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stderr().lock(), $($arg)*);
    };
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

struct Report {
    lines: Vec<String>,
    failed: Vec<usize>,
}

impl Report {
    /// Records one criterion. A run over `budget` seconds is reported as FAIL but
    /// does not fail the test.
    fn record(&mut self, id: usize, seconds: f64, budget: f64, result: Outcome) {
        let in_time = seconds <= budget;
        let verdict = if result.ok && in_time { "PASS" } else { "FAIL" };
        let timing = if in_time {
            format!("{seconds:.1}s")
        } else {
            format!("{seconds:.1}s, over the {budget:.0}s budget")
        };
        let line = format!("criterion {id}: {verdict} ({timing}) {}", result.detail);
        say!("{line}");
        self.lines.push(line);
        if !result.ok {
            self.failed.push(id);
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let clock = Instant::now();
    let out = f();
    (clock.elapsed().as_secs_f64(), out)
}

fn linear_decay() -> Outcome {
    let g = grid(64);
    let (nu, dt, steps) = (1e-3, 1e-2, 10_000u64);
    let c0 = Complex64::new(0.3, -0.7);
    let psi = StreamField::from_modes(&g, &[((3, 0), c0)]).unwrap();
    let mut state = StepperState::new(psi, StreamField::zeros(&g), nu, dt).unwrap();
    let stepper = Stepper::new(&state).unwrap();
    for _ in 0..steps {
        stepper.step_reference(&mut state);
    }
    let expected = c0 * (-nu * 9.0 * dt * steps as f64).exp();
    let err = (state.psi.coeff(3, 0) - expected).norm() / expected.norm();
    let others = state
        .psi
        .coeffs()
        .iter()
        .enumerate()
        .filter(|&(i, _)| g.wavenumber(i) != (3, 0) && g.wavenumber(i) != (-3, 0))
        .map(|(_, c)| c.norm())
        .fold(0.0, f64::max);
    outcome(
        err <= 1e-12 && others <= 1e-12,
        format!("relative error {err:.2e}, leakage {others:.2e}"),
    )
}

fn jacobian_oracle() -> Outcome {
    let g = grid(64);
    let half = Complex64::new(0.5, 0.0);
    let psi = StreamField::from_modes(
        &g,
        &[
            ((1, 0), half),
            ((-1, 0), half),
            ((0, 2), half),
            ((0, -2), half),
        ],
    )
    .unwrap();
    // −6 sin x sin 2y = −3/2 cos(x − 2y) + 3/2 cos(x + 2y)
    let q = Complex64::new(1.5, 0.0);
    let expected = StreamField::from_modes(
        &g,
        &[((1, -2), -q), ((-1, 2), -q), ((1, 2), q), ((-1, -2), q)],
    )
    .unwrap();
    let oracle_err = jacobian_beta(&psi).sub(&expected).unwrap().max_abs();

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut shell_err: f64 = 0.0;
    for c in [1, 2, 5, 25, 50, 65, 85, 425] {
        let mut modes = Vec::new();
        for k1 in -21i64..=21 {
            for k2 in -21i64..=21 {
                let upper = k2 > 0 || (k2 == 0 && k1 > 0);
                if k1 * k1 + k2 * k2 == c && upper {
                    // unit-size vorticity coefficients, so β is O(1) on every shell
                    let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                        / c as f64;
                    modes.push(((k1, k2), z));
                    modes.push(((-k1, -k2), z.conj()));
                }
            }
        }
        let psi = StreamField::from_modes(&g, &modes).unwrap();
        shell_err = shell_err.max(jacobian_beta(&psi).max_abs());
    }
    outcome(
        oracle_err <= 1e-12 && shell_err <= 1e-13,
        format!("oracle max error {oracle_err:.2e}, single-shell max |β| {shell_err:.2e}"),
    )
}

fn conservation() -> Outcome {
    let g = grid(128);
    let (mut energy, mut enstrophy): (f64, f64) = (0.0, 0.0);
    for seed in 0..100 {
        let psi = field(&g, 1000 + seed);
        let beta = jacobian_beta(&psi);
        let lap = laplacian(&psi);
        let nb = beta.norm_sq().sqrt();
        energy = energy.max(beta.inner(&psi).unwrap().norm() / (nb * psi.norm_sq().sqrt()));
        enstrophy = enstrophy.max(beta.inner(&lap).unwrap().norm() / (nb * lap.norm_sq().sqrt()));
    }
    outcome(
        energy <= 1e-12 && enstrophy <= 1e-12,
        format!("max relative <β,ψ> {energy:.2e}, <β,Δψ> {enstrophy:.2e}"),
    )
}

fn leray_parseval() -> Outcome {
    let g = grid(64);
    let n = g.n();
    let (mut idem, mut div, mut parseval): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for seed in 0..100 {
        let u = vector(&g, seed);
        let p = leray_project(&u);
        let pp = leray_project(&p);
        idem = idem.max(pp.sub(&p).unwrap().max_abs() / u.max_abs());
        div = div.max(p.max_divergence() / u.max_abs());
        let (a, b) = u.to_physical();
        let cell = (g.length() / n as f64).powi(2);
        let quadrature: f64 = a.iter().zip(&b).map(|(x, y)| x * x + y * y).sum::<f64>() * cell;
        parseval = parseval.max(rel(v_alpha_norm_sq(&u, 0.0), quadrature));
    }
    outcome(
        idem <= 1e-15 && div <= 1e-14 && parseval <= 1e-12,
        format!("idempotence {idem:.2e}, divergence {div:.2e}, Parseval {parseval:.2e} (relative)"),
    )
}

fn interpolant_suite() -> Outcome {
    let g = grid(128);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mean_free = true;
    let mut limit: f64 = 0.0;
    for k in [4, 8, 16] {
        let nodal = Interpolant::nodal(&g, k).unwrap();
        let smoothed = Interpolant::smoothed(&g, k, 0.7).unwrap();
        let nearly = Interpolant::smoothed(&g, k, 1e-3).unwrap();
        for _ in 0..10 {
            let values = (0..k * k)
                .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let s = NodeSamples::new(k, values).unwrap();
            let plain = nodal.apply(&s).unwrap();
            for out in [&plain, &smoothed.apply(&s).unwrap()] {
                mean_free &= out.u1()[0] == Complex64::new(0.0, 0.0)
                    && out.u2()[0] == Complex64::new(0.0, 0.0);
            }
            let d = nearly.apply(&s).unwrap().sub(&plain).unwrap();
            limit = limit.max(v_alpha_norm_sq(&d, 0.0).sqrt());
        }
    }

    let velocities = |seeds: std::ops::Range<u64>| -> Vec<VectorFieldHat> {
        seeds
            .map(|s| {
                nudge2d::spectral::velocity_from_stream(&nudge2d::spectral::random_stream(
                    &g, s, 12.0, 3.0,
                ))
            })
            .collect()
    };
    let ks = [4, 8, 16];
    let batch_a = velocities(0..50);
    let samples = approximation_samples(&g, &batch_a, &ks).unwrap();
    // finer nodes approximate every field better
    let per_k = batch_a.len();
    let decreasing = (0..per_k).all(|f| {
        (1..ks.len()).all(|j| samples[j * per_k + f].lhs < samples[(j - 1) * per_k + f].lhs)
    });
    let a = fit_gamma(&samples, &ks).unwrap();
    let b = measure_gamma(&g, &velocities(50..100), &ks).unwrap();
    let worst = a.ratio_by_k.iter().map(|r| r.1).fold(0.0, f64::max);
    let stable = |x: f64, y: f64| (x == 0.0 && y == 0.0) || (x - y).abs() <= 0.5 * x.max(y);
    let gammas_stable = stable(a.gamma1, b.gamma1) && stable(a.gamma2, b.gamma2);
    outcome(
        mean_free && limit <= 1e-2 && worst <= 1.0 && decreasing && gammas_stable,
        format!(
            "mean-free {mean_free}, |Ĩ−I| at η=1e-3 {limit:.2e}, max ratio by K {:?} (bound 1), \
             error decreasing in K {decreasing}, γ batch A ({:.3e}, {:.3e}) batch B ({:.3e}, {:.3e})",
            a.ratio_by_k
                .iter()
                .map(|(k, r)| format!("{k}:{r:.3}"))
                .collect::<Vec<_>>(),
            a.gamma1,
            a.gamma2,
            b.gamma1,
            b.gamma2
        ),
    )
}

/// `(times, values, ε, T, T0, T_min, T_max, ε_avg)`, crossings worked out by hand on
/// the piecewise-linear interpolant.
type Case = (Vec<f64>, Vec<f64>, f64, f64, f64, f64, f64, f64);

fn crossing_cases() -> Vec<Case> {
    let inf = f64::INFINITY;
    let r = |n: usize| (0..n).map(|i| i as f64).collect::<Vec<_>>();
    vec![
        (r(3), vec![5.0, 4.0, 3.0], 1.0, 2.0, 0.0, inf, inf, 4.0),
        (r(3), vec![0.5, 0.2, 0.1], 1.0, 2.0, 0.0, 0.0, 0.0, 0.25),
        (
            r(11),
            vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.4, 0.3, 0.2, 0.1],
            1.0,
            10.0,
            6.0,
            5.0,
            5.0,
            0.3,
        ),
        (
            r(11),
            vec![3.0, 2.0, 1.5, 1.0, 0.5, 0.5, 1.0, 2.0, 1.0, 0.5, 0.5],
            1.0,
            10.0,
            0.0,
            3.0,
            8.0,
            1.175,
        ),
        (
            r(3),
            vec![2.0, 0.5, 2.0],
            1.0,
            2.0,
            0.0,
            2.0 / 3.0,
            inf,
            1.25,
        ),
        (vec![0.0, 3.0], vec![3.0, 0.0], 1.0, 3.0, 0.0, 2.0, 2.0, 1.5),
        (vec![0.0, 4.0], vec![4.0, 0.0], 1.0, 2.0, 1.0, inf, inf, 2.5),
        (
            vec![0.0, 1.0],
            vec![2.0, 0.5],
            1.0,
            3.0,
            2.0,
            2.0 / 3.0,
            2.0 / 3.0,
            0.5,
        ),
        (vec![0.0], vec![2.0], 1.0, 1.0, 0.0, inf, inf, 2.0),
        (vec![0.0], vec![0.5], 1.0, 1.0, 0.0, 0.0, 0.0, 0.5),
        (r(3), vec![1.0, 1.0, 1.0], 1.0, 2.0, 0.0, 0.0, inf, 1.0),
        (
            vec![0.0, 1.0],
            vec![1.0, 0.5],
            1.0,
            1.0,
            0.0,
            0.0,
            0.0,
            0.75,
        ),
        (
            r(4),
            vec![2.0, 1.0, 2.0, 0.0],
            1.0,
            3.0,
            0.0,
            1.0,
            2.5,
            4.0 / 3.0,
        ),
        (
            vec![0.0, 0.5, 2.0, 6.0],
            vec![5.0, 3.0, 0.5, 0.1],
            1.0,
            6.0,
            2.0,
            1.7,
            1.7,
            0.3,
        ),
        (
            vec![0.0, 4.0],
            vec![0.0, 4.0],
            10.0,
            4.0,
            1.0,
            0.0,
            0.0,
            2.5,
        ),
        (
            r(7),
            vec![2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 0.0],
            1.0,
            6.0,
            0.0,
            0.5,
            4.5,
            5.0 / 6.0,
        ),
        (r(3), vec![0.5, 0.5, 3.0], 1.0, 2.0, 0.0, 0.0, inf, 1.125),
        (
            r(4),
            vec![0.5, 2.0, 0.5, 0.5],
            1.0,
            3.0,
            1.0,
            0.0,
            5.0 / 3.0,
            0.875,
        ),
        (
            vec![0.0, 10.0, 20.0],
            vec![1.0, 1e-12, 1e-14],
            1e-10,
            20.0,
            10.0,
            10.0 * (1.0 - 1e-10) / (1.0 - 1e-12),
            10.0 * (1.0 - 1e-10) / (1.0 - 1e-12),
            5.05e-13,
        ),
        (
            vec![0.0, 2.0],
            vec![3.0, 0.0],
            1.0,
            1.5,
            0.0,
            4.0 / 3.0,
            4.0 / 3.0,
            1.875,
        ),
    ]
}

fn crossing_exactness() -> Outcome {
    let close = |a: f64, b: f64| a == b || (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let mut bad = Vec::new();
    let cases = crossing_cases();
    for (i, (t, v, eps, t_end, t0, t_min, t_max, avg)) in cases.iter().enumerate() {
        let series = ErrorSeries::from_parts(t.clone(), v.clone()).unwrap();
        let s = crossing_stats(&series, *eps, *t_end, *t0).unwrap();
        if !(close(s.t_min, *t_min)
            && close(s.t_max, *t_max)
            && close(s.eps_avg, *avg)
            && s.t_min <= s.t_max)
        {
            bad.push(format!(
                "case {i}: got ({}, {}, {})",
                s.t_min, s.t_max, s.eps_avg
            ));
        }
    }
    outcome(
        bad.is_empty(),
        format!("{} series, mismatches {:?}", cases.len(), bad),
    )
}

fn resume_and_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config();
    config.output_dir = dir.path().to_path_buf();
    let setup = Setup::new(&config).unwrap();
    let u0 = spin_up(&config, &setup).unwrap().psi;
    let spec = ObservationSpec::smoothed(8, 0.7);

    let mut whole = config.clone();
    whole.t_end = 20.0;
    let straight = run_pair(&whole, &setup, &u0, 1.0, &spec).unwrap();

    let mut first = config.clone();
    first.checkpoint_interval = 1000;
    let head = run_pair(&first, &setup, &u0, 1.0, &spec).unwrap();
    let ckpt = read_checkpoint(&dir.path().join("pair.ckpt")).unwrap();
    let prior = parse_series(&format_series(&head.series)).unwrap();
    let resumed = resume_pair(&whole, &setup, &ckpt, 1.0, &spec, prior).unwrap();
    let bits = |f: &StreamField| {
        f.coeffs()
            .iter()
            .flat_map(|c| [c.re.to_bits(), c.im.to_bits()])
            .collect::<Vec<_>>()
    };
    let identical = ckpt.step == 1000
        && bits(&straight.psi) == bits(&resumed.psi)
        && bits(&straight.phi) == bits(&resumed.phi)
        && straight.series == resumed.series;

    let mut serial = config.clone();
    serial.workers = 1;
    let mut parallel = config.clone();
    parallel.workers = 8;
    let a = format_sweep(&sweep(&serial, &setup, &u0).unwrap(), true);
    let b = format_sweep(&sweep(&parallel, &setup, &u0).unwrap(), true);
    outcome(
        identical && a == b,
        format!(
            "resume over 1000 steps bit-identical {identical}; sweep csv 1 vs 8 workers identical {} ({} rows)",
            a == b,
            a.lines().count() - 1
        ),
    )
}

fn converges(row: &SweepRow, eps: f64) -> bool {
    matches!(&row.outcome, Ok(s) if s.t_max.is_finite() && s.eps_avg <= eps)
}

fn describe(row: &SweepRow) -> String {
    match &row.outcome {
        Ok(s) => format!(
            "μ={} K={} η={}: T_max={:.1} ε_avg={:.2e}",
            row.mu, row.k, row.eta, s.t_max, s.eps_avg
        ),
        Err(e) => format!("μ={} K={} η={}: {e}", row.mu, row.k, row.eta),
    }
}

#[test]
fn acceptance() {
    let mut report = Report {
        lines: Vec::new(),
        failed: Vec::new(),
    };

    let (s, r) = timed(linear_decay);
    report.record(1, s, 1.0, r);
    let (s, r) = timed(jacobian_oracle);
    report.record(2, s, 1.0, r);
    let (s, r) = timed(conservation);
    report.record(3, s, 30.0, r);
    let (s, r) = timed(leray_parseval);
    report.record(4, s, 10.0, r);
    let (s, r) = timed(interpolant_suite);
    report.record(5, s, 60.0, r);
    let (s, r) = timed(crossing_exactness);
    report.record(9, s, 1.0, r);
    let (s, r) = timed(resume_and_determinism);
    report.record(10, s, 120.0, r);

    // desk configuration shared by 6, 7 and 8
    let clock = Instant::now();
    let mut config = RunConfig::load(&manifest("desk.cfg")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    config.output_dir = dir.path().to_path_buf();
    let setup = Setup::new(&config).unwrap();
    let spun = spin_up(&config, &setup).unwrap();
    let u0 = spun.psi;
    let (_, tau, _) = measure_spectrum(&config, &setup, &u0, 100.0).unwrap();
    let shared_seconds = clock.elapsed().as_secs_f64();
    say!(
        "desk reference: spin-up {} time units = {:.1} τ (τ = {tau:.2}), max CFL {:.4}, {shared_seconds:.0}s",
        config.spinup_duration,
        config.spinup_duration / tau,
        spun.cfl_max
    );

    let (s, r) = timed(|| {
        let spec = config.observation(16, 0.7);
        let state = StepperState::new(u0.clone(), setup.forcing.ghat.clone(), config.nu, config.dt)
            .unwrap()
            .with_assimilation(u0.clone(), 1.0, spec)
            .unwrap();
        let mut state = state;
        let stepper = Stepper::new(&state).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            stepper.step_assimilated(&mut state).unwrap();
            worst = worst.max(error_v(&state.psi, state.phi.as_ref().unwrap()).unwrap());
        }
        outcome(
            worst <= 1e-10,
            format!("sup error_V over 10⁴ coupled steps {worst:.2e}"),
        )
    });
    report.record(6, s, 300.0, r);

    let clock = Instant::now();
    let mut points = sweep_points(&config);
    points.push((PINNED_BEST_MU, 2, 0.7));
    let mut rows = run_points(&config, &setup, &u0, &points).unwrap();
    let coarse = rows.pop().unwrap();
    let eps = config.eps;
    let at = |eta: f64| rows.iter().filter(move |r| r.k == 16 && r.eta == eta);
    let smoothed_ok: Vec<f64> = at(0.7)
        .filter(|r| converges(r, eps))
        .map(|r| r.mu)
        .collect();
    let plain_ok: Vec<f64> = at(0.0)
        .filter(|r| converges(r, eps))
        .map(|r| r.mu)
        .collect();
    let best = at(0.7)
        .filter(|r| r.mu > 0.0 && converges(r, eps))
        .min_by(|a, b| {
            let t = |r: &SweepRow| r.outcome.as_ref().map(|s| s.t_max).unwrap();
            t(a).partial_cmp(&t(b)).unwrap()
        })
        .map(|r| r.mu);
    let coarse = match best {
        Some(mu) if mu != PINNED_BEST_MU => run_points(&config, &setup, &u0, &[(mu, 2, 0.7)])
            .unwrap()
            .remove(0),
        _ => coarse,
    };
    for row in rows.iter().chain([&coarse]) {
        say!("  {}", describe(row));
    }
    let seconds = clock.elapsed().as_secs_f64() + shared_seconds;

    let control = at(0.7).find(|r| r.mu == 0.0).unwrap();
    let control_ok = matches!(&control.outcome, Ok(s) if s.t_max.is_infinite() && s.eps_avg > 1e-2);
    let coarse_fails =
        matches!(&coarse.outcome, Ok(s) if s.t_max.is_infinite()) || coarse.outcome.is_err();
    let spun_long_enough = config.spinup_duration >= 40.0 * tau;
    let pinned =
        smoothed_ok == PINNED_SMOOTHED && plain_ok == PINNED_PLAIN && best == Some(PINNED_BEST_MU);
    report.record(
        7,
        seconds,
        3600.0,
        outcome(
            control_ok && !smoothed_ok.is_empty() && coarse_fails && spun_long_enough && pinned,
            format!(
                "μ=0 control diverges {control_ok}; converging μ at η=0.7 {smoothed_ok:?}; best μ {best:?}; \
                 K=2 at best μ fails {coarse_fails}; spin-up ≥ 40τ {spun_long_enough}; matches pinned set {pinned}"
            ),
        ),
    );
    report.record(
        8,
        seconds,
        f64::INFINITY,
        outcome(
            smoothed_ok.len() >= plain_ok.len(),
            format!(
                "converging μ count at K=16: η=0.7 {} ≥ η=0 {} ({plain_ok:?})",
                smoothed_ok.len(),
                plain_ok.len()
            ),
        ),
    );

    say!("\nsummary:");
    for line in &report.lines {
        say!("  {line}");
    }
    assert!(
        report.failed.is_empty(),
        "criteria failed: {:?}",
        report.failed
    );
}

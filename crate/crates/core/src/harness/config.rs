//! Experiment manifests: `key = value` lines grouped in `[section]`s.
//!
//! ```text
//! [grid]          n, L
//! [physics]       nu, dt
//! [forcing]       band_lo, band_hi, grashof, seed
//! [spinup]        duration
//! [assimilation]  T, eps, T0, kind, K, eta, mu, modal_radius, initial
//! [output]        dir, checkpoint_interval, sample_stride, workers
//! ```
//!
//! Numbers accept `a/b` and a trailing `pi` (`2pi`, `pi/2`). `K`, `eta` and `mu` are
//! comma-separated lists. Unknown sections or keys are errors.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use ini::Ini;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::observables::{ObservationKind, ObservationSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub length: f64,
    pub nu: f64,
    pub dt: f64,
    pub band_lo: i64,
    pub band_hi: i64,
    pub grashof: f64,
    pub seed: u64,
    pub spinup_duration: f64,
    /// Length of the assimilation window.
    pub t_end: f64,
    pub eps: f64,
    /// Start of the averaging window; `2T/3` when unset.
    pub t0: Option<f64>,
    /// `Nodal` (η = 0 plain, η > 0 smoothed) or `Modal`.
    pub kind: ObservationKind,
    pub k_list: Vec<usize>,
    pub eta_list: Vec<f64>,
    pub mu_list: Vec<f64>,
    pub modal_radius: f64,
    /// Checkpoint holding `u₀`; spun up from rest when absent.
    pub initial: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Steps between checkpoints, 0 for none.
    pub checkpoint_interval: u64,
    pub sample_stride: u64,
    pub workers: usize,
}

const REQUIRED: [&str; 6] = [
    "grid.n",
    "physics.nu",
    "physics.dt",
    "forcing.band_lo",
    "forcing.band_hi",
    "forcing.grashof",
];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 0,
            length: 2.0 * PI,
            nu: 0.0,
            dt: 0.0,
            band_lo: 0,
            band_hi: 0,
            grashof: 0.0,
            seed: 0,
            spinup_duration: 0.0,
            t_end: 0.0,
            eps: 1e-10,
            t0: None,
            kind: ObservationKind::Nodal,
            k_list: Vec::new(),
            eta_list: vec![0.0],
            mu_list: Vec::new(),
            modal_radius: 0.0,
            initial: None,
            output_dir: PathBuf::from("."),
            checkpoint_interval: 0,
            sample_stride: 64,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut config = RunConfig::default();
        let mut seen = Vec::new();
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let section = section.ok_or_else(|| {
                    Error::Config(format!("key '{key}' appears before any [section]"))
                })?;
                let full = format!("{section}.{key}");
                if seen.contains(&full) {
                    return Err(Error::Config(format!("duplicate key '{full}'")));
                }
                config.set(&full, value)?;
                seen.push(full);
            }
        }
        for key in REQUIRED {
            if !seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("missing required key '{key}'")));
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Reads a manifest; a relative `initial` path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::parse(&text)?;
        if let (Some(init), Some(dir)) = (&config.initial, path.parent()) {
            if init.is_relative() {
                config.initial = Some(dir.join(init));
            }
        }
        Ok(config)
    }

    /// Sets one `section.key`. Does not re-validate.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "grid.n" => self.n = parse_int(key, value)?,
            "grid.L" => self.length = parse_num(key, value)?,
            "physics.nu" => self.nu = parse_num(key, value)?,
            "physics.dt" => self.dt = parse_num(key, value)?,
            "forcing.band_lo" => self.band_lo = parse_int(key, value)?,
            "forcing.band_hi" => self.band_hi = parse_int(key, value)?,
            "forcing.grashof" => self.grashof = parse_num(key, value)?,
            "forcing.seed" => self.seed = parse_int(key, value)?,
            "spinup.duration" => self.spinup_duration = parse_num(key, value)?,
            "assimilation.T" => self.t_end = parse_num(key, value)?,
            "assimilation.eps" => self.eps = parse_num(key, value)?,
            "assimilation.T0" => self.t0 = Some(parse_num(key, value)?),
            "assimilation.kind" => {
                self.kind = match value {
                    "nodal" => ObservationKind::Nodal,
                    "modal" => ObservationKind::Modal,
                    _ => {
                        return Err(Error::Config(format!(
                            "{key}: expected 'nodal' or 'modal', got '{value}'"
                        )))
                    }
                }
            }
            "assimilation.K" => self.k_list = parse_list(key, value, parse_int)?,
            "assimilation.eta" => self.eta_list = parse_list(key, value, parse_num)?,
            "assimilation.mu" => self.mu_list = parse_list(key, value, parse_num)?,
            "assimilation.modal_radius" => self.modal_radius = parse_num(key, value)?,
            "assimilation.initial" => {
                self.initial = (!value.is_empty()).then(|| PathBuf::from(value))
            }
            "output.dir" => self.output_dir = PathBuf::from(value),
            "output.checkpoint_interval" => self.checkpoint_interval = parse_int(key, value)?,
            "output.sample_stride" => self.sample_stride = parse_int(key, value)?,
            "output.workers" => self.workers = parse_int(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grid.L", self.length),
            ("physics.nu", self.nu),
            ("physics.dt", self.dt),
            ("forcing.grashof", self.grashof),
            ("assimilation.eps", self.eps),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid.n must be a power of two >= 8, got {}",
                self.n
            )));
        }
        if !(self.spinup_duration >= 0.0) || !(self.t_end >= 0.0) {
            return Err(Error::Config("durations must be >= 0".into()));
        }
        if let Some(t0) = self.t0 {
            if !(t0 >= 0.0 && t0 < self.t_end) {
                return Err(Error::Config(format!(
                    "assimilation.T0 = {t0} must lie in [0, T)"
                )));
            }
        }
        if self.band_lo <= 0 || self.band_lo > self.band_hi {
            return Err(Error::Config(
                "forcing band must satisfy 0 < band_lo <= band_hi".into(),
            ));
        }
        if self.sample_stride == 0 || self.workers == 0 {
            return Err(Error::Config(
                "sample_stride and workers must be >= 1".into(),
            ));
        }
        if self.k_list.contains(&0) {
            return Err(Error::Config("assimilation.K entries must be >= 1".into()));
        }
        if self.eta_list.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
            return Err(Error::Config(
                "assimilation.eta entries must be >= 0".into(),
            ));
        }
        if self.mu_list.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::Config("assimilation.mu entries must be >= 0".into()));
        }
        Ok(())
    }

    pub fn t0(&self) -> f64 {
        self.t0.unwrap_or(2.0 * self.t_end / 3.0)
    }

    /// Number of steps in the assimilation window.
    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn forcing_spec(&self) -> ForcingSpec {
        ForcingSpec {
            band_lo: self.band_lo,
            band_hi: self.band_hi,
            grashof: self.grashof,
            seed: self.seed,
            nu: self.nu,
            length: self.length,
        }
    }

    /// Observation spec for one `(K, η)` point, or the modal spec.
    pub fn observation(&self, k: usize, eta: f64) -> ObservationSpec {
        match self.kind {
            ObservationKind::Modal => ObservationSpec::modal(self.modal_radius),
            _ => ObservationSpec::from_eta(k, eta),
        }
    }

    /// SHA-256 over the fields that determine the reference trajectory: grid,
    /// viscosity, time step and forcing.
    pub fn physics_hash(&self) -> [u8; 32] {
        let text = format!(
            "n={}\nL={:?}\nnu={:?}\ndt={:?}\nband_lo={}\nband_hi={}\ngrashof={:?}\nseed={}\n",
            self.n,
            self.length,
            self.nu,
            self.dt,
            self.band_lo,
            self.band_hi,
            self.grashof,
            self.seed
        );
        Sha256::digest(text.as_bytes()).into()
    }
}

impl fmt::Display for RunConfig {
    /// Canonical manifest text; parses back to an equal config.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(f, "[grid]\nn = {}\nL = {:?}\n", self.n, self.length)?;
        writeln!(f, "[physics]\nnu = {:?}\ndt = {:?}\n", self.nu, self.dt)?;
        writeln!(
            f,
            "[forcing]\nband_lo = {}\nband_hi = {}\ngrashof = {:?}\nseed = {}\n",
            self.band_lo, self.band_hi, self.grashof, self.seed
        )?;
        writeln!(f, "[spinup]\nduration = {:?}\n", self.spinup_duration)?;
        writeln!(
            f,
            "[assimilation]\nT = {:?}\neps = {:?}",
            self.t_end, self.eps
        )?;
        if let Some(t0) = self.t0 {
            writeln!(f, "T0 = {t0:?}")?;
        }
        let kind = if self.kind == ObservationKind::Modal {
            "modal"
        } else {
            "nodal"
        };
        writeln!(f, "kind = {kind}")?;
        let ks: Vec<String> = self.k_list.iter().map(|k| k.to_string()).collect();
        writeln!(f, "K = {}", ks.join(", "))?;
        writeln!(f, "eta = {}", list(&self.eta_list))?;
        writeln!(f, "mu = {}", list(&self.mu_list))?;
        writeln!(f, "modal_radius = {:?}", self.modal_radius)?;
        if let Some(init) = &self.initial {
            writeln!(f, "initial = {}", init.display())?;
        }
        writeln!(
            f,
            "\n[output]\ndir = {}\ncheckpoint_interval = {}\nsample_stride = {}\nworkers = {}",
            self.output_dir.display(),
            self.checkpoint_interval,
            self.sample_stride,
            self.workers
        )
    }
}

fn parse_num(key: &str, value: &str) -> Result<f64> {
    let bad = || Error::Config(format!("{key}: cannot parse '{value}' as a number"));
    let atom = |s: &str| -> Option<f64> {
        let s = s.trim();
        if let Some(head) = s.strip_suffix("pi") {
            let head = head.trim().trim_end_matches('*').trim();
            let c = if head.is_empty() {
                1.0
            } else {
                head.parse::<f64>().ok()?
            };
            return Some(c * PI);
        }
        s.parse::<f64>().ok()
    };
    match value.split_once('/') {
        Some((a, b)) => Ok(atom(a).ok_or_else(bad)? / atom(b).ok_or_else(bad)?),
        None => atom(value).ok_or_else(bad),
    }
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}' as an integer")))
}

fn parse_list<T>(key: &str, value: &str, item: fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|s| item(key, s.trim())).collect()
}

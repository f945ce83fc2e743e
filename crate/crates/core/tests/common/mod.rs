#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use nudge2d::harness::config::RunConfig;
use nudge2d::spectral::{random_stream, SpectralGrid, StreamField, VectorFieldHat};

pub fn grid(n: usize) -> Arc<SpectralGrid> {
    SpectralGrid::new(n, 2.0 * PI).unwrap()
}

/// Smooth random stream function using the whole retained set.
pub fn field(g: &Arc<SpectralGrid>, seed: u64) -> StreamField {
    random_stream(g, seed, g.kmax() as f64, 1.5)
}

/// Random vector field that is not divergence-free.
pub fn vector(g: &Arc<SpectralGrid>, seed: u64) -> VectorFieldHat {
    let a = field(g, 2 * seed).to_physical();
    let b = field(g, 2 * seed + 1).to_physical();
    VectorFieldHat::from_physical(g, &a, &b).unwrap()
}

pub fn manifest(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../manifests")
        .join(name)
}

/// Small turbulent configuration for harness tests: seconds, not minutes.
pub fn small_config() -> RunConfig {
    RunConfig::parse(
        "[grid]\nn = 32\n\
         [physics]\nnu = 1e-2\ndt = 1e-2\n\
         [forcing]\nband_lo = 4\nband_hi = 5\ngrashof = 2e3\nseed = 7\n\
         [spinup]\nduration = 20\n\
         [assimilation]\nT = 10\neps = 1e-6\nK = 4, 8\neta = 0, 0.7\nmu = 0, 1, 4\n\
         [output]\nsample_stride = 8\n",
    )
    .unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

//! Binary checkpoints of the reference and assimilated fields.
//!
//! Layout, all little-endian: magic `NUDGE2D\0`, `u32` version, `u64` n, `f64` L,
//! `f64` ν, `f64` t0, `u64` step, `f64` dt, `u64` seed, `i64` band_lo, `i64` band_hi,
//! `f64` G, 32-byte config hash, `u8` has-Φ flag, then the `n²` coefficients of Ψ
//! (and Φ) as `(re, im)` pairs of `f64` in storage order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::spectral::{SpectralGrid, StreamField};

pub const MAGIC: [u8; 8] = *b"NUDGE2D\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub n: usize,
    pub length: f64,
    pub nu: f64,
    /// Time is `t0 + step * dt`.
    pub t0: f64,
    pub step: u64,
    pub dt: f64,
    pub seed: u64,
    pub band_lo: i64,
    pub band_hi: i64,
    pub grashof: f64,
    pub config_hash: [u8; 32],
    pub psi: Vec<Complex64>,
    pub phi: Option<Vec<Complex64>>,
}

impl Checkpoint {
    pub fn new(
        config: &RunConfig,
        t0: f64,
        step: u64,
        psi: &StreamField,
        phi: Option<&StreamField>,
    ) -> Self {
        Checkpoint {
            n: config.n,
            length: config.length,
            nu: config.nu,
            t0,
            step,
            dt: config.dt,
            seed: config.seed,
            band_lo: config.band_lo,
            band_hi: config.band_hi,
            grashof: config.grashof,
            config_hash: config.physics_hash(),
            psi: psi.coeffs().to_vec(),
            phi: phi.map(|p| p.coeffs().to_vec()),
        }
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.step as f64 * self.dt
    }

    /// Compares the stored hash with `config`. A mismatch is an error unless
    /// `allow_mismatch`, in which case it is only logged.
    pub fn check_config(&self, config: &RunConfig, allow_mismatch: bool) -> Result<()> {
        let expected = config.physics_hash();
        if expected == self.config_hash {
            return Ok(());
        }
        if allow_mismatch {
            log::warn!(
                "checkpoint config hash {} differs from {}; continuing as requested",
                hex(&self.config_hash),
                hex(&expected)
            );
            return Ok(());
        }
        Err(Error::ConfigHashMismatch {
            expected: hex(&expected),
            found: hex(&self.config_hash),
        })
    }

    pub fn psi_field(&self, grid: &Arc<SpectralGrid>) -> Result<StreamField> {
        StreamField::from_coeffs(grid, self.psi.clone())
    }

    pub fn phi_field(&self, grid: &Arc<SpectralGrid>) -> Result<Option<StreamField>> {
        self.phi
            .as_ref()
            .map(|p| StreamField::from_coeffs(grid, p.clone()))
            .transpose()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let fields = 1 + self.phi.is_some() as usize;
        let mut out = Vec::with_capacity(128 + fields * self.psi.len() * 16);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for v in [self.length, self.nu, self.t0] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.band_lo.to_le_bytes());
        out.extend_from_slice(&self.band_hi.to_le_bytes());
        out.extend_from_slice(&self.grashof.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        out.push(self.phi.is_some() as u8);
        for field in std::iter::once(&self.psi).chain(&self.phi) {
            for c in field {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic: not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let n = r.u64()? as usize;
        if n == 0 || n > 1 << 16 {
            return Err(Error::Checkpoint(format!("implausible grid size {n}")));
        }
        let length = r.f64()?;
        let nu = r.f64()?;
        let t0 = r.f64()?;
        let step = r.u64()?;
        let dt = r.f64()?;
        let seed = r.u64()?;
        let band_lo = r.u64()? as i64;
        let band_hi = r.u64()? as i64;
        let grashof = r.f64()?;
        let config_hash = r.array()?;
        let has_phi = match r.take(1)?[0] {
            0 => false,
            1 => true,
            b => return Err(Error::Checkpoint(format!("bad field flag {b}"))),
        };
        let psi = r.field(n * n)?;
        let phi = if has_phi { Some(r.field(n * n)?) } else { None };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after the last field",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            n,
            length,
            nu,
            t0,
            step,
            dt,
            seed,
            band_lo,
            band_hi,
            grashof,
            config_hash,
            psi,
            phi,
        })
    }
}

/// Writes through a temporary file and renames, so a crash never leaves a torn
/// checkpoint behind.
pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&ckpt.to_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    Checkpoint::from_bytes(&bytes)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file: needed {end} bytes, have {}",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn field(&mut self, len: usize) -> Result<Vec<Complex64>> {
        let raw = self.take(len * 16)?;
        Ok(raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect())
    }
}

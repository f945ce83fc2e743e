//! CSV tables for series and sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::run::{SeriesSample, SweepRow};

pub const SERIES_HEADER: &str = "t,err_V,energy_u,energy_v,cfl";
pub const SWEEP_HEADER: &str = "mu,K,eta,T_min,T_max,eps_avg,wall_s,cfl_max";

/// `{:e}` round-trips an `f64` exactly; infinities print as `inf`.
fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:e}")
    }
}

fn parse_num(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse()
            .map_err(|_| Error::Config(format!("bad number {t:?} in csv"))),
    }
}

pub fn format_series(series: &[SeriesSample]) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for s in series {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(s.t),
            num(s.err_v),
            num(s.energy_u),
            num(s.energy_v),
            num(s.cfl)
        );
    }
    out
}

pub fn parse_series(text: &str) -> Result<Vec<SeriesSample>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SERIES_HEADER) {
        return Err(Error::Config("series csv has an unexpected header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(parse_num).collect::<Result<_>>()?;
            if f.len() != 5 {
                return Err(Error::Config(format!("series row {l:?} needs 5 columns")));
            }
            Ok(SeriesSample {
                t: f[0],
                err_v: f[1],
                energy_u: f[2],
                energy_v: f[3],
                cfl: f[4],
            })
        })
        .collect()
}

/// Sweep table. With `mask_wall`, timings are replaced by `-` so two runs of the
/// same manifest produce identical text.
pub fn format_sweep(rows: &[SweepRow], mask_wall: bool) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{},", num(r.mu), r.k, num(r.eta));
        match &r.outcome {
            Ok(s) => {
                let wall = if mask_wall {
                    "-".to_string()
                } else {
                    format!("{:.3}", s.wall_s)
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    num(s.t_min),
                    num(s.t_max),
                    num(s.eps_avg),
                    wall,
                    num(s.cfl_max)
                );
            }
            Err(msg) => {
                let kind = msg.split(':').next().unwrap_or("error");
                let _ = writeln!(out, "error:{kind},error:{kind},error:{kind},-,-");
            }
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

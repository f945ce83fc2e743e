use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nudge2d::diagnostics::norm_v;
use nudge2d::harness::checkpoint::{hex, read_checkpoint, write_checkpoint, Checkpoint};
use nudge2d::harness::config::RunConfig;
use nudge2d::harness::output::{format_series, format_sweep, parse_series, write_text};
use nudge2d::harness::run::{
    initial_field, measure_spectrum, resume_pair, run_pair, spin_up, sweep, Setup,
};
use nudge2d::{Error, Result};

#[derive(Parser)]
#[command(
    name = "nudge2d",
    version,
    about = "2D Navier-Stokes nudging experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment manifest.
    config: PathBuf,
    /// Override a manifest entry, e.g. `--set assimilation.mu=1,2`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Accept an initial checkpoint written under different physics.
    #[arg(long)]
    allow_hash_mismatch: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Spin the reference flow up from rest and checkpoint it.
    Spinup {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<output.dir>/spinup.ckpt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One coupled reference/assimilated run.
    Run {
        #[command(flatten)]
        common: Common,
        /// Defaults to the first configured value.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        /// Continue from `<output.dir>/pair.ckpt` and the existing series file.
        #[arg(long)]
        resume: bool,
    },
    /// Every (mu, K, eta) point of the manifest, written to `<output.dir>/sweep.csv`.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Write `-` for wall times so repeated sweeps compare equal.
        #[arg(long)]
        mask_wall_time: bool,
    },
    /// Time-averaged energy spectrum and eddy-turnover time of the reference.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        duration: f64,
    },
    /// Print a checkpoint header.
    InspectCheckpoint { path: PathBuf },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    for o in &common.overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{o}' is not SECTION.KEY=VALUE")))?;
        config.set(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn first<T: Copy>(given: Option<T>, list: &[T], what: &str) -> Result<T> {
    given
        .or_else(|| list.first().copied())
        .ok_or_else(|| Error::Config(format!("no {what} given and none configured")))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spinup { common, out } => {
            let config = load(&common)?;
            let setup = Setup::new(&config)?;
            let spun = spin_up(&config, &setup)?;
            let path = out.unwrap_or_else(|| config.output_dir.join("spinup.ckpt"));
            write_checkpoint(
                &path,
                &Checkpoint::new(&config, 0.0, spun.steps, &spun.psi, None),
            )?;
            println!(
                "spinup steps={} cfl_max={:.4} norm_V={:.6} checkpoint={}",
                spun.steps,
                spun.cfl_max,
                norm_v(&spun.psi),
                path.display()
            );
        }
        Command::Run {
            common,
            mu,
            k,
            eta,
            resume,
        } => {
            let config = load(&common)?;
            let setup = Setup::new(&config)?;
            let mu = first(mu, &config.mu_list, "mu")?;
            let k = first(k, &config.k_list, "K").unwrap_or(1);
            let eta = first(eta, &config.eta_list, "eta")?;
            let spec = config.observation(k, eta);
            let series_path = config.output_dir.join("series.csv");
            let run = if resume {
                let ckpt = read_checkpoint(&config.output_dir.join("pair.ckpt"))?;
                ckpt.check_config(&config, common.allow_hash_mismatch)?;
                let prior = parse_series(&std::fs::read_to_string(&series_path)?)?;
                resume_pair(&config, &setup, &ckpt, mu, &spec, prior)?
            } else {
                let u0 = initial_field(&config, &setup, common.allow_hash_mismatch)?;
                run_pair(&config, &setup, &u0, mu, &spec)?
            };
            write_text(&series_path, &format_series(&run.series))?;
            print!("{}", format_sweep(&[run.row], false));
        }
        Command::Sweep {
            common,
            mask_wall_time,
        } => {
            let config = load(&common)?;
            let setup = Setup::new(&config)?;
            let u0 = initial_field(&config, &setup, common.allow_hash_mismatch)?;
            let rows = sweep(&config, &setup, &u0)?;
            let text = format_sweep(&rows, mask_wall_time);
            write_text(&config.output_dir.join("sweep.csv"), &text)?;
            print!("{text}");
        }
        Command::Spectrum { common, duration } => {
            let config = load(&common)?;
            let setup = Setup::new(&config)?;
            let u0 = initial_field(&config, &setup, common.allow_hash_mismatch)?;
            let (spectrum, tau, _) = measure_spectrum(&config, &setup, &u0, duration)?;
            let mut text = String::from("r,E\n");
            for (r, e) in spectrum.e.iter().enumerate().skip(1) {
                text.push_str(&format!("{r},{e:e}\n"));
            }
            write_text(&config.output_dir.join("spectrum.csv"), &text)?;
            println!("tau={tau:.6} energy={:.6e}", spectrum.total());
        }
        Command::InspectCheckpoint { path } => inspect(&path)?,
    }
    Ok(())
}

fn inspect(path: &Path) -> Result<()> {
    let c = read_checkpoint(path)?;
    println!("n = {}", c.n);
    println!("L = {:?}", c.length);
    println!("nu = {:?}", c.nu);
    println!("t = {:?} (t0 = {:?}, step = {})", c.time(), c.t0, c.step);
    println!("dt = {:?}", c.dt);
    println!(
        "forcing = band {}..={} G={:?} seed={}",
        c.band_lo, c.band_hi, c.grashof, c.seed
    );
    println!("config_hash = {}", hex(&c.config_hash));
    println!("assimilated = {}", c.phi.is_some());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use diffbot::error::Failure;
use diffbot::run::{self, Overrides, ServeOptions};

#[derive(Parser)]
#[command(name = "diffbot", version, about = "Differential-drive robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the config's PRNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless and write traces plus a report.
    Sim {
        #[command(flatten)]
        common: Common,
        /// Key script of `tick:key` lines.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Measure PWM to speed tables for both wheels.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Output CSV; defaults to `<out-dir>/calibration.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run in real time with the WebSocket bridge and UI until interrupted.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Static UI bundle to serve instead of the built-in console.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn overrides(c: &Common, script: Option<PathBuf>, ui_dir: Option<PathBuf>) -> Overrides {
    Overrides {
        seed: c.seed,
        out_dir: c.out_dir.clone(),
        script,
        ui_dir,
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Sim { common, script } => {
            let scenario = run::load(&common.config, &overrides(&common, script, None))?;
            let keys = run::load_script(&scenario)?;
            let report = run::sim(&scenario, &keys)?;
            println!(
                "{} ticks, drift {:.6} m, traces in {}",
                report.ticks,
                report.drift_norm,
                scenario.config.out_dir.join("trace").display()
            );
        }
        Command::Calibrate { common, out } => {
            let scenario = run::load(&common.config, &overrides(&common, None, None))?;
            let out = out.unwrap_or_else(|| scenario.config.out_dir.join("calibration.csv"));
            let table = run::calibrate_plant(&scenario, &out)?;
            for (name, t) in [("left", &table.left), ("right", &table.right)] {
                println!(
                    "{name}: deadband {} pwm, {:.4} m/s at 255, {} entries",
                    t.deadband_pwm(),
                    t.max_speed(),
                    t.entries().len()
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Serve {
            common,
            script,
            port,
            speed,
            ui_dir,
        } => {
            let scenario = run::load(&common.config, &overrides(&common, script, ui_dir))?;
            let keys = run::load_script(&scenario)?;
            let stop = Arc::new(AtomicBool::new(false));
            let flag = Arc::clone(&stop);
            ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed))
                .map_err(|e| Failure::runtime(e.to_string()))?;
            let report = run::serve(&scenario, &keys, &ServeOptions { port, speed }, &stop, |addr| {
                println!("listening on http://{addr}/");
            })?;
            println!("stopped after {} ticks, drift {:.6} m", report.ticks, report.drift_norm);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("diffbot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use molecool::linear::NoiseConvention;
use molecool::run::{
    execute, manifest_path, matrices_path, Command, RunManifest, RunOutput, RunRequest,
};
use molecool::sweep::{Axis, FlagOverrides, SweepSpec};
use molecool::Error;

/// Sideband cooling of a nanomechanical resonator coupled to a microwave
/// cavity and a diatomic molecule.
#[derive(Parser)]
#[command(name = "molecool", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Vibrational ladder and molecular frequency of Morse molecules.
    Morse {
        /// K2, HCl, HI or NO; default: all four, or the configured molecule.
        #[arg(long)]
        molecule: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Semiclassical steady state.
    Steady(Common),
    /// Mechanical susceptibility, effective frequency and damping.
    Spectrum {
        #[arg(long, default_value_t = 0.2)]
        omega_min: f64,
        #[arg(long, default_value_t = 2.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 2000)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Effective occupancy and temperature, optionally over a sweep.
    Cool(Common),
    /// Effective temperature over a two-axis sweep.
    Tempmap(Common),
    /// Cross-check covariance, response and steady state against independent routes.
    Validate {
        #[arg(long, default_value_t = 64)]
        trajectories: usize,
        /// Euler-Maruyama step as a fraction of 1/||A||_inf.
        #[arg(long, default_value_t = 1e-3)]
        bias: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Re-execute a run from its manifest.
    Rerun {
        manifest: PathBuf,
        /// Write here instead of the recorded output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compare with the recorded output instead of writing.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Paper,
    Half,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; a manifest is written next to it. Default: stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=start:stop:N[:log]; at most twice.
    #[arg(long)]
    sweep: Vec<String>,
    /// key=value override of a configuration entry.
    #[arg(long)]
    set: Vec<String>,
    #[arg(long)]
    no_molecule: bool,
    #[arg(long)]
    low_excitation: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    dump_matrices: bool,
    #[arg(long, value_enum)]
    noise_convention: Option<Convention>,
    /// Worker threads; default: available parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

fn request(command: Command, c: &Common) -> Result<RunRequest, Error> {
    let config_text = match &c.config {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let axes = c
        .sweep
        .iter()
        .map(|s| Axis::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let noise_convention = c.noise_convention.map(|c| match c {
        Convention::Paper => NoiseConvention::Paper,
        Convention::Half => NoiseConvention::Half,
    });
    Ok(RunRequest {
        command,
        config_text,
        sweep: SweepSpec {
            axes,
            overrides: c.set.clone(),
            flags: FlagOverrides {
                no_molecule: c.no_molecule,
                low_excitation: c.low_excitation,
                noise_convention,
            },
        },
        seed: c.seed,
        dump_matrices: c.dump_matrices,
        json: c.json,
    })
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit(req: &RunRequest, out: &RunOutput, path: Option<&Path>) -> Result<(), Error> {
    write_out(path, &out.render(req.json))?;
    if let Some(m) = &out.matrices {
        let text = serde_json::to_string_pretty(m)? + "\n";
        match path {
            Some(p) => std::fs::write(matrices_path(p), text)?,
            None => eprint!("{text}"),
        }
    }
    if let Some(p) = path {
        RunManifest::new(req, Some(p)).save(&manifest_path(p))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Error> {
    let (command, common) = match cli.command {
        Sub::Morse { molecule, common } => (Command::Morse { molecule }, common),
        Sub::Steady(c) => (Command::Steady, c),
        Sub::Spectrum {
            omega_min,
            omega_max,
            points,
            common,
        } => (
            Command::Spectrum {
                omega_min,
                omega_max,
                points,
            },
            common,
        ),
        Sub::Cool(c) => (Command::Cool, c),
        Sub::Tempmap(c) => (Command::Tempmap, c),
        Sub::Validate {
            trajectories,
            bias,
            common,
        } => (Command::Validate { trajectories, bias }, common),
        Sub::Rerun {
            manifest,
            out,
            check,
        } => {
            let m = RunManifest::load(&manifest)?;
            let (_, text) = m.rerun()?;
            if check {
                let recorded = m
                    .output
                    .as_ref()
                    .ok_or_else(|| Error::Config("manifest records no output file".into()))?;
                let before = std::fs::read_to_string(recorded)?;
                if before != text {
                    eprintln!("rerun differs from {}", recorded.display());
                    return Ok(false);
                }
                eprintln!("rerun matches {}", recorded.display());
                return Ok(true);
            }
            write_out(out.as_deref().or(m.output.as_deref()), &text)?;
            return Ok(true);
        }
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let req = request(command, &common)?;
    let out = execute(&req)?;
    emit(&req, &out, common.out.as_deref())?;
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

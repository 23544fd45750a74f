use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinlattice::experiment::{self, write_energy_series, write_error_table, write_state, ExperimentConfig};
use spinlattice::{check_scheme, parse_scheme, Error};

/// Collective symplectic integration of a periodic spin-lattice chain.
#[derive(Parser)]
#[command(name = "spinlattice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trajectory and write the `T Hmag Hpot Hkin` energy series.
    Simulate {
        /// Configuration file (`key = value` lines).
        config: PathBuf,
    },
    /// Measure the pseudo-error against a fine reference step.
    Converge {
        config: PathBuf,
        /// Comma-separated step sizes; each may be decimal, `p/q` or `2^k`.
        #[arg(long = "h", value_delimiter = ',', value_parser = parse_step, required = true)]
        steps: Vec<f64>,
        /// Reference step size.
        #[arg(long = "ref", value_parser = parse_step)]
        reference: f64,
        /// Output table with columns `H Err`.
        #[arg(long, default_value = "Errorplot.dat")]
        out: PathBuf,
    },
    /// Check the symplecticity conditions of a partitioned scheme description.
    CheckTableau { file: PathBuf },
}

fn parse_step(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let value = if let Some((base, exponent)) = text.split_once('^') {
        let base: f64 = base.parse().map_err(|_| format!("invalid base in '{text}'"))?;
        let exponent: i32 = exponent.parse().map_err(|_| format!("invalid exponent in '{text}'"))?;
        base.powi(exponent)
    } else if let Some((num, den)) = text.split_once('/') {
        let num: f64 = num.parse().map_err(|_| format!("invalid numerator in '{text}'"))?;
        let den: f64 = den.parse().map_err(|_| format!("invalid denominator in '{text}'"))?;
        num / den
    } else {
        text.parse().map_err(|_| format!("invalid step size '{text}'"))?
    };
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(format!("step size must be positive, got '{text}'"))
    }
}

/// Exit status: 1 for verification or physics failures, 2 for bad input.
fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Parse { .. } | Error::InvalidParameter(_) | Error::Dimension(_) | Error::ZeroSpin { .. } => 2,
        _ => 1,
    }
}

fn fail(error: Error) -> ExitCode {
    eprintln!("error: {error}");
    ExitCode::from(exit_code(&error))
}

fn io_fail(path: &Path, error: std::io::Error) -> ExitCode {
    eprintln!("error: cannot write {}: {error}", path.display());
    ExitCode::from(2)
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), ExitCode> {
    let result = File::create(path).and_then(|file| {
        let mut out = BufWriter::new(file);
        write(&mut out)?;
        out.flush()
    });
    result.map_err(|e| io_fail(path, e))
}

fn simulate(config_path: &Path) -> ExitCode {
    let config = match ExperimentConfig::from_file(config_path) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let output = match experiment::simulate(&config) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    if let Err(code) = write_file(&config.output, |out| write_energy_series(out, &output.records)) {
        return code;
    }
    let final_path = config.final_state_path();
    if let Err(code) = write_file(&final_path, |out| write_state(out, &output.summary.state)) {
        return code;
    }
    println!("steps: {}", output.summary.steps);
    println!("max energy deviation (sampled every {} steps): {:e}", config.stride, output.max_energy_deviation);
    println!("max fixed-point iterations: {}", output.summary.max_iterations);
    println!("energies: {}", config.output.display());
    println!("final state: {}", final_path.display());
    ExitCode::SUCCESS
}

fn converge(config_path: &Path, steps: &[f64], reference: f64, out: &Path) -> ExitCode {
    let config = match ExperimentConfig::from_file(config_path) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let study = match experiment::converge(&config, steps, reference) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if let Err(code) = write_file(out, |w| write_error_table(w, &study.rows)) {
        return code;
    }
    for (h, err) in &study.rows {
        println!("{:<12e} {err:e}", h);
    }
    match study.slope {
        Some(slope) => println!("log-log slope: {slope:.4}"),
        None => println!("log-log slope: undefined (fewer than two nonzero errors)"),
    }
    println!("table: {}", out.display());
    ExitCode::SUCCESS
}

fn check_tableau(path: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let scheme = match parse_scheme(&text) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let verdict = match check_scheme(&scheme) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    println!("{} component(s)", scheme.components.len());
    if verdict.passed() {
        println!("PASS all symplecticity conditions hold");
        ExitCode::SUCCESS
    } else {
        for violation in &verdict.violations {
            println!("FAIL {violation}");
        }
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config } => simulate(&config),
        Command::Converge {
            config,
            steps,
            reference,
            out,
        } => converge(&config, &steps, reference, &out),
        Command::CheckTableau { file } => check_tableau(&file),
    }
}

//! Batch experiments on the periodic spin-lattice chain: configuration
//! files, the reference initial condition, energy time series and
//! step-size convergence studies.
//!
//! Configuration files are flat `key = value` text with `#` comments:
//!
//! ```text
//! n = 30
//! L = 30
//! mass = 1
//! U0 = 1
//! r_m = 1
//! J0 = 10
//! r_c = 1.5
//! h = 0.01
//! t_end = 100
//! stride = 10
//! output = energies.dat
//! ```
//!
//! Recognised keys: `n`, `L`, `mass`, `masses`, `U0`, `r_m`, `J0`, `r_c`,
//! `convention` (`chain` or `pairwise`), `h`, `t_end`, `stride`, `output`,
//! `final_state`, `fp_tolerance`, `max_iterations`, `initial` (`reference` or
//! `file`) and `initial_file`. Missing keys take the reference values above.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{project, LatticeState, Spin, SpinLatticeState};
use crate::integrator::{integrate, step_count, IntegrationSummary, SolverSettings};
use crate::model::{ChainParameters, ExtendedHamiltonian, MagneticConvention, SleChainModel};

/// Where the initial state comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Reference,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub chain: ChainParameters,
    pub step: f64,
    pub t_end: f64,
    pub stride: usize,
    pub output: PathBuf,
    pub final_state: Option<PathBuf>,
    pub fp_tolerance: f64,
    pub max_iterations: usize,
    pub initial: InitialCondition,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            chain: ChainParameters::default(),
            // not a published value: 10⁴ steps over [0, 100]
            step: 0.01,
            t_end: 100.0,
            stride: 10,
            output: PathBuf::from("energies.dat"),
            final_state: None,
            fp_tolerance: SolverSettings::DEFAULT_TOLERANCE,
            max_iterations: SolverSettings::DEFAULT_MAX_ITERATIONS,
            initial: InitialCondition::Reference,
        }
    }
}

fn parse_value<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid value '{value}' for '{key}'"),
    })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut n_set = false;
        let mut uniform_mass: Option<f64> = None;
        let mut masses: Option<(Vec<f64>, usize)> = None;
        let mut initial_kind: Option<(String, usize)> = None;
        let mut initial_file: Option<PathBuf> = None;

        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected 'key = value', found '{content}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("missing value for '{key}'"),
                });
            }
            match key {
                "n" => {
                    config.chain.n = parse_value(value, key, line)?;
                    n_set = true;
                }
                "L" => config.chain.period = parse_value(value, key, line)?,
                "mass" => uniform_mass = Some(parse_value(value, key, line)?),
                "masses" => {
                    let list = value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_value(s, key, line))
                        .collect::<Result<Vec<f64>>>()?;
                    masses = Some((list, line));
                }
                "U0" => config.chain.u0 = parse_value(value, key, line)?,
                "r_m" => config.chain.r_m = parse_value(value, key, line)?,
                "J0" => config.chain.j0 = parse_value(value, key, line)?,
                "r_c" => config.chain.r_c = parse_value(value, key, line)?,
                "convention" => {
                    config.chain.convention = match value {
                        "chain" => MagneticConvention::Chain,
                        "pairwise" => MagneticConvention::Pairwise,
                        _ => {
                            return Err(Error::Parse {
                                line,
                                message: format!("convention must be 'chain' or 'pairwise', found '{value}'"),
                            })
                        }
                    }
                }
                "h" => config.step = parse_value(value, key, line)?,
                "t_end" => config.t_end = parse_value(value, key, line)?,
                "stride" => config.stride = parse_value(value, key, line)?,
                "output" => config.output = PathBuf::from(value),
                "final_state" => config.final_state = Some(PathBuf::from(value)),
                "fp_tolerance" => config.fp_tolerance = parse_value(value, key, line)?,
                "max_iterations" => config.max_iterations = parse_value(value, key, line)?,
                "initial" => initial_kind = Some((value.to_string(), line)),
                "initial_file" => initial_file = Some(PathBuf::from(value)),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key '{key}'"),
                    })
                }
            }
        }

        let n = config.chain.n;
        config.chain.masses = match (masses, uniform_mass) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse {
                    line: 0,
                    message: "set either 'mass' or 'masses', not both".into(),
                })
            }
            (Some((list, line)), None) => {
                if list.len() != n {
                    return Err(Error::Parse {
                        line,
                        message: format!("{} masses given for n = {n}", list.len()),
                    });
                }
                list
            }
            (None, Some(m)) => vec![m; n],
            (None, None) if n_set => vec![1.0; n],
            (None, None) => config.chain.masses,
        };

        config.initial = match initial_kind {
            None => match initial_file {
                Some(path) => InitialCondition::File(path),
                None => InitialCondition::Reference,
            },
            Some((kind, line)) => match kind.as_str() {
                "reference" => InitialCondition::Reference,
                "file" => InitialCondition::File(initial_file.ok_or_else(|| Error::Parse {
                    line,
                    message: "'initial = file' needs 'initial_file'".into(),
                })?),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("initial must be 'reference' or 'file', found '{kind}'"),
                    })
                }
            },
        };

        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.settings()?;
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        if self.chain.u0 < 0.0 || self.chain.j0 < 0.0 {
            return Err(Error::InvalidParameter("U0 and J0 must be nonnegative".into()));
        }
        step_count(self.t_end, self.step)?;
        Ok(())
    }

    pub fn model(&self) -> Result<SleChainModel> {
        SleChainModel::new(self.chain.clone())
    }

    pub fn settings(&self) -> Result<SolverSettings> {
        SolverSettings::new(self.step)?
            .with_tolerance(self.fp_tolerance)?
            .with_max_iterations(self.max_iterations)
    }

    pub fn initial_state(&self) -> Result<SpinLatticeState> {
        match &self.initial {
            InitialCondition::Reference => reference_initial_state(self.chain.n),
            InitialCondition::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
                let state = parse_state(&text)?;
                if state.spins.len() != self.chain.n {
                    return Err(Error::Dimension(format!(
                        "initial state has {} particles, config has n = {}",
                        state.spins.len(),
                        self.chain.n
                    )));
                }
                Ok(state)
            }
        }
    }

    /// Path of the final-state file: `final_state` if set, else `<output stem>.final.dat`.
    pub fn final_state_path(&self) -> PathBuf {
        self.final_state.clone().unwrap_or_else(|| {
            let stem = self
                .output
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "energies".into());
            self.output.with_file_name(format!("{stem}.final.dat"))
        })
    }
}

/// `q_k = k`, `p_k = 0`, and
/// `w_k ∝ (0.8 cos(2πk/n) + 0.5 sin(4πk/n), 0.8 sin(2πk/n) + 0.5 cos(4πk/n), 1)`
/// normalised, for `k = 1..n`.
pub fn reference_initial_state(n: usize) -> Result<SpinLatticeState> {
    if n < 2 {
        return Err(Error::InvalidParameter("the reference initial state needs n ≥ 2".into()));
    }
    let nf = n as f64;
    let spins: Vec<Spin> = (1..=n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / nf;
            Vector3::new(
                0.8 * t.cos() + 0.5 * (2.0 * t).sin(),
                0.8 * t.sin() + 0.5 * (2.0 * t).cos(),
                1.0,
            )
            .normalize()
        })
        .collect();
    let q = (1..=n).map(|k| k as f64).collect();
    Ok(SpinLatticeState {
        spins,
        lattice: LatticeState::new(q, vec![0.0; n])?,
    })
}

/// Formats with 17 significant digits in scientific notation, e.g. `-1.2500000000000000e+01`.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.16e}");
    let (mantissa, exponent) = s.split_once('e').expect("scientific format");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let sign = if exponent < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exponent.abs())
}

/// Reads a state file: one `q p w1 w2 w3` row per particle, `#` comments allowed.
/// Spins are projected onto the unit sphere.
pub fn parse_state(text: &str) -> Result<SpinLatticeState> {
    let mut q = Vec::new();
    let mut p = Vec::new();
    let mut spins = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let values = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid number '{t}'"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 5 columns (q p w1 w2 w3), found {}", values.len()),
            });
        }
        q.push(values[0]);
        p.push(values[1]);
        spins.push(Vector3::new(values[2], values[3], values[4]));
    }
    project(&spins, &LatticeState::new(q, p)?)
}

pub fn write_state<W: Write>(mut out: W, state: &SpinLatticeState) -> io::Result<()> {
    writeln!(out, "# q p w1 w2 w3")?;
    for (k, w) in state.spins.iter().enumerate() {
        writeln!(
            out,
            "{} {} {} {} {}",
            format_number(state.lattice.q[k]),
            format_number(state.lattice.p[k]),
            format_number(w.x),
            format_number(w.y),
            format_number(w.z)
        )?;
    }
    Ok(())
}

/// One row of the energy time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub time: f64,
    pub hmag: f64,
    pub hpot: f64,
    pub hkin: f64,
    pub htot: f64,
}

pub fn write_energy_series<W: Write>(mut out: W, records: &[EnergyRecord]) -> io::Result<()> {
    writeln!(out, "T Hmag Hpot Hkin")?;
    for r in records {
        writeln!(
            out,
            "{} {} {} {}",
            format_number(r.time),
            format_number(r.hmag),
            format_number(r.hpot),
            format_number(r.hkin)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub records: Vec<EnergyRecord>,
    pub summary: IntegrationSummary,
    /// `max |Htot(t) − Htot(0)|` over the recorded rows only.
    pub max_energy_deviation: f64,
}

/// Runs the configured trajectory and samples energies every `stride` steps.
pub fn simulate(config: &ExperimentConfig) -> Result<SimulationOutput> {
    config.validate()?;
    let model = config.model()?;
    let initial = config.initial_state()?;
    simulate_from(config, &model, &initial)
}

pub fn simulate_from<H: ExtendedHamiltonian + ?Sized>(
    config: &ExperimentConfig,
    model: &H,
    initial: &SpinLatticeState,
) -> Result<SimulationOutput> {
    let mut records = Vec::new();
    let summary = integrate(model, initial, &config.settings()?, config.t_end, config.stride, |t, _, e| {
        records.push(EnergyRecord {
            time: t,
            hmag: e.magnetic,
            hpot: e.potential,
            hkin: e.kinetic,
            htot: e.total,
        });
    })?;
    let h0 = records[0].htot;
    let max_energy_deviation = records.iter().map(|r| (r.htot - h0).abs()).fold(0.0, f64::max);
    Ok(SimulationOutput {
        records,
        summary,
        max_energy_deviation,
    })
}

/// Result of a pseudo-error study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    /// `(h, ‖y_h(t_end) − y_ref(t_end)‖₂)` in the order the steps were given.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of `log Err` against `log h` over rows with `Err > 0`.
    pub slope: Option<f64>,
}

/// Integrates from the configured initial state with each step in `steps`
/// and with `reference_step`, comparing the final states.
pub fn converge(config: &ExperimentConfig, steps: &[f64], reference_step: f64) -> Result<ConvergenceStudy> {
    let model = config.model()?;
    let initial = config.initial_state()?;
    if steps.is_empty() {
        return Err(Error::InvalidParameter("no step sizes given".into()));
    }
    if !(reference_step > 0.0) || steps.iter().any(|&h| !(h >= reference_step)) {
        return Err(Error::InvalidParameter(
            "the reference step must be positive and no larger than every step".into(),
        ));
    }
    for &h in steps.iter().chain([&reference_step]) {
        step_count(config.t_end, h)?;
    }

    let run = |h: f64| -> Result<Vec<f64>> {
        let settings = SolverSettings::new(h)?
            .with_tolerance(config.fp_tolerance)?
            .with_max_iterations(config.max_iterations)?;
        let summary = integrate(&model, &initial, &settings, config.t_end, usize::MAX, |_, _, _| {})?;
        Ok(summary.state.flatten())
    };

    // independent trajectories; results are collected in input order
    let (reference, finals) = std::thread::scope(|scope| {
        let handles: Vec<_> = steps.iter().map(|&h| scope.spawn(move || run(h))).collect();
        let reference = run(reference_step);
        let finals: Vec<Result<Vec<f64>>> = handles
            .into_iter()
            .map(|handle| handle.join().expect("integration thread panicked"))
            .collect();
        (reference, finals)
    });
    let reference = reference?;
    let rows = steps
        .iter()
        .zip(finals)
        .map(|(&h, state)| {
            let state = state?;
            let err = state
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok((h, err))
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = loglog_slope(&rows);
    Ok(ConvergenceStudy { rows, slope })
}

/// Least-squares slope of `log y` against `log x`, ignoring nonpositive entries.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn write_error_table<W: Write>(mut out: W, rows: &[(f64, f64)]) -> io::Result<()> {
    writeln!(out, "H Err")?;
    for (h, err) in rows {
        writeln!(out, "{} {}", format_number(*h), format_number(*err))?;
    }
    Ok(())
}

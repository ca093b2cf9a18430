//! `qnet`: compile `.qnet` files, run the built-in scenarios, sweep
//! parameters and export trajectories.
//!
//! Exit codes: 0 success, 1 parse or compile error, 2 invalid configuration.

mod args;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use qnet::dsl;
use qnet::dynamics::{Drive, DEFAULT_HORIZON, DEFAULT_STEP};
use qnet::scenario::{Scenario, ScenarioKind, ScenarioParams};
use qnet::Error;

#[derive(Parser)]
#[command(name = "qnet", version, about = "Linear quantum network scenarios: compile, analyze, simulate, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a .qnet file to state-space JSON
    Compile {
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalues, stability margin, noise-free modes and fitted decay rate
    Analyze(RunArgs),
    /// Integrate the means and write a CSV trajectory
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Classical drive on the disturbance input, e.g. sin:amp=1,freq=2
        #[arg(long)]
        drive: Option<String>,
        /// Also integrate the symmetrised covariance
        #[arg(long)]
        covariance: bool,
        /// Write a gnuplot script plotting the CSV (requires --out)
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Fitted decay rate and stability margin over a parameter range
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// name=start:stop:count or name=v1,v2,...
        #[arg(long)]
        sweep: String,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// classical, oneway, twoway, observer, observer-verified or file:<path>
    #[arg(long, default_value = "observer")]
    scenario: String,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    omega: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long = "gamma-l", default_value_t = 2.0)]
    gamma_l: f64,
    /// Gain of the classical observer
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gain: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Compile(String),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::SingularLoop { .. }
            | Error::DanglingPort(_)
            | Error::PortNotFound(_)
            | Error::PortAlreadyUsed(_) => Failure::Compile(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Config(format!("cannot write output: {e}")))
        }
    }
}

impl RunArgs {
    fn params(&self) -> ScenarioParams {
        ScenarioParams { omega: self.omega, gamma: self.gamma, gamma_l: self.gamma_l, gain: self.gain }
    }

    fn scenario(&self, params: ScenarioParams) -> Result<Scenario, Failure> {
        let kind: ScenarioKind = self.scenario.parse().map_err(|e: Error| Failure::Config(e.to_string()))?;
        if let ScenarioKind::File(path) = &kind {
            // distinguish a missing file (configuration) from a bad one
            fs::metadata(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            let text = fs::read(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            dsl::parse_bytes(&text).map_err(|e| Failure::Compile(format!("{}:{e}", path.display())))?;
        }
        Ok(Scenario::build(kind, params)?)
    }
}

fn analysis_json(scenario: &Scenario, run: &RunArgs) -> Result<serde_json::Value, Failure> {
    let traj = scenario.simulate(&[], run.horizon, run.step, false)?;
    let report = scenario.analyze(Some(&traj));
    let p = scenario.params;
    let mut v = json!({
        "scenario": scenario.kind.to_string(),
        "parameters": { "omega": p.omega, "gamma": p.gamma, "gamma_l": p.gamma_l, "gain": p.gain },
        "horizon": run.horizon,
        "step": run.step,
        "fit_coordinate": scenario.fit,
    });
    let report = serde_json::to_value(&report).map_err(|e| Failure::Config(e.to_string()))?;
    if let (Some(obj), serde_json::Value::Object(r)) = (v.as_object_mut(), report) {
        obj.extend(r);
    }
    if let Some(sys) = &scenario.observer {
        let z = sys.error_rate();
        v["error_a"] = json!([z.re, z.im]);
        v["error_autonomous"] = json!(sys.is_autonomous());
    }
    Ok(v)
}

fn cmd_compile(path: &Path, out: Option<&Path>) -> Outcome {
    let text = fs::read(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let desc = dsl::parse_bytes(&text).map_err(|e| Failure::Compile(format!("{}:{e}", path.display())))?;
    let ss = dsl::compile(&desc).map_err(|e| match Failure::from(e) {
        Failure::Compile(m) | Failure::Config(m) => Failure::Compile(format!("{}: {m}", path.display())),
    })?;
    let mut text = ss.to_json()?;
    text.push('\n');
    emit(out, &text)
}

fn cmd_analyze(run: &RunArgs) -> Outcome {
    let scenario = run.scenario(run.params())?;
    let v = analysis_json(&scenario, run)?;
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| Failure::Config(e.to_string()))?;
    text.push('\n');
    emit(run.out.as_deref(), &text)
}

fn plot_script(csv: &Path, scenario: &Scenario, dim: usize) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!("set title '{}'\n", scenario.kind));
    s.push_str("set xlabel 't'\nset ylabel 'mean'\nset grid\n");
    let file = csv.display().to_string().replace('\'', "''");
    // t, then (re, im) per mean entry, then (re, im, abs) per coordinate
    let mut series: Vec<String> = scenario
        .coordinates
        .iter()
        .enumerate()
        .map(|(k, c)| format!("'{file}' using 1:{} with lines title '|{}|'", 2 + 2 * dim + 3 * k + 2, c.name))
        .collect();
    if series.is_empty() {
        series.push(format!("'{file}' using 1:2 with lines title 're(x1)'"));
    }
    s.push_str(&format!("plot {}\n", series.join(", \\\n     ")));
    s
}

fn cmd_simulate(run: &RunArgs, drive: Option<&str>, covariance: bool, plot: Option<&Path>) -> Outcome {
    if plot.is_some() && run.out.is_none() {
        return Err(Failure::Config("--plot needs --out so the script can reference the CSV".into()));
    }
    let scenario = run.scenario(run.params())?;
    if covariance && scenario.state_space().is_none() {
        return Err(Failure::Config("--covariance applies to quantum scenarios only".into()));
    }
    let mut drives = Vec::new();
    if let Some(spec) = drive {
        if let Some(profile) = args::parse_drive(spec).map_err(Failure::Config)? {
            if scenario.num_inputs() == 0 {
                return Err(Failure::Config("scenario has no external inputs to drive".into()));
            }
            drives.push(Drive::new(scenario.drive_channel, profile));
        }
    }
    let traj = scenario.simulate(&drives, run.horizon, run.step, covariance)?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, covariance, &scenario.coordinates)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let text = String::from_utf8(buf).expect("CSV is ASCII");
    emit(run.out.as_deref(), &text)?;
    if let (Some(script), Some(csv)) = (plot, run.out.as_deref()) {
        let dim = traj.means.first().map_or(0, |x| x.len());
        fs::write(script, plot_script(csv, &scenario, dim))
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", script.display())))?;
    }
    Ok(())
}

fn cmd_sweep(run: &RunArgs, spec: &str) -> Outcome {
    let sweep = args::parse_sweep(spec).map_err(Failure::Config)?;
    let base = run.params();
    // build the base case first so a bad scenario name fails once, up front
    run.scenario(base)?;
    let rows: Vec<Result<String, Failure>> = sweep
        .values
        .par_iter()
        .map(|&value| {
            let mut p = base;
            match sweep.name.as_str() {
                "omega" => p.omega = value,
                "gamma" => p.gamma = value,
                "gamma_l" => p.gamma_l = value,
                _ => p.gain = value,
            }
            let scenario = run.scenario(p)?;
            let traj = scenario.simulate(&[], run.horizon, run.step, false)?;
            let report = scenario.analyze(Some(&traj));
            let rate = report.decay.map_or(f64::NAN, |d| d.rate);
            Ok(format!("{value},{rate},{}", report.margin))
        })
        .collect();
    let mut text = format!("{},rate,margin\n", sweep.name);
    for row in rows {
        text.push_str(&row?);
        text.push('\n');
    }
    emit(run.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Compile { path, out } => cmd_compile(path, out.as_deref()),
        Command::Analyze(run) => cmd_analyze(run),
        Command::Simulate { run, drive, covariance, plot } => {
            cmd_simulate(run, drive.as_deref(), *covariance, plot.as_deref())
        }
        Command::Sweep { run, sweep } => cmd_sweep(run, sweep),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Compile(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

//! Command-line front end: run a scenario, compare the three controllers, or
//! execute the randomized verification suites.
//!
//! Exit codes for `run`: 0 when the goal is reached, 2 when it is not, 1 on
//! configuration or I/O errors. `verify` exits 0 iff every requested suite
//! stays within tolerance.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use polynav::report::{comparison_table, csv_string, summary_json, svg_figure};
use polynav::scenario::{self, Scenario};
use polynav::sim::{run, Controller, SimConfig, SimResult};
use polynav::verify;

#[derive(Parser)]
#[command(name = "polynav", version, about = "Safe navigation among polytopic obstacles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one controller on a scenario and write CSV/JSON/SVG reports.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Controller to run.
        #[arg(long, default_value = "milp-mpc-cbf")]
        controller: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run all three controllers on a scenario; write per-controller reports,
    /// an overlay SVG and a comparison table.
    Compare {
        /// Scenario JSON file.
        scenario: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Randomized verification suites against slow oracles.
    Verify {
        /// Which suite to run.
        #[arg(value_enum)]
        suite: Suite,
        /// Generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random cases (default depends on the suite).
        #[arg(long)]
        n_cases: Option<usize>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the control sampling time (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the simulation horizon (s).
    #[arg(long)]
    t_final: Option<f64>,
    /// Skip the SVG figure.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Gradients,
    Hessians,
    Milp,
    Qp,
    Geometry,
    All,
}

fn sim_config(scenario: &Scenario, common: &CommonArgs) -> SimConfig {
    SimConfig {
        dt: common.dt.unwrap_or(scenario.params.dt),
        t_final: common.t_final.unwrap_or(scenario.params.t_final),
        ..SimConfig::default()
    }
}

fn write_reports(
    dir: &Path,
    scenario: &Scenario,
    result: &SimResult,
    svg: bool,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let stem = format!("{}_{}", scenario.name, result.controller.label());
    std::fs::write(dir.join(format!("{stem}.csv")), csv_string(result))?;
    std::fs::write(dir.join(format!("{stem}.json")), summary_json(result))?;
    if svg {
        std::fs::write(dir.join(format!("{stem}.svg")), svg_figure(scenario, &[result]))?;
    }
    Ok(())
}

fn cmd_run(path: &Path, controller: &str, common: &CommonArgs) -> ExitCode {
    let controller: Controller = match controller.parse() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let scenario = match scenario::load(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cfg = sim_config(&scenario, common);
    let result = match run(&scenario, controller, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_reports(&common.out, &scenario, &result, !common.no_svg) {
        eprintln!("error: writing reports: {e}");
        return ExitCode::from(1);
    }
    let m = &result.metrics;
    println!(
        "{}: {} with {}: reached={} t_reach={} min_h={} intervention={:.2}s stalled={}",
        scenario.name,
        result.controller.label(),
        path.display(),
        m.reached,
        m.t_reach.map_or("-".into(), |t| format!("{t:.2}")),
        if m.min_h.is_finite() {
            format!("{:.4}", m.min_h)
        } else {
            "-".into()
        },
        m.intervention_time,
        m.stalled
    );
    if m.reached {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_compare(path: &Path, common: &CommonArgs) -> ExitCode {
    let scenario = match scenario::load(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cfg = sim_config(&scenario, common);
    let mut results = Vec::new();
    for controller in [
        Controller::MilpMpcCbf,
        Controller::MilpMpcOnly,
        Controller::ClfCbfQp,
    ] {
        match run(&scenario, controller, &cfg) {
            Ok(r) => results.push(r),
            Err(e) => {
                eprintln!("error: {}: {e}", controller.label());
                return ExitCode::from(1);
            }
        }
    }
    for r in &results {
        if let Err(e) = write_reports(&common.out, &scenario, r, false) {
            eprintln!("error: writing reports: {e}");
            return ExitCode::from(1);
        }
    }
    if !common.no_svg {
        let refs: Vec<&SimResult> = results.iter().collect();
        let svg = svg_figure(&scenario, &refs);
        let name = format!("{}_compare.svg", scenario.name);
        if let Err(e) = std::fs::write(common.out.join(&name), svg) {
            eprintln!("error: writing {name}: {e}");
            return ExitCode::from(1);
        }
    }
    print!("{}", comparison_table(&results));
    ExitCode::SUCCESS
}

fn cmd_verify(suite: Suite, seed: u64, n_cases: Option<usize>) -> ExitCode {
    type SuiteFn = (fn(u64, usize) -> verify::SuiteReport, usize);
    let catalogue: &[(Suite, SuiteFn)] = &[
        (Suite::Gradients, (verify::gradients, 1000)),
        (Suite::Hessians, (verify::hessians, 1000)),
        (Suite::Milp, (verify::milp, 30)),
        (Suite::Qp, (verify::qp, 500)),
        (Suite::Geometry, (verify::geometry, 1000)),
    ];
    let selected: Vec<&SuiteFn> = catalogue
        .iter()
        .filter(|(s, _)| matches!(suite, Suite::All) || *s as u8 == suite as u8)
        .map(|(_, f)| f)
        .collect();
    let mut ok = true;
    for (f, default_n) in selected {
        let report = f(seed, n_cases.unwrap_or(*default_n));
        println!("{report}");
        ok &= report.passed();
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            controller,
            common,
        } => cmd_run(&scenario, &controller, &common),
        Command::Compare { scenario, common } => cmd_compare(&scenario, &common),
        Command::Verify {
            suite,
            seed,
            n_cases,
        } => cmd_verify(suite, seed, n_cases),
    }
}

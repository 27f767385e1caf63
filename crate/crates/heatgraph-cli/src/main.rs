//! Command line front end: run scenarios, sweep sampling budgets,
//! generate plate meshes, and place sensors.
//!
//! Exit codes separate the two ways things go wrong: 1 for invalid
//! inputs (unparseable files, bad arguments, malformed scenarios) and 2
//! for configurations that are valid but cannot identify their unknowns
//! (too few observations, rank-deficient or degenerate operators,
//! disconnected graphs).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use heatgraph::experiment::{
    rmse_sweep, run_report_to_string, run_scenario, sweep_report_to_string, ReportFormat,
};
use heatgraph::mesh::{generate_plate_with_cavity, save_mesh, Cavity};
use heatgraph::sampling::{greedy_sensor_selection, SelectionObjective};
use heatgraph::scenario::load_scenario;

#[derive(Parser)]
#[command(
    name = "heatgraph",
    version,
    about = "Heat diffusion on graphs: simulate, observe, and recover the driving sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and report recovery errors.
    Run {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
    },
    /// Rerun a scenario over a grid of sensor and time counts.
    Sweep {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated sensor counts.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        /// Comma-separated observation counts.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<usize>,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
    /// Greedily place sensors for a scenario's graph and grid.
    Select {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Number of sensors to place.
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::MaxMinSingular)]
        objective: ObjectiveArg,
        /// Write the selection here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate a triangulated rectangular plate, optionally with a
    /// rectangular cavity.
    Gen {
        /// Cells along the x axis.
        #[arg(long, default_value_t = 12)]
        nx: usize,
        /// Cells along the y axis.
        #[arg(long, default_value_t = 12)]
        ny: usize,
        #[arg(long, default_value_t = 4.0)]
        width: f64,
        #[arg(long, default_value_t = 4.0)]
        height: f64,
        /// Cavity corners as x0,y0,x1,y1.
        #[arg(long, value_parser = parse_cavity)]
        cavity: Option<Cavity>,
        /// Output mesh file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(arg: FormatArg) -> Self {
        match arg {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    MinCondition,
    MaxMinSingular,
}

impl From<ObjectiveArg> for SelectionObjective {
    fn from(arg: ObjectiveArg) -> Self {
        match arg {
            ObjectiveArg::MinCondition => SelectionObjective::MinCondition,
            ObjectiveArg::MaxMinSingular => SelectionObjective::MaxMinSingular,
        }
    }
}

fn parse_cavity(text: &str) -> Result<Cavity, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(format!("expected x0,y0,x1,y1, got {text:?}"));
    }
    let mut corners = [0.0f64; 4];
    for (value, part) in corners.iter_mut().zip(&parts) {
        *value = part
            .trim()
            .parse()
            .map_err(|e| format!("bad coordinate {part:?}: {e}"))?;
    }
    Ok(Cavity::new(corners[0], corners[1], corners[2], corners[3]))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors; everything else
            // is invalid input.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_infeasible() { 2 } else { 1 })
        }
    }
}

fn execute(cli: Cli) -> heatgraph::Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            format,
        } => {
            let config = load_scenario(&scenario)?;
            let report = run_scenario(&config, scenario_dir(&scenario))?;
            emit(&run_report_to_string(&report, format.into()), out.as_deref())
        }
        Command::Sweep {
            scenario,
            k,
            t,
            out,
            format,
        } => {
            let config = load_scenario(&scenario)?;
            let report = rmse_sweep(&config, &k, &t, scenario_dir(&scenario))?;
            emit(&sweep_report_to_string(&report, format.into()), Some(&out))
        }
        Command::Mesh {
            command:
                MeshCommand::Gen {
                    nx,
                    ny,
                    width,
                    height,
                    cavity,
                    out,
                },
        } => {
            let mesh = generate_plate_with_cavity(width, height, nx, ny, cavity)?;
            save_mesh(&mesh, &out)?;
            eprintln!(
                "wrote {} vertices, {} triangles to {}",
                mesh.vertex_count(),
                mesh.triangle_count(),
                out.display()
            );
            Ok(())
        }
        Command::Select {
            scenario,
            k,
            objective,
            out,
        } => {
            let config = load_scenario(&scenario)?;
            let built = config.build(scenario_dir(&scenario))?;
            let selection =
                greedy_sensor_selection(&built.spectrum, &built.grid, k, objective.into())?;
            let mut text = serde_json::to_string(&selection.to_one_based())
                .expect("index lists serialize cleanly");
            text.push('\n');
            emit(&text, out.as_deref())
        }
    }
}

fn scenario_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    }
}

fn emit(text: &str, out: Option<&Path>) -> heatgraph::Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

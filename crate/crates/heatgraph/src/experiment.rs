//! Running scenarios: simulation, noisy observation, recovery, and
//! aggregate error reports.
//!
//! Everything here is deterministic given the scenario. Per-trial noise
//! seeds are derived by mixing the scenario seed with the trial index
//! (and, in sweeps, the cell coordinates), so trials are independent
//! streams yet any one of them can be reproduced in isolation, and
//! adding a trial never changes the ones before it. Reports serialize
//! to JSON or CSV with Rust's shortest round-trip float formatting, so
//! equal runs produce byte-identical files.

use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diffusion::{simulate_field, TimeGrid};
use crate::error::{Error, Result};
use crate::recovery::{recover, OperatorSolver};
use crate::sampling::{
    external_input_operator, initial_field_operator, joint_operator, random_selection,
    stack_columns, ConditioningReport, ObservationOperator, UnderdeterminedPolicy,
    VertexSelection,
};
use crate::scenario::{BuiltScenario, NoiseSpec, RecoveryMode, Scenario, SelectionSpec};

/// How reported errors are computed, embedded in every report so files
/// stay interpretable on their own.
pub const RMSE_DEFINITION: &str = "rmse = sqrt(mean over trials of ||estimate - truth||^2) \
     / ||truth|| (denominator 1 when the truth is zero); stderr = sample standard deviation \
     of the per-trial normalized errors / sqrt(trials), 0 for a single trial";

/// Splitmix-style finalizer over the scenario seed and two indices.
/// Gives well-separated ChaCha seeds for (cell, trial) pairs without
/// any stream bookkeeping.
pub(crate) fn mix_seed(seed: u64, lane: u64, index: u64) -> u64 {
    let mut z = seed
        ^ lane.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds the observation operator a recovery mode calls for.
pub fn observation_operator(
    spectrum: &crate::spectrum::Spectrum,
    grid: &TimeGrid,
    mode: RecoveryMode,
    selection: &VertexSelection,
) -> Result<ObservationOperator> {
    match mode {
        RecoveryMode::InitialOnly => initial_field_operator(spectrum, grid, selection),
        RecoveryMode::InputOnly => external_input_operator(spectrum, grid, selection),
        RecoveryMode::Joint { bandwidth } => joint_operator(
            spectrum,
            grid,
            selection,
            bandwidth,
            UnderdeterminedPolicy::Reject,
        ),
    }
}

/// Normalized errors of one trial's estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trial: usize,
    pub initial_error: Option<f64>,
    pub input_error: Option<f64>,
    pub residual_norm: f64,
}

/// Aggregate of normalized errors over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub rmse: f64,
    pub stderr: f64,
}

fn summarize(errors: &[f64]) -> ErrorSummary {
    let trials = errors.len() as f64;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / trials).sqrt();
    let stderr = if errors.len() < 2 {
        0.0
    } else {
        let mean = errors.iter().sum::<f64>() / trials;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials - 1.0);
        var.sqrt() / trials.sqrt()
    };
    ErrorSummary { rmse, stderr }
}

fn normalizer(truth: &DVector<f64>) -> f64 {
    let norm = truth.norm();
    if norm > 0.0 {
        norm
    } else {
        1.0
    }
}

/// Full record of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub vertex_count: usize,
    /// 1-based observed vertices, in ascending order.
    pub sensors: Vec<usize>,
    pub observation_times: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub rmse_definition: String,
    pub conditioning: ConditioningReport,
    pub initial_rmse: Option<ErrorSummary>,
    pub input_rmse: Option<ErrorSummary>,
    /// Vertex-domain estimates from the first trial.
    pub initial_estimate: Option<Vec<f64>>,
    pub input_estimate: Option<Vec<f64>>,
    pub trial_stats: Vec<TrialStats>,
}

/// Simulates the scenario, observes it (with noise when declared), and
/// recovers the declared sources once per trial.
pub fn run_scenario(scenario: &Scenario, base_dir: &Path) -> Result<RunReport> {
    let built = scenario.build(base_dir)?;
    let selection = scenario.resolve_selection(&built)?;
    let op = observation_operator(&built.spectrum, &built.grid, built.mode, &selection)?;
    let solver = OperatorSolver::new(&op)?;

    let fields = simulate_field(&built.spectrum, &built.sources, &built.grid)?;
    let clean = stack_columns(&fields.select_rows(selection.indices()));

    let estimates_initial = built.mode != RecoveryMode::InputOnly;
    let estimates_input = built.mode != RecoveryMode::InitialOnly;
    let initial_denom = normalizer(&built.sources.initial);
    let input_denom = normalizer(&built.sources.input);

    let mut trial_stats = Vec::with_capacity(scenario.trials);
    let mut initial_errors = Vec::new();
    let mut input_errors = Vec::new();
    let mut initial_estimate = None;
    let mut input_estimate = None;

    for trial in 0..scenario.trials {
        let y = observe(&clean, scenario.noise, mix_seed(scenario.seed, 0, trial as u64));
        let result = recover(&solver, &built.spectrum, &y)?;

        let initial_error = result.initial_field.as_ref().map(|estimate| {
            (estimate - &built.sources.initial).norm() / initial_denom
        });
        let input_error = result.external_input.as_ref().map(|estimate| {
            (estimate - &built.sources.input).norm() / input_denom
        });
        if let Some(e) = initial_error {
            initial_errors.push(e);
        }
        if let Some(e) = input_error {
            input_errors.push(e);
        }
        if trial == 0 {
            initial_estimate = result.initial_field.map(|v| v.as_slice().to_vec());
            input_estimate = result.external_input.map(|v| v.as_slice().to_vec());
        }
        trial_stats.push(TrialStats {
            trial,
            initial_error,
            input_error,
            residual_norm: result.residual_norm,
        });
    }

    Ok(RunReport {
        mode: built.mode.label().to_string(),
        vertex_count: built.spectrum.order(),
        sensors: selection.to_one_based(),
        observation_times: built.grid.times(),
        trials: scenario.trials,
        seed: scenario.seed,
        rmse_definition: RMSE_DEFINITION.to_string(),
        conditioning: solver.conditioning().clone(),
        initial_rmse: estimates_initial.then(|| summarize(&initial_errors)),
        input_rmse: estimates_input.then(|| summarize(&input_errors)),
        initial_estimate,
        input_estimate,
        trial_stats,
    })
}

fn observe(clean: &DVector<f64>, noise: NoiseSpec, seed: u64) -> DVector<f64> {
    match noise {
        NoiseSpec::None => clean.clone(),
        NoiseSpec::Gaussian { variance } => {
            let normal = Normal::new(0.0, variance.sqrt()).expect("validated at build");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            clean.map(|v| v + normal.sample(&mut rng))
        }
    }
}

/// One `(sensors, times)` configuration of a sweep. Infeasible cells
/// (not enough observations, or an operator that loses rank) keep their
/// coordinates but carry no numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub sensors: usize,
    pub times: usize,
    pub feasible: bool,
    pub rmse_mean: Option<f64>,
    pub rmse_stderr: Option<f64>,
    pub condition_number: Option<f64>,
}

/// Recovery error across a grid of sensor and time counts. The error
/// tracked is the initial-field estimate's when the scenario declares
/// one, otherwise the input estimate's. Cells are ordered with the
/// sensor axis outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub mode: String,
    pub k_values: Vec<usize>,
    pub t_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub rmse_definition: String,
    pub cells: Vec<SweepCell>,
}

/// Reruns the scenario for every combination of sensor count and
/// observation count, keeping graph, sources, and noise fixed.
///
/// The selection is re-resolved per cell: greedy placements adapt to
/// each grid, and random placements draw from a seed mixed with the
/// cell coordinates. Explicit selections cannot vary in size, so they
/// are rejected here.
pub fn rmse_sweep(
    scenario: &Scenario,
    k_values: &[usize],
    t_values: &[usize],
    base_dir: &Path,
) -> Result<SweepReport> {
    if matches!(scenario.selection, SelectionSpec::Explicit { .. }) {
        return Err(Error::InvalidArgument(
            "sweeping sensor counts needs a greedy or random selection policy".into(),
        ));
    }
    let built = scenario.build(base_dir)?;
    let n = built.spectrum.order();
    for &k in k_values {
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "sweep sensor count {k} is outside 1..={n}"
            )));
        }
    }
    if t_values.contains(&0) {
        return Err(Error::InvalidArgument(
            "sweep observation counts must be at least 1".into(),
        ));
    }

    let estimates_initial = built.mode != RecoveryMode::InputOnly;
    let truth = if estimates_initial {
        &built.sources.initial
    } else {
        &built.sources.input
    };
    let denom = normalizer(truth);

    let mut cells = Vec::with_capacity(k_values.len() * t_values.len());
    for &k in k_values {
        for &t in t_values {
            let grid = TimeGrid::new(scenario.grid.delta, t, scenario.grid.start_index)?;
            let cell_seed = mix_seed(scenario.seed, k as u64, t as u64);
            match sweep_cell(scenario, &built, &grid, k, t, cell_seed, denom) {
                Ok(cell) => cells.push(cell),
                Err(err) if err.is_infeasible() => cells.push(SweepCell {
                    sensors: k,
                    times: t,
                    feasible: false,
                    rmse_mean: None,
                    rmse_stderr: None,
                    condition_number: None,
                }),
                Err(err) => return Err(err),
            }
        }
    }

    Ok(SweepReport {
        mode: built.mode.label().to_string(),
        k_values: k_values.to_vec(),
        t_values: t_values.to_vec(),
        trials: scenario.trials,
        seed: scenario.seed,
        rmse_definition: RMSE_DEFINITION.to_string(),
        cells,
    })
}

fn sweep_cell(
    scenario: &Scenario,
    built: &BuiltScenario,
    grid: &TimeGrid,
    k: usize,
    t: usize,
    cell_seed: u64,
    denom: f64,
) -> Result<SweepCell> {
    let selection = match &scenario.selection {
        SelectionSpec::Explicit { .. } => unreachable!("rejected before sweeping"),
        SelectionSpec::Greedy { objective, .. } => crate::sampling::greedy_sensor_selection(
            &built.spectrum,
            grid,
            k,
            *objective,
        )?,
        SelectionSpec::Random { seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(*seed, k as u64, t as u64));
            random_selection(k, built.spectrum.order(), &mut rng)?
        }
    };

    let op = observation_operator(&built.spectrum, grid, built.mode, &selection)?;
    let solver = OperatorSolver::new(&op)?;

    let fields = simulate_field(&built.spectrum, &built.sources, grid)?;
    let clean = stack_columns(&fields.select_rows(selection.indices()));
    let estimates_initial = built.mode != RecoveryMode::InputOnly;

    let mut errors = Vec::with_capacity(scenario.trials);
    for trial in 0..scenario.trials {
        let y = observe(&clean, scenario.noise, mix_seed(cell_seed, 1, trial as u64));
        let result = recover(&solver, &built.spectrum, &y)?;
        let estimate = if estimates_initial {
            result.initial_field.as_ref().expect("mode estimates the initial field")
        } else {
            result.external_input.as_ref().expect("mode estimates the input")
        };
        let truth = if estimates_initial {
            &built.sources.initial
        } else {
            &built.sources.input
        };
        errors.push((estimate - truth).norm() / denom);
    }
    let summary = summarize(&errors);
    Ok(SweepCell {
        sensors: k,
        times: t,
        feasible: true,
        rmse_mean: Some(summary.rmse),
        rmse_stderr: Some(summary.stderr),
        condition_number: Some(solver.conditioning().condition_number),
    })
}

/// Output encodings for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Renders a run report. CSV keeps only the per-trial table under the
/// header `trial,initial_error,input_error,residual_norm`; JSON carries
/// the whole report.
pub fn run_report_to_string(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_pretty_json(report),
        ReportFormat::Csv => {
            let mut out = String::from("trial,initial_error,input_error,residual_norm\n");
            for row in &report.trial_stats {
                let initial = row.initial_error.map(|e| e.to_string()).unwrap_or_default();
                let input = row.input_error.map(|e| e.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    row.trial, initial, input, row.residual_norm
                ));
            }
            out
        }
    }
}

/// Renders a sweep report. CSV rows follow the header
/// `k,t,rmse_mean,rmse_stderr,condition_number`, with infeasible cells
/// leaving the numeric fields empty.
pub fn sweep_report_to_string(report: &SweepReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_pretty_json(report),
        ReportFormat::Csv => {
            let mut out = String::from("k,t,rmse_mean,rmse_stderr,condition_number\n");
            for cell in &report.cells {
                let field = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    cell.sensors,
                    cell.times,
                    field(cell.rmse_mean),
                    field(cell.rmse_stderr),
                    field(cell.condition_number)
                ));
            }
            out
        }
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize cleanly");
    text.push('\n');
    text
}

//! Declarative experiment configuration.
//!
//! A [`Scenario`] file pins down everything a run needs: the graph (a
//! generated plate, a mesh file, or a graph file), the observation grid,
//! how sensors are chosen, what drives the diffusion, and the noise and
//! trial counts for Monte Carlo runs. Scenarios are plain JSON and every
//! vertex index in them is 1-based, matching the graph and mesh file
//! formats.
//!
//! What gets recovered is not stated explicitly; it follows from which
//! sources are declared. A zero input means only the initial field is
//! unknown; a zero initial field with a nonzero input means only the
//! input is unknown; declaring both makes the problem joint, which is
//! only solvable when the input is declared bandlimited. The inference
//! looks at the declaration, not the numbers, so a dense input of all
//! zeros still counts as an unknown worth estimating.

use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{SourceConfig, TimeGrid};
use crate::error::{Error, Result};
use crate::graph::{build_laplacian, load_graph};
use crate::mesh::{cotan_laplacian, generate_plate_with_cavity, load_mesh, Cavity};
use crate::sampling::{
    greedy_sensor_selection, random_selection, SelectionObjective, VertexSelection,
};
use crate::spectrum::{eigendecompose, Spectrum};

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub graph: GraphSpec,
    pub grid: GridSpec,
    pub selection: SelectionSpec,
    pub sources: SourcesSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_trials() -> usize {
    1
}

/// Where the graph comes from. File paths are resolved relative to the
/// scenario file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Plate(PlateSpec),
    MeshFile { path: String },
    GraphFile { path: String },
}

/// Rectangular plate with an optional cavity, triangulated on a
/// structured grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateSpec {
    #[serde(default = "default_extent")]
    pub width: f64,
    #[serde(default = "default_extent")]
    pub height: f64,
    #[serde(default = "default_cells")]
    pub nx: usize,
    #[serde(default = "default_cells")]
    pub ny: usize,
    #[serde(default)]
    pub cavity: Option<Cavity>,
}

fn default_extent() -> f64 {
    4.0
}

fn default_cells() -> usize {
    12
}

impl Default for PlateSpec {
    fn default() -> Self {
        PlateSpec {
            width: default_extent(),
            height: default_extent(),
            nx: default_cells(),
            ny: default_cells(),
            cavity: None,
        }
    }
}

/// Observation times, passed through to [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub delta: f64,
    pub count: usize,
    #[serde(default = "default_start_index")]
    pub start_index: usize,
}

fn default_start_index() -> usize {
    1
}

/// How observed vertices are picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionSpec {
    /// Fixed list of 1-based vertex indices.
    Explicit { vertices: Vec<usize> },
    /// Greedy placement optimizing the initial-field operator.
    Greedy {
        k: usize,
        #[serde(default)]
        objective: SelectionObjective,
    },
    /// Uniform draw without replacement, with its own seed so the
    /// placement is reproducible independently of the noise.
    Random { k: usize, seed: u64 },
}

impl SelectionSpec {
    /// Number of sensors the spec will produce, when it is fixed a
    /// priori.
    pub fn size(&self) -> usize {
        match self {
            SelectionSpec::Explicit { vertices } => vertices.len(),
            SelectionSpec::Greedy { k, .. } | SelectionSpec::Random { k, .. } => *k,
        }
    }
}

/// The two source declarations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesSpec {
    pub initial: FieldSpec,
    pub input: InputSpec,
}

/// A vertex-domain field, by declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    /// `(vertex, value)` pairs, 1-based.
    Sparse { entries: Vec<(usize, f64)> },
    Dense { values: Vec<f64> },
}

impl FieldSpec {
    pub fn is_zero(&self) -> bool {
        matches!(self, FieldSpec::Zero)
    }

    fn materialize(&self, n: usize) -> Result<DVector<f64>> {
        match self {
            FieldSpec::Zero => Ok(DVector::zeros(n)),
            FieldSpec::Sparse { entries } => {
                if entries.is_empty() {
                    return Err(Error::Scenario(
                        "sparse field has no entries; declare it zero instead".into(),
                    ));
                }
                let mut v = DVector::zeros(n);
                let mut seen = vec![false; n];
                for &(vertex, value) in entries {
                    if vertex == 0 || vertex > n {
                        return Err(Error::Scenario(format!(
                            "sparse entry at vertex {vertex}; valid indices are 1..={n}"
                        )));
                    }
                    if !value.is_finite() {
                        return Err(Error::Scenario(format!(
                            "sparse entry at vertex {vertex} is not finite"
                        )));
                    }
                    if std::mem::replace(&mut seen[vertex - 1], true) {
                        return Err(Error::Scenario(format!(
                            "vertex {vertex} appears twice in a sparse field"
                        )));
                    }
                    v[vertex - 1] = value;
                }
                Ok(v)
            }
            FieldSpec::Dense { values } => {
                if values.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: "dense field versus graph",
                        expected: n,
                        actual: values.len(),
                    });
                }
                Ok(DVector::from_column_slice(values))
            }
        }
    }
}

/// The constant external input, by declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Zero,
    /// A combination of the `bandwidth` lowest-frequency eigenvectors.
    Bandlimited {
        bandwidth: usize,
        coefficients: Vec<f64>,
    },
    Dense { values: Vec<f64> },
}

impl InputSpec {
    pub fn is_zero(&self) -> bool {
        matches!(self, InputSpec::Zero)
    }

    fn materialize(&self, spectrum: &Spectrum) -> Result<DVector<f64>> {
        let n = spectrum.order();
        match self {
            InputSpec::Zero => Ok(DVector::zeros(n)),
            InputSpec::Bandlimited {
                bandwidth,
                coefficients,
            } => {
                if *bandwidth == 0 || *bandwidth > n {
                    return Err(Error::Scenario(format!(
                        "input bandwidth must be in 1..={n}, got {bandwidth}"
                    )));
                }
                if coefficients.len() != *bandwidth {
                    return Err(Error::Scenario(format!(
                        "bandwidth {bandwidth} input declares {} coefficients",
                        coefficients.len()
                    )));
                }
                let c = DVector::from_column_slice(coefficients);
                Ok(spectrum.eigenvectors().columns(0, *bandwidth) * c)
            }
            InputSpec::Dense { values } => {
                if values.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: "dense input versus graph",
                        expected: n,
                        actual: values.len(),
                    });
                }
                Ok(DVector::from_column_slice(values))
            }
        }
    }
}

/// Observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    None,
    Gaussian { variance: f64 },
}

/// Which unknowns a scenario declares, inferred from its sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMode {
    InitialOnly,
    InputOnly,
    Joint { bandwidth: usize },
}

impl RecoveryMode {
    pub fn label(&self) -> &'static str {
        match self {
            RecoveryMode::InitialOnly => "initial_only",
            RecoveryMode::InputOnly => "input_only",
            RecoveryMode::Joint { .. } => "joint",
        }
    }
}

/// A scenario with its graph analyzed and sources materialized, ready
/// for operators and recovery.
#[derive(Debug)]
pub struct BuiltScenario {
    pub spectrum: Spectrum,
    pub grid: TimeGrid,
    pub sources: SourceConfig,
    pub mode: RecoveryMode,
}

impl Scenario {
    /// Validates the scenario and assembles the spectral system it
    /// describes. `base_dir` anchors any relative file paths.
    pub fn build(&self, base_dir: &Path) -> Result<BuiltScenario> {
        if self.trials == 0 {
            return Err(Error::Scenario("trial count must be at least 1".into()));
        }
        if let NoiseSpec::Gaussian { variance } = self.noise {
            if !variance.is_finite() || variance < 0.0 {
                return Err(Error::Scenario(format!(
                    "noise variance must be nonnegative, got {variance}"
                )));
            }
        }

        let laplacian = match &self.graph {
            GraphSpec::Plate(plate) => {
                let mesh = generate_plate_with_cavity(
                    plate.width,
                    plate.height,
                    plate.nx,
                    plate.ny,
                    plate.cavity,
                )?;
                cotan_laplacian(&mesh)
            }
            GraphSpec::MeshFile { path } => cotan_laplacian(&load_mesh(&base_dir.join(path))?),
            GraphSpec::GraphFile { path } => {
                let graph = load_graph(&base_dir.join(path))?;
                if !graph.is_connected() {
                    return Err(Error::Disconnected(
                        "graph file describes a disconnected graph".into(),
                    ));
                }
                build_laplacian(&graph)
            }
        };
        let spectrum = eigendecompose(&laplacian)?;
        let grid = TimeGrid::new(self.grid.delta, self.grid.count, self.grid.start_index)?;

        let mode = match (self.sources.initial.is_zero(), &self.sources.input) {
            (_, InputSpec::Zero) => RecoveryMode::InitialOnly,
            (true, _) => RecoveryMode::InputOnly,
            (false, InputSpec::Bandlimited { bandwidth, .. }) => RecoveryMode::Joint {
                bandwidth: *bandwidth,
            },
            (false, InputSpec::Dense { .. }) => {
                return Err(Error::Scenario(
                    "recovering both sources needs a bandlimited input declaration".into(),
                ))
            }
        };

        let sources = SourceConfig::new(
            self.sources.initial.materialize(spectrum.order())?,
            self.sources.input.materialize(&spectrum)?,
        )?;
        Ok(BuiltScenario {
            spectrum,
            grid,
            sources,
            mode,
        })
    }

    /// Resolves the selection spec against a built scenario.
    pub fn resolve_selection(&self, built: &BuiltScenario) -> Result<VertexSelection> {
        let n = built.spectrum.order();
        match &self.selection {
            SelectionSpec::Explicit { vertices } => VertexSelection::from_one_based(vertices, n),
            SelectionSpec::Greedy { k, objective } => {
                greedy_sensor_selection(&built.spectrum, &built.grid, *k, *objective)
            }
            SelectionSpec::Random { k, seed } => {
                random_selection(*k, n, &mut ChaCha8Rng::seed_from_u64(*seed))
            }
        }
    }
}

pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    Ok(serde_json::from_str(text)?)
}

pub fn scenario_to_json(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(scenario).expect("scenario serialization cannot fail")
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    scenario_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, scenario_to_json(scenario))?)
}

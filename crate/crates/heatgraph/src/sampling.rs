//! Observation operators for subsampled diffusion, and the sensor
//! placement that keeps them well conditioned.
//!
//! Observing the field at `K` vertices over `T` grid times gives a
//! `K x T` matrix `Y = Phi X`. Because every mode evolves by a scalar
//! weight, the stacked observations are linear in the spectral unknowns
//! through a Khatri-Rao product: with `A[k, i]` the weight of mode `i`
//! at time `t_k` and `Phi U` the sampled eigenvectors,
//!
//! ```text
//! vec(Y) = khatri_rao(A, Phi U) * x_f(0)
//! ```
//!
//! and likewise with the input kernel for a constant external input. The
//! joint operator concatenates the decay block with the leading columns
//! of the input block, one column per admitted low-frequency input mode.
//!
//! Column `i` of any of these operators is `a_i (kron) (Phi u_i)`, so it
//! vanishes whenever the selected vertices all sit outside the support
//! of eigenvector `i`; such configurations are rejected outright instead
//! of surfacing later as a mysteriously singular solve.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::diffusion::{heat_kernel_weights, input_kernel_weights, TimeGrid};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// Any column of the sampled eigenvector matrix whose largest entry is
/// at most this is treated as identically zero and rejected.
pub const ZERO_COLUMN_TOL: f64 = 1e-13;

/// A set of observed vertices, stored 0-based and sorted. `total` is the
/// number of vertices in the underlying graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSelection {
    indices: Vec<usize>,
    total: usize,
}

impl VertexSelection {
    pub fn new(mut indices: Vec<usize>, total: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("selection is empty".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("selection repeats a vertex".into()));
        }
        if *indices.last().unwrap() >= total {
            return Err(Error::InvalidArgument(format!(
                "selection references vertex {} of {total}",
                indices.last().unwrap()
            )));
        }
        Ok(VertexSelection { indices, total })
    }

    /// Accepts the 1-based indices used in files and on the command line.
    pub fn from_one_based(indices: &[usize], total: usize) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::InvalidArgument(
                "vertex index 0; selections are 1-based".into(),
            ));
        }
        Self::new(indices.iter().map(|&i| i - 1).collect(), total)
    }

    /// Every vertex observed.
    pub fn full(total: usize) -> Self {
        VertexSelection {
            indices: (0..total).collect(),
            total,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|&i| i + 1).collect()
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// Draws `k` distinct vertices uniformly at random.
pub fn random_selection<R: Rng>(k: usize, total: usize, rng: &mut R) -> Result<VertexSelection> {
    if k == 0 || k > total {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {k} of {total} vertices"
        )));
    }
    let picked = rand::seq::index::sample(rng, total, k).into_vec();
    VertexSelection::new(picked, total)
}

/// `T x N` matrix of decay weights, `exp(-lambda_i t_k)`.
pub fn heat_kernel_matrix(spectrum: &Spectrum, grid: &TimeGrid) -> DMatrix<f64> {
    kernel_matrix(spectrum, grid, heat_kernel_weights)
}

/// `T x N` matrix of accumulation weights, `f_{t_k}(lambda_i)`.
pub fn input_kernel_matrix(spectrum: &Spectrum, grid: &TimeGrid) -> DMatrix<f64> {
    kernel_matrix(spectrum, grid, input_kernel_weights)
}

fn kernel_matrix(
    spectrum: &Spectrum,
    grid: &TimeGrid,
    weights: fn(&Spectrum, f64) -> DVector<f64>,
) -> DMatrix<f64> {
    let times = grid.times();
    let mut m = DMatrix::zeros(times.len(), spectrum.order());
    for (k, &t) in times.iter().enumerate() {
        let row = weights(spectrum, t);
        for i in 0..spectrum.order() {
            m[(k, i)] = row[i];
        }
    }
    m
}

/// Columnwise Khatri-Rao product: column `j` of the result is the
/// Kronecker product of column `j` of `outer` with column `j` of
/// `inner`, so `outer` indexes the blocks.
///
/// This is what turns a separable bilinear model into a linear one:
/// `vec(C diag(b) A^T) = khatri_rao(A, C) * b` for column-major `vec`.
pub fn khatri_rao(outer: &DMatrix<f64>, inner: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if outer.ncols() != inner.ncols() {
        return Err(Error::DimensionMismatch {
            context: "khatri-rao factor columns",
            expected: outer.ncols(),
            actual: inner.ncols(),
        });
    }
    let (bo, bi) = (outer.nrows(), inner.nrows());
    let mut m = DMatrix::zeros(bo * bi, outer.ncols());
    for j in 0..outer.ncols() {
        for k in 0..bo {
            for r in 0..bi {
                m[(k * bi + r, j)] = outer[(k, j)] * inner[(r, j)];
            }
        }
    }
    Ok(m)
}

/// Stacks the columns of a matrix into one vector, top to bottom and
/// left to right. Matches the `vec` convention used by [`khatri_rao`].
pub fn stack_columns(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Which unknowns an observation operator maps to observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// Spectrum of the initial field; `N` unknowns.
    InitialOnly,
    /// Spectrum of the constant external input; `N` unknowns.
    InputOnly,
    /// Initial spectrum plus the `bandwidth` lowest-frequency input
    /// coefficients; `N + bandwidth` unknowns.
    JointBandlimited { bandwidth: usize },
}

/// A linear map from spectral unknowns to stacked observations, together
/// with the sampling configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationOperator {
    matrix: DMatrix<f64>,
    kind: OperatorKind,
    grid: TimeGrid,
    selection: VertexSelection,
}

impl ObservationOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn selection(&self) -> &VertexSelection {
        &self.selection
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn unknowns(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Rows of the eigenvector matrix at the selected vertices, with the
/// zero-column rejection described at the module level.
fn sampled_eigenvectors(spectrum: &Spectrum, selection: &VertexSelection) -> Result<DMatrix<f64>> {
    if selection.total() != spectrum.order() {
        return Err(Error::DimensionMismatch {
            context: "selection versus spectrum",
            expected: spectrum.order(),
            actual: selection.total(),
        });
    }
    let sampled = spectrum.eigenvectors().select_rows(selection.indices());
    for j in 0..sampled.ncols() {
        let peak = sampled.column(j).amax();
        if peak <= ZERO_COLUMN_TOL {
            return Err(Error::ZeroColumn { column: j + 1 });
        }
    }
    Ok(sampled)
}

/// Operator from the initial field's spectrum to the observations.
pub fn initial_field_operator(
    spectrum: &Spectrum,
    grid: &TimeGrid,
    selection: &VertexSelection,
) -> Result<ObservationOperator> {
    let sampled = sampled_eigenvectors(spectrum, selection)?;
    let matrix = khatri_rao(&heat_kernel_matrix(spectrum, grid), &sampled)?;
    Ok(ObservationOperator {
        matrix,
        kind: OperatorKind::InitialOnly,
        grid: *grid,
        selection: selection.clone(),
    })
}

/// Operator from the external input's spectrum to the observations.
pub fn external_input_operator(
    spectrum: &Spectrum,
    grid: &TimeGrid,
    selection: &VertexSelection,
) -> Result<ObservationOperator> {
    let sampled = sampled_eigenvectors(spectrum, selection)?;
    let matrix = khatri_rao(&input_kernel_matrix(spectrum, grid), &sampled)?;
    Ok(ObservationOperator {
        matrix,
        kind: OperatorKind::InputOnly,
        grid: *grid,
        selection: selection.clone(),
    })
}

/// Whether building an operator with fewer observations than unknowns is
/// an error or an explicitly requested analysis configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnderdeterminedPolicy {
    Reject,
    Proceed,
}

/// Operator for simultaneous recovery: all `N` initial coefficients plus
/// the `bandwidth` lowest-frequency input coefficients.
///
/// Without the bandwidth restriction the two blocks overlap enough that
/// the stacked operator can never reach full column rank, no matter how
/// many observations are taken; restricting the input to a known
/// low-frequency band is what makes the joint problem solvable. By
/// default a configuration with fewer rows than unknowns is rejected;
/// pass [`UnderdeterminedPolicy::Proceed`] to build it anyway, e.g. to
/// inspect its rank.
pub fn joint_operator(
    spectrum: &Spectrum,
    grid: &TimeGrid,
    selection: &VertexSelection,
    bandwidth: usize,
    policy: UnderdeterminedPolicy,
) -> Result<ObservationOperator> {
    let n = spectrum.order();
    if bandwidth == 0 || bandwidth > n {
        return Err(Error::InvalidArgument(format!(
            "input bandwidth must be in 1..={n}, got {bandwidth}"
        )));
    }
    let sampled = sampled_eigenvectors(spectrum, selection)?;
    let decay_block = khatri_rao(&heat_kernel_matrix(spectrum, grid), &sampled)?;
    let input_block = khatri_rao(&input_kernel_matrix(spectrum, grid), &sampled)?;

    let rows = decay_block.nrows();
    let unknowns = n + bandwidth;
    if rows < unknowns && policy == UnderdeterminedPolicy::Reject {
        return Err(Error::Underdetermined { rows, unknowns });
    }

    let mut matrix = DMatrix::zeros(rows, unknowns);
    matrix.view_mut((0, 0), (rows, n)).copy_from(&decay_block);
    matrix
        .view_mut((0, n), (rows, bandwidth))
        .copy_from(&input_block.columns(0, bandwidth));
    Ok(ObservationOperator {
        matrix,
        kind: OperatorKind::JointBandlimited { bandwidth },
        grid: *grid,
        selection: selection.clone(),
    })
}

/// Scale-relative cutoff below which a singular value counts as zero.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Singular-value summary of a matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConditioningReport {
    pub rows: usize,
    pub cols: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub condition_number: f64,
    pub numerical_rank: usize,
    pub rank_tolerance: f64,
}

pub fn conditioning_report(m: &DMatrix<f64>) -> ConditioningReport {
    let singular = m.singular_values();
    let sigma_max = singular[0];
    let sigma_min = singular[singular.len() - 1];
    let tol = rank_tolerance(m.nrows(), m.ncols(), sigma_max);
    ConditioningReport {
        rows: m.nrows(),
        cols: m.ncols(),
        sigma_max,
        sigma_min,
        condition_number: if sigma_min > 0.0 {
            sigma_max / sigma_min
        } else {
            f64::INFINITY
        },
        numerical_rank: singular.iter().filter(|&&s| s > tol).count(),
        rank_tolerance: tol,
    }
}

/// What the greedy placement optimizes.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum SelectionObjective {
    /// Minimize the condition number of the initial-field operator.
    MinCondition,
    /// Maximize its smallest singular value.
    #[default]
    MaxMinSingular,
}

/// Forward greedy sensor placement for the initial-field operator.
///
/// Adds one vertex at a time, each time picking the candidate whose
/// augmented operator scores best. Scores come from the operator's Gram
/// matrix: adding vertex `v` adds `diag(u_v) A^T A diag(u_v)`, where
/// `u_v` is row `v` of the eigenvector matrix, so each candidate costs
/// one rank-structured update plus a symmetric eigenvalue sweep instead
/// of assembling and decomposing the full operator.
///
/// Until the operator can reach full column rank both objectives fall
/// back to maximizing the smallest achievable singular value, which
/// pushes the rank up as fast as possible. Ties break to the lowest
/// vertex index, so the placement is deterministic.
pub fn greedy_sensor_selection(
    spectrum: &Spectrum,
    grid: &TimeGrid,
    k: usize,
    objective: SelectionObjective,
) -> Result<VertexSelection> {
    let n = spectrum.order();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot place {k} sensors on {n} vertices"
        )));
    }
    let a = heat_kernel_matrix(spectrum, grid);
    let weight = a.tr_mul(&a);
    let u = spectrum.eigenvectors();
    let t = grid.count();

    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut candidate = DMatrix::<f64>::zeros(n, n);

    for step in 0..k {
        let rows = (step + 1) * t;
        let mut best: Option<(usize, bool, f64)> = None;
        for v in (0..n).filter(|&v| !taken[v]) {
            for j in 0..n {
                for i in 0..n {
                    candidate[(i, j)] = gram[(i, j)] + weight[(i, j)] * u[(v, i)] * u[(v, j)];
                }
            }
            let mut eigs: Vec<f64> = candidate.symmetric_eigenvalues().iter().copied().collect();
            eigs.sort_unstable_by(|a, b| b.total_cmp(a));
            let sigma_max = eigs[0].max(0.0).sqrt();
            let sigma_thin = eigs[rows.min(n) - 1].max(0.0).sqrt();
            let full = rows >= n && sigma_thin > rank_tolerance(rows, n, sigma_max);
            let value = match objective {
                SelectionObjective::MaxMinSingular => sigma_thin,
                SelectionObjective::MinCondition => {
                    if full {
                        -(sigma_max / sigma_thin)
                    } else {
                        sigma_thin
                    }
                }
            };
            let improves = match best {
                None => true,
                Some((_, best_full, best_value)) => {
                    (full && !best_full) || (full == best_full && value > best_value)
                }
            };
            if improves {
                best = Some((v, full, value));
            }
        }
        let (v, _, _) = best.expect("at least one untaken vertex remains");
        taken[v] = true;
        chosen.push(v);
        for j in 0..n {
            for i in 0..n {
                gram[(i, j)] += weight[(i, j)] * u[(v, i)] * u[(v, j)];
            }
        }
    }
    VertexSelection::new(chosen, n)
}

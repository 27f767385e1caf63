//! Least-squares recovery of diffusion sources from stacked
//! observations.
//!
//! Solving goes through a singular value decomposition of the
//! observation operator, never through the normal equations, which
//! would square the condition number. The decomposition is factored
//! once per operator and reused across solves, which is what makes
//! repeated noisy trials against the same operator cheap.
//!
//! A solve is only attempted when the operator has full column rank at
//! the scale-relative tolerance; underdetermined or rank-deficient
//! configurations are reported as errors carrying the numbers needed to
//! diagnose them. [`identifiability_check`] answers the same question
//! without committing to a solve.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::sampling::{rank_tolerance, ConditioningReport, ObservationOperator, OperatorKind};
use crate::spectrum::Spectrum;

/// Everything a recovery run produces. Fields that the operator kind
/// does not estimate stay `None`; for joint recovery the input spectrum
/// is padded with zeros above the admitted bandwidth so that it always
/// has one coefficient per graph frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub initial_field: Option<DVector<f64>>,
    pub initial_spectral: Option<DVector<f64>>,
    pub external_input: Option<DVector<f64>>,
    pub input_spectral: Option<DVector<f64>>,
    pub residual_norm: f64,
    pub conditioning: ConditioningReport,
}

/// A factored observation operator, ready to solve against many
/// right-hand sides.
#[derive(Debug)]
pub struct OperatorSolver {
    matrix: DMatrix<f64>,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    kind: OperatorKind,
    conditioning: ConditioningReport,
}

impl OperatorSolver {
    /// Factors the operator and verifies it is solvable: at least as
    /// many observations as unknowns, and full column rank at the
    /// scale-relative tolerance.
    pub fn new(op: &ObservationOperator) -> Result<Self> {
        let (rows, cols) = (op.rows(), op.unknowns());
        if rows < cols {
            return Err(Error::Underdetermined {
                rows,
                unknowns: cols,
            });
        }
        let svd = SVD::try_new(op.matrix().clone(), true, true, f64::EPSILON, 0)
            .expect("unbounded-iteration SVD converges");
        let singular = &svd.singular_values;
        let sigma_max = singular[0];
        let sigma_min = singular[singular.len() - 1];
        let tol = rank_tolerance(rows, cols, sigma_max);
        let rank = singular.iter().filter(|&&s| s > tol).count();
        if rank < cols {
            return Err(Error::RankDeficient {
                rank,
                unknowns: cols,
                sigma_min,
            });
        }
        Ok(OperatorSolver {
            matrix: op.matrix().clone(),
            svd,
            kind: op.kind(),
            conditioning: ConditioningReport {
                rows,
                cols,
                sigma_max,
                sigma_min,
                condition_number: sigma_max / sigma_min,
                numerical_rank: rank,
                rank_tolerance: tol,
            },
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn conditioning(&self) -> &ConditioningReport {
        &self.conditioning
    }

    pub fn rows(&self) -> usize {
        self.conditioning.rows
    }

    pub fn unknowns(&self) -> usize {
        self.conditioning.cols
    }

    /// Minimum-norm least-squares solution for one observation vector.
    pub fn solve(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.rows() {
            return Err(Error::DimensionMismatch {
                context: "observations versus operator rows",
                expected: self.rows(),
                actual: y.len(),
            });
        }
        let x = self
            .svd
            .solve(y, self.conditioning.rank_tolerance)
            .expect("solver was built with both singular bases");
        Ok(DVector::from(x))
    }

    /// Norm of `A x - y`, the part of the observations the model could
    /// not explain.
    pub fn residual_norm(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        (&self.matrix * x - y).norm()
    }
}

/// Solves for the unknowns and reassembles vertex-domain estimates
/// according to the operator kind.
pub fn recover(
    solver: &OperatorSolver,
    spectrum: &Spectrum,
    y: &DVector<f64>,
) -> Result<RecoveryResult> {
    let solution = solver.solve(y)?;
    let residual_norm = solver.residual_norm(y, &solution);
    let n = spectrum.order();

    let mut result = RecoveryResult {
        initial_field: None,
        initial_spectral: None,
        external_input: None,
        input_spectral: None,
        residual_norm,
        conditioning: solver.conditioning().clone(),
    };
    match solver.kind() {
        OperatorKind::InitialOnly => {
            result.initial_field = Some(spectrum.synthesize(&solution)?);
            result.initial_spectral = Some(solution);
        }
        OperatorKind::InputOnly => {
            result.external_input = Some(spectrum.synthesize(&solution)?);
            result.input_spectral = Some(solution);
        }
        OperatorKind::JointBandlimited { bandwidth } => {
            let initial_spectral = DVector::from(solution.rows(0, n));
            let mut input_spectral = DVector::zeros(n);
            input_spectral
                .rows_mut(0, bandwidth)
                .copy_from(&solution.rows(n, bandwidth));
            result.initial_field = Some(spectrum.synthesize(&initial_spectral)?);
            result.external_input = Some(spectrum.synthesize(&input_spectral)?);
            result.initial_spectral = Some(initial_spectral);
            result.input_spectral = Some(input_spectral);
        }
    }
    Ok(result)
}

/// One-shot recovery of the initial field from an initial-only
/// operator's observations.
pub fn recover_initial_field(
    op: &ObservationOperator,
    spectrum: &Spectrum,
    y: &DVector<f64>,
) -> Result<RecoveryResult> {
    expect_kind(op, OperatorKind::InitialOnly)?;
    recover(&OperatorSolver::new(op)?, spectrum, y)
}

/// One-shot recovery of the constant external input.
pub fn recover_external_input(
    op: &ObservationOperator,
    spectrum: &Spectrum,
    y: &DVector<f64>,
) -> Result<RecoveryResult> {
    expect_kind(op, OperatorKind::InputOnly)?;
    recover(&OperatorSolver::new(op)?, spectrum, y)
}

/// One-shot recovery of both sources from a joint operator.
pub fn recover_joint(
    op: &ObservationOperator,
    spectrum: &Spectrum,
    y: &DVector<f64>,
) -> Result<RecoveryResult> {
    if !matches!(op.kind(), OperatorKind::JointBandlimited { .. }) {
        return Err(Error::InvalidArgument(format!(
            "expected a joint operator, got {:?}",
            op.kind()
        )));
    }
    recover(&OperatorSolver::new(op)?, spectrum, y)
}

fn expect_kind(op: &ObservationOperator, expected: OperatorKind) -> Result<()> {
    if op.kind() != expected {
        return Err(Error::InvalidArgument(format!(
            "expected a {expected:?} operator, got {:?}",
            op.kind()
        )));
    }
    Ok(())
}

/// Whether a configuration pins down its unknowns uniquely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Identifiability {
    Identifiable,
    NotIdentifiable {
        numerical_rank: usize,
        unknowns: usize,
        sigma_min: f64,
        /// True when there are outright fewer observations than
        /// unknowns, as opposed to enough observations that fail to
        /// be independent.
        underdetermined: bool,
    },
}

/// Rank test for an observation operator, without solving anything.
pub fn identifiability_check(op: &ObservationOperator) -> Identifiability {
    let report = crate::sampling::conditioning_report(op.matrix());
    let underdetermined = op.rows() < op.unknowns();
    if !underdetermined && report.numerical_rank == op.unknowns() {
        Identifiability::Identifiable
    } else {
        Identifiability::NotIdentifiable {
            numerical_rank: report.numerical_rank,
            unknowns: op.unknowns(),
            sigma_min: report.sigma_min,
            underdetermined,
        }
    }
}

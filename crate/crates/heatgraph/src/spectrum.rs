//! Spectral decomposition of graph Laplacians and the graph Fourier
//! transform.
//!
//! [`eigendecompose`] wraps a dense symmetric eigensolver and normalizes
//! its output into a canonical [`Spectrum`]: eigenvalues ascending,
//! orthonormal eigenvector columns, near-zero eigenvalues clamped to
//! exactly zero, and a deterministic sign per eigenvector (the entry of
//! largest magnitude is positive, ties broken by lowest index). Two runs
//! on the same Laplacian therefore produce bit-identical spectra.
//!
//! The canonical form matters downstream: observation operators and
//! recovered spectral coefficients are only reproducible if the basis is.
//! Note that when eigenvalues repeat, the basis within the shared
//! eigenspace is still solver-dependent up to rotation; use
//! [`Spectrum::has_distinct_eigenvalues`] when that distinction matters.
//! Recovery does not require distinctness; rank checks on the assembled
//! operators decide solvability either way.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Laplacian;

/// Largest tolerated deviation of `UᵀU` from the identity, entrywise.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Largest tolerated relative Frobenius error of `U Λ Uᵀ` against `L`.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Base tolerance for treating an eigenvalue as zero, scaled by the
/// spectral radius when that exceeds one.
pub const EIGENVALUE_ZERO_TOL: f64 = 1e-10;
/// Default relative gap below which two eigenvalues count as repeated.
pub const DISTINCT_EIGENVALUE_TOL: f64 = 1e-9;

/// Eigendecomposition `L = U Λ Uᵀ` of a graph Laplacian, in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    /// Number of vertices (and of spectral components).
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues in ascending order; for a connected graph the first is
    /// exactly zero and the rest are positive.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, aligned with `eigenvalues`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Forward transform `Uᵀ x`: vertex values to spectral coefficients.
    pub fn analyze(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x, "analyze input")?;
        Ok(self.eigenvectors.tr_mul(x))
    }

    /// Inverse transform `U x_f`: spectral coefficients to vertex values.
    pub fn synthesize(&self, coefficients: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(coefficients, "synthesize input")?;
        Ok(&self.eigenvectors * coefficients)
    }

    /// True when consecutive eigenvalues are separated by more than
    /// `tol * max(1, largest eigenvalue)`.
    pub fn has_distinct_eigenvalues(&self, tol: f64) -> bool {
        let scale = self.max_eigenvalue().abs().max(1.0);
        self.eigenvalues
            .as_slice()
            .windows(2)
            .all(|w| w[1] - w[0] > tol * scale)
    }

    fn check_len(&self, v: &DVector<f64>, context: &'static str) -> Result<()> {
        if v.len() != self.order() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.order(),
                actual: v.len(),
            });
        }
        Ok(())
    }
}

/// Decomposes a Laplacian into its canonical [`Spectrum`].
///
/// Fails if the eigensolver does not converge, if any eigenvalue is
/// meaningfully negative (the Laplacian of a weighted undirected graph is
/// positive semidefinite), or if the produced basis violates the
/// orthonormality or reconstruction tolerances.
pub fn eigendecompose(laplacian: &Laplacian) -> Result<Spectrum> {
    let l = laplacian.matrix();
    let n = l.nrows();
    let eigen = nalgebra::SymmetricEigen::try_new(l.clone(), f64::EPSILON, 200 * n.max(4))
        .ok_or_else(|| Error::EigenFailure {
            order: n,
            residual: off_diagonal_norm(l),
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));

    let mut values = DVector::<f64>::zeros(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eigen.eigenvalues[src];
        vectors.set_column(dst, &eigen.eigenvectors.column(src));
    }

    let scale = values.amax().max(1.0);
    let zero_tol = EIGENVALUE_ZERO_TOL * scale;
    if values[0] < -zero_tol {
        return Err(Error::SpectrumInvariant(format!(
            "negative eigenvalue {:.3e}; Laplacian is not positive semidefinite",
            values[0]
        )));
    }
    for v in values.iter_mut() {
        if v.abs() <= zero_tol {
            *v = 0.0;
        }
    }

    canonical_signs(&mut vectors);

    let gram_dev = {
        let mut g = vectors.tr_mul(&vectors);
        for i in 0..n {
            g[(i, i)] -= 1.0;
        }
        g.amax()
    };
    if gram_dev > ORTHONORMALITY_TOL {
        return Err(Error::SpectrumInvariant(format!(
            "eigenvector basis deviates from orthonormality by {gram_dev:.3e}"
        )));
    }

    let recon = &vectors * DMatrix::from_diagonal(&values) * vectors.transpose();
    let err = (&recon - l).norm();
    let l_norm = l.norm();
    let ok = if l_norm > 0.0 {
        err <= RECONSTRUCTION_TOL * l_norm
    } else {
        err <= f64::EPSILON
    };
    if !ok {
        return Err(Error::SpectrumInvariant(format!(
            "reconstruction error {err:.3e} exceeds {RECONSTRUCTION_TOL:.0e} relative"
        )));
    }

    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Flips eigenvector signs so the entry of largest magnitude is positive;
/// among tied magnitudes the lowest index decides.
fn canonical_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        let mut best_abs = f64::NEG_INFINITY;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Which domain a signal's values live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalDomain {
    Vertex,
    Spectral,
}

/// A real signal on a graph, tagged with the domain of its values so that
/// vertex values and spectral coefficients cannot be confused.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal {
    values: DVector<f64>,
    domain: SignalDomain,
}

impl GraphSignal {
    pub fn vertex(values: DVector<f64>) -> Self {
        GraphSignal {
            values,
            domain: SignalDomain::Vertex,
        }
    }

    pub fn spectral(values: DVector<f64>) -> Self {
        GraphSignal {
            values,
            domain: SignalDomain::Spectral,
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn domain(&self) -> SignalDomain {
        self.domain
    }

    fn expect_domain(&self, wanted: SignalDomain, context: &'static str) -> Result<()> {
        if self.domain != wanted {
            return Err(Error::InvalidArgument(format!(
                "{context} expects a {wanted:?}-domain signal, got {:?}",
                self.domain
            )));
        }
        Ok(())
    }
}

/// Graph Fourier transform: vertex-domain signal to spectral coefficients.
pub fn gft(spectrum: &Spectrum, signal: &GraphSignal) -> Result<GraphSignal> {
    signal.expect_domain(SignalDomain::Vertex, "gft")?;
    Ok(GraphSignal::spectral(spectrum.analyze(signal.values())?))
}

/// Inverse graph Fourier transform: spectral coefficients to vertex values.
pub fn igft(spectrum: &Spectrum, signal: &GraphSignal) -> Result<GraphSignal> {
    signal.expect_domain(SignalDomain::Spectral, "igft")?;
    Ok(GraphSignal::vertex(spectrum.synthesize(signal.values())?))
}

/// Applies the filter `U diag(response) Uᵀ` to a vertex-domain signal.
///
/// `response` holds one gain per spectral component, aligned with the
/// ascending eigenvalues.
pub fn apply_graph_filter(
    spectrum: &Spectrum,
    response: &DVector<f64>,
    signal: &GraphSignal,
) -> Result<GraphSignal> {
    signal.expect_domain(SignalDomain::Vertex, "apply_graph_filter")?;
    if response.len() != spectrum.order() {
        return Err(Error::DimensionMismatch {
            context: "filter response",
            expected: spectrum.order(),
            actual: response.len(),
        });
    }
    let coeffs = spectrum.analyze(signal.values())?;
    let filtered = spectrum.synthesize(&coeffs.component_mul(response))?;
    Ok(GraphSignal::vertex(filtered))
}

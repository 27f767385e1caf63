//! Heat diffusion on a graph, driven by an initial field and a constant
//! external input.
//!
//! The field obeys `dx/dt = -L x + q`. In the Laplacian eigenbasis each
//! mode evolves independently:
//!
//! ```text
//! x_f(t)[i] = exp(-lambda_i t) * x_f(0)[i] + f_t(lambda_i) * q_f[i]
//! f_t(lambda) = (1 - exp(-t lambda)) / lambda,   f_t(0) = t
//! ```
//!
//! so a field at any time costs one analysis and one synthesis, with no
//! time stepping. `f_t` is evaluated through `expm1` to stay accurate for
//! small `t * lambda`, where the textbook form cancels catastrophically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// Uniformly spaced sample times `t_k = delta * (start_index + k)` for
/// `k = 0 .. count`. `start_index` is 0 when the grid includes `t = 0`
/// and 1 (the default) when sampling starts one step after the sources
/// were switched on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    delta: f64,
    count: usize,
    start_index: usize,
}

impl TimeGrid {
    pub fn new(delta: f64, count: usize, start_index: usize) -> Result<Self> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {delta}"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidArgument("need at least one sample time".into()));
        }
        if start_index > 1 {
            return Err(Error::InvalidArgument(format!(
                "start index must be 0 or 1, got {start_index}"
            )));
        }
        Ok(TimeGrid {
            delta,
            count,
            start_index,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.delta * (self.start_index + k) as f64)
            .collect()
    }
}

/// The two drivers of the diffusion, both in the vertex domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub initial: DVector<f64>,
    pub input: DVector<f64>,
}

impl SourceConfig {
    pub fn new(initial: DVector<f64>, input: DVector<f64>) -> Result<Self> {
        if initial.len() != input.len() {
            return Err(Error::DimensionMismatch {
                context: "initial field and external input",
                expected: initial.len(),
                actual: input.len(),
            });
        }
        Ok(SourceConfig { initial, input })
    }

    pub fn initial_only(initial: DVector<f64>) -> Self {
        let n = initial.len();
        SourceConfig {
            initial,
            input: DVector::zeros(n),
        }
    }

    pub fn input_only(input: DVector<f64>) -> Self {
        let n = input.len();
        SourceConfig {
            initial: DVector::zeros(n),
            input,
        }
    }
}

/// Response of one mode to a constant unit input held for time `t`.
///
/// Computed as `t * g(lambda * t)` with `g(z) = -expm1(-z) / z` and
/// `g(0) = 1`, which is accurate down to `lambda * t` near the rounding
/// level; the direct `(1 - exp(-z)) / z` loses most digits there.
pub fn input_response(lambda: f64, t: f64) -> f64 {
    debug_assert!(lambda >= 0.0 && t >= 0.0);
    let z = lambda * t;
    if z == 0.0 {
        t
    } else {
        t * (-(-z).exp_m1()) / z
    }
}

/// Per-mode decay factors `exp(-lambda_i t)`.
pub fn heat_kernel_weights(spectrum: &Spectrum, t: f64) -> DVector<f64> {
    spectrum.eigenvalues().map(|lambda| (-lambda * t).exp())
}

/// Per-mode accumulation factors `f_t(lambda_i)`.
pub fn input_kernel_weights(spectrum: &Spectrum, t: f64) -> DVector<f64> {
    spectrum.eigenvalues().map(|lambda| input_response(lambda, t))
}

/// The field at time `t >= 0`. At `t = 0` this returns the initial field
/// bit for bit, with no round trip through the eigenbasis.
pub fn field_at(spectrum: &Spectrum, sources: &SourceConfig, t: f64) -> Result<DVector<f64>> {
    let n = spectrum.order();
    if sources.initial.len() != n {
        return Err(Error::DimensionMismatch {
            context: "sources versus spectrum",
            expected: n,
            actual: sources.initial.len(),
        });
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and nonnegative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(sources.initial.clone());
    }
    let initial_f = spectrum.analyze(&sources.initial)?;
    let input_f = spectrum.analyze(&sources.input)?;
    let decay = heat_kernel_weights(spectrum, t);
    let accumulate = input_kernel_weights(spectrum, t);
    let spectral = initial_f.component_mul(&decay) + input_f.component_mul(&accumulate);
    spectrum.synthesize(&spectral)
}

/// Fields at every grid time, stacked as the columns of an `N x T`
/// matrix. Column `k` equals `field_at` at the same time exactly.
pub fn simulate_field(
    spectrum: &Spectrum,
    sources: &SourceConfig,
    grid: &TimeGrid,
) -> Result<DMatrix<f64>> {
    let times = grid.times();
    let mut out = DMatrix::zeros(spectrum.order(), times.len());
    for (k, &t) in times.iter().enumerate() {
        out.set_column(k, &field_at(spectrum, sources, t)?);
    }
    Ok(out)
}

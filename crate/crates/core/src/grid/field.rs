use num_complex::Complex64;
use rustfft::FftDirection;

use super::{transform_nd, TorusSpec};
use crate::error::{Error, Result};

/// Real samples of an `N`-periodic function at the nodes of a [`TorusSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    torus: TorusSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(torus: TorusSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != torus.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                torus.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at node {i}"
            )));
        }
        Ok(Field { torus, values })
    }

    pub(crate) fn from_raw(torus: TorusSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), torus.len());
        Field { torus, values }
    }

    pub fn zeros(torus: TorusSpec) -> Self {
        Self::constant(torus, 0.0)
    }

    pub fn constant(torus: TorusSpec, c: f64) -> Self {
        Field {
            torus,
            values: vec![c; torus.len()],
        }
    }

    /// Samples `f` at every node; `f` receives the physical coordinates
    /// (unused trailing components are zero).
    pub fn from_fn(torus: TorusSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..torus.len())
            .map(|i| {
                let x = torus.node(i);
                f(&x[..torus.d])
            })
            .collect();
        Field { torus, values }
    }

    pub fn torus(&self) -> &TorusSpec {
        &self.torus
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Node-average `L²` pairing `⟨f, g⟩ = mean(f·g)`.
    pub fn inner(&self, other: &Field) -> f64 {
        assert_eq!(self.torus, other.torus);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            torus: self.torus,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.torus, other.torus);
        Field {
            torus: self.torus,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        self.zip_map(other, |x, y| x + a * y)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |x, y| x - y)
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        assert_eq!(self.torus, other.torus);
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Forward transform, normalized so that the zero coefficient is the mean.
    pub fn forward(&self) -> SpectralField {
        let mut data: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        transform_nd(&mut data, self.torus.d, self.torus.m, FftDirection::Forward);
        let scale = 1.0 / self.torus.len() as f64;
        for c in &mut data {
            *c *= scale;
        }
        SpectralField {
            torus: self.torus,
            coeffs: data,
        }
    }
}

/// Fourier coefficients of a field, stored in transform order
/// (index `i` on an axis carries frequency [`TorusSpec::frequency`]`(i)`).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    torus: TorusSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(torus: TorusSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != torus.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a grid of {} nodes",
                coeffs.len(),
                torus.len()
            )));
        }
        Ok(SpectralField { torus, coeffs })
    }

    pub fn torus(&self) -> &TorusSpec {
        &self.torus
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at a frequency multi-index with components in
    /// `{−m/2, …, m/2−1}`.
    pub fn coeff(&self, q: &[i64]) -> Complex64 {
        let m = self.torus.m as i64;
        let idx = q
            .iter()
            .enumerate()
            .map(|(axis, &qa)| qa.rem_euclid(m) as usize * self.torus.stride(axis))
            .sum::<usize>();
        self.coeffs[idx]
    }

    /// Inverse transform; the imaginary part (roundoff for real data) is dropped.
    pub fn inverse(&self) -> Field {
        let mut data = self.coeffs.clone();
        transform_nd(&mut data, self.torus.d, self.torus.m, FftDirection::Inverse);
        Field {
            torus: self.torus,
            values: data.into_iter().map(|c| c.re).collect(),
        }
    }
}

//! Periodic scalar fields on the torus `[0,N]^d`, their discrete Fourier
//! transforms and the diagonal spectral operators built on them.
//!
//! Frequencies are indexed by `q ∈ {−m/2, …, m/2−1}` per axis with
//! wavenumber `ξ = 2πq/N`. The forward transform is normalized so that the
//! zero coefficient is the node average of the field.

mod fft;
mod field;
mod operator;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use field::{Field, SpectralField};
pub use operator::{
    apply_operator, gradient, laplacian, solve_poisson_zero_mean, solve_poisson_zero_mean_with_tol,
    OperatorKind, OperatorSpec,
};

pub(crate) use fft::transform_nd;

/// Grid on the torus `[0,N]^d` with `m` samples per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub period: u32,
    pub m: usize,
}

impl TorusSpec {
    pub fn new(d: usize, period: u32, m: usize) -> Result<Self> {
        let spec = TorusSpec { d, period, m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::InvalidTorus(format!(
                "dimension {} not in 1..=3",
                self.d
            )));
        }
        if self.period == 0 {
            return Err(Error::InvalidTorus("period N must be positive".into()));
        }
        if self.m < 4 || !self.m.is_power_of_two() {
            return Err(Error::InvalidTorus(format!(
                "samples per axis m = {} must be a power of two ≥ 4",
                self.m
            )));
        }
        if self.m % self.period as usize != 0 {
            return Err(Error::InvalidTorus(format!(
                "m = {} is not divisible by N = {}",
                self.m, self.period
            )));
        }
        Ok(())
    }

    /// Number of nodes, `m^d`.
    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `h = N/m`.
    pub fn spacing(&self) -> f64 {
        self.period as f64 / self.m as f64
    }

    pub fn nodes_per_unit(&self) -> usize {
        self.m / self.period as usize
    }

    /// Volume `N^d` of the torus.
    pub fn volume(&self) -> f64 {
        (self.period as f64).powi(self.d as i32)
    }

    /// Linear-index stride of `axis` (row-major, last axis fastest).
    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.d - 1 - axis) as u32)
    }

    /// Integer node coordinates of a linear index.
    pub fn multi_index(&self, index: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rest = index;
        for axis in (0..self.d).rev() {
            out[axis] = rest % self.m;
            rest /= self.m;
        }
        out
    }

    /// Physical coordinates of a node.
    pub fn node(&self, index: usize) -> [f64; 3] {
        let h = self.spacing();
        let j = self.multi_index(index);
        [j[0] as f64 * h, j[1] as f64 * h, j[2] as f64 * h]
    }

    /// Signed frequency of a 1-D transform index, in `{−m/2, …, m/2−1}`.
    pub fn frequency(&self, i: usize) -> i64 {
        if i < self.m / 2 {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    /// Wavenumber `2πq/N` of a 1-D transform index.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency(i) as f64 / self.period as f64
    }

    /// `|ξ(q)|²` for every coefficient, in transform order.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let xi: Vec<f64> = (0..self.m).map(|i| self.wavenumber(i)).collect();
        (0..self.len())
            .map(|idx| {
                let j = self.multi_index(idx);
                (0..self.d).map(|a| xi[j[a]] * xi[j[a]]).sum()
            })
            .collect()
    }
}

/// Rational rotation vector `ω = numerators / denominator`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RotationVector {
    pub numerators: Vec<i64>,
    pub denominator: i64,
}

impl RotationVector {
    pub fn new(numerators: Vec<i64>, denominator: i64) -> Result<Self> {
        if denominator <= 0 {
            return Err(Error::InvalidParameter(format!(
                "rotation vector denominator {denominator} must be positive"
            )));
        }
        Ok(RotationVector {
            numerators,
            denominator,
        })
    }

    pub fn integer(components: &[i64]) -> Self {
        RotationVector {
            numerators: components.to_vec(),
            denominator: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.numerators.len()
    }

    pub fn components(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .map(|&n| n as f64 / self.denominator as f64)
            .collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.components().iter().map(|w| w * w).sum()
    }

    /// `N·ω` as integers; fails unless every component lies in `(1/N)ℤ`.
    pub fn lattice_numerators(&self, torus: &TorusSpec) -> Result<Vec<i64>> {
        if self.dim() != torus.d {
            return Err(Error::ShapeMismatch(format!(
                "rotation vector has {} components, torus dimension is {}",
                self.dim(),
                torus.d
            )));
        }
        let n = torus.period as i64;
        self.numerators
            .iter()
            .map(|&p| {
                if (p * n) % self.denominator != 0 {
                    Err(Error::Incommensurate(format!(
                        "{p}/{} · {n} is not an integer",
                        self.denominator
                    )))
                } else {
                    Ok(p * n / self.denominator)
                }
            })
            .collect()
    }

    /// `ω + step·e_axis`, staying on the `(1/N)` lattice.
    pub fn shifted(&self, torus: &TorusSpec, axis: usize, step: i64) -> Result<Self> {
        let mut num = self.lattice_numerators(torus)?;
        num[axis] += step;
        Ok(RotationVector {
            numerators: num,
            denominator: torus.period as i64,
        }
        .reduced())
    }

    pub fn reduced(&self) -> Self {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let g = self
            .numerators
            .iter()
            .fold(self.denominator, |acc, &p| gcd(acc, p));
        let g = g.max(1);
        RotationVector {
            numerators: self.numerators.iter().map(|p| p / g).collect(),
            denominator: self.denominator / g,
        }
    }

    /// Fractional part of `ω·x` at every node, computed in exact integer
    /// arithmetic (`ω·x(j) = Σ (Nω_i) j_i / m`).
    pub fn phase_at_nodes(&self, torus: &TorusSpec) -> Result<Vec<f64>> {
        let lattice = self.lattice_numerators(torus)?;
        let m = torus.m as i64;
        Ok((0..torus.len())
            .map(|idx| {
                let j = torus.multi_index(idx);
                let s: i64 = (0..torus.d).map(|a| lattice[a] * j[a] as i64).sum();
                s.rem_euclid(m) as f64 / m as f64
            })
            .collect())
    }
}

impl std::fmt::Display for RotationVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .numerators
            .iter()
            .map(|p| {
                if self.denominator == 1 {
                    p.to_string()
                } else {
                    format!("{p}/{}", self.denominator)
                }
            })
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Node shift of `f`: returns `x ↦ f(x + offset)`; fails unless every
/// offset component is a whole number of grid nodes.
pub fn shift(f: &Field, offset: &[f64]) -> Result<Field> {
    let torus = *f.torus();
    if offset.len() != torus.d {
        return Err(Error::ShapeMismatch(format!(
            "offset has {} components, torus dimension is {}",
            offset.len(),
            torus.d
        )));
    }
    let h = torus.spacing();
    let mut nodes = [0i64; 3];
    for (axis, &o) in offset.iter().enumerate() {
        let n = o / h;
        if (n - n.round()).abs() > 1e-9 {
            return Err(Error::Misaligned { axis, offset: o });
        }
        nodes[axis] = n.round() as i64;
    }
    let m = torus.m as i64;
    let src = f.values();
    let values = (0..torus.len())
        .map(|idx| {
            let j = torus.multi_index(idx);
            let mut s = 0usize;
            for axis in 0..torus.d {
                let jj = (j[axis] as i64 + nodes[axis]).rem_euclid(m) as usize;
                s += jj * torus.stride(axis);
            }
            src[s]
        })
        .collect();
    Ok(Field::from_raw(torus, values))
}

/// Integer translate `x ↦ f(x + k) + l`.
pub fn translate(f: &Field, k: &[i64], l: i64) -> Result<Field> {
    let n = f.torus().period as i64;
    if let Some(bad) = k.iter().find(|c| c.abs() > n) {
        return Err(Error::InvalidParameter(format!(
            "translate component {bad} outside ±N = ±{n}"
        )));
    }
    let offset: Vec<f64> = k.iter().map(|&c| c as f64).collect();
    let shifted = shift(f, &offset)?;
    Ok(shifted.map(|v| v + l as f64))
}

//! Trigonometric potentials `V(x, y)`, 1-periodic in every argument, with
//! closed-form `y`-derivatives of any order.
//!
//! Every built-in is stored as a sum of modes `X(x)·(c·cos 2πqy + s·sin 2πqy)`;
//! differentiating in `y` multiplies by `2πq` and rotates `(c, s) → (2πq·s, −2πq·c)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, RotationVector, TorusSpec};

/// Highest `y`-derivative order accepted by [`deriv_y`].
pub const MAX_DERIV_ORDER: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
}

impl Trig {
    fn eval(self, t: f64) -> f64 {
        match self {
            Trig::Sin => t.sin(),
            Trig::Cos => t.cos(),
        }
    }
}

/// `amplitude · x_trig(2π p·x) · y_trig(2π q y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub x_trig: Trig,
    pub p: Vec<i64>,
    pub y_trig: Trig,
    pub q: i64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `A·sin(2πk·x)·cos(2πy)`
    ProductCos {
        k: Vec<i64>,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// `A·Π_i sin(2πk_i x_i)·cos(2πy)`
    Separable {
        k: Vec<i64>,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// `(A/2)·sin(2πk·x)·(cos(2πy) + sin(2πy))`
    Mixed {
        k: Vec<i64>,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    CustomTrig {
        terms: Vec<TrigTerm>,
    },
}

#[derive(Clone, Debug, PartialEq)]
enum XFactor {
    Dot(Trig, Vec<i64>),
    SinProduct(Vec<i64>),
}

impl XFactor {
    fn at_point(&self, x: &[f64]) -> f64 {
        match self {
            XFactor::Dot(trig, p) => trig.eval(
                2.0 * PI
                    * p.iter()
                        .zip(x)
                        .map(|(&pi, &xi)| pi as f64 * xi)
                        .sum::<f64>(),
            ),
            XFactor::SinProduct(k) => k
                .iter()
                .zip(x)
                .map(|(&ki, &xi)| (2.0 * PI * ki as f64 * xi).sin())
                .product(),
        }
    }

    /// Node samples with the phase `p·x(j) = Σ p_i N j_i / m` reduced exactly.
    fn at_nodes(&self, torus: &TorusSpec) -> Vec<f64> {
        let m = torus.m as i64;
        let n = torus.period as i64;
        let phase = |p: &[i64], j: &[usize; 3]| -> f64 {
            let s: i64 = (0..torus.d)
                .map(|a| (p[a] * n).rem_euclid(m) * j[a] as i64)
                .sum();
            2.0 * PI * s.rem_euclid(m) as f64 / m as f64
        };
        (0..torus.len())
            .map(|idx| {
                let j = torus.multi_index(idx);
                match self {
                    XFactor::Dot(trig, p) => trig.eval(phase(p, &j)),
                    XFactor::SinProduct(k) => (0..torus.d)
                        .map(|a| {
                            let mut e = [0i64; 3];
                            e[a] = k[a];
                            phase(&e, &j).sin()
                        })
                        .product(),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Mode {
    x: XFactor,
    q: i64,
    c: f64,
    s: f64,
}

impl Mode {
    /// `(c, s)` of the `n`-th `y`-derivative.
    fn derivative_coeffs(&self, n: usize) -> (f64, f64) {
        let w = 2.0 * PI * self.q as f64;
        let (mut c, mut s) = (self.c, self.s);
        for _ in 0..n {
            (c, s) = (w * s, -w * c);
        }
        (c, s)
    }
}

impl PotentialSpec {
    pub fn product_cos(k: &[i64]) -> Self {
        PotentialSpec::ProductCos {
            k: k.to_vec(),
            amplitude: 1.0,
        }
    }

    pub fn separable(k: &[i64]) -> Self {
        PotentialSpec::Separable {
            k: k.to_vec(),
            amplitude: 1.0,
        }
    }

    pub fn mixed(k: &[i64]) -> Self {
        PotentialSpec::Mixed {
            k: k.to_vec(),
            amplitude: 1.0,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let check = |v: &[i64], what: &str| {
            if v.len() != d {
                Err(Error::InvalidParameter(format!(
                    "{what} has {} components, dimension is {d}",
                    v.len()
                )))
            } else {
                Ok(())
            }
        };
        match self {
            PotentialSpec::ProductCos { k, amplitude }
            | PotentialSpec::Separable { k, amplitude }
            | PotentialSpec::Mixed { k, amplitude } => {
                check(k, "wave vector k")?;
                if !amplitude.is_finite() {
                    return Err(Error::InvalidParameter("amplitude must be finite".into()));
                }
            }
            PotentialSpec::CustomTrig { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidParameter(
                        "custom_trig needs at least one term".into(),
                    ));
                }
                for t in terms {
                    check(&t.p, "term wave vector p")?;
                    if !t.amplitude.is_finite() {
                        return Err(Error::InvalidParameter("amplitude must be finite".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn modes(&self) -> Vec<Mode> {
        match self {
            PotentialSpec::ProductCos { k, amplitude } => vec![Mode {
                x: XFactor::Dot(Trig::Sin, k.clone()),
                q: 1,
                c: *amplitude,
                s: 0.0,
            }],
            PotentialSpec::Separable { k, amplitude } => vec![Mode {
                x: XFactor::SinProduct(k.clone()),
                q: 1,
                c: *amplitude,
                s: 0.0,
            }],
            PotentialSpec::Mixed { k, amplitude } => vec![Mode {
                x: XFactor::Dot(Trig::Sin, k.clone()),
                q: 1,
                c: 0.5 * amplitude,
                s: 0.5 * amplitude,
            }],
            PotentialSpec::CustomTrig { terms } => terms
                .iter()
                .map(|t| {
                    let (c, s) = match t.y_trig {
                        Trig::Cos => (t.amplitude, 0.0),
                        Trig::Sin => (0.0, t.amplitude),
                    };
                    Mode {
                        x: XFactor::Dot(t.x_trig, t.p.clone()),
                        q: t.q,
                        c,
                        s,
                    }
                })
                .collect(),
        }
    }

    /// `∂ⁿV/∂yⁿ (x, y)` at a single point.
    pub fn deriv_y_at(&self, n: usize, x: &[f64], y: f64) -> f64 {
        self.evaluator().deriv_y_at(n, x, y)
    }

    pub fn value_at(&self, x: &[f64], y: f64) -> f64 {
        self.deriv_y_at(0, x, y)
    }

    /// Point evaluator with the mode decomposition built once.
    pub fn evaluator(&self) -> PointEvaluator {
        PointEvaluator {
            modes: self.modes(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PointEvaluator {
    modes: Vec<Mode>,
}

impl PointEvaluator {
    pub fn deriv_y_at(&self, n: usize, x: &[f64], y: f64) -> f64 {
        self.modes
            .iter()
            .map(|mode| {
                let (c, s) = mode.derivative_coeffs(n);
                let t = 2.0 * PI * mode.q as f64 * y;
                mode.x.at_point(x) * (c * t.cos() + s * t.sin())
            })
            .sum()
    }

    pub fn value_at(&self, x: &[f64], y: f64) -> f64 {
        self.deriv_y_at(0, x, y)
    }
}

/// `y(x) = ω·x + α + perturbation(x)` sampled on a torus grid.
#[derive(Clone, Debug)]
pub struct ComposedArgument {
    torus: TorusSpec,
    omega: RotationVector,
    base_constant: f64,
    perturbation: Option<Field>,
}

impl ComposedArgument {
    pub fn new(torus: TorusSpec, omega: RotationVector, base_constant: f64) -> Result<Self> {
        omega.lattice_numerators(&torus)?;
        Ok(ComposedArgument {
            torus,
            omega,
            base_constant,
            perturbation: None,
        })
    }

    pub fn with_perturbation(mut self, perturbation: Field) -> Result<Self> {
        if *perturbation.torus() != self.torus {
            return Err(Error::ShapeMismatch(
                "perturbation lives on a different torus".into(),
            ));
        }
        self.perturbation = Some(perturbation);
        Ok(self)
    }

    pub fn torus(&self) -> &TorusSpec {
        &self.torus
    }

    pub fn omega(&self) -> &RotationVector {
        &self.omega
    }

    pub fn base_constant(&self) -> f64 {
        self.base_constant
    }

    /// Node values of `y`, with `ω·x` reduced mod 1 (`V` is 1-periodic in `y`).
    pub fn values(&self) -> Vec<f64> {
        let phase = self
            .omega
            .phase_at_nodes(&self.torus)
            .expect("checked at construction");
        match &self.perturbation {
            None => phase.into_iter().map(|p| p + self.base_constant).collect(),
            Some(z) => phase
                .into_iter()
                .zip(z.values())
                .map(|(p, zv)| p + self.base_constant + zv)
                .collect(),
        }
    }
}

/// A potential with its `x`-factors sampled once on a grid, for repeated
/// evaluation at changing `y` fields.
#[derive(Clone, Debug)]
pub struct PotentialSampler {
    torus: TorusSpec,
    modes: Vec<Mode>,
    x_factors: Vec<Vec<f64>>,
}

impl PotentialSampler {
    pub fn new(spec: &PotentialSpec, torus: TorusSpec) -> Result<Self> {
        spec.validate(torus.d)?;
        let modes = spec.modes();
        let x_factors = modes.iter().map(|m| m.x.at_nodes(&torus)).collect();
        Ok(PotentialSampler {
            torus,
            modes,
            x_factors,
        })
    }

    pub fn torus(&self) -> &TorusSpec {
        &self.torus
    }

    /// Writes `∂ⁿV/∂yⁿ(x_j, y_j)` into `out` for node values `y`.
    pub fn deriv_y_into(&self, n: usize, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (mode, xf) in self.modes.iter().zip(&self.x_factors) {
            let (c, s) = mode.derivative_coeffs(n);
            let w = 2.0 * PI * mode.q as f64;
            if c == 0.0 && s == 0.0 {
                continue;
            }
            for ((o, &yv), &xv) in out.iter_mut().zip(y).zip(xf) {
                let (sn, cs) = (w * yv).sin_cos();
                *o += xv * (c * cs + s * sn);
            }
        }
    }

    pub fn deriv_y_values(&self, n: usize, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.deriv_y_into(n, y, &mut out);
        out
    }

    pub fn deriv_y(&self, n: usize, arg: &ComposedArgument) -> Result<Field> {
        if n > MAX_DERIV_ORDER {
            return Err(Error::InvalidParameter(format!(
                "derivative order {n} exceeds {MAX_DERIV_ORDER}"
            )));
        }
        if arg.torus != self.torus {
            return Err(Error::ShapeMismatch(
                "argument lives on a different torus".into(),
            ));
        }
        Ok(Field::from_raw(
            self.torus,
            self.deriv_y_values(n, &arg.values()),
        ))
    }
}

/// Samples `∂ⁿ_y V(x, y(x))` at every node of the argument's grid.
pub fn deriv_y(spec: &PotentialSpec, n: usize, arg: &ComposedArgument) -> Result<Field> {
    PotentialSampler::new(spec, arg.torus)?.deriv_y(n, arg)
}

/// Per-unit-volume average `(1/N^d)∫ ∂ⁿ_y V(x, y(x)) dx` (node average).
pub fn mean_deriv_y(spec: &PotentialSpec, n: usize, arg: &ComposedArgument) -> Result<f64> {
    Ok(deriv_y(spec, n, arg)?.mean())
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Field, TorusSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Symbol `−|ξ|²`.
    Laplacian,
    /// Symbol `(γ + |ξ|^{2δ})^power`.
    ResolventPower,
    /// Symbol `−|ξ|^{2δ}`.
    Fractional,
}

/// A real diagonal Fourier multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub gamma: f64,
    pub power: f64,
    pub delta: f64,
}

impl OperatorSpec {
    pub fn laplacian() -> Self {
        OperatorSpec {
            kind: OperatorKind::Laplacian,
            gamma: 0.0,
            power: 1.0,
            delta: 1.0,
        }
    }

    pub fn fractional(delta: f64) -> Self {
        OperatorSpec {
            kind: OperatorKind::Fractional,
            gamma: 0.0,
            power: 1.0,
            delta,
        }
    }

    pub fn resolvent_power(gamma: f64, power: f64, delta: f64) -> Self {
        OperatorSpec {
            kind: OperatorKind::ResolventPower,
            gamma,
            power,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional order delta = {} not in (0, 1]",
                self.delta
            )));
        }
        if self.kind == OperatorKind::ResolventPower && !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "resolvent power needs gamma > 0, got {}",
                self.gamma
            )));
        }
        if !self.power.is_finite() {
            return Err(Error::InvalidParameter(
                "operator power must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Multiplier value at `|ξ|²`.
    pub fn symbol(&self, xi_sq: f64) -> f64 {
        match self.kind {
            OperatorKind::Laplacian => -xi_sq,
            OperatorKind::Fractional => -xi_sq.powf(self.delta),
            OperatorKind::ResolventPower => (self.gamma + xi_sq.powf(self.delta)).powf(self.power),
        }
    }

    /// Multiplier at every coefficient of `torus`, in transform order.
    pub fn symbols(&self, torus: &TorusSpec) -> Vec<f64> {
        torus
            .wavenumber_sq()
            .into_iter()
            .map(|k2| self.symbol(k2))
            .collect()
    }
}

/// `inverse(symbol · forward(f))`.
pub fn apply_operator(op: &OperatorSpec, f: &Field) -> Result<Field> {
    op.validate()?;
    let symbols = op.symbols(f.torus());
    let mut s = f.forward();
    for (c, &sym) in s.coeffs_mut().iter_mut().zip(&symbols) {
        *c *= sym;
    }
    Ok(s.inverse())
}

/// Spectral Laplacian.
pub fn laplacian(f: &Field) -> Field {
    let k2 = f.torus().wavenumber_sq();
    let mut s = f.forward();
    for (c, &w) in s.coeffs_mut().iter_mut().zip(&k2) {
        *c *= -w;
    }
    s.inverse()
}

/// Spectral gradient, one field per axis; the Nyquist frequency of each
/// derivative is zeroed.
pub fn gradient(f: &Field) -> Vec<Field> {
    let torus = *f.torus();
    let s = f.forward();
    (0..torus.d)
        .map(|axis| {
            let mut g = s.clone();
            let stride = torus.stride(axis);
            for (idx, c) in g.coeffs_mut().iter_mut().enumerate() {
                let i = (idx / stride) % torus.m;
                if i == torus.m / 2 {
                    *c = Complex64::default();
                } else {
                    *c *= Complex64::new(0.0, torus.wavenumber(i));
                }
            }
            g.inverse()
        })
        .collect()
}

/// Solves `Δφ = g − mean(g)` with `mean(φ) = 0`, after checking that
/// `|mean(g)| ≤ 1e−10·‖g‖_∞`.
pub fn solve_poisson_zero_mean(g: &Field) -> Result<Field> {
    solve_poisson_zero_mean_with_tol(g, 1e-10 * g.max_abs())
}

pub fn solve_poisson_zero_mean_with_tol(g: &Field, tol_mean: f64) -> Result<Field> {
    let mean = g.mean();
    if mean.abs() > tol_mean {
        return Err(Error::Compatibility {
            mean,
            tol: tol_mean,
        });
    }
    let k2 = g.torus().wavenumber_sq();
    let mut s = g.forward();
    for (c, &w) in s.coeffs_mut().iter_mut().zip(&k2) {
        *c = if w == 0.0 {
            Complex64::default()
        } else {
            -*c / w
        };
    }
    Ok(s.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_mode(n: u32, m: usize) -> Field {
        let t = TorusSpec::new(1, n, m).unwrap();
        Field::from_fn(t, move |x| (2.0 * PI * x[0] / n as f64).cos())
    }

    #[test]
    fn laplacian_eigenfunction() {
        let f = cos_mode(4, 32);
        let lap = apply_operator(&OperatorSpec::laplacian(), &f).unwrap();
        let expect = f.scale(-(2.0 * PI / 4.0_f64).powi(2));
        assert!(lap.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn resolvent_power_on_constant() {
        let t = TorusSpec::new(2, 2, 8).unwrap();
        let f = Field::constant(t, 2.5);
        let g = apply_operator(&OperatorSpec::resolvent_power(1.0, -0.7, 1.0), &f).unwrap();
        assert!(g.max_abs_diff(&f) < 1e-14);
    }

    #[test]
    fn half_fractional_on_cosine() {
        let f = cos_mode(2, 16);
        let g = apply_operator(&OperatorSpec::fractional(0.5), &f).unwrap();
        // direct symbol evaluation: −|ξ|^{2·½} = −2π/N
        let expect = f.scale(-(2.0 * PI / 2.0));
        assert!(g.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn fractional_order_one_is_laplacian_bitwise() {
        let t = TorusSpec::new(2, 16, 64).unwrap();
        let a = OperatorSpec::fractional(1.0).symbols(&t);
        let b = OperatorSpec::laplacian().symbols(&t);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        let f = cos_mode(1, 8);
        let op = OperatorSpec::resolvent_power(0.0, -0.5, 1.0);
        assert!(matches!(
            apply_operator(&op, &f),
            Err(Error::InvalidParameter(_))
        ));
        let op = OperatorSpec::resolvent_power(-1.0, 0.5, 1.0);
        assert!(apply_operator(&op, &f).is_err());
    }

    #[test]
    fn poisson_of_zero_is_zero() {
        let t = TorusSpec::new(2, 1, 8).unwrap();
        let phi = solve_poisson_zero_mean(&Field::zeros(t)).unwrap();
        assert_eq!(phi.max_abs(), 0.0);
    }

    #[test]
    fn poisson_eigenfunction() {
        let g = cos_mode(4, 32);
        let phi = solve_poisson_zero_mean(&g).unwrap();
        let expect = g.scale(-(4.0 / (2.0 * PI)).powi(2));
        assert!(phi.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn poisson_resonant_sine() {
        // Δφ = sin(4πk·x), k = (2,3), N = 1  ⇒  φ = −sin(4πk·x)/(16π²|k|²)
        let t = TorusSpec::new(2, 1, 32).unwrap();
        let g = Field::from_fn(t, |x| (4.0 * PI * (2.0 * x[0] + 3.0 * x[1])).sin());
        let phi = solve_poisson_zero_mean(&g).unwrap();
        let expect = g.scale(-1.0 / (16.0 * PI * PI * 13.0));
        assert!(phi.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn poisson_rejects_nonzero_mean() {
        let t = TorusSpec::new(1, 1, 8).unwrap();
        let g = Field::from_fn(t, |x| 1.0 + (2.0 * PI * x[0]).sin());
        assert!(matches!(
            solve_poisson_zero_mean(&g),
            Err(Error::Compatibility { .. })
        ));
    }

    #[test]
    fn gradient_of_sine() {
        let t = TorusSpec::new(2, 2, 16).unwrap();
        let f = Field::from_fn(t, |x| (PI * x[0]).sin() * (PI * x[1]).cos());
        let g = gradient(&f);
        let gx = Field::from_fn(t, |x| PI * (PI * x[0]).cos() * (PI * x[1]).cos());
        let gy = Field::from_fn(t, |x| -PI * (PI * x[0]).sin() * (PI * x[1]).sin());
        assert!(g[0].max_abs_diff(&gx) < 1e-13);
        assert!(g[1].max_abs_diff(&gy) < 1e-13);
    }
}

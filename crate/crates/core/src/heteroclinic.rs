//! Heteroclinic asymptotics for the first-order resonance of
//! `V = A·sin(2πk·x)·cos(2πy)` at `ω = k`.
//!
//! The transition layer between the minimizing branch and its integer
//! translate follows `α(s) = (1/π)·atan(sinh(√2πs)) + 3/4`, `s = √(εA)·x_j`,
//! which solves `α'' = −π cos(2πα)`. One-sided derivatives of `A_ε` are the
//! excess energies of the layer over the periodic minimizer.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindstedt::{eval_series, SeriesField};
use crate::potential::PotentialSpec;
use crate::quadrature::{adaptive_gauss_kronrod, composite_gauss_legendre};

/// `(1/π)·atan(sinh(√2πs)) + 3/4`.
pub fn profile_alpha(s: f64) -> f64 {
    (SQRT_2 * PI * s).sinh().atan() / PI + 0.75
}

/// `dα/ds = √2 / cosh(√2πs)`.
pub fn profile_slope(s: f64) -> f64 {
    SQRT_2 / (SQRT_2 * PI * s).cosh()
}

/// `(4√2/π)·√ε`, the predicted gradient jump.
pub fn analytic_jump(epsilon: f64) -> f64 {
    4.0 * SQRT_2 / PI * epsilon.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicProfile {
    /// Axis `j` of the direction `η = sign·e_j`.
    pub axis: usize,
    pub sign: i8,
    pub epsilon: f64,
    pub half_length: f64,
    pub s: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    /// `max |α'' + π cos 2πα|` over the samples, `α''` by sixth-order differences.
    pub ode_residual: f64,
}

impl HeteroclinicProfile {
    /// `x_j` of a sample, `s = sign·√ε·x_j`.
    pub fn x_of(&self, s: f64) -> f64 {
        s / (self.sign as f64 * self.epsilon.sqrt())
    }
}

const FD6: [f64; 7] = [2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0];

pub fn build_profile(
    epsilon: f64,
    axis: usize,
    sign: i8,
    half_length: f64,
    samples: usize,
) -> Result<HeteroclinicProfile> {
    if !(epsilon > 0.0) || !(half_length > 0.0) || samples < 2 || (sign != 1 && sign != -1) {
        return Err(Error::InvalidParameter(
            "profile needs epsilon > 0, L > 0, at least 2 samples and sign ±1".into(),
        ));
    }
    let h = 2.0 * half_length / (samples - 1) as f64;
    let s: Vec<f64> = (0..samples).map(|i| -half_length + i as f64 * h).collect();
    let alpha: Vec<f64> = s.iter().map(|&v| profile_alpha(v)).collect();
    let ode_residual = s
        .iter()
        .zip(&alpha)
        .map(|(&si, &ai)| {
            let second: f64 = FD6
                .iter()
                .enumerate()
                .map(|(k, c)| c * profile_alpha(si + (k as f64 - 3.0) * h))
                .sum::<f64>()
                / (180.0 * h * h);
            (second + PI * (2.0 * PI * ai).cos()).abs()
        })
        .fold(0.0, f64::max);
    Ok(HeteroclinicProfile {
        axis,
        sign,
        epsilon,
        half_length,
        alpha_minus: alpha[0],
        alpha_plus: alpha[samples - 1],
        s,
        alpha,
        ode_residual,
    })
}

/// Adaptive quadrature of `∫ 2ε·sech²(√(2ε)πx) dx` over the real line
/// (truncated where the integrand is below `1e−30` relative).
pub fn kinetic_jump_integral(epsilon: f64) -> f64 {
    let rate = (2.0 * epsilon).sqrt() * PI;
    let cut = 35.0 / rate;
    adaptive_gauss_kronrod(
        |x| {
            let c = (rate * x).cosh();
            2.0 * epsilon / (c * c)
        },
        -cut,
        cut,
        0.0,
        1e-14,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaeConfig {
    /// `L_x·√(2εA)`.
    pub strip_factor: f64,
    pub panels: usize,
    pub order: usize,
    pub tail_tol: f64,
}

impl Default for DaeConfig {
    fn default() -> Self {
        DaeConfig {
            strip_factor: 10.0,
            panels: 64,
            order: 16,
            tail_tol: 1e-8,
        }
    }
}

/// One-sided excess energy of the layer in direction `sign·e_j`, split into
/// the cross term `∫∂_jM·a'`, the sech² term `∫½a'²` and the potential
/// difference `ε∫V(x,M+a) − V(x,M)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSided {
    pub cross: f64,
    pub sech2: f64,
    pub potential: f64,
}

impl OneSided {
    pub fn total(&self) -> f64 {
        self.cross + self.sech2 + self.potential
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaeResult {
    pub epsilon: f64,
    pub axis: usize,
    pub dplus: f64,
    pub dminus: f64,
    pub jump: f64,
    pub plus: OneSided,
    pub minus: OneSided,
    pub half_length: f64,
}

/// The periodic minimizer `M = ω·x + α + Σε^j u_j` sampled along lines
/// parallel to `e_j`, one per transverse node of the unit cell, and
/// evaluated off-grid by trigonometric interpolation.
struct LayerIntegrand {
    epsilon: f64,
    eps_eff: f64,
    axis: usize,
    omega: Vec<f64>,
    evaluator: crate::potential::PointEvaluator,
    /// Transverse coordinates of each line.
    lines: Vec<[f64; 3]>,
    /// Fourier coefficients `c_q`, `q = 0..=m/2`, of each line.
    coeffs: Vec<Vec<Complex64>>,
    period: f64,
    m: usize,
}

impl LayerIntegrand {
    fn new(
        series: &SeriesField,
        spec: &PotentialSpec,
        epsilon: f64,
        axis: usize,
        eps_eff: f64,
    ) -> Self {
        let torus = series.torus;
        let corrector = eval_series(series, epsilon).corrector();
        let m = torus.m;
        let per_unit = torus.nodes_per_unit();
        let stride = torus.stride(axis);
        let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
        let mut lines = Vec::new();
        let mut coeffs = Vec::new();
        for idx in 0..torus.len() {
            let j = torus.multi_index(idx);
            if j[axis] != 0 || (0..torus.d).any(|a| a != axis && j[a] >= per_unit) {
                continue;
            }
            let mut buf: Vec<Complex64> = (0..m)
                .map(|t| Complex64::new(corrector.values()[idx + t * stride], 0.0))
                .collect();
            fft.process(&mut buf);
            let c: Vec<Complex64> = buf[..=m / 2].iter().map(|v| v / m as f64).collect();
            lines.push(torus.node(idx));
            coeffs.push(c);
        }
        LayerIntegrand {
            epsilon,
            eps_eff,
            axis,
            omega: series.omega.components(),
            evaluator: spec.evaluator(),
            lines,
            coeffs,
            period: torus.period as f64,
            m,
        }
    }

    /// `e^{iξ_q x}` for `q = 0..=m/2`.
    fn phases(&self, x: f64) -> Vec<Complex64> {
        let base = Complex64::from_polar(1.0, 2.0 * PI * x / self.period);
        let mut out = Vec::with_capacity(self.m / 2 + 1);
        let mut p = Complex64::new(1.0, 0.0);
        for q in 0..=self.m / 2 {
            if q % 32 == 0 {
                p = Complex64::from_polar(1.0, 2.0 * PI * q as f64 * x / self.period);
            }
            out.push(p);
            p *= base;
        }
        out
    }

    /// Transverse averages of the three parts of `e(H) − e(M)` at `x_j`.
    fn at(&self, x: f64, sign: f64) -> OneSided {
        let s = sign * self.eps_eff.sqrt() * x;
        let a = profile_alpha(s) - 0.25;
        let da = sign * self.eps_eff.sqrt() * profile_slope(s);
        let phases = self.phases(x);
        let half = self.m / 2;
        let mut out = OneSided {
            cross: 0.0,
            sech2: 0.5 * da * da,
            potential: 0.0,
        };
        for (node, c) in self.lines.iter().zip(&self.coeffs) {
            let mut value = c[0].re;
            let mut deriv = 0.0;
            for q in 1..half {
                let t = c[q] * phases[q];
                value += 2.0 * t.re;
                deriv -= 2.0 * t.im * 2.0 * PI * q as f64 / self.period;
            }
            value += c[half].re * phases[half].re;
            let mut point = *node;
            point[self.axis] = x;
            let d = self.omega.len();
            let affine: f64 = (0..d).map(|i| self.omega[i] * point[i]).sum();
            let m = affine + value;
            let dm = self.omega[self.axis] + deriv;
            out.cross += dm * da;
            out.potential += self.epsilon
                * (self.evaluator.value_at(&point[..d], m + a)
                    - self.evaluator.value_at(&point[..d], m));
        }
        let n = self.lines.len() as f64;
        out.cross /= n;
        out.potential /= n;
        out
    }
}

fn check_applicable(spec: &PotentialSpec, series: &SeriesField) -> Result<f64> {
    let PotentialSpec::ProductCos { k, amplitude } = spec else {
        return Err(Error::NotApplicable(
            "the heteroclinic profile is only available for product_cos potentials".into(),
        ));
    };
    if !(*amplitude > 0.0) {
        return Err(Error::NotApplicable(format!(
            "amplitude {amplitude} must be positive"
        )));
    }
    let omega = series.omega.reduced();
    if omega.denominator != 1 || omega.numerators != *k {
        return Err(Error::NotApplicable(format!(
            "rotation vector {} is not the resonant k",
            series.omega
        )));
    }
    let phase = (series.alpha - 0.25).rem_euclid(1.0);
    if phase.min(1.0 - phase) > 1e-6 {
        return Err(Error::NotApplicable(format!(
            "series phase {} is not the minimizing 1/4 branch",
            series.alpha
        )));
    }
    Ok(*amplitude)
}

/// One-sided derivatives `D_{±e_j}A_ε(ω)` as `∫ e(H_±) − e(M)` over the strip
/// `[0,1]^{d−1} × [−L_x, L_x]`, with `H_± = M + α(±√ε x_j) − 1/4`.
pub fn dae_quadrature(
    epsilon: f64,
    axis: usize,
    spec: &PotentialSpec,
    series: &SeriesField,
    cfg: &DaeConfig,
) -> Result<DaeResult> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} must be positive"
        )));
    }
    if axis >= series.torus.d {
        return Err(Error::InvalidParameter(format!(
            "axis {axis} outside the torus"
        )));
    }
    let amplitude = check_applicable(spec, series)?;
    let eps_eff = epsilon * amplitude;
    let half_length = cfg.strip_factor / (2.0 * eps_eff).sqrt();
    let integrand = LayerIntegrand::new(series, spec, epsilon, axis, eps_eff);

    for sign in [1.0, -1.0] {
        for x in [-half_length, half_length] {
            let v = integrand.at(x, sign).total();
            if v.abs() > cfg.tail_tol {
                return Err(Error::TailError {
                    half_length,
                    value: v,
                });
            }
        }
    }

    let (pts, wts) = composite_gauss_legendre(-half_length, half_length, cfg.panels, cfg.order);
    let integrate = |sign: f64| {
        let mut acc = OneSided {
            cross: 0.0,
            sech2: 0.0,
            potential: 0.0,
        };
        for (&x, &w) in pts.iter().zip(&wts) {
            let v = integrand.at(x, sign);
            acc.cross += w * v.cross;
            acc.sech2 += w * v.sech2;
            acc.potential += w * v.potential;
        }
        acc
    };
    let plus = integrate(1.0);
    let minus = integrate(-1.0);
    Ok(DaeResult {
        epsilon,
        axis,
        dplus: plus.total(),
        dminus: minus.total(),
        jump: plus.total() + minus.total(),
        plus,
        minus,
        half_length,
    })
}

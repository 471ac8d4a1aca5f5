//! Characteristic functions of the three boundary value problems, their
//! zeros (the eigenvalues) and the weight numbers.

mod contour;
mod solve;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::Primitives;
use crate::error::{Error, Result};
use crate::integrator::{integrate_minor, MinorValue, DEFAULT_TOL};

pub use contour::{count_zeros, count_zeros_with_tol, residue_beta};
pub use solve::{
    beta_direct, find_eigenvalues, find_eigenvalues_with, weight_numbers, weight_numbers_with, IndexFailure,
    SolverOptions, Spectrum,
};

/// Boundary conditions:
///
/// * `L1`: `y(0) = 0`, `y(1) = y'(1) = y''(1) = 0`
/// * `L2`: `y(0) = y'(0) = 0`, `y(1) = y'(1) = 0`
/// * `L3`: `y(0) = y'(0) = y''(0) = 0`, `y(1) = 0`
///
/// (derivatives understood as quasi-derivatives).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "usize", try_from = "usize")]
pub enum ProblemKind {
    L1,
    L2,
    L3,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::L1, ProblemKind::L2, ProblemKind::L3];

    pub fn new(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Self::L1),
            2 => Ok(Self::L2),
            3 => Ok(Self::L3),
            _ => Err(Error::Input(format!("problem kind must be 1, 2 or 3, got {k}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Self::L1 => 1,
            Self::L2 => 2,
            Self::L3 => 3,
        }
    }

    /// Rows `3-k, ..., 0` (quasi-derivative orders) of `Delta_k`, in
    /// determinant order.
    fn rows(self) -> Vec<usize> {
        (0..4 - self.index()).rev().collect()
    }

    /// Columns `k+1..=4` (one-based) of `Delta_k`.
    fn cols(self) -> Vec<usize> {
        (self.index()..4).collect()
    }

    /// Columns `k, k+2..=4` (one-based) of `Delta_k^+`.
    fn cols_plus(self) -> Vec<usize> {
        let k = self.index();
        std::iter::once(k - 1).chain(k + 1..4).collect()
    }

    /// Spacing of consecutive `|rho_n|` for large `n`.
    pub(crate) fn rho_spacing(self) -> f64 {
        match self {
            Self::L2 => std::f64::consts::PI,
            _ => std::f64::consts::SQRT_2 * std::f64::consts::PI,
        }
    }
}

impl From<ProblemKind> for usize {
    fn from(k: ProblemKind) -> usize {
        k.index()
    }
}

impl TryFrom<usize> for ProblemKind {
    type Error = Error;
    fn try_from(k: usize) -> Result<Self> {
        Self::new(k)
    }
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let k: usize = s
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("problem kind must be 1, 2 or 3, got {s:?}")))?;
        Self::new(k)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// A complex number stored as `value * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledValue {
    pub value: Complex64,
    pub log_scale: f64,
}

impl ScaledValue {
    /// The plain value; may overflow.
    pub fn unscaled(&self) -> Complex64 {
        self.value * self.log_scale.exp()
    }

    /// `ln |value * exp(log_scale)|`.
    pub fn ln_abs(&self) -> f64 {
        self.value.norm().ln() + self.log_scale
    }
}

/// `Delta_k` with its `lambda`-derivative on a common scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharValue {
    pub value: Complex64,
    pub derivative: Complex64,
    pub log_scale: f64,
    /// `|value|` over the largest component of the propagated exterior form.
    pub relative: f64,
    /// Largest component of the propagated exterior form, same scale.
    pub norm: f64,
}

fn to_scaled(v: MinorValue) -> ScaledValue {
    ScaledValue {
        value: v.value,
        log_scale: v.log_scale,
    }
}

/// `Delta_k(lambda)`.
pub fn char_fn(p: &Primitives, k: ProblemKind, lambda: Complex64) -> Result<ScaledValue> {
    char_fn_tol(p, k, lambda, DEFAULT_TOL)
}

pub fn char_fn_tol(p: &Primitives, k: ProblemKind, lambda: Complex64, tol: f64) -> Result<ScaledValue> {
    integrate_minor(p, lambda, &k.rows(), &k.cols(), tol, false).map(to_scaled)
}

/// `Delta_k^+(lambda)`.
pub fn char_fn_plus(p: &Primitives, k: ProblemKind, lambda: Complex64) -> Result<ScaledValue> {
    char_fn_plus_tol(p, k, lambda, DEFAULT_TOL)
}

pub fn char_fn_plus_tol(p: &Primitives, k: ProblemKind, lambda: Complex64, tol: f64) -> Result<ScaledValue> {
    integrate_minor(p, lambda, &k.rows(), &k.cols_plus(), tol, false).map(to_scaled)
}

/// `Delta_k(lambda)` and `d Delta_k / d lambda` from the variational system.
pub fn char_fn_with_derivative(p: &Primitives, k: ProblemKind, lambda: Complex64, tol: f64) -> Result<CharValue> {
    let v = integrate_minor(p, lambda, &k.rows(), &k.cols(), tol, true)?;
    Ok(CharValue {
        value: v.value,
        derivative: v.derivative.unwrap_or_default(),
        log_scale: v.log_scale,
        relative: v.relative,
        norm: v.norm,
    })
}

/// The fourth root of `lambda` with argument in `[0, pi/2)`.
pub fn fourth_root(lambda: Complex64) -> Complex64 {
    let mut arg = lambda.arg();
    if arg < 0.0 {
        arg += 2.0 * std::f64::consts::PI;
    }
    Complex64::from_polar(lambda.norm().sqrt().sqrt(), arg / 4.0)
}

/// How a datum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Eigenvalue by Newton's method; weight number by the derivative formula.
    Newton,
    /// Weight number by a contour integral of `Delta_k^+ / Delta_k`.
    ContourResidue,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Newton => "newton",
            Method::ContourResidue => "contour-residue",
        })
    }
}

/// One eigenvalue, optionally with its weight number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDatum {
    pub n: usize,
    pub k: ProblemKind,
    pub lambda: Complex64,
    /// Fourth root of `lambda` with argument in `[0, pi/2)`.
    pub rho: Complex64,
    pub beta: Option<Complex64>,
    /// `|Delta_k|` at `lambda` relative to the local scale.
    pub residual: f64,
    pub method: Method,
    pub iterations: usize,
    /// Number of zeros of `Delta_k` sharing this `lambda`.
    pub multiplicity: usize,
}

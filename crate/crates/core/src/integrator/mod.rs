//! Fundamental solutions of `y' = (F(x) + Lambda) y` at `x = 1`.
//!
//! Everything is integrated in balanced coordinates `z = D y` with
//! `D = diag(1, 1/s, 1/s^2, 1/s^3)` and `s = max(1, |lambda|^(1/4))`, so all
//! entries of the transformed matrix are at most `O(s)`. Results are mapped
//! back before they leave this module.

mod compound;
pub(crate) mod dop853;

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::coefficients::Primitives;
use crate::error::{Error, Result};
use crate::regularization::FEntries;
use compound::{sort_sign, Compound};
use dop853::{integrate, integrate_normalized, LinearOde, Normalize, StepperConfig};

/// Relative local error used when the caller has no preference.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_STEPS: usize = 2_000_000;

/// A matrix stored as `exp(log_scale) * m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMatrixSolution {
    pub m: Matrix4<Complex64>,
    pub log_scale: f64,
    /// `ln |det m|`, from the triangular factors accumulated while
    /// integrating. For large `|lambda|` the columns of `m` are nearly
    /// parallel and an elimination on `m` itself would lose every digit.
    pub log_det: f64,
}

impl ScaledMatrixSolution {
    /// `m_true = exp(log_scale) * m` with `ln |det m_true| = log_det_true`.
    fn normalized(m: Matrix4<Complex64>, log_scale: f64, log_det_true: f64) -> (Self, f64) {
        let nrm = max_norm(&m);
        let inv = if nrm > 0.0 { 1.0 / nrm } else { 1.0 };
        let extra = if nrm > 0.0 { nrm.ln() } else { 0.0 };
        let log_scale = log_scale + extra;
        (
            Self {
                m: m * Complex64::new(inv, 0.0),
                log_scale,
                log_det: log_det_true - 4.0 * log_scale,
            },
            inv,
        )
    }

    /// `exp(log_scale) * m`; overflows for large `|lambda|`.
    pub fn matrix(&self) -> Matrix4<Complex64> {
        self.m * Complex64::new(self.log_scale.exp(), 0.0)
    }

    /// `log|det m| + 4 log_scale`, which vanishes for a fundamental matrix
    /// normalized to the identity at `x = 0`.
    pub fn liouville_defect(&self) -> f64 {
        self.log_det + 4.0 * self.log_scale
    }
}

/// `C(1, lambda)` together with `exp(-log_scale) dC(1, lambda)/d lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalWithDerivative {
    pub sol: ScaledMatrixSolution,
    pub dsol: Matrix4<Complex64>,
}

fn max_norm(m: &Matrix4<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub(crate) fn balance_factor(lambda: Complex64) -> f64 {
    lambda.norm().sqrt().sqrt().max(1.0)
}

fn initial_step(lambda: Complex64) -> f64 {
    0.05f64.min(0.5 / (1.0 + lambda.norm().sqrt().sqrt()))
}

fn check_inputs(lambda: Complex64, tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
    }
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::Input(format!("non-finite lambda {lambda}")));
    }
    Ok(())
}

/// Entries of the balanced matrix `B = D (F + Lambda) D^-1` at `x`.
#[derive(Debug, Clone, Copy)]
struct Balanced {
    sup: Complex64,
    b10: Complex64,
    b21: Complex64,
    b30: Complex64,
    b32: Complex64,
}

#[derive(Debug, Clone, Copy)]
struct BalancedField<'a> {
    p: &'a Primitives,
    lambda: Complex64,
    s: f64,
    inv_s: f64,
    inv_s3: f64,
}

impl<'a> BalancedField<'a> {
    fn new(p: &'a Primitives, lambda: Complex64) -> Self {
        let s = balance_factor(lambda);
        Self {
            p,
            lambda,
            s,
            inv_s: 1.0 / s,
            inv_s3: s.powi(-3),
        }
    }

    #[inline]
    fn at(&self, x: f64) -> Balanced {
        let f = FEntries::at(self.p, x);
        Balanced {
            sup: Complex64::new(self.s, 0.0),
            b10: f.f21 * self.inv_s,
            b21: f.f32 * self.inv_s,
            b30: (f.f41 + self.lambda) * self.inv_s3,
            b32: f.f43 * self.inv_s,
        }
    }

    #[inline]
    fn entry(b: &Balanced, row: usize, col: usize) -> Complex64 {
        match (row, col) {
            (0, 1) | (1, 2) | (2, 3) => b.sup,
            (1, 0) => b.b10,
            (2, 1) => b.b21,
            (3, 0) => b.b30,
            (3, 2) => b.b32,
            _ => Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    fn mul(b: &Balanced, v: &[Complex64], out: &mut [Complex64]) {
        out[0] = b.sup * v[1];
        out[1] = b.b10 * v[0] + b.sup * v[2];
        out[2] = b.b21 * v[1] + b.sup * v[3];
        out[3] = b.b30 * v[0] + b.b32 * v[2];
    }
}

/// Columns of `Z` (and of `dZ/d lambda` when requested), stored column-major.
struct MatrixOde<'a> {
    field: BalancedField<'a>,
    with_derivative: bool,
}

impl LinearOde for MatrixOde<'_> {
    fn dim(&self) -> usize {
        if self.with_derivative {
            32
        } else {
            16
        }
    }

    fn apply(&self, x: f64, z: &[Complex64], dz: &mut [Complex64]) {
        let b = self.field.at(x);
        for (v, dv) in z.chunks_exact(4).zip(dz.chunks_exact_mut(4)) {
            BalancedField::mul(&b, v, dv);
        }
        if self.with_derivative {
            // d(B)/d(lambda) has the single entry s^-3 at (3, 0)
            for c in 0..4 {
                dz[16 + 4 * c + 3] += z[4 * c] * self.field.inv_s3;
            }
        }
    }
}

/// Keeps the columns of `Z` orthonormal: after each step `Z = Q R` is
/// replaced by `Q` and `R` is folded into a running triangular factor, so
/// every column keeps full relative accuracy in its own growth rate. A
/// derivative block `dZ` is carried along as `dZ R^-1`.
struct ColumnQr {
    with_derivative: bool,
    /// Accumulated factor, true value `exp(r_log) * r`.
    r: Matrix4<Complex64>,
    r_log: f64,
    /// `sum ln |R_jj|` over all factors.
    log_det: f64,
}

impl ColumnQr {
    fn new(with_derivative: bool) -> Self {
        Self {
            with_derivative,
            r: Matrix4::identity(),
            r_log: 0.0,
            log_det: 0.0,
        }
    }

    /// The true `Z` (or `dZ`) whose orthonormalized part is `q`, scaled by
    /// `exp(-r_log)`.
    fn restore(&self, q: &[Complex64]) -> Vec<Complex64> {
        let qm = Matrix4::from_column_slice(q);
        (qm * self.r).as_slice().to_vec()
    }
}

impl Normalize for ColumnQr {
    fn normalize(&mut self, z: &mut [Complex64], _log_scale: &mut f64) {
        let zero = Complex64::new(0.0, 0.0);
        let mut r = Matrix4::<Complex64>::zeros();
        // modified Gram-Schmidt on the four columns
        for j in 0..4 {
            for i in 0..j {
                let mut d = zero;
                for t in 0..4 {
                    d += z[4 * i + t].conj() * z[4 * j + t];
                }
                r[(i, j)] = d;
                for t in 0..4 {
                    let qi = z[4 * i + t];
                    z[4 * j + t] -= qi * d;
                }
            }
            let nrm = z[4 * j..4 * j + 4].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            r[(j, j)] = Complex64::new(nrm, 0.0);
            if nrm > 0.0 {
                for v in &mut z[4 * j..4 * j + 4] {
                    *v /= nrm;
                }
            }
            self.log_det += nrm.ln();
        }
        if self.with_derivative {
            // dZ <- dZ R^-1, column by column
            for j in 0..4 {
                for i in 0..j {
                    let rij = r[(i, j)];
                    for t in 0..4 {
                        let v = z[16 + 4 * i + t];
                        z[16 + 4 * j + t] -= v * rij;
                    }
                }
                let rjj = r[(j, j)].re;
                if rjj > 0.0 {
                    for v in &mut z[16 + 4 * j..16 + 4 * j + 4] {
                        *v /= rjj;
                    }
                }
            }
        }
        self.r = r * self.r;
        let nrm = max_norm(&self.r);
        if nrm > 0.0 && nrm.is_finite() {
            self.r /= Complex64::new(nrm, 0.0);
            self.r_log += nrm.ln();
        }
    }
}

/// Map balanced `Z` (column-major slice) back to `D^-1 Z D`.
fn unbalance(z: &[Complex64], s: f64) -> Matrix4<Complex64> {
    Matrix4::from_fn(|i, j| z[4 * j + i] * s.powi(i as i32 - j as i32))
}

fn matrix_config(lambda: Complex64, tol: f64, with_derivative: bool) -> StepperConfig {
    let mut blocks = vec![0..16];
    if with_derivative {
        blocks.push(16..32);
    }
    StepperConfig {
        rtol: tol,
        h0: initial_step(lambda),
        max_steps: MAX_STEPS,
        blocks,
    }
}

/// Fundamental matrix `C(1, lambda)` with `C(0, lambda) = I`.
pub fn integrate_fundamental(
    p: &Primitives,
    lambda: Complex64,
    tol: f64,
) -> Result<ScaledMatrixSolution> {
    integrate_from(p, lambda, &Matrix4::identity(), tol)
}

/// Solution matrix at `x = 1` for arbitrary initial data `Y(0) = y0`.
pub fn integrate_from(
    p: &Primitives,
    lambda: Complex64,
    y0: &Matrix4<Complex64>,
    tol: f64,
) -> Result<ScaledMatrixSolution> {
    check_inputs(lambda, tol)?;
    let field = BalancedField::new(p, lambda);
    let s = field.s;
    let mut z0 = vec![Complex64::new(0.0, 0.0); 16];
    for j in 0..4 {
        for i in 0..4 {
            z0[4 * j + i] = y0[(i, j)] * s.powi(j as i32 - i as i32);
        }
    }
    let sys = MatrixOde {
        field,
        with_derivative: false,
    };
    let mut qr = ColumnQr::new(false);
    let sol = integrate_normalized(&sys, z0, 0.0, p.breakpoints(), &matrix_config(lambda, tol, false), &mut qr)?;
    let q = Matrix4::from_column_slice(&sol.state);
    let log_det = qr.log_det + q.determinant().norm().ln();
    let z = qr.restore(&sol.state);
    Ok(ScaledMatrixSolution::normalized(unbalance(&z, s), qr.r_log, log_det).0)
}

/// `C(1, lambda)` and its exact derivative in `lambda` from the variational
/// system.
pub fn integrate_with_lambda_derivative(
    p: &Primitives,
    lambda: Complex64,
    tol: f64,
) -> Result<FundamentalWithDerivative> {
    check_inputs(lambda, tol)?;
    let field = BalancedField::new(p, lambda);
    let s = field.s;
    let mut z0 = vec![Complex64::new(0.0, 0.0); 32];
    for i in 0..4 {
        z0[5 * i] = Complex64::new(1.0, 0.0);
    }
    let sys = MatrixOde {
        field,
        with_derivative: true,
    };
    let mut qr = ColumnQr::new(true);
    let sol = integrate_normalized(&sys, z0, 0.0, p.breakpoints(), &matrix_config(lambda, tol, true), &mut qr)?;
    let q = Matrix4::from_column_slice(&sol.state[..16]);
    let log_det = qr.log_det + q.determinant().norm().ln();
    let z = qr.restore(&sol.state[..16]);
    let dz = qr.restore(&sol.state[16..]);
    let (scaled, inv) = ScaledMatrixSolution::normalized(unbalance(&z, s), qr.r_log, log_det);
    let dsol = unbalance(&dz, s) * Complex64::new(inv, 0.0);
    Ok(FundamentalWithDerivative { sol: scaled, dsol })
}

/// One minor of `C(1, lambda)`, propagated as an exterior power so that
/// cancellation between equally growing columns never happens in floating
/// point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct MinorValue {
    /// True value is `value * exp(log_scale)`.
    pub value: Complex64,
    /// Derivative in `lambda`, on the same scale.
    pub derivative: Option<Complex64>,
    pub log_scale: f64,
    /// `|value|` relative to the largest component of the propagated form,
    /// both in balanced coordinates.
    pub relative: f64,
    /// Largest component of the propagated form, on the scale of `value`.
    pub norm: f64,
}

struct FormOde<'a> {
    field: BalancedField<'a>,
    compound: &'a Compound,
    with_derivative: bool,
}

impl LinearOde for FormOde<'_> {
    fn dim(&self) -> usize {
        let d = self.compound.dim();
        if self.with_derivative {
            2 * d
        } else {
            d
        }
    }

    fn apply(&self, x: f64, z: &[Complex64], dz: &mut [Complex64]) {
        let b = self.field.at(x);
        let d = self.compound.dim();
        dz.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for t in self.compound.transitions() {
            let a = BalancedField::entry(&b, t.row, t.col);
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let coef = a * t.sign;
            dz[t.target] += coef * z[t.source];
            if self.with_derivative {
                dz[d + t.target] += coef * z[d + t.source];
            }
        }
        if self.with_derivative {
            for t in self.compound.transitions() {
                if t.row == 3 && t.col == 0 {
                    dz[d + t.target] += z[t.source] * (t.sign * self.field.inv_s3);
                }
            }
        }
    }
}

/// The minor of `C(1, lambda)` with rows `rows` and columns `cols`, in the
/// given orders (the sign follows the orders).
pub(crate) fn integrate_minor(
    p: &Primitives,
    lambda: Complex64,
    rows: &[usize],
    cols: &[usize],
    tol: f64,
    with_derivative: bool,
) -> Result<MinorValue> {
    check_inputs(lambda, tol)?;
    let m = cols.len();
    if rows.len() != m || m == 0 || m > 4 {
        return Err(Error::Input("minor must be square with 1..4 rows".into()));
    }
    let compound = Compound::new(m);
    let d = compound.dim();
    let field = BalancedField::new(p, lambda);
    let ln_s = field.s.ln();

    let mut z0 = vec![Complex64::new(0.0, 0.0); if with_derivative { 2 * d } else { d }];
    z0[compound.index_of(cols)] = Complex64::new(1.0, 0.0);
    let col_weight: usize = cols.iter().sum();
    let row_weight: usize = rows.iter().sum();

    let sys = FormOde {
        field,
        compound: &compound,
        with_derivative,
    };
    let mut blocks = vec![0..d];
    if with_derivative {
        blocks.push(d..2 * d);
    }
    let cfg = StepperConfig {
        rtol: tol,
        h0: initial_step(lambda),
        max_steps: MAX_STEPS,
        blocks,
    };
    let sol = integrate(&sys, z0, 0.0, p.breakpoints(), &cfg)?;

    let sign = sort_sign(rows) * sort_sign(cols);
    let idx = compound.index_of(rows);
    let value = sol.state[idx] * sign;
    let scale = sol.state[..d].iter().map(|v| v.norm()).fold(0.0, f64::max);
    let relative = if scale > 0.0 { value.norm() / scale } else { 0.0 };
    Ok(MinorValue {
        value,
        derivative: with_derivative.then(|| sol.state[d + idx] * sign),
        log_scale: sol.log_scale + (row_weight as f64 - col_weight as f64) * ln_s,
        relative,
        norm: scale,
    })
}

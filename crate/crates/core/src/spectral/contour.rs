//! Argument-principle counts and residues along closed contours.

use std::f64::consts::{FRAC_PI_4, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use super::{char_fn_plus_tol, char_fn_tol, ProblemKind, ScaledValue};
use crate::coefficients::Primitives;
use crate::error::{Error, Result};
use crate::integrator::DEFAULT_TOL;

/// Bisection depth below which a segment is declared to pass through a zero.
const MAX_DEPTH: u32 = 18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Contour {
    Circle { center: Complex64, radius: f64 },
    /// Counter-clockwise boundary of `[x0, x1] x [y0, y1]`.
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Contour {
    /// Point at parameter `t` in `[0, 1]`; `t = 0` and `t = 1` coincide.
    fn point(&self, t: f64) -> Complex64 {
        match *self {
            Contour::Circle { center, radius } => center + Complex64::from_polar(radius, TAU * t),
            Contour::Rect { x0, x1, y0, y1 } => {
                let s = 4.0 * t.clamp(0.0, 1.0);
                let (edge, u) = if s >= 4.0 { (3, 1.0) } else { (s.floor() as u8, s.fract()) };
                match edge {
                    0 => Complex64::new(x0 + u * (x1 - x0), y0),
                    1 => Complex64::new(x1, y0 + u * (y1 - y0)),
                    2 => Complex64::new(x1 - u * (x1 - x0), y1),
                    _ => Complex64::new(x0, y1 - u * (y1 - y0)),
                }
            }
        }
    }

    fn center(&self) -> Complex64 {
        match *self {
            Contour::Circle { center, .. } => center,
            Contour::Rect { x0, x1, y0, y1 } => Complex64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
        }
    }

    fn size(&self) -> f64 {
        match *self {
            Contour::Circle { radius, .. } => radius,
            Contour::Rect { x0, x1, y0, y1 } => 0.5 * (x1 - x0).hypot(y1 - y0),
        }
    }

    fn too_close(&self) -> Error {
        Error::ContourTooClose {
            center: self.center(),
            radius: self.size(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    t: f64,
    v: ScaledValue,
}

fn phase_step(a: &ScaledValue, b: &ScaledValue) -> (f64, f64) {
    let dphi = (b.value / a.value).arg();
    let dmag = (b.ln_abs() - a.ln_abs()).abs();
    (dphi, dmag)
}

fn refine<F>(f: &F, contour: &Contour, a: Sample, b: Sample, depth: u32) -> Result<f64>
where
    F: Fn(Complex64) -> Result<ScaledValue> + Sync,
{
    let (dphi, dmag) = phase_step(&a.v, &b.v);
    if dphi.abs() <= FRAC_PI_4 && dmag <= std::f64::consts::LN_10 {
        return Ok(dphi);
    }
    if depth >= MAX_DEPTH {
        return Err(contour.too_close());
    }
    let t = 0.5 * (a.t + b.t);
    let v = f(contour.point(t))?;
    if v.value == Complex64::new(0.0, 0.0) {
        return Err(contour.too_close());
    }
    let m = Sample { t, v };
    Ok(refine(f, contour, a, m, depth + 1)? + refine(f, contour, m, b, depth + 1)?)
}

/// Winding number of `f` along `contour`, starting from `samples` equally
/// spaced points and bisecting wherever the phase moves by more than `pi/4`.
pub(crate) fn winding<F>(f: &F, contour: &Contour, samples: usize) -> Result<i64>
where
    F: Fn(Complex64) -> Result<ScaledValue> + Sync,
{
    let n = samples.max(8).next_multiple_of(4);
    let pts: Vec<Sample> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / n as f64;
            let v = f(contour.point(t))?;
            if v.value == Complex64::new(0.0, 0.0) {
                return Err(contour.too_close());
            }
            Ok(Sample { t, v })
        })
        .collect::<Result<_>>()?;
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = pts[i];
            let mut b = pts[(i + 1) % n];
            if i + 1 == n {
                b.t = 1.0;
            }
            refine(f, contour, a, b, 0)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let w = total / TAU;
    let r = w.round();
    if (w - r).abs() > 0.1 {
        return Err(contour.too_close());
    }
    Ok(r as i64)
}

fn check_circle(center: Complex64, radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Input(format!("contour radius must be positive, got {radius}")));
    }
    if !(center.re.is_finite() && center.im.is_finite()) {
        return Err(Error::Input("contour center must be finite".into()));
    }
    Ok(())
}

/// Number of zeros of `Delta_k` inside `|lambda - center| = radius`, counted
/// with multiplicity.
pub fn count_zeros(p: &Primitives, k: ProblemKind, center: Complex64, radius: f64, samples: usize) -> Result<i64> {
    count_zeros_with_tol(p, k, center, radius, samples, DEFAULT_TOL)
}

pub fn count_zeros_with_tol(
    p: &Primitives,
    k: ProblemKind,
    center: Complex64,
    radius: f64,
    samples: usize,
    tol: f64,
) -> Result<i64> {
    check_circle(center, radius)?;
    let f = |lam: Complex64| char_fn_tol(p, k, lam, tol);
    winding(&f, &Contour::Circle { center, radius }, samples)
}

/// `-1/(2 pi i)` times the integral of `Delta_k^+ / Delta_k` over the circle
/// `|lambda - center| = radius`, by the trapezoid rule with doubling.
pub fn residue_beta(p: &Primitives, k: ProblemKind, center: Complex64, radius: f64, tol: f64) -> Result<Complex64> {
    check_circle(center, radius)?;
    let contour = Contour::Circle { center, radius };
    let integrand = |j: usize, m: usize| -> Result<Complex64> {
        let e = Complex64::from_polar(1.0, TAU * j as f64 / m as f64);
        let lam = center + e * radius;
        let d = char_fn_tol(p, k, lam, tol)?;
        if d.value == Complex64::new(0.0, 0.0) {
            return Err(contour.too_close());
        }
        let dp = char_fn_plus_tol(p, k, lam, tol)?;
        Ok(dp.value / d.value * (dp.log_scale - d.log_scale).exp() * e)
    };
    let mut m = 64;
    let mut sum: Complex64 = (0..m)
        .into_par_iter()
        .map(|j| integrand(j, m))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    let mut prev = sum * (radius / m as f64);
    while m < 16384 {
        let m2 = 2 * m;
        let odd: Complex64 = (0..m)
            .into_par_iter()
            .map(|j| integrand(2 * j + 1, m2))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .sum();
        sum += odd;
        m = m2;
        let cur = sum * (radius / m as f64);
        if (cur - prev).norm() <= 1e-10 * cur.norm().max(1e-300) {
            return Ok(-cur);
        }
        prev = cur;
    }
    Err(Error::NonConvergence {
        n: 0,
        reason: format!("residue quadrature on |lambda - {center}| = {radius} did not settle"),
    })
}

/// Off-center split points for subdividing rectangles, so that cell edges
/// avoid symmetry lines such as the real axis. Later entries are retries.
pub(crate) const SPLIT_FRACTIONS: [f64; 4] = [0.5371, 0.4629, 0.5813, 0.4187];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSet;

    fn zero() -> Primitives {
        Primitives::new(&CoefficientSet::zero(17).unwrap()).unwrap()
    }

    #[test]
    fn winding_of_polynomial() {
        // (z - 1)(z + 2i)^2 has three zeros inside |z| = 3, one inside |z - 1| = 0.5
        let f = |z: Complex64| {
            Ok(ScaledValue {
                value: (z - 1.0) * (z + Complex64::new(0.0, 2.0)).powi(2),
                log_scale: 0.0,
            })
        };
        let big = Contour::Circle { center: Complex64::new(0.0, 0.0), radius: 3.0 };
        assert_eq!(winding(&f, &big, 16).unwrap(), 3);
        let small = Contour::Circle { center: Complex64::new(1.0, 0.0), radius: 0.5 };
        assert_eq!(winding(&f, &small, 16).unwrap(), 1);
        let rect = Contour::Rect { x0: -1.0, x1: 0.5, y0: -2.5, y1: 0.3 };
        assert_eq!(winding(&f, &rect, 16).unwrap(), 2);
    }

    #[test]
    fn contour_through_zero_is_rejected() {
        let f = |z: Complex64| Ok(ScaledValue { value: z - 1.0, log_scale: 0.0 });
        let c = Contour::Circle { center: Complex64::new(0.0, 0.0), radius: 1.0 };
        assert!(matches!(winding(&f, &c, 16), Err(Error::ContourTooClose { .. })));
    }

    #[test]
    fn no_zeros_near_origin() {
        let p = zero();
        assert_eq!(count_zeros(&p, ProblemKind::L3, Complex64::new(0.0, 0.0), 625.0, 64).unwrap(), 0);
    }

    #[test]
    fn degenerate_radius() {
        let p = zero();
        assert!(matches!(
            count_zeros(&p, ProblemKind::L3, Complex64::new(0.0, 0.0), 0.0, 64),
            Err(Error::Input(_))
        ));
    }
}

//! The associated matrix `F(x)`, quasi-derivatives and the first-order system
//! `y' = (F(x) + Lambda) y`.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::coefficients::Primitives;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `F(x)` at a single point.
///
/// ```text
/// [ 0                  1            0          0 ]
/// [ -(s1 + s0)         0            1          0 ]
/// [ 0                  -t2 + 2 s0   0          1 ]
/// [ s0^2 - s1^2        0            s1 - s0    0 ]
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociatedMatrixSample {
    pub entries: Matrix4<Complex64>,
}

/// The four non-structural entries of `F(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FEntries {
    pub f21: Complex64,
    pub f32: Complex64,
    pub f41: Complex64,
    pub f43: Complex64,
}

impl FEntries {
    #[inline]
    pub(crate) fn at(p: &Primitives, x: f64) -> Self {
        let (s0, s1, t2) = p.matrix_data(x);
        Self {
            f21: -(s1 + s0),
            f32: -t2 + 2.0 * s0,
            f41: s0 * s0 - s1 * s1,
            f43: s1 - s0,
        }
    }
}

impl AssociatedMatrixSample {
    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }
}

/// `(y, y^[1], y^[2], y^[3])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [Complex64; 4]);

pub fn assemble_f(p: &Primitives, x: f64) -> Result<AssociatedMatrixSample> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain { x });
    }
    let f = FEntries::at(p, x);
    #[rustfmt::skip]
    let entries = Matrix4::new(
        ZERO,  ONE,   ZERO,  ZERO,
        f.f21, ZERO,  ONE,   ZERO,
        ZERO,  f.f32, ZERO,  ONE,
        f.f41, ZERO,  f.f43, ZERO,
    );
    Ok(AssociatedMatrixSample { entries })
}

/// `(F(x) + Lambda) v`, where `Lambda` holds `lambda` in entry (4, 1).
pub fn system_rhs(
    p: &Primitives,
    lambda: Complex64,
    x: f64,
    v: &StateVector,
) -> Result<StateVector> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain { x });
    }
    let f = FEntries::at(p, x);
    let [y0, y1, y2, y3] = v.0;
    Ok(StateVector([
        y1,
        f.f21 * y0 + y2,
        f.f32 * y1 + y3,
        (f.f41 + lambda) * y0 + f.f43 * y2,
    ]))
}

/// Truncated Taylor jet `(f, f', ..., f^(order))` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet {
    d: [Complex64; 5],
    order: usize,
}

impl Jet {
    fn new(values: &[Complex64]) -> Self {
        let mut d = [ZERO; 5];
        d[..values.len()].copy_from_slice(values);
        Self {
            d,
            order: values.len() - 1,
        }
    }

    fn derivative(&self) -> Self {
        let mut d = [ZERO; 5];
        d[..self.order].copy_from_slice(&self.d[1..=self.order]);
        Self {
            d,
            order: self.order.saturating_sub(1),
        }
    }

    fn truncate(mut self, order: usize) -> Self {
        assert!(order <= self.order, "jet of order {} cannot supply {order}", self.order);
        for v in &mut self.d[order + 1..] {
            *v = ZERO;
        }
        self.order = order;
        self
    }

    fn mul(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        let mut d = [ZERO; 5];
        for (k, out) in d.iter_mut().enumerate().take(order + 1) {
            for i in 0..=k {
                *out += binomial(k, i) * self.d[i] * other.d[k - i];
            }
        }
        Self { d, order }
    }

    fn sub(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        let mut d = [ZERO; 5];
        for (i, out) in d.iter_mut().enumerate().take(order + 1) {
            *out = self.d[i] - other.d[i];
        }
        Self { d, order }
    }

    fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        for v in &mut out.d {
            *v *= c;
        }
        out
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Second-order finite-difference derivative of uniform samples.
fn finite_difference(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = v.len();
    if n < 3 {
        let d = (v[n - 1] - v[0]) / h;
        return vec![d; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Quasi-derivatives `y^[0], ..., y^[4]` of a manufactured function.
///
/// `derivatives` holds `y, y', y'', y''', y''''` sampled on the coefficient
/// grid. The chain `y^[k] = (y^[k-1])' - sum_{j<=k} f_{k,j} y^[j-1]` is
/// evaluated exactly in `y`; derivatives of the coefficient factors come from
/// their defining relations (`sigma1' = tau1`, `sigma0' = r0 + c0`) and from
/// second-order differences of the samples.
pub fn quasi_chain(p: &Primitives, derivatives: &[Vec<Complex64>; 5]) -> Result<[Vec<Complex64>; 5]> {
    use crate::coefficients::Primitive::*;

    let n = p.grid_size();
    if let Some(bad) = derivatives.iter().find(|d| d.len() != n) {
        return Err(Error::Input(format!(
            "derivative samples have length {}, grid has {n}",
            bad.len()
        )));
    }
    let h = p.spacing();
    let s0 = p.samples(Sigma0);
    let s1 = p.samples(Sigma1);
    let t2 = p.samples(Tau2);
    let tau1 = p.tau1_samples();
    let ds0: Vec<Complex64> = p.r0_samples().iter().map(|r| r + p.c0()).collect();
    let dds0 = finite_difference(p.r0_samples(), h);
    let dds1 = finite_difference(tau1, h);
    let dt2 = finite_difference(t2, h);

    let mut out: [Vec<Complex64>; 5] = Default::default();
    for v in out.iter_mut() {
        v.reserve(n);
    }
    for i in 0..n {
        let sig0 = Jet::new(&[s0[i], ds0[i], dds0[i]]);
        let sig1 = Jet::new(&[s1[i], tau1[i], dds1[i]]);
        let tau2 = Jet::new(&[t2[i], dt2[i]]);
        let f = jet_matrix(&sig0, &sig1, &tau2);

        let y: Vec<Complex64> = derivatives.iter().map(|d| d[i]).collect();
        let mut chain: Vec<Jet> = vec![Jet::new(&y)];
        for k in 1..=4 {
            let order = 4 - k;
            let mut next = chain[k - 1].derivative().truncate(order);
            for j in 1..=k {
                if let Some(fkj) = &f[k - 1][j - 1] {
                    let term = fkj.truncate(order).mul(&chain[j - 1].truncate(order));
                    next = next.sub(&term);
                }
            }
            chain.push(next);
        }
        for (k, jet) in chain.iter().enumerate() {
            out[k].push(jet.d[0]);
        }
    }
    Ok(out)
}

/// Jets of the lower-triangular part of `F` (entries `f_{k,j}`, `j <= k`);
/// structural zeros are `None`.
fn jet_matrix(sig0: &Jet, sig1: &Jet, tau2: &Jet) -> [[Option<Jet>; 4]; 4] {
    let mut f: [[Option<Jet>; 4]; 4] = Default::default();
    let sum = |a: &Jet, b: &Jet| a.sub(&b.scale(-1.0));
    f[1][0] = Some(sum(sig1, sig0).scale(-1.0));
    f[2][1] = Some(sum(&tau2.scale(-1.0), &sig0.truncate(1).scale(2.0)));
    f[3][0] = Some(sig0.mul(sig0).sub(&sig1.mul(sig1)));
    f[3][2] = Some(sig1.sub(sig0));
    f
}

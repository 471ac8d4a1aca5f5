//! Coefficient data and the regularization primitives derived from it.
//!
//! The equation coefficients are stored as samples on a uniform grid over
//! `[0, 1]`. The distribution `tau0` never appears directly: it is carried by
//! its antiderivative `r0`, so a point mass becomes a jump in `r0`.

use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples of `(tau2, tau1, r0)` on a uniform grid, `tau0 = r0'`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    tau2: Vec<Complex64>,
    tau1: Vec<Complex64>,
    r0: Vec<Complex64>,
}

impl CoefficientSet {
    pub fn new(tau2: Vec<Complex64>, tau1: Vec<Complex64>, r0: Vec<Complex64>) -> Result<Self> {
        let n = tau2.len();
        if n < 2 {
            return Err(Error::Input(format!(
                "coefficient grid needs at least 2 points, got {n}"
            )));
        }
        if tau1.len() != n || r0.len() != n {
            return Err(Error::Input(format!(
                "sample arrays differ in length: tau2 {n}, tau1 {}, r0 {}",
                tau1.len(),
                r0.len()
            )));
        }
        for (name, v) in [("tau2", &tau2), ("tau1", &tau1), ("r0", &r0)] {
            if let Some(i) = v.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Input(format!("{name}[{i}] is not finite")));
            }
        }
        Ok(Self { tau2, tau1, r0 })
    }

    /// The classical equation `y'''' = lambda y`.
    pub fn zero(grid: usize) -> Result<Self> {
        let z = vec![Complex64::new(0.0, 0.0); grid];
        Self::new(z.clone(), z.clone(), z)
    }

    /// Samples three functions on a grid of `grid` points.
    pub fn from_fns(
        grid: usize,
        tau2: impl Fn(f64) -> Complex64,
        tau1: impl Fn(f64) -> Complex64,
        r0: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        if grid < 2 {
            return Err(Error::Input(format!(
                "coefficient grid needs at least 2 points, got {grid}"
            )));
        }
        let xs = grid_points(grid);
        Self::new(
            xs.iter().map(|&x| tau2(x)).collect(),
            xs.iter().map(|&x| tau1(x)).collect(),
            xs.iter().map(|&x| r0(x)).collect(),
        )
    }

    pub fn from_shapes(grid: usize, tau2: &Shape, tau1: &Shape, r0: &Shape) -> Result<Self> {
        Self::new(
            tau2.sample(grid)?,
            tau1.sample(grid)?,
            r0.sample(grid)?,
        )
    }

    pub fn grid_size(&self) -> usize {
        self.tau2.len()
    }

    pub fn tau2(&self) -> &[Complex64] {
        &self.tau2
    }

    pub fn tau1(&self) -> &[Complex64] {
        &self.tau1
    }

    pub fn r0(&self) -> &[Complex64] {
        &self.r0
    }

    /// Coefficients of the adjoint equation: `(conj tau0, -conj tau1, conj tau2)`.
    pub fn adjoint(&self) -> Self {
        Self {
            tau2: self.tau2.iter().map(|z| z.conj()).collect(),
            tau1: self.tau1.iter().map(|z| -z.conj()).collect(),
            r0: self.r0.iter().map(|z| z.conj()).collect(),
        }
    }

    /// `a * self + b * other`, sample by sample.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if other.grid_size() != self.grid_size() {
            return Err(Error::Input("grids differ".into()));
        }
        let lin = |u: &[Complex64], v: &[Complex64]| -> Vec<Complex64> {
            u.iter().zip(v).map(|(p, q)| a * p + b * q).collect()
        };
        Self::new(
            lin(&self.tau2, &other.tau2),
            lin(&self.tau1, &other.tau1),
            lin(&self.r0, &other.r0),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.tau2
            .iter()
            .chain(&self.tau1)
            .chain(&self.r0)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn grid_points(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { 1.0 } else { i as f64 * h }).collect()
}

/// A coefficient function given either by samples or by a closed-form preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Shape {
    Samples(Vec<[f64; 2]>),
    Preset(Preset),
}

impl Shape {
    pub fn sample(&self, grid: usize) -> Result<Vec<Complex64>> {
        match self {
            Shape::Samples(v) => {
                if v.len() != grid {
                    return Err(Error::Input(format!(
                        "expected {grid} samples, got {}",
                        v.len()
                    )));
                }
                Ok(v.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
            }
            Shape::Preset(p) => {
                if grid < 2 {
                    return Err(Error::Input("grid must have at least 2 points".into()));
                }
                Ok(grid_points(grid).into_iter().map(|x| p.eval(x)).collect())
            }
        }
    }
}

/// Closed-form coefficient shapes: `zero`, `const:<c>`, `linear:<a>,<b>`
/// (meaning `a + b x`) and `step:<x0>,<h>` (meaning `h` for `x >= x0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Zero,
    Const(f64),
    Linear(f64, f64),
    Step { x0: f64, height: f64 },
}

impl Preset {
    pub fn eval(&self, x: f64) -> Complex64 {
        let v = match *self {
            Preset::Zero => 0.0,
            Preset::Const(c) => c,
            Preset::Linear(a, b) => a + b * x,
            Preset::Step { x0, height } => {
                if x >= x0 {
                    height
                } else {
                    0.0
                }
            }
        };
        Complex64::new(v, 0.0)
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("unrecognized coefficient preset {s:?}"));
        let nums = |args: &str, count: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = args
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            if v.len() != count || v.iter().any(|x| !x.is_finite()) {
                return Err(bad());
            }
            Ok(v)
        };
        let s = s.trim();
        if s == "zero" {
            return Ok(Preset::Zero);
        }
        let (head, args) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "const" => Ok(Preset::Const(nums(args, 1)?[0])),
            "linear" => {
                let v = nums(args, 2)?;
                Ok(Preset::Linear(v[0], v[1]))
            }
            "step" => {
                let v = nums(args, 2)?;
                Ok(Preset::Step {
                    x0: v[0],
                    height: v[1],
                })
            }
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Preset::Zero => write!(f, "zero"),
            Preset::Const(c) => write!(f, "const:{c}"),
            Preset::Linear(a, b) => write!(f, "linear:{a},{b}"),
            Preset::Step { x0, height } => write!(f, "step:{x0},{height}"),
        }
    }
}

impl Serialize for Preset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Preset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// On-disk coefficient document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub grid: usize,
    pub tau2: Shape,
    pub tau1: Shape,
    pub r0: Shape,
}

impl CoefficientFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("coefficient file: {e}")))
    }

    pub fn to_coefficients(&self) -> Result<CoefficientSet> {
        CoefficientSet::from_shapes(self.grid, &self.tau2, &self.tau1, &self.r0)
    }
}

/// Selector for [`Primitives::eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Sigma0,
    Sigma1,
    Tau2,
    Tau2Int1,
    Tau2Int2,
}

/// Antiderivatives and scalar constants entering the associated matrix and
/// the asymptotic formulas.
///
/// `sigma0'' = tau0` with `sigma0(0) = sigma0(1) = 0`, `sigma1' = tau1` with
/// `sigma1(0) = 0`, and the running integrals of `tau2`.
#[derive(Debug, Clone)]
pub struct Primitives {
    h: f64,
    sigma0: Vec<Complex64>,
    sigma1: Vec<Complex64>,
    tau2: Vec<Complex64>,
    tau2_int1: Vec<Complex64>,
    tau2_int2: Vec<Complex64>,
    tau1: Vec<Complex64>,
    r0: Vec<Complex64>,
    c0: Complex64,
    theta: Complex64,
    t0: Complex64,
    t1: Complex64,
    sigma: Complex64,
    breakpoints: Vec<f64>,
}

/// Cumulative trapezoid rule on a uniform grid.
fn cumulative_trapezoid(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = Complex64::new(0.0, 0.0);
    out.push(acc);
    for w in f.windows(2) {
        acc += (w[0] + w[1]) * (0.5 * h);
        out.push(acc);
    }
    out
}

impl Primitives {
    pub fn new(cs: &CoefficientSet) -> Result<Self> {
        let n = cs.grid_size();
        if n < 2 {
            return Err(Error::Input("grid too coarse".into()));
        }
        let h = 1.0 / (n - 1) as f64;
        let xs = grid_points(n);

        let r0_int = cumulative_trapezoid(&cs.r0, h);
        let c0 = -r0_int[n - 1];
        let mut sigma0: Vec<Complex64> = r0_int
            .iter()
            .zip(&xs)
            .map(|(&i, &x)| i + c0 * x)
            .collect();
        sigma0[0] = Complex64::new(0.0, 0.0);
        sigma0[n - 1] = Complex64::new(0.0, 0.0);

        let sigma1 = cumulative_trapezoid(&cs.tau1, h);
        let tau2_int1 = cumulative_trapezoid(&cs.tau2, h);
        let prod: Vec<Complex64> = cs.tau2.iter().zip(&tau2_int1).map(|(a, b)| a * b).collect();
        let tau2_int2 = cumulative_trapezoid(&prod, h);

        let breakpoints = detect_breakpoints(&xs, &[&sigma0, &sigma1, &cs.tau2]);

        Ok(Self {
            h,
            theta: tau2_int1[n - 1],
            t0: cs.tau2[0],
            t1: cs.tau2[n - 1],
            sigma: sigma1[n - 1],
            sigma0,
            sigma1,
            tau2: cs.tau2.clone(),
            tau2_int1,
            tau2_int2,
            tau1: cs.tau1.clone(),
            r0: cs.r0.clone(),
            c0,
            breakpoints,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.sigma0.len()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// `theta = int_0^1 tau2`.
    pub fn theta(&self) -> Complex64 {
        self.theta
    }

    pub fn t0(&self) -> Complex64 {
        self.t0
    }

    pub fn t1(&self) -> Complex64 {
        self.t1
    }

    /// `sigma = sigma1(1) = int_0^1 tau1`.
    pub fn sigma(&self) -> Complex64 {
        self.sigma
    }

    /// Normalization constant of `sigma0`, equal to `-int_0^1 r0`.
    pub fn c0(&self) -> Complex64 {
        self.c0
    }

    pub fn samples(&self, which: Primitive) -> &[Complex64] {
        match which {
            Primitive::Sigma0 => &self.sigma0,
            Primitive::Sigma1 => &self.sigma1,
            Primitive::Tau2 => &self.tau2,
            Primitive::Tau2Int1 => &self.tau2_int1,
            Primitive::Tau2Int2 => &self.tau2_int2,
        }
    }

    pub(crate) fn tau1_samples(&self) -> &[Complex64] {
        &self.tau1
    }

    pub(crate) fn r0_samples(&self) -> &[Complex64] {
        &self.r0
    }

    /// Interior grid nodes where one of the interpolants entering the
    /// associated matrix changes slope. Between consecutive breakpoints the
    /// matrix is polynomial in `x`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Piecewise-linear interpolation at `x`.
    pub fn eval(&self, which: Primitive, x: f64) -> Result<Complex64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { x });
        }
        Ok(self.interp(which, x))
    }

    #[inline]
    pub(crate) fn interp(&self, which: Primitive, x: f64) -> Complex64 {
        interp_uniform(self.samples(which), self.h, x)
    }

    /// Values of `(sigma0, sigma1, tau2)` at `x` with a single cell lookup.
    #[inline]
    pub(crate) fn matrix_data(&self, x: f64) -> (Complex64, Complex64, Complex64) {
        let (i, t) = locate(self.sigma0.len(), self.h, x);
        let lerp = |v: &[Complex64]| v[i] + (v[i + 1] - v[i]) * t;
        (lerp(&self.sigma0), lerp(&self.sigma1), lerp(&self.tau2))
    }
}

/// Build the primitives of a coefficient set.
pub fn build_primitives(cs: &CoefficientSet) -> Result<Primitives> {
    Primitives::new(cs)
}

/// Checked accessor for a primitive at `x`.
pub fn eval_primitive(p: &Primitives, which: Primitive, x: f64) -> Result<Complex64> {
    p.eval(which, x)
}

#[inline]
fn locate(n: usize, h: f64, x: f64) -> (usize, f64) {
    let s = (x / h).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    (i, s - i as f64)
}

#[inline]
fn interp_uniform(v: &[Complex64], h: f64, x: f64) -> Complex64 {
    let (i, t) = locate(v.len(), h, x);
    v[i] + (v[i + 1] - v[i]) * t
}

fn detect_breakpoints(xs: &[f64], series: &[&[Complex64]]) -> Vec<f64> {
    let n = xs.len();
    let mut out = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let kink = series.iter().any(|v| {
            let scale = 1.0 + v[i - 1].norm() + v[i].norm() + v[i + 1].norm();
            (v[i - 1] - 2.0 * v[i] + v[i + 1]).norm() > 1e-13 * scale
        });
        if kink {
            out.push(xs[i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_tau1_gives_zero_sigma1() {
        let cs = CoefficientSet::from_fns(101, |_| c(1.0), |_| c(0.0), |_| c(0.0)).unwrap();
        let p = Primitives::new(&cs).unwrap();
        assert!(p.samples(Primitive::Sigma1).iter().all(|z| z.norm() == 0.0));
        assert_eq!(p.sigma(), c(0.0));
    }

    #[test]
    fn constant_r0_is_annihilated() {
        let cs = CoefficientSet::from_fns(65, |_| c(0.0), |_| c(0.0), |_| c(1.0)).unwrap();
        let p = Primitives::new(&cs).unwrap();
        assert_abs_diff_eq!(p.c0().re, -1.0, epsilon = 1e-14);
        for z in p.samples(Primitive::Sigma0) {
            assert!(z.norm() < 1e-14);
        }
    }

    #[test]
    fn step_r0_gives_tent_sigma0() {
        // closed form: sigma0(x) = max(0, x - 1/2) - x/2
        let n = 4097;
        let cs = CoefficientSet::from_shapes(
            n,
            &Shape::Preset(Preset::Zero),
            &Shape::Preset(Preset::Zero),
            &Shape::Preset(Preset::Step { x0: 0.5, height: 1.0 }),
        )
        .unwrap();
        let p = Primitives::new(&cs).unwrap();
        let h = p.spacing();
        let s_half = p.eval(Primitive::Sigma0, 0.5).unwrap();
        assert!((s_half.re + 0.25).abs() <= h, "sigma0(1/2) = {s_half}");
        for x in [0.1, 0.3, 0.7, 0.9] {
            let exact = (x - 0.5f64).max(0.0) - x / 2.0;
            let got = p.eval(Primitive::Sigma0, x).unwrap();
            assert!((got.re - exact).abs() <= h, "x = {x}");
        }
    }

    #[test]
    fn linear_tau2_constants() {
        let cs = CoefficientSet::from_fns(11, |x| c(x), |_| c(0.0), |_| c(0.0)).unwrap();
        let p = Primitives::new(&cs).unwrap();
        assert_abs_diff_eq!(p.theta().re, 0.5, epsilon = 1e-15);
        assert_eq!(p.t0(), c(0.0));
        assert_eq!(p.t1(), c(1.0));
    }

    #[test]
    fn unit_tau2_running_integrals() {
        let cs = CoefficientSet::from_fns(201, |_| c(1.0), |_| c(0.0), |_| c(0.0)).unwrap();
        let p = Primitives::new(&cs).unwrap();
        for &x in &[0.0, 0.25, 0.5, 0.77, 1.0] {
            let i1 = p.eval(Primitive::Tau2Int1, x).unwrap();
            assert_abs_diff_eq!(i1.re, x, epsilon = 1e-13);
        }
        // x^2/2 at nodes; linear interpolation error h^2/8 between them
        let h = p.spacing();
        for &x in &[0.0, 0.3, 0.61, 1.0] {
            let i2 = p.eval(Primitive::Tau2Int2, x).unwrap();
            assert!((i2.re - x * x / 2.0).abs() <= h * h / 8.0 + 1e-14);
        }
    }

    #[test]
    fn zero_set_primitives_vanish() {
        let p = Primitives::new(&CoefficientSet::zero(33).unwrap()).unwrap();
        assert_eq!(p.eval(Primitive::Sigma0, 0.7).unwrap(), c(0.0));
        assert!(p.breakpoints().is_empty());
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let p = Primitives::new(&CoefficientSet::zero(5).unwrap()).unwrap();
        assert_eq!(
            p.eval(Primitive::Sigma1, 1.5),
            Err(Error::Domain { x: 1.5 })
        );
        assert!(p.eval(Primitive::Sigma1, -1e-9).is_err());
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(CoefficientSet::zero(1).is_err());
        let bad = CoefficientSet::new(vec![c(0.0); 3], vec![c(0.0); 2], vec![c(0.0); 3]);
        assert!(bad.is_err());
        let nan = CoefficientSet::new(vec![c(f64::NAN); 3], vec![c(0.0); 3], vec![c(0.0); 3]);
        assert!(nan.is_err());
    }

    #[test]
    fn preset_parsing() {
        assert_eq!("zero".parse::<Preset>().unwrap(), Preset::Zero);
        assert_eq!("const:2.5".parse::<Preset>().unwrap(), Preset::Const(2.5));
        assert_eq!(
            "linear:1,1".parse::<Preset>().unwrap(),
            Preset::Linear(1.0, 1.0)
        );
        assert_eq!(
            "step:0.5,1".parse::<Preset>().unwrap(),
            Preset::Step { x0: 0.5, height: 1.0 }
        );
        assert!("step:0.5".parse::<Preset>().is_err());
        assert!("cubic:1".parse::<Preset>().is_err());
    }

    #[test]
    fn file_round_trip() {
        let text = r#"{"grid": 3, "tau2": "linear:1,1", "tau1": [[1,0],[1,0],[1,0]], "r0": "zero"}"#;
        let f = CoefficientFile::parse(text).unwrap();
        let cs = f.to_coefficients().unwrap();
        assert_eq!(cs.tau2()[1], c(1.5));
        assert_eq!(cs.tau1()[2], c(1.0));
        let again = CoefficientFile::parse(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(again, f);
        let short = r#"{"grid": 4, "tau2": "zero", "tau1": [[1,0]], "r0": "zero"}"#;
        assert!(CoefficientFile::parse(short).unwrap().to_coefficients().is_err());
    }
}

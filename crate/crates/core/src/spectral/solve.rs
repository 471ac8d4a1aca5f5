//! Eigenvalue location, index validation and weight numbers.

use num_complex::Complex64;
use rayon::prelude::*;

use super::contour::{residue_beta, winding, Contour, SPLIT_FRACTIONS};
use super::{char_fn_plus_tol, char_fn_tol, char_fn_with_derivative, fourth_root, Method, ProblemKind, SpectralDatum};
use crate::asymptotics::{predict_lambda, AsymptoticConstants};
use crate::coefficients::Primitives;
use crate::error::{Error, Result};
use crate::integrator::DEFAULT_TOL;

/// Knobs for [`find_eigenvalues_with`] and [`weight_numbers_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative local error of every integration.
    pub tol: f64,
    pub max_newton: usize,
    /// Initial number of points on each contour.
    pub contour_samples: usize,
    /// Indices up to this one are located by contour subdivision.
    pub small_n: usize,
    /// Indices up to this one are checked against an argument-principle count.
    pub validate_up_to: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_newton: 60,
            contour_samples: 64,
            small_n: 3,
            validate_up_to: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexFailure {
    pub n: usize,
    pub error: Error,
}

/// Data for `n = 1..=nmax`, with the indices that could not be resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub k: ProblemKind,
    pub data: Vec<SpectralDatum>,
    pub failures: Vec<IndexFailure>,
}

impl Spectrum {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// The data, or the first failure.
    pub fn into_result(self) -> Result<Vec<SpectralDatum>> {
        match self.failures.into_iter().next() {
            Some(f) => Err(f.error),
            None => Ok(self.data),
        }
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.data.iter().map(|d| d.lambda).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Root {
    lambda: Complex64,
    iterations: usize,
    residual: f64,
    multiplicity: usize,
}

struct Ctx<'a> {
    p: &'a Primitives,
    k: ProblemKind,
    opts: SolverOptions,
}

impl Ctx<'_> {
    fn newton(&self, n: usize, seed: Complex64, cap: f64) -> Result<Root> {
        let mut lam = seed;
        let mut last_step = f64::INFINITY;
        for it in 1..=self.opts.max_newton {
            let v = char_fn_with_derivative(self.p, self.k, lam, self.opts.tol)?;
            if v.value == Complex64::new(0.0, 0.0) {
                return Ok(Root {
                    lambda: lam,
                    iterations: it,
                    residual: 0.0,
                    multiplicity: 1,
                });
            }
            let mut step = v.value / v.derivative;
            if !(step.re.is_finite() && step.im.is_finite()) {
                return Err(Error::NonConvergence {
                    n,
                    reason: format!("vanishing derivative at {lam}"),
                });
            }
            if step.norm() > cap {
                step *= cap / step.norm();
            }
            lam -= step;
            let size = step.norm();
            let scale = 1.0 + lam.norm();
            let stalled = it >= 3 && size <= 1e-9 * scale && size > 0.5 * last_step;
            if size <= 1e-13 * scale || stalled {
                if v.relative > 1e-8 {
                    return Err(Error::NonConvergence {
                        n,
                        reason: format!("residual {:.3e} at {lam} exceeds 1e-8", v.relative),
                    });
                }
                return Ok(Root {
                    lambda: lam,
                    iterations: it,
                    residual: v.relative,
                    multiplicity: 1,
                });
            }
            last_step = size;
        }
        Err(Error::NonConvergence {
            n,
            reason: format!("no convergence from {seed} in {} iterations", self.opts.max_newton),
        })
    }

    fn count_rect(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<i64> {
        let f = |lam: Complex64| char_fn_tol(self.p, self.k, lam, self.opts.tol);
        winding(&f, &Contour::Rect { x0, x1, y0, y1 }, self.opts.contour_samples)
    }

    /// All zeros inside the rectangle, which is known to hold `count` of them.
    fn subdivide(&self, cell: [f64; 4], count: i64, depth: usize) -> Result<Vec<Root>> {
        if count <= 0 {
            return Ok(Vec::new());
        }
        let [x0, x1, y0, y1] = cell;
        let center = Complex64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let size = 0.5 * (x1 - x0).hypot(y1 - y0);
        let inside = |z: Complex64| {
            let m = 1e-9 * size;
            z.re >= x0 - m && z.re <= x1 + m && z.im >= y0 - m && z.im <= y1 + m
        };
        if count == 1 {
            if let Ok(root) = self.newton(0, center, size) {
                if inside(root.lambda) {
                    return Ok(vec![root]);
                }
            }
        }
        if size <= 1e-9 * (1.0 + center.norm()) {
            // a multiple zero or an unresolvable cluster
            let lambda = match self.newton(0, center, size) {
                Ok(r) if inside(r.lambda) => r.lambda,
                _ => center,
            };
            let residual = char_fn_with_derivative(self.p, self.k, lambda, self.opts.tol)?.relative;
            return Ok(vec![Root {
                lambda,
                iterations: 0,
                residual,
                multiplicity: count as usize,
            }]);
        }
        if depth > 80 {
            return Err(Error::InseparableCluster { n: 0 });
        }
        let mut last_err = None;
        for frac in SPLIT_FRACTIONS {
            let xm = x0 + frac * (x1 - x0);
            let ym = y0 + frac * (y1 - y0);
            let cells = [[x0, xm, y0, ym], [xm, x1, y0, ym], [x0, xm, ym, y1], [xm, x1, ym, y1]];
            let counts: Result<Vec<i64>> = cells
                .par_iter()
                .map(|c| self.count_rect(c[0], c[1], c[2], c[3]))
                .collect();
            let counts = match counts {
                Ok(c) => c,
                Err(e @ Error::ContourTooClose { .. }) => {
                    last_err = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            if counts.iter().sum::<i64>() != count {
                last_err = Some(Error::ContourTooClose {
                    center,
                    radius: size,
                });
                continue;
            }
            let parts: Vec<Vec<Root>> = cells
                .par_iter()
                .zip(counts.par_iter())
                .map(|(c, &n)| self.subdivide(*c, n, depth + 1))
                .collect::<Result<_>>()?;
            return Ok(parts.into_iter().flatten().collect());
        }
        Err(last_err.unwrap_or(Error::InseparableCluster { n: 0 }))
    }

    /// Zeros with `|lambda| <= radius`, found by subdividing the enclosing
    /// square; ordered by modulus then argument.
    fn small_zeros(&self, radius: f64) -> Result<Vec<Root>> {
        let mut last_err = None;
        for j in 0..4 {
            let r = radius * (1.0 + 0.013 * j as f64);
            let total = match self.count_rect(-r, r, -r, r) {
                Ok(t) => t,
                Err(e @ Error::ContourTooClose { .. }) => {
                    last_err = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mut roots = self.subdivide([-r, r, -r, r], total, 0)?;
            roots.retain(|z| z.lambda.norm() <= r);
            sort_roots(&mut roots);
            return Ok(roots);
        }
        Err(last_err.expect("at least one attempt"))
    }
}

fn order_key(z: Complex64) -> (f64, f64) {
    (z.norm(), z.arg())
}

fn sort_roots(roots: &mut [Root]) {
    roots.sort_by(|a, b| {
        let (ma, aa) = order_key(a.lambda);
        let (mb, ab) = order_key(b.lambda);
        ma.total_cmp(&mb).then(aa.total_cmp(&ab))
    });
}

/// Half-width of the region around a predicted eigenvalue in which no other
/// eigenvalue is expected.
fn basin(k: ProblemKind, predicted: Complex64) -> f64 {
    let rho = predicted.norm().sqrt().sqrt();
    0.5 * 4.0 * rho.powi(3) * k.rho_spacing()
}

fn datum(n: usize, k: ProblemKind, root: &Root) -> SpectralDatum {
    SpectralDatum {
        n,
        k,
        lambda: root.lambda,
        rho: fourth_root(root.lambda),
        beta: None,
        residual: root.residual,
        method: Method::Newton,
        iterations: root.iterations,
        multiplicity: root.multiplicity,
    }
}

fn with_index(e: Error, n: usize) -> Error {
    match e {
        Error::NonConvergence { reason, .. } => Error::NonConvergence { n, reason },
        Error::InseparableCluster { .. } => Error::InseparableCluster { n },
        other => other,
    }
}

/// Eigenvalues `lambda_{1,k}, ..., lambda_{nmax,k}` with default options.
pub fn find_eigenvalues(p: &Primitives, k: ProblemKind, nmax: usize) -> Result<Spectrum> {
    find_eigenvalues_with(p, k, nmax, &SolverOptions::default())
}

pub fn find_eigenvalues_with(p: &Primitives, k: ProblemKind, nmax: usize, opts: &SolverOptions) -> Result<Spectrum> {
    if nmax == 0 {
        return Err(Error::Input("nmax must be at least 1".into()));
    }
    let ctx = Ctx { p, k, opts: *opts };
    let ac = AsymptoticConstants::from_primitives(p);
    let pred = |n: usize| predict_lambda(k, n, &ac);
    let pred_rho = |n: usize| pred(n).norm().sqrt().sqrt();

    // small indices: everything inside a disk between two predicted moduli
    let small = opts.small_n.max(1);
    let r_small = (0.5 * (pred_rho(small) + pred_rho(small + 1))).powi(4);
    let mut slots: Vec<Option<Result<Root>>> = vec![None; nmax];
    let mut idx = 0;
    for root in ctx.small_zeros(r_small)? {
        for _ in 0..root.multiplicity {
            if idx < nmax {
                slots[idx] = Some(Ok(root));
            }
            idx += 1;
        }
    }

    // remaining indices: Newton from the asymptotic prediction
    let start = idx.min(nmax);
    let newton_part: Vec<Result<Root>> = (start + 1..=nmax)
        .into_par_iter()
        .map(|n| {
            let guess = pred(n);
            let b = basin(k, guess);
            let accept = |r: &Root| (r.lambda - guess).norm() < b;
            match ctx.newton(n, guess, 0.5 * b) {
                Ok(r) if accept(&r) => return Ok(r),
                _ => {}
            }
            let cell = [guess.re - b, guess.re + b, guess.im - b * 0.9731, guess.im + b * 1.0269];
            let count = ctx
                .count_rect(cell[0], cell[1], cell[2], cell[3])
                .map_err(|e| with_index(e, n))?;
            if count != 1 {
                return Err(Error::InseparableCluster { n });
            }
            let mut roots = ctx.subdivide(cell, 1, 0).map_err(|e| with_index(e, n))?;
            roots.pop().ok_or(Error::NonConvergence {
                n,
                reason: "local subdivision found nothing".into(),
            })
        })
        .collect();
    for (i, r) in newton_part.into_iter().enumerate() {
        slots[start + i] = Some(r);
    }

    let mut data = Vec::with_capacity(nmax);
    let mut failures = Vec::new();
    for (i, slot) in slots.into_iter().enumerate() {
        let n = i + 1;
        match slot.expect("every index is filled") {
            Ok(root) => {
                let duplicate = data.last().is_some_and(|prev: &SpectralDatum| {
                    prev.multiplicity == 1
                        && root.multiplicity == 1
                        && (prev.lambda - root.lambda).norm() <= 1e-8 * (1.0 + root.lambda.norm())
                });
                if duplicate {
                    failures.push(IndexFailure {
                        n,
                        error: Error::InseparableCluster { n },
                    });
                } else {
                    data.push(datum(n, k, &root));
                }
            }
            Err(e) => failures.push(IndexFailure {
                n,
                error: with_index(e, n),
            }),
        }
    }

    // index validation against an argument-principle count
    let m = nmax.min(opts.validate_up_to);
    let first_m_ok = data.len() >= m && data[..m].iter().enumerate().all(|(i, d)| d.n == i + 1);
    if m > 0 && first_m_ok {
        let rho_m = data[m - 1].lambda.norm().sqrt().sqrt();
        let next = match data.get(m) {
            Some(d) if d.n == m + 1 => d.lambda,
            _ => {
                let g = pred(m + 1);
                ctx.newton(m + 1, g, 0.5 * basin(k, g)).map(|r| r.lambda).unwrap_or(g)
            }
        };
        let rho_next = next.norm().sqrt().sqrt();
        let expected = data[..m].iter().filter(|d| d.lambda.norm() <= data[m - 1].lambda.norm()).count();
        let base = (0.5 * (rho_m + rho_next)).powi(4);
        let mut outcome = None;
        for j in 0..4 {
            let radius = base * (1.0 + 0.011 * j as f64);
            match super::count_zeros_with_tol(p, k, Complex64::new(0.0, 0.0), radius, opts.contour_samples, opts.tol) {
                Ok(c) => {
                    outcome = Some((radius, c));
                    break;
                }
                Err(Error::ContourTooClose { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        match outcome {
            Some((radius, counted)) if counted != expected as i64 => {
                return Err(Error::Completeness {
                    center: Complex64::new(0.0, 0.0),
                    radius,
                    expected,
                    counted,
                });
            }
            Some(_) => {}
            None => {
                return Err(Error::ContourTooClose {
                    center: Complex64::new(0.0, 0.0),
                    radius: base,
                })
            }
        }
    }

    Ok(Spectrum { k, data, failures })
}

/// `-Delta_k^+ / Delta_k'` at `lambda`.
pub fn beta_direct(p: &Primitives, k: ProblemKind, lambda: Complex64, tol: f64) -> Result<Complex64> {
    let v = char_fn_with_derivative(p, k, lambda, tol)?;
    let plus = char_fn_plus_tol(p, k, lambda, tol)?;
    Ok(-plus.value / v.derivative * (plus.log_scale - v.log_scale).exp())
}

/// Fill in `beta` for every datum, with default options.
pub fn weight_numbers(p: &Primitives, k: ProblemKind, data: &[SpectralDatum]) -> Result<Spectrum> {
    weight_numbers_with(p, k, data, &SolverOptions::default())
}

pub fn weight_numbers_with(
    p: &Primitives,
    k: ProblemKind,
    data: &[SpectralDatum],
    opts: &SolverOptions,
) -> Result<Spectrum> {
    if data.iter().any(|d| d.k != k) {
        return Err(Error::Input("data belong to a different problem".into()));
    }
    let ac = AsymptoticConstants::from_primitives(p);
    let results: Vec<Result<SpectralDatum>> = data
        .par_iter()
        .map(|d| {
            let mut neighbours: Vec<Complex64> = data
                .iter()
                .filter(|o| (o.lambda - d.lambda).norm() > 1e-9 * (1.0 + d.lambda.norm()))
                .map(|o| o.lambda)
                .collect();
            for m in [d.n.wrapping_sub(1), d.n + 1] {
                if m >= 1 && !data.iter().any(|o| o.n == m) {
                    neighbours.push(predict_lambda(k, m, &ac));
                }
            }
            let gap = neighbours
                .iter()
                .map(|z| (z - d.lambda).norm())
                .fold(f64::INFINITY, f64::min);
            let radius = if gap.is_finite() { 0.5 * gap } else { 0.5 * basin(k, d.lambda).max(1.0) };

            let v = char_fn_with_derivative(p, k, d.lambda, opts.tol).map_err(|e| with_index(e, d.n))?;
            let flat = v.derivative.norm() * radius < 1e-6 * v.norm;
            let mut out = *d;
            if d.multiplicity > 1 || flat {
                if !gap.is_finite() {
                    return Err(Error::InseparableCluster { n: d.n });
                }
                out.beta = Some(residue_beta(p, k, d.lambda, radius, opts.tol).map_err(|e| match e {
                    Error::ContourTooClose { .. } => Error::InseparableCluster { n: d.n },
                    other => with_index(other, d.n),
                })?);
                out.method = Method::ContourResidue;
            } else {
                let plus = char_fn_plus_tol(p, k, d.lambda, opts.tol).map_err(|e| with_index(e, d.n))?;
                out.beta = Some(-plus.value / v.derivative * (plus.log_scale - v.log_scale).exp());
                out.method = Method::Newton;
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::with_capacity(data.len());
    let mut failures = Vec::new();
    for (d, r) in data.iter().zip(results) {
        match r {
            Ok(v) => out.push(v),
            Err(error) => failures.push(IndexFailure { n: d.n, error }),
        }
    }
    Ok(Spectrum {
        k,
        data: out,
        failures,
    })
}

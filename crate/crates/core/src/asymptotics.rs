//! Root ordering in the sectors of the `rho`-plane, the endpoint constants of
//! the Birkhoff-type solutions, and closed-form predictions for eigenvalues
//! and weight numbers together with remainder diagnostics.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::Serialize;

use crate::coefficients::Primitives;
use crate::error::{Error, Result};
use crate::spectral::ProblemKind;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// The sector `Gamma_kappa = {(kappa - 1) pi / 8 < arg rho < kappa pi / 8}`
/// with the fourth roots of unity ordered by increasing `Re(rho * omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorContext {
    pub kappa: usize,
    pub omegas: [Complex64; 4],
    /// `Omega[j][k] = omega_k^j`, `j, k = 0..3`.
    pub big_omega: Matrix4<Complex64>,
}

impl SectorContext {
    /// Unit vector on the bisector of the sector.
    pub fn midpoint(&self) -> Complex64 {
        Complex64::from_polar(1.0, (self.kappa as f64 - 0.5) * PI / 8.0)
    }

    /// Whether `Re(rho * omega_k)` strictly increases along the ordering.
    pub fn is_ordered_at(&self, rho: Complex64) -> bool {
        self.omegas
            .windows(2)
            .all(|w| (rho * w[0]).re < (rho * w[1]).re)
    }

    /// `Omega^{-1}[l][j] = omega_l^{-j} / 4`.
    pub fn big_omega_inv(&self) -> Matrix4<Complex64> {
        Matrix4::from_fn(|l, j| self.omegas[l].powi(-(j as i32)) * 0.25)
    }
}

/// Order the fourth roots of unity for sector `kappa` in `1..=8`.
pub fn omega_order(kappa: usize) -> Result<SectorContext> {
    if !(1..=8).contains(&kappa) {
        return Err(Error::Input(format!("sector index {kappa} outside 1..=8")));
    }
    let mid = Complex64::from_polar(1.0, (kappa as f64 - 0.5) * PI / 8.0);
    let mut omegas = [c(1.0), I, c(-1.0), -I];
    omegas.sort_by(|a, b| (mid * a).re.total_cmp(&(mid * b).re));
    let big_omega = Matrix4::from_fn(|j, k| omegas[k].powi(j as i32));
    Ok(SectorContext {
        kappa,
        omegas,
        big_omega,
    })
}

/// `c_(0)jk` and `c_(1)jk`, indexed `[j][k]` with `j` the quasi-derivative
/// order `0..3` and `k` the solution index `0..3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CTables {
    pub c0: [[Complex64; 4]; 4],
    pub c1: [[Complex64; 4]; 4],
}

pub fn c_constants(ctx: &SectorContext) -> CTables {
    let w = &ctx.omegas;
    let mut c0 = [[c(0.0); 4]; 4];
    let mut c1 = [[c(0.0); 4]; 4];
    for j in 0..4 {
        for k in 0..4 {
            let mut s0 = c(0.0);
            let mut s1 = c(0.0);
            for l in (0..4).filter(|&l| l != k) {
                let ratio = (w[l] / w[k]).powi(j as i32);
                let den = w[l] - w[k];
                s0 += ratio * w[l].powi(-2) * w[k] / den;
                s1 += ratio * (w[l].powi(-3) * w[k] * w[k] - w[l].inv()) / den;
            }
            c0[j][k] = s0 * 0.25;
            c1[j][k] = -s1 * 0.25;
        }
    }
    CTables { c0, c1 }
}

/// Scalars and tables entering the asymptotic formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticConstants {
    pub theta: Complex64,
    pub t0: Complex64,
    pub t1: Complex64,
    pub sigma: Complex64,
    pub tables: CTables,
    /// `a_lk(0)`, indexed `[l][k]`.
    pub a_end0: [[Complex64; 4]; 4],
    /// `a_lk(1)`, indexed `[l][k]`.
    pub a_end1: [[Complex64; 4]; 4],
}

impl AsymptoticConstants {
    /// Constants of a coefficient set, with tables for the first sector.
    pub fn from_primitives(p: &Primitives) -> Self {
        Self::from_scalars(p.theta(), p.t0(), p.t1(), p.sigma())
    }

    /// Constants from `theta`, `t0 = tau2(0)`, `t1 = tau2(1)` and
    /// `sigma = int tau1`, with tables for the first sector.
    pub fn from_scalars(theta: Complex64, t0: Complex64, t1: Complex64, sigma: Complex64) -> Self {
        let ctx = omega_order(1).expect("sector 1 exists");
        Self::in_sector(&ctx, theta, t0, t1, sigma)
    }

    pub fn in_sector(
        ctx: &SectorContext,
        theta: Complex64,
        t0: Complex64,
        t1: Complex64,
        sigma: Complex64,
    ) -> Self {
        let w = &ctx.omegas;
        let mut a_end0 = [[c(0.0); 4]; 4];
        let mut a_end1 = [[c(0.0); 4]; 4];
        for l in 0..4 {
            for k in 0..4 {
                let base = w[l].powi(-2) * w[k] * (-0.25);
                a_end0[l][k] = base * t0;
                a_end1[l][k] =
                    base * t1 + sigma * 0.25 * (w[l].powi(-3) * w[k] * w[k] - w[l].inv());
            }
        }
        Self {
            theta,
            t0,
            t1,
            sigma,
            tables: c_constants(ctx),
            a_end0,
            a_end1,
        }
    }

    /// All four scalars zero.
    pub fn zero() -> Self {
        Self::from_scalars(c(0.0), c(0.0), c(0.0), c(0.0))
    }
}

/// `sqrt(2) pi n + pi / (2 sqrt(2))`.
fn radius13(n: usize) -> f64 {
    SQRT_2 * PI * n as f64 + PI / (2.0 * SQRT_2)
}

/// `pi (n + 1/2)`.
fn radius2(n: usize) -> f64 {
    PI * (n as f64 + 0.5)
}

/// Main terms of the eigenvalue asymptotics.
pub fn predict_lambda(k: ProblemKind, n: usize, ac: &AsymptoticConstants) -> Complex64 {
    match k {
        ProblemKind::L2 => {
            let r = radius2(n);
            c(r.powi(4)) - ac.theta * r * r + (ac.t0 + ac.t1) * r
        }
        ProblemKind::L1 | ProblemKind::L3 => {
            let r = radius13(n);
            let s = if k == ProblemKind::L3 { -4.0 } else { 4.0 };
            let lin = (ac.t0 + ac.t1 + ac.sigma * s) * FRAC_1_SQRT_2;
            -(c(r.powi(4)) - ac.theta * r * r + lin * r)
        }
    }
}

/// Main terms of the root asymptotics of the third problem in the `rho`-plane.
pub fn predict_rho3(n: usize, ac: &AsymptoticConstants) -> Complex64 {
    let r = radius13(n);
    let pn2 = (PI * n as f64).powi(2);
    let inner = c(r) - ac.theta / (4.0 * r) - ac.sigma / (2.0 * SQRT_2 * pn2)
        + (ac.t0 + ac.t1) / (8.0 * SQRT_2 * pn2);
    Complex64::from_polar(1.0, PI / 4.0) * inner
}

/// Main terms of the weight-number asymptotics.
pub fn predict_beta(k: ProblemKind, n: usize, lambda: Complex64, ac: &AsymptoticConstants) -> Complex64 {
    let pn2 = (PI * n as f64).powi(2);
    let corr = match k {
        ProblemKind::L2 => (ac.t0 + ac.theta) / (4.0 * pn2),
        ProblemKind::L1 | ProblemKind::L3 => (ac.t0 + ac.theta) / (8.0 * pn2),
    };
    -4.0 * lambda * (1.0 + corr)
}

/// The Laurent pair `(r1, r2)`, or `(r1+, r2+)` when `plus` is set.
pub fn reduced_coefficients(rho: Complex64, ac: &AsymptoticConstants, plus: bool) -> (Complex64, Complex64) {
    let th = ac.theta;
    let s = ac.sigma;
    let tsum = ac.t0 + ac.t1;
    let tdiff = ac.t0 - ac.t1;
    let r = rho.inv();
    let r2 = r * r;
    if plus {
        let r1 = 4.0 * I - I * th * r - 2.0 * I * s * r2 - I * tdiff * r2 / 2.0 + I * th * th * r2 / 8.0;
        let r2p = 4.0 * I + th * r + 2.0 * I * s * r2 + I * tdiff * r2 / 2.0 - I * th * th * r2 / 8.0;
        (r1, r2p)
    } else {
        let r1 = -4.0 * I + I * th * r + 2.0 * I * s * r2 - I * tsum * r2 / 2.0 - I * th * th * r2 / 8.0;
        let r2q = c(4.0) - I * th * r + 2.0 * s * r2 - tsum * r2 / 2.0 - th * th * r2 / 8.0;
        (r1, r2q)
    }
}

/// `d(rho) = r1 - r2 exp(rho (omega_3 - omega_4))` in the first sector, or
/// `d+(rho)` with the `plus` pair.
pub fn reduced_char(rho: Complex64, ac: &AsymptoticConstants, plus: bool) -> Complex64 {
    let (r1, r2) = reduced_coefficients(rho, ac, plus);
    // omega_3 - omega_4 = -i - 1 in the first sector
    r1 - r2 * (-rho * Complex64::new(1.0, 1.0)).exp()
}

/// Empirical remainder diagnostics for `numeric - predicted`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderReport {
    pub first_index: usize,
    /// `(numeric_n - predicted_n) / n^power`.
    pub kappa_hat: Vec<Complex64>,
    /// Largest `|kappa_hat|` over the second half of the range.
    pub tail_max: f64,
    /// Cumulative sums of `|kappa_hat|^2`.
    pub partial_sums: Vec<f64>,
    pub first_half: f64,
    pub second_half: f64,
    /// Passes when the second-half sum is below 10% of the first-half sum.
    pub l2_consistent: bool,
}

impl RemainderReport {
    /// `|kappa_hat_{n+1}| <= (1 + jitter) |kappa_hat_n|` for all `n >= from`.
    pub fn tail_monotone(&self, from: usize, jitter: f64) -> bool {
        let start = from.saturating_sub(self.first_index);
        let mags: Vec<f64> = self.kappa_hat.iter().skip(start).map(|v| v.norm()).collect();
        mags.windows(2).all(|w| w[1] <= (1.0 + jitter) * w[0])
    }
}

/// Compare `numeric` with `predicted` for indices `first_index, first_index + 1, ...`.
pub fn remainder_analysis(
    first_index: usize,
    numeric: &[Complex64],
    predicted: &[Complex64],
    power: i32,
) -> Result<RemainderReport> {
    if numeric.len() != predicted.len() {
        return Err(Error::Input(format!(
            "length mismatch: {} numeric values, {} predictions",
            numeric.len(),
            predicted.len()
        )));
    }
    if numeric.len() < 5 {
        return Err(Error::Input("at least 5 values are needed".into()));
    }
    if first_index == 0 {
        return Err(Error::Input("indices start at 1".into()));
    }
    let kappa_hat: Vec<Complex64> = numeric
        .iter()
        .zip(predicted)
        .enumerate()
        .map(|(i, (a, b))| (a - b) / ((first_index + i) as f64).powi(power))
        .collect();
    let mut partial_sums = Vec::with_capacity(kappa_hat.len());
    let mut acc = 0.0;
    for v in &kappa_hat {
        acc += v.norm_sqr();
        partial_sums.push(acc);
    }
    let half = kappa_hat.len() / 2;
    let first_half = partial_sums[half - 1];
    let second_half = acc - first_half;
    let tail_max = kappa_hat[half..].iter().map(|v| v.norm()).fold(0.0, f64::max);
    let l2_consistent = if first_half == 0.0 {
        second_half == 0.0
    } else {
        second_half < 0.1 * first_half
    };
    Ok(RemainderReport {
        first_index,
        kappa_hat,
        tail_max,
        partial_sums,
        first_half,
        second_half,
        l2_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn first_sector_ordering() {
        let ctx = omega_order(1).unwrap();
        assert_eq!(ctx.omegas, [c(-1.0), I, -I, c(1.0)]);
    }

    #[test]
    fn second_sector_matches_sorting_at_bisector() {
        let ctx = omega_order(2).unwrap();
        let rho = Complex64::from_polar(1.0, PI * 3.0 / 16.0);
        let mut want = [c(1.0), I, c(-1.0), -I];
        want.sort_by(|a, b| (rho * a).re.total_cmp(&(rho * b).re));
        assert_eq!(ctx.omegas, want);
    }

    #[test]
    fn out_of_range_sector() {
        assert!(omega_order(0).is_err());
        assert!(omega_order(9).is_err());
    }

    #[test]
    fn big_omega_inverse() {
        for kappa in 1..=8 {
            let ctx = omega_order(kappa).unwrap();
            let prod = ctx.big_omega_inv() * ctx.big_omega;
            assert!((prod - Matrix4::identity()).norm() < 1e-14);
        }
    }

    #[test]
    fn c0_first_sector_corner() {
        // three-term sum for j = 0, omega_k = 1 written out by hand
        let t = c_constants(&omega_order(1).unwrap());
        let brute = {
            let terms = [c(-1.0), I, -I].map(|w: Complex64| w.powi(-2) / (w - 1.0));
            (terms[0] + terms[1] + terms[2]) * 0.25
        };
        assert!(close(t.c0[0][3], brute, 1e-15));
        assert!(close(t.c0[0][3], c(0.125), 1e-15));
    }

    #[test]
    fn tables_finite() {
        for kappa in 1..=8 {
            let t = c_constants(&omega_order(kappa).unwrap());
            assert!(t.c0.iter().flatten().chain(t.c1.iter().flatten()).all(|v| v.re.is_finite() && v.im.is_finite()));
        }
    }

    #[test]
    fn endpoint_tables_match_matrix_product() {
        let (theta, t0, t1, sigma) = (c(0.3), Complex64::new(1.2, -0.4), c(-0.7), Complex64::new(0.9, 0.2));
        for kappa in [1, 3, 6] {
            let ctx = omega_order(kappa).unwrap();
            let ac = AsymptoticConstants::in_sector(&ctx, theta, t0, t1, sigma);
            for (end, tau2, sig1) in [(0, t0, c(0.0)), (1, t1, sigma)] {
                // sigma0 vanishes at both endpoints
                let mut inner = Matrix4::zeros();
                inner[(1, 0)] = -sig1;
                inner[(2, 1)] = -tau2;
                inner[(3, 2)] = sig1;
                let a = ctx.big_omega_inv() * inner * ctx.big_omega;
                let table = if end == 0 { &ac.a_end0 } else { &ac.a_end1 };
                for l in 0..4 {
                    for k in 0..4 {
                        assert!(close(table[l][k], a[(l, k)], 1e-14), "kappa={kappa} end={end} {l}{k}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_coefficient_predictions() {
        let ac = AsymptoticConstants::zero();
        assert_relative_eq!(predict_lambda(ProblemKind::L2, 1, &ac).re, (1.5 * PI).powi(4), max_relative = 1e-14);
        let want3 = -(SQRT_2 * PI + PI / (2.0 * SQRT_2)).powi(4);
        assert_relative_eq!(predict_lambda(ProblemKind::L3, 1, &ac).re, want3, max_relative = 1e-14);
        assert!((predict_lambda(ProblemKind::L2, 1, &ac).re - 493.1335).abs() < 1e-3);
        assert!((want3 + 951.2607).abs() < 1e-3);
        let rho = predict_rho3(1, &ac);
        assert!(close(rho, Complex64::from_polar(5.55361, PI / 4.0), 1e-5));
    }

    #[test]
    fn sigma_sign_swaps_problems() {
        let a = AsymptoticConstants::from_scalars(c(0.4), c(1.0), c(2.0), c(0.8));
        let b = AsymptoticConstants::from_scalars(c(0.4), c(1.0), c(2.0), c(-0.8));
        for n in 1..20 {
            assert!(close(predict_lambda(ProblemKind::L1, n, &a), predict_lambda(ProblemKind::L3, n, &b), 1e-9));
        }
        let z = AsymptoticConstants::from_scalars(c(0.4), c(1.0), c(2.0), c(0.0));
        for n in 1..20 {
            assert_eq!(predict_lambda(ProblemKind::L1, n, &z), predict_lambda(ProblemKind::L3, n, &z));
        }
    }

    #[test]
    fn rho_prediction_is_fourth_root_of_lambda_prediction() {
        let ac = AsymptoticConstants::from_scalars(c(1.5), c(1.0), c(2.0), c(1.0));
        for n in 5..=50 {
            let diff = predict_rho3(n, &ac).powi(4) - predict_lambda(ProblemKind::L3, n, &ac);
            assert!(diff.norm() / (n * n) as f64 <= 1.0, "n={n}: {diff}");
        }
    }

    #[test]
    fn theta_shifts_radius() {
        let ac = AsymptoticConstants::from_scalars(c(1.0), c(0.0), c(0.0), c(0.0));
        let z = AsymptoticConstants::zero();
        let shift = (predict_rho3(10, &z) - predict_rho3(10, &ac)).norm();
        assert_relative_eq!(shift, 1.0 / (4.0 * radius13(10)), max_relative = 1e-12);
    }

    #[test]
    fn beta_predictions() {
        let z = AsymptoticConstants::zero();
        let lam = Complex64::new(-3.0, 2.0);
        for k in ProblemKind::ALL {
            assert_eq!(predict_beta(k, 3, lam, &z), -4.0 * lam);
        }
        let ac = AsymptoticConstants::from_scalars(c(0.0), c(1.0), c(0.0), c(0.0));
        let got = predict_beta(ProblemKind::L2, 1, lam, &ac);
        assert!(close(got, -4.0 * lam * (1.0 + 1.0 / (4.0 * PI * PI)), 1e-14));
    }

    #[test]
    fn reduced_functions_with_zero_constants() {
        let z = AsymptoticConstants::zero();
        let rho = Complex64::new(7.0, 6.5);
        assert_eq!(reduced_coefficients(rho, &z, false), (-4.0 * I, c(4.0)));
        assert_eq!(reduced_coefficients(rho, &z, true), (4.0 * I, 4.0 * I));
        // exp(rho (1 + i)) = i at the main-term roots
        let root = Complex64::from_polar(radius13(3), PI / 4.0);
        assert!(reduced_char(root, &z, false).norm() < 1e-12);
    }

    #[test]
    fn reduced_roots_follow_rho_prediction() {
        let ac = AsymptoticConstants::from_scalars(c(0.7), c(1.3), c(0.4), c(0.5));
        for n in 5..=30 {
            let mut rho = predict_rho3(n, &ac);
            for _ in 0..50 {
                let h = 1e-6;
                let f = reduced_char(rho, &ac, false);
                let df = (reduced_char(rho + h, &ac, false) - reduced_char(rho - h, &ac, false)) / (2.0 * h);
                rho -= f / df;
            }
            let err = (rho - predict_rho3(n, &ac)).norm() * (n * n) as f64;
            assert!(err < 1.0, "n={n}: {err}");
        }
    }

    #[test]
    fn remainder_reports() {
        let pred: Vec<Complex64> = (1..=40).map(|n| c(n as f64)).collect();
        let same = remainder_analysis(1, &pred, &pred, 1).unwrap();
        assert!(same.kappa_hat.iter().all(|v| *v == c(0.0)));
        assert!(same.l2_consistent);
        assert_eq!(same.tail_max, 0.0);

        let inv: Vec<Complex64> = (1..=40).map(|n| pred[n - 1] + 1.0 / n as f64).collect();
        assert!(remainder_analysis(1, &inv, &pred, 0).unwrap().l2_consistent);

        let inv_sqrt: Vec<Complex64> = (1..=40).map(|n| pred[n - 1] + 1.0 / (n as f64).sqrt()).collect();
        assert!(!remainder_analysis(1, &inv_sqrt, &pred, 0).unwrap().l2_consistent);

        assert!(remainder_analysis(1, &pred[..4], &pred[..4], 1).is_err());
        assert!(remainder_analysis(1, &pred[..6], &pred[..5], 1).is_err());
    }

    #[test]
    fn monotone_tail_with_jitter() {
        let pred = vec![c(0.0); 10];
        let num: Vec<Complex64> = (1..=10).map(|n| c(1.0 / n as f64)).collect();
        let r = remainder_analysis(1, &num, &pred, 0).unwrap();
        assert!(r.tail_monotone(3, 0.0));
        let mut bumped = num.clone();
        bumped[6] = c(0.3);
        let r = remainder_analysis(1, &bumped, &pred, 0).unwrap();
        assert!(!r.tail_monotone(3, 0.2));
    }
}

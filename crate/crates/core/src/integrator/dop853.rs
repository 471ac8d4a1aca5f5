//! Dormand-Prince 8(5,3) stepper for complex linear systems on `[0, 1]`.
//!
//! Steps never straddle a breakpoint, so the right-hand side is smooth inside
//! every step. After every accepted step a [`Normalize`] hook may rescale the
//! state; the default divides by the norm of the leading block whenever it
//! leaves `[1e-2, 1e2]` and accumulates the natural log of the removed factor.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `z' = M(x) z` on a complex state vector.
pub(crate) trait LinearOde {
    fn dim(&self) -> usize;
    fn apply(&self, x: f64, z: &[Complex64], dz: &mut [Complex64]);
}

#[derive(Debug, Clone)]
pub(crate) struct StepperConfig {
    pub rtol: f64,
    pub h0: f64,
    pub max_steps: usize,
    /// Component ranges that receive independent normwise error control. The
    /// first block also drives renormalization.
    pub blocks: Vec<std::ops::Range<usize>>,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub state: Vec<Complex64>,
    pub log_scale: f64,
}

const RENORM_HIGH: f64 = 1e2;
const RENORM_LOW: f64 = 1e-2;
const H_MIN: f64 = 1e-14;

fn block_norm(z: &[Complex64]) -> f64 {
    z.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Rescaling applied to the state at `x = 0` and after every accepted step.
/// It must map solutions of the linear system to solutions.
pub(crate) trait Normalize {
    fn normalize(&mut self, z: &mut [Complex64], log_scale: &mut f64);
}

/// Scalar rescaling driven by one block.
pub(crate) struct LeadBlock(pub std::ops::Range<usize>);

impl Normalize for LeadBlock {
    fn normalize(&mut self, z: &mut [Complex64], log_scale: &mut f64) {
        let nrm = block_norm(&z[self.0.clone()]);
        if nrm > 0.0 && nrm.is_finite() && !(RENORM_LOW..=RENORM_HIGH).contains(&nrm) {
            let inv = 1.0 / nrm;
            for v in z.iter_mut() {
                *v *= inv;
            }
            *log_scale += nrm.ln();
        }
    }
}

/// Integrate from `x = 0` to `x = 1`, rescaling on the first block.
pub(crate) fn integrate<S: LinearOde>(
    sys: &S,
    z0: Vec<Complex64>,
    log_scale0: f64,
    breakpoints: &[f64],
    cfg: &StepperConfig,
) -> Result<Solution> {
    integrate_normalized(sys, z0, log_scale0, breakpoints, cfg, &mut LeadBlock(cfg.blocks[0].clone()))
}

pub(crate) fn integrate_normalized<S: LinearOde, N: Normalize>(
    sys: &S,
    z0: Vec<Complex64>,
    log_scale0: f64,
    breakpoints: &[f64],
    cfg: &StepperConfig,
    norm: &mut N,
) -> Result<Solution> {
    let n = sys.dim();
    debug_assert_eq!(z0.len(), n);
    let mut z = z0;
    let mut log_scale = log_scale0;
    let mut stages = vec![vec![Complex64::new(0.0, 0.0); n]; 12];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let mut incr = vec![Complex64::new(0.0, 0.0); n];
    let mut znew = vec![Complex64::new(0.0, 0.0); n];

    let mut ends: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > 0.0 && b < 1.0)
        .collect();
    ends.push(1.0);

    let mut x = 0.0;
    let mut h = cfg.h0;
    let mut steps = 0usize;

    norm.normalize(&mut z, &mut log_scale);

    for &end in &ends {
        if end <= x {
            continue;
        }
        while x < end {
            if steps >= cfg.max_steps {
                return Err(Error::Integration {
                    x,
                    reason: format!("step budget of {} exhausted", cfg.max_steps),
                });
            }
            let mut last = false;
            let mut hs = h;
            if x + hs >= end - 1e-15 * end.max(1.0) {
                hs = end - x;
                last = true;
            }
            if hs < H_MIN {
                if last {
                    // sliver before a breakpoint
                    x = end;
                    break;
                }
                return Err(Error::Integration {
                    x,
                    reason: "step size underflow".into(),
                });
            }

            sys.apply(x, &z, &mut stages[0]);
            for s in 1..12 {
                tmp.copy_from_slice(&z);
                for (j, &a) in A[s].iter().enumerate().take(s) {
                    if a != 0.0 {
                        let ah = a * hs;
                        for (t, k) in tmp.iter_mut().zip(&stages[j]) {
                            *t += k * ah;
                        }
                    }
                }
                sys.apply(x + C[s] * hs, &tmp, &mut stages[s]);
            }

            // 8th-order increment
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, &b) in B.iter().enumerate() {
                    if b != 0.0 {
                        acc += stages[s][i] * b;
                    }
                }
                incr[i] = acc;
                znew[i] = z[i] + acc * hs;
            }

            // combined 5th/3rd order error estimate, normwise per block
            let mut err = 0.0f64;
            for block in &cfg.blocks {
                let scale = block_norm(&z[block.clone()])
                    .max(block_norm(&znew[block.clone()]))
                    .max(1e-300);
                let sk = cfg.rtol * scale;
                let mut e5 = 0.0;
                let mut e3 = 0.0;
                for i in block.clone() {
                    let mut er = Complex64::new(0.0, 0.0);
                    for (s, &c) in ER.iter().enumerate() {
                        if c != 0.0 {
                            er += stages[s][i] * c;
                        }
                    }
                    let e3i = incr[i]
                        - stages[0][i] * BHH[0]
                        - stages[8][i] * BHH[1]
                        - stages[11][i] * BHH[2];
                    e5 += (er.norm() / sk).powi(2);
                    e3 += (e3i.norm() / sk).powi(2);
                }
                let mut deno = e5 + 0.01 * e3;
                if deno <= 0.0 {
                    deno = 1.0;
                }
                let len = block.len() as f64;
                let e = hs * e5 / (deno * len).sqrt();
                err = err.max(e);
            }

            let fac = if err == 0.0 {
                6.0
            } else {
                (0.9 * err.powf(-1.0 / 8.0)).clamp(0.2, 6.0)
            };

            if err <= 1.0 {
                steps += 1;
                std::mem::swap(&mut z, &mut znew);
                x = if last { end } else { x + hs };
                norm.normalize(&mut z, &mut log_scale);
                // a step clipped at a breakpoint says little about the next one
                h = if last { h.max(hs * fac) } else { hs * fac };
            } else {
                h = hs * fac.min(1.0);
                if h < H_MIN {
                    return Err(Error::Integration {
                        x,
                        reason: "step size underflow".into(),
                    });
                }
            }
        }
    }

    if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Integration {
            x: 1.0,
            reason: "non-finite state".into(),
        });
    }
    Ok(Solution {
        state: z,
        log_scale,
    })
}

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773E-2,
    7.890_022_793_815_16E-2,
    1.183_503_419_072_274E-1,
    2.816_496_580_927_726E-1,
    3.333_333_333_333_333E-1,
    0.25,
    3.076_923_076_923_077E-1,
    6.512_820_512_820_513E-1,
    0.6,
    8.571_428_571_428_571E-1,
    1.0,
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199E-1,
    -1.521_609_496_625_161E-1,
    2.013_654_008_040_303_4E-1,
    4.471_061_572_777_259E-2,
];

const ER: [f64; 12] = [
    1.312_004_499_419_488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502E-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6E-1,
    3.341_791_187_130_175E-1,
    8.192_320_648_511_571E-2,
    -2.235_530_786_388_629_4E-2,
];

const BHH: [f64; 3] = [
    2.440_944_881_889_764E-1,
    7.338_466_882_816_118E-1,
    2.205_882_352_941_176_6E-2,
];

#[rustfmt::skip]
const A: [[f64; 12]; 12] = [
    [0.0; 12],
    [5.260_015_195_876_773E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.972_505_698_453_79E-2, 5.917_517_095_361_37E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.958_758_547_680_685E-2, 0.0, 8.876_275_643_042_054E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.413_651_341_592_667E-1, 0.0, -8.845_494_793_282_861E-1, 9.248_340_032_617_92E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.703_703_703_703_703_5E-2, 0.0, 0.0, 1.708_286_087_294_738_6E-1, 1.254_676_875_668_224_2E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7109375E-2, 0.0, 0.0, 1.702_522_110_195_440_5E-1, 6.021_653_898_045_596E-2, -1.7578125E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.709_200_011_850_479E-2, 0.0, 0.0, 1.703_839_257_122_399_8E-1, 1.072_620_304_463_732_8E-1, -1.531_943_774_862_440_2E-2, 8.273_789_163_814_023E-3, 0.0, 0.0, 0.0, 0.0, 0.0],
    [6.241_109_587_160_757E-1, 0.0, 0.0, -3.360_892_629_446_941_4, -8.682_193_468_417_26E-1, 2.759_209_969_944_671E1, 2.015_406_755_047_789_4E1, -4.348_988_418_106_996E1, 0.0, 0.0, 0.0, 0.0],
    [4.776_625_364_382_643_4E-1, 0.0, 0.0, -2.488_114_619_971_667_7, -5.902_908_268_368_43E-1, 2.123_005_144_818_119_3E1, 1.527_923_363_288_242_3E1, -3.328_821_096_898_486E1, -2.033_120_170_850_862_7E-2, 0.0, 0.0, 0.0],
    [-9.371_424_300_859_873E-1, 0.0, 0.0, 5.186_372_428_844_064, 1.091_437_348_996_729_5, -8.149_787_010_746_927, -1.852_006_565_999_696E1, 2.273_948_709_935_050_5E1, 2.493_605_552_679_652_3, -3.046_764_471_898_219_6, 0.0, 0.0],
    [2.273_310_147_516_538, 0.0, 0.0, -1.053_449_546_673_725E1, -2.000_872_058_224_862_5, -1.795_893_186_311_88E1, 2.794_888_452_941_996E1, -2.858_998_277_135_023_5, -8.872_856_933_530_63, 1.236_056_717_579_430_3E1, 6.433_927_460_157_636E-1, 0.0],
];

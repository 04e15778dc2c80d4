//! Special functions: normal and Student-t laws, chi-squared and Fisher tails,
//! logistic transforms, and a safeguarded root finder for monotone CDFs.
//!
//! `erfc` comes from `libm`; the incomplete gamma and beta functions come from
//! `statrs`. Everything built on top of them lives here.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail, accurate far into the right tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Standard normal quantile.
///
/// Wichura's AS241 rational approximation followed by one Newton step on the
/// better-conditioned tail. Returns `-inf`/`inf` at 0 and 1 and NaN outside
/// `[0, 1]`.
pub fn norm_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        133.141_667_891_784_377_45,
        1_971.590_950_306_551_442_7,
        13_731.693_765_509_461_125,
        45_921.953_931_549_871_457,
        67_265.770_927_008_700_853,
        33_430.575_583_588_128_105,
        2_509.080_928_730_122_672_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_911_252,
        687.187_007_492_057_908_3,
        5_394.196_021_424_751_107_7,
        21_213.794_301_586_595_867,
        39_307.895_800_092_710_61,
        28_729.085_735_721_942_674,
        5_226.495_278_852_854_561,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        0.241_780_725_177_450_611_77,
        0.022_723_844_989_269_184_583_3,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        0.689_767_334_985_100_004_55,
        0.148_103_976_427_480_074_59,
        0.015_198_666_563_616_457_196_6,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        0.296_560_571_828_504_891_23,
        0.026_532_189_526_576_123_093,
        0.001_242_660_947_388_078_438_6,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_937_69,
        0.136_929_880_922_735_805_31,
        0.014_875_361_290_850_614_852_5,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    let q = p - 0.5;
    let x = if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        q * poly(&A, r) / poly(&B, r)
    } else {
        let r = if q < 0.0 { p } else { 1.0 - p };
        let r = (-r.ln()).sqrt();
        let v = if r <= 5.0 {
            let r = r - 1.6;
            poly(&C, r) / poly(&D, r)
        } else {
            let r = r - 5.0;
            poly(&E, r) / poly(&F, r)
        };
        if q < 0.0 {
            -v
        } else {
            v
        }
    };

    let dens = norm_pdf(x);
    if dens <= 0.0 || !dens.is_finite() {
        return x;
    }
    // residual measured on whichever tail keeps relative precision
    if p <= 0.5 {
        x - (norm_cdf(x) - p) / dens
    } else {
        x + (norm_sf(x) - (1.0 - p)) / dens
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// CDF of the standard Student-t law with `df` degrees of freedom.
pub fn student_t_cdf(x: f64, df: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + x * x));
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

pub fn student_t_pdf(x: f64, df: f64) -> f64 {
    let log_norm = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln();
    (log_norm - 0.5 * (df + 1.0) * (x * x / df).ln_1p()).exp()
}

/// Upper tail `P(X > x)` of the chi-squared law.
pub fn chi2_sf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "chi-squared degrees of freedom must be positive, got {df}"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "chi-squared argument must be nonnegative, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if df.fract() == 0.0 && df <= 30.0 {
        return Ok(chi2_sf_integer(x, df as u32));
    }
    Ok(gamma_ur(0.5 * df, 0.5 * x).clamp(0.0, 1.0))
}

/// Finite-series upper tail for small integer degrees of freedom.
fn chi2_sf_integer(x: f64, df: u32) -> f64 {
    let h = 0.5 * x;
    let e = (-h).exp();
    let value = if df % 2 == 0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..df / 2 {
            term *= h / j as f64;
            sum += term;
        }
        e * sum
    } else {
        let mut sum = erfc(h.sqrt());
        // (x/2)^(j-1/2) / Γ(j+1/2), starting at j = 1
        let mut term = h.sqrt() / (0.5 * PI.sqrt());
        for j in 1..=df / 2 {
            if j > 1 {
                term *= h / (j as f64 - 0.5);
            }
            sum += e * term;
        }
        sum
    };
    value.clamp(0.0, 1.0)
}

/// Upper tail `P(X > x)` of the Fisher F(d1, d2) law.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> Result<f64> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Fisher degrees of freedom must be positive, got ({d1}, {d2})"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Fisher argument must be nonnegative, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(beta_reg(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * x)).clamp(0.0, 1.0))
}

/// Solves `cdf(x) = p` for a continuous, nondecreasing CDF.
///
/// Brackets the root by geometric expansion around `start` (never leaving
/// `[lower, upper]`), then runs Newton steps on `pdf` with bisection as the
/// fallback whenever a step leaves the bracket.
pub(crate) fn invert_cdf(
    p: f64,
    cdf: impl Fn(f64) -> f64,
    pdf: impl Fn(f64) -> f64,
    start: f64,
    scale: f64,
    lower: f64,
    upper: f64,
) -> f64 {
    let mut lo = (start - scale).max(lower);
    let mut hi = (start + scale).min(upper);
    let mut width = scale;
    for _ in 0..2000 {
        if cdf(lo) <= p || lo <= lower {
            break;
        }
        width *= 2.0;
        lo = (start - width).max(lower);
    }
    width = scale;
    for _ in 0..2000 {
        if cdf(hi) >= p || hi >= upper {
            break;
        }
        width *= 2.0;
        hi = (start + width).min(upper);
    }

    let mut x = start.clamp(lo, hi);
    if x <= lo || x >= hi {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = pdf(x);
        let newton = if dens > 0.0 && dens.is_finite() {
            x - f / dens
        } else {
            f64::NAN
        };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let tol = 4.0 * f64::EPSILON * next.abs().max(1e-300);
        if (next - x).abs() <= tol || hi - lo <= tol {
            return next;
        }
        x = next;
    }
    x
}

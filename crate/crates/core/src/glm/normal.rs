//! Standard normal distribution functions used by the probit link and the
//! Wald test.

use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Scaled complementary error function `e^{z²} erfc(z)` for `z >= 0`.
///
/// Uses the positive-term series `erf(z) = 2/√π e^{-z²} Σ 2ⁿz^{2n+1}/(2n+1)!!`
/// below 1.5 and the Laplace continued fraction above; both are accurate to
/// a few ulps in their range.
fn erfcx(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 1.5 {
        let a = 2.0 * z * z;
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        while term > 1e-17 * sum {
            n += 1.0;
            term *= a / (2.0 * n + 1.0);
            sum += term;
        }
        (z * z).exp() - 2.0 * FRAC_1_SQRT_PI * sum
    } else {
        let terms = if z < 2.0 { 100 } else { 60 };
        let mut t = z;
        for k in (1..=terms).rev() {
            t = z + (k as f64 * 0.5) / t;
        }
        FRAC_1_SQRT_PI / t
    }
}

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    let tail = 0.5 * erfcx(z) * (-z * z).exp();
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// `ln Φ(x)`, finite for every finite `x`.
pub fn log_normal_cdf(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    if x < 0.0 {
        (0.5 * erfcx(z)).ln() - z * z
    } else {
        (-0.5 * erfcx(z) * (-z * z).exp()).ln_1p()
    }
}

/// Inverse Mills ratio `φ(x) / Φ(x)`.
pub fn inverse_mills(x: f64) -> f64 {
    if x < 0.0 {
        SQRT_2_OVER_PI / erfcx(-x / std::f64::consts::SQRT_2)
    } else {
        normal_pdf(x) / normal_cdf(x)
    }
}

/// `Φ⁻¹(p)` for `p` in (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // Newton polish against the cdf, in whichever tail keeps precision
    for _ in 0..2 {
        let d = normal_pdf(x);
        if d <= 0.0 {
            break;
        }
        let resid = if p < 0.5 {
            normal_cdf(x) - p
        } else {
            (1.0 - p) - normal_cdf(-x)
        };
        let step = resid / d;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    Ok(x)
}

#[cfg(test)]
#[allow(clippy::approx_constant, clippy::excessive_precision)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // (x, Φ(x), ln Φ(x)) at 40 significant digits, truncated to 20.
    const CDF_REF: &[(f64, f64, f64)] = &[
        (-38.0, 2.885_428_360_068_784_3e-316, -726.557_216_018_820_13),
        (-30.0, 4.906_713_927_148_187e-198, -454.321_243_956_343_2),
        (-20.0, 2.753_624_118_606_233_7e-89, -203.917_155_371_097_26),
        (-8.0, 6.220_960_574_271_784e-16, -35.013_437_159_914_55),
        (-5.0, 2.866_515_718_791_939e-7, -15.064_998_393_988_726),
        (-3.0, 0.001_349_898_031_630_094_5, -6.607_726_221_510_35),
        (-1.0, 0.158_655_253_931_457_05, -1.841_021_645_009_263_5),
        (-0.5, 0.308_537_538_725_986_9, -1.175_911_761_593_618_6),
        (0.0, 0.5, -0.693_147_180_559_945_3),
        (0.3, 0.617_911_422_188_952_6, -0.481_410_161_588_481_2),
        (1.0, 0.841_344_746_068_542_9, -0.172_753_779_023_449_9),
        (2.5, 0.993_790_334_674_223_9, -0.006_229_025_485_860_002),
        (5.0, 0.999_999_713_348_428_1, -2.866_516_129_637_636e-7),
        (8.0, 0.999_999_999_999_999_4, -6.220_960_574_271_786e-16),
    ];

    #[test]
    fn cdf_matches_reference() {
        for &(x, c, lc) in CDF_REF {
            assert!((normal_cdf(x) - c).abs() < 1e-12, "cdf({x}) abs");
            if c > 1e-300 {
                assert!((normal_cdf(x) - c).abs() <= 1e-12 * c, "cdf({x}) rel");
            }
            let got = log_normal_cdf(x);
            assert!((got - lc).abs() <= 1e-12 * lc.abs().max(1e-300), "ln cdf({x}) = {got}, want {lc}");
        }
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn quantile_matches_reference() {
        let refs = [
            (0.975, 1.959_963_984_540_054_2),
            (0.5, 0.0),
            (0.025, -1.959_963_984_540_054_2),
            (0.999, 3.090_232_306_167_813_5),
            (1e-10, -6.361_340_902_404_056),
            (0.3, -0.524_400_512_708_040_8),
            (0.999_999_9, 5.199_337_582_192_817),
        ];
        for (p, q) in refs {
            let got = normal_quantile(p).unwrap();
            assert!((got - q).abs() < 1e-10 * q.abs().max(1.0), "q({p}) = {got}, want {q}");
        }
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn mills_ratio_reference() {
        let refs = [
            (-40.0, 40.024_968_847_207_26),
            (-25.0, 25.039_873_012_057_56),
            (-10.0, 10.098_093_233_962_51),
            (-2.0, 2.373_215_532_822_840_8),
            (0.0, 0.797_884_560_802_865_4),
            (3.0, 0.004_437_839_042_125_664),
        ];
        for (x, m) in refs {
            let got = inverse_mills(x);
            assert!((got - m).abs() < 1e-11 * m, "mills({x}) = {got}, want {m}");
        }
        // continuity across the series/continued-fraction switch
        let z = 1.5 * std::f64::consts::SQRT_2;
        let a = inverse_mills(-z - 1e-12);
        let b = inverse_mills(-z + 1e-12);
        assert!((a - b).abs() < 1e-11);
    }

    proptest! {
        #[test]
        fn cdf_symmetry(x in -30.0f64..30.0) {
            prop_assert!((normal_cdf(-x) - (1.0 - normal_cdf(x))).abs() < 1e-15);
        }

        #[test]
        fn quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
            let x = normal_quantile(p).unwrap();
            prop_assert!((normal_cdf(x) - p).abs() < 1e-10 * p.min(1.0 - p).max(1e-6));
        }
    }
}

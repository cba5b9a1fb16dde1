use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

// Hart (1968), highest degree first.
const NUM: [f64; 7] = [
    3.526_249_659_989_11e-2,
    0.700_383_064_443_688,
    6.373_962_203_531_65,
    33.912_866_078_383,
    112.079_291_497_871,
    221.213_596_169_931,
    220.206_867_912_376,
];
const DEN: [f64; 8] = [
    8.838_834_764_831_84e-2,
    1.755_667_163_182_64,
    16.064_177_579_207,
    86.780_732_202_946_1,
    296.564_248_779_674,
    637.333_633_378_831,
    793.826_512_519_948,
    440.413_735_824_752,
];

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Standard normal CDF.
///
/// Hart's double-precision rational approximation for the lower tail on
/// `|t| < 7.07`, and a five-term continued fraction beyond that. The tail is
/// computed for `|t|` and reflected, so `F(t) + F(-t) = 1` up to one rounding.
pub fn std_normal_cdf(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::domain(format!("normal cdf of non-finite {t}")));
    }
    Ok(normal_cdf(t))
}

pub(crate) fn normal_cdf(t: f64) -> f64 {
    let tail = upper_tail(t.abs());
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `1 - F(x)` for `x >= 0`.
fn upper_tail(x: f64) -> f64 {
    if x > 37.0 {
        return 0.0;
    }
    let e = (-0.5 * x * x).exp();
    if x < 7.071_067_811_865_47 {
        e * horner(&NUM, x) / horner(&DEN, x)
    } else {
        let mut cf = x + 0.65;
        cf = x + 4.0 / cf;
        cf = x + 3.0 / cf;
        cf = x + 2.0 / cf;
        cf = x + 1.0 / cf;
        e / cf / SQRT_2PI
    }
}

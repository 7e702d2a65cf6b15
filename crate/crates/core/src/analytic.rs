//! Closed-form references: Bessel functions of order zero and the 2D
//! outgoing free-space Green's function.
//!
//! Rational and asymptotic approximations with absolute error around 1e-8,
//! well below what discretization errors need.

use std::f64::consts::{FRAC_2_PI as TWO_OVER_PI, FRAC_PI_4 as QUARTER_PI};

use crate::C64;

fn asymptotic_terms(x: f64) -> (f64, f64, f64, f64) {
    let z = 8.0 / x;
    let y = z * z;
    let xx = x - QUARTER_PI;
    let p =
        1.0 + y * (-0.109_862_862_7e-2 + y * (0.273_451_040_7e-4 + y * (-0.207_337_063_9e-5 + y * 0.209_388_721_1e-6)));
    let q = -0.156_249_999_5e-1
        + y * (0.143_048_876_5e-3 + y * (-0.691_114_765_1e-5 + y * (0.762_109_516_1e-6 - y * 0.934_935_152e-7)));
    (z, xx, p, q)
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        let y = x * x;
        let num = 57_568_490_574.0
            + y * (-13_362_590_354.0
                + y * (651_619_640.7 + y * (-11_214_424.18 + y * (77_392.330_17 + y * -184.905_245_6))));
        let den = 57_568_490_411.0
            + y * (1_029_532_985.0 + y * (9_494_680.718 + y * (59_272.648_53 + y * (267.853_271_2 + y))));
        num / den
    } else {
        let (z, xx, p, q) = asymptotic_terms(ax);
        (TWO_OVER_PI / ax).sqrt() * (xx.cos() * p - z * xx.sin() * q)
    }
}

/// Bessel function of the second kind, order zero, for `x > 0`.
pub fn bessel_y0(x: f64) -> f64 {
    assert!(x > 0.0, "Y0 is singular at x ≤ 0");
    if x < 8.0 {
        let y = x * x;
        let num = -2_957_821_389.0
            + y * (7_062_834_065.0
                + y * (-512_359_803.6 + y * (10_879_881.29 + y * (-86_327.927_57 + y * 228.462_273_3))));
        let den = 40_076_544_269.0
            + y * (745_249_964.8 + y * (7_189_466.438 + y * (47_447.264_70 + y * (226.103_024_4 + y))));
        num / den + TWO_OVER_PI * bessel_j0(x) * x.ln()
    } else {
        let (z, xx, p, q) = asymptotic_terms(x);
        (TWO_OVER_PI / x).sqrt() * (xx.sin() * p + z * xx.cos() * q)
    }
}

/// Hankel function `H₀⁽¹⁾(x) = J₀(x) + i Y₀(x)`.
pub fn hankel1_0(x: f64) -> C64 {
    C64::new(bessel_j0(x), bessel_y0(x))
}

/// Outgoing solution of `(-Δ - k²) u = δ` in the plane: `(i/4) H₀⁽¹⁾(k r)`.
pub fn green_2d(k: f64, r: f64) -> C64 {
    C64::new(0.0, 0.25) * hankel1_0(k * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun tables.
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-8);
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-8);
        assert!((bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-8);
        assert!((bessel_y0(1.0) - 0.088_256_964_215_676_96).abs() < 1e-8);
        assert!((bessel_y0(10.0) - 0.055_671_167_283_599_39).abs() < 1e-8);
        assert!((bessel_y0(5.0) + 0.308_517_625_249_033_6).abs() < 1e-8);
    }

    #[test]
    fn wronskian() {
        // J0 Y0' - J0' Y0 = 2/(π x), with J0' = -J1 estimated by differences.
        for &x in &[0.7, 3.0, 9.5, 20.0] {
            let d = 1e-5;
            let dj = (bessel_j0(x + d) - bessel_j0(x - d)) / (2.0 * d);
            let dy = (bessel_y0(x + d) - bessel_y0(x - d)) / (2.0 * d);
            let w = bessel_j0(x) * dy - dj * bessel_y0(x);
            assert!((w - 2.0 / (std::f64::consts::PI * x)).abs() < 1e-6);
        }
    }
}

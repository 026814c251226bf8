//! Special functions for complex arguments: Γ via the Lanczos
//! approximation, Bessel `J_ν(z)` of complex order by power series, and
//! associated Laguerre polynomials by recurrence.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Hard cap on Bessel series terms.
pub const BESSEL_MAX_TERMS: usize = 500;

// g = 7, n = 9
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos sum for `Re z ≥ 1/2`.
fn lanczos(z: C64) -> C64 {
    let z = z - 1.0;
    let mut x = C64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// Γ(z). Poles at the nonpositive integers come back as infinities.
pub fn gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        // reflection
        PI / ((PI * z).sin() * lanczos(C64::new(1.0, 0.0) - z))
    } else {
        lanczos(z)
    }
}

fn is_pole(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// 1/Γ(z), exactly zero at the poles of Γ.
pub fn recip_gamma(z: C64) -> C64 {
    if is_pole(z) {
        return C64::new(0.0, 0.0);
    }
    if z.re < 0.5 {
        (PI * z).sin() * lanczos(C64::new(1.0, 0.0) - z) / PI
    } else {
        1.0 / lanczos(z)
    }
}

/// `Σ_k (−q)^k / (k! Γ(ν+k+1))`, the power series shared by `J_ν`.
fn bessel_series(nu: C64, q: C64) -> Result<C64> {
    // Skip leading terms that vanish because ν+k+1 is a pole of Γ.
    let mut k0 = 0usize;
    while is_pole(nu + (k0 + 1) as f64) {
        k0 += 1;
        if k0 >= BESSEL_MAX_TERMS {
            return Err(Error::BesselRange {
                terms: k0,
                modulus: q.norm().sqrt() * 2.0,
            });
        }
    }
    let mut term = recip_gamma(nu + (k0 + 1) as f64);
    for k in 1..=k0 {
        term *= -q / k as f64;
    }
    let mut sum = term;
    for k in k0..k0 + BESSEL_MAX_TERMS {
        let kf = k as f64;
        term *= -q / ((kf + 1.0) * (nu + kf + 1.0));
        sum += term;
        // only stop once terms are shrinking for good
        let shrinking = q.norm() < (kf + 1.0) * (nu + kf + 1.0).norm();
        if shrinking && term.norm() < 1e-16 * sum.norm() {
            return Ok(sum);
        }
        if term.norm() == 0.0 && sum.norm() == 0.0 {
            return Ok(sum);
        }
    }
    Err(Error::BesselRange {
        terms: BESSEL_MAX_TERMS,
        modulus: q.norm().sqrt() * 2.0,
    })
}

/// Bessel function of the first kind `J_ν(z)` for complex order and
/// argument, principal branch of `(z/2)^ν`.
///
/// At `z = 0` the result is 1 for `ν = 0`, 0 for `Re ν > 0`, and infinite
/// otherwise.
pub fn complex_bessel_j(nu: C64, z: C64) -> Result<C64> {
    if z == C64::new(0.0, 0.0) {
        return Ok(if nu == C64::new(0.0, 0.0) {
            C64::new(1.0, 0.0)
        } else if nu.re > 0.0 {
            C64::new(0.0, 0.0)
        } else {
            C64::new(f64::INFINITY, f64::INFINITY)
        });
    }
    let half = z / 2.0;
    let series = bessel_series(nu, half * half)?;
    Ok(half.powc(nu) * series)
}

/// `J_ν(√w) / w^{ν/2}`, an entire function of `w`; equals
/// `2^{−ν} Σ_k (−w/4)^k / (k! Γ(ν+k+1))`.
pub fn reduced_bessel_j(nu: C64, w: C64) -> Result<C64> {
    let series = bessel_series(nu, w / 4.0)?;
    Ok(C64::new(2.0, 0.0).powc(-nu) * series)
}

/// `L_0^k(x) … L_{count−1}^k(x)` by the three-term recurrence.
pub fn laguerre_sequence(k: usize, x: f64, count: usize, out: &mut Vec<f64>) {
    out.clear();
    if count == 0 {
        return;
    }
    let kf = k as f64;
    out.push(1.0);
    if count == 1 {
        return;
    }
    out.push(1.0 + kf - x);
    for n in 1..count - 1 {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + kf - x) * out[n] - (nf + kf) * out[n - 1]) / (nf + 1.0);
        out.push(next);
    }
}

/// Associated Laguerre polynomial `L_n^k(x)`.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let mut seq = Vec::with_capacity(n + 1);
    laguerre_sequence(k, x, n + 1, &mut seq);
    seq[n]
}

/// `ln n!` for `n = 0 … len−1`.
pub fn log_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    for n in 0..len {
        if n > 1 {
            acc += (n as f64).ln();
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn assert_rel(got: C64, want: C64, tol: f64) {
        let err = (got - want).norm() / want.norm().max(1e-300);
        assert!(err <= tol, "got {got}, want {want}, rel err {err:e}");
    }

    #[test]
    fn gamma_real_values() {
        assert_rel(gamma(c(1.0, 0.0)), c(1.0, 0.0), 1e-14);
        assert_rel(gamma(c(5.0, 0.0)), c(24.0, 0.0), 1e-14);
        assert_rel(gamma(c(0.5, 0.0)), c(PI.sqrt(), 0.0), 1e-14);
        assert_rel(gamma(c(-0.5, 0.0)), c(-2.0 * PI.sqrt(), 0.0), 1e-14);
    }

    // Reference values from 50-digit arithmetic.
    #[test]
    fn gamma_complex_fixtures() {
        assert_rel(
            gamma(c(0.5, 2.0)),
            c(0.089_855_176_706_431_636, -0.060_493_760_292_887_568),
            1e-13,
        );
        assert_rel(
            gamma(c(-1.5, 0.5)),
            c(0.937_916_662_787_885_05, 0.349_205_668_147_804_87),
            1e-13,
        );
    }

    #[test]
    fn recip_gamma_vanishes_at_poles() {
        for n in 0..5 {
            assert_eq!(recip_gamma(c(-(n as f64), 0.0)), c(0.0, 0.0));
        }
        assert_rel(recip_gamma(c(3.0, 0.0)), c(0.5, 0.0), 1e-14);
    }

    #[test]
    fn bessel_integer_order() {
        assert_eq!(complex_bessel_j(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_rel(
            complex_bessel_j(c(0.0, 0.0), c(1.0, 0.0)).unwrap(),
            c(0.765_197_686_557_966_6, 0.0),
            1e-14,
        );
        assert!((complex_bessel_j(c(0.0, 0.0), c(1.0, 0.0)).unwrap().re - 0.765_197_686_6).abs() < 1e-10);
        assert_rel(
            complex_bessel_j(c(1.0, 0.0), c(2.5, 0.0)).unwrap(),
            c(0.497_094_102_464_274_1, 0.0),
            1e-13,
        );
        // J_{−1} = −J_1 through the skipped pole terms
        let j1 = complex_bessel_j(c(1.0, 0.0), c(0.7, 0.2)).unwrap();
        let jm1 = complex_bessel_j(c(-1.0, 0.0), c(0.7, 0.2)).unwrap();
        assert_rel(jm1, -j1, 1e-13);
    }

    #[test]
    fn bessel_half_order_closed_form() {
        // J_{1/2}(x) = √(2/(πx)) sin x
        for x in [0.3, 1.0, 4.0, 9.0] {
            let want = (2.0 / (PI * x)).sqrt() * x.sin();
            assert_rel(complex_bessel_j(c(0.5, 0.0), c(x, 0.0)).unwrap(), c(want, 0.0), 1e-12);
        }
    }

    // Reference values from 50-digit arithmetic.
    #[test]
    fn bessel_complex_order_fixtures() {
        assert_rel(
            complex_bessel_j(c(1.0, 1.0), c(2.0, 0.0)).unwrap(),
            c(0.874_211_097_673_325_76, -0.222_469_792_478_649_97),
            1e-12,
        );
        assert_rel(
            complex_bessel_j(c(0.5, -0.3), c(1.5, 0.7)).unwrap(),
            c(1.007_268_594_455_528_2, -0.132_399_794_865_530_75),
            1e-12,
        );
        assert_rel(
            complex_bessel_j(c(-11.0 / 15.0, 0.5 / 15.0), c(3.0, -2.0)).unwrap(),
            c(-1.397_179_081_295_627_1, -0.859_551_765_749_493_15),
            1e-12,
        );
    }

    #[test]
    fn reduced_form_matches_quotient() {
        let nu = c(-11.0 / 15.0, 0.5 / 15.0);
        for w in [c(3.0, 1.0), c(-2.0, 0.5), c(0.1, -4.0), c(-5.0, -0.001)] {
            let direct = complex_bessel_j(nu, w.sqrt()).unwrap() / w.powc(nu / 2.0);
            assert_rel(reduced_bessel_j(nu, w).unwrap(), direct, 1e-12);
        }
        assert_rel(
            reduced_bessel_j(nu, c(0.0, 0.0)).unwrap(),
            C64::new(2.0, 0.0).powc(-nu) * recip_gamma(nu + 1.0),
            1e-15,
        );
    }

    #[test]
    fn bessel_range_error() {
        assert!(matches!(
            complex_bessel_j(c(0.0, 0.0), c(2000.0, 0.0)),
            Err(Error::BesselRange { .. })
        ));
    }

    #[test]
    fn laguerre_small_cases() {
        let x = 0.7;
        assert_eq!(laguerre(0, 3, x), 1.0);
        assert!((laguerre(1, 0, x) - (1.0 - x)).abs() < 1e-15);
        assert!((laguerre(2, 0, x) - (x * x - 4.0 * x + 2.0) / 2.0).abs() < 1e-15);
        // L_2^1(x) = (x² − 6x + 6)/2
        assert!((laguerre(2, 1, x) - (x * x - 6.0 * x + 6.0) / 2.0).abs() < 1e-15);
        // L_n^k(0) = C(n+k, n)
        assert!((laguerre(4, 2, 0.0) - 15.0).abs() < 1e-13);
    }

    #[test]
    fn log_factorial_table() {
        let lf = log_factorials(6);
        assert_eq!(lf[0], 0.0);
        assert_eq!(lf[1], 0.0);
        assert!((lf[5] - 120f64.ln()).abs() < 1e-14);
    }
}

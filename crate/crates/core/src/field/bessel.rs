//! Integer-order Bessel functions of the first kind.
//!
//! Evaluated from Bessel's integral
//! `J_n(x) = (1/2π)∫₀^{2π} cos(nτ − x·sin τ) dτ` with the trapezoidal rule.
//! The integrand is periodic and entire, so the rule converges geometrically:
//! with `M` nodes the error is bounded by the aliased terms `J_{M±n}(x)`,
//! negligible once `M ≥ 2|x| + 40`.

use std::f64::consts::PI;

pub fn bessel_jn(n: u32, x: f64) -> f64 {
    let nodes = 2 * (x.abs().ceil() as usize) + 40 + n as usize;
    let h = 2.0 * PI / nodes as f64;
    let sum: f64 = (0..nodes)
        .map(|j| {
            let tau = j as f64 * h;
            (n as f64 * tau - x * tau.sin()).cos()
        })
        .sum();
    sum / nodes as f64
}

pub fn bessel_j1(x: f64) -> f64 {
    bessel_jn(1, x)
}

/// `2·J₁(u)/u`, with its limit 1 at `u = 0`.
pub fn jinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 8.0 + u2 * u2 / 192.0
    } else {
        2.0 * bessel_j1(u) / u
    }
}

/// First positive zero of J₁ (≈ 3.8317), by bisection.
pub fn j1_first_zero() -> f64 {
    let (mut lo, mut hi) = (3.0, 4.5);
    let mut f_lo = bessel_j1(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = bessel_j1(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_values() {
        // Abramowitz & Stegun, Table 9.1.
        assert!((bessel_jn(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j1(10.0) - 0.043_472_746_168_861_44).abs() < 1e-14);
        assert_eq!(bessel_j1(0.0), 0.0);
        assert!((bessel_j1(-2.0) + bessel_j1(2.0)).abs() < 1e-15);
    }

    #[test]
    fn first_zero() {
        let z = j1_first_zero();
        assert!((z - 3.831_705_970_207_512).abs() < 1e-12, "{z}");
        assert!(bessel_j1(z).abs() < 1e-14);
    }

    #[test]
    fn jinc_limit_is_continuous() {
        assert_eq!(jinc(0.0), 1.0);
        let a = jinc(0.99e-4);
        let b = jinc(1.01e-4);
        assert!((a - b).abs() < 1e-9);
    }
}

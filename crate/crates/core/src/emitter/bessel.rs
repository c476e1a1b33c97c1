//! Zeroth-order Bessel function of the first kind.

/// First positive zero of `J0`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 60.0;

/// `J0(x)` for any finite `x`.
///
/// Power series for `|x| <= 8`, Miller backward recurrence normalised by
/// `J0 + 2 (J2 + J4 + ...) = 1` up to `|x| = 60`, Hankel asymptotic
/// expansion beyond. Absolute error is below `1e-13` on `|x| <= 30`.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_LIMIT {
        series(ax)
    } else if ax <= ASYMPTOTIC_LIMIT {
        miller(ax)
    } else {
        hankel(ax)
    }
}

fn series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn miller(x: f64) -> f64 {
    // Start well above x so the neglected tail is below double precision.
    let mut start = (x + 30.0 + 6.0 * x.sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut even_sum = 0.0;
    let mut j0 = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        let idx = k - 1;
        if idx == 0 {
            j0 = cur;
        } else if idx % 2 == 0 {
            even_sum += cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            even_sum *= 1e-250;
        }
    }
    j0 / (j0 + 2.0 * even_sum)
}

fn hankel(x: f64) -> f64 {
    // J0(x) = sqrt(2/(pi x)) [P cos(x - pi/4) - Q sin(x - pi/4)] with
    // a_k = prod_{j<=k} (-(2j-1)^2) / (k! 8^k),
    // P = sum (-1)^k a_{2k} / x^{2k}, Q = sum (-1)^k a_{2k+1} / x^{2k+1}.
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    for k in 1..40usize {
        let odd = (2 * k - 1) as f64;
        let updated = term * (-odd * odd) / (k as f64 * 8.0 * x);
        if updated.abs() >= term.abs() || updated.abs() < 1e-18 {
            break;
        }
        term = updated;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
    }
    let phase = x - std::f64::consts::FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * phase.cos() - q * phase.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Truncated power series, written independently of the implementation.
    fn series_oracle(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut fact = 1.0f64;
        for k in 0..60 {
            if k > 0 {
                fact *= k as f64;
            }
            sum += (-x * x / 4.0).powi(k) / (fact * fact);
        }
        sum
    }

    /// J0(x) = (1/pi) int_0^pi cos(x sin t) dt; the trapezoidal rule is
    /// spectrally accurate for this periodic integrand.
    fn quadrature_oracle(x: f64) -> f64 {
        let n = 400;
        let h = std::f64::consts::PI / n as f64;
        let f = |t: f64| (x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h / std::f64::consts::PI
    }

    #[test]
    fn known_values() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!((bessel_j0(1.0) - 0.765_197_686_6).abs() < 1e-10);
        assert!((bessel_j0(1.0) - series_oracle(1.0)).abs() < 1e-14);
        assert!(bessel_j0(2.404_826).abs() < 1e-6);
        assert!(series_oracle(2.404_826).abs() < 1e-6);
        assert!(bessel_j0(J0_FIRST_ZERO).abs() < 1e-15);
    }

    #[test]
    fn matches_series_on_small_arguments() {
        for i in 0..=100 {
            let x = i as f64 * 0.08;
            assert!((bessel_j0(x) - series_oracle(x)).abs() < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn matches_quadrature_up_to_thirty() {
        for i in 0..=600 {
            let x = i as f64 * 0.05;
            let err = (bessel_j0(x) - quadrature_oracle(x)).abs();
            assert!(err < 1e-12, "x = {x}, err = {err}");
            assert_eq!(bessel_j0(-x), bessel_j0(x));
        }
    }

    #[test]
    fn branches_agree_at_switch_points() {
        let x = SERIES_LIMIT;
        assert!((series(x) - miller(x)).abs() < 1e-13);
        let x = ASYMPTOTIC_LIMIT;
        assert!((miller(x) - hankel(x)).abs() < 1e-14);
        assert!((miller(80.0) - hankel(80.0)).abs() < 1e-14);
    }
}

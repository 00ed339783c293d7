//! Special functions used by the fading densities and the closed-form
//! interference expressions.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::NumericsError;

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

/// Gamma function on the real line (poles at non-positive integers give
/// infinities).
pub fn gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 && x == x.floor() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    if x > 171.7 {
        return f64::INFINITY;
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Natural log of |Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Below this argument I₀ uses its power series, above it the asymptotic
/// expansion.
const I0_SWITCH: f64 = 20.0;

/// Exponentially scaled modified Bessel function `e^{-x} I₀(x)` for x ≥ 0.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= I0_SWITCH {
        i0_series(x) * (-x).exp()
    } else {
        i0_scaled_asymptotic(x)
    }
}

/// Modified Bessel function I₀(x).
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= I0_SWITCH {
        i0_series(x)
    } else {
        i0_scaled_asymptotic(x) * x.exp()
    }
}

fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn i0_scaled_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd / (8.0 * k as f64 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// Below this |z| the incomplete gamma uses the power series, above it the
/// continued fraction.
const GAMMA_SWITCH: f64 = 4.0;

/// Upper incomplete gamma `Γ(s, z)` for real `s` (not a non-positive
/// integer) and complex `z` off the negative real axis, principal branch.
pub fn upper_incomplete_gamma(s: f64, z: Complex64) -> Result<Complex64, NumericsError> {
    if s <= 0.0 && s == s.floor() {
        return Err(NumericsError::InvalidParameter(format!(
            "incomplete gamma order {s} is a non-positive integer"
        )));
    }
    if z.norm() == 0.0 {
        if s > 0.0 {
            return Ok(Complex64::new(gamma(s), 0.0));
        }
        return Err(NumericsError::InvalidParameter(
            "Γ(s, 0) diverges for s ≤ 0".into(),
        ));
    }
    if z.im == 0.0 && z.re < 0.0 {
        return Err(NumericsError::InvalidParameter(
            "incomplete gamma argument on the branch cut".into(),
        ));
    }
    if z.norm() < GAMMA_SWITCH {
        incomplete_gamma_series(s, z)
    } else {
        incomplete_gamma_fraction(s, z)
    }
}

fn incomplete_gamma_series(s: f64, z: Complex64) -> Result<Complex64, NumericsError> {
    // γ(s, z) = z^s Σ (-z)^k / (k! (s + k))
    let mut power = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(1.0 / s, 0.0);
    for k in 1..400 {
        power *= -z / k as f64;
        let term = power / (s + k as f64);
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            let lower = (s * z.ln()).exp() * sum;
            return Ok(Complex64::new(gamma(s), 0.0) - lower);
        }
    }
    Err(NumericsError::NonConvergence {
        what: "incomplete gamma series",
        value: sum.norm(),
    })
}

fn incomplete_gamma_fraction(s: f64, z: Complex64) -> Result<Complex64, NumericsError> {
    // Γ(s, z) = e^{-z} z^s / (z + 1 - s - 1(1-s)/(z + 3 - s - 2(2-s)/(...)))
    // evaluated by the modified Lentz method.
    let tiny = Complex64::new(1e-300, 0.0);
    let mut b = z + 1.0 - s;
    let mut c = Complex64::new(1.0 / 1e-300, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 1..2000 {
        let fi = i as f64;
        let an = -fi * (fi - s);
        b += 2.0;
        d = an * d + b;
        if d.norm() < 1e-300 {
            d = tiny;
        }
        c = b + an / c;
        if c.norm() < 1e-300 {
            c = tiny;
        }
        d = Complex64::new(1.0, 0.0) / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            return Ok((-z + s * z.ln()).exp() * h);
        }
    }
    Err(NumericsError::NonConvergence {
        what: "incomplete gamma continued fraction",
        value: h.norm(),
    })
}

/// Gauss hypergeometric function ₂F₁(a, b; c; z) for real parameters and
/// complex `z`.
///
/// Uses the power series for |z| < 0.9, the Pfaff transformation when
/// |z/(z-1)| < 0.9 and the 1/z connection formula when |1/z| < 0.9. The last
/// one needs `a - b` to be a non-integer.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: Complex64) -> Result<Complex64, NumericsError> {
    if c <= 0.0 && c == c.floor() {
        return Err(NumericsError::InvalidParameter(format!(
            "₂F₁ lower parameter {c} is a non-positive integer"
        )));
    }
    const RADIUS: f64 = 0.9;
    if z.norm() < RADIUS {
        return hyp2f1_series(a, b, c, z);
    }
    let one = Complex64::new(1.0, 0.0);
    let w = z / (z - one);
    if w.norm() < RADIUS {
        // F(a,b;c;z) = (1-z)^{-a} F(a, c-b; c; z/(z-1))
        let f = hyp2f1_series(a, c - b, c, w)?;
        return Ok((one - z).powf(-a) * f);
    }
    let inv = one / z;
    if inv.norm() < RADIUS {
        let d = a - b;
        if d == d.round() {
            return Err(NumericsError::InvalidParameter(
                "₂F₁ 1/z continuation needs a - b non-integer".into(),
            ));
        }
        let minus_z = -z;
        let g_c = gamma(c);
        let first = rgamma_ratio(g_c * gamma(b - a), &[b, c - a]);
        let second = rgamma_ratio(g_c * gamma(a - b), &[a, c - b]);
        let mut total = Complex64::new(0.0, 0.0);
        if first != 0.0 {
            total += first
                * minus_z.powf(-a)
                * hyp2f1_series(a, a - c + 1.0, a - b + 1.0, inv)?;
        }
        if second != 0.0 {
            total += second
                * minus_z.powf(-b)
                * hyp2f1_series(b, b - c + 1.0, b - a + 1.0, inv)?;
        }
        return Ok(total);
    }
    Err(NumericsError::InvalidParameter(format!(
        "₂F₁ argument {z} lies outside every supported region"
    )))
}

/// `num / Π Γ(args)`, treating poles in the denominator as zeros.
fn rgamma_ratio(num: f64, args: &[f64]) -> f64 {
    let mut value = num;
    for &x in args {
        if x <= 0.0 && x == x.floor() {
            return 0.0;
        }
        value /= gamma(x);
    }
    value
}

fn hyp2f1_series(a: f64, b: f64, c: f64, z: Complex64) -> Result<Complex64, NumericsError> {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 0..5000 {
        let kf = k as f64;
        term *= z * ((a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)));
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() || term.norm() == 0.0 {
            return Ok(sum);
        }
    }
    Err(NumericsError::NonConvergence {
        what: "hypergeometric series",
        value: sum.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn gamma_matches_reference() {
        for &x in &[0.1, 0.5, 1.0, 1.5, 2.5, 7.3, 20.0, -0.5, -1.5, -0.25] {
            let expected = statrs::function::gamma::gamma(x);
            assert!(
                (gamma(x) - expected).abs() <= 1e-13 * expected.abs(),
                "Γ({x}) = {} vs {expected}",
                gamma(x)
            );
            assert!(
                (ln_gamma(x) - expected.abs().ln()).abs() < 1e-12,
                "lnΓ({x})"
            );
        }
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn i0_known_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        // I₀(1), I₀(5) reference values
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_44).abs() < 1e-12);
    }

    #[test]
    fn i0_continuous_at_switch() {
        let below = i0_series(I0_SWITCH) * (-I0_SWITCH).exp();
        let above = i0_scaled_asymptotic(I0_SWITCH);
        assert!((below - above).abs() < 1e-14 * below, "{below} vs {above}");
    }

    #[test]
    fn i0_series_vs_quadrature() {
        // I₀(x) = (1/π) ∫_0^π e^{x cos θ} dθ
        for &x in &[0.3, 3.0, 15.0, 40.0] {
            let n = 20_000;
            let h = PI / n as f64;
            let mut s = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                s += w * (x * ((i as f64 * h).cos() - 1.0)).exp();
            }
            let oracle = s * h / PI;
            let v = bessel_i0_scaled(x);
            assert!((v - oracle).abs() < 1e-12 * oracle, "x={x}: {v} vs {oracle}");
        }
    }

    #[test]
    fn incomplete_gamma_positive_real() {
        // Γ(1, x) = e^{-x}; Γ(0.5, x) = √π erfc(√x)
        for &x in &[0.5, 2.0, 3.9, 4.1, 9.0] {
            let z = Complex64::new(x, 0.0);
            let g1 = upper_incomplete_gamma(1.0, z).unwrap();
            assert!(close(g1, Complex64::new((-x).exp(), 0.0), 1e-13));
        }
        // mpmath reference values
        let cases = [
            (0.5, Complex64::new(0.5, 0.0), Complex64::new(0.562_418_231_594_407, 0.0)),
            (-0.5, Complex64::new(4.0, 0.0), Complex64::new(0.001_733_500_127_388_85, 0.0)),
            (
                -0.5,
                Complex64::new(0.0, -3.0),
                Complex64::new(0.043_165_804_916_472_7, -0.159_009_055_244_071),
            ),
        ];
        for (s, z, expected) in cases {
            let g = upper_incomplete_gamma(s, z).unwrap();
            assert!(close(g, expected, 1e-12), "Γ({s}, {z}) = {g}");
        }
    }

    #[test]
    fn incomplete_gamma_negative_order_recurrence() {
        // Γ(s+1, z) = s Γ(s, z) + z^s e^{-z}
        let s = -0.5;
        for &z in &[
            Complex64::new(0.0, -0.3),
            Complex64::new(0.0, -3.0),
            Complex64::new(0.0, -7.0),
            Complex64::new(1.0, 2.0),
        ] {
            let lhs = upper_incomplete_gamma(s + 1.0, z).unwrap();
            let rhs = s * upper_incomplete_gamma(s, z).unwrap() + (s * z.ln() - z).exp();
            assert!(close(lhs, rhs, 1e-12), "z={z}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn incomplete_gamma_continuous_at_switch() {
        for &angle in &[-1.5, -0.7, 0.0, 0.9, 1.5] {
            let z = Complex64::from_polar(GAMMA_SWITCH, angle);
            let a = incomplete_gamma_series(-0.5, z).unwrap();
            let b = incomplete_gamma_fraction(-0.5, z).unwrap();
            // the series loses a few digits to cancellation near the real axis
            assert!(close(a, b, 1e-10), "angle {angle}: {a} vs {b}");
        }
    }

    #[test]
    fn incomplete_gamma_rejects_bad_input() {
        assert!(upper_incomplete_gamma(-1.0, Complex64::new(1.0, 0.0)).is_err());
        assert!(upper_incomplete_gamma(0.5, Complex64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn hyp2f1_log_identity_all_regions() {
        // ₂F₁(1, 1; 2; z) = -ln(1 - z)/z
        for &z in &[
            Complex64::new(0.3, 0.2),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.5),
            Complex64::new(-3.0, 0.5),
        ] {
            let expected = -(Complex64::new(1.0, 0.0) - z).ln() / z;
            let v = hyp2f1(1.0, 1.0, 2.0, z).unwrap();
            assert!(close(v, expected, 1e-12), "z={z}: {v} vs {expected}");
        }
        assert!(hyp2f1(1.0, 1.0, 2.0, Complex64::new(0.0, -40.0)).is_err());
    }

    #[test]
    fn hyp2f1_inverse_region() {
        // c = b gives (1 - z)^{-a}; a - b non-integer exercises the 1/z branch.
        let (a, b) = (0.3, 1.7);
        for &z in &[Complex64::new(0.0, -5.0), Complex64::new(2.0, 3.0)] {
            let expected = (Complex64::new(1.0, 0.0) - z).powf(-a);
            let direct = (z.inv()).norm() < 0.9;
            assert!(direct);
            let v = hyp2f1(a, b, b, z).unwrap();
            assert!(close(v, expected, 1e-11), "z={z}: {v} vs {expected}");
        }
    }

    #[test]
    fn hyp2f1_regions_agree_on_overlap() {
        let (a, b, c) = (1.0, 1.5, 2.5);
        // |z| ≈ 1.05: both Pfaff and 1/z apply.
        let z = Complex64::new(0.0, -1.05);
        let w = z / (z - 1.0);
        let pfaff = (Complex64::new(1.0, 0.0) - z).powf(-a) * hyp2f1_series(a, c - b, c, w).unwrap();
        let v = hyp2f1(a, b, c, z).unwrap();
        assert!(close(v, pfaff, 1e-12));
        let inv = z.inv();
        let g_c = gamma(c);
        let first = g_c * gamma(b - a) / (gamma(b) * gamma(c - a));
        let second = g_c * gamma(a - b) / (gamma(a) * gamma(c - b));
        let conn = first * (-z).powf(-a) * hyp2f1_series(a, a - c + 1.0, a - b + 1.0, inv).unwrap()
            + second * (-z).powf(-b) * hyp2f1_series(b, b - c + 1.0, b - a + 1.0, inv).unwrap();
        assert!(close(conn, pfaff, 1e-11), "{conn} vs {pfaff}");
    }
}

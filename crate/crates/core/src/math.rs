//! Small numerical helpers shared across modules.

/// Natural log of the gamma function.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Modified Bessel function of the first kind, order 0.
///
/// Abramowitz & Stegun 9.8.1/9.8.2 polynomial approximations
/// (|error| < 2e-7 over the full range).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 3.75 {
        let t = (x / 3.75) * (x / 3.75);
        1.0 + t * (3.5156229
            + t * (3.0899424
                + t * (1.2067492 + t * (0.2659732 + t * (0.0360768 + t * 0.0045813)))))
    } else {
        let t = 3.75 / ax;
        (ax.exp() / ax.sqrt())
            * (0.39894228
                + t * (0.01328592
                    + t * (0.00225319
                        + t * (-0.00157565
                            + t * (0.00916281
                                + t * (-0.02057706
                                    + t * (0.02635537 + t * (-0.01647633 + t * 0.00392377))))))))
    }
}

/// Modified Bessel function of the first kind, order 1.
///
/// Abramowitz & Stegun 9.8.3/9.8.4.
pub(crate) fn bessel_i1(x: f64) -> f64 {
    let ax = x.abs();
    let ans = if ax < 3.75 {
        let t = (x / 3.75) * (x / 3.75);
        ax * (0.5
            + t * (0.87890594
                + t * (0.51498869
                    + t * (0.15084934 + t * (0.02658733 + t * (0.00301532 + t * 0.00032411))))))
    } else {
        let t = 3.75 / ax;
        let poly = 0.39894228
            + t * (-0.03988024
                + t * (-0.00362018
                    + t * (0.00163801
                        + t * (-0.01031555
                            + t * (0.02282967
                                + t * (-0.02895312 + t * (0.01787654 - t * 0.00420059)))))));
        ax.exp() / ax.sqrt() * poly
    };
    if x < 0.0 {
        -ans
    } else {
        ans
    }
}

/// FNV-1a over a byte slice; used for stable config fingerprints.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// SplitMix64 step; used to derive independent per-draw RNG seeds.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn i0_series(x: f64) -> f64 {
        // Σ (x/2)^{2k} / (k!)^2, plenty for |x| < 10
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= (x / 2.0) * (x / 2.0) / ((k * k) as f64);
            sum += term;
        }
        sum
    }

    fn i1_series(x: f64) -> f64 {
        // Σ (x/2)^{2k+1} / (k! (k+1)!)
        let mut term = x / 2.0;
        let mut sum = term;
        for k in 1..60 {
            term *= (x / 2.0) * (x / 2.0) / ((k * (k + 1)) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_matches_series() {
        for &x in &[0.01, 0.09, 0.5, 1.0, 2.0, 3.7, 5.0, 8.0] {
            assert_relative_eq!(bessel_i0(x), i0_series(x), max_relative = 5e-7);
            assert_relative_eq!(bessel_i1(x), i1_series(x), max_relative = 5e-7);
        }
        assert_eq!(bessel_i0(0.0), 1.0);
        assert_eq!(bessel_i1(0.0), 0.0);
        assert_relative_eq!(bessel_i1(-1.0), -i1_series(1.0), max_relative = 5e-7);
    }

    #[test]
    fn ln_gamma_factorials() {
        assert_relative_eq!(ln_gamma(5.0), 24.0_f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        // Γ(1/2) = √π
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn fnv1a_stable() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}

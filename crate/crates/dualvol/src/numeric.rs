//! Scalar numerics shared across the crate: log-gamma, incomplete gamma,
//! deterministic summation, adaptive 1D quadrature, and seed splitting.

use crate::error::Error;
use nalgebra::DMatrix;
use rand::Rng;

/// Lanczos approximation (g = 7, 9 terms) of log Γ(x) for x > 0.
///
/// Local implementation on purpose: the unit-ball volumes and the Gaussian
/// moment constants must not depend on an external special-function crate.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Volume ω_n of the n-dimensional Euclidean unit ball: π^{n/2} / Γ(n/2 + 1).
pub fn unit_ball_volume(n: usize) -> f64 {
    assert!(n >= 1, "dimension must be at least 1");
    let nf = n as f64;
    (0.5 * nf * std::f64::consts::PI.ln() - ln_gamma(0.5 * nf + 1.0)).exp()
}

/// Surface measure of the unit sphere 𝕊^{n−1}, i.e. n·ω_n.
pub fn sphere_surface(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Regularized lower incomplete gamma P(a, x) = γ(a, x)/Γ(a).
///
/// Series for x < a+1, continued fraction otherwise (Numerical Recipes style).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series representation
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // continued fraction for Q(a,x), then P = 1 − Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma(a)).exp() * h;
        1.0 - q
    }
}

/// Gaussian measure of a centered Euclidean ball of radius r in ℝⁿ:
/// γ_n(r·B₂ⁿ) = P(χ²_n ≤ r²).
pub fn gaussian_ball_measure(n: usize, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    gamma_p(0.5 * n as f64, 0.5 * r * r)
}

/// Pairwise (cascade) summation with a fixed blocking, so the result does not
/// depend on thread count or chunk scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Adaptive Simpson quadrature of `f` on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64, Error> {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, Error> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        if !flm.is_finite() || !frm.is_finite() {
            return Err(Error::NonFiniteValue(format!(
                "integrand not finite near x = {lm} or x = {rm}"
            )));
        }
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 {
            return Err(Error::IterationLimit(
                "adaptive quadrature recursion limit".into(),
            ));
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    if !fa.is_finite() || !fb.is_finite() || !fm.is_finite() {
        return Err(Error::NonFiniteValue("integrand not finite at endpoints".into()));
    }
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// SplitMix64 mixing step, used to derive independent per-trial seeds from a
/// master seed and a counter without any shared mutable state.
pub fn split_seed(master: u64, counter: u64, salt: u64) -> u64 {
    let mut z = master
        .wrapping_add(counter.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(salt.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random rotation matrix (det +1) via QR of a Gaussian matrix with the sign
/// convention R_ii > 0.
pub fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    use rand_distr::StandardNormal;
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if q.determinant() < 0.0 {
        for i in 0..n {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(2.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(5.0), 24.0_f64.ln(), epsilon = 1e-13);
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-13
        );
        // Γ(1/2 + 4) = 105/16 √π
        assert_relative_eq!(
            ln_gamma(4.5),
            (105.0 / 16.0 * std::f64::consts::PI.sqrt()).ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn unit_ball_volumes() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(unit_ball_volume(1), 2.0, epsilon = 1e-13);
        assert_relative_eq!(unit_ball_volume(2), pi, epsilon = 1e-13);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * pi / 3.0, epsilon = 1e-13);
        assert_relative_eq!(unit_ball_volume(4), pi * pi / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn simpson_matches_closed_forms() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-11);
        // ∫₀^{π/4} sec θ dθ = ln(1+√2)
        let v = adaptive_simpson(&|x: f64| 1.0 / x.cos(), 0.0, std::f64::consts::FRAC_PI_4, 1e-12)
            .unwrap();
        assert_relative_eq!(v, (1.0 + 2.0_f64.sqrt()).ln(), epsilon = 1e-11);
    }

    #[test]
    fn gamma_p_chi_square() {
        // P(χ²₂ ≤ 1) = 1 − e^{−1/2}
        assert_relative_eq!(
            gaussian_ball_measure(2, 1.0),
            1.0 - (-0.5_f64).exp(),
            epsilon = 1e-12
        );
        // quadrature cross-check in n = 3
        let oracle = adaptive_simpson(
            &|r: f64| r * r * (-0.5 * r * r).exp(),
            0.0,
            12.0,
            1e-13,
        )
        .unwrap()
            / (2.0 * std::f64::consts::PI).powf(1.5)
            * sphere_surface(3);
        assert_relative_eq!(gaussian_ball_measure(3, 12.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(oracle, 1.0, epsilon = 1e-10);
        let part = adaptive_simpson(&|r: f64| r * r * (-0.5 * r * r).exp(), 0.0, 1.3, 1e-13)
            .unwrap()
            / (2.0 * std::f64::consts::PI).powf(1.5)
            * sphere_surface(3);
        assert_relative_eq!(gaussian_ball_measure(3, 1.3), part, epsilon = 1e-10);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let xs: Vec<f64> = (0..100_000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let naive: f64 = xs.iter().sum();
        let pw = pairwise_sum(&xs);
        assert_relative_eq!(pw, naive, epsilon = 1e-10);
    }

    #[test]
    fn rotations_are_orthogonal() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for n in 2..=5 {
            let q = random_rotation(n, &mut rng);
            let err = (q.transpose() * &q - DMatrix::<f64>::identity(n, n)).norm();
            assert!(err < 1e-12, "QᵀQ − I = {err}");
            assert_relative_eq!(q.determinant(), 1.0, epsilon = 1e-10);
        }
    }
}

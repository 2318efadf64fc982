//! Reference entropies evaluated directly from their textbook definitions in
//! 256-bit MPFR arithmetic.
//!
//! Nothing here is shared with [`crate::entropy`]: no log-space rewriting, no
//! `expm1`, no floor on tiny probabilities. Every operation is correctly
//! rounded at 256 bits and the final conversion to `f64` is correctly
//! rounded too. The functions are slow and exist so tests have something
//! independent to compare against.

use rug::ops::Pow;
use rug::Float;

use crate::entropy::DEFAULT_EPS;

const PRECISION: u32 = 256;

/// Largest support the oracle accepts.
pub const MAX_SUPPORT: usize = 4096;

fn big(x: f64) -> Float {
    Float::with_val(PRECISION, x)
}

/// Σ p_j^q over the strictly positive entries.
fn power_sum(p: &[f64], q: f64) -> Float {
    let mut total = big(0.0);
    for &x in p.iter().filter(|&&x| x > 0.0) {
        total += big(x).pow(q);
    }
    total
}

fn shannon(p: &[f64]) -> Float {
    let mut total = big(0.0);
    for &x in p.iter().filter(|&&x| x > 0.0) {
        let bx = big(x);
        total -= bx.clone() * bx.ln();
    }
    total
}

fn check_support(p: &[f64]) {
    assert!(
        !p.is_empty() && p.len() <= MAX_SUPPORT,
        "oracle supports 1..={MAX_SUPPORT} outcomes, got {}",
        p.len()
    );
}

/// `-Σ p ln p`.
pub fn oracle_shannon(p: &[f64]) -> f64 {
    check_support(p);
    shannon(p).to_f64()
}

/// `ln(Σ p^α) / (1 - α)`; `α = ∞` gives `-ln max p`.
pub fn oracle_renyi(p: &[f64], alpha: f64) -> f64 {
    check_support(p);
    if alpha.is_infinite() {
        let max = p.iter().copied().fold(0.0, f64::max);
        return (-big(max).ln()).to_f64();
    }
    let one_minus_alpha = big(1.0) - big(alpha);
    (power_sum(p, alpha).ln() / one_minus_alpha).to_f64()
}

/// `(Σ p^q - 1) / (1 - q)`.
pub fn oracle_tsallis(p: &[f64], q: f64) -> f64 {
    check_support(p);
    let one_minus_q = big(1.0) - big(q);
    ((power_sum(p, q) - 1u32) / one_minus_q).to_f64()
}

/// `((Σ p^q)^((1-r)/(1-q)) - 1) / (1 - r)`, the general two-parameter form.
pub fn oracle_sharma_mittal(p: &[f64], q: f64, r: f64) -> f64 {
    check_support(p);
    let one_minus_r = big(1.0) - big(r);
    let one_minus_q = big(1.0) - big(q);
    let exponent = one_minus_r.clone() / one_minus_q;
    ((power_sum(p, q).pow(&exponent) - 1u32) / one_minus_r).to_f64()
}

/// `(exp((1-r) H) - 1) / (1 - r)`, the `q → 1` limit.
pub fn oracle_shannon_limit(p: &[f64], r: f64) -> f64 {
    check_support(p);
    let one_minus_r = big(1.0) - big(r);
    let x = one_minus_r.clone() * shannon(p);
    ((x.exp() - 1u32) / one_minus_r).to_f64()
}

/// Sharma–Mittal entropy with the same degeneracy bands as the production
/// dispatcher, each band evaluated by its own closed form.
pub fn oracle_entropy(p: &[f64], q: f64, r: f64) -> f64 {
    let eps = DEFAULT_EPS;
    let (q_one, r_one) = ((q - 1.0).abs() < eps, (r - 1.0).abs() < eps);
    if q_one && r_one {
        oracle_shannon(p)
    } else if r_one {
        oracle_renyi(p, q)
    } else if (q - r).abs() < eps {
        if q_one {
            oracle_shannon(p)
        } else {
            oracle_tsallis(p, q)
        }
    } else if q_one {
        oracle_shannon_limit(p, r)
    } else {
        oracle_sharma_mittal(p, q, r)
    }
}

/// Modified Rényi entropy of target `y`,
/// `-(1/e)[(1-p_y)(p_y^e - 1) + Σ_{j≠y} p_j((1-p_j)^e - 1)]` with
/// `e = |1 - α|`, for `α ≠ 1`.
pub fn oracle_mod_renyi(p: &[f64], y: usize, alpha: f64) -> f64 {
    check_support(p);
    assert!(y < p.len() && alpha != 1.0, "target in range and α ≠ 1");
    let e = big((1.0 - alpha).abs());
    let py = big(p[y]);
    let mut total = (big(1.0) - &py) * (py.pow(&e) - 1u32);
    for (j, &x) in p.iter().enumerate() {
        if j == y || x == 0.0 {
            continue;
        }
        let rest = big(1.0) - big(x);
        total += big(x) * (rest.pow(&e) - 1u32);
    }
    (-(total / e)).to_f64()
}

/// Correctly rounded `Σ xs`.
pub fn oracle_sum(xs: &[f64]) -> f64 {
    assert!(xs.iter().all(|x| x.is_finite()), "finite inputs");
    let terms: Vec<Float> = xs.iter().map(|&x| Float::with_val(53, x)).collect();
    // a single rounding of the exact sum to binary64's significand
    Float::with_val(53, Float::sum(terms.iter())).to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let uniform = [0.25; 4];
        assert!((oracle_entropy(&uniform, 2.0, 0.5) - 2.0).abs() < 1e-15);
        assert_eq!(oracle_entropy(&[1.0, 0.0, 0.0], 2.0, 0.5), 0.0);
        assert!((oracle_shannon(&[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-16);
        assert!((oracle_renyi(&[0.5, 0.5], f64::INFINITY) - std::f64::consts::LN_2).abs() < 1e-16);
        assert!((oracle_tsallis(&[0.5, 0.5], 2.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn matches_mpmath_reference() {
        // 50-digit mpmath values for [0.7, 0.2, 0.1]
        let p = [0.7, 0.2, 0.1];
        let cases = [
            (oracle_sharma_mittal(&p, 1.5, 1.2), 0.648_181_198_507_248_8),
            (oracle_shannon(&p), 0.801_818_552_543_337_3),
            (oracle_renyi(&p, 0.5), 0.940_133_989_539_785_9),
            (oracle_tsallis(&p, 1.5), 0.586_544_971_448_943_6),
        ];
        for (got, want) in cases {
            assert!((got - want).abs() <= 1e-16 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn sums_round_once() {
        assert_eq!(oracle_sum(&[]), 0.0);
        assert_eq!(oracle_sum(&[1e100, 1.0, -1e100]), 1.0);
        assert_eq!(oracle_sum(&[1.0, 2f64.powi(-53), 2f64.powi(-106)]), 1.0 + 2f64.powi(-52));
    }
}

//! Generalized factorial kernels: rising/falling factorials with arbitrary
//! increment, Lah numbers and their non-central extension, and the partial
//! Bell polynomial oracle they are validated against.

use crate::error::{Error, Result};
use crate::numeric::{Mode, SignedLog, Value};
use crate::partitions::{occupancy_of, set_partitions, EnumerationBudget};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};
use statrs::function::gamma::ln_gamma;

fn rat_rising(x: &BigRational, n: usize, h: &BigRational) -> BigRational {
    let mut acc = BigRational::one();
    let mut term = x.clone();
    for _ in 0..n {
        acc *= &term;
        term += h;
    }
    acc
}

fn slog_rising(x: f64, n: usize, h: f64) -> SignedLog {
    if n == 0 {
        return SignedLog::one();
    }
    if h == 0.0 {
        if x == 0.0 {
            return SignedLog::zero();
        }
        let base = SignedLog::from_f64(x);
        return SignedLog {
            sign: if base.sign < 0 && n % 2 == 1 { -1 } else { 1 },
            log_abs: n as f64 * base.log_abs,
        };
    }
    // All factors positive: a gamma-ratio shortcut keeps this O(1).
    if h == 1.0 && x > 0.0 {
        return SignedLog {
            sign: 1,
            log_abs: ln_gamma(x + n as f64) - ln_gamma(x),
        };
    }
    if h == -1.0 && x - n as f64 + 1.0 > 0.0 {
        return SignedLog {
            sign: 1,
            log_abs: ln_gamma(x + 1.0) - ln_gamma(x - n as f64 + 1.0),
        };
    }
    let mut sign = 1i8;
    let mut log_abs = 0.0f64;
    for i in 0..n {
        let factor = x + i as f64 * h;
        if factor == 0.0 {
            return SignedLog::zero();
        }
        if factor < 0.0 {
            sign = -sign;
        }
        log_abs += factor.abs().ln();
    }
    SignedLog { sign, log_abs }
}

/// Rising factorial with increment: x (x+h) (x+2h) ... (x+(n-1)h).
///
/// Empty product for `n == 0`; `h == 0` degenerates to the power `x^n`.
pub fn rising_factorial(x: &Value, n: usize, h: &Value) -> Value {
    match (x, h) {
        (Value::Exact(xr), Value::Exact(hr)) => Value::Exact(rat_rising(xr, n, hr)),
        (Value::Log(xs), Value::Log(hs)) => Value::Log(slog_rising(xs.to_f64(), n, hs.to_f64())),
        _ => panic!("mixed numeric backends in one expression"),
    }
}

/// Falling factorial with increment: (x)_{n falling h} = (x)_{n rising -h}.
pub fn falling_factorial(x: &Value, n: usize, h: &Value) -> Value {
    rising_factorial(x, n, &-h)
}

/// Rising factorial with unit increment.
pub fn rising(x: &Value, n: usize) -> Value {
    rising_factorial(x, n, &Value::one(x.mode()))
}

/// Falling factorial with unit increment.
pub fn falling(x: &Value, n: usize) -> Value {
    rising_factorial(x, n, &-Value::one(x.mode()))
}

fn int_factor_product(factors: impl Iterator<Item = i64>, mode: Mode) -> Value {
    match mode {
        Mode::Exact => {
            let mut acc = BigInt::one();
            for f in factors {
                acc *= BigInt::from(f);
            }
            Value::from_bigint(&acc, mode)
        }
        Mode::Log => {
            let mut sign = 1i8;
            let mut log_abs = 0.0f64;
            for f in factors {
                if f == 0 {
                    return Value::zero(mode);
                }
                if f < 0 {
                    sign = -sign;
                }
                log_abs += (f.unsigned_abs() as f64).ln();
            }
            Value::Log(SignedLog { sign, log_abs })
        }
    }
}

/// Unit-increment rising factorial of an integer base. Unlike the log-domain
/// `Value` route, the factors stay integers, so an exactly-zero factor is
/// detected in either backend.
pub fn rising_int(base: i64, n: usize, mode: Mode) -> Value {
    int_factor_product((0..n as i64).map(|i| base + i), mode)
}

/// Unit-increment falling factorial of an integer base; exactly zero in both
/// backends whenever the order exceeds a non-negative base.
pub fn falling_int(base: i64, n: usize, mode: Mode) -> Value {
    int_factor_product((0..n as i64).map(|i| base - i), mode)
}

pub fn factorial_int(n: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    acc
}

pub fn factorial(n: usize, mode: Mode) -> Value {
    match mode {
        Mode::Exact => Value::from_bigint(&factorial_int(n), mode),
        Mode::Log => Value::Log(SignedLog {
            sign: 1,
            log_abs: ln_gamma(n as f64 + 1.0),
        }),
    }
}

pub fn binomial_int(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub fn binomial(n: usize, k: usize, mode: Mode) -> Value {
    match mode {
        Mode::Exact => Value::from_bigint(&binomial_int(n, k), mode),
        Mode::Log => {
            if k > n {
                Value::zero(mode)
            } else {
                Value::Log(SignedLog {
                    sign: 1,
                    log_abs: ln_gamma(n as f64 + 1.0)
                        - ln_gamma(k as f64 + 1.0)
                        - ln_gamma((n - k) as f64 + 1.0),
                })
            }
        }
    }
}

/// Binomial coefficient with a real (possibly negative) upper argument:
/// C(x, j) = (x)_{j falling} / j!.
pub fn gen_binomial(x: &Value, j: usize) -> Value {
    &falling(x, j) / &factorial(j, x.mode())
}

/// Lah number: C(n-1, k-1) n!/k!, exactly; zero outside 1 <= k <= n.
/// The degenerate (0, 0) case is the empty partition and equals one.
pub fn lah_int(n: usize, k: usize) -> BigInt {
    if n == 0 {
        return if k == 0 { BigInt::one() } else { BigInt::zero() };
    }
    if k < 1 || k > n {
        return BigInt::zero();
    }
    binomial_int(n - 1, k - 1) * factorial_int(n) / factorial_int(k)
}

pub fn lah(n: usize, k: usize, mode: Mode) -> Value {
    Value::from_bigint(&lah_int(n, k), mode)
}

/// Non-central Lah number with real shift `r`: (n!/k!) C(n - r - 1, n - k).
///
/// Integer shifts can make the binomial factor vanish; the log backend only
/// detects that zero when the factor happens to be an exact f64, so use the
/// exact backend where vanishing matters.
pub fn noncentral_lah(n: usize, k: usize, r: &Value) -> Result<Value> {
    if n < 1 || k < 1 || k > n {
        return Err(Error::InvalidArgument(format!(
            "non-central Lah number needs 1 <= k <= n, got n={n}, k={k}"
        )));
    }
    let mode = r.mode();
    let x = &Value::from_usize(n - 1, mode) - r;
    let ratio = &factorial(n, mode) / &factorial(k, mode);
    Ok(&ratio * &gen_binomial(&x, n - k))
}

/// Partial Bell polynomial specialization: the sum over set partitions of an
/// `n`-set into `k` blocks of the product of (1 - alpha) rising to each block
/// size minus one. Exhaustive enumeration; the independent ground truth for
/// the generalized Stirling slice used here.
pub fn bell_polynomial_stirling(
    n: usize,
    k: usize,
    alpha: &Value,
    budget: &EnumerationBudget,
) -> Result<Value> {
    if n < 1 || k < 1 || k > n {
        return Err(Error::InvalidArgument(format!(
            "Bell polynomial oracle needs 1 <= k <= n, got n={n}, k={k}"
        )));
    }
    let mode = alpha.mode();
    let base = &Value::one(mode) - alpha;
    let mut total = Value::zero(mode);
    for rgs in set_partitions(n, budget)? {
        let occ = occupancy_of(&rgs);
        if occ.len() != k {
            continue;
        }
        let mut prod = Value::one(mode);
        for size in occ {
            prod = &prod * &rising(&base, size - 1);
        }
        total = &total + &prod;
    }
    Ok(total)
}

fn value_pow(x: &Value, k: usize) -> Value {
    let mut acc = Value::one(x.mode());
    for _ in 0..k {
        acc = &acc * x;
    }
    acc
}

/// Converts a generalized Stirling value of the (-1, -alpha) slice into the
/// matching generalized factorial coefficient: multiply by alpha^k.
pub fn stirling_to_gfc(k: usize, alpha: &Value, stirling_value: &Value) -> Result<Value> {
    if alpha.is_zero() {
        return Err(Error::InvalidArgument(
            "factorial-coefficient conversion needs alpha != 0".into(),
        ));
    }
    Ok(&value_pow(alpha, k) * stirling_value)
}

/// Inverse of [`stirling_to_gfc`].
pub fn gfc_to_stirling(k: usize, alpha: &Value, gfc_value: &Value) -> Result<Value> {
    if alpha.is_zero() {
        return Err(Error::InvalidArgument(
            "factorial-coefficient conversion needs alpha != 0".into(),
        ));
    }
    Ok(gfc_value / &value_pow(alpha, k))
}

/// Multinomial coefficient m! / (parts[0]! parts[1]! ...), exact.
pub fn multinomial_int(parts: &[usize]) -> BigInt {
    let m: usize = parts.iter().sum();
    let mut acc = factorial_int(m);
    for &p in parts {
        acc /= factorial_int(p);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exact(n: i64, d: i64) -> Value {
        Value::from_ratio(n, d, Mode::Exact)
    }

    fn assert_exact_int(v: &Value, expect: i64) {
        assert_eq!(
            v.expect_rational(),
            &BigRational::from_integer(BigInt::from(expect))
        );
    }

    #[test]
    fn rising_factorial_basics() {
        // 3 * 4
        let v = rising_factorial(&exact(3, 1), 2, &exact(1, 1));
        assert_exact_int(&v, 12);
        // empty product
        let v = rising_factorial(&exact(57, 10), 0, &exact(-2, 1));
        assert_exact_int(&v, 1);
        // 2 * 2.5 * 3
        let v = rising_factorial(&exact(2, 1), 3, &exact(1, 2));
        assert_exact_int(&v, 15);
        // zero increment is a plain power
        let v = rising_factorial(&exact(2, 1), 5, &exact(0, 1));
        assert_exact_int(&v, 32);
    }

    #[test]
    fn falling_factorial_basics() {
        // 5 * 4
        assert_exact_int(&falling_factorial(&exact(5, 1), 2, &exact(1, 1)), 20);
        // empty product
        assert_exact_int(&falling_factorial(&exact(7, 1), 0, &exact(1, 1)), 1);
        // 4 * 2 with increment 2
        assert_exact_int(&falling_factorial(&exact(4, 1), 2, &exact(2, 1)), 8);
    }

    #[test]
    fn rising_handles_negative_and_zero_factors() {
        // (-2)(-1) = 2
        assert_exact_int(&rising(&exact(-2, 1), 2), 2);
        // hits zero exactly
        assert!(rising(&exact(-2, 1), 3).is_zero());
        let log2 = rising(&Value::from_int(-2, Mode::Log), 2);
        assert!((log2.to_f64() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn integer_base_factorials_hit_exact_zeros_in_both_backends() {
        for mode in [Mode::Exact, Mode::Log] {
            assert!(rising_int(-2, 3, mode).is_zero());
            assert!(falling_int(2, 3, mode).is_zero());
            assert!(falling_int(3, 7, mode).is_zero());
            let v = rising_int(-2, 2, mode);
            assert!((v.to_f64() - 2.0).abs() < 1e-12);
            let w = falling_int(5, 2, mode);
            assert!((w.to_f64() - 20.0).abs() < 1e-12);
            let neg = falling_int(-4, 3, mode);
            // (-4)(-5)(-6) = -120
            assert!((neg.to_f64() + 120.0).abs() < 1e-9);
        }
    }

    #[test]
    fn log_mode_gamma_shortcut_matches_loop() {
        for (x, n) in [(0.3f64, 40usize), (7.5, 200), (1.0, 1000)] {
            let fast = slog_rising(x, n, 1.0);
            let mut slow_sign = 1i8;
            let mut slow = 0.0;
            for i in 0..n {
                let f = x + i as f64;
                if f < 0.0 {
                    slow_sign = -slow_sign;
                }
                slow += f.abs().ln();
            }
            assert_eq!(fast.sign, slow_sign);
            assert!((fast.log_abs - slow).abs() < 1e-8 * slow.abs().max(1.0));
        }
    }

    #[test]
    fn lah_fixed_values() {
        assert_eq!(lah_int(4, 4), BigInt::from(1));
        // frozen from the Bell-polynomial oracle below
        assert_eq!(lah_int(3, 2), BigInt::from(6));
        assert_eq!(lah_int(4, 2), BigInt::from(36));
        assert_eq!(lah_int(3, 0), BigInt::zero());
        assert_eq!(lah_int(3, 4), BigInt::zero());
    }

    #[test]
    fn lah_matches_bell_polynomial_oracle() {
        let budget = EnumerationBudget::default();
        let minus_one = exact(-1, 1);
        for n in 1..=9usize {
            for k in 1..=n {
                let oracle = bell_polynomial_stirling(n, k, &minus_one, &budget).unwrap();
                assert_eq!(
                    oracle.expect_rational(),
                    &BigRational::from_integer(lah_int(n, k)),
                    "n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn bell_polynomial_oracle_edges() {
        let budget = EnumerationBudget::default();
        // all singleton blocks: empty products
        let v = bell_polynomial_stirling(5, 5, &exact(3, 7), &budget).unwrap();
        assert_exact_int(&v, 1);
        // single block at alpha = -1: (2)(3)(4)
        let v = bell_polynomial_stirling(4, 1, &exact(-1, 1), &budget).unwrap();
        assert_exact_int(&v, 24);
        assert!(matches!(
            bell_polynomial_stirling(13, 2, &exact(-1, 1), &budget),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn noncentral_lah_fixed_values() {
        // r = 0 is the central case
        let v = noncentral_lah(3, 2, &exact(0, 1)).unwrap();
        assert_exact_int(&v, 6);
        // n = k forces the binomial factor to one
        let v = noncentral_lah(2, 2, &exact(-5, 1)).unwrap();
        assert_exact_int(&v, 1);
        // frozen from the convolution oracle in the property test below:
        // sum_s C(3,s) Lah(s,1) (4)_{3-s rising} = 60 + 24 + 6 = 90
        let v = noncentral_lah(3, 1, &exact(-4, 1)).unwrap();
        assert_exact_int(&v, 90);
    }

    #[test]
    fn stirling_gfc_conversion() {
        let s = exact(6, 1);
        let v = stirling_to_gfc(2, &exact(-1, 1), &s).unwrap();
        assert_exact_int(&v, 6);
        let v = stirling_to_gfc(1, &exact(-1, 1), &s).unwrap();
        assert_exact_int(&v, -6);
        let v = stirling_to_gfc(2, &exact(1, 2), &s).unwrap();
        assert_eq!(v.expect_rational(), exact(3, 2).expect_rational());
        let back = gfc_to_stirling(2, &exact(1, 2), &v).unwrap();
        assert_eq!(back.expect_rational(), s.expect_rational());
        assert!(stirling_to_gfc(2, &exact(0, 1), &s).is_err());
    }

    fn convolution_oracle(n: usize, k: usize, r: &Value) -> Value {
        // sum over s of C(n, s) Lah(s, k) (-r)_{n-s rising}
        let mode = r.mode();
        let mut acc = Value::zero(mode);
        for s in k..=n {
            let term = &(&binomial(n, s, mode) * &lah(s, k, mode))
                * &rising(&-r, n - s);
            acc = &acc + &term;
        }
        acc
    }

    proptest! {
        // multiplicative law: (x)_{n+r} = (x)_n (x + n h)_r
        #[test]
        fn multiplicative_law(xn in -9i64..=9, xd in 1i64..=5,
                              hn in -4i64..=4, hd in 1i64..=3,
                              n in 0usize..=8, r in 0usize..=8,
                              xshift in 0u32..=2, hshift in 0u32..=2) {
            let x = exact(xn, xd);
            let h = exact(hn, hd);
            let lhs = rising_factorial(&x, n + r, &h);
            let shifted = &x + &(&Value::from_usize(n, Mode::Exact) * &h);
            let rhs = &rising_factorial(&x, n, &h) * &rising_factorial(&shifted, r, &h);
            prop_assert_eq!(lhs.expect_rational(), rhs.expect_rational());

            // the log backend carries values as logs, so a product with an
            // exactly-zero factor degenerates to representation noise there;
            // the relative-error claim is checked away from zeros
            let xf = xn as f64 / (1u32 << xshift) as f64;
            let hf = hn as f64 / (1u32 << hshift) as f64;
            let zero_crossing = (0..n + r).any(|i| xf + i as f64 * hf == 0.0);
            prop_assume!(!zero_crossing);
            let xl = Value::Log(SignedLog::from_f64(xf));
            let hl = Value::Log(SignedLog::from_f64(hf));
            let lhs_l = rising_factorial(&xl, n + r, &hl);
            let shifted_l = Value::Log(SignedLog::from_f64(xf + n as f64 * hf));
            let rhs_l = &rising_factorial(&xl, n, &hl) * &rising_factorial(&shifted_l, r, &hl);
            prop_assert!(lhs_l.rel_diff(&rhs_l) < 1e-12);
        }

        // binomial theorem: (x+y)_n = sum_k C(n,k) (x)_k (y)_{n-k}
        #[test]
        fn binomial_theorem(xn in -9i64..=9, xd in 1i64..=5,
                            yn in -9i64..=9, yd in 1i64..=5,
                            hn in -3i64..=3, hd in 1i64..=3,
                            n in 0usize..=8) {
            let x = exact(xn, xd);
            let y = exact(yn, yd);
            let h = exact(hn, hd);
            let lhs = rising_factorial(&(&x + &y), n, &h);
            let mut rhs = Value::zero(Mode::Exact);
            for k in 0..=n {
                let term = &(&binomial(n, k, Mode::Exact) * &rising_factorial(&x, k, &h))
                    * &rising_factorial(&y, n - k, &h);
                rhs = &rhs + &term;
            }
            prop_assert_eq!(lhs.expect_rational(), rhs.expect_rational());
        }

        // multinomial theorem with three parts
        #[test]
        fn multinomial_theorem(an in -6i64..=6, bn in -6i64..=6, cn in -6i64..=6,
                               d in 1i64..=4, hn in -2i64..=2, n in 0usize..=6) {
            let parts = [exact(an, d), exact(bn, d), exact(cn, d)];
            let h = exact(hn, 1);
            let total = &(&parts[0] + &parts[1]) + &parts[2];
            let lhs = rising_factorial(&total, n, &h);
            let mut rhs = Value::zero(Mode::Exact);
            for n1 in 0..=n {
                for n2 in 0..=n - n1 {
                    let n3 = n - n1 - n2;
                    let coeff = Value::from_bigint(&multinomial_int(&[n1, n2, n3]), Mode::Exact);
                    let term = &(&(&coeff * &rising_factorial(&parts[0], n1, &h))
                        * &rising_factorial(&parts[1], n2, &h))
                        * &rising_factorial(&parts[2], n3, &h);
                    rhs = &rhs + &term;
                }
            }
            prop_assert_eq!(lhs.expect_rational(), rhs.expect_rational());
        }

        // connection identity: (x)_n rising = sum_k Lah(n,k) (x)_k falling
        #[test]
        fn lah_connection_identity(xn in -40i64..=40, xd in 1i64..=7, n in 1usize..=10) {
            let x = exact(xn, xd);
            let lhs = rising(&x, n);
            let mut rhs = Value::zero(Mode::Exact);
            for k in 1..=n {
                rhs = &rhs + &(&lah(n, k, Mode::Exact) * &falling(&x, k));
            }
            prop_assert_eq!(lhs.expect_rational(), rhs.expect_rational());
        }

        // non-central Lah agrees with the binomial convolution over the
        // central numbers, for rational shift r
        #[test]
        fn noncentral_convolution(rn in -30i64..=30, rd in 1i64..=7,
                                  n in 1usize..=8) {
            let r = exact(rn, rd);
            for k in 1..=n {
                let direct = noncentral_lah(n, k, &r).unwrap();
                let conv = convolution_oracle(n, k, &r);
                prop_assert_eq!(direct.expect_rational(), conv.expect_rational());
            }
        }
    }
}

//! Closed-form partial sums and tails for the type-count series
//!
//!   t(x) = mixing(x) * (x falling k) / (x rising n),   x = 1, 2, ...
//!
//! whose total is the partition weight V_{n,k} and whose normalized terms
//! are the posterior law of the total number of types. The terms decay only
//! like x^(k-n-1-gamma) (a power law), so no feasible number of terms brings
//! the bare partial sum within tight tolerances. Instead we construct an
//! exact hypergeometric antidifference v with v(x) - v(x+1) = t(x), which
//! telescopes every partial sum and gives the tail beyond K exactly as
//! v(K+1). The mean series x*t(x) gets the same treatment; it converges only
//! for k < n.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::SignedLog;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;

/// Dense polynomial with exact rational coefficients, index = power.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Polynomial(Vec<BigRational>);

impl Polynomial {
    fn zero(degree: usize) -> Self {
        Polynomial(vec![BigRational::zero(); degree + 1])
    }

    fn constant(c: BigRational) -> Self {
        Polynomial(vec![c])
    }

    fn degree(&self) -> usize {
        self.0
            .iter()
            .rposition(|c| !c.is_zero())
            .unwrap_or(0)
    }

    fn coeff(&self, j: usize) -> BigRational {
        self.0.get(j).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Multiply by the linear factor (x + a).
    fn mul_linear(&self, a: &BigRational) -> Polynomial {
        let mut out = vec![BigRational::zero(); self.0.len() + 1];
        for (j, c) in self.0.iter().enumerate() {
            out[j + 1] += c;
            out[j] += c * a;
        }
        Polynomial(out)
    }

    fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.0.iter().rev() {
            acc = acc * x + c.to_f64().unwrap_or(f64::NAN);
        }
        acc
    }
}

fn big(x: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Falling-factorial polynomial (x - from)(x - from - 1)...(x - to), i.e.
/// the product of (x - i) for i in from..=to; the empty product for an empty
/// range.
fn falling_poly(from: usize, to: usize) -> Polynomial {
    let mut p = Polynomial::constant(BigRational::one());
    for i in from..=to {
        p = p.mul_linear(&-big(i));
    }
    p
}

/// Solves (x + n) y(x) - (x - gamma) y(x + 1) = target(x) for a polynomial y
/// of the same degree as the target. The operator is triangular in the
/// monomial basis with diagonal entries (n - j + gamma), all nonzero because
/// gamma is strictly between 0 and 1.
fn solve_antidifference(target: &Polynomial, n: usize, gamma: &BigRational) -> Polynomial {
    // image of x^j under the operator, as a polynomial of degree j
    let operator_image = |j: usize| -> Polynomial {
        // (x + n) x^j - (x - gamma) (x + 1)^j
        let mut coeffs = vec![BigRational::zero(); j + 2];
        coeffs[j + 1] += BigRational::one();
        coeffs[j] += big(n);
        // subtract (x - gamma)(x + 1)^j
        // binom walks C(j, 0), C(j, 1), ... across the loop
        let mut binom = BigRational::one();
        for i in 0..=j {
            let c = binom.clone();
            coeffs[i + 1] -= &c;
            coeffs[i] += &c * gamma;
            // advance C(j, i) -> C(j, i + 1)
            binom = c * big(j - i) / big(i + 1);
        }
        Polynomial(coeffs)
    };

    let d = target.degree();
    let mut residual = target.clone();
    let mut y = Polynomial::zero(d);
    for j in (0..=d).rev() {
        let diag = big(n) - big(j) + gamma;
        let yj = residual.coeff(j) / &diag;
        if !yj.is_zero() {
            let image = operator_image(j);
            let mut res = vec![BigRational::zero(); residual.0.len().max(image.0.len())];
            for (idx, slot) in res.iter_mut().enumerate() {
                *slot = residual.coeff(idx) - image.coeff(idx) * &yj;
            }
            residual = Polynomial(res);
        }
        y.0[j] = yj;
    }
    debug_assert!(residual.0.iter().all(|c| c.is_zero()));
    y
}

/// The type-count series for a basic sample with `n` observations in `k`
/// blocks, together with exact telescoped tails.
pub struct TypeCountSeries {
    n: usize,
    k: usize,
    gamma: BigRational,
    y_pmf: Polynomial,
    y_mean: Polynomial,
}

impl TypeCountSeries {
    pub fn new(n: usize, k: usize, params: &ModelParams) -> Result<Self> {
        if k < 1 || k > n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= k <= n, got n={n}, k={k}"
            )));
        }
        let gamma = params.gamma_rational().clone();
        // (x + n) * (x - 1)(x - 2)...(x - k + 1)
        let pmf_target = falling_poly(1, k.saturating_sub(1)).mul_linear(&big(n));
        // (x + n) * x(x - 1)...(x - k + 1)
        let mean_target = falling_poly(1, k.saturating_sub(1))
            .mul_linear(&BigRational::zero())
            .mul_linear(&big(n));
        let series = TypeCountSeries {
            n,
            k,
            gamma: gamma.clone(),
            y_pmf: solve_antidifference(&pmf_target, n, &gamma),
            y_mean: solve_antidifference(&mean_target, n, &gamma),
        };
        debug_assert!(series.verify_antidifference(k + 4));
        Ok(series)
    }

    /// g(x) = gamma (1-gamma)_{x-1} / ((x-1)! (x)_{n rising}), the common
    /// positive hypergeometric factor of the antidifference.
    fn g(&self, x: usize) -> BigRational {
        assert!(x >= 1);
        let mut acc = self.gamma.clone();
        let one = BigRational::one();
        for i in 1..x {
            // (1 - gamma + i - 1) / i
            acc *= (&one - &self.gamma + big(i - 1)) / big(i);
        }
        for i in 0..self.n {
            acc /= big(x + i);
        }
        acc
    }

    fn ln_g(&self, x: usize) -> f64 {
        let gamma = self
            .gamma
            .to_f64()
            .expect("gamma is a small rational");
        let xf = x as f64;
        gamma.ln() + ln_gamma(xf - gamma) - ln_gamma(1.0 - gamma) - ln_gamma(xf + self.n as f64)
    }

    fn v(&self, y: &Polynomial, x: usize) -> BigRational {
        y.eval(&big(x)) * self.g(x)
    }

    fn v_f64(&self, y: &Polynomial, x: usize) -> f64 {
        let yv = y.eval_f64(x as f64);
        if yv == 0.0 {
            return 0.0;
        }
        let s = SignedLog {
            sign: if yv > 0.0 { 1 } else { -1 },
            log_abs: yv.abs().ln() + self.ln_g(x),
        };
        s.to_f64()
    }

    /// Series term: mixing(x) (x falling k) / (x rising n); zero for x < k.
    pub fn term(&self, x: usize) -> BigRational {
        assert!(x >= 1);
        if x < self.k {
            return BigRational::zero();
        }
        // g(x) * (x-1)(x-2)...(x-k+1)
        let mut acc = self.g(x);
        for i in 1..self.k {
            acc *= big(x - i);
        }
        acc
    }

    pub fn mean_term(&self, x: usize) -> BigRational {
        self.term(x) * big(x)
    }

    /// Natural log of the term, for large-scale evaluation.
    pub fn ln_term(&self, x: usize) -> f64 {
        if x < self.k {
            return f64::NEG_INFINITY;
        }
        let mut acc = self.ln_g(x);
        for i in 1..self.k {
            acc += ((x - i) as f64).ln();
        }
        acc
    }

    /// Exact tail: the sum of all terms beyond `after`. `after == 0` gives
    /// the full series total, which equals the partition weight V_{n,k}.
    pub fn tail(&self, after: usize) -> BigRational {
        self.v(&self.y_pmf, after + 1)
    }

    pub fn total(&self) -> BigRational {
        self.tail(0)
    }

    pub fn tail_f64(&self, after: usize) -> f64 {
        self.v_f64(&self.y_pmf, after + 1)
    }

    /// Whether the first-moment series converges. It diverges exactly when
    /// every observation formed its own block (k = n).
    pub fn mean_is_finite(&self) -> bool {
        self.k < self.n
    }

    /// Exact tail of the first-moment series, `None` when divergent.
    pub fn mean_tail(&self, after: usize) -> Option<BigRational> {
        if !self.mean_is_finite() {
            return None;
        }
        Some(self.v(&self.y_mean, after + 1))
    }

    pub fn mean_total(&self) -> Option<BigRational> {
        self.mean_tail(0)
    }

    pub fn mean_tail_f64(&self, after: usize) -> Option<f64> {
        if !self.mean_is_finite() {
            return None;
        }
        Some(self.v_f64(&self.y_mean, after + 1))
    }

    /// Streaming evaluation from x = 1 upward with O(1) rational work per
    /// step, for truncation loops.
    pub fn cursor(&self) -> SeriesCursor<'_> {
        SeriesCursor {
            series: self,
            x: 1,
            g: self.g(1),
        }
    }

    /// Checks v(x) - v(x+1) == t(x) exactly at x = 1..=points. The defect is
    /// a fixed-degree polynomial times a positive factor, so agreement at
    /// more points than the degree proves the identity for every x.
    pub fn verify_antidifference(&self, points: usize) -> bool {
        for x in 1..=points {
            let lhs = self.v(&self.y_pmf, x) - self.v(&self.y_pmf, x + 1);
            if lhs != self.term(x) {
                return false;
            }
            let mlhs = self.v(&self.y_mean, x) - self.v(&self.y_mean, x + 1);
            if mlhs != self.mean_term(x) {
                return false;
            }
        }
        true
    }
}

/// Walks the series left to right, maintaining the hypergeometric factor
/// incrementally so each step costs a handful of rational operations.
pub struct SeriesCursor<'a> {
    series: &'a TypeCountSeries,
    x: usize,
    g: BigRational,
}

impl SeriesCursor<'_> {
    pub fn index(&self) -> usize {
        self.x
    }

    /// Term at the current index.
    pub fn term(&self) -> BigRational {
        if self.x < self.series.k {
            return BigRational::zero();
        }
        let mut acc = self.g.clone();
        for i in 1..self.series.k {
            acc *= big(self.x - i);
        }
        acc
    }

    /// Sum of all terms at indices >= the current one.
    pub fn tail_from_here(&self) -> BigRational {
        self.series.y_pmf.eval(&big(self.x)) * &self.g
    }

    /// Sum of x * t(x) at indices >= the current one; `None` when divergent.
    pub fn mean_tail_from_here(&self) -> Option<BigRational> {
        if !self.series.mean_is_finite() {
            return None;
        }
        Some(self.series.y_mean.eval(&big(self.x)) * &self.g)
    }

    pub fn advance(&mut self) {
        // g(x+1)/g(x) = (x - gamma) / (x + n)
        let num = big(self.x) - &self.series.gamma;
        let den = big(self.x + self.series.n);
        self.g *= num / den;
        self.x += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gibbs_weight;
    use crate::numeric::Mode;

    fn params(s: &str) -> ModelParams {
        ModelParams::from_decimal(s).unwrap()
    }

    #[test]
    fn antidifference_identity_holds_broadly() {
        for gamma in ["0.1", "0.5", "0.9", "0.37"] {
            let p = params(gamma);
            for n in 1..=7usize {
                for k in 1..=n {
                    let s = TypeCountSeries::new(n, k, &p).unwrap();
                    assert!(s.verify_antidifference(k + 6), "n={n} k={k} gamma={gamma}");
                }
            }
        }
    }

    #[test]
    fn partial_plus_tail_is_exactly_the_total() {
        let p = params("0.3");
        for (n, k) in [(1usize, 1usize), (4, 2), (6, 6), (5, 1)] {
            let s = TypeCountSeries::new(n, k, &p).unwrap();
            for cut in [0usize, 3, 17] {
                let mut partial = BigRational::zero();
                for x in 1..=cut {
                    partial += s.term(x);
                }
                assert_eq!(partial + s.tail(cut), s.total(), "n={n} k={k} cut={cut}");
            }
        }
    }

    #[test]
    fn total_equals_partition_weight() {
        // the mixture identity at the (n, k) level, exact
        for gamma in ["0.1", "0.5", "0.9"] {
            let p = params(gamma);
            for n in 1..=8usize {
                for k in 1..=n {
                    let s = TypeCountSeries::new(n, k, &p).unwrap();
                    let v = gibbs_weight(n, k, &p, Mode::Exact).unwrap();
                    assert_eq!(
                        &s.total(),
                        v.expect_rational(),
                        "n={n} k={k} gamma={gamma}"
                    );
                }
            }
        }
    }

    #[test]
    fn tails_shrink_toward_zero() {
        let p = params("0.5");
        let s = TypeCountSeries::new(5, 3, &p).unwrap();
        let t10 = s.tail(10);
        let t100 = s.tail(100);
        assert!(t100 > BigRational::zero());
        assert!(t100 < t10);
        // f64 route agrees with the exact route
        let exact = t100.to_f64().unwrap();
        assert!((s.tail_f64(100) - exact).abs() <= 1e-10 * exact.abs());
        // and keeps decaying far beyond where rationals are practical
        assert!(s.tail_f64(1_000_000) < 1e-12);
    }

    #[test]
    fn cursor_agrees_with_direct_evaluation() {
        let p = params("0.37");
        let s = TypeCountSeries::new(6, 4, &p).unwrap();
        let mut cursor = s.cursor();
        for x in 1..=40usize {
            assert_eq!(cursor.index(), x);
            assert_eq!(cursor.term(), s.term(x));
            assert_eq!(cursor.tail_from_here(), s.tail(x - 1));
            assert_eq!(cursor.mean_tail_from_here(), s.mean_tail(x - 1));
            cursor.advance();
        }
    }

    #[test]
    fn mean_diverges_iff_singletons() {
        let p = params("0.5");
        let s = TypeCountSeries::new(4, 4, &p).unwrap();
        assert!(!s.mean_is_finite());
        assert!(s.mean_total().is_none());
        let s = TypeCountSeries::new(4, 3, &p).unwrap();
        assert!(s.mean_is_finite());
        let mut partial = BigRational::zero();
        for x in 1..=25 {
            partial += s.mean_term(x);
        }
        assert_eq!(partial + s.mean_tail(25).unwrap(), s.mean_total().unwrap());
        // the posterior mean exceeds k
        let mean = s.mean_total().unwrap() / s.total();
        assert!(mean > BigRational::from_integer(BigInt::from(3)));
    }
}

//! Closed-form posterior predictive laws for an additional sample, given a
//! basic sample with `n` observations in `k` blocks. All of them are
//! consequences of the grouped allocation law and are validated against
//! exhaustive path enumeration; where a published display disagrees with the
//! probabilistically derived quantity, the operation returns the derived
//! value and the `published` module evaluates the display for comparison.

use crate::combinatorics::{binomial, binomial_int, factorial, lah, rising};
use crate::error::{Error, Result};
use crate::model::{ModelParams, OccupancyVector};
use crate::numeric::{Mode, Value};
use crate::sampler::{appearance_order_count, enumerate_outcomes, group_allocation_pmf};
use crate::series::TypeCountSeries;
use num::rational::BigRational;

/// The sufficient data of the basic sample. Most predictive laws depend on
/// it only through `(n, k)`; operations that need the individual block sizes
/// require the full occupancy vector.
#[derive(Clone, Debug)]
pub struct BasicSample {
    n: usize,
    k: usize,
    occ: Option<OccupancyVector>,
}

impl BasicSample {
    pub fn from_counts(n: usize, k: usize) -> Result<Self> {
        if k < 1 || k > n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= k <= n, got n={n}, k={k}"
            )));
        }
        Ok(BasicSample { n, k, occ: None })
    }

    pub fn from_occupancy(occ: OccupancyVector) -> Self {
        BasicSample {
            n: occ.n(),
            k: occ.k(),
            occ: Some(occ),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn occupancy(&self) -> Option<&OccupancyVector> {
        self.occ.as_ref()
    }
}

/// A predictive question: the basic sample, the additional sample size, and
/// the model parameter.
#[derive(Clone, Debug)]
pub struct PredictiveQuery {
    pub basic: BasicSample,
    pub m: usize,
    pub params: ModelParams,
}

impl PredictiveQuery {
    pub fn new(basic: BasicSample, m: usize, params: ModelParams) -> Self {
        PredictiveQuery { basic, m, params }
    }

    fn n(&self) -> usize {
        self.basic.n
    }

    fn k(&self) -> usize {
        self.basic.k
    }
}

/// A finite (possibly truncated) probability table. `tail` carries the mass
/// beyond the listed support; it is exact when produced by the exact
/// backend. Values are never silently renormalized.
#[derive(Clone, Debug)]
pub struct DiscretePmf<T> {
    pub support: Vec<T>,
    pub probs: Vec<Value>,
    pub tail: Option<Value>,
}

impl<T: PartialEq> DiscretePmf<T> {
    pub fn prob(&self, at: &T) -> Option<&Value> {
        self.support
            .iter()
            .position(|s| s == at)
            .map(|i| &self.probs[i])
    }

    pub fn sum(&self) -> Value {
        let mode = self
            .probs
            .first()
            .map(Value::mode)
            .unwrap_or(Mode::Exact);
        self.probs
            .iter()
            .fold(Value::zero(mode), |acc, p| &acc + p)
    }

    /// Listed mass plus tail; exactly one for the laws in this module when
    /// computed on the exact backend.
    pub fn total_mass(&self) -> Value {
        match &self.tail {
            Some(t) => &self.sum() + t,
            None => self.sum(),
        }
    }

    pub fn mean_over_support(&self, weight: impl Fn(&T) -> usize) -> Value {
        let mode = self
            .probs
            .first()
            .map(Value::mode)
            .unwrap_or(Mode::Exact);
        self.support
            .iter()
            .zip(&self.probs)
            .fold(Value::zero(mode), |acc, (s, p)| {
                &acc + &(&Value::from_usize(weight(s), mode) * p)
            })
    }
}

/// A derived value side by side with the published display of the same
/// quantity.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub derived: Value,
    pub published: Value,
}

impl Comparison {
    pub fn abs_diff_f64(&self) -> f64 {
        (self.derived.to_f64() - self.published.to_f64()).abs()
    }
}

/// Truncation control for the laws with infinite support.
#[derive(Clone, Copy, Debug)]
pub struct TruncationPolicy {
    /// Stop once the exact tail mass drops below this.
    pub tail_epsilon: f64,
    /// Hard cap on the listed support; the remaining mass stays in `tail`.
    pub max_support: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            tail_epsilon: 1e-10,
            max_support: 2000,
        }
    }
}

/// Posterior of the total number of types, plus its mean. The mean series
/// diverges when the basic sample is all singletons (k = n), which the
/// result reports explicitly rather than returning a truncation artifact.
#[derive(Clone, Debug)]
pub struct TotalTypesPosterior {
    pub pmf: DiscretePmf<usize>,
    pub mean: TypesMean,
}

#[derive(Clone, Debug)]
pub enum TypesMean {
    Finite {
        value: Value,
        /// Portion of the mean contributed beyond the listed support.
        beyond_support: Value,
    },
    Divergent,
}

/// Law of the number of occupied blocks in a fresh sample of size `n`:
/// C(n,k) (1-g)_{k-1} (g)_{n-k} / (1+g)_{n-1} on k = 1..=n. Term by term
/// this equals the partition weight times the Lah number.
pub fn block_count_pmf(n: usize, params: &ModelParams, mode: Mode) -> DiscretePmf<usize> {
    assert!(n >= 1);
    let g = params.gamma(mode);
    let one = Value::one(mode);
    let den = rising(&(&one + &g), n - 1);
    let mut support = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for k in 1..=n {
        let num = &(&binomial(n, k, mode) * &rising(&(&one - &g), k - 1)) * &rising(&g, n - k);
        support.push(k);
        probs.push(&num / &den);
    }
    DiscretePmf {
        support,
        probs,
        tail: None,
    }
}

struct ExtensionCtx {
    n: usize,
    k: usize,
    m: usize,
    mode: Mode,
    g: Value,
    /// (n)_m (g+n)_m, the common denominator of every extension law.
    denom: Value,
}

impl ExtensionCtx {
    fn new(q: &PredictiveQuery, mode: Mode) -> Self {
        let n = q.n();
        let k = q.k();
        let m = q.m;
        let g = q.params.gamma(mode);
        let nv = Value::from_usize(n, mode);
        let denom = &rising(&nv, m) * &rising(&(&g + &nv), m);
        ExtensionCtx {
            n,
            k,
            m,
            mode,
            g,
            denom,
        }
    }

    /// (k)_{k*} (k-g)_{k*} (g+n-k)_{m-k*}
    fn block_factor(&self, kstar: usize) -> Value {
        let kv = Value::from_usize(self.k, self.mode);
        let a = rising(&kv, kstar);
        let b = rising(&(&kv - &self.g), kstar);
        let c = rising(
            &(&self.g + &Value::from_usize(self.n - self.k, self.mode)),
            self.m - kstar,
        );
        &(&a * &b) * &c
    }

    /// C(m,s) (n+k)_{m-s}, the marginalized placement of the old-block part.
    fn old_marginal(&self, s: usize) -> Value {
        &binomial(self.m, s, self.mode)
            * &rising(&Value::from_usize(self.n + self.k, self.mode), self.m - s)
    }
}

/// Probability that the additional sample opens new blocks whose sizes, in
/// order of first appearance, are exactly `new_blocks` (the placement of the
/// remaining observations among old blocks is marginalized out).
pub fn new_config_pmf(q: &PredictiveQuery, new_blocks: &[usize], mode: Mode) -> Result<Value> {
    let kstar = new_blocks.len();
    let s: usize = new_blocks.iter().sum();
    if kstar < 1 {
        return Err(Error::InvalidArgument(
            "at least one new block is required".into(),
        ));
    }
    if new_blocks.contains(&0) {
        return Err(Error::InvalidArgument(
            "new blocks must have positive size".into(),
        ));
    }
    if s > q.m {
        return Err(Error::DimensionMismatch(format!(
            "{s} observations in new blocks exceed the additional sample size {}",
            q.m
        )));
    }
    let ctx = ExtensionCtx::new(q, mode);
    let mut v = &(&ctx.block_factor(kstar) * &ctx.old_marginal(s)) / &ctx.denom;
    v = &v * &Value::from_bigint(&appearance_order_count(new_blocks), mode);
    for &b in new_blocks {
        v = &v * &factorial(b, mode);
    }
    Ok(v)
}

/// Joint law of (number of new blocks, number of observations in new blocks)
/// for the additional sample. The support is (0,0) plus all 1 <= k* <= s <= m.
pub fn joint_new_pmf(q: &PredictiveQuery, mode: Mode) -> DiscretePmf<(usize, usize)> {
    let ctx = ExtensionCtx::new(q, mode);
    let mut support = Vec::new();
    let mut probs = Vec::new();
    for s in 0..=ctx.m {
        let kstars: Vec<usize> = if s == 0 { vec![0] } else { (1..=s).collect() };
        for kstar in kstars {
            let lah_factor = lah(s, kstar, mode);
            let v = &(&(&ctx.block_factor(kstar) * &ctx.old_marginal(s)) * &lah_factor)
                / &ctx.denom;
            support.push((kstar, s));
            probs.push(v);
        }
    }
    DiscretePmf {
        support,
        probs,
        tail: None,
    }
}

/// Law of the number of additional observations that fall in new blocks.
pub fn new_ball_count_pmf(q: &PredictiveQuery, mode: Mode) -> DiscretePmf<usize> {
    let ctx = ExtensionCtx::new(q, mode);
    let mut support = Vec::with_capacity(ctx.m + 1);
    let mut probs = Vec::with_capacity(ctx.m + 1);
    for s in 0..=ctx.m {
        let kstars: Vec<usize> = if s == 0 { vec![0] } else { (1..=s).collect() };
        let mut acc = Value::zero(mode);
        for kstar in kstars {
            acc = &acc + &(&ctx.block_factor(kstar) * &lah(s, kstar, mode));
        }
        support.push(s);
        probs.push(&(&acc * &ctx.old_marginal(s)) / &ctx.denom);
    }
    DiscretePmf {
        support,
        probs,
        tail: None,
    }
}

/// Law of the number of new blocks opened by the additional sample:
/// (k-g)_{k*} (g+n-k)_{m-k*} / (g+n)_m * C(m,k*) (n+k+k*)_{m-k*} (k)_{k*} / (n)_m.
/// The combinatorial factor is the non-central Lah sum in closed form.
pub fn new_block_count_pmf(q: &PredictiveQuery, mode: Mode) -> DiscretePmf<usize> {
    let ctx = ExtensionCtx::new(q, mode);
    let mut support = Vec::with_capacity(ctx.m + 1);
    let mut probs = Vec::with_capacity(ctx.m + 1);
    for kstar in 0..=ctx.m {
        let comb = &binomial(ctx.m, kstar, mode)
            * &rising(
                &Value::from_usize(ctx.n + ctx.k + kstar, mode),
                ctx.m - kstar,
            );
        support.push(kstar);
        probs.push(&(&ctx.block_factor(kstar) * &comb) / &ctx.denom);
    }
    DiscretePmf {
        support,
        probs,
        tail: None,
    }
}

/// Posterior expected number of new blocks, which is the quadratic-loss
/// Bayes estimate. Returns the derived expectation together with the
/// published display of the same quantity.
pub fn expected_new_blocks(q: &PredictiveQuery, mode: Mode) -> Comparison {
    let derived = new_block_count_pmf(q, mode).mean_over_support(|&k| k);
    Comparison {
        derived,
        published: published::expected_new_blocks_display(q, mode),
    }
}

/// Expected number of additional observations falling in new blocks:
/// m k (k-g) / (n (n+g)), equivalently m times the weight ratio
/// V_{n+1,k+1} / V_{n,k}.
pub fn expected_new_balls(q: &PredictiveQuery, mode: Mode) -> Value {
    let n = q.n();
    let k = q.k();
    let g = q.params.gamma(mode);
    let kv = Value::from_usize(k, mode);
    let nv = Value::from_usize(n, mode);
    let num = &(&Value::from_usize(q.m, mode) * &kv) * &(&kv - &g);
    &num / &(&nv * &(&nv + &g))
}

fn total_types_term(n: usize, k: usize, kappa: usize, g: &Value, mode: Mode) -> Value {
    // (n-1)!/((k-1)! (kappa+n-1)!) (kappa-1 falling k-1) (k-g)_{kappa-k} (g+n-k)_k
    let num = &(&factorial(n - 1, mode)
        * &crate::combinatorics::falling(&Value::from_usize(kappa - 1, mode), k - 1))
        * &(&rising(&(&Value::from_usize(k, mode) - g), kappa - k)
            * &rising(&(g + &Value::from_usize(n - k, mode)), k));
    let den = &factorial(k - 1, mode) * &factorial(kappa + n - 1, mode);
    &num / &den
}

/// Ratio of consecutive total-type posterior terms,
/// q(kappa+1)/q(kappa) = kappa (kappa - g) / ((kappa - k + 1)(kappa + n)),
/// used to extend the support without re-expanding factorials.
fn total_types_term_ratio(n: usize, k: usize, kappa: usize, g: &Value, mode: Mode) -> Value {
    let kap = Value::from_usize(kappa, mode);
    let num = &kap * &(&kap - g);
    let den = &Value::from_usize(kappa - k + 1, mode) * &Value::from_usize(kappa + n, mode);
    &num / &den
}

/// Posterior law of the total number of types given a basic sample with `n`
/// observations in `k` blocks, truncated under `policy` with the exact
/// remaining mass reported in the tail. Term by term this equals the mixing
/// law times the fixed-type block-count likelihood, renormalized.
pub fn total_types_posterior(
    n: usize,
    k: usize,
    params: &ModelParams,
    mode: Mode,
    policy: &TruncationPolicy,
) -> Result<TotalTypesPosterior> {
    let series = TypeCountSeries::new(n, k, params)?;
    let g = params.gamma(mode);
    let eps = BigRational::from_float(policy.tail_epsilon)
        .ok_or_else(|| Error::InvalidArgument("tail epsilon must be finite".into()))?;

    let mut support = Vec::new();
    let mut probs = Vec::new();
    let tail_value: Value;
    let mean_beyond: Option<Value>;

    match mode {
        Mode::Exact => {
            let norm = series.total();
            let mut cursor = series.cursor();
            while cursor.index() < k {
                cursor.advance();
            }
            let mut term = total_types_term(n, k, k, &g, mode);
            loop {
                let kappa = cursor.index();
                support.push(kappa);
                probs.push(term.clone());
                term = &term * &total_types_term_ratio(n, k, kappa, &g, mode);
                cursor.advance();
                let tail = cursor.tail_from_here() / &norm;
                if tail < eps || support.len() >= policy.max_support {
                    tail_value = Value::Exact(tail);
                    mean_beyond = cursor
                        .mean_tail_from_here()
                        .map(|t| Value::Exact(t / &norm));
                    break;
                }
            }
            let mean = if series.mean_is_finite() {
                let value = Value::Exact(series.mean_total().unwrap() / series.total());
                TypesMean::Finite {
                    value,
                    beyond_support: mean_beyond.unwrap(),
                }
            } else {
                TypesMean::Divergent
            };
            Ok(TotalTypesPosterior {
                pmf: DiscretePmf {
                    support,
                    probs,
                    tail: Some(tail_value),
                },
                mean,
            })
        }
        Mode::Log => {
            let norm = series.tail_f64(0);
            let mut kappa = k;
            let mut term = total_types_term(n, k, k, &g, mode);
            loop {
                support.push(kappa);
                probs.push(term.clone());
                term = &term * &total_types_term_ratio(n, k, kappa, &g, mode);
                kappa += 1;
                let tail = series.tail_f64(kappa - 1) / norm;
                if tail < policy.tail_epsilon || support.len() >= policy.max_support {
                    tail_value = Value::Log(crate::numeric::SignedLog::from_f64(tail));
                    mean_beyond = series
                        .mean_tail_f64(kappa - 1)
                        .map(|t| Value::Log(crate::numeric::SignedLog::from_f64(t / norm)));
                    break;
                }
            }
            let mean = if series.mean_is_finite() {
                let total_mean = series.mean_tail_f64(0).unwrap() / norm;
                TypesMean::Finite {
                    value: Value::Log(crate::numeric::SignedLog::from_f64(total_mean)),
                    beyond_support: mean_beyond.unwrap(),
                }
            } else {
                TypesMean::Divergent
            };
            Ok(TotalTypesPosterior {
                pmf: DiscretePmf {
                    support,
                    probs,
                    tail: Some(tail_value),
                },
                mean,
            })
        }
    }
}

/// Large-additional-sample limit of the new-block-count law:
/// (n-1)!/(k-1)! (g+n-k)_k (k-g)_{k*} G(k+k*) / (G(k*+1) G(n+k+k*)),
/// which re-indexes the total-type posterior by k* = types - k.
pub fn new_block_count_limit_pmf(
    n: usize,
    k: usize,
    params: &ModelParams,
    mode: Mode,
    policy: &TruncationPolicy,
) -> Result<DiscretePmf<usize>> {
    let series = TypeCountSeries::new(n, k, params)?;
    let g = params.gamma(mode);
    let eps = BigRational::from_float(policy.tail_epsilon)
        .ok_or_else(|| Error::InvalidArgument("tail epsilon must be finite".into()))?;
    let mut support = Vec::new();
    let mut probs = Vec::new();
    let tail: Value;
    match mode {
        Mode::Exact => {
            let norm = series.total();
            let mut cursor = series.cursor();
            while cursor.index() < k {
                cursor.advance();
            }
            let mut term = new_block_count_limit_term(n, k, 0, &g, mode);
            loop {
                let kstar = cursor.index() - k;
                support.push(kstar);
                probs.push(term.clone());
                term = &term * &total_types_term_ratio(n, k, k + kstar, &g, mode);
                cursor.advance();
                let t = cursor.tail_from_here() / &norm;
                if t < eps || support.len() >= policy.max_support {
                    tail = Value::Exact(t);
                    break;
                }
            }
        }
        Mode::Log => {
            let norm = series.tail_f64(0);
            let mut kstar = 0usize;
            let mut term = new_block_count_limit_term(n, k, 0, &g, mode);
            loop {
                support.push(kstar);
                probs.push(term.clone());
                term = &term * &total_types_term_ratio(n, k, k + kstar, &g, mode);
                kstar += 1;
                let t = series.tail_f64(k + kstar - 1) / norm;
                if t < policy.tail_epsilon || support.len() >= policy.max_support {
                    tail = Value::Log(crate::numeric::SignedLog::from_f64(t));
                    break;
                }
            }
        }
    }
    Ok(DiscretePmf {
        support,
        probs,
        tail: Some(tail),
    })
}

/// Direct evaluation of one limit-law term, used for the first support point
/// and as an independent route in tests and reports.
pub(crate) fn new_block_count_limit_term(
    n: usize,
    k: usize,
    kstar: usize,
    g: &Value,
    mode: Mode,
) -> Value {
    let prefactor = &(&factorial(n - 1, mode) / &factorial(k - 1, mode))
        * &rising(&(g + &Value::from_usize(n - k, mode)), k);
    let num = &rising(&(&Value::from_usize(k, mode) - g), kstar) * &factorial(k + kstar - 1, mode);
    let den = &factorial(kstar, mode) * &factorial(n + k + kstar - 1, mode);
    &(&prefactor * &num) / &den
}

/// Conditional law of the number of observations in new blocks given the
/// number of new blocks: a ratio of binomial coefficients,
/// C(s-1,k*-1) C(n+k+m-s-1,m-s) / C(n+k+m-1,m-k*).
pub fn new_balls_given_blocks_pmf(
    q: &PredictiveQuery,
    kstar: usize,
    mode: Mode,
) -> Result<DiscretePmf<usize>> {
    let n = q.n();
    let k = q.k();
    let m = q.m;
    if kstar > m {
        return Err(Error::UndefinedConditional(format!(
            "{kstar} new blocks cannot arise from {m} additional observations"
        )));
    }
    if kstar == 0 {
        return Ok(DiscretePmf {
            support: vec![0],
            probs: vec![Value::one(mode)],
            tail: None,
        });
    }
    let den = Value::from_bigint(&binomial_int(n + k + m - 1, m - kstar), mode);
    let mut support = Vec::new();
    let mut probs = Vec::new();
    for s in kstar..=m {
        let num = binomial_int(s - 1, kstar - 1) * binomial_int(n + k + m - s - 1, m - s);
        support.push(s);
        probs.push(&Value::from_bigint(&num, mode) / &den);
    }
    Ok(DiscretePmf {
        support,
        probs,
        tail: None,
    })
}

/// Probability that none of the `m` additional observations falls in the
/// designated old blocks, computed by definition as the grouped-allocation
/// mass of every outcome that leaves those blocks untouched. Requires the
/// full occupancy vector; `avoided` lists zero-based block indices. The
/// published display is returned alongside for comparison.
pub fn avoid_subset_prob(q: &PredictiveQuery, avoided: &[usize], mode: Mode) -> Result<Comparison> {
    let occ = q.basic.occupancy().ok_or_else(|| {
        Error::InvalidArgument(
            "avoidance probabilities need the full occupancy vector, not just (n, k)".into(),
        )
    })?;
    let k = occ.k();
    let mut seen = vec![false; k];
    for &j in avoided {
        if j >= k {
            return Err(Error::InvalidArgument(format!(
                "avoided block index {j} out of range for {k} blocks"
            )));
        }
        if seen[j] {
            return Err(Error::InvalidArgument(format!(
                "avoided block index {j} listed twice"
            )));
        }
        seen[j] = true;
    }
    let mut derived = Value::zero(mode);
    for outcome in enumerate_outcomes(k, q.m) {
        if avoided.iter().any(|&j| outcome.old_adds[j] > 0) {
            continue;
        }
        derived = &derived + &group_allocation_pmf(occ, &outcome, &q.params, mode)?;
    }
    let published = published::avoid_subset_display(q, avoided, mode)?;
    Ok(Comparison { derived, published })
}

/// Conditional law of the new-block configuration given that exactly
/// `sum(new_blocks)` of the additional observations fall in new blocks: the
/// configuration probability renormalized over everything with the same
/// total.
pub fn conditional_new_config_pmf(
    q: &PredictiveQuery,
    new_blocks: &[usize],
    mode: Mode,
) -> Result<Value> {
    let s: usize = new_blocks.iter().sum();
    if s < 1 {
        return Err(Error::UndefinedConditional(
            "conditioning on an empty new-block configuration".into(),
        ));
    }
    if s > q.m {
        return Err(Error::UndefinedConditional(format!(
            "{s} observations in new blocks cannot arise from {} additional observations",
            q.m
        )));
    }
    let joint = new_config_pmf(q, new_blocks, mode)?;
    let marginal = new_ball_count_pmf(q, mode);
    let at_s = marginal.prob(&s).expect("s <= m is in the support").clone();
    if at_s.is_zero() {
        return Err(Error::UndefinedConditional(
            "conditioning event has probability zero".into(),
        ));
    }
    Ok(&joint / &at_s)
}

/// Posterior probability that observation n+m+1 belongs to a block unseen in
/// the first n+m observations: the new-block one-step rule averaged over the
/// law of the number of new blocks.
pub fn discovery_prob(q: &PredictiveQuery, mode: Mode) -> Value {
    let n = q.n();
    let k = q.k();
    let m = q.m;
    let g = q.params.gamma(mode);
    let blocks = new_block_count_pmf(q, mode);
    let nm = Value::from_usize(n + m, mode);
    let denom = &nm * &(&nm + &g);
    let mut acc = Value::zero(mode);
    for (kstar, p) in blocks.support.iter().zip(&blocks.probs) {
        let kk = Value::from_usize(k + kstar, mode);
        let p0 = &(&kk * &(&kk - &g)) / &denom;
        acc = &acc + &(&p0 * p);
    }
    acc
}

/// Literal evaluations of the published displays, kept separate from the
/// derived operations so the validation report can quantify any deviation.
pub mod published {
    use super::*;

    /// The new-configuration display: identical to the derived law except
    /// that it omits the first-appearance ordering count of the new blocks.
    pub fn new_config_display(
        q: &PredictiveQuery,
        new_blocks: &[usize],
        mode: Mode,
    ) -> Result<Value> {
        let with_count = new_config_pmf(q, new_blocks, mode)?;
        let count = Value::from_bigint(&appearance_order_count(new_blocks), mode);
        Ok(&with_count / &count)
    }

    /// The expected-new-blocks display:
    /// (k)_{n+m}/(n+g)_m sum_{k*} C(m,k*) k*/(k+k*)_n (k-g)_{k*}(g+n-k)_{m-k*}/(n)_m.
    pub fn expected_new_blocks_display(q: &PredictiveQuery, mode: Mode) -> Value {
        let n = q.basic.n();
        let k = q.basic.k();
        let m = q.m;
        let g = q.params.gamma(mode);
        let kv = Value::from_usize(k, mode);
        let nv = Value::from_usize(n, mode);
        let prefactor = &rising(&kv, n + m)
            / &(&rising(&(&g + &nv), m) * &rising(&nv, m));
        let mut acc = Value::zero(mode);
        for kstar in 1..=m {
            let mut term = &binomial(m, kstar, mode) * &Value::from_usize(kstar, mode);
            term = &term / &rising(&Value::from_usize(k + kstar, mode), n);
            term = &term * &rising(&(&kv - &g), kstar);
            term = &term * &rising(&(&g + &Value::from_usize(n - k, mode)), m - kstar);
            acc = &acc + &term;
        }
        &prefactor * &acc
    }

    /// The avoidance display: sums only over outcomes with at least one new
    /// block, with the reciprocal negative-order rising factorial read as
    /// 1/(x)_{-j} = (x-j)_j and the block-size sum taken over the permitted
    /// blocks.
    pub fn avoid_subset_display(
        q: &PredictiveQuery,
        avoided: &[usize],
        mode: Mode,
    ) -> Result<Value> {
        let occ = q.basic.occupancy().ok_or_else(|| {
            Error::InvalidArgument("avoidance display needs the full occupancy vector".into())
        })?;
        let n = occ.n();
        let k = occ.k();
        let m = q.m;
        let r = k - avoided.len();
        let permitted_size: usize = occ
            .counts()
            .iter()
            .enumerate()
            .filter(|(j, _)| !avoided.contains(j))
            .map(|(_, &c)| c)
            .sum();
        let g = q.params.gamma(mode);
        let kv = Value::from_usize(k, mode);
        let nv = Value::from_usize(n, mode);
        let denom = &rising(&nv, m) * &rising(&(&g + &nv), m);
        let mut acc = Value::zero(mode);
        for kstar in 1..=m {
            let mut term = &rising(&kv, kstar) * &rising(&(&kv - &g), kstar);
            term = &term * &rising(&(&g + &Value::from_usize(n - k, mode)), m - kstar);
            term = &term * &binomial(m, kstar, mode);
            term = &term
                * &rising(
                    &Value::from_usize(r + permitted_size + kstar, mode),
                    m - kstar,
                );
            acc = &acc + &term;
        }
        Ok(&acc / &denom)
    }

    /// The conditional new-block-configuration display, with the one
    /// unreadable denominator token read as the rising factorial
    /// (k*)_{k} = G(k+k*)/G(k*). All gamma-function factors at non-integer
    /// arguments cancel in the ratio, so the display stays exactly
    /// computable. It matches the derived conditional except for the same
    /// missing ordering count as the configuration display.
    pub fn conditional_new_config_display(
        q: &PredictiveQuery,
        new_blocks: &[usize],
        mode: Mode,
    ) -> Result<Value> {
        let s: usize = new_blocks.iter().sum();
        if s < 1 || s > q.m {
            return Err(Error::UndefinedConditional(
                "conditioning total out of range".into(),
            ));
        }
        let n = q.basic.n();
        let k = q.basic.k();
        let m = q.m;
        let kstar = new_blocks.len();
        let g = q.params.gamma(mode);
        let kv = Value::from_usize(k, mode);
        let gnk = &g + &Value::from_usize(n - k, mode);
        let mut num = &(&factorial(k + kstar - 1, mode) * &rising(&(&kv - &g), kstar))
            * &rising(&gnk, m - kstar);
        for &b in new_blocks {
            num = &num * &factorial(b, mode);
        }
        let mut den = Value::zero(mode);
        for kp in 1..=s.min(m) {
            let mut term = &binomial(s, kp, mode) * &factorial(s - 1, mode);
            term = &term * &(&factorial(k + kp - 1, mode) / &factorial(kp - 1, mode));
            term = &term * &rising(&(&kv - &g), kp);
            term = &term * &rising(&gnk, m - kp);
            den = &den + &term;
        }
        Ok(&num / &den)
    }

    /// The discovery-probability display, reading the ambiguous factorial as
    /// (m+n+k*-1)!/(n-1)!.
    pub fn discovery_display(q: &PredictiveQuery, mode: Mode) -> Value {
        let n = q.basic.n();
        let k = q.basic.k();
        let m = q.m;
        let g = q.params.gamma(mode);
        let kv = Value::from_usize(k, mode);
        let nv = Value::from_usize(n, mode);
        let denom = &rising(&nv, m + 1) * &rising(&(&g + &nv), m + 1);
        let mut acc = Value::zero(mode);
        for kstar in 0..=m {
            let mut term = &rising(&kv, kstar + 1) * &rising(&(&kv - &g), kstar + 1);
            term = &term * &rising(&(&g + &Value::from_usize(n - k, mode)), m - kstar);
            term = &term * &binomial(m, kstar, mode);
            term = &term * &(&factorial(m + n + kstar - 1, mode) / &factorial(n - 1, mode));
            acc = &acc + &term;
        }
        &acc / &denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gibbs_weight;
    use num::bigint::BigInt;
    use num::rational::BigRational;
    use num::Zero;

    fn params(s: &str) -> ModelParams {
        ModelParams::from_decimal(s).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn query(n: usize, k: usize, m: usize, gamma: &str) -> PredictiveQuery {
        PredictiveQuery::new(BasicSample::from_counts(n, k).unwrap(), m, params(gamma))
    }

    fn one() -> BigRational {
        BigRational::from_integer(BigInt::from(1))
    }

    #[test]
    fn block_count_pmf_fixed_values() {
        let pmf = block_count_pmf(1, &params("0.42"), Mode::Exact);
        assert_eq!(pmf.probs[0].expect_rational(), &one());
        let pmf = block_count_pmf(2, &params("0.5"), Mode::Exact);
        assert_eq!(pmf.probs[0].expect_rational(), &rat(2, 3));
        assert_eq!(pmf.probs[1].expect_rational(), &rat(1, 3));
        let pmf = block_count_pmf(8, &params("0.3"), Mode::Exact);
        assert_eq!(pmf.sum().expect_rational(), &one());
    }

    #[test]
    fn block_count_pmf_equals_weight_times_lah() {
        let p = params("0.3");
        for n in 1..=8usize {
            let pmf = block_count_pmf(n, &p, Mode::Exact);
            for (i, k) in pmf.support.iter().enumerate() {
                let alt = &gibbs_weight(n, *k, &p, Mode::Exact).unwrap()
                    * &lah(n, *k, Mode::Exact);
                assert_eq!(pmf.probs[i].expect_rational(), alt.expect_rational());
            }
        }
    }

    #[test]
    fn new_config_fixed_values() {
        let q = query(2, 1, 2, "0.5");
        let two_singles = new_config_pmf(&q, &[1, 1], Mode::Exact).unwrap();
        assert_eq!(two_singles.expect_rational(), &rat(1, 35));
        let one_double = new_config_pmf(&q, &[2], Mode::Exact).unwrap();
        assert_eq!(one_double.expect_rational(), &rat(1, 35));
        // single added observation in one new block collapses to the
        // one-step new-block rule
        let q = query(4, 2, 1, "0.3");
        let v = new_config_pmf(&q, &[1], Mode::Exact).unwrap();
        let occ = OccupancyVector::new(vec![3, 1]).unwrap();
        let step = crate::sampler::one_step_gnedin(&occ, &q.params, Mode::Exact);
        assert_eq!(v.expect_rational(), step[2].expect_rational());
    }

    #[test]
    fn new_config_rejects_bad_inputs() {
        let q = query(2, 1, 2, "0.5");
        assert!(new_config_pmf(&q, &[], Mode::Exact).is_err());
        assert!(new_config_pmf(&q, &[1, 0], Mode::Exact).is_err());
        assert!(new_config_pmf(&q, &[2, 1], Mode::Exact).is_err());
    }

    #[test]
    fn joint_law_edges_and_frozen_value() {
        let q = query(3, 2, 0, "0.5");
        let pmf = joint_new_pmf(&q, Mode::Exact);
        assert_eq!(pmf.support, vec![(0, 0)]);
        assert_eq!(pmf.probs[0].expect_rational(), &one());

        // one extra observation: the new-block entry is the one-step rule
        let q = query(3, 2, 1, "0.5");
        let pmf = joint_new_pmf(&q, Mode::Exact);
        let at = pmf.prob(&(1, 1)).unwrap();
        assert_eq!(at.expect_rational(), &rat(2, 7)); // 2*1.5/(3*3.5)
        assert_eq!(pmf.sum().expect_rational(), &one());

        // all three extra observations in a single new block
        let q = query(2, 1, 3, "0.5");
        let pmf = joint_new_pmf(&q, Mode::Exact);
        assert_eq!(pmf.prob(&(1, 3)).unwrap().expect_rational(), &rat(1, 84));
        assert_eq!(pmf.sum().expect_rational(), &one());
    }

    #[test]
    fn marginals_agree_with_joint() {
        for gamma in ["0.3", "0.7"] {
            for n in 1..=4usize {
                for k in 1..=n {
                    for m in 0..=4usize {
                        let q = query(n, k, m, gamma);
                        let joint = joint_new_pmf(&q, Mode::Exact);
                        let s_pmf = new_ball_count_pmf(&q, Mode::Exact);
                        let b_pmf = new_block_count_pmf(&q, Mode::Exact);
                        assert_eq!(joint.sum().expect_rational(), &one());
                        assert_eq!(s_pmf.sum().expect_rational(), &one());
                        assert_eq!(b_pmf.sum().expect_rational(), &one());
                        for (i, &s) in s_pmf.support.iter().enumerate() {
                            let total = joint
                                .support
                                .iter()
                                .zip(&joint.probs)
                                .filter(|((_, sj), _)| *sj == s)
                                .fold(Value::zero(Mode::Exact), |acc, (_, p)| &acc + p);
                            assert_eq!(total.expect_rational(), s_pmf.probs[i].expect_rational());
                        }
                        for (i, &kstar) in b_pmf.support.iter().enumerate() {
                            let total = joint
                                .support
                                .iter()
                                .zip(&joint.probs)
                                .filter(|((kj, _), _)| *kj == kstar)
                                .fold(Value::zero(Mode::Exact), |acc, (_, p)| &acc + p);
                            assert_eq!(total.expect_rational(), b_pmf.probs[i].expect_rational());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn one_extra_observation_block_law_closed_forms() {
        // P(one new block) = k(k-g)/(n(n+g)); the complement factors as
        // (g+n-k)(n+k)/((n+g)n)
        for gamma in ["0.3", "0.7"] {
            let g = params(gamma).gamma_rational().clone();
            for n in 1..=6usize {
                for k in 1..=n {
                    let q = query(n, k, 1, gamma);
                    let pmf = new_block_count_pmf(&q, Mode::Exact);
                    let nr = BigRational::from_integer(BigInt::from(n));
                    let kr = BigRational::from_integer(BigInt::from(k));
                    let denom = &nr * (&nr + &g);
                    let open = &kr * (&kr - &g) / &denom;
                    let stay = (&g + &nr - &kr) * (&nr + &kr) / &denom;
                    assert_eq!(pmf.prob(&1).unwrap().expect_rational(), &open);
                    assert_eq!(pmf.prob(&0).unwrap().expect_rational(), &stay);
                }
            }
        }
    }

    #[test]
    fn new_block_mean_edges_and_display_agreement() {
        let q = query(5, 2, 0, "0.3");
        let c = expected_new_blocks(&q, Mode::Exact);
        assert!(c.derived.is_zero());
        assert!(c.published.is_zero());

        // one extra observation: the mean is the one-step new-block rule
        let q = query(2, 1, 1, "0.5");
        let c = expected_new_blocks(&q, Mode::Exact);
        assert_eq!(c.derived.expect_rational(), &rat(1, 10));

        // the display is algebraically identical to the derived expectation
        for gamma in ["0.3", "0.7"] {
            for (n, k, m) in [(2usize, 1usize, 4usize), (4, 3, 3), (5, 5, 2), (3, 1, 4)] {
                let q = query(n, k, m, gamma);
                let c = expected_new_blocks(&q, Mode::Exact);
                assert_eq!(
                    c.derived.expect_rational(),
                    c.published.expect_rational(),
                    "n={n} k={k} m={m}"
                );
            }
        }
    }

    #[test]
    fn expected_new_balls_fixed_values() {
        let q = query(10, 3, 5, "0.5");
        let v = expected_new_balls(&q, Mode::Exact);
        assert_eq!(v.expect_rational(), &rat(5, 14)); // 0.35714285...
        let q = query(10, 3, 0, "0.5");
        assert!(expected_new_balls(&q, Mode::Exact).is_zero());
        // weight-ratio identity: m V_{n+1,k+1} / V_{n,k}
        for gamma in ["0.3", "0.7"] {
            let p = params(gamma);
            for (n, k, m) in [(4usize, 2usize, 3usize), (6, 6, 2), (5, 1, 4)] {
                let q = PredictiveQuery::new(BasicSample::from_counts(n, k).unwrap(), m, p.clone());
                let direct = expected_new_balls(&q, Mode::Exact);
                let ratio = &gibbs_weight(n + 1, k + 1, &p, Mode::Exact).unwrap()
                    / &gibbs_weight(n, k, &p, Mode::Exact).unwrap();
                let via_weights = &Value::from_usize(m, Mode::Exact) * &ratio;
                assert_eq!(direct.expect_rational(), via_weights.expect_rational());
                // and the mean of the marginal law
                let s_pmf = new_ball_count_pmf(&q, Mode::Exact);
                let mean = s_pmf.mean_over_support(|&s| s);
                assert_eq!(direct.expect_rational(), mean.expect_rational());
            }
        }
    }

    #[test]
    fn total_types_posterior_fixed_values() {
        let policy = TruncationPolicy {
            tail_epsilon: 1e-12,
            max_support: 500,
        };
        // a single observation carries no evidence: posterior = mixing law
        let p = params("0.5");
        let post = total_types_posterior(1, 1, &p, Mode::Exact, &policy).unwrap();
        for (i, &kappa) in post.pmf.support.iter().enumerate().take(30) {
            let mix = crate::model::mixing_pmf(
                crate::model::TypeCount::new(kappa).unwrap(),
                &p,
                Mode::Exact,
            );
            assert_eq!(post.pmf.probs[i].expect_rational(), mix.expect_rational());
        }
        // frozen: two observations in two blocks, P(types = 2) = 1/8
        let post = total_types_posterior(2, 2, &p, Mode::Exact, &policy).unwrap();
        assert_eq!(post.pmf.probs[0].expect_rational(), &rat(1, 8));
        // listed mass plus exact tail is exactly one
        assert_eq!(post.pmf.total_mass().expect_rational(), &one());
        // all-singleton sample: mean diverges
        assert!(matches!(post.mean, TypesMean::Divergent));
        // informative sample: finite mean above k
        let post = total_types_posterior(5, 2, &p, Mode::Exact, &policy).unwrap();
        match &post.mean {
            TypesMean::Finite { value, .. } => {
                let v = value.expect_rational();
                assert!(v > &rat(2, 1));
                assert!(v < &rat(50, 1));
            }
            TypesMean::Divergent => panic!("mean should be finite for k < n"),
        }
        assert_eq!(post.pmf.total_mass().expect_rational(), &one());
    }

    #[test]
    fn limit_law_shift_identity_and_bayes_value() {
        let policy = TruncationPolicy {
            tail_epsilon: 1e-12,
            max_support: 300,
        };
        let p = params("0.5");
        let limit = new_block_count_limit_pmf(2, 1, &p, Mode::Exact, &policy).unwrap();
        // frozen Bayes value: P(types = 1 | n=2, k=1) = 3/4
        assert_eq!(limit.probs[0].expect_rational(), &rat(3, 4));
        for (n, k) in [(2usize, 1usize), (5, 3), (4, 4)] {
            let post = total_types_posterior(n, k, &p, Mode::Exact, &policy).unwrap();
            let limit = new_block_count_limit_pmf(n, k, &p, Mode::Exact, &policy).unwrap();
            for i in 0..limit.support.len().min(post.pmf.support.len()).min(51) {
                assert_eq!(post.pmf.support[i], k + limit.support[i]);
                assert_eq!(
                    post.pmf.probs[i].expect_rational(),
                    limit.probs[i].expect_rational()
                );
            }
            // the incremental table matches direct evaluation of both
            // closed forms at interior points
            let g = p.gamma(Mode::Exact);
            for kstar in [0usize, 3, 11] {
                assert_eq!(
                    limit.probs[kstar].expect_rational(),
                    new_block_count_limit_term(n, k, kstar, &g, Mode::Exact).expect_rational()
                );
                assert_eq!(
                    post.pmf.probs[kstar].expect_rational(),
                    total_types_term(n, k, k + kstar, &g, Mode::Exact).expect_rational()
                );
            }
        }
    }

    #[test]
    fn balls_given_blocks_edges_and_ratio_identity() {
        // every additional observation in a new block: point mass at s = m
        let q = query(3, 2, 3, "0.7");
        let pmf = new_balls_given_blocks_pmf(&q, 3, Mode::Exact).unwrap();
        assert_eq!(pmf.support, vec![3]);
        assert_eq!(pmf.probs[0].expect_rational(), &one());
        let q = query(3, 2, 1, "0.7");
        let pmf = new_balls_given_blocks_pmf(&q, 1, Mode::Exact).unwrap();
        assert_eq!(pmf.support, vec![1]);
        assert_eq!(pmf.probs[0].expect_rational(), &one());
        assert!(new_balls_given_blocks_pmf(&q, 2, Mode::Exact).is_err());

        // equals the ratio of the joint to the block-count marginal
        for gamma in ["0.3", "0.7"] {
            for n in 1..=4usize {
                for k in 1..=n {
                    for m in 1..=4usize {
                        let q = query(n, k, m, gamma);
                        let joint = joint_new_pmf(&q, Mode::Exact);
                        let blocks = new_block_count_pmf(&q, Mode::Exact);
                        for kstar in 0..=m {
                            let cond = new_balls_given_blocks_pmf(&q, kstar, Mode::Exact).unwrap();
                            assert_eq!(cond.sum().expect_rational(), &one());
                            let pk = blocks.prob(&kstar).unwrap();
                            for (i, &s) in cond.support.iter().enumerate() {
                                let joint_p = joint
                                    .prob(&(kstar, s))
                                    .map(|v| v.expect_rational().clone())
                                    .unwrap_or_else(BigRational::zero);
                                assert_eq!(
                                    &joint_p,
                                    (&cond.probs[i] * pk).expect_rational(),
                                    "n={n} k={k} m={m} kstar={kstar} s={s}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn avoidance_fixed_values() {
        let occ = OccupancyVector::new(vec![2, 1]).unwrap();
        let q = PredictiveQuery::new(BasicSample::from_occupancy(occ), 2, params("0.5"));
        // avoiding nothing is certain
        let c = avoid_subset_prob(&q, &[], Mode::Exact).unwrap();
        assert_eq!(c.derived.expect_rational(), &one());
        // nothing to place is certain
        let occ = OccupancyVector::new(vec![2, 1]).unwrap();
        let q0 = PredictiveQuery::new(BasicSample::from_occupancy(occ), 0, params("0.5"));
        let c = avoid_subset_prob(&q0, &[1], Mode::Exact).unwrap();
        assert_eq!(c.derived.expect_rational(), &one());
        // frozen: avoid the singleton block of (2,1) with two additions
        let c = avoid_subset_prob(&q, &[1], Mode::Exact).unwrap();
        assert_eq!(c.derived.expect_rational(), &rat(23, 42));
        // the display omits the no-new-block term
        assert_eq!(c.published.expect_rational(), &rat(13, 42));
        // bad subsets are rejected
        assert!(avoid_subset_prob(&q, &[2], Mode::Exact).is_err());
        assert!(avoid_subset_prob(&q, &[0, 0], Mode::Exact).is_err());
    }

    #[test]
    fn avoidance_depends_only_on_avoided_total_size() {
        let p = params("0.3");
        for m in 0..=3usize {
            let occ_a = OccupancyVector::new(vec![2, 1, 1]).unwrap();
            let qa = PredictiveQuery::new(BasicSample::from_occupancy(occ_a), m, p.clone());
            let va = avoid_subset_prob(&qa, &[1], Mode::Exact).unwrap();
            let vb = avoid_subset_prob(&qa, &[2], Mode::Exact).unwrap();
            assert_eq!(va.derived.expect_rational(), vb.derived.expect_rational());
            // same (n, k), same avoided size, different arrangement
            let occ_c = OccupancyVector::new(vec![1, 1, 2]).unwrap();
            let qc = PredictiveQuery::new(BasicSample::from_occupancy(occ_c), m, p.clone());
            let vc = avoid_subset_prob(&qc, &[0], Mode::Exact).unwrap();
            assert_eq!(va.derived.expect_rational(), vc.derived.expect_rational());
        }
    }

    #[test]
    fn conditional_configuration_fixed_values() {
        // a single observation in new blocks is forced to be one singleton
        let q = query(4, 2, 3, "0.3");
        let v = conditional_new_config_pmf(&q, &[1], Mode::Exact).unwrap();
        assert!(!v.is_zero());
        let s1 = new_ball_count_pmf(&q, Mode::Exact);
        let cfg = new_config_pmf(&q, &[1], Mode::Exact).unwrap();
        assert_eq!(
            v.expect_rational(),
            (&cfg / s1.prob(&1).unwrap()).expect_rational()
        );

        let q = query(2, 1, 2, "0.5");
        let a = conditional_new_config_pmf(&q, &[2], Mode::Exact).unwrap();
        let b = conditional_new_config_pmf(&q, &[1, 1], Mode::Exact).unwrap();
        assert_eq!(a.expect_rational(), &rat(1, 2));
        assert_eq!(b.expect_rational(), &rat(1, 2));
        assert_eq!((&a + &b).expect_rational(), &one());

        assert!(conditional_new_config_pmf(&q, &[1, 1, 1], Mode::Exact).is_err());
    }

    #[test]
    fn conditional_total_mass_is_one() {
        for gamma in ["0.3", "0.7"] {
            for (n, k, m) in [(2usize, 1usize, 3usize), (3, 2, 4)] {
                let q = query(n, k, m, gamma);
                for s in 1..=m {
                    let mut total = Value::zero(Mode::Exact);
                    for kstar in 1..=s {
                        for cfg in crate::partitions::compositions(s, kstar, 1) {
                            total =
                                &total + &conditional_new_config_pmf(&q, &cfg, Mode::Exact).unwrap();
                        }
                    }
                    assert_eq!(total.expect_rational(), &one(), "s={s}");
                }
            }
        }
    }

    #[test]
    fn discovery_fixed_values() {
        // no additional sample: the plain one-step new-block rule
        let q = query(4, 2, 0, "0.3");
        let v = discovery_prob(&q, Mode::Exact);
        let p0 = crate::sampler::one_step_gnedin(
            &OccupancyVector::new(vec![3, 1]).unwrap(),
            &q.params,
            Mode::Exact,
        )[2]
        .clone();
        assert_eq!(v.expect_rational(), p0.expect_rational());
        // frozen two-term value
        let q = query(2, 1, 1, "0.5");
        let v = discovery_prob(&q, Mode::Exact);
        assert_eq!(v.expect_rational(), &rat(1, 14));
    }

    #[test]
    fn log_mode_tracks_exact_mode_across_operations() {
        let qe = query(5, 3, 4, "0.3");
        for (e, l) in [
            (
                expected_new_balls(&qe, Mode::Exact),
                expected_new_balls(&qe, Mode::Log),
            ),
            (
                discovery_prob(&qe, Mode::Exact),
                discovery_prob(&qe, Mode::Log),
            ),
            (
                new_config_pmf(&qe, &[2, 1], Mode::Exact).unwrap(),
                new_config_pmf(&qe, &[2, 1], Mode::Log).unwrap(),
            ),
        ] {
            assert!(e.rel_diff(&l) < 1e-12);
        }
        let pe = new_block_count_pmf(&qe, Mode::Exact);
        let pl = new_block_count_pmf(&qe, Mode::Log);
        for (a, b) in pe.probs.iter().zip(&pl.probs) {
            assert!(a.rel_diff(b) < 1e-12);
        }
    }
}

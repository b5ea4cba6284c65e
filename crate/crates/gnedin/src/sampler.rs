//! The generative side: one-step prediction rules, grouped m-step allocation
//! laws, full-partition sampling, and the stick-breaking frequency sampler.

use crate::combinatorics::{factorial, multinomial_int, rising};
use crate::error::{Error, Result};
use crate::model::{ModelParams, OccupancyVector, TypeCount};
use crate::numeric::{Mode, Value};
use num::bigint::BigInt;
use num::One;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

/// Deterministic generator for all sampling in this crate. Identical seed
/// and call sequence give identical output on every platform.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which partition law drives sequential sampling.
#[derive(Clone, Debug)]
pub enum SamplingModel {
    /// The mixed model with finitely many random types.
    Gnedin(ModelParams),
    /// The extreme component with exactly this many types.
    FixedTypes(TypeCount),
}

/// A partition under construction: its occupancy plus the model tag.
#[derive(Clone, Debug)]
pub struct PartitionState {
    pub occ: OccupancyVector,
    pub model: SamplingModel,
}

impl PartitionState {
    pub fn new(occ: OccupancyVector, model: SamplingModel) -> Result<Self> {
        if let SamplingModel::FixedTypes(xi) = &model {
            if occ.k() > xi.get() {
                return Err(Error::BlockCountExceedsTypes {
                    blocks: occ.k(),
                    types: xi.get(),
                });
            }
        }
        Ok(PartitionState { occ, model })
    }

    /// One-step prediction probabilities for the next observation: one entry
    /// per existing block, then the new-block entry.
    pub fn one_step(&self, mode: Mode) -> Result<Vec<Value>> {
        match &self.model {
            SamplingModel::Gnedin(p) => Ok(one_step_gnedin(&self.occ, p, mode)),
            SamplingModel::FixedTypes(xi) => one_step_pd(&self.occ, *xi, mode),
        }
    }
}

/// One-step rule for the mixed model: the next observation joins block `j`
/// with probability (n-k+g)(n_j+1)/(n(n+g)) and opens a new block with
/// probability k(k-g)/(n(n+g)). The entries sum to one identically.
pub fn one_step_gnedin(occ: &OccupancyVector, params: &ModelParams, mode: Mode) -> Vec<Value> {
    let n = occ.n();
    let k = occ.k();
    let g = params.gamma(mode);
    let denom = &Value::from_usize(n, mode) * &(&Value::from_usize(n, mode) + &g);
    let old_factor = &(&Value::from_usize(n - k, mode) + &g) / &denom;
    let mut probs: Vec<Value> = occ
        .counts()
        .iter()
        .map(|&nj| &old_factor * &Value::from_usize(nj + 1, mode))
        .collect();
    let kv = Value::from_usize(k, mode);
    probs.push(&(&kv * &(&kv - &g)) / &denom);
    probs
}

/// One-step rule for the fixed-type component: join block `j` with
/// probability (n_j+1)/(n+xi), open a new block with probability
/// (xi-k)/(n+xi). The new-block entry is exactly zero once k = xi.
pub fn one_step_pd(occ: &OccupancyVector, xi: TypeCount, mode: Mode) -> Result<Vec<Value>> {
    let n = occ.n();
    let k = occ.k();
    if k > xi.get() {
        return Err(Error::BlockCountExceedsTypes {
            blocks: k,
            types: xi.get(),
        });
    }
    let denom = Value::from_usize(n + xi.get(), mode);
    let mut probs: Vec<Value> = occ
        .counts()
        .iter()
        .map(|&nj| &Value::from_usize(nj + 1, mode) / &denom)
        .collect();
    probs.push(&Value::from_usize(xi.get() - k, mode) / &denom);
    Ok(probs)
}

fn one_step_weights_f64(counts: &[usize], n: usize, model: &SamplingModel) -> (Vec<f64>, f64) {
    let k = counts.len();
    match model {
        SamplingModel::Gnedin(p) => {
            let g = p.gamma_f64();
            let old_factor = n as f64 - k as f64 + g;
            let mut w: Vec<f64> = counts
                .iter()
                .map(|&nj| old_factor * (nj as f64 + 1.0))
                .collect();
            w.push(k as f64 * (k as f64 - g));
            let total = n as f64 * (n as f64 + g);
            (w, total)
        }
        SamplingModel::FixedTypes(xi) => {
            let mut w: Vec<f64> = counts.iter().map(|&nj| nj as f64 + 1.0).collect();
            w.push((xi.get() - k) as f64);
            (w, (n + xi.get()) as f64)
        }
    }
}

fn pick_weighted<R: Rng>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Draws a partition of `n` items by iterating the one-step rules from a
/// single-item state.
pub fn sample_partition<R: Rng>(n: usize, model: &SamplingModel, rng: &mut R) -> OccupancyVector {
    assert!(n >= 1);
    let mut counts = vec![1usize];
    for size in 1..n {
        let (w, total) = one_step_weights_f64(&counts, size, model);
        let choice = pick_weighted(&w, total, rng);
        if choice == counts.len() {
            counts.push(1);
        } else {
            counts[choice] += 1;
        }
    }
    OccupancyVector::new(counts).expect("all counts are positive")
}

/// Convenience: many independent draws from one seeded stream.
pub fn sample_many(n: usize, model: &SamplingModel, paths: usize, seed: u64) -> Vec<OccupancyVector> {
    let mut rng = seeded_rng(seed);
    (0..paths).map(|_| sample_partition(n, model, &mut rng)).collect()
}

/// An m-step extension pattern: how many extra observations each old block
/// received, and the sizes of the newly opened blocks in order of first
/// appearance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct AllocationOutcome {
    pub old_adds: Vec<usize>,
    pub new_blocks: Vec<usize>,
}

impl AllocationOutcome {
    pub fn new(old_adds: Vec<usize>, new_blocks: Vec<usize>) -> Result<Self> {
        if new_blocks.contains(&0) {
            return Err(Error::InvalidArgument(
                "new blocks must have positive size".into(),
            ));
        }
        Ok(AllocationOutcome {
            old_adds,
            new_blocks,
        })
    }

    /// Total number of added observations.
    pub fn added(&self) -> usize {
        self.old_adds.iter().sum::<usize>() + self.new_balls()
    }

    /// Observations that landed in new blocks.
    pub fn new_balls(&self) -> usize {
        self.new_blocks.iter().sum()
    }

    /// Number of new blocks.
    pub fn new_block_count(&self) -> usize {
        self.new_blocks.len()
    }
}

/// Number of set partitions of a `sum(new_blocks)`-element set whose block
/// sizes, listed by first appearance, equal `new_blocks`.
pub fn appearance_order_count(new_blocks: &[usize]) -> BigInt {
    let mut remaining: usize = new_blocks.iter().sum();
    let mut acc = BigInt::one();
    for &s in new_blocks {
        // the earliest remaining element anchors the block; choose the rest
        acc *= crate::combinatorics::binomial_int(remaining - 1, s - 1);
        remaining -= s;
    }
    acc
}

/// Number of labeled assignments of the added observations that realize the
/// outcome: a multinomial choice of which observations go where, times the
/// first-appearance partition count of the new-block part.
pub fn outcome_multiplicity(outcome: &AllocationOutcome) -> BigInt {
    let mut parts = outcome.old_adds.clone();
    parts.push(outcome.new_balls());
    multinomial_int(&parts) * appearance_order_count(&outcome.new_blocks)
}

/// Probability that one particular labeled assignment realizes the outcome:
/// the telescoping product of one-step rules along the insertion order,
///   (k)_{k*} (k-g)_{k*} (g+n-k)_{m-k*} / ((n)_m (g+n)_m)
///   * prod_j (n_j+1)_{m_j} * prod_l s_l!.
///
/// This is the published display of the grouped allocation law; every
/// assignment with the same outcome has the same probability.
pub fn assignment_probability(
    occ: &OccupancyVector,
    outcome: &AllocationOutcome,
    params: &ModelParams,
    mode: Mode,
) -> Result<Value> {
    if outcome.old_adds.len() != occ.k() {
        return Err(Error::DimensionMismatch(format!(
            "outcome lists {} old blocks, state has {}",
            outcome.old_adds.len(),
            occ.k()
        )));
    }
    let n = occ.n();
    let k = occ.k();
    let m = outcome.added();
    let kstar = outcome.new_block_count();
    let g = params.gamma(mode);
    let kv = Value::from_usize(k, mode);
    let nv = Value::from_usize(n, mode);

    let mut num = &rising(&kv, kstar) * &rising(&(&kv - &g), kstar);
    num = &num * &rising(&(&(&g + &nv) - &kv), m - kstar);
    let den = &rising(&nv, m) * &rising(&(&g + &nv), m);
    let mut p = &num / &den;
    for (&nj, &mj) in occ.counts().iter().zip(&outcome.old_adds) {
        p = &p * &rising(&Value::from_usize(nj + 1, mode), mj);
    }
    for &s in &outcome.new_blocks {
        p = &p * &factorial(s, mode);
    }
    Ok(p)
}

/// Probability of the extension outcome as an event: the per-assignment
/// probability summed over every labeled assignment realizing it. Summing
/// this over all outcomes of a given depth yields exactly one, and it equals
/// the sum over insertion orderings of one-step products; both facts fix the
/// combinatorial convention and are enforced by tests.
pub fn group_allocation_pmf(
    occ: &OccupancyVector,
    outcome: &AllocationOutcome,
    params: &ModelParams,
    mode: Mode,
) -> Result<Value> {
    let per_assignment = assignment_probability(occ, outcome, params, mode)?;
    let mult = Value::from_bigint(&outcome_multiplicity(outcome), mode);
    Ok(&mult * &per_assignment)
}

/// All extension outcomes of depth `m` over `k` old blocks, in a fixed
/// deterministic order.
pub fn enumerate_outcomes(k: usize, m: usize) -> Vec<AllocationOutcome> {
    let mut out = Vec::new();
    for s in 0..=m {
        let old_parts = crate::partitions::compositions(m - s, k, 0);
        let kstar_range: Vec<usize> = if s == 0 { vec![0] } else { (1..=s).collect() };
        for kstar in kstar_range {
            for new_parts in crate::partitions::compositions(s, kstar, 1) {
                for old in &old_parts {
                    out.push(AllocationOutcome {
                        old_adds: old.clone(),
                        new_blocks: new_parts.clone(),
                    });
                }
            }
        }
    }
    out
}

/// Simulates an m-step extension of the given basic sample under the mixed
/// model, returning the realized outcome.
pub fn extension_walk<R: Rng>(
    occ: &OccupancyVector,
    m: usize,
    params: &ModelParams,
    rng: &mut R,
) -> AllocationOutcome {
    let k0 = occ.k();
    let mut counts = occ.counts().to_vec();
    let model = SamplingModel::Gnedin(params.clone());
    for n in occ.n()..occ.n() + m {
        let (w, total) = one_step_weights_f64(&counts, n, &model);
        let choice = pick_weighted(&w, total, rng);
        if choice == counts.len() {
            counts.push(1);
        } else {
            counts[choice] += 1;
        }
    }
    let old_adds = (0..k0).map(|j| counts[j] - occ.counts()[j]).collect();
    let new_blocks = counts[k0..].to_vec();
    AllocationOutcome {
        old_adds,
        new_blocks,
    }
}

/// Simulates m extension steps and reports whether the following observation
/// would open a brand-new block.
pub fn discovery_walk<R: Rng>(
    occ: &OccupancyVector,
    m: usize,
    params: &ModelParams,
    rng: &mut R,
) -> bool {
    let mut counts = occ.counts().to_vec();
    let model = SamplingModel::Gnedin(params.clone());
    for n in occ.n()..=occ.n() + m {
        let (w, total) = one_step_weights_f64(&counts, n, &model);
        let choice = pick_weighted(&w, total, rng);
        if choice == counts.len() {
            if n == occ.n() + m {
                return true;
            }
            counts.push(1);
        } else {
            if n == occ.n() + m {
                return false;
            }
            counts[choice] += 1;
        }
    }
    unreachable!()
}

/// Stick-breaking draw of the limit frequencies of the fixed-type component:
/// P_j = W_j prod_{i<j} (1 - W_i) with independent W_i ~ Beta(2, xi - i) and
/// W_xi = 1 exactly (Beta(2, 0) is a point mass at one).
pub fn stick_breaking_sample<R: Rng>(xi: TypeCount, rng: &mut R) -> Vec<f64> {
    let x = xi.get();
    let mut freqs = Vec::with_capacity(x);
    let mut stick = 1.0f64;
    for i in 1..=x {
        let w = if i == x {
            1.0
        } else {
            Beta::new(2.0, (x - i) as f64)
                .expect("shape parameters are positive")
                .sample(rng)
        };
        freqs.push(stick * w);
        stick *= 1.0 - w;
    }
    freqs
}

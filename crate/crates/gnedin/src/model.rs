//! The model layer: partition weights, exchangeable partition probability
//! functions, the mixing law over the number of types, and the fixed-type
//! extreme components they mix over.

use crate::combinatorics::{factorial, falling_int, lah, rising, rising_int};
use crate::error::{Error, Result};
use crate::numeric::{parse_decimal, rational_to_f64, Mode, Value};
use num::rational::BigRational;
use num::{One, Zero};

/// Model parameter gamma, held exactly. Construction enforces 0 < gamma < 1
/// strictly; the boundary models are not supported.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    gamma: BigRational,
}

impl ModelParams {
    /// Builds from an `f64`, adopting its exact binary value.
    pub fn new(gamma: f64) -> Result<Self> {
        let r = BigRational::from_float(gamma)
            .ok_or_else(|| Error::InvalidGamma(format!("{gamma}")))?;
        Self::from_rational(r)
    }

    /// Builds from an exact rational.
    pub fn from_rational(gamma: BigRational) -> Result<Self> {
        if gamma <= BigRational::zero() || gamma >= BigRational::one() {
            return Err(Error::InvalidGamma(format!("{gamma}")));
        }
        Ok(ModelParams { gamma })
    }

    /// Builds from a decimal string such as "0.3", kept exact (3/10, not the
    /// nearest double).
    pub fn from_decimal(s: &str) -> Result<Self> {
        Self::from_rational(parse_decimal(s)?)
    }

    pub fn gamma_rational(&self) -> &BigRational {
        &self.gamma
    }

    pub fn gamma_f64(&self) -> f64 {
        rational_to_f64(&self.gamma)
    }

    pub fn gamma(&self, mode: Mode) -> Value {
        Value::from_rational(&self.gamma, mode)
    }
}

/// Number of types in a fixed-type extreme component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TypeCount(usize);

impl TypeCount {
    pub fn new(xi: usize) -> Result<Self> {
        if xi < 1 {
            return Err(Error::InvalidTypeCount);
        }
        Ok(TypeCount(xi))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Block sizes of an observed partition, every entry positive. The order is
/// kept as given; all probability functions here are symmetric in it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct OccupancyVector {
    counts: Vec<usize>,
}

impl OccupancyVector {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidOccupancy("no blocks".into()));
        }
        if let Some(pos) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidOccupancy(format!(
                "block {} has size zero",
                pos + 1
            )));
        }
        Ok(OccupancyVector { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total sample size.
    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Product of the factorials of the block sizes.
    pub fn block_factorial_product(&self, mode: Mode) -> Value {
        let mut acc = Value::one(mode);
        for &c in &self.counts {
            acc = &acc * &factorial(c, mode);
        }
        acc
    }
}

fn check_pair(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= n, got n={n}, k={k}"
        )));
    }
    Ok(())
}

/// Partition weight V_{n,k}:
/// (k-1)!/(n-1)! * (1-g)_{k-1} (g)_{n-k} / (1+g)_{n-1}, rising factorials.
pub fn gibbs_weight(n: usize, k: usize, params: &ModelParams, mode: Mode) -> Result<Value> {
    check_pair(n, k)?;
    let g = params.gamma(mode);
    let one = Value::one(mode);
    let num = &(&factorial(k - 1, mode) * &rising(&(&one - &g), k - 1)) * &rising(&g, n - k);
    let den = &factorial(n - 1, mode) * &rising(&(&one + &g), n - 1);
    Ok(&num / &den)
}

/// The second published form of the partition weight:
/// (k-1)!/(n-1)! * g (1-g)_{k-1} / (g+n-k)_k.
pub fn gibbs_weight_alt(n: usize, k: usize, params: &ModelParams, mode: Mode) -> Result<Value> {
    check_pair(n, k)?;
    let g = params.gamma(mode);
    let one = Value::one(mode);
    let num = &(&factorial(k - 1, mode) * &g) * &rising(&(&one - &g), k - 1);
    let shifted = &g + &Value::from_usize(n - k, mode);
    let den = &factorial(n - 1, mode) * &rising(&shifted, k);
    Ok(&num / &den)
}

/// Partition probability of a specific set partition with the given block
/// sizes: V_{n,k} times the product of block-size factorials. Symmetric in
/// the block order.
pub fn eppf_gnedin(occ: &OccupancyVector, params: &ModelParams, mode: Mode) -> Value {
    let w = gibbs_weight(occ.n(), occ.k(), params, mode)
        .expect("occupancy invariants guarantee 1 <= k <= n");
    &w * &occ.block_factorial_product(mode)
}

/// Partition probability under the fixed-type component with `xi` types:
/// (xi)_{k falling} / (xi)_{n rising} times the block-size factorials.
/// Exactly zero when the partition has more than `xi` blocks, in both
/// backends (the factorials are computed over integer factors).
pub fn eppf_pd_minus1(occ: &OccupancyVector, xi: TypeCount, mode: Mode) -> Value {
    let ratio = &falling_int(xi.get() as i64, occ.k(), mode)
        / &rising_int(xi.get() as i64, occ.n(), mode);
    &ratio * &occ.block_factorial_product(mode)
}

/// The other published form of the fixed-type partition probability:
/// (xi-1)_{k-1 rising -1} / (xi+1)_{n-1} times the block-size factorials.
pub fn eppf_pd_minus1_alt(occ: &OccupancyVector, xi: TypeCount, mode: Mode) -> Value {
    let num = falling_int(xi.get() as i64 - 1, occ.k() - 1, mode);
    let den = rising_int(xi.get() as i64 + 1, occ.n() - 1, mode);
    &(&num / &den) * &occ.block_factorial_product(mode)
}

/// Mixing probability of drawing a component with `xi` types:
/// g (1-g)_{xi-1} / xi!.
pub fn mixing_pmf(xi: TypeCount, params: &ModelParams, mode: Mode) -> Value {
    let g = params.gamma(mode);
    let one = Value::one(mode);
    let num = &g * &rising(&(&one - &g), xi.get() - 1);
    &num / &factorial(xi.get(), mode)
}

/// Exact tail mass of the mixing law beyond `xi_max`:
/// sum over xi > xi_max equals (1-g)_{xi_max} / xi_max!, by telescoping.
///
/// The tail is heavy (it decays like xi_max^(-g)), so partial sums alone
/// converge far too slowly for tight tolerances; the closed form is the only
/// practical route.
pub fn mixing_tail(xi_max: usize, params: &ModelParams, mode: Mode) -> Value {
    let g = params.gamma(mode);
    let one = Value::one(mode);
    &rising(&(&one - &g), xi_max) / &factorial(xi_max, mode)
}

/// Probability that a sample of size `n` from the fixed-type component with
/// `xi` types occupies exactly `k` blocks:
/// (xi)_{k falling} Lah(n, k) / (xi)_{n rising}. Zero for k > xi.
pub fn pd_kn_pmf(n: usize, k: usize, xi: TypeCount, mode: Mode) -> Result<Value> {
    check_pair(n, k)?;
    let num = &falling_int(xi.get() as i64, k, mode) * &lah(n, k, mode);
    Ok(&num / &rising_int(xi.get() as i64, n, mode))
}

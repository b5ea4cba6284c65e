//! Set-partition enumeration via restricted growth strings, with a hard
//! budget so oracle misuse fails loudly instead of running forever.

use crate::error::{Error, Result};
use num::bigint::BigInt;

/// Caps on exhaustive enumeration. Exceeding a cap is an error, never a
/// silent truncation.
#[derive(Clone, Copy, Debug)]
pub struct EnumerationBudget {
    /// Largest set size for set-partition enumeration.
    pub max_items: usize,
    /// Largest extension depth for path enumeration.
    pub max_extension: usize,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        // Bell(12) is about 4.2 million partitions, still seconds of work.
        EnumerationBudget {
            max_items: 12,
            max_extension: 6,
        }
    }
}

impl EnumerationBudget {
    pub fn check_items(&self, n: usize) -> Result<()> {
        if n > self.max_items {
            Err(Error::BudgetExceeded {
                requested: n,
                cap: self.max_items,
            })
        } else {
            Ok(())
        }
    }

    pub fn check_extension(&self, m: usize) -> Result<()> {
        if m > self.max_extension {
            Err(Error::BudgetExceeded {
                requested: m,
                cap: self.max_extension,
            })
        } else {
            Ok(())
        }
    }
}

/// Iterator over all set partitions of `{0, .., n-1}`, one restricted growth
/// string per partition: `rgs[i]` is the block index of item `i`, blocks
/// numbered by first appearance, `rgs[i] <= 1 + max(rgs[..i])`.
pub struct SetPartitions {
    rgs: Vec<usize>,
    prefix_max: Vec<usize>,
    started: bool,
    done: bool,
}

/// Enumerates the set partitions of an `n`-element set.
pub fn set_partitions(n: usize, budget: &EnumerationBudget) -> Result<SetPartitions> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cannot partition the empty set".into(),
        ));
    }
    budget.check_items(n)?;
    Ok(SetPartitions {
        rgs: vec![0; n],
        prefix_max: vec![0; n],
        started: false,
        done: false,
    })
}

impl Iterator for SetPartitions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.rgs.clone());
        }
        let n = self.rgs.len();
        // Find the rightmost position that can still grow.
        let mut i = n;
        loop {
            if i == 1 {
                self.done = true;
                return None;
            }
            i -= 1;
            if self.rgs[i] <= self.prefix_max[i - 1] {
                break;
            }
        }
        self.rgs[i] += 1;
        self.prefix_max[i] = self.prefix_max[i - 1].max(self.rgs[i]);
        for j in i + 1..n {
            self.rgs[j] = 0;
            self.prefix_max[j] = self.prefix_max[j - 1];
        }
        Some(self.rgs.clone())
    }
}

/// Block sizes of a restricted growth string, in order of first appearance.
pub fn occupancy_of(rgs: &[usize]) -> Vec<usize> {
    let k = rgs.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &b in rgs {
        counts[b] += 1;
    }
    counts
}

/// Blocks of a restricted growth string as item lists.
pub fn blocks_of(rgs: &[usize]) -> Vec<Vec<usize>> {
    let k = rgs.iter().copied().max().map_or(0, |m| m + 1);
    let mut blocks = vec![Vec::new(); k];
    for (item, &b) in rgs.iter().enumerate() {
        blocks[b].push(item);
    }
    blocks
}

/// Bell number B(n) by the triangle recurrence, exact.
pub fn bell_number(n: usize) -> BigInt {
    if n == 0 {
        return BigInt::from(1u8);
    }
    let mut row = vec![BigInt::from(1u8)];
    for _ in 1..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for v in &row {
            let prev = next.last().unwrap().clone();
            next.push(prev + v);
        }
        row = next;
    }
    row.last().unwrap().clone()
}

/// All integer partitions of `n` (block-size shapes), parts non-increasing.
pub fn integer_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(remaining: usize, max_part: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            current.push(part);
            rec(remaining - part, part, current, out);
            current.pop();
        }
    }
    rec(n, n, &mut current, &mut out);
    out
}

/// All compositions of `n` into exactly `parts` parts, each at least `min`.
pub fn compositions(n: usize, parts: usize, min: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(parts);
    fn rec(
        remaining: usize,
        parts_left: usize,
        min: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if parts_left == 0 {
            if remaining == 0 {
                out.push(current.clone());
            }
            return;
        }
        let reserve = min * (parts_left - 1);
        if remaining < min + reserve {
            return;
        }
        for first in min..=remaining - reserve {
            current.push(first);
            rec(remaining - first, parts_left - 1, min, current, out);
            current.pop();
        }
    }
    if parts == 0 {
        if n == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(n, parts, min, &mut current, &mut out);
    out
}

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Partition;

/// Test fraction as an exact rational plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_num: u64,
    pub test_den: u64,
    pub seed: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl SplitSpec {
    pub const DEFAULT_SEED: u64 = 42;

    pub fn new(test_num: u64, test_den: u64, seed: u64) -> Result<Self> {
        if test_den == 0 || test_num == 0 || test_num > test_den {
            return Err(Error::Config(format!(
                "test fraction {test_num}/{test_den} must lie in (0, 1]"
            )));
        }
        let g = gcd(test_num, test_den);
        Ok(SplitSpec {
            test_num: test_num / g,
            test_den: test_den / g,
            seed,
        })
    }

    /// Parse `"0.8"` or `"4/5"` exactly.
    pub fn parse_fraction(text: &str, seed: u64) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::Config(format!("invalid test fraction `{text}`"));
        if let Some((n, d)) = text.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return SplitSpec::new(n, d, seed);
        }
        let (int, frac) = text.split_once('.').unwrap_or((text, ""));
        if frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        SplitSpec::new(num, den, seed)
    }

    pub fn test_fraction(&self) -> f64 {
        self.test_num as f64 / self.test_den as f64
    }

    /// Train share of `n` items: `floor(n * (1 - test_fraction))`.
    pub fn train_size(&self, n: usize) -> usize {
        let train_num = (self.test_den - self.test_num) as u128;
        (n as u128 * train_num / self.test_den as u128) as usize
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} (seed {})", self.test_num, self.test_den, self.seed)
    }
}

impl FromStr for SplitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitSpec::parse_fraction(s, SplitSpec::DEFAULT_SEED)
    }
}

/// Items that can be split: a canonical sort key, a stratum and a settable
/// partition.
pub trait Splittable {
    fn sort_key(&self) -> String;
    fn stratum(&self) -> String;
    fn set_partition(&mut self, partition: Partition);
}

/// Per-stratum train quotas summing exactly to `train_total`
/// (largest-remainder apportionment, ties to the earlier stratum).
fn apportion(sizes: &[usize], n: usize, train_total: usize) -> Vec<usize> {
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut quotas: Vec<usize> = sizes
        .iter()
        .map(|&s| (s as u128 * train_total as u128 / n as u128) as usize)
        .collect();
    let mut remainders: Vec<(u128, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| ((s as u128 * train_total as u128) % n as u128, i))
        .collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = train_total - quotas.iter().sum::<usize>();
    for (_, i) in remainders {
        if left == 0 {
            break;
        }
        if quotas[i] < sizes[i] {
            quotas[i] += 1;
            left -= 1;
        }
    }
    quotas
}

/// Stratified seeded split. Items are sorted canonically first, so the
/// result does not depend on input order. Both halves come back in
/// canonical order with their partition set.
pub fn split_dataset<T: Splittable>(items: Vec<T>, spec: &SplitSpec) -> (Vec<T>, Vec<T>) {
    let n = items.len();
    let train_total = spec.train_size(n);
    let mut strata: BTreeMap<String, Vec<(String, T)>> = BTreeMap::new();
    for item in items {
        strata.entry(item.stratum()).or_default().push((item.sort_key(), item));
    }
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let quotas = apportion(&sizes, n, train_total);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(train_total);
    let mut test = Vec::with_capacity(n - train_total);
    for ((_, mut group), quota) in strata.into_iter().zip(quotas) {
        group.sort_by(|a, b| a.0.cmp(&b.0));
        group.shuffle(&mut rng);
        for (i, (key, mut item)) in group.into_iter().enumerate() {
            if i < quota {
                item.set_partition(Partition::Train);
                train.push((key, item));
            } else {
                item.set_partition(Partition::Test);
                test.push((key, item));
            }
        }
    }
    train.sort_by(|a, b| a.0.cmp(&b.0));
    test.sort_by(|a, b| a.0.cmp(&b.0));
    (
        train.into_iter().map(|(_, i)| i).collect(),
        test.into_iter().map(|(_, i)| i).collect(),
    )
}

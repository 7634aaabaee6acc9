//! Statistics kit: running moments, histograms, chi-square and TV tests.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};
use crate::oracle::{kahan_sum, EdgeMask, ExactLaw};

/// Running mean and variance (Welford). Merging is order-sensitive only in
/// the last bits, so callers merge in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        iter.into_iter().for_each(|x| m.push(x));
        m
    }
}

/// Counts keyed by outcome.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Histogram<K: Ord> {
    counts: BTreeMap<K, u64>,
}

impl<K: Ord + Clone> Histogram<K> {
    pub fn new() -> Self {
        Histogram { counts: BTreeMap::new() }
    }

    pub fn add(&mut self, key: K) {
        *self.counts.entry(key).or_default() += 1;
    }

    pub fn add_many(&mut self, key: K, n: u64) {
        *self.counts.entry(key).or_default() += n;
    }

    pub fn merge(&mut self, other: &Histogram<K>) {
        for (k, &n) in &other.counts {
            self.add_many(k.clone(), n);
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, key: &K) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, u64)> {
        self.counts.iter().map(|(k, &n)| (k, n))
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.counts.keys()
    }

    /// Normalised frequencies.
    pub fn frequencies(&self) -> BTreeMap<K, f64> {
        let t = self.total() as f64;
        self.counts.iter().map(|(k, &n)| (k.clone(), n as f64 / t)).collect()
    }
}

impl<K: Ord + Clone> FromIterator<K> for Histogram<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut h = Histogram::new();
        iter.into_iter().for_each(|k| h.add(k));
        h
    }
}

/// Expected proportions for a goodness-of-fit test.
pub enum Expected<'a, K: Ord> {
    Law(&'a ExactLaw),
    Proportions(&'a BTreeMap<K, f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Minimum expected count per bin; smaller bins are pooled.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

/// Pearson chi-square test from paired (observed, expected) counts.
/// Bins with expected count below the minimum are pooled together; a
/// pooled remainder that is still too small is merged into the smallest
/// regular bin.
pub fn chi_square_from_counts(cells: &[(f64, f64)]) -> Result<ChiSquareResult> {
    let total_obs: f64 = cells.iter().map(|c| c.0).sum();
    if total_obs <= 0.0 {
        return invalid("no observations");
    }
    if cells.iter().any(|&(o, e)| o > 0.0 && e <= 0.0) {
        // Observed mass where none is expected.
        return Ok(ChiSquareResult { statistic: f64::INFINITY, dof: cells.len().saturating_sub(1), p_value: 0.0 });
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for &(o, e) in cells {
        if e >= MIN_EXPECTED_COUNT {
            bins.push((o, e));
        } else {
            pooled.0 += o;
            pooled.1 += e;
        }
    }
    if pooled.1 > 0.0 || pooled.0 > 0.0 {
        if pooled.1 >= MIN_EXPECTED_COUNT || bins.is_empty() {
            bins.push(pooled);
        } else {
            let smallest = bins
                .iter_mut()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            smallest.0 += pooled.0;
            smallest.1 += pooled.1;
        }
    }
    if bins.len() < 2 {
        return Ok(ChiSquareResult { statistic: 0.0, dof: 0, p_value: 1.0 });
    }
    let statistic = kahan_sum(bins.iter().map(|&(o, e)| (o - e) * (o - e) / e));
    let dof = bins.len() - 1;
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).unwrap_or(0.0)
    };
    Ok(ChiSquareResult { statistic, dof, p_value })
}

/// Goodness of fit of `observed` against expected proportions.
pub fn chi_square_gof<K: Ord + Clone>(observed: &Histogram<K>, expected: &BTreeMap<K, f64>) -> Result<ChiSquareResult> {
    let n = observed.total() as f64;
    if n == 0.0 {
        return invalid("empty histogram");
    }
    let mut keys: Vec<&K> = expected.keys().collect();
    keys.extend(observed.keys().filter(|k| !expected.contains_key(*k)));
    keys.sort();
    keys.dedup();
    let cells: Vec<(f64, f64)> = keys
        .into_iter()
        .map(|k| (observed.count(k) as f64, n * expected.get(k).copied().unwrap_or(0.0)))
        .collect();
    chi_square_from_counts(&cells)
}

pub fn law_proportions(law: &ExactLaw) -> BTreeMap<EdgeMask, f64> {
    law.iter().collect()
}

/// Goodness of fit of sampled edge sets against an exact law.
pub fn chi_square_vs_law(observed: &Histogram<EdgeMask>, law: &ExactLaw) -> Result<ChiSquareResult> {
    chi_square_gof(observed, &law_proportions(law))
}

/// Two-sample chi-square test of homogeneity.
pub fn chi_square_homogeneity<K: Ord + Clone>(a: &Histogram<K>, b: &Histogram<K>) -> Result<ChiSquareResult> {
    let (na, nb) = (a.total() as f64, b.total() as f64);
    if na == 0.0 || nb == 0.0 {
        return invalid("empty histogram");
    }
    if a == b {
        return Ok(ChiSquareResult { statistic: 0.0, dof: 0, p_value: 1.0 });
    }
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let n = na + nb;
    // Pool sparse keys on the combined margin before forming the table.
    let mut rows: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for k in keys {
        let (x, y) = (a.count(k) as f64, b.count(k) as f64);
        if (x + y) * na.min(nb) / n >= MIN_EXPECTED_COUNT {
            rows.push((x, y));
        } else {
            pooled.0 += x;
            pooled.1 += y;
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        rows.push(pooled);
    }
    if rows.len() < 2 {
        return Ok(ChiSquareResult { statistic: 0.0, dof: 0, p_value: 1.0 });
    }
    let statistic = kahan_sum(rows.iter().flat_map(|&(x, y)| {
        let ea = (x + y) * na / n;
        let eb = (x + y) * nb / n;
        [(x - ea).powi(2) / ea, (y - eb).powi(2) / eb]
    }));
    let dof = rows.len() - 1;
    let p_value = ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).unwrap_or(0.0);
    Ok(ChiSquareResult { statistic, dof, p_value })
}

/// Half-L1 distance between the normalised histogram and expected proportions.
pub fn empirical_tv<K: Ord + Clone>(observed: &Histogram<K>, expected: &BTreeMap<K, f64>) -> f64 {
    let freq = observed.frequencies();
    let mut keys: Vec<&K> = freq.keys().chain(expected.keys()).collect();
    keys.sort();
    keys.dedup();
    let l1 = kahan_sum(keys.into_iter().map(|k| {
        (freq.get(k).copied().unwrap_or(0.0) - expected.get(k).copied().unwrap_or(0.0)).abs()
    }));
    (0.5 * l1).clamp(0.0, 1.0)
}

pub fn empirical_tv_vs_law(observed: &Histogram<EdgeMask>, law: &ExactLaw) -> f64 {
    empirical_tv(observed, &law_proportions(law))
}

/// Half-L1 distance between two normalised histograms.
pub fn histogram_tv<K: Ord + Clone>(a: &Histogram<K>, b: &Histogram<K>) -> f64 {
    empirical_tv(a, &b.frequencies())
}

//! Empirical laws, total-variation estimates and confidence radii.

use std::collections::HashMap;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

/// Maps arbitrary keys (typically canonical encodings) to dense ids.
#[derive(Clone, Debug, Default)]
pub struct Interner<K: Hash + Eq> {
    ids: HashMap<K, u32>,
}

impl<K: Hash + Eq> Interner<K> {
    pub fn new() -> Self {
        Interner { ids: HashMap::new() }
    }

    pub fn id(&mut self, k: K) -> u32 {
        let n = self.ids.len() as u32;
        *self.ids.entry(k).or_insert(n)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn counts(xs: &[u32], types: usize) -> Vec<u64> {
    let mut c = vec![0u64; types];
    for &x in xs {
        c[x as usize] += 1;
    }
    c
}

fn num_types(a: &[u32], b: &[u32]) -> usize {
    a.iter().chain(b).map(|&x| x as usize + 1).max().unwrap_or(0)
}

/// Plug-in TV distance between the empirical laws of two samples.
pub fn tv_plugin(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let t = num_types(a, b);
    let (ca, cb) = (counts(a, t), counts(b, t));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    ca.iter().zip(&cb).map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs()).sum::<f64>() / 2.0
}

/// Good–Turing estimate of the unseen mass: singletons over sample size.
pub fn missing_mass(a: &[u32]) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let t = num_types(a, &[]);
    counts(a, t).iter().filter(|&&c| c == 1).count() as f64 / a.len() as f64
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TvEstimate {
    pub plugin: f64,
    /// mean and standard deviation of the plug-in estimate over random
    /// relabelings of the pooled sample (its value when both laws agree)
    pub null_mean: f64,
    pub null_sd: f64,
    /// `max(0, plugin - null_mean)`: excess over the same-law noise floor.
    /// It under-estimates a positive TV (the floor shrinks when the laws
    /// differ), so it is only a trend statistic.
    pub corrected: f64,
    /// `(plugin - null_mean) / null_sd`, the permutation test statistic
    pub z: f64,
    pub missing_mass_a: f64,
    pub missing_mass_b: f64,
    pub types: usize,
    pub samples_a: usize,
    pub samples_b: usize,
}

/// Two-sample TV with a permutation baseline. With many rare types the
/// plug-in estimate is dominated by sampling noise; the baseline is its
/// level when both samples come from the pooled law.
pub fn tv_estimate<R: Rng + ?Sized>(a: &[u32], b: &[u32], reps: usize, rng: &mut R) -> TvEstimate {
    let plugin = tv_plugin(a, b);
    let mut pool: Vec<u32> = a.iter().chain(b).copied().collect();
    let mut null = Vec::with_capacity(reps);
    for _ in 0..reps {
        pool.shuffle(rng);
        let (x, y) = pool.split_at(a.len());
        null.push(tv_plugin(x, y));
    }
    let (null_mean, null_sd) = mean_sd(&null);
    TvEstimate {
        plugin,
        null_mean,
        null_sd,
        corrected: (plugin - null_mean).max(0.0),
        z: if null_sd > 0.0 { (plugin - null_mean) / null_sd } else { 0.0 },
        missing_mass_a: missing_mass(a),
        missing_mass_b: missing_mass(b),
        types: num_types(a, b),
        samples_a: a.len(),
        samples_b: b.len(),
    }
}

/// Sample mean and (unbiased) standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, v.sqrt())
}

/// Estimate with a 3σ̂ confidence radius.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub radius: f64,
    pub n: usize,
}

impl Estimate {
    pub fn of_mean(xs: &[f64]) -> Self {
        let (m, s) = mean_sd(xs);
        Estimate { value: m, radius: 3.0 * s / (xs.len().max(1) as f64).sqrt(), n: xs.len() }
    }

    pub fn of_proportion(k: usize, n: usize) -> Self {
        let f = if n == 0 { 0.0 } else { k as f64 / n as f64 };
        Estimate { value: f, radius: 3.0 * (f * (1.0 - f) / n.max(1) as f64).sqrt(), n }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.radius
    }

    pub fn upper(&self) -> f64 {
        self.value + self.radius
    }
}

/// True iff `xs` is strictly decreasing.
pub fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Pearson chi-square statistic of observed counts against probabilities;
/// cells with expected count below 5 are merged into one.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut df = 0usize;
    let (mut ro, mut re) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n as f64;
        if e < 5.0 {
            ro += o as f64;
            re += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            df += 1;
        }
    }
    if re > 0.0 {
        stat += (ro - re).powi(2) / re;
        df += 1;
    }
    (stat, df.saturating_sub(1))
}

/// Upper 0.1% quantile of the chi-square law, Wilson–Hilferty approximation.
pub fn chi_square_critical(df: usize) -> f64 {
    let k = df.max(1) as f64;
    let z = 3.090_232;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

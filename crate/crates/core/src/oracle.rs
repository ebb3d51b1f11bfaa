//! Exact canonical-ensemble statistics by brute-force enumeration of every
//! occupancy configuration of `N` indistinguishable particles over the
//! joint spectrum.
//!
//! Degenerate levels are not expanded into sub-levels; a level of
//! degeneracy `g` holding `n` particles contributes the placement count
//! `m(n) = C(g + n - 1, n)` (BE), `C(g, n)` (FD) or `g^n / n!` (MB).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::Statistics;
use crate::spectrum::JointSpectrum;

pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Identifies the system a set of statistics belongs to, so results from
/// different routes can only be compared when they describe the same thing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemDescriptor {
    pub entries: usize,
    pub particles: u32,
    pub beta: f64,
    pub statistics: Statistics,
}

/// One microstate: an integer occupation per joint entry.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyConfiguration {
    pub counts: Vec<u32>,
    pub energy: f64,
    /// `sum_s ln m_s(n_s)`; the Boltzmann factor is added by
    /// [`configuration_log_weight`].
    pub log_multiplicity: f64,
}

impl OccupancyConfiguration {
    pub fn log_weight(&self, beta: f64) -> f64 {
        self.log_multiplicity - beta * self.energy
    }
}

/// `ln m(n)` for a level of degeneracy `g`, computed as an exact product so
/// it stays independent of the log-gamma route used elsewhere.
pub fn ln_level_multiplicity(n: u32, g: u64, stats: Statistics) -> Result<f64> {
    let g = g as f64;
    let mut acc = 0.0;
    match stats {
        Statistics::Bose => {
            for k in 0..n {
                acc += ((g + f64::from(k)) / f64::from(k + 1)).ln();
            }
        }
        Statistics::Fermi => {
            if f64::from(n) > g {
                return Err(Error::Domain(format!(
                    "Fermi-Dirac occupation {n} exceeds degeneracy {g}"
                )));
            }
            for k in 0..n {
                acc += ((g - f64::from(k)) / f64::from(k + 1)).ln();
            }
        }
        Statistics::Boltzmann => {
            for k in 0..n {
                acc += (g / f64::from(k + 1)).ln();
            }
        }
    }
    Ok(acc)
}

/// `-beta E_X + sum_s ln m_s(n_s)`.
pub fn configuration_log_weight(
    joint: &JointSpectrum,
    counts: &[u32],
    beta: f64,
    stats: Statistics,
) -> Result<f64> {
    if counts.len() != joint.total_levels() {
        return Err(Error::Usage(format!(
            "configuration has {} entries, spectrum has {}",
            counts.len(),
            joint.total_levels()
        )));
    }
    let mut log_w = 0.0;
    for (&n, e) in counts.iter().zip(joint.entries()) {
        log_w += ln_level_multiplicity(n, e.degeneracy, stats)? - beta * f64::from(n) * e.energy;
    }
    Ok(log_w)
}

fn per_entry_caps(joint: &JointSpectrum, n: u32, stats: Statistics) -> Vec<u32> {
    joint
        .entries()
        .iter()
        .map(|e| match stats {
            Statistics::Fermi => e.degeneracy.min(u64::from(n)) as u32,
            _ => n,
        })
        .collect()
}

/// Number of configurations (as a float, exact while below 2^53) by a
/// bounded-composition count.
pub fn count_configurations(joint: &JointSpectrum, n: u32, stats: Statistics) -> f64 {
    let caps = per_entry_caps(joint, n, stats);
    let n = n as usize;
    let mut ways = vec![0.0f64; n + 1];
    ways[0] = 1.0;
    for &cap in &caps {
        let cap = cap as usize;
        // Sliding-window sum over the last `cap + 1` partial counts.
        let mut next = vec![0.0; n + 1];
        let mut window = 0.0;
        for k in 0..=n {
            window += ways[k];
            if k > cap {
                window -= ways[k - cap - 1];
            }
            next[k] = window;
        }
        ways = next;
    }
    ways[n]
}

/// Streams every configuration exactly once in descending lexicographic
/// order (the first entry takes as many particles as it can first).
#[derive(Debug, Clone)]
pub struct ConfigurationStream {
    caps: Vec<u32>,
    /// `suffix_cap[i] = sum_{j >= i} caps[j]`.
    suffix_cap: Vec<u64>,
    counts: Vec<u32>,
    started: bool,
    exhausted: bool,
}

impl ConfigurationStream {
    fn new(caps: Vec<u32>, n: u32) -> Self {
        let mut suffix_cap = vec![0u64; caps.len() + 1];
        for i in (0..caps.len()).rev() {
            suffix_cap[i] = suffix_cap[i + 1] + u64::from(caps[i]);
        }
        let mut stream = ConfigurationStream {
            counts: vec![0; caps.len()],
            exhausted: suffix_cap[0] < u64::from(n),
            caps,
            suffix_cap,
            started: false,
        };
        if !stream.exhausted {
            stream.fill_from(0, n);
        }
        stream
    }

    fn fill_from(&mut self, start: usize, mut remaining: u32) {
        for i in start..self.counts.len() {
            let take = remaining.min(self.caps[i]);
            self.counts[i] = take;
            remaining -= take;
        }
        debug_assert_eq!(remaining, 0);
    }

    /// Advances and returns the next configuration without allocating.
    pub fn advance(&mut self) -> Option<&[u32]> {
        if self.exhausted {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.counts);
        }
        let len = self.counts.len();
        if len < 2 {
            self.exhausted = true;
            return None;
        }
        let mut tail: u64 = u64::from(self.counts[len - 1]);
        for i in (0..len - 1).rev() {
            if self.counts[i] > 0 && self.suffix_cap[i + 1] > tail {
                self.counts[i] -= 1;
                self.fill_from(i + 1, (tail + 1) as u32);
                return Some(&self.counts);
            }
            tail += u64::from(self.counts[i]);
        }
        self.exhausted = true;
        None
    }
}

impl Iterator for ConfigurationStream {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        self.advance().map(<[u32]>::to_vec)
    }
}

/// Enumerates all occupancy vectors with `sum = n` (FD-filtered by
/// capacity). Fails when the configuration count exceeds `cap`.
pub fn enumerate_configurations(
    joint: &JointSpectrum,
    n: u32,
    stats: Statistics,
    cap: u64,
) -> Result<ConfigurationStream> {
    let estimate = count_configurations(joint, n, stats);
    if estimate > cap as f64 {
        return Err(Error::EnumerationCap { estimate, cap });
    }
    Ok(ConfigurationStream::new(per_entry_caps(joint, n, stats), n))
}

/// Streams fully evaluated configurations (energy and multiplicity).
pub fn enumerate_weighted(
    joint: &JointSpectrum,
    n: u32,
    stats: Statistics,
    cap: u64,
) -> Result<impl Iterator<Item = OccupancyConfiguration> + '_> {
    let table = MultiplicityTable::new(joint, n, stats)?;
    let stream = enumerate_configurations(joint, n, stats, cap)?;
    Ok(stream.map(move |counts| {
        let (energy, log_multiplicity) = table.evaluate(joint, &counts);
        OccupancyConfiguration {
            counts,
            energy,
            log_multiplicity,
        }
    }))
}

/// Precomputed `ln m_s(k)` for `k = 0..=n` per entry.
struct MultiplicityTable {
    rows: Vec<Vec<f64>>,
}

impl MultiplicityTable {
    fn new(joint: &JointSpectrum, n: u32, stats: Statistics) -> Result<Self> {
        let rows = joint
            .entries()
            .iter()
            .map(|e| {
                let top = match stats {
                    Statistics::Fermi => e.degeneracy.min(u64::from(n)) as u32,
                    _ => n,
                };
                (0..=top)
                    .map(|k| ln_level_multiplicity(k, e.degeneracy, stats))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiplicityTable { rows })
    }

    fn evaluate(&self, joint: &JointSpectrum, counts: &[u32]) -> (f64, f64) {
        counts
            .iter()
            .zip(joint.entries())
            .zip(&self.rows)
            .fold((0.0, 0.0), |(en, lm), ((&k, e), row)| {
                (en + f64::from(k) * e.energy, lm + row[k as usize])
            })
    }
}

/// Exact canonical averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactStatistics {
    pub descriptor: SystemDescriptor,
    pub log_z: f64,
    pub mean_occupation: Vec<f64>,
    pub mean_square_occupation: Vec<f64>,
    pub occupation_variance: Vec<f64>,
    pub species_mean: Vec<f64>,
    pub species_mean_square: Vec<f64>,
    pub species_variance: Vec<f64>,
    pub configuration_count: u64,
    /// Configuration probabilities, when requested.
    #[serde(skip)]
    pub distribution: Option<Vec<(Vec<u32>, f64)>>,
}

/// Log-space weighted sums `sum w`, `sum w n_s`, `sum w n_s^2` and the
/// species analogues, relative to a running maximum log weight.
///
/// Accumulators over disjoint configuration sets combine with
/// [`WeightedAccumulator::merge`], which is associative.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAccumulator {
    max_log: f64,
    w: f64,
    wn: Vec<f64>,
    wn2: Vec<f64>,
    w_species: Vec<f64>,
    w_species2: Vec<f64>,
    count: u64,
    blocks: Vec<std::ops::Range<usize>>,
}

impl WeightedAccumulator {
    pub fn new(joint: &JointSpectrum) -> Self {
        let entries = joint.total_levels();
        let species = joint.species().len();
        WeightedAccumulator {
            max_log: f64::NEG_INFINITY,
            w: 0.0,
            wn: vec![0.0; entries],
            wn2: vec![0.0; entries],
            w_species: vec![0.0; species],
            w_species2: vec![0.0; species],
            count: 0,
            blocks: (0..species).map(|a| joint.species_block(a)).collect(),
        }
    }

    fn rescale(&mut self, new_max: f64) {
        if self.max_log == f64::NEG_INFINITY {
            self.max_log = new_max;
            return;
        }
        let f = (self.max_log - new_max).exp();
        self.w *= f;
        for v in self
            .wn
            .iter_mut()
            .chain(self.wn2.iter_mut())
            .chain(self.w_species.iter_mut())
            .chain(self.w_species2.iter_mut())
        {
            *v *= f;
        }
        self.max_log = new_max;
    }

    pub fn push(&mut self, counts: &[u32], log_weight: f64) {
        if log_weight > self.max_log {
            self.rescale(log_weight);
        }
        let w = (log_weight - self.max_log).exp();
        self.w += w;
        for (s, &k) in counts.iter().enumerate() {
            let k = f64::from(k);
            self.wn[s] += w * k;
            self.wn2[s] += w * k * k;
        }
        for (a, block) in self.blocks.iter().enumerate() {
            let total: f64 = counts[block.clone()].iter().map(|&k| f64::from(k)).sum();
            self.w_species[a] += w * total;
            self.w_species2[a] += w * total * total;
        }
        self.count += 1;
    }

    pub fn merge(mut self, mut other: WeightedAccumulator) -> WeightedAccumulator {
        let top = self.max_log.max(other.max_log);
        if top == f64::NEG_INFINITY {
            self.count += other.count;
            return self;
        }
        self.rescale(top);
        other.rescale(top);
        self.w += other.w;
        for (a, b) in self.wn.iter_mut().zip(&other.wn) {
            *a += b;
        }
        for (a, b) in self.wn2.iter_mut().zip(&other.wn2) {
            *a += b;
        }
        for (a, b) in self.w_species.iter_mut().zip(&other.w_species) {
            *a += b;
        }
        for (a, b) in self.w_species2.iter_mut().zip(&other.w_species2) {
            *a += b;
        }
        self.count += other.count;
        self
    }

    pub fn finish(self, descriptor: SystemDescriptor) -> ExactStatistics {
        let norm = |v: &[f64]| v.iter().map(|x| x / self.w).collect::<Vec<_>>();
        let variance = |m: &[f64], m2: &[f64]| {
            m.iter()
                .zip(m2)
                .map(|(a, b)| (b - a * a).max(0.0))
                .collect::<Vec<_>>()
        };
        let mean_occupation = norm(&self.wn);
        let mean_square_occupation = norm(&self.wn2);
        let species_mean = norm(&self.w_species);
        let species_mean_square = norm(&self.w_species2);
        ExactStatistics {
            descriptor,
            log_z: self.max_log + self.w.ln(),
            occupation_variance: variance(&mean_occupation, &mean_square_occupation),
            species_variance: variance(&species_mean, &species_mean_square),
            mean_occupation,
            mean_square_occupation,
            species_mean,
            species_mean_square,
            configuration_count: self.count,
            distribution: None,
        }
    }
}

fn exact_impl(
    joint: &JointSpectrum,
    n: u32,
    beta: f64,
    stats: Statistics,
    cap: u64,
    keep_distribution: bool,
) -> Result<ExactStatistics> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let table = MultiplicityTable::new(joint, n, stats)?;
    let mut stream = enumerate_configurations(joint, n, stats, cap)?;
    let mut acc = WeightedAccumulator::new(joint);
    let mut raw = Vec::new();
    while let Some(counts) = stream.advance() {
        let (energy, log_m) = table.evaluate(joint, counts);
        let log_w = log_m - beta * energy;
        acc.push(counts, log_w);
        if keep_distribution {
            raw.push((counts.to_vec(), log_w));
        }
    }
    if acc.count == 0 {
        return Err(Error::Saturation(format!(
            "no configuration places {n} particles on this spectrum"
        )));
    }
    let descriptor = SystemDescriptor {
        entries: joint.total_levels(),
        particles: n,
        beta,
        statistics: stats,
    };
    let mut out = acc.finish(descriptor);
    if keep_distribution {
        let log_z = out.log_z;
        out.distribution = Some(
            raw.into_iter()
                .map(|(c, lw)| (c, (lw - log_z).exp()))
                .collect(),
        );
    }
    Ok(out)
}

/// Exact `<n_s>`, `<n_s^2>`, `<N_A>`, `<N_A^2>` and variances.
pub fn exact_statistics(
    joint: &JointSpectrum,
    n: u32,
    beta: f64,
    stats: Statistics,
    cap: u64,
) -> Result<ExactStatistics> {
    exact_impl(joint, n, beta, stats, cap, false)
}

/// As [`exact_statistics`], also keeping every configuration's probability.
pub fn exact_statistics_with_distribution(
    joint: &JointSpectrum,
    n: u32,
    beta: f64,
    stats: Statistics,
    cap: u64,
) -> Result<ExactStatistics> {
    exact_impl(joint, n, beta, stats, cap, true)
}

//! Metropolis-Hastings sampling of occupancy configurations.
//!
//! This chain is a sampling device for the equilibrium ensemble, not a
//! model of reaction kinetics. A move takes one particle from a donor entry
//! (uniform over occupied entries) to a distinct recipient entry. Moves
//! between entries of different species are conversion moves; switching
//! them off makes every species' particle number a conserved quantity of
//! the chain.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{ExactStatistics, SystemDescriptor};
use crate::quantum::Statistics;
use crate::spectrum::JointSpectrum;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub conversion_moves_enabled: bool,
    /// Probability of proposing a conversion move. `None` draws the
    /// recipient uniformly from all other entries.
    pub conversion_move_probability: Option<f64>,
    pub thinning: u64,
    pub record_histogram: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            steps: 100_000,
            burn_in: 1_000,
            seed: 0,
            conversion_moves_enabled: true,
            conversion_move_probability: None,
            thinning: 1,
            record_histogram: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::Config(format!(
                "sampler steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("sampler thinning must be at least 1".into()));
        }
        if let Some(p) = self.conversion_move_probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "conversion_move_probability must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }

    fn effective_conversion_probability(&self) -> Option<f64> {
        if self.conversion_moves_enabled {
            self.conversion_move_probability
        } else {
            Some(0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MoveCounter {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveCounter {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleStatistics {
    pub descriptor: SystemDescriptor,
    pub samples: u64,
    pub mean_occupation: Vec<f64>,
    pub occupation_variance: Vec<f64>,
    pub species_mean: Vec<f64>,
    pub species_variance: Vec<f64>,
    pub mean_energy: f64,
    pub intra_moves: MoveCounter,
    pub conversion_moves: MoveCounter,
    /// Proposals that had no admissible recipient (lazy self-loops).
    pub null_moves: u64,
    /// Batch-means effective sample size of the energy series.
    pub energy_ess: f64,
    /// Batch-means effective sample sizes of each species total.
    pub species_ess: Vec<f64>,
    #[serde(skip)]
    pub histogram: Option<BTreeMap<Vec<u32>, u64>>,
    /// Set when the system has no possible move (a single entry).
    pub degenerate: bool,
}

impl SampleStatistics {
    pub fn histogram_probabilities(&self) -> Option<BTreeMap<Vec<u32>, f64>> {
        let h = self.histogram.as_ref()?;
        let total: u64 = h.values().sum();
        Some(
            h.iter()
                .map(|(k, &v)| (k.clone(), v as f64 / total as f64))
                .collect(),
        )
    }
}

/// Precomputed, state-independent pieces of the proposal and target.
struct Model<'a> {
    joint: &'a JointSpectrum,
    beta: f64,
    stats: Statistics,
    species_of: Vec<usize>,
    species_size: Vec<usize>,
    /// `None`: uniform recipient; `Some(p)`: conversion with probability p.
    conversion_probability: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MoveClass {
    Intra,
    Conversion,
}

impl<'a> Model<'a> {
    fn new(
        joint: &'a JointSpectrum,
        beta: f64,
        stats: Statistics,
        conversion_probability: Option<f64>,
    ) -> Self {
        let species_of = joint.entries().iter().map(|e| e.species).collect();
        let species_size = (0..joint.species().len())
            .map(|a| joint.species_block(a).len())
            .collect();
        Model {
            joint,
            beta,
            stats,
            species_of,
            species_size,
            conversion_probability,
        }
    }

    fn len(&self) -> usize {
        self.species_of.len()
    }

    /// Probability of choosing `recipient` once `donor` has been chosen.
    fn recipient_probability(&self, donor: usize, recipient: usize) -> f64 {
        let s = self.len();
        let same = self.species_of[donor] == self.species_of[recipient];
        let own = self.species_size[self.species_of[donor]];
        match self.conversion_probability {
            None => 1.0 / (s - 1) as f64,
            Some(p) => {
                if same {
                    (1.0 - p) / (own - 1) as f64
                } else {
                    p / (s - own) as f64
                }
            }
        }
    }

    /// `ln [m_d(n_d - 1) m_r(n_r + 1) / (m_d(n_d) m_r(n_r))] - beta (e_r - e_d)`,
    /// or `None` when the recipient is full.
    fn log_target_ratio(&self, counts: &[u32], donor: usize, recipient: usize) -> Option<f64> {
        let entries = self.joint.entries();
        let (gd, gr) = (
            entries[donor].degeneracy as f64,
            entries[recipient].degeneracy as f64,
        );
        let nd = f64::from(counts[donor]);
        let nr = f64::from(counts[recipient]);
        // m(n + 1) / m(n) for each statistics.
        let up = |g: f64, n: f64| match self.stats {
            Statistics::Bose => (g + n) / (n + 1.0),
            Statistics::Fermi => (g - n) / (n + 1.0),
            Statistics::Boltzmann => g / (n + 1.0),
        };
        if self.stats == Statistics::Fermi && nr + 1.0 > gr {
            return None;
        }
        let gain = up(gr, nr).ln();
        let loss = up(gd, nd - 1.0).ln();
        Some(gain - loss - self.beta * (entries[recipient].energy - entries[donor].energy))
    }
}

/// Occupied entries as an indexable set with O(1) insert/remove.
struct OccupiedSet {
    items: Vec<usize>,
    position: Vec<Option<usize>>,
}

impl OccupiedSet {
    fn new(counts: &[u32]) -> Self {
        let mut set = OccupiedSet {
            items: Vec::new(),
            position: vec![None; counts.len()],
        };
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                set.insert(i);
            }
        }
        set
    }

    fn insert(&mut self, i: usize) {
        if self.position[i].is_none() {
            self.position[i] = Some(self.items.len());
            self.items.push(i);
        }
    }

    fn remove(&mut self, i: usize) {
        if let Some(p) = self.position[i].take() {
            let last = self.items.pop().expect("non-empty");
            if last != i {
                self.items[p] = last;
                self.position[last] = Some(p);
            }
        }
    }
}

/// Greedy fill from the lowest energy upwards, respecting FD capacity.
pub fn greedy_initial_state(joint: &JointSpectrum, n: u32, stats: Statistics) -> Result<Vec<u32>> {
    let mut order: Vec<usize> = (0..joint.total_levels()).collect();
    order.sort_by(|&a, &b| {
        joint.entries()[a]
            .energy
            .total_cmp(&joint.entries()[b].energy)
    });
    let mut counts = vec![0u32; joint.total_levels()];
    let mut remaining = n;
    for i in order {
        if remaining == 0 {
            break;
        }
        let take = match stats {
            Statistics::Fermi => {
                remaining.min(joint.entries()[i].degeneracy.min(u64::from(u32::MAX)) as u32)
            }
            _ => remaining,
        };
        counts[i] = take;
        remaining -= take;
    }
    if remaining > 0 {
        return Err(Error::Saturation(format!(
            "{n} particles exceed the Fermi-Dirac capacity {}",
            joint.capacity()
        )));
    }
    Ok(counts)
}

/// Runs a chain from the greedy initial state.
pub fn run_chain(
    joint: &JointSpectrum,
    n: u32,
    beta: f64,
    stats: Statistics,
    cfg: &SamplerConfig,
) -> Result<SampleStatistics> {
    let initial = greedy_initial_state(joint, n, stats)?;
    run_chain_from(joint, beta, stats, cfg, initial)
}

pub fn run_chain_from(
    joint: &JointSpectrum,
    beta: f64,
    stats: Statistics,
    cfg: &SamplerConfig,
    initial: Vec<u32>,
) -> Result<SampleStatistics> {
    cfg.validate()?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    if initial.len() != joint.total_levels() {
        return Err(Error::Usage(format!(
            "initial state has {} entries, spectrum has {}",
            initial.len(),
            joint.total_levels()
        )));
    }
    if stats == Statistics::Fermi {
        if let Some((i, _)) = initial
            .iter()
            .zip(joint.entries())
            .enumerate()
            .find(|(_, (&c, e))| u64::from(c) > e.degeneracy)
        {
            return Err(Error::Domain(format!(
                "initial state exceeds the capacity of entry {i}"
            )));
        }
    }
    let n: u32 = initial.iter().sum();
    if n == 0 {
        return Err(Error::Domain(
            "the sampler needs at least one particle".into(),
        ));
    }

    let model = Model::new(joint, beta, stats, cfg.effective_conversion_probability());
    let descriptor = SystemDescriptor {
        entries: joint.total_levels(),
        particles: n,
        beta,
        statistics: stats,
    };
    let blocks: Vec<_> = (0..joint.species().len())
        .map(|a| joint.species_block(a))
        .collect();
    let species_count = blocks.len();
    let entry_count = joint.total_levels();

    let mut counts = initial;
    let mut occupied = OccupiedSet::new(&counts);
    let mut species_totals: Vec<u64> = blocks
        .iter()
        .map(|b| counts[b.clone()].iter().map(|&c| u64::from(c)).sum())
        .collect();
    let mut energy: f64 = counts
        .iter()
        .zip(joint.entries())
        .map(|(&c, e)| f64::from(c) * e.energy)
        .sum();

    let mut sum_n = vec![0.0; entry_count];
    let mut sum_n2 = vec![0.0; entry_count];
    let mut sum_species = vec![0.0; species_count];
    let mut sum_species2 = vec![0.0; species_count];
    let mut energy_series = Vec::new();
    let mut species_series: Vec<Vec<f64>> = vec![Vec::new(); species_count];
    let mut histogram = cfg.record_histogram.then(BTreeMap::new);
    let mut intra = MoveCounter::default();
    let mut conversion = MoveCounter::default();
    let mut null_moves = 0u64;

    let degenerate = entry_count < 2;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = 0u64;

    for step in 0..cfg.steps {
        if !degenerate {
            let d_before = occupied.items.len();
            let donor = occupied.items[rng.random_range(0..d_before)];
            let donor_species = model.species_of[donor];
            let own = model.species_size[donor_species];
            let class = model.conversion_probability.map(|p| {
                if rng.random::<f64>() < p {
                    MoveClass::Conversion
                } else {
                    MoveClass::Intra
                }
            });
            // Pick the recipient within the chosen class.
            let recipient = match class {
                None => {
                    let r = rng.random_range(0..entry_count - 1);
                    Some(if r >= donor { r + 1 } else { r })
                }
                Some(MoveClass::Intra) => {
                    if own < 2 {
                        None
                    } else {
                        let block = &blocks[donor_species];
                        let r = block.start + rng.random_range(0..own - 1);
                        Some(if r >= donor { r + 1 } else { r })
                    }
                }
                Some(MoveClass::Conversion) => {
                    let others = entry_count - own;
                    if others == 0 {
                        None
                    } else {
                        let block = &blocks[donor_species];
                        let r = rng.random_range(0..others);
                        Some(if r >= block.start { r + own } else { r })
                    }
                }
            };

            match recipient {
                None => null_moves += 1,
                Some(recipient) => {
                    let is_conversion = model.species_of[recipient] != donor_species;
                    let counter = if is_conversion {
                        &mut conversion
                    } else {
                        &mut intra
                    };
                    counter.proposed += 1;
                    if let Some(log_ratio) = model.log_target_ratio(&counts, donor, recipient) {
                        let d_after = d_before - usize::from(counts[donor] == 1)
                            + usize::from(counts[recipient] == 0);
                        let forward =
                            model.recipient_probability(donor, recipient) / d_before as f64;
                        let backward =
                            model.recipient_probability(recipient, donor) / d_after as f64;
                        let log_accept = log_ratio + backward.ln() - forward.ln();
                        if log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept {
                            counter.accepted += 1;
                            counts[donor] -= 1;
                            counts[recipient] += 1;
                            if counts[donor] == 0 {
                                occupied.remove(donor);
                            }
                            occupied.insert(recipient);
                            let rs = model.species_of[recipient];
                            species_totals[donor_species] -= 1;
                            species_totals[rs] += 1;
                            energy +=
                                joint.entries()[recipient].energy - joint.entries()[donor].energy;
                        }
                    }
                }
            }
        }

        if step >= cfg.burn_in && (step - cfg.burn_in).is_multiple_of(cfg.thinning) {
            samples += 1;
            for (i, &c) in counts.iter().enumerate() {
                let c = f64::from(c);
                sum_n[i] += c;
                sum_n2[i] += c * c;
            }
            for (a, &t) in species_totals.iter().enumerate() {
                let t = t as f64;
                sum_species[a] += t;
                sum_species2[a] += t * t;
                species_series[a].push(t);
            }
            energy_series.push(energy);
            if let Some(h) = histogram.as_mut() {
                *h.entry(counts.clone()).or_insert(0u64) += 1;
            }
        }
    }

    let s = samples as f64;
    let mean = |v: &[f64]| v.iter().map(|x| x / s).collect::<Vec<_>>();
    let var = |m: &[f64], m2: &[f64]| {
        m.iter()
            .zip(m2)
            .map(|(a, b)| (b / s - a * a).max(0.0))
            .collect::<Vec<_>>()
    };
    let mean_occupation = mean(&sum_n);
    let species_mean = mean(&sum_species);
    Ok(SampleStatistics {
        descriptor,
        samples,
        occupation_variance: var(&mean_occupation, &sum_n2),
        species_variance: var(&species_mean, &sum_species2),
        mean_occupation,
        species_mean,
        mean_energy: energy_series.iter().sum::<f64>() / s,
        intra_moves: intra,
        conversion_moves: conversion,
        null_moves,
        energy_ess: batch_means_ess(&energy_series),
        species_ess: species_series.iter().map(|v| batch_means_ess(v)).collect(),
        histogram,
        degenerate,
    })
}

/// Effective sample size from non-overlapping batch means with
/// `floor(sqrt(n))` batches. A constant series has the full size.
pub fn batch_means_ess(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return n as f64;
    }
    let batches = (n as f64).sqrt().floor() as usize;
    let size = n / batches;
    let batch_means: Vec<f64> = (0..batches)
        .map(|b| series[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let bm_mean = batch_means.iter().sum::<f64>() / batches as f64;
    let bm_var = batch_means
        .iter()
        .map(|x| (x - bm_mean).powi(2))
        .sum::<f64>()
        / (batches - 1) as f64;
    if bm_var <= 0.0 {
        return n as f64;
    }
    (n as f64 * var / (size as f64 * bm_var)).min(n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityDiscrepancy {
    pub label: String,
    pub empirical: f64,
    pub exact: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceDiscrepancy {
    pub species: usize,
    pub empirical: f64,
    pub exact: f64,
    pub difference: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub level_means: Vec<QuantityDiscrepancy>,
    pub species_means: Vec<QuantityDiscrepancy>,
    pub species_variances: Vec<VarianceDiscrepancy>,
    pub total_variation: Option<f64>,
}

impl DiscrepancyReport {
    pub fn max_abs_z(&self) -> f64 {
        self.level_means
            .iter()
            .chain(&self.species_means)
            .map(|q| q.z_score.abs())
            .fold(0.0, f64::max)
    }
}

fn z_score(empirical: f64, exact: f64, variance: f64, n_eff: f64) -> f64 {
    let diff = empirical - exact;
    if variance <= 0.0 {
        return if diff.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
    }
    diff / (variance / n_eff).sqrt()
}

/// Total-variation distance between two discrete distributions.
pub fn total_variation<'a>(
    p: impl IntoIterator<Item = (&'a Vec<u32>, f64)>,
    q: impl IntoIterator<Item = (&'a Vec<u32>, f64)>,
) -> f64 {
    let mut diff: BTreeMap<&Vec<u32>, f64> = BTreeMap::new();
    for (k, v) in p {
        *diff.entry(k).or_insert(0.0) += v;
    }
    for (k, v) in q {
        *diff.entry(k).or_insert(0.0) -= v;
    }
    0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
}

/// Per-quantity z-scores of the chain against exact enumeration, plus the
/// histogram total-variation distance when both sides carry one.
pub fn compare_to_oracle(
    samples: &SampleStatistics,
    exact: &ExactStatistics,
) -> Result<DiscrepancyReport> {
    if samples.descriptor != exact.descriptor {
        return Err(Error::Usage(format!(
            "sample and oracle describe different systems: {:?} vs {:?}",
            samples.descriptor, exact.descriptor
        )));
    }
    let n_eff = samples.energy_ess.max(1.0);
    let level_means = samples
        .mean_occupation
        .iter()
        .zip(&exact.mean_occupation)
        .zip(&exact.occupation_variance)
        .enumerate()
        .map(|(i, ((&e, &x), &v))| QuantityDiscrepancy {
            label: format!("n[{i}]"),
            empirical: e,
            exact: x,
            z_score: z_score(e, x, v, n_eff),
        })
        .collect();
    let species_means = samples
        .species_mean
        .iter()
        .zip(&exact.species_mean)
        .zip(&exact.species_variance)
        .enumerate()
        .map(|(a, ((&e, &x), &v))| QuantityDiscrepancy {
            label: format!("N[{a}]"),
            empirical: e,
            exact: x,
            z_score: z_score(
                e,
                x,
                v,
                samples
                    .species_ess
                    .get(a)
                    .copied()
                    .unwrap_or(n_eff)
                    .max(1.0),
            ),
        })
        .collect();
    let species_variances = samples
        .species_variance
        .iter()
        .zip(&exact.species_variance)
        .enumerate()
        .map(|(a, (&e, &x))| {
            let difference = e - x;
            // Standard error of a sample variance for roughly normal data.
            let se = x * (2.0 / n_eff).sqrt();
            let flagged = (x > 0.0 && e == 0.0) || difference.abs() > 3.0 * se + 1e-12;
            VarianceDiscrepancy {
                species: a,
                empirical: e,
                exact: x,
                difference,
                flagged,
            }
        })
        .collect();
    let total_variation = match (
        samples.histogram_probabilities(),
        exact.distribution.as_ref(),
    ) {
        (Some(h), Some(d)) => Some(total_variation(
            h.iter().map(|(k, &v)| (k, v)),
            d.iter().map(|(k, v)| (k, *v)),
        )),
        _ => None,
    };
    Ok(DiscrepancyReport {
        level_means,
        species_means,
        species_variances,
        total_variation,
    })
}

/// Exact transition matrix of the chain over an enumerated state list,
/// for detailed-balance and stationarity checks on small systems.
/// Row `i` holds `P(states[i] -> states[j])`.
pub fn transition_matrix(
    joint: &JointSpectrum,
    beta: f64,
    stats: Statistics,
    cfg: &SamplerConfig,
    states: &[Vec<u32>],
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let model = Model::new(joint, beta, stats, cfg.effective_conversion_probability());
    let index: BTreeMap<&Vec<u32>, usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let s = model.len();
    let mut matrix = vec![vec![0.0; states.len()]; states.len()];
    for (i, x) in states.iter().enumerate() {
        let d = x.iter().filter(|&&c| c > 0).count();
        let mut leave = 0.0;
        if s >= 2 {
            for donor in (0..s).filter(|&k| x[k] > 0) {
                for recipient in (0..s).filter(|&k| k != donor) {
                    let q = model.recipient_probability(donor, recipient);
                    if q == 0.0 || !q.is_finite() {
                        continue;
                    }
                    let Some(log_ratio) = model.log_target_ratio(x, donor, recipient) else {
                        continue;
                    };
                    let mut y = x.clone();
                    y[donor] -= 1;
                    y[recipient] += 1;
                    let d_after = y.iter().filter(|&&c| c > 0).count();
                    let forward = q / d as f64;
                    let backward = model.recipient_probability(recipient, donor) / d_after as f64;
                    let accept = (log_ratio + backward.ln() - forward.ln()).exp().min(1.0);
                    let j = *index.get(&y).ok_or_else(|| {
                        Error::Usage("state list is not closed under the chain's moves".into())
                    })?;
                    matrix[i][j] += forward * accept;
                    leave += forward * accept;
                }
            }
        }
        matrix[i][i] += 1.0 - leave;
    }
    Ok(matrix)
}

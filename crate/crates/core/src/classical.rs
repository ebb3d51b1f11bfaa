//! Maxwell-Boltzmann limit of the coupled description.
//!
//! Every particle of the mixture is an effective particle distributed over
//! the joint spectrum with probability `p_s = g_s e^{-beta e_s} / Z_eq`, so
//! the species split follows directly from the one-particle partition
//! functions: `N^A = p^A N` with `p^A = (Z^A)^{nu_A} / Z_eq`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::ExactStatistics;
use crate::spectrum::Species;
use crate::system::ReactiveSystem;

/// `ln Z^A = ln sum_s g_s e^{-beta e_s}` with the lowest energy factored out.
pub fn mb_log_partition(species: &Species, beta: f64) -> f64 {
    let e_min = species.min_energy();
    let rest: f64 = species
        .levels()
        .iter()
        .map(|l| l.degeneracy as f64 * (-beta * (l.energy - e_min)).exp())
        .sum();
    rest.ln() - beta * e_min
}

/// One-particle partition function `Z^A = sum_s g_s e^{-beta e_s}`.
pub fn mb_partition(species: &Species, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    Ok(mb_log_partition(species, beta).exp())
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalEquilibrium {
    pub beta: f64,
    pub total_particles: f64,
    pub nu: Vec<u32>,
    pub log_z_species: Vec<f64>,
    pub z_species: Vec<f64>,
    pub log_z_eq: f64,
    pub z_eq: f64,
    pub p_species: Vec<f64>,
    /// Per joint entry; replicas share their species' level probability.
    pub p_level: Vec<f64>,
    /// Probability of each entry's level within its own species, `p_s^A`.
    pub p_level_within_species: Vec<f64>,
    pub occupations: Vec<f64>,
    pub species_totals: Vec<f64>,
    pub beta_mu: f64,
    /// `N ln Z_eq - ln N!`
    pub log_z_coupled: f64,
    /// `sum_A [N^A ln Z^A - ln N^A!]` at the equilibrium split.
    pub log_z_frozen: f64,
    /// `mu^A = (ln N^A - ln Z^A) / beta`; `-inf` for an empty species.
    pub mu_species: Vec<f64>,
    /// `F_eq = sum_A N^A mu^A`.
    pub free_energy: f64,
}

pub fn classical_equilibrium(system: &ReactiveSystem) -> Result<ClassicalEquilibrium> {
    let n = system.total_particles();
    if n <= 0.0 {
        return Err(Error::Config(format!(
            "classical equilibrium needs a positive particle number, got {n}"
        )));
    }
    let beta = system.beta();
    let joint = system.spectrum();
    let species = joint.species();

    let log_z_species: Vec<f64> = species.iter().map(|s| mb_log_partition(s, beta)).collect();
    let nu: Vec<u32> = species.iter().map(Species::nu).collect();
    let weighted: Vec<f64> = log_z_species
        .iter()
        .zip(&nu)
        .map(|(lz, &v)| f64::from(v) * lz)
        .collect();
    let log_z_eq = log_sum_exp(&weighted);
    let p_species: Vec<f64> = weighted.iter().map(|w| (w - log_z_eq).exp()).collect();

    let mut p_level = Vec::with_capacity(joint.total_levels());
    let mut p_within = Vec::with_capacity(joint.total_levels());
    for e in joint.entries() {
        let within = (e.degeneracy as f64).ln() - beta * e.energy - log_z_species[e.species];
        let within = within.exp();
        p_within.push(within);
        p_level.push(p_species[e.species] * within / f64::from(nu[e.species]));
    }
    let occupations: Vec<f64> = p_level.iter().map(|p| n * p).collect();
    let species_totals: Vec<f64> = p_species.iter().map(|p| n * p).collect();

    let lgamma = libm::lgamma;
    let log_z_coupled = n * log_z_eq - lgamma(n + 1.0);
    let log_z_frozen = species_totals
        .iter()
        .zip(&log_z_species)
        .map(|(&na, &lz)| na * lz - lgamma(na + 1.0))
        .sum();
    let mu_species: Vec<f64> = species_totals
        .iter()
        .zip(&log_z_species)
        .map(|(&na, &lz)| {
            if na > 0.0 {
                (na.ln() - lz) / beta
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let free_energy = species_totals
        .iter()
        .zip(&mu_species)
        .filter(|(&na, _)| na > 0.0)
        .map(|(na, mu)| na * mu)
        .sum();

    Ok(ClassicalEquilibrium {
        beta,
        total_particles: n,
        nu,
        z_species: log_z_species.iter().map(|l| l.exp()).collect(),
        log_z_species,
        z_eq: log_z_eq.exp(),
        log_z_eq,
        p_species,
        p_level,
        p_level_within_species: p_within,
        occupations,
        species_totals,
        beta_mu: n.ln() - log_z_eq,
        log_z_coupled,
        log_z_frozen,
        mu_species,
        free_energy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassActionPair {
    pub first: usize,
    pub second: usize,
    /// `Z^B / Z^A`
    pub partition_ratio: f64,
    /// `N^B / N^A`
    pub population_ratio: f64,
    /// Set when `N^A` is zero and the ratio is meaningless.
    pub degenerate: bool,
}

/// `Z^B/Z^A` against `N^B/N^A` for every species pair. Defined for
/// one-to-one conversions only.
pub fn mass_action_check(eq: &ClassicalEquilibrium) -> Result<Vec<MassActionPair>> {
    if let Some(i) = eq.nu.iter().position(|&v| v != 1) {
        return Err(Error::Domain(format!(
            "mass action ratios need unit stoichiometry; species #{i} has nu = {}",
            eq.nu[i]
        )));
    }
    let k = eq.z_species.len();
    let mut out = Vec::with_capacity(k * (k.saturating_sub(1)) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let degenerate = eq.species_totals[a] == 0.0;
            out.push(MassActionPair {
                first: a,
                second: b,
                partition_ratio: (eq.log_z_species[b] - eq.log_z_species[a]).exp(),
                population_ratio: if degenerate {
                    f64::NAN
                } else {
                    eq.species_totals[b] / eq.species_totals[a]
                },
                degenerate,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceLine {
    pub probability: f64,
    /// `N^2 (p - p^2)`
    pub squared_form: f64,
    /// `N (p - p^2)`, the multinomial variance of independent placements.
    pub multinomial_form: f64,
    pub oracle: Option<f64>,
    /// `oracle - squared_form`
    pub squared_discrepancy: Option<f64>,
    /// `oracle - multinomial_form`
    pub multinomial_discrepancy: Option<f64>,
}

impl VarianceLine {
    fn new(p: f64, n: f64) -> Self {
        let q = (p - p * p).max(0.0);
        VarianceLine {
            probability: p,
            squared_form: n * n * q,
            multinomial_form: n * q,
            oracle: None,
            squared_discrepancy: None,
            multinomial_discrepancy: None,
        }
    }

    fn attach(&mut self, oracle: f64) {
        self.oracle = Some(oracle);
        self.squared_discrepancy = Some(oracle - self.squared_form);
        self.multinomial_discrepancy = Some(oracle - self.multinomial_form);
    }
}

/// Level and species variances under the `N^2` normalization and the
/// multinomial `N` normalization, side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub total_particles: f64,
    pub levels: Vec<VarianceLine>,
    pub species: Vec<VarianceLine>,
}

impl VarianceReport {
    /// Fills in the oracle columns from exact (Boltzmann-weighted)
    /// enumeration of the same system.
    pub fn with_oracle(mut self, exact: &ExactStatistics) -> Result<Self> {
        if exact.occupation_variance.len() != self.levels.len()
            || exact.species_variance.len() != self.species.len()
            || f64::from(exact.descriptor.particles) != self.total_particles
        {
            return Err(Error::Usage(
                "oracle statistics describe a different system".into(),
            ));
        }
        for (line, &v) in self.levels.iter_mut().zip(&exact.occupation_variance) {
            line.attach(v);
        }
        for (line, &v) in self.species.iter_mut().zip(&exact.species_variance) {
            line.attach(v);
        }
        Ok(self)
    }
}

pub fn classical_variances(eq: &ClassicalEquilibrium, n: f64) -> VarianceReport {
    VarianceReport {
        total_particles: n,
        levels: eq
            .p_level
            .iter()
            .map(|&p| VarianceLine::new(p, n))
            .collect(),
        species: eq
            .p_species
            .iter()
            .map(|&p| VarianceLine::new(p, n))
            .collect(),
    }
}

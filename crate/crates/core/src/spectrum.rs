//! Energy levels, species spectra and the joint reactive spectrum.
//!
//! Energies are in units where `k_B = 1`, so they share a unit with the
//! temperature and `beta = 1 / T`.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One energy eigenvalue with its integer degeneracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    pub energy: f64,
    pub degeneracy: u64,
}

impl EnergyLevel {
    pub fn new(energy: f64, degeneracy: u64) -> Result<Self> {
        let level = EnergyLevel { energy, degeneracy };
        level.validate()?;
        Ok(level)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.energy.is_finite() {
            return Err(Error::Config(format!(
                "level energy must be finite, got {}",
                self.energy
            )));
        }
        if self.degeneracy == 0 {
            return Err(Error::Config("level degeneracy must be at least 1".into()));
        }
        Ok(())
    }
}

/// A named particle type: its one-particle levels and stoichiometric
/// coefficient `nu` (number of molecules per reaction unit).
#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    name: String,
    levels: Vec<EnergyLevel>,
    nu: u32,
}

impl Species {
    pub fn new(name: impl Into<String>, levels: Vec<EnergyLevel>, nu: u32) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Config("species name must not be empty".into()));
        }
        if levels.is_empty() {
            return Err(Error::Config(format!("species `{name}` has no levels")));
        }
        if nu == 0 {
            return Err(Error::Config(format!(
                "species `{name}`: stoichiometric coefficient must be at least 1"
            )));
        }
        for level in &levels {
            level
                .validate()
                .map_err(|e| Error::Config(format!("species `{name}`: {e}")))?;
        }
        Ok(Species { name, levels, nu })
    }

    /// Convenience constructor with `nu = 1` from `(energy, degeneracy)` pairs.
    pub fn from_pairs(name: impl Into<String>, pairs: &[(f64, u64)]) -> Result<Self> {
        let levels = pairs
            .iter()
            .map(|&(e, g)| EnergyLevel::new(e, g))
            .collect::<Result<Vec<_>>>()?;
        Species::new(name, levels, 1)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[EnergyLevel] {
        &self.levels
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn min_energy(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.energy)
            .fold(f64::INFINITY, f64::min)
    }

    /// Total number of one-particle states, `sum g_s`.
    pub fn total_degeneracy(&self) -> f64 {
        self.levels.iter().map(|l| l.degeneracy as f64).sum()
    }
}

/// One entry of the joint spectrum, keeping a back-reference to the
/// species level it replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointEntry {
    pub species: usize,
    pub level: usize,
    pub replica: u32,
    pub energy: f64,
    pub degeneracy: u64,
}

/// Union of all species spectra with `nu` literal replicas per species.
///
/// Entries are ordered by species (declaration order), then replica, then
/// level index, and every species occupies one contiguous block.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectrum {
    species: Vec<Species>,
    entries: Vec<JointEntry>,
    blocks: Vec<Range<usize>>,
}

impl JointSpectrum {
    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn entries(&self) -> &[JointEntry] {
        &self.entries
    }

    /// Number of joint entries, `sum_A nu_A * S_A`.
    pub fn total_levels(&self) -> usize {
        self.entries.len()
    }

    /// Index range of the entries belonging to species `species`.
    pub fn species_block(&self, species: usize) -> Range<usize> {
        self.blocks[species].clone()
    }

    pub fn min_energy(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.energy)
            .fold(f64::INFINITY, f64::min)
    }

    /// Fermi-Dirac capacity, `sum_s g_s` over all entries.
    pub fn capacity(&self) -> f64 {
        self.entries.iter().map(|e| e.degeneracy as f64).sum()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy).collect()
    }

    pub fn degeneracies(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.degeneracy).collect()
    }

    /// Sums a per-entry quantity into per-species totals.
    pub fn species_sums(&self, per_entry: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|r| per_entry[r.clone()].iter().sum())
            .collect()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name() == name)
    }
}

/// Builds the joint spectrum. Species names must be unique.
pub fn build_joint_spectrum(species: Vec<Species>) -> Result<JointSpectrum> {
    if species.is_empty() {
        return Err(Error::Config("a system needs at least one species".into()));
    }
    let mut seen = HashSet::new();
    for s in &species {
        if !seen.insert(s.name()) {
            return Err(Error::Config(format!(
                "duplicate species name `{}`",
                s.name()
            )));
        }
    }

    let mut entries = Vec::new();
    let mut blocks = Vec::with_capacity(species.len());
    for (sid, s) in species.iter().enumerate() {
        let start = entries.len();
        for replica in 0..s.nu() {
            for (lid, level) in s.levels().iter().enumerate() {
                entries.push(JointEntry {
                    species: sid,
                    level: lid,
                    replica,
                    energy: level.energy,
                    degeneracy: level.degeneracy,
                });
            }
        }
        blocks.push(start..entries.len());
    }
    Ok(JointSpectrum {
        species,
        entries,
        blocks,
    })
}

/// Level generator for one degree of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DofGenerator {
    /// A literal level list, returned unchanged.
    Explicit { levels: Vec<(f64, u64)> },
    /// `offset + n * quantum`, `g = 1`, `n = 0..count`.
    Harmonic {
        quantum: f64,
        count: usize,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + B J (J + 1)`, `g = 2J + 1`, `J = 0..count`.
    RigidRotor {
        rotational_constant: f64,
        count: usize,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + c (nx^2 + ny^2 + nz^2)` over the `count` lowest shells.
    ParticleInBox3d {
        energy_scale: f64,
        count: usize,
        #[serde(default)]
        offset: f64,
    },
}

fn check_generator_params(scale: f64, count: usize, offset: f64, what: &str) -> Result<()> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Config(format!(
            "{what}: energy parameter must be positive and finite, got {scale}"
        )));
    }
    if count == 0 {
        return Err(Error::Config(format!("{what}: count must be at least 1")));
    }
    if !offset.is_finite() {
        return Err(Error::Config(format!("{what}: offset must be finite")));
    }
    Ok(())
}

/// Number of positive integer triples with `nx^2 + ny^2 + nz^2 == m`.
fn box_shell_degeneracy(m: u64) -> u64 {
    let mut count = 0;
    let mut nx = 1;
    while nx * nx < m {
        let rx = m - nx * nx;
        let mut ny = 1;
        while ny * ny < rx {
            let rz = rx - ny * ny;
            let nz = rz.isqrt();
            if nz >= 1 && nz * nz == rz {
                count += 1;
            }
            ny += 1;
        }
        nx += 1;
    }
    count
}

pub fn generate_dof_levels(generator: &DofGenerator) -> Result<Vec<EnergyLevel>> {
    match *generator {
        DofGenerator::Explicit { ref levels } => {
            if levels.is_empty() {
                return Err(Error::Config("explicit generator has no levels".into()));
            }
            levels
                .iter()
                .map(|&(e, g)| EnergyLevel::new(e, g))
                .collect()
        }
        DofGenerator::Harmonic {
            quantum,
            count,
            offset,
        } => {
            check_generator_params(quantum, count, offset, "harmonic")?;
            (0..count)
                .map(|n| EnergyLevel::new(offset + n as f64 * quantum, 1))
                .collect()
        }
        DofGenerator::RigidRotor {
            rotational_constant,
            count,
            offset,
        } => {
            check_generator_params(rotational_constant, count, offset, "rigid_rotor")?;
            (0..count as u64)
                .map(|j| {
                    EnergyLevel::new(
                        offset + rotational_constant * (j * (j + 1)) as f64,
                        2 * j + 1,
                    )
                })
                .collect()
        }
        DofGenerator::ParticleInBox3d {
            energy_scale,
            count,
            offset,
        } => {
            check_generator_params(energy_scale, count, offset, "particle_in_box_3d")?;
            let mut levels = Vec::with_capacity(count);
            let mut m = 3u64;
            while levels.len() < count {
                let g = box_shell_degeneracy(m);
                if g > 0 {
                    levels.push(EnergyLevel::new(offset + energy_scale * m as f64, g)?);
                }
                m += 1;
            }
            Ok(levels)
        }
    }
}

/// Cartesian product of per-dof level sets: energies add, degeneracies
/// multiply. The result is sorted by energy (stable). With
/// `merge_degenerate`, exactly equal energies are merged and their
/// degeneracies summed.
pub fn compose_dof(
    levels_per_dof: &[Vec<EnergyLevel>],
    merge_degenerate: bool,
) -> Result<Vec<EnergyLevel>> {
    if levels_per_dof.is_empty() {
        return Err(Error::Config(
            "compose_dof needs at least one degree of freedom".into(),
        ));
    }
    if levels_per_dof.iter().any(|d| d.is_empty()) {
        return Err(Error::Config(
            "every degree of freedom needs at least one level".into(),
        ));
    }

    let mut combined = vec![EnergyLevel {
        energy: 0.0,
        degeneracy: 1,
    }];
    for dof in levels_per_dof {
        let mut next = Vec::with_capacity(combined.len() * dof.len());
        for a in &combined {
            for b in dof {
                let degeneracy = a.degeneracy.checked_mul(b.degeneracy).ok_or_else(|| {
                    Error::Config("composed degeneracy overflows a 64-bit integer".into())
                })?;
                next.push(EnergyLevel {
                    energy: a.energy + b.energy,
                    degeneracy,
                });
            }
        }
        combined = next;
    }
    combined.sort_by(|a, b| a.energy.total_cmp(&b.energy));

    if merge_degenerate {
        let mut merged: Vec<EnergyLevel> = Vec::with_capacity(combined.len());
        for level in combined {
            match merged.last_mut() {
                Some(last) if last.energy == level.energy => last.degeneracy += level.degeneracy,
                _ => merged.push(level),
            }
        }
        combined = merged;
    }
    Ok(combined)
}

/// Boltzmann weight of the highest retained level, `g e^{-beta e_max} / Z`,
/// as a truncation diagnostic for a species spectrum.
pub fn truncation_weight(levels: &[EnergyLevel], beta: f64) -> f64 {
    let e_min = levels
        .iter()
        .map(|l| l.energy)
        .fold(f64::INFINITY, f64::min);
    let Some(top) = levels.iter().max_by(|a, b| a.energy.total_cmp(&b.energy)) else {
        return 0.0;
    };
    let z: f64 = levels
        .iter()
        .map(|l| l.degeneracy as f64 * (-beta * (l.energy - e_min)).exp())
        .sum();
    top.degeneracy as f64 * (-beta * (top.energy - e_min)).exp() / z
}

//! Coupled vs independent (frozen-composition) comparisons.

use serde::Serialize;

use crate::classical::classical_equilibrium;
use crate::error::{Error, Result};
use crate::quantum::{
    solve_independent, solve_mu_coupled, ChemicalPotential, SolverOptions, Statistics,
};
use crate::system::ReactiveSystem;

fn x_ln_x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Continuous BE/FD entropy,
/// `sum (g+n) ln(g+n) - n ln n - g ln g` (BE) or
/// `sum g ln g - n ln n - (g-n) ln(g-n)` (FD).
///
/// The BE/FD occupation laws are exact stationary points of this
/// functional under the particle-number and energy constraints.
pub fn stirling_entropy(
    occupations: &[f64],
    degeneracies: &[u64],
    stats: Statistics,
) -> Result<f64> {
    if occupations.len() != degeneracies.len() {
        return Err(Error::Usage(
            "occupation and degeneracy lengths differ".into(),
        ));
    }
    let mut total = 0.0;
    for (&n, &g) in occupations.iter().zip(degeneracies) {
        let g = g as f64;
        total += match stats {
            Statistics::Bose => x_ln_x(g + n) - x_ln_x(n) - x_ln_x(g),
            Statistics::Fermi => {
                if n > g {
                    return Err(Error::Domain(format!(
                        "occupation {n} exceeds degeneracy {g}"
                    )));
                }
                x_ln_x(g) - x_ln_x(n) - x_ln_x(g - n)
            }
            Statistics::Boltzmann => n * (g.ln() + 1.0) - x_ln_x(n),
        };
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub statistics: Statistics,
    pub temperature: f64,
    pub total_particles: f64,
    pub species: Vec<String>,
    /// Per-species particle numbers imposed on the independent mode.
    pub split: Vec<f64>,
    /// Gamma-generalized `ln W` at each mode's equilibrium occupations.
    pub log_w_coupled: f64,
    pub log_w_independent: f64,
    pub entropy_coupled: f64,
    pub entropy_independent: f64,
    pub energy_coupled: f64,
    pub energy_independent: f64,
    /// `[S_c - beta E_c] - [S_i - beta E_i]`, non-negative because the
    /// coupled occupations maximize `S - beta E` under the single
    /// particle-number constraint while the independent ones satisfy a
    /// strictly more constrained version of the same problem.
    pub entropy_gap: f64,
    pub mu_coupled: f64,
    pub species_totals_coupled: Vec<f64>,
    /// `mu^A` of the independent mode; `-inf` for an empty species.
    pub mu_species: Vec<f64>,
    /// `sum_A (N_A / N) mu^A` over the imposed split.
    pub mu_weighted: f64,
    pub weighting_gap: f64,
    pub classical_deviation: Option<f64>,
}

fn check_split(system: &ReactiveSystem, split: &[f64]) -> Result<()> {
    let joint = system.spectrum();
    if split.len() != joint.species().len() {
        return Err(Error::Usage(format!(
            "split has {} values for {} species",
            split.len(),
            joint.species().len()
        )));
    }
    let n = system.total_particles();
    let sum: f64 = split.iter().sum();
    if (sum - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::Domain(format!(
            "infeasible split: values sum to {sum}, expected N = {n}"
        )));
    }
    for (species, &value) in joint.species().iter().zip(split) {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Domain(format!(
                "infeasible split: species `{}` gets {value}",
                species.name()
            )));
        }
        if system.statistics() == Statistics::Fermi {
            let capacity = f64::from(species.nu()) * species.total_degeneracy();
            if value >= capacity {
                return Err(Error::Domain(format!(
                    "infeasible split: species `{}` gets {value} particles, capacity {capacity}",
                    species.name()
                )));
            }
        }
    }
    Ok(())
}

/// Compares the coupled equilibrium with independent species held at the
/// given particle numbers, all at the system temperature.
pub fn entropy_gap(
    system: &ReactiveSystem,
    split: &[f64],
    opts: &SolverOptions,
) -> Result<ComparisonReport> {
    check_split(system, split)?;
    let joint = system.spectrum();
    let beta = system.beta();
    let stats = system.statistics();
    let n = system.total_particles();
    let degeneracies = joint.degeneracies();

    let coupled = solve_mu_coupled(joint, beta, n, stats, opts)?;
    let independent = solve_independent(joint, beta, split, stats, opts)?;
    let entropy_coupled = stirling_entropy(&coupled.occupations, &degeneracies, stats)?;
    let entropy_independent = stirling_entropy(&independent.occupations, &degeneracies, stats)?;

    let mu_coupled = coupled.mu_global().expect("coupled solution");
    let mu_species = match &independent.mu {
        ChemicalPotential::PerSpecies(m) => m.clone(),
        ChemicalPotential::Global(m) => vec![*m; split.len()],
    };
    let mu_weighted = split
        .iter()
        .zip(&mu_species)
        .filter(|(&w, _)| w > 0.0)
        .map(|(w, mu)| w / n * mu)
        .sum::<f64>();

    Ok(ComparisonReport {
        statistics: stats,
        temperature: system.temperature(),
        total_particles: n,
        species: joint
            .species()
            .iter()
            .map(|s| s.name().to_string())
            .collect(),
        split: split.to_vec(),
        log_w_coupled: coupled.log_multiplicity,
        log_w_independent: independent.log_multiplicity,
        entropy_coupled,
        entropy_independent,
        energy_coupled: coupled.energy,
        energy_independent: independent.energy,
        entropy_gap: (entropy_coupled - beta * coupled.energy)
            - (entropy_independent - beta * independent.energy),
        mu_coupled,
        species_totals_coupled: coupled.species_totals,
        mu_species,
        mu_weighted,
        weighting_gap: (mu_coupled - mu_weighted).abs(),
        classical_deviation: None,
    })
}

/// Solves each species independently at the coupled averages `<N_A>` and
/// reports `|mu - sum_A (<N_A>/N) mu^A|`.
pub fn mu_weighting_check(
    system: &ReactiveSystem,
    opts: &SolverOptions,
) -> Result<ComparisonReport> {
    let coupled = solve_mu_coupled(
        system.spectrum(),
        system.beta(),
        system.total_particles(),
        system.statistics(),
        opts,
    )?;
    if let Some(a) = coupled.species_totals.iter().position(|&t| t <= 0.0) {
        return Err(Error::Domain(format!(
            "species `{}` has no particles at equilibrium",
            system.spectrum().species()[a].name()
        )));
    }
    // Re-normalize so the split sums to N exactly despite solver residual.
    let total: f64 = coupled.species_totals.iter().sum();
    let split: Vec<f64> = coupled
        .species_totals
        .iter()
        .map(|t| t * system.total_particles() / total)
        .collect();
    entropy_gap(system, &split, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalDeviation {
    /// `max_s |n_quantum - n_MB| / n_MB`
    pub max_relative: f64,
    /// Signed `(n_quantum - n_MB) / n_MB` at the maximizing entry:
    /// positive for BE, negative for FD.
    pub signed: f64,
    pub entry: usize,
}

/// Largest relative difference between quantum coupled occupations and
/// the Maxwell-Boltzmann occupations at the same `N` and temperature.
pub fn classical_deviation(
    system: &ReactiveSystem,
    opts: &SolverOptions,
) -> Result<ClassicalDeviation> {
    let quantum = solve_mu_coupled(
        system.spectrum(),
        system.beta(),
        system.total_particles(),
        system.statistics(),
        opts,
    )?;
    let classical = classical_equilibrium(system)?;
    let mut best = ClassicalDeviation {
        max_relative: 0.0,
        signed: 0.0,
        entry: 0,
    };
    for (i, (q, c)) in quantum
        .occupations
        .iter()
        .zip(&classical.occupations)
        .enumerate()
    {
        let rel = (q - c) / c;
        if rel.abs() > best.max_relative {
            best = ClassicalDeviation {
                max_relative: rel.abs(),
                signed: rel,
                entry: i,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{EnergyLevel, Species};

    fn sys(species: Vec<Species>, stats: Statistics, n: f64) -> ReactiveSystem {
        ReactiveSystem::new(species, stats, n, 1.0).unwrap()
    }

    fn a_b_single_levels() -> Vec<Species> {
        vec![
            Species::from_pairs("A", &[(0.0, 1)]).unwrap(),
            Species::from_pairs("B", &[(0.0, 1)]).unwrap(),
        ]
    }

    #[test]
    fn symmetric_split_has_no_gap() {
        let s = sys(a_b_single_levels(), Statistics::Bose, 2.0);
        let r = entropy_gap(&s, &[1.0, 1.0], &SolverOptions::default()).unwrap();
        assert!(r.entropy_gap.abs() < 1e-9, "{}", r.entropy_gap);
    }

    #[test]
    fn concentrated_split_has_positive_gap() {
        let s = sys(a_b_single_levels(), Statistics::Bose, 2.0);
        let r = entropy_gap(&s, &[2.0, 0.0], &SolverOptions::default()).unwrap();
        // 4 ln 2 for (1, 1) against 3 ln 3 - 2 ln 2 for (2, 0).
        let expected = 6.0 * 2f64.ln() - 3.0 * 3f64.ln();
        assert!((r.entropy_gap - expected).abs() < 1e-8, "{}", r.entropy_gap);
        assert!(r.entropy_gap > 0.0);
    }

    #[test]
    fn single_species_modes_coincide() {
        let a = Species::from_pairs("A", &[(0.0, 2), (0.5, 1), (1.3, 3)]).unwrap();
        for stats in [Statistics::Bose, Statistics::Fermi] {
            let s = sys(vec![a.clone()], stats, 2.5);
            let r = entropy_gap(&s, &[2.5], &SolverOptions::default()).unwrap();
            assert!(r.entropy_gap.abs() < 1e-9);
            let w = mu_weighting_check(&s, &SolverOptions::default()).unwrap();
            assert_eq!(w.mu_species[0], w.mu_coupled);
            assert_eq!(w.weighting_gap, 0.0);
        }
    }

    #[test]
    fn infeasible_splits_rejected() {
        let s = sys(a_b_single_levels(), Statistics::Bose, 2.0);
        let opts = SolverOptions::default();
        assert!(matches!(
            entropy_gap(&s, &[1.0, 0.5], &opts),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            entropy_gap(&s, &[3.0, -1.0], &opts),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            entropy_gap(&s, &[2.0], &opts),
            Err(Error::Usage(_))
        ));
        let f = sys(
            vec![
                Species::from_pairs("A", &[(0.0, 1), (1.0, 1)]).unwrap(),
                Species::from_pairs("B", &[(0.0, 2)]).unwrap(),
            ],
            Statistics::Fermi,
            2.5,
        );
        assert!(matches!(
            entropy_gap(&f, &[0.5, 2.0], &opts),
            Err(Error::Domain(_))
        ));
        assert!(entropy_gap(&f, &[1.5, 1.0], &opts).is_ok());
    }

    #[test]
    fn identical_species_share_mu() {
        let pairs = [(0.0, 1), (0.4, 2), (1.1, 1)];
        let s = sys(
            vec![
                Species::from_pairs("A", &pairs).unwrap(),
                Species::from_pairs("B", &pairs).unwrap(),
            ],
            Statistics::Fermi,
            3.0,
        );
        let r = mu_weighting_check(&s, &SolverOptions::default()).unwrap();
        assert!(r.weighting_gap < 1e-9);
        assert!((r.mu_species[0] - r.mu_species[1]).abs() < 1e-9);
    }

    #[test]
    fn half_fugacity_deviation_is_about_one() {
        // Ground level (0, 1) at fugacity 1/2 next to a very degenerate,
        // dilute level that holds almost all particles.
        let g_big = 1_000_000_000_000u64;
        let e_big: f64 = 20.0;
        let big = g_big as f64 * 0.5 * (-e_big).exp();
        for (stats, ground) in [(Statistics::Bose, 1.0), (Statistics::Fermi, 1.0 / 3.0)] {
            let n = ground
                + big
                    / (1.0
                        + if stats == Statistics::Bose { -1.0 } else { 1.0 }
                            * 0.5
                            * (-e_big).exp());
            let species = vec![
                Species::from_pairs("A", &[(0.0, 1)]).unwrap(),
                Species::new("B", vec![EnergyLevel::new(e_big, g_big).unwrap()], 1).unwrap(),
            ];
            let s = sys(species, stats, n);
            let d = classical_deviation(&s, &SolverOptions::default()).unwrap();
            assert_eq!(d.entry, 0);
            match stats {
                Statistics::Bose => assert!((d.signed - 1.0).abs() < 2e-3, "{d:?}"),
                _ => assert!(
                    d.signed < 0.0 && (d.signed + 1.0 / 3.0).abs() < 2e-3,
                    "{d:?}"
                ),
            }
        }
    }

    #[test]
    fn stirling_entropy_values() {
        let s = stirling_entropy(&[1.0], &[1], Statistics::Bose).unwrap();
        assert!((s - 2.0 * 2f64.ln()).abs() < 1e-15);
        let s = stirling_entropy(&[1.0], &[2], Statistics::Fermi).unwrap();
        assert!((s - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(
            stirling_entropy(&[0.0, 0.0], &[3, 1], Statistics::Bose).unwrap(),
            0.0
        );
        assert!(stirling_entropy(&[3.0], &[2], Statistics::Fermi).is_err());
    }
}

use proptest::prelude::*;

use coupled_equilibrium::classical::classical_equilibrium;
use coupled_equilibrium::oracle::ln_level_multiplicity;
use coupled_equilibrium::quantum::{
    log_multiplicity, occupation, solve_independent, solve_mu_coupled,
};
use coupled_equilibrium::sampler::{run_chain, SamplerConfig};
use coupled_equilibrium::spectrum::{build_joint_spectrum, compose_dof};
use coupled_equilibrium::{EnergyLevel, ReactiveSystem, SolverOptions, Species, Statistics};

fn levels() -> impl Strategy<Value = Vec<(f64, u64)>> {
    prop::collection::vec((0.0..5.0f64, 1u64..=4), 1..=6)
}

fn species_set() -> impl Strategy<Value = Vec<Species>> {
    prop::collection::vec((levels(), 1u32..=2), 1..=3).prop_map(|sets| {
        sets.into_iter()
            .enumerate()
            .map(|(a, (pairs, nu))| {
                let levels = pairs
                    .iter()
                    .map(|&(e, g)| EnergyLevel::new(e, g).unwrap())
                    .collect();
                Species::new(format!("S{a}"), levels, nu).unwrap()
            })
            .collect()
    })
}

fn quantum() -> impl Strategy<Value = Statistics> {
    prop_oneof![Just(Statistics::Bose), Just(Statistics::Fermi)]
}

fn capacity(species: &[Species]) -> f64 {
    species
        .iter()
        .map(|s| f64::from(s.nu()) * s.total_degeneracy())
        .sum()
}

fn particles(stats: Statistics, species: &[Species], fraction: f64) -> f64 {
    match stats {
        Statistics::Fermi => fraction * capacity(species),
        _ => 0.1 + 50.0 * fraction,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn total_occupation_increases_with_mu(pairs in levels(), stats in quantum(), beta in 0.2..5.0f64) {
        let e_min = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let total = |mu: f64| -> f64 {
            pairs.iter().map(|&(e, g)| occupation(&EnergyLevel::new(e, g).unwrap(), beta, mu, stats, 1).unwrap()).sum()
        };
        let mut previous = f64::NEG_INFINITY;
        for k in 1..40 {
            let mu = e_min - 8.0 + 0.2 * f64::from(k);
            if stats == Statistics::Bose && mu >= e_min {
                break;
            }
            let t = total(mu);
            prop_assert!(t > previous);
            previous = t;
        }
    }

    #[test]
    fn coupled_solution_meets_constraint_and_bounds(
        species in species_set(),
        stats in quantum(),
        fraction in 0.02..0.98f64,
        beta in 0.2..5.0f64,
    ) {
        let n = particles(stats, &species, fraction);
        let joint = build_joint_spectrum(species).unwrap();
        let sol = solve_mu_coupled(&joint, beta, n, stats, &SolverOptions::default()).unwrap();
        let total: f64 = sol.occupations.iter().sum();
        prop_assert!((total - n).abs() <= 1e-10 * n);
        prop_assert!((sol.species_totals.iter().sum::<f64>() - n).abs() <= 1e-9 * n);
        for (occ, entry) in sol.occupations.iter().zip(joint.entries()) {
            prop_assert!(*occ >= 0.0);
            if stats == Statistics::Fermi {
                prop_assert!(*occ <= entry.degeneracy as f64);
            }
        }
        if stats == Statistics::Bose {
            prop_assert!(sol.mu_global().unwrap() < joint.min_energy());
        }
    }

    #[test]
    fn independent_solve_at_coupled_totals_reproduces_coupled(
        species in species_set(),
        stats in quantum(),
        fraction in 0.05..0.95f64,
        beta in 0.2..5.0f64,
    ) {
        let n = particles(stats, &species, fraction);
        let joint = build_joint_spectrum(species).unwrap();
        let opts = SolverOptions::default();
        let coupled = solve_mu_coupled(&joint, beta, n, stats, &opts).unwrap();
        let independent = solve_independent(&joint, beta, &coupled.species_totals, stats, &opts).unwrap();
        for (a, b) in coupled.occupations.iter().zip(&independent.occupations) {
            prop_assert!((a - b).abs() <= 1e-8 * n.max(1.0));
        }
    }

    #[test]
    fn classical_equilibrium_is_consistent(species in species_set(), n in 0.5..1e4f64, t in 0.2..5.0f64) {
        let system = ReactiveSystem::new(species, Statistics::Boltzmann, n, t).unwrap();
        let eq = classical_equilibrium(&system).unwrap();
        prop_assert!((eq.p_species.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((eq.p_level.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((eq.occupations.iter().sum::<f64>() - n).abs() < 1e-9 * n);
        for (a, total) in eq.species_totals.iter().enumerate() {
            prop_assert!((total - eq.p_species[a] * n).abs() < 1e-9 * n);
        }
        // The frozen form carries no replica exponent, so the mixing gap
        // is only a bound for nu = 1.
        if eq.nu.iter().all(|&v| v == 1) {
            prop_assert!(eq.log_z_coupled >= eq.log_z_frozen - 1e-9 * eq.log_z_coupled.abs().max(1.0));
            if eq.nu.len() == 1 {
                prop_assert!((eq.log_z_coupled - eq.log_z_frozen).abs() <= 1e-9 * eq.log_z_coupled.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gamma_log_multiplicity_matches_exact_counts(g in 1u64..=12, n in 0u32..=12, fermi in any::<bool>()) {
        let stats = if fermi { Statistics::Fermi } else { Statistics::Bose };
        prop_assume!(!fermi || u64::from(n) <= g);
        let smooth = log_multiplicity(&[f64::from(n)], &[g], stats).unwrap();
        let exact = ln_level_multiplicity(n, g, stats).unwrap();
        prop_assert!((smooth - exact).abs() <= 1e-9 * exact.abs().max(1.0));
    }

    #[test]
    fn composition_conserves_degeneracy(
        a in prop::collection::vec((0.0..3.0f64, 1u64..=4), 1..=4),
        b in prop::collection::vec((0.0..3.0f64, 1u64..=4), 1..=4),
        merge in any::<bool>(),
    ) {
        let to_levels = |v: &[(f64, u64)]| v.iter().map(|&(e, g)| EnergyLevel::new(e, g).unwrap()).collect::<Vec<_>>();
        let composed = compose_dof(&[to_levels(&a), to_levels(&b)], merge).unwrap();
        let total: u64 = composed.iter().map(|l| l.degeneracy).sum();
        let expected = a.iter().map(|p| p.1).sum::<u64>() * b.iter().map(|p| p.1).sum::<u64>();
        prop_assert_eq!(total, expected);
    }

    #[test]
    fn chains_are_deterministic_in_the_seed(seed in any::<u64>(), n in 1u32..=5) {
        let joint = build_joint_spectrum(vec![
            Species::from_pairs("A", &[(0.0, 1), (0.5, 2)]).unwrap(),
            Species::from_pairs("B", &[(0.3, 1)]).unwrap(),
        ]).unwrap();
        let cfg = SamplerConfig { steps: 2_000, burn_in: 10, seed, record_histogram: true, ..SamplerConfig::default() };
        let first = run_chain(&joint, n, 1.0, Statistics::Bose, &cfg).unwrap();
        let second = run_chain(&joint, n, 1.0, Statistics::Bose, &cfg).unwrap();
        prop_assert_eq!(first, second);
    }
}

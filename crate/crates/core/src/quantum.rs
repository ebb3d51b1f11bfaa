//! Bose-Einstein / Fermi-Dirac occupation laws and chemical-potential
//! solvers, in conversion-coupled mode (one `mu` over the joint spectrum)
//! and independent mode (one `mu` per species at a fixed particle number).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{EnergyLevel, JointSpectrum, Species};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Bose,
    Fermi,
    /// Classical Maxwell-Boltzmann weights. Only meaningful for the
    /// classical-limit module, the exact oracle and the sampler.
    Boltzmann,
}

impl Statistics {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistics::Bose => "bose",
            Statistics::Fermi => "fermi",
            Statistics::Boltzmann => "boltzmann",
        }
    }

    fn require_quantum(self) -> Result<()> {
        if self == Statistics::Boltzmann {
            return Err(Error::Config(
                "boltzmann statistics are only supported by the classical, enumerate and sample paths"
                    .into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Statistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target: `|sum n - N| <= tolerance * N`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

/// Mean occupation of a level: `nu g / (e^{beta (e - mu)} -+ 1)` for
/// BE (-) and FD (+), `nu g e^{-beta (e - mu)}` for Boltzmann.
pub fn occupation(
    level: &EnergyLevel,
    beta: f64,
    mu: f64,
    stats: Statistics,
    nu: u32,
) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let x = beta * (level.energy - mu);
    if stats == Statistics::Bose && x <= 0.0 {
        return Err(Error::Domain(format!(
            "condensation bound violated: mu = {mu} is not below level energy {}",
            level.energy
        )));
    }
    Ok(f64::from(nu) * level_occupation(x, level.degeneracy as f64, stats))
}

/// Occupation as a function of `x = beta (e - mu)` for a level of
/// (replica-weighted) degeneracy `g`.
#[inline]
fn level_occupation(x: f64, g: f64, stats: Statistics) -> f64 {
    match stats {
        Statistics::Bose => g / x.exp_m1(),
        Statistics::Fermi => {
            if x > 0.0 {
                let t = (-x).exp();
                g * t / (1.0 + t)
            } else {
                g / (1.0 + x.exp())
            }
        }
        Statistics::Boltzmann => g * (-x).exp(),
    }
}

/// `d n / d mu` in terms of the occupation itself.
#[inline]
fn level_derivative(n: f64, g: f64, beta: f64, stats: Statistics) -> f64 {
    match stats {
        Statistics::Bose => beta * n * (1.0 + n / g),
        Statistics::Fermi => beta * n * (1.0 - n / g),
        Statistics::Boltzmann => beta * n,
    }
}

/// A level as seen by the root solver: energy and weight `nu * g`.
#[derive(Debug, Clone, Copy)]
struct WeightedLevel {
    energy: f64,
    weight: f64,
}

fn total_and_slope(levels: &[WeightedLevel], beta: f64, mu: f64, stats: Statistics) -> (f64, f64) {
    levels.iter().fold((0.0, 0.0), |(n, dn), l| {
        let occ = level_occupation(beta * (l.energy - mu), l.weight, stats);
        (n + occ, dn + level_derivative(occ, l.weight, beta, stats))
    })
}

/// One Newton step from a converged root, kept only if it shrinks the
/// residual.
fn polish(
    mu: f64,
    residual: f64,
    slope: f64,
    bracket: (f64, f64),
    count: impl Fn(f64) -> f64,
) -> (f64, f64) {
    if slope.is_nan() || slope <= 0.0 || residual == 0.0 {
        return (mu, residual);
    }
    let candidate = mu - residual / slope;
    if !(candidate >= bracket.0 && candidate <= bracket.1) {
        return (mu, residual);
    }
    let r = count(candidate);
    if r.abs() < residual.abs() {
        (candidate, r)
    } else {
        (mu, residual)
    }
}

/// Finds the unique `mu` with `sum_s n_s(mu) = target`.
///
/// The particle count is strictly increasing in `mu`, so the root is
/// bracketed and refined by a safeguarded Newton-bisection iteration.
/// Returns `(mu, signed residual)`.
fn solve_for_mu(
    levels: &[WeightedLevel],
    beta: f64,
    target: f64,
    stats: Statistics,
    opts: &SolverOptions,
) -> Result<(f64, f64)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Domain(format!(
            "degenerate input: particle number must be positive and finite, got {target}"
        )));
    }
    if levels.is_empty() {
        return Err(Error::Config(
            "cannot solve for mu on an empty spectrum".into(),
        ));
    }
    let e_min = levels
        .iter()
        .map(|l| l.energy)
        .fold(f64::INFINITY, f64::min);
    let e_max = levels
        .iter()
        .map(|l| l.energy)
        .fold(f64::NEG_INFINITY, f64::max);
    if stats == Statistics::Fermi {
        let capacity: f64 = levels.iter().map(|l| l.weight).sum();
        if target >= capacity {
            return Err(Error::Saturation(format!(
                "N = {target} reaches the Fermi-Dirac capacity {capacity}"
            )));
        }
    }
    let count = |mu: f64| total_and_slope(levels, beta, mu, stats).0 - target;
    let tol = opts.tolerance * target;

    // Bracket [lo, hi] with count(lo) < 0 < count(hi).
    let mut step = 1.0 / beta;
    let mut lo = match stats {
        Statistics::Fermi => e_min.min(0.0) - step,
        _ => e_min - step,
    };
    let mut expansions = 0;
    while count(lo) >= 0.0 {
        step *= 2.0;
        lo -= step;
        expansions += 1;
        if expansions > 2000 || !lo.is_finite() {
            return Err(Error::Solver(format!(
                "could not bracket mu from below (last lower bound {lo})"
            )));
        }
    }
    let mut hi = match stats {
        // Occupations diverge as mu approaches the lowest level from below.
        Statistics::Bose => e_min,
        _ => {
            let mut step = 1.0 / beta;
            let mut hi = e_max.max(0.0) + step;
            let mut expansions = 0;
            while count(hi) <= 0.0 {
                step *= 2.0;
                hi += step;
                expansions += 1;
                if expansions > 2000 || !hi.is_finite() {
                    return Err(Error::Solver(format!(
                        "could not bracket mu from above (last upper bound {hi})"
                    )));
                }
            }
            hi
        }
    };

    let mut mu = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let (n, slope) = total_and_slope(levels, beta, mu, stats);
        residual = n - target;
        if residual.abs() <= tol {
            return Ok(polish(mu, residual, slope, (lo, hi), count));
        }
        if residual > 0.0 {
            hi = mu;
        } else {
            lo = mu;
        }
        let width_floor = 1e-14 * mu.abs().max(1.0);
        let newton = mu - residual / slope;
        mu = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= width_floor {
            // Bracket exhausted at f64 resolution; one last evaluation.
            let (n, _) = total_and_slope(levels, beta, mu, stats);
            residual = n - target;
            if residual.abs() <= tol {
                return Ok((mu, residual));
            }
            break;
        }
    }
    Err(Error::Solver(format!(
        "mu did not converge: bracket [{lo}, {hi}], last mu {mu}, residual {residual:e} (target {tol:e})"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Coupled,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChemicalPotential {
    Global(f64),
    PerSpecies(Vec<f64>),
}

/// Solved equilibrium over a joint spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub mode: Mode,
    pub statistics: Statistics,
    pub beta: f64,
    pub mu: ChemicalPotential,
    /// One entry per joint-spectrum entry (replicas included).
    pub occupations: Vec<f64>,
    pub species_totals: Vec<f64>,
    pub log_multiplicity: f64,
    /// `sum n - N` for coupled mode; largest per-species residual otherwise.
    pub residual: f64,
    /// Average energy `sum_s n_s e_s`.
    pub energy: f64,
}

impl EquilibriumSolution {
    /// The global chemical potential of a coupled solution.
    pub fn mu_global(&self) -> Option<f64> {
        match self.mu {
            ChemicalPotential::Global(mu) => Some(mu),
            ChemicalPotential::PerSpecies(_) => None,
        }
    }

    pub fn total_particles(&self) -> f64 {
        self.occupations.iter().sum()
    }
}

fn weighted_entries(joint: &JointSpectrum) -> Vec<WeightedLevel> {
    joint
        .entries()
        .iter()
        .map(|e| WeightedLevel {
            energy: e.energy,
            weight: e.degeneracy as f64,
        })
        .collect()
}

/// Coupled-mode equilibrium: a single `mu` such that the occupations of
/// every joint entry sum to `n_total`.
pub fn solve_mu_coupled(
    joint: &JointSpectrum,
    beta: f64,
    n_total: f64,
    stats: Statistics,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution> {
    stats.require_quantum()?;
    let levels = weighted_entries(joint);
    let (mu, residual) = solve_for_mu(&levels, beta, n_total, stats, opts)?;
    let occupations: Vec<f64> = levels
        .iter()
        .map(|l| level_occupation(beta * (l.energy - mu), l.weight, stats))
        .collect();
    finish_solution(
        joint,
        Mode::Coupled,
        stats,
        beta,
        ChemicalPotential::Global(mu),
        occupations,
        residual,
    )
}

fn finish_solution(
    joint: &JointSpectrum,
    mode: Mode,
    stats: Statistics,
    beta: f64,
    mu: ChemicalPotential,
    occupations: Vec<f64>,
    residual: f64,
) -> Result<EquilibriumSolution> {
    let degeneracies = joint.degeneracies();
    let log_multiplicity = log_multiplicity(&occupations, &degeneracies, stats)?;
    let energy = occupations
        .iter()
        .zip(joint.entries())
        .map(|(n, e)| n * e.energy)
        .sum();
    Ok(EquilibriumSolution {
        mode,
        statistics: stats,
        beta,
        mu,
        species_totals: joint.species_sums(&occupations),
        occupations,
        log_multiplicity,
        residual,
        energy,
    })
}

/// Independent-mode equilibrium of one species at fixed `n_species`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesSolution {
    pub mu: f64,
    /// One entry per species level, already multiplied by `nu`.
    pub occupations: Vec<f64>,
    pub residual: f64,
}

pub fn solve_mu_independent(
    species: &Species,
    beta: f64,
    n_species: f64,
    stats: Statistics,
    opts: &SolverOptions,
) -> Result<SpeciesSolution> {
    stats.require_quantum()?;
    let nu = f64::from(species.nu());
    let levels: Vec<WeightedLevel> = species
        .levels()
        .iter()
        .map(|l| WeightedLevel {
            energy: l.energy,
            weight: nu * l.degeneracy as f64,
        })
        .collect();
    let (mu, residual) =
        solve_for_mu(&levels, beta, n_species, stats, opts).map_err(|e| match e {
            Error::Domain(m) => Error::Domain(format!("species `{}`: {m}", species.name())),
            Error::Saturation(m) => Error::Saturation(format!("species `{}`: {m}", species.name())),
            other => other,
        })?;
    let occupations = levels
        .iter()
        .map(|l| level_occupation(beta * (l.energy - mu), l.weight, stats))
        .collect();
    Ok(SpeciesSolution {
        mu,
        occupations,
        residual,
    })
}

/// Independent-mode equilibrium for every species at the given per-species
/// particle numbers, laid out over the joint spectrum (each replica carries
/// `1/nu` of its level's occupation). Species with a zero target are empty
/// and get `mu = -inf`.
pub fn solve_independent(
    joint: &JointSpectrum,
    beta: f64,
    targets: &[f64],
    stats: Statistics,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution> {
    stats.require_quantum()?;
    if targets.len() != joint.species().len() {
        return Err(Error::Usage(format!(
            "expected {} per-species targets, got {}",
            joint.species().len(),
            targets.len()
        )));
    }
    let mut occupations = vec![0.0; joint.total_levels()];
    let mut mus = Vec::with_capacity(targets.len());
    let mut worst = 0.0f64;
    for (sid, (species, &target)) in joint.species().iter().zip(targets).enumerate() {
        if target < 0.0 || !target.is_finite() {
            return Err(Error::Domain(format!(
                "species `{}`: target particle number {target} is not a finite non-negative value",
                species.name()
            )));
        }
        if target == 0.0 {
            mus.push(f64::NEG_INFINITY);
            continue;
        }
        let sol = solve_mu_independent(species, beta, target, stats, opts)?;
        let nu = f64::from(species.nu());
        for idx in joint.species_block(sid) {
            occupations[idx] = sol.occupations[joint.entries()[idx].level] / nu;
        }
        if sol.residual.abs() > worst.abs() {
            worst = sol.residual;
        }
        mus.push(sol.mu);
    }
    finish_solution(
        joint,
        Mode::Independent,
        stats,
        beta,
        ChemicalPotential::PerSpecies(mus),
        occupations,
        worst,
    )
}

/// `ln W` for real-valued occupations, with factorials generalized by the
/// gamma function.
pub fn log_multiplicity(
    occupations: &[f64],
    degeneracies: &[u64],
    stats: Statistics,
) -> Result<f64> {
    if occupations.len() != degeneracies.len() {
        return Err(Error::Usage(format!(
            "{} occupations but {} degeneracies",
            occupations.len(),
            degeneracies.len()
        )));
    }
    let mut total = 0.0;
    for (&n, &g) in occupations.iter().zip(degeneracies) {
        let g = g as f64;
        if n < 0.0 || !n.is_finite() {
            return Err(Error::Domain(format!(
                "occupation {n} is not a finite non-negative value"
            )));
        }
        total += match stats {
            Statistics::Bose => libm::lgamma(g + n) - libm::lgamma(g) - libm::lgamma(n + 1.0),
            Statistics::Fermi => {
                if n > g {
                    return Err(Error::Domain(format!(
                        "Fermi-Dirac occupation {n} exceeds degeneracy {g}"
                    )));
                }
                libm::lgamma(g + 1.0) - libm::lgamma(g - n + 1.0) - libm::lgamma(n + 1.0)
            }
            // Classical count of indistinguishable placements, g^n / n!.
            Statistics::Boltzmann => n * g.ln() - libm::lgamma(n + 1.0),
        };
    }
    Ok(total)
}

/// `ln Xi = -+ sum_s g_s ln(1 -+ e^{beta (mu - e_s)})`.
pub fn grand_potential_log(
    joint: &JointSpectrum,
    beta: f64,
    mu: f64,
    stats: Statistics,
) -> Result<f64> {
    stats.require_quantum()?;
    if stats == Statistics::Bose && mu >= joint.min_energy() {
        return Err(Error::Domain(format!(
            "condensation bound violated: mu = {mu} is not below the lowest level {}",
            joint.min_energy()
        )));
    }
    Ok(joint
        .entries()
        .iter()
        .map(|e| {
            let z = (beta * (mu - e.energy)).exp();
            let g = e.degeneracy as f64;
            match stats {
                Statistics::Bose => -g * (-z).ln_1p(),
                _ => g * z.ln_1p(),
            }
        })
        .sum())
}

/// Canonical `ln Z = ln Xi(mu) - beta mu N` at the `mu` that fixes `N`.
pub fn canonical_log_z_from_grand(
    joint: &JointSpectrum,
    beta: f64,
    n_total: f64,
    stats: Statistics,
    opts: &SolverOptions,
) -> Result<f64> {
    let sol = solve_mu_coupled(joint, beta, n_total, stats, opts)?;
    let mu = sol.mu_global().expect("coupled solution");
    Ok(grand_potential_log(joint, beta, mu, stats)? - beta * mu * n_total)
}

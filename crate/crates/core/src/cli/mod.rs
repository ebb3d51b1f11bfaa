//! Command dispatch for the `coupled-eq` binary.
//!
//! Every command produces one tidy table; see [`describe_columns`] for the
//! column and quantity reference.

pub mod config;
pub mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::str::FromStr;

use crate::analysis::{classical_deviation, entropy_gap, mu_weighting_check, ComparisonReport};
use crate::classical::{classical_equilibrium, classical_variances, mass_action_check};
use crate::error::{Error, Result};
use crate::oracle::{count_configurations, exact_statistics, exact_statistics_with_distribution};
use crate::quantum::{grand_potential_log, solve_mu_coupled, Statistics};
use crate::sampler::{compare_to_oracle, run_chain, SamplerConfig};
use crate::spectrum::truncation_weight;
use crate::system::ReactiveSystem;

pub use config::{parse_config, OutputFormat, RunConfig, ScanParameter, ScanSpec};
pub use report::{format_significant, Cell, Table};

pub const COLUMNS: [&str; 6] = [
    "section", "species", "level", "replica", "quantity", "value",
];
pub const SCAN_COLUMNS: [&str; 5] = [
    "parameter",
    "parameter_value",
    "species",
    "quantity",
    "value",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Classical,
    Enumerate,
    Sample,
    Compare,
    Scan,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Classical => "classical",
            Command::Enumerate => "enumerate",
            Command::Sample => "sample",
            Command::Compare => "compare",
            Command::Scan => "scan",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "solve" => Command::Solve,
            "classical" => Command::Classical,
            "enumerate" => Command::Enumerate,
            "sample" => Command::Sample,
            "compare" => Command::Compare,
            "scan" => Command::Scan,
            other => {
                return Err(Error::Usage(format!(
                    "unknown command `{other}` (expected solve, classical, enumerate, sample, compare or scan)"
                )))
            }
        })
    }
}

/// Row builder for the standard six-column layout.
struct Rows {
    table: Table,
}

impl Rows {
    fn new(command: Command) -> Self {
        Rows {
            table: Table::new(command.as_str(), &COLUMNS),
        }
    }

    fn summary(&mut self, quantity: &str, value: impl Into<Cell>) {
        self.table.push(vec![
            "summary".into(),
            "".into(),
            "".into(),
            "".into(),
            quantity.into(),
            value.into(),
        ]);
    }

    fn species(&mut self, section: &str, species: &str, quantity: &str, value: impl Into<Cell>) {
        self.table.push(vec![
            section.into(),
            species.into(),
            "".into(),
            "".into(),
            quantity.into(),
            value.into(),
        ]);
    }

    fn level(
        &mut self,
        section: &str,
        system: &ReactiveSystem,
        entry: usize,
        quantity: &str,
        value: impl Into<Cell>,
    ) {
        let e = system.spectrum().entries()[entry];
        let name = system.spectrum().species()[e.species].name();
        self.table.push(vec![
            section.into(),
            name.into(),
            e.level.into(),
            u64::from(e.replica).into(),
            quantity.into(),
            value.into(),
        ]);
    }
}

fn species_names(system: &ReactiveSystem) -> Vec<String> {
    system
        .spectrum()
        .species()
        .iter()
        .map(|s| s.name().to_string())
        .collect()
}

fn solve_rows(cfg: &RunConfig, rows: &mut Rows) -> Result<()> {
    let system = &cfg.system;
    let joint = system.spectrum();
    let beta = system.beta();
    let n = system.total_particles();
    let sol = solve_mu_coupled(joint, beta, n, system.statistics(), &cfg.solver)?;
    let mu = sol.mu_global().expect("coupled solution");
    let log_grand = grand_potential_log(joint, beta, mu, system.statistics())?;

    rows.summary("temperature", system.temperature());
    rows.summary("beta", beta);
    rows.summary("total_particles", n);
    rows.summary("mu", mu);
    rows.summary("beta_mu", beta * mu);
    rows.summary("residual", sol.residual);
    rows.summary("log_multiplicity", sol.log_multiplicity);
    rows.summary("energy", sol.energy);
    rows.summary("log_grand_partition", log_grand);
    rows.summary("log_canonical_partition", log_grand - beta * mu * n);
    for (species, total) in joint.species().iter().zip(&sol.species_totals) {
        rows.species("species", species.name(), "total", *total);
        rows.species(
            "species",
            species.name(),
            "truncation_weight",
            truncation_weight(species.levels(), beta),
        );
    }
    for (i, (entry, occ)) in joint.entries().iter().zip(&sol.occupations).enumerate() {
        rows.level("level", system, i, "energy", entry.energy);
        rows.level("level", system, i, "degeneracy", entry.degeneracy);
        rows.level("level", system, i, "occupation", *occ);
    }
    Ok(())
}

fn classical_rows(system: &ReactiveSystem, rows: &mut Rows) -> Result<()> {
    let eq = classical_equilibrium(system)?;
    let names = species_names(system);
    rows.summary("temperature", system.temperature());
    rows.summary("total_particles", eq.total_particles);
    rows.summary("z_eq", eq.z_eq);
    rows.summary("log_z_eq", eq.log_z_eq);
    rows.summary("beta_mu", eq.beta_mu);
    rows.summary("log_z_coupled", eq.log_z_coupled);
    rows.summary("log_z_frozen", eq.log_z_frozen);
    rows.summary("free_energy", eq.free_energy);
    for (a, name) in names.iter().enumerate() {
        rows.species("species", name, "z", eq.z_species[a]);
        rows.species("species", name, "log_z", eq.log_z_species[a]);
        rows.species("species", name, "probability", eq.p_species[a]);
        rows.species("species", name, "total", eq.species_totals[a]);
        rows.species("species", name, "mu", eq.mu_species[a]);
    }
    if eq.nu.iter().all(|&v| v == 1) {
        for pair in mass_action_check(&eq)? {
            let label = format!("{}:{}", names[pair.first], names[pair.second]);
            rows.species(
                "mass_action",
                &label,
                "partition_ratio",
                pair.partition_ratio,
            );
            rows.species(
                "mass_action",
                &label,
                "population_ratio",
                pair.population_ratio,
            );
        }
    }
    for i in 0..system.spectrum().total_levels() {
        rows.level("level", system, i, "probability", eq.p_level[i]);
        rows.level(
            "level",
            system,
            i,
            "probability_within_species",
            eq.p_level_within_species[i],
        );
        rows.level("level", system, i, "occupation", eq.occupations[i]);
    }
    let variances = classical_variances(&eq, eq.total_particles);
    for (a, line) in variances.species.iter().enumerate() {
        rows.species(
            "variance_species",
            &names[a],
            "squared_form",
            line.squared_form,
        );
        rows.species(
            "variance_species",
            &names[a],
            "multinomial_form",
            line.multinomial_form,
        );
    }
    for (i, line) in variances.levels.iter().enumerate() {
        rows.level(
            "variance_level",
            system,
            i,
            "squared_form",
            line.squared_form,
        );
        rows.level(
            "variance_level",
            system,
            i,
            "multinomial_form",
            line.multinomial_form,
        );
    }
    Ok(())
}

fn enumerate_rows(cfg: &RunConfig, rows: &mut Rows) -> Result<()> {
    let system = &cfg.system;
    let n = system.integer_particles()?;
    let ex = exact_statistics(
        system.spectrum(),
        n,
        system.beta(),
        system.statistics(),
        cfg.enumeration_cap,
    )?;
    rows.summary("temperature", system.temperature());
    rows.summary("total_particles", u64::from(n));
    rows.summary("log_z", ex.log_z);
    rows.summary("configuration_count", ex.configuration_count);
    for (a, name) in species_names(system).iter().enumerate() {
        rows.species("species", name, "mean", ex.species_mean[a]);
        rows.species("species", name, "mean_square", ex.species_mean_square[a]);
        rows.species("species", name, "variance", ex.species_variance[a]);
    }
    for i in 0..system.spectrum().total_levels() {
        rows.level("level", system, i, "mean", ex.mean_occupation[i]);
        rows.level(
            "level",
            system,
            i,
            "mean_square",
            ex.mean_square_occupation[i],
        );
        rows.level("level", system, i, "variance", ex.occupation_variance[i]);
    }
    Ok(())
}

fn sample_rows(cfg: &RunConfig, rows: &mut Rows) -> Result<()> {
    let system = &cfg.system;
    let n = system.integer_particles()?;
    let sampler = cfg.sampler.clone().unwrap_or_default();
    let joint = system.spectrum();
    let (beta, stats) = (system.beta(), system.statistics());
    let s = run_chain(joint, n, beta, stats, &sampler)?;
    rows.summary("samples", s.samples);
    rows.summary("seed", sampler.seed);
    rows.summary("mean_energy", s.mean_energy);
    rows.summary("energy_ess", s.energy_ess);
    rows.summary("intra_acceptance", s.intra_moves.rate());
    rows.summary("conversion_acceptance", s.conversion_moves.rate());
    rows.summary("intra_proposed", s.intra_moves.proposed);
    rows.summary("conversion_proposed", s.conversion_moves.proposed);
    rows.summary("null_moves", s.null_moves);
    rows.summary("degenerate", u64::from(s.degenerate));
    let names = species_names(system);
    for (a, name) in names.iter().enumerate() {
        rows.species("species", name, "mean", s.species_mean[a]);
        rows.species("species", name, "variance", s.species_variance[a]);
        rows.species("species", name, "ess", s.species_ess[a]);
    }
    for i in 0..joint.total_levels() {
        rows.level("level", system, i, "mean", s.mean_occupation[i]);
        rows.level("level", system, i, "variance", s.occupation_variance[i]);
    }

    // Oracle comparison whenever exact enumeration is affordable.
    if count_configurations(joint, n, stats) <= cfg.enumeration_cap as f64 {
        let exact = if sampler.record_histogram {
            exact_statistics_with_distribution(joint, n, beta, stats, cfg.enumeration_cap)?
        } else {
            exact_statistics(joint, n, beta, stats, cfg.enumeration_cap)?
        };
        let report = compare_to_oracle(&s, &exact)?;
        if let Some(tv) = report.total_variation {
            rows.summary("oracle_total_variation", tv);
        }
        rows.summary("oracle_max_abs_z", report.max_abs_z());
        for (a, d) in report.species_variances.iter().enumerate() {
            rows.species("oracle", &names[a], "exact_mean", exact.species_mean[a]);
            rows.species(
                "oracle",
                &names[a],
                "mean_z",
                report.species_means[a].z_score,
            );
            rows.species("oracle", &names[a], "exact_variance", d.exact);
            rows.species("oracle", &names[a], "variance_difference", d.difference);
            rows.species(
                "oracle",
                &names[a],
                "variance_flagged",
                u64::from(d.flagged),
            );
        }
        for (i, q) in report.level_means.iter().enumerate() {
            rows.level("oracle", system, i, "exact_mean", q.exact);
            rows.level("oracle", system, i, "mean_z", q.z_score);
        }
    }
    Ok(())
}

fn comparison_rows(report: &ComparisonReport, rows: &mut Rows) {
    rows.summary("entropy_gap", report.entropy_gap);
    rows.summary("log_w_coupled", report.log_w_coupled);
    rows.summary("log_w_independent", report.log_w_independent);
    rows.summary("entropy_coupled", report.entropy_coupled);
    rows.summary("entropy_independent", report.entropy_independent);
    rows.summary("energy_coupled", report.energy_coupled);
    rows.summary("energy_independent", report.energy_independent);
    rows.summary("mu_coupled", report.mu_coupled);
    rows.summary("mu_weighted", report.mu_weighted);
    rows.summary("weighting_gap", report.weighting_gap);
    for (a, name) in report.species.iter().enumerate() {
        rows.species("species", name, "split", report.split[a]);
        rows.species(
            "species",
            name,
            "total_coupled",
            report.species_totals_coupled[a],
        );
        rows.species("species", name, "mu_independent", report.mu_species[a]);
    }
}

fn compare_rows(cfg: &RunConfig, rows: &mut Rows) -> Result<()> {
    let system = &cfg.system;
    if system.statistics() == Statistics::Boltzmann {
        // Classical variance adjudication against Boltzmann-weighted
        // enumeration of the same system.
        let eq = classical_equilibrium(system)?;
        let mut report = classical_variances(&eq, eq.total_particles);
        let names = species_names(system);
        if let Ok(n) = system.integer_particles() {
            let exact = exact_statistics(
                system.spectrum(),
                n,
                system.beta(),
                Statistics::Boltzmann,
                cfg.enumeration_cap,
            )?;
            report = report.with_oracle(&exact)?;
        }
        for (a, line) in report.species.iter().enumerate() {
            rows.species(
                "variance_species",
                &names[a],
                "probability",
                line.probability,
            );
            rows.species(
                "variance_species",
                &names[a],
                "squared_form",
                line.squared_form,
            );
            rows.species(
                "variance_species",
                &names[a],
                "multinomial_form",
                line.multinomial_form,
            );
            if let (Some(o), Some(dp), Some(dm)) = (
                line.oracle,
                line.squared_discrepancy,
                line.multinomial_discrepancy,
            ) {
                rows.species("variance_species", &names[a], "oracle", o);
                rows.species("variance_species", &names[a], "squared_discrepancy", dp);
                rows.species("variance_species", &names[a], "multinomial_discrepancy", dm);
            }
        }
        for (i, line) in report.levels.iter().enumerate() {
            rows.level(
                "variance_level",
                system,
                i,
                "squared_form",
                line.squared_form,
            );
            rows.level(
                "variance_level",
                system,
                i,
                "multinomial_form",
                line.multinomial_form,
            );
            if let Some(o) = line.oracle {
                rows.level("variance_level", system, i, "oracle", o);
            }
        }
        return Ok(());
    }

    let mut report = match &cfg.split {
        Some(split) => entropy_gap(system, split, &cfg.solver)?,
        None => mu_weighting_check(system, &cfg.solver)?,
    };
    report.classical_deviation = Some(classical_deviation(system, &cfg.solver)?.max_relative);
    comparison_rows(&report, rows);
    if let Some(d) = report.classical_deviation {
        rows.summary("classical_deviation", d);
    }
    if cfg.split.is_some() {
        let weighting = mu_weighting_check(system, &cfg.solver)?;
        rows.summary("equilibrium_split_weighting_gap", weighting.weighting_gap);
    }
    Ok(())
}

fn scan_point(cfg: &RunConfig, system: &ReactiveSystem) -> Result<Vec<(String, String, f64)>> {
    let mut out = Vec::new();
    let names = species_names(system);
    if system.statistics() == Statistics::Boltzmann {
        let eq = classical_equilibrium(system)?;
        out.push((String::new(), "beta_mu".into(), eq.beta_mu));
        out.push((String::new(), "log_z_coupled".into(), eq.log_z_coupled));
        out.push((String::new(), "log_z_frozen".into(), eq.log_z_frozen));
        for (a, name) in names.iter().enumerate() {
            out.push((name.clone(), "total".into(), eq.species_totals[a]));
            out.push((name.clone(), "mu".into(), eq.mu_species[a]));
        }
    } else {
        let joint = system.spectrum();
        let beta = system.beta();
        let n = system.total_particles();
        let sol = solve_mu_coupled(joint, beta, n, system.statistics(), &cfg.solver)?;
        let mu = sol.mu_global().expect("coupled solution");
        let log_grand = grand_potential_log(joint, beta, mu, system.statistics())?;
        out.push((String::new(), "beta_mu".into(), beta * mu));
        out.push((String::new(), "energy".into(), sol.energy));
        out.push((
            String::new(),
            "log_multiplicity".into(),
            sol.log_multiplicity,
        ));
        out.push((
            String::new(),
            "log_canonical_partition".into(),
            log_grand - beta * mu * n,
        ));
        for (a, name) in names.iter().enumerate() {
            out.push((name.clone(), "total".into(), sol.species_totals[a]));
        }
    }
    Ok(out)
}

fn scan_table(cfg: &RunConfig) -> Result<Table> {
    let spec = cfg
        .scan
        .as_ref()
        .ok_or_else(|| Error::Usage("the scan command needs a [scan] section".into()))?;
    let mut table = Table::new(Command::Scan.as_str(), &SCAN_COLUMNS);
    for &value in &spec.values {
        let system = match spec.parameter {
            ScanParameter::Temperature => cfg.system.with_temperature(value)?,
            ScanParameter::TotalParticles => cfg.system.with_total_particles(value)?,
        };
        for (species, quantity, result) in scan_point(cfg, &system)? {
            if !spec.quantities.is_empty() && !spec.quantities.contains(&quantity) {
                continue;
            }
            table.push(vec![
                spec.parameter.as_str().into(),
                value.into(),
                species.into(),
                quantity.into(),
                result.into(),
            ]);
        }
    }
    Ok(table)
}

/// Runs one command and returns its table.
pub fn run_command(command: Command, cfg: &RunConfig) -> Result<Table> {
    if command == Command::Scan {
        return scan_table(cfg);
    }
    let mut rows = Rows::new(command);
    match command {
        Command::Solve => solve_rows(cfg, &mut rows)?,
        Command::Classical => classical_rows(&cfg.system, &mut rows)?,
        Command::Enumerate => enumerate_rows(cfg, &mut rows)?,
        Command::Sample => sample_rows(cfg, &mut rows)?,
        Command::Compare => compare_rows(cfg, &mut rows)?,
        Command::Scan => unreachable!(),
    }
    Ok(rows.table)
}

/// Overrides the sampler seed from the command line.
pub fn apply_seed(cfg: &mut RunConfig, seed: u64) {
    let sampler = cfg.sampler.get_or_insert_with(SamplerConfig::default);
    sampler.seed = seed;
}

/// Runs a command and writes its table to `output` (or the configured
/// path, or stdout).
pub fn execute(command: Command, cfg: &RunConfig, output: Option<&str>) -> Result<()> {
    let table = run_command(command, cfg)?;
    let path = output.or(cfg.output.path.as_deref());
    match path {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            table.write(&mut file, cfg.output.format, cfg.output.precision)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write(&mut lock, cfg.output.format, cfg.output.precision)?;
        }
    }
    Ok(())
}

/// Column and quantity reference printed by `--describe-columns`.
pub fn describe_columns() -> String {
    let text = r#"coupled-eq output schema, version 1

Standard layout (solve, classical, enumerate, sample, compare):
  section          summary | species | level | mass_action | variance_species | variance_level | oracle
  species          species name (mass_action: "A:B" pair)
  level            level index within the species (level sections only)
  replica          replica index 0..nu-1 (level sections only)
  quantity         name of the reported quantity, see below
  value            number with the configured significant digits (default 12)

Scan layout:
  parameter        temperature | total_particles
  parameter_value  swept value
  species          species name, empty for system-wide quantities
  quantity         as below
  value            as below

Quantities (k_B = 1, beta = 1/T):
  mu, beta_mu              chemical potential of the joint spectrum; sum_s n_s = N
  occupation               n_s = g_s / (exp(beta (e_s - mu)) -+ 1) per joint entry (BE -, FD +)
  total                    <N_A> = sum of the species' entry occupations (classical: N^A = p^A N)
  residual                 sum_s n_s - N at the solved mu
  log_multiplicity         ln W = sum_s ln Gamma-generalized BE/FD level counts
  energy                   E = sum_s n_s e_s
  log_grand_partition      ln Xi = -+ sum_s g_s ln(1 -+ exp(beta (mu - e_s)))
  log_canonical_partition  ln Z = ln Xi - beta mu N
  truncation_weight        g e^{-beta e_max} / Z^A of the highest retained level
  z, log_z (species)       Z^A = sum_{s in A} g_s e^{-beta e_s}
  z_eq, log_z_eq           Z_eq = sum_A (Z^A)^{nu_A}
  probability              p^A = (Z^A)^{nu_A} / Z_eq (species), p_s = p^A p_s^A (level)
  probability_within_species  p_s^A = g_s e^{-beta e_s} / Z^A
  log_z_coupled            N ln Z_eq - ln N!
  log_z_frozen             sum_A [N^A ln Z^A - ln N^A!]
  mu (classical species)   mu^A = (ln N^A - ln Z^A) / beta
  free_energy              F_eq = sum_A N^A mu^A
  partition_ratio          Z^B / Z^A
  population_ratio         N^B / N^A
  squared_form               N^2 (p - p^2)
  multinomial_form         N (p - p^2)
  oracle                   exact variance from Boltzmann-weighted enumeration
  squared_discrepancy        oracle - squared_form
  multinomial_discrepancy  oracle - multinomial_form
  mean, mean_square, variance  exact (enumerate) or empirical (sample) <x>, <x^2>, <x^2> - <x>^2
  log_z (enumerate)        ln sum_X exp(-beta E_X) prod_s m_s(n_s)
  configuration_count      number of enumerated occupancy vectors
  ess, energy_ess          batch-means effective sample size
  *_acceptance             accepted / proposed moves per class
  oracle_total_variation   0.5 sum_X |p_chain(X) - p_exact(X)|
  mean_z                   (empirical - exact) / standard error
  entropy_gap              [S_c - beta E_c] - [S_i - beta E_i] (continuous BE/FD entropy S)
  entropy_*, energy_*      S and E of the coupled (c) and independent (i) modes
  log_w_*                  ln W of each mode
  mu_weighted              sum_A (N_A / N) mu^A
  weighting_gap            |mu - mu_weighted|
  classical_deviation      max_s |n_quantum - n_MB| / n_MB
"#;
    text.to_string()
}

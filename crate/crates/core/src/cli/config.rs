//! Run configuration: a versioned TOML document.
//!
//! ```toml
//! schema_version = 1
//! temperature = 1.0
//! statistics = "bose"
//! total_particles = 2
//!
//! [[species]]
//! name = "A"
//! levels = [[0.0, 1]]
//!
//! [[species]]
//! name = "B"
//! nu = 1
//! dof_generators = [{ kind = "harmonic", quantum = 0.5, count = 4 }]
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::oracle::DEFAULT_ENUMERATION_CAP;
use crate::quantum::{SolverOptions, Statistics};
use crate::sampler::SamplerConfig;
use crate::spectrum::{compose_dof, generate_dof_levels, DofGenerator, EnergyLevel, Species};
use crate::system::ReactiveSystem;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_PRECISION: usize = 12;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    temperature: f64,
    statistics: Statistics,
    total_particles: f64,
    species: Vec<RawSpecies>,
    #[serde(default)]
    solver: RawSolver,
    sampler: Option<RawSampler>,
    #[serde(default)]
    enumeration: RawEnumeration,
    #[serde(default)]
    compare: RawCompare,
    scan: Option<RawScan>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpecies {
    name: String,
    #[serde(default = "one")]
    nu: u32,
    #[serde(default)]
    levels: Vec<(f64, u64)>,
    #[serde(default)]
    dof_generators: Vec<DofGenerator>,
    #[serde(default)]
    merge_degenerate: bool,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default = "default_tolerance")]
    tolerance: f64,
    #[serde(default = "default_max_iterations")]
    max_iterations: usize,
}

fn default_tolerance() -> f64 {
    SolverOptions::default().tolerance
}

fn default_max_iterations() -> usize {
    SolverOptions::default().max_iterations
}

impl Default for RawSolver {
    fn default() -> Self {
        RawSolver {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampler {
    steps: u64,
    #[serde(default)]
    burn_in: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "yes")]
    conversion_moves_enabled: bool,
    conversion_move_probability: Option<f64>,
    #[serde(default = "one_u64")]
    thinning: u64,
    #[serde(default)]
    histogram: bool,
}

fn yes() -> bool {
    true
}

fn one_u64() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnumeration {
    #[serde(default = "default_cap")]
    cap: u64,
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

impl Default for RawEnumeration {
    fn default() -> Self {
        RawEnumeration { cap: default_cap() }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    split: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    Temperature,
    TotalParticles,
}

impl ScanParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanParameter::Temperature => "temperature",
            ScanParameter::TotalParticles => "total_particles",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    parameter: ScanParameter,
    values: Vec<f64>,
    #[serde(default)]
    quantities: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_format")]
    format: OutputFormat,
    path: Option<String>,
    #[serde(default = "default_precision")]
    precision: usize,
}

fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

fn default_precision() -> usize {
    DEFAULT_PRECISION
}

impl Default for RawOutput {
    fn default() -> Self {
        RawOutput {
            format: default_format(),
            path: None,
            precision: default_precision(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub parameter: ScanParameter,
    pub values: Vec<f64>,
    /// Empty selects every quantity.
    pub quantities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub format: OutputFormat,
    pub path: Option<String>,
    pub precision: usize,
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: ReactiveSystem,
    pub solver: SolverOptions,
    pub sampler: Option<SamplerConfig>,
    pub enumeration_cap: u64,
    pub split: Option<Vec<f64>>,
    pub scan: Option<ScanSpec>,
    pub output: OutputSpec,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, col)
}

fn invalid(field: &str, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {message}"))
}

fn build_species(index: usize, raw: RawSpecies) -> Result<Species> {
    let field = format!("species[{index}]");
    let mut dofs: Vec<Vec<EnergyLevel>> = Vec::new();
    if !raw.levels.is_empty() {
        let levels = raw
            .levels
            .iter()
            .map(|&(e, g)| EnergyLevel::new(e, g))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| invalid(&format!("{field}.levels"), e))?;
        dofs.push(levels);
    }
    for (k, generator) in raw.dof_generators.iter().enumerate() {
        dofs.push(
            generate_dof_levels(generator)
                .map_err(|e| invalid(&format!("{field}.dof_generators[{k}]"), e))?,
        );
    }
    if dofs.is_empty() {
        return Err(invalid(&field, "needs `levels` and/or `dof_generators`"));
    }
    let levels = if dofs.len() == 1 && !raw.merge_degenerate {
        dofs.pop().expect("one dof")
    } else {
        compose_dof(&dofs, raw.merge_degenerate).map_err(|e| invalid(&field, e))?
    };
    Species::new(raw.name, levels, raw.nu).map_err(|e| invalid(&field, e))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let locus = match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("line {line}, column {col}")
            }
            None => "document".to_string(),
        };
        Error::Parse {
            locus,
            message: e.message().to_string(),
        }
    })?;

    if raw.schema_version != SCHEMA_VERSION {
        return Err(invalid(
            "schema_version",
            format!(
                "unsupported version {} (expected {SCHEMA_VERSION})",
                raw.schema_version
            ),
        ));
    }
    if !(raw.temperature > 0.0 && raw.temperature.is_finite()) {
        return Err(invalid("temperature", "must be positive and finite"));
    }
    if !(raw.total_particles >= 0.0 && raw.total_particles.is_finite()) {
        return Err(invalid(
            "total_particles",
            "must be finite and non-negative",
        ));
    }
    if raw.species.is_empty() {
        return Err(invalid("species", "at least one species is required"));
    }
    if !(raw.solver.tolerance > 0.0 && raw.solver.tolerance < 1.0) {
        return Err(invalid("solver.tolerance", "must lie in (0, 1)"));
    }
    if raw.solver.max_iterations == 0 {
        return Err(invalid("solver.max_iterations", "must be at least 1"));
    }
    if raw.output.precision == 0 || raw.output.precision > 17 {
        return Err(invalid(
            "output.precision",
            "must lie in 1..=17 significant digits",
        ));
    }

    let species = raw
        .species
        .into_iter()
        .enumerate()
        .map(|(i, s)| build_species(i, s))
        .collect::<Result<Vec<_>>>()?;
    let system = ReactiveSystem::new(
        species,
        raw.statistics,
        raw.total_particles,
        raw.temperature,
    )?;

    let sampler = raw
        .sampler
        .map(|s| {
            let cfg = SamplerConfig {
                steps: s.steps,
                burn_in: s.burn_in,
                seed: s.seed,
                conversion_moves_enabled: s.conversion_moves_enabled,
                conversion_move_probability: s.conversion_move_probability,
                thinning: s.thinning,
                record_histogram: s.histogram,
            };
            cfg.validate().map_err(|e| invalid("sampler", e))?;
            Ok::<_, Error>(cfg)
        })
        .transpose()?;

    if let Some(split) = &raw.compare.split {
        if split.len() != system.spectrum().species().len() {
            return Err(invalid("compare.split", "needs one value per species"));
        }
    }

    let scan = raw
        .scan
        .map(|s| {
            if s.values.is_empty() {
                return Err(invalid("scan.values", "needs at least one value"));
            }
            for &v in &s.values {
                let ok = match s.parameter {
                    ScanParameter::Temperature => v > 0.0 && v.is_finite(),
                    ScanParameter::TotalParticles => v >= 0.0 && v.is_finite(),
                };
                if !ok {
                    return Err(invalid(
                        "scan.values",
                        format!("invalid {} value {v}", s.parameter.as_str()),
                    ));
                }
            }
            Ok(ScanSpec {
                parameter: s.parameter,
                values: s.values,
                quantities: s.quantities,
            })
        })
        .transpose()?;

    Ok(RunConfig {
        system,
        solver: SolverOptions {
            tolerance: raw.solver.tolerance,
            max_iterations: raw.solver.max_iterations,
        },
        sampler,
        enumeration_cap: raw.enumeration.cap,
        split: raw.compare.split,
        scan,
        output: OutputSpec {
            format: raw.output.format,
            path: raw.output.path,
            precision: raw.output.precision,
        },
    })
}

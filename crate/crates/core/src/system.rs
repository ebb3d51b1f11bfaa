use crate::error::{Error, Result};
use crate::quantum::Statistics;
use crate::spectrum::{build_joint_spectrum, JointSpectrum, Species};

/// Species, statistics, total particle number and temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactiveSystem {
    spectrum: JointSpectrum,
    statistics: Statistics,
    total_particles: f64,
    temperature: f64,
}

impl ReactiveSystem {
    pub fn new(
        species: Vec<Species>,
        statistics: Statistics,
        total_particles: f64,
        temperature: f64,
    ) -> Result<Self> {
        let spectrum = build_joint_spectrum(species)?;
        ReactiveSystem::from_spectrum(spectrum, statistics, total_particles, temperature)
    }

    pub fn from_spectrum(
        spectrum: JointSpectrum,
        statistics: Statistics,
        total_particles: f64,
        temperature: f64,
    ) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        if !(total_particles >= 0.0 && total_particles.is_finite()) {
            return Err(Error::Config(format!(
                "total particle number must be finite and non-negative, got {total_particles}"
            )));
        }
        if statistics == Statistics::Fermi && total_particles >= spectrum.capacity() {
            return Err(Error::Saturation(format!(
                "N = {total_particles} reaches the Fermi-Dirac capacity {}",
                spectrum.capacity()
            )));
        }
        Ok(ReactiveSystem {
            spectrum,
            statistics,
            total_particles,
            temperature,
        })
    }

    pub fn spectrum(&self) -> &JointSpectrum {
        &self.spectrum
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn total_particles(&self) -> f64 {
        self.total_particles
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.temperature
    }

    pub fn with_statistics(&self, statistics: Statistics) -> Result<Self> {
        ReactiveSystem::from_spectrum(
            self.spectrum.clone(),
            statistics,
            self.total_particles,
            self.temperature,
        )
    }

    pub fn with_total_particles(&self, total_particles: f64) -> Result<Self> {
        ReactiveSystem::from_spectrum(
            self.spectrum.clone(),
            self.statistics,
            total_particles,
            self.temperature,
        )
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        ReactiveSystem::from_spectrum(
            self.spectrum.clone(),
            self.statistics,
            self.total_particles,
            temperature,
        )
    }

    /// The particle number as an integer, for enumeration and sampling.
    pub fn integer_particles(&self) -> Result<u32> {
        let n = self.total_particles;
        if n.fract() != 0.0 || n > f64::from(u32::MAX) {
            return Err(Error::Config(format!(
                "this computation needs an integer particle number, got {n}"
            )));
        }
        Ok(n as u32)
    }
}

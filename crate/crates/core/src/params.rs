use crate::error::{Error, Result};

/// Physical and protocol parameters of one setup.
///
/// Parties `1..=N` feed the first `N` ports of an `M`-port multiport node.
/// Every party except the first carries the same polarization rotation
/// `theta` and phase offset `phi` relative to party 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupParams {
    pub num_parties: usize,
    pub num_ports: usize,
    /// Weight of the vacuum branch of each party's qubit-photon state.
    pub vacuum_weight: f64,
    /// Single-link transmittance.
    pub transmittance: f64,
    pub polarization_misalignment: f64,
    pub phase_misalignment: f64,
    pub dark_count_prob: f64,
}

impl SetupParams {
    /// Setup without misalignment or dark counts.
    pub fn ideal(num_parties: usize, num_ports: usize, vacuum_weight: f64, transmittance: f64) -> Self {
        Self {
            num_parties,
            num_ports,
            vacuum_weight,
            transmittance,
            polarization_misalignment: 0.0,
            phase_misalignment: 0.0,
            dark_count_prob: 0.0,
        }
    }

    /// Same misalignment angle for polarization and phase.
    pub fn with_misalignment(mut self, angle: f64) -> Self {
        self.polarization_misalignment = angle;
        self.phase_misalignment = angle;
        self
    }

    pub fn with_dark_counts(mut self, p_d: f64) -> Self {
        self.dark_count_prob = p_d;
        self
    }

    pub fn with_vacuum_weight(mut self, q: f64) -> Self {
        self.vacuum_weight = q;
        self
    }

    pub fn with_loss_db(mut self, loss_db: f64) -> Self {
        self.transmittance = loss_db_to_transmittance(loss_db);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_parties < 2 {
            return Err(Error::InvalidParams(format!("need at least 2 parties, got {}", self.num_parties)));
        }
        if self.num_ports < self.num_parties {
            return Err(Error::InvalidParams(format!(
                "multiport needs at least as many ports as parties ({} < {})",
                self.num_ports, self.num_parties
            )));
        }
        for (name, v) in [
            ("vacuum weight q", self.vacuum_weight),
            ("transmittance t", self.transmittance),
            ("dark count probability", self.dark_count_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !self.polarization_misalignment.is_finite() || !self.phase_misalignment.is_finite() {
            return Err(Error::InvalidParams("misalignment angles must be finite".into()));
        }
        Ok(())
    }
}

/// Angle whose squared sine is `fraction`; a "2% misalignment" is
/// `misalignment_angle(0.02)`.
pub fn misalignment_angle(fraction: f64) -> f64 {
    fraction.sqrt().asin()
}

/// `t = 10^(-dB/10)`.
pub fn loss_db_to_transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn transmittance_to_loss_db(t: f64) -> f64 {
    -10.0 * t.log10()
}

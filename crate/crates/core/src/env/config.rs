use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simulator constants. Missing fields in a JSON document take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub n_sensors: usize,
    pub n_targets: usize,
    pub arena_width: f64,
    pub arena_height: f64,
    pub rho_max: f64,
    /// Half-angle of the sensing wedge, degrees.
    pub alpha_max: f64,
    /// Rotation per primitive action, degrees.
    pub rotation_step: f64,
    /// Target speeds are drawn from `[0, max_target_speed]` at spawn.
    pub max_target_speed: f64,
    /// Standard deviation of the per-step heading perturbation, degrees.
    pub heading_noise_sigma: f64,
    pub episode_length: usize,
    /// Weight of the rotation cost in the executor reward.
    pub cost_weight: f64,
    /// Primitive steps per coordinator decision.
    pub macro_interval: usize,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_sensors: 4,
            n_targets: 5,
            arena_width: 1000.0,
            arena_height: 1000.0,
            rho_max: 400.0,
            alpha_max: 45.0,
            rotation_step: 5.0,
            max_target_speed: 10.0,
            heading_noise_sigma: 15.0,
            episode_length: 100,
            cost_weight: 0.01,
            macro_interval: 10,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn with_counts(self, n_sensors: usize, n_targets: usize) -> Self {
        Self {
            n_sensors,
            n_targets,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_sensors == 0 || self.n_targets == 0 {
            return bad("n_sensors and n_targets must be at least 1");
        }
        if !(self.arena_width > 0.0 && self.arena_height > 0.0)
            || !self.arena_width.is_finite()
            || !self.arena_height.is_finite()
        {
            return bad("arena must have positive finite area");
        }
        if !(self.rho_max > 0.0) {
            return bad("rho_max must be positive");
        }
        if !(self.alpha_max > 0.0 && self.alpha_max <= 180.0) {
            return bad("alpha_max must lie in (0, 180]");
        }
        if !(self.rotation_step > 0.0) {
            return bad("rotation_step must be positive");
        }
        if !(self.max_target_speed >= 0.0) || !(self.heading_noise_sigma >= 0.0) {
            return bad("target speed and heading noise must be non-negative");
        }
        if self.episode_length == 0 || self.macro_interval == 0 {
            return bad("episode_length and macro_interval must be at least 1");
        }
        if !(self.cost_weight >= 0.0) {
            return bad("cost_weight must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: EnvConfig = serde_json::from_str(r#"{"n_sensors": 2, "n_targets": 3}"#).unwrap();
        assert_eq!(cfg.n_sensors, 2);
        assert_eq!(cfg.rho_max, 400.0);
        assert!(serde_json::from_str::<EnvConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        assert!(EnvConfig::default().validate().is_ok());
        for bad in [
            EnvConfig { n_sensors: 0, ..Default::default() },
            EnvConfig { episode_length: 0, ..Default::default() },
            EnvConfig { macro_interval: 0, ..Default::default() },
            EnvConfig { rotation_step: 0.0, ..Default::default() },
            EnvConfig { cost_weight: -1.0, ..Default::default() },
            EnvConfig { arena_height: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}

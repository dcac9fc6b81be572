use serde::{Deserialize, Serialize};

/// Static protocol configuration shared by all processes of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Replicas per partition. Equals the number of sites.
    pub r: usize,
    /// Tolerated failures per partition, `1 <= f <= (r - 1) / 2`.
    pub f: usize,
    /// Number of state partitions.
    pub partitions: u16,
    /// Carry freshly generated promises on MProposeAck/MCommit.
    pub piggyback_promises: bool,
    /// Send MBump to sibling coordfor partitions on MPropose.
    pub enable_bump: bool,
    /// Cadence of the periodic MPromises broadcast, simulated milliseconds.
    pub promise_period_ms: u64,
    /// Idle time after which pending commands are re-sent / recovered,
    /// simulated milliseconds. Defaults to 5x the topology's max RTT.
    pub recovery_timeout_ms: Option<u64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            r: 3,
            f: 1,
            partitions: 1,
            piggyback_promises: true,
            enable_bump: true,
            promise_period_ms: 5,
            recovery_timeout_ms: None,
        }
    }
}

impl Config {
    pub fn new(r: usize, f: usize, partitions: u16) -> Result<Self, ConfigError> {
        let config = Self { r, f, partitions, ..Self::default() };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.r < 3 {
            return Err(ConfigError::TooFewReplicas { r: self.r });
        }
        let max_f = (self.r - 1) / 2;
        if self.f < 1 || self.f > max_f {
            return Err(ConfigError::InvalidF { r: self.r, f: self.f, max_f });
        }
        if self.partitions == 0 {
            return Err(ConfigError::NoPartitions);
        }
        if self.promise_period_ms == 0 {
            return Err(ConfigError::ZeroPromisePeriod);
        }
        Ok(())
    }

    /// `floor(r/2) + f` processes propose a timestamp, coordinator included.
    pub fn fast_quorum_size(&self) -> usize {
        self.r / 2 + self.f
    }

    /// Slow path persists the timestamp at `f + 1` processes.
    pub fn slow_quorum_size(&self) -> usize {
        self.f + 1
    }

    /// Recovery gathers `r - f` acknowledgements.
    pub fn recovery_quorum_size(&self) -> usize {
        self.r - self.f
    }

    pub fn majority(&self) -> usize {
        self.r / 2 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("r = {r} is below the minimum of 3")]
    TooFewReplicas { r: usize },
    #[error("f = {f} outside 1..={max_f} for r = {r}")]
    InvalidF { r: usize, f: usize, max_f: usize },
    #[error("at least one partition is required")]
    NoPartitions,
    #[error("promise period must be positive")]
    ZeroPromisePeriod,
}

use thiserror::Error;

pub type Result<T, E = GameError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("{name} = {value} is out of range: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("vendors are co-located: 1 - a - b = {gap:e} is below the separation floor")]
    CoLocation { gap: f64 },

    #[error("{param} is not identifiable from the observation: {reason}")]
    Unidentifiable {
        param: &'static str,
        reason: &'static str,
    },

    #[error("observation is inconsistent with the model: {0}")]
    InconsistentObservation(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),
}

impl GameError {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        GameError::Domain {
            name,
            value,
            reason,
        }
    }

    /// True for errors caused by user-supplied configuration or parameters.
    pub fn is_config(&self) -> bool {
        matches!(self, GameError::Config(_) | GameError::Domain { .. })
    }
}

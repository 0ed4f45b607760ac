use std::fmt;

/// Errors raised anywhere in the toolkit.
///
/// The CLI maps each variant family onto a process exit code; see
/// [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric error in {component}: {detail}")]
    Numeric {
        component: Component,
        detail: String,
    },

    #[error("insufficient data: need {needed} transitions, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("coverage violation at step {step}: behavior probability is zero where target probability is {pi_prob}")]
    Coverage { step: usize, pi_prob: f64 },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("output already exists: {0} (pass --overwrite to replace)")]
    OutputExists(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {detail}")]
    Format { path: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Names the learned object or term a numeric failure originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Optimizer,
    RewardModel,
    QHead,
    VHead,
    ModelQ,
    ModelV,
    TargetCritic,
    Critic,
    Actor,
    Environment,
    Estimator,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Component::Optimizer => "optimizer",
            Component::RewardModel => "reward model",
            Component::QHead => "model Q head",
            Component::VHead => "model V head",
            Component::ModelQ => "model Q estimate",
            Component::ModelV => "model V estimate",
            Component::TargetCritic => "target critic",
            Component::Critic => "critic",
            Component::Actor => "actor",
            Component::Environment => "environment",
            Component::Estimator => "estimator",
        };
        f.write_str(name)
    }
}

impl Error {
    pub fn numeric(component: Component, detail: impl Into<String>) -> Self {
        Error::Numeric {
            component,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Usage(_)
            | Error::Coverage { .. }
            | Error::InsufficientData { .. }
            | Error::Alignment(_) => 2,
            Error::Numeric { .. } => 3,
            Error::Io { .. } | Error::OutputExists(_) | Error::Format { .. } => 4,
        }
    }

    /// Prefixes a numeric error with the environment step it surfaced at.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::Numeric { component, detail } => Error::Numeric {
                component,
                detail: format!("step {step}: {detail}"),
            },
            other => other,
        }
    }
}

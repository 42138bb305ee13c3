use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input table is empty")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("requested observation rate is infeasible; maximum feasible rate is {max_feasible:.6}")]
    InfeasibleSparsity { max_feasible: f64 },

    #[error("item {0:?} has no topic assignment")]
    MissingTopic(String),

    #[error("no propensity available for user {user}, topic {topic}")]
    MissingPropensity { user: usize, topic: usize },

    #[error("observation labels are all positive or all negative")]
    DegenerateLabels,

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate})")]
    Divergence { epoch: usize, learning_rate: f64 },

    #[error("ridge system still singular after {retries} jitter retries")]
    SingularSystem { retries: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unrecognized header {0:?}")]
    Schema(String),

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("table failed validation: {0}")]
    Validation(String),

    #[error("no user has two or more rankable topics")]
    NoRankableUsers,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

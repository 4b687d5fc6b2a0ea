use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("unknown recipe `{id}`; valid ids: {valid}")]
    UnknownRecipe { id: String, valid: String },

    #[error("override `{key}` is not adjustable for {recipe}; allowed keys: {allowed}")]
    Override { recipe: String, key: String, allowed: String },

    #[error(transparent)]
    Soma(#[from] soma::SomaError),

    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

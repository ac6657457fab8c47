use std::fmt;

/// Process-level failure carrying the CLI exit code contract.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// Bad or inconsistent configuration, unreadable inputs, busy port. Exit 2.
    #[error("configuration error: {0:#}")]
    Config(anyhow::Error),
    /// Failure after the run started. Exit 3.
    #[error("runtime error: {0:#}")]
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn config(msg: impl fmt::Display + fmt::Debug + Send + Sync + 'static) -> Self {
        Failure::Config(anyhow::Error::msg(msg))
    }

    pub fn runtime(msg: impl fmt::Display + fmt::Debug + Send + Sync + 'static) -> Self {
        Failure::Runtime(anyhow::Error::msg(msg))
    }
}

pub type Result<T, E = Failure> = std::result::Result<T, E>;

/// Tags an error as a configuration failure.
pub trait ConfigContext<T> {
    fn config_err(self) -> Result<T>;
    fn runtime_err(self) -> Result<T>;
}

impl<T, E> ConfigContext<T> for std::result::Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn config_err(self) -> Result<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime_err(self) -> Result<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

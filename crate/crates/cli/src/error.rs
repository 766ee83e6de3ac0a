use cel_core::ValidationReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// Unreadable or malformed input, with its position when known.
    #[error("{0}")]
    Input(String),

    #[error("metric axioms violated: {0}")]
    Axiom(Box<ValidationReport>),

    #[error(transparent)]
    Core(cel_core::Error),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// Prefixes input errors with where they came from.
    pub fn context(self, origin: String) -> Self {
        match self {
            CliError::Input(msg) => CliError::Input(format!("{origin}: {msg}")),
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(cel_core::Error::Parameter { .. }) => 1,
            CliError::Core(e) if e.is_assertion() => 3,
            CliError::Input(_) | CliError::Axiom(_) | CliError::Core(_) => 2,
        }
    }
}

impl From<cel_core::Error> for CliError {
    fn from(e: cel_core::Error) -> Self {
        match e {
            cel_core::Error::Axiom(report) => CliError::Axiom(report),
            cel_core::Error::Structural(msg) => CliError::Input(msg),
            other => CliError::Core(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let assertion = cel_core::Error::Assertion {
            what: "x",
            value: 1.0,
            bound: 0.0,
            witness: vec![],
        };
        assert_eq!(CliError::from(assertion).exit_code(), 3);
        let outside = cel_core::Error::OutsideRadius { measured: 1.0, required: 0.5 };
        assert_eq!(CliError::from(outside).exit_code(), 2);
        assert_eq!(CliError::from(cel_core::Error::Structural("s".into())).exit_code(), 2);
        assert_eq!(CliError::usage("u").exit_code(), 1);
    }
}

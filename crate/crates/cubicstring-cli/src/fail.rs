use std::fmt;

use cubicstring::Error;

/// Command failure with its exit code: usage 1, numeric 2, validation 3.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(String),
    Validation(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numeric(_) => 2,
            Failure::Validation(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
            Failure::Validation(m) => write!(f, "validation failure: {m}"),
        }
    }
}

fn class(e: &Error) -> fn(String) -> Failure {
    match e {
        Error::Stage { source, .. } | Error::AtNode { source, .. } => class(source),
        Error::InvalidInput(_) | Error::UnknownIdentity(_) | Error::Io(_) => Failure::Usage,
        Error::Inadmissible(_) | Error::DegenerateTheta(_) | Error::Json(_) => Failure::Validation,
        _ => Failure::Numeric,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        class(&e)(e.to_string())
    }
}

use qtw_core::Error;

/// Invalid settings detected by the front end itself.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Training stopped on a non-finite loss or gradient.
#[derive(Debug)]
pub struct Diverged(pub String);

impl std::fmt::Display for Diverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training diverged: {}", self.0)
    }
}

impl std::error::Error for Diverged {}

pub const CONFIG: i32 = 2;
pub const IO: i32 = 3;
pub const DIVERGENCE: i32 = 4;
pub const DIGEST: i32 = 5;

/// Maps an error chain onto the documented exit codes.
pub fn code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return CONFIG;
        }
        if cause.is::<Diverged>() {
            return DIVERGENCE;
        }
        if cause.is::<std::io::Error>() {
            return IO;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::Domain(_) | Error::Shape(_) => CONFIG,
                Error::Io { .. } | Error::Format { .. } | Error::Json(_) => IO,
                Error::Divergence { .. } | Error::Integration { .. } | Error::Singular(_) => DIVERGENCE,
                Error::Digest(_) => DIGEST,
            };
        }
    }
    1
}

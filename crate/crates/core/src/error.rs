use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A non-finite value appeared where a finite one is required.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Scene generation gave up before placing every vehicle.
    #[error("placed {placed} of {requested} vehicles before exhausting retries")]
    Placement { placed: usize, requested: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! arg_err {
    ($($t:tt)*) => {
        $crate::Error::Argument(alloc::format!($($t)*))
    };
}

macro_rules! num_err {
    ($($t:tt)*) => {
        $crate::Error::Numeric(alloc::format!($($t)*))
    };
}

pub(crate) use arg_err;
pub(crate) use num_err;

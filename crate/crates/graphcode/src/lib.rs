//! One-shot data gathering in noisy broadcast networks.
//!
//! A sink must collect one self-information bit from every node of a
//! directed network whose links are binary symmetric or binary erasure
//! channels, one broadcast per time slot. This crate implements three
//! graph-code gathering schemes (tree relaying with block codes on
//! arbitrary graphs, cell-partitioned local codes with backbone routing
//! on geometric graphs, and adjacency-parity codes with Gaussian
//! elimination decoding on extended Erdős–Rényi graphs) plus a naive
//! repetition baseline. Every scheme reports the sink's estimate together
//! with an exact broadcast count, and the [`bounds`] module evaluates the
//! matching closed-form upper and lower bounds so Monte Carlo results can
//! be checked against them.
//!
//! The [`harness`] module drives seeded, reproducible experiments
//! (optionally in parallel with the `parallel` feature) and emits CSV or
//! JSON reports.

pub mod bounds;
pub mod channels;
pub mod codes;
pub mod gf2;
pub mod graphs;
pub mod harness;
pub mod schemes;

/// Errors surfaced by generators, schemes and the experiment harness.
#[derive(Debug)]
pub enum Error {
    /// A parameter is outside its valid range, or a scheme was pointed at
    /// an incompatible topology or channel.
    Input(String),
    /// The request is valid but exceeds what this implementation can do
    /// (e.g. exhaustive ML decoding past its block-size cap). The message
    /// says how to get back in range.
    Capability(String),
    /// The sink is not reachable from every node; carries the offenders.
    Disconnected { unreachable: Vec<usize> },
    Io(std::io::Error),
    Parse(String),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::Input(msg) => write!(f, "invalid input: {msg}"),
            Error::Capability(msg) => write!(f, "capability exceeded: {msg}"),
            Error::Disconnected { unreachable } => {
                write!(f, "sink unreachable from nodes {unreachable:?}")
            }
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

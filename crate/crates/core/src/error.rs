use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Library-wide error type. `Cap`-class errors signal that an enumeration
/// bound was exceeded rather than a malformed input; the CLI maps the two
/// classes onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("carrier mismatch: {0}")]
    CarrierMismatch(String),
    #[error("malformed value: {0}")]
    Malformed(String),
    #[error("not a support: {0}")]
    NotASupport(String),
    #[error("arity mismatch for lifting {name}: expected {expected}, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown lifting {0}")]
    UnknownLifting(String),
    #[error("lifting {0} has no registered dual")]
    NoDual(String),
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("cap exceeded: {0}")]
    Cap(String),
    #[error("truncation instability: {0}")]
    Unstable(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Cap and truncation-instability errors get exit code 2 in the CLI.
    pub fn is_cap(&self) -> bool {
        matches!(self, Error::Cap(_) | Error::Unstable(_))
    }
}

/// Enumeration bounds. Every exhaustive search in the library is guarded by
/// one of these so that oversized inputs fail cleanly instead of hanging.
#[derive(Debug, Clone, Copy)]
pub struct Caps {
    /// Max carrier size for subset quantifier enumeration (2^n subsets).
    pub quantifier: usize,
    /// Max carrier size for minimal-support brute force.
    pub support: usize,
    /// Max number of positions in a constructed acceptance game.
    pub game_positions: usize,
    /// Max number of automaton states produced by a construction.
    pub states: usize,
    /// Max number of admissible-valuation candidates scanned per game position.
    pub moves: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            quantifier: 8,
            support: 12,
            game_positions: 2_000_000,
            states: 4096,
            moves: 4_000_000,
        }
    }
}

impl Caps {
    /// Scale every cap by `factor` (the CAK_CAPS environment hook).
    pub fn scaled(factor: usize) -> Self {
        let d = Caps::default();
        Caps {
            quantifier: d.quantifier.saturating_add(factor.saturating_sub(1)),
            support: d.support.saturating_mul(factor),
            game_positions: d.game_positions.saturating_mul(factor),
            states: d.states.saturating_mul(factor),
            moves: d.moves.saturating_mul(factor),
        }
    }
}

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid game instance: {}", format_violations(.0))]
    InvalidGame(Vec<Violation>),

    #[error("invalid strategy profile: {0}")]
    InvalidProfile(String),

    /// Exhaustive enumeration would visit more candidates than allowed.
    #[error("enumeration cap exceeded: {count} candidates > cap {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("root not bracketed on [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    Bracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
}

fn format_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

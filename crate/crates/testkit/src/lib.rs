//! Test support for partshap: a brute-force Shapley oracle in exact
//! arithmetic, seeded random games, and synthetic part datasets whose
//! correct explanations are known in advance.

pub mod games;
pub mod oracle;
pub mod synthetic;

pub use oracle::{oracle_shapley_permutation, MAX_ORACLE_PLAYERS};
pub use synthetic::{make_synthetic_dataset, SyntheticConfig, SyntheticDataset};

#[derive(Debug, thiserror::Error)]
pub enum TestkitError {
    #[error("the oracle handles 1 to 10 players, got {0}")]
    TooManyPlayers(usize),
    #[error("game values must be finite")]
    NonFinite,
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Configuration parsing, grid oracles, experiment drivers, validation suites
//! and report emission for the sampling library. The `garsamp` binary exposes
//! these through subcommands; see the repository README for usage.

pub mod config;
pub mod experiments;
pub mod expr;
pub mod oracle;
pub mod report;
pub mod verify;

/// Shipped example configurations, embedded so the experiment driver needs no
/// filesystem layout.
pub mod builtin {
    pub const EXAMPLE1: &str = include_str!("../configs/example1.json");
    pub const EXAMPLE2: &str = include_str!("../configs/example2.json");
    pub const EXAMPLE3: &str = include_str!("../configs/example3.json");

    pub fn by_id(id: u8) -> Option<&'static str> {
        match id {
            1 => Some(EXAMPLE1),
            2 => Some(EXAMPLE2),
            3 => Some(EXAMPLE3),
            _ => None,
        }
    }
}

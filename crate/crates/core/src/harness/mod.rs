//! Experiment orchestration: config files, sweeps over hidden units and
//! sample sizes, weight spectra, line fits, CSV outputs and run manifests.

pub mod commands;
pub mod config;
pub mod fit;
pub mod manifest;
pub mod sweep;

pub use commands::{run_command, Command, RunOutcome};
pub use config::{HiddenGrid, RunConfig, SweepConfig};
pub use fit::{linear_fit, top_share, weight_spectrum, LinearFit};
pub use manifest::{sha256_file, RunManifest};
pub use sweep::{
    minimal_from_records, sweep_hidden_units, sweep_sample_complexity, HiddenSweep, MinimalHidden, MinimalSamples,
    SampleSweep, SweepRecord,
};

use sha2::{Digest, Sha256};

/// Deterministic child seed: the first 8 bytes of
/// `sha256("{master}/{label}/{part}/{part}...")`, little-endian.
pub fn derive_seed(master: u64, label: &str, parts: &[u64]) -> u64 {
    let mut text = format!("{master}/{label}");
    for p in parts {
        text.push('/');
        text.push_str(&p.to_string());
    }
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

/// Field ratios enter seed derivation through their bit pattern.
pub(crate) fn ratio_key(h_over_j: f64) -> u64 {
    h_over_j.to_bits()
}

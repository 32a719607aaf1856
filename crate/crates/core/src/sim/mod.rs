//! Monte-Carlo link simulation: configuration, per-drop link runs, campaign
//! aggregation and file outputs.

pub mod campaign;
pub mod config;
pub mod metrics;

pub use campaign::{
    dump_iq, emit_channel_snapshot, run_campaign, run_drop, CampaignRow, CampaignTable, DropResult, Simulator,
    SnapshotReport, SweepPoint, WaveformResult, CSV_HEADER,
};
pub use config::{CampaignConfig, Csi, Equalizer, SnrReference};
pub use metrics::LinkStats;

/// Information bits per LDPC block; one rate-1/2 codeword fills this many
/// QPSK symbols.
pub const K_INFO: usize = 1024;

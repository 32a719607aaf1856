//! Campaign configuration, read from TOML.
//!
//! Every key is optional; missing keys take the baseline defaults below.
//!
//! ```toml
//! m = 512
//! n = 8
//! n_cp = 288
//! delta_f = 15e3
//! f_c = 24e9
//! waveforms = ["OFDM", "OTFDM"]
//! equalizer = "LMMSE"          # or "TD_EQ"
//! csi = "GENIE"                # or "ESTIMATED"
//! pilot_lambda = 4
//! pilot_width = 8
//! pilot_boost_db = 6.0
//! pilot_seed = 7
//! rms_ds_ns = 1000.0
//! max_speeds_kmh = [0, 100, 200, 300, 400, 500]
//! snrs_db = [6.0]
//! snr_reference = "data"       # or "body"
//! drops = 2000
//! master_seed = 1
//! output = "bler.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{DelayOverflow, TdlOptions};
use crate::chest::{build_pilot_layout, CombPilots, DopplerWindow, PilotLayout};
use crate::error::{Error, Result};
use crate::grid::FrameConfig;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Equalizer {
    /// Per-replica division followed by Doppler despreading.
    TdEq,
    Lmmse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Csi {
    Genie,
    Estimated,
}

/// What the configured SNR is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrReference {
    /// Mean power of the transmitted body, boosted pilots included.
    Body,
    /// Unit-power data symbols: noise per resource element is `1 / SNR`.
    Data,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub m: usize,
    pub n: usize,
    pub n_cp: usize,
    /// Large-symbol subcarrier spacing (Hz).
    pub delta_f: f64,
    pub f_c: f64,
    pub waveforms: Vec<Waveform>,
    /// OTFDM Doppler despreading. OFDM always uses one-tap dot division.
    pub equalizer: Equalizer,
    pub csi: Csi,
    pub pilot_lambda: usize,
    pub pilot_width: usize,
    pub pilot_boost_db: f64,
    pub pilot_seed: u64,
    /// Doppler bins kept on each side of the OTFDM pilot. `None` sizes the
    /// window from the largest speed of the sweep point.
    pub doppler_bins: Option<usize>,
    pub rms_ds_ns: f64,
    pub max_speeds_kmh: Vec<f64>,
    pub snrs_db: Vec<f64>,
    pub snr_reference: SnrReference,
    pub symmetric_doppler: bool,
    pub delay_overflow: DelayOverflow,
    /// CP of each short OFDM symbol; defaults to `n_cp / n` so the frame
    /// length matches the single-CP waveforms.
    pub short_cp: Option<usize>,
    pub ldpc_seed: u64,
    pub max_iter: usize,
    pub drops: usize,
    pub master_seed: u64,
    pub output: PathBuf,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Fill the `wall_ms` column. Timings vary between runs, so the CSV is
    /// only reproducible with this off.
    pub timing: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            m: 512,
            n: 8,
            n_cp: 288,
            delta_f: 15e3,
            f_c: 24e9,
            waveforms: vec![Waveform::OfdmLarge, Waveform::Otfdm],
            equalizer: Equalizer::Lmmse,
            csi: Csi::Genie,
            pilot_lambda: 4,
            pilot_width: 8,
            pilot_boost_db: 6.0,
            pilot_seed: 7,
            doppler_bins: None,
            rms_ds_ns: 1000.0,
            max_speeds_kmh: vec![0.0, 100.0, 200.0, 300.0, 400.0, 500.0],
            snrs_db: vec![6.0],
            snr_reference: SnrReference::Data,
            symmetric_doppler: false,
            delay_overflow: DelayOverflow::Clip,
            short_cp: None,
            ldpc_seed: 1,
            max_iter: crate::coding::DEFAULT_MAX_ITER,
            drops: 2000,
            master_seed: 1,
            output: PathBuf::from("bler.csv"),
            threads: None,
            timing: false,
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all serializable")
    }

    pub fn frame(&self) -> Result<FrameConfig> {
        FrameConfig::new(self.m, self.n, self.n_cp, self.delta_f, self.f_c)
    }

    pub fn layout(&self) -> Result<PilotLayout> {
        build_pilot_layout(self.pilot_lambda, self.pilot_width, self.pilot_boost_db, &self.frame()?, self.pilot_seed)
    }

    /// Comb pilots of the large OFDM symbol, at the same density and total
    /// power as the OTFDM pilots.
    pub fn ofdm_pilots(&self) -> Result<CombPilots> {
        CombPilots::new(self.pilot_lambda, self.m * self.n, self.pilot_boost_db, self.pilot_seed)
    }

    /// Comb pilots of one short OFDM symbol.
    pub fn short_pilots(&self) -> Result<CombPilots> {
        CombPilots::new(self.pilot_lambda, self.m, self.pilot_boost_db, self.pilot_seed)
    }

    pub fn short_cp_len(&self) -> usize {
        self.short_cp.unwrap_or(self.n_cp / self.n.max(1))
    }

    pub fn tdl_options(&self) -> TdlOptions {
        TdlOptions {
            symmetric_doppler: self.symmetric_doppler,
            delay_overflow: self.delay_overflow,
        }
    }

    pub fn rms_ds(&self) -> f64 {
        self.rms_ds_ns * 1e-9
    }

    pub fn doppler_window(&self, max_abs_nu: f64, frame: &FrameConfig) -> DopplerWindow {
        match self.doppler_bins {
            Some(b) => DopplerWindow {
                below: if self.symmetric_doppler { b } else { 0 },
                above: b,
            },
            None => DopplerWindow::covering(max_abs_nu, self.symmetric_doppler, frame),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame()?;
        if self.waveforms.is_empty() {
            return Err(Error::Config("waveform list is empty".into()));
        }
        if self.waveforms.contains(&Waveform::OtfsDzt) {
            return Err(Error::Config("OTFS has no receiver in this simulator".into()));
        }
        if self.max_speeds_kmh.is_empty() || self.snrs_db.is_empty() {
            return Err(Error::Config("speed and SNR sweeps must be non-empty".into()));
        }
        if self.max_speeds_kmh.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("speeds must be finite and non-negative".into()));
        }
        if self.snrs_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("SNRs must be finite".into()));
        }
        if self.drops == 0 {
            return Err(Error::Config("drops must be at least 1".into()));
        }
        if !(self.rms_ds_ns.is_finite() && self.rms_ds_ns > 0.0) {
            return Err(Error::Config("rms_ds_ns must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let layout = self.layout()?;
        let block_symbols = self.block_symbols();
        if layout.capacity() < block_symbols {
            return Err(Error::Config(format!(
                "OTFDM data capacity {} cannot hold one {block_symbols}-symbol codeword",
                layout.capacity()
            )));
        }
        if self.waveforms.contains(&Waveform::OfdmLarge) {
            self.ofdm_pilots()?;
        }
        if self.waveforms.contains(&Waveform::OfdmShort) {
            self.short_pilots()?;
            if self.short_cp_len() > self.m {
                return Err(Error::Config("short CP longer than the short symbol".into()));
            }
        }
        Ok(())
    }

    /// QPSK symbols per codeword (rate 1/2, k = 1024).
    pub fn block_symbols(&self) -> usize {
        crate::sim::K_INFO
    }
}

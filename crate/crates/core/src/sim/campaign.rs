//! Paired Monte-Carlo drops and the BLER campaign.
//!
//! Drop `d` draws everything from `derive(master_seed, d)`: the TDL-C taps,
//! the information bits and the noise. The same draw is reused by every
//! waveform and every sweep point, so the comparison is paired and curves
//! over speed or SNR use common random numbers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{
    add_awgn, apply_channel, build_tdlc_paths_with, doppler_shift, kmh_to_mps, propagate, strip_cps, NoiseSpec,
    PathSet,
};
use crate::chest::{
    estimate_channel_with, map_data, overhead_report, write_channel_dump, ChannelBounds, CombPilots, EstimatorOptions,
    PilotLayout,
};
use crate::coding::{ldpc_build, qpsk_llr_biased, qpsk_map, random_bits, LdpcCode};
use crate::error::{Error, Result};
use crate::grid::{self, ComplexGrid, FrameConfig};
use crate::rng::{self, stream};
use crate::rx::{
    analytic_dot_channel, lmmse_despread, ofdm_mean_response, ofdm_one_tap_equalize, otfdm_front_end,
    td_equalize_despread, DotProductChannel, EqualizedGrid, OneTap,
};
use crate::sim::config::{CampaignConfig, Csi, Equalizer, SnrReference};
use crate::sim::metrics::LinkStats;
use crate::sim::K_INFO;
use crate::waveform::{ofdm_modulate_large, ofdm_modulate_short, otfdm_modulate, TxFrame, Waveform};

pub const CSV_HEADER: &str = "waveform,max_speed_kmh,snr_db,drops,block_errors,bler,evm_db,nmse_db,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub max_speed_kmh: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformResult {
    pub waveform: Waveform,
    pub stats: LinkStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    /// `derive(master_seed, drop_index)`.
    pub seed: u64,
    pub results: Vec<WaveformResult>,
}

/// Soft receiver output on the data symbols, in transmission order.
struct Soft {
    x_hat: Vec<Complex64>,
    gain: Vec<f64>,
    noise_var: Vec<f64>,
    channel_error: f64,
    channel_energy: f64,
}

impl Soft {
    fn from_grid(eq: &EqualizedGrid, positions: impl Iterator<Item = (usize, usize)>) -> Self {
        let rows = eq.x_hat.rows();
        let mut s = Soft {
            x_hat: Vec::new(),
            gain: Vec::new(),
            noise_var: Vec::new(),
            channel_error: 0.0,
            channel_energy: 0.0,
        };
        for (i, j) in positions {
            s.x_hat.push(eq.x_hat[(i, j)]);
            s.gain.push(eq.gain[i + j * rows]);
            s.noise_var.push(eq.noise_var[i + j * rows]);
        }
        s
    }

    fn extend(&mut self, other: Soft) {
        self.x_hat.extend(other.x_hat);
        self.gain.extend(other.gain);
        self.noise_var.extend(other.noise_var);
        self.channel_error += other.channel_error;
        self.channel_energy += other.channel_energy;
    }
}

fn sum_sq_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// A validated configuration with its code and pilot layouts built once.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: CampaignConfig,
    frame: FrameConfig,
    layout: PilotLayout,
    ofdm_pilots: CombPilots,
    short_pilots: CombPilots,
    code: LdpcCode,
    blocks: usize,
}

impl Simulator {
    pub fn new(cfg: CampaignConfig) -> Result<Self> {
        cfg.validate()?;
        let frame = cfg.frame()?;
        let layout = cfg.layout()?;
        let ofdm_pilots = cfg.ofdm_pilots()?;
        let short_pilots = cfg.short_pilots()?;
        let code = ldpc_build(K_INFO, 0.5, cfg.ldpc_seed)?;
        let capacity = cfg
            .waveforms
            .iter()
            .map(|w| match w {
                Waveform::Otfdm => layout.capacity(),
                Waveform::OfdmLarge => ofdm_pilots.capacity(),
                _ => short_pilots.capacity() * cfg.n,
            })
            .min()
            .expect("validated non-empty");
        let blocks = capacity / (code.n() / 2);
        if blocks == 0 {
            return Err(Error::Config(format!("data capacity {capacity} holds no codeword")));
        }
        Ok(Self {
            cfg,
            frame,
            layout,
            ofdm_pilots,
            short_pilots,
            code,
            blocks,
        })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.cfg
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }

    /// LDPC blocks per frame, identical for every waveform of the run.
    pub fn blocks_per_frame(&self) -> usize {
        self.blocks
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        self.cfg
            .max_speeds_kmh
            .iter()
            .flat_map(|&v| {
                self.cfg.snrs_db.iter().map(move |&s| SweepPoint {
                    max_speed_kmh: v,
                    snr_db: s,
                })
            })
            .collect()
    }

    fn max_doppler(&self, point: SweepPoint) -> f64 {
        doppler_shift(self.frame.f_c(), kmh_to_mps(point.max_speed_kmh))
    }

    /// Aborts with a diagnostic when the OTFDM pilot budgets do not cover the
    /// channel. The delay bound is the RMS delay spread.
    pub fn check_feasible(&self, point: SweepPoint) -> Result<()> {
        let bounds = ChannelBounds {
            max_tau: self.cfg.rms_ds(),
            max_abs_nu: self.max_doppler(point),
        };
        let r = overhead_report(&self.layout, bounds, &self.frame)?;
        if !r.feasible {
            return Err(Error::Infeasible(format!(
                "pilot budgets (delay {} samples, Doppler {} slots) do not cover the channel \
                 (delay {:.1} samples, Doppler {:.2} slots) at {} km/h",
                r.delay_budget_samples, r.doppler_budget_slots, r.required_delay, r.required_doppler, point.max_speed_kmh
            )));
        }
        Ok(())
    }

    pub fn drop_seed(&self, drop_index: u64) -> u64 {
        rng::derive(self.cfg.master_seed, drop_index)
    }

    pub fn paths(&self, point: SweepPoint, drop_index: u64) -> Result<PathSet> {
        let seed = rng::derive(self.drop_seed(drop_index), stream::CHANNEL);
        build_tdlc_paths_with(
            self.cfg.rms_ds(),
            kmh_to_mps(point.max_speed_kmh),
            &self.frame,
            seed,
            &self.cfg.tdl_options(),
        )
    }

    /// Information bits of every block, and the QPSK data symbols that carry
    /// them, for a given waveform capacity.
    fn payload(&self, drop_index: u64, capacity: usize) -> (Vec<Vec<u8>>, Vec<Complex64>) {
        let seed = self.drop_seed(drop_index);
        let bits_seed = rng::derive(seed, stream::DATA_BITS);
        let messages: Vec<Vec<u8>> = (0..self.blocks)
            .map(|b| random_bits(K_INFO, rng::derive(bits_seed, b as u64)))
            .collect();
        let mut coded = Vec::with_capacity(2 * capacity);
        for m in &messages {
            coded.extend(self.code.encode(m).expect("message length matches the code"));
        }
        // Spare symbols carry random filler that is not decoded.
        coded.extend(random_bits(2 * capacity - coded.len(), rng::derive(seed, stream::FILL)));
        let symbols = qpsk_map(&coded).expect("even bit count");
        (messages, symbols)
    }

    fn capacity(&self, waveform: Waveform) -> usize {
        match waveform {
            Waveform::Otfdm => self.layout.capacity(),
            Waveform::OfdmLarge => self.ofdm_pilots.capacity(),
            _ => self.short_pilots.capacity() * self.cfg.n,
        }
    }

    /// Transmit frame of one waveform for a data payload.
    pub fn transmit(&self, waveform: Waveform, data: &[Complex64]) -> Result<TxFrame> {
        let (m, n) = (self.frame.m(), self.frame.n());
        match waveform {
            Waveform::Otfdm => otfdm_modulate(&map_data(data, &self.layout)?, &self.frame, false),
            Waveform::OfdmLarge => {
                let tones = self.ofdm_pilots.map(data)?;
                ofdm_modulate_large(&ComplexGrid::devectorize(m, n, &tones)?, &self.frame)
            }
            Waveform::OfdmShort => {
                let per = self.short_pilots.capacity();
                if data.len() != per * n {
                    return Err(Error::shape(format!("{} data symbols", per * n), data.len()));
                }
                let mut x = ComplexGrid::zeros(m, n);
                for (j, chunk) in data.chunks(per).enumerate() {
                    x.column_mut(j).copy_from_slice(&self.short_pilots.map(chunk)?);
                }
                ofdm_modulate_short(&x, &self.frame, self.cfg.short_cp_len())
            }
            Waveform::OtfsDzt => Err(Error::Waveform("OTFS has no receiver in this simulator")),
        }
    }

    /// Transmit frame of `waveform` for drop `drop_index`.
    pub fn drop_frame(&self, waveform: Waveform, drop_index: u64) -> Result<TxFrame> {
        let (_, data) = self.payload(drop_index, self.capacity(waveform));
        self.transmit(waveform, &data)
    }

    fn noise(&self, frame: &TxFrame, snr_db: f64, drop_index: u64) -> NoiseSpec {
        let seed = rng::derive(self.drop_seed(drop_index), stream::NOISE);
        let power = match self.cfg.snr_reference {
            SnrReference::Body => frame.body_power(),
            SnrReference::Data => 1.0,
        };
        NoiseSpec::for_snr(power, snr_db, seed)
    }

    /// Noise variance the receiver assumes: thermal noise plus a Doppler
    /// term `P (pi nu_max T)^2 / c` for tones of `symbol_len` samples at the
    /// configured maximum speed. Plain OFDM uses the classic ICI factor
    /// `c = 3`. OTFDM uses `c = 1`, which matches the measured residual of
    /// the sub-symbol leakage that Doppler despreading no longer cancels.
    fn effective_sigma2(&self, frame: &TxFrame, sigma2: f64, point: SweepPoint, symbol_len: usize, c: f64) -> f64 {
        let x = std::f64::consts::PI * self.max_doppler(point) * symbol_len as f64 * self.frame.t_s();
        sigma2 + frame.body_power() * x * x / c
    }

    /// Received OTFDM tensor plus the true and receiver-side channels.
    fn otfdm_observe(
        &self,
        frame: &TxFrame,
        ps: &PathSet,
        point: SweepPoint,
        drop_index: u64,
    ) -> Result<(crate::rx::ExpandedRxTensor, DotProductChannel, DotProductChannel, f64)> {
        let noise = self.noise(frame, point.snr_db, drop_index);
        let y = add_awgn(&apply_channel(frame, ps, &self.frame)?, &noise);
        let ypp = otfdm_front_end(&y, &self.frame)?;
        let truth = analytic_dot_channel(ps, &self.frame);
        let used = match self.cfg.csi {
            Csi::Genie => truth.clone(),
            Csi::Estimated => {
                let opts = EstimatorOptions {
                    doppler_window: Some(self.cfg.doppler_window(self.max_doppler(point), &self.frame)),
                };
                estimate_channel_with(&ypp, &self.layout, &self.frame, &opts)?
            }
        };
        let sigma2 = self.effective_sigma2(frame, noise.sigma2, point, self.frame.m(), 1.0);
        Ok((ypp, truth, used, sigma2))
    }

    fn receive_otfdm(&self, frame: &TxFrame, ps: &PathSet, point: SweepPoint, drop_index: u64) -> Result<Soft> {
        let (ypp, truth, used, sigma2) = self.otfdm_observe(frame, ps, point, drop_index)?;
        let eq = match self.cfg.equalizer {
            Equalizer::TdEq => td_equalize_despread(&ypp, &used, sigma2)?,
            Equalizer::Lmmse => lmmse_despread(&ypp, &used, sigma2)?,
        };
        let mut soft = Soft::from_grid(&eq, self.layout.data_positions().into_iter());
        if self.cfg.csi == Csi::Estimated {
            soft.channel_error = sum_sq_diff(used.eta_slice(), truth.eta_slice());
            soft.channel_energy = grid::energy(truth.eta_slice());
        }
        Ok(soft)
    }

    fn receive_ofdm(&self, frame: &TxFrame, ps: &PathSet, point: SweepPoint, drop_index: u64) -> Result<Soft> {
        let noise = self.noise(frame, point.snr_db, drop_index);
        let y = add_awgn(&apply_channel(frame, ps, &self.frame)?, &noise);
        let tones = grid::unitary_dft(&y, false)?;
        let truth = ofdm_mean_response(ps, &self.frame, tones.len(), 0);
        let h = match self.cfg.csi {
            Csi::Genie => truth.clone(),
            Csi::Estimated => self.ofdm_pilots.estimate(&tones)?,
        };
        let len = tones.len();
        let eq = ofdm_one_tap_equalize(
            &ComplexGrid::from_col_major(len, 1, tones)?,
            &ComplexGrid::from_col_major(len, 1, h.clone())?,
            self.effective_sigma2(frame, noise.sigma2, point, len, 3.0),
            OneTap::DotDivision,
        )?;
        let mut soft = Soft::from_grid(&eq, self.ofdm_pilots.data_tones().into_iter().map(|t| (t, 0)));
        if self.cfg.csi == Csi::Estimated {
            soft.channel_error = sum_sq_diff(&h, &truth);
            soft.channel_energy = grid::energy(&truth);
        }
        Ok(soft)
    }

    fn receive_ofdm_short(&self, frame: &TxFrame, ps: &PathSet, point: SweepPoint, drop_index: u64) -> Result<Soft> {
        let noise = self.noise(frame, point.snr_db, drop_index);
        // Linear propagation: taps beyond the short CP cause real ISI.
        let rx = add_awgn(&propagate(frame, ps, &self.frame), &noise);
        let bodies = strip_cps(&rx, frame);
        let m = frame.symbol_len();
        let stride = m + frame.cp_len();
        let mut soft: Option<Soft> = None;
        for (s, body) in bodies.chunks(m).enumerate() {
            let tones = grid::unitary_dft(body, false)?;
            let truth = ofdm_mean_response(ps, &self.frame, m, s * stride);
            let h = match self.cfg.csi {
                Csi::Genie => truth.clone(),
                Csi::Estimated => self.short_pilots.estimate(&tones)?,
            };
            let eq = ofdm_one_tap_equalize(
                &ComplexGrid::from_col_major(m, 1, tones)?,
                &ComplexGrid::from_col_major(m, 1, h.clone())?,
                self.effective_sigma2(frame, noise.sigma2, point, m, 3.0),
                OneTap::DotDivision,
            )?;
            let mut part = Soft::from_grid(&eq, self.short_pilots.data_tones().into_iter().map(|t| (t, 0)));
            if self.cfg.csi == Csi::Estimated {
                part.channel_error = sum_sq_diff(&h, &truth);
                part.channel_energy = grid::energy(&truth);
            }
            match soft.as_mut() {
                Some(acc) => acc.extend(part),
                None => soft = Some(part),
            }
        }
        soft.ok_or(Error::EmptyTransform)
    }

    fn link(&self, waveform: Waveform, ps: &PathSet, point: SweepPoint, drop_index: u64) -> Result<LinkStats> {
        let start = self.cfg.timing.then(Instant::now);
        let (messages, data) = self.payload(drop_index, self.capacity(waveform));
        let frame = self.transmit(waveform, &data)?;
        let soft = match waveform {
            Waveform::Otfdm => self.receive_otfdm(&frame, ps, point, drop_index)?,
            Waveform::OfdmLarge => self.receive_ofdm(&frame, ps, point, drop_index)?,
            Waveform::OfdmShort => self.receive_ofdm_short(&frame, ps, point, drop_index)?,
            Waveform::OtfsDzt => return Err(Error::Waveform("OTFS has no receiver in this simulator")),
        };
        let mut stats = LinkStats {
            drops: 1,
            channel_error: soft.channel_error,
            channel_energy: soft.channel_energy,
            ..Default::default()
        };
        for (i, x) in data.iter().enumerate() {
            let (g, v) = (soft.gain[i], soft.noise_var[i]);
            let unbiased = if g > 0.0 && v.is_finite() {
                soft.x_hat[i] / g
            } else {
                Complex64::new(0.0, 0.0)
            };
            stats.symbol_error += (unbiased - x).norm_sqr();
            stats.symbol_energy += x.norm_sqr();
        }
        let per_block = self.code.n() / 2;
        for (b, msg) in messages.iter().enumerate() {
            let r = b * per_block..(b + 1) * per_block;
            let llr = qpsk_llr_biased(&soft.x_hat[r.clone()], &soft.gain[r.clone()], &soft.noise_var[r])?;
            let out = self.code.decode(&llr, self.cfg.max_iter)?;
            stats.blocks += 1;
            if out.message() != &msg[..] {
                stats.block_errors += 1;
            }
        }
        if let Some(t) = start {
            stats.wall_ns = t.elapsed().as_nanos().max(1);
        }
        Ok(stats)
    }

    /// One paired drop: the same paths, bits and noise seed for every
    /// waveform.
    pub fn run_drop(&self, point: SweepPoint, drop_index: u64) -> Result<DropResult> {
        self.check_feasible(point)?;
        let ps = self.paths(point, drop_index)?;
        let results = self
            .cfg
            .waveforms
            .iter()
            .map(|&w| {
                Ok(WaveformResult {
                    waveform: w,
                    stats: self.link(w, &ps, point, drop_index)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DropResult {
            seed: self.drop_seed(drop_index),
            results,
        })
    }

    /// All drops of one sweep point, merged in drop order.
    pub fn run_point(&self, point: SweepPoint) -> Result<Vec<WaveformResult>> {
        self.check_feasible(point)?;
        let drops: Vec<DropResult> = (0..self.cfg.drops as u64)
            .into_par_iter()
            .map(|d| self.run_drop(point, d))
            .collect::<Result<Vec<_>>>()?;
        let mut totals: Vec<WaveformResult> = self
            .cfg
            .waveforms
            .iter()
            .map(|&w| WaveformResult {
                waveform: w,
                stats: LinkStats::default(),
            })
            .collect();
        for d in drops {
            for (t, r) in totals.iter_mut().zip(d.results) {
                t.stats += r.stats;
            }
        }
        Ok(totals)
    }

    pub fn run_campaign(&self) -> Result<CampaignTable> {
        let work = || -> Result<CampaignTable> {
            let mut rows = Vec::new();
            for point in self.points() {
                for r in self.run_point(point)? {
                    rows.push(CampaignRow {
                        waveform: r.waveform,
                        point,
                        stats: r.stats,
                    });
                }
            }
            Ok(CampaignTable { rows })
        };
        match self.cfg.threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(work),
            None => work(),
        }
    }

    /// True and estimated OTFDM channels of drop 0 at the first sweep point.
    pub fn snapshot_channels(&self) -> Result<(DotProductChannel, DotProductChannel)> {
        if self.cfg.csi != Csi::Estimated {
            return Err(Error::Config("channel snapshot needs csi = \"ESTIMATED\"".into()));
        }
        let point = self.points()[0];
        self.check_feasible(point)?;
        let ps = self.paths(point, 0)?;
        let frame = self.drop_frame(Waveform::Otfdm, 0)?;
        let (_, truth, est, _) = self.otfdm_observe(&frame, &ps, point, 0)?;
        Ok((truth, est))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignRow {
    pub waveform: Waveform,
    pub point: SweepPoint,
    pub stats: LinkStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignTable {
    pub rows: Vec<CampaignRow>,
}

impl CampaignTable {
    pub fn get(&self, waveform: Waveform, max_speed_kmh: f64, snr_db: f64) -> Option<&CampaignRow> {
        self.rows.iter().find(|r| {
            r.waveform == waveform && r.point.max_speed_kmh == max_speed_kmh && r.point.snr_db == snr_db
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{:.6},{:.3},{},{}",
                r.waveform,
                r.point.max_speed_kmh,
                r.point.snr_db,
                r.stats.drops,
                r.stats.block_errors,
                r.stats.bler(),
                r.stats.evm_db(),
                opt(r.stats.nmse_db()),
                opt(r.stats.mean_wall_ms()),
            )
            .expect("writing to a String");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Runs one paired drop; builds the LDPC code on every call, so prefer
/// [`Simulator::run_drop`] in loops.
pub fn run_drop(config: &CampaignConfig, point: SweepPoint, drop_index: u64) -> Result<DropResult> {
    Simulator::new(config.clone())?.run_drop(point, drop_index)
}

pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignTable> {
    Simulator::new(config.clone())?.run_campaign()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotReport {
    pub truth_magnitude: PathBuf,
    pub truth_phase: PathBuf,
    pub estimate_magnitude: PathBuf,
    pub estimate_phase: PathBuf,
    /// Rows `M * N` (index `mN + n`) by columns `N` (replica `k`).
    pub rows: usize,
    pub cols: usize,
    pub nmse_db: f64,
}

/// Writes `|H_n[m, k]|` and its phase for the true and the estimated channel
/// of drop 0 at the first sweep point, using `master_seed`. The estimate is
/// formed even when the campaign itself runs with genie CSI.
pub fn emit_channel_snapshot(config: &CampaignConfig, master_seed: u64, out_dir: &Path) -> Result<SnapshotReport> {
    let mut cfg = config.clone();
    cfg.master_seed = master_seed;
    cfg.csi = Csi::Estimated;
    let sim = Simulator::new(cfg)?;
    let (truth, est) = sim.snapshot_channels()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let report = SnapshotReport {
        truth_magnitude: out_dir.join("truth_mag.txt"),
        truth_phase: out_dir.join("truth_phase.txt"),
        estimate_magnitude: out_dir.join("estimate_mag.txt"),
        estimate_phase: out_dir.join("estimate_phase.txt"),
        rows: truth.m() * truth.n(),
        cols: truth.n(),
        nmse_db: crate::sim::metrics::db(est.nmse(&truth)),
    };
    write_channel_dump(&truth, &report.truth_magnitude, &report.truth_phase)?;
    write_channel_dump(&est, &report.estimate_magnitude, &report.estimate_phase)?;
    Ok(report)
}

/// Writes the transmit samples of drop 0: the OTFDM frame, or the first
/// configured waveform's frame when OTFDM is not part of the run.
pub fn dump_iq(config: &CampaignConfig, path: &Path) -> Result<Waveform> {
    let sim = Simulator::new(config.clone())?;
    let waveform = if config.waveforms.contains(&Waveform::Otfdm) {
        Waveform::Otfdm
    } else {
        config.waveforms[0]
    };
    sim.drop_frame(waveform, 0)?.write_iq(path)?;
    Ok(waveform)
}

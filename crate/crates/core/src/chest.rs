//! Pilot layouts, pilot-aided channel estimation and the pilot overhead
//! calculator.
//!
//! OTFDM reserves `w` Doppler slots on every `lambda`-th sub-symbol
//! subcarrier. Slot 0 carries a boosted unit-modulus pilot and the remaining
//! `w - 1` slots are zero guards. The receiver reads the pilot slice across the
//! N Doppler replicas, optionally cleans it in the Doppler domain, and
//! interpolates across the large-tone grid to recover every `η[m, n, k]`.
//!
//! The OFDM baseline uses [`CombPilots`]: every `spacing`-th tone carries a
//! boosted pilot and the response is FFT-interpolated in between.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{self, ComplexGrid, FrameConfig};
use crate::rng;
use crate::rx::{DotProductChannel, ExpandedRxTensor, TensorStage};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn qpsk_sequence(count: usize, seed: u64) -> Vec<Complex64> {
    let mut r = rng::seeded(rng::derive(seed, rng::stream::PILOTS));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            let b: u8 = r.random_range(0..4);
            Complex64::new(if b & 1 == 0 { s } else { -s }, if b & 2 == 0 { s } else { -s })
        })
        .collect()
}

/// Linear power gain of a boost given in dB.
pub fn boost_gain(boost_db: f64) -> f64 {
    10f64.powf(boost_db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotLayout {
    lambda: usize,
    w: usize,
    boost_db: f64,
    pilot_seed: u64,
    m: usize,
    n: usize,
    pilot_subcarriers: Vec<usize>,
    /// Unit-modulus pilot symbol per pilot subcarrier.
    sequence: Vec<Complex64>,
}

/// Pilot layout with density `1 / lambda` and a `w`-slot Doppler reservation.
pub fn build_pilot_layout(lambda: usize, w: usize, boost_db: f64, cfg: &FrameConfig, seed: u64) -> Result<PilotLayout> {
    let (m, n) = (cfg.m(), cfg.n());
    if lambda == 0 || m % lambda != 0 {
        return Err(Error::Layout(format!("pilot period {lambda} does not divide M={m}")));
    }
    if w == 0 || w > n {
        return Err(Error::Layout(format!("pilot width {w} outside 1..={n}")));
    }
    if !boost_db.is_finite() {
        return Err(Error::Layout(format!("pilot boost {boost_db} dB is not finite")));
    }
    let pilot_subcarriers: Vec<usize> = (0..m).step_by(lambda).collect();
    let sequence = qpsk_sequence(pilot_subcarriers.len(), seed);
    Ok(PilotLayout {
        lambda,
        w,
        boost_db,
        pilot_seed: seed,
        m,
        n,
        pilot_subcarriers,
        sequence,
    })
}

impl PilotLayout {
    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn boost_db(&self) -> f64 {
        self.boost_db
    }

    pub fn pilot_seed(&self) -> u64 {
        self.pilot_seed
    }

    pub fn pilot_subcarriers(&self) -> &[usize] {
        &self.pilot_subcarriers
    }

    /// Pilot amplitude: the power of `w` pilots gathered on one element,
    /// times the boost.
    pub fn amplitude(&self) -> f64 {
        (self.w as f64 * boost_gain(self.boost_db)).sqrt()
    }

    /// Transmitted pilot value on the `i`-th pilot subcarrier.
    pub fn pilot_value(&self, i: usize) -> Complex64 {
        self.sequence[i] * self.amplitude()
    }

    pub fn is_reserved(&self, m: usize, n: usize) -> bool {
        m.is_multiple_of(self.lambda) && n < self.w
    }

    /// Data positions in transmission order: subcarrier-major, slot-minor.
    pub fn data_positions(&self) -> Vec<(usize, usize)> {
        (0..self.m)
            .flat_map(|m| (0..self.n).map(move |n| (m, n)))
            .filter(|&(m, n)| !self.is_reserved(m, n))
            .collect()
    }

    pub fn capacity(&self) -> usize {
        self.m * self.n - self.pilot_subcarriers.len() * self.w
    }

    pub fn pilot_energy(&self) -> f64 {
        self.pilot_subcarriers.len() as f64 * self.amplitude().powi(2)
    }

    /// Frame energy for unit-power data: data elements plus boosted pilots.
    pub fn energy_budget(&self) -> f64 {
        self.capacity() as f64 + self.pilot_energy()
    }

    fn check(&self, cfg: &FrameConfig) -> Result<()> {
        if (self.m, self.n) != (cfg.m(), cfg.n()) {
            return Err(Error::Layout(format!(
                "layout built for {}x{}, frame is {}x{}",
                self.m,
                self.n,
                cfg.m(),
                cfg.n()
            )));
        }
        Ok(())
    }
}

/// Writes pilots and zero guards into the reserved elements.
pub fn insert_pilots(x: &ComplexGrid, layout: &PilotLayout) -> Result<ComplexGrid> {
    x.expect_shape(layout.m, layout.n)?;
    let mut out = x.clone();
    for (i, &m) in layout.pilot_subcarriers.iter().enumerate() {
        out[(m, 0)] = layout.pilot_value(i);
        for n in 1..layout.w {
            out[(m, n)] = ZERO;
        }
    }
    Ok(out)
}

/// Places `data` on the free elements and inserts the pilots.
pub fn map_data(data: &[Complex64], layout: &PilotLayout) -> Result<ComplexGrid> {
    if data.len() != layout.capacity() {
        return Err(Error::shape(format!("{} data symbols", layout.capacity()), data.len()));
    }
    let mut x = ComplexGrid::zeros(layout.m, layout.n);
    for (&(m, n), &v) in layout.data_positions().iter().zip(data) {
        x[(m, n)] = v;
    }
    insert_pilots(&x, layout)
}

/// Band-limited interpolation of a uniformly sampled frequency response.
///
/// The samples go to the delay domain, are zero-padded at the high-delay end
/// and come back on a grid `factor` times denser. Causal responses whose
/// delay support fits in `samples.len()` bins are reproduced exactly.
pub fn fft_interpolate(samples: &[Complex64], factor: usize) -> Result<Vec<Complex64>> {
    if factor == 0 {
        return Err(Error::Config("interpolation factor must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::EmptyTransform);
    }
    let len = samples.len();
    let mut delay = grid::unitary_dft(samples, true)?;
    delay.resize(len * factor, ZERO);
    grid::unitary_dft_in_place(&mut delay, false)?;
    let scale = (factor as f64).sqrt();
    delay.iter_mut().for_each(|z| *z *= scale);
    Ok(delay)
}

/// Doppler-domain cleaning of the per-replica pilot observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DopplerWindow {
    /// Bins kept below zero (negative Doppler side).
    pub below: usize,
    /// Bins kept above zero.
    pub above: usize,
}

impl DopplerWindow {
    /// Smallest window holding a pilot whose replicas rotate by up to
    /// `max_abs_nu` Hz. One Doppler bin is the large-symbol spacing.
    pub fn covering(max_abs_nu: f64, symmetric: bool, cfg: &FrameConfig) -> Self {
        let bins = (max_abs_nu.abs() / cfg.delta_f()).ceil() as usize;
        Self {
            below: if symmetric { bins } else { 0 },
            above: bins,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    /// `None` keeps the raw per-replica observations.
    pub doppler_window: Option<DopplerWindow>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            doppler_window: Some(DopplerWindow { below: 0, above: 1 }),
        }
    }
}

/// Per-replica channel samples `η̂[p, 0, k]` at the pilot subcarriers, indexed
/// `[pilot][k]`, boost and pilot value removed.
pub fn pilot_observations(ypp: &ExpandedRxTensor, layout: &PilotLayout, opts: &EstimatorOptions) -> Result<Vec<Vec<Complex64>>> {
    if ypp.stage() != TensorStage::SubcarrierDomain {
        return Err(Error::Stage {
            expected: TensorStage::SubcarrierDomain,
            actual: ypp.stage(),
        });
    }
    if (ypp.m(), ypp.n()) != (layout.m, layout.n) {
        return Err(Error::Layout(format!(
            "layout built for {}x{}, tensor is {}x{}",
            layout.m,
            layout.n,
            ypp.m(),
            ypp.n()
        )));
    }
    let n = layout.n;
    let sqrt_n = (n as f64).sqrt();
    layout
        .pilot_subcarriers
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let pilot = layout.pilot_value(i);
            let mut obs: Vec<Complex64> = (0..n).map(|k| ypp.get(p, 0, k) * sqrt_n / pilot).collect();
            if let Some(win) = opts.doppler_window {
                doppler_clean(&mut obs, win)?;
            }
            Ok(obs)
        })
        .collect()
}

fn doppler_clean(obs: &mut [Complex64], win: DopplerWindow) -> Result<()> {
    let n = obs.len();
    if win.below + win.above + 1 >= n {
        return Ok(());
    }
    grid::unitary_dft_in_place(obs, false)?;
    for (b, z) in obs.iter_mut().enumerate() {
        if b > win.above && b < n - win.below {
            *z = ZERO;
        }
    }
    grid::unitary_dft_in_place(obs, true)
}

/// Pilot-aided estimate of the 2D dot-product channel with default options.
pub fn estimate_channel(ypp: &ExpandedRxTensor, layout: &PilotLayout, cfg: &FrameConfig) -> Result<DotProductChannel> {
    estimate_channel_with(ypp, layout, cfg, &EstimatorOptions::default())
}

/// Pilot-aided estimate of `η[m, n, k]`.
///
/// Sub-symbol `n` on subcarrier `m` sits on large tone `mN + n`, so for each
/// replica `k` the pilots sample `η` every `lambda * N` large tones; one FFT
/// interpolation by that factor fills every subcarrier and sub-symbol at once.
pub fn estimate_channel_with(
    ypp: &ExpandedRxTensor,
    layout: &PilotLayout,
    cfg: &FrameConfig,
    opts: &EstimatorOptions,
) -> Result<DotProductChannel> {
    layout.check(cfg)?;
    let obs = pilot_observations(ypp, layout, opts)?;
    let n = cfg.n();
    let responses = (0..n)
        .map(|k| {
            let samples: Vec<Complex64> = obs.iter().map(|o| o[k]).collect();
            fft_interpolate(&samples, layout.lambda * n)
        })
        .collect::<Result<Vec<_>>>()?;
    DotProductChannel::from_large_tone_responses(cfg.m(), n, &responses)
}

/// Comb pilots on a single OFDM symbol of `len` tones.
#[derive(Debug, Clone, PartialEq)]
pub struct CombPilots {
    spacing: usize,
    len: usize,
    amplitude: f64,
    sequence: Vec<Complex64>,
}

impl CombPilots {
    pub fn new(spacing: usize, len: usize, boost_db: f64, seed: u64) -> Result<Self> {
        if spacing == 0 || !len.is_multiple_of(spacing) {
            return Err(Error::Layout(format!("pilot spacing {spacing} does not divide {len} tones")));
        }
        Ok(Self {
            spacing,
            len,
            amplitude: boost_gain(boost_db).sqrt(),
            sequence: qpsk_sequence(len / spacing, seed),
        })
    }

    pub fn spacing(&self) -> usize {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.len - self.len / self.spacing
    }

    pub fn is_pilot(&self, tone: usize) -> bool {
        tone.is_multiple_of(self.spacing)
    }

    pub fn pilot_value(&self, i: usize) -> Complex64 {
        self.sequence[i] * self.amplitude
    }

    pub fn data_tones(&self) -> Vec<usize> {
        (0..self.len).filter(|&t| !self.is_pilot(t)).collect()
    }

    /// Tone vector with `data` on the free tones and pilots on the comb.
    pub fn map(&self, data: &[Complex64]) -> Result<Vec<Complex64>> {
        if data.len() != self.capacity() {
            return Err(Error::shape(format!("{} data symbols", self.capacity()), data.len()));
        }
        let mut tones = vec![ZERO; self.len];
        for (&t, &v) in self.data_tones().iter().zip(data) {
            tones[t] = v;
        }
        for (i, t) in (0..self.len).step_by(self.spacing).enumerate() {
            tones[t] = self.pilot_value(i);
        }
        Ok(tones)
    }

    /// Least-squares estimate at the pilots, FFT-interpolated to every tone.
    pub fn estimate(&self, received: &[Complex64]) -> Result<Vec<Complex64>> {
        if received.len() != self.len {
            return Err(Error::shape(format!("{} tones", self.len), received.len()));
        }
        let samples: Vec<Complex64> = (0..self.len)
            .step_by(self.spacing)
            .enumerate()
            .map(|(i, t)| received[t] / self.pilot_value(i))
            .collect();
        fft_interpolate(&samples, self.spacing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelBounds {
    /// Largest path delay (s).
    pub max_tau: f64,
    /// Largest absolute Doppler shift (Hz).
    pub max_abs_nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadReport {
    pub delay_budget_samples: f64,
    pub doppler_budget_slots: f64,
    pub required_delay: f64,
    pub required_doppler: f64,
    /// Smallest delay-domain pulse guard that would cover the delay spread.
    pub rho: f64,
    /// Largest time-domain sampling period whose `M / mu` covers the Doppler spread.
    pub mu: f64,
    pub feasible: bool,
}

/// Checks the layout's delay and Doppler budgets against the channel.
/// The Doppler requirement is measured in large-symbol bins.
pub fn overhead_report(layout: &PilotLayout, bounds: ChannelBounds, cfg: &FrameConfig) -> Result<OverheadReport> {
    if !(bounds.max_tau >= 0.0 && bounds.max_abs_nu >= 0.0) {
        return Err(Error::Config("channel bounds must be non-negative".into()));
    }
    let delay_budget_samples = (cfg.m() / layout.lambda) as f64;
    let doppler_budget_slots = layout.w as f64;
    let required_delay = bounds.max_tau / cfg.t_s();
    let required_doppler = 2.0 * bounds.max_abs_nu / cfg.delta_f();
    let mu = if required_doppler > 0.0 {
        cfg.m() as f64 / required_doppler
    } else {
        f64::INFINITY
    };
    Ok(OverheadReport {
        delay_budget_samples,
        doppler_budget_slots,
        required_delay,
        required_doppler,
        rho: required_delay.ceil(),
        mu,
        feasible: delay_budget_samples >= required_delay && doppler_budget_slots >= required_doppler,
    })
}

/// Which part of the channel a text dump holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpPart {
    Magnitude,
    Phase,
}

/// Text matrix of `H_n[m, k]` with row `mN + n` and column `k`, so each
/// sub-symbol's rows interleave along frequency as on the large-tone grid.
pub fn channel_dump_text(ch: &DotProductChannel, part: DumpPart) -> String {
    let merged = ch.merged();
    let mut out = String::new();
    for q in 0..merged.rows() {
        for k in 0..merged.cols() {
            let z = merged[(q, k)];
            let v = match part {
                DumpPart::Magnitude => z.norm(),
                DumpPart::Phase => z.arg(),
            };
            if k > 0 {
                out.push(' ');
            }
            write!(out, "{v:.17e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn write_channel_dump(ch: &DotProductChannel, magnitude: &Path, phase: &Path) -> Result<()> {
    std::fs::write(magnitude, channel_dump_text(ch, DumpPart::Magnitude)).map_err(|e| Error::io(magnitude, e))?;
    std::fs::write(phase, channel_dump_text(ch, DumpPart::Phase)).map_err(|e| Error::io(phase, e))
}

/// Rebuilds `H_n[m, k]` from a magnitude and a phase dump.
pub fn read_channel_dump(magnitude: &str, phase: &str, m: usize, n: usize) -> Result<ComplexGrid> {
    let parse = |text: &str| -> Result<Vec<Vec<f64>>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t}: {e}"))))
                    .collect()
            })
            .collect()
    };
    let (mag, ph) = (parse(magnitude)?, parse(phase)?);
    if mag.len() != m * n || ph.len() != m * n || mag.iter().chain(&ph).any(|r| r.len() != n) {
        return Err(Error::Parse(format!("channel dump is not {}x{n}", m * n)));
    }
    Ok(ComplexGrid::from_fn(m * n, n, |q, k| Complex64::from_polar(mag[q][k], ph[q][k])))
}

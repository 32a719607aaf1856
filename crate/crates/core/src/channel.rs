//! Doubly-selective time-domain channel, TDL-C path sets and AWGN.
//!
//! A path has complex gain `h`, an integer delay `d` (in samples of `t_s`)
//! and a Doppler shift `nu` in Hz. Over the CP-stripped body of a single-CP
//! frame the received sample is
//!
//! ```text
//! y[l'] = Σ_i h_i · s[(l' - d_i) mod MN] · exp(j2π (l' - d_i) ν_i t_s),   l' = 0..MN
//! ```
//!
//! [`apply_channel`] evaluates that modulo form directly. [`propagate`] runs a
//! linear time-variant convolution over the CP-extended frame instead; after
//! CP removal the two agree whenever every delay is shorter than the CP.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, FrameConfig};
use crate::rng::{self, stream};
use crate::waveform::TxFrame;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Normalized delay and power (dB) of the 24 TDL-C taps, 3GPP TR 38.901
/// Table 7.7.2-3. Delays are multiples of the RMS delay spread.
#[allow(clippy::approx_constant)]
pub const TDL_C_PROFILE: [(f64, f64); 24] = [
    (0.0, -4.4),
    (0.2099, -1.2),
    (0.2219, -3.5),
    (0.2329, -5.2),
    (0.2176, -2.5),
    (0.6366, 0.0),
    (0.6448, -2.2),
    (0.6560, -3.9),
    (0.6584, -7.4),
    (0.7935, -7.1),
    (0.8213, -10.7),
    (0.9336, -11.1),
    (1.2285, -5.1),
    (1.3083, -6.8),
    (2.1704, -8.7),
    (2.7105, -13.2),
    (4.2589, -13.9),
    (4.6003, -13.9),
    (5.4902, -15.8),
    (5.6077, -17.1),
    (6.3065, -16.0),
    (6.6374, -15.7),
    (7.0427, -21.6),
    (8.6523, -22.8),
];

/// Doppler shift `f_c · v / c` in Hz for a speed in m/s.
pub fn doppler_shift(f_c: f64, speed_mps: f64) -> f64 {
    f_c * speed_mps / SPEED_OF_LIGHT
}

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub h: Complex64,
    /// Delay in samples, `tau / t_s`.
    pub delay: usize,
    /// Doppler shift in Hz; may be off-grid.
    pub nu: f64,
}

impl Path {
    pub fn new(h: Complex64, delay: usize, nu: f64) -> Self {
        Self { h, delay, nu }
    }

    pub fn tau(&self, cfg: &FrameConfig) -> f64 {
        self.delay as f64 * cfg.t_s()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pub seed: u64,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Self {
        Self { paths, seed: 0 }
    }

    pub fn single(h: Complex64, delay: usize, nu: f64) -> Self {
        Self::new(vec![Path::new(h, delay, nu)])
    }

    pub fn power(&self) -> f64 {
        self.paths.iter().map(|p| p.h.norm_sqr()).sum()
    }

    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }

    pub fn max_abs_doppler(&self) -> f64 {
        self.paths.iter().map(|p| p.nu.abs()).fold(0.0, f64::max)
    }

    pub fn is_static(&self) -> bool {
        self.paths.iter().all(|p| p.nu == 0.0)
    }

    pub fn check_within_cp(&self, n_cp: usize) -> Result<()> {
        match self.paths.iter().position(|p| p.delay >= n_cp.max(1)) {
            Some(index) => Err(Error::DelayBeyondCp {
                index,
                delay: self.paths[index].delay,
                n_cp,
            }),
            None => Ok(()),
        }
    }

    /// One path per line: `re(h) im(h) delay_samples nu_hz`, after a
    /// `# seed <seed>` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("# seed {}\n", self.seed);
        for p in &self.paths {
            let _ = writeln!(out, "{} {} {} {}", p.h.re, p.h.im, p.delay, p.nu);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut seed = 0;
        let mut paths = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(s) = rest.trim().strip_prefix("seed") {
                    seed = s.trim().parse().map_err(|_| bad_line(lineno, line))?;
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad_line(lineno, line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad_line(lineno, line));
            let delay = fields[2].parse::<usize>().map_err(|_| bad_line(lineno, line))?;
            paths.push(Path::new(
                Complex64::new(num(fields[0])?, num(fields[1])?),
                delay,
                num(fields[3])?,
            ));
        }
        Ok(Self { paths, seed })
    }
}

fn bad_line(lineno: usize, line: &str) -> Error {
    Error::Parse(format!("path record line {}: '{line}'", lineno + 1))
}

/// What to do with taps whose rounded delay falls at or beyond the CP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayOverflow {
    /// Move the tap to the last delay the CP still covers.
    #[default]
    Clip,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdlOptions {
    /// Draw speeds from `[-max, max]` instead of `[0, max]`.
    pub symmetric_doppler: bool,
    pub delay_overflow: DelayOverflow,
}

impl Default for TdlOptions {
    fn default() -> Self {
        Self {
            symmetric_doppler: false,
            delay_overflow: DelayOverflow::Clip,
        }
    }
}

/// One TDL-C drop with default options.
pub fn build_tdlc_paths(rms_ds: f64, max_speed: f64, cfg: &FrameConfig, seed: u64) -> Result<PathSet> {
    build_tdlc_paths_with(rms_ds, max_speed, cfg, seed, &TdlOptions::default())
}

/// One TDL-C drop: 24 taps scaled by `rms_ds` (s), Rayleigh gains, one
/// uniform random speed per tap up to `max_speed` (m/s).
pub fn build_tdlc_paths_with(
    rms_ds: f64,
    max_speed: f64,
    cfg: &FrameConfig,
    seed: u64,
    opts: &TdlOptions,
) -> Result<PathSet> {
    if !(rms_ds.is_finite() && rms_ds > 0.0) {
        return Err(Error::Config(format!("RMS delay spread {rms_ds} must be positive")));
    }
    if !(max_speed.is_finite() && max_speed >= 0.0) {
        return Err(Error::Config(format!("maximum speed {max_speed} must be non-negative")));
    }
    let last_covered = cfg.n_cp().saturating_sub(1);
    let mut gains_rng = rng::seeded(rng::derive(seed, stream::TAP_GAINS));
    let mut speed_rng = rng::seeded(rng::derive(seed, stream::TAP_SPEEDS));
    let total: f64 = TDL_C_PROFILE.iter().map(|&(_, db)| db_to_linear(db)).sum();
    let mut paths = Vec::with_capacity(TDL_C_PROFILE.len());
    for &(norm_delay, db) in TDL_C_PROFILE.iter() {
        let delay = (norm_delay * rms_ds / cfg.t_s()).round() as usize;
        let delay = if delay > last_covered {
            match opts.delay_overflow {
                DelayOverflow::Clip => last_covered,
                DelayOverflow::Reject => {
                    return Err(Error::Config(format!(
                        "TDL-C tap at {:.1} ns rounds to {delay} samples, beyond the {}-sample CP",
                        norm_delay * rms_ds * 1e9,
                        cfg.n_cp()
                    )))
                }
            }
        } else {
            delay
        };
        let amp = (db_to_linear(db) / total).sqrt();
        let g = Complex64::new(
            gains_rng.sample::<f64, _>(StandardNormal),
            gains_rng.sample::<f64, _>(StandardNormal),
        ) * std::f64::consts::FRAC_1_SQRT_2;
        let u: f64 = speed_rng.random();
        let speed = if opts.symmetric_doppler {
            (2.0 * u - 1.0) * max_speed
        } else {
            u * max_speed
        };
        paths.push(Path::new(g * amp, delay, doppler_shift(cfg.f_c(), speed)));
    }
    let norm = paths.iter().map(|p| p.h.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        paths.iter_mut().for_each(|p| p.h /= norm);
    }
    Ok(PathSet { paths, seed })
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn doppler_phasor(nu: f64, t_s: f64, index: f64) -> Complex64 {
    Complex64::cis(2.0 * PI * index * nu * t_s)
}

/// Modulo-form channel over the CP-stripped body of a single-CP frame.
pub fn apply_channel(frame: &TxFrame, ps: &PathSet, cfg: &FrameConfig) -> Result<Vec<Complex64>> {
    if !frame.kind().waveform.single_cp() {
        return Err(Error::Waveform("short-symbol OFDM (use apply_channel_short)"));
    }
    ps.check_within_cp(frame.cp_len())?;
    Ok(circular_channel(frame.symbol_body(0), ps, cfg.t_s(), 0))
}

/// `y[l] = Σ h s[(l-d) mod L] e^{j2π(offset + l - d) ν t_s}` over one body.
fn circular_channel(body: &[Complex64], ps: &PathSet, t_s: f64, offset: usize) -> Vec<Complex64> {
    let len = body.len();
    let mut y = vec![Complex64::new(0.0, 0.0); len];
    for p in &ps.paths {
        if p.h == Complex64::new(0.0, 0.0) {
            continue;
        }
        let d = p.delay % len;
        if p.nu == 0.0 {
            for (l, out) in y.iter_mut().enumerate() {
                *out += p.h * body[(l + len - d) % len];
            }
        } else {
            for (l, out) in y.iter_mut().enumerate() {
                let idx = offset as f64 + l as f64 - p.delay as f64;
                *out += p.h * body[(l + len - d) % len] * doppler_phasor(p.nu, t_s, idx);
            }
        }
    }
    y
}

/// Modulo-form channel applied per sub-symbol of a short-symbol OFDM frame.
/// The Doppler phase runs on absolute time: sub-symbol `n` starts its ramp at
/// sample `n * (M + cp)`. Column `n` of the result is sub-symbol `n`'s body.
pub fn apply_channel_short(frame: &TxFrame, ps: &PathSet, cfg: &FrameConfig) -> Result<ComplexGrid> {
    ps.check_within_cp(frame.cp_len())?;
    let stride = frame.cp_len() + frame.symbol_len();
    let symbols = frame.symbol_count();
    let mut out = ComplexGrid::zeros(frame.symbol_len(), symbols);
    for s in 0..symbols {
        let y = circular_channel(frame.symbol_body(s), ps, cfg.t_s(), s * stride);
        out.column_mut(s).copy_from_slice(&y);
    }
    Ok(out)
}

/// Linear time-variant convolution over the whole transmitted frame.
/// The output has the frame's length; the Doppler phase index of sample `t`
/// is `t - cp_len`, so the first body sample sits at phase index zero.
pub fn propagate(frame: &TxFrame, ps: &PathSet, cfg: &FrameConfig) -> Vec<Complex64> {
    let x = frame.samples();
    let t_s = cfg.t_s();
    let cp = frame.cp_len() as f64;
    let mut r = vec![Complex64::new(0.0, 0.0); x.len()];
    for p in &ps.paths {
        for t in p.delay..x.len() {
            let idx = t as f64 - cp - p.delay as f64;
            r[t] += p.h * x[t - p.delay] * doppler_phasor(p.nu, t_s, idx);
        }
    }
    r
}

/// Strips every symbol's CP from a received frame laid out like `frame`.
pub fn strip_cps(received: &[Complex64], frame: &TxFrame) -> Vec<Complex64> {
    let stride = frame.cp_len() + frame.symbol_len();
    received
        .chunks(stride)
        .flat_map(|chunk| chunk[frame.cp_len()..].iter().copied())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Noise power per complex sample (linear).
    pub sigma2: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// Noise power for `snr_db` relative to `signal_power`.
    pub fn for_snr(signal_power: f64, snr_db: f64, seed: u64) -> Self {
        Self {
            sigma2: signal_power / db_to_linear(snr_db),
            seed,
        }
    }
}

/// Adds circular complex Gaussian noise of variance `sigma2` per sample.
pub fn add_awgn(y: &[Complex64], spec: &NoiseSpec) -> Vec<Complex64> {
    if spec.sigma2 <= 0.0 {
        return y.to_vec();
    }
    let mut rng = rng::seeded(spec.seed);
    let s = (spec.sigma2 / 2.0).sqrt();
    y.iter()
        .map(|z| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            z + Complex64::new(re, im) * s
        })
        .collect()
}

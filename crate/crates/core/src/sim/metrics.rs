//! Per-link accumulators. Everything is a plain sum so drops can be merged in
//! any grouping; campaign code merges them in drop order.

use std::ops::AddAssign;

use num_complex::Complex64;

/// `10 log10(x)`, `-inf` for zero.
pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Error vector magnitude of `est` against `truth`, relative to the
/// reference power, in dB.
pub fn evm_db(est: &[Complex64], truth: &[Complex64]) -> f64 {
    let err: f64 = est.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum();
    let reference: f64 = truth.iter().map(|z| z.norm_sqr()).sum();
    db(err / reference)
}

/// Normalized mean square error of a channel estimate, in dB.
pub fn nmse_db(est: &[Complex64], truth: &[Complex64]) -> f64 {
    evm_db(est, truth)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinkStats {
    pub blocks: u64,
    pub block_errors: u64,
    /// `Σ |x̂ - x|²` over data symbols.
    pub symbol_error: f64,
    /// `Σ |x|²` over data symbols.
    pub symbol_energy: f64,
    /// `Σ |Ĥ - H|²`; zero with genie CSI.
    pub channel_error: f64,
    /// `Σ |H|²`; zero when no estimate was formed.
    pub channel_energy: f64,
    pub drops: u64,
    /// Summed receiver wall time, only recorded when timing is on.
    pub wall_ns: u128,
}

impl LinkStats {
    pub fn bler(&self) -> f64 {
        if self.blocks == 0 {
            return f64::NAN;
        }
        self.block_errors as f64 / self.blocks as f64
    }

    pub fn evm_db(&self) -> f64 {
        db(self.symbol_error / self.symbol_energy)
    }

    /// `None` unless a channel estimate was evaluated.
    pub fn nmse_db(&self) -> Option<f64> {
        (self.channel_energy > 0.0).then(|| db(self.channel_error / self.channel_energy))
    }

    pub fn mean_wall_ms(&self) -> Option<f64> {
        (self.wall_ns > 0 && self.drops > 0).then(|| self.wall_ns as f64 / self.drops as f64 / 1e6)
    }
}

impl AddAssign for LinkStats {
    fn add_assign(&mut self, o: Self) {
        self.blocks += o.blocks;
        self.block_errors += o.block_errors;
        self.symbol_error += o.symbol_error;
        self.symbol_energy += o.symbol_energy;
        self.channel_error += o.channel_error;
        self.channel_energy += o.channel_energy;
        self.drops += o.drops;
        self.wall_ns += o.wall_ns;
    }
}

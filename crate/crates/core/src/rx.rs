//! OTFDM receiver: Doppler dot division, per-slice subcarrier transform, the
//! analytic 2D dot-product channel, and the two Doppler despreading
//! equalizers (time-domain equalization and per-subcarrier LMMSE). The OFDM
//! one-tap equalizer lives here too.
//!
//! The received body is viewed as an M×N grid `Y[l, k] = y[k * M + l]` (the
//! transmitter's serialization). Dot division expands it to `Y'[l, n, k]`,
//! one copy per candidate sub-symbol `n`, and an M-point transform along `l`
//! gives `Y''[m, n, k]`. For sub-symbol `n` at subcarrier `m` the received
//! spreading coefficient over replicas `k` is
//!
//! ```text
//! c_{m,n}[k] = η_{m,n,k} · e^{j2π kn/N} / √N
//! η_{m,n,k}  = Σ_i h_i · e^{-j2π ((mN+n)/(MN t_s) + ν_i) τ_i} · e^{j2π ν_i k M t_s}
//! ```

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::PathSet;
use crate::error::{Error, Result};
use crate::grid::{self, ComplexGrid, FrameConfig};

/// Channel magnitudes below this are treated as erasures.
pub const ERASURE_THRESHOLD: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorStage {
    /// `Y'[l, n, k]`, after dot division.
    DelayDomain,
    /// `Y''[m, n, k]`, after the M-point transform.
    SubcarrierDomain,
}

/// M×N×N tensor indexed `[l or m, n, k]`; the first index is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedRxTensor {
    m: usize,
    n: usize,
    stage: TensorStage,
    data: Vec<Complex64>,
}

impl ExpandedRxTensor {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stage(&self) -> TensorStage {
        self.stage
    }

    fn idx(&self, first: usize, n: usize, k: usize) -> usize {
        first + self.m * (n + self.n * k)
    }

    pub fn get(&self, first: usize, n: usize, k: usize) -> Complex64 {
        self.data[self.idx(first, n, k)]
    }

    /// The length-M line `[.., n, k]`.
    pub fn line(&self, n: usize, k: usize) -> &[Complex64] {
        let start = self.idx(0, n, k);
        &self.data[start..start + self.m]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    fn expect(&self, stage: TensorStage) -> Result<()> {
        if self.stage != stage {
            return Err(Error::Stage {
                expected: stage,
                actual: self.stage,
            });
        }
        Ok(())
    }
}

/// Reshapes a CP-stripped MN-sample body into `Y[l, k] = y[k * M + l]`.
pub fn body_to_grid(y: &[Complex64], cfg: &FrameConfig) -> Result<ComplexGrid> {
    ComplexGrid::devectorize(cfg.m(), cfg.n(), y)
}

/// `Y'[l, n, k] = Y[l, k] · e^{-j2π nl/(MN)}`.
pub fn doppler_dot_divide(y: &ComplexGrid, cfg: &FrameConfig) -> Result<ExpandedRxTensor> {
    let (m, n) = (cfg.m(), cfg.n());
    y.expect_shape(m, n)?;
    let mn = (m * n) as f64;
    let divider: Vec<Complex64> = (0..n)
        .flat_map(|ni| (0..m).map(move |l| Complex64::cis(-2.0 * PI * (ni * l) as f64 / mn)))
        .collect();
    let mut data = Vec::with_capacity(m * n * n);
    for k in 0..n {
        let col = y.column(k);
        for ni in 0..n {
            let div = &divider[ni * m..(ni + 1) * m];
            data.extend(col.iter().zip(div).map(|(a, b)| a * b));
        }
    }
    Ok(ExpandedRxTensor {
        m,
        n,
        stage: TensorStage::DelayDomain,
        data,
    })
}

/// M-point unitary forward transform along the first index of every `(n, k)`.
pub fn subcarrier_transform(yp: &ExpandedRxTensor) -> Result<ExpandedRxTensor> {
    yp.expect(TensorStage::DelayDomain)?;
    let mut data = yp.data.clone();
    if yp.m > 1 {
        grid::plan(yp.m, false).process(&mut data);
        let scale = 1.0 / (yp.m as f64).sqrt();
        data.iter_mut().for_each(|z| *z *= scale);
    }
    Ok(ExpandedRxTensor {
        data,
        stage: TensorStage::SubcarrierDomain,
        ..*yp
    })
}

/// Inverse of [`subcarrier_transform`].
pub fn inverse_subcarrier_transform(ypp: &ExpandedRxTensor) -> Result<ExpandedRxTensor> {
    ypp.expect(TensorStage::SubcarrierDomain)?;
    let mut data = ypp.data.clone();
    if ypp.m > 1 {
        grid::plan(ypp.m, true).process(&mut data);
        let scale = 1.0 / (ypp.m as f64).sqrt();
        data.iter_mut().for_each(|z| *z *= scale);
    }
    Ok(ExpandedRxTensor {
        data,
        stage: TensorStage::DelayDomain,
        ..*ypp
    })
}

/// Reshape, dot division and subcarrier transform in one call.
pub fn otfdm_front_end(y: &[Complex64], cfg: &FrameConfig) -> Result<ExpandedRxTensor> {
    subcarrier_transform(&doppler_dot_divide(&body_to_grid(y, cfg)?, cfg)?)
}

/// The 2D dot-product channel, stored as `η[m, n, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DotProductChannel {
    m: usize,
    n: usize,
    eta: Vec<Complex64>,
}

impl DotProductChannel {
    /// `eta` is indexed `m + M * (n + N * k)`.
    pub fn from_eta(m: usize, n: usize, eta: Vec<Complex64>) -> Result<Self> {
        if eta.len() != m * n * n {
            return Err(Error::shape(format!("{} coefficients", m * n * n), eta.len()));
        }
        Ok(Self { m, n, eta })
    }

    /// Builds `η[m, n, k] = G_k(mN + n)` from per-replica frequency responses on
    /// the MN-point large-tone grid.
    pub fn from_large_tone_responses(m: usize, n: usize, responses: &[Vec<Complex64>]) -> Result<Self> {
        if responses.len() != n || responses.iter().any(|r| r.len() != m * n) {
            return Err(Error::shape(format!("{n} responses of {} tones", m * n), "other"));
        }
        let mut eta = vec![ZERO; m * n * n];
        for (k, g) in responses.iter().enumerate() {
            for ni in 0..n {
                for mi in 0..m {
                    eta[mi + m * (ni + n * k)] = g[mi * n + ni];
                }
            }
        }
        Ok(Self { m, n, eta })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eta(&self, m: usize, n: usize, k: usize) -> Complex64 {
        self.eta[m + self.m * (n + self.n * k)]
    }

    pub fn eta_slice(&self) -> &[Complex64] {
        &self.eta
    }

    /// Spreading coefficient `c_{m,n}[k] = η_{m,n,k} e^{j2π kn/N} / √N`.
    pub fn coefficient(&self, m: usize, n: usize, k: usize) -> Complex64 {
        let phase = Complex64::cis(2.0 * PI * ((k * n) % self.n) as f64 / self.n as f64);
        self.eta(m, n, k) * phase / (self.n as f64).sqrt()
    }

    /// Per-sub-symbol 2D channel `H_n[m, k]`; identical to the coefficient.
    pub fn h(&self, n: usize, m: usize, k: usize) -> Complex64 {
        self.coefficient(m, n, k)
    }

    /// `|H_n[m, k]|` merged across sub-symbols: row `mN + n`, column `k`.
    pub fn merged(&self) -> ComplexGrid {
        let (m, n) = (self.m, self.n);
        ComplexGrid::from_fn(m * n, n, |q, k| self.h(q % n, q / n, k))
    }

    /// `Σ|η̂ - η|² / Σ|η|²`.
    pub fn nmse(&self, truth: &DotProductChannel) -> f64 {
        let err: f64 = self.eta.iter().zip(&truth.eta).map(|(a, b)| (a - b).norm_sqr()).sum();
        err / grid::energy(&truth.eta)
    }
}

/// Per-path complex weights `h_i e^{j2π ν_i t_s (k M - d_i)}` summed per delay
/// bin, then an MN-point forward DFT: `G_k(q) = Σ_i … e^{-j2π q d_i/(MN)}`.
fn large_tone_response(ps: &PathSet, cfg: &FrameConfig, time_index: impl Fn(&crate::channel::Path) -> Complex64) -> Vec<Complex64> {
    let mn = cfg.body_len();
    let mut v = vec![ZERO; mn];
    for p in &ps.paths {
        v[p.delay % mn] += p.h * time_index(p);
    }
    grid::plan(mn, false).process(&mut v);
    v
}

/// Genie 2D dot-product channel from the physical paths.
pub fn analytic_dot_channel(ps: &PathSet, cfg: &FrameConfig) -> DotProductChannel {
    let (m, n, t_s) = (cfg.m(), cfg.n(), cfg.t_s());
    let responses: Vec<Vec<Complex64>> = (0..n)
        .map(|k| {
            large_tone_response(ps, cfg, |p| {
                Complex64::cis(2.0 * PI * p.nu * t_s * ((k * m) as f64 - p.delay as f64))
            })
        })
        .collect();
    DotProductChannel::from_large_tone_responses(m, n, &responses).expect("shapes match by construction")
}

/// Diagonal of the channel seen by one OFDM symbol of `len` samples whose
/// first body sample has Doppler phase index `offset`: each path's Doppler
/// phasor averaged over the symbol.
pub fn ofdm_mean_response(ps: &PathSet, cfg: &FrameConfig, len: usize, offset: usize) -> Vec<Complex64> {
    let t_s = cfg.t_s();
    let mut v = vec![ZERO; len];
    for p in &ps.paths {
        let mean = if p.nu == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            let w = 2.0 * PI * p.nu * t_s;
            (0..len).map(|l| Complex64::cis(w * l as f64)).sum::<Complex64>() / len as f64
        };
        let start = Complex64::cis(2.0 * PI * p.nu * t_s * (offset as f64 - p.delay as f64));
        v[p.delay % len] += p.h * mean * start;
    }
    grid::plan(len, false).process(&mut v);
    v
}

/// Contribution of one transmitted symbol `X[m, n]` to the received signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolContribution {
    /// Exact time-domain contribution over the MN body samples.
    pub exact: Vec<Complex64>,
    /// Same, with the Doppler phase frozen within each M-sample replica.
    pub approx: Vec<Complex64>,
    /// Post-transform contribution over replicas `k`, `c_{m,n}[k] X[m,n]`.
    pub post_fft: Vec<Complex64>,
}

impl SymbolContribution {
    /// `‖exact - approx‖ / ‖exact‖`.
    pub fn approx_error(&self) -> f64 {
        self.approx_error_energy().sqrt()
    }

    /// `‖exact - approx‖² / ‖exact‖²`.
    pub fn approx_error_energy(&self) -> f64 {
        let e = grid::energy(&self.exact);
        if e == 0.0 {
            return 0.0;
        }
        let d: f64 = self.exact.iter().zip(&self.approx).map(|(a, b)| (a - b).norm_sqr()).sum();
        d / e
    }
}

/// Contribution of `X[m, n]` through the paths `ps`.
pub fn analytic_gamma(x: &ComplexGrid, m: usize, n: usize, ps: &PathSet, cfg: &FrameConfig) -> SymbolContribution {
    let (mm, nn, t_s) = (cfg.m(), cfg.n(), cfg.t_s());
    let mn = (mm * nn) as f64;
    let q = (m * nn + n) as f64;
    let value = x[(m, n)];
    let scale = value / mn.sqrt();
    let mut exact = vec![ZERO; mm * nn];
    let mut approx = vec![ZERO; mm * nn];
    for p in &ps.paths {
        let d = p.delay as f64;
        for l in 0..mm * nn {
            let carrier = q * (l as f64 - d) / mn;
            let e = carrier + (l as f64 - d) * p.nu * t_s;
            let a = carrier + (l / mm) as f64 * p.nu * (mm as f64) * t_s - p.nu * d * t_s;
            exact[l] += p.h * Complex64::cis(2.0 * PI * e);
            approx[l] += p.h * Complex64::cis(2.0 * PI * a);
        }
    }
    exact.iter_mut().chain(approx.iter_mut()).for_each(|z| *z *= scale);
    let post_fft = (0..nn)
        .map(|k| {
            ps.paths
                .iter()
                .map(|p| {
                    let d = p.delay as f64;
                    let phase = -q * d / mn + (k * n) as f64 / nn as f64 + p.nu * t_s * ((k * mm) as f64 - d);
                    p.h * Complex64::cis(2.0 * PI * phase)
                })
                .sum::<Complex64>()
                * value
                / (nn as f64).sqrt()
        })
        .collect();
    SymbolContribution { exact, approx, post_fft }
}

/// Sum of the exact and approximate contributions of every symbol in `x`.
/// Costs O((MN)² P); meant for small test frames.
pub fn superpose_gamma(x: &ComplexGrid, ps: &PathSet, cfg: &FrameConfig) -> (Vec<Complex64>, Vec<Complex64>) {
    let len = cfg.body_len();
    let mut exact = vec![ZERO; len];
    let mut approx = vec![ZERO; len];
    for m in 0..cfg.m() {
        for n in 0..cfg.n() {
            if x[(m, n)] == ZERO {
                continue;
            }
            let g = analytic_gamma(x, m, n, ps, cfg);
            exact.iter_mut().zip(&g.exact).for_each(|(a, b)| *a += b);
            approx.iter_mut().zip(&g.approx).for_each(|(a, b)| *a += b);
        }
    }
    (exact, approx)
}

/// Equalized symbols with what the demapper needs for soft bits. Each estimate
/// behaves as `x_hat = gain · x + e` with `Var(e) = noise_var`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedGrid {
    pub x_hat: ComplexGrid,
    pub gain: Vec<f64>,
    pub noise_var: Vec<f64>,
}

impl EqualizedGrid {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            x_hat: ComplexGrid::zeros(rows, cols),
            gain: vec![1.0; rows * cols],
            noise_var: vec![f64::INFINITY; rows * cols],
        }
    }

    fn set(&mut self, i: usize, j: usize, x_hat: Complex64, gain: f64, noise_var: f64) {
        let rows = self.x_hat.rows();
        self.x_hat[(i, j)] = x_hat;
        self.gain[i + j * rows] = gain;
        self.noise_var[i + j * rows] = noise_var;
    }

    /// Unbiased estimate and its noise variance at `(i, j)`.
    pub fn unbiased(&self, i: usize, j: usize) -> (Complex64, f64) {
        let idx = i + j * self.x_hat.rows();
        let g = self.gain[idx];
        if g <= 0.0 || !self.noise_var[idx].is_finite() {
            return (ZERO, f64::INFINITY);
        }
        (self.x_hat[(i, j)] / g, self.noise_var[idx] / (g * g))
    }

    pub fn is_erasure(&self, i: usize, j: usize) -> bool {
        !self.noise_var[i + j * self.x_hat.rows()].is_finite()
    }
}

/// Time-domain equalization followed by Doppler despreading:
/// `X̂[m, n] = Σ_k e^{-j2π kn/N} Y''[m, n, k] / η_{m,n,k} / √N`.
///
/// Replicas with `|η| < 1e-12` are skipped and the sum is rescaled to the
/// remaining ones; a symbol with no usable replica is an erasure.
pub fn td_equalize_despread(ypp: &ExpandedRxTensor, ch: &DotProductChannel, sigma2: f64) -> Result<EqualizedGrid> {
    ypp.expect(TensorStage::SubcarrierDomain)?;
    let (m, n) = (ypp.m, ypp.n);
    if (ch.m, ch.n) != (m, n) {
        return Err(Error::shape(format!("{m}x{n} channel"), format!("{}x{}", ch.m, ch.n)));
    }
    let despread: Vec<Complex64> = (0..n)
        .map(|j| Complex64::cis(-2.0 * PI * j as f64 / n as f64))
        .collect();
    let nf = n as f64;
    let mut out = EqualizedGrid::new(m, n);
    for ni in 0..n {
        for mi in 0..m {
            let mut acc = ZERO;
            let mut inv_power = 0.0;
            let mut valid = 0usize;
            for k in 0..n {
                let eta = ch.eta(mi, ni, k);
                let p = eta.norm_sqr();
                if p.sqrt() < ERASURE_THRESHOLD {
                    continue;
                }
                acc += despread[(k * ni) % n] * ypp.get(mi, ni, k) / eta;
                inv_power += 1.0 / p;
                valid += 1;
            }
            if valid == 0 {
                continue;
            }
            let v = valid as f64;
            let x_hat = acc * nf.sqrt() / v;
            let noise = sigma2 * nf * inv_power / (v * v);
            out.set(mi, ni, x_hat, 1.0, noise);
        }
    }
    Ok(out)
}

/// The N×N matrix `H_m` whose column `n` is `c_{m,n}`.
pub fn subcarrier_matrix(ch: &DotProductChannel, m: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(ch.n, ch.n, |k, n| ch.coefficient(m, n, k))
}

/// LMMSE combiner rows `(H_mᴴ H_m + σ² I)⁻¹ H_mᴴ` for one subcarrier.
pub fn lmmse_matrix(h: &DMatrix<Complex64>, sigma2: f64, subcarrier: usize) -> Result<DMatrix<Complex64>> {
    let n = h.ncols();
    let hh = h.adjoint();
    let gram = &hh * h + DMatrix::<Complex64>::identity(n, n) * Complex64::new(sigma2, 0.0);
    let a = gram.lu().solve(&hh).ok_or(Error::Singular(subcarrier))?;
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Singular(subcarrier));
    }
    Ok(a)
}

/// Per-subcarrier LMMSE despreading. For target sub-symbol `n` the
/// observation is the slice `Y''[m, n, :]`, and `X̂[m, n]` is entry `n` of
/// `(H_mᴴ H_m + σ² I)⁻¹ H_mᴴ Y''[m, n, :]`.
pub fn lmmse_despread(ypp: &ExpandedRxTensor, ch: &DotProductChannel, sigma2: f64) -> Result<EqualizedGrid> {
    ypp.expect(TensorStage::SubcarrierDomain)?;
    let (m, n) = (ypp.m, ypp.n);
    if (ch.m, ch.n) != (m, n) {
        return Err(Error::shape(format!("{m}x{n} channel"), format!("{}x{}", ch.m, ch.n)));
    }
    if sigma2 < 0.0 {
        return Err(Error::Config(format!("noise power {sigma2} must be non-negative")));
    }
    let mut out = EqualizedGrid::new(m, n);
    for mi in 0..m {
        let h = subcarrier_matrix(ch, mi);
        let a = lmmse_matrix(&h, sigma2, mi)?;
        let ah = &a * &h;
        for ni in 0..n {
            let x_hat: Complex64 = (0..n).map(|k| a[(ni, k)] * ypp.get(mi, ni, k)).sum();
            let b = ah[(ni, ni)].re.clamp(0.0, 1.0);
            out.set(mi, ni, x_hat, b, b * (1.0 - b));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OneTap {
    /// Zero forcing, `Y / H`.
    #[default]
    DotDivision,
    /// `H* Y / (|H|² + σ²)`.
    Mmse,
}

/// One-tap equalizer on a grid of received tones.
pub fn ofdm_one_tap_equalize(y: &ComplexGrid, h: &ComplexGrid, sigma2: f64, mode: OneTap) -> Result<EqualizedGrid> {
    h.expect_shape(y.rows(), y.cols())?;
    let mut out = EqualizedGrid::new(y.rows(), y.cols());
    for j in 0..y.cols() {
        for i in 0..y.rows() {
            let hv = h[(i, j)];
            let p = hv.norm_sqr();
            if p.sqrt() < ERASURE_THRESHOLD {
                continue;
            }
            match mode {
                OneTap::DotDivision => out.set(i, j, y[(i, j)] / hv, 1.0, sigma2 / p),
                OneTap::Mmse => {
                    let b = p / (p + sigma2);
                    out.set(i, j, hv.conj() * y[(i, j)] / (p + sigma2), b, b * (1.0 - b));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, Path};
    use crate::grid::max_abs_diff;
    use crate::rng;
    use crate::waveform::otfdm_modulate;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn cfg(m: usize, n: usize, n_cp: usize) -> FrameConfig {
        FrameConfig::new(m, n, n_cp, 15e3, 24e9).unwrap()
    }

    fn random_grid(m: usize, n: usize, seed: u64) -> ComplexGrid {
        let mut r = rng::seeded(seed);
        ComplexGrid::from_fn(m, n, |_, _| {
            Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2
        })
    }

    fn random_paths(count: usize, max_delay: usize, max_nu: f64, seed: u64) -> PathSet {
        let mut r = rng::seeded(seed);
        PathSet::new(
            (0..count)
                .map(|_| {
                    Path::new(
                        Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal)) * 0.5,
                        r.random_range(0..max_delay),
                        r.random::<f64>() * max_nu,
                    )
                })
                .collect(),
        )
    }

    /// Direct evaluation of the closed-form 2D channel, path by path.
    fn eta_oracle(ps: &PathSet, cfg: &FrameConfig, m: usize, n: usize, k: usize) -> Complex64 {
        let (mm, nn, t_s) = (cfg.m() as f64, cfg.n() as f64, cfg.t_s());
        ps.paths
            .iter()
            .map(|p| {
                let tau = p.delay as f64 * t_s;
                let f = (m as f64 * nn + n as f64) / (mm * nn * t_s) + p.nu;
                p.h * Complex64::cis(2.0 * PI * (-f * tau + p.nu * k as f64 * mm * t_s))
            })
            .sum()
    }

    fn evm_db(est: &ComplexGrid, truth: &ComplexGrid) -> f64 {
        let err: f64 = est.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum();
        10.0 * (err / truth.energy()).log10()
    }

    fn chain(x: &ComplexGrid, ps: &PathSet, cfg: &FrameConfig) -> ExpandedRxTensor {
        let frame = otfdm_modulate(x, cfg, false).unwrap();
        let y = apply_channel(&frame, ps, cfg).unwrap();
        otfdm_front_end(&y, cfg).unwrap()
    }

    #[test]
    fn dot_division_basics() {
        let cfg = cfg(8, 4, 2);
        let y = random_grid(8, 4, 1);
        let yp = doppler_dot_divide(&y, &cfg).unwrap();
        for l in 0..8 {
            for k in 0..4 {
                assert_eq!(yp.get(l, 0, k), y[(l, k)]);
                for n in 0..4 {
                    assert!((yp.get(l, n, k).norm() - y[(l, k)].norm()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dot_division_restores_sub_symbol_cyclic_structure() {
        // Sub-symbol n alone: after dividing by its own ramp each replica is the
        // same M-periodic sequence up to the spreading phase e^{j2πkn/N}.
        let cfg = cfg(8, 4, 2);
        for n in 0..4 {
            let mut x = ComplexGrid::zeros(8, 4);
            let col = random_grid(8, 1, 10 + n as u64);
            x.column_mut(n).copy_from_slice(col.as_slice());
            let body = otfdm_modulate(&x, &cfg, false).unwrap().body();
            let yp = doppler_dot_divide(&body_to_grid(&body, &cfg).unwrap(), &cfg).unwrap();
            for k in 1..4 {
                let rot = Complex64::cis(2.0 * PI * (k * n) as f64 / 4.0);
                for l in 0..8 {
                    assert!((yp.get(l, n, k) - yp.get(l, n, 0) * rot).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn subcarrier_transform_properties() {
        let cfg = cfg(8, 2, 2);
        let y = ComplexGrid::from_fn(8, 2, |_, _| Complex64::new(1.0, 0.0));
        let yp = doppler_dot_divide(&y, &cfg).unwrap();
        let ypp = subcarrier_transform(&yp).unwrap();
        assert!((ypp.get(0, 0, 0) - Complex64::new(8f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!((1..8).all(|m| ypp.get(m, 0, 1).norm() < 1e-12));

        let yp = doppler_dot_divide(&random_grid(8, 2, 2), &cfg).unwrap();
        let ypp = subcarrier_transform(&yp).unwrap();
        for n in 0..2 {
            for k in 0..2 {
                let a = grid::energy(yp.line(n, k));
                let b = grid::energy(ypp.line(n, k));
                assert!((a - b).abs() < 1e-10);
            }
        }
        let back = inverse_subcarrier_transform(&ypp).unwrap();
        assert!(max_abs_diff(back.as_slice(), yp.as_slice()) < 1e-10);
        assert!(matches!(subcarrier_transform(&ypp), Err(Error::Stage { .. })));
    }

    #[test]
    fn analytic_channel_matches_closed_form() {
        let cfg = cfg(8, 4, 6);
        let ps = random_paths(5, 6, 20_000.0, 3);
        let ch = analytic_dot_channel(&ps, &cfg);
        for m in 0..8 {
            for n in 0..4 {
                for k in 0..4 {
                    assert!((ch.eta(m, n, k) - eta_oracle(&ps, &cfg, m, n, k)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn analytic_channel_special_cases() {
        let cfg = cfg(8, 4, 6);
        let ch = analytic_dot_channel(&PathSet::single(Complex64::new(1.0, 0.0), 0, 0.0), &cfg);
        for m in 0..8 {
            for n in 0..4 {
                for k in 0..4 {
                    let want = Complex64::cis(2.0 * PI * (k * n) as f64 / 4.0) / 2.0;
                    assert!((ch.h(n, m, k) - want).norm() < 1e-12);
                }
            }
        }

        let ps = random_paths(4, 6, 0.0, 4);
        let ch = analytic_dot_channel(&ps, &cfg);
        for m in 0..8 {
            for n in 0..4 {
                let mag = ch.h(n, m, 0).norm();
                assert!((1..4).all(|k| (ch.h(n, m, k).norm() - mag).abs() < 1e-12));
            }
        }

        let ch = analytic_dot_channel(&PathSet::new(vec![]), &cfg);
        assert!(ch.eta_slice().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn gamma_superposition_reproduces_channel_output() {
        let cfg = cfg(4, 4, 4);
        let x = random_grid(4, 4, 5);
        let ps = random_paths(3, 4, 50_000.0, 6);
        let (exact, _) = superpose_gamma(&x, &ps, &cfg);
        let y = apply_channel(&otfdm_modulate(&x, &cfg, false).unwrap(), &ps, &cfg).unwrap();
        assert!(max_abs_diff(&exact, &y) < 1e-10);

        let static_ps = random_paths(3, 4, 0.0, 7);
        let g = analytic_gamma(&x, 2, 1, &static_ps, &cfg);
        assert_eq!(g.approx_error(), 0.0);
    }

    #[test]
    fn gamma_post_fft_is_the_spreading_coefficient() {
        let cfg = cfg(8, 4, 6);
        let x = random_grid(8, 4, 8);
        let ps = random_paths(4, 6, 30_000.0, 9);
        let ch = analytic_dot_channel(&ps, &cfg);
        let g = analytic_gamma(&x, 3, 2, &ps, &cfg);
        for k in 0..4 {
            assert!((g.post_fft[k] - ch.coefficient(3, 2, k) * x[(3, 2)]).norm() < 1e-12);
        }
    }

    #[test]
    fn approximation_error_grows_with_doppler() {
        let cfg = cfg(16, 4, 8);
        let x = random_grid(16, 4, 10);
        let base = random_paths(4, 8, 1.0, 11);
        let mut last = -1.0;
        for scale in [0.001, 0.003, 0.01, 0.03, 0.1] {
            // ν_max M t_s = scale
            let nu_max = scale / (cfg.m() as f64 * cfg.t_s());
            let ps = PathSet::new(base.paths.iter().map(|p| Path { nu: p.nu * nu_max, ..*p }).collect());
            let err = analytic_gamma(&x, 5, 3, &ps, &cfg).approx_error();
            assert!(err > last, "{err} <= {last}");
            last = err;
        }
    }

    #[test]
    fn spreading_codes_are_orthonormal() {
        for n in [1usize, 2, 4, 8] {
            for a in 0..n {
                for b in 0..n {
                    let dot: Complex64 = (0..n)
                        .map(|k| {
                            Complex64::cis(2.0 * PI * (k * a) as f64 / n as f64).conj()
                                * Complex64::cis(2.0 * PI * (k * b) as f64 / n as f64)
                                / n as f64
                        })
                        .sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - Complex64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn td_equalization_identity_and_static_multipath() {
        let cfg = cfg(16, 4, 8);
        let x = random_grid(16, 4, 12);
        let identity = PathSet::single(Complex64::new(1.0, 0.0), 0, 0.0);
        let eq = td_equalize_despread(&chain(&x, &identity, &cfg), &analytic_dot_channel(&identity, &cfg), 0.0).unwrap();
        assert!(max_abs_diff(eq.x_hat.as_slice(), x.as_slice()) < 1e-9);

        let ps = random_paths(6, 8, 0.0, 13);
        let eq = td_equalize_despread(&chain(&x, &ps, &cfg), &analytic_dot_channel(&ps, &cfg), 0.0).unwrap();
        assert!(max_abs_diff(eq.x_hat.as_slice(), x.as_slice()) < 1e-9);
    }

    #[test]
    fn td_equalization_with_mild_doppler() {
        // ν M t_s = 0.01 on every path. Thresholds frozen from a genie sweep:
        // a single delayed, Doppler-shifted path measures -29 dB (the
        // within-replica approximation error), two paths with different
        // Dopplers -24 to -29 dB.
        let cfg = cfg(64, 8, 16);
        let x = random_grid(64, 8, 14);
        let nu = 0.01 / (cfg.m() as f64 * cfg.t_s());
        let single = PathSet::single(Complex64::new(0.8, 0.3), 3, nu);
        let two = PathSet::new(vec![
            Path::new(Complex64::new(0.8, 0.3), 0, nu),
            Path::new(Complex64::from_polar(0.45, 1.0), 3, -0.6 * nu),
        ]);
        for (ps, bound) in [(single, -25.0), (two, -20.0)] {
            let eq = td_equalize_despread(&chain(&x, &ps, &cfg), &analytic_dot_channel(&ps, &cfg), 0.0).unwrap();
            let evm = evm_db(&eq.x_hat, &x);
            assert!(evm <= bound, "EVM {evm:.1} dB");
        }
    }

    #[test]
    fn td_equalization_erasures() {
        let cfg = cfg(4, 2, 2);
        let ypp = chain(&random_grid(4, 2, 16), &PathSet::single(Complex64::new(1.0, 0.0), 0, 0.0), &cfg);
        let ch = DotProductChannel::from_eta(4, 2, vec![ZERO; 16]).unwrap();
        let eq = td_equalize_despread(&ypp, &ch, 0.1).unwrap();
        assert!(eq.is_erasure(0, 0));
        assert_eq!(eq.x_hat[(0, 0)], ZERO);

        let mut eta = vec![Complex64::new(1.0, 0.0); 16];
        eta[1 + 4 * 3] = ZERO; // m=1, n=1, k=1, index m + M(n + Nk)
        let ch = DotProductChannel::from_eta(4, 2, eta).unwrap();
        let eq = td_equalize_despread(&ypp, &ch, 0.1).unwrap();
        assert!(!eq.is_erasure(1, 1));
        assert!((eq.noise_var[1 + 4] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn lmmse_limits() {
        let cfg = cfg(16, 4, 8);
        let x = random_grid(16, 4, 17);
        let ps = random_paths(6, 8, 0.0, 18);
        let ch = analytic_dot_channel(&ps, &cfg);
        let ypp = chain(&x, &ps, &cfg);
        let eq = lmmse_despread(&ypp, &ch, 1e-14).unwrap();
        assert!(max_abs_diff(eq.x_hat.as_slice(), x.as_slice()) < 1e-8);

        let eq = lmmse_despread(&ypp, &ch, 1e12).unwrap();
        assert!(eq.x_hat.as_slice().iter().all(|z| z.norm() < 1e-9));

        let cfg1 = cfg_n1(16);
        let x1 = random_grid(16, 1, 19);
        let ps1 = random_paths(4, 8, 3000.0, 20);
        let ch1 = analytic_dot_channel(&ps1, &cfg1);
        let ypp1 = chain(&x1, &ps1, &cfg1);
        let sigma2 = 0.3;
        let eq = lmmse_despread(&ypp1, &ch1, sigma2).unwrap();
        for m in 0..16 {
            let c = ch1.coefficient(m, 0, 0);
            let y = ypp1.get(m, 0, 0);
            let want = c.conj() * y / (c.norm_sqr() + sigma2);
            assert!((eq.x_hat[(m, 0)] - want).norm() < 1e-12);
        }
    }

    fn cfg_n1(m: usize) -> FrameConfig {
        cfg(m, 1, 8)
    }

    #[test]
    fn lmmse_reports_singular_system() {
        let ch = DotProductChannel::from_eta(2, 2, vec![ZERO; 8]).unwrap();
        let cfg = cfg(2, 2, 1);
        let ypp = chain(&random_grid(2, 2, 21), &PathSet::single(Complex64::new(1.0, 0.0), 0, 0.0), &cfg);
        assert!(matches!(lmmse_despread(&ypp, &ch, 0.0), Err(Error::Singular(0))));
        assert!(lmmse_despread(&ypp, &ch, 0.5).is_ok());
    }

    #[test]
    fn one_tap_cases() {
        let y = random_grid(6, 2, 22);
        let ones = ComplexGrid::from_fn(6, 2, |_, _| Complex64::new(1.0, 0.0));
        let eq = ofdm_one_tap_equalize(&y, &ones, 0.1, OneTap::DotDivision).unwrap();
        assert_eq!(eq.x_hat, y);

        let x = random_grid(6, 2, 23);
        let twos = ComplexGrid::from_fn(6, 2, |_, _| Complex64::new(2.0, 0.0));
        let y2 = ComplexGrid::from_fn(6, 2, |i, j| x[(i, j)] * 2.0);
        let eq = ofdm_one_tap_equalize(&y2, &twos, 0.1, OneTap::DotDivision).unwrap();
        assert!(max_abs_diff(eq.x_hat.as_slice(), x.as_slice()) < 1e-15);
        assert!((eq.noise_var[0] - 0.025).abs() < 1e-15);

        let h = random_grid(6, 2, 24);
        let yh = ComplexGrid::from_fn(6, 2, |i, j| x[(i, j)] * h[(i, j)]);
        let eq = ofdm_one_tap_equalize(&yh, &h, 0.0, OneTap::DotDivision).unwrap();
        assert!(max_abs_diff(eq.x_hat.as_slice(), x.as_slice()) < 1e-10);

        let mut hz = h.clone();
        hz[(2, 1)] = ZERO;
        let eq = ofdm_one_tap_equalize(&yh, &hz, 0.1, OneTap::Mmse).unwrap();
        assert!(eq.is_erasure(2, 1));
        let (u, v) = eq.unbiased(0, 0);
        let p = h[(0, 0)].norm_sqr();
        assert!((u - yh[(0, 0)] / h[(0, 0)]).norm() < 1e-12);
        assert!((v - 0.1 / p).abs() < 1e-12);
    }
}

//! Transmit chains: large CP-OFDM, short-symbol CP-OFDM, DZT-based OTFS and
//! OTFDM (optionally DFT-spread), plus cyclic-prefix handling.
//!
//! OTFDM runs three steps on the M×N frequency-domain grid `X`:
//!
//! 1. an M-point inverse transform per sub-symbol column, `S1 = F_Mᴴ X`;
//! 2. the Doppler dot product `S2[l, n] = S1[l, n] · e^{j2π nl/(MN)}`;
//! 3. Doppler spreading over `n`, `S3[l, k] = Σ_n S2[l, n] e^{j2π nk/N} / √N`.
//!
//! The body is `vec(S3)`, so body sample `k * M + l` is `S3[l, k]`. That body
//! equals an MN-point OFDM symbol carrying the comb-interleaved grid, which
//! [`check_ofdm_equivalence`] measures.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{self, ComplexGrid, FrameConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Deserialize, serde::Serialize)]
#[serde(try_from = "String", into = "String")]
pub enum Waveform {
    OfdmLarge,
    OfdmShort,
    OtfsDzt,
    Otfdm,
}

impl Waveform {
    pub fn name(&self) -> &'static str {
        match self {
            Waveform::OfdmLarge => "OFDM",
            Waveform::OfdmShort => "OFDM_SHORT",
            Waveform::OtfsDzt => "OTFS",
            Waveform::Otfdm => "OTFDM",
        }
    }

    /// True for waveforms that carry a single CP in front of an MN-sample body.
    pub fn single_cp(&self) -> bool {
        !matches!(self, Waveform::OfdmShort)
    }
}

impl std::fmt::Display for Waveform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Waveform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "OFDM" | "OFDM_LARGE" => Ok(Waveform::OfdmLarge),
            "OFDM_SHORT" => Ok(Waveform::OfdmShort),
            "OTFS" | "OTFS_DZT" => Ok(Waveform::OtfsDzt),
            "OTFDM" => Ok(Waveform::Otfdm),
            other => Err(Error::Parse(format!("unknown waveform '{other}'"))),
        }
    }
}

impl TryFrom<String> for Waveform {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Waveform> for String {
    fn from(w: Waveform) -> String {
        w.name().to_string()
    }
}

/// Waveform tag plus the DFT-spreading option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WaveformKind {
    pub waveform: Waveform,
    pub dft_spread: bool,
}

impl WaveformKind {
    pub fn plain(waveform: Waveform) -> Self {
        Self { waveform, dft_spread: false }
    }
}

/// Time-domain transmit samples, cyclic prefixes included.
#[derive(Debug, Clone, PartialEq)]
pub struct TxFrame {
    samples: Vec<Complex64>,
    kind: WaveformKind,
    /// CP length per symbol.
    cp_len: usize,
    /// Body length per symbol (MN for single-CP waveforms, M for short OFDM).
    symbol_len: usize,
}

impl TxFrame {
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn kind(&self) -> WaveformKind {
        self.kind
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn symbol_len(&self) -> usize {
        self.symbol_len
    }

    pub fn symbol_count(&self) -> usize {
        self.samples.len() / (self.cp_len + self.symbol_len)
    }

    /// Body of symbol `i` with its CP stripped.
    pub fn symbol_body(&self, i: usize) -> &[Complex64] {
        let start = i * (self.cp_len + self.symbol_len) + self.cp_len;
        &self.samples[start..start + self.symbol_len]
    }

    /// All bodies concatenated, CPs excluded.
    pub fn body(&self) -> Vec<Complex64> {
        (0..self.symbol_count())
            .flat_map(|i| self.symbol_body(i).iter().copied())
            .collect()
    }

    /// Mean power per body sample (CP excluded).
    pub fn body_power(&self) -> f64 {
        let body = self.body();
        grid::energy(&body) / body.len() as f64
    }

    pub fn scale(&mut self, factor: f64) {
        self.samples.iter_mut().for_each(|z| *z *= factor);
    }

    /// Writes the samples as little-endian f64 pairs `(re, im)`.
    pub fn write_iq(&self, path: impl AsRef<Path>) -> Result<()> {
        write_iq(path, &self.samples)
    }
}

/// Prepends a cyclic copy of the last `n_cp` samples.
pub fn add_cp(body: &[Complex64], n_cp: usize) -> Result<Vec<Complex64>> {
    if n_cp > body.len() {
        return Err(Error::CpTooLong { n_cp, len: body.len() });
    }
    let mut out = Vec::with_capacity(body.len() + n_cp);
    out.extend_from_slice(&body[body.len() - n_cp..]);
    out.extend_from_slice(body);
    Ok(out)
}

pub fn remove_cp(frame: &[Complex64], n_cp: usize) -> Result<Vec<Complex64>> {
    if n_cp > frame.len() {
        return Err(Error::CpTooLong { n_cp, len: frame.len() });
    }
    Ok(frame[n_cp..].to_vec())
}

fn single_cp_frame(body: Vec<Complex64>, cfg: &FrameConfig, kind: WaveformKind) -> Result<TxFrame> {
    let symbol_len = body.len();
    Ok(TxFrame {
        samples: add_cp(&body, cfg.n_cp())?,
        kind,
        cp_len: cfg.n_cp(),
        symbol_len,
    })
}

/// One MN-point CP-OFDM symbol carrying `vec(X)` on its subcarriers.
pub fn ofdm_modulate_large(x: &ComplexGrid, cfg: &FrameConfig) -> Result<TxFrame> {
    x.expect_shape(cfg.m(), cfg.n())?;
    let body = grid::unitary_dft(&x.vectorize(), true)?;
    single_cp_frame(body, cfg, WaveformKind::plain(Waveform::OfdmLarge))
}

/// N short M-point CP-OFDM symbols, one per column of `X`, each with its own
/// `n_cp_short`-sample CP.
pub fn ofdm_modulate_short(x: &ComplexGrid, cfg: &FrameConfig, n_cp_short: usize) -> Result<TxFrame> {
    x.expect_shape(cfg.m(), cfg.n())?;
    if n_cp_short > cfg.m() {
        return Err(Error::CpTooLong { n_cp: n_cp_short, len: cfg.m() });
    }
    let mut s = x.clone();
    grid::dft_columns(&mut s, true);
    let mut samples = Vec::with_capacity(cfg.n() * (cfg.m() + n_cp_short));
    for j in 0..cfg.n() {
        samples.extend(add_cp(s.column(j), n_cp_short)?);
    }
    Ok(TxFrame {
        samples,
        kind: WaveformKind::plain(Waveform::OfdmShort),
        cp_len: n_cp_short,
        symbol_len: cfg.m(),
    })
}

/// DZT-based OTFS: N-point inverse transform along each row, then `vec`.
pub fn otfs_modulate_dzt(x: &ComplexGrid, cfg: &FrameConfig) -> Result<TxFrame> {
    x.expect_shape(cfg.m(), cfg.n())?;
    let s = grid::dft_rows(x, true);
    single_cp_frame(s.vectorize(), cfg, WaveformKind::plain(Waveform::OtfsDzt))
}

/// Replaces each column by its M-point unitary forward transform.
pub fn dft_spread_columns(d: &ComplexGrid, cfg: &FrameConfig) -> Result<ComplexGrid> {
    d.expect_shape(cfg.m(), cfg.n())?;
    let mut x = d.clone();
    grid::dft_columns(&mut x, false);
    Ok(x)
}

/// Inverse of [`dft_spread_columns`].
pub fn dft_despread_columns(x: &ComplexGrid) -> ComplexGrid {
    let mut d = x.clone();
    grid::dft_columns(&mut d, true);
    d
}

/// OTFDM body `vec(S3)`. With `dot_product == false` step 2 is skipped, which
/// is only useful to compare against OTFS.
pub fn otfdm_body(x: &ComplexGrid, cfg: &FrameConfig, dot_product: bool) -> Result<Vec<Complex64>> {
    x.expect_shape(cfg.m(), cfg.n())?;
    let (m, n) = (cfg.m(), cfg.n());
    let mut s = x.clone();
    grid::dft_columns(&mut s, true);
    if dot_product {
        let mn = (m * n) as f64;
        for ni in 1..n {
            for (l, z) in s.column_mut(ni).iter_mut().enumerate() {
                *z *= Complex64::cis(2.0 * PI * (ni * l) as f64 / mn);
            }
        }
    }
    Ok(grid::dft_rows(&s, true).vectorize())
}

/// OTFDM transmitter. With `dft_spread`, `X` holds time-domain data symbols
/// that are DFT-spread per column first (DFT-s-OTFDM).
pub fn otfdm_modulate(x: &ComplexGrid, cfg: &FrameConfig, dft_spread: bool) -> Result<TxFrame> {
    let body = if dft_spread {
        otfdm_body(&dft_spread_columns(x, cfg)?, cfg, true)?
    } else {
        otfdm_body(x, cfg, true)?
    };
    single_cp_frame(
        body,
        cfg,
        WaveformKind {
            waveform: Waveform::Otfdm,
            dft_spread,
        },
    )
}

/// Max elementwise difference between the OTFDM body and an MN-point
/// inverse transform of the comb-interleaved grid.
pub fn check_ofdm_equivalence(x: &ComplexGrid, cfg: &FrameConfig) -> Result<f64> {
    let otfdm = otfdm_body(x, cfg, true)?;
    let ofdm = grid::unitary_dft(&grid::comb_interleave(x), true)?;
    Ok(grid::max_abs_diff(&otfdm, &ofdm))
}

pub fn write_iq(path: impl AsRef<Path>, samples: &[Complex64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(samples.len() * 16);
    for z in samples {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_iq(path: impl AsRef<Path>) -> Result<Vec<Complex64>> {
    let bytes = fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Parse(format!(
            "IQ file length {} is not a multiple of 16 bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{energy, max_abs_diff, unitary_dft};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, n: usize, n_cp: usize) -> FrameConfig {
        FrameConfig::new(m, n, n_cp, 15e3, 24e9).unwrap()
    }

    fn random_grid(m: usize, n: usize, rng: &mut ChaCha8Rng) -> ComplexGrid {
        ComplexGrid::from_fn(m, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cp_copy_semantics() {
        let body = [c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)];
        let framed = add_cp(&body, 2).unwrap();
        assert_eq!(framed, vec![body[2], body[3], body[0], body[1], body[2], body[3]]);
        assert_eq!(add_cp(&body, 0).unwrap(), body.to_vec());
        assert!(matches!(add_cp(&body, 5), Err(Error::CpTooLong { .. })));
        assert!(remove_cp(&body, 5).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<_> = random_grid(16, 1, &mut rng).vectorize();
        assert_eq!(remove_cp(&add_cp(&v, 4).unwrap(), 4).unwrap(), v);
    }

    #[test]
    fn large_ofdm_delta_and_energy() {
        let cfg = cfg(4, 2, 2);
        let mut x = ComplexGrid::zeros(4, 2);
        x[(0, 0)] = c(1., 0.);
        let f = ofdm_modulate_large(&x, &cfg).unwrap();
        assert_eq!(f.samples().len(), 10);
        let want = 1.0 / 8f64.sqrt();
        assert!(f.samples().iter().all(|z| (z - c(want, 0.)).norm() < 1e-15));

        let zero = ofdm_modulate_large(&ComplexGrid::zeros(4, 2), &cfg).unwrap();
        assert!(zero.samples().iter().all(|z| z.norm() == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_grid(4, 2, &mut rng);
        let f = ofdm_modulate_large(&x, &cfg).unwrap();
        assert!((energy(&f.body()) - x.energy()).abs() < 1e-10);
        assert!(ofdm_modulate_large(&ComplexGrid::zeros(2, 4), &cfg).is_err());
    }

    #[test]
    fn short_ofdm_round_trip() {
        let cfg = cfg(4, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_grid(4, 2, &mut rng);
        let f = ofdm_modulate_short(&x, &cfg, 2).unwrap();
        assert_eq!(f.samples().len(), 2 * (4 + 2));
        for j in 0..2 {
            let rec = unitary_dft(f.symbol_body(j), false).unwrap();
            assert!(max_abs_diff(&rec, x.column(j)) < 1e-10);
        }
        let zero = ofdm_modulate_short(&ComplexGrid::zeros(4, 2), &cfg, 2).unwrap();
        assert!(zero.samples().iter().all(|z| z.norm() == 0.0));

        // A single short symbol is a plain M-point OFDM symbol.
        let cfg1 = cfg_n1(8, 3);
        let x1 = random_grid(8, 1, &mut rng);
        let short = ofdm_modulate_short(&x1, &cfg1, 3).unwrap();
        let large = ofdm_modulate_large(&x1, &cfg1).unwrap();
        assert!(max_abs_diff(short.samples(), large.samples()) < 1e-12);
    }

    fn cfg_n1(m: usize, n_cp: usize) -> FrameConfig {
        cfg(m, 1, n_cp)
    }

    #[test]
    fn otfs_dzt_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_grid(6, 1, &mut rng);
        let f = otfs_modulate_dzt(&x, &cfg(6, 1, 0)).unwrap();
        assert!(max_abs_diff(f.samples(), &x.vectorize()) < 1e-15);

        let mut x = ComplexGrid::zeros(4, 4);
        for j in 0..4 {
            x[(2, j)] = if j == 0 { c(1., 0.) } else { c(0., 0.) };
        }
        let f = otfs_modulate_dzt(&x, &cfg(4, 4, 0)).unwrap();
        let body = f.body();
        for k in 0..4 {
            assert!((body[k * 4 + 2].norm() - 0.5).abs() < 1e-15);
        }

        let x = random_grid(4, 4, &mut rng);
        let f = otfs_modulate_dzt(&x, &cfg(4, 4, 1)).unwrap();
        assert!((energy(&f.body()) - x.energy()).abs() < 1e-10);
    }

    #[test]
    fn otfdm_closed_form_bodies() {
        let cfg = cfg(2, 2, 0);
        let mut x = ComplexGrid::zeros(2, 2);
        x[(0, 0)] = c(1., 0.);
        let body = otfdm_modulate(&x, &cfg, false).unwrap().body();
        assert!(max_abs_diff(&body, &[c(0.5, 0.); 4]) < 1e-15);

        let mut x = ComplexGrid::zeros(2, 2);
        x[(1, 1)] = c(1., 0.);
        let body = otfdm_modulate(&x, &cfg, false).unwrap().body();
        let want = [c(0.5, 0.), c(0., -0.5), c(-0.5, 0.), c(0., 0.5)];
        assert!(max_abs_diff(&body, &want) < 1e-15);
    }

    #[test]
    fn otfdm_collapses_to_ofdm_for_single_sub_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = cfg_n1(16, 4);
        let x = random_grid(16, 1, &mut rng);
        let otfdm = otfdm_modulate(&x, &cfg, false).unwrap();
        let large = ofdm_modulate_large(&x, &cfg).unwrap();
        let short = ofdm_modulate_short(&x, &cfg, 4).unwrap();
        assert!(max_abs_diff(otfdm.samples(), large.samples()) <= 1e-12);
        assert!(max_abs_diff(otfdm.samples(), short.samples()) <= 1e-12);
    }

    #[test]
    fn equivalence_checker() {
        let cfg = cfg(8, 4, 2);
        assert_eq!(check_ofdm_equivalence(&ComplexGrid::zeros(8, 4), &cfg).unwrap(), 0.0);
        for m in 0..8 {
            for n in 0..4 {
                let mut x = ComplexGrid::zeros(8, 4);
                x[(m, n)] = c(1., 0.);
                assert!(check_ofdm_equivalence(&x, &cfg).unwrap() < 1e-12);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let x = random_grid(8, 4, &mut rng);
            assert!(check_ofdm_equivalence(&x, &cfg).unwrap() < 1e-10);
        }
    }

    #[test]
    fn dft_spread_cases() {
        let cfg = cfg(4, 2, 0);
        let d = ComplexGrid::from_fn(4, 2, |_, _| c(1., 0.));
        let x = dft_spread_columns(&d, &cfg).unwrap();
        for j in 0..2 {
            assert!((x[(0, j)] - c(2., 0.)).norm() < 1e-15);
            assert!(x.column(j)[1..].iter().all(|z| z.norm() < 1e-15));
        }
        let back = dft_despread_columns(&x);
        assert!(max_abs_diff(back.as_slice(), d.as_slice()) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = random_grid(4, 2, &mut rng);
        let x = dft_spread_columns(&d, &cfg).unwrap();
        for j in 0..2 {
            assert!((energy(x.column(j)) - energy(d.column(j))).abs() < 1e-10);
        }
    }

    #[test]
    fn dft_spread_otfdm_without_dot_product_is_otfs() {
        let cfg = cfg(8, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_grid(8, 4, &mut rng);
        let spread = dft_spread_columns(&d, &cfg).unwrap();
        let no_dot = otfdm_body(&spread, &cfg, false).unwrap();
        let otfs = otfs_modulate_dzt(&d, &cfg).unwrap().body();
        assert!(max_abs_diff(&no_dot, &otfs) < 1e-12);
        // With the dot product the two differ.
        let with_dot = otfdm_modulate(&d, &cfg, true).unwrap().body();
        assert!(max_abs_diff(&with_dot, &otfs) > 1e-3);
    }

    #[test]
    fn iq_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frame.iq");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_grid(4, 2, &mut rng);
        let f = otfdm_modulate(&x, &cfg(4, 2, 2), false).unwrap();
        f.write_iq(&path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 10 * 16);
        assert_eq!(read_iq(&path).unwrap(), f.samples());
    }
}

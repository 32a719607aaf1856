//! Noiseless OTFDM through a TDL-C channel with genie CSI: symbol EVM of the
//! two despreading receivers as the maximum speed grows.

use otfdm::channel::{apply_channel, build_tdlc_paths, kmh_to_mps};
use otfdm::coding::{qpsk_map, random_bits};
use otfdm::grid::{ComplexGrid, FrameConfig};
use otfdm::rx::{analytic_dot_channel, lmmse_despread, otfdm_front_end, td_equalize_despread, EqualizedGrid};
use otfdm::sim::metrics::evm_db;
use otfdm::waveform::otfdm_modulate;

fn evm(eq: &EqualizedGrid, x: &ComplexGrid) -> f64 {
    let (m, n) = x.shape();
    let unbiased: Vec<_> = (0..n).flat_map(|j| (0..m).map(move |i| eq.unbiased(i, j).0)).collect();
    evm_db(&unbiased, x.as_slice())
}

fn main() -> otfdm::Result<()> {
    let cfg = FrameConfig::new(64, 8, 36, 15e3, 24e9)?;
    let (m, n) = (cfg.m(), cfg.n());
    let x = ComplexGrid::from_col_major(m, n, qpsk_map(&random_bits(2 * m * n, 3))?)?;
    let frame = otfdm_modulate(&x, &cfg, false)?;
    println!("64x8 frame, 100 ns rms TDL-C, noiseless, genie CSI");
    println!("{:>6} {:>10} {:>10} {:>10}", "km/h", "nu M t_s", "TD-EQ dB", "LMMSE dB");
    for kmh in [0.0, 50.0, 100.0, 200.0, 500.0, 1000.0] {
        let ps = build_tdlc_paths(100e-9, kmh_to_mps(kmh), &cfg, 11)?;
        let ypp = otfdm_front_end(&apply_channel(&frame, &ps, &cfg)?, &cfg)?;
        let ch = analytic_dot_channel(&ps, &cfg);
        // A tiny regularizer keeps LMMSE well defined at faded tones.
        let td = td_equalize_despread(&ypp, &ch, 0.0)?;
        let lm = lmmse_despread(&ypp, &ch, 1e-6)?;
        println!(
            "{kmh:>6} {:>10.4} {:>10.1} {:>10.1}",
            ps.max_abs_doppler() * m as f64 * cfg.t_s(),
            evm(&td, &x),
            evm(&lm, &x)
        );
    }
    Ok(())
}

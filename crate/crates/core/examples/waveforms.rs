//! One data grid through every transmitter: frame length, mean power and
//! PAPR, plus an IQ dump of the OTFDM frame.

use otfdm::coding::{qpsk_map, random_bits};
use otfdm::grid::{ComplexGrid, FrameConfig};
use otfdm::waveform::{ofdm_modulate_large, ofdm_modulate_short, otfdm_modulate, otfs_modulate_dzt, read_iq, TxFrame};

fn papr_db(frame: &TxFrame) -> f64 {
    let s = frame.samples();
    let peak = s.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let mean = s.iter().map(|z| z.norm_sqr()).sum::<f64>() / s.len() as f64;
    10.0 * (peak / mean).log10()
}

fn main() -> otfdm::Result<()> {
    let cfg = FrameConfig::baseline();
    let (m, n) = (cfg.m(), cfg.n());
    let x = ComplexGrid::from_col_major(m, n, qpsk_map(&random_bits(2 * m * n, 5))?)?;
    let frames = [
        ("large OFDM", ofdm_modulate_large(&x, &cfg)?),
        ("short OFDM", ofdm_modulate_short(&x, &cfg, cfg.n_cp() / n)?),
        ("OTFS (DZT)", otfs_modulate_dzt(&x, &cfg)?),
        ("OTFDM", otfdm_modulate(&x, &cfg, false)?),
        ("DFT-s-OTFDM", otfdm_modulate(&x, &cfg, true)?),
    ];
    println!("{:>12} {:>7} {:>5} {:>8} {:>8}", "waveform", "samples", "cp", "power", "PAPR dB");
    for (name, f) in &frames {
        println!(
            "{name:>12} {:>7} {:>5} {:>8.4} {:>8.2}",
            f.samples().len(),
            f.cp_len(),
            f.body_power(),
            papr_db(f)
        );
    }

    let path = std::env::temp_dir().join("otfdm_frame.iq");
    frames[3].1.write_iq(&path)?;
    let back = read_iq(&path)?;
    println!("wrote {} ({} samples, round trip exact: {})", path.display(), back.len(), back == frames[3].1.samples());
    Ok(())
}

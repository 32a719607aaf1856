//! The OTFDM transmit body is a large MN-point OFDM symbol whose tones carry
//! the comb-interleaved data grid. Checks that on random grids and shows the
//! interleaving on a tiny example.

use otfdm::coding::{qpsk_map, random_bits};
use otfdm::grid::{comb_interleave, ComplexGrid, FrameConfig};
use otfdm::waveform::check_ofdm_equivalence;

fn qpsk_grid(m: usize, n: usize, seed: u64) -> ComplexGrid {
    let symbols = qpsk_map(&random_bits(2 * m * n, seed)).unwrap();
    ComplexGrid::from_col_major(m, n, symbols).unwrap()
}

fn main() -> otfdm::Result<()> {
    // Tone q = mN + n carries X[m, n].
    let tiny = ComplexGrid::from_fn(3, 2, |m, n| num_complex::Complex64::new((10 * m + n) as f64, 0.0));
    let order: Vec<_> = comb_interleave(&tiny).iter().map(|z| z.re as u32).collect();
    println!("3x2 grid, tones 0..6 carry X[m,n] = 10m+n: {order:?}");

    for (m, n) in [(4, 2), (8, 4), (64, 8), (512, 8)] {
        let cfg = FrameConfig::new(m, n, m / 2, 15e3, 24e9)?;
        let worst = (0..20)
            .map(|s| check_ofdm_equivalence(&qpsk_grid(m, n, s), &cfg))
            .collect::<otfdm::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!("M={m:3} N={n}: max |OTFDM - large OFDM| over 20 grids = {worst:.2e}");
    }
    Ok(())
}

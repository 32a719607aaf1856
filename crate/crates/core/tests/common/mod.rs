#![allow(dead_code)]

use num_complex::Complex64;
use otfdm::channel::{Path, PathSet};
use otfdm::coding::{qpsk_map, random_bits};
use otfdm::grid::{ComplexGrid, FrameConfig};
use otfdm::rng;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn frame(m: usize, n: usize, n_cp: usize) -> FrameConfig {
    FrameConfig::new(m, n, n_cp, 15e3, 24e9).unwrap()
}

pub fn gaussian_grid(m: usize, n: usize, seed: u64) -> ComplexGrid {
    let mut r = rng::seeded(seed);
    ComplexGrid::from_fn(m, n, |_, _| {
        Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn qpsk_grid(m: usize, n: usize, seed: u64) -> ComplexGrid {
    ComplexGrid::from_col_major(m, n, qpsk_map(&random_bits(2 * m * n, seed)).unwrap()).unwrap()
}

/// `count` paths with delays in `0..max_delay` and Dopplers in `[0, max_nu)`.
pub fn random_paths(count: usize, max_delay: usize, max_nu: f64, seed: u64) -> PathSet {
    let mut r = rng::seeded(seed);
    PathSet::new(
        (0..count)
            .map(|_| {
                let h = Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal));
                Path::new(
                    h / (2.0 * count as f64).sqrt(),
                    r.random_range(0..max_delay),
                    r.random::<f64>() * max_nu,
                )
            })
            .collect(),
    )
}

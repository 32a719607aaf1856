//! Complex grids, frame dimensioning and the unitary transforms every other
//! module is built on.
//!
//! Index conventions are zero-based throughout: `grid[(i, j)]` is row `i`,
//! column `j`. Grids are stored column-major, so [`ComplexGrid::vectorize`]
//! is the storage order itself and `vec(A)[i + j * rows] == A[i, j]`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Dimensioning of one OTFDM / OFDM frame.
///
/// `m` subcarriers per sub-symbol, `n` sub-symbols (Doppler slots). The large
/// symbol has `m * n` samples at period `t_s = 1 / (m * n * delta_f)`; the
/// sub-symbol spacing is `delta_f_prime = n * delta_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    m: usize,
    n: usize,
    n_cp: usize,
    delta_f: f64,
    f_c: f64,
}

impl FrameConfig {
    pub fn new(m: usize, n: usize, n_cp: usize, delta_f: f64, f_c: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Config(format!("M and N must be positive (M={m}, N={n})")));
        }
        if n_cp >= m * n {
            return Err(Error::Config(format!(
                "CP length {n_cp} must be shorter than the {}-sample body",
                m * n
            )));
        }
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return Err(Error::Config(format!("subcarrier spacing {delta_f} must be positive")));
        }
        if !(f_c.is_finite() && f_c >= 0.0) {
            return Err(Error::Config(format!("carrier frequency {f_c} must be non-negative")));
        }
        Ok(Self { m, n, n_cp, delta_f, f_c })
    }

    /// The link-level parameter set used for the OFDM/OTFDM comparison:
    /// 24 GHz carrier, 15 kHz large-symbol spacing, M=512, N=8, 288-sample CP.
    pub fn baseline() -> Self {
        Self::new(512, 8, 288, 15e3, 24e9).expect("static parameters are valid")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_cp(&self) -> usize {
        self.n_cp
    }

    /// Large-symbol subcarrier spacing (Hz).
    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    /// Sub-symbol subcarrier spacing (Hz), exactly `n * delta_f`.
    pub fn delta_f_prime(&self) -> f64 {
        self.n as f64 * self.delta_f
    }

    /// Sample period (s).
    pub fn t_s(&self) -> f64 {
        1.0 / (self.body_len() as f64 * self.delta_f)
    }

    pub fn f_c(&self) -> f64 {
        self.f_c
    }

    /// Samples in one large-symbol body, `m * n`.
    pub fn body_len(&self) -> usize {
        self.m * self.n
    }

    pub fn bandwidth(&self) -> f64 {
        self.body_len() as f64 * self.delta_f
    }

    pub fn with_n_cp(self, n_cp: usize) -> Result<Self> {
        Self::new(self.m, self.n, n_cp, self.delta_f, self.f_c)
    }
}

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Builds a grid from column-major data, rejecting non-finite entries.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::shape(
                format!("{rows}x{cols} grid ({} values)", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a grid from a list of rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::shape("rectangular rows", "ragged rows"));
        }
        let mut data = Vec::with_capacity(r * c);
        for j in 0..c {
            data.extend(rows.iter().map(|row| row[j]));
        }
        Self::from_col_major(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Column-major stacking, `vec(A)[i + j * rows] = A[i, j]`.
    pub fn vectorize(&self) -> Vec<Complex64> {
        self.data.clone()
    }

    pub fn devectorize(rows: usize, cols: usize, v: &[Complex64]) -> Result<Self> {
        Self::from_col_major(rows, cols, v.to_vec())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn energy(&self) -> f64 {
        energy(&self.data)
    }

    pub fn expect_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.shape() != (rows, cols) {
            return Err(Error::shape(
                format!("{rows}x{cols}"),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexGrid {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for ComplexGrid {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

pub fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

/// Cached rustfft plan for this thread.
pub(crate) fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// In-place unitary DFT. Forward kernel `e^{-j2πnk/len}/√len`, inverse
/// kernel `e^{+j2πnk/len}/√len`.
pub fn unitary_dft_in_place(v: &mut [Complex64], inverse: bool) -> Result<()> {
    let len = v.len();
    if len == 0 {
        return Err(Error::EmptyTransform);
    }
    if len > 1 {
        plan(len, inverse).process(v);
    }
    let scale = 1.0 / (len as f64).sqrt();
    v.iter_mut().for_each(|z| *z *= scale);
    Ok(())
}

pub fn unitary_dft(v: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let mut out = v.to_vec();
    unitary_dft_in_place(&mut out, inverse)?;
    Ok(out)
}

/// Applies a unitary DFT to every column of `grid` in place.
pub fn dft_columns(grid: &mut ComplexGrid, inverse: bool) {
    let rows = grid.rows();
    if rows == 1 {
        return;
    }
    let fft = plan(rows, inverse);
    let scale = 1.0 / (rows as f64).sqrt();
    // Columns are contiguous; rustfft batches over chunks of `rows`.
    fft.process(grid.as_mut_slice());
    grid.as_mut_slice().iter_mut().for_each(|z| *z *= scale);
}

/// Applies a unitary DFT along every row of `grid`.
pub fn dft_rows(grid: &ComplexGrid, inverse: bool) -> ComplexGrid {
    let mut t = grid.transpose();
    dft_columns(&mut t, inverse);
    t.transpose()
}

/// Comb interleaving: `out[m * N + n] = X[m, n]`, i.e. `vec(Xᵀ)`.
pub fn comb_interleave(x: &ComplexGrid) -> Vec<Complex64> {
    let (m, n) = x.shape();
    let mut out = Vec::with_capacity(m * n);
    for mi in 0..m {
        for ni in 0..n {
            out.push(x[(mi, ni)]);
        }
    }
    out
}

pub fn comb_deinterleave(v: &[Complex64], m: usize, n: usize) -> Result<ComplexGrid> {
    if v.len() != m * n {
        return Err(Error::shape(format!("{} samples", m * n), v.len()));
    }
    Ok(ComplexGrid::from_fn(m, n, |mi, ni| v[mi * n + ni]))
}

//! Gray QPSK with soft demapping and a rate-1/2 regular (3,6) LDPC code.
//!
//! LLRs are `log P(b=0) / P(b=1)`, clipped to ±[`LLR_CLIP`]. The code is
//! built by progressive edge growth from a seed and stored with its columns
//! permuted so that codewords read `[message | parity]`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

pub const LLR_CLIP: f64 = 30.0;
pub const MIN_SUM_SCALE: f64 = 0.75;
pub const DEFAULT_MAX_ITER: usize = 50;

const VAR_DEGREE: usize = 3;
const CHECK_DEGREE: usize = 6;

/// `(b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / √2`.
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::shape("even bit count", bits.len()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let level = |b: u8| if b & 1 == 0 { s } else { -s };
    Ok(bits.chunks_exact(2).map(|p| Complex64::new(level(p[0]), level(p[1]))).collect())
}

/// Hard decisions, two bits per symbol.
pub fn qpsk_demap_hard(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|z| [u8::from(z.re < 0.0), u8::from(z.im < 0.0)])
        .collect()
}

/// Per-bit LLRs for unbiased estimates `x̂ = x + e`, `E|e|² = noise_var`.
pub fn qpsk_llr(symbols: &[Complex64], noise_var: &[f64]) -> Result<Vec<f64>> {
    let gain = vec![1.0; symbols.len()];
    qpsk_llr_biased(symbols, &gain, noise_var)
}

/// Per-bit LLRs for estimates `x̂ = g x + e` (MMSE outputs carry `g < 1`).
/// Non-finite or non-positive noise variances mark erasures.
pub fn qpsk_llr_biased(symbols: &[Complex64], gain: &[f64], noise_var: &[f64]) -> Result<Vec<f64>> {
    if gain.len() != symbols.len() || noise_var.len() != symbols.len() {
        return Err(Error::shape(
            format!("{} gains and variances", symbols.len()),
            format!("{} and {}", gain.len(), noise_var.len()),
        ));
    }
    let scale = 2.0 * std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(2 * symbols.len());
    for ((z, &g), &v) in symbols.iter().zip(gain).zip(noise_var) {
        if !(v.is_finite() && v > 0.0) || g <= 0.0 {
            out.extend([0.0, 0.0]);
            continue;
        }
        let c = scale * g / v;
        out.push((c * z.re).clamp(-LLR_CLIP, LLR_CLIP));
        out.push((c * z.im).clamp(-LLR_CLIP, LLR_CLIP));
    }
    Ok(out)
}

/// Information or coded bits with the code dimensions they belong to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock {
    pub bits: Vec<u8>,
    pub k_info: usize,
    pub n_code: usize,
}

/// Sparse parity-check code with a dense systematic encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    seed: u64,
    /// Check indices of every variable.
    col_checks: Vec<Vec<usize>>,
    /// Variable indices of every check.
    row_vars: Vec<Vec<usize>>,
    /// Bit-packed parity rows: parity bit `i` is the XOR of the message bits
    /// set in `encoder[i]`.
    encoder: Vec<Vec<u64>>,
}

/// Regular (3,6) code with `k_info` message bits. Rank-deficient draws are
/// rebuilt with the next seed; [`LdpcCode::seed`] reports the one used.
pub fn ldpc_build(k_info: usize, rate: f64, seed: u64) -> Result<LdpcCode> {
    if (rate - 0.5).abs() > 1e-12 {
        return Err(Error::Ldpc(format!("rate {rate} unsupported (only 1/2)")));
    }
    if k_info < 64 {
        return Err(Error::Ldpc(format!("k_info {k_info} below 64")));
    }
    for attempt in 0..16 {
        let s = seed.wrapping_add(attempt);
        let col_checks = peg(2 * k_info, k_info, s);
        if let Some(code) = LdpcCode::from_columns(col_checks, s) {
            return Ok(code);
        }
    }
    Err(Error::Ldpc(format!("no full-rank code within 16 seeds from {seed}")))
}

/// Progressive edge growth: each new edge goes to a check outside the
/// variable's current neighbourhood (or, failing that, the most distant
/// layer), preferring the lowest check degree with random tie-breaks.
fn peg(n: usize, m: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut r = rng::seeded(seed);
    let mut col_checks: Vec<Vec<usize>> = vec![Vec::with_capacity(VAR_DEGREE); n];
    let mut row_vars: Vec<Vec<usize>> = vec![Vec::with_capacity(CHECK_DEGREE); m];
    let mut check_seen = vec![usize::MAX; m];
    let mut var_seen = vec![usize::MAX; n];
    let mut stamp = 0usize;

    for v in 0..n {
        for _ in 0..VAR_DEGREE {
            let candidates: Vec<usize> = if col_checks[v].is_empty() {
                (0..m).collect()
            } else {
                stamp += 1;
                far_checks(v, &col_checks, &row_vars, &mut check_seen, &mut var_seen, stamp)
            };
            let usable = |c: &usize| row_vars[*c].len() < CHECK_DEGREE && !col_checks[v].contains(c);
            let open: Vec<usize> = candidates.into_iter().filter(usable).collect();
            let pool = if open.is_empty() { (0..m).filter(usable).collect() } else { open };
            let min_deg = pool.iter().map(|&c| row_vars[c].len()).min().expect("m > degree");
            let best: Vec<usize> = pool.into_iter().filter(|&c| row_vars[c].len() == min_deg).collect();
            let c = best[r.random_range(0..best.len())];
            col_checks[v].push(c);
            row_vars[c].push(v);
        }
    }
    col_checks
}

/// Checks not reachable from `v`, or the deepest layer if the expansion
/// reaches every check.
fn far_checks(
    v: usize,
    col_checks: &[Vec<usize>],
    row_vars: &[Vec<usize>],
    check_seen: &mut [usize],
    var_seen: &mut [usize],
    stamp: usize,
) -> Vec<usize> {
    let m = row_vars.len();
    var_seen[v] = stamp;
    let mut frontier = col_checks[v].clone();
    frontier.iter().for_each(|&c| check_seen[c] = stamp);
    let mut reached = frontier.len();
    loop {
        let mut next = Vec::new();
        for &c in &frontier {
            for &u in &row_vars[c] {
                if var_seen[u] == stamp {
                    continue;
                }
                var_seen[u] = stamp;
                for &c2 in &col_checks[u] {
                    if check_seen[c2] != stamp {
                        check_seen[c2] = stamp;
                        next.push(c2);
                    }
                }
            }
        }
        if next.is_empty() {
            return (0..m).filter(|&c| check_seen[c] != stamp).collect();
        }
        if reached + next.len() == m {
            return next;
        }
        reached += next.len();
        frontier = next;
    }
}

fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl LdpcCode {
    /// Gaussian elimination over GF(2); pivot columns become parity bits and
    /// move to the end. `None` when the checks are rank deficient.
    fn from_columns(col_checks: Vec<Vec<usize>>, seed: u64) -> Option<Self> {
        let n = col_checks.len();
        let m = col_checks.iter().flatten().max().map_or(0, |&c| c + 1);
        let w = words(n);
        let mut rows = vec![vec![0u64; w]; m];
        for (v, checks) in col_checks.iter().enumerate() {
            for &c in checks {
                rows[c][v / 64] ^= 1 << (v % 64);
            }
        }
        let mut pivots = Vec::with_capacity(m);
        let mut rank = 0;
        for col in 0..n {
            if rank == m {
                break;
            }
            let (wi, bit) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..m).find(|&r| rows[r][wi] & bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[wi] & bit != 0 {
                    row.iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
                }
            }
            pivots.push(col);
            rank += 1;
        }
        if rank < m {
            return None;
        }
        let k = n - m;
        let is_pivot = {
            let mut f = vec![false; n];
            pivots.iter().for_each(|&p| f[p] = true);
            f
        };
        // New order: message columns (non-pivots, ascending), then pivots.
        let order: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).chain(pivots.iter().copied()).collect();
        let mut new_index = vec![0; n];
        order.iter().enumerate().for_each(|(new, &old)| new_index[old] = new);

        let kw = words(k);
        let encoder = rows
            .iter()
            .map(|row| {
                let mut e = vec![0u64; kw];
                for (j, &old) in order[..k].iter().enumerate() {
                    if row[old / 64] >> (old % 64) & 1 == 1 {
                        e[j / 64] |= 1 << (j % 64);
                    }
                }
                e
            })
            .collect();
        let mut permuted = vec![Vec::new(); n];
        for (old, checks) in col_checks.into_iter().enumerate() {
            permuted[new_index[old]] = checks;
        }
        let mut row_vars = vec![Vec::new(); m];
        for (v, checks) in permuted.iter().enumerate() {
            for &c in checks {
                row_vars[c].push(v);
            }
        }
        Some(Self {
            n,
            k,
            seed,
            col_checks: permuted,
            row_vars,
            encoder,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.row_vars.len()
    }

    /// Seed the code was actually built from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edges(&self) -> usize {
        self.col_checks.iter().map(Vec::len).sum()
    }

    pub fn col_checks(&self) -> &[Vec<usize>] {
        &self.col_checks
    }

    pub fn row_vars(&self) -> &[Vec<usize>] {
        &self.row_vars
    }

    /// Systematic encoding: `[msg | parity]`.
    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        if msg.len() != self.k {
            return Err(Error::shape(format!("{} message bits", self.k), msg.len()));
        }
        let mut packed = vec![0u64; words(self.k)];
        for (j, &b) in msg.iter().enumerate() {
            if b & 1 == 1 {
                packed[j / 64] |= 1 << (j % 64);
            }
        }
        let mut cw = Vec::with_capacity(self.n);
        cw.extend(msg.iter().map(|b| b & 1));
        cw.extend(self.encoder.iter().map(|row| {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            (ones & 1) as u8
        }));
        Ok(cw)
    }

    pub fn encode_block(&self, msg: &BitBlock) -> Result<BitBlock> {
        Ok(BitBlock {
            bits: self.encode(&msg.bits)?,
            k_info: self.k,
            n_code: self.n,
        })
    }

    /// Number of unsatisfied checks.
    pub fn syndrome_weight(&self, bits: &[u8]) -> usize {
        self.row_vars
            .iter()
            .filter(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1)) == 1)
            .count()
    }

    /// Normalized min-sum with flooding schedule.
    pub fn decode(&self, llr: &[f64], max_iter: usize) -> Result<DecodeOutcome> {
        if llr.len() != self.n {
            return Err(Error::shape(format!("{} LLRs", self.n), llr.len()));
        }
        let channel: Vec<f64> = llr.iter().map(|l| l.clamp(-LLR_CLIP, LLR_CLIP)).collect();
        let hard = |post: &[f64]| -> Vec<u8> { post.iter().map(|&l| u8::from(l < 0.0)).collect() };
        let mut bits = hard(&channel);
        if self.syndrome_weight(&bits) == 0 {
            return Ok(DecodeOutcome {
                bits,
                converged: true,
                iterations: 0,
                k: self.k,
            });
        }
        // Messages are stored per (check, position in check).
        let offsets: Vec<usize> = std::iter::once(0)
            .chain(self.row_vars.iter().scan(0, |acc, r| {
                *acc += r.len();
                Some(*acc)
            }))
            .collect();
        let mut c2v = vec![0.0f64; offsets[self.m()]];
        let mut posterior = channel.clone();
        let mut v2c = Vec::with_capacity(CHECK_DEGREE);
        for iter in 1..=max_iter {
            let mut next = channel.clone();
            for (c, vars) in self.row_vars.iter().enumerate() {
                let msgs = &mut c2v[offsets[c]..offsets[c + 1]];
                v2c.clear();
                v2c.extend(vars.iter().zip(msgs.iter()).map(|(&v, &old)| posterior[v] - old));
                let (mut min1, mut min2, mut at, mut sign) = (f64::INFINITY, f64::INFINITY, 0, false);
                for (i, &x) in v2c.iter().enumerate() {
                    let a = x.abs();
                    sign ^= x < 0.0;
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        at = i;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for (i, (&v, msg)) in vars.iter().zip(msgs.iter_mut()).enumerate() {
                    let mag = MIN_SUM_SCALE * if i == at { min2 } else { min1 };
                    let negative = sign ^ (v2c[i] < 0.0);
                    *msg = if negative { -mag } else { mag };
                    next[v] += *msg;
                }
            }
            posterior = next;
            bits = hard(&posterior);
            if self.syndrome_weight(&bits) == 0 {
                return Ok(DecodeOutcome {
                    bits,
                    converged: true,
                    iterations: iter,
                    k: self.k,
                });
            }
        }
        Ok(DecodeOutcome {
            bits,
            converged: false,
            iterations: max_iter,
            k: self.k,
        })
    }

    /// Standard alist text: dimensions, degree bounds, degrees, then 1-based
    /// adjacency per column and per row, zero padded.
    pub fn to_alist(&self) -> String {
        let m = self.m();
        let max_col = self.col_checks.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.row_vars.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = String::new();
        let line = |s: &mut String, items: &mut dyn Iterator<Item = usize>| {
            let parts: Vec<String> = items.map(|x| x.to_string()).collect();
            writeln!(s, "{}", parts.join(" ")).expect("writing to a String");
        };
        line(&mut s, &mut [self.n, m].into_iter());
        line(&mut s, &mut [max_col, max_row].into_iter());
        line(&mut s, &mut self.col_checks.iter().map(Vec::len));
        line(&mut s, &mut self.row_vars.iter().map(Vec::len));
        for checks in &self.col_checks {
            line(&mut s, &mut checks.iter().map(|c| c + 1).chain(std::iter::repeat_n(0, max_col - checks.len())));
        }
        for vars in &self.row_vars {
            line(&mut s, &mut vars.iter().map(|v| v + 1).chain(std::iter::repeat_n(0, max_row - vars.len())));
        }
        s
    }

    /// Parses an alist matrix and derives a systematic encoder for it. The
    /// column order is rearranged to `[message | parity]`.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut nums = text.split_whitespace().map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("alist: {t}: {e}"))));
        let mut next = || nums.next().unwrap_or_else(|| Err(Error::Parse("alist: truncated".into())));
        let (n, m) = (next()?, next()?);
        let (max_col, _max_row) = (next()?, next()?);
        let col_deg = (0..n).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let row_deg = (0..m).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let mut col_checks = Vec::with_capacity(n);
        for &d in &col_deg {
            let entries = (0..max_col).map(|_| next()).collect::<Result<Vec<_>>>()?;
            let checks: Vec<usize> = entries.into_iter().filter(|&e| e > 0).map(|e| e - 1).collect();
            if checks.len() != d || checks.iter().any(|&c| c >= m) {
                return Err(Error::Parse("alist: column list disagrees with its degree".into()));
            }
            col_checks.push(checks);
        }
        if row_deg.iter().sum::<usize>() != col_deg.iter().sum::<usize>() {
            return Err(Error::Parse("alist: row and column degrees disagree".into()));
        }
        Self::from_columns(col_checks, 0).ok_or_else(|| Error::Ldpc("alist matrix is rank deficient".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    /// Hard decisions on the whole codeword.
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
    k: usize,
}

impl DecodeOutcome {
    pub fn message(&self) -> &[u8] {
        &self.bits[..self.k]
    }
}

/// Uniform random bits from a seeded stream.
pub fn random_bits(count: usize, seed: u64) -> Vec<u8> {
    let mut r = rng::seeded(seed);
    (0..count).map(|_| r.random::<bool>() as u8).collect()
}

/// Random permutation of `0..len`, used when a caller wants a bit interleaver.
pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    p.shuffle(&mut rng::seeded(seed));
    p
}

//! Streaming convolution of a vector-valued input stream against a bank of
//! length-`m` kernels.
//!
//! Fast mode uses dyadic blocks: after `t` pushes, with `2^k` the largest
//! power of two dividing `t` and `L = min(2^k, P)` (`P` the power of two at
//! or above `m`), the block of inputs `[t - L, t)` is convolved once against
//! the kernel prefix of length `2L - 1` and its contribution to outputs
//! `[t, t + L)` is added to a ring accumulator. Every (input, output) pair
//! within the window is covered by exactly one block, so queries are exact
//! up to rounding. The per-push cost is `O(log^2 P)` amortized.

use std::sync::Arc;

use nalgebra::DVector;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_dim, Error, Result};
use crate::filters::FilterBank;

/// Above this memory `Auto` selects the fast engine.
pub const AUTO_FAST_THRESHOLD: usize = 512;

/// Blocks up to this length are convolved directly rather than by FFT.
const DIRECT_BLOCK_MAX: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMode {
    Direct,
    Fast,
    #[default]
    Auto,
}

impl ConvMode {
    fn resolve(self, m: usize) -> ConvMode {
        match self {
            ConvMode::Auto if m >= AUTO_FAST_THRESHOLD => ConvMode::Fast,
            ConvMode::Auto => ConvMode::Direct,
            other => other,
        }
    }
}

/// Modeled cost of one complex FFT of size `n`.
fn fft_ops(n: usize) -> u64 {
    5 * n as u64 * n.trailing_zeros() as u64
}

/// Linear convolution by definition.
pub fn direct_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Linear convolution through a zero-padded power-of-two FFT.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    let n = len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |x: &[f64]| {
        let mut v = vec![Complex::new(0.0, 0.0); n];
        for (dst, &src) in v.iter_mut().zip(x) {
            dst.re = src;
        }
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..len].iter().map(|c| c.re * scale).collect()
}

struct Level {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Transformed kernel prefixes, one per filter; built on first use.
    kernels: Option<Vec<Vec<Complex<f64>>>>,
}

/// Streaming engine computing `W~_{t-1:t-m} phi_i` for every filter `i`.
pub struct StreamConvolver {
    m: usize,
    h: usize,
    d: usize,
    mode: ConvMode,
    kernels: Vec<Vec<f64>>,
    t: usize,
    ops: u64,
    /// Ring of recent inputs, `ring_len * d`.
    inputs: Vec<f64>,
    ring_len: usize,
    /// Fast mode output accumulator, `h * ring_len * d`.
    acc: Vec<f64>,
    /// Direct mode scratch output, `h * d`.
    out: Vec<f64>,
    levels: Vec<Level>,
    scratch: Vec<Complex<f64>>,
    block_hat: Vec<Vec<Complex<f64>>>,
}

impl std::fmt::Debug for StreamConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamConvolver")
            .field("m", &self.m)
            .field("h", &self.h)
            .field("d", &self.d)
            .field("mode", &self.mode)
            .field("t", &self.t)
            .finish_non_exhaustive()
    }
}

impl StreamConvolver {
    pub fn new(bank: &FilterBank, d: usize, mode: ConvMode) -> Result<Self> {
        let kernels = (0..bank.h).map(|i| bank.phi(i).to_vec()).collect();
        Self::from_kernels(kernels, d, mode)
    }

    /// Builds an engine over arbitrary kernels of a common length `m`.
    pub fn from_kernels(kernels: Vec<Vec<f64>>, d: usize, mode: ConvMode) -> Result<Self> {
        let m = kernels.first().map_or(0, Vec::len);
        if m == 0 || d == 0 {
            return Err(Error::invalid("convolver needs at least one nonempty kernel and d > 0"));
        }
        if kernels.iter().any(|k| k.len() != m) {
            return Err(Error::invalid("all kernels must share one length"));
        }
        let h = kernels.len();
        let mode = mode.resolve(m);
        let (ring_len, acc_len, out_len) = match mode {
            ConvMode::Fast => {
                let p = m.next_power_of_two();
                (p, h * p * d, 0)
            }
            _ => (m, 0, h * d),
        };
        let mut levels = Vec::new();
        if mode == ConvMode::Fast {
            let mut planner = FftPlanner::new();
            let mut l = 1;
            while l <= ring_len {
                let n = 2 * l;
                levels.push(Level {
                    fwd: planner.plan_fft_forward(n),
                    inv: planner.plan_fft_inverse(n),
                    kernels: None,
                });
                l *= 2;
            }
        }
        Ok(StreamConvolver {
            m,
            h,
            d,
            mode,
            kernels,
            t: 0,
            ops: 0,
            inputs: vec![0.0; ring_len * d],
            ring_len,
            acc: vec![0.0; acc_len],
            out: vec![0.0; out_len],
            levels,
            scratch: Vec::new(),
            block_hat: Vec::new(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mode(&self) -> ConvMode {
        self.mode
    }

    /// Number of pushes so far.
    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    /// Arithmetic operations performed so far (exact multiply-adds plus a
    /// `5 N log2 N` model per transform).
    pub fn ops(&self) -> u64 {
        self.ops
    }

    /// Floats held by the engine's buffers. Independent of the stream length.
    pub fn allocated_floats(&self) -> usize {
        let spectra: usize = self
            .levels
            .iter()
            .filter_map(|l| l.kernels.as_ref())
            .map(|k| k.iter().map(|v| 2 * v.len()).sum::<usize>())
            .sum();
        self.h * self.m
            + self.inputs.len()
            + self.acc.len()
            + self.out.len()
            + spectra
            + 2 * self.scratch.len()
            + self.block_hat.iter().map(|v| 2 * v.len()).sum::<usize>()
    }

    pub fn push(&mut self, w: &[f64]) -> Result<()> {
        check_dim("convolver input", self.d, w.len())?;
        let d = self.d;
        let slot = self.t % self.ring_len;
        self.inputs[slot * d..(slot + 1) * d].copy_from_slice(w);
        if self.mode == ConvMode::Fast {
            // the output for the previous time is consumed; its slot is reused
            // for time t + ring_len
            let p = self.ring_len;
            for i in 0..self.h {
                let base = (i * p + slot) * d;
                self.acc[base..base + d].fill(0.0);
            }
        }
        self.t += 1;
        match self.mode {
            ConvMode::Fast => self.fold_block(),
            _ => self.direct_outputs(),
        }
        Ok(())
    }

    /// `W~_{t-1:t-m} phi_i` after the pushes so far.
    pub fn query(&self, i: usize) -> Result<DVector<f64>> {
        Ok(DVector::from_column_slice(self.query_slice(i)?))
    }

    pub fn query_slice(&self, i: usize) -> Result<&[f64]> {
        if i >= self.h {
            return Err(Error::FilterIndex { index: i, h: self.h });
        }
        let d = self.d;
        Ok(match self.mode {
            ConvMode::Fast => {
                let slot = self.t % self.ring_len;
                let base = (i * self.ring_len + slot) * d;
                &self.acc[base..base + d]
            }
            _ => &self.out[i * d..(i + 1) * d],
        })
    }

    fn direct_outputs(&mut self) {
        let d = self.d;
        let t = self.t;
        let span = t.min(self.m);
        self.out.fill(0.0);
        for i in 0..self.h {
            for s in 1..=span {
                let coef = self.kernels[i][s - 1];
                let slot = (t - s) % self.ring_len;
                let src = &self.inputs[slot * d..(slot + 1) * d];
                let dst = &mut self.out[i * d..(i + 1) * d];
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o += coef * x;
                }
            }
        }
        self.ops += (self.h * span * d) as u64;
    }

    fn fold_block(&mut self) {
        let t = self.t;
        let level = (t.trailing_zeros() as usize).min(self.levels.len() - 1);
        let l = 1usize << level;
        let glen = (2 * l - 1).min(self.m);
        if l <= DIRECT_BLOCK_MAX {
            self.fold_direct(l, glen);
        } else {
            self.fold_fft(level, l, glen);
        }
    }

    /// `y[t + i] += sum_r w[t - L + r] g[i + L - 1 - r]`.
    fn fold_direct(&mut self, l: usize, glen: usize) {
        let t = self.t;
        let d = self.d;
        let p = self.ring_len;
        let mut macs = 0u64;
        for out_i in 0..l {
            let oslot = (t + out_i) % p;
            // q = out_i + l - 1 - r < glen
            let r_min = (out_i + l).saturating_sub(glen);
            for r in r_min..l {
                let q = out_i + l - 1 - r;
                let islot = (t - l + r) % p;
                for f in 0..self.h {
                    let coef = self.kernels[f][q];
                    let base = (f * p + oslot) * d;
                    for c in 0..d {
                        self.acc[base + c] += coef * self.inputs[islot * d + c];
                    }
                }
                macs += (self.h * d) as u64;
            }
        }
        self.ops += macs;
    }

    fn fold_fft(&mut self, level: usize, l: usize, glen: usize) {
        let t = self.t;
        let d = self.d;
        let p = self.ring_len;
        let n = 2 * l;
        let zero = Complex::new(0.0, 0.0);
        if self.levels[level].kernels.is_none() {
            let fwd = self.levels[level].fwd.clone();
            let spectra = self
                .kernels
                .iter()
                .map(|k| {
                    let mut v = vec![zero; n];
                    for (dst, &src) in v.iter_mut().zip(&k[..glen]) {
                        dst.re = src;
                    }
                    fwd.process(&mut v);
                    v
                })
                .collect();
            self.levels[level].kernels = Some(spectra);
            self.ops += self.h as u64 * fft_ops(n);
        }
        let lv = &self.levels[level];
        let kernels = lv.kernels.as_ref().expect("built above");
        self.block_hat.resize_with(d, Vec::new);
        for c in 0..d {
            let buf = &mut self.block_hat[c];
            buf.clear();
            buf.resize(n, zero);
            for r in 0..l {
                buf[r].re = self.inputs[((t - l + r) % p) * d + c];
            }
            lv.fwd.process(buf);
        }
        let scale = 1.0 / n as f64;
        self.scratch.resize(n, zero);
        for (f, kh) in kernels.iter().enumerate() {
            for c in 0..d {
                for ((s, b), k) in self.scratch.iter_mut().zip(&self.block_hat[c]).zip(kh) {
                    *s = b * k;
                }
                lv.inv.process(&mut self.scratch);
                for out_i in 0..l {
                    let oslot = (t + out_i) % p;
                    self.acc[(f * p + oslot) * d + c] += self.scratch[out_i + l - 1].re * scale;
                }
            }
        }
        let transforms = (d + self.h * d) as u64;
        self.ops += transforms * fft_ops(n) + (self.h * d) as u64 * (6 * n + l) as u64;
    }
}

/// Sliding-window products by definition, for every time step:
/// `out[t][i] = sum_{s=1}^{min(t, m)} kernel_i[s-1] w_{t-s}` for `t = 1..=T`.
pub fn naive_stream(kernels: &[Vec<f64>], ws: &[DVector<f64>]) -> Vec<Vec<DVector<f64>>> {
    let m = kernels.first().map_or(0, Vec::len);
    (1..=ws.len())
        .map(|t| {
            kernels
                .iter()
                .map(|k| {
                    let mut acc = DVector::zeros(ws[0].len());
                    for s in 1..=t.min(m) {
                        acc.axpy(k[s - 1], &ws[t - s], 1.0);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stream(seed: u64, len: usize, d: usize) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn max_dev(conv: &mut StreamConvolver, kernels: &[Vec<f64>], ws: &[DVector<f64>]) -> f64 {
        let oracle = naive_stream(kernels, ws);
        let mut worst = 0.0f64;
        for (t, w) in ws.iter().enumerate() {
            conv.push(w.as_slice()).unwrap();
            for (i, expect) in oracle[t].iter().enumerate() {
                worst = worst.max((conv.query(i).unwrap() - expect).amax());
            }
        }
        worst
    }

    #[test]
    fn fresh_engine_queries_zero() {
        for mode in [ConvMode::Direct, ConvMode::Fast] {
            let c = StreamConvolver::from_kernels(vec![vec![1.0, 2.0, 3.0]; 2], 3, mode).unwrap();
            assert_eq!(c.query(1).unwrap(), DVector::zeros(3));
            assert!(c.query(2).is_err());
        }
    }

    #[test]
    fn pair_kernel_example() {
        for mode in [ConvMode::Direct, ConvMode::Fast] {
            let mut c = StreamConvolver::from_kernels(vec![vec![1.0, 1.0]], 1, mode).unwrap();
            let mut got = Vec::new();
            for w in [1.0, 2.0, 3.0] {
                c.push(&[w]).unwrap();
                got.push(c.query(0).unwrap()[0]);
            }
            assert_eq!(got, vec![1.0, 3.0, 5.0]);
        }
    }

    #[test]
    fn memory_one_reduction() {
        let mut c = StreamConvolver::from_kernels(vec![vec![0.7]], 2, ConvMode::Fast).unwrap();
        for w in random_stream(1, 20, 2) {
            c.push(w.as_slice()).unwrap();
            assert!((c.query(0).unwrap() - 0.7 * &w).amax() < 1e-15);
        }
    }

    #[test]
    fn fast_matches_naive_on_odd_memories() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in [3, 5, 33, 64, 100, 129] {
            let kernels: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ws = random_stream(m as u64, 700, 2);
            let mut fast = StreamConvolver::from_kernels(kernels.clone(), 2, ConvMode::Fast).unwrap();
            assert!(max_dev(&mut fast, &kernels, &ws) <= 1e-9, "m = {m}");
            let mut direct = StreamConvolver::from_kernels(kernels.clone(), 2, ConvMode::Direct).unwrap();
            assert!(max_dev(&mut direct, &kernels, &ws) <= 1e-12, "m = {m}");
        }
    }

    #[test]
    fn filter_bank_stream_matches_oracle() {
        let bank = FilterBank::new(256, 0.05, 8).unwrap();
        let kernels: Vec<Vec<f64>> = (0..8).map(|i| bank.phi(i).to_vec()).collect();
        let ws = random_stream(11, 4096, 1);
        let mut c = StreamConvolver::new(&bank, 1, ConvMode::Fast).unwrap();
        assert!(max_dev(&mut c, &kernels, &ws) <= 1e-9);
    }

    #[test]
    fn fourier_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (la, lb) in [(1, 1), (7, 13), (64, 64), (100, 3)] {
            let a: Vec<f64> = (0..la).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..lb).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = fft_convolve(&a, &b);
            let g = direct_convolve(&a, &b);
            assert_eq!(f.len(), g.len());
            assert!(f.iter().zip(&g).all(|(x, y)| (x - y).abs() <= 1e-10));
        }
    }

    #[test]
    fn allocation_is_horizon_independent() {
        let bank = FilterBank::new(64, 0.1, 4).unwrap();
        let mut c = StreamConvolver::new(&bank, 2, ConvMode::Fast).unwrap();
        assert!(c.allocated_floats() <= 4 * 64 + 2 * 64 * 2 * 6);
        for w in random_stream(2, 1000, 2) {
            c.push(w.as_slice()).unwrap();
        }
        let after_1000 = c.allocated_floats();
        for w in random_stream(3, 3000, 2) {
            c.push(w.as_slice()).unwrap();
        }
        assert_eq!(c.allocated_floats(), after_1000);
    }

    #[test]
    fn auto_mode_threshold() {
        let small = StreamConvolver::from_kernels(vec![vec![1.0; 100]], 1, ConvMode::Auto).unwrap();
        assert_eq!(small.mode(), ConvMode::Direct);
        let large = StreamConvolver::from_kernels(vec![vec![1.0; 512]], 1, ConvMode::Auto).unwrap();
        assert_eq!(large.mode(), ConvMode::Fast);
    }
}

//! Batched transmit shaping and the linear RF chain between the precoder
//! and the receiver quantizer. Rows are blocks; columns are interleaved
//! (I, Q) pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::nn::Tensor;
use crate::rf::FtnChannel;
use crate::Result;

/// Floor on the pre-normalization power of a block.
const POWER_FLOOR: f64 = 1e-12;

/// Removes the per-block mean and scales to unit power per complex sample.
/// Returns the shaped samples and the per-row scale 1/√p.
pub fn shape_forward(a: &Tensor) -> (Tensor, Vec<f64>) {
    let (b, d) = a.shape();
    let m = (d / 2) as f64;
    let mut out = a.clone();
    let mut scale = Vec::with_capacity(b);
    for r in 0..b {
        let row = out.row_mut(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        row.iter_mut().for_each(|x| *x -= mean);
        let p = row.iter().map(|x| x * x).sum::<f64>() / m;
        let s = 1.0 / p.max(POWER_FLOOR).sqrt();
        row.iter_mut().for_each(|x| *x *= s);
        scale.push(s);
    }
    (out, scale)
}

/// Gradient of [`shape_forward`] given its outputs `t`.
pub fn shape_backward(t: &Tensor, scale: &[f64], dt: &Tensor) -> Tensor {
    let (b, d) = t.shape();
    let m = (d / 2) as f64;
    let mut da = Tensor::zeros(b, d);
    for r in 0..b {
        let (tr, gr) = (t.row(r), dt.row(r));
        let dot: f64 = tr.iter().zip(gr).map(|(x, g)| x * g).sum();
        let out = da.row_mut(r);
        for j in 0..d {
            out[j] = scale[r] * (gr[j] - tr[j] * dot / m);
        }
        let mean = out.iter().sum::<f64>() / d as f64;
        out.iter_mut().for_each(|x| *x -= mean);
    }
    da
}

fn split(x: &Tensor) -> Result<(Tensor, Tensor)> {
    let (b, d) = x.shape();
    let h = d / 2;
    let mut i = Vec::with_capacity(b * h);
    let mut q = Vec::with_capacity(b * h);
    for r in 0..b {
        for pair in x.row(r).chunks(2) {
            i.push(pair[0]);
            q.push(pair[1]);
        }
    }
    Ok((Tensor::from_vec(b, h, i)?, Tensor::from_vec(b, h, q)?))
}

fn merge(i: &Tensor, q: &Tensor) -> Result<Tensor> {
    let (b, h) = i.shape();
    let mut out = Vec::with_capacity(2 * b * h);
    for r in 0..b {
        for (x, y) in i.row(r).iter().zip(q.row(r)) {
            out.push(*x);
            out.push(*y);
        }
    }
    Tensor::from_vec(b, 2 * h, out)
}

/// Pulse shaping, AWGN and matched filtering for blocks of `dim` interleaved
/// values, held as explicit matrices.
#[derive(Clone, Debug)]
pub struct RfChain {
    pub channel: FtnChannel,
    signal: Tensor,
    noise: Tensor,
    dim: usize,
}

impl RfChain {
    pub fn new(alpha: f64, g: usize, dim: usize) -> Result<Self> {
        let channel = FtnChannel::new(alpha, g)?;
        let rails = dim / 2;
        Ok(Self {
            signal: channel.rail_matrix(rails),
            noise: channel.noise_matrix(rails),
            channel,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Raw white noise values per block (both rails).
    pub fn raw_noise_len(&self) -> usize {
        2 * self.channel.noise_len(self.dim / 2)
    }

    /// Noiseless matched-filter output.
    pub fn forward(&self, t: &Tensor) -> Result<Tensor> {
        let (i, q) = split(t)?;
        merge(&i.matmul_t(&self.signal)?, &q.matmul_t(&self.signal)?)
    }

    /// Adjoint of [`Self::forward`].
    pub fn adjoint(&self, dy: &Tensor) -> Result<Tensor> {
        let (i, q) = split(dy)?;
        merge(&i.matmul(&self.signal)?, &q.matmul(&self.signal)?)
    }

    /// Matched-filter output of raw noise rows laid out as [I noise | Q noise].
    pub fn filter_noise(&self, raw: &Tensor) -> Result<Tensor> {
        let n = self.raw_noise_len() / 2;
        let b = raw.rows();
        let mut i = Tensor::zeros(b, n);
        let mut q = Tensor::zeros(b, n);
        for r in 0..b {
            i.row_mut(r).copy_from_slice(&raw.row(r)[..n]);
            q.row_mut(r).copy_from_slice(&raw.row(r)[n..]);
        }
        merge(&i.matmul_t(&self.noise)?, &q.matmul_t(&self.noise)?)
    }

    /// One block's raw noise from its own seed.
    pub fn seeded_noise(&self, seed: u64, sigma: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.draw_noise(&mut rng, sigma)
    }

    pub fn draw_noise<R: Rng>(&self, rng: &mut R, sigma: f64) -> Vec<f64> {
        (0..self.raw_noise_len())
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            })
            .collect()
    }

    /// Filtered noise for a batch of seeds.
    pub fn seeded_filtered_noise(&self, seeds: &[u64], sigma: f64) -> Result<Tensor> {
        let raw: Vec<f64> = seeds.iter().flat_map(|&s| self.seeded_noise(s, sigma)).collect();
        self.filter_noise(&Tensor::from_vec(seeds.len(), self.raw_noise_len(), raw)?)
    }

    /// Filtered noise for `rows` blocks drawn from `rng`.
    pub fn random_filtered_noise<R: Rng>(&self, rows: usize, sigma: f64, rng: &mut R) -> Result<Tensor> {
        let raw: Vec<f64> = (0..rows).flat_map(|_| self.draw_noise(rng, sigma)).collect();
        self.filter_noise(&Tensor::from_vec(rows, self.raw_noise_len(), raw)?)
    }
}

/// Elementwise sign, sign(0) = +1.
pub fn quantize(y: &Tensor) -> Tensor {
    y.map(crate::nn::sign)
}

/// Adds `b` to `a` elementwise.
pub fn add(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = a.clone();
    out.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
    out
}

use serde::{Deserialize, Serialize};

use super::qpp::{invert_permutation, qpp_params, qpp_permutation};
use super::trellis::{self, Step, STATES};
use crate::{Error, Result};

pub const TAIL_BITS: usize = 12;
const NEG: f64 = -1e300;

/// Kernel used inside the constituent BCJR recursions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingAlgo {
    #[default]
    MaxLogMap,
    /// Exact Jacobian logarithm.
    LogMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurboSpec {
    pub block_length: usize,
    pub f1: usize,
    pub f2: usize,
    pub iterations: usize,
    pub algo: DecodingAlgo,
}

impl TurboSpec {
    /// Table interleaver for `k`, max-log-MAP.
    pub fn lte(k: usize, iterations: usize) -> Result<Self> {
        let (f1, f2) = qpp_params(k)?;
        Ok(Self {
            block_length: k,
            f1,
            f2,
            iterations,
            algo: DecodingAlgo::MaxLogMap,
        })
    }

    /// Coded length 3K + 12.
    pub fn coded_len(&self) -> usize {
        3 * self.block_length + TAIL_BITS
    }
}

/// Systematic and parity streams plus the 12 termination bits, laid out as
/// (x, z) pairs of the first encoder followed by those of the second.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedBlock {
    pub systematic: Vec<u8>,
    pub parity1: Vec<u8>,
    pub parity2: Vec<u8>,
    pub tail: [u8; TAIL_BITS],
}

impl CodedBlock {
    /// Transmission order: (systematic, parity1, parity2) per info bit, then tail.
    pub fn to_bits(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 * self.systematic.len() + TAIL_BITS);
        for k in 0..self.systematic.len() {
            out.push(self.systematic[k]);
            out.push(self.parity1[k]);
            out.push(self.parity2[k]);
        }
        out.extend_from_slice(&self.tail);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeOutput {
    pub bits: Vec<u8>,
    /// Final a-posteriori LLRs (positive ⇒ 0).
    pub app: Vec<f64>,
    /// Mean |extrinsic| of the second decoder after each iteration.
    pub extrinsic_trace: Vec<f64>,
}

/// Rate-1/3 parallel concatenated code with QPP interleaver.
#[derive(Clone, Debug)]
pub struct TurboCodec {
    pub spec: TurboSpec,
    perm: Vec<usize>,
    inv: Vec<usize>,
    table: [[Step; 2]; STATES],
}

impl TurboCodec {
    pub fn new(spec: TurboSpec) -> Result<Self> {
        if spec.iterations == 0 {
            return Err(Error::InvalidParameter("at least one iteration is required".into()));
        }
        let perm = qpp_permutation(spec.block_length, spec.f1, spec.f2)?;
        let inv = invert_permutation(&perm);
        Ok(Self {
            spec,
            perm,
            inv,
            table: trellis::table(),
        })
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn encode(&self, info: &[u8]) -> Result<CodedBlock> {
        let k = self.spec.block_length;
        if info.len() != k {
            return Err(Error::Shape(format!("expected {k} info bits, got {}", info.len())));
        }
        let (p1, s1) = trellis::encode(info);
        let interleaved: Vec<u8> = self.perm.iter().map(|&j| info[j]).collect();
        let (p2, s2) = trellis::encode(&interleaved);
        let mut tail = [0u8; TAIL_BITS];
        for (n, (x, z)) in trellis::terminate(s1).into_iter().enumerate() {
            tail[2 * n] = x;
            tail[2 * n + 1] = z;
        }
        for (n, (x, z)) in trellis::terminate(s2).into_iter().enumerate() {
            tail[6 + 2 * n] = x;
            tail[6 + 2 * n + 1] = z;
        }
        Ok(CodedBlock {
            systematic: info.to_vec(),
            parity1: p1,
            parity2: p2,
            tail,
        })
    }

    /// Iterative decoding of channel LLRs given in [`CodedBlock::to_bits`] order.
    pub fn decode(&self, llr: &[f64]) -> Result<DecodeOutput> {
        let k = self.spec.block_length;
        if llr.len() != self.spec.coded_len() {
            return Err(Error::Shape(format!(
                "expected {} LLRs, got {}",
                self.spec.coded_len(),
                llr.len()
            )));
        }
        let sys: Vec<f64> = (0..k).map(|i| llr[3 * i]).collect();
        let p1: Vec<f64> = (0..k).map(|i| llr[3 * i + 1]).collect();
        let p2: Vec<f64> = (0..k).map(|i| llr[3 * i + 2]).collect();
        let t = &llr[3 * k..];
        let tail1 = [(t[0], t[1]), (t[2], t[3]), (t[4], t[5])];
        let tail2 = [(t[6], t[7]), (t[8], t[9]), (t[10], t[11])];
        let sys2: Vec<f64> = self.perm.iter().map(|&j| sys[j]).collect();

        let mut la1 = vec![0.0; k];
        let mut le1 = vec![0.0; k];
        let mut trace = Vec::with_capacity(self.spec.iterations);
        for _ in 0..self.spec.iterations {
            le1 = self.bcjr(&sys, &la1, &p1, &tail1);
            let la2: Vec<f64> = self.perm.iter().map(|&j| le1[j]).collect();
            let le2 = self.bcjr(&sys2, &la2, &p2, &tail2);
            for (i, &j) in self.perm.iter().enumerate() {
                la1[j] = le2[i];
            }
            trace.push(le2.iter().map(|x| x.abs()).sum::<f64>() / k.max(1) as f64);
        }
        let app: Vec<f64> = (0..k).map(|i| sys[i] + la1[i] + le1[i]).collect();
        let bits = app.iter().map(|&l| u8::from(l < 0.0)).collect();
        Ok(DecodeOutput {
            bits,
            app,
            extrinsic_trace: trace,
        })
    }

    /// Index of info bit `i` in the interleaved order.
    pub fn interleaved_position(&self, i: usize) -> usize {
        self.inv[i]
    }

    /// Constituent decoder: returns extrinsic LLRs of the K info bits.
    fn bcjr(&self, sys: &[f64], apriori: &[f64], par: &[f64], tail: &[(f64, f64); 3]) -> Vec<f64> {
        let k = sys.len();
        let n = k + tail.len();
        let comb: fn(f64, f64) -> f64 = match self.spec.algo {
            DecodingAlgo::MaxLogMap => f64::max,
            DecodingAlgo::LogMap => max_star,
        };
        let sgn = |b: u8| if b == 0 { 0.5 } else { -0.5 };
        // branch metric for step t, state s, input u
        let gamma = |t: usize, s: usize, u: u8| -> f64 {
            let st = self.table[s][u as usize];
            if t < k {
                sgn(u) * (sys[t] + apriori[t]) + sgn(st.parity) * par[t]
            } else {
                let (xs, xp) = tail[t - k];
                sgn(u) * xs + sgn(st.parity) * xp
            }
        };
        let inputs = |t: usize, s: usize| -> &'static [u8] {
            if t < k {
                &[0, 1]
            } else if trellis::tail_input(s) == 0 {
                &[0]
            } else {
                &[1]
            }
        };

        let mut alpha = vec![[NEG; STATES]; n + 1];
        alpha[0][0] = 0.0;
        for t in 0..n {
            let mut next = [NEG; STATES];
            for s in 0..STATES {
                if alpha[t][s] <= NEG {
                    continue;
                }
                for &u in inputs(t, s) {
                    let ns = self.table[s][u as usize].next;
                    next[ns] = comb(next[ns], alpha[t][s] + gamma(t, s, u));
                }
            }
            let m = next.iter().cloned().fold(NEG, f64::max);
            next.iter_mut().for_each(|x| {
                if *x > NEG {
                    *x -= m
                }
            });
            alpha[t + 1] = next;
        }
        let mut beta = vec![[NEG; STATES]; n + 1];
        beta[n][0] = 0.0;
        for t in (0..n).rev() {
            let mut cur = [NEG; STATES];
            for (s, c) in cur.iter_mut().enumerate() {
                for &u in inputs(t, s) {
                    let ns = self.table[s][u as usize].next;
                    if beta[t + 1][ns] > NEG {
                        *c = comb(*c, beta[t + 1][ns] + gamma(t, s, u));
                    }
                }
            }
            let m = cur.iter().cloned().fold(NEG, f64::max);
            cur.iter_mut().for_each(|x| {
                if *x > NEG {
                    *x -= m
                }
            });
            beta[t] = cur;
        }
        (0..k)
            .map(|t| {
                let (mut l0, mut l1) = (NEG, NEG);
                for s in 0..STATES {
                    if alpha[t][s] <= NEG {
                        continue;
                    }
                    for u in [0u8, 1] {
                        let ns = self.table[s][u as usize].next;
                        if beta[t + 1][ns] <= NEG {
                            continue;
                        }
                        let v = alpha[t][s] + gamma(t, s, u) + beta[t + 1][ns];
                        if u == 0 {
                            l0 = comb(l0, v);
                        } else {
                            l1 = comb(l1, v);
                        }
                    }
                }
                l0 - l1 - sys[t] - apriori[t]
            })
            .collect()
    }
}

/// ln(e^a + e^b).
pub fn max_star(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m <= NEG {
        return NEG;
    }
    m + (-(a - b).abs()).exp().ln_1p()
}

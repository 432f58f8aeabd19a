//! Exhaustive-enumeration oracles. These never touch the recursions under
//! test: they score every input sequence directly from the channel model.
#![allow(dead_code)]

/// Posteriors of an ISI HMM obtained by summing over every sequence.
pub struct IsiOracle {
    /// `T x 2^L`, indexed by the symbol window `sum_i bit(x_{t-i}) 2^i`.
    pub window: Vec<Vec<f64>>,
    /// `T x 2`: `p(x_t = +1 | y)`, `p(x_t = -1 | y)`.
    pub symbol: Vec<[f64; 2]>,
    pub log_evidence: f64,
}

fn gauss(y: f64, m: f64, v: f64) -> f64 {
    (-(y - m) * (y - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

/// Enumerates the `L - 1` unknown pre-frame symbols (uniform) and every
/// `T`-symbol input sequence, weighting each by its priors and Gaussian
/// emissions.
pub fn isi_oracle(
    y: &[f64],
    memory: usize,
    means: &[f64],
    vars: &[f64],
    priors: &[[f64; 2]],
) -> IsiOracle {
    let t_len = y.len();
    let pre = memory - 1;
    let total_bits = pre + t_len;
    let n_windows = 1usize << memory;
    let mut window = vec![vec![0.0; n_windows]; t_len];
    let mut symbol = vec![[0.0; 2]; t_len];
    let mut evidence = 0.0;
    for seq in 0u64..(1u64 << total_bits) {
        // bit i of seq is the symbol at position i - pre (oldest first)
        let bit = |pos: isize| ((seq >> (pos + pre as isize)) & 1) as usize;
        let mut w = 1.0 / (1u64 << pre) as f64;
        let mut wins = Vec::with_capacity(t_len);
        for t in 0..t_len as isize {
            let win: usize = (0..memory).map(|i| bit(t - i as isize) << i).sum();
            w *= priors[t as usize][bit(t)] * gauss(y[t as usize], means[win], vars[win]);
            wins.push(win);
        }
        evidence += w;
        for t in 0..t_len {
            window[t][wins[t]] += w;
            symbol[t][bit(t as isize)] += w;
        }
    }
    for t in 0..t_len {
        window[t].iter_mut().for_each(|v| *v /= evidence);
        symbol[t].iter_mut().for_each(|v| *v /= evidence);
    }
    IsiOracle {
        window,
        symbol,
        log_evidence: evidence.ln(),
    }
}

/// Noiseless output of every window for taps `h` (window bit i is `x_{t-i}`).
pub fn window_means(h: &[f64]) -> Vec<f64> {
    (0..1usize << h.len())
        .map(|w| {
            h.iter()
                .enumerate()
                .map(|(i, hi)| if (w >> i) & 1 == 0 { *hi } else { -*hi })
                .sum()
        })
        .collect()
}

/// Naive shift-register encoder for a rate-1/n feed-forward code with the
/// current input in generator bit `m`.
pub fn naive_encode(bits: &[u8], generators: &[u32], m: usize) -> Vec<u8> {
    let mut out = Vec::new();
    for k in 0..bits.len() {
        for &g in generators {
            let mut acc = 0u8;
            for d in 0..=m {
                if (g >> (m - d)) & 1 == 1 && k >= d {
                    acc ^= bits[k - d];
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Code posteriors by enumerating all `2^K` information words of a
/// terminated code. Returns `p(b_k = 1 | y)` and `p(c_i = 1 | y)`.
pub fn codebook_oracle(
    probs: &[[f64; 2]],
    k: usize,
    generators: &[u32],
    m: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut info = vec![0.0; k];
    let mut coded = vec![0.0; probs.len()];
    let mut total = 0.0;
    for word in 0u64..(1u64 << k) {
        let mut bits: Vec<u8> = (0..k).map(|i| ((word >> i) & 1) as u8).collect();
        bits.extend(std::iter::repeat_n(0, m));
        let c = naive_encode(&bits, generators, m);
        let w: f64 = c.iter().zip(probs).map(|(&ci, p)| p[ci as usize]).product();
        total += w;
        for i in 0..k {
            if bits[i] == 1 {
                info[i] += w;
            }
        }
        for (i, &ci) in c.iter().enumerate() {
            if ci == 1 {
                coded[i] += w;
            }
        }
    }
    info.iter_mut().for_each(|v| *v /= total);
    coded.iter_mut().for_each(|v| *v /= total);
    (info, coded)
}

//! Transmit chain (encoder, interleaver, BPSK mapper) and the soft
//! mappings used on the receive side.
//!
//! Bits are `u8` values in `{0, 1}`. Bit 0 maps to the symbol `+1` and bit 1
//! to `-1`; two-column probability tables follow the same order, so a bit
//! table `[p(0), p(1)]` and a symbol table `[p(+1), p(-1)]` share a layout.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{self, ChannelSpec};
use crate::error::check_len;
use crate::trellis::{self, TrellisSpec};
use crate::{Error, Result, Table};

/// Feed-forward convolutional code, terminated with `registers` zero bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvCode {
    generators: Vec<u32>,
    registers: usize,
    trellis: TrellisSpec,
}

impl ConvCode {
    /// `generators` as integers (write octal literals, e.g. `0o7`).
    pub fn new(generators: &[u32], registers: usize) -> Result<Self> {
        let trellis = trellis::build_conv_trellis(generators, registers)?;
        Ok(Self {
            generators: generators.to_vec(),
            registers,
            trellis,
        })
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn registers(&self) -> usize {
        self.registers
    }

    /// Coded bits per input bit.
    pub fn outputs(&self) -> usize {
        self.generators.len()
    }

    pub fn trellis(&self) -> &TrellisSpec {
        &self.trellis
    }

    /// Number of coded bits produced for `info_len` information bits.
    pub fn coded_len(&self, info_len: usize) -> usize {
        self.outputs() * (info_len + self.registers)
    }

    /// Encodes without flushing the registers.
    pub fn encode_unterminated(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Input("non-binary input bit"));
        }
        let n = self.outputs();
        let mut state = 0usize;
        let mut out = Vec::with_capacity(bits.len() * n);
        for &b in bits {
            let e = self.trellis.edge(state, b as usize);
            out.extend((0..n).map(|j| ((e.output >> j) & 1) as u8));
            state = e.to;
        }
        Ok(out)
    }

    /// Encodes `bits` followed by `registers` zero flush bits.
    pub fn encode(&self, bits: &[u8]) -> Result<Vec<u8>> {
        let mut padded = Vec::with_capacity(bits.len() + self.registers);
        padded.extend_from_slice(bits);
        padded.resize(bits.len() + self.registers, 0);
        self.encode_unterminated(&padded)
    }
}

/// Encodes with a fresh code; see [`ConvCode::encode`].
pub fn conv_encode(info_bits: &[u8], generators: &[u32], registers: usize) -> Result<Vec<u8>> {
    ConvCode::new(generators, registers)?.encode(info_bits)
}

/// Bit-level permutation: position `i` of the output takes input
/// `permutation[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    permutation: Vec<usize>,
    seed: Option<u64>,
}

impl Interleaver {
    pub fn identity(len: usize) -> Self {
        Self {
            permutation: (0..len).collect(),
            seed: None,
        }
    }

    /// Uniform random permutation (Fisher-Yates) drawn from `seed`.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut permutation: Vec<usize> = (0..len).collect();
        permutation.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            permutation,
            seed: Some(seed),
        }
    }

    pub fn from_permutation(permutation: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; permutation.len()];
        for &p in &permutation {
            if p >= seen.len() || seen[p] {
                return Err(Error::Input("interleaver is not a bijection"));
            }
            seen[p] = true;
        }
        Ok(Self {
            permutation,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn interleave<T: Clone>(&self, values: &[T]) -> Result<Vec<T>> {
        check_len("interleaver input", self.len(), values.len())?;
        Ok(self
            .permutation
            .iter()
            .map(|&p| values[p].clone())
            .collect())
    }

    pub fn deinterleave<T: Clone>(&self, values: &[T]) -> Result<Vec<T>> {
        check_len("deinterleaver input", self.len(), values.len())?;
        let mut out = values.to_vec();
        for (i, &p) in self.permutation.iter().enumerate() {
            out[p] = values[i].clone();
        }
        Ok(out)
    }

    /// Permutes the rows of a per-bit table.
    pub fn interleave_rows(&self, table: &Table) -> Result<Table> {
        check_len("interleaver input", self.len(), table.rows())?;
        let mut out = Table::zeros(table.rows(), table.cols());
        for (i, &p) in self.permutation.iter().enumerate() {
            out.row_mut(i).copy_from_slice(table.row(p));
        }
        Ok(out)
    }

    pub fn deinterleave_rows(&self, table: &Table) -> Result<Table> {
        check_len("deinterleaver input", self.len(), table.rows())?;
        let mut out = Table::zeros(table.rows(), table.cols());
        for (i, &p) in self.permutation.iter().enumerate() {
            out.row_mut(p).copy_from_slice(table.row(i));
        }
        Ok(out)
    }
}

pub fn bpsk_map(bits: &[u8]) -> Vec<f64> {
    bits.iter()
        .map(|&b| if b == 0 { 1.0 } else { -1.0 })
        .collect()
}

fn check_two_point(table: &Table) -> Result<()> {
    check_len("soft table width", 2, table.cols())?;
    table.check_distribution(1e-9)
}

/// Bit probabilities `[p(0), p(1)]` to symbol probabilities `[p(+1), p(-1)]`.
pub fn soft_map(bit_probs: &Table) -> Result<Table> {
    check_two_point(bit_probs)?;
    Ok(bit_probs.clone())
}

/// Symbol probabilities `[p(+1), p(-1)]` to bit probabilities `[p(0), p(1)]`.
pub fn soft_demap(symbol_probs: &Table) -> Result<Table> {
    check_two_point(symbol_probs)?;
    Ok(symbol_probs.clone())
}

/// Seeded uniform random information bits.
pub fn random_bits(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(0..2u8)).collect()
}

/// Everything the transmitter and channel produced for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TxFrame {
    pub info_bits: Vec<u8>,
    pub coded_bits: Vec<u8>,
    pub interleaved_bits: Vec<u8>,
    pub symbols: Vec<f64>,
    pub noiseless: Vec<f64>,
    pub received: Vec<f64>,
}

impl TxFrame {
    pub fn transmit(
        info_bits: Vec<u8>,
        code: &ConvCode,
        interleaver: &Interleaver,
        channel: &ChannelSpec,
    ) -> Result<Self> {
        let coded_bits = code.encode(&info_bits)?;
        let interleaved_bits = interleaver.interleave(&coded_bits)?;
        let symbols = bpsk_map(&interleaved_bits);
        let (noiseless, received) = channel::apply_channel(&symbols, channel)?;
        Ok(Self {
            info_bits,
            coded_bits,
            interleaved_bits,
            symbols,
            noiseless,
            received,
        })
    }

    /// Number of channel symbols `T`.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

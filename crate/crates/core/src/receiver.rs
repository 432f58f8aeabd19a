//! Turbo receiver: ISI equalizer and convolutional decoder exchanging
//! extrinsic information, with a Baum-Welch estimator in the loop.
//!
//! In [`Mode::Joint`] the decoder's extrinsic symbol probabilities become
//! the transition priors of both the equalizer and the estimator on the next
//! turbo iteration. The standalone modes run Baum-Welch with uniform priors
//! and decode once at the end.

use alloc::vec::Vec;

use crate::bcjr::{self, Extrinsic};
use crate::chain::{self, ConvCode, Interleaver};
use crate::em::{self, BaumWelch, VarianceMode};
use crate::error::check_len;
use crate::math::{self, PROB_FLOOR};
use crate::trellis::{self, EdgeGaussianTable, HmmParams, TrellisSpec};
use crate::{Error, Result, Table};

/// Floor applied to fed-back symbol priors.
pub const PRIOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Decoder feedback drives both the equalizer and the estimator.
    Joint,
    /// Reduced-state Baum-Welch with uniform priors, one final decode.
    Standalone,
    /// Like `Standalone`, on the state-tied trellis.
    ConventionalBw,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Joint => "joint",
            Mode::Standalone => "standalone",
            Mode::ConventionalBw => "conventional",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub mode: Mode,
    pub n_turbo_iters: usize,
    /// EM iterations per turbo iteration. Zero keeps the emissions fixed
    /// (plain turbo equalization) in joint mode.
    pub em_iters_per_turbo: usize,
    pub variance_mode: VarianceMode,
    /// Continue from the previous estimate instead of re-initializing at
    /// every turbo iteration.
    pub warm_start: bool,
    pub prior_floor: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Joint,
            n_turbo_iters: 20,
            em_iters_per_turbo: 1,
            variance_mode: VarianceMode::FixedTrue,
            warm_start: true,
            prior_floor: PRIOR_FLOOR,
        }
    }
}

impl ReceiverConfig {
    /// Total EM iterations the standalone modes run.
    pub fn standalone_em_iters(&self) -> usize {
        self.n_turbo_iters * self.em_iters_per_turbo
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_turbo_iters < 1 {
            return Err(Error::Config("n_turbo_iters must be at least 1"));
        }
        if self.mode != Mode::Joint && self.standalone_em_iters() < 1 {
            return Err(Error::Config(
                "standalone modes need at least one EM iteration",
            ));
        }
        if !(self.prior_floor >= 0.0 && self.prior_floor < 0.5) {
            return Err(Error::Config("prior floor must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

/// Telemetry for one turbo iteration (joint) or one EM iteration
/// (standalone modes).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub turbo_iter: usize,
    /// Cumulative EM iterations run so far.
    pub em_iter: usize,
    pub mse: f64,
    /// Only set where a decode pass ran.
    pub ber: Option<f64>,
    pub log_evidence: f64,
    /// Mean binary entropy (bits) of the symbol priors fed back by the
    /// decoder. Only set where a decode pass ran.
    pub extrinsic_entropy: Option<f64>,
    /// Divisions whose divisor had to be floored.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub mode: Mode,
    pub records: Vec<IterationRecord>,
    pub emissions: EdgeGaussianTable,
}

impl IterationTrace {
    pub fn final_mse(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.mse)
    }

    pub fn final_ber(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.ber)
    }
}

/// Equalizer output for one frame.
#[derive(Debug, Clone)]
pub struct Equalized {
    /// `p(y | x_t)`, rows normalized.
    pub extrinsic: Table,
    /// `p(x_t | y)`.
    pub joint: Table,
    pub log_evidence: f64,
    pub clamped: usize,
}

/// Runs BCJR on the reduced ISI trellis and divides out the symbol priors.
pub fn equalize(
    observations: &[f64],
    trellis: &TrellisSpec,
    emissions: &EdgeGaussianTable,
    symbol_priors: &Table,
) -> Result<Equalized> {
    let params = HmmParams::new(trellis, emissions, symbol_priors)?;
    let gamma = bcjr::branch_metrics(observations, &params)?;
    let soft = bcjr::run(&gamma, trellis, None)?;
    let joint = bcjr::symbol_joint(&soft.log_edge_posterior, trellis);
    let Extrinsic { table, clamped } = bcjr::extrinsic_divide(&joint, symbol_priors)?;
    Ok(Equalized {
        extrinsic: table,
        joint,
        log_evidence: soft.log_evidence,
        clamped,
    })
}

/// Decoder output for one frame.
#[derive(Debug, Clone)]
pub struct Decoded {
    /// Hard decisions on the information bits (flush bits excluded).
    pub info_bits: Vec<u8>,
    /// `p(b_k | y)` for every input step, flush steps included.
    pub info_posterior: Table,
    /// `p(c_k)` extrinsic, in coded-bit order.
    pub coded_extrinsic: Table,
    pub clamped: usize,
}

/// MAP decoding of a terminated frame from per-coded-bit channel
/// probabilities `p(y | c_k)`. Information bits have uniform priors; the
/// flush bits are known zeros.
pub fn decode(coded_probs: &Table, code: &ConvCode, info_len: usize) -> Result<Decoded> {
    let n = code.outputs();
    let steps = info_len + code.registers();
    check_len("coded bit table", n * steps, coded_probs.rows())?;
    check_len("coded bit table width", 2, coded_probs.cols())?;
    let trellis = code.trellis();

    let log_in: Vec<[f64; 2]> = coded_probs
        .iter_rows()
        .map(|r| {
            [
                math::ln(r[0].max(PROB_FLOOR)),
                math::ln(r[1].max(PROB_FLOOR)),
            ]
        })
        .collect();
    let mut gamma = Table::zeros(steps, trellis.num_edges());
    for k in 0..steps {
        let known_zero = k >= info_len;
        for (slot, e) in gamma.row_mut(k).iter_mut().zip(trellis.edges()) {
            let prior = match (known_zero, e.input) {
                (true, 0) => 0.0,
                (true, _) => f64::NEG_INFINITY,
                (false, _) => -core::f64::consts::LN_2,
            };
            *slot = prior
                + (0..n)
                    .map(|j| log_in[k * n + j][((e.output >> j) & 1) as usize])
                    .sum::<f64>();
        }
    }
    let mut terminal = alloc::vec![0.0; trellis.num_states()];
    terminal[0] = 1.0;
    let soft = bcjr::run(&gamma, trellis, Some(&terminal))?;

    let info_posterior = bcjr::symbol_joint(&soft.log_edge_posterior, trellis);
    let info_bits = (0..info_len)
        .map(|k| u8::from(info_posterior.get(k, 1) > info_posterior.get(k, 0)))
        .collect();
    let coded_joint = bcjr::output_bit_joint(&soft.log_edge_posterior, trellis, n);
    let Extrinsic { table, clamped } = bcjr::extrinsic_divide(&coded_joint, coded_probs)?;
    Ok(Decoded {
        info_bits,
        info_posterior,
        coded_extrinsic: table,
        clamped,
    })
}

/// Floors every entry at `floor` and renormalizes the rows.
pub fn floor_priors(table: &mut Table, floor: f64) {
    for r in 0..table.rows() {
        table.row_mut(r).iter_mut().for_each(|p| *p = p.max(floor));
    }
    table.normalize_rows();
}

pub fn bit_error_rate(decided: &[u8], truth: &[u8]) -> f64 {
    let errors = decided.iter().zip(truth).filter(|(a, b)| a != b).count();
    errors as f64 / truth.len().max(1) as f64
}

/// Code, interleaver and ISI trellises for one link configuration.
#[derive(Debug, Clone)]
pub struct TurboReceiver {
    code: ConvCode,
    interleaver: Interleaver,
    info_len: usize,
    reduced: TrellisSpec,
    conventional: TrellisSpec,
}

impl TurboReceiver {
    pub fn new(
        code: ConvCode,
        interleaver: Interleaver,
        isi_memory: usize,
        info_len: usize,
    ) -> Result<Self> {
        check_len(
            "interleaver length",
            code.coded_len(info_len),
            interleaver.len(),
        )?;
        Ok(Self {
            reduced: trellis::build_isi_trellis_reduced(isi_memory)?,
            conventional: trellis::build_isi_trellis_conventional(isi_memory, trellis::BPSK)?,
            code,
            interleaver,
            info_len,
        })
    }

    pub fn reduced_trellis(&self) -> &TrellisSpec {
        &self.reduced
    }

    pub fn conventional_trellis(&self) -> &TrellisSpec {
        &self.conventional
    }

    pub fn code(&self) -> &ConvCode {
        &self.code
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn info_len(&self) -> usize {
        self.info_len
    }

    /// Number of channel symbols per frame.
    pub fn frame_len(&self) -> usize {
        self.interleaver.len()
    }

    pub fn equalize(
        &self,
        observations: &[f64],
        emissions: &EdgeGaussianTable,
        symbol_priors: &Table,
    ) -> Result<Equalized> {
        equalize(observations, &self.reduced, emissions, symbol_priors)
    }

    /// Demaps and deinterleaves equalizer extrinsics, then decodes.
    pub fn decode_symbols(&self, symbol_extrinsic: &Table) -> Result<Decoded> {
        let bits = chain::soft_demap(symbol_extrinsic)?;
        let coded = self.interleaver.deinterleave_rows(&bits)?;
        decode(&coded, &self.code, self.info_len)
    }

    /// Interleaves and maps decoder extrinsics into floored symbol priors.
    pub fn feedback(&self, decoded: &Decoded, floor: f64) -> Result<Table> {
        let bits = self.interleaver.interleave_rows(&decoded.coded_extrinsic)?;
        let mut priors = chain::soft_map(&bits)?;
        floor_priors(&mut priors, floor);
        Ok(priors)
    }

    fn check_frame(&self, observations: &[f64], info_bits: &[u8], truth: &[f64]) -> Result<()> {
        check_len("received frame", self.frame_len(), observations.len())?;
        check_len("information bits", self.info_len, info_bits.len())?;
        check_len(
            "true parameter table",
            self.reduced.num_params(),
            truth.len(),
        )
    }

    /// Joint turbo / Baum-Welch receiver. `info_bits` and `truth` are only
    /// used for the BER and MSE telemetry.
    pub fn run_joint(
        &self,
        observations: &[f64],
        info_bits: &[u8],
        init: &EdgeGaussianTable,
        truth: &[f64],
        config: &ReceiverConfig,
    ) -> Result<IterationTrace> {
        config.validate()?;
        self.check_frame(observations, info_bits, truth)?;
        let bw = BaumWelch::new(&self.reduced, config.variance_mode).with_truth(truth);
        let mut emissions = init.clone();
        let mut priors = Table::uniform(self.frame_len(), 2);
        let mut records = Vec::with_capacity(config.n_turbo_iters);
        let mut em_done = 0;
        for turbo_iter in 1..=config.n_turbo_iters {
            if !config.warm_start {
                emissions = init.clone();
            }
            for _ in 0..config.em_iters_per_turbo {
                bw.iterate(observations, &mut emissions, &priors)?;
                em_done += 1;
            }
            let eq = self.equalize(observations, &emissions, &priors)?;
            let decoded = self.decode_symbols(&eq.extrinsic)?;
            priors = self.feedback(&decoded, config.prior_floor)?;
            let entropy = priors
                .iter_rows()
                .map(|r| math::binary_entropy(r[0]))
                .sum::<f64>()
                / priors.rows() as f64;
            records.push(IterationRecord {
                turbo_iter,
                em_iter: em_done,
                mse: em::channel_mse(&emissions.means, truth)?,
                ber: Some(bit_error_rate(&decoded.info_bits, info_bits)),
                log_evidence: eq.log_evidence,
                extrinsic_entropy: Some(entropy),
                clamped: eq.clamped + decoded.clamped,
            });
        }
        Ok(IterationTrace {
            mode: Mode::Joint,
            records,
            emissions,
        })
    }

    /// Separate design: Baum-Welch with uniform priors, then a single
    /// equalize/decode pass for the final BER.
    pub fn run_standalone(
        &self,
        observations: &[f64],
        info_bits: &[u8],
        init: &EdgeGaussianTable,
        truth: &[f64],
        config: &ReceiverConfig,
    ) -> Result<IterationTrace> {
        config.validate()?;
        self.check_frame(observations, info_bits, truth)?;
        let trellis = match config.mode {
            Mode::ConventionalBw => &self.conventional,
            _ => &self.reduced,
        };
        let bw = BaumWelch::new(trellis, config.variance_mode).with_truth(truth);
        let uniform = Table::uniform(self.frame_len(), 2);
        let mut emissions = init.clone();
        let n_em = config.standalone_em_iters();
        let mut records = Vec::with_capacity(n_em);
        for em_iter in 1..=n_em {
            let it = bw.iterate(observations, &mut emissions, &uniform)?;
            records.push(IterationRecord {
                turbo_iter: 1,
                em_iter,
                mse: it.mse.unwrap_or(f64::NAN),
                ber: None,
                log_evidence: it.log_evidence,
                extrinsic_entropy: None,
                clamped: 0,
            });
        }
        // both trellises index emissions by symbol window, so the reduced
        // equalizer can use either estimate
        let eq = self.equalize(observations, &emissions, &uniform)?;
        let decoded = self.decode_symbols(&eq.extrinsic)?;
        if let Some(last) = records.last_mut() {
            last.ber = Some(bit_error_rate(&decoded.info_bits, info_bits));
            let priors = self.feedback(&decoded, config.prior_floor)?;
            last.extrinsic_entropy = Some(
                priors
                    .iter_rows()
                    .map(|r| math::binary_entropy(r[0]))
                    .sum::<f64>()
                    / priors.rows() as f64,
            );
            last.clamped = eq.clamped + decoded.clamped;
        }
        Ok(IterationTrace {
            mode: config.mode,
            records,
            emissions,
        })
    }

    /// Dispatches on `config.mode`.
    pub fn run(
        &self,
        observations: &[f64],
        info_bits: &[u8],
        init: &EdgeGaussianTable,
        truth: &[f64],
        config: &ReceiverConfig,
    ) -> Result<IterationTrace> {
        match config.mode {
            Mode::Joint => self.run_joint(observations, info_bits, init, truth, config),
            Mode::Standalone | Mode::ConventionalBw => {
                self.run_standalone(observations, info_bits, init, truth, config)
            }
        }
    }
}

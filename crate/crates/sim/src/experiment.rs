//! Seeded Monte-Carlo sweeps over (mode, SNR) cells.
//!
//! Frame `i` draws its seeds from a ChaCha8 generator seeded with the master
//! seed and switched to stream `i`: the first three words are the
//! information-bit, noise and initialization seeds. The seeds do not depend
//! on the mode or the SNR, so every cell sees the same bits, the same noise
//! shape and the same initial estimate.

use std::io::Write;
use std::path::Path;

use bwturbo_core::chain::{random_bits, ConvCode, Interleaver, TxFrame};
use bwturbo_core::channel::{self, ChannelSpec};
use bwturbo_core::em::InitSpec;
use bwturbo_core::receiver::{IterationTrace, Mode, TurboReceiver};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("simulation failed: {0}")]
    Core(#[from] bwturbo_core::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Per-frame seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSeeds {
    pub bits: u64,
    pub noise: u64,
    pub init: u64,
}

pub fn frame_seeds(master: u64, frame: usize) -> FrameSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(frame as u64);
    FrameSeeds {
        bits: rng.next_u64(),
        noise: rng.next_u64(),
        init: rng.next_u64(),
    }
}

/// One CSV row: the frame-averaged state after one iteration of one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub mode: &'static str,
    pub snr_db: f64,
    pub turbo_iter: usize,
    pub em_iter: usize,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    /// Empty for standalone iterations that were not decoded.
    pub ber_mean: Option<f64>,
    pub frames: usize,
    pub seed: u64,
}

pub const CSV_HEADER: &str =
    "mode,snr_db,turbo_iter,em_iter,mse_mean,mse_stderr,ber_mean,frames,seed";

/// Fixed link components shared by every frame of an experiment.
pub struct Link {
    pub code: ConvCode,
    pub receiver: TurboReceiver,
}

impl Link {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let code = ConvCode::new(&cfg.generators, cfg.registers)?;
        let interleaver = Interleaver::random(code.coded_len(cfg.frame_len), cfg.interleaver_seed);
        let receiver =
            TurboReceiver::new(code.clone(), interleaver, cfg.taps.len(), cfg.frame_len)?;
        Ok(Self { code, receiver })
    }
}

/// Simulates one frame of one cell.
pub fn run_frame(
    cfg: &ExperimentConfig,
    link: &Link,
    mode: Mode,
    snr_db: f64,
    frame: usize,
) -> Result<IterationTrace> {
    let seeds = frame_seeds(cfg.seed, frame);
    let noise_variance = channel::snr_to_variance(snr_db);
    let ch = ChannelSpec::new(&cfg.taps, noise_variance, seeds.noise)?;
    let tx = TxFrame::transmit(
        random_bits(cfg.frame_len, seeds.bits),
        &link.code,
        link.receiver.interleaver(),
        &ch,
    )?;
    let truth = channel::true_param_table(&ch, link.receiver.reduced_trellis())?;
    let init = InitSpec {
        true_means: Some(truth.clone()),
        perturbation: cfg.init_error,
        variance_mode: cfg.variance_mode,
        noise_variance,
        rng_seed: seeds.init,
    }
    .initial_table(truth.len())?;
    Ok(link.receiver.run(
        &tx.received,
        &tx.info_bits,
        &init,
        &truth,
        &cfg.receiver_config(mode),
    )?)
}

/// All frame traces of one (mode, SNR) cell, in frame order.
pub fn run_cell(
    cfg: &ExperimentConfig,
    link: &Link,
    mode: Mode,
    snr_db: f64,
) -> Result<Vec<IterationTrace>> {
    (0..cfg.n_frames)
        .into_par_iter()
        .map(|f| run_frame(cfg, link, mode, snr_db, f))
        .collect()
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averages frame traces into one row per iteration. Frames are summed in
/// index order.
pub fn aggregate(traces: &[IterationTrace], mode: Mode, snr_db: f64, seed: u64) -> Vec<ResultRow> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    (0..first.records.len())
        .map(|i| {
            let mse: Vec<f64> = traces.iter().map(|t| t.records[i].mse).collect();
            let (mse_mean, mse_stderr) = mean_and_stderr(&mse);
            let ber: Option<Vec<f64>> = traces.iter().map(|t| t.records[i].ber).collect();
            ResultRow {
                mode: mode.name(),
                snr_db,
                turbo_iter: first.records[i].turbo_iter,
                em_iter: first.records[i].em_iter,
                mse_mean,
                mse_stderr,
                ber_mean: ber.map(|b| mean_and_stderr(&b).0),
                frames: traces.len(),
                seed,
            }
        })
        .collect()
}

/// First EM iteration from which the MSE stays within `rel_tol` of its
/// final value.
pub fn convergence_iteration(rows: &[ResultRow], rel_tol: f64) -> Option<usize> {
    let last = rows.last()?;
    let bound = last.mse_mean * (1.0 + rel_tol);
    let mut first = last.em_iter;
    for r in rows.iter().rev() {
        if r.mse_mean > bound {
            break;
        }
        first = r.em_iter;
    }
    Some(first)
}

/// Runs every (mode, SNR) cell, in configuration order.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let link = Link::new(cfg)?;
    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        for &snr in &cfg.snr_db {
            let traces = run_cell(cfg, &link, mode, snr)?;
            rows.extend(aggregate(&traces, mode, snr, cfg.seed));
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Human-readable per-cell summary.
pub fn summary(rows: &[ResultRow]) -> String {
    let mut out =
        String::from("mode          snr_db  iters  final_mse     final_ber   conv_iter\n");
    let mut start = 0;
    while start < rows.len() {
        let key = (rows[start].mode, rows[start].snr_db);
        let end = rows[start..]
            .iter()
            .position(|r| (r.mode, r.snr_db) != key)
            .map_or(rows.len(), |p| start + p);
        let cell = &rows[start..end];
        let last = &cell[cell.len() - 1];
        out.push_str(&format!(
            "{:<13} {:>6.2}  {:>5}  {:<12.4e}  {:<10}  {}\n",
            last.mode,
            last.snr_db,
            last.em_iter,
            last.mse_mean,
            last.ber_mean.map_or("-".into(), |b| format!("{b:.3e}")),
            convergence_iteration(cell, 0.1).map_or("-".into(), |c| c.to_string()),
        ));
        start = end;
    }
    out
}

/// Runs the experiment, writes the CSV to `cfg.output` and returns the rows.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let rows = simulate(cfg)?;
    write_csv_file(&rows, &cfg.output)?;
    Ok(rows)
}

pub fn write_csv_file(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| ExperimentError::Output {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(rows, std::io::BufWriter::new(file))
}

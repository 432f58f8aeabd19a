//! Baum-Welch re-estimation of Gaussian emission parameters.
//!
//! The same code serves the state-tied (conventional) and edge-tied
//! (reduced) trellises: responsibilities are accumulated per emission
//! parameter index, which is the destination state on a conventional
//! trellis and the edge on a reduced one. Transition probabilities and the
//! initial distribution are never learned; they come from the supplied
//! per-time symbol priors and the trellis.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bcjr::{self, SoftSequence};
use crate::error::check_len;
use crate::math;
use crate::trellis::{EdgeGaussianTable, HmmParams, TrellisSpec};
use crate::{Error, Result, Table};

/// Lower bound applied to every re-estimated variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// A parameter is only re-estimated when its total responsibility reaches
/// this fraction of the frame length.
pub const OCCUPANCY_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceMode {
    /// Variances stay at the known noise variance.
    #[default]
    FixedTrue,
    /// Variances are re-estimated every iteration.
    Estimated,
}

/// How the emission table is initialized before the first E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    /// Noiseless channel output of each parameter, when known.
    pub true_means: Option<Vec<f64>>,
    /// Half-width of the uniform perturbation added to each mean.
    pub perturbation: f64,
    pub variance_mode: VarianceMode,
    /// Starting variance of every parameter.
    pub noise_variance: f64,
    pub rng_seed: u64,
}

impl InitSpec {
    /// Draws the starting table: `mu_l = z_l + u_l` with `u_l ~ U[-eps, eps]`.
    /// Without reference means the draws are centred on zero.
    pub fn initial_table(&self, num_params: usize) -> Result<EdgeGaussianTable> {
        if self.perturbation.is_nan() || self.perturbation < 0.0 {
            return Err(Error::Config("initialization error must be nonnegative"));
        }
        if let Some(z) = &self.true_means {
            check_len("reference means", num_params, z.len())?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let eps = self.perturbation;
        let means = (0..num_params)
            .map(|l| {
                let base = self.true_means.as_ref().map_or(0.0, |z| z[l]);
                let u: f64 = rng.random();
                base + eps * (2.0 * u - 1.0)
            })
            .collect();
        EdgeGaussianTable::with_common_variance(means, self.noise_variance)
    }
}

/// Sums edge posteriors into per-parameter responsibilities.
pub fn responsibilities(seq: &SoftSequence, trellis: &TrellisSpec) -> Table {
    let post = &seq.log_edge_posterior;
    let mut out = Table::zeros(post.rows(), trellis.num_params());
    for t in 0..post.rows() {
        let p = post.row(t);
        let row = out.row_mut(t);
        for (i, e) in trellis.edges().iter().enumerate() {
            row[e.param] += math::exp(p[i]);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct EStep {
    /// `T x num_params`, each row sums to one.
    pub responsibilities: Table,
    pub log_evidence: f64,
    pub soft: SoftSequence,
}

/// Posterior responsibilities of every emission parameter under `params`.
pub fn e_step(observations: &[f64], params: &HmmParams<'_>) -> Result<EStep> {
    let gamma = bcjr::branch_metrics(observations, params)?;
    let soft = bcjr::run(&gamma, params.trellis, None)?;
    Ok(EStep {
        responsibilities: responsibilities(&soft, params.trellis),
        log_evidence: soft.log_evidence,
        soft,
    })
}

/// Re-estimated values plus the number of parameters left untouched for
/// lack of occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub values: Vec<f64>,
    pub skipped: usize,
}

fn occupancy(responsibilities: &Table) -> Vec<f64> {
    let mut occ = alloc::vec![0.0; responsibilities.cols()];
    for row in responsibilities.iter_rows() {
        occ.iter_mut().zip(row).for_each(|(o, r)| *o += r);
    }
    occ
}

fn check_shapes(observations: &[f64], responsibilities: &Table, previous: &[f64]) -> Result<()> {
    check_len(
        "responsibility rows",
        observations.len(),
        responsibilities.rows(),
    )?;
    check_len("parameter count", responsibilities.cols(), previous.len())
}

/// `mu_l = sum_t r_t(l) y_t / sum_t r_t(l)`. Parameters whose occupancy is
/// below the floor keep their previous mean.
pub fn m_step_means(
    observations: &[f64],
    responsibilities: &Table,
    previous: &[f64],
) -> Result<Update> {
    check_shapes(observations, responsibilities, previous)?;
    let occ = occupancy(responsibilities);
    let mut acc = alloc::vec![0.0; previous.len()];
    for (row, &y) in responsibilities.iter_rows().zip(observations) {
        acc.iter_mut().zip(row).for_each(|(a, r)| *a += r * y);
    }
    let min_occ = OCCUPANCY_FLOOR * observations.len() as f64;
    let mut skipped = 0;
    let values = acc
        .iter()
        .zip(&occ)
        .zip(previous)
        .map(|((&a, &o), &prev)| {
            if o < min_occ || o == 0.0 {
                skipped += 1;
                prev
            } else {
                a / o
            }
        })
        .collect();
    Ok(Update { values, skipped })
}

/// `var_l = sum_t r_t(l) (y_t - mu_l)^2 / sum_t r_t(l)`, floored at `floor`.
pub fn m_step_variances(
    observations: &[f64],
    responsibilities: &Table,
    means: &[f64],
    previous: &[f64],
    floor: f64,
) -> Result<Update> {
    check_shapes(observations, responsibilities, previous)?;
    check_len("mean count", previous.len(), means.len())?;
    let occ = occupancy(responsibilities);
    let mut acc = alloc::vec![0.0; previous.len()];
    for (row, &y) in responsibilities.iter_rows().zip(observations) {
        for ((a, r), m) in acc.iter_mut().zip(row).zip(means) {
            let d = y - m;
            *a += r * d * d;
        }
    }
    let min_occ = OCCUPANCY_FLOOR * observations.len() as f64;
    let mut skipped = 0;
    let values = acc
        .iter()
        .zip(&occ)
        .zip(previous)
        .map(|((&a, &o), &prev)| {
            if o < min_occ || o == 0.0 {
                skipped += 1;
                prev
            } else {
                (a / o).max(floor)
            }
        })
        .collect();
    Ok(Update { values, skipped })
}

/// Emission part of the EM auxiliary function:
/// `sum_t sum_l r_t(l) ln N(y_t; mu_l, var_l)`.
pub fn expected_complete_log_likelihood(
    observations: &[f64],
    responsibilities: &Table,
    emissions: &EdgeGaussianTable,
) -> Result<f64> {
    check_shapes(observations, responsibilities, &emissions.means)?;
    let lik = bcjr::gaussian_log_likelihoods(observations, emissions)?;
    Ok(lik
        .as_slice()
        .iter()
        .zip(responsibilities.as_slice())
        .map(|(l, r)| if *r > 0.0 { r * l } else { 0.0 })
        .sum())
}

/// Mean squared error between estimated means and the true noiseless
/// outputs, averaged over parameters.
pub fn channel_mse(estimated: &[f64], truth: &[f64]) -> Result<f64> {
    check_len("channel mse", truth.len(), estimated.len())?;
    if truth.is_empty() {
        return Err(Error::Input("empty parameter vector"));
    }
    let sum: f64 = estimated
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / truth.len() as f64)
}

/// One recorded EM iteration. `log_evidence` is computed in the E-step, so
/// it scores the parameters the iteration started from; `means` and
/// `variances` are the re-estimated values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmIteration {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub log_evidence: f64,
    pub mse: Option<f64>,
    pub skipped_updates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmEstimate {
    pub emissions: EdgeGaussianTable,
    pub history: Vec<EmIteration>,
}

impl EmEstimate {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

/// A Baum-Welch learner bound to one trellis.
#[derive(Debug, Clone, Copy)]
pub struct BaumWelch<'a> {
    pub trellis: &'a TrellisSpec,
    pub variance_mode: VarianceMode,
    pub variance_floor: f64,
    /// True noiseless outputs, used only to report the MSE.
    pub truth: Option<&'a [f64]>,
}

impl<'a> BaumWelch<'a> {
    pub fn new(trellis: &'a TrellisSpec, variance_mode: VarianceMode) -> Self {
        Self {
            trellis,
            variance_mode,
            variance_floor: VARIANCE_FLOOR,
            truth: None,
        }
    }

    pub fn with_truth(mut self, truth: &'a [f64]) -> Self {
        self.truth = Some(truth);
        self
    }

    /// One E-step and M-step; updates `emissions` in place.
    pub fn iterate(
        &self,
        observations: &[f64],
        emissions: &mut EdgeGaussianTable,
        priors: &Table,
    ) -> Result<EmIteration> {
        let params = HmmParams::new(self.trellis, emissions, priors)?;
        let e = e_step(observations, &params)?;
        let means = m_step_means(observations, &e.responsibilities, &emissions.means)?;
        let mut skipped = means.skipped;
        if self.variance_mode == VarianceMode::Estimated {
            let vars = m_step_variances(
                observations,
                &e.responsibilities,
                &means.values,
                &emissions.variances,
                self.variance_floor,
            )?;
            skipped += vars.skipped;
            emissions.variances = vars.values;
        }
        emissions.means = means.values;
        let mse = match self.truth {
            Some(z) => Some(channel_mse(&emissions.means, z)?),
            None => None,
        };
        Ok(EmIteration {
            means: emissions.means.clone(),
            variances: emissions.variances.clone(),
            log_evidence: e.log_evidence,
            mse,
            skipped_updates: skipped,
        })
    }
}

/// Runs `n_iters` Baum-Welch iterations from the table drawn by `init`,
/// holding `priors` fixed.
pub fn run_em(
    observations: &[f64],
    trellis: &TrellisSpec,
    init: &InitSpec,
    priors: &Table,
    n_iters: usize,
) -> Result<EmEstimate> {
    if n_iters < 1 {
        return Err(Error::Config("at least one EM iteration is required"));
    }
    let mut emissions = init.initial_table(trellis.num_params())?;
    let mut bw = BaumWelch::new(trellis, init.variance_mode);
    if let Some(z) = &init.true_means {
        bw = bw.with_truth(z);
    }
    let history = (0..n_iters)
        .map(|_| bw.iterate(observations, &mut emissions, priors))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmEstimate { emissions, history })
}

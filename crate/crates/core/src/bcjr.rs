//! Log-domain forward-backward (BCJR) inference on a [`TrellisSpec`].
//!
//! Time runs over observations `t = 0..T`. The forward table has `T + 1`
//! rows: row 0 holds the initial state distribution and row `t + 1` the
//! forward variable after observation `t`. The backward table mirrors it,
//! with row `T` holding the terminal condition. Every row of both tables is
//! shifted so its maximum is zero; the forward shifts are kept so the total
//! log-evidence can be recovered.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::check_len;
use crate::math::{self, PROB_FLOOR};
use crate::trellis::{EdgeGaussianTable, HmmParams, TrellisSpec};
use crate::{Error, Result, Table};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Result of one forward-backward pass.
#[derive(Debug, Clone)]
pub struct SoftSequence {
    pub log_alpha: Table,
    pub log_beta: Table,
    /// Normalized log posterior of every edge at every time step.
    pub log_edge_posterior: Table,
    /// Shift subtracted from each forward row.
    pub alpha_scales: Vec<f64>,
    /// `ln p(y_1^T)` under the model.
    pub log_evidence: f64,
}

impl SoftSequence {
    /// Linear-domain edge posteriors.
    pub fn edge_posterior(&self) -> Table {
        self.log_edge_posterior.exp()
    }

    /// Posterior of the state reached after each observation.
    pub fn state_posterior(&self, trellis: &TrellisSpec) -> Table {
        let mut out = Table::zeros(self.log_edge_posterior.rows(), trellis.num_states());
        for t in 0..out.rows() {
            for (i, e) in trellis.edges().iter().enumerate() {
                let p = math::exp(self.log_edge_posterior.get(t, i));
                out.set(t, e.to, out.get(t, e.to) + p);
            }
        }
        out
    }
}

/// `ln N(y_t; mu_l, var_l)` for every time step and parameter.
pub fn gaussian_log_likelihoods(
    observations: &[f64],
    emissions: &EdgeGaussianTable,
) -> Result<Table> {
    if observations.iter().any(|y| y.is_nan()) {
        return Err(Error::Input("NaN observation"));
    }
    if emissions.variances.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::Input("emission variances must be positive"));
    }
    let norm: Vec<f64> = emissions
        .variances
        .iter()
        .map(|&v| -0.5 * (LN_2PI + math::ln(v)))
        .collect();
    let mut out = Table::zeros(observations.len(), emissions.len());
    for (t, &y) in observations.iter().enumerate() {
        let row = out.row_mut(t);
        for (l, slot) in row.iter_mut().enumerate() {
            let d = y - emissions.means[l];
            *slot = norm[l] - d * d / (2.0 * emissions.variances[l]);
        }
    }
    Ok(out)
}

/// Combines per-parameter log-likelihoods with per-time input priors into
/// the log branch metric of every edge.
pub fn branch_metrics_from_likelihoods(
    log_likelihoods: &Table,
    trellis: &TrellisSpec,
    priors: &Table,
) -> Result<Table> {
    check_len(
        "likelihood width",
        trellis.num_params(),
        log_likelihoods.cols(),
    )?;
    check_len("prior length", log_likelihoods.rows(), priors.rows())?;
    check_len("prior width", trellis.num_inputs(), priors.cols())?;
    let mut out = Table::zeros(log_likelihoods.rows(), trellis.num_edges());
    for t in 0..out.rows() {
        let lik = log_likelihoods.row(t);
        let log_prior: Vec<f64> = priors.row(t).iter().map(|&p| math::ln(p)).collect();
        for (slot, e) in out.row_mut(t).iter_mut().zip(trellis.edges()) {
            *slot = lik[e.param] + log_prior[e.input];
        }
    }
    Ok(out)
}

/// Log branch metric `ln p(y_t | edge) + ln p(x_t = input(edge))`.
pub fn branch_metrics(observations: &[f64], params: &HmmParams<'_>) -> Result<Table> {
    let lik = gaussian_log_likelihoods(observations, params.emissions)?;
    branch_metrics_from_likelihoods(&lik, params.trellis, params.symbol_priors)
}

fn shift_row(row: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_finite() {
        row.iter_mut().for_each(|v| *v -= max);
    }
    max
}

/// Forward recursion. Returns the `(T + 1) x S` log table and the per-row
/// shifts.
pub fn forward(log_gamma: &Table, trellis: &TrellisSpec) -> Result<(Table, Vec<f64>)> {
    check_len("branch metric width", trellis.num_edges(), log_gamma.cols())?;
    let steps = log_gamma.rows();
    let n = trellis.num_states();
    let mut alpha = Table::zeros(steps + 1, n);
    let mut scales = Vec::with_capacity(steps + 1);
    for (a, &p) in alpha
        .row_mut(0)
        .iter_mut()
        .zip(trellis.initial_distribution())
    {
        *a = math::ln(p);
    }
    scales.push(shift_row(alpha.row_mut(0)));

    let mut acc_max = vec![f64::NEG_INFINITY; n];
    let mut acc_sum = vec![0.0; n];
    let mut vals = vec![0.0; trellis.num_edges()];
    for t in 0..steps {
        let gamma = log_gamma.row(t);
        let prev = alpha.row(t);
        acc_max.iter_mut().for_each(|m| *m = f64::NEG_INFINITY);
        acc_sum.iter_mut().for_each(|s| *s = 0.0);
        for (i, e) in trellis.edges().iter().enumerate() {
            vals[i] = prev[e.from] + gamma[i];
            acc_max[e.to] = acc_max[e.to].max(vals[i]);
        }
        for (i, e) in trellis.edges().iter().enumerate() {
            if acc_max[e.to] > f64::NEG_INFINITY {
                acc_sum[e.to] += math::exp(vals[i] - acc_max[e.to]);
            }
        }
        let row = alpha.row_mut(t + 1);
        for s in 0..n {
            row[s] = if acc_max[s] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                acc_max[s] + math::ln(acc_sum[s])
            };
        }
        let shift = shift_row(row);
        if !shift.is_finite() {
            return Err(Error::Inference { t });
        }
        scales.push(shift);
    }
    Ok((alpha, scales))
}

/// Backward recursion. `terminal` is the final state distribution (linear
/// domain); `None` means uniform, i.e. an unterminated frame.
pub fn backward(
    log_gamma: &Table,
    trellis: &TrellisSpec,
    terminal: Option<&[f64]>,
) -> Result<Table> {
    check_len("branch metric width", trellis.num_edges(), log_gamma.cols())?;
    let steps = log_gamma.rows();
    let n = trellis.num_states();
    let mut beta = Table::zeros(steps + 1, n);
    if let Some(term) = terminal {
        check_len("terminal distribution", n, term.len())?;
        for (b, &p) in beta.row_mut(steps).iter_mut().zip(term) {
            *b = math::ln(p);
        }
        shift_row(beta.row_mut(steps));
    }

    let mut acc_max = vec![f64::NEG_INFINITY; n];
    let mut acc_sum = vec![0.0; n];
    let mut vals = vec![0.0; trellis.num_edges()];
    for t in (0..steps).rev() {
        let gamma = log_gamma.row(t);
        acc_max.iter_mut().for_each(|m| *m = f64::NEG_INFINITY);
        acc_sum.iter_mut().for_each(|s| *s = 0.0);
        {
            let next = beta.row(t + 1);
            for (i, e) in trellis.edges().iter().enumerate() {
                vals[i] = next[e.to] + gamma[i];
                acc_max[e.from] = acc_max[e.from].max(vals[i]);
            }
        }
        for (i, e) in trellis.edges().iter().enumerate() {
            if acc_max[e.from] > f64::NEG_INFINITY {
                acc_sum[e.from] += math::exp(vals[i] - acc_max[e.from]);
            }
        }
        let row = beta.row_mut(t);
        for s in 0..n {
            row[s] = if acc_max[s] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                acc_max[s] + math::ln(acc_sum[s])
            };
        }
        if !shift_row(row).is_finite() {
            return Err(Error::Inference { t });
        }
    }
    Ok(beta)
}

/// Normalized log posterior `ln p(edge at t | y)` from the forward,
/// backward and branch tables.
pub fn edge_posteriors(
    log_alpha: &Table,
    log_beta: &Table,
    log_gamma: &Table,
    trellis: &TrellisSpec,
) -> Result<Table> {
    let steps = log_gamma.rows();
    check_len("branch metric width", trellis.num_edges(), log_gamma.cols())?;
    check_len("forward rows", steps + 1, log_alpha.rows())?;
    check_len("backward rows", steps + 1, log_beta.rows())?;
    check_len("forward width", trellis.num_states(), log_alpha.cols())?;
    check_len("backward width", trellis.num_states(), log_beta.cols())?;
    let mut out = Table::zeros(steps, trellis.num_edges());
    for t in 0..steps {
        let (a, b, g) = (log_alpha.row(t), log_beta.row(t + 1), log_gamma.row(t));
        let row = out.row_mut(t);
        for (i, e) in trellis.edges().iter().enumerate() {
            row[i] = a[e.from] + g[i] + b[e.to];
        }
        let norm = math::logsumexp(row);
        if !norm.is_finite() {
            return Err(Error::Inference { t });
        }
        row.iter_mut().for_each(|v| *v -= norm);
    }
    Ok(out)
}

/// Full forward-backward pass.
pub fn run(
    log_gamma: &Table,
    trellis: &TrellisSpec,
    terminal: Option<&[f64]>,
) -> Result<SoftSequence> {
    let (log_alpha, alpha_scales) = forward(log_gamma, trellis)?;
    let log_beta = backward(log_gamma, trellis, terminal)?;
    let log_edge_posterior = edge_posteriors(&log_alpha, &log_beta, log_gamma, trellis)?;
    let last = log_alpha.row(log_alpha.rows() - 1);
    let log_evidence = alpha_scales.iter().sum::<f64>() + math::logsumexp(last);
    Ok(SoftSequence {
        log_alpha,
        log_beta,
        log_edge_posterior,
        alpha_scales,
        log_evidence,
    })
}

/// `p(x_t = x | y)`: edge posteriors summed over the edges each input drives.
pub fn symbol_joint(log_edge_posterior: &Table, trellis: &TrellisSpec) -> Table {
    let mut out = Table::zeros(log_edge_posterior.rows(), trellis.num_inputs());
    for t in 0..out.rows() {
        let post = log_edge_posterior.row(t);
        let row = out.row_mut(t);
        for (i, e) in trellis.edges().iter().enumerate() {
            row[e.input] += math::exp(post[i]);
        }
    }
    out
}

/// `p(c = v | y)` for every output bit of every step: row `t * outputs + j`
/// holds bit `j` of the edge label at step `t`.
pub fn output_bit_joint(
    log_edge_posterior: &Table,
    trellis: &TrellisSpec,
    outputs: usize,
) -> Table {
    let mut out = Table::zeros(log_edge_posterior.rows() * outputs, 2);
    for t in 0..log_edge_posterior.rows() {
        let post = log_edge_posterior.row(t);
        for (i, e) in trellis.edges().iter().enumerate() {
            let p = math::exp(post[i]);
            for j in 0..outputs {
                let r = t * outputs + j;
                let bit = ((e.output >> j) & 1) as usize;
                out.set(r, bit, out.get(r, bit) + p);
            }
        }
    }
    out
}

/// Extrinsic table and the number of divisor entries that had to be
/// raised to [`PROB_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsic {
    pub table: Table,
    pub clamped: usize,
}

/// Divides a joint table by the prior it was computed with and
/// renormalizes each row.
pub fn extrinsic_divide(joint: &Table, prior: &Table) -> Result<Extrinsic> {
    check_len("prior rows", joint.rows(), prior.rows())?;
    check_len("prior width", joint.cols(), prior.cols())?;
    let mut clamped = 0;
    let mut table = joint.clone();
    for t in 0..joint.rows() {
        for (v, &p) in table.row_mut(t).iter_mut().zip(prior.row(t)) {
            let d = if p < PROB_FLOOR {
                clamped += 1;
                PROB_FLOOR
            } else {
                p
            };
            *v /= d;
        }
    }
    table.normalize_rows();
    Ok(Extrinsic { table, clamped })
}

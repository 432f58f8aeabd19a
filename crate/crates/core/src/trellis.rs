//! Trellis structures and the HMM parameter containers.
//!
//! ISI states encode a symbol history as an integer whose base-2 digits are
//! the symbol indices, most recent symbol in the lowest digit. Symbol index 0
//! is `+1` and index 1 is `-1` (bit 0 maps to `+1`). An emission parameter
//! index is the same encoding applied to the full `L`-symbol window
//! `(x_t, x_{t-1}, ..., x_{t-L+1})`, which makes the conventional state index
//! and the reduced-trellis parameter index of one window identical.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::check_len;
use crate::{Error, Result, Table};

/// Number of BPSK symbols.
pub const BPSK: usize = 2;

/// One labelled transition of a trellis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Driving input symbol (or bit) index.
    pub input: usize,
    /// Index into the emission parameter table.
    pub param: usize,
    /// Packed output label: the ISI window index, or the coded bits of a
    /// convolutional code with generator `j` in bit `j`.
    pub output: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrellisKind {
    /// `2^L` states, emission tied to the destination state.
    IsiConventional { memory: usize },
    /// `2^(L-1)` states, emission tied to the edge.
    IsiReduced { memory: usize },
    /// Feed-forward code with `outputs` coded bits per input bit.
    Convolutional { outputs: usize },
}

/// A time-invariant finite-state machine with labelled edges.
///
/// Edges are stored sorted by `(from, input)`, so the edge driven by input
/// `x` out of state `s` has index `s * num_inputs + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrellisSpec {
    kind: TrellisKind,
    num_states: usize,
    num_inputs: usize,
    num_params: usize,
    edges: Vec<Edge>,
    initial: Vec<f64>,
}

impl TrellisSpec {
    /// Validates and assembles a trellis.
    pub fn new(
        kind: TrellisKind,
        num_states: usize,
        num_inputs: usize,
        mut edges: Vec<Edge>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_inputs == 0 {
            return Err(Error::Config("trellis needs at least one state and input"));
        }
        check_len("trellis edges", num_states * num_inputs, edges.len())?;
        check_len("initial distribution", num_states, initial.len())?;
        edges.sort_by_key(|e| (e.from, e.input));
        for (i, e) in edges.iter().enumerate() {
            if e.from >= num_states || e.to >= num_states || e.input >= num_inputs {
                return Err(Error::Config("edge endpoint or input out of range"));
            }
            if e.from * num_inputs + e.input != i {
                return Err(Error::Config("next-state function is not deterministic"));
            }
        }
        let num_params = edges.iter().map(|e| e.param + 1).max().unwrap_or(0);
        let mut seen = vec![false; num_params];
        edges.iter().for_each(|e| seen[e.param] = true);
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("parameter indices are not contiguous"));
        }
        if initial.iter().any(|&p| p.is_nan() || p < 0.0)
            || libm::fabs(initial.iter().sum::<f64>() - 1.0) > 1e-12
        {
            return Err(Error::Config("initial distribution is not a distribution"));
        }
        Ok(Self {
            kind,
            num_states,
            num_inputs,
            num_params,
            edges,
            initial,
        })
    }

    pub fn kind(&self) -> TrellisKind {
        self.kind
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    #[inline]
    pub fn edge(&self, from: usize, input: usize) -> &Edge {
        &self.edges[from * self.num_inputs + input]
    }

    /// ISI channel memory `L`, if this is an ISI trellis.
    pub fn isi_memory(&self) -> Option<usize> {
        match self.kind {
            TrellisKind::IsiConventional { memory } | TrellisKind::IsiReduced { memory } => {
                Some(memory)
            }
            TrellisKind::Convolutional { .. } => None,
        }
    }

    /// Per-state sum of outgoing transition probabilities under the symbol
    /// prior `prior` (one entry per input).
    pub fn outgoing_mass(&self, prior: &[f64]) -> Vec<f64> {
        let mut mass = vec![0.0; self.num_states];
        for e in &self.edges {
            mass[e.from] += prior[e.input];
        }
        mass
    }
}

fn check_isi(memory: usize, alphabet_size: usize) -> Result<()> {
    if memory < 1 {
        return Err(Error::Config("channel memory must be at least 1"));
    }
    if alphabet_size != BPSK {
        return Err(Error::Config("only the BPSK alphabet is supported"));
    }
    if memory > 20 {
        return Err(Error::Config("channel memory too large"));
    }
    Ok(())
}

/// Trellis whose states are the last `memory` symbols; each state carries
/// its own emission parameter.
pub fn build_isi_trellis_conventional(memory: usize, alphabet_size: usize) -> Result<TrellisSpec> {
    check_isi(memory, alphabet_size)?;
    let q = alphabet_size;
    let num_states = q.pow(memory as u32);
    let mut edges = Vec::with_capacity(num_states * q);
    for from in 0..num_states {
        for input in 0..q {
            let to = (input + q * from) % num_states;
            edges.push(Edge {
                from,
                to,
                input,
                param: to,
                output: to as u32,
            });
        }
    }
    let initial = vec![1.0 / num_states as f64; num_states];
    TrellisSpec::new(
        TrellisKind::IsiConventional { memory },
        num_states,
        q,
        edges,
        initial,
    )
}

/// Trellis whose states are the last `memory - 1` symbols; emission
/// parameters sit on the edges, which span the full `memory`-symbol window.
pub fn build_isi_trellis_reduced(memory: usize) -> Result<TrellisSpec> {
    check_isi(memory, BPSK)?;
    let q = BPSK;
    let num_states = q.pow(memory as u32 - 1);
    let mut edges = Vec::with_capacity(num_states * q);
    for from in 0..num_states {
        for input in 0..q {
            let window = input + q * from;
            edges.push(Edge {
                from,
                to: window % num_states,
                input,
                param: window,
                output: window as u32,
            });
        }
    }
    let initial = vec![1.0 / num_states as f64; num_states];
    TrellisSpec::new(
        TrellisKind::IsiReduced { memory },
        num_states,
        q,
        edges,
        initial,
    )
}

/// Trellis of a feed-forward convolutional code.
///
/// Generator bit `registers` taps the current input and bit 0 the oldest
/// register, so `(7, 5)` octal with two registers is the usual rate-1/2
/// code. The encoder starts in state 0.
pub fn build_conv_trellis(generators: &[u32], registers: usize) -> Result<TrellisSpec> {
    if generators.is_empty() {
        return Err(Error::Config(
            "at least one generator polynomial is required",
        ));
    }
    if generators.len() > 32 || registers > 16 {
        return Err(Error::Config("code too large"));
    }
    if generators
        .iter()
        .any(|&g| g == 0 || (g >> (registers + 1)) != 0)
    {
        return Err(Error::Config("generator degree exceeds register count"));
    }
    let num_states = 1usize << registers;
    let word = |state: usize, bit: usize| ((bit << registers) | state) as u32;
    let output = |w: u32| {
        generators
            .iter()
            .enumerate()
            .fold(0u32, |acc, (j, &g)| acc | (((w & g).count_ones() & 1) << j))
    };
    let mut distinct: Vec<u32> = (0..num_states)
        .flat_map(|s| (0..2).map(move |b| (s, b)))
        .map(|(s, b)| output(word(s, b)))
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    let mut edges = Vec::with_capacity(num_states * 2);
    for from in 0..num_states {
        for input in 0..2 {
            let w = word(from, input);
            let out = output(w);
            edges.push(Edge {
                from,
                to: (w >> 1) as usize,
                input,
                param: distinct.binary_search(&out).unwrap_or(0),
                output: out,
            });
        }
    }
    let mut initial = vec![0.0; num_states];
    initial[0] = 1.0;
    TrellisSpec::new(
        TrellisKind::Convolutional {
            outputs: generators.len(),
        },
        num_states,
        2,
        edges,
        initial,
    )
}

/// Symbol window spanned by a reduced-trellis edge, in conventional state
/// indexing.
fn reduced_edge_window(e: &Edge, q: usize) -> usize {
    e.input + q * e.from
}

fn check_pair(reduced: &TrellisSpec, conventional: &TrellisSpec) -> Result<usize> {
    match (reduced.kind, conventional.kind) {
        (TrellisKind::IsiReduced { memory: a }, TrellisKind::IsiConventional { memory: b })
            if a == b =>
        {
            Ok(a)
        }
        _ => Err(Error::Config(
            "expected a reduced and a conventional ISI trellis of equal memory",
        )),
    }
}

/// Re-indexes per-time reduced-trellis edge posteriors as conventional
/// state posteriors (both enumerate the same symbol windows).
pub fn edge_posterior_to_state_posterior(
    edge_posteriors: &Table,
    reduced: &TrellisSpec,
    conventional: &TrellisSpec,
) -> Result<Table> {
    check_pair(reduced, conventional)?;
    check_len(
        "edge posterior width",
        reduced.num_edges(),
        edge_posteriors.cols(),
    )?;
    let mut out = Table::zeros(edge_posteriors.rows(), conventional.num_states());
    for t in 0..edge_posteriors.rows() {
        for (i, e) in reduced.edges().iter().enumerate() {
            out.set(t, reduced_edge_window(e, BPSK), edge_posteriors.get(t, i));
        }
    }
    Ok(out)
}

/// Inverse of [`edge_posterior_to_state_posterior`].
pub fn state_posterior_to_edge_posterior(
    state_posteriors: &Table,
    reduced: &TrellisSpec,
    conventional: &TrellisSpec,
) -> Result<Table> {
    check_pair(reduced, conventional)?;
    check_len(
        "state posterior width",
        conventional.num_states(),
        state_posteriors.cols(),
    )?;
    let mut out = Table::zeros(state_posteriors.rows(), reduced.num_edges());
    for t in 0..state_posteriors.rows() {
        for (i, e) in reduced.edges().iter().enumerate() {
            out.set(t, i, state_posteriors.get(t, reduced_edge_window(e, BPSK)));
        }
    }
    Ok(out)
}

/// Per-parameter Gaussian emission means and variances.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGaussianTable {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl EdgeGaussianTable {
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        check_len("emission variances", means.len(), variances.len())?;
        if variances.iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(Error::Input("emission variances must be positive"));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Input("emission means must be finite"));
        }
        Ok(Self { means, variances })
    }

    /// All parameters sharing one variance.
    pub fn with_common_variance(means: Vec<f64>, variance: f64) -> Result<Self> {
        let n = means.len();
        Self::new(means, vec![variance; n])
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Everything needed to score a path: the trellis, its emissions, and the
/// per-time input priors that set the transition probabilities.
#[derive(Debug, Clone, Copy)]
pub struct HmmParams<'a> {
    pub trellis: &'a TrellisSpec,
    pub emissions: &'a EdgeGaussianTable,
    pub symbol_priors: &'a Table,
}

impl<'a> HmmParams<'a> {
    pub fn new(
        trellis: &'a TrellisSpec,
        emissions: &'a EdgeGaussianTable,
        symbol_priors: &'a Table,
    ) -> Result<Self> {
        check_len("emission table", trellis.num_params(), emissions.len())?;
        check_len(
            "symbol prior width",
            trellis.num_inputs(),
            symbol_priors.cols(),
        )?;
        symbol_priors.check_distribution(1e-12)?;
        Ok(Self {
            trellis,
            emissions,
            symbol_priors,
        })
    }
}

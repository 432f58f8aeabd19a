//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Positional arguments select criteria by name
//! substring, e.g. `cargo test --test acceptance -- mstep`.

use std::time::{Duration, Instant};

use bwturbo_core::bcjr;
use bwturbo_core::chain::{bpsk_map, random_bits};
use bwturbo_core::channel::{self, ChannelSpec};
use bwturbo_core::em::{self, InitSpec, VarianceMode};
use bwturbo_core::receiver::Mode;
use bwturbo_core::trellis::{build_isi_trellis_conventional, build_isi_trellis_reduced};
use bwturbo_core::{EdgeGaussianTable, HmmParams, Table};
use bwturbo_sim::experiment::{convergence_iteration, run_experiment, simulate};
use bwturbo_sim::{ExperimentConfig, ResultRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gauss(y: f64, m: f64, v: f64) -> f64 {
    (-(y - m) * (y - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

/// Window, symbol posteriors and evidence of a memory-2 ISI model, by
/// summing over the unknown pre-frame symbol and every input sequence.
fn enumerate_memory2(
    y: &[f64],
    means: &[f64],
    vars: &[f64],
    priors: &[[f64; 2]],
) -> (Vec<[f64; 4]>, Vec<[f64; 2]>, f64) {
    let n = y.len();
    let mut window = vec![[0.0; 4]; n];
    let mut symbol = vec![[0.0; 2]; n];
    let mut z = 0.0;
    for seq in 0u32..(1 << (n + 1)) {
        // bit 0 is the pre-frame symbol, bit t + 1 the symbol at time t
        let bit = |k: usize| ((seq >> k) & 1) as usize;
        let mut w = 0.5;
        for t in 0..n {
            let win = bit(t + 1) + 2 * bit(t);
            w *= priors[t][bit(t + 1)] * gauss(y[t], means[win], vars[win]);
        }
        z += w;
        for t in 0..n {
            window[t][bit(t + 1) + 2 * bit(t)] += w;
            symbol[t][bit(t + 1)] += w;
        }
    }
    for t in 0..n {
        window[t].iter_mut().for_each(|v| *v /= z);
        symbol[t].iter_mut().for_each(|v| *v /= z);
    }
    (window, symbol, z.ln())
}

fn posteriors_match_enumeration() -> Outcome {
    let start = Instant::now();
    let trellis = build_isi_trellis_reduced(2).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-2.5..2.5)).collect();
        let means: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
        let vars: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..1.5)).collect();
        let priors: Vec<[f64; 2]> = (0..8)
            .map(|_| {
                let p = rng.random_range(0.05..0.95);
                [p, 1.0 - p]
            })
            .collect();
        let (window, symbol, evidence) = enumerate_memory2(&y, &means, &vars, &priors);

        let emissions = EdgeGaussianTable::new(means, vars).unwrap();
        let prior_table = Table::from_rows(&priors).unwrap();
        let params = HmmParams::new(&trellis, &emissions, &prior_table).unwrap();
        let gamma = bcjr::branch_metrics(&y, &params).unwrap();
        let soft = bcjr::run(&gamma, &trellis, None).unwrap();
        let edges = soft.edge_posterior();
        let states = soft.state_posterior(&trellis);
        let symbols = bcjr::symbol_joint(&soft.log_edge_posterior, &trellis);
        for t in 0..8 {
            for (i, e) in trellis.edges().iter().enumerate() {
                worst = worst.max((edges.get(t, i) - window[t][e.param]).abs());
            }
            for (s, &p) in symbol[t].iter().enumerate() {
                let expect: f64 = (0..4).filter(|w| w % 2 == s).map(|w| window[t][w]).sum();
                worst = worst.max((states.get(t, s) - expect).abs());
                worst = worst.max((symbols.get(t, s) - p).abs());
            }
        }
        worst = worst.max((soft.log_evidence - evidence).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-10 && elapsed < Duration::from_secs(10),
        format!(
            "max abs error {worst:.2e} over 100 sequences, {:.2?}",
            elapsed
        ),
    )
}

/// Noisy output of the default channel for `n` random symbols.
fn channel_frame(n: usize, snr_db: f64, seed: u64) -> (Vec<f64>, Vec<f64>, f64) {
    let cfg = ExperimentConfig::default();
    let var = channel::snr_to_variance(snr_db);
    let ch = ChannelSpec::new(&cfg.taps, var, seed.wrapping_mul(31).wrapping_add(7)).unwrap();
    let symbols = bpsk_map(&random_bits(n, seed));
    let (_, y) = channel::apply_channel(&symbols, &ch).unwrap();
    let truth = channel::true_param_table(&ch, &build_isi_trellis_reduced(3).unwrap()).unwrap();
    (y, truth, var)
}

fn reduced_equals_conventional() -> Outcome {
    let start = Instant::now();
    let reduced = build_isi_trellis_reduced(3).unwrap();
    let conventional = build_isi_trellis_conventional(3, 2).unwrap();
    let mut worst: f64 = 0.0;
    for (seed, mode) in [(1, VarianceMode::FixedTrue), (2, VarianceMode::Estimated)] {
        let (y, truth, var) = channel_frame(500, 4.0, seed);
        let init = InitSpec {
            true_means: Some(truth),
            perturbation: 0.3,
            variance_mode: mode,
            noise_variance: var,
            rng_seed: seed,
        };
        let priors = Table::uniform(y.len(), 2);
        let a = em::run_em(&y, &reduced, &init, &priors, 20).unwrap();
        let b = em::run_em(&y, &conventional, &init, &priors, 20).unwrap();
        for (x, z) in a.history.iter().zip(&b.history) {
            worst = worst.max((x.log_evidence - z.log_evidence).abs() / x.log_evidence.abs());
            for (u, v) in x
                .means
                .iter()
                .zip(&z.means)
                .chain(x.variances.iter().zip(&z.variances))
            {
                worst = worst.max((u - v).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-9 && elapsed < Duration::from_secs(30),
        format!(
            "max parameter / relative evidence difference {worst:.2e} over 20 iterations, {:.2?}",
            elapsed
        ),
    )
}

fn em_is_monotone() -> Outcome {
    let trellis = build_isi_trellis_reduced(3).unwrap();
    let mut worst_drop = f64::NEG_INFINITY;
    let mut runs = 0;
    for snr in [2.0, 4.0, 6.0] {
        for seed in 0..10u64 {
            for mode in [VarianceMode::FixedTrue, VarianceMode::Estimated] {
                let (y, truth, var) = channel_frame(1000, snr, 100 + seed);
                let init = InitSpec {
                    true_means: Some(truth),
                    perturbation: 0.2,
                    variance_mode: mode,
                    noise_variance: var,
                    rng_seed: seed,
                };
                let priors = Table::uniform(y.len(), 2);
                let est = em::run_em(&y, &trellis, &init, &priors, 30).unwrap();
                let params = HmmParams::new(&trellis, &est.emissions, &priors).unwrap();
                let last = em::e_step(&y, &params).unwrap().log_evidence;
                let mut ll: Vec<f64> = est.history.iter().map(|h| h.log_evidence).collect();
                ll.push(last);
                for w in ll.windows(2) {
                    worst_drop = worst_drop.max((w[0] - w[1]) / w[0].abs());
                }
                runs += 1;
            }
        }
    }
    outcome(
        worst_drop <= 1e-8,
        format!("{runs} runs, largest relative decrease {worst_drop:.2e}"),
    )
}

fn noiseless_link_is_error_free() -> Outcome {
    let cfg = ExperimentConfig {
        snr_db: vec![60.0],
        modes: vec![Mode::Joint],
        init_error: 0.0,
        n_turbo_iters: 1,
        em_iters_per_turbo: 0,
        n_frames: 20,
        ..ExperimentConfig::default()
    };
    let rows = simulate(&cfg).unwrap();
    let ber = rows.last().and_then(|r| r.ber_mean);
    outcome(
        ber == Some(0.0),
        format!(
            "noise variance {:.0e}, 20 frames, BER {ber:?}",
            channel::snr_to_variance(60.0)
        ),
    )
}

fn cell(rows: &[ResultRow], mode: Mode, snr: f64) -> Vec<&ResultRow> {
    rows.iter()
        .filter(|r| r.mode == mode.name() && r.snr_db == snr)
        .collect()
}

fn conv_iter(rows: &[ResultRow], mode: Mode, snr: f64) -> usize {
    let c: Vec<ResultRow> = cell(rows, mode, snr).into_iter().cloned().collect();
    convergence_iteration(&c, 0.1).unwrap()
}

fn final_mse(rows: &[ResultRow], mode: Mode, snr: f64) -> f64 {
    cell(rows, mode, snr).last().unwrap().mse_mean
}

struct DefaultRun {
    rows: Vec<ResultRow>,
    elapsed: Duration,
}

fn default_run() -> DefaultRun {
    let start = Instant::now();
    let rows = simulate(&ExperimentConfig::default()).unwrap();
    DefaultRun {
        rows,
        elapsed: start.elapsed(),
    }
}

fn joint_converges_faster(run: &DefaultRun) -> Outcome {
    let joint = conv_iter(&run.rows, Mode::Joint, 4.0);
    let standalone = conv_iter(&run.rows, Mode::Standalone, 4.0);
    let pass = (joint as f64) <= 0.6 * standalone as f64 && run.elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "4 dB: joint within 10% of final after {joint} iterations, standalone after {standalone}; default sweep took {:.1?}",
            run.elapsed
        ),
    )
}

fn joint_mse_at_high_snr(run: &DefaultRun) -> Outcome {
    let mse = final_mse(&run.rows, Mode::Joint, 6.0);
    outcome(
        (1e-5..=1e-3).contains(&mse),
        format!("6 dB joint final MSE {mse:.3e}"),
    )
}

fn low_snr_ordering(run: &DefaultRun) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for snr in [2.0, 4.0, 6.0] {
        let j = final_mse(&run.rows, Mode::Joint, snr);
        let s = final_mse(&run.rows, Mode::Standalone, snr);
        let ok = if snr == 2.0 { s <= j } else { j < s };
        pass &= ok;
        parts.push(format!(
            "{snr} dB joint {j:.3e} standalone {s:.3e}{}",
            if ok { "" } else { " (wrong order)" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn csv_is_reproducible() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let cfg = ExperimentConfig {
            frame_len: 256,
            n_frames: 4,
            n_turbo_iters: 5,
            snr_db: vec![2.0, 5.0],
            modes: vec![Mode::Joint, Mode::Standalone, Mode::ConventionalBw],
            seed: 42,
            output: dir.path().join(name),
            ..ExperimentConfig::default()
        };
        run_experiment(&cfg).unwrap();
        bytes.push(std::fs::read(&cfg.output).unwrap());
    }
    outcome(
        bytes[0] == bytes[1] && !bytes[0].is_empty(),
        format!(
            "two runs, {} bytes each, identical: {}",
            bytes[0].len(),
            bytes[0] == bytes[1]
        ),
    )
}

fn m_step_matches_direct_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t_len = rng.random_range(1..80);
        let params = rng.random_range(1..17);
        let y: Vec<f64> = (0..t_len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut rows = vec![vec![0.0; params]; t_len];
        for row in rows.iter_mut() {
            row.iter_mut()
                .for_each(|r| *r = rng.random_range(0.01..1.0));
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|r| *r /= s);
        }
        let resp = Table::from_rows(&rows).unwrap();
        let prev_means = vec![0.0; params];
        let means = em::m_step_means(&y, &resp, &prev_means).unwrap().values;
        let vars = em::m_step_variances(&y, &resp, &means, &vec![1.0; params], em::VARIANCE_FLOOR)
            .unwrap()
            .values;
        for l in 0..params {
            let occ: f64 = rows.iter().map(|r| r[l]).sum();
            let mu = rows.iter().zip(&y).map(|(r, yt)| r[l] * yt).sum::<f64>() / occ;
            let var = rows
                .iter()
                .zip(&y)
                .map(|(r, yt)| r[l] * (yt - mu) * (yt - mu))
                .sum::<f64>()
                / occ;
            worst = worst.max((means[l] - mu).abs());
            worst = worst.max((vars[l] - var.max(em::VARIANCE_FLOOR)).abs());
        }
    }
    outcome(
        worst < 1e-12,
        format!("1000 random tables, max abs error {worst:.2e}"),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected =
        |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));

    type Check = fn() -> Outcome;
    type RunCheck = fn(&DefaultRun) -> Outcome;
    let quick: [(&str, &str, Check); 4] = [
        (
            "1",
            "posteriors-vs-enumeration",
            posteriors_match_enumeration,
        ),
        (
            "2",
            "reduced-vs-conventional-em",
            reduced_equals_conventional,
        ),
        ("3", "em-monotone", em_is_monotone),
        ("4", "noiseless-ber-zero", noiseless_link_is_error_free),
    ];
    let sweep: [(&str, &str, RunCheck); 3] = [
        ("5", "convergence-speedup", joint_converges_faster),
        ("6", "joint-mse-6db", joint_mse_at_high_snr),
        ("7", "snr-ordering", low_snr_ordering),
    ];
    let tail: [(&str, &str, Check); 2] = [
        ("8", "csv-reproducible", csv_is_reproducible),
        ("9", "mstep-vs-direct", m_step_matches_direct_formula),
    ];

    let mut failed = 0;
    let mut report = |id: &str, name: &str, o: Outcome| {
        println!(
            "{} [{id}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    };
    for (id, name, f) in quick {
        if selected(name) {
            report(id, name, f());
        }
    }
    if sweep.iter().any(|(_, name, _)| selected(name)) {
        let run = default_run();
        for (id, name, f) in sweep {
            if selected(name) {
                report(id, name, f(&run));
            }
        }
    }
    for (id, name, f) in tail {
        if selected(name) {
            report(id, name, f());
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

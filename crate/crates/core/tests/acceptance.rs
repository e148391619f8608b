//! Acceptance checks for the whole toolkit: one test per release gate, each
//! printing a single PASS/FAIL line with the measured numbers.
//!
//! Everything is seed-fixed. The desk-scale (8,4) model used by the training
//! and symbolic-conversion gates is trained once and shared.

use std::sync::LazyLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::erfc;

use kanae::autoencoder::{depair_complex, AutoencoderModel};
use kanae::channel::ChannelKind;
use kanae::golay::LinearBlockCode;
use kanae::harness::bler::{simulate_bler, Scheme};
use kanae::harness::report::score_model;
use kanae::harness::{train_autoencoder, ArchConfig, TrainConfig};
use kanae::network::{loss_and_gradients, prune_stack, PruneMode, TrainSample};
use kanae::nonlinearity::{baseline_mld_score, nonlinearity_score, NonlinearityParams};
use kanae::rng::{stream, Domain};
use kanae::splines::SplineGrid;
use kanae::symreg::{
    symbolify_activation, symbolify_model, Candidate, CandidateLibrary, SymbolifyParams,
};

/// Prints the gate's verdict line, then enforces it.
fn gate(name: &str, pass: bool, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Least-squares fit of spline coefficients to `target` at the points `xs`:
/// normal equations solved by Gaussian elimination with partial pivoting.
fn least_squares_spline(grid: &SplineGrid, xs: &[f64], target: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = grid.basis_count();
    let mut ata = vec![vec![0.0f64; n]; n];
    let mut atb = vec![0.0f64; n];
    for &x in xs {
        let basis = grid.basis_eval(x);
        let y = target(x);
        for i in 0..n {
            atb[i] += basis[i] * y;
            for j in 0..n {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))
            .unwrap();
        ata.swap(col, pivot);
        atb.swap(col, pivot);
        for row in col + 1..n {
            let f = ata[row][col] / ata[col][col];
            for j in col..n {
                ata[row][j] -= f * ata[col][j];
            }
            atb[row] -= f * atb[col];
        }
    }
    let mut coeffs = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut acc = atb[row];
        for j in row + 1..n {
            acc -= ata[row][j] * coeffs[j];
        }
        coeffs[row] = acc / ata[row][row];
    }
    coeffs
}

/// The shared desk-scale model: (8,4) spline autoencoder, 2000 epochs of
/// batch 256 with the 0 → 6 dB noise schedule.
static DESK: LazyLock<(AutoencoderModel, Vec<f64>)> = LazyLock::new(|| {
    let config = TrainConfig {
        n: 8,
        k: 4,
        arch: ArchConfig::Kan {
            degree: 3,
            basis_count: 5,
        },
        batch_size: 256,
        learning_rate: 1e-2,
        n_epochs: 2000,
        ebn0_start_db: 0.0,
        ebn0_end_db: 6.0,
        seed: 42,
        refit_every: 500,
        checkpoint_every: 0,
    };
    train_autoencoder(&config).expect("desk-scale training")
});

#[test]
fn worked_nonlinearity_scores() {
    let params = NonlinearityParams::default().with_epsilon(1e-3).unwrap();
    let abs5 = nonlinearity_score(|x| (5.0 * x).abs(), (-1.0, 1.0), &params).unwrap();
    let sin5 = nonlinearity_score(|x| (5.0 * x).sin(), (-1.0, 1.0), &params).unwrap();
    gate(
        "worked non-linearity scores",
        abs5 == 2 && sin5 == 11,
        &format!("N(|5x|) = {abs5} (want 2), N(sin 5x) = {sin5} (want 11) at eps = 1e-3"),
    );
}

#[test]
fn mlp_autoencoder_score_headline() {
    let model = AutoencoderModel::mlp_default(24, 12, 150, 0).unwrap();
    let report = score_model(&model, &NonlinearityParams::default()).unwrap();
    gate(
        "(24,12) MLP-AE non-linearity score",
        report.q == 1_236_600,
        &format!("Q = {} (want 1236600)", report.q),
    );
}

#[test]
fn golay_mld_search_score() {
    let q = baseline_mld_score(24, 12);
    gate(
        "Golay MLD baseline score",
        q == 2_359_296,
        &format!("Q = {q} (want 2359296)"),
    );
}

#[test]
fn golay_weight_spectrum() {
    let code = LinearBlockCode::extended_golay();
    let hist = code.weight_distribution();
    let expected: std::collections::BTreeMap<usize, usize> =
        [(0, 1), (8, 759), (12, 2576), (16, 759), (24, 1)].into();
    let d_min = code.min_distance();
    gate(
        "extended Golay weight spectrum",
        hist == expected && d_min == 8,
        &format!("weights {hist:?}, d_min = {d_min} (want 0:1 8:759 12:2576 16:759 24:1, d_min 8)"),
    );
}

#[test]
fn golay_mld_bler_vs_union_bound() {
    let ebn0_db = 4.0;
    let trials = 100_000u64;
    let code = LinearBlockCode::extended_golay();

    // Union bound for coherent MLD on the unit-power QPSK codebook:
    // P_block <= sum_d A_d * Q(sqrt(2 * r * d * Eb/N0)).
    let lin = 10f64.powf(ebn0_db / 10.0);
    let rate = code.rate();
    let bound: f64 = code
        .weight_distribution()
        .iter()
        .filter(|(&d, _)| d > 0)
        .map(|(&d, &a)| a as f64 * q_func((2.0 * rate * d as f64 * lin).sqrt()))
        .sum();

    let result = simulate_bler(&Scheme::golay(), ChannelKind::Awgn, &[ebn0_db], trials, 5).unwrap();
    let bler = result.points[0].bler;
    gate(
        "Golay MLD BLER at 4 dB",
        bler <= 3.0 * bound && bler >= bound / 3.0,
        &format!(
            "measured {bler:.3e} over {trials} trials, union bound {bound:.3e} (factor-3 window)"
        ),
    );
}

/// A reproducible batch with the given per-complex-symbol noise variance.
fn sample_batch(model: &AutoencoderModel, count: usize, noise_var: f64, seed: u64) -> Vec<TrainSample> {
    let mut rng = stream(seed, Domain::Train, 0, 0);
    let normal = Normal::new(0.0, (noise_var / 2.0).sqrt()).unwrap();
    (0..count)
        .map(|_| TrainSample {
            message: rng.random_range(0..model.message_count()),
            noise: (0..model.n() / 2)
                .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect(),
        })
        .collect()
}

fn max_gradient_deviation(model: &AutoencoderModel, batch: &[TrainSample]) -> f64 {
    let (_, grads) = loss_and_gradients(model, batch).unwrap();
    let base = model.params();
    let mut scratch = model.clone();
    let mut params = base.clone();
    let h = 1e-4;
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        scratch.set_params(&params).unwrap();
        let (loss_plus, _) = loss_and_gradients(&scratch, batch).unwrap();
        params[i] = orig - h;
        scratch.set_params(&params).unwrap();
        let (loss_minus, _) = loss_and_gradients(&scratch, batch).unwrap();
        params[i] = orig;
        let fd = (loss_plus - loss_minus) / (2.0 * h);
        let rel = (grads[i] - fd).abs() / grads[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn autoencoder_gradients_match_finite_differences() {
    let kan = AutoencoderModel::kan_default(4, 2, 3, 5, 11).unwrap();
    let mlp = AutoencoderModel::mlp_default(4, 2, 6, 11).unwrap();
    let kan_batch = sample_batch(&kan, 8, 0.5, 1);
    let mlp_batch = sample_batch(&mlp, 8, 0.5, 2);
    let kan_err = max_gradient_deviation(&kan, &kan_batch);
    let mlp_err = max_gradient_deviation(&mlp, &mlp_batch);
    gate(
        "(4,2) gradient check",
        kan_err < 1e-4 && mlp_err < 1e-4,
        &format!(
            "max relative error vs central differences: kan {kan_err:.2e}, mlp {mlp_err:.2e} (want < 1e-4)"
        ),
    );
}

#[test]
fn desk_scale_training_decodes_reliably() {
    let (model, losses) = &*DESK;

    // The loss trace must show real convergence, not a flat line.
    let head: f64 = losses[..100].iter().sum::<f64>() / 100.0;
    let tail: f64 = losses[losses.len() - 100..].iter().sum::<f64>() / 100.0;

    // Noiseless loopback: every message comes back as itself.
    let loopback = (0..model.message_count()).all(|m| {
        let tx = model.encode(m).unwrap();
        model.decode_detect(&depair_complex(&tx)).unwrap().1 == m
    });

    let scheme = Scheme::autoencoder(model.clone()).unwrap();
    let result = simulate_bler(&scheme, ChannelKind::Awgn, &[6.0], 20_000, 1).unwrap();
    let bler = result.points[0].bler;

    gate(
        "(8,4) desk-scale training",
        tail <= 0.5 * head && loopback && bler <= 5e-2,
        &format!(
            "loss {head:.3} -> {tail:.3} (want <= 50%), loopback {}, bler@6dB {bler:.3e} (want <= 5e-2)",
            if loopback { "16/16" } else { "FAILED" }
        ),
    );
}

/// Magnitude-prunes both halves the way the CLI does: every message as the
/// encoder calibration set, 2^11 noisy receptions at 6 dB for the decoder.
fn prune_both_halves(model: &mut AutoencoderModel, eta_enc: f64, eta_dec: f64, seed: u64) {
    let onehots: Vec<Vec<f64>> = (0..model.message_count())
        .map(|m| model.one_hot(m).unwrap())
        .collect();
    prune_stack(model.encoder_mut(), &onehots, eta_enc, PruneMode::Edge).unwrap();
    model.normalize_codebook().unwrap();

    let noise_var = kanae::channel::ebn0_to_noise_var(model.rate(), 6.0);
    let normal = Normal::new(0.0, (noise_var / 2.0).sqrt()).unwrap();
    let mut rng = stream(seed, Domain::Prune, 0, 0);
    let codebook = model.codebook().unwrap();
    let received: Vec<Vec<f64>> = (0..2048)
        .map(|_| {
            let tx = &codebook[rng.random_range(0..codebook.len())];
            let rx: Vec<Complex64> = tx
                .iter()
                .map(|s| s + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect();
            depair_complex(&rx)
        })
        .collect();
    prune_stack(model.decoder_mut(), &received, eta_dec, PruneMode::Edge).unwrap();
}

#[test]
fn symbolic_conversion_preserves_bler_and_cuts_score() {
    let mut spline = DESK.0.clone();
    prune_both_halves(&mut spline, 1e-4, 3e-5, 0);

    let library = CandidateLibrary::default_library();
    let (symbolic, _) =
        symbolify_model(&spline, &library, &SymbolifyParams::default()).unwrap();

    let at_5db = |model: &AutoencoderModel| {
        let scheme = Scheme::autoencoder(model.clone()).unwrap();
        simulate_bler(&scheme, ChannelKind::Awgn, &[5.0], 20_000, 1)
            .unwrap()
            .points[0]
            .bler
    };
    let spline_bler = at_5db(&spline);
    let symbolic_bler = at_5db(&symbolic);

    let params = NonlinearityParams::default();
    let q_symbolic = score_model(&symbolic, &params).unwrap().q;
    let matched_mlp = AutoencoderModel::mlp_default(8, 4, 150, 42).unwrap();
    let q_mlp = score_model(&matched_mlp, &params).unwrap().q;

    gate(
        "symbolic conversion fidelity",
        symbolic_bler <= 1.5 * spline_bler && q_symbolic < q_mlp,
        &format!(
            "bler@5dB spline {spline_bler:.3e} vs symbolic {symbolic_bler:.3e} (want <= 1.5x), \
             Q symbolic {q_symbolic} vs matched MLP {q_mlp} (want <)"
        ),
    );
}

#[test]
fn symbolic_regression_recovers_sine_and_prefers_simpler() {
    // A cubic spline is least-squares fitted to 0.5*sin(2x + 0.3) + 0.1
    // (normal equations, Gaussian elimination — the basis Gram matrix is
    // well-conditioned), then handed to the converter. The search runs on a
    // 0.1-spaced coarse grid: that puts the target's own inner parameters
    // (±2, ±0.3) exactly on the lattice, while the cos-phased equivalent
    // needs beta_in = pi + 1.2708…, which no 0.01-spaced refinement point
    // ever hits. The default 0.5 spacing parks *both* sinusoids at folded
    // off-lattice phases and the winner is a coin flip.
    let grid = SplineGrid::new(3, (-2.2, 2.2), 16).unwrap();
    let target = |x: f64| 0.5 * (2.0 * x + 0.3).sin() + 0.1;
    let xs: Vec<f64> = (0..=440).map(|i| -2.2 + 4.4 * i as f64 / 440.0).collect();
    let coeffs = least_squares_spline(&grid, &xs, target);

    let samples: Vec<(f64, f64)> = xs.iter().map(|&x| (x, grid.spline_value(&coeffs, x))).collect();
    let mut sine_params = SymbolifyParams::default();
    sine_params.grid.coarse = 201;
    let fit = symbolify_activation(
        &samples,
        &CandidateLibrary::default_library(),
        (-2.2, 2.2),
        &sine_params,
    )
    .unwrap();
    let sine_recovered = fit.candidate.id() == "sin" && fit.r2 >= 0.99;

    // Tie-break: two candidates fit the same samples exactly (a pure line,
    // and the line plus a wiggle that vanishes at every sample x = t/10);
    // with lambda = 0.03 the selection must take the smaller N. The search
    // square is capped at [-1, 1]^2 so no rescaling can flatten the wiggle
    // below the scoring tolerance.
    let mut params = SymbolifyParams::default();
    params.grid.range = 1.0;
    let line_samples: Vec<(f64, f64)> =
        (0..=10).map(|t| (t as f64 / 10.0, t as f64 / 10.0)).collect();
    let mut library = CandidateLibrary::from_ids(&["identity"]).unwrap();
    library.push(Candidate::new(
        "wavy",
        |x| x + 0.3 * (20.0 * std::f64::consts::PI * x).sin(),
        |_| true,
    ));
    let tie = symbolify_activation(&line_samples, &library, (0.0, 1.0), &params).unwrap();
    let simpler_won = tie.candidate.id() == "identity" && tie.n_score == 1;

    gate(
        "symbolic regression round-trip",
        sine_recovered && simpler_won,
        &format!(
            "recovered \"{}\" with R^2 {:.5} (want sin, >= 0.99); equal-R^2 tie chose \"{}\" with N = {} (want identity, 1)",
            fit.candidate.id(),
            fit.r2,
            tie.candidate.id(),
            tie.n_score
        ),
    );
}

#[test]
fn invariant_properties_hold() {
    let mut rng = stream(99, Domain::Init, 0, 0);

    // B-spline partition of unity on random interior points.
    let grid = SplineGrid::new(3, (-1.0, 1.0), 5).unwrap();
    let unity = (0..200).all(|_| {
        let x: f64 = rng.random_range(-1.0..1.0);
        (grid.basis_eval(x).iter().sum::<f64>() - 1.0).abs() < 1e-12
    });

    // Pruning monotonicity: everything dead at a low threshold stays dead
    // at a higher one.
    let model = AutoencoderModel::kan_default(4, 2, 3, 5, 5).unwrap();
    let onehots: Vec<Vec<f64>> = (0..4).map(|m| model.one_hot(m).unwrap()).collect();
    let active_after = |eta: f64| -> Vec<bool> {
        let mut m = model.clone();
        prune_stack(m.encoder_mut(), &onehots, eta, PruneMode::Edge).unwrap();
        m.encoder()[0]
            .as_kan()
            .unwrap()
            .edges()
            .iter()
            .map(|e| e.active)
            .collect()
    };
    let norms = kanae::network::kan_edge_norms(
        model.encoder()[0].as_kan().unwrap(),
        &onehots,
    )
    .unwrap();
    let mut sorted = norms.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[4], sorted[11]);
    let monotone = active_after(lo)
        .iter()
        .zip(&active_after(hi))
        .all(|(&at_lo, &at_hi)| at_lo || !at_hi);

    // Noise schedule endpoints.
    let schedule_ok = (0..50).all(|_| {
        let hi: f64 = rng.random_range(0.1..2.0);
        let lo: f64 = rng.random_range(0.01..0.1);
        let n = rng.random_range(1..10_000usize);
        kanae::channel::schedule_noise(0, n, hi, lo) == hi
            && kanae::channel::schedule_noise(n, n, hi, lo) == lo
    });

    // MMSE equalization is the identity for h = 1, sigma^2 = 0.
    let mmse_ok = (0..100).all(|_| {
        let r = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let realization = kanae::channel::ChannelRealization {
            coefficients: vec![Complex64::new(1.0, 0.0)],
            received: vec![r],
        };
        kanae::channel::mmse_equalize(&realization, 0.0)[0] == r
    });

    // MLD correlation rule == minimum Euclidean distance on the
    // equal-energy codebook.
    let code = LinearBlockCode::extended_hamming84();
    let mld_ok = (0..200).all(|_| {
        let rx: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        let by_corr = code.mld_detect(&rx).unwrap();
        let by_dist = (0..code.message_count())
            .min_by(|&a, &b| {
                let d = |idx: usize| -> f64 {
                    code.modulated(idx)
                        .unwrap()
                        .iter()
                        .zip(&rx)
                        .map(|(c, r)| (r - c).norm_sqr())
                        .sum()
                };
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        by_corr == by_dist
    });

    // Save -> load -> save is byte-identical.
    let json = kanae::harness::persist::model_to_json(&model).unwrap();
    let reloaded = kanae::harness::persist::model_from_json(&json).unwrap();
    let roundtrip_ok = json == kanae::harness::persist::model_to_json(&reloaded).unwrap();

    gate(
        "cross-module invariants",
        unity && monotone && schedule_ok && mmse_ok && mld_ok && roundtrip_ok,
        &format!(
            "partition-of-unity {unity}, prune-monotone {monotone}, schedule-endpoints {schedule_ok}, \
             mmse-identity {mmse_ok}, mld-distance {mld_ok}, save/load {roundtrip_ok}"
        ),
    );
}

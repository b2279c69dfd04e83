//! Acceptance suite: one test per release gate, each printing a single
//! `acceptance <name>: PASS/FAIL (...)` line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Every tolerance here is pinned in code. Constants marked "frozen"
//! were measured once with an independent harness (the measured value is
//! quoted alongside) and are not to be loosened to make a failing build
//! green; a regression against them is a real regression.

use auspex::anomaly::{self, ErrorSeries};
use auspex::arimax::{self, ArimaxOrder, OrderBounds};
use auspex::eemd::{emd, eemd, EemdConfig};
use auspex::hybrid::{fit_hybrid, HybridConfig};
use auspex::ingest;
use auspex::spectral::{self, GraphSignal, SpectralFilter, WeightMode};
use auspex::stats;
use auspex::synth;
use auspex::TimeSeries;
use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

/// Max-pointwise reconstruction error allowed for a single-run
/// decomposition (sum of modes + residual vs the input).
const COMPLETENESS_TOL: f64 = 1e-8;
/// Ensemble reconstruction bound `C · μσ/√m`; C frozen from a 20-seed
/// measurement whose worst ratio was 3.72.
const ENSEMBLE_CONSTANT: f64 = 6.0;
/// AR coefficient recovery band for φ = 0.7, n = 2000 (worst measured
/// deviation 0.0382 over 20 seeds).
const PHI_BAND: (f64, f64) = (0.65, 0.75);
/// Exogenous coefficient recovery band for ζ = 2 (worst measured
/// deviation 0.0032 over 20 seeds).
const ZETA_BAND: (f64, f64) = (1.99, 2.01);
/// Exact-permutation vs t-approximation p-value agreement for n ≤ 10.
/// Frozen from measurement: the worst observed gap was 0.0253 at n = 6
/// — that is the t-approximation's real small-sample error, so the gate
/// sits above it.
const PERMUTATION_TOL: f64 = 0.04;
/// Planted-anomaly matching gate: mean fraction of flagged-variation
/// days confirmed by significant model errors (measured mean 0.990,
/// minimum 0.600 over 40 city-instances).
const MATCH_FRACTION_GATE: f64 = 0.6;

fn conclude(name: &str, ok: bool, budget: Duration, elapsed: Duration, detail: &str) {
    let within = elapsed <= budget;
    let verdict = if ok && within { "PASS" } else { "FAIL" };
    println!("acceptance {name}: {verdict} ({detail}; {elapsed:.2?} of {budget:?} budget)");
    assert!(ok, "{name}: {detail}");
    assert!(within, "{name}: exceeded {budget:?} budget ({elapsed:.2?})");
}

fn ts(values: Vec<f64>) -> TimeSeries {
    TimeSeries::new("w", NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), values).unwrap()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

fn ar1_series(n: usize, phi: f64, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burn = 200;
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n + burn {
        prev = phi * prev + sigma * gauss(&mut rng);
        if t >= burn {
            out.push(prev);
        }
    }
    out
}

fn population_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

#[test]
fn criterion_1_completeness() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let len = 50 + rng.gen_range(0..451);
        let x: Vec<f64> = (0..len)
            .map(|t| {
                (t as f64 * 0.3).sin() * rng.gen_range(0.5..2.0) + 0.05 * t as f64 + gauss(&mut rng)
            })
            .collect();
        let dec = emd(&x, 5, 1).unwrap();
        for t in 0..len {
            let sum: f64 = dec.residual[t] + dec.imfs.iter().map(|imf| imf[t]).sum::<f64>();
            worst = worst.max((sum - x[t]).abs());
        }
    }
    conclude(
        "completeness",
        worst <= COMPLETENESS_TOL,
        Duration::from_secs(5),
        t0.elapsed(),
        &format!("max |modes + residual − x| = {worst:.3e} over 100 signals, gate {COMPLETENESS_TOL:.0e}"),
    );
}

#[test]
fn criterion_2_ensemble_reconstruction() {
    let t0 = Instant::now();
    let mut worst_ratio: f64 = 0.0;
    for s in 0..20u64 {
        let inst = synth::multi_scale_instance(3000 + s, 200);
        let x = inst.cases;
        let sigma = population_std(x.values());
        let cfg = EemdConfig {
            ensemble_size: 125,
            noise_ratio: 0.01,
            levels: 5,
            sift_iterations: 1,
            seed: 7000 + s,
        };
        let dec = eemd(&x, &cfg).unwrap();
        let err = dec
            .reconstruct()
            .iter()
            .zip(x.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        worst_ratio = worst_ratio.max(err / (0.01 * sigma / 125f64.sqrt()));
    }
    conclude(
        "ensemble-reconstruction",
        worst_ratio <= ENSEMBLE_CONSTANT,
        Duration::from_secs(60),
        t0.elapsed(),
        &format!("max err / (μσ/√m) = {worst_ratio:.3} over 20 seeds, gate {ENSEMBLE_CONSTANT}"),
    );
}

#[test]
fn criterion_3_coefficient_recovery() {
    let t0 = Instant::now();
    let mut worst_phi = f64::NEG_INFINITY;
    let mut best_phi = f64::INFINITY;
    for s in 0..20u64 {
        let w = ar1_series(2000, 0.7, 1.0, 4000 + s);
        let model = arimax::fit(&ts(w), &[], ArimaxOrder::new(1, 0, 0)).unwrap();
        worst_phi = worst_phi.max(model.phi()[0]);
        best_phi = best_phi.min(model.phi()[0]);
    }
    let mut worst_zeta = f64::NEG_INFINITY;
    let mut best_zeta = f64::INFINITY;
    for s in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + s);
        let n = 2000;
        let x: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
        let mut y = vec![0.0; n];
        for t in 0..n {
            let prev = if t > 0 { y[t - 1] } else { 0.0 };
            y[t] = 0.5 * prev + 2.0 * x[t] + 0.1 * gauss(&mut rng);
        }
        let model = arimax::fit(&ts(y), &[&ts(x)], ArimaxOrder::new(1, 0, 0)).unwrap();
        worst_zeta = worst_zeta.max(model.zeta()[0]);
        best_zeta = best_zeta.min(model.zeta()[0]);
    }
    let phi_ok = best_phi >= PHI_BAND.0 && worst_phi <= PHI_BAND.1;
    let zeta_ok = best_zeta >= ZETA_BAND.0 && worst_zeta <= ZETA_BAND.1;
    conclude(
        "coefficient-recovery",
        phi_ok && zeta_ok,
        Duration::from_secs(30),
        t0.elapsed(),
        &format!(
            "φ̂ ∈ [{best_phi:.4}, {worst_phi:.4}] vs {PHI_BAND:?}, ζ̂ ∈ [{best_zeta:.4}, {worst_zeta:.4}] vs {ZETA_BAND:?}, 20 reps each"
        ),
    );
}

#[test]
fn criterion_4_order_selection() {
    let t0 = Instant::now();
    let mut white_exact = 0;
    let mut white_d0 = 0;
    for s in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + s);
        let w: Vec<f64> = (0..400).map(|_| gauss(&mut rng)).collect();
        let sel =
            arimax::select_order(&ts(w), &[], OrderBounds { max_p: 2, max_d: 1, max_q: 2 })
                .unwrap();
        let order = sel.model.order();
        if order.d == 0 {
            white_d0 += 1;
        }
        if order == ArimaxOrder::new(0, 0, 0) {
            white_exact += 1;
        }
    }
    let mut trend_d1 = 0;
    for s in 0..10u64 {
        let noise = ar1_series(150, 0.6, 1.0, 6100 + s);
        let y: Vec<f64> = noise.iter().enumerate().map(|(t, n)| 0.5 * t as f64 + n).collect();
        let sel =
            arimax::select_order(&ts(y), &[], OrderBounds { max_p: 3, max_d: 1, max_q: 3 })
                .unwrap();
        if sel.model.order().d >= 1 {
            trend_d1 += 1;
        }
    }
    // Frozen from measurement: white noise at n = 400 always selects
    // d = 0 but information-criterion noise admits small spurious AR/MA
    // terms in a minority of seeds (6/10 exact at calibration); the
    // trend + AR(1) mix selected d ≥ 1 in 10/10.
    let ok = white_d0 == 10 && white_exact >= 5 && trend_d1 >= 8;
    conclude(
        "order-selection",
        ok,
        Duration::from_secs(60),
        t0.elapsed(),
        &format!(
            "white noise: d=0 in {white_d0}/10, exact (0,0,0) in {white_exact}/10 (gates 10, ≥5); trend: d≥1 in {trend_d1}/10 (gate ≥8)"
        ),
    );
}

#[test]
fn criterion_5_spectral_identities() {
    let t0 = Instant::now();
    let mut worst_row: f64 = 0.0;
    let mut worst_lambda: f64 = f64::INFINITY;
    let mut worst_parseval: f64 = 0.0;
    let mut worst_round: f64 = 0.0;
    let mut worst_idem: f64 = 0.0;
    for g in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(8000 + g);
        let n = rng.gen_range(2..=30usize);
        let cities: Vec<(String, f64, f64)> = (0..n)
            .map(|i| {
                (format!("g{g}n{i}"), rng.gen_range(-30.0..0.0), rng.gen_range(-70.0..-35.0))
            })
            .collect();
        let mode = if g % 2 == 0 { WeightMode::LiteralDistance } else { WeightMode::GaussianKernel };
        let graph = spectral::build_graph(&cities, mode).unwrap();

        let row_sums = graph.laplacian().matvec(&vec![1.0; n]).unwrap();
        worst_row = worst_row.max(row_sums.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        worst_lambda = worst_lambda.min(graph.eigenvalues()[0]);

        let x: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
        let spectrum = spectral::gft(&graph, &GraphSignal::new(x.clone()).unwrap()).unwrap();
        let energy_x: f64 = x.iter().map(|v| v * v).sum();
        let energy_s: f64 = spectrum.values().iter().map(|v| v * v).sum();
        worst_parseval = worst_parseval.max((energy_x - energy_s).abs());

        let back = spectral::igft(&graph, &spectrum).unwrap();
        for (a, b) in back.values().iter().zip(&x) {
            worst_round = worst_round.max((a - b).abs());
        }

        let lowpass = SpectralFilter::lowpass(0.5).unwrap();
        let once =
            spectral::apply_filter(&graph, &GraphSignal::new(x).unwrap(), &lowpass).unwrap();
        let twice = spectral::apply_filter(&graph, &once, &lowpass).unwrap();
        for (a, b) in twice.values().iter().zip(once.values()) {
            worst_idem = worst_idem.max((a - b).abs());
        }
    }
    let ok = worst_row <= 1e-9
        && worst_lambda >= -1e-9
        && worst_parseval <= 1e-9
        && worst_round <= 1e-8
        && worst_idem <= 1e-9;
    conclude(
        "spectral-identities",
        ok,
        Duration::from_secs(10),
        t0.elapsed(),
        &format!(
            "50 graphs ≤ 30 nodes: row-sum {worst_row:.2e} (≤1e-9), λ_min {worst_lambda:.2e} (≥−1e-9), energy gap {worst_parseval:.2e} (≤1e-9), round-trip {worst_round:.2e} (≤1e-8), idempotence {worst_idem:.2e} (≤1e-9)"
        ),
    );
}

#[test]
fn criterion_6_correlation_oracles() {
    let t0 = Instant::now();

    // On tie-free data the implemented mid-rank form must reduce to the
    // classic 1 − 6ΣD²/(n³ − n) expression.
    let mut worst_classic: f64 = 0.0;
    for s in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + s);
        let n = rng.gen_range(5..=50usize);
        let x: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
        let rank = |v: &[f64]| -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            let mut r = vec![0.0; v.len()];
            for (pos, &i) in idx.iter().enumerate() {
                r[i] = (pos + 1) as f64;
            }
            r
        };
        let (rx, ry) = (rank(&x), rank(&y));
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
        let classic = 1.0 - 6.0 * d2 / ((n * n * n - n) as f64);
        let rho = stats::spearman(&x, &y).unwrap().rho;
        worst_classic = worst_classic.max((rho - classic).abs());
    }

    // Exact-permutation oracle for small samples: enumerate all n!
    // orderings of y and count |ρ| at least as extreme as observed.
    let mut worst_perm: f64 = 0.0;
    for (seed, n) in [(1u64, 6usize), (2, 7), (3, 8), (4, 9), (5, 10)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.7 * v + 0.5 * gauss(&mut rng)).collect();
        let obs = stats::spearman(&x, &y).unwrap();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut count = 0usize;
        let mut total = 0usize;
        permute(&mut idx, 0, &mut |perm| {
            let yp: Vec<f64> = perm.iter().map(|&j| y[j]).collect();
            if stats::spearman(&x, &yp).unwrap().rho.abs() >= obs.rho.abs() - 1e-12 {
                count += 1;
            }
            total += 1;
        });
        let p_exact = count as f64 / total as f64;
        worst_perm = worst_perm.max((p_exact - obs.p_value).abs());
    }

    // Hand-checkable cases.
    let rho_agree = stats::spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap().rho;
    let rho_reverse = stats::spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().rho;
    let rho_hand = stats::spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0])
        .unwrap()
        .rho;
    let m = stats::metrics(&[2.0, 0.0], &[0.0, 2.0]).unwrap();
    let m_exact = stats::metrics(&[1.5, 2.5], &[1.5, 2.5]).unwrap();
    let hand_ok = rho_agree == 1.0
        && rho_reverse == -1.0
        && (rho_hand - 0.8).abs() <= 1e-12
        && (m.me, m.rmse, m.mae) == (0.0, 2.0, 2.0)
        && (m_exact.me, m_exact.rmse, m_exact.mae) == (0.0, 0.0, 0.0);

    let ok = worst_classic <= 1e-12 && worst_perm <= PERMUTATION_TOL && hand_ok;
    conclude(
        "correlation-oracles",
        ok,
        Duration::from_secs(30),
        t0.elapsed(),
        &format!(
            "classic-form gap {worst_classic:.2e} (≤1e-12), permutation-vs-t gap {worst_perm:.4} (gate {PERMUTATION_TOL}), hand cases {}",
            if hand_ok { "exact" } else { "MISMATCH" }
        ),
    );
}

#[test]
fn criterion_7_hybrid_improvement() {
    let t0 = Instant::now();
    let bounds = OrderBounds { max_p: 2, max_d: 1, max_q: 2 };
    let mut plain = Vec::new();
    let mut hybrid = Vec::new();
    let mut wins = 0;
    for i in 0..30u64 {
        let inst = synth::multi_scale_instance(1000 + i, 160);
        let exog_refs: Vec<&TimeSeries> = inst.exog.iter().collect();
        let (cases, lagged) = ingest::apply_lag(&inst.cases, &exog_refs, inst.lag_days).unwrap();
        let lagged_refs: Vec<&TimeSeries> = lagged.iter().collect();

        let sel = arimax::select_order(&cases, &lagged_refs, bounds).unwrap();
        let fitted = arimax::fitted_values(&sel.model, &cases, &lagged_refs).unwrap();
        let rmse_plain = stats::metrics(fitted.values(), cases.values()).unwrap().rmse;

        let cfg = HybridConfig {
            eemd: EemdConfig {
                ensemble_size: 125,
                noise_ratio: 0.01,
                levels: 5,
                sift_iterations: 1,
                seed: 9000 + i,
            },
            bounds,
            per_level_orders: None,
        };
        let model = fit_hybrid(&cases, &lagged_refs, &cfg).unwrap();
        let rmse_hybrid = model.evaluate(&cases).unwrap().rmse;

        if rmse_hybrid < rmse_plain {
            wins += 1;
        }
        plain.push(rmse_plain);
        hybrid.push(rmse_hybrid);
    }
    let median_plain = median(plain);
    let median_hybrid = median(hybrid);
    // Gate frozen from measurement: 30/30 wins, medians 2.256 vs 1.705.
    let ok = wins * 10 >= 30 * 7 && median_hybrid < median_plain;
    conclude(
        "hybrid-improvement",
        ok,
        Duration::from_secs(600),
        t0.elapsed(),
        &format!(
            "level-wise model beat the single model on {wins}/30 instances (gate ≥21), median RMSE {median_hybrid:.3} vs {median_plain:.3}"
        ),
    );
}

#[test]
fn criterion_8_anomaly_pipeline() {
    let t0 = Instant::now();
    let bounds = OrderBounds { max_p: 2, max_d: 1, max_q: 2 };
    let hybrid_cfg = |seed: u64| HybridConfig {
        eemd: EemdConfig {
            ensemble_size: 30,
            noise_ratio: 0.01,
            levels: 4,
            sift_iterations: 1,
            seed,
        },
        bounds,
        per_level_orders: None,
    };

    let mut fractions = Vec::new();
    let mut improved = 0;
    let n_instances = 10u64;
    for i in 0..n_instances {
        let planted = synth::planted_anomaly_panel(500 + i, 4, 80, 2);
        let graph =
            spectral::graph_from_panel(&planted.panel, WeightMode::GaussianKernel).unwrap();
        let filter = SpectralFilter::accentuate(1.0).unwrap();
        let mut reports = anomaly::detect_anomalies(&planted.panel, &graph, &filter).unwrap();

        let mut rmse_raw = Vec::new();
        for (c, city) in planted.panel.cities().iter().enumerate() {
            // Error days come from the single-model fit: its pointwise
            // errors spike exactly where the data does, whereas the
            // level-wise model absorbs isolated spikes in-sample.
            let sel = arimax::select_order(city.cases(), &[], bounds).unwrap();
            let fitted = arimax::fitted_values(&sel.model, city.cases(), &[]).unwrap();
            let errors = anomaly::model_errors(city.cases(), &fitted).unwrap();
            let es = ErrorSeries::from_errors(city.city_id(), errors).unwrap();
            let report =
                reports.iter_mut().find(|r| r.city_id() == city.city_id()).unwrap();
            fractions.push(anomaly::attach_match_fraction(report, &es).unwrap());

            let model =
                fit_hybrid(city.cases(), &[], &hybrid_cfg(20_000 + 100 * i + c as u64)).unwrap();
            rmse_raw.push(model.evaluate(city.cases()).unwrap().rmse);
        }

        let (norm_panel, _clamped) = anomaly::normalize_cases(&planted.panel, &graph, 0.5).unwrap();
        for (c, city) in norm_panel.cities().iter().enumerate() {
            let model =
                fit_hybrid(city.cases(), &[], &hybrid_cfg(30_000 + 100 * i + c as u64)).unwrap();
            if model.evaluate(city.cases()).unwrap().rmse < rmse_raw[c] {
                improved += 1;
            }
        }
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let total = n_instances as usize * 4;
    // Measured: mean fraction 0.990, normalization improved 39/40.
    let ok = mean >= MATCH_FRACTION_GATE && improved * 10 >= total * 7;
    conclude(
        "anomaly-pipeline",
        ok,
        Duration::from_secs(600),
        t0.elapsed(),
        &format!(
            "mean match fraction {mean:.3} over {total} city-instances (gate ≥{MATCH_FRACTION_GATE}), normalization improved re-prediction on {improved}/{total} (gate ≥70%)"
        ),
    );
}

#[test]
fn criterion_9_cli_determinism() {
    let t0 = Instant::now();
    let dir = tempfile::TempDir::new().unwrap();
    let planted = synth::planted_anomaly_panel(77, 3, 60, 1);
    let manifest = synth::write_fixture(dir.path(), &planted.panel, 3).unwrap();
    let manifest = manifest.to_str().unwrap();
    let small = [
        "--seed", "3", "--ensembles", "16", "--imfs", "3",
        "--max-p", "1", "--max-d", "1", "--max-q", "1",
    ];

    let run = |args: &[&str], out: &Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_auspex"))
            .args(args)
            .args(["--manifest", manifest, "--out", out.to_str().unwrap()])
            .args(small)
            .status()
            .expect("binary runs");
        assert!(status.success(), "{args:?} failed");
    };
    let twice = |label: &str, args: &[&str]| {
        let a = dir.path().join(format!("{label}_a"));
        let b = dir.path().join(format!("{label}_b"));
        run(args, &a);
        run(args, &b);
        assert_dirs_equal(&a, &b, label);
    };

    twice("correlate", &["correlate"]);
    twice("predict", &["predict", "--method", "eemd-arimax"]);
    twice("normalize", &["normalize", "--cutoff", "0.5"]);
    twice("decompose", &["decompose", "c02"]);

    // Detection consumes the prediction artifacts of an earlier run.
    let preds = dir.path().join("preds");
    run(&["predict", "--method", "arimax"], &preds);
    let preds = preds.to_str().unwrap().to_string();
    twice("detect", &["detect", "--predictions", &preds]);

    conclude(
        "cli-determinism",
        true,
        Duration::from_secs(120),
        t0.elapsed(),
        "all five commands byte-identical across repeated equal-seed runs",
    );
}

/// Asserts two flat output directories hold identical file sets with
/// identical bytes.
fn assert_dirs_equal(a: &Path, b: &Path, label: &str) {
    let list = |d: &Path| -> Vec<PathBuf> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
    };
    let (fa, fb) = (list(a), list(b));
    let names = |files: &[PathBuf]| -> Vec<String> {
        files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect()
    };
    assert_eq!(names(&fa), names(&fb), "{label}: file sets differ");
    for (pa, pb) in fa.iter().zip(&fb) {
        assert_eq!(
            std::fs::read(pa).unwrap(),
            std::fs::read(pb).unwrap(),
            "{label}: {} differs between runs",
            pa.file_name().unwrap().to_string_lossy()
        );
    }
}

fn permute(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, visit);
        idx.swap(k, i);
    }
}

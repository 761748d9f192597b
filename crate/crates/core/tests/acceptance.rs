//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured margins (run with `--nocapture` to see them). The
//! expensive shared state (dataset, probe, pretrained original model) is
//! built once per process.

mod common;

use common::check_gradients;
use i2iu::harness::{
    complement_mask, cross_validate, kl_check_suite, lemma1_suite, run_table1_experiment,
    sweep_alpha, theorem1_trials, ComparisonRow, ExperimentConfig, Lab,
};
use i2iu::metrics::{
    clip_analog, frechet_distance, inception_score_from_posteriors, GaussianMoments,
};
use i2iu::models::{probe_accuracy, ModelConfig, TrainingConfig};
use i2iu::numerics::{Rng, Tensor};
use i2iu::theory::verify_theorem1;
use i2iu::transforms::{apply_mask_rows, make_mask};
use i2iu::unlearning::{run_unlearn, Method, UnlearnConfig};
use std::sync::OnceLock;
use std::time::Instant;

fn suite_start() -> Instant {
    static START: OnceLock<Instant> = OnceLock::new();
    *START.get_or_init(Instant::now)
}

fn lab() -> &'static Lab {
    static LAB: OnceLock<Lab> = OnceLock::new();
    suite_start();
    LAB.get_or_init(|| {
        Lab::build(&ExperimentConfig::default(), None).expect("default lab builds")
    })
}

fn table1() -> &'static Vec<ComparisonRow> {
    static ROWS: OnceLock<Vec<ComparisonRow>> = OnceLock::new();
    ROWS.get_or_init(|| run_table1_experiment(lab()).expect("comparison runs"))
}

fn row<'a>(rows: &'a [ComparisonRow], method: &str) -> &'a ComparisonRow {
    rows.iter().find(|r| r.method == method).expect("row present")
}

#[test]
fn criterion_01_theorem_bound_trials() {
    let start = Instant::now();
    let lab = lab();
    let trials = theorem1_trials(lab, 100, &[8, 16, 32], (0.01, 0.5), 1e-9).unwrap();
    let violations = trials.iter().filter(|t| !t.pass).count();
    let worst = trials
        .iter()
        .map(|t| t.margin_retain.min(t.margin_forget))
        .fold(f64::MAX, f64::min);

    // exact tightness at the original encoder
    let patch = lab.config.dataset.patch_size;
    let grid = (8, 8);
    let mask = make_mask(&lab.config.eval_mask, grid).unwrap();
    let flat = lab
        .splits
        .heldout(&lab.dataset, i2iu::datasets::Split::Retain)
        .patch_flatten(patch)
        .unwrap();
    let retain = apply_mask_rows(&flat, &mask, patch * patch).unwrap();
    let mut rng = Rng::new(17);
    let noise =
        apply_mask_rows(&rng.standard_normal(retain.shape().to_vec()), &mask, patch * patch)
            .unwrap();
    let report = verify_theorem1(
        &lab.original_encoder,
        &lab.original_encoder,
        &retain,
        &retain,
        &noise,
        1e-9,
    )
    .unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    assert_eq!(violations, 0, "bound violated in {} trials", violations);
    assert!(
        report.retain.margin.abs() < 1e-9,
        "tightness at the original encoder: margin {}",
        report.retain.margin
    );
    assert!(elapsed < 30.0, "criterion 1 took {:.1}s", elapsed);
    println!(
        "criterion 01 PASS: 100 bound trials, 0 violations (worst margin {:.2e}), tightness {:.2e}, {:.1}s",
        worst, report.retain.margin.abs(), elapsed
    );
}

#[test]
fn criterion_02_kl_oracles() {
    let start = Instant::now();
    let report = kl_check_suite(2024, 50, 20).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        report.max_gaussian_quadrature_gap < 1e-4,
        "closed form vs quadrature gap {:.2e}",
        report.max_gaussian_quadrature_gap
    );
    assert!(report.discrete_hand_cases_pass, "discrete hand cases failed");
    assert!(report.infinite_all_diverge, "a constructed distribution had finite KL");
    assert!(elapsed < 10.0, "criterion 2 took {:.1}s", elapsed);
    println!(
        "criterion 02 PASS: 50 gaussian pairs (gap {:.2e}), hand cases exact, 20 infinite constructions, {:.1}s",
        report.max_gaussian_quadrature_gap, elapsed
    );
}

#[test]
fn criterion_03_lemma1_family() {
    let start = Instant::now();
    let reports = lemma1_suite(31, 20).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let failures: Vec<f64> = reports
        .iter()
        .filter(|r| !r.gaussian_attains_max)
        .map(|r| r.margin)
        .collect();
    let min_margin = reports.iter().map(|r| r.margin).fold(f64::MAX, f64::min);
    assert!(failures.is_empty(), "gaussian lost on margins {:?}", failures);
    assert!(elapsed < 30.0, "criterion 3 took {:.1}s", elapsed);
    println!(
        "criterion 03 PASS: gaussian attains family max on 20 mixtures (min margin {:.4}), {:.1}s",
        min_margin, elapsed
    );
}

#[test]
fn criterion_04_gradient_integrity() {
    // 20 random instances per operator against central differences
    let mut rng = Rng::new(404);
    for i in 0..20 {
        let a = rng.standard_normal(vec![3, 4]);
        let b = rng.standard_normal(vec![4, 5]);
        check_gradients(&[a.clone(), b], &[0, 1], |t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            t.mean(y).unwrap()
        });

        let c = rng.standard_normal(vec![3, 4]);
        check_gradients(&[a.clone(), c.clone()], &[0, 1], |t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            t.mean(y).unwrap()
        });
        check_gradients(&[a.clone(), c.clone()], &[0, 1], |t, v| t.mse(v[0], v[1]).unwrap());

        let x = rng.standard_normal(vec![3, 4]).map(|v| v + 0.4 * v.signum());
        check_gradients(&[x.clone()], &[0], |t, v| {
            let y = t.relu(v[0]).unwrap();
            t.mean(y).unwrap()
        });
        check_gradients(&[x.clone(), c.clone()], &[0], |t, v| {
            let y = t.l2_normalize(v[0]).unwrap();
            t.mse(y, v[1]).unwrap()
        });
        let far = x.map(|v| v + 2.0);
        check_gradients(&[x.clone(), far], &[0, 1], |t, v| {
            t.l2_distance(v[0], v[1]).unwrap()
        });

        let logits = rng.standard_normal(vec![4, 3]);
        let labels =
            Tensor::new(vec![4, 1], (0..4).map(|_| (rng.next_u64() % 3) as f64).collect())
                .unwrap();
        check_gradients(&[logits, labels], &[0], |t, v| {
            t.softmax_xent(v[0], v[1]).unwrap()
        });

        check_gradients(&[x.clone()], &[0], |t, v| t.mean(v[0]).unwrap());
        check_gradients(&[x], &[0], |t, v| {
            let y = t.scale(v[0], 0.3 + i as f64 * 0.1).unwrap();
            t.mean(y).unwrap()
        });
    }
    println!("criterion 04 PASS: all 9 operators match central differences on 20 instances each");
}

#[test]
fn criterion_05_metric_oracles() {
    let mut rng = Rng::new(505);
    // frechet(N(0,I), N(mu,I)) = |mu|^2 exactly
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = 1 + (rng.next_u64() % 16) as usize;
        let mu: Vec<f64> = (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let want: f64 = mu.iter().map(|v| v * v).sum();
        let mut eye = Tensor::zeros(vec![d, d]);
        for i in 0..d {
            eye.set2(i, i, 1.0);
        }
        let a = GaussianMoments { mean: vec![0.0; d], cov: eye.clone(), count: 100 };
        let b = GaussianMoments { mean: mu, cov: eye, count: 100 };
        let got = frechet_distance(&a, &b).unwrap();
        worst = worst.max((got - want).abs());
    }
    assert!(worst < 1e-8, "mean-shift oracle error {:.2e}", worst);

    // inception-score analog: uniform rows -> 1, one-hot coverage -> C
    let uniform = Tensor::new(vec![6, 4], vec![0.25; 24]).unwrap();
    let at_one = inception_score_from_posteriors(&uniform).unwrap();
    assert!((at_one - 1.0).abs() < 1e-9);
    let mut onehot = Tensor::zeros(vec![4, 4]);
    for i in 0..4 {
        onehot.set2(i, i, 1.0);
    }
    let at_c = inception_score_from_posteriors(&onehot).unwrap();
    assert!((at_c - 4.0).abs() < 1e-9);

    // clip-analog self similarity
    let lab = lab();
    let retain = lab.splits.heldout(&lab.dataset, i2iu::datasets::Split::Retain);
    let self_sim =
        clip_analog(&lab.probe, &retain, &retain, lab.config.dataset.patch_size).unwrap();
    assert!((self_sim - 1.0).abs() < 1e-9, "self similarity {}", self_sim);

    println!(
        "criterion 05 PASS: frechet mean-shift {:.2e}, IS endpoints exact, self-similarity 1",
        worst
    );
}

#[test]
fn criterion_06_unlearning_trend() {
    let rows = table1();
    let original = row(rows, "original");
    let ours = row(rows, "ours");
    let forget_ratio = ours.report.forget.fid_analog / original.report.forget.fid_analog;
    let retain_rel = (ours.report.retain.fid_analog - original.report.retain.fid_analog).abs()
        / original.report.retain.fid_analog;
    assert!(
        forget_ratio >= 3.0,
        "forget FID ratio {:.2} below 3 (original {:.1}, ours {:.1})",
        forget_ratio,
        original.report.forget.fid_analog,
        ours.report.forget.fid_analog
    );
    assert!(retain_rel <= 0.25, "retain FID drifted {:.1}%", retain_rel * 100.0);
    println!(
        "criterion 06 PASS: forget FID {:.1} -> {:.1} ({:.1}x), retain {:.1} -> {:.1} ({:+.1}%)",
        original.report.forget.fid_analog,
        ours.report.forget.fid_analog,
        forget_ratio,
        original.report.retain.fid_analog,
        ours.report.retain.fid_analog,
        retain_rel * 100.0
    );
}

#[test]
fn criterion_07_alpha_sweep_trend() {
    let rows = sweep_alpha(lab(), &[0.01, 0.1, 0.25, 1.0]).unwrap();
    let fid_f = |a: f64| {
        rows.iter()
            .find(|r| r.alpha == a)
            .map(|r| r.report.forget.fid_analog)
            .expect("alpha row")
    };
    let sep = fid_f(0.25) / fid_f(0.01);
    let retains: Vec<f64> = rows.iter().map(|r| r.report.retain.fid_analog).collect();
    let drift = (retains.iter().cloned().fold(f64::MIN, f64::max)
        - retains.iter().cloned().fold(f64::MAX, f64::min))
        / retains.iter().cloned().fold(f64::MAX, f64::min);
    assert!(sep >= 1.5, "forget FID at 0.25 only {:.2}x its 0.01 value", sep);
    assert!(drift <= 0.30, "retain FID drift {:.1}% across alphas", drift * 100.0);
    println!(
        "criterion 07 PASS: forget FID(0.25)/(0.01) = {:.2}, retain drift {:.1}%",
        sep,
        drift * 100.0
    );
}

#[test]
fn criterion_08_proxy_retain_trend() {
    let rows = table1();
    let original = row(rows, "original");
    let ours = row(rows, "ours");
    let proxy = row(rows, "ours_proxy");
    let full_increase = ours.report.forget.fid_analog - original.report.forget.fid_analog;
    let proxy_increase = proxy.report.forget.fid_analog - original.report.forget.fid_analog;
    let fraction = proxy_increase / full_increase;
    let retain_rel = (proxy.report.retain.fid_analog - original.report.retain.fid_analog).abs()
        / original.report.retain.fid_analog;
    assert!(
        fraction >= 0.5,
        "proxy run achieved only {:.0}% of the real-retain forget increase",
        fraction * 100.0
    );
    assert!(retain_rel <= 0.35, "proxy retain FID drifted {:.1}%", retain_rel * 100.0);
    println!(
        "criterion 08 PASS: proxy forget increase {:.0}% of real, retain {:+.1}%",
        fraction * 100.0,
        retain_rel * 100.0
    );
}

#[test]
fn criterion_09_cross_validation_trend() {
    let lab = lab();
    let config = UnlearnConfig {
        seed: lab.config.run_seed("unlearn-ours"),
        ..lab.config.unlearn.clone()
    };
    let unlearned = run_unlearn(
        Method::Ours,
        &lab.original_encoder,
        &lab.original_decoder,
        &lab.dataset,
        &lab.splits,
        &lab.config.eval_mask,
        &config,
    )
    .unwrap();
    let center = lab.config.eval_mask.clone();
    let outer = complement_mask(&center).unwrap();
    let rows =
        cross_validate(lab, &unlearned.encoder, &unlearned.decoder, &center, &outer).unwrap();
    let fid = |model: &str, split: &str| {
        rows.iter()
            .find(|r| r.source_model == model && r.split == split)
            .map(|r| r.fid_analog)
            .expect("crossval row")
    };
    let forget_ratio = fid("unlearned", "forget") / fid("original", "forget");
    let retain_rel =
        (fid("unlearned", "retain") - fid("original", "retain")).abs() / fid("original", "retain");
    assert!(
        forget_ratio >= 2.0,
        "second-pass forget ratio {:.2} below 2 (original {:.1}, unlearned {:.1})",
        forget_ratio,
        fid("original", "forget"),
        fid("unlearned", "forget")
    );
    assert!(
        retain_rel <= 0.20,
        "second-pass retain values differ by {:.1}%",
        retain_rel * 100.0
    );
    println!(
        "criterion 09 PASS: second-pass forget {:.1} vs {:.1} ({:.2}x), retain within {:.1}%",
        fid("original", "forget"),
        fid("unlearned", "forget"),
        forget_ratio,
        retain_rel * 100.0
    );
}

#[test]
fn criterion_10_structural_invariants() {
    let lab = lab();
    let mask = lab.config.eval_mask.clone();

    // encoder-only methods keep the decoder byte-identical
    let config = UnlearnConfig {
        epochs: 2,
        seed: 10,
        ..lab.config.unlearn.clone()
    };
    for method in [Method::Ours, Method::RandomEncoder] {
        let r = run_unlearn(
            method,
            &lab.original_encoder,
            &lab.original_decoder,
            &lab.dataset,
            &lab.splits,
            &mask,
            &config,
        )
        .unwrap();
        let before: Vec<u8> = lab
            .original_decoder
            .named()
            .iter()
            .flat_map(|(_, t)| t.data().iter().flat_map(|v| v.to_le_bytes()))
            .collect();
        let after: Vec<u8> = r
            .decoder
            .named()
            .iter()
            .flat_map(|(_, t)| t.data().iter().flat_map(|v| v.to_le_bytes()))
            .collect();
        assert_eq!(before, after, "{:?} modified decoder bytes", method);
    }

    // zero-epoch unlearning is a bit-exact no-op
    let noop = run_unlearn(
        Method::Ours,
        &lab.original_encoder,
        &lab.original_decoder,
        &lab.dataset,
        &lab.splits,
        &mask,
        &UnlearnConfig { epochs: 0, ..lab.config.unlearn.clone() },
    )
    .unwrap();
    assert_eq!(noop.encoder, lab.original_encoder);
    assert_eq!(noop.decoder, lab.original_decoder);

    // full-suite determinism: the entire sweep pipeline, run twice from
    // scratch at a reduced scale, emits byte-identical report bundles
    let mini = mini_config();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_mini_sweep(&mini, dir_a.path());
    run_mini_sweep(&mini, dir_b.path());
    for name in ["ledger.json", "table1.csv", "alpha_sweep.csv", "crossval.csv"] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{} differs between repeated sweeps", name);
    }
    println!(
        "criterion 10 PASS: decoder bytes frozen, zero-epoch no-op exact, repeated sweep bundles byte-identical"
    );
}

fn mini_config() -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.dataset.num_classes = 6;
    config.dataset.samples_per_class = 16;
    config.split = i2iu::datasets::SplitSpec {
        retain_classes: vec![0, 3],
        forget_classes: vec![1, 4],
        proxy_classes: vec![2, 5],
        heldout_indices: (12..16).collect(),
    };
    config.model = ModelConfig { hidden: 24, ..Default::default() };
    config.pretrain = TrainingConfig { epochs: 3, ..Default::default() };
    config.probe_train = TrainingConfig { epochs: 3, ..Default::default() };
    config.probe.num_classes = 6;
    config.unlearn.epochs = 2;
    config.sweep.alphas = vec![0.05, 0.25];
    config.sweep.retain_counts = vec![1, 12];
    config.sweep.mask_ratios = vec![0.25];
    config
}

fn run_mini_sweep(config: &ExperimentConfig, dir: &std::path::Path) {
    use i2iu::harness::{emit_report, RunLedger};
    let lab = Lab::build(config, None).unwrap();
    let mut ledger = RunLedger::new(&lab.config_hash);
    ledger.comparison = run_table1_experiment(&lab).unwrap();
    ledger.alpha_sweep = sweep_alpha(&lab, &config.sweep.alphas).unwrap();
    let unlearned = run_unlearn(
        Method::Ours,
        &lab.original_encoder,
        &lab.original_decoder,
        &lab.dataset,
        &lab.splits,
        &config.eval_mask,
        &UnlearnConfig {
            seed: config.run_seed("unlearn-ours"),
            ..config.unlearn.clone()
        },
    )
    .unwrap();
    let center = config.eval_mask.clone();
    let outer = complement_mask(&center).unwrap();
    ledger.crossval =
        cross_validate(&lab, &unlearned.encoder, &unlearned.decoder, &center, &outer).unwrap();
    ledger.record("mini", vec![]);
    emit_report(&ledger, dir).unwrap();
}

#[test]
fn criterion_11_total_runtime() {
    // alphabetical order places this after the other criteria under
    // --test-threads=1, so the elapsed time covers the whole suite
    lab();
    table1();
    let elapsed = suite_start().elapsed().as_secs_f64();
    assert!(elapsed < 900.0, "suite has been running {:.0}s", elapsed);
    println!("criterion 11 PASS: acceptance suite at {:.0}s (< 900s budget)", elapsed);
}

#[test]
fn supporting_probe_and_pretrain_gates() {
    // posts behind the trend criteria: the probe separates the classes
    // and the original model reconstructs below the variance bound
    let lab = lab();
    let patch = lab.config.dataset.patch_size;
    let heldout = lab.splits.all_heldout(&lab.dataset);
    let acc = probe_accuracy(&lab.probe, &heldout, patch).unwrap();
    assert!(acc >= 0.90, "probe heldout accuracy {:.3}", acc);

    let grid = (8, 8);
    let mask = make_mask(&lab.config.eval_mask, grid).unwrap();
    let flat = heldout.patch_flatten(patch).unwrap();
    let masked = apply_mask_rows(&flat, &mask, patch * patch).unwrap();
    let recon = lab
        .original_decoder
        .decode_clamped(&lab.original_encoder.encode(&masked).unwrap())
        .unwrap();
    let mse: f64 = recon
        .data()
        .iter()
        .zip(flat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / flat.len() as f64;
    let variance = heldout.mean_pixel_variance();
    assert!(
        mse < 0.5 * variance,
        "heldout reconstruction MSE {:.4} vs variance bound {:.4}",
        mse,
        0.5 * variance
    );
    println!(
        "supporting gates PASS: probe accuracy {:.3}, heldout MSE {:.4} < {:.4} (half pixel variance)",
        acc,
        mse,
        0.5 * variance
    );
}

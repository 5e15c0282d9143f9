//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed. Built with `harness = false` so the lines show
//! up in plain `cargo test` output.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use scorecusum::bounds::{delay_upper_bound, false_alarm_lower_bound, heuristic_mu, BoundInputs, DEFAULT_HEURISTIC_FACTOR};
use scorecusum::detect::{detector_trace, measure_delays, measure_false_alarms, run_detector, truncate, DetectorConfig, TruncationSpec};
use scorecusum::mocap::{parse_amc, to_amc_string, AmcErrorKind};
use scorecusum::rng::{derive_seed, SimRng};
use scorecusum::score::{
    estimate_drift, estimate_fisher_divergence, finite_difference_divergence, pairs_from_path, score_differences, Estimate,
    FixedGaussianField, ScoreField, TransitionPair,
};
use scorecusum::scorenet::{as_score_field, evaluate_accuracy, init_params, train, MlpArchitecture, MlpParameters, ScoreNet, TrainConfig};
use scorecusum::simulate::{closed_form_score, simulate_path, stationary_pairs, ChangePoint, GaussianKernelSpec, TrajectoryConfig};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Trained {
    pre: ScoreNet,
    post: ScoreNet,
}

fn kernels() -> (GaussianKernelSpec, GaussianKernelSpec) {
    (GaussianKernelSpec::default_pre(), GaussianKernelSpec::default_post())
}

fn rel_dev(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs()
}

// 1. Score-learning accuracy. Also produces the networks reused by 5 and 7.
fn score_learning(trained: &mut Option<Trained>) -> Outcome {
    let (pre, post) = kernels();
    let arch = MlpArchitecture::synthetic(pre.dim);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut nets = Vec::new();
    let start = Instant::now();
    for (k, (name, spec, target)) in [("pre", pre, 223.0), ("post", post, 80.2)].into_iter().enumerate() {
        let k = k as u64;
        let data = stationary_pairs(&spec, 50_000, derive_seed(SEED, 10 + k)).unwrap();
        let eval = stationary_pairs(&spec, 10_000, derive_seed(SEED, 20 + k)).unwrap();
        let config = TrainConfig { seed: derive_seed(SEED, 30 + k), ..TrainConfig::default() };
        let (params, _) = train(&arch, &data, &config).unwrap();
        let net = as_score_field(params);
        let report = evaluate_accuracy(&net, &closed_form_score(&spec), &eval).unwrap();
        let model_scale = spec.dim as f64 / (spec.sigma * spec.sigma);
        let ok_rel = report.rel_error <= 0.10;
        let ok_var = rel_dev(report.var_scale, target) <= 0.15;
        pass &= ok_rel && ok_var;
        parts.push(format!(
            "{name}: rel_error={:.4} (<=0.10 {}), var_scale={:.1} vs {target} (±15% {}; d/σ²={model_scale:.1})",
            report.rel_error,
            if ok_rel { "ok" } else { "FAILED" },
            report.var_scale,
            if ok_var { "ok" } else { "FAILED" },
        ));
        nets.push(net);
    }
    let elapsed = start.elapsed();
    pass &= elapsed <= Duration::from_secs(15 * 60);
    let post_net = nets.pop().unwrap();
    let pre_net = nets.pop().unwrap();
    *trained = Some(Trained { pre: pre_net, post: post_net });
    outcome(pass, format!("{}; {:.0}s", parts.join("; "), elapsed.as_secs_f64()))
}

// 2. The surrogate objective at the true score is −d/(2σ²).
fn surrogate_constant() -> Outcome {
    let (pre, _) = kernels();
    let pairs = stationary_pairs(&pre, 100_000, derive_seed(SEED, 40)).unwrap();
    let terms = closed_form_score(&pre).hyvarinen_scores(&pairs).unwrap();
    let est = Estimate::from_samples(&terms).unwrap();
    let target = -(pre.dim as f64) / (2.0 * pre.sigma * pre.sigma);
    let gap = (est.mean - target).abs();
    outcome(
        gap <= 2.0 * est.std_err,
        format!("mean={:.4} target={target:.4} se={:.4} gap/se={:.2}", est.mean, est.std_err, gap / est.std_err),
    )
}

fn random_pairs(rng: &mut SimRng, d: usize, n: usize) -> Vec<TransitionPair> {
    (0..n)
        .map(|_| {
            let mut prev = vec![0.0; d];
            let mut next = vec![0.0; d];
            rng.fill_normal(&mut prev);
            rng.fill_normal(&mut next);
            TransitionPair::from_slices(&prev, &next).unwrap()
        })
        .collect()
}

fn perturbed(params: &MlpParameters, layer: usize, weight: bool, index: usize, h: f64) -> MlpParameters {
    let mut layers = params.layers().to_vec();
    let l = &mut layers[layer];
    if weight {
        let cols = l.weight.ncols();
        l.weight[[index / cols, index % cols]] += h;
    } else {
        l.bias[index] += h;
    }
    MlpParameters::from_layers(params.arch().clone(), layers).unwrap()
}

// 3. Exact gradients and divergences against central differences.
fn gradient_exactness() -> Outcome {
    // Relative error uses max(|exact|, |fd|, FLOOR) so coordinates that are
    // zero up to roundoff do not divide by nothing.
    const FLOOR: f64 = 1e-3;
    let mut rng = SimRng::new(derive_seed(SEED, 50));
    let mut worst_grad = 0.0_f64;
    let mut worst_div = 0.0_f64;
    let mut coords = 0usize;
    for net_idx in 0..50u64 {
        let d = 1 + (rng.next_u64() % 3) as usize;
        let depth = 1 + (rng.next_u64() % 2) as usize;
        let widths: Vec<usize> = (0..depth).map(|_| 1 + (rng.next_u64() % 8) as usize).collect();
        let batch = 1 + (rng.next_u64() % 8) as usize;
        let arch = MlpArchitecture::new(d, widths).unwrap();
        let params = init_params(&arch, derive_seed(SEED, 1000 + net_idx)).unwrap();
        let pairs = random_pairs(&mut rng, d, batch);
        let (_, grad) = params.loss_gradient(&pairs).unwrap();

        let h = 1e-5;
        for (li, layer) in grad.layers.iter().enumerate() {
            let entries = layer
                .weight
                .iter()
                .enumerate()
                .map(|(i, g)| (true, i, *g))
                .chain(layer.bias.iter().enumerate().map(|(i, g)| (false, i, *g)));
            for (is_weight, i, exact) in entries {
                let up = perturbed(&params, li, is_weight, i, h).surrogate_loss(&pairs).unwrap();
                let down = perturbed(&params, li, is_weight, i, -h).surrogate_loss(&pairs).unwrap();
                let fd = (up - down) / (2.0 * h);
                let err = (exact - fd).abs() / exact.abs().max(fd.abs()).max(FLOOR);
                worst_grad = worst_grad.max(err);
                coords += 1;
            }
        }

        let field = as_score_field(params);
        for pair in &pairs {
            let exact = field.divergence(pair.next(), pair.prev());
            let fd = finite_difference_divergence(&field, pair.next(), pair.prev(), 1e-4);
            let err = (exact - fd).abs() / exact.abs().max(fd.abs()).max(FLOOR);
            worst_div = worst_div.max(err);
        }
    }
    outcome(
        worst_grad <= 1e-4 && worst_div <= 1e-5,
        format!("{coords} gradient coordinates, worst rel err {worst_grad:.2e}; worst divergence rel err {worst_div:.2e}"),
    )
}

// 4. The recursion agrees with the max over start points at every step.
fn recursion_equivalence() -> Outcome {
    let mut rng = SimRng::new(derive_seed(SEED, 60));
    let truncations = [TruncationSpec::None, TruncationSpec::Level(0.5), TruncationSpec::Level(5.0)];
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let len = 1 + (rng.next_u64() % 200) as usize;
        let scale = [0.3, 3.0, 30.0][(rng.next_u64() % 3) as usize];
        let incs: Vec<f64> = (0..len).map(|_| scale * rng.standard_normal() + (rng.uniform() - 0.5)).collect();
        for &t in &truncations {
            let trace = detector_trace(&incs, t).unwrap();
            let clipped: Vec<f64> = incs.iter().map(|&s| truncate(t, s)).collect();
            for (n, row) in trace.iter().enumerate() {
                let mut suffix = 0.0;
                let mut brute = f64::NEG_INFINITY;
                for k in (0..=n).rev() {
                    suffix += clipped[k];
                    brute = brute.max(suffix);
                }
                worst = worst.max((row.cusum_stat - brute).abs());
            }
        }
    }
    outcome(worst <= 1e-9, format!("worst absolute gap {worst:.2e}"))
}

fn drift_pair<P: ScoreField, Q: ScoreField>(p: &P, q: &Q, pre_pairs: &[TransitionPair], post_pairs: &[TransitionPair]) -> (Estimate, Estimate) {
    (estimate_drift(p, q, pre_pairs).unwrap(), estimate_drift(p, q, post_pairs).unwrap())
}

// 5. Drift is negative before the change and positive after it.
fn drift_signs(trained: Option<&Trained>) -> Outcome {
    let (pre, post) = kernels();
    let pre_pairs = stationary_pairs(&pre, 50_000, derive_seed(SEED, 70)).unwrap();
    let post_pairs = stationary_pairs(&post, 50_000, derive_seed(SEED, 71)).unwrap();
    let check = |(a, b): (Estimate, Estimate)| a.mean < 0.0 && -a.mean > 3.0 * a.std_err && b.mean > 0.0 && b.mean > 3.0 * b.std_err;
    let fmt = |(a, b): &(Estimate, Estimate)| format!("pre {:.2}±{:.2}, post {:.2}±{:.2}", a.mean, a.std_err, b.mean, b.std_err);

    let closed = drift_pair(&closed_form_score(&pre), &closed_form_score(&post), &pre_pairs, &post_pairs);
    let mut pass = check(closed);
    let mut detail = format!("closed form: {}", fmt(&closed));
    match trained {
        Some(t) => {
            let learned = drift_pair(&t.pre, &t.post, &pre_pairs, &post_pairs);
            pass &= check(learned);
            detail.push_str(&format!("; trained: {}", fmt(&learned)));
        }
        None => {
            pass = false;
            detail.push_str("; trained networks unavailable");
        }
    }
    outcome(pass, detail)
}

// 6. One-dimensional Gaussians with known Fisher divergence.
fn fisher_oracle() -> Outcome {
    let p = FixedGaussianField::new(vec![0.0], 1.0).unwrap();
    let q = FixedGaussianField::new(vec![2.0], 1.0).unwrap();
    let mut rng = SimRng::new(derive_seed(SEED, 80));
    let samples: Vec<TransitionPair> = (0..100_000)
        .map(|_| TransitionPair::from_slices(&[0.0], &[rng.standard_normal()]).unwrap())
        .collect();
    let fisher = estimate_fisher_divergence(&p, &q, &samples).unwrap();
    let drift = estimate_drift(&p, &q, &samples).unwrap();
    outcome(
        (fisher.mean - 2.0).abs() <= 0.05 && (drift.mean + 2.0).abs() <= 0.05,
        format!("fisher={:.4} drift={:.4}", fisher.mean, drift.mean),
    )
}

// 7. Learned scores detect the synthetic change without a false alarm.
fn end_to_end(trained: Option<&Trained>) -> Outcome {
    let Some(t) = trained else {
        return outcome(false, "trained networks unavailable".into());
    };
    let (pre, post) = kernels();
    let truncation = TruncationSpec::Level(600.0);
    let calibration = stationary_pairs(&pre, 10_000, derive_seed(SEED, 90)).unwrap();
    let cal_incs = score_differences(&t.pre, &t.post, &calibration).unwrap();
    let peak = detector_trace(&cal_incs, truncation)
        .unwrap()
        .iter()
        .map(|r| r.cusum_stat)
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = 1.5 * peak.max(1.0);
    let config = DetectorConfig::new(threshold, truncation).unwrap();
    let cal_alarms = measure_false_alarms(&cal_incs, &config).unwrap().count;

    let nu = 120;
    let path = simulate_path(&TrajectoryConfig {
        pre,
        post: Some(post),
        change_point: ChangePoint::At(nu),
        length: 520,
        seed: derive_seed(SEED, 91),
        burn_in: 1000,
    })
    .unwrap();
    let incs = score_differences(&t.pre, &t.post, &pairs_from_path(&path)).unwrap();
    // Pair n (1-based) ends at state n, so the first post-change pair is n = ν.
    let alarm = run_detector(&incs, &config).unwrap();
    let (pass, detail) = match alarm {
        Some(n) if n >= nu => (cal_alarms == 0 && n - nu < 200, format!("alarm at n={n}, delay={}", n - nu)),
        Some(n) => (false, format!("false alarm at n={n} before ν={nu}")),
        None => (false, "no alarm".into()),
    };
    outcome(
        pass,
        format!("b={threshold:.1} (1.5 × calibration peak {peak:.1}, {cal_alarms} calibration alarms); {detail}"),
    )
}

// 8. Bound calculators against closed-form values.
fn bound_calculators() -> Outcome {
    let fa = false_alarm_lower_bound(&BoundInputs { delta: 1.0, mu: 2.0, b: 4.0, i: 1.0, m: None }).unwrap();
    let db = delay_upper_bound(&BoundInputs { delta: 1.0, mu: 10.0, b: 100.0, i: 5.0, m: None }).unwrap();
    outcome(
        (fa - 6.96649).abs() <= 1e-4 && db.n0 == 22,
        format!("lower bound {fa:.6}, n0={}", db.n0),
    )
}

struct Streams {
    pre: Vec<f64>,
    post: Vec<f64>,
}

fn closed_form_streams() -> Streams {
    let (pre, post) = kernels();
    let (p, q) = (closed_form_score(&pre), closed_form_score(&post));
    let pre_pairs = stationary_pairs(&pre, 100_000, derive_seed(SEED, 100)).unwrap();
    let post_pairs = stationary_pairs(&post, 10_000, derive_seed(SEED, 101)).unwrap();
    Streams {
        pre: score_differences(&p, &q, &pre_pairs).unwrap(),
        post: score_differences(&p, &q, &post_pairs).unwrap(),
    }
}

const LEVEL: f64 = 600.0;
const GRID: [f64; 5] = [1500.0, 2000.0, 3000.0, 4000.0, 5000.0];

// 9. Empirical run lengths respect the false-alarm and delay bounds.
fn bound_validity(streams: &Streams) -> Outcome {
    let start = Instant::now();
    let spec = TruncationSpec::Level(LEVEL);
    let mu = heuristic_mu(LEVEL, DEFAULT_HEURISTIC_FACTOR).unwrap();
    let mean_clipped = |s: &[f64]| s.iter().map(|&v| truncate(spec, v)).sum::<f64>() / s.len() as f64;
    let delta = -mean_clipped(&streams.pre);
    let drift = mean_clipped(&streams.post);
    let mut pass = delta > 0.0 && drift > 0.0;
    let mut rows = Vec::new();
    for (k, &b) in GRID.iter().enumerate() {
        let config = DetectorConfig::new(b, spec).unwrap();
        let inputs = BoundInputs { delta, mu, b, i: drift, m: Some(LEVEL) };
        let bound = false_alarm_lower_bound(&inputs).unwrap();
        let fa = measure_false_alarms(&streams.pre, &config).unwrap().censored_mean();
        let delay = measure_delays(&streams.post, &config).unwrap().mean;
        let upper = delay_upper_bound(&inputs).unwrap().asymptotic_bound;
        pass &= fa >= bound;
        if k >= GRID.len() - 2 {
            pass &= delay <= upper;
        }
        rows.push(format!("b={b}: FA {fa:.0}≥{bound:.3}, delay {delay:.1}≤{upper}"));
    }
    pass &= start.elapsed() <= Duration::from_secs(600);
    outcome(pass, format!("δ={delta:.2} I={drift:.2} μ={mu}; {}", rows.join("; ")))
}

// 10. Truncation never shortens run lengths on the same streams.
fn truncation_comparison(streams: &Streams) -> Outcome {
    let mut pass = true;
    let mut rows = Vec::new();
    for &b in &GRID {
        let cut = DetectorConfig::new(b, TruncationSpec::Level(LEVEL)).unwrap();
        let raw = DetectorConfig::new(b, TruncationSpec::None).unwrap();
        let delay_cut = measure_delays(&streams.post, &cut).unwrap().mean;
        let delay_raw = measure_delays(&streams.post, &raw).unwrap().mean;
        let fa_cut = measure_false_alarms(&streams.pre, &cut).unwrap().censored_mean();
        let fa_raw = measure_false_alarms(&streams.pre, &raw).unwrap().censored_mean();
        pass &= delay_cut >= delay_raw && fa_cut >= fa_raw;
        rows.push(format!("b={b}: delay {delay_cut:.2}/{delay_raw:.2}, FA {fa_cut:.0}/{fa_raw:.0}"));
    }
    outcome(pass, format!("truncated/untruncated {}", rows.join("; ")))
}

fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

// 11. AMC fixtures: dimensions, error kinds and lossless round trip.
fn amc_parsing() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, frames, dim) in [
        ("minimal.amc", 2, 9),
        ("walk.amc", 24, 9),
        ("jump.amc", 16, 9),
        ("upper_body.amc", 8, 6),
        ("header_only.amc", 0, 0),
    ] {
        let clip = parse_amc(&fixture(name)).unwrap();
        let again = parse_amc(&to_amc_string(&clip)).unwrap();
        let ok = clip.len() == frames && (clip.is_empty() || clip.dim() == dim) && again == clip;
        pass &= ok;
        parts.push(format!("{name} {}×{}", clip.len(), clip.dim()));
    }
    let kinds: Vec<AmcErrorKind> = ["frame_gap.amc", "bone_mismatch.amc", "non_numeric.amc"]
        .iter()
        .map(|n| parse_amc(&fixture(n)).expect_err(n).kind())
        .collect();
    pass &= kinds == [AmcErrorKind::FrameGap, AmcErrorKind::BoneMismatch, AmcErrorKind::NonNumeric];
    outcome(pass, format!("{}; malformed → {kinds:?}", parts.join(", ")))
}

fn run(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        outcome(false, format!("panicked: {msg}"))
    });
    println!(
        "criterion {id:>2} {} {name}: {} [{:.1}s]",
        if result.pass { "PASS" } else { "FAIL" },
        result.detail,
        start.elapsed().as_secs_f64()
    );
    result.pass
}

fn main() {
    let mut trained = None;
    let mut results = Vec::new();
    results.push(run(1, "score-learning accuracy", || score_learning(&mut trained)));
    results.push(run(2, "surrogate constant", surrogate_constant));
    results.push(run(3, "gradient exactness", gradient_exactness));
    results.push(run(4, "recursion equivalence", recursion_equivalence));
    results.push(run(5, "drift signs", || drift_signs(trained.as_ref())));
    results.push(run(6, "fisher divergence oracle", fisher_oracle));
    results.push(run(7, "end-to-end detection", || end_to_end(trained.as_ref())));
    results.push(run(8, "bound calculators", bound_calculators));
    let streams = closed_form_streams();
    results.push(run(9, "bound validity", || bound_validity(&streams)));
    results.push(run(10, "truncation comparison", || truncation_comparison(&streams)));
    results.push(run(11, "amc parsing", amc_parsing));
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

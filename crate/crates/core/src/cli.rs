//! Command-line front end. Every command resolves an [`ExperimentConfig`],
//! writes its outputs plus `resolved_config.json` and `manifest.json` into
//! the output directory, and maps failures to exit codes by [`ErrorClass`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{self, BoundInputs};
use crate::config::{ExperimentConfig, Regime, ScoreSource};
use crate::detect::{self, DetectorConfig, TruncationSpec};
use crate::error::{Error, ErrorClass, Result};
use crate::mocap::{self, ScenarioSpec};
use crate::rng::derive_seed;
use crate::score::{pairs_from_path, score_differences, ScoreField, StateVector, TransitionPair};
use crate::scorenet::{self, evaluate_accuracy, ScoreNet};
use crate::simulate::{self, closed_form_score, ChangePoint};
use crate::standardize::Standardization;

#[derive(Debug, Parser)]
#[command(name = "scorecusum", version, about = "Score-based CUSUM change detection for Markov processes")]
pub struct Cli {
    /// JSON experiment configuration; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory with a change point.
    Simulate,
    /// Train a score network on one regime.
    Train(TrainArgs),
    /// Run the detector over one trajectory and write the per-step trace.
    Detect(DetectArgs),
    /// Mean run lengths over a threshold grid, with bound curves.
    Sweep(ScoreArgs),
    /// Evaluate the closed-form bounds.
    Bounds(BoundsArgs),
    /// Build a change-point stream from AMC clips.
    Mocap(MocapArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RegimeArg {
    Pre,
    Post,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Trajectory CSV (as written by `simulate` or `mocap`) instead of simulated pairs.
    #[arg(long, value_name = "CSV")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Pre-change model file; with --post-model, switches scores to trained networks.
    #[arg(long, value_name = "PATH")]
    pub pre_model: Option<PathBuf>,
    /// Post-change model file.
    #[arg(long, value_name = "PATH")]
    pub post_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub models: ScoreArgs,
    /// Trajectory CSV to monitor instead of a simulated one.
    #[arg(long, value_name = "CSV")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Truncation level M, or `none`.
    #[arg(long, value_name = "M|none")]
    pub truncation: Option<String>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Pre-change drift magnitude δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Concentration scale μ; derived from M when absent.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Threshold b.
    #[arg(long)]
    pub b: Option<f64>,
    /// Post-change drift I.
    #[arg(long = "post-drift", value_name = "I")]
    pub post_drift: Option<f64>,
    /// Truncation level M, used as ‖φ‖ when deriving μ.
    #[arg(long = "truncation", value_name = "M")]
    pub truncation: Option<f64>,
    /// Heuristic factor for μ = factor · M.
    #[arg(long)]
    pub factor: Option<f64>,
    /// Doeblin constant l; with --lambda, μ = 2(l+1)M/λ.
    #[arg(long)]
    pub l: Option<u32>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Sample size n for the Hoeffding tail.
    #[arg(long = "hoeffding-n", value_name = "N")]
    pub hoeffding_n: Option<u64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "mu-f")]
    pub mu_f: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MocapArgs {
    /// Pre-change AMC clip.
    #[arg(long, value_name = "AMC")]
    pub pre: Option<PathBuf>,
    /// Post-change AMC clip; omit for a pre-change-only stream.
    #[arg(long, value_name = "AMC")]
    pub post: Option<PathBuf>,
    /// Pre-change vectors kept before the splice (default: all of them).
    #[arg(long)]
    pub splice: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub no_standardize: bool,
}

/// Files written by one command, relative to the output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    fn create(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok((path, BufWriter::new(file)))
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> csv::Result<()>) -> Result<()> {
        let (path, mut w) = self.create(name)?;
        write(&mut w).map_err(|e| Error::csv(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let (path, mut w) = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(&path, e.into()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))
    }

    fn finish(mut self, command: &str, config: &ExperimentConfig, details: Value) -> Result<()> {
        self.json("resolved_config.json", config)?;
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": config.seed,
            "config": "resolved_config.json",
            "outputs": files,
            "details": details,
        });
        self.json("manifest.json", &manifest)
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut config = resolve_config(cli)?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&config),
        Command::Train(args) => {
            if let Some(r) = args.regime {
                config.training.regime = match r {
                    RegimeArg::Pre => Regime::Pre,
                    RegimeArg::Post => Regime::Post,
                };
            }
            if args.data.is_some() {
                config.training.data = args.data.clone();
            }
            cmd_train(&config)
        }
        Command::Detect(args) => {
            apply_models(&mut config, &args.models);
            if args.data.is_some() {
                config.detector.data = args.data.clone();
            }
            if let Some(b) = args.threshold {
                config.detector.threshold = b;
            }
            if let Some(t) = &args.truncation {
                config.detector.truncation = parse_truncation(t)?;
            }
            config.validate()?;
            cmd_detect(&config)
        }
        Command::Sweep(models) => {
            apply_models(&mut config, models);
            cmd_sweep(&config)
        }
        Command::Bounds(args) => cmd_bounds(&config, args, cli.out.is_some()),
        Command::Mocap(args) => {
            let base = config.scenario.clone();
            let pre = args
                .pre
                .clone()
                .or_else(|| base.as_ref().map(|s| s.pre_clip.clone()))
                .ok_or_else(|| Error::Usage("mocap needs --pre or a scenario section".into()))?;
            config.scenario = Some(ScenarioSpec {
                pre_clip: pre,
                post_clip: args.post.clone().or_else(|| base.as_ref().and_then(|s| s.post_clip.clone())),
                splice_index: args.splice.or(base.as_ref().map(|s| s.splice_index)).unwrap_or(0),
                stride: args.stride.or(base.as_ref().map(|s| s.stride)).unwrap_or(1),
                standardize: !args.no_standardize && base.as_ref().is_none_or(|s| s.standardize),
            });
            cmd_mocap(&config)
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ErrorClass::Usage.exit_code() } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

fn apply_models(config: &mut ExperimentConfig, args: &ScoreArgs) {
    if args.pre_model.is_some() || args.post_model.is_some() {
        config.detector.scores = ScoreSource::Models;
        config.detector.pre_model = args.pre_model.clone().or(config.detector.pre_model.take());
        config.detector.post_model = args.post_model.clone().or(config.detector.post_model.take());
    }
}

fn parse_truncation(text: &str) -> Result<TruncationSpec> {
    if text.eq_ignore_ascii_case("none") {
        return Ok(TruncationSpec::None);
    }
    let m: f64 = text
        .parse()
        .map_err(|_| Error::Usage(format!("truncation must be a number or `none`, got {text:?}")))?;
    TruncationSpec::level(m)
}

fn read_trajectory(path: &Path) -> Result<(Vec<StateVector>, Option<ChangePoint>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    simulate::read_trajectory_csv(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Usage(msg) => Error::Usage(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn cmd_simulate(config: &ExperimentConfig) -> Result<()> {
    let traj = config.trajectory_config();
    let path = simulate::simulate_path(&traj)?;
    let mut out = Outputs::new(&config.output.dir)?;
    let dim = traj.pre.dim;
    out.csv("trajectory.csv", |w| {
        simulate::write_trajectory_csv(w, &path, dim, Some(traj.change_point))
    })?;
    let pre_rows = (0..path.len()).filter(|&n| !traj.change_point.is_post(n)).count();
    println!("wrote {} rows ({} pre-change) to {}", path.len(), pre_rows, out.dir.join("trajectory.csv").display());
    out.finish(
        "simulate",
        config,
        json!({ "rows": path.len(), "pre_change_rows": pre_rows, "kernels": config.kernels }),
    )
}

/// Pairs of one regime: simulated, or taken from consecutive rows of a CSV.
fn training_pairs(config: &ExperimentConfig) -> Result<(Vec<TransitionPair>, Option<Vec<TransitionPair>>)> {
    let regime = config.training.regime;
    match &config.training.data {
        Some(path) => {
            let (states, change) = read_trajectory(path)?;
            let split = change.and_then(ChangePoint::index).unwrap_or(states.len()).min(states.len());
            let segment = match regime {
                Regime::Pre => &states[..split],
                Regime::Post => {
                    if split == states.len() {
                        return Err(Error::Usage(format!("{} has no post-change rows", path.display())));
                    }
                    &states[split..]
                }
            };
            let pairs = pairs_from_path(segment);
            if pairs.is_empty() {
                return Err(Error::Usage(format!(
                    "{} has fewer than two {} rows",
                    path.display(),
                    regime.name()
                )));
            }
            Ok((pairs, None))
        }
        None => {
            let spec = config.kernel(regime);
            let train = simulate::stationary_pairs(spec, config.training.pairs, derive_seed(config.seed, 1))?;
            let eval = simulate::stationary_pairs(spec, config.training.eval_pairs, derive_seed(config.seed, 2))?;
            Ok((train, Some(eval)))
        }
    }
}

fn standardize_pairs(st: &Standardization, pairs: &[TransitionPair]) -> Result<Vec<TransitionPair>> {
    pairs
        .iter()
        .map(|p| TransitionPair::from_slices(&st.apply(p.prev()), &st.apply(p.next())))
        .collect()
}

fn cmd_train(config: &ExperimentConfig) -> Result<()> {
    let regime = config.training.regime.name();
    let (pairs, eval) = training_pairs(config)?;
    if pairs.is_empty() {
        return Err(Error::Usage("no training pairs (training.pairs is 0)".into()));
    }
    let dim = pairs[0].dim();
    let arch = config.architecture(dim)?;
    let standardization = if config.training.standardize {
        let rows: Vec<&[f64]> = pairs.iter().map(TransitionPair::next).collect();
        Some(Standardization::fit(&rows)?)
    } else {
        None
    };
    let fit_pairs = match &standardization {
        Some(st) => standardize_pairs(st, &pairs)?,
        None => pairs,
    };
    let (params, history) = scorenet::train(&arch, &fit_pairs, &config.train_config())?;
    let model = match standardization {
        Some(st) => ScoreNet::with_standardization(params, st)?,
        None => scorenet::as_score_field(params),
    };

    let mut out = Outputs::new(&config.output.dir)?;
    let model_name = format!("model_{regime}.scn");
    let model_path = out.path(&model_name);
    scorenet::save_model(&model_path, &model)?;
    out.csv(&format!("loss_{regime}.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["epoch", "loss", "loss_std"])?;
        for (e, (l, s)) in history.epoch_loss.iter().zip(&history.epoch_loss_std).enumerate() {
            c.write_record([(e + 1).to_string(), l.to_string(), s.to_string()])?;
        }
        c.flush()?;
        Ok(())
    })?;
    println!("final surrogate loss {:?}", history.final_loss());
    let mut details = json!({
        "regime": regime,
        "model": model_name,
        "training_pairs": fit_pairs.len(),
        "final_loss": history.final_loss(),
    });
    if let Some(eval) = eval {
        let oracle = closed_form_score(config.kernel(config.training.regime));
        let report = evaluate_accuracy(&model, &oracle, &eval)?;
        println!(
            "accuracy against the closed-form score: mse={} var_scale={} rel_error={}",
            report.mse, report.var_scale, report.rel_error
        );
        out.json(&format!("accuracy_{regime}.json"), &report)?;
        details["accuracy"] = serde_json::to_value(report).expect("report serializes");
    }
    out.finish("train", config, details)
}

type FieldPair = (Box<dyn ScoreField>, Box<dyn ScoreField>);

fn score_fields(config: &ExperimentConfig) -> Result<FieldPair> {
    match config.detector.scores {
        ScoreSource::ClosedForm => Ok((
            Box::new(closed_form_score(&config.kernels.pre)),
            Box::new(closed_form_score(&config.kernels.post)),
        )),
        ScoreSource::Models => {
            let load = |p: &Option<PathBuf>, which: &str| -> Result<Box<dyn ScoreField>> {
                let path = p
                    .as_ref()
                    .ok_or_else(|| Error::Usage(format!("trained scores need a {which} model path")))?;
                Ok(Box::new(scorenet::load_model(path)?))
            };
            let pre = load(&config.detector.pre_model, "pre-change")?;
            let post = load(&config.detector.post_model, "post-change")?;
            if pre.dim() != post.dim() {
                return Err(Error::DimensionMismatch {
                    context: "pre/post models",
                    expected: pre.dim(),
                    actual: post.dim(),
                });
            }
            Ok((pre, post))
        }
    }
}

#[derive(Debug, Serialize)]
struct DetectSummary {
    threshold: f64,
    truncation: TruncationSpec,
    change_point: ChangePoint,
    /// Alarm times (state indices) under detect-and-reset.
    alarms: Vec<usize>,
    first_alarm: Option<usize>,
    false_alarms_before_change: usize,
    /// First alarm at or after the change point, minus the change point.
    delay: Option<usize>,
}

fn cmd_detect(config: &ExperimentConfig) -> Result<()> {
    let (p, q) = score_fields(config)?;
    let (states, change) = match &config.detector.data {
        Some(path) => read_trajectory(path)?,
        None => (simulate::simulate_path(&config.trajectory_config())?, Some(config.trajectory.change_point)),
    };
    let change = change.unwrap_or(ChangePoint::Never);
    if let Some(first) = states.first() {
        crate::error::check_dim("data vs score fields", p.dim(), first.dim())?;
    }
    let pairs = pairs_from_path(&states);
    let increments = score_differences(&p, &q, &pairs)?;
    let det = DetectorConfig::new(config.detector.threshold, config.detector.truncation)?;
    let trace = detect::detector_trace(&increments, det.truncation)?;

    let report = detect::measure_false_alarms(&increments, &det)?;
    let alarms: Vec<usize> = report
        .intervals
        .iter()
        .scan(0, |t, i| {
            *t += i;
            Some(*t)
        })
        .collect();
    let nu = change.index();
    let summary = DetectSummary {
        threshold: det.threshold,
        truncation: det.truncation,
        change_point: change,
        first_alarm: alarms.first().copied(),
        false_alarms_before_change: alarms.iter().filter(|&&t| nu.is_none_or(|nu| t < nu)).count(),
        delay: nu.and_then(|nu| alarms.iter().find(|&&t| t >= nu).map(|t| t - nu)),
        alarms,
    };

    let mut out = Outputs::new(&config.output.dir)?;
    out.csv("trace.csv", |w| detect::write_trace_csv(w, &trace))?;
    out.json("alarms.json", &summary)?;
    match (summary.first_alarm, summary.delay) {
        (Some(t), Some(d)) if summary.false_alarms_before_change == 0 => {
            println!("alarm at n = {t}, delay {d} after change point {}", nu.unwrap_or(0))
        }
        (Some(t), _) => println!(
            "first alarm at n = {t}; {} alarm(s) before the change point",
            summary.false_alarms_before_change
        ),
        (None, _) => println!("no alarm over {} steps", increments.len()),
    }
    out.finish("detect", config, serde_json::to_value(&summary).expect("summary serializes"))
}

fn estimated_mu(config: &ExperimentConfig, norm_phi: f64) -> Result<(f64, &'static str)> {
    match &config.bounds.doeblin {
        Some(c) => Ok((bounds::concentration_mu(norm_phi, c)?, "doeblin")),
        None => Ok((bounds::heuristic_mu(norm_phi, config.bounds.heuristic_factor)?, "heuristic")),
    }
}

#[derive(Debug, Serialize)]
struct SweepSummaryRow {
    threshold: f64,
    detector: &'static str,
    false_alarm_mean: f64,
    false_alarm_count: usize,
    delay_mean: f64,
    delay_count: usize,
    false_alarm_bound: Option<f64>,
    delay_bound: f64,
}

fn cmd_sweep(config: &ExperimentConfig) -> Result<()> {
    let sweep = &config.sweep;
    let (p, q) = score_fields(config)?;
    let pre_pairs = simulate::stationary_pairs(&config.kernels.pre, sweep.false_alarm_steps, derive_seed(config.seed, 3))?;
    let post_pairs = simulate::stationary_pairs(&config.kernels.post, sweep.delay_steps, derive_seed(config.seed, 4))?;
    let pre_inc = score_differences(&p, &q, &pre_pairs)?;
    let post_inc = score_differences(&p, &q, &post_pairs)?;

    let m = sweep.truncation_level;
    let trunc = TruncationSpec::level(m)?;
    let mean_phi = |v: &[f64]| v.iter().map(|&s| detect::truncate(trunc, s)).sum::<f64>() / v.len().max(1) as f64;
    let delta = -mean_phi(&pre_inc);
    let drift = mean_phi(&post_inc);
    let (mu, mu_source) = estimated_mu(config, m)?;

    let mut out = Outputs::new(&config.output.dir)?;
    let mut variants = vec![trunc];
    if sweep.compare_untruncated {
        variants.push(TruncationSpec::None);
    }
    let mut rows = Vec::new();
    for t in variants {
        let fa = detect::threshold_sweep(&pre_inc, &sweep.thresholds, t)?;
        let dl = detect::threshold_sweep(&post_inc, &sweep.thresholds, t)?;
        out.csv(&format!("sweep_false_alarm_{}.csv", t.label()), |w| detect::write_sweep_csv(w, &fa))?;
        out.csv(&format!("sweep_delay_{}.csv", t.label()), |w| detect::write_sweep_csv(w, &dl))?;
        for (f, d) in fa.iter().zip(&dl) {
            let b = f.threshold;
            let inputs = BoundInputs {
                delta,
                mu,
                b,
                i: drift,
                m: Some(m),
            };
            rows.push(SweepSummaryRow {
                threshold: b,
                detector: t.label(),
                false_alarm_mean: f.report.censored_mean(),
                false_alarm_count: f.report.count,
                delay_mean: d.report.censored_mean(),
                delay_count: d.report.count,
                false_alarm_bound: if delta > 0.0 && b > mu {
                    Some(bounds::false_alarm_lower_bound(&inputs)?)
                } else {
                    None
                },
                delay_bound: if drift > 0.0 {
                    bounds::delay_upper_bound(&inputs)?.asymptotic_bound
                } else {
                    f64::INFINITY
                },
            });
        }
    }
    let fa_curve = if delta > 0.0 {
        bounds::false_alarm_curve(delta, mu, &sweep.thresholds)?
    } else {
        Vec::new()
    };
    out.csv("bound_false_alarm.csv", |w| bounds::write_bound_csv(w, &fa_curve))?;
    let delay_curve: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.detector == "truncated")
        .map(|r| (r.threshold, r.delay_bound))
        .collect();
    out.csv("bound_delay.csv", |w| bounds::write_bound_csv(w, &delay_curve))?;

    println!("delta = {delta}, I = {drift}, mu = {mu} ({mu_source})");
    println!("threshold,detector,false_alarm_mean,count,bound,delay_mean,delay_bound");
    for r in &rows {
        println!(
            "{},{},{},{},{},{},{} (asymptotic)",
            r.threshold,
            r.detector,
            r.false_alarm_mean,
            r.false_alarm_count,
            r.false_alarm_bound.map_or("n/a".to_string(), |v| v.to_string()),
            r.delay_mean,
            r.delay_bound
        );
    }
    out.finish(
        "sweep",
        config,
        json!({
            "delta": delta,
            "I": drift,
            "mu": mu,
            "mu_source": mu_source,
            "drift_source": "estimated from truncated increments",
            "false_alarm_means_censored_when_count_is_zero": true,
            "rows": rows,
        }),
    )
}

fn cmd_bounds(config: &ExperimentConfig, args: &BoundsArgs, write_files: bool) -> Result<()> {
    let m = args.truncation.unwrap_or(config.bounds.truncation_level);
    let (mu, mu_source) = match (args.mu, args.l, args.lambda) {
        (Some(mu), _, _) => (mu, "given"),
        (None, Some(l), Some(lambda)) => (
            bounds::concentration_mu(m, &bounds::DoeblinConstants::new(l, lambda)?)?,
            "doeblin",
        ),
        (None, None, None) => match args.factor {
            Some(f) => (bounds::heuristic_mu(m, f)?, "heuristic"),
            None => estimated_mu(config, m)?,
        },
        _ => return Err(Error::Usage("--l and --lambda must be given together".into())),
    };
    let mut result = json!({ "mu": mu, "mu_source": mu_source, "M": m });
    println!("mu = {mu} ({mu_source})");

    if let (Some(delta), Some(b)) = (args.delta, args.b) {
        let lb = bounds::false_alarm_lower_bound(&BoundInputs {
            delta,
            mu,
            b,
            i: 1.0,
            m: None,
        })?;
        println!("false_alarm_lower_bound = {lb}");
        result["false_alarm_lower_bound"] = json!(lb);
    }
    if let Some(i) = args.post_drift {
        let b = args
            .b
            .ok_or_else(|| Error::Usage("the delay bound needs --b".into()))?;
        let d = bounds::delay_upper_bound(&BoundInputs {
            delta: 1.0,
            mu,
            b,
            i,
            m: None,
        })?;
        println!("n0 = {}", d.n0);
        println!("delay_upper_bound = {} (asymptotic: 1 + n0, o(1) term omitted)", d.asymptotic_bound);
        result["n0"] = json!(d.n0);
        result["delay_upper_bound_asymptotic"] = json!(d.asymptotic_bound);
    }
    match (args.hoeffding_n, args.eps, args.mu_f) {
        (Some(n), Some(eps), Some(mu_f)) => {
            let t = bounds::hoeffding_tail(n, eps, mu_f)?;
            println!("hoeffding_tail = {t}");
            result["hoeffding_tail"] = json!(t);
        }
        (None, None, None) => {}
        _ => return Err(Error::Usage("--hoeffding-n, --eps and --mu-f must be given together".into())),
    }
    if write_files {
        let mut out = Outputs::new(&config.output.dir)?;
        out.json("bounds.json", &result)?;
        out.finish("bounds", config, result)?;
    }
    Ok(())
}

fn cmd_mocap(config: &ExperimentConfig) -> Result<()> {
    let spec = config.scenario.as_ref().expect("scenario resolved by caller");
    let pre = mocap::read_amc_file(&spec.pre_clip)?;
    let post = spec.post_clip.as_deref().map(mocap::read_amc_file).transpose()?;
    let stride = spec.stride.max(1);
    let splice = if spec.splice_index == 0 {
        pre.len().div_ceil(stride)
    } else {
        spec.splice_index
    };
    let scenario = mocap::build_scenario_from_clips(&pre, post.as_ref(), splice, spec.stride, spec.standardize)?;
    let resolved = ExperimentConfig {
        scenario: Some(ScenarioSpec {
            splice_index: splice,
            ..spec.clone()
        }),
        ..config.clone()
    };

    let mut out = Outputs::new(&config.output.dir)?;
    let dim = scenario.dim();
    out.csv("states.csv", |w| {
        simulate::write_trajectory_csv(w, &scenario.states, dim, Some(scenario.change))
    })?;
    let manifest = json!({
        "dim": dim,
        "states": scenario.states.len(),
        "pairs": scenario.pairs.len(),
        "change_point": scenario.change,
        "standardization": scenario.standardization,
        "bone_order": pre.bone_order,
        "channel_counts": pre.channel_counts,
    });
    out.json("scenario.json", &manifest)?;
    println!(
        "{} states of dimension {dim}, {} pairs, change point {}",
        scenario.states.len(),
        scenario.pairs.len(),
        serde_json::to_string(&scenario.change).expect("serializes")
    );
    out.finish("mocap", &resolved, manifest)
}

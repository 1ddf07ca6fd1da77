//! Command-line front end: `synth`, `train`, `backtest` and `gradcheck`.
//!
//! Every tunable lives in a flat `key = value` config. Each run writes the
//! fully resolved config (`config.txt`) next to its outputs, so rerunning
//! with `--config <out>/config.txt` reproduces them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use crate::backtest::{run_backtest_with, select_features, BacktestConfig, Benchmark, Predictor};
use crate::error::{Error, Result};
use crate::marketdata::{
    apply_normalizer, build_features, fit_normalizer, gen_synthetic_panel, load_bars, make_windows,
    BarPanel, DateRange, Span, SynthConfig, WindowMode, DATE_FORMAT,
};
use crate::metrics::{directional_accuracy, WEEKS_PER_YEAR};
use crate::model::{
    evaluate, grad_check, save_checkpoint, train, EpochStats, FaultInjection, Model, ModelSpec,
    TrainConfig,
};
use crate::numerics::{Matrix, Rng};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Spec(_) => EXIT_CONFIG,
        Error::Data(_) | Error::Parse { .. } | Error::EmptyPanel => EXIT_DATA,
        Error::Diverged { .. }
        | Error::GradCheck(_)
        | Error::UndefinedMetric(_)
        | Error::Dimension(_) => EXIT_NUMERIC,
        Error::Io { .. } => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rnnquant",
    version,
    about = "Recurrent-network stock selection and walk-forward backtesting"
)]
pub struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true, hide = true)]
    pub perfect_foresight: bool,
    #[arg(long, global = true, hide = true)]
    pub inject_fault: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic weekly bar panel to `<out>/bars.csv`.
    Synth,
    /// Train one pooled model; writes `checkpoint.txt` and `history.csv`.
    Train,
    /// Walk-forward backtest; writes `equity.csv`, `weights.csv`, `report.json`.
    Backtest,
    /// Compare analytic and finite-difference gradients.
    Gradcheck,
}

/// Resolved run configuration. See [`RunConfig::KEYS`] for the key names.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data: Option<PathBuf>,
    pub synth: SynthConfig,
    pub model: String,
    pub window: usize,
    pub features: Vec<String>,
    pub train: TrainConfig,
    pub val_fraction: f64,
    pub top_k: usize,
    pub cost_bps: f64,
    pub initial_train: Span,
    pub step: Span,
    pub window_mode: WindowMode,
    pub max_train_samples: Option<usize>,
    pub parallel: bool,
    pub predictor: Predictor,
    pub benchmark: Option<PathBuf>,
    pub gradcheck_eps: f64,
    pub gradcheck_tol: f64,
    pub gradcheck_model: Option<String>,
    pub inject_fault: bool,
    pub rf: f64,
    pub periods_per_year: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bt = BacktestConfig::default();
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            data: None,
            synth: SynthConfig::default(),
            model: "paper".into(),
            window: bt.window,
            features: Vec::new(),
            train: TrainConfig::default(),
            val_fraction: 0.2,
            top_k: bt.top_k,
            cost_bps: bt.cost_bps,
            initial_train: bt.initial_train,
            step: bt.step,
            window_mode: bt.window_mode,
            max_train_samples: None,
            parallel: true,
            predictor: Predictor::Model,
            benchmark: None,
            gradcheck_eps: 1e-5,
            gradcheck_tol: 1e-4,
            gradcheck_model: None,
            inject_fault: false,
            rf: 0.0,
            periods_per_year: WEEKS_PER_YEAR,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn opt_text<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "seed",
        "out",
        "data",
        "synth.symbols",
        "synth.weeks",
        "synth.signal",
        "synth.start",
        "synth.vol",
        "synth.drift",
        "model",
        "window",
        "features",
        "train.lr",
        "train.epochs",
        "train.batch_size",
        "train.clip_norm",
        "train.beta1",
        "train.beta2",
        "train.epsilon",
        "train.val_fraction",
        "backtest.top_k",
        "backtest.cost_bps",
        "backtest.initial_train",
        "backtest.step",
        "backtest.mode",
        "backtest.max_train_samples",
        "backtest.parallel",
        "backtest.predictor",
        "benchmark",
        "gradcheck.eps",
        "gradcheck.tol",
        "gradcheck.model",
        "gradcheck.inject_fault",
        "metrics.rf",
        "metrics.periods_per_year",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "data" => self.data = parse_opt(key, v)?,
            "synth.symbols" => self.synth.n_symbols = parse(key, v)?,
            "synth.weeks" => self.synth.n_weeks = parse(key, v)?,
            "synth.signal" => self.synth.signal_strength = parse(key, v)?,
            "synth.start" => {
                self.synth.start = NaiveDate::parse_from_str(v, DATE_FORMAT)
                    .map_err(|_| Error::config(format!("`{key}`: bad date `{v}`")))?
            }
            "synth.vol" => self.synth.weekly_vol = parse(key, v)?,
            "synth.drift" => self.synth.drift = parse(key, v)?,
            "model" => self.model = v.to_string(),
            "window" => self.window = parse(key, v)?,
            "features" => {
                self.features = if v == "all" {
                    Vec::new()
                } else {
                    v.split(',').map(|s| s.trim().to_string()).collect()
                }
            }
            "train.lr" => self.train.learning_rate = parse(key, v)?,
            "train.epochs" => self.train.epochs = parse(key, v)?,
            "train.batch_size" => self.train.batch_size = parse(key, v)?,
            "train.clip_norm" => self.train.clip_norm = parse_opt(key, v)?,
            "train.beta1" => self.train.beta1 = parse(key, v)?,
            "train.beta2" => self.train.beta2 = parse(key, v)?,
            "train.epsilon" => self.train.epsilon = parse(key, v)?,
            "train.val_fraction" => self.val_fraction = parse(key, v)?,
            "backtest.top_k" => self.top_k = parse(key, v)?,
            "backtest.cost_bps" => self.cost_bps = parse(key, v)?,
            "backtest.initial_train" => self.initial_train = v.parse()?,
            "backtest.step" => self.step = v.parse()?,
            "backtest.mode" => self.window_mode = v.parse()?,
            "backtest.max_train_samples" => self.max_train_samples = parse_opt(key, v)?,
            "backtest.parallel" => self.parallel = parse(key, v)?,
            "backtest.predictor" => {
                self.predictor = match v {
                    "model" => Predictor::Model,
                    "perfect-foresight" => Predictor::PerfectForesight,
                    _ => {
                        return Err(Error::config(format!(
                            "`{key}`: expected model or perfect-foresight"
                        )))
                    }
                }
            }
            "benchmark" => self.benchmark = parse_opt(key, v)?,
            "gradcheck.eps" => self.gradcheck_eps = parse(key, v)?,
            "gradcheck.tol" => self.gradcheck_tol = parse(key, v)?,
            "gradcheck.model" => self.gradcheck_model = parse_opt(key, v)?,
            "gradcheck.inject_fault" => self.inject_fault = parse(key, v)?,
            "metrics.rf" => self.rf = parse(key, v)?,
            "metrics.periods_per_year" => self.periods_per_year = parse(key, v)?,
            other => return Err(Error::config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            "data" => opt_text(&self.data.as_ref().map(|p| p.display())),
            "synth.symbols" => self.synth.n_symbols.to_string(),
            "synth.weeks" => self.synth.n_weeks.to_string(),
            "synth.signal" => self.synth.signal_strength.to_string(),
            "synth.start" => self.synth.start.format(DATE_FORMAT).to_string(),
            "synth.vol" => self.synth.weekly_vol.to_string(),
            "synth.drift" => self.synth.drift.to_string(),
            "model" => self.model.clone(),
            "window" => self.window.to_string(),
            "features" if self.features.is_empty() => "all".into(),
            "features" => self.features.join(","),
            "train.lr" => self.train.learning_rate.to_string(),
            "train.epochs" => self.train.epochs.to_string(),
            "train.batch_size" => self.train.batch_size.to_string(),
            "train.clip_norm" => opt_text(&self.train.clip_norm),
            "train.beta1" => self.train.beta1.to_string(),
            "train.beta2" => self.train.beta2.to_string(),
            "train.epsilon" => self.train.epsilon.to_string(),
            "train.val_fraction" => self.val_fraction.to_string(),
            "backtest.top_k" => self.top_k.to_string(),
            "backtest.cost_bps" => self.cost_bps.to_string(),
            "backtest.initial_train" => self.initial_train.to_string(),
            "backtest.step" => self.step.to_string(),
            "backtest.mode" => self.window_mode.to_string(),
            "backtest.max_train_samples" => opt_text(&self.max_train_samples),
            "backtest.parallel" => self.parallel.to_string(),
            "backtest.predictor" => match self.predictor {
                Predictor::Model => "model".into(),
                Predictor::PerfectForesight => "perfect-foresight".into(),
            },
            "benchmark" => opt_text(&self.benchmark.as_ref().map(|p| p.display())),
            "gradcheck.eps" => self.gradcheck_eps.to_string(),
            "gradcheck.tol" => self.gradcheck_tol.to_string(),
            "gradcheck.model" => opt_text(&self.gradcheck_model),
            "gradcheck.inject_fault" => self.inject_fault.to_string(),
            "metrics.rf" => self.rf.to_string(),
            "metrics.periods_per_year" => self.periods_per_year.to_string(),
            other => unreachable!("key list and getter out of sync: {other}"),
        }
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("config line {}: expected `key = value`", i + 1))
            })?;
            self.set(k, v).map_err(|e| {
                Error::config(format!("config line {}: {}", i + 1, strip_prefix(&e)))
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Every key with its resolved value.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# rnnquant resolved configuration\n");
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    pub fn backtest_config(&self) -> BacktestConfig {
        BacktestConfig {
            top_k: self.top_k,
            cost_bps: self.cost_bps,
            initial_train: self.initial_train,
            step: self.step,
            window_mode: self.window_mode,
            model: self.model.clone(),
            window: self.window,
            features: self.features.clone(),
            train: self.train.clone(),
            seed: self.seed,
            max_train_samples: self.max_train_samples,
            parallel: self.parallel,
            rf_per_period: self.rf,
            periods_per_year: self.periods_per_year,
            predictor: self.predictor,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Layers the config file, `--set` overrides and flags, in that order.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply_text(&text)?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.perfect_foresight {
        cfg.predictor = Predictor::PerfectForesight;
    }
    if cli.inject_fault {
        cfg.inject_fault = true;
    }
    Ok(cfg)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_file(&cfg.out.join("config.txt"), cfg.to_text().as_bytes())
}

fn load_panel(cfg: &RunConfig) -> Result<BarPanel> {
    match &cfg.data {
        Some(path) => {
            let panel = load_bars(path)?;
            if panel.is_weekly() {
                Ok(panel)
            } else {
                log::info!("resampling {} to weekly bars", path.display());
                panel.resample_weekly()
            }
        }
        None => gen_synthetic_panel(&cfg.synth_config()),
    }
}

/// Parses arguments, runs, and returns the process exit code. Errors are
/// reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Backtest => cmd_backtest(&cfg),
        Command::Gradcheck => cmd_gradcheck(&cfg),
    }
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let panel = gen_synthetic_panel(&cfg.synth_config())?;
    prepare_out(cfg)?;
    let path = cfg.out.join("bars.csv");
    panel.save(&path)?;
    println!(
        "wrote {}: {} symbols x {} weeks, seed {}",
        path.display(),
        panel.n_symbols(),
        panel.n_dates(),
        cfg.seed
    );
    Ok(())
}

fn history_csv(epochs: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,dir_acc\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for e in epochs {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.epoch,
            e.train_loss,
            opt(e.val_loss),
            opt(e.dir_acc)
        );
    }
    out
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    if !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(Error::config("train.val_fraction must lie in [0, 1)"));
    }
    let panel = load_panel(cfg)?;
    let fp = select_features(build_features(&panel), &cfg.features)?;
    let dates = fp.dates();
    let anchors: Vec<NaiveDate> = (0..dates.len().saturating_sub(1))
        .filter(|&t| (0..fp.symbols().len()).any(|s| fp.is_valid(t, s)))
        .map(|t| dates[t])
        .collect();
    if anchors.len() < 2 {
        return Err(Error::data("not enough labelled dates to train on"));
    }
    let n_val = ((anchors.len() as f64) * cfg.val_fraction).floor() as usize;
    let cutoff = anchors[anchors.len() - 1 - n_val];
    let normalizer = fit_normalizer(
        &fp,
        &DateRange {
            start: dates[0],
            end: cutoff,
        },
    )?;
    let nfp = apply_normalizer(&normalizer, &fp);
    let train_set = make_windows(&nfp, cfg.window, |_, _, label| label <= cutoff)?;
    let val_set = make_windows(&nfp, cfg.window, |_, d, _| d > cutoff)?;
    if train_set.is_empty() {
        return Err(Error::data(format!(
            "window {} leaves no training samples",
            cfg.window
        )));
    }
    let spec = ModelSpec::from_name(&cfg.model, nfp.n_features(), cfg.window)?;
    let mut seeds = Rng::new(cfg.seed);
    let (init_seed, train_seed) = (seeds.next_u64(), seeds.next_u64());
    let mut model = Model::from_seed(&spec, init_seed)?;
    let train_cfg = TrainConfig {
        seed: train_seed,
        ..cfg.train.clone()
    };
    prepare_out(cfg)?;
    let normalizer_json = serde_json::to_string_pretty(&normalizer).expect("normalizer serializes");
    write_file(&cfg.out.join("normalizer.json"), normalizer_json.as_bytes())?;
    let history_path = cfg.out.join("history.csv");
    let val = (!val_set.is_empty()).then_some(&val_set);
    let history = match train(&mut model, &train_set, val, &train_cfg) {
        Ok(h) => h,
        Err(Error::Diverged {
            epoch,
            batch,
            completed,
        }) => {
            write_file(&history_path, history_csv(&completed).as_bytes())?;
            return Err(Error::Diverged {
                epoch,
                batch,
                completed,
            });
        }
        Err(e) => return Err(e),
    };
    write_file(&history_path, history_csv(&history.epochs).as_bytes())?;
    save_checkpoint(&model, &cfg.out.join("checkpoint.txt"))?;

    println!(
        "model {} | {} train / {} validation windows | initial loss {:.6e}",
        spec.layers_string(),
        train_set.len(),
        val_set.len(),
        history.initial_loss
    );
    for e in &history.epochs {
        let v = e.val_loss.map_or("-".into(), |x| format!("{x:.6e}"));
        let d = e.dir_acc.map_or("-".into(), |x| format!("{x:.4}"));
        println!(
            "epoch {:>3}  train {:.6e}  val {v}  dir_acc {d}",
            e.epoch, e.train_loss
        );
    }
    if !val_set.is_empty() {
        let (_, preds) = evaluate(&model, &val_set)?;
        println!(
            "validation directional accuracy {:.4}",
            directional_accuracy(&preds, &val_set.targets)?
        );
    }
    Ok(())
}

pub fn cmd_backtest(cfg: &RunConfig) -> Result<()> {
    let panel = load_panel(cfg)?;
    let benchmark = cfg.benchmark.as_deref().map(Benchmark::load).transpose()?;
    let result = run_backtest_with(&panel, &cfg.backtest_config(), benchmark.as_ref())?;
    prepare_out(cfg)?;
    result.save(&cfg.out)?;
    let report = serde_json::to_string_pretty(&result.report).expect("report serializes");
    write_file(&cfg.out.join("report.json"), (report + "\n").as_bytes())?;
    println!(
        "{} splits, {} test weeks ({} to {})",
        result.splits.len(),
        result.dates.len(),
        result
            .dates
            .first()
            .map_or(String::new(), |d| d.to_string()),
        result
            .period_end
            .last()
            .map_or(String::new(), |d| d.to_string()),
    );
    print!("{}", result.report.table());
    Ok(())
}

fn gradcheck_specs(cfg: &RunConfig) -> Result<Vec<ModelSpec>> {
    const F: usize = 3;
    const L: usize = 4;
    match &cfg.gradcheck_model {
        Some(name) => Ok(vec![ModelSpec::from_name(name, F, L)?]),
        None => Ok(vec![
            ModelSpec::paper_scaled(4, F, L),
            ModelSpec::lstm_gru_scaled(4, 3, F, L),
            ModelSpec::from_name("rnn(4)>dense(2,relu)>dense(1,linear)", F, L)?,
        ]),
    }
}

/// Probe windows drawn per model before accepting one near a relu kink.
const KINK_REDRAWS: usize = 16;

pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<()> {
    let fault = if cfg.inject_fault {
        FaultInjection::FlipSign
    } else {
        FaultInjection::None
    };
    if !(1e-7..=1e-3).contains(&cfg.gradcheck_eps) {
        return Err(Error::config(format!(
            "gradcheck.eps {} outside [1e-7, 1e-3]",
            cfg.gradcheck_eps
        )));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut failed = Vec::new();
    for spec in gradcheck_specs(cfg)? {
        let model = Model::from_seed(&spec, rng.next_u64())?;
        let mut report = None;
        for _ in 0..KINK_REDRAWS {
            let data: Vec<f64> = (0..spec.window * spec.input_features)
                .map(|_| rng.normal())
                .collect();
            let window = Matrix::new(spec.window, spec.input_features, data)?;
            let r = grad_check(&model, &window, rng.normal(), cfg.gradcheck_eps, fault)?;
            let retry = r.near_kink();
            report = Some(r);
            if !retry {
                break;
            }
        }
        let report = report.expect("at least one draw");
        println!(
            "{}  (relu margin {:.1e})",
            spec.layers_string(),
            report.relu_margin
        );
        for l in &report.layers {
            let verdict = if l.max_rel_error < cfg.gradcheck_tol {
                "ok"
            } else {
                "FAIL"
            };
            println!(
                "  layer {} {:<8} params {:>5}  max rel error {:.3e}  {verdict}",
                l.index, l.kind, l.params, l.max_rel_error
            );
        }
        if !report.passes(cfg.gradcheck_tol) {
            failed.push(spec.layers_string());
        }
    }
    if failed.is_empty() {
        println!("all layers below {:e}", cfg.gradcheck_tol);
        Ok(())
    } else {
        Err(Error::GradCheck(format!(
            "{} exceeded tolerance {:e}",
            failed.join(", "),
            cfg.gradcheck_tol
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# comment\nseed = 9\nmodel = gru(8)>dense(1,linear)  # trailing\ntrain.clip_norm = none\n\
             backtest.step = 26w\nfeatures = ret_1w,vol_4w\ndata = bars.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.clip_norm, None);
        assert_eq!(cfg.step, Span::Weeks(26));
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(
            RunConfig::from_text(&RunConfig::default().to_text()).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = RunConfig::default();
        for key in RunConfig::KEYS {
            let mut c = RunConfig::default();
            c.set(key, &cfg.get(key)).unwrap();
            assert_eq!(c, cfg, "{key}");
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = RunConfig::from_text("colour = blue\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("colour") && m.contains("line 1")));
        assert!(RunConfig::from_text("window = many\n").is_err());
        assert!(RunConfig::from_text("just words\n").is_err());
        assert_eq!(exit_code(&err), EXIT_CONFIG);
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "rnnquant", "--seed", "4", "--set", "seed=2", "--set", "window=6", "backtest",
        ])
        .unwrap();
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!((cfg.seed, cfg.window), (4, 6));
        assert_eq!(cli.command, Command::Backtest);
    }
}

//! Experiment commands behind the CLI. Every command takes a [`RunConfig`],
//! writes plain-text reports into `out_dir` and returns a summary. Reports
//! carry the crate version and a digest of the configuration and contain no
//! timings, so a repeated run reproduces them byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::{evaluate_baseline, train_baseline, BaselineConfig};
use crate::codec::{Preprocess, Signal};
use crate::double_slit::{run_double_slit, DoubleSlitConfig, DoubleSlitReport};
use crate::engine::InterferenceModel;
use crate::error::{Error, Result};
use crate::meanfield::{curves_csv, hysteresis_area, hysteresis_curves, linspace_step, transition_check};
use crate::metrics::{arrival_time_table, signal_entropy, similarity_table, Table};
use crate::mnist::{Mnist, RawImage};
use crate::policy::{LearningRates, RoutePolicy};
use crate::trainer::{evaluate, plan, train_example, train_run, FewShotSpec, Schedule};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanfieldConfig {
    pub beta: f64,
    pub coupling: f64,
    /// One curve file per entry.
    pub n_bars: Vec<f64>,
    pub b_min: f64,
    pub b_max: f64,
    pub b_step: f64,
    pub transition_min: f64,
    pub transition_max: f64,
    pub transition_step: f64,
}

impl Default for MeanfieldConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            coupling: 1.0,
            n_bars: vec![0.5, 2.0],
            b_min: -1.0,
            b_max: 1.0,
            b_step: 0.01,
            transition_min: 0.5,
            transition_max: 2.0,
            transition_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Directory with the four MNIST IDX files; `MNIST_DIR` or `data/mnist` when unset.
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub labels: Vec<u8>,
    pub shots: usize,
    pub epochs: usize,
    pub schedules: Vec<Schedule>,
    pub seed: u64,
    /// Runs per schedule, seeded `seed, seed + 1, ...`.
    pub repeats: usize,
    pub baseline: bool,
    pub bp_lr: f64,
    pub rates: LearningRates,
    pub preprocess: Preprocess,
    /// Evaluate on the first `n` filtered test images only.
    pub test_limit: Option<usize>,
    /// Dump energy traces for this many test images per run.
    pub trace_images: usize,
    pub images_per_label: usize,
    /// Trained route table for `tables` and `policy-dump`.
    pub policy: Option<PathBuf>,
    pub double_slit: DoubleSlitConfig,
    pub meanfield: MeanfieldConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            out_dir: PathBuf::from("out"),
            labels: vec![0, 1, 2, 4],
            shots: 5,
            epochs: 1,
            schedules: vec![Schedule::Sequential, Schedule::Mixed],
            seed: 0,
            repeats: 10,
            baseline: true,
            bp_lr: 1e-3,
            rates: LearningRates::default(),
            preprocess: Preprocess::default(),
            test_limit: None,
            trace_images: 0,
            images_per_label: 50,
            policy: None,
            double_slit: DoubleSlitConfig::default(),
            meanfield: MeanfieldConfig::default(),
        }
    }
}

impl RunConfig {
    /// Recursively overlays the keys of `overrides` on this configuration.
    pub fn merged(&self, overrides: &serde_json::Value) -> Result<Self> {
        fn merge(base: &mut serde_json::Value, over: &serde_json::Value) {
            match (base, over) {
                (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
                    for (k, v) in o {
                        merge(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
                    }
                }
                (b, o) => *b = o.clone(),
            }
        }
        let mut value = serde_json::to_value(self)?;
        merge(&mut value, overrides);
        Ok(serde_json::from_value(value)?)
    }

    pub fn with_file(&self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Path {
            path: path.to_path_buf(),
            source,
            hint: "",
        })?;
        self.merged(&serde_json::from_str(&text)?)
    }

    /// SHA-256 of the canonical JSON form with the filesystem locations
    /// blanked, so relocating inputs or outputs keeps the digest.
    pub fn checksum(&self) -> String {
        let mut c = self.clone();
        c.data_dir = None;
        c.out_dir = PathBuf::new();
        c.policy = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn header(&self) -> String {
        format!("# interference {VERSION} config_sha256={}\n", self.checksum())
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.schedules.is_empty() {
            return Err(Error::Config("no schedule selected".into()));
        }
        if self.bp_lr.is_nan() || self.bp_lr <= 0.0 {
            return Err(Error::Config(format!(
                "baseline learning rate {} must be positive",
                self.bp_lr
            )));
        }
        FewShotSpec::new(
            self.labels.clone(),
            self.shots,
            self.epochs,
            Schedule::Sequential,
            self.seed,
        )?;
        Ok(())
    }

    pub fn spec(&self, schedule: Schedule, seed: u64) -> Result<FewShotSpec> {
        FewShotSpec::new(self.labels.clone(), self.shots, self.epochs, schedule, seed)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(Mnist::default_dir)
    }

    pub fn load_mnist(&self) -> Result<Mnist> {
        Mnist::load(self.data_dir())
    }

    /// Test images with a configured label, truncated to `test_limit`.
    pub fn test_split<'a>(&self, mnist: &'a Mnist) -> Vec<&'a RawImage> {
        mnist
            .test
            .iter()
            .filter(|img| self.labels.contains(&img.label))
            .take(self.test_limit.unwrap_or(usize::MAX))
            .collect()
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        fs::write(&path, format!("{}{body}", self.header()))?;
        Ok(path)
    }

    /// Archives the configuration next to the reports.
    fn archive(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        fs::write(
            self.out_dir.join("config.json"),
            serde_json::to_string_pretty(self)? + "\n",
        )?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Maps `f` over `items` on scoped worker threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ours,
    Bp,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ours => "ours",
            Method::Bp => "bp",
        })
    }
}

/// Reference accuracy for the 4-class configurations, if there is one.
pub fn reference_accuracy(method: Method, schedule: Schedule, shots: usize, epochs: usize) -> Option<f64> {
    use Schedule::*;
    let v = match (method, schedule, shots, epochs) {
        (Method::Ours, Sequential, 1, 5) => 0.6663,
        (Method::Ours, Sequential, 5, 1) => 0.8350,
        (Method::Ours, Sequential, 10, 1) => 0.8865,
        (Method::Ours, Sequential, 5, 10) => 0.8699,
        (Method::Ours, Mixed, 5, 1) => 0.8666,
        (Method::Ours, Mixed, 10, 1) => 0.8248,
        (Method::Ours, Mixed, 5, 10) => 0.8381,
        (Method::Bp, Sequential, 1, 5) => 0.3841,
        (Method::Bp, Sequential, 5, 1) => 0.4379,
        (Method::Bp, Sequential, 10, 1) => 0.3504,
        (Method::Bp, Sequential, 5, 10) => 0.7723,
        (Method::Bp, Mixed, 5, 1) => 0.5328,
        (Method::Bp, Mixed, 10, 1) => 0.5386,
        (Method::Bp, Mixed, 5, 10) => 0.7999,
        _ => return None,
    };
    Some(v)
}

/// Seed means within this distance of the reference are annotated PASS.
pub const REFERENCE_BAND: f64 = 0.10;

pub fn band_annotation(mean: f64, reference: Option<f64>) -> &'static str {
    match reference {
        None => "NA",
        Some(r) if (mean - r).abs() <= REFERENCE_BAND => "PASS",
        Some(_) => "WARN",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub schedule: Schedule,
    pub seed: u64,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// Per-class accuracy in label order.
    pub class_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: Method,
    pub schedule: Schedule,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainEvalReport {
    pub runs: Vec<RunResult>,
    pub summaries: Vec<Summary>,
}

impl TrainEvalReport {
    pub fn summary(&self, method: Method, schedule: Schedule) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.schedule == schedule)
    }
}

fn summarize(runs: &[RunResult], method: Method, schedule: Schedule, cfg: &RunConfig) -> Option<Summary> {
    let acc: Vec<f64> = runs
        .iter()
        .filter(|r| r.method == method && r.schedule == schedule)
        .map(|r| r.accuracy)
        .collect();
    if acc.is_empty() {
        return None;
    }
    let n = acc.len() as f64;
    let mean = acc.iter().sum::<f64>() / n;
    let std = (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    Some(Summary {
        method,
        schedule,
        runs: acc.len(),
        mean,
        std,
        min: acc.iter().copied().fold(f64::INFINITY, f64::min),
        max: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        reference: reference_accuracy(method, schedule, cfg.shots, cfg.epochs),
    })
}

/// Trains and scores the route learners for one schedule and seed.
pub fn run_ours(
    cfg: &RunConfig,
    mnist: &Mnist,
    test: &[RawImage],
    schedule: Schedule,
    seed: u64,
) -> Result<(InterferenceModel, RunResult, String)> {
    let spec = cfg.spec(schedule, seed)?;
    let mut model = InterferenceModel::mnist(&cfg.labels, cfg.rates)?;
    let log = train_run(&mut model, &spec, &mnist.train, &cfg.preprocess)?;
    let acc = evaluate(&model, test, &cfg.preprocess);
    let result = RunResult {
        method: Method::Ours,
        schedule,
        seed,
        correct: acc.correct,
        total: acc.total,
        accuracy: acc.value(),
        class_accuracy: (0..cfg.labels.len()).map(|c| acc.class_accuracy(c)).collect(),
    };
    Ok((model, result, log.to_csv()))
}

pub fn run_bp(
    cfg: &RunConfig,
    mnist: &Mnist,
    test: &[RawImage],
    schedule: Schedule,
    seed: u64,
) -> Result<(RunResult, String)> {
    let spec = cfg.spec(schedule, seed)?;
    let (model, log) = train_baseline(&spec, &mnist.train, &cfg.preprocess, BaselineConfig { lr: cfg.bp_lr })?;
    let acc = evaluate_baseline(&model, &cfg.labels, test, &cfg.preprocess);
    let mut csv = String::from("step,label,loss\n");
    for r in &log.rows {
        let _ = writeln!(csv, "{},{},{:.6}", r.step, r.label, r.j_true);
    }
    let result = RunResult {
        method: Method::Bp,
        schedule,
        seed,
        correct: acc.correct,
        total: acc.total,
        accuracy: acc.value(),
        class_accuracy: (0..cfg.labels.len()).map(|c| acc.class_accuracy(c)).collect(),
    };
    Ok((result, csv))
}

/// Rows `image,label,target,t,energy,cumulative,delivered`.
pub fn energy_trace_csv(model: &InterferenceModel, images: &[RawImage], preprocess: &Preprocess) -> String {
    let mut out = String::from("image,label,target,t,energy,cumulative,delivered\n");
    for (i, img) in images.iter().enumerate() {
        let signals = preprocess.signals(img);
        for (y, site) in model.geometry.targets().iter().enumerate() {
            let trace = model.goal(&signals, y);
            for t in 0..trace.instantaneous.len() {
                let _ = writeln!(
                    out,
                    "{i},{},{},{t},{:.9},{:.9},{:.9}",
                    img.label, site.label, trace.instantaneous[t], trace.cumulative[t], trace.delivered[t]
                );
            }
        }
    }
    out
}

pub fn cmd_train_eval(cfg: &RunConfig) -> Result<TrainEvalReport> {
    cfg.validate()?;
    let mnist = cfg.load_mnist()?;
    let test: Vec<RawImage> = cfg.test_split(&mnist).into_iter().cloned().collect();
    cfg.archive()?;

    let jobs: Vec<(Schedule, u64)> = cfg
        .schedules
        .iter()
        .flat_map(|&s| (0..cfg.repeats as u64).map(move |r| (s, cfg.seed + r)))
        .collect();
    let outputs = par_map(&jobs, |&(schedule, seed)| -> Result<Vec<RunResult>> {
        let (model, ours, log) = run_ours(cfg, &mnist, &test, schedule, seed)?;
        cfg.write(&format!("runlog_ours_{schedule}_seed{seed}.csv"), &log)?;
        fs::write(
            cfg.out_dir.join(format!("policy_{schedule}_seed{seed}.txt")),
            model.policy.to_text(),
        )?;
        if cfg.trace_images > 0 {
            let n = cfg.trace_images.min(test.len());
            cfg.write(
                &format!("energy_trace_{schedule}_seed{seed}.csv"),
                &energy_trace_csv(&model, &test[..n], &cfg.preprocess),
            )?;
        }
        let mut results = vec![ours];
        if cfg.baseline {
            let (bp, log) = run_bp(cfg, &mnist, &test, schedule, seed)?;
            cfg.write(&format!("runlog_bp_{schedule}_seed{seed}.csv"), &log)?;
            results.push(bp);
        }
        Ok(results)
    });
    let mut runs = Vec::new();
    for o in outputs {
        runs.extend(o?);
    }

    let mut summaries = Vec::new();
    for method in [Method::Ours, Method::Bp] {
        for &schedule in &cfg.schedules {
            summaries.extend(summarize(&runs, method, schedule, cfg));
        }
    }

    let labels: Vec<String> = cfg.labels.iter().map(|l| format!("acc_{l}")).collect();
    let mut csv = format!(
        "method,schedule,shots,epochs,seed,correct,total,accuracy,{}\n",
        labels.join(",")
    );
    for r in &runs {
        let per: Vec<String> = r.class_accuracy.iter().map(|a| format!("{a:.4}")).collect();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{:.4},{}",
            r.method,
            r.schedule,
            cfg.shots,
            cfg.epochs,
            r.seed,
            r.correct,
            r.total,
            r.accuracy,
            per.join(",")
        );
    }
    cfg.write("accuracy.csv", &csv)?;

    let mut csv = String::from("method,schedule,shots,epochs,runs,mean,std,min,max,reference,band\n");
    for s in &summaries {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{},{}",
            s.method,
            s.schedule,
            cfg.shots,
            cfg.epochs,
            s.runs,
            s.mean,
            s.std,
            s.min,
            s.max,
            s.reference.map_or_else(|| "NA".into(), |r| format!("{r:.4}")),
            band_annotation(s.mean, s.reference)
        );
    }
    cfg.write("summary.csv", &csv)?;
    Ok(TrainEvalReport { runs, summaries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablesReport {
    pub similarity: Table,
    pub arrival: Table,
    /// `(epoch, per-learner mean entropy)`; epoch 0 stands for a loaded table.
    pub entropy: Vec<(usize, Vec<Option<f64>>)>,
}

/// The first `n` test images of each label, encoded, in label order.
pub fn test_inputs(cfg: &RunConfig, test: &[RawImage], n: usize) -> Vec<Vec<Vec<Signal>>> {
    cfg.labels
        .iter()
        .map(|&l| {
            test.iter()
                .filter(|img| img.label == l)
                .take(n)
                .map(|img| cfg.preprocess.signals(img))
                .collect()
        })
        .collect()
}

/// Mean entropy of each learner over the inputs of its own label.
pub fn learner_entropy(model: &InterferenceModel, inputs: &[Vec<Vec<Signal>>]) -> Vec<Option<f64>> {
    (0..model.geometry.num_targets())
        .map(|y| {
            let vals: Vec<f64> = inputs[y]
                .iter()
                .filter_map(|s| {
                    signal_entropy(
                        &model.geometry,
                        &model.policy,
                        s,
                        y,
                        &model.fields[y],
                        model.threshold(),
                    )
                })
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

pub fn load_policy(path: &Path) -> Result<RoutePolicy> {
    let text = fs::read_to_string(path).map_err(|source| Error::Path {
        path: path.to_path_buf(),
        source,
        hint: " (train one with `train-eval`, which writes policy_<schedule>_seed<n>.txt)",
    })?;
    RoutePolicy::from_text(&text)
}

fn model_with_policy(cfg: &RunConfig, policy: RoutePolicy) -> Result<InterferenceModel> {
    let mut model = InterferenceModel::mnist(&cfg.labels, cfg.rates)?;
    if policy.shape() != model.policy.shape() {
        return Err(Error::PolicyFormat(format!(
            "policy shape {:?} does not match the configured geometry {:?}",
            policy.shape(),
            model.policy.shape()
        )));
    }
    model.policy = policy;
    Ok(model)
}

/// Diagnostic tables for the policy in `cfg.policy`, or for a fresh
/// sequential run at `cfg.seed` when none is given.
pub fn cmd_tables(cfg: &RunConfig) -> Result<TablesReport> {
    cfg.validate()?;
    let mnist = cfg.load_mnist()?;
    let test: Vec<RawImage> = cfg.test_split(&mnist).into_iter().cloned().collect();
    let inputs = test_inputs(cfg, &test, cfg.images_per_label);
    cfg.archive()?;

    let mut entropy = Vec::new();
    let model = match &cfg.policy {
        Some(path) => {
            let model = model_with_policy(cfg, load_policy(path)?)?;
            entropy.push((0, learner_entropy(&model, &inputs)));
            model
        }
        None => {
            let spec = cfg.spec(cfg.schedules[0], cfg.seed)?;
            let mut model = InterferenceModel::mnist(&cfg.labels, cfg.rates)?;
            let steps = plan(&spec, &mnist.train)?;
            let per_epoch = steps.len() / cfg.epochs.max(1);
            for (e, chunk) in steps.chunks(per_epoch.max(1)).enumerate() {
                for s in chunk {
                    train_example(&mut model, &cfg.preprocess.signals(&mnist.train[s.image]), s.label)?;
                }
                entropy.push((e + 1, learner_entropy(&model, &inputs)));
            }
            model
        }
    };

    let similarity = similarity_table(&model, &inputs);
    let verdicts: Vec<String> = (0..similarity.rows.len())
        .map(|r| similarity.diagonal_is_row_max(r).to_string())
        .collect();
    cfg.write(
        "similarity.csv",
        &with_column(&similarity.to_csv(4), "own_label_max", &verdicts),
    )?;

    let arrival = arrival_time_table(&model.geometry, &model.policy);
    let verdicts: Vec<String> = (0..arrival.rows.len())
        .map(|r| arrival.diagonal_exceeds_row(r).to_string())
        .collect();
    cfg.write(
        "arrival_time.csv",
        &with_column(&arrival.to_csv(2), "own_policy_slowest", &verdicts),
    )?;

    let mut csv = String::from("epoch,learner,entropy\n");
    for (epoch, values) in &entropy {
        for (label, v) in cfg.labels.iter().zip(values) {
            let v = v.map_or_else(|| "NA".into(), |v| format!("{v:.6}"));
            let _ = writeln!(csv, "{epoch},L{label},{v}");
        }
    }
    cfg.write("entropy.csv", &csv)?;
    Ok(TablesReport {
        similarity,
        arrival,
        entropy,
    })
}

fn with_column(csv: &str, name: &str, values: &[String]) -> String {
    let mut lines = csv.lines();
    let mut out = format!("{},{name}\n", lines.next().unwrap_or_default());
    for (line, v) in lines.zip(values) {
        let _ = writeln!(out, "{line},{v}");
    }
    out
}

/// Reference double-slit accuracy and the floor the band check uses.
pub const DOUBLE_SLIT_REFERENCE: f64 = 0.97;
pub const DOUBLE_SLIT_FLOOR: f64 = 0.90;

pub fn cmd_double_slit(cfg: &RunConfig) -> Result<DoubleSlitReport> {
    let report = run_double_slit(&cfg.double_slit)?;
    cfg.archive()?;
    cfg.write("double_slit_episodes.csv", &report.to_csv())?;
    let band = if report.accuracy >= DOUBLE_SLIT_FLOOR {
        "PASS"
    } else {
        "WARN"
    };
    let summary = format!(
        "episodes,accuracy,swapped_accuracy,resets,reference,band\n{},{:.4},{:.4},{},{DOUBLE_SLIT_REFERENCE:.2},{band}\n",
        report.episodes.len(),
        report.accuracy,
        report.swapped_accuracy,
        report.resets
    );
    cfg.write("double_slit.csv", &summary)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanfieldReport {
    /// `(n_bar, gain, hysteresis area)` per curve.
    pub curves: Vec<(f64, f64, f64)>,
    pub critical_n_bar: f64,
}

pub fn cmd_meanfield(cfg: &RunConfig) -> Result<MeanfieldReport> {
    let m = &cfg.meanfield;
    let grid = linspace_step(m.b_min, m.b_max, m.b_step);
    if grid.is_empty() || m.n_bars.is_empty() {
        return Err(Error::Config(
            "mean-field field grid and n_bar list must be non-empty".into(),
        ));
    }
    let transition = linspace_step(m.transition_min, m.transition_max, m.transition_step);
    let critical_n_bar = transition_check(m.beta, m.coupling, &transition)?;
    cfg.archive()?;
    let mut curves = Vec::new();
    for &n_bar in &m.n_bars {
        let c = hysteresis_curves(m.beta, n_bar, m.coupling, &grid)?;
        cfg.write(&format!("meanfield_nbar_{n_bar:.3}.csv"), &curves_csv(&c))?;
        curves.push((n_bar, m.beta * n_bar * m.coupling, hysteresis_area(&c)));
    }
    let mut csv = String::from("n_bar,gain,hysteresis_area\n");
    for (n, g, a) in &curves {
        let _ = writeln!(csv, "{n:.6},{g:.6},{a:.9}");
    }
    let _ = writeln!(csv, "# critical_n_bar={critical_n_bar:.6}");
    cfg.write("meanfield_summary.csv", &csv)?;
    Ok(MeanfieldReport { curves, critical_n_bar })
}

/// Per route row: grid position, target label, feasible mass, mean duration
/// and the most likely duration.
pub fn policy_summary_csv(model: &InterferenceModel) -> String {
    let g = &model.geometry;
    let mut out = String::from("source,row,col,label,feasible_mass,mean_duration,mode_duration\n");
    for s in 0..g.num_sources() {
        for (y, site) in g.targets().iter().enumerate() {
            let row = model.policy.row(s, y);
            let mean: f64 = row.iter().enumerate().map(|(d, p)| d as f64 * p).sum();
            let mode = crate::engine::argmax_first(row);
            let c = g.sources()[s];
            let _ = writeln!(
                out,
                "{s},{},{},{},{:.9},{mean:.6},{mode}",
                c.row,
                c.col,
                site.label,
                model.policy.feasible_mass(g, s, y)
            );
        }
    }
    out
}

pub fn cmd_policy_dump(cfg: &RunConfig) -> Result<String> {
    let path = cfg
        .policy
        .as_ref()
        .ok_or_else(|| Error::Config("policy-dump needs a policy file".into()))?;
    let policy = load_policy(path)?;
    let checksum = policy.checksum();
    let model = model_with_policy(cfg, policy)?;
    let body = format!("# policy_checksum={checksum}\n{}", policy_summary_csv(&model));
    cfg.write("policy_dump.csv", &body)?;
    Ok(body)
}

//! Few-shot sampling, presentation schedules and training runs.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Preprocess, Signal};
use crate::engine::InterferenceModel;
use crate::error::{Error, Result};
use crate::mnist::RawImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Class blocks of `K` in label order.
    Sequential,
    /// The same examples shuffled, reshuffled every epoch.
    Mixed,
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Schedule::Sequential => "sequential",
            Schedule::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotSpec {
    pub classes: Vec<u8>,
    pub shots: usize,
    pub epochs: usize,
    pub schedule: Schedule,
    pub seed: u64,
}

impl FewShotSpec {
    pub fn new(classes: Vec<u8>, shots: usize, epochs: usize, schedule: Schedule, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if classes.is_empty() {
            return Err(Error::Config("at least one class is required".into()));
        }
        Ok(Self {
            classes,
            shots,
            epochs,
            schedule,
            seed,
        })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// One presentation: index into the training split and its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub image: usize,
    pub label: u8,
}

/// Draws `K` distinct training images per class, classes in the given order.
pub fn sample_pool(spec: &FewShotSpec, train: &[RawImage], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    spec.classes
        .iter()
        .map(|&class| {
            let members: Vec<usize> = train
                .iter()
                .enumerate()
                .filter(|(_, img)| img.label == class)
                .map(|(i, _)| i)
                .collect();
            if members.len() < spec.shots {
                return Err(Error::Sampling(format!(
                    "class {class} has {} training images, {} requested",
                    members.len(),
                    spec.shots
                )));
            }
            Ok(index::sample(rng, members.len(), spec.shots)
                .into_iter()
                .map(|i| members[i])
                .collect())
        })
        .collect()
}

pub fn build_schedule(spec: &FewShotSpec, pool: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Vec<Step> {
    let base: Vec<Step> = spec
        .classes
        .iter()
        .zip(pool)
        .flat_map(|(&label, images)| images.iter().map(move |&image| Step { image, label }))
        .collect();
    let mut out = Vec::with_capacity(base.len() * spec.epochs);
    for _ in 0..spec.epochs {
        let mut epoch = base.clone();
        if spec.schedule == Schedule::Mixed {
            epoch.shuffle(rng);
        }
        out.extend(epoch);
    }
    out
}

/// Samples the pool and lays out the schedule from one seeded stream, so the
/// sequential and mixed variants of a seed see the same images.
pub fn plan(spec: &FewShotSpec, train: &[RawImage]) -> Result<Vec<Step>> {
    let mut rng = spec.rng();
    let pool = sample_pool(spec, train, &mut rng)?;
    Ok(build_schedule(spec, &pool, &mut rng))
}

/// One training row: step number, label, the true label's goal after the
/// update, and the policy digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub label: u8,
    pub j_true: f64,
    pub checksum: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
    /// Rows that collapsed and were reset during the run.
    pub resets: usize,
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,label,j_true,policy_checksum\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.6},{}\n", r.step, r.label, r.j_true, r.checksum));
        }
        out
    }
}

pub fn train_example(model: &mut InterferenceModel, signals: &[Signal], label: u8) -> Result<usize> {
    let target = model
        .geometry
        .target_index(label)
        .ok_or_else(|| Error::Config(format!("label {label} has no target")))?;
    Ok(model.train_episode(signals, target).reset_rows.len())
}

pub fn train_run(
    model: &mut InterferenceModel,
    spec: &FewShotSpec,
    train: &[RawImage],
    preprocess: &Preprocess,
) -> Result<RunLog> {
    let mut log = RunLog::default();
    for (step, s) in plan(spec, train)?.into_iter().enumerate() {
        let signals = preprocess.signals(&train[s.image]);
        log.resets += train_example(model, &signals, s.label)?;
        let target = model.geometry.target_index(s.label).expect("checked in train_example");
        log.rows.push(LogRow {
            step,
            label: s.label,
            j_true: model.goal(&signals, target).goal,
            checksum: model.policy.checksum(),
        });
    }
    Ok(log)
}

/// Accuracy over the test images whose label is one of `labels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub labels: Vec<u8>,
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`, indexed like `labels`.
    pub confusion: Vec<Vec<usize>>,
}

impl Accuracy {
    pub fn new(labels: &[u8]) -> Self {
        Self {
            labels: labels.to_vec(),
            correct: 0,
            total: 0,
            confusion: vec![vec![0; labels.len()]; labels.len()],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.total += 1;
        self.correct += usize::from(truth == predicted);
        self.confusion[truth][predicted] += 1;
    }

    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn class_accuracy(&self, class: usize) -> f64 {
        let row = &self.confusion[class];
        let n: usize = row.iter().sum();
        if n == 0 {
            0.0
        } else {
            row[class] as f64 / n as f64
        }
    }
}

pub fn evaluate(model: &InterferenceModel, test: &[RawImage], preprocess: &Preprocess) -> Accuracy {
    let labels = model.geometry.labels();
    let mut acc = Accuracy::new(&labels);
    for img in test {
        let Some(truth) = labels.iter().position(|&l| l == img.label) else {
            continue;
        };
        acc.record(truth, model.predict(&preprocess.signals(img)).target);
    }
    acc
}

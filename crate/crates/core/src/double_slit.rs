//! Two rotating unit vectors, in phase or in antiphase, classified by the
//! same route learners as the digit task.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Dipole, Signal, TargetField};
use crate::engine::InterferenceModel;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, GridCoord, SpacetimeConfig, TargetSite};
use crate::policy::LearningRates;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatingSource {
    pub position: GridCoord,
    pub phase: f64,
    /// Radians per timestamp.
    pub omega: f64,
    /// Half-width of the uniform phase jitter drawn per emission.
    pub noise: f64,
}

/// `(0, sin phi, cos phi)` with `phi = omega * tau + phase + eps`.
pub fn emit_wave(src: &RotatingSource, source: usize, tau: u32, rng: &mut impl Rng) -> Signal {
    let eps = if src.noise > 0.0 {
        rng.random_range(-src.noise..src.noise)
    } else {
        0.0
    };
    let phi = src.omega * f64::from(tau) + src.phase + eps;
    Signal {
        dipole: Dipole::new(vec![0.0, phi.sin(), phi.cos()])
            .normalized()
            .expect("unit circle"),
        source,
        emit_time: tau,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoubleSlitConfig {
    pub sources: [GridCoord; 2],
    pub targets: [GridCoord; 2],
    pub omega: f64,
    /// Emission timestamps `0..emit_len`.
    pub emit_len: u32,
    pub horizon: u32,
    pub noise: f64,
    pub train_per_class: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub rates: LearningRates,
}

impl Default for DoubleSlitConfig {
    fn default() -> Self {
        Self {
            sources: [GridCoord::new(0, 0), GridCoord::new(0, 4)],
            targets: [GridCoord::new(2, -2), GridCoord::new(2, 6)],
            omega: 2.0 * PI / 8.0,
            emit_len: 16,
            horizon: 24,
            noise: 0.1,
            train_per_class: 20,
            eval_episodes: 200,
            seed: 0,
            rates: LearningRates::default(),
        }
    }
}

/// Class 0 keeps both sources in phase, class 1 shifts the second by pi.
pub const CLASS_PHASES: [[f64; 2]; 2] = [[0.0, 0.0], [0.0, PI]];

impl DoubleSlitConfig {
    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if self.emit_len == 0 || self.emit_len > self.horizon + 1 {
            return Err(Error::Config(format!(
                "emission length {} must lie in 1..={}",
                self.emit_len,
                self.horizon + 1
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !self.omega.is_finite() {
            return Err(Error::Config(
                "noise must be a non-negative number and omega finite".into(),
            ));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("at least one evaluation episode is required".into()));
        }
        Ok(())
    }

    pub fn source(&self, class: usize, i: usize) -> RotatingSource {
        RotatingSource {
            position: self.sources[i],
            phase: CLASS_PHASES[class][i],
            omega: self.omega,
            noise: self.noise,
        }
    }

    /// Both hosts share the field `(0, 0, 1)`.
    pub fn model(&self) -> Result<InterferenceModel> {
        let targets: Vec<TargetSite> = self
            .targets
            .iter()
            .enumerate()
            .map(|(i, &coord)| TargetSite { label: i as u8, coord })
            .collect();
        let geometry = Geometry::new(
            self.sources.to_vec(),
            targets.clone(),
            SpacetimeConfig::new(self.horizon, 1)?,
        )?;
        let fields = targets
            .into_iter()
            .map(|site| TargetField {
                dipole: Dipole::new(vec![0.0, 0.0, 1.0]),
                site,
            })
            .collect();
        Ok(InterferenceModel::new(geometry, fields, self.rates))
    }

    /// One noisy episode of `class`: both sources emit at every `tau < emit_len`.
    pub fn episode(&self, class: usize, rng: &mut impl Rng) -> Vec<Signal> {
        let mut out = Vec::with_capacity(2 * self.emit_len as usize);
        for i in 0..2 {
            let src = self.source(class, i);
            out.extend((0..self.emit_len).map(|tau| emit_wave(&src, i, tau, rng)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub class: usize,
    pub goals: [f64; 2],
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleSlitReport {
    pub accuracy: f64,
    pub swapped_accuracy: f64,
    pub episodes: Vec<EpisodeRecord>,
    pub resets: usize,
}

impl DoubleSlitReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,class,j0,j1,predicted\n");
        for (i, e) in self.episodes.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{:.9},{:.9},{}\n",
                e.class, e.goals[0], e.goals[1], e.predicted
            ));
        }
        out
    }
}

/// Trains each class learner on `train_per_class` episodes of its own class
/// (class 0 first), then scores alternating held-out episodes.
pub fn run_double_slit(cfg: &DoubleSlitConfig) -> Result<DoubleSlitReport> {
    cfg.validate()?;
    let mut model = cfg.model()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut resets = 0;
    for class in 0..2 {
        for _ in 0..cfg.train_per_class {
            let signals = cfg.episode(class, &mut rng);
            resets += model.train_episode(&signals, class).reset_rows.len();
        }
    }
    let episodes: Vec<EpisodeRecord> = (0..cfg.eval_episodes)
        .map(|i| {
            let class = i % 2;
            let p = model.predict(&cfg.episode(class, &mut rng));
            EpisodeRecord {
                class,
                goals: [p.goals[0], p.goals[1]],
                predicted: p.target,
            }
        })
        .collect();
    let n = episodes.len() as f64;
    let correct = episodes.iter().filter(|e| e.predicted == e.class).count() as f64;
    let swapped = episodes.iter().filter(|e| e.predicted == 1 - e.class).count() as f64;
    Ok(DoubleSlitReport {
        accuracy: correct / n,
        swapped_accuracy: swapped / n,
        episodes,
        resets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quiet(phase: f64) -> RotatingSource {
        RotatingSource {
            position: GridCoord::new(0, 0),
            phase,
            omega: 1.0,
            noise: 0.0,
        }
    }

    #[test]
    fn wave_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = Dipole::new(vec![0.0, 0.0, 1.0]);
        let a = emit_wave(&quiet(0.0), 0, 0, &mut rng);
        assert_eq!(a.dipole.components(), &[0.0, 0.0, 1.0]);
        assert_eq!(a.dipole.dot(&g), 1.0);
        let b = emit_wave(&quiet(PI), 0, 0, &mut rng);
        assert!((b.dipole.dot(&g) + 1.0).abs() < 1e-15);

        let noisy = RotatingSource {
            noise: 0.1,
            ..quiet(0.0)
        };
        let x = emit_wave(&noisy, 0, 3, &mut rng);
        let y = emit_wave(&noisy, 1, 3, &mut rng);
        // Jitter of at most 0.1 each keeps in-phase pairs within cos(0.2).
        assert!(x.dipole.dot(&y.dipole) >= 0.2f64.cos() - 1e-12);
    }

    #[test]
    fn noiseless_classes_differ_only_in_second_source_sign() {
        let cfg = DoubleSlitConfig {
            noise: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = cfg.episode(0, &mut rng);
        let b = cfg.episode(1, &mut rng);
        let l = cfg.emit_len as usize;
        for i in 0..2 * l {
            let sign = if i < l { 1.0 } else { -1.0 };
            for (x, y) in a[i].dipole.components().iter().zip(b[i].dipole.components()) {
                assert!((x - sign * y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn static_noiseless_sources_are_separable() {
        let cfg = DoubleSlitConfig {
            noise: 0.0,
            omega: 0.0,
            eval_episodes: 20,
            ..Default::default()
        };
        assert_eq!(run_double_slit(&cfg).unwrap().accuracy, 1.0);
    }

    #[test]
    fn swapped_labels_complement() {
        let cfg = DoubleSlitConfig {
            eval_episodes: 40,
            train_per_class: 5,
            ..Default::default()
        };
        let r = run_double_slit(&cfg).unwrap();
        assert!((r.accuracy + r.swapped_accuracy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_errors() {
        let bad = DoubleSlitConfig {
            emit_len: 0,
            ..Default::default()
        };
        assert!(run_double_slit(&bad).is_err());
        let bad = DoubleSlitConfig {
            noise: -1.0,
            ..Default::default()
        };
        assert!(run_double_slit(&bad).is_err());
    }

    proptest! {
        #[test]
        fn emitted_waves_are_unit(phase in -10.0f64..10.0, omega in -3.0f64..3.0, noise in 0.0f64..1.0, tau in 0u32..30, seed in any::<u64>()) {
            let src = RotatingSource { position: GridCoord::new(0, 0), phase, omega, noise };
            let s = emit_wave(&src, 0, tau, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!((s.dipole.norm() - 1.0).abs() < 1e-12);
            prop_assert_eq!(s.dipole.components()[0], 0.0);
        }
    }
}
